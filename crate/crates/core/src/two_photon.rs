//! Two-photon transport through the dynamically coupled mode pair: the
//! driven two-photon amplitudes, the two-time rows that carry the field
//! correlations, assembly of the symmetric output field xi_out(tau, t), and
//! the occupation probabilities of every photon-number sector.
//!
//! The output field for tau <= t is
//!   xi_out(tau, t) = xi_in(tau) xi_in(t)
//!                    - sqrt(gamma/2) [ R10(tau, t) + psi10(tau) xi_in(t) ]
//! where R10 is the response row born at tau with initial conditions
//!   a(tau) = psi10(tau) xi_in(tau) - sqrt(2 gamma) psi20(tau)
//!   b(tau) = psi01(tau) xi_in(tau) - sqrt(gamma)   psi11(tau)
//! and driven by c(tau) sqrt(gamma) xi_in(t) with
//!   c(tau) = sqrt(2) xi_in(tau) - sqrt(gamma) psi10(tau).
//! A single sweep in tau keeps every live row as two complex numbers, so the
//! full field costs O(n^2) updates and O(n) memory unless matrix retention
//! is requested.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{trapezoid_weight, SampledSignal, TimeGrid, C64};
use crate::linear::{check_step, midpoint_samples};
use crate::nonlinear::NonlinearTerms;
use crate::synthesis::ControlSolution;

/// Instantaneous two-photon state: the driven pair (psi10, psi01) and the
/// doubly occupied amplitudes [psi20, psi11, psi02, psi001].
#[derive(Debug, Clone, Copy)]
pub struct TwoPhotonState {
    pub pair: [C64; 2],
    pub doubles: [C64; 4],
}

impl TwoPhotonState {
    pub fn vacuum() -> Self {
        TwoPhotonState { pair: [C64::new(0.0, 0.0); 2], doubles: [C64::new(0.0, 0.0); 4] }
    }
}

/// Histories of the driven-pair and doubly occupied amplitudes.
#[derive(Debug, Clone)]
pub struct TwoPhotonAmplitudes {
    pub grid: TimeGrid,
    pub psi10: SampledSignal,
    pub psi01: SampledSignal,
    pub psi20: SampledSignal,
    pub psi11: SampledSignal,
    pub psi02: SampledSignal,
    pub psi001: SampledSignal,
}

impl TwoPhotonAmplitudes {
    pub fn state_at(&self, k: usize) -> TwoPhotonState {
        TwoPhotonState {
            pair: [self.psi10.values[k], self.psi01.values[k]],
            doubles: [
                self.psi20.values[k],
                self.psi11.values[k],
                self.psi02.values[k],
                self.psi001.values[k],
            ],
        }
    }
}

struct EngineCoeffs {
    sqrt_g: f64,
    sqrt_2g: f64,
    xpm: f64,
    ca: C64,
    cb: C64,
    c20: C64,
    c11: C64,
    c02: C64,
    c001: C64,
    chi2: f64,
}

fn engine_coeffs(run: &RunConfig, terms: &NonlinearTerms) -> EngineCoeffs {
    let rates = run.system.rates(run.tau_g);
    let big_g = rates.big_gamma();
    let gl = rates.gamma_l;
    EngineCoeffs {
        sqrt_g: rates.gamma.sqrt(),
        sqrt_2g: (2.0 * rates.gamma).sqrt(),
        xpm: rates.xpm_per_photon(),
        ca: C64::new(-0.5 * big_g, -rates.delta_a),
        cb: C64::new(-0.5 * gl, -rates.delta_b),
        c20: C64::new(-big_g, -(2.0 * rates.delta_a + terms.shift_20)),
        c11: C64::new(-0.5 * (big_g + gl), -(rates.delta_a + rates.delta_b + terms.shift_11)),
        c02: C64::new(-gl, -(2.0 * rates.delta_b + terms.shift_02)),
        c001: C64::new(-0.5 * gl, -rates.delta_c),
        chi2: terms.shg_chi2,
    }
}

/// Six coupled amplitudes: [psi10, psi01, psi20, psi11, psi02, psi001].
fn amp_deriv(co: &EngineCoeffs, s: &[C64; 6], lam: C64, xi: C64) -> [C64; 6] {
    let i = C64::i();
    let mag = lam.norm();
    let shift1 = C64::new(0.0, -co.xpm * mag);
    let shift2 = C64::new(0.0, -2.0 * co.xpm * mag);
    let rt2 = std::f64::consts::SQRT_2;
    [
        (co.ca + shift1) * s[0] - i * lam.conj() * s[1] + xi * co.sqrt_2g,
        (co.cb + shift1) * s[1] - i * lam * s[0],
        (co.c20 + shift2) * s[2] - i * rt2 * lam.conj() * s[3] + s[0] * xi * co.sqrt_2g,
        (co.c11 + shift2) * s[3] - i * rt2 * (lam * s[2] + lam.conj() * s[4]) + s[1] * xi * co.sqrt_g,
        (co.c02 + shift2) * s[4] - i * rt2 * lam * s[3] - i * rt2 * co.chi2 * s[5],
        co.c001 * s[5] - i * rt2 * co.chi2 * s[4],
    ]
}

/// Response row: two amplitudes driven like a single photon.
fn row_deriv(co: &EngineCoeffs, r: [C64; 2], lam: C64, drive: C64) -> [C64; 2] {
    let i = C64::i();
    let shift = C64::new(0.0, -co.xpm * lam.norm());
    [
        (co.ca + shift) * r[0] - i * lam.conj() * r[1] + drive,
        (co.cb + shift) * r[1] - i * lam * r[0],
    ]
}

fn rk4_amplitudes(
    co: &EngineCoeffs,
    state0: &TwoPhotonState,
    xi: &[C64],
    xi_mid: &[C64],
    lam: &[C64],
    lam_mid: &[C64],
    dt: f64,
) -> Vec<[C64; 6]> {
    let n = xi.len();
    let mut out = Vec::with_capacity(n);
    let mut s = [
        state0.pair[0],
        state0.pair[1],
        state0.doubles[0],
        state0.doubles[1],
        state0.doubles[2],
        state0.doubles[3],
    ];
    out.push(s);
    for k in 0..n - 1 {
        let k1 = amp_deriv(co, &s, lam[k], xi[k]);
        let mut s2 = s;
        for m in 0..6 {
            s2[m] += k1[m] * (0.5 * dt);
        }
        let k2 = amp_deriv(co, &s2, lam_mid[k], xi_mid[k]);
        let mut s3 = s;
        for m in 0..6 {
            s3[m] += k2[m] * (0.5 * dt);
        }
        let k3 = amp_deriv(co, &s3, lam_mid[k], xi_mid[k]);
        let mut s4 = s;
        for m in 0..6 {
            s4[m] += k3[m] * dt;
        }
        let k4 = amp_deriv(co, &s4, lam[k + 1], xi[k + 1]);
        for m in 0..6 {
            s[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
        }
        out.push(s);
    }
    out
}

fn amplitudes_from_raw(grid: &TimeGrid, raw: Vec<[C64; 6]>) -> TwoPhotonAmplitudes {
    let pick = |i: usize| {
        SampledSignal::new(grid.clone(), raw.iter().map(|s| s[i]).collect::<Vec<C64>>())
    };
    TwoPhotonAmplitudes {
        grid: grid.clone(),
        psi10: pick(0),
        psi01: pick(1),
        psi20: pick(2),
        psi11: pick(3),
        psi02: pick(4),
        psi001: pick(5),
    }
}

/// Drive a two-photon wavepacket into the mode pair from vacuum and return
/// the amplitude histories.
pub fn propagate_pair_driven(
    xi_in: &SampledSignal,
    control: &ControlSolution,
    run: &RunConfig,
    terms: &NonlinearTerms,
) -> Result<TwoPhotonAmplitudes> {
    propagate_pair_from(&TwoPhotonState::vacuum(), Some(xi_in), control, run, terms)
}

/// Same as [`propagate_pair_driven`] but from an arbitrary initial state and
/// optionally without input drive (storage/emission segments).
pub fn propagate_pair_from(
    state0: &TwoPhotonState,
    xi_in: Option<&SampledSignal>,
    control: &ControlSolution,
    run: &RunConfig,
    terms: &NonlinearTerms,
) -> Result<TwoPhotonAmplitudes> {
    let rates = run.system.rates(run.tau_g);
    let grid = control.combined.grid.clone();
    check_step(&rates, grid.dt)?;
    if let Some(x) = xi_in {
        if x.grid != grid {
            return Err(Error::Config("input and control sampled on different grids".into()));
        }
    }
    let zeros;
    let (xi, xi_mid) = match xi_in {
        Some(x) => (x.values.clone(), midpoint_samples(x)),
        None => {
            zeros = vec![C64::new(0.0, 0.0); grid.n_points];
            (zeros.clone(), vec![C64::new(0.0, 0.0); grid.n_points.saturating_sub(1)])
        }
    };
    let lam_mid = midpoint_samples(&control.combined);
    let co = engine_coeffs(run, terms);
    let raw = rk4_amplitudes(&co, state0, &xi, &xi_mid, &control.combined.values, &lam_mid, grid.dt);
    if raw.last().unwrap().iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Numeric("non-finite amplitude in two-photon propagation".into()));
    }
    Ok(amplitudes_from_raw(&grid, raw))
}

/// A two-time response row born at grid index `tau_index`. `r10[m]` holds
/// the input-mode amplitude at grid index `tau_index + m`.
#[derive(Debug, Clone)]
pub struct TwoTimeRow {
    pub tau_index: usize,
    pub r10: Vec<C64>,
    pub r01: Vec<C64>,
}

/// Propagate one response row from `tau_index` to the end of the grid with
/// initial conditions `ic` and drive `drive_coeff * sqrt(gamma) * xi_in(t)`.
/// The canonical rows are ic = (1,0) or (0,1) with zero drive, and (0,0)
/// with unit drive.
pub fn propagate_two_time(
    tau_index: usize,
    ic: [C64; 2],
    drive_coeff: C64,
    xi_in: &SampledSignal,
    control: &ControlSolution,
    run: &RunConfig,
    terms: &NonlinearTerms,
) -> Result<TwoTimeRow> {
    let rates = run.system.rates(run.tau_g);
    let grid = &control.combined.grid;
    check_step(&rates, grid.dt)?;
    let n = grid.n_points;
    if tau_index >= n {
        return Err(Error::Config(format!("row index {tau_index} outside grid of {n} points")));
    }
    let co = engine_coeffs(run, terms);
    let lam = &control.combined.values;
    let lam_mid = midpoint_samples(&control.combined);
    let xi_mid = midpoint_samples(xi_in);
    let dt = grid.dt;
    let dc = drive_coeff * co.sqrt_g;

    let mut r10 = Vec::with_capacity(n - tau_index);
    let mut r01 = Vec::with_capacity(n - tau_index);
    let mut r = ic;
    r10.push(r[0]);
    r01.push(r[1]);
    for k in tau_index..n - 1 {
        let k1 = row_deriv(&co, r, lam[k], dc * xi_in.values[k]);
        let r2 = [r[0] + k1[0] * (0.5 * dt), r[1] + k1[1] * (0.5 * dt)];
        let k2 = row_deriv(&co, r2, lam_mid[k], dc * xi_mid[k]);
        let r3 = [r[0] + k2[0] * (0.5 * dt), r[1] + k2[1] * (0.5 * dt)];
        let k3 = row_deriv(&co, r3, lam_mid[k], dc * xi_mid[k]);
        let r4 = [r[0] + k3[0] * dt, r[1] + k3[1] * dt];
        let k4 = row_deriv(&co, r4, lam[k + 1], dc * xi_in.values[k + 1]);
        for m in 0..2 {
            r[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
        }
        r10.push(r[0]);
        r01.push(r[1]);
    }
    Ok(TwoTimeRow { tau_index, r10, r01 })
}

/// Initial conditions and drive coefficient of the combined response row
/// born at grid index `j`: (a, b) and c as in the module docs.
pub fn combined_row_coefficients(
    amps: &TwoPhotonAmplitudes,
    xi_in: &SampledSignal,
    run: &RunConfig,
    j: usize,
) -> ([C64; 2], C64) {
    let rates = run.system.rates(run.tau_g);
    let sqrt_g = rates.gamma.sqrt();
    let sqrt_2g = (2.0 * rates.gamma).sqrt();
    let xi = xi_in.values[j];
    let a = amps.psi10.values[j] * xi - amps.psi20.values[j] * sqrt_2g;
    let b = amps.psi01.values[j] * xi - amps.psi11.values[j] * sqrt_g;
    let c = xi * std::f64::consts::SQRT_2 - amps.psi10.values[j] * sqrt_g;
    ([a, b], c)
}

/// Symmetric two-photon output field on the lower triangle tau <= t.
#[derive(Debug, Clone)]
pub struct TwoPhotonMatrix {
    pub n: usize,
    pub dt: f64,
    data: Vec<C64>,
}

impl TwoPhotonMatrix {
    fn with_capacity(n: usize, dt: f64) -> Self {
        TwoPhotonMatrix { n, dt, data: Vec::with_capacity(n * (n + 1) / 2) }
    }

    /// xi_out at (grid index j, grid index k), either order.
    pub fn get(&self, j: usize, k: usize) -> C64 {
        let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
        self.data[hi * (hi + 1) / 2 + lo]
    }
}

/// Assemble the symmetric output field from independently propagated
/// combined rows (one per grid index, in order). Verification path for the
/// streaming engine.
pub fn assemble_output(
    amps: &TwoPhotonAmplitudes,
    rows: &[TwoTimeRow],
    xi_in: &SampledSignal,
    run: &RunConfig,
) -> Result<TwoPhotonMatrix> {
    let n = amps.grid.n_points;
    if rows.len() != n {
        return Err(Error::Config(format!("need {n} rows, got {}", rows.len())));
    }
    let rates = run.system.rates(run.tau_g);
    let lead = (0.5 * rates.gamma).sqrt();
    let mut m = TwoPhotonMatrix::with_capacity(n, amps.grid.dt);
    for k in 0..n {
        for j in 0..=k {
            let row = &rows[j];
            let val = xi_in.values[j] * xi_in.values[k]
                - (row.r10[k - j] + amps.psi10.values[j] * xi_in.values[k]) * lead;
            m.data.push(val);
        }
    }
    Ok(m)
}

/// Full two-photon transport result: occupation probabilities of every
/// sector over time, the output-field diagonal, the amplitude histories, and
/// (optionally) the full output matrix.
#[derive(Debug, Clone)]
pub struct TwoPhotonField {
    pub grid: TimeGrid,
    /// Cumulative input energy fraction.
    pub u: Vec<f64>,
    pub p00: Vec<f64>,
    pub p10: Vec<f64>,
    pub p01: Vec<f64>,
    pub p20: Vec<f64>,
    pub p11: Vec<f64>,
    pub p02: Vec<f64>,
    pub p001: Vec<f64>,
    /// xi_out(t, t).
    pub diag: Vec<C64>,
    pub amplitudes: TwoPhotonAmplitudes,
    pub xi_out: Option<TwoPhotonMatrix>,
}

impl TwoPhotonField {
    /// Sum of all sector probabilities at grid index k (1 when lossless).
    pub fn total(&self, k: usize) -> f64 {
        self.p00[k] + self.p10[k] + self.p01[k] + self.p20[k] + self.p11[k] + self.p02[k]
            + self.p001[k]
    }
}

struct LiveRow {
    r: [C64; 2],
    c: C64,
}

/// Stream the full two-photon transport in a single sweep: amplitudes, one
/// live response row per elapsed grid index, probability traces, and the
/// output matrix when `keep_matrix` is set.
pub fn propagate_two_photon(
    xi_in: &SampledSignal,
    control: &ControlSolution,
    run: &RunConfig,
    terms: &NonlinearTerms,
    keep_matrix: bool,
) -> Result<TwoPhotonField> {
    let rates = run.system.rates(run.tau_g);
    let grid = xi_in.grid.clone();
    if control.combined.grid != grid {
        return Err(Error::Config("input and control sampled on different grids".into()));
    }
    let dt = grid.dt;
    check_step(&rates, dt)?;
    let n = grid.n_points;
    let co = engine_coeffs(run, terms);
    let lam = &control.combined.values;
    let lam_mid = midpoint_samples(&control.combined);
    let xi = &xi_in.values;
    let xi_mid = midpoint_samples(xi_in);

    // Amplitudes first: row births read them at their own birth index.
    let raw = rk4_amplitudes(&co, &TwoPhotonState::vacuum(), xi, &xi_mid, lam, &lam_mid, dt);
    if raw.last().unwrap().iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Numeric("non-finite amplitude in two-photon propagation".into()));
    }

    let lead = (0.5 * rates.gamma).sqrt();
    let sqrt_g = co.sqrt_g;
    let sqrt_2g = co.sqrt_2g;
    let rt2 = std::f64::consts::SQRT_2;

    let mut rows: Vec<LiveRow> = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut p00 = Vec::with_capacity(n);
    let mut p10 = Vec::with_capacity(n);
    let mut p01 = Vec::with_capacity(n);
    let mut p20 = Vec::with_capacity(n);
    let mut p11 = Vec::with_capacity(n);
    let mut p02 = Vec::with_capacity(n);
    let mut p001 = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut matrix = keep_matrix.then(|| TwoPhotonMatrix::with_capacity(n, dt));

    let mut u_acc = 0.0;
    let mut cpass = 0.0; // int |sqrt(2) xi - sqrt(g) psi10|^2 dtau
    let mut e_acc = 0.0; // double integral of |xi_out|^2 over [0,t]^2
    let mut halfrow_prev = 0.0;

    for k in 0..n {
        let s = &raw[k];
        // Birth of the row at tau = t_k.
        let a = s[0] * xi[k] - s[2] * sqrt_2g;
        let b = s[1] * xi[k] - s[3] * sqrt_g;
        let c = xi[k] * rt2 - s[0] * sqrt_g;
        rows.push(LiveRow { r: [a, b], c });

        // Cumulative input energy and pass-through source (trapezoid).
        if k > 0 {
            u_acc += 0.5 * dt * (xi[k].norm_sqr() + xi[k - 1].norm_sqr());
            let c_prev = rows[k - 1].c;
            cpass += 0.5 * dt * (c.norm_sqr() + c_prev.norm_sqr());
        }
        u.push(u_acc);

        // Row-resolved quantities at this instant.
        let mut halfrow = 0.0;
        let mut int_r10 = 0.0;
        let mut int_r01 = 0.0;
        for (j, row) in rows.iter().enumerate() {
            let w = trapezoid_weight(j, k + 1, dt);
            let out = xi[j] * xi[k] - (row.r[0] + raw[j][0] * xi[k]) * lead;
            halfrow += w * out.norm_sqr();
            int_r10 += w * row.r[0].norm_sqr();
            int_r01 += w * row.r[1].norm_sqr();
            if let Some(m) = matrix.as_mut() {
                m.data.push(out);
            }
            if j == k {
                diag.push(out);
            }
        }
        if k > 0 {
            e_acc += dt * (halfrow + halfrow_prev);
        }
        halfrow_prev = halfrow;

        let remain = 1.0 - u_acc;
        p00.push(remain * remain + remain * cpass + e_acc);
        p10.push(s[0].norm_sqr() * remain + int_r10);
        p01.push(s[1].norm_sqr() * remain + int_r01);
        p20.push(s[2].norm_sqr());
        p11.push(s[3].norm_sqr());
        p02.push(s[4].norm_sqr());
        p001.push(s[5].norm_sqr());

        // Advance every live row to t_{k+1}.
        if k + 1 < n {
            for row in rows.iter_mut() {
                let dc = row.c * sqrt_g;
                let k1 = row_deriv(&co, row.r, lam[k], dc * xi[k]);
                let r2 = [row.r[0] + k1[0] * (0.5 * dt), row.r[1] + k1[1] * (0.5 * dt)];
                let k2 = row_deriv(&co, r2, lam_mid[k], dc * xi_mid[k]);
                let r3 = [row.r[0] + k2[0] * (0.5 * dt), row.r[1] + k2[1] * (0.5 * dt)];
                let k3 = row_deriv(&co, r3, lam_mid[k], dc * xi_mid[k]);
                let r4 = [row.r[0] + k3[0] * dt, row.r[1] + k3[1] * dt];
                let k4 = row_deriv(&co, r4, lam[k + 1], dc * xi[k + 1]);
                for m in 0..2 {
                    row.r[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
                }
            }
        }
    }

    Ok(TwoPhotonField {
        grid: grid.clone(),
        u,
        p00,
        p10,
        p01,
        p20,
        p11,
        p02,
        p001,
        diag,
        amplitudes: amplitudes_from_raw(&grid, raw),
        xi_out: matrix,
    })
}

fn sample_or_zero(sig: &SampledSignal, t: f64) -> C64 {
    if t < sig.grid.t_start - 0.5 * sig.grid.dt || t > sig.grid.t_end() + 0.5 * sig.grid.dt {
        C64::new(0.0, 0.0)
    } else {
        sig.sample(t)
    }
}

/// Overlap of the retained output field with a product target:
/// sqrt(F2) e^{i theta2} = double integral of xi_out(tau, t) conj(target(tau))
/// conj(target(t)). Returns (F2, theta2); the target must be unit-norm.
pub fn two_photon_overlap(field: &TwoPhotonField, target: &SampledSignal) -> Result<(f64, f64)> {
    let m = field
        .xi_out
        .as_ref()
        .ok_or_else(|| Error::Config("two-photon overlap needs matrix retention".into()))?;
    let grid = &field.grid;
    let n = grid.n_points;
    let tgt: Vec<C64> = (0..n).map(|k| sample_or_zero(target, grid.t(k)).conj()).collect();
    let w: Vec<f64> = (0..n).map(|k| trapezoid_weight(k, n, grid.dt)).collect();
    let mut v = C64::new(0.0, 0.0);
    for k in 0..n {
        if tgt[k].norm_sqr() == 0.0 && k > 0 {
            continue;
        }
        let wk = w[k] * tgt[k];
        for j in 0..=k {
            let f = if j == k { 1.0 } else { 2.0 };
            v += m.get(j, k) * tgt[j] * wk * (w[j] * f);
        }
    }
    Ok((v.norm_sqr(), v.arg()))
}

/// Emission-window two-photon release from a stored state with no incident
/// field: integrates amplitudes plus rows and accumulates the product-target
/// overlap directly (no matrix retention). Returns the complex overlap and
/// the final state.
pub fn emission_overlap(
    state0: &TwoPhotonState,
    control: &ControlSolution,
    run: &RunConfig,
    terms: &NonlinearTerms,
    target: &SampledSignal,
) -> Result<(C64, TwoPhotonState)> {
    let rates = run.system.rates(run.tau_g);
    let grid = control.combined.grid.clone();
    let dt = grid.dt;
    check_step(&rates, dt)?;
    let n = grid.n_points;
    let co = engine_coeffs(run, terms);
    let lam = &control.combined.values;
    let lam_mid = midpoint_samples(&control.combined);

    let raw = {
        let zeros = vec![C64::new(0.0, 0.0); n];
        let zeros_mid = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];
        rk4_amplitudes(&co, state0, &zeros, &zeros_mid, lam, &lam_mid, dt)
    };
    if raw.last().unwrap().iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Numeric("non-finite amplitude in emission segment".into()));
    }

    let lead = (0.5 * rates.gamma).sqrt();
    let tgt: Vec<C64> = (0..n).map(|k| sample_or_zero(target, grid.t(k)).conj()).collect();
    let w: Vec<f64> = (0..n).map(|k| trapezoid_weight(k, n, dt)).collect();

    let mut rows: Vec<[C64; 2]> = Vec::with_capacity(n);
    let mut v = C64::new(0.0, 0.0);
    for k in 0..n {
        let s = &raw[k];
        rows.push([-s[2] * co.sqrt_2g, -s[3] * co.sqrt_g]);

        let wk = w[k] * tgt[k];
        for (j, row) in rows.iter().enumerate() {
            let out = -row[0] * lead; // xi_in = 0 on the emission window
            let f = if j == k { 1.0 } else { 2.0 };
            v += out * tgt[j] * wk * (w[j] * f);
        }

        if k + 1 < n {
            for row in rows.iter_mut() {
                let k1 = row_deriv(&co, *row, lam[k], C64::new(0.0, 0.0));
                let r2 = [row[0] + k1[0] * (0.5 * dt), row[1] + k1[1] * (0.5 * dt)];
                let k2 = row_deriv(&co, r2, lam_mid[k], C64::new(0.0, 0.0));
                let r3 = [row[0] + k2[0] * (0.5 * dt), row[1] + k2[1] * (0.5 * dt)];
                let k3 = row_deriv(&co, r3, lam_mid[k], C64::new(0.0, 0.0));
                let r4 = [row[0] + k3[0] * dt, row[1] + k3[1] * dt];
                let k4 = row_deriv(&co, r4, lam[k + 1], C64::new(0.0, 0.0));
                for m in 0..2 {
                    row[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
                }
            }
        }
    }

    let end = raw.last().unwrap();
    Ok((
        v,
        TwoPhotonState { pair: [end[0], end[1]], doubles: [end[2], end[3], end[4], end[5]] },
    ))
}
