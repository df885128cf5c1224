//! Material-specific nonlinear structure: always-on Kerr frequency shifts of
//! doubly occupied states, second-harmonic conversion of the stored photon
//! pair, analytic storage-window bridges for both, and the emitter-coupled
//! stage used by the controlled-phase gate on a host with an embedded
//! two-level system.

use crate::config::{NonlinearityKind, Rates, RunConfig};
use crate::error::Result;
use crate::grid::{SampledSignal, C64};
use crate::linear::{check_step, midpoint_samples};
use crate::synthesis::ControlSolution;

/// Frequency shifts (rad per unit time) picked up by doubly occupied
/// amplitudes, plus the conversion rate between the stored pair and its
/// second harmonic (zero for Kerr-type materials).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearTerms {
    pub shift_20: f64,
    pub shift_11: f64,
    pub shift_02: f64,
    pub shg_chi2: f64,
}

impl NonlinearTerms {
    pub const NONE: NonlinearTerms =
        NonlinearTerms { shift_20: 0.0, shift_11: 0.0, shift_02: 0.0, shg_chi2: 0.0 };
}

/// Self- and cross-Kerr shifts produced by a third-order material of
/// strength `chi3` (absolute rate): half on each doubly occupied single
/// mode, full on the shared occupation.
pub fn chi3_terms(chi3: f64) -> NonlinearTerms {
    NonlinearTerms { shift_20: 0.5 * chi3, shift_11: chi3, shift_02: 0.5 * chi3, shg_chi2: 0.0 }
}

/// Nonlinear terms implied by a rate set, by material kind.
pub fn terms_for(rates: &Rates) -> NonlinearTerms {
    match rates.kind {
        NonlinearityKind::Chi3 => chi3_terms(rates.chi3),
        NonlinearityKind::Chi2Shg => NonlinearTerms { shg_chi2: rates.chi2, ..NonlinearTerms::NONE },
        // A host with an embedded emitter may still carry residual Kerr.
        NonlinearityKind::TwoLevelEmitter => chi3_terms(rates.chi3),
        NonlinearityKind::LinearOnly => NonlinearTerms::NONE,
    }
}

/// Apply exp(A t) to a 2-vector for a constant complex 2x2 matrix A
/// (eigendecomposition; series fallback at degeneracy).
pub fn expm2_apply(a: [[C64; 2]; 2], v: [C64; 2], t: f64) -> [C64; 2] {
    let mean = (a[0][0] + a[1][1]) * 0.5;
    let disc = ((a[0][0] - a[1][1]) * 0.5).powu(2) + a[0][1] * a[1][0];
    let s = disc.sqrt();
    let apply =
        |m: [[C64; 2]; 2], x: [C64; 2]| [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]];
    if s.norm() < 1e-14 * (mean.norm() + 1.0) {
        // Degenerate pair: e^{mt} (I + (A - m I) t).
        let e = (mean * t).exp();
        let b = [[a[0][0] - mean, a[0][1]], [a[1][0], a[1][1] - mean]];
        let bv = apply(b, v);
        return [(v[0] + bv[0] * t) * e, (v[1] + bv[1] * t) * e];
    }
    let lp = mean + s;
    let lm = mean - s;
    let ep = (lp * t).exp();
    let em = (lm * t).exp();
    let denom = lp - lm;
    // exp(At) = e^{l+ t} (A - l- I)/(l+ - l-) + e^{l- t} (l+ I - A)/(l+ - l-)
    let av = apply(a, v);
    let term_p = [(av[0] - lm * v[0]) / denom * ep, (av[1] - lm * v[1]) / denom * ep];
    let term_m = [(lp * v[0] - av[0]) / denom * em, (lp * v[1] - av[1]) / denom * em];
    [term_p[0] + term_m[0], term_p[1] + term_m[1]]
}

/// Analytic storage-window evolution of the single-photon pair of
/// amplitudes (input mode, storage mode): pure decay and detuning rotation.
pub fn storage_bridge_single(state: &mut [C64; 2], rates: &Rates, span: f64) {
    state[0] *= (C64::new(-0.5 * rates.big_gamma(), -rates.delta_a) * span).exp();
    state[1] *= (C64::new(-0.5 * rates.gamma_l, -rates.delta_b) * span).exp();
}

/// Analytic storage-window evolution of the doubly occupied amplitudes
/// [psi20, psi11, psi02, psi001]. Kerr shifts are always on; for a
/// second-harmonic material the stored pair Rabi-oscillates with its
/// harmonic at rate sqrt(2) chi2.
pub fn storage_bridge_doubles(
    state: &mut [C64; 4],
    rates: &Rates,
    terms: &NonlinearTerms,
    span: f64,
) {
    let gl = rates.gamma_l;
    let big_g = rates.big_gamma();
    state[0] *= (C64::new(-big_g, -(2.0 * rates.delta_a + terms.shift_20)) * span).exp();
    state[1] *= (C64::new(
        -0.5 * (big_g + gl),
        -(rates.delta_a + rates.delta_b + terms.shift_11),
    ) * span)
        .exp();
    if terms.shg_chi2 == 0.0 {
        state[2] *= (C64::new(-gl, -(2.0 * rates.delta_b + terms.shift_02)) * span).exp();
        state[3] *= (C64::new(-0.5 * gl, -rates.delta_c) * span).exp();
    } else {
        let i = C64::i();
        let a = [
            [C64::new(-gl, -(2.0 * rates.delta_b + terms.shift_02)), -i * std::f64::consts::SQRT_2 * terms.shg_chi2],
            [-i * std::f64::consts::SQRT_2 * terms.shg_chi2, C64::new(-0.5 * gl, -rates.delta_c)],
        ];
        let out = expm2_apply(a, [state[2], state[3]], span);
        state[2] = out[0];
        state[3] = out[1];
    }
}

/// Pair-and-harmonic amplitudes of a second-harmonic run, in the naming of
/// the three-wave system: two input-mode photons, one each, two stored,
/// one harmonic.
#[derive(Debug, Clone)]
pub struct ShgAmplitudes {
    pub psi200: SampledSignal,
    pub psi110: SampledSignal,
    pub psi020: SampledSignal,
    pub psi001: SampledSignal,
}

/// Drive a two-photon input into a second-harmonic material and return the
/// doubly occupied amplitudes (thin wrapper over the two-photon engine).
pub fn propagate_shg(
    xi_in: &SampledSignal,
    control: &ControlSolution,
    run: &RunConfig,
) -> Result<ShgAmplitudes> {
    let rates = run.system.rates(run.tau_g);
    let terms = NonlinearTerms { shg_chi2: rates.chi2, ..NonlinearTerms::NONE };
    let amps = crate::two_photon::propagate_pair_driven(xi_in, control, run, &terms)?;
    Ok(ShgAmplitudes {
        psi200: amps.psi20,
        psi110: amps.psi11,
        psi020: amps.psi02,
        psi001: amps.psi001,
    })
}

/// Index layout of the emitter-stage amplitudes.
pub const TLE_20G: usize = 0;
pub const TLE_11G: usize = 1;
pub const TLE_02G: usize = 2;
pub const TLE_10E: usize = 3;
pub const TLE_01E: usize = 4;
pub const TLE_10G: usize = 5;
pub const TLE_01G: usize = 6;
pub const TLE_00E: usize = 7;

/// Joint state of the emitter stage: the two-photon sector
/// [20g, 11g, 02g, 10e, 01e] over the storage/auxiliary modes and the
/// single-photon sector [10g, 01g, 00e]. The sectors do not couple; they are
/// integrated together because the gate needs both.
#[derive(Debug, Clone, Copy)]
pub struct TleStageState {
    pub amps: [C64; 8],
}

impl TleStageState {
    pub fn zero() -> Self {
        TleStageState { amps: [C64::new(0.0, 0.0); 8] }
    }

    /// One photon stored, emitter in the ground state.
    pub fn single_loaded() -> Self {
        let mut s = Self::zero();
        s.amps[TLE_10G] = C64::new(1.0, 0.0);
        s
    }

    /// Two photons stored, emitter in the ground state.
    pub fn double_loaded() -> Self {
        let mut s = Self::zero();
        s.amps[TLE_20G] = C64::new(1.0, 0.0);
        s
    }

    /// Population remaining in the storage mode per sector.
    pub fn pb_single(&self) -> f64 {
        self.amps[TLE_10G].norm_sqr()
    }
    pub fn pb_double(&self) -> f64 {
        self.amps[TLE_20G].norm_sqr()
    }

    pub fn norm_single(&self) -> f64 {
        self.amps[TLE_10G].norm_sqr() + self.amps[TLE_01G].norm_sqr() + self.amps[TLE_00E].norm_sqr()
    }
    pub fn norm_double(&self) -> f64 {
        self.amps[TLE_20G].norm_sqr()
            + self.amps[TLE_11G].norm_sqr()
            + self.amps[TLE_02G].norm_sqr()
            + self.amps[TLE_10E].norm_sqr()
            + self.amps[TLE_01E].norm_sqr()
    }
}

/// History of the emitter stage.
#[derive(Debug, Clone)]
pub struct TleStageTrace {
    pub grid: crate::grid::TimeGrid,
    pub states: Vec<TleStageState>,
}

impl TleStageTrace {
    pub fn final_state(&self) -> &TleStageState {
        self.states.last().unwrap()
    }
}

fn tle_deriv(s: &[C64; 8], pi: C64, rates: &Rates, chi3: f64) -> [C64; 8] {
    let i = C64::i();
    let rt2 = std::f64::consts::SQRT_2;
    let mag = pi.norm();
    let g = rates.g_tle;
    let gl = rates.gamma_l;
    let ge = rates.gamma_e;
    let (db, dc, de) = (rates.delta_b, rates.delta_c, rates.delta_e);

    let mut d = [C64::new(0.0, 0.0); 8];
    // Two-photon sector over (storage b, auxiliary c) with the emitter.
    d[TLE_20G] = C64::new(-gl, -(2.0 * db + chi3 + 4.0 * mag)) * s[TLE_20G]
        - i * rt2 * pi.conj() * s[TLE_11G];
    d[TLE_11G] = C64::new(-gl, -(db + dc + chi3 + 4.0 * mag)) * s[TLE_11G]
        - i * rt2 * pi * s[TLE_20G]
        - i * rt2 * pi.conj() * s[TLE_02G]
        - i * g * s[TLE_10E];
    d[TLE_02G] = C64::new(-gl, -(2.0 * dc + chi3 + 4.0 * mag)) * s[TLE_02G]
        - i * rt2 * pi * s[TLE_11G]
        - i * rt2 * g * s[TLE_01E];
    d[TLE_10E] = C64::new(-0.5 * (ge + gl), -(db + de + 2.0 * mag)) * s[TLE_10E]
        - i * pi.conj() * s[TLE_01E]
        - i * g.conj() * s[TLE_11G];
    d[TLE_01E] = C64::new(-0.5 * (ge + gl), -(dc + de + 2.0 * mag)) * s[TLE_01E]
        - i * pi * s[TLE_10E]
        - i * rt2 * g.conj() * s[TLE_02G];
    // Single-photon sector.
    d[TLE_10G] = C64::new(-0.5 * gl, -(db + 2.0 * mag)) * s[TLE_10G] - i * pi.conj() * s[TLE_01G];
    d[TLE_01G] = C64::new(-0.5 * gl, -(dc + 2.0 * mag)) * s[TLE_01G]
        - i * g * s[TLE_00E]
        - i * pi * s[TLE_10G];
    d[TLE_00E] = C64::new(-0.5 * ge, -de) * s[TLE_00E] - i * g.conj() * s[TLE_01G];
    d
}

/// Integrate the emitter stage under a swap/dwell control Pi(t) coupling
/// the storage mode to the emitter-adjacent auxiliary mode.
pub fn propagate_tle_stage(
    state0: &TleStageState,
    pi_control: &ControlSolution,
    run: &RunConfig,
) -> Result<TleStageTrace> {
    let rates = run.system.rates(run.tau_g);
    let grid = pi_control.combined.grid.clone();
    let dt = grid.dt;
    check_step(&rates, dt)?;
    let chi3 = terms_for(&rates).shift_11; // host Kerr on the two-photon sector

    let pi = &pi_control.combined.values;
    let pi_mid = midpoint_samples(&pi_control.combined);

    let n = grid.n_points;
    let mut states = Vec::with_capacity(n);
    let mut s = *state0;
    states.push(s);
    for k in 0..n - 1 {
        let k1 = tle_deriv(&s.amps, pi[k], &rates, chi3);
        let mut s2 = s.amps;
        for m in 0..8 {
            s2[m] += k1[m] * (0.5 * dt);
        }
        let k2 = tle_deriv(&s2, pi_mid[k], &rates, chi3);
        let mut s3 = s.amps;
        for m in 0..8 {
            s3[m] += k2[m] * (0.5 * dt);
        }
        let k3 = tle_deriv(&s3, pi_mid[k], &rates, chi3);
        let mut s4 = s.amps;
        for m in 0..8 {
            s4[m] += k3[m] * dt;
        }
        let k4 = tle_deriv(&s4, pi[k + 1], &rates, chi3);
        for m in 0..8 {
            s.amps[m] += (k1[m] + (k2[m] + k3[m]) * 2.0 + k4[m]) * (dt / 6.0);
        }
        states.push(s);
    }
    if states.last().unwrap().amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(crate::error::Error::Numeric("non-finite amplitude in emitter stage".into()));
    }
    Ok(TleStageTrace { grid, states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ScheduleSpec, SystemConfig};
    use crate::grid::TimeGrid;
    use approx::assert_relative_eq;

    fn tle_run(g: f64, gamma_e: f64, gamma_l: f64) -> RunConfig {
        RunConfig {
            system: SystemConfig {
                nonlinearity: NonlinearityKind::TwoLevelEmitter,
                g_tle: C64::new(g, 0.0),
                gamma_e,
                gamma_l,
                chi3: 0.0,
                delta_b: 0.0,
                delta_c: 0.0,
                delta_e: 0.0,
                ..SystemConfig::default()
            },
            schedule: ScheduleSpec::default(),
            tau_g: 1.0,
            dt: 1.0 / 400.0,
        }
    }

    #[test]
    fn expm2_matches_power_series() {
        let a = [
            [C64::new(0.1, -0.4), C64::new(0.0, 0.7)],
            [C64::new(0.0, 0.7), C64::new(-0.2, 0.3)],
        ];
        let v = [C64::new(1.0, 0.2), C64::new(-0.3, 0.5)];
        let t = 0.8;
        // Series with scaled steps: many small first-order products.
        let steps = 200_000;
        let h = t / steps as f64;
        let mut w = v;
        for _ in 0..steps {
            let aw = [a[0][0] * w[0] + a[0][1] * w[1], a[1][0] * w[0] + a[1][1] * w[1]];
            let half = [w[0] + aw[0] * (0.5 * h), w[1] + aw[1] * (0.5 * h)];
            let ah = [a[0][0] * half[0] + a[0][1] * half[1], a[1][0] * half[0] + a[1][1] * half[1]];
            w = [w[0] + ah[0] * h, w[1] + ah[1] * h];
        }
        let exact = expm2_apply(a, v, t);
        assert!((exact[0] - w[0]).norm() < 1e-8);
        assert!((exact[1] - w[1]).norm() < 1e-8);
    }

    #[test]
    fn stored_pair_rabi_flops_with_its_harmonic() {
        // Lossless, resonant: |psi020(t)|^2 = cos^2(sqrt(2) chi2 t).
        let rates = Rates {
            chi2: 0.35,
            gamma_l: 0.0,
            delta_b: 0.0,
            delta_c: 0.0,
            ..SystemConfig::default().rates(1.0)
        };
        let terms = NonlinearTerms { shg_chi2: rates.chi2, ..NonlinearTerms::NONE };
        for &t in &[0.3, 1.0, 2.4, 5.0] {
            let mut state = [
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
            ];
            storage_bridge_doubles(&mut state, &rates, &terms, t);
            let expect = (std::f64::consts::SQRT_2 * rates.chi2 * t).cos().powi(2);
            assert_relative_eq!(state[2].norm_sqr(), expect, epsilon = 1e-12);
            assert_relative_eq!(state[2].norm_sqr() + state[3].norm_sqr(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kerr_bridge_shifts_phase_only() {
        let rates = SystemConfig::default().rates(1.0);
        let terms = chi3_terms(rates.chi3);
        let lossless = Rates { gamma_l: 0.0, gamma: 0.0, ..rates };
        let mut state = [
            C64::new(0.5, 0.1),
            C64::new(0.2, -0.3),
            C64::new(0.7, 0.0),
            C64::new(0.0, 0.0),
        ];
        let before: Vec<f64> = state.iter().map(|a| a.norm()).collect();
        storage_bridge_doubles(&mut state, &lossless, &terms, 3.7);
        for (a, b) in state.iter().zip(&before) {
            assert_relative_eq!(a.norm(), b, epsilon = 1e-12);
        }
        // The stored pair advances at the recorded shift rate.
        assert_relative_eq!(
            state[2].arg(),
            crate::gate::wrap_angle(-terms.shift_02 * 3.7),
            epsilon = 1e-12
        );
    }

    #[test]
    fn vacuum_rabi_between_auxiliary_photon_and_emitter() {
        // Pi = 0, photon starts in the auxiliary mode: |phi00e|^2 = sin^2(|g| t).
        let run = tle_run(1.0, 0.0, 0.0);
        let rates = run.system.rates(run.tau_g);
        let grid = TimeGrid::span(0.0, 3.0, run.dt).unwrap();
        let zero = ControlSolution::zero(grid.clone());
        let mut s0 = TleStageState::zero();
        s0.amps[TLE_01G] = C64::new(1.0, 0.0);
        let trace = propagate_tle_stage(&s0, &zero, &run).unwrap();
        for k in (0..grid.n_points).step_by(50) {
            let t = grid.t(k);
            let expect = (rates.g_tle.norm() * t).sin().powi(2);
            assert!((trace.states[k].amps[TLE_00E].norm_sqr() - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn emitter_stage_conserves_norm_without_loss() {
        let run = tle_run(1.0, 0.0, 0.0);
        let grid = TimeGrid::span(0.0, 5.0, run.dt).unwrap();
        let n = grid.n_points;
        let mag: Vec<f64> =
            (0..n).map(|k| 0.6 * (std::f64::consts::PI * grid.t(k) / 5.0).sin().powi(2)).collect();
        let phase: Vec<f64> = (0..n).map(|k| 0.2 * grid.t(k)).collect();
        let combined: Vec<C64> = mag.iter().zip(&phase).map(|(&m, &p)| C64::from_polar(m, p)).collect();
        let pi = ControlSolution {
            magnitude: SampledSignal::new(grid.clone(), mag.iter().map(|&m| C64::new(m, 0.0)).collect()),
            phase: SampledSignal::new(grid.clone(), phase.iter().map(|&p| C64::new(p, 0.0)).collect()),
            combined: SampledSignal::new(grid.clone(), combined),
            eta: 1.0,
        };
        let mut s0 = TleStageState::zero();
        s0.amps[TLE_20G] = C64::new((0.5f64).sqrt(), 0.0);
        s0.amps[TLE_11G] = C64::new(0.0, (0.5f64).sqrt());
        s0.amps[TLE_10G] = C64::new(1.0, 0.0);
        let trace = propagate_tle_stage(&s0, &pi, &run).unwrap();
        let end = trace.final_state();
        assert_relative_eq!(end.norm_double(), 1.0, epsilon = 1e-8);
        assert_relative_eq!(end.norm_single(), 1.0, epsilon = 1e-8);
    }
}
