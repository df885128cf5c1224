//! Discrete time-bin reference propagator. The traveling field is sliced
//! into bins that interact with the cavity exactly once, in order; cavity
//! amplitudes advance by explicit first-order steps between collisions.
//! Deliberately independent of the Runge-Kutta engine: it converges at
//! first order in the bin width and is used to cross-validate the ODE
//! solution, not to replace it.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{SampledSignal, C64};
use crate::nonlinear::terms_for;
use crate::two_photon::TwoPhotonMatrix;
use std::f64::consts::SQRT_2;

/// Largest pair-bin count: the pair state is O(n^2) and the propagator is
/// first order, so large n buys little accuracy at quadratic cost.
pub const MAX_PAIR_BINS: usize = 256;

/// Single-photon discrete state after all bins have interacted.
#[derive(Debug, Clone)]
pub struct BinState1 {
    /// Bin width and center of the first bin (absolute time).
    pub dt: f64,
    pub t0: f64,
    /// Per-bin field amplitudes, sqrt(dt)-normalized so that
    /// sum |bins|^2 approximates the field energy.
    pub bins: Vec<C64>,
    pub psi_a: C64,
    pub psi_b: C64,
}

impl BinState1 {
    /// Center time of bin m.
    pub fn t_center(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    /// Output field amplitude at the center of bin m.
    pub fn xi_out(&self, m: usize) -> C64 {
        self.bins[m] / self.dt.sqrt()
    }

    /// Field energy plus cavity populations.
    pub fn total_norm(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum::<f64>()
            + self.psi_a.norm_sqr()
            + self.psi_b.norm_sqr()
    }
}

/// Two-photon discrete state: symmetric pair bins (diagonal included),
/// one-in-cavity amplitudes per partner bin, and the five fully absorbed
/// amplitudes.
#[derive(Debug, Clone)]
pub struct BinState2 {
    pub dt: f64,
    pub t0: f64,
    pub n: usize,
    /// Upper triangle j <= k, index k(k+1)/2 + j.
    pair: Vec<C64>,
    pub d10: Vec<C64>,
    pub d01: Vec<C64>,
    pub e20: C64,
    pub e11: C64,
    pub e02: C64,
    pub p001: C64,
}

impl BinState2 {
    pub fn t_center(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    /// Raw pair-bin amplitude, either index order.
    pub fn pair_amp(&self, j: usize, k: usize) -> C64 {
        let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
        self.pair[hi * (hi + 1) / 2 + lo]
    }

    /// Symmetric two-photon field amplitude at bin centers (j, k).
    pub fn xi_out(&self, j: usize, k: usize) -> C64 {
        let amp = self.pair_amp(j, k);
        if j == k {
            amp / self.dt
        } else {
            amp / (SQRT_2 * self.dt)
        }
    }

    /// Total probability across pair bins, mixed states, and cavity doubles.
    pub fn total_norm(&self) -> f64 {
        self.pair.iter().map(|c| c.norm_sqr()).sum::<f64>()
            + self.d10.iter().map(|d| d.norm_sqr()).sum::<f64>()
            + self.d01.iter().map(|d| d.norm_sqr()).sum::<f64>()
            + self.e20.norm_sqr()
            + self.e11.norm_sqr()
            + self.e02.norm_sqr()
            + self.p001.norm_sqr()
    }
}

struct BinCoeffs {
    ca: C64,
    cb: C64,
    c20: C64,
    c11: C64,
    c02: C64,
    c001: C64,
    xpm: f64,
    chi2: f64,
}

fn bin_coeffs(run: &RunConfig) -> BinCoeffs {
    let r = run.system.rates(run.tau_g);
    let terms = terms_for(&r);
    let i = C64::new(0.0, 1.0);
    BinCoeffs {
        ca: -(i * r.delta_a + C64::new(0.5 * r.big_gamma(), 0.0)),
        cb: -(i * r.delta_b + C64::new(0.5 * r.gamma_l, 0.0)),
        c20: -(i * (2.0 * r.delta_a + terms.shift_20) + C64::new(r.big_gamma(), 0.0)),
        c11: -(i * (r.delta_a + r.delta_b + terms.shift_11)
            + C64::new(0.5 * (r.big_gamma() + r.gamma_l), 0.0)),
        c02: -(i * (2.0 * r.delta_b + terms.shift_02) + C64::new(r.gamma_l, 0.0)),
        c001: -(i * r.delta_c + C64::new(0.5 * r.gamma_l, 0.0)),
        xpm: r.xpm_per_photon(),
        chi2: terms.shg_chi2,
    }
}

fn check_bin_inputs(
    xi_in: &SampledSignal,
    control: &SampledSignal,
    n_bins: usize,
) -> Result<(f64, f64)> {
    if xi_in.grid != control.grid {
        return Err(Error::Config(
            "bin propagation expects input and control on the same grid".into(),
        ));
    }
    if n_bins < 2 {
        return Err(Error::Config(format!("need at least 2 bins, got {n_bins}")));
    }
    let span = xi_in.grid.t_end() - xi_in.grid.t_start;
    let dt = span / n_bins as f64;
    Ok((xi_in.grid.t_start, dt))
}

/// Propagate a single photon through the controlled two-mode cavity with
/// n_bins field slices covering the grid of `xi_in`/`control`.
///
/// Each collision acts as a beam splitter on (bin n, cavity): both updates
/// read the amplitudes entering the step, so the output bin subtracts the
/// pre-collision cavity amplitude. A tap lagged one extra step looks
/// harmless here (it only doubles the first-order error constant) but
/// destroys convergence of the two-photon variant near the diagonal, where
/// consecutive collisions interfere.
pub fn run_single_bins(
    xi_in: &SampledSignal,
    control: &SampledSignal,
    run: &RunConfig,
    n_bins: usize,
) -> Result<BinState1> {
    let (t_lo, dt) = check_bin_inputs(xi_in, control, n_bins)?;
    let co = bin_coeffs(run);
    let gamma = run.system.rates(run.tau_g).gamma;
    let s1 = (gamma * dt).sqrt();
    let i = C64::new(0.0, 1.0);

    let centers: Vec<f64> = (0..n_bins).map(|m| t_lo + (m as f64 + 0.5) * dt).collect();
    let mut bins: Vec<C64> = centers.iter().map(|&t| xi_in.sample(t) * dt.sqrt()).collect();
    let mut psi_a = C64::new(0.0, 0.0);
    let mut psi_b = C64::new(0.0, 0.0);

    for n in 0..n_bins {
        let lam = control.sample(centers[n]);
        let ca = co.ca - i * (co.xpm * lam.norm());
        let cb = co.cb - i * (co.xpm * lam.norm());
        let a_new = psi_a + (ca * psi_a - i * lam.conj() * psi_b) * dt + bins[n] * s1;
        let b_new = psi_b + (cb * psi_b - i * lam * psi_a) * dt;
        bins[n] -= psi_a * s1;
        psi_a = a_new;
        psi_b = b_new;
    }
    Ok(BinState1 { dt, t0: t_lo + 0.5 * dt, bins, psi_a, psi_b })
}

/// Propagate an identical two-photon product input through the controlled
/// cavity. Pair bins include the diagonal (both photons in one slice); the
/// double-occupancy transitions carry the bosonic sqrt(2) enhancement.
pub fn run_pair_bins(
    xi_in: &SampledSignal,
    control: &SampledSignal,
    run: &RunConfig,
    n_bins: usize,
) -> Result<BinState2> {
    if n_bins > MAX_PAIR_BINS {
        return Err(Error::Config(format!(
            "pair propagation limited to {MAX_PAIR_BINS} bins, got {n_bins}"
        )));
    }
    let (t_lo, dt) = check_bin_inputs(xi_in, control, n_bins)?;
    let co = bin_coeffs(run);
    let gamma = run.system.rates(run.tau_g).gamma;
    let s1 = (gamma * dt).sqrt();
    let s2 = (2.0 * gamma * dt).sqrt();
    let i = C64::new(0.0, 1.0);

    let centers: Vec<f64> = (0..n_bins).map(|m| t_lo + (m as f64 + 0.5) * dt).collect();
    let xi: Vec<C64> = centers.iter().map(|&t| xi_in.sample(t)).collect();
    let idx = |j: usize, k: usize| -> usize {
        let (lo, hi) = if j <= k { (j, k) } else { (k, j) };
        hi * (hi + 1) / 2 + lo
    };

    let mut pair = vec![C64::new(0.0, 0.0); n_bins * (n_bins + 1) / 2];
    for k in 0..n_bins {
        for j in 0..=k {
            pair[idx(j, k)] = if j == k {
                xi[j] * xi[k] * dt
            } else {
                xi[j] * xi[k] * (SQRT_2 * dt)
            };
        }
    }
    let mut d10 = vec![C64::new(0.0, 0.0); n_bins];
    let mut d01 = vec![C64::new(0.0, 0.0); n_bins];
    let (mut e20, mut e11, mut e02, mut p001) = (
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
    );

    for n in 0..n_bins {
        let lam = control.sample(centers[n]);
        let shift = i * (co.xpm * lam.norm());
        let ca = co.ca - shift;
        let cb = co.cb - shift;
        let c20 = co.c20 - shift * 2.0;
        let c11 = co.c11 - shift * 2.0;
        let c02 = co.c02 - shift * 2.0;

        // Every update in this step reads the amplitudes entering the step.
        let snap_d10 = d10.clone();
        let snap_d01 = d01.clone();
        let (snap_e20, snap_e11, snap_e02, snap_p001) = (e20, e11, e02, p001);
        let snap_row: Vec<C64> = (0..n_bins).map(|k| pair[idx(n, k)]).collect();

        // Cavity evolution between collisions, first order.
        for k in 0..n_bins {
            d10[k] += (ca * snap_d10[k] - i * lam.conj() * snap_d01[k]) * dt;
            d01[k] += (cb * snap_d01[k] - i * lam * snap_d10[k]) * dt;
        }
        e20 += (c20 * snap_e20 - i * SQRT_2 * lam.conj() * snap_e11) * dt;
        e11 += (c11 * snap_e11 - i * SQRT_2 * (lam * snap_e20 + lam.conj() * snap_e02)) * dt;
        e02 += (c02 * snap_e02 - i * SQRT_2 * lam * snap_e11 - i * SQRT_2 * co.chi2 * snap_p001)
            * dt;
        p001 += (co.c001 * snap_p001 - i * SQRT_2 * co.chi2 * snap_e02) * dt;

        // Collision with bin n: absorption out of the pair bins...
        for k in 0..n_bins {
            if k != n {
                d10[k] += snap_row[k] * s1;
            }
        }
        d10[n] += snap_row[n] * s2;
        e20 += snap_d10[n] * s2;
        e11 += snap_d01[n] * s1;
        // ...and emission back into bin n.
        for k in 0..n_bins {
            if k != n {
                pair[idx(n, k)] -= snap_d10[k] * s1;
            }
        }
        pair[idx(n, n)] -= snap_d10[n] * s2;
        d10[n] -= snap_e20 * s2;
        d01[n] -= snap_e11 * s1;
    }

    Ok(BinState2 { dt, t0: t_lo + 0.5 * dt, n: n_bins, pair, d10, d01, e20, e11, e02, p001 })
}

/// L2 distance between a discrete single-photon output and a continuum
/// reference, evaluated at bin centers.
pub fn single_bin_error(state: &BinState1, reference: &SampledSignal) -> f64 {
    let sum: f64 = (0..state.bins.len())
        .map(|m| (state.xi_out(m) - reference.sample(state.t_center(m))).norm_sqr() * state.dt)
        .sum();
    sum.sqrt()
}

/// Bilinear interpolation of a symmetric output matrix defined on a grid
/// starting at `t_start` with the matrix's own step.
fn sample_matrix(mat: &TwoPhotonMatrix, t_start: f64, t1: f64, t2: f64) -> C64 {
    let coord = |t: f64| -> (usize, f64) {
        let x = ((t - t_start) / mat.dt).clamp(0.0, (mat.n - 1) as f64);
        let k = (x.floor() as usize).min(mat.n - 2);
        (k, x - k as f64)
    };
    let (j, a) = coord(t1);
    let (k, b) = coord(t2);
    mat.get(j, k) * ((1.0 - a) * (1.0 - b))
        + mat.get(j + 1, k) * (a * (1.0 - b))
        + mat.get(j, k + 1) * ((1.0 - a) * b)
        + mat.get(j + 1, k + 1) * (a * b)
}

/// Max-norm distance between the discrete pair output and a continuum
/// output matrix, off-diagonal bins only.
pub fn pair_bin_error(state: &BinState2, mat: &TwoPhotonMatrix, mat_t_start: f64) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..state.n {
        for j in 0..k {
            let reference = sample_matrix(mat, mat_t_start, state.t_center(j), state.t_center(k));
            worst = worst.max((state.xi_out(j, k) - reference).norm());
        }
    }
    worst
}

/// Least-squares power-law fit err = constant * dt^order from (dt, err)
/// samples; returns (order, constant).
pub fn convergence_report(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(dt, err) in points {
        let (x, y) = (dt.ln(), err.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let constant = ((sy - order * sx) / n).exp();
    (order, constant)
}
