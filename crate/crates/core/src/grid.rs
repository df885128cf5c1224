//! Uniform time grids, complex sampled signals, trapezoidal quadrature, the
//! normalized Gaussian wavepacket, and the sine rise/fall smoothing windows.
//!
//! Everything downstream (control synthesis, propagation, overlaps) runs on
//! these primitives. Times are in units of the Gaussian intensity FWHM and
//! wavepacket amplitudes carry units of (time)^(-1/2) so that the squared
//! signal integrates to a probability.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C64 = Complex64;

/// ln 2, the constant tying the Gaussian FWHM to its bandwidth.
pub const LN2: f64 = std::f64::consts::LN_2;

/// Bandwidth-time product: a rate of X (in bandwidth units) equals
/// X * OMEGA_TAU / tau_g per unit time.
pub const OMEGA_TAU: f64 = 4.0 * LN2;

/// Uniform time axis. Times are always recomputed from the index so two
/// evaluations of the same grid point are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_points: usize,
}

impl TimeGrid {
    /// Grid covering [t_start, t_end] with step dt: floor((t_end-t_start)/dt)+1
    /// points, so the final point lands within dt of t_end.
    pub fn span(t_start: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("non-positive grid step dt = {dt}")));
        }
        if !(t_end > t_start) {
            return Err(Error::Config(format!(
                "reversed or empty grid interval [{t_start}, {t_end}]"
            )));
        }
        // Nudge by a relative epsilon so spans that are an exact multiple of dt
        // do not lose their endpoint to floating-point drop-off.
        let raw = (t_end - t_start) / dt;
        let n_points = (raw * (1.0 + 1e-12)).floor() as usize + 1;
        Ok(TimeGrid { t_start, dt, n_points })
    }

    #[inline]
    pub fn t(&self, k: usize) -> f64 {
        self.t_start + (k as f64) * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n_points - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.t(k)).collect()
    }

    /// Index of the grid point nearest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let k = ((t - self.t_start) / self.dt).round();
        (k.max(0.0) as usize).min(self.n_points - 1)
    }
}

/// A complex function sampled on a `TimeGrid`.
#[derive(Debug, Clone)]
pub struct SampledSignal {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
}

impl SampledSignal {
    pub fn new(grid: TimeGrid, values: Vec<C64>) -> Self {
        assert_eq!(
            grid.n_points,
            values.len(),
            "signal length must match grid point count"
        );
        SampledSignal { grid, values }
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        let n = grid.n_points;
        SampledSignal { grid, values: vec![C64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> C64) -> Self {
        let values = (0..grid.n_points).map(|k| f(grid.t(k))).collect();
        SampledSignal { grid, values }
    }

    pub fn from_real_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_fn(grid, |t| C64::new(f(t), 0.0))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear interpolation between grid points; clamps outside the grid.
    pub fn sample(&self, t: f64) -> C64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = (self.len() - 1) as f64;
        if x >= last {
            return self.values[self.len() - 1];
        }
        // Snap to the stored value when t is a grid point up to rounding, so
        // resampling a signal on its own grid is the identity.
        let near = x.round();
        if (x - near).abs() < 1e-9 {
            return self.values[near as usize];
        }
        let k = x.floor() as usize;
        let w = x - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoidal integral of the signal over the whole grid.
    pub fn integral(&self) -> C64 {
        trapezoid(&self.values, self.grid.dt)
    }

    /// Trapezoidal integral of |signal|^2 over the whole grid.
    pub fn norm2(&self) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        trapezoid_real(&sq, self.grid.dt)
    }

    /// Centered finite-difference derivative (one-sided at the ends).
    pub fn derivative(&self) -> SampledSignal {
        let n = self.len();
        let dt = self.grid.dt;
        let mut out = vec![C64::new(0.0, 0.0); n];
        if n >= 2 {
            out[0] = (self.values[1] - self.values[0]) / dt;
            out[n - 1] = (self.values[n - 1] - self.values[n - 2]) / dt;
        }
        for k in 1..n - 1 {
            out[k] = (self.values[k + 1] - self.values[k - 1]) / (2.0 * dt);
        }
        SampledSignal { grid: self.grid.clone(), values: out }
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> SampledSignal {
        SampledSignal {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Trapezoidal rule for complex samples with uniform spacing.
pub fn trapezoid(values: &[C64], dt: f64) -> C64 {
    if values.len() < 2 {
        return C64::new(0.0, 0.0);
    }
    let mut acc = (values[0] + values[values.len() - 1]) * 0.5;
    for v in &values[1..values.len() - 1] {
        acc += v;
    }
    acc * dt
}

/// Trapezoidal rule for real samples with uniform spacing.
pub fn trapezoid_real(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut acc = 0.5 * (values[0] + values[values.len() - 1]);
    for v in &values[1..values.len() - 1] {
        acc += v;
    }
    acc * dt
}

/// Cumulative trapezoidal integral; result[0] = 0.
pub fn cumulative_integral(sig: &SampledSignal) -> SampledSignal {
    let dt = sig.grid.dt;
    let mut out = Vec::with_capacity(sig.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for k in 1..sig.len() {
        acc += (sig.values[k - 1] + sig.values[k]) * (0.5 * dt);
        out.push(acc);
    }
    SampledSignal { grid: sig.grid.clone(), values: out }
}

/// Real-valued cumulative trapezoid on a raw slice.
pub fn cumulative_real(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..values.len() {
        acc += 0.5 * dt * (values[k - 1] + values[k]);
        out.push(acc);
    }
    out
}

/// Trapezoidal inner product: integral of a(t) * conj(b(t)) dt.
pub fn inner_product(a: &SampledSignal, b: &SampledSignal) -> Result<C64> {
    if a.grid != b.grid {
        return Err(Error::Config(
            "inner product requires both signals on the same grid".into(),
        ));
    }
    let prod: Vec<C64> = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| x * y.conj())
        .collect();
    Ok(trapezoid(&prod, a.grid.dt))
}

/// Quadrature weight of grid point k under the trapezoidal rule.
#[inline]
pub fn trapezoid_weight(k: usize, n: usize, dt: f64) -> f64 {
    if k == 0 || k + 1 == n {
        0.5 * dt
    } else {
        dt
    }
}

/// Gaussian wavepacket: FWHM `tau_g` of the *intensity* |G|^2, centered at
/// `t_center`, normalized so that the intensity integrates to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub tau_g: f64,
    pub t_center: f64,
}

impl GaussianSpec {
    pub fn new(tau_g: f64, t_center: f64) -> Self {
        assert!(tau_g > 0.0, "Gaussian FWHM must be positive");
        GaussianSpec { tau_g, t_center }
    }

    /// Peak amplitude sqrt(2/tau_g) * (ln2/pi)^(1/4).
    pub fn peak(&self) -> f64 {
        (2.0 / self.tau_g).sqrt() * (LN2 / std::f64::consts::PI).powf(0.25)
    }

    #[inline]
    pub fn amplitude(&self, t: f64) -> f64 {
        let u = (t - self.t_center) / self.tau_g;
        self.peak() * (-2.0 * LN2 * u * u).exp()
    }

    /// Analytic time derivative of the amplitude.
    #[inline]
    pub fn amplitude_dot(&self, t: f64) -> f64 {
        let u = t - self.t_center;
        -4.0 * LN2 * u / (self.tau_g * self.tau_g) * self.amplitude(t)
    }
}

/// Sample a Gaussian wavepacket on a grid (purely real signal).
pub fn gaussian(spec: GaussianSpec, grid: &TimeGrid) -> SampledSignal {
    SampledSignal::from_real_fn(grid.clone(), |t| spec.amplitude(t))
}

/// A wavepacket together with its time derivative. The derivative is analytic
/// for Gaussians and a centered finite difference otherwise; the synthesis
/// formulas consume both.
#[derive(Debug, Clone)]
pub struct Wavepacket {
    pub signal: SampledSignal,
    pub derivative: SampledSignal,
}

impl Wavepacket {
    pub fn gaussian(spec: GaussianSpec, grid: &TimeGrid) -> Self {
        Wavepacket {
            signal: SampledSignal::from_real_fn(grid.clone(), |t| spec.amplitude(t)),
            derivative: SampledSignal::from_real_fn(grid.clone(), |t| spec.amplitude_dot(t)),
        }
    }

    pub fn from_signal(signal: SampledSignal) -> Self {
        let derivative = signal.derivative();
        Wavepacket { signal, derivative }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.signal.grid
    }
}

/// Rising window: 0 for t <= -tau_e/2, 1 for t >= tau_e/2, sine ramp between.
#[inline]
pub fn smoothing_up(t: f64, tau_e: f64) -> f64 {
    assert!(tau_e > 0.0, "smoothing window width must be positive");
    if t <= -0.5 * tau_e {
        0.0
    } else if t >= 0.5 * tau_e {
        1.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * t / tau_e).sin())
    }
}

/// Falling window, the mirror image of `smoothing_up`.
#[inline]
pub fn smoothing_down(t: f64, tau_e: f64) -> f64 {
    smoothing_up(-t, tau_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_construction_follows_floor_rule() {
        let g = TimeGrid::span(0.0, 1.0, 0.5).unwrap();
        assert_eq!(g.n_points, 3);
        assert_eq!(g.times(), vec![0.0, 0.5, 1.0]);

        let g = TimeGrid::span(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.n_points, 4);
        assert_relative_eq!(g.t_end(), 0.9, max_relative = 1e-15);
    }

    #[test]
    fn grid_rejects_bad_intervals() {
        assert!(TimeGrid::span(0.0, 0.0, 0.1).is_err());
        assert!(TimeGrid::span(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::span(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn grid_times_are_bit_stable() {
        let g = TimeGrid::span(0.3, 17.0, 1.0 / 300.0).unwrap();
        for k in (0..g.n_points).step_by(97) {
            assert_eq!(g.t(k).to_bits(), g.t(k).to_bits());
            assert_eq!(g.t(k), g.t_start + k as f64 * g.dt);
        }
    }

    #[test]
    fn cumulative_integral_of_constant() {
        let g = TimeGrid::span(0.0, 1.0, 0.25).unwrap();
        let s = SampledSignal::from_real_fn(g, |_| 1.0);
        let c = cumulative_integral(&s);
        let expected = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (v, e) in c.values.iter().zip(expected) {
            assert_relative_eq!(v.re, e, max_relative = 1e-15);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn trapezoid_exact_for_linear_integrand() {
        let g = TimeGrid::span(0.0, 1.0, 0.125).unwrap();
        let s = SampledSignal::from_real_fn(g, |t| t);
        assert_relative_eq!(s.integral().re, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_peak_and_fwhm() {
        let spec = GaussianSpec::new(1.0, 0.0);
        // Peak value sqrt(2) * (ln2/pi)^(1/4) ~= 0.9693.
        assert_relative_eq!(spec.peak(), 0.96926, max_relative = 1e-4);
        // Intensity at +-tau_g/2 is half the peak intensity.
        let half = spec.amplitude(0.5).powi(2);
        assert_relative_eq!(half, 0.5 * spec.peak().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_normalization_on_wide_window() {
        for tau in [0.5, 1.0, 2.0] {
            let spec = GaussianSpec::new(tau, 0.0);
            let grid = TimeGrid::span(-5.0 * tau, 5.0 * tau, tau / 400.0).unwrap();
            let g = gaussian(spec, &grid);
            assert_relative_eq!(g.norm2(), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn cumulative_gaussian_intensity_matches_error_function() {
        // Closed form: integral of |G|^2 from -inf to t is (1 + erf(2 sqrt(ln2) t / tau)) / 2.
        // erf evaluated via its Maclaurin/continued expansion through an
        // independent implementation (Abramowitz-Stegun 7.1.26 rational fit
        // is too coarse; use the series, which converges fast for |x| < 4).
        fn erf_series(x: f64) -> f64 {
            let mut term = x;
            let mut sum = x;
            for n in 1..200 {
                let nf = n as f64;
                term *= -x * x / nf;
                sum += term / (2.0 * nf + 1.0);
            }
            sum * 2.0 / std::f64::consts::PI.sqrt()
        }
        let spec = GaussianSpec::new(1.0, 0.0);
        let grid = TimeGrid::span(-3.0, 3.0, 1.0 / 500.0).unwrap();
        let intensity = SampledSignal::from_real_fn(grid, |t| spec.amplitude(t).powi(2));
        let cum = cumulative_integral(&intensity);
        for k in (0..cum.len()).step_by(173) {
            let t = cum.grid.t(k);
            let closed = 0.5 * (erf_series(2.0 * LN2.sqrt() * t) - erf_series(-2.0 * LN2.sqrt() * 3.0));
            assert_relative_eq!(cum.values[k].re, closed, epsilon = 1e-6);
        }
    }

    #[test]
    fn gaussian_overlap_closed_form() {
        // <G(t-T), G(t)> = exp(-ln2 T^2 / tau^2) for real Gaussians.
        let tau = 1.0;
        let grid = TimeGrid::span(-8.0, 8.0, 1.0 / 400.0).unwrap();
        for shift in [0.0, 0.3, 1.0, 2.5] {
            let a = gaussian(GaussianSpec::new(tau, shift), &grid);
            let b = gaussian(GaussianSpec::new(tau, 0.0), &grid);
            let ov = inner_product(&a, &b).unwrap();
            assert_relative_eq!(ov.re, (-LN2 * shift * shift / (tau * tau)).exp(), epsilon = 1e-8);
            assert!(ov.im.abs() < 1e-12);
        }
    }

    #[test]
    fn inner_product_requires_matching_grids() {
        let g1 = TimeGrid::span(0.0, 1.0, 0.1).unwrap();
        let g2 = TimeGrid::span(0.0, 1.0, 0.2).unwrap();
        let a = SampledSignal::zeros(g1);
        let b = SampledSignal::zeros(g2);
        assert!(inner_product(&a, &b).is_err());
    }

    #[test]
    fn smoothing_window_endpoints_and_complement() {
        let tau_e = 1.0;
        assert_eq!(smoothing_up(-0.5, tau_e), 0.0);
        assert_relative_eq!(smoothing_up(0.0, tau_e), 0.5, max_relative = 1e-15);
        assert_eq!(smoothing_up(0.5, tau_e), 1.0);
        assert_eq!(smoothing_up(-5.0, tau_e), 0.0);
        assert_eq!(smoothing_up(5.0, tau_e), 1.0);
        for k in 0..50 {
            let t = -0.5 + k as f64 / 49.0;
            assert_relative_eq!(
                smoothing_up(t, tau_e) + smoothing_down(t, tau_e),
                1.0,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn smoothing_up_is_monotone() {
        let tau_e = 0.7;
        let mut prev = -1.0;
        for k in 0..2000 {
            let t = -0.6 + 1.2 * k as f64 / 1999.0;
            let v = smoothing_up(t, tau_e);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn finite_difference_derivative_is_second_order() {
        let grid = TimeGrid::span(-2.0, 2.0, 1e-3).unwrap();
        let s = SampledSignal::from_real_fn(grid, |t| (3.0 * t).sin());
        let d = s.derivative();
        // Skip the one-sided endpoints.
        for k in (1..d.len() - 1).step_by(211) {
            let t = d.grid.t(k);
            assert_relative_eq!(d.values[k].re, 3.0 * (3.0 * t).cos(), epsilon = 1e-5);
        }
    }

    #[test]
    fn linear_interpolation_hits_grid_points_exactly() {
        let grid = TimeGrid::span(0.0, 1.0, 0.1).unwrap();
        let s = SampledSignal::from_real_fn(grid, |t| t * t);
        for k in 0..s.len() {
            let t = s.grid.t(k);
            assert_eq!(s.sample(t), s.values[k]);
        }
        // Midpoint is the average of neighbors.
        let mid = s.sample(0.05);
        assert_relative_eq!(mid.re, 0.5 * (s.values[0].re + s.values[1].re), epsilon = 1e-14);
    }
}
