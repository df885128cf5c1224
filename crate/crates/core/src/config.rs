//! Physical configuration: rates, detunings, material kind, protocol
//! schedule, unit conversion, and the plain-text config-file format.
//!
//! Unit convention: configuration rates are expressed in units of the input
//! bandwidth (4 ln2 / tau_g) and times in units of tau_g. Propagators work in
//! absolute time, so `SystemConfig::rates` performs the conversion exactly
//! once at the boundary.

use crate::error::{Error, Result};
use crate::grid::{C64, OMEGA_TAU};

/// Which optical nonlinearity provides the mode-mode couplings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityKind {
    /// Four-wave mixing; control field imposes cross-phase modulation shifts.
    Chi3,
    /// Three-wave mixing with second-harmonic generation in the storage mode;
    /// no cross-phase modulation.
    Chi2Shg,
    /// Two-level emitter coupled to a tertiary mode (chi3 host material).
    TwoLevelEmitter,
    /// Mode coupling only; all photon-photon terms switched off.
    LinearOnly,
}

impl NonlinearityKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "chi3" => Ok(NonlinearityKind::Chi3),
            "chi2" => Ok(NonlinearityKind::Chi2Shg),
            "tle" => Ok(NonlinearityKind::TwoLevelEmitter),
            "linear" => Ok(NonlinearityKind::LinearOnly),
            other => Err(Error::Config(format!(
                "unknown nonlinearity '{other}' (expected chi3|chi2|tle|linear)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            NonlinearityKind::Chi3 => "chi3",
            NonlinearityKind::Chi2Shg => "chi2",
            NonlinearityKind::TwoLevelEmitter => "tle",
            NonlinearityKind::LinearOnly => "linear",
        }
    }

    /// Number of cross-phase-modulation frequency-shift units a singly
    /// occupied mode acquires from the control pump: the shift is
    /// 2|Lambda| per photon for a chi3 pump and absent for chi2 (its
    /// Hamiltonian has no intensity-intensity term).
    pub fn xpm_per_photon(&self) -> f64 {
        match self {
            NonlinearityKind::Chi2Shg => 0.0,
            _ => 2.0,
        }
    }
}

/// Physical rates and detunings, all in input-bandwidth units.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub gamma: f64,
    pub gamma_l: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub delta_e: f64,
    pub nonlinearity: NonlinearityKind,
    pub chi2: f64,
    pub chi3: f64,
    pub g_tle: C64,
    pub gamma_e: f64,
}

impl SystemConfig {
    /// Total coupling rate of the waveguide-facing mode.
    pub fn big_gamma(&self) -> f64 {
        self.gamma + self.gamma_l
    }

    /// Convert to absolute-time rates for a given wavepacket width.
    pub fn rates(&self, tau_g: f64) -> Rates {
        let s = OMEGA_TAU / tau_g;
        Rates {
            gamma: self.gamma * s,
            gamma_l: self.gamma_l * s,
            delta_a: self.delta_a * s,
            delta_b: self.delta_b * s,
            delta_c: self.delta_c * s,
            delta_e: self.delta_e * s,
            chi2: self.chi2 * s,
            chi3: self.chi3 * s,
            g_tle: self.g_tle * s,
            gamma_e: self.gamma_e * s,
            kind: self.nonlinearity,
        }
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            gamma: 30.0,
            gamma_l: 5e-3,
            delta_a: 0.0,
            delta_b: 0.0,
            delta_c: 0.0,
            delta_e: 0.0,
            nonlinearity: NonlinearityKind::Chi3,
            chi2: 0.0,
            chi3: 0.1,
            g_tle: C64::new(1.0, 0.0),
            gamma_e: 0.0,
        }
    }
}

/// Absolute-time rates consumed by the propagators.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub gamma: f64,
    pub gamma_l: f64,
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub delta_e: f64,
    pub chi2: f64,
    pub chi3: f64,
    pub g_tle: C64,
    pub gamma_e: f64,
    pub kind: NonlinearityKind,
}

impl Rates {
    pub fn big_gamma(&self) -> f64 {
        self.gamma + self.gamma_l
    }

    pub fn xpm_per_photon(&self) -> f64 {
        self.kind.xpm_per_photon()
    }
}

/// Protocol schedule: absorption on [0, 2 t_in], storage, emission on a
/// window of half-width tau_o ending at t_total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSpec {
    pub t_in: f64,
    pub t_store: f64,
    pub tau_o: f64,
    pub tau_e: f64,
    pub eps_eta: f64,
}

impl ScheduleSpec {
    /// End of the absorption interval.
    pub fn absorb_end(&self) -> f64 {
        2.0 * self.t_in
    }

    /// Center of the emitted wavepacket.
    pub fn t_out(&self) -> f64 {
        self.t_in + self.t_store
    }

    /// Start of the emission interval.
    pub fn emit_start(&self) -> f64 {
        self.t_out() - self.tau_o
    }

    /// End of the whole protocol.
    pub fn t_total(&self) -> f64 {
        self.t_out() + self.tau_o
    }
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec { t_in: 2.5, t_store: 9.0, tau_o: 4.08, tau_e: 1.0, eps_eta: 1e-4 }
    }
}

/// Absolute mode/drive frequencies from which rotating-frame detunings derive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyLadder {
    pub omega_w: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub omega_e: f64,
    pub omega_p: f64,
    pub omega_1: f64,
    pub omega_2: f64,
    pub omega_3: f64,
}

/// Rotating-frame detunings for every mode plus the two drive mismatches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detunings {
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
    pub delta_e: f64,
    pub delta_lambda: f64,
    pub delta_pi: f64,
}

/// Rotating-frame detunings. For four-wave-mixing ladders the a<->b coupling
/// is driven by the pump pair (omega_1, omega_2) and b<->c by (omega_1,
/// omega_3); for a chi2 medium a single pump at omega_p drives a<->b and the
/// harmonic condition omega_c = 2 omega_b replaces the second drive.
pub fn derive_detunings(ladder: &FrequencyLadder, kind: NonlinearityKind) -> Detunings {
    let delta_a = ladder.omega_a - ladder.omega_w;
    match kind {
        NonlinearityKind::Chi2Shg => {
            let delta_lambda = ladder.omega_p - (ladder.omega_b - ladder.omega_a);
            let delta_b = delta_lambda + delta_a;
            let delta_c = ladder.omega_c - 2.0 * ladder.omega_b;
            Detunings {
                delta_a,
                delta_b,
                delta_c,
                delta_e: ladder.omega_e - ladder.omega_c,
                delta_lambda,
                delta_pi: 0.0,
            }
        }
        _ => {
            // Lambda ~ alpha_1 alpha_2* rotates at -(omega_1 - omega_2) and
            // must track the a->b transition at -(omega_a - omega_b).
            let delta_lambda = (ladder.omega_1 - ladder.omega_2) - (ladder.omega_a - ladder.omega_b);
            let delta_b = delta_lambda + delta_a;
            let delta_pi = (ladder.omega_3 - ladder.omega_1) - (ladder.omega_b - ladder.omega_c);
            let delta_c = delta_pi + delta_b;
            Detunings {
                delta_a,
                delta_b,
                delta_c,
                delta_e: ladder.omega_e - ladder.omega_c,
                delta_lambda,
                delta_pi,
            }
        }
    }
}

/// Non-throwing sanity checks; returns human-readable diagnostics.
pub fn validate(config: &SystemConfig, schedule: &ScheduleSpec) -> Vec<String> {
    let mut out = Vec::new();
    if config.gamma < 0.0 {
        out.push(format!("negative coupling rate gamma = {}", config.gamma));
    }
    if config.gamma_l < 0.0 {
        out.push(format!("negative loss rate gamma_l = {}", config.gamma_l));
    }
    if config.chi2 < 0.0 {
        out.push(format!("negative chi2 = {}", config.chi2));
    }
    if config.chi3 < 0.0 {
        out.push(format!("negative chi3 = {}", config.chi3));
    }
    if config.gamma_e < 0.0 {
        out.push(format!("negative emitter decay gamma_e = {}", config.gamma_e));
    }
    if schedule.t_in <= 0.0 {
        out.push(format!("non-positive absorption half-window t_in = {}", schedule.t_in));
    }
    if schedule.tau_o <= 0.0 {
        out.push(format!("non-positive emission half-window tau_o = {}", schedule.tau_o));
    }
    if schedule.tau_e <= 0.0 {
        out.push(format!("non-positive smoothing time tau_e = {}", schedule.tau_e));
    }
    if !(schedule.eps_eta > 0.0 && schedule.eps_eta < 1.0) {
        out.push(format!("eps_eta = {} outside (0, 1)", schedule.eps_eta));
    }
    if schedule.t_store <= schedule.t_in + schedule.tau_o {
        out.push(format!(
            "absorption/emission windows overlap: t_store = {} must exceed t_in + tau_o = {}",
            schedule.t_store,
            schedule.t_in + schedule.tau_o
        ));
    }
    out
}

/// Fully resolved run parameters: physics + schedule + units + step size.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub schedule: ScheduleSpec,
    pub tau_g: f64,
    pub dt: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemConfig::default(),
            schedule: ScheduleSpec::default(),
            tau_g: 1.0,
            dt: 1.0 / 200.0,
        }
    }
}

impl RunConfig {
    /// Parse the `key = value` config format. `#` starts a comment, blank
    /// lines are skipped, every key may appear at most once, and unknown
    /// keys are an error. Missing keys fall back to the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{raw}'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            let bad = |what: &str| {
                Error::Config(format!("line {}: invalid {what} value '{value}'", lineno + 1))
            };
            let real = || value.parse::<f64>().map_err(|_| bad(key));
            match key {
                "gamma" => cfg.system.gamma = real()?,
                "gamma_l" => cfg.system.gamma_l = real()?,
                "delta_a" => cfg.system.delta_a = real()?,
                "delta_b" => cfg.system.delta_b = real()?,
                "delta_c" => cfg.system.delta_c = real()?,
                "delta_e" => cfg.system.delta_e = real()?,
                "nonlinearity" => cfg.system.nonlinearity = NonlinearityKind::parse(value)?,
                "chi2" => cfg.system.chi2 = real()?,
                "chi3" => cfg.system.chi3 = real()?,
                "g_tle" => cfg.system.g_tle = parse_complex(value).ok_or_else(|| bad("complex"))?,
                "gamma_e" => cfg.system.gamma_e = real()?,
                "tau_g" => cfg.tau_g = real()?,
                "t_in" => cfg.schedule.t_in = real()?,
                "t_store" => cfg.schedule.t_store = real()?,
                "tau_o" => cfg.schedule.tau_o = real()?,
                "tau_e" => cfg.schedule.tau_e = real()?,
                "eps_eta" => cfg.schedule.eps_eta = real()?,
                "dt" => cfg.dt = real()?,
                other => {
                    return Err(Error::Config(format!("line {}: unknown key '{other}'", lineno + 1)))
                }
            }
        }
        if !(cfg.tau_g > 0.0) {
            return Err(Error::Config(format!("non-positive tau_g = {}", cfg.tau_g)));
        }
        if !(cfg.dt > 0.0) {
            return Err(Error::Config(format!("non-positive dt = {}", cfg.dt)));
        }
        Ok(cfg)
    }

    /// Render back to the config-file format (used by run manifests; the
    /// output reparses to an identical RunConfig).
    pub fn render(&self) -> String {
        let g = self.system.g_tle;
        format!(
            "gamma = {:e}\ngamma_l = {:e}\ndelta_a = {:e}\ndelta_b = {:e}\ndelta_c = {:e}\n\
             delta_e = {:e}\nnonlinearity = {}\nchi2 = {:e}\nchi3 = {:e}\ng_tle = {}\n\
             gamma_e = {:e}\ntau_g = {:e}\nt_in = {:e}\nt_store = {:e}\ntau_o = {:e}\n\
             tau_e = {:e}\neps_eta = {:e}\ndt = {:e}\n",
            self.system.gamma,
            self.system.gamma_l,
            self.system.delta_a,
            self.system.delta_b,
            self.system.delta_c,
            self.system.delta_e,
            self.system.nonlinearity.as_str(),
            self.system.chi2,
            self.system.chi3,
            format_complex(g),
            self.system.gamma_e,
            self.tau_g,
            self.schedule.t_in,
            self.schedule.t_store,
            self.schedule.tau_o,
            self.schedule.tau_e,
            self.schedule.eps_eta,
            self.dt,
        )
    }
}

/// Accepts "1.5", "1.5+0.3i", "1.5-0.3i", "0.3i", "-0.3i".
pub fn parse_complex(s: &str) -> Option<C64> {
    let s = s.trim();
    if let Some(body) = s.strip_suffix('i') {
        // Find the split between real and imaginary parts: the last +/- that
        // is not an exponent sign and not the leading sign.
        let bytes = body.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            let c = bytes[i] as char;
            if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => {
                let re: f64 = body[..i].trim().parse().ok()?;
                let im_str = body[i..].trim();
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().ok()?
                };
                Some(C64::new(re, im))
            }
            None => {
                let im: f64 = body.trim().parse().ok()?;
                Some(C64::new(0.0, im))
            }
        }
    } else {
        s.parse::<f64>().ok().map(|re| C64::new(re, 0.0))
    }
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{:e}", z.re)
    } else if z.im >= 0.0 {
        format!("{:e}+{:e}i", z.re, z.im)
    } else {
        format!("{:e}{:e}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resonant_ladder() -> FrequencyLadder {
        // All couplings frequency-matched: every detuning vanishes.
        FrequencyLadder {
            omega_w: 100.0,
            omega_a: 100.0,
            omega_b: 90.0,
            omega_c: 80.0,
            omega_e: 80.0,
            omega_p: -10.0,
            omega_1: 50.0,
            omega_2: 40.0,
            omega_3: 60.0,
        }
    }

    #[test]
    fn resonant_ladder_gives_zero_detunings() {
        let d = derive_detunings(&resonant_ladder(), NonlinearityKind::Chi3);
        assert_eq!(d.delta_a, 0.0);
        assert_eq!(d.delta_b, 0.0);
        assert_eq!(d.delta_c, 0.0);
        assert_eq!(d.delta_e, 0.0);
        assert_eq!(d.delta_lambda, 0.0);
        assert_eq!(d.delta_pi, 0.0);
    }

    #[test]
    fn input_detuning_propagates_down_the_ladder() {
        let mut l = resonant_ladder();
        l.omega_a += 0.1; // also shifts omega_a - omega_b away from the pump split
        l.omega_1 += 0.1; // restore the four-wave-mixing match
        let d = derive_detunings(&l, NonlinearityKind::Chi3);
        assert!((d.delta_a - 0.1).abs() < 1e-12);
        assert!((d.delta_b - 0.1).abs() < 1e-12);
    }

    #[test]
    fn chi2_pump_mismatch_is_delta_lambda() {
        let mut l = resonant_ladder();
        let d0 = derive_detunings(&l, NonlinearityKind::Chi2Shg);
        assert_eq!(d0.delta_lambda, 0.0);
        l.omega_p += 0.25;
        let d = derive_detunings(&l, NonlinearityKind::Chi2Shg);
        assert!((d.delta_lambda - 0.25).abs() < 1e-12);
        // Harmonic mismatch shows up in delta_c only.
        let mut l2 = resonant_ladder();
        l2.omega_c = 2.0 * l2.omega_b + 0.5;
        let d2 = derive_detunings(&l2, NonlinearityKind::Chi2Shg);
        assert!((d2.delta_c - 0.5).abs() < 1e-12);
    }

    #[test]
    fn drive_mismatches_invariant_under_common_frequency_shift() {
        // delta_lambda and delta_pi are differences of differences, so adding
        // the same constant to every mode and drive frequency cancels out.
        let l = resonant_ladder();
        let shift = |l: &FrequencyLadder, s: f64| FrequencyLadder {
            omega_w: l.omega_w + s,
            omega_a: l.omega_a + s,
            omega_b: l.omega_b + s,
            omega_c: l.omega_c + s,
            omega_e: l.omega_e + s,
            omega_p: l.omega_p,
            omega_1: l.omega_1 + s,
            omega_2: l.omega_2 + s,
            omega_3: l.omega_3 + s,
        };
        for s in [-7.0, 3.25, 11.5] {
            let a = derive_detunings(&l, NonlinearityKind::Chi3);
            let b = derive_detunings(&shift(&l, s), NonlinearityKind::Chi3);
            assert!((a.delta_lambda - b.delta_lambda).abs() < 1e-9);
            assert!((a.delta_pi - b.delta_pi).abs() < 1e-9);
        }
    }

    #[test]
    fn validate_flags_violations() {
        let good = SystemConfig::default();
        let sched = ScheduleSpec::default();
        assert!(validate(&good, &sched).is_empty());

        let mut bad = good.clone();
        bad.gamma = -1.0;
        let diags = validate(&bad, &sched);
        assert!(diags.iter().any(|d| d.contains("negative coupling rate")));

        let overlap = ScheduleSpec { t_store: 0.0, ..sched };
        let diags = validate(&good, &overlap);
        assert!(diags.iter().any(|d| d.contains("overlap")));
    }

    #[test]
    fn config_file_round_trip() {
        let text = "\
# example configuration
gamma = 6.0
gamma_l = 1.5e-4
nonlinearity = chi2   # material
chi2 = 0.089
t_in = 2.5
t_store = 9.0
tau_o = 4.08
tau_e = 1.0
eps_eta = 1e-4
dt = 0.005
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.system.gamma, 6.0);
        assert_eq!(cfg.system.nonlinearity, NonlinearityKind::Chi2Shg);
        assert_eq!(cfg.schedule.tau_o, 4.08);
        let again = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        assert!(RunConfig::parse("gamm = 6.0").is_err());
        assert!(RunConfig::parse("gamma = 1\ngamma = 2").is_err());
        assert!(RunConfig::parse("gamma: 6").is_err());
        assert!(RunConfig::parse("nonlinearity = kerr").is_err());
    }

    #[test]
    fn complex_parsing_forms() {
        assert_eq!(parse_complex("1.5").unwrap(), C64::new(1.5, 0.0));
        assert_eq!(parse_complex("1.5+0.3i").unwrap(), C64::new(1.5, 0.3));
        assert_eq!(parse_complex("1.5-0.3i").unwrap(), C64::new(1.5, -0.3));
        assert_eq!(parse_complex("0.3i").unwrap(), C64::new(0.0, 0.3));
        assert_eq!(parse_complex("-2e-3i").unwrap(), C64::new(0.0, -2e-3));
        assert_eq!(parse_complex("1e-2+2e-3i").unwrap(), C64::new(1e-2, 2e-3));
        assert!(parse_complex("abc").is_none());
        for z in [C64::new(1.5, 0.0), C64::new(-0.25, 1e-3), C64::new(0.0, -2.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn rates_conversion_uses_bandwidth_time_product() {
        let cfg = SystemConfig { gamma: 2.0, ..SystemConfig::default() };
        let r = cfg.rates(1.0);
        assert!((r.gamma - 2.0 * OMEGA_TAU).abs() < 1e-12);
        let r2 = cfg.rates(2.0);
        assert!((r2.gamma - OMEGA_TAU).abs() < 1e-12);
        assert!((r.big_gamma() - (r.gamma + r.gamma_l)).abs() < 1e-15);
    }

    #[test]
    fn schedule_derived_times() {
        let s = ScheduleSpec::default();
        assert_eq!(s.absorb_end(), 5.0);
        assert_eq!(s.t_out(), 11.5);
        assert!((s.emit_start() - 7.42).abs() < 1e-12);
        assert!((s.t_total() - 15.58).abs() < 1e-12);
    }
}
