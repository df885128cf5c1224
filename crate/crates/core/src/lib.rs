//! Simulation of loading, storing, nonlinearly interacting, and releasing
//! one- and two-photon wavepackets in a pair of parametrically coupled
//! optical cavity modes, with closed-form synthesis of the coupling control
//! and controlled-phase-gate figures of merit.
//!
//! Module map:
//! - [`grid`]: time grids, sampled signals, quadrature, Gaussian wavepackets,
//!   smoothing windows.
//! - [`config`]: physical rates, detunings, schedules, unit conversion, and
//!   the config-file format.
//! - [`synthesis`]: closed-form absorption/emission control fields,
//!   feasibility analysis, emission efficiency, and pump-drive back-out.
//! - [`linear`]: single-photon propagation through one and two modes, loss
//!   and heralding metrics.
//! - [`two_photon`]: joint two-photon amplitudes, two-time rows, the output
//!   field matrix and occupation probabilities.
//! - [`nonlinear`]: material-specific terms — phase shifts, the
//!   second-harmonic four-level system, and the emitter-stage equations.
//! - [`gate`]: end-to-end controlled-phase protocols, storage-time search,
//!   and bridging-pulse optimization.
//! - [`oracle`]: brute-force discrete time-bin propagator used as an
//!   independent correctness check of the ODE engines.

pub mod config;
pub mod error;
pub mod gate;
pub mod grid;
pub mod linear;
pub mod nonlinear;
pub mod oracle;
pub mod synthesis;
pub mod two_photon;

pub use config::{
    derive_detunings, validate, Detunings, FrequencyLadder, NonlinearityKind, Rates, RunConfig,
    ScheduleSpec, SystemConfig,
};
pub use error::{Error, Result};
pub use gate::{
    find_store_time, optimize_pi_control, run_gate_chi2, run_gate_chi3, run_gate_tle,
    run_memory_single, wrap_angle, GateReport, OptimizeOptions, PiParametrization, TleGateOutcome,
};
pub use grid::{
    cumulative_integral, gaussian, inner_product, smoothing_down, smoothing_up, GaussianSpec,
    SampledSignal, TimeGrid, Wavepacket, C64, LN2, OMEGA_TAU,
};
pub use linear::{
    heralded_metrics, pass_probability, propagate_one_mode, propagate_two_mode, HeraldedMetrics,
    SingleModeTrace, TwoModeTrace,
};
pub use linear::storage_factor_a;
pub use nonlinear::{
    chi3_terms, expm2_apply, propagate_shg, propagate_tle_stage, storage_bridge_doubles,
    storage_bridge_single, terms_for, NonlinearTerms, ShgAmplitudes, TleStageState, TleStageTrace,
    TLE_00E, TLE_01E, TLE_01G, TLE_02G, TLE_10E, TLE_10G, TLE_11G, TLE_20G,
};
pub use oracle::{
    convergence_report, pair_bin_error, run_pair_bins, run_single_bins, single_bin_error,
    BinState1, BinState2, MAX_PAIR_BINS,
};
pub use synthesis::{
    absorb_chi2, absorb_chi3, combine_controls, emission_efficiency, emission_grid_and_target,
    emit_chi2, emit_chi3, feasibility_profile, pump_backout, pump_roundtrip, storage_factor,
    substitution_residual, synthesize_protocol, ControlIntermediates, ControlSolution,
    FeasibilityReport, ProtocolControls, PumpDrive, Stage, EPS_DEN,
};
pub use two_photon::{
    assemble_output, combined_row_coefficients, emission_overlap, propagate_pair_driven,
    propagate_pair_from, propagate_two_photon, propagate_two_time, two_photon_overlap,
    TwoPhotonAmplitudes, TwoPhotonField, TwoPhotonMatrix, TwoPhotonState, TwoTimeRow,
};
