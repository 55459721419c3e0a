//! Frequency dynamics of power systems with mixed synchronous-machine and
//! converter-based generation.
//!
//! The crate covers the full workflow from back-of-envelope to detailed study:
//!
//! * [`reduced`] — low-order transfer functions relating load changes to system
//!   frequency for a synchronous machine alone, with grid-following converter
//!   support, and with grid-forming converter support; exact step responses and
//!   penetration sweeps over the converter share.
//! * [`network`] — bus/branch model, admittance-matrix assembly, and a
//!   Newton–Raphson power flow used to initialize simulations.
//! * [`components`] — nonlinear dynamic models: a 5-state synchronous machine
//!   (swing, governor/turbine, transient EMF, exciter), an 8-state grid-forming
//!   converter (P–f droop with power filter, Q–V droop, cascaded voltage control,
//!   current-loop lag, LC filter capacitor), and static loads.
//! * [`timedomain`] — fixed-step implicit-trapezoidal simulation engine with a
//!   quasi-static phasor network, event handling (load steps, unit trips,
//!   setpoint changes), and channel recording.
//! * [`smallsignal`] — numerical linearization, eigendecomposition with
//!   participation factors, and classification of frequency modes into Global /
//!   Synchronisation character.
//! * [`metrics`] — frequency-quality metrics: moving-average RoCoF, nadir,
//!   windowed average power contributions, and ringdown (damped-sinusoid) fits.
//! * [`scenario`] — serializable scenario description (JSON), validation with
//!   aggregated diagnostics, and the built-in study cases.
//! * [`report`] — deterministic CSV/report rendering with a config hash for
//!   provenance.
//!
//! Heavy, embarrassingly parallel loops (sweep grids, Jacobian columns) run on
//! rayon when the default `parallel` feature is enabled; every such entry point
//! also has a sequential `*_seq` form which is what the crate falls back to when
//! the feature is disabled.

pub mod components;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod par;
pub mod reduced;
pub mod report;
pub mod scenario;
pub mod smallsignal;
pub mod timedomain;

/// Nominal angular frequency in rad/s for a given nominal frequency in Hz.
pub fn omega_base(f0_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f0_hz
}
