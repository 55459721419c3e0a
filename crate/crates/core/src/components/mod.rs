//! Nonlinear dynamic component models.
//!
//! Every generating component presents the same boundary to the quasi-static
//! network: a Norton equivalent (current source in parallel with a constant
//! admittance) at its bus, plus a state-derivative function evaluated against
//! the solved bus voltage. Internally each model works in per-unit on its own
//! MVA rating; the engine converts currents and admittances to the system base
//! at the boundary (`y_sys = y_mach·S_rated/S_base`, same for currents, while
//! per-unit voltages coincide).
//!
//! Unit step-up transformers are folded into the component impedance (machine:
//! `Ra + j(X'd + X_tr)` behind the transient EMF; converter: `jX_tr` between
//! the filter capacitor and the bus), so a single-bus network, two Norton
//! sources and a load already realize the classic machine-plus-converter
//! test system.

pub mod gfor;
pub mod load;
pub mod sg;

use nalgebra::Complex;
use thiserror::Error;

pub use gfor::{GforParams, GforUnit};
pub use load::{Load, LoadModel, LoadParams};
pub use sg::{SgParams, SgUnit};

pub type C64 = Complex<f64>;

/// Errors from component construction and evaluation.
#[derive(Debug, Error)]
pub enum ComponentError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("voltage magnitude {v_pu:.4} pu at the load bus is below the 0.1 pu validity floor of the static load model")]
    VoltageCollapse { v_pu: f64 },
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<(), ComponentError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ComponentError::NonPositive { name, value })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<(), ComponentError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ComponentError::Negative { name, value })
    }
}

/// Observables of a generating unit at one instant.
#[derive(Debug, Clone, Copy)]
pub struct UnitOutputs {
    /// Electrical frequency the unit enforces/swings at, Hz.
    pub frequency_hz: f64,
    /// Active power injected into its bus, pu on the unit rating.
    pub p_bus_pu: f64,
    /// Reactive power injected into its bus, pu on the unit rating.
    pub q_bus_pu: f64,
    /// Internal source angle (rotor angle / droop angle) in the synchronous
    /// frame, radians, unwrapped.
    pub internal_angle_rad: f64,
    /// Internal source voltage magnitude (transient EMF / capacitor voltage),
    /// pu.
    pub internal_voltage_pu: f64,
}

/// A generating unit: either a synchronous machine or a grid-forming
/// converter.
#[derive(Debug, Clone)]
pub enum Unit {
    Sg(SgUnit),
    Gfor(GforUnit),
}

impl Unit {
    pub fn n_states(&self) -> usize {
        match self {
            Unit::Sg(_) => sg::N_STATES,
            Unit::Gfor(_) => gfor::N_STATES,
        }
    }

    pub fn state_names(&self) -> Vec<String> {
        match self {
            Unit::Sg(u) => u.state_names(),
            Unit::Gfor(u) => u.state_names(),
        }
    }

    pub fn s_rated_mva(&self) -> f64 {
        match self {
            Unit::Sg(u) => u.params.s_rated_mva,
            Unit::Gfor(u) => u.params.s_rated_mva,
        }
    }

    /// Norton admittance on the unit's own base.
    pub fn norton_admittance(&self) -> C64 {
        match self {
            Unit::Sg(u) => u.norton_admittance(),
            Unit::Gfor(u) => u.norton_admittance(),
        }
    }

    /// Norton current injection on the unit's own base, network frame.
    pub fn norton_current(&self, x: &[f64]) -> C64 {
        match self {
            Unit::Sg(u) => u.norton_current(x),
            Unit::Gfor(u) => u.norton_current(x),
        }
    }

    /// Initialize states from the power-flow operating point (bus voltage and
    /// dispatched injection on the unit base), resolving effective setpoints
    /// so that every derivative is zero.
    pub fn init(&mut self, v_bus: C64, p_pu: f64, q_pu: f64) -> Vec<f64> {
        match self {
            Unit::Sg(u) => u.init(v_bus, p_pu, q_pu),
            Unit::Gfor(u) => u.init(v_bus, p_pu, q_pu),
        }
    }

    /// State derivatives given the solved bus voltage.
    pub fn derivatives(&self, x: &[f64], v_bus: C64, dx: &mut [f64]) {
        match self {
            Unit::Sg(u) => u.derivatives(x, v_bus, dx),
            Unit::Gfor(u) => u.derivatives(x, v_bus, dx),
        }
    }

    /// Instantaneous observables.
    pub fn outputs(&self, x: &[f64], v_bus: C64) -> UnitOutputs {
        match self {
            Unit::Sg(u) => u.outputs(x, v_bus),
            Unit::Gfor(u) => u.outputs(x, v_bus),
        }
    }

    /// Local index of the state carrying the unit's frequency dynamics
    /// (machine speed deviation / converter filtered power).
    pub fn freq_state_index(&self) -> usize {
        match self {
            Unit::Sg(_) => sg::SPEED_STATE,
            Unit::Gfor(_) => gfor::P_FILT_STATE,
        }
    }

    /// Sparse output row mapping local states to the unit's per-unit frequency
    /// deviation (`Δf/f0`): `Δω` for a machine, `−R·(p_filt − p*)` for a
    /// grid-forming converter.
    pub fn freq_output_row(&self) -> Vec<(usize, f64)> {
        match self {
            Unit::Sg(_) => vec![(sg::SPEED_STATE, 1.0)],
            Unit::Gfor(u) => vec![(gfor::P_FILT_STATE, -u.params.r_f_gfor_pu)],
        }
    }

    /// Change a named setpoint (used by setpoint-change events). Values are in
    /// physical units: MW for power references, pu for voltage, Hz for
    /// frequency.
    pub fn set_setpoint(&mut self, field: &str, value: f64) -> Result<(), String> {
        match self {
            Unit::Sg(u) => u.set_setpoint(field, value),
            Unit::Gfor(u) => u.set_setpoint(field, value),
        }
    }
}
