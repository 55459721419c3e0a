//! Static load models.
//!
//! Loads are expressed directly on the system base. A constant-impedance load
//! is a fixed shunt admittance `Y = P − jQ` (consuming its nameplate power at
//! 1 pu voltage); a constant-power load is a voltage-dependent current
//! injection `I = −(S/V)*` iterated inside the network solution. The
//! constant-power model loses meaning as the voltage collapses, so it refuses
//! to evaluate below 0.1 pu.

use super::{ComponentError, C64};

/// Voltage dependence of a static load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadModel {
    /// Fixed shunt admittance sized from nameplate power at 1 pu voltage.
    ConstantImpedance,
    /// Fixed complex power regardless of voltage (above the validity floor).
    ConstantPower,
}

/// Load description on the system base.
#[derive(Debug, Clone)]
pub struct LoadParams {
    pub p_mw: f64,
    pub q_mvar: f64,
    pub model: LoadModel,
}

/// An instantiated load at a bus.
#[derive(Debug, Clone)]
pub struct Load {
    pub params: LoadParams,
    /// Consumed complex power in pu on the system base (constant-power model)
    /// or at nominal voltage (constant-impedance model).
    pub s_pu: C64,
    s_base_mva: f64,
}

impl Load {
    pub fn new(params: LoadParams, s_base_mva: f64) -> Result<Self, ComponentError> {
        if !(s_base_mva > 0.0) {
            return Err(ComponentError::NonPositive {
                name: "s_base_mva",
                value: s_base_mva,
            });
        }
        let s_pu = C64::new(params.p_mw / s_base_mva, params.q_mvar / s_base_mva);
        Ok(Self {
            params,
            s_pu,
            s_base_mva,
        })
    }

    /// Shunt admittance contributed to the bus matrix (constant-impedance
    /// loads only).
    pub fn shunt_admittance(&self) -> C64 {
        match self.params.model {
            LoadModel::ConstantImpedance => C64::new(self.s_pu.re, -self.s_pu.im),
            LoadModel::ConstantPower => C64::new(0.0, 0.0),
        }
    }

    /// Voltage-dependent current *injection* into the network (negative of the
    /// consumption current; constant-power loads only).
    pub fn injection_current(&self, v_bus: C64) -> Result<C64, ComponentError> {
        match self.params.model {
            LoadModel::ConstantImpedance => Ok(C64::new(0.0, 0.0)),
            LoadModel::ConstantPower => {
                let v_mag = v_bus.norm();
                if v_mag < 0.1 {
                    return Err(ComponentError::VoltageCollapse { v_pu: v_mag });
                }
                Ok(-(self.s_pu / v_bus).conj())
            }
        }
    }

    /// Scheduled constant-power draw for the power flow (pu). Zero for
    /// constant-impedance loads, which enter through the shunt instead.
    pub fn scheduled_power_pu(&self) -> C64 {
        match self.params.model {
            LoadModel::ConstantImpedance => C64::new(0.0, 0.0),
            LoadModel::ConstantPower => self.s_pu,
        }
    }

    /// Apply a load-step event (MW/Mvar added to the nameplate values).
    pub fn apply_step(&mut self, delta_p_mw: f64, delta_q_mvar: f64) {
        self.params.p_mw += delta_p_mw;
        self.params.q_mvar += delta_q_mvar;
        self.s_pu = C64::new(
            self.params.p_mw / self.s_base_mva,
            self.params.q_mvar / self.s_base_mva,
        );
    }

    /// Power actually consumed at the given voltage, pu.
    pub fn consumed_power_pu(&self, v_bus: C64) -> C64 {
        match self.params.model {
            LoadModel::ConstantImpedance => {
                let y = self.shunt_admittance();
                let i = y * v_bus;
                v_bus * i.conj()
            }
            LoadModel::ConstantPower => self.s_pu,
        }
    }
}
