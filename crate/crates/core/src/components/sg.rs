//! Synchronous machine: swing dynamics, governor/turbine, transient EMF and a
//! first-order excitation system.
//!
//! The machine is a transient EMF `E'∠δ` behind `Ra + jX'd` (the unit
//! transformer reactance is folded in series). Five states:
//!
//! | # | state    | equation |
//! |---|----------|----------|
//! | 0 | δ (rad)  | `dδ/dt = ω_b·Δω` |
//! | 1 | Δω (pu)  | `dΔω/dt = (P_mec − P_e − D·Δω)/(2H)` |
//! | 2 | P_mec    | `dP_mec/dt = (P_ref − P_mec)/τ_turb`, `P_ref = P0_ref + (f_ref/f0 − 1 − Δω)/R_f-sg` |
//! | 3 | E' (pu)  | `dE'/dt = (E_fd − E')/τ_d0'` |
//! | 4 | E_fd     | `dE_fd/dt = (E_fd-ref + K_avr(V_ref − |V_t|) − E_fd)/τ_avr` |
//!
//! `P_e` is the air-gap power `Re(E'∠δ · I*)` and `V_t` the machine-side
//! terminal voltage (bus voltage plus the transformer drop). Effective
//! references (`P0_ref`, `E_fd-ref`, `V_ref`) are resolved during `init` from
//! the power-flow operating point so the machine starts in exact equilibrium.

use super::{check_non_negative, check_positive, ComponentError, UnitOutputs, C64};

/// Number of machine states.
pub const N_STATES: usize = 5;
/// Local index of the speed-deviation state.
pub const SPEED_STATE: usize = 1;

/// Machine parameters on the unit's own MVA base.
#[derive(Debug, Clone, PartialEq)]
pub struct SgParams {
    pub s_rated_mva: f64,
    /// Inertia constant, seconds.
    pub h_s: f64,
    /// Mechanical damping coefficient, pu torque per pu speed.
    pub d_pu: f64,
    /// Transient reactance X'd, pu.
    pub xd_transient_pu: f64,
    /// Stator resistance, pu.
    pub ra_pu: f64,
    /// Unit transformer reactance folded into the machine branch, pu.
    pub x_tr_pu: f64,
    /// Open-circuit transient time constant τ_d0', seconds.
    pub tau_d0_s: f64,
    /// Governor droop, pu frequency per pu power.
    pub r_f_sg_pu: f64,
    /// Turbine time constant, seconds.
    pub tau_turb_s: f64,
    /// Excitation gain (pu field voltage per pu voltage error).
    pub k_avr: f64,
    /// Excitation time constant, seconds.
    pub tau_avr_s: f64,
    /// Scheduled active power, MW (power-flow dispatch target).
    pub p_ref_mw: f64,
    /// Governor frequency reference, Hz.
    pub f_ref_hz: f64,
    /// Voltage setpoint, pu (power-flow magnitude target at the bus).
    pub v_ref_pu: f64,
}

impl SgParams {
    /// Study defaults for a machine of the given rating and dispatch; the
    /// electrical constants are typical round-rotor values.
    pub fn typical(s_rated_mva: f64, p_ref_mw: f64, f0_hz: f64) -> Self {
        Self {
            s_rated_mva,
            h_s: 5.0,
            d_pu: 0.0,
            xd_transient_pu: 0.3,
            // Lossless by default so droop shares settle exactly on bus power.
            ra_pu: 0.0,
            x_tr_pu: 0.1,
            tau_d0_s: 5.0,
            r_f_sg_pu: 0.05,
            // Non-reheat steam-chest constant; a multi-second value would
            // collide with slow converter droop filters and merge the two
            // power-recovery poles into an oscillatory pair.
            tau_turb_s: 0.4,
            // Modest excitation gain: without damper windings (out of scope
            // here) a high-gain fast AVR injects negative damping into the
            // inter-unit swing and can destabilize it outright.
            k_avr: 5.0,
            tau_avr_s: 0.05,
            p_ref_mw,
            f_ref_hz: f0_hz,
            v_ref_pu: 1.0,
        }
    }

    fn validate(&self) -> Result<(), ComponentError> {
        check_positive("s_rated_mva", self.s_rated_mva)?;
        check_positive("h_s", self.h_s)?;
        check_non_negative("d_pu", self.d_pu)?;
        check_positive("xd_transient_pu", self.xd_transient_pu)?;
        check_non_negative("ra_pu", self.ra_pu)?;
        check_non_negative("x_tr_pu", self.x_tr_pu)?;
        check_positive("tau_d0_s", self.tau_d0_s)?;
        check_positive("r_f_sg_pu", self.r_f_sg_pu)?;
        check_positive("tau_turb_s", self.tau_turb_s)?;
        check_non_negative("k_avr", self.k_avr)?;
        check_positive("tau_avr_s", self.tau_avr_s)?;
        check_positive("f_ref_hz", self.f_ref_hz)?;
        check_positive("v_ref_pu", self.v_ref_pu)?;
        Ok(())
    }
}

/// A synchronous machine with resolved operating references.
#[derive(Debug, Clone)]
pub struct SgUnit {
    pub params: SgParams,
    pub f0_hz: f64,
    omega_b: f64,
    /// Effective governor power reference, pu on the unit base.
    p0_ref_pu: f64,
    /// Effective field-voltage reference, pu.
    efd_ref_pu: f64,
    /// Effective AVR voltage reference, pu.
    v_ref_eff_pu: f64,
}

impl SgUnit {
    pub fn new(params: SgParams, f0_hz: f64) -> Result<Self, ComponentError> {
        params.validate()?;
        check_positive("f0_hz", f0_hz)?;
        let p0 = params.p_ref_mw / params.s_rated_mva;
        let v_ref = params.v_ref_pu;
        Ok(Self {
            params,
            f0_hz,
            omega_b: 2.0 * std::f64::consts::PI * f0_hz,
            p0_ref_pu: p0,
            efd_ref_pu: 1.0,
            v_ref_eff_pu: v_ref,
        })
    }

    pub fn state_names(&self) -> Vec<String> {
        vec![
            "delta_rad".into(),
            "domega_pu".into(),
            "p_mec_pu".into(),
            "e_tr_pu".into(),
            "e_fd_pu".into(),
        ]
    }

    /// Series impedance between the internal EMF and the bus, unit base.
    fn internal_impedance(&self) -> C64 {
        C64::new(
            self.params.ra_pu,
            self.params.xd_transient_pu + self.params.x_tr_pu,
        )
    }

    pub fn norton_admittance(&self) -> C64 {
        C64::new(1.0, 0.0) / self.internal_impedance()
    }

    pub fn norton_current(&self, x: &[f64]) -> C64 {
        let e = C64::from_polar(x[3], x[0]);
        e / self.internal_impedance()
    }

    /// Initialize from the dispatched operating point; returns the state
    /// vector and locks the effective references to make it an equilibrium.
    pub fn init(&mut self, v_bus: C64, p_pu: f64, q_pu: f64) -> Vec<f64> {
        let s = C64::new(p_pu, q_pu);
        let i = (s / v_bus).conj();
        let e_ph = v_bus + self.internal_impedance() * i;
        let delta0 = e_ph.arg();
        let e0 = e_ph.norm();
        let p_e0 = (e_ph * i.conj()).re;
        let v_t0 = v_bus + C64::new(0.0, self.params.x_tr_pu) * i;
        self.p0_ref_pu = p_e0;
        self.efd_ref_pu = e0;
        self.v_ref_eff_pu = v_t0.norm();
        vec![delta0, 0.0, p_e0, e0, e0]
    }

    pub fn derivatives(&self, x: &[f64], v_bus: C64, dx: &mut [f64]) {
        let p = &self.params;
        let (delta, domega, p_mec, e_tr, e_fd) = (x[0], x[1], x[2], x[3], x[4]);
        let e = C64::from_polar(e_tr, delta);
        let i = (e - v_bus) / self.internal_impedance();
        let p_e = (e * i.conj()).re;
        let v_t = v_bus + C64::new(0.0, p.x_tr_pu) * i;

        dx[0] = self.omega_b * domega;
        dx[1] = (p_mec - p_e - p.d_pu * domega) / (2.0 * p.h_s);
        let p_ref = self.p0_ref_pu + (p.f_ref_hz / self.f0_hz - 1.0 - domega) / p.r_f_sg_pu;
        dx[2] = (p_ref - p_mec) / p.tau_turb_s;
        dx[3] = (e_fd - e_tr) / p.tau_d0_s;
        let e_cmd = self.efd_ref_pu + p.k_avr * (self.v_ref_eff_pu - v_t.norm());
        dx[4] = (e_cmd - e_fd) / p.tau_avr_s;
    }

    pub fn outputs(&self, x: &[f64], v_bus: C64) -> UnitOutputs {
        let e = C64::from_polar(x[3], x[0]);
        let i = (e - v_bus) / self.internal_impedance();
        let s_bus = v_bus * i.conj();
        UnitOutputs {
            frequency_hz: self.f0_hz * (1.0 + x[1]),
            p_bus_pu: s_bus.re,
            q_bus_pu: s_bus.im,
            internal_angle_rad: x[0],
            internal_voltage_pu: x[3],
        }
    }

    pub fn set_setpoint(&mut self, field: &str, value: f64) -> Result<(), String> {
        match field {
            "p_ref_mw" => {
                self.p0_ref_pu = value / self.params.s_rated_mva;
                self.params.p_ref_mw = value;
                Ok(())
            }
            "v_ref_pu" => {
                self.v_ref_eff_pu = value;
                self.params.v_ref_pu = value;
                Ok(())
            }
            "f_ref_hz" => {
                self.params.f_ref_hz = value;
                Ok(())
            }
            other => Err(format!(
                "unknown machine setpoint `{other}` (expected p_ref_mw, v_ref_pu or f_ref_hz)"
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> SgUnit {
        SgUnit::new(SgParams::typical(400.0, 320.0, 50.0), 50.0).unwrap()
    }

    #[test]
    fn init_is_an_exact_equilibrium() {
        let mut u = unit();
        let v_bus = C64::from_polar(1.02, 0.1);
        let x = u.init(v_bus, 0.8, 0.25);
        let mut dx = [0.0; N_STATES];
        u.derivatives(&x, v_bus, &mut dx);
        for (i, d) in dx.iter().enumerate() {
            assert!(d.abs() < 1e-12, "state {i} derivative {d}");
        }
    }

    #[test]
    fn init_balances_mechanical_and_electrical_power() {
        let mut params = SgParams::typical(400.0, 320.0, 50.0);
        params.ra_pu = 0.005;
        let mut u = SgUnit::new(params, 50.0).unwrap();
        let v_bus = C64::from_polar(1.0, 0.0);
        let x = u.init(v_bus, 0.8, 0.1);
        // P_mec equals air-gap power, which exceeds bus power by stator loss.
        let i = (C64::from_polar(x[3], x[0]) - v_bus) / C64::new(0.005, 0.4);
        let p_airgap = (C64::from_polar(x[3], x[0]) * i.conj()).re;
        assert_abs_diff_eq!(x[2], p_airgap, epsilon = 1e-12);
        assert!(x[2] >= 0.8);
    }

    #[test]
    fn bus_power_output_matches_dispatch_after_init() {
        let mut u = unit();
        let v_bus = C64::from_polar(0.98, -0.05);
        let x = u.init(v_bus, 0.6, -0.1);
        let out = u.outputs(&x, v_bus);
        assert_abs_diff_eq!(out.p_bus_pu, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(out.q_bus_pu, -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.frequency_hz, 50.0, epsilon = 1e-12);
    }

    #[test]
    fn governor_reacts_against_underfrequency() {
        let mut u = unit();
        let v_bus = C64::from_polar(1.0, 0.0);
        let mut x = u.init(v_bus, 0.8, 0.0);
        x[1] = -0.004; // 0.2 Hz under nominal
        let mut dx = [0.0; N_STATES];
        u.derivatives(&x, v_bus, &mut dx);
        // P_ref = P0 + 0.004/0.05 = P0 + 0.08 pu, so the turbine must ramp up
        // at (P_ref − P_mec)/τ_turb with the 0.4 s default constant.
        assert!(dx[2] > 0.0);
        assert_abs_diff_eq!(dx[2], 0.08 / 0.4, epsilon = 1e-9);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let mut p = SgParams::typical(400.0, 320.0, 50.0);
        p.h_s = 0.0;
        assert!(matches!(
            SgUnit::new(p, 50.0).unwrap_err(),
            ComponentError::NonPositive { name: "h_s", .. }
        ));
    }
}
