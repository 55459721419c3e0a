//! Grid-forming converter: P–f droop with power filter, Q–V droop, cascaded
//! voltage control, a current-loop lag and the LC-filter capacitor.
//!
//! The converter forms its own voltage at the filter capacitor and connects to
//! the bus through the unit transformer reactance. Control runs in the
//! converter dq frame anchored at the droop angle θ (d = real axis, q =
//! imaginary axis of the local complex quantities). Eight states:
//!
//! | # | state        | equation |
//! |---|--------------|----------|
//! | 0 | P_filt (pu)  | `dP_filt/dt = (P_poc − P_filt)/τ_p-gfor` |
//! | 1 | θ (rad)      | `dθ/dt = ω_b(ω_vsc − 1)`, `ω_vsc = f*/f0 − R_f-gfor(P_filt − P*)` |
//! | 2 | ξ_d (pu·s)   | voltage-PI integrator, d axis |
//! | 3 | ξ_q (pu·s)   | voltage-PI integrator, q axis |
//! | 4 | i_ctl_d (pu) | current loop as a lag: `τ_cc·di/dt = (kpv·e_v + kiv·ξ) − i` |
//! | 5 | i_ctl_q (pu) | |
//! | 6 | v_c_d (pu)   | capacitor: `dv/dt = (ω_b/C_ac)·i_ctl` (see below) |
//! | 7 | v_c_q (pu)   | |
//!
//! The voltage reference is `V* + k_qv(Q* − Q_poc)` on the d axis; droop power
//! `P_poc` and `Q_poc` are measured at the capacitor node. The cascaded
//! voltage PI produces a current-correction reference which the closed current
//! loop tracks as a first-order lag `τ_cc` (state `i_ctl`). The measured grid
//! current and the capacitor current at the converter frequency are
//! compensated directly at the modulation stage — the standard feed-forward
//! terms — so they cancel exactly in the capacitor ODE
//! `C_ac/ω_b·dv/dt = i_cv − i_g − jω_vsc·C_ac·v` and the correction current is
//! what charges the capacitor. (Routing those feed-forward terms through the
//! lag instead couples the instantaneous transformer current back through a
//! delayed path and is small-signal unstable for any τ_cc > 0; the
//! modulation-stage compensation is both the conventional implementation and
//! the stable reduction.) The total converter current
//! `i_cv = i_g + jω_vsc·C_ac·v_c + i_ctl` remains available as an observable.
//!
//! Effective setpoints (`P*`, `Q*`, `V*`) are resolved during `init` from the
//! power-flow operating point, so the converter starts in exact equilibrium
//! with the PI integrators and the correction current at zero.

use super::{check_non_negative, check_positive, ComponentError, UnitOutputs, C64};

/// Number of converter states.
pub const N_STATES: usize = 8;
/// Local index of the filtered-power state that carries the frequency
/// dynamics.
pub const P_FILT_STATE: usize = 0;

/// Converter parameters on the unit's own MVA base.
#[derive(Debug, Clone, PartialEq)]
pub struct GforParams {
    pub s_rated_mva: f64,
    /// Unit transformer reactance between capacitor and bus, pu.
    pub x_tr_pu: f64,
    /// Converter-side filter resistance, pu (used for the modulation-voltage
    /// observable; the closed current loop is reduced to a lag).
    pub rc_pu: f64,
    /// Converter-side filter inductance, pu.
    pub lc_pu: f64,
    /// Filter capacitance, pu.
    pub cac_pu: f64,
    /// Closed-current-loop time constant, seconds.
    pub tau_cc_s: f64,
    /// Voltage-loop proportional gain.
    pub kpv: f64,
    /// Voltage-loop integral gain.
    pub kiv: f64,
    /// P–f droop, pu frequency per pu power.
    pub r_f_gfor_pu: f64,
    /// Active-power filter time constant, seconds.
    pub tau_p_gfor_s: f64,
    /// Q–V droop, pu voltage per pu reactive power.
    pub k_qv: f64,
    /// Scheduled active power, MW (power-flow dispatch target).
    pub p_star_mw: f64,
    /// Scheduled reactive power, Mvar.
    pub q_star_mvar: f64,
    /// Voltage-magnitude setpoint, pu.
    pub v_star_pu: f64,
    /// Droop frequency reference, Hz.
    pub f_star_hz: f64,
}

impl GforParams {
    /// Voltage-loop PI gains pole-placed against the filter capacitor for a
    /// bandwidth `f_bw` (Hz) at damping ζ = 0.7: with the fast current loop,
    /// the voltage plant is `ω_b/(C_ac·s)`, giving `kpv = 2ζω_n·C_ac/ω_b` and
    /// `kiv = ω_n²·C_ac/ω_b`.
    pub fn pole_placed_voltage_gains(cac_pu: f64, f_bw_hz: f64, f0_hz: f64) -> (f64, f64) {
        let omega_b = 2.0 * std::f64::consts::PI * f0_hz;
        let omega_n = 2.0 * std::f64::consts::PI * f_bw_hz;
        let zeta = 0.7;
        (
            2.0 * zeta * omega_n * cac_pu / omega_b,
            omega_n * omega_n * cac_pu / omega_b,
        )
    }

    /// Study defaults for a converter of the given rating and dispatch.
    pub fn typical(s_rated_mva: f64, p_star_mw: f64, f0_hz: f64) -> Self {
        let cac = 0.05;
        let (kpv, kiv) = Self::pole_placed_voltage_gains(cac, 50.0, f0_hz);
        Self {
            s_rated_mva,
            x_tr_pu: 0.1,
            rc_pu: 0.005,
            lc_pu: 0.15,
            cac_pu: cac,
            tau_cc_s: 0.001,
            kpv,
            kiv,
            r_f_gfor_pu: 0.05,
            tau_p_gfor_s: 0.1,
            k_qv: 0.02,
            p_star_mw,
            q_star_mvar: 0.0,
            v_star_pu: 1.0,
            f_star_hz: f0_hz,
        }
    }

    fn validate(&self) -> Result<(), ComponentError> {
        check_positive("s_rated_mva", self.s_rated_mva)?;
        check_positive("x_tr_pu", self.x_tr_pu)?;
        check_non_negative("rc_pu", self.rc_pu)?;
        check_non_negative("lc_pu", self.lc_pu)?;
        check_positive("cac_pu", self.cac_pu)?;
        check_positive("tau_cc_s", self.tau_cc_s)?;
        check_non_negative("kpv", self.kpv)?;
        check_non_negative("kiv", self.kiv)?;
        check_non_negative("r_f_gfor_pu", self.r_f_gfor_pu)?;
        check_positive("tau_p_gfor_s", self.tau_p_gfor_s)?;
        check_non_negative("k_qv", self.k_qv)?;
        check_positive("v_star_pu", self.v_star_pu)?;
        check_positive("f_star_hz", self.f_star_hz)?;
        Ok(())
    }
}

/// A grid-forming converter with resolved operating references.
#[derive(Debug, Clone)]
pub struct GforUnit {
    pub params: GforParams,
    pub f0_hz: f64,
    omega_b: f64,
    /// Effective droop power reference, pu on the unit base.
    p_star_pu: f64,
    /// Effective reactive reference, pu.
    q_star_pu: f64,
    /// Effective voltage reference, pu.
    v_star_eff_pu: f64,
}

impl GforUnit {
    pub fn new(params: GforParams, f0_hz: f64) -> Result<Self, ComponentError> {
        params.validate()?;
        check_positive("f0_hz", f0_hz)?;
        let p_star = params.p_star_mw / params.s_rated_mva;
        let q_star = params.q_star_mvar / params.s_rated_mva;
        let v_star = params.v_star_pu;
        Ok(Self {
            params,
            f0_hz,
            omega_b: 2.0 * std::f64::consts::PI * f0_hz,
            p_star_pu: p_star,
            q_star_pu: q_star,
            v_star_eff_pu: v_star,
        })
    }

    pub fn state_names(&self) -> Vec<String> {
        vec![
            "p_filt_pu".into(),
            "theta_rad".into(),
            "xi_d_pu".into(),
            "xi_q_pu".into(),
            "i_ctl_d_pu".into(),
            "i_ctl_q_pu".into(),
            "v_c_d_pu".into(),
            "v_c_q_pu".into(),
        ]
    }

    pub fn norton_admittance(&self) -> C64 {
        C64::new(1.0, 0.0) / C64::new(0.0, self.params.x_tr_pu)
    }

    pub fn norton_current(&self, x: &[f64]) -> C64 {
        let v_cap_net = C64::new(x[6], x[7]) * C64::from_polar(1.0, x[1]);
        v_cap_net / C64::new(0.0, self.params.x_tr_pu)
    }

    /// Per-unit converter frequency from the droop law.
    fn omega_vsc(&self, p_filt: f64) -> f64 {
        self.params.f_star_hz / self.f0_hz
            - self.params.r_f_gfor_pu * (p_filt - self.p_star_pu)
    }

    /// Initialize from the dispatched operating point; resolves `P*`, `Q*`,
    /// `V*` so the converter starts at exact equilibrium.
    pub fn init(&mut self, v_bus: C64, p_pu: f64, q_pu: f64) -> Vec<f64> {
        let s = C64::new(p_pu, q_pu);
        let ig_net = (s / v_bus).conj();
        let v_cap_net = v_bus + C64::new(0.0, self.params.x_tr_pu) * ig_net;
        let theta0 = v_cap_net.arg();
        let vd0 = v_cap_net.norm();
        let rot = C64::from_polar(1.0, -theta0);
        let ig = ig_net * rot;
        let s_poc = C64::new(vd0, 0.0) * ig.conj();
        self.p_star_pu = s_poc.re;
        self.q_star_pu = s_poc.im;
        self.v_star_eff_pu = vd0;
        self.params.f_star_hz = self.f0_hz;
        vec![s_poc.re, theta0, 0.0, 0.0, 0.0, 0.0, vd0, 0.0]
    }

    pub fn derivatives(&self, x: &[f64], v_bus: C64, dx: &mut [f64]) {
        let p = &self.params;
        let p_filt = x[0];
        let theta = x[1];
        let xi = C64::new(x[2], x[3]);
        let i_ctl = C64::new(x[4], x[5]);
        let v = C64::new(x[6], x[7]);

        let rot = C64::from_polar(1.0, theta);
        let ig = ((v * rot - v_bus) / C64::new(0.0, p.x_tr_pu)) * rot.conj();
        let s_poc = v * ig.conj();
        let omega = self.omega_vsc(p_filt);

        let v_ref = C64::new(
            self.v_star_eff_pu + p.k_qv * (self.q_star_pu - s_poc.im),
            0.0,
        );
        let ev = v_ref - v;
        // Grid-current and capacitor-current feed-forwards are compensated at
        // the modulation stage, so the lag state carries only the voltage-PI
        // correction and the capacitor ODE reduces to its cancelled form.
        let i_ref = ev * p.kpv + xi * p.kiv;
        let d_ictl = (i_ref - i_ctl) / p.tau_cc_s;
        let d_v = i_ctl * (self.omega_b / p.cac_pu);

        dx[0] = (s_poc.re - p_filt) / p.tau_p_gfor_s;
        dx[1] = self.omega_b * (omega - 1.0);
        dx[2] = ev.re;
        dx[3] = ev.im;
        dx[4] = d_ictl.re;
        dx[5] = d_ictl.im;
        dx[6] = d_v.re;
        dx[7] = d_v.im;
    }

    pub fn outputs(&self, x: &[f64], v_bus: C64) -> UnitOutputs {
        let theta = x[1];
        let v = C64::new(x[6], x[7]);
        let rot = C64::from_polar(1.0, theta);
        let ig_net = (v * rot - v_bus) / C64::new(0.0, self.params.x_tr_pu);
        let s_bus = v_bus * ig_net.conj();
        UnitOutputs {
            frequency_hz: self.f0_hz * self.omega_vsc(x[0]),
            p_bus_pu: s_bus.re,
            q_bus_pu: s_bus.im,
            internal_angle_rad: theta,
            internal_voltage_pu: v.norm(),
        }
    }

    /// Total converter-side current `i_g + jω·C_ac·v_c + i_ctl`, pu in the
    /// converter frame (the feed-forward terms plus the correction state).
    pub fn converter_current(&self, x: &[f64], v_bus: C64) -> C64 {
        let theta = x[1];
        let v = C64::new(x[6], x[7]);
        let rot = C64::from_polar(1.0, theta);
        let ig = ((v * rot - v_bus) / C64::new(0.0, self.params.x_tr_pu)) * rot.conj();
        let omega = self.omega_vsc(x[0]);
        ig + C64::new(0.0, omega * self.params.cac_pu) * v + C64::new(x[4], x[5])
    }

    /// Converter modulation voltage behind the `Rc + jωLc` filter branch, pu
    /// (an observable; the closed current loop is already reduced to a lag).
    pub fn modulation_voltage(&self, x: &[f64], v_bus: C64) -> C64 {
        let i_cv = self.converter_current(x, v_bus);
        let v = C64::new(x[6], x[7]);
        let omega = self.omega_vsc(x[0]);
        v + i_cv * C64::new(self.params.rc_pu, omega * self.params.lc_pu)
    }

    pub fn set_setpoint(&mut self, field: &str, value: f64) -> Result<(), String> {
        match field {
            "p_star_mw" => {
                self.p_star_pu = value / self.params.s_rated_mva;
                self.params.p_star_mw = value;
                Ok(())
            }
            "q_star_mvar" => {
                self.q_star_pu = value / self.params.s_rated_mva;
                self.params.q_star_mvar = value;
                Ok(())
            }
            "v_star_pu" => {
                self.v_star_eff_pu = value;
                self.params.v_star_pu = value;
                Ok(())
            }
            "f_star_hz" => {
                self.params.f_star_hz = value;
                Ok(())
            }
            other => Err(format!(
                "unknown converter setpoint `{other}` (expected p_star_mw, q_star_mvar, v_star_pu or f_star_hz)"
            )),
        }
    }
}
