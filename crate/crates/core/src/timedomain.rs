//! Fixed-step nonlinear time-domain simulation.
//!
//! The electromechanical states of all units are integrated with an implicit
//! trapezoidal rule while the network stays quasi-static: at every evaluation
//! the bus voltages solve the algebraic equation `Y_aug·V = I_norton(x) +
//! I_loads(V)`, where `Y_aug` is the bus matrix augmented with the unit Norton
//! admittances and constant-impedance loads, and constant-power loads
//! contribute voltage-dependent injections handled by an inner fixed-point
//! loop. The trapezoidal update itself is solved by fixed-point iteration (the
//! contraction factor is `dt/2` over the fastest time constant, safely below 1
//! at the enforced `dt ≤ τ_min/10`).
//!
//! Events are quantized to step boundaries (with a warning when rounding
//! moves them) and mutate only parameters and topology: differential states
//! carry across an event unchanged, the algebraic voltages re-solve, which is
//! exactly the jump a breaker operation produces in a phasor model.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::components::{ComponentError, Load, Unit, UnitOutputs};
use crate::network::{BusKind, Network, NetworkError, PowerFlowInput, PowerFlowOptions, PowerFlowSolution, solve_power_flow, C64};

/// Errors raised during assembly or simulation.
#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Component(#[from] ComponentError),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}` referenced by an event")]
    UnknownId(String),
    #[error("bus `{0}` referenced by a component does not exist")]
    UnknownBus(String),
    #[error("scenario has no generating units")]
    NoUnits,
    #[error("initialization left a state derivative of {residual:.3e} pu/s (> {limit:.1e}); the operating point is not an equilibrium")]
    EquilibriumResidual { residual: f64, limit: f64 },
    #[error("step size {dt_s} s exceeds τ_min/10 = {limit_s} s for the fastest component time constant")]
    DtTooLarge { dt_s: f64, limit_s: f64 },
    #[error("inner iteration failed to reach {tol:.1e} at t = {t_s:.6} s (residual {residual:.3e})")]
    InnerNoConvergence { t_s: f64, tol: f64, residual: f64 },
    #[error("network algebraic loop failed to converge at t = {t_s:.6} s (residual {residual:.3e})")]
    AlgebraicNoConvergence { t_s: f64, residual: f64 },
    #[error("state {name} diverged (|value| > {limit:.1e}) at t = {t_s:.6} s")]
    Diverged { t_s: f64, name: String, limit: f64 },
    #[error("cannot trip `{id}` at t = {t_s} s: it is the last frequency-forming unit")]
    LastUnitTrip { t_s: f64, id: String },
    #[error("invalid event at t = {t_s} s: {message}")]
    BadEvent { t_s: f64, message: String },
    #[error("simulation horizon {t_end_s} s and step {dt_s} s define no steps")]
    EmptyHorizon { t_end_s: f64, dt_s: f64 },
}

/// A generating unit attached to a bus.
#[derive(Debug, Clone)]
pub struct UnitAt {
    pub id: String,
    pub bus: usize,
    pub unit: Unit,
}

/// A load attached to a bus.
#[derive(Debug, Clone)]
pub struct LoadAt {
    pub id: String,
    pub bus: usize,
    pub load: Load,
}

/// Timed events applied at step boundaries.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    /// Add MW/Mvar to the load at a bus (creating a constant-power load there
    /// if the bus has none).
    LoadStep {
        t_s: f64,
        bus: String,
        delta_p_mw: f64,
        delta_q_mvar: f64,
    },
    /// Disconnect a unit.
    UnitTrip { t_s: f64, unit_id: String },
    /// Change a unit setpoint (`p_ref_mw`, `v_ref_pu`, `p_star_mw`, ...).
    SetpointChange {
        t_s: f64,
        unit_id: String,
        field: String,
        value: f64,
    },
}

impl Event {
    pub fn time_s(&self) -> f64 {
        match self {
            Event::LoadStep { t_s, .. }
            | Event::UnitTrip { t_s, .. }
            | Event::SetpointChange { t_s, .. } => *t_s,
        }
    }
}

/// Integrator controls.
#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    pub dt_s: f64,
    pub t_end_s: f64,
    /// Convergence tolerance of the trapezoidal fixed-point iteration.
    pub inner_tol: f64,
    pub max_inner_iterations: usize,
    /// Record every n-th step (1 = every step).
    pub record_every: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            dt_s: 1e-4,
            t_end_s: 20.0,
            inner_tol: 1e-12,
            max_inner_iterations: 50,
            record_every: 1,
        }
    }
}

/// One recorded signal.
#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub data: Vec<f64>,
}

/// Simulation output: uniformly sampled channels plus any warnings raised
/// during assembly or execution.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub time_s: Vec<f64>,
    pub channels: Vec<Channel>,
    pub dt_s: f64,
    pub warnings: Vec<String>,
}

impl SimResult {
    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Index of the first sample at or after `t_s`.
    pub fn index_at(&self, t_s: f64) -> usize {
        self.time_s
            .iter()
            .position(|&t| t >= t_s - 1e-12)
            .unwrap_or(self.time_s.len().saturating_sub(1))
    }
}

/// Divergence guard on state magnitude.
const STATE_LIMIT: f64 = 1e6;
/// Equilibrium residual accepted after initialization, pu/s.
const EQUILIBRIUM_LIMIT: f64 = 1e-8;

/// The assembled dynamic system: network, units, loads and current state.
#[derive(Debug, Clone)]
pub struct System {
    pub network: Network,
    pub units: Vec<UnitAt>,
    pub loads: Vec<LoadAt>,
    active: Vec<bool>,
    state_offsets: Vec<usize>,
    n_states: usize,
    /// Augmented bus matrix (network + Norton shunts of active units).
    y_aug: DMatrix<C64>,
    /// Plain network matrix (lines + constant-impedance loads, no Nortons).
    y_net: DMatrix<C64>,
    y_lu: Option<nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>>,
    /// Current state vector.
    pub x: DVector<f64>,
    /// Bus voltages at the last solved instant.
    pub v_bus: Vec<C64>,
    pub f0_hz: f64,
    pub s_base_mva: f64,
}

impl System {
    /// Assemble a system: derive bus roles, run the power flow, initialize
    /// every component at the solved operating point and verify the result is
    /// an equilibrium.
    ///
    /// Bus roles are derived from the attached units: every unit bus is PV,
    /// the bus of the largest-rated unit is the slack, everything else is PQ.
    pub fn assemble(
        mut network: Network,
        mut units: Vec<UnitAt>,
        loads: Vec<LoadAt>,
    ) -> Result<(Self, PowerFlowSolution), SimError> {
        if units.is_empty() {
            return Err(SimError::NoUnits);
        }
        let n = network.buses.len();
        // Unique ids.
        {
            let mut seen = std::collections::BTreeSet::new();
            for id in units
                .iter()
                .map(|u| &u.id)
                .chain(loads.iter().map(|l| &l.id))
            {
                if !seen.insert(id.clone()) {
                    return Err(SimError::DuplicateId(id.clone()));
                }
            }
        }
        for u in &units {
            if u.bus >= n {
                return Err(SimError::UnknownBus(format!("unit {} bus {}", u.id, u.bus)));
            }
        }
        for l in &loads {
            if l.bus >= n {
                return Err(SimError::UnknownBus(format!("load {} bus {}", l.id, l.bus)));
            }
        }

        // Derive bus kinds and voltage setpoints from the unit placement.
        let slack_unit = units
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| {
                a.unit
                    .s_rated_mva()
                    .partial_cmp(&b.unit.s_rated_mva())
                    .unwrap()
            })
            .map(|(i, _)| i)
            .expect("non-empty units");
        for bus in network.buses.iter_mut() {
            bus.kind = BusKind::Pq;
        }
        for u in &units {
            network.buses[u.bus].kind = BusKind::Pv;
            let setpoint = match &u.unit {
                Unit::Sg(sg) => sg.params.v_ref_pu,
                Unit::Gfor(g) => g.params.v_star_pu,
            };
            // The largest unit at the bus dictates the magnitude setpoint.
            let is_largest_at_bus = units
                .iter()
                .filter(|o| o.bus == u.bus)
                .all(|o| o.unit.s_rated_mva() <= u.unit.s_rated_mva());
            if is_largest_at_bus {
                network.buses[u.bus].v_set_pu = setpoint;
            }
        }
        network.buses[units[slack_unit].bus].kind = BusKind::Slack;

        // Constant-impedance loads enter the bus matrix.
        let s_base = network.s_base_mva;
        network.shunts = vec![C64::new(0.0, 0.0); n];
        for l in &loads {
            network.shunts[l.bus] += l.load.shunt_admittance();
        }

        // Scheduled injections: unit dispatch minus constant-power loads.
        let mut p_sched = vec![0.0; n];
        let mut q_sched = vec![0.0; n];
        for u in &units {
            let (p_mw, q_mvar) = match &u.unit {
                Unit::Sg(sg) => (sg.params.p_ref_mw, 0.0),
                Unit::Gfor(g) => (g.params.p_star_mw, g.params.q_star_mvar),
            };
            p_sched[u.bus] += p_mw / s_base;
            q_sched[u.bus] += q_mvar / s_base;
        }
        for l in &loads {
            let s = l.load.scheduled_power_pu();
            p_sched[l.bus] -= s.re;
            q_sched[l.bus] -= s.im;
        }

        let pf = solve_power_flow(
            &network,
            &PowerFlowInput {
                p_sched_pu: p_sched.clone(),
                q_sched_pu: q_sched.clone(),
            },
            &PowerFlowOptions::default(),
        )?;

        // Per-unit dispatch: scheduled power for everyone, the slack unit
        // absorbs its bus residual; reactive power splits by rating among the
        // units sharing a bus.
        let mut x = Vec::new();
        let mut state_offsets = Vec::with_capacity(units.len());
        for i in 0..units.len() {
            let bus = units[i].bus;
            let v = pf.voltage(bus);
            // Generation at this bus = injection + constant-power load there.
            let mut gen_p = pf.p_injection_pu[bus];
            let mut gen_q = pf.q_injection_pu[bus];
            for l in &loads {
                if l.bus == bus {
                    let s = l.load.scheduled_power_pu();
                    gen_p += s.re;
                    gen_q += s.im;
                }
            }
            let bus_rating: f64 = units
                .iter()
                .filter(|o| o.bus == bus)
                .map(|o| o.unit.s_rated_mva())
                .sum();
            let rating = units[i].unit.s_rated_mva();
            let q_share_sys = gen_q * rating / bus_rating;
            let p_share_sys = if i == slack_unit {
                // Everything the schedule does not cover.
                let sched_others: f64 = units
                    .iter()
                    .enumerate()
                    .filter(|(j, o)| *j != i && o.bus == bus)
                    .map(|(_, o)| {
                        (match &o.unit {
                            Unit::Sg(sg) => sg.params.p_ref_mw,
                            Unit::Gfor(g) => g.params.p_star_mw,
                        }) / s_base
                    })
                    .sum();
                gen_p - sched_others
            } else {
                (match &units[i].unit {
                    Unit::Sg(sg) => sg.params.p_ref_mw,
                    Unit::Gfor(g) => g.params.p_star_mw,
                }) / s_base
            };
            // Machine-base conversion.
            let k = s_base / rating;
            let x0 = units[i].unit.init(v, p_share_sys * k, q_share_sys * k);
            state_offsets.push(x.len());
            x.extend_from_slice(&x0);
        }

        let n_states = x.len();
        let mut sys = System {
            network,
            units,
            loads,
            active: vec![true; state_offsets.len()],
            state_offsets,
            n_states,
            y_aug: DMatrix::zeros(0, 0),
            y_net: DMatrix::zeros(0, 0),
            y_lu: None,
            x: DVector::from_vec(x),
            v_bus: pf
                .v_pu
                .iter()
                .zip(pf.theta_rad.iter())
                .map(|(&v, &t)| C64::from_polar(v, t))
                .collect(),
            f0_hz: 0.0,
            s_base_mva: s_base,
        };
        sys.f0_hz = sys.network.f0_hz;
        sys.rebuild_admittance()?;
        sys.refine_equilibrium(slack_unit)?;

        // The assembled state must be an equilibrium.
        let x0 = sys.x.clone();
        let (dx, _) = sys.derivative(&x0)?;
        let residual = dx.amax();
        if residual > EQUILIBRIUM_LIMIT {
            return Err(SimError::EquilibriumResidual {
                residual,
                limit: EQUILIBRIUM_LIMIT,
            });
        }
        Ok((sys, pf))
    }

    /// Polish the initial state until the algebraic network solution and the
    /// component equilibria agree to machine precision. The Newton power flow
    /// only matches to its own tolerance; high-gain controls (the AVR in
    /// particular) amplify that voltage gap into visible state derivatives,
    /// so we alternate network solves with re-initialization at the measured
    /// bus injections until the point closes on itself.
    fn refine_equilibrium(&mut self, slack_unit: usize) -> Result<(), SimError> {
        let n = self.network.buses.len();
        for _ in 0..40 {
            let v = self.solve_network(&self.x)?;
            self.v_bus = v.clone();
            // Power each bus feeds into the network + constant-power loads;
            // that is exactly what the units at the bus must deliver.
            let vv = DVector::<C64>::from_iterator(n, v.iter().copied());
            let i_net = &self.y_net * &vv;
            let mut s_units = vec![C64::new(0.0, 0.0); n];
            for b in 0..n {
                let mut i_u = i_net[b];
                for l in &self.loads {
                    if l.bus == b {
                        i_u -= l.load.injection_current(v[b])?;
                    }
                }
                s_units[b] = v[b] * i_u.conj();
            }
            let mut x_new = self.x.clone();
            for i in 0..self.units.len() {
                let bus = self.units[i].bus;
                let rating = self.units[i].unit.s_rated_mva();
                let bus_rating: f64 = self
                    .units
                    .iter()
                    .filter(|o| o.bus == bus)
                    .map(|o| o.unit.s_rated_mva())
                    .sum();
                let q_share = s_units[bus].im * rating / bus_rating;
                let p_share = if i == slack_unit {
                    let sched_others: f64 = self
                        .units
                        .iter()
                        .enumerate()
                        .filter(|(j, o)| *j != i && o.bus == bus)
                        .map(|(_, o)| {
                            (match &o.unit {
                                Unit::Sg(sg) => sg.params.p_ref_mw,
                                Unit::Gfor(g) => g.params.p_star_mw,
                            }) / self.s_base_mva
                        })
                        .sum();
                    s_units[bus].re - sched_others
                } else {
                    (match &self.units[i].unit {
                        Unit::Sg(sg) => sg.params.p_ref_mw,
                        Unit::Gfor(g) => g.params.p_star_mw,
                    }) / self.s_base_mva
                };
                let k = self.s_base_mva / rating;
                let x0 = self.units[i].unit.init(v[bus], p_share * k, q_share * k);
                let off = self.state_offsets[i];
                x_new.rows_mut(off, x0.len()).copy_from_slice(&x0);
            }
            let delta = (&x_new - &self.x).amax();
            self.x = x_new;
            if delta < 1e-13 {
                break;
            }
        }
        Ok(())
    }

    /// Rebuild and refactor the augmented bus matrix (after topology events).
    fn rebuild_admittance(&mut self) -> Result<(), SimError> {
        self.network.shunts = vec![C64::new(0.0, 0.0); self.network.buses.len()];
        for l in &self.loads {
            self.network.shunts[l.bus] += l.load.shunt_admittance();
        }
        let y_net = self.network.assemble_ybus()?;
        let mut y = y_net.clone();
        for (i, u) in self.units.iter().enumerate() {
            if self.active[i] {
                let k = u.unit.s_rated_mva() / self.s_base_mva;
                y[(u.bus, u.bus)] += u.unit.norton_admittance() * k;
            }
        }
        self.y_net = y_net;
        self.y_aug = y.clone();
        self.y_lu = Some(y.lu());
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Id-qualified state names in state-vector order.
    pub fn state_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_states);
        for u in &self.units {
            for s in u.unit.state_names() {
                names.push(format!("{}.{}", u.id, s));
            }
        }
        names
    }

    /// Global state indices carrying each unit's frequency dynamics, with the
    /// unit ids (active units only).
    pub fn freq_state_indices(&self) -> Vec<(String, usize)> {
        self.units
            .iter()
            .enumerate()
            .filter(|(i, _)| self.active[*i])
            .map(|(i, u)| {
                (
                    u.id.clone(),
                    self.state_offsets[i] + u.unit.freq_state_index(),
                )
            })
            .collect()
    }

    /// Sparse per-unit frequency-deviation output rows over the global state
    /// vector (pu frequency per state), active units only.
    pub fn freq_output_rows(&self) -> Vec<(String, Vec<(usize, f64)>)> {
        self.units
            .iter()
            .enumerate()
            .filter(|(i, _)| self.active[*i])
            .map(|(i, u)| {
                (
                    u.id.clone(),
                    u.unit
                        .freq_output_row()
                        .into_iter()
                        .map(|(local, w)| (self.state_offsets[i] + local, w))
                        .collect(),
                )
            })
            .collect()
    }

    /// Solve the algebraic network for bus voltages given states `x`.
    pub fn solve_network(&self, x: &DVector<f64>) -> Result<Vec<C64>, SimError> {
        let n = self.network.buses.len();
        let lu = self.y_lu.as_ref().expect("admittance factorized");
        // Fixed current injections from the active units.
        let mut i_fixed = DVector::<C64>::zeros(n);
        for (i, u) in self.units.iter().enumerate() {
            if self.active[i] {
                let k = u.unit.s_rated_mva() / self.s_base_mva;
                let xs = &x.as_slice()[self.state_offsets[i]..self.state_offsets[i] + u.unit.n_states()];
                i_fixed[u.bus] += u.unit.norton_current(xs) * k;
            }
        }
        let has_cp = self
            .loads
            .iter()
            .any(|l| matches!(l.load.params.model, crate::components::LoadModel::ConstantPower));
        let mut v: DVector<C64> = DVector::from_iterator(n, self.v_bus.iter().copied());
        if !has_cp {
            let sol = lu.solve(&i_fixed).expect("factorized matrix solves");
            return Ok(sol.iter().copied().collect());
        }
        let mut last_residual = f64::INFINITY;
        for _ in 0..60 {
            let mut rhs = i_fixed.clone();
            for l in &self.loads {
                rhs[l.bus] += l.load.injection_current(v[l.bus])?;
            }
            let v_new = lu.solve(&rhs).expect("factorized matrix solves");
            last_residual = (0..n).map(|i| (v_new[i] - v[i]).norm()).fold(0.0, f64::max);
            v = v_new;
            if last_residual < 1e-13 {
                return Ok(v.iter().copied().collect());
            }
        }
        Err(SimError::AlgebraicNoConvergence {
            t_s: f64::NAN,
            residual: last_residual,
        })
    }

    /// Full state derivative and the voltages it was evaluated at.
    pub fn derivative(&self, x: &DVector<f64>) -> Result<(DVector<f64>, Vec<C64>), SimError> {
        let v = self.solve_network(x)?;
        let mut dx = DVector::<f64>::zeros(self.n_states);
        for (i, u) in self.units.iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            let off = self.state_offsets[i];
            let ns = u.unit.n_states();
            let xs = &x.as_slice()[off..off + ns];
            let mut d = vec![0.0; ns];
            u.unit.derivatives(xs, v[u.bus], &mut d);
            dx.rows_mut(off, ns).copy_from_slice(&d);
        }
        Ok((dx, v))
    }

    /// Jacobian of the full derivative map (network solve included) by
    /// finite differences. Forward differences are adequate for the Newton
    /// corrector; pass `central = true` where second-order accuracy matters.
    pub fn jacobian_fd(&self, x: &DVector<f64>, central: bool) -> Result<DMatrix<f64>, SimError> {
        let n = self.n_states;
        let (f0, _) = self.derivative(x)?;
        let mut j = DMatrix::<f64>::zeros(n, n);
        let mut xp = x.clone();
        for col in 0..n {
            let h = 1e-7 * (1.0 + x[col].abs());
            xp[col] = x[col] + h;
            let (fp, _) = self.derivative(&xp)?;
            if central {
                xp[col] = x[col] - h;
                let (fm, _) = self.derivative(&xp)?;
                for row in 0..n {
                    j[(row, col)] = (fp[row] - fm[row]) / (2.0 * h);
                }
            } else {
                for row in 0..n {
                    j[(row, col)] = (fp[row] - f0[row]) / h;
                }
            }
            xp[col] = x[col];
        }
        Ok(j)
    }

    /// Fastest time constant present in the active components, seconds.
    pub fn min_time_constant(&self) -> f64 {
        let mut tau = f64::INFINITY;
        for (i, u) in self.units.iter().enumerate() {
            if !self.active[i] {
                continue;
            }
            match &u.unit {
                Unit::Sg(sg) => {
                    tau = tau
                        .min(sg.params.tau_turb_s)
                        .min(sg.params.tau_avr_s)
                        .min(sg.params.tau_d0_s);
                }
                Unit::Gfor(g) => {
                    tau = tau.min(g.params.tau_cc_s).min(g.params.tau_p_gfor_s);
                }
            }
        }
        tau
    }

    /// Current outputs of a unit (None when tripped).
    pub fn unit_outputs(&self, idx: usize, x: &DVector<f64>, v: &[C64]) -> Option<UnitOutputs> {
        if !self.active[idx] {
            return None;
        }
        let u = &self.units[idx];
        let off = self.state_offsets[idx];
        let xs = &x.as_slice()[off..off + u.unit.n_states()];
        Some(u.unit.outputs(xs, v[u.bus]))
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.active[idx]
    }

    /// Apply a load step at a bus, creating a constant-power load when the
    /// bus has none. Rebuilds the bus matrix when shunts change.
    pub fn apply_load_step(
        &mut self,
        bus: usize,
        delta_p_mw: f64,
        delta_q_mvar: f64,
    ) -> Result<(), SimError> {
        // Prefer a constant-power load at the bus; fall back to whatever is
        // there; create a constant-power load on an unloaded bus.
        let target = self
            .loads
            .iter()
            .position(|l| {
                l.bus == bus
                    && matches!(l.load.params.model, crate::components::LoadModel::ConstantPower)
            })
            .or_else(|| self.loads.iter().position(|l| l.bus == bus));
        if let Some(idx) = target {
            let constant_z = matches!(
                self.loads[idx].load.params.model,
                crate::components::LoadModel::ConstantImpedance
            );
            self.loads[idx].load.apply_step(delta_p_mw, delta_q_mvar);
            if constant_z {
                self.rebuild_admittance()?;
            }
            return Ok(());
        }
        let load = Load::new(
            crate::components::LoadParams {
                p_mw: delta_p_mw,
                q_mvar: delta_q_mvar,
                model: crate::components::LoadModel::ConstantPower,
            },
            self.s_base_mva,
        )?;
        self.loads.push(LoadAt {
            id: format!("load_step_bus{bus}"),
            bus,
            load,
        });
        Ok(())
    }

    /// Trip a unit; refuses to trip the last active one.
    pub fn trip_unit(&mut self, idx: usize, t_s: f64) -> Result<(), SimError> {
        if self.active.iter().filter(|a| **a).count() <= 1 {
            return Err(SimError::LastUnitTrip {
                t_s,
                id: self.units[idx].id.clone(),
            });
        }
        self.active[idx] = false;
        self.rebuild_admittance()
    }
}

/// Run a simulation: apply events at their (quantized) step boundaries and
/// integrate with the implicit trapezoidal rule.
pub fn simulate(
    system: &mut System,
    events: &[Event],
    opts: &IntegratorOptions,
) -> Result<SimResult, SimError> {
    let dt = opts.dt_s;
    if dt <= 0.0 || opts.t_end_s < dt {
        return Err(SimError::EmptyHorizon {
            t_end_s: opts.t_end_s,
            dt_s: dt,
        });
    }
    let tau_limit = system.min_time_constant() / 10.0;
    // The relative slack keeps dt == τ_min/10 valid across rounding.
    if dt > tau_limit * (1.0 + 1e-9) {
        return Err(SimError::DtTooLarge {
            dt_s: dt,
            limit_s: tau_limit,
        });
    }
    let record_every = opts.record_every.max(1);
    let n_steps = (opts.t_end_s / dt).round() as usize;
    let mut warnings = Vec::new();

    // Quantize events to step indices.
    let mut timed: Vec<(usize, &Event)> = Vec::with_capacity(events.len());
    for ev in events {
        let t = ev.time_s();
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            warnings.push(format!(
                "event at t = {t} s quantized to the step boundary {} s",
                k * dt
            ));
        }
        let k = k as usize;
        if k > n_steps {
            warnings.push(format!(
                "event at t = {t} s lies beyond the horizon {} s and is ignored",
                opts.t_end_s
            ));
            continue;
        }
        timed.push((k, ev));
    }
    timed.sort_by_key(|(k, _)| *k);

    // Channel layout.
    let unit_ids: Vec<String> = system.units.iter().map(|u| u.id.clone()).collect();
    let bus_names: Vec<String> = system.network.buses.iter().map(|b| b.name.clone()).collect();
    let mut ch_f: Vec<Vec<f64>> = vec![Vec::new(); unit_ids.len()];
    let mut ch_p_mw: Vec<Vec<f64>> = vec![Vec::new(); unit_ids.len()];
    let mut ch_p_pu: Vec<Vec<f64>> = vec![Vec::new(); unit_ids.len()];
    let mut ch_angle: Vec<Vec<f64>> = vec![Vec::new(); unit_ids.len()];
    let mut ch_v: Vec<Vec<f64>> = vec![Vec::new(); bus_names.len()];
    let mut time = Vec::new();

    // Modified-Newton corrector matrix G = I − dt/2·∂f/∂x, refactored lazily:
    // at start, after events, and when convergence stalls. The capacitor
    // states of forming converters couple to the algebraic network stiffly
    // enough that plain fixed-point iteration cannot contract at useful step
    // sizes; Newton on the trapezoidal residual converges unconditionally for
    // the A-stable scheme.
    let mut newton_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> = None;
    let factor_at = |sys: &System, x: &DVector<f64>| -> Result<_, SimError> {
        let j = sys.jacobian_fd(x, false)?;
        let n = j.nrows();
        let g = DMatrix::<f64>::identity(n, n) - j * (dt / 2.0);
        Ok(g.lu())
    };

    let mut next_event = 0usize;
    for k in 0..=n_steps {
        let t = k as f64 * dt;
        // Apply events due at this boundary.
        let mut topology_changed = false;
        while next_event < timed.len() && timed[next_event].0 == k {
            let (_, ev) = timed[next_event];
            next_event += 1;
            match ev {
                Event::LoadStep {
                    bus,
                    delta_p_mw,
                    delta_q_mvar,
                    ..
                } => {
                    let bus_idx = system
                        .network
                        .buses
                        .iter()
                        .position(|b| &b.name == bus)
                        .ok_or_else(|| SimError::UnknownId(bus.clone()))?;
                    system.apply_load_step(bus_idx, *delta_p_mw, *delta_q_mvar)?;
                    topology_changed = true;
                }
                Event::UnitTrip { unit_id, t_s } => {
                    let idx = system
                        .units
                        .iter()
                        .position(|u| &u.id == unit_id)
                        .ok_or_else(|| SimError::UnknownId(unit_id.clone()))?;
                    if !system.is_active(idx) {
                        warnings.push(format!("unit `{unit_id}` already tripped at t = {t_s} s"));
                    } else {
                        system.trip_unit(idx, *t_s)?;
                    }
                    topology_changed = true;
                }
                Event::SetpointChange {
                    unit_id,
                    field,
                    value,
                    t_s,
                } => {
                    let idx = system
                        .units
                        .iter()
                        .position(|u| &u.id == unit_id)
                        .ok_or_else(|| SimError::UnknownId(unit_id.clone()))?;
                    system.units[idx]
                        .unit
                        .set_setpoint(field, *value)
                        .map_err(|message| SimError::BadEvent { t_s: *t_s, message })?;
                }
            }
        }
        // Record the (post-event) sample.
        if k % record_every == 0 || k == n_steps {
            let x_now = system.x.clone();
            let v = system.solve_network(&x_now).map_err(|e| at_time(e, t))?;
            system.v_bus = v.clone();
            time.push(t);
            let ref_angle = system
                .units
                .iter()
                .enumerate()
                .find(|(i, _)| system.is_active(*i))
                .map(|(i, _)| {
                    system
                        .unit_outputs(i, &x_now, &v)
                        .map(|o| o.internal_angle_rad)
                        .unwrap_or(0.0)
                })
                .unwrap_or(0.0);
            for i in 0..unit_ids.len() {
                match system.unit_outputs(i, &x_now, &v) {
                    Some(o) => {
                        ch_f[i].push(o.frequency_hz);
                        ch_p_pu[i].push(o.p_bus_pu);
                        ch_p_mw[i].push(o.p_bus_pu * system.units[i].unit.s_rated_mva());
                        ch_angle[i].push(o.internal_angle_rad - ref_angle);
                    }
                    None => {
                        ch_f[i].push(f64::NAN);
                        ch_p_pu[i].push(f64::NAN);
                        ch_p_mw[i].push(f64::NAN);
                        ch_angle[i].push(f64::NAN);
                    }
                }
            }
            for (b, chv) in ch_v.iter_mut().enumerate() {
                chv.push(v[b].norm());
            }
        }

        if k == n_steps {
            break;
        }

        // Trapezoidal step: Newton iteration on the implicit residual.
        if topology_changed {
            newton_lu = None;
        }
        let x_k = system.x.clone();
        let (f_k, _) = system.derivative(&x_k).map_err(|e| at_time(e, t))?;
        let mut x_new = &x_k + &f_k * dt;
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut refreshed_this_step = false;
        for _ in 0..opts.max_inner_iterations {
            let (f_new, _) = system.derivative(&x_new).map_err(|e| at_time(e, t))?;
            let r = &x_new - &x_k - (&f_k + &f_new) * (dt / 2.0);
            let r_norm = r.amax();
            if r_norm < opts.inner_tol {
                converged = true;
                break;
            }
            // Stalling with a stale Jacobian: refactor once at the current
            // iterate before giving up.
            if r_norm > 0.5 * residual && !refreshed_this_step {
                newton_lu = Some(factor_at(system, &x_new).map_err(|e| at_time(e, t))?);
                refreshed_this_step = true;
            }
            residual = r_norm;
            if newton_lu.is_none() {
                newton_lu = Some(factor_at(system, &x_new).map_err(|e| at_time(e, t))?);
            }
            let dx = newton_lu
                .as_ref()
                .unwrap()
                .solve(&r)
                .expect("corrector matrix is nonsingular");
            x_new -= dx;
        }
        if !converged {
            return Err(SimError::InnerNoConvergence {
                t_s: t + dt,
                tol: opts.inner_tol,
                residual,
            });
        }
        // Divergence guard.
        if let Some(idx) = (0..x_new.len()).find(|&i| !x_new[i].is_finite() || x_new[i].abs() > STATE_LIMIT)
        {
            return Err(SimError::Diverged {
                t_s: t + dt,
                name: system.state_names()[idx].clone(),
                limit: STATE_LIMIT,
            });
        }
        system.x = x_new;
    }

    // Assemble channels.
    let mut channels = Vec::new();
    for (i, id) in unit_ids.iter().enumerate() {
        channels.push(Channel {
            name: format!("f_hz:{id}"),
            unit: "Hz".into(),
            data: std::mem::take(&mut ch_f[i]),
        });
    }
    for (i, id) in unit_ids.iter().enumerate() {
        channels.push(Channel {
            name: format!("p_mw:{id}"),
            unit: "MW".into(),
            data: std::mem::take(&mut ch_p_mw[i]),
        });
    }
    for (i, id) in unit_ids.iter().enumerate() {
        channels.push(Channel {
            name: format!("p_pu:{id}"),
            unit: "pu".into(),
            data: std::mem::take(&mut ch_p_pu[i]),
        });
    }
    for (i, id) in unit_ids.iter().enumerate() {
        channels.push(Channel {
            name: format!("angle_rad:{id}"),
            unit: "rad".into(),
            data: std::mem::take(&mut ch_angle[i]),
        });
    }
    for (b, name) in bus_names.iter().enumerate() {
        channels.push(Channel {
            name: format!("v_pu:{name}"),
            unit: "pu".into(),
            data: std::mem::take(&mut ch_v[b]),
        });
    }
    Ok(SimResult {
        time_s: time,
        channels,
        dt_s: dt * record_every as f64,
        warnings,
    })
}

fn at_time(e: SimError, t: f64) -> SimError {
    match e {
        SimError::AlgebraicNoConvergence { residual, .. } => {
            SimError::AlgebraicNoConvergence { t_s: t, residual }
        }
        other => other,
    }
}
