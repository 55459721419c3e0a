//! Bus/branch network model, admittance-matrix assembly and power flow.
//!
//! The network is a balanced positive-sequence phasor model on a common system
//! base. Branches are π-sections with optional off-nominal tap on the `from`
//! side; fixed shunt admittances (e.g. constant-impedance loads) sit on the
//! bus diagonal. The power flow is a dense polar Newton–Raphson from a flat
//! start, which is robust at the network sizes this crate targets (well under
//! a hundred buses).

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

pub type C64 = Complex<f64>;

/// Role of a bus in the power flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    /// Angle and voltage reference; absorbs the power imbalance.
    Slack,
    /// Fixed active injection and voltage magnitude (generator bus).
    Pv,
    /// Fixed active and reactive injection (load or passive bus).
    Pq,
}

/// One network bus.
#[derive(Debug, Clone)]
pub struct Bus {
    pub name: String,
    pub kind: BusKind,
    /// Voltage-magnitude setpoint in pu (used for slack and PV buses).
    pub v_set_pu: f64,
    /// Angle setpoint in radians (used for the slack bus).
    pub theta_set_rad: f64,
}

/// A π-model branch between two buses.
#[derive(Debug, Clone)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub r_pu: f64,
    pub x_pu: f64,
    /// Total line charging susceptance, split half per end.
    pub b_shunt_pu: f64,
    /// Off-nominal tap ratio on the `from` side (1.0 for none).
    pub tap: f64,
}

/// The static network: buses, branches and fixed bus shunts.
#[derive(Debug, Clone)]
pub struct Network {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    /// Fixed shunt admittance per bus (same length as `buses`).
    pub shunts: Vec<C64>,
    pub s_base_mva: f64,
    pub f0_hz: f64,
}

/// Errors from network validation and power-flow solution.
#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("network has no buses")]
    Empty,
    #[error("network must have exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("branch {index} references bus {bus} out of range")]
    BranchOutOfRange { index: usize, bus: usize },
    #[error("branch {index} has zero impedance; model it as a bus merge, not an infinite admittance")]
    ZeroImpedance { index: usize },
    #[error("branch {index} has non-positive tap ratio {tap}")]
    BadTap { index: usize, tap: f64 },
    #[error("network graph is not connected: bus {bus} (`{name}`) unreachable from the slack")]
    Disconnected { bus: usize, name: String },
    #[error("shunt vector length {got} does not match bus count {want}")]
    ShuntLength { got: usize, want: usize },
    #[error("power flow did not converge: {iterations} iterations, max mismatch {max_mismatch_pu:.3e} pu")]
    NotConverged {
        iterations: usize,
        max_mismatch_pu: f64,
    },
    #[error("power-flow Jacobian is singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("input vector `{name}` has length {got}, expected {want}")]
    InputLength {
        name: &'static str,
        got: usize,
        want: usize,
    },
}

impl Network {
    /// Structural validation: exactly one slack, in-range branch endpoints,
    /// nonzero impedances, positive taps, connected graph.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.buses.is_empty() {
            return Err(NetworkError::Empty);
        }
        let slack_count = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slack_count != 1 {
            return Err(NetworkError::SlackCount(slack_count));
        }
        if self.shunts.len() != self.buses.len() {
            return Err(NetworkError::ShuntLength {
                got: self.shunts.len(),
                want: self.buses.len(),
            });
        }
        for (i, br) in self.branches.iter().enumerate() {
            if br.from >= self.buses.len() {
                return Err(NetworkError::BranchOutOfRange { index: i, bus: br.from });
            }
            if br.to >= self.buses.len() {
                return Err(NetworkError::BranchOutOfRange { index: i, bus: br.to });
            }
            if br.r_pu == 0.0 && br.x_pu == 0.0 {
                return Err(NetworkError::ZeroImpedance { index: i });
            }
            if br.tap <= 0.0 {
                return Err(NetworkError::BadTap { index: i, tap: br.tap });
            }
        }
        // Connectivity from the slack bus.
        let slack = self
            .buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("slack existence checked above");
        let n = self.buses.len();
        let mut seen = vec![false; n];
        let mut stack = vec![slack];
        seen[slack] = true;
        while let Some(i) = stack.pop() {
            for br in &self.branches {
                for (a, b) in [(br.from, br.to), (br.to, br.from)] {
                    if a == i && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if let Some(bus) = seen.iter().position(|s| !s) {
            return Err(NetworkError::Disconnected {
                bus,
                name: self.buses[bus].name.clone(),
            });
        }
        Ok(())
    }

    /// Index of the slack bus. Panics if [`validate`](Self::validate) has not
    /// been satisfied.
    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    /// Assemble the bus admittance matrix (π-model branches plus fixed
    /// shunts).
    pub fn assemble_ybus(&self) -> Result<DMatrix<C64>, NetworkError> {
        self.validate()?;
        let n = self.buses.len();
        let mut y = DMatrix::<C64>::zeros(n, n);
        for br in &self.branches {
            let z = C64::new(br.r_pu, br.x_pu);
            let ys = C64::new(1.0, 0.0) / z;
            let ysh = C64::new(0.0, br.b_shunt_pu / 2.0);
            let t = br.tap;
            y[(br.from, br.from)] += ys / (t * t) + ysh;
            y[(br.to, br.to)] += ys + ysh;
            y[(br.from, br.to)] -= ys / t;
            y[(br.to, br.from)] -= ys / t;
        }
        for (i, sh) in self.shunts.iter().enumerate() {
            y[(i, i)] += *sh;
        }
        Ok(y)
    }
}

/// Scheduled net injections for the power flow, in pu on the system base.
///
/// `p_sched_pu[i]` / `q_sched_pu[i]` is generation minus constant-power load
/// at bus `i`; constant-impedance loads belong in [`Network::shunts`] instead.
/// The slack entries are ignored; PV-bus `q_sched_pu` entries are ignored.
#[derive(Debug, Clone)]
pub struct PowerFlowInput {
    pub p_sched_pu: Vec<f64>,
    pub q_sched_pu: Vec<f64>,
}

/// Converged power-flow state.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    pub v_pu: Vec<f64>,
    pub theta_rad: Vec<f64>,
    /// Net active injection actually flowing at each bus, pu.
    pub p_injection_pu: Vec<f64>,
    /// Net reactive injection actually flowing at each bus, pu.
    pub q_injection_pu: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch_pu: f64,
}

impl PowerFlowSolution {
    /// Complex bus voltage.
    pub fn voltage(&self, bus: usize) -> C64 {
        C64::from_polar(self.v_pu[bus], self.theta_rad[bus])
    }
}

/// Convergence controls for [`solve_power_flow`].
#[derive(Debug, Clone)]
pub struct PowerFlowOptions {
    pub tolerance_pu: f64,
    pub max_iterations: usize,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance_pu: 1e-8,
            max_iterations: 25,
        }
    }
}

/// Compute `(P, Q)` injections at every bus for voltages `(v, θ)`.
fn injections(y: &DMatrix<C64>, v: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        let (mut pi, mut qi) = (0.0, 0.0);
        for j in 0..n {
            let g = y[(i, j)].re;
            let b = y[(i, j)].im;
            let thij = th[i] - th[j];
            pi += v[i] * v[j] * (g * thij.cos() + b * thij.sin());
            qi += v[i] * v[j] * (g * thij.sin() - b * thij.cos());
        }
        p[i] = pi;
        q[i] = qi;
    }
    (p, q)
}

/// Dense polar Newton–Raphson power flow from a flat start.
///
/// Unknowns are the angles of all non-slack buses and the voltage magnitudes
/// of PQ buses. Converges when the infinity norm of the active/reactive
/// mismatches drops below `tolerance_pu`.
pub fn solve_power_flow(
    net: &Network,
    input: &PowerFlowInput,
    opts: &PowerFlowOptions,
) -> Result<PowerFlowSolution, NetworkError> {
    let y = net.assemble_ybus()?;
    let n = net.buses.len();
    if input.p_sched_pu.len() != n {
        return Err(NetworkError::InputLength {
            name: "p_sched_pu",
            got: input.p_sched_pu.len(),
            want: n,
        });
    }
    if input.q_sched_pu.len() != n {
        return Err(NetworkError::InputLength {
            name: "q_sched_pu",
            got: input.q_sched_pu.len(),
            want: n,
        });
    }

    // Flat start at setpoint magnitudes.
    let mut v: Vec<f64> = net
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Pq => 1.0,
            _ => b.v_set_pu,
        })
        .collect();
    let slack = net.slack_index();
    let mut th: Vec<f64> = vec![net.buses[slack].theta_set_rad; n];

    // Unknown orderings.
    let ang_buses: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let mag_buses: Vec<usize> = (0..n)
        .filter(|&i| net.buses[i].kind == BusKind::Pq)
        .collect();
    let n_ang = ang_buses.len();
    let n_mag = mag_buses.len();
    let n_unknown = n_ang + n_mag;

    let mut iterations = 0usize;
    loop {
        let (p, q) = injections(&y, &v, &th);
        let mut mismatch = DVector::<f64>::zeros(n_unknown);
        for (k, &i) in ang_buses.iter().enumerate() {
            mismatch[k] = input.p_sched_pu[i] - p[i];
        }
        for (k, &i) in mag_buses.iter().enumerate() {
            mismatch[n_ang + k] = input.q_sched_pu[i] - q[i];
        }
        let max_mismatch = mismatch.amax();
        if max_mismatch < opts.tolerance_pu {
            return Ok(PowerFlowSolution {
                v_pu: v,
                theta_rad: th,
                p_injection_pu: p,
                q_injection_pu: q,
                iterations,
                max_mismatch_pu: max_mismatch,
            });
        }
        if iterations >= opts.max_iterations {
            return Err(NetworkError::NotConverged {
                iterations,
                max_mismatch_pu: max_mismatch,
            });
        }

        // Jacobian: [dP/dθ dP/dV; dQ/dθ dQ/dV] over the unknown orderings.
        let mut jac = DMatrix::<f64>::zeros(n_unknown, n_unknown);
        for (r, &i) in ang_buses.iter().enumerate() {
            for (c, &j) in ang_buses.iter().enumerate() {
                jac[(r, c)] = if i == j {
                    -q[i] - y[(i, i)].im * v[i] * v[i]
                } else {
                    let thij = th[i] - th[j];
                    v[i] * v[j] * (y[(i, j)].re * thij.sin() - y[(i, j)].im * thij.cos())
                };
            }
            for (c, &j) in mag_buses.iter().enumerate() {
                jac[(r, n_ang + c)] = if i == j {
                    p[i] / v[i] + y[(i, i)].re * v[i]
                } else {
                    let thij = th[i] - th[j];
                    v[i] * (y[(i, j)].re * thij.cos() + y[(i, j)].im * thij.sin())
                };
            }
        }
        for (r, &i) in mag_buses.iter().enumerate() {
            for (c, &j) in ang_buses.iter().enumerate() {
                jac[(n_ang + r, c)] = if i == j {
                    p[i] - y[(i, i)].re * v[i] * v[i]
                } else {
                    let thij = th[i] - th[j];
                    -v[i] * v[j] * (y[(i, j)].re * thij.cos() + y[(i, j)].im * thij.sin())
                };
            }
            for (c, &j) in mag_buses.iter().enumerate() {
                jac[(n_ang + r, n_ang + c)] = if i == j {
                    q[i] / v[i] - y[(i, i)].im * v[i]
                } else {
                    let thij = th[i] - th[j];
                    v[i] * (y[(i, j)].re * thij.sin() - y[(i, j)].im * thij.cos())
                };
            }
        }

        let lu = jac.lu();
        let dx = lu
            .solve(&mismatch)
            .ok_or(NetworkError::SingularJacobian { iteration: iterations })?;
        for (k, &i) in ang_buses.iter().enumerate() {
            th[i] += dx[k];
        }
        for (k, &i) in mag_buses.iter().enumerate() {
            v[i] += dx[n_ang + k];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bus(name: &str, kind: BusKind) -> Bus {
        Bus {
            name: name.to_string(),
            kind,
            v_set_pu: 1.0,
            theta_set_rad: 0.0,
        }
    }

    fn triangle() -> Network {
        Network {
            buses: vec![
                bus("a", BusKind::Slack),
                bus("b", BusKind::Pq),
                bus("c", BusKind::Pq),
            ],
            branches: vec![
                Branch { from: 0, to: 1, r_pu: 0.01, x_pu: 0.1, b_shunt_pu: 0.0, tap: 1.0 },
                Branch { from: 1, to: 2, r_pu: 0.02, x_pu: 0.2, b_shunt_pu: 0.0, tap: 1.0 },
                Branch { from: 0, to: 2, r_pu: 0.01, x_pu: 0.15, b_shunt_pu: 0.0, tap: 1.0 },
            ],
            shunts: vec![C64::new(0.0, 0.0); 3],
            s_base_mva: 100.0,
            f0_hz: 50.0,
        }
    }

    #[test]
    fn ybus_matches_hand_assembly_for_triangle() {
        let net = triangle();
        let y = net.assemble_ybus().unwrap();
        let y01 = C64::new(1.0, 0.0) / C64::new(0.01, 0.1);
        let y12 = C64::new(1.0, 0.0) / C64::new(0.02, 0.2);
        let y02 = C64::new(1.0, 0.0) / C64::new(0.01, 0.15);
        assert_abs_diff_eq!((y[(0, 0)] - (y01 + y02)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((y[(1, 1)] - (y01 + y12)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((y[(2, 2)] - (y02 + y12)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((y[(0, 1)] + y01).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((y[(1, 2)] + y12).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!((y[(0, 2)] + y02).norm(), 0.0, epsilon = 1e-14);
        // Row sums are zero without shunts.
        for i in 0..3 {
            let sum: C64 = (0..3).map(|j| y[(i, j)]).sum();
            assert_abs_diff_eq!(sum.norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ybus_permutation_is_consistent() {
        let net = triangle();
        let y = net.assemble_ybus().unwrap();
        // Permute buses (2, 0, 1): old index i appears at perm position.
        let perm = [2usize, 0, 1]; // new index of old bus i is perm[i]
        let mut permuted = net.clone();
        permuted.buses = vec![
            net.buses[1].clone(),
            net.buses[2].clone(),
            net.buses[0].clone(),
        ];
        permuted.branches = net
            .branches
            .iter()
            .map(|b| Branch {
                from: perm[b.from],
                to: perm[b.to],
                ..*b
            })
            .collect();
        let yp = permuted.assemble_ybus().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(
                    (yp[(perm[i], perm[j])] - y[(i, j)]).norm(),
                    0.0,
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn zero_impedance_branch_is_rejected() {
        let mut net = triangle();
        net.branches[0].r_pu = 0.0;
        net.branches[0].x_pu = 0.0;
        assert!(matches!(
            net.assemble_ybus().unwrap_err(),
            NetworkError::ZeroImpedance { index: 0 }
        ));
    }

    #[test]
    fn missing_slack_is_rejected() {
        let mut net = triangle();
        net.buses[0].kind = BusKind::Pq;
        assert!(matches!(
            net.validate().unwrap_err(),
            NetworkError::SlackCount(0)
        ));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut net = triangle();
        net.branches.remove(1);
        net.branches.remove(1);
        // Only branch 0-1 remains; bus 2 is unreachable.
        assert!(matches!(
            net.validate().unwrap_err(),
            NetworkError::Disconnected { bus: 2, .. }
        ));
    }

    #[test]
    fn flat_network_converges_immediately() {
        let net = triangle();
        let input = PowerFlowInput {
            p_sched_pu: vec![0.0; 3],
            q_sched_pu: vec![0.0; 3],
        };
        let sol = solve_power_flow(&net, &input, &PowerFlowOptions::default()).unwrap();
        assert!(sol.iterations <= 1);
        for i in 0..3 {
            assert_abs_diff_eq!(sol.v_pu[i], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sol.theta_rad[i], 0.0, epsilon = 1e-12);
        }
    }

    /// Independent Gauss–Seidel oracle for PQ-only networks.
    fn gauss_seidel(net: &Network, input: &PowerFlowInput, sweeps: usize) -> Vec<C64> {
        let y = net.assemble_ybus().unwrap();
        let n = net.buses.len();
        let slack = net.slack_index();
        let mut v: Vec<C64> = (0..n)
            .map(|i| {
                if i == slack {
                    C64::from_polar(net.buses[i].v_set_pu, net.buses[i].theta_set_rad)
                } else {
                    C64::new(1.0, 0.0)
                }
            })
            .collect();
        for _ in 0..sweeps {
            for i in 0..n {
                if i == slack {
                    continue;
                }
                let s = C64::new(input.p_sched_pu[i], input.q_sched_pu[i]);
                let mut sum = C64::new(0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        sum += y[(i, j)] * v[j];
                    }
                }
                v[i] = ((s / v[i]).conj() - sum) / y[(i, i)];
            }
        }
        v
    }

    #[test]
    fn two_bus_flow_matches_gauss_seidel_oracle() {
        let net = Network {
            buses: vec![bus("slack", BusKind::Slack), bus("load", BusKind::Pq)],
            branches: vec![Branch {
                from: 0,
                to: 1,
                r_pu: 0.0,
                x_pu: 0.1,
                b_shunt_pu: 0.0,
                tap: 1.0,
            }],
            shunts: vec![C64::new(0.0, 0.0); 2],
            s_base_mva: 100.0,
            f0_hz: 50.0,
        };
        let input = PowerFlowInput {
            p_sched_pu: vec![0.0, -0.8],
            q_sched_pu: vec![0.0, -0.2],
        };
        let sol = solve_power_flow(&net, &input, &PowerFlowOptions::default()).unwrap();
        assert!(sol.iterations <= 25);
        assert!(sol.max_mismatch_pu < 1e-8);
        let oracle = gauss_seidel(&net, &input, 400);
        let v1 = sol.voltage(1);
        assert_abs_diff_eq!((v1 - oracle[1]).norm(), 0.0, epsilon = 1e-8);
        // Slack must cover the load plus losses (here only reactive).
        assert_abs_diff_eq!(sol.p_injection_pu[0], 0.8, epsilon = 1e-6);
    }

    #[test]
    fn pv_bus_magnitude_is_held() {
        let mut net = triangle();
        net.buses[1].kind = BusKind::Pv;
        net.buses[1].v_set_pu = 1.02;
        let input = PowerFlowInput {
            p_sched_pu: vec![0.0, 0.5, -0.7],
            q_sched_pu: vec![0.0, 0.0, -0.1],
        };
        let sol = solve_power_flow(&net, &input, &PowerFlowOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.v_pu[1], 1.02, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.p_injection_pu[1], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn unsolvable_loading_reports_nonconvergence() {
        let net = Network {
            buses: vec![bus("slack", BusKind::Slack), bus("load", BusKind::Pq)],
            branches: vec![Branch {
                from: 0,
                to: 1,
                r_pu: 0.0,
                x_pu: 0.1,
                b_shunt_pu: 0.0,
                tap: 1.0,
            }],
            shunts: vec![C64::new(0.0, 0.0); 2],
            s_base_mva: 100.0,
            f0_hz: 50.0,
        };
        let input = PowerFlowInput {
            p_sched_pu: vec![0.0, -100.0],
            q_sched_pu: vec![0.0, -30.0],
        };
        let err = solve_power_flow(&net, &input, &PowerFlowOptions::default()).unwrap_err();
        match err {
            NetworkError::NotConverged { iterations, .. } => assert_eq!(iterations, 25),
            NetworkError::SingularJacobian { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }
}
