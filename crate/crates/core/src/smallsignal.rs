//! Numerical small-signal analysis: linearization of an assembled system at
//! its equilibrium, eigendecomposition with left/right eigenvectors,
//! participation factors, mode shapes, and classification of frequency modes.
//!
//! Linearization is numerical (central differences through the full
//! derivative map, inner algebraic network solve included), so any component
//! added later is analyzable without symbolic work. Eigenvectors come from
//! shifted inverse iteration on the Schur eigenvalues; left vectors are the
//! exact inverse of the right-vector matrix, which enforces biorthogonality
//! `ΨΦ = I` by construction.
//!
//! Frequency-mode classification follows the two-archetype scheme used in
//! converter-penetration studies: a *Global* mode moves all participating
//! units' frequencies together (centre-of-inertia dynamics), a
//! *Synchronisation* mode swings units against each other or synchronizes a
//! single unit against the rest of the grid. Phase comparisons use
//! output-weighted eigenvector entries (the droop sign of forming converters
//! is folded in), so "in phase" means in phase as frequency signals.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::C64;
use crate::par;
use crate::timedomain::{SimError, System};

/// Errors from linearization or eigenanalysis.
#[derive(Debug, Error)]
pub enum SsError {
    #[error("linearization point is not an equilibrium (‖f(x0)‖∞ = {residual:.3e} > {limit:.1e})")]
    NotEquilibrium { residual: f64, limit: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("eigenvector matrix is numerically singular (condition estimate {condition:.3e}); the matrix is defective or has an unresolved repeated eigenvalue")]
    Defective { condition: f64 },
    #[error("eigenvector residual {residual:.3e} exceeds {limit:.3e}")]
    ResidualTooLarge { residual: f64, limit: f64 },
    #[error("inverse iteration failed to converge for eigenvalue {lambda}")]
    InverseIteration { lambda: C64 },
    #[error("no mode has frequency-state participation above {p_min}; check model wiring")]
    NoFrequencyModes { p_min: f64 },
    #[error("matrix is not square or dimensions disagree")]
    Dimensions,
}

/// Linear state-space model with named axes.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
}

/// Full spectrum with right (`phi`, columns) and left (`psi`, rows)
/// eigenvectors normalized so `ΨΦ = I`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<C64>,
    pub phi: DMatrix<C64>,
    pub psi: DMatrix<C64>,
    /// max_i ‖Aφ_i − λ_iφ_i‖₂ over unit-norm φ_i.
    pub max_residual: f64,
    /// ‖Φ‖·‖Φ⁻¹‖ (Frobenius) — conditioning of the eigenbasis.
    pub phi_condition: f64,
    /// max |ΨΦ − I| achieved numerically.
    pub biorthogonality_residual: f64,
}

/// Participation factors, raw `|φ_ki ψ_ik|` and per-mode max-normalized.
#[derive(Debug, Clone)]
pub struct PfMatrix {
    pub raw: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
}

/// Frequency-mode archetypes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeClass {
    Synchronisation,
    Global,
    Other,
}

impl std::fmt::Display for ModeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeClass::Synchronisation => write!(f, "Synchronisation"),
            ModeClass::Global => write!(f, "Global"),
            ModeClass::Other => write!(f, "Other"),
        }
    }
}

/// One reported mode (one entry per conjugate pair).
#[derive(Debug, Clone)]
pub struct ModeReport {
    pub id: usize,
    pub lambda: C64,
    pub f_n_hz: f64,
    pub damping_ratio: f64,
    /// Normalized participation column over all states.
    pub participation: Vec<f64>,
    /// Output-weighted frequency shape entry per unit (unit id, complex).
    pub shape: Vec<(String, C64)>,
    /// Units whose frequency state participates above threshold.
    pub participants: Vec<String>,
    pub classification: ModeClass,
}

/// Classification thresholds (the reference study classifies visually; these
/// defaults are documented and adjustable).
#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Minimum normalized participation of a unit's frequency state.
    pub p_min: f64,
    /// Pairwise shape angle below which entries count as in phase, degrees.
    pub in_phase_deg: f64,
    /// Pairwise shape angle above which entries count as counter-phase.
    pub counter_phase_deg: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            p_min: 0.3,
            in_phase_deg: 60.0,
            counter_phase_deg: 120.0,
        }
    }
}

/// Per-unit frequency wiring used by the classifier.
#[derive(Debug, Clone)]
pub struct FreqUnit {
    pub id: String,
    /// Global index of the state carrying the unit's frequency dynamics.
    pub state_index: usize,
    /// Sparse output row mapping states to the unit's frequency deviation.
    pub output_row: Vec<(usize, f64)>,
}

/// Frequency wiring of all active units in an assembled system.
pub fn freq_units(system: &System) -> Vec<FreqUnit> {
    let states = system.freq_state_indices();
    let rows = system.freq_output_rows();
    states
        .into_iter()
        .zip(rows)
        .map(|((id, state_index), (_, output_row))| FreqUnit {
            id,
            state_index,
            output_row,
        })
        .collect()
}

/// Equilibrium residual accepted before linearization, pu/s.
const EQUILIBRIUM_LIMIT: f64 = 1e-8;
/// Eigenvector residual bound relative to ‖A‖.
const RESIDUAL_LIMIT_REL: f64 = 1e-8;
/// Eigenbasis condition beyond which the matrix is reported defective.
const CONDITION_LIMIT: f64 = 1e12;

/// Central-difference Jacobian of an arbitrary vector map. Exact for linear
/// maps; O(h²) otherwise. Column `j` uses step `h·(1 + |x0_j|)`.
pub fn jacobian_of<F>(f: F, x0: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let m = f(x0).len();
    let mut j = DMatrix::<f64>::zeros(m, n);
    let mut xp = x0.clone();
    for col in 0..n {
        let hc = h * (1.0 + x0[col].abs());
        xp[col] = x0[col] + hc;
        let fp = f(&xp);
        xp[col] = x0[col] - hc;
        let fm = f(&xp);
        xp[col] = x0[col];
        for row in 0..m {
            j[(row, col)] = (fp[row] - fm[row]) / (2.0 * hc);
        }
    }
    j
}

/// Linearize an assembled system at its current state.
///
/// Inputs are every constant-power load's active power and every unit's
/// active-power setpoint (both in pu on the system base); outputs are the
/// per-unit frequency deviations in pu.
pub fn linearize_system(system: &System, h: f64) -> Result<StateSpace, SsError> {
    let x0 = system.x.clone();
    let (f0, _) = system.derivative(&x0)?;
    let residual = f0.amax();
    if residual > EQUILIBRIUM_LIMIT {
        return Err(SsError::NotEquilibrium {
            residual,
            limit: EQUILIBRIUM_LIMIT,
        });
    }
    let n = system.n_states();

    // A: central differences over states; columns are independent.
    let cols = par::map_indices(n, |col| {
        let mut xp = x0.clone();
        let hc = h * (1.0 + x0[col].abs());
        xp[col] = x0[col] + hc;
        let (fp, _) = system.derivative(&xp).expect("derivative at perturbed state");
        xp[col] = x0[col] - hc;
        let (fm, _) = system.derivative(&xp).expect("derivative at perturbed state");
        (fp - fm) / (2.0 * hc)
    });
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (col, c) in cols.iter().enumerate() {
        a.set_column(col, c);
    }

    // B: one column per constant-power load P and per unit P setpoint.
    let mut input_names = Vec::new();
    let mut b_cols: Vec<DVector<f64>> = Vec::new();
    let s_base = system.s_base_mva;
    for (i, l) in system.loads.iter().enumerate() {
        if !matches!(
            l.load.params.model,
            crate::components::LoadModel::ConstantPower
        ) {
            continue;
        }
        let h_mw = h * s_base;
        let mut plus = system.clone();
        plus.loads[i].load.apply_step(h_mw, 0.0);
        let (fp, _) = plus.derivative(&x0)?;
        let mut minus = system.clone();
        minus.loads[i].load.apply_step(-h_mw, 0.0);
        let (fm, _) = minus.derivative(&x0)?;
        b_cols.push((fp - fm) / (2.0 * h));
        input_names.push(format!("p_load:{}", l.id));
    }
    for (i, u) in system.units.iter().enumerate() {
        if !system.is_active(i) {
            continue;
        }
        let (field, current) = match &u.unit {
            crate::components::Unit::Sg(sg) => ("p_ref_mw", sg.params.p_ref_mw),
            crate::components::Unit::Gfor(g) => ("p_star_mw", g.params.p_star_mw),
        };
        let h_mw = h * s_base;
        let mut plus = system.clone();
        plus.units[i].unit.set_setpoint(field, current + h_mw).expect("known field");
        let (fp, _) = plus.derivative(&x0)?;
        let mut minus = system.clone();
        minus.units[i].unit.set_setpoint(field, current - h_mw).expect("known field");
        let (fm, _) = minus.derivative(&x0)?;
        b_cols.push((fp - fm) / (2.0 * h));
        input_names.push(format!("p_set:{}", u.id));
    }
    let mut b = DMatrix::<f64>::zeros(n, b_cols.len());
    for (col, c) in b_cols.iter().enumerate() {
        b.set_column(col, c);
    }

    // C: per-unit frequency deviation rows, pu.
    let units = freq_units(system);
    let mut c = DMatrix::<f64>::zeros(units.len(), n);
    let mut output_names = Vec::new();
    for (row, fu) in units.iter().enumerate() {
        for &(idx, w) in &fu.output_row {
            c[(row, idx)] = w;
        }
        output_names.push(format!("df_pu:{}", fu.id));
    }
    let d = DMatrix::<f64>::zeros(units.len(), input_names.len());

    Ok(StateSpace {
        a,
        b,
        c,
        d,
        state_names: system.state_names(),
        input_names,
        output_names,
    })
}

fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// One pass of shifted inverse iteration for the eigenvector of `ac` at
/// `lambda`, orthogonalized against `ortho` (members of the same eigenvalue
/// cluster found earlier).
fn right_eigenvector(
    ac: &DMatrix<C64>,
    lambda: C64,
    ortho: &[DVector<C64>],
    seed: usize,
) -> Result<DVector<C64>, SsError> {
    let n = ac.nrows();
    let scale = 1.0 + lambda.norm();
    let mut shift_mag = 1e-10 * scale;
    for _attempt in 0..3 {
        let shift = lambda + C64::new(shift_mag, 0.37 * shift_mag);
        let mut m = ac.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        let lu = m.lu();
        // Deterministic start vector; the seed varies within a cluster so
        // repeated (but diagonalizable) eigenvalues resolve distinct vectors.
        let mut v = DVector::<C64>::from_fn(n, |i, _| {
            let k = (i + 1 + seed * 7) as f64;
            C64::new(1.0 / k, 0.3 / (k + 1.0))
        });
        let mut ok = true;
        for _ in 0..4 {
            for o in ortho {
                let proj = o.dotc(&v);
                v -= o * proj;
            }
            match lu.solve(&v) {
                Some(y) => {
                    let norm = y.norm();
                    if !norm.is_finite() || norm == 0.0 {
                        ok = false;
                        break;
                    }
                    v = y / C64::new(norm, 0.0);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            for o in ortho {
                let proj = o.dotc(&v);
                v -= o * proj;
            }
            let norm = v.norm();
            if norm > 1e-8 {
                v /= C64::new(norm, 0.0);
                // Deterministic phase: largest entry made real positive.
                let imax = (0..n)
                    .max_by(|&i, &j| v[i].norm().partial_cmp(&v[j].norm()).unwrap())
                    .unwrap();
                let phase = v[imax] / C64::new(v[imax].norm(), 0.0);
                v /= phase;
                return Ok(v);
            }
        }
        shift_mag *= 100.0;
    }
    Err(SsError::InverseIteration { lambda })
}

/// Full eigendecomposition of a real matrix with `ΨΦ = I` left vectors.
pub fn eigen(a: &DMatrix<f64>) -> Result<EigenDecomposition, SsError> {
    if a.nrows() != a.ncols() {
        return Err(SsError::Dimensions);
    }
    let n = a.nrows();
    let ac = a.map(|x| C64::new(x, 0.0));
    let eigenvalues: Vec<C64> = a.clone().complex_eigenvalues().iter().copied().collect();
    let a_norm = frobenius(&ac);
    let im_tol = 1e-9 * (1.0 + eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max));

    // Cluster repeated eigenvalues so their vectors are mutually
    // orthogonalized instead of collapsing onto one direction.
    let cluster_tol = 1e-7 * (1.0 + eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max));
    let mut phi = DMatrix::<C64>::zeros(n, n);
    let mut done = vec![false; n];
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        if done[i] {
            continue;
        }
        let li = eigenvalues[i];
        if li.im < -im_tol {
            // Mirror of a conjugate computed when its partner is visited.
            continue;
        }
        // Members of this eigenvalue's cluster (same half-plane).
        let members: Vec<usize> = (0..n)
            .filter(|&j| {
                !done[j]
                    && eigenvalues[j].im >= -im_tol
                    && (eigenvalues[j] - li).norm() < cluster_tol
            })
            .collect();
        let mut ortho: Vec<DVector<C64>> = Vec::new();
        for (seed, &j) in members.iter().enumerate() {
            let v = right_eigenvector(&ac, eigenvalues[j], &ortho, seed)?;
            let res = (&ac * &v - &v * eigenvalues[j]).norm();
            max_residual = max_residual.max(res);
            phi.set_column(j, &v);
            done[j] = true;
            ortho.push(v);
            // Mirror the conjugate partner, if any.
            if eigenvalues[j].im > im_tol {
                if let Some(p) = (0..n)
                    .filter(|&k| {
                        !done[k] && (eigenvalues[k] - eigenvalues[j].conj()).norm() < cluster_tol
                    })
                    .min_by(|&x, &y| {
                        (eigenvalues[x] - eigenvalues[j].conj())
                            .norm()
                            .partial_cmp(&(eigenvalues[y] - eigenvalues[j].conj()).norm())
                            .unwrap()
                    })
                {
                    let vc = phi.column(j).map(|z| z.conj());
                    phi.set_column(p, &vc);
                    done[p] = true;
                }
            }
        }
    }

    if max_residual > RESIDUAL_LIMIT_REL * a_norm.max(1.0) {
        return Err(SsError::ResidualTooLarge {
            residual: max_residual,
            limit: RESIDUAL_LIMIT_REL * a_norm.max(1.0),
        });
    }

    let phi_lu = phi.clone().lu();
    let psi = phi_lu.try_inverse().ok_or(SsError::Defective {
        condition: f64::INFINITY,
    })?;
    let phi_condition = frobenius(&phi) * frobenius(&psi);
    if phi_condition > CONDITION_LIMIT {
        return Err(SsError::Defective {
            condition: phi_condition,
        });
    }
    let mut bio: f64 = 0.0;
    let prod = &psi * &phi;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            bio = bio.max((prod[(i, j)] - expect).norm());
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        phi,
        psi,
        max_residual,
        phi_condition,
        biorthogonality_residual: bio,
    })
}

/// Participation factors `p_ki = |φ_ki ψ_ik|`, raw and max-normalized per
/// mode. Raw values are invariant under diagonal similarity transforms.
pub fn participation_matrix(ed: &EigenDecomposition) -> PfMatrix {
    let n = ed.phi.nrows();
    let mut raw = DMatrix::<f64>::zeros(n, n);
    for mode in 0..n {
        for state in 0..n {
            raw[(state, mode)] = (ed.phi[(state, mode)] * ed.psi[(mode, state)]).norm();
        }
    }
    let mut normalized = raw.clone();
    for mode in 0..n {
        let maxv = (0..n).map(|s| raw[(s, mode)]).fold(0.0, f64::max);
        if maxv > 0.0 {
            for state in 0..n {
                normalized[(state, mode)] /= maxv;
            }
        }
    }
    PfMatrix { raw, normalized }
}

/// Phase verdict over a set of complex shape entries.
fn phase_verdict(entries: &[C64], opts: &ClassifyOptions) -> ModeClass {
    let mut all_in_phase = true;
    let mut any_counter = false;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let a = entries[i];
            let b = entries[j];
            if a.norm() == 0.0 || b.norm() == 0.0 {
                continue;
            }
            let angle = (a / b).arg().abs().to_degrees();
            if angle >= opts.in_phase_deg {
                all_in_phase = false;
            }
            if angle > opts.counter_phase_deg {
                any_counter = true;
            }
        }
    }
    if any_counter {
        ModeClass::Synchronisation
    } else if all_in_phase {
        ModeClass::Global
    } else {
        ModeClass::Other
    }
}

/// Classify the system's modes into Synchronisation / Global / Other and
/// produce one report per conjugate pair, sorted by |Re λ| (slowest-decaying
/// first).
pub fn classify_modes(
    ed: &EigenDecomposition,
    pf: &PfMatrix,
    units: &[FreqUnit],
    opts: &ClassifyOptions,
) -> Result<Vec<ModeReport>, SsError> {
    let n = ed.eigenvalues.len();
    let im_tol = 1e-9 * (1.0 + ed.eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max));

    // One representative per conjugate pair.
    let mut rep_indices: Vec<usize> = Vec::new();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] {
            continue;
        }
        let li = ed.eigenvalues[i];
        if li.im.abs() <= im_tol {
            rep_indices.push(i);
            used[i] = true;
            continue;
        }
        if li.im < 0.0 {
            continue;
        }
        rep_indices.push(i);
        used[i] = true;
        // Mark the conjugate partner as consumed.
        if let Some(p) = (0..n)
            .filter(|&k| !used[k] && ed.eigenvalues[k].im < 0.0)
            .min_by(|&x, &y| {
                (ed.eigenvalues[x] - li.conj())
                    .norm()
                    .partial_cmp(&(ed.eigenvalues[y] - li.conj()).norm())
                    .unwrap()
            })
        {
            if (ed.eigenvalues[p] - li.conj()).norm() < 1e-6 * (1.0 + li.norm()) {
                used[p] = true;
            }
        }
    }
    rep_indices.sort_by(|&a, &b| {
        ed.eigenvalues[a]
            .re
            .abs()
            .partial_cmp(&ed.eigenvalues[b].re.abs())
            .unwrap()
            .then(
                ed.eigenvalues[a]
                    .im
                    .abs()
                    .partial_cmp(&ed.eigenvalues[b].im.abs())
                    .unwrap(),
            )
    });

    // Candidate modes: any unit frequency state participates above p_min.
    struct Candidate {
        mode: usize,
        participants: Vec<String>,
        shape: Vec<(String, C64)>,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for &mode in &rep_indices {
        let mut participants = Vec::new();
        let mut shape = Vec::new();
        for fu in units {
            let p = pf.normalized[(fu.state_index, mode)];
            let entry: C64 = fu
                .output_row
                .iter()
                .map(|&(idx, w)| ed.phi[(idx, mode)] * w)
                .sum();
            shape.push((fu.id.clone(), entry));
            if p >= opts.p_min {
                participants.push(fu.id.clone());
            }
        }
        if !participants.is_empty() {
            candidates.push(Candidate {
                mode,
                participants,
                shape,
            });
        }
    }
    if candidates.is_empty() {
        return Err(SsError::NoFrequencyModes { p_min: opts.p_min });
    }

    // Multi-participant candidates classify by phase; single-participant
    // candidates are Synchronisation (one unit swinging against the grid),
    // except that the slowest candidate overall is the Global
    // (centre-of-inertia) mode when no multi-participant Global exists.
    let mut class_of: std::collections::BTreeMap<usize, ModeClass> = std::collections::BTreeMap::new();
    let mut have_global = false;
    for c in &candidates {
        if c.participants.len() >= 2 {
            let entries: Vec<C64> = c
                .shape
                .iter()
                .filter(|(id, _)| c.participants.contains(id))
                .map(|&(_, e)| e)
                .collect();
            let verdict = phase_verdict(&entries, opts);
            if verdict == ModeClass::Global {
                have_global = true;
            }
            class_of.insert(c.mode, verdict);
        }
    }
    if !have_global {
        // Slowest single-participant candidate by |λ| becomes Global.
        if let Some(slowest) = candidates
            .iter()
            .filter(|c| c.participants.len() == 1)
            .min_by(|a, b| {
                ed.eigenvalues[a.mode]
                    .norm()
                    .partial_cmp(&ed.eigenvalues[b.mode].norm())
                    .unwrap()
            })
        {
            class_of.insert(slowest.mode, ModeClass::Global);
        }
    }
    for c in &candidates {
        class_of
            .entry(c.mode)
            .or_insert(ModeClass::Synchronisation);
    }

    // Assemble reports for every representative mode.
    let candidate_map: std::collections::BTreeMap<usize, &Candidate> =
        candidates.iter().map(|c| (c.mode, c)).collect();
    let mut reports = Vec::with_capacity(rep_indices.len());
    for (id, &mode) in rep_indices.iter().enumerate() {
        let lambda = ed.eigenvalues[mode];
        let mag = lambda.norm();
        let damping_ratio = if lambda.im.abs() <= im_tol {
            // Real-pole convention: report ξ = ±1.
            if lambda.re <= 0.0 { 1.0 } else { -1.0 }
        } else if mag > 0.0 {
            -lambda.re / mag
        } else {
            0.0
        };
        let participation: Vec<f64> = (0..n).map(|s| pf.normalized[(s, mode)]).collect();
        let (participants, shape, classification) = match candidate_map.get(&mode) {
            Some(c) => (
                c.participants.clone(),
                c.shape.clone(),
                *class_of.get(&mode).unwrap_or(&ModeClass::Other),
            ),
            None => {
                let shape = units
                    .iter()
                    .map(|fu| {
                        let entry: C64 = fu
                            .output_row
                            .iter()
                            .map(|&(idx, w)| ed.phi[(idx, mode)] * w)
                            .sum();
                        (fu.id.clone(), entry)
                    })
                    .collect();
                (Vec::new(), shape, ModeClass::Other)
            }
        };
        reports.push(ModeReport {
            id: id + 1,
            lambda,
            f_n_hz: mag / (2.0 * std::f64::consts::PI),
            damping_ratio,
            participation,
            shape,
            participants,
            classification,
        });
    }
    Ok(reports)
}

/// Convenience pipeline: linearize, decompose, classify.
pub fn analyze(
    system: &System,
    h: f64,
    opts: &ClassifyOptions,
) -> Result<(StateSpace, EigenDecomposition, PfMatrix, Vec<ModeReport>), SsError> {
    let ss = linearize_system(system, h)?;
    let ed = eigen(&ss.a)?;
    let pf = participation_matrix(&ed);
    let units = freq_units(system);
    let reports = classify_modes(&ed, &pf, &units, opts)?;
    Ok((ss, ed, pf, reports))
}
