//! Reduced-order frequency-response models.
//!
//! Three transfer functions describe how the frequency of a power system reacts
//! to a change in electrical load, depending on what provides the balancing
//! power:
//!
//! * a synchronous machine alone — swing dynamics `2H·s`, a first-order turbine
//!   `1/(τ_turb·s + 1)` and a governor droop `1/R_f-sg`;
//! * a synchronous machine plus a grid-*following* converter that measures
//!   frequency through a first-order filter `τ_p-gfol` and injects support
//!   power with droop `1/R_f-gfol`; the converter share of the system rating is
//!   `α` and its participation factor is `β`;
//! * a synchronous machine plus a grid-*forming* converter whose P–f droop
//!   (`R_f-gfor`, power filter `τ_p-gfor`) acts like a voltage source, so the
//!   converter contributes to frequency formation rather than following it.
//!
//! All models are per-unit on the aggregate system base. The returned transfer
//! function `G(s)` maps electrical-power imbalance to frequency deviation, and
//! [`step_response`] applies the sign convention that a load **increase** `ΔP`
//! produces the deviation `Δf(s) = −G(s)·ΔP/s`, i.e. frequency drops.
//!
//! Two scaling laws fall out of these models and are used throughout the tests:
//! the initial rate of change of frequency after a load step is `−ΔP/(2H)` for
//! the machine alone, `−ΔP/(2H(1−α))` with a grid-following converter (support
//! arrives only after the measurement filter, so the *initial* slope sees only
//! the de-rated machine), and `−ΔP·τ_turb/b₂` with a grid-forming converter,
//! whose droop acts instantaneously enough to soften the initial slope once
//! `τ_p-gfor` is large.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{discretize_zoh, poly_div, poly_eval, poly_mul, poly_roots, poly_trim};
use crate::metrics;
use crate::par;

/// Errors from reduced-model construction and evaluation.
#[derive(Debug, Error)]
pub enum ReducedError {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("parameter `{name}` must lie in {range}, got {value}")]
    OutOfRange {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("transfer function must be proper (deg num {deg_num} > deg den {deg_den})")]
    NotProper { deg_num: usize, deg_den: usize },
    #[error("denominator must be non-empty with nonzero leading coefficient")]
    BadDenominator,
    #[error("step size {dt_s} s exceeds stability-resolution limit {limit_s} s (smallest time constant / 10)")]
    DtTooLarge { dt_s: f64, limit_s: f64 },
    #[error("sweep requires a strictly positive load step, got {0}")]
    NonPositiveStep(f64),
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ReducedError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ReducedError::NonPositive { name, value })
    }
}

/// Parameters of the synchronous-machine-only frequency model.
#[derive(Debug, Clone, PartialEq)]
pub struct SgReducedParams {
    /// Inertia constant H in seconds.
    pub h_s: f64,
    /// Governor droop in pu (frequency deviation per unit power).
    pub r_f_sg_pu: f64,
    /// Turbine time constant in seconds.
    pub tau_turb_s: f64,
    /// Nominal frequency in Hz.
    pub f0_hz: f64,
    /// Aggregate system base in MVA (used only for MW conversions).
    pub s_base_mva: f64,
}

impl SgReducedParams {
    pub fn new(
        h_s: f64,
        r_f_sg_pu: f64,
        tau_turb_s: f64,
        f0_hz: f64,
        s_base_mva: f64,
    ) -> Result<Self, ReducedError> {
        check_positive("h_s", h_s)?;
        check_positive("r_f_sg_pu", r_f_sg_pu)?;
        check_positive("tau_turb_s", tau_turb_s)?;
        check_positive("f0_hz", f0_hz)?;
        check_positive("s_base_mva", s_base_mva)?;
        Ok(Self {
            h_s,
            r_f_sg_pu,
            tau_turb_s,
            f0_hz,
            s_base_mva,
        })
    }
}

impl Default for SgReducedParams {
    /// Study defaults: H = 5 s, R = 5 %, τ_turb = 5 s, 50 Hz, 100 MVA base.
    fn default() -> Self {
        Self {
            h_s: 5.0,
            r_f_sg_pu: 0.05,
            tau_turb_s: 5.0,
            f0_hz: 50.0,
            s_base_mva: 100.0,
        }
    }
}

/// Parameters of the machine + grid-following-converter frequency model.
#[derive(Debug, Clone, PartialEq)]
pub struct GfolReducedParams {
    pub sg: SgReducedParams,
    /// Converter share of the system rating, in [0, 1). At α = 1 no machine
    /// remains and the grid-following converter has nothing to follow.
    pub alpha: f64,
    /// Converter participation in frequency support, in [0, 1].
    pub beta: f64,
    /// Converter frequency-support droop in pu.
    pub r_f_gfol_pu: f64,
    /// Frequency-measurement filter time constant in seconds.
    pub tau_p_gfol_s: f64,
}

impl GfolReducedParams {
    pub fn new(
        sg: SgReducedParams,
        alpha: f64,
        beta: f64,
        r_f_gfol_pu: f64,
        tau_p_gfol_s: f64,
    ) -> Result<Self, ReducedError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(ReducedError::OutOfRange {
                name: "alpha",
                range: "[0, 1)",
                value: alpha,
            });
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(ReducedError::OutOfRange {
                name: "beta",
                range: "[0, 1]",
                value: beta,
            });
        }
        check_positive("r_f_gfol_pu", r_f_gfol_pu)?;
        check_positive("tau_p_gfol_s", tau_p_gfol_s)?;
        Ok(Self {
            sg,
            alpha,
            beta,
            r_f_gfol_pu,
            tau_p_gfol_s,
        })
    }
}

/// Parameters of the machine + grid-forming-converter frequency model.
#[derive(Debug, Clone, PartialEq)]
pub struct GforReducedParams {
    pub sg: SgReducedParams,
    /// Converter share of the system rating, in [0, 1].
    pub alpha: f64,
    /// Grid-forming P–f droop in pu.
    pub r_f_gfor_pu: f64,
    /// Active-power measurement filter time constant in seconds.
    pub tau_p_gfor_s: f64,
}

impl GforReducedParams {
    pub fn new(
        sg: SgReducedParams,
        alpha: f64,
        r_f_gfor_pu: f64,
        tau_p_gfor_s: f64,
    ) -> Result<Self, ReducedError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(ReducedError::OutOfRange {
                name: "alpha",
                range: "[0, 1]",
                value: alpha,
            });
        }
        check_positive("r_f_gfor_pu", r_f_gfor_pu)?;
        check_positive("tau_p_gfor_s", tau_p_gfor_s)?;
        Ok(Self {
            sg,
            alpha,
            r_f_gfor_pu,
            tau_p_gfor_s,
        })
    }
}

/// A rational transfer function in descending powers of `s`.
///
/// Invariants: the denominator is non-empty with a nonzero leading coefficient
/// and the function is proper (`deg num ≤ deg den`).
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransfer {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl RationalTransfer {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self, ReducedError> {
        let den_t = poly_trim(&den);
        if den_t.is_empty() || den_t[0] == 0.0 {
            return Err(ReducedError::BadDenominator);
        }
        let num_t = poly_trim(&num);
        if num_t.len() > den_t.len() {
            return Err(ReducedError::NotProper {
                deg_num: num_t.len() - 1,
                deg_den: den_t.len() - 1,
            });
        }
        Ok(Self {
            num: num_t,
            den: den_t,
        })
    }

    /// DC gain `G(0) = num(0)/den(0)`. Infinite if the function has a pole at
    /// the origin.
    pub fn dc_gain(&self) -> f64 {
        poly_eval(&self.num, 0.0) / poly_eval(&self.den, 0.0)
    }

    /// Poles (denominator roots).
    pub fn poles(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.den)
    }

    /// Zeros (numerator roots).
    pub fn zeros(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.num)
    }

    /// Divide numerator and denominator by the linear factor `(τ·s + 1)`,
    /// returning the reduced function and the largest absolute division
    /// remainder (0 when the factor is genuinely shared).
    pub fn cancel_linear_factor(&self, tau_s: f64) -> (RationalTransfer, f64) {
        let factor = [tau_s, 1.0];
        let (num_q, num_r) = poly_div(&self.num, &factor);
        let (den_q, den_r) = poly_div(&self.den, &factor);
        let rem = num_r
            .iter()
            .chain(den_r.iter())
            .fold(0.0_f64, |m, &c| m.max(c.abs()));
        (
            RationalTransfer {
                num: poly_trim(&num_q),
                den: poly_trim(&den_q),
            },
            rem,
        )
    }

    /// Controllable-canonical state-space realization `(A, B, C, D)` with
    /// `G(s) = C (sI − A)⁻¹ B + D`.
    pub fn realize(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
        let n = self.den.len() - 1;
        let lead = self.den[0];
        // Monic denominator coefficients a[i] of s^i, i = 0..n-1.
        let mut a_coef = vec![0.0; n];
        for i in 0..n {
            a_coef[i] = self.den[n - i] / lead;
        }
        // Numerator scaled by the same leading coefficient, padded to s^n.
        let mut b_coef = vec![0.0; n + 1];
        let offset = n + 1 - self.num.len();
        for (i, &c) in self.num.iter().enumerate() {
            b_coef[offset + i] = c / lead;
        }
        // b_coef is descending; convert to ascending powers.
        b_coef.reverse();
        let d = b_coef[n];
        let mut a = DMatrix::<f64>::zeros(n.max(0), n.max(0));
        for i in 0..n.saturating_sub(1) {
            a[(i, i + 1)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(n);
        let mut c = DVector::<f64>::zeros(n);
        if n > 0 {
            for j in 0..n {
                a[(n - 1, j)] = -a_coef[j];
                c[j] = b_coef[j] - d * a_coef[j];
            }
            b[n - 1] = 1.0;
        }
        (a, b, c, d)
    }
}

/// Frequency response of a synchronous machine with governor and turbine:
/// `G(s) = (τ_turb·s + 1) / (2H·τ_turb·s² + 2H·s + 1/R_f-sg)`.
pub fn sg_transfer(p: &SgReducedParams) -> RationalTransfer {
    let two_h = 2.0 * p.h_s;
    RationalTransfer {
        num: vec![p.tau_turb_s, 1.0],
        den: vec![two_h * p.tau_turb_s, two_h, 1.0 / p.r_f_sg_pu],
    }
}

/// Frequency response with grid-following converter support.
///
/// Closing the loop of the de-rated swing `2H(1−α)·s`, the governed turbine
/// `(1−α)/R_f-sg/(τ_turb·s+1)` and the filtered converter support
/// `αβ/R_f-gfol/(τ_p-gfol·s+1)` gives
///
/// ```text
///            (τ_turb·s + 1)(τ_p-gfol·s + 1)
/// G(s) = ─────────────────────────────────────
///         a₃s³ + a₂s² + a₁s + a₀
///
/// a₃ = 2H(1−α)·τ_turb·τ_p-gfol
/// a₂ = 2H(1−α)·(τ_turb + τ_p-gfol)
/// a₁ = 2H(1−α) + (1−α)·τ_p-gfol/R_f-sg + αβ·τ_turb/R_f-gfol
/// a₀ = (1−α)/R_f-sg + αβ/R_f-gfol
/// ```
///
/// At α = 0 the factor `(τ_p-gfol·s + 1)` cancels exactly and the machine-only
/// model is recovered; at β = 0 the converter carries no frequency support and
/// both the transient and the steady state degrade with α.
pub fn gfol_transfer(p: &GfolReducedParams) -> RationalTransfer {
    let two_h = 2.0 * p.sg.h_s;
    let om = 1.0 - p.alpha;
    let tt = p.sg.tau_turb_s;
    let tp = p.tau_p_gfol_s;
    let a3 = two_h * om * tt * tp;
    let a2 = two_h * om * (tt + tp);
    let a1 = two_h * om + om * tp / p.sg.r_f_sg_pu + p.alpha * p.beta * tt / p.r_f_gfol_pu;
    let a0 = om / p.sg.r_f_sg_pu + p.alpha * p.beta / p.r_f_gfol_pu;
    RationalTransfer {
        num: poly_mul(&[tt, 1.0], &[tp, 1.0]),
        den: vec![a3, a2, a1, a0],
    }
}

/// Frequency response with grid-forming converter support.
///
/// The grid-forming droop imposes `Δf = −R_f-gfor·ΔP_gfor` through its power
/// filter, which yields
///
/// ```text
///            (τ_turb·s + 1)
/// G(s) = ──────────────────────
///         b₂s² + b₁s + b₀
///
/// b₂ = [2H(1−α) + τ_p-gfor·α/R_f-gfor]·τ_turb
/// b₁ = 2H(1−α) + (τ_turb + τ_p-gfor)·α/R_f-gfor
/// b₀ = (1−α)/R_f-sg + α/R_f-gfor
/// ```
///
/// At α = 0 this is the machine-only model; at α = 1 it factors into the pure
/// first-order droop response `R_f-gfor/(τ_p-gfor·s + 1)`. The converter power
/// filter emulates inertia: `τ_p-gfor·α/R_f-gfor` enters b₂ exactly where
/// machine inertia does.
pub fn gfor_transfer(p: &GforReducedParams) -> RationalTransfer {
    let two_h = 2.0 * p.sg.h_s;
    let om = 1.0 - p.alpha;
    let tt = p.sg.tau_turb_s;
    let tp = p.tau_p_gfor_s;
    let ar = p.alpha / p.r_f_gfor_pu;
    let b2 = (two_h * om + tp * ar) * tt;
    let b1 = two_h * om + (tt + tp) * ar;
    let b0 = om / p.sg.r_f_sg_pu + ar;
    RationalTransfer {
        num: vec![tt, 1.0],
        den: vec![b2, b1, b0],
    }
}

/// First-order droop response of a grid-forming converter feeding an isolated
/// load: `Δf/ΔP = R_f-gfor / (τ_p-gfor·s + 1)`.
pub fn standalone_gfor_transfer(
    r_f_gfor_pu: f64,
    tau_p_gfor_s: f64,
) -> Result<RationalTransfer, ReducedError> {
    check_positive("r_f_gfor_pu", r_f_gfor_pu)?;
    check_positive("tau_p_gfor_s", tau_p_gfor_s)?;
    Ok(RationalTransfer {
        num: vec![r_f_gfor_pu],
        den: vec![tau_p_gfor_s, 1.0],
    })
}

/// Sampled frequency-deviation response to a load step.
#[derive(Debug, Clone)]
pub struct StepResponse {
    /// Sample times, starting at 0.
    pub time_s: Vec<f64>,
    /// Frequency deviation in pu (negative for a load increase).
    pub deviation_pu: Vec<f64>,
    /// Sampling interval in seconds.
    pub dt_s: f64,
    /// True when the transfer function has a pole in the open right half-plane;
    /// the response is still returned.
    pub unstable: bool,
}

impl StepResponse {
    /// Last sample of the deviation.
    pub fn final_value_pu(&self) -> f64 {
        *self.deviation_pu.last().unwrap_or(&0.0)
    }

    /// First-difference estimate of the initial slope, in pu/s.
    pub fn initial_slope_pu_per_s(&self) -> f64 {
        if self.deviation_pu.len() < 2 {
            return 0.0;
        }
        (self.deviation_pu[1] - self.deviation_pu[0]) / self.dt_s
    }

    /// Most negative deviation sample (the nadir), in pu.
    pub fn min_deviation_pu(&self) -> f64 {
        self.deviation_pu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Absolute frequency trace in Hz for a nominal frequency `f0`.
    pub fn frequency_hz(&self, f0_hz: f64) -> Vec<f64> {
        self.deviation_pu.iter().map(|d| f0_hz * (1.0 + d)).collect()
    }
}

/// Exact sampled response of `Δf(s) = −G(s)·ΔP/s` on a fixed grid.
///
/// The realization is discretized with a zero-order hold through the matrix
/// exponential, so every sample is exact to rounding for the given model; `dt`
/// only controls resolution, not accuracy. `dt` must still resolve the fastest
/// mode (`dt ≤ τ_min/10` with `τ_min = 1/max|λ|` over the poles) so that
/// sampled-data metrics computed on the response are meaningful.
pub fn step_response(
    tf: &RationalTransfer,
    delta_p_pu: f64,
    t_end_s: f64,
    dt_s: f64,
) -> Result<StepResponse, ReducedError> {
    check_positive("dt_s", dt_s)?;
    if t_end_s < 0.0 || !t_end_s.is_finite() {
        return Err(ReducedError::NonPositive {
            name: "t_end_s",
            value: t_end_s,
        });
    }
    let poles = tf.poles();
    let max_mag = poles.iter().map(|p| p.norm()).fold(0.0_f64, f64::max);
    if max_mag > 0.0 {
        let limit = 1.0 / max_mag / 10.0;
        if dt_s > limit {
            return Err(ReducedError::DtTooLarge {
                dt_s,
                limit_s: limit,
            });
        }
    }
    let unstable = poles
        .iter()
        .any(|p| p.re > 1e-9 * p.norm().max(1.0));

    let n_steps = (t_end_s / dt_s).round() as usize;
    let n_samples = n_steps + 1;
    let time_s: Vec<f64> = (0..n_samples).map(|k| k as f64 * dt_s).collect();

    let u = -delta_p_pu;
    let (a, b, c, d) = tf.realize();
    let n = a.nrows();
    let mut deviation_pu = Vec::with_capacity(n_samples);
    if n == 0 {
        // Static gain: the response is the scaled step itself.
        deviation_pu.resize(n_samples, d * u);
    } else {
        let (ad, bd) = discretize_zoh(&a, &b, dt_s);
        let mut x = DVector::<f64>::zeros(n);
        for _ in 0..n_samples {
            deviation_pu.push(c.dot(&x) + d * u);
            x = &ad * &x + &bd * u;
        }
    }
    Ok(StepResponse {
        time_s,
        deviation_pu,
        dt_s,
        unstable,
    })
}

/// One cell of a converter-penetration sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub alpha: f64,
    /// Participation factor for grid-following sweeps; fixed at 1 for
    /// grid-forming sweeps, which have no β.
    pub beta: f64,
    /// Nadir depth relative to the all-machine (α = 0) case.
    pub nadir_ratio: f64,
    /// Maximum moving-average RoCoF magnitude relative to the α = 0 case.
    pub rocof_ratio: f64,
}

/// Result of a penetration sweep, with the α = 0 reference values the ratios
/// are normalized by.
#[derive(Debug, Clone)]
pub struct PenetrationSweep {
    pub cells: Vec<SweepCell>,
    pub base_nadir_pu: f64,
    pub base_rocof_pu_per_s: f64,
    pub dt_s: f64,
    pub t_end_s: f64,
}

/// Options shared by the penetration sweeps.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Load step in pu of the system base.
    pub delta_p_pu: f64,
    /// Moving-average window for the RoCoF metric, seconds.
    pub rocof_window_s: f64,
    /// Simulation horizon; chosen from the slowest pole when `None`.
    pub t_end_s: Option<f64>,
    /// Sample step; chosen as `τ_min/100` over the grid when `None`.
    pub dt_s: Option<f64>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            delta_p_pu: 0.1,
            rocof_window_s: 0.5,
            t_end_s: None,
            dt_s: None,
        }
    }
}

fn sweep_grid_steps(
    transfers: &[RationalTransfer],
    opts: &SweepOptions,
) -> Result<(f64, f64), ReducedError> {
    check_positive("rocof_window_s", opts.rocof_window_s)?;
    let mut fastest = 0.0_f64; // max |λ|
    let mut slowest_decay = f64::INFINITY; // min |Re λ|
    for tf in transfers {
        for p in tf.poles() {
            fastest = fastest.max(p.norm());
            if p.re.abs() > 1e-12 {
                slowest_decay = slowest_decay.min(p.re.abs());
            }
        }
    }
    let dt = match opts.dt_s {
        Some(v) => {
            check_positive("dt_s", v)?;
            v
        }
        None => {
            let from_poles = if fastest > 0.0 {
                1.0 / fastest / 100.0
            } else {
                opts.rocof_window_s / 100.0
            };
            from_poles.min(opts.rocof_window_s / 20.0)
        }
    };
    let t_end = match opts.t_end_s {
        Some(v) => {
            check_positive("t_end_s", v)?;
            v
        }
        None => {
            let settle = if slowest_decay.is_finite() {
                4.0 / slowest_decay
            } else {
                20.0
            };
            settle.clamp(5.0 * opts.rocof_window_s, 300.0)
        }
    };
    Ok((dt, t_end))
}

fn response_metrics(
    tf: &RationalTransfer,
    delta_p_pu: f64,
    dt: f64,
    t_end: f64,
    window_s: f64,
) -> Result<(f64, f64), ReducedError> {
    let resp = step_response(tf, delta_p_pu, t_end, dt)?;
    let nadir = resp.min_deviation_pu();
    let (rocof, _) = metrics::max_abs_moving_slope(&resp.deviation_pu, dt, window_s)
        .unwrap_or((0.0, 0.0));
    Ok((nadir, rocof))
}

fn penetration_sweep_impl(
    base: &RationalTransfer,
    cells: Vec<(f64, f64, RationalTransfer)>,
    opts: &SweepOptions,
    sequential: bool,
) -> Result<PenetrationSweep, ReducedError> {
    if opts.delta_p_pu <= 0.0 {
        return Err(ReducedError::NonPositiveStep(opts.delta_p_pu));
    }
    let all: Vec<RationalTransfer> = std::iter::once(base.clone())
        .chain(cells.iter().map(|(_, _, tf)| tf.clone()))
        .collect();
    let (dt, t_end) = sweep_grid_steps(&all, opts)?;
    let (base_nadir, base_rocof) =
        response_metrics(base, opts.delta_p_pu, dt, t_end, opts.rocof_window_s)?;
    let eval = |i: usize| -> Result<SweepCell, ReducedError> {
        let (alpha, beta, tf) = &cells[i];
        let (nadir, rocof) =
            response_metrics(tf, opts.delta_p_pu, dt, t_end, opts.rocof_window_s)?;
        Ok(SweepCell {
            alpha: *alpha,
            beta: *beta,
            nadir_ratio: nadir / base_nadir,
            rocof_ratio: rocof / base_rocof,
        })
    };
    let results: Vec<Result<SweepCell, ReducedError>> = if sequential {
        par::map_indices_seq(cells.len(), eval)
    } else {
        par::map_indices(cells.len(), eval)
    };
    let mut out = Vec::with_capacity(results.len());
    for r in results {
        out.push(r?);
    }
    Ok(PenetrationSweep {
        cells: out,
        base_nadir_pu: base_nadir,
        base_rocof_pu_per_s: base_rocof,
        dt_s: dt,
        t_end_s: t_end,
    })
}

fn gfol_cells(
    sg: &SgReducedParams,
    r_f_gfol_pu: f64,
    tau_p_gfol_s: f64,
    alphas: &[f64],
    betas: &[f64],
) -> Result<Vec<(f64, f64, RationalTransfer)>, ReducedError> {
    let mut cells = Vec::with_capacity(alphas.len() * betas.len());
    for &alpha in alphas {
        for &beta in betas {
            let p = GfolReducedParams::new(sg.clone(), alpha, beta, r_f_gfol_pu, tau_p_gfol_s)?;
            cells.push((alpha, beta, gfol_transfer(&p)));
        }
    }
    Ok(cells)
}

fn gfor_cells(
    sg: &SgReducedParams,
    r_f_gfor_pu: f64,
    tau_p_gfor_s: f64,
    alphas: &[f64],
) -> Result<Vec<(f64, f64, RationalTransfer)>, ReducedError> {
    let mut cells = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let p = GforReducedParams::new(sg.clone(), alpha, r_f_gfor_pu, tau_p_gfor_s)?;
        cells.push((alpha, 1.0, gfor_transfer(&p)));
    }
    Ok(cells)
}

/// Sweep grid-following penetration `α` and participation `β`, reporting nadir
/// and RoCoF ratios against the all-machine case. Cells are evaluated on
/// rayon when the `parallel` feature is enabled.
pub fn gfol_penetration_sweep(
    sg: &SgReducedParams,
    r_f_gfol_pu: f64,
    tau_p_gfol_s: f64,
    alphas: &[f64],
    betas: &[f64],
    opts: &SweepOptions,
) -> Result<PenetrationSweep, ReducedError> {
    let cells = gfol_cells(sg, r_f_gfol_pu, tau_p_gfol_s, alphas, betas)?;
    penetration_sweep_impl(&sg_transfer(sg), cells, opts, false)
}

/// Sequential form of [`gfol_penetration_sweep`].
pub fn gfol_penetration_sweep_seq(
    sg: &SgReducedParams,
    r_f_gfol_pu: f64,
    tau_p_gfol_s: f64,
    alphas: &[f64],
    betas: &[f64],
    opts: &SweepOptions,
) -> Result<PenetrationSweep, ReducedError> {
    let cells = gfol_cells(sg, r_f_gfol_pu, tau_p_gfol_s, alphas, betas)?;
    penetration_sweep_impl(&sg_transfer(sg), cells, opts, true)
}

/// Sweep grid-forming penetration `α`, reporting nadir and RoCoF ratios
/// against the all-machine case.
pub fn gfor_penetration_sweep(
    sg: &SgReducedParams,
    r_f_gfor_pu: f64,
    tau_p_gfor_s: f64,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<PenetrationSweep, ReducedError> {
    let cells = gfor_cells(sg, r_f_gfor_pu, tau_p_gfor_s, alphas)?;
    penetration_sweep_impl(&sg_transfer(sg), cells, opts, false)
}

/// Sequential form of [`gfor_penetration_sweep`].
pub fn gfor_penetration_sweep_seq(
    sg: &SgReducedParams,
    r_f_gfor_pu: f64,
    tau_p_gfor_s: f64,
    alphas: &[f64],
    opts: &SweepOptions,
) -> Result<PenetrationSweep, ReducedError> {
    let cells = gfor_cells(sg, r_f_gfor_pu, tau_p_gfor_s, alphas)?;
    penetration_sweep_impl(&sg_transfer(sg), cells, opts, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn default_sg() -> SgReducedParams {
        SgReducedParams::default()
    }

    #[test]
    fn sg_transfer_default_coefficients() {
        let tf = sg_transfer(&default_sg());
        assert_eq!(tf.num, vec![5.0, 1.0]);
        assert_eq!(tf.den, vec![50.0, 10.0, 20.0]);
    }

    #[test]
    fn gfol_transfer_half_penetration_coefficients() {
        let p = GfolReducedParams::new(default_sg(), 0.5, 1.0, 0.05, 0.25).unwrap();
        let tf = gfol_transfer(&p);
        // num = (5s+1)(0.25s+1)
        assert_eq!(tf.num, vec![1.25, 5.25, 1.0]);
        let expected = [6.25, 26.25, 57.5, 20.0];
        for (c, e) in tf.den.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn gfor_transfer_high_penetration_coefficients() {
        let p = GforReducedParams::new(default_sg(), 0.8, 0.05, 0.1).unwrap();
        let tf = gfor_transfer(&p);
        assert_eq!(tf.num, vec![5.0, 1.0]);
        let expected = [18.0, 83.6, 20.0];
        for (c, e) in tf.den.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn gfol_reduces_to_sg_at_zero_penetration() {
        let p = GfolReducedParams::new(default_sg(), 0.0, 0.7, 0.04, 0.3).unwrap();
        let tf = gfol_transfer(&p);
        let (reduced, rem) = tf.cancel_linear_factor(0.3);
        assert!(rem < 1e-12, "shared factor should cancel, remainder {rem}");
        let sg = sg_transfer(&default_sg());
        for (a, b) in reduced.num.iter().zip(sg.num.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in reduced.den.iter().zip(sg.den.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gfor_reduces_to_sg_at_zero_penetration() {
        let p = GforReducedParams::new(default_sg(), 0.0, 0.02, 0.7).unwrap();
        let tf = gfor_transfer(&p);
        let sg = sg_transfer(&default_sg());
        for (a, b) in tf.den.iter().zip(sg.den.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert_eq!(tf.num, sg.num);
    }

    #[test]
    fn gfor_at_full_penetration_is_first_order_droop() {
        let p = GforReducedParams::new(default_sg(), 1.0, 0.05, 0.1).unwrap();
        let tf = gfor_transfer(&p);
        // den should factor as (1/R)(τ_p s + 1)(τ_turb s + 1)
        let (reduced, rem) = tf.cancel_linear_factor(5.0);
        assert!(rem < 1e-9);
        // Remaining: [τ_p/R, 1/R] over num [1.0]
        assert_abs_diff_eq!(reduced.den[0] / reduced.den[1], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / reduced.den[1], 0.05, epsilon = 1e-12);
    }

    #[test]
    fn standalone_gfor_settles_at_droop_deviation() {
        let tf = standalone_gfor_transfer(0.05, 0.1).unwrap();
        let resp = step_response(&tf, 0.1, 2.0, 0.001).unwrap();
        // f_ss = 50·(1 − 0.05·0.1) = 49.75 Hz
        let f_ss = 50.0 * (1.0 + resp.final_value_pu());
        assert_abs_diff_eq!(f_ss, 49.75, epsilon = 1e-6);
    }

    #[test]
    fn sg_step_final_value_and_initial_slope() {
        let tf = sg_transfer(&default_sg());
        let resp = step_response(&tf, 0.1, 150.0, 0.01).unwrap();
        assert!(!resp.unstable);
        // Final value −R·ΔP = −0.005 pu.
        assert_abs_diff_eq!(resp.final_value_pu(), -0.005, epsilon = 1e-6);
        // Initial slope −ΔP/(2H) = −0.01 pu/s.
        assert_relative_eq!(resp.initial_slope_pu_per_s(), -0.01, max_relative = 1e-3);
    }

    #[test]
    fn gfol_initial_slope_scales_with_derated_inertia() {
        let p = GfolReducedParams::new(default_sg(), 0.5, 1.0, 0.05, 0.25).unwrap();
        let tf = gfol_transfer(&p);
        let resp = step_response(&tf, 0.1, 10.0, 0.0005).unwrap();
        // −ΔP/(2H(1−α)) = −0.02 pu/s
        assert_relative_eq!(resp.initial_slope_pu_per_s(), -0.02, max_relative = 1e-2);
    }

    #[test]
    fn gfol_initial_slope_independent_of_beta() {
        let mut slopes = Vec::new();
        for beta in [0.0, 0.5, 1.0] {
            let p = GfolReducedParams::new(default_sg(), 0.5, beta, 0.05, 0.25).unwrap();
            let resp = step_response(&gfol_transfer(&p), 0.1, 5.0, 0.0005).unwrap();
            slopes.push(resp.initial_slope_pu_per_s());
        }
        assert_relative_eq!(slopes[0], slopes[1], max_relative = 1e-6);
        assert_relative_eq!(slopes[1], slopes[2], max_relative = 1e-6);
    }

    #[test]
    fn gfor_initial_slope_follows_b2_law() {
        let p = GforReducedParams::new(default_sg(), 0.8, 0.05, 0.1).unwrap();
        let tf = gfor_transfer(&p);
        let resp = step_response(&tf, 0.1, 10.0, 0.0005).unwrap();
        // −ΔP·τ_turb/b₂ = −0.1·5/18
        assert_relative_eq!(
            resp.initial_slope_pu_per_s(),
            -0.1 * 5.0 / 18.0,
            max_relative = 1e-2
        );
    }

    #[test]
    fn gfor_full_penetration_step_matches_analytic_first_order() {
        let p = GforReducedParams::new(default_sg(), 1.0, 0.05, 0.1).unwrap();
        let tf = gfor_transfer(&p);
        let resp = step_response(&tf, 0.1, 1.0, 0.001).unwrap();
        for (t, y) in resp.time_s.iter().zip(resp.deviation_pu.iter()) {
            let expected = -0.05 * 0.1 * (1.0 - (-t / 0.1).exp());
            assert_abs_diff_eq!(*y, expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn zero_step_gives_identically_zero_response() {
        let tf = sg_transfer(&default_sg());
        let resp = step_response(&tf, 0.0, 10.0, 0.01).unwrap();
        assert!(resp.deviation_pu.iter().all(|&y| y == 0.0));
    }

    #[test]
    fn unstable_pole_is_flagged_not_rejected() {
        let tf = RationalTransfer::new(vec![1.0], vec![1.0, -1.0]).unwrap();
        let resp = step_response(&tf, 0.1, 2.0, 0.01).unwrap();
        assert!(resp.unstable);
        assert!(resp.deviation_pu.last().unwrap().abs() > 0.1);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let tf = sg_transfer(&default_sg());
        let err = step_response(&tf, 0.1, 10.0, 5.0).unwrap_err();
        assert!(matches!(err, ReducedError::DtTooLarge { .. }));
    }

    #[test]
    fn improper_transfer_is_rejected() {
        let err = RationalTransfer::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).unwrap_err();
        assert!(matches!(err, ReducedError::NotProper { .. }));
    }

    #[test]
    fn gfol_alpha_one_is_rejected() {
        let err = GfolReducedParams::new(default_sg(), 1.0, 1.0, 0.05, 0.25).unwrap_err();
        assert!(matches!(err, ReducedError::OutOfRange { name: "alpha", .. }));
    }

    #[test]
    fn empty_sweep_grid_yields_empty_result() {
        let sweep = gfol_penetration_sweep(
            &default_sg(),
            0.05,
            0.25,
            &[],
            &[],
            &SweepOptions::default(),
        )
        .unwrap();
        assert!(sweep.cells.is_empty());
    }

    #[test]
    fn gfol_sweep_alpha_zero_row_is_unity() {
        let sweep = gfol_penetration_sweep(
            &default_sg(),
            0.05,
            0.25,
            &[0.0],
            &[0.0, 0.5, 1.0],
            &SweepOptions::default(),
        )
        .unwrap();
        for cell in &sweep.cells {
            assert_relative_eq!(cell.nadir_ratio, 1.0, max_relative = 1e-9);
            assert_relative_eq!(cell.rocof_ratio, 1.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn gfol_sweep_rocof_worsens_with_penetration() {
        let sweep = gfol_penetration_sweep(
            &default_sg(),
            0.05,
            0.25,
            &[0.2, 0.5, 0.8],
            &[0.0, 1.0],
            &SweepOptions::default(),
        )
        .unwrap();
        for cell in &sweep.cells {
            assert!(
                cell.rocof_ratio > 1.0,
                "α={} β={} rocof_ratio={}",
                cell.alpha,
                cell.beta,
                cell.rocof_ratio
            );
        }
    }

    #[test]
    fn gfol_sweep_full_support_improves_nadir() {
        let sweep = gfol_penetration_sweep(
            &default_sg(),
            0.05,
            0.25,
            &[0.2, 0.5],
            &[1.0],
            &SweepOptions::default(),
        )
        .unwrap();
        for cell in &sweep.cells {
            assert!(
                cell.nadir_ratio < 1.0,
                "α={} nadir_ratio={}",
                cell.alpha,
                cell.nadir_ratio
            );
        }
    }

    #[test]
    fn gfor_sweep_can_reduce_rocof_at_high_penetration() {
        // With τ_p-gfor/R_f-gfor exceeding 2H, the filtered droop contributes
        // more "inertia" than the machine it displaces.
        let sweep = gfor_penetration_sweep(
            &default_sg(),
            0.05,
            1.0,
            &[0.5, 0.9, 1.0],
            &SweepOptions::default(),
        )
        .unwrap();
        let last = sweep.cells.last().unwrap();
        assert!(
            last.rocof_ratio <= 1.0,
            "α=1 rocof_ratio={}",
            last.rocof_ratio
        );
    }

    #[test]
    fn parallel_and_sequential_sweeps_agree() {
        let alphas = [0.0, 0.3, 0.6];
        let betas = [0.0, 1.0];
        let a = gfol_penetration_sweep(
            &default_sg(),
            0.05,
            0.25,
            &alphas,
            &betas,
            &SweepOptions::default(),
        )
        .unwrap();
        let b = gfol_penetration_sweep_seq(
            &default_sg(),
            0.05,
            0.25,
            &alphas,
            &betas,
            &SweepOptions::default(),
        )
        .unwrap();
        assert_eq!(a.cells, b.cells);
    }
}
