//! Frequency-quality metrics on sampled time series.
//!
//! All primitives take uniformly sampled slices plus the sample interval, so
//! they work unchanged on reduced-model step responses and on detailed
//! simulation channels. Conventions:
//!
//! * RoCoF is measured the way grid codes do: a *trailing* moving-average
//!   slope `(y(t) − y(t−w))/w` with a 500 ms default window, reported as the
//!   maximum magnitude over the series together with the time it occurs.
//! * Windowed power contributions are plain means of a ΔP series over
//!   `[0, w]` from the start of the slice (callers slice from the event).
//! * Ringdown fits use a Prony-style two-stage fit (linear recurrence for the
//!   poles, then linear least squares for amplitudes) of
//!   `A·e^{σt}·cos(ωt + φ) + c`, returning the dominant mode. Damping is
//!   `ξ = −σ/√(σ² + ω²)`, which is 1 for a pure decaying exponential.

use nalgebra::{Complex, DMatrix, DVector};
use thiserror::Error;

use crate::linalg::poly_roots;

/// Errors from metric evaluation.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("window of {window_s} s spans fewer than 2 samples at dt = {dt_s} s")]
    WindowTooShort { window_s: f64, dt_s: f64 },
    #[error("series of {len} samples is too short for this metric (need {need})")]
    SeriesTooShort { len: usize, need: usize },
    #[error("window of {window_s} s exceeds the series span of {span_s} s")]
    WindowExceedsSeries { window_s: f64, span_s: f64 },
    #[error("sample interval must be strictly positive, got {0}")]
    BadSampleInterval(f64),
    #[error("least-squares system for the ringdown fit is degenerate")]
    DegenerateFit,
}

fn check_dt(dt_s: f64) -> Result<(), MetricsError> {
    if dt_s > 0.0 && dt_s.is_finite() {
        Ok(())
    } else {
        Err(MetricsError::BadSampleInterval(dt_s))
    }
}

/// Maximum magnitude of the trailing moving-average slope
/// `(y[k] − y[k−m])/(m·dt)` with `m = round(window/dt)`, and the time (from
/// the start of the slice) at which it occurs.
pub fn max_abs_moving_slope(
    y: &[f64],
    dt_s: f64,
    window_s: f64,
) -> Result<(f64, f64), MetricsError> {
    check_dt(dt_s)?;
    let m = (window_s / dt_s).round() as usize;
    if m < 1 {
        return Err(MetricsError::WindowTooShort { window_s, dt_s });
    }
    if y.len() < m + 1 {
        return Err(MetricsError::SeriesTooShort {
            len: y.len(),
            need: m + 1,
        });
    }
    let w = m as f64 * dt_s;
    let mut best = 0.0_f64;
    let mut best_t = w;
    for k in m..y.len() {
        let slope = (y[k] - y[k - m]) / w;
        if slope.abs() > best.abs() {
            best = slope;
            best_t = k as f64 * dt_s;
        }
    }
    Ok((best, best_t))
}

/// Minimum of the series (the frequency nadir when fed a frequency channel).
pub fn nadir(y: &[f64]) -> Result<f64, MetricsError> {
    if y.is_empty() {
        return Err(MetricsError::SeriesTooShort { len: 0, need: 1 });
    }
    Ok(y.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Mean of `y` over `[0, w]` for each requested window `w` (seconds).
///
/// The slice is assumed to start at the disturbance; a constant series yields
/// that constant for every window.
pub fn windowed_means(
    y: &[f64],
    dt_s: f64,
    windows_s: &[f64],
) -> Result<Vec<(f64, f64)>, MetricsError> {
    check_dt(dt_s)?;
    if y.is_empty() {
        return Err(MetricsError::SeriesTooShort { len: 0, need: 1 });
    }
    let span = (y.len() - 1) as f64 * dt_s;
    let mut out = Vec::with_capacity(windows_s.len());
    for &w in windows_s {
        let m = (w / dt_s).round() as usize;
        if m + 1 > y.len() {
            return Err(MetricsError::WindowExceedsSeries {
                window_s: w,
                span_s: span,
            });
        }
        let mean = y[..=m].iter().sum::<f64>() / (m + 1) as f64;
        out.push((w, mean));
    }
    Ok(out)
}

/// Result of a damped-sinusoid ringdown fit `A·e^{σt}·cos(ωt + φ) + c`.
#[derive(Debug, Clone)]
pub struct RingdownFit {
    /// Oscillation frequency ω/2π of the dominant mode, Hz (0 for a pure
    /// exponential).
    pub frequency_hz: f64,
    /// Damping ratio ξ = −σ/√(σ² + ω²); 1 for a decaying exponential.
    pub damping_ratio: f64,
    /// Real part σ of the dominant mode, 1/s.
    pub sigma_per_s: f64,
    /// Amplitude A of the dominant mode.
    pub amplitude: f64,
    /// Phase φ in radians.
    pub phase_rad: f64,
    /// Constant offset c.
    pub offset: f64,
    /// Root-mean-square reconstruction error normalized by the RMS deviation
    /// of the series from its mean.
    pub residual: f64,
    /// Set when the residual exceeds the rejection threshold; the numbers are
    /// still reported.
    pub rejected: bool,
}

/// Options for [`ringdown_fit_with`].
#[derive(Debug, Clone)]
pub struct RingdownOptions {
    /// Number of recurrence poles fitted (2 per oscillatory mode). The
    /// dominant mode is selected from these by contribution.
    pub order: usize,
    /// Normalized-residual threshold above which the fit is flagged rejected.
    pub reject_threshold: f64,
    /// The fit decimates long series to at most this many samples.
    pub max_samples: usize,
}

impl Default for RingdownOptions {
    fn default() -> Self {
        Self {
            order: 4,
            reject_threshold: 0.1,
            max_samples: 4096,
        }
    }
}

/// Fit a damped sinusoid plus offset to a uniformly sampled ringdown with
/// default options.
pub fn ringdown_fit(y: &[f64], dt_s: f64) -> Result<RingdownFit, MetricsError> {
    ringdown_fit_with(y, dt_s, &RingdownOptions::default())
}

/// Fit a damped sinusoid plus offset to a uniformly sampled ringdown.
///
/// Stage 1 estimates discrete poles from a least-squares linear recurrence on
/// the offset-removed series (Prony); stage 2 solves a linear least-squares
/// problem for the offset and the real/imaginary amplitudes of every stable
/// candidate mode; the reported mode is the one with the largest RMS
/// contribution over the window.
pub fn ringdown_fit_with(
    y: &[f64],
    dt_s: f64,
    opts: &RingdownOptions,
) -> Result<RingdownFit, MetricsError> {
    check_dt(dt_s)?;
    let min_len = (3 * opts.order.max(2)).max(12);
    if y.len() < min_len {
        return Err(MetricsError::SeriesTooShort {
            len: y.len(),
            need: min_len,
        });
    }

    // Decimate long records; the modes of interest are far below the original
    // Nyquist rate, so a stride preserves them while keeping the least-squares
    // problems small.
    let stride = y.len().div_ceil(opts.max_samples).max(1);
    let ys: Vec<f64> = y.iter().step_by(stride).copied().collect();
    let dts = dt_s * stride as f64;
    let n = ys.len();
    let p = if n >= 6 * opts.order {
        opts.order
    } else {
        2
    }
    .min(n / 3)
    .max(2);

    // Offset seed: tail mean (the ringdown has decayed most by then).
    let tail = n / 5;
    let c0 = ys[n - tail.max(1)..].iter().sum::<f64>() / tail.max(1) as f64;
    let z: Vec<f64> = ys.iter().map(|v| v - c0).collect();

    // Stage 1: z[k] = Σ a_i z[k−i] + d, least squares for a (the intercept d
    // absorbs any residual constant so it cannot bias the pole estimates).
    let rows = n - p;
    let mut design = DMatrix::<f64>::zeros(rows, p + 1);
    let mut rhs = DVector::<f64>::zeros(rows);
    for k in 0..rows {
        for i in 0..p {
            design[(k, i)] = z[k + p - 1 - i];
        }
        design[(k, p)] = 1.0;
        rhs[k] = z[k + p];
    }
    let svd = design.svd(true, true);
    let a = svd
        .solve(&rhs, 1e-12)
        .map_err(|_| MetricsError::DegenerateFit)?;

    // Characteristic polynomial s^p − a1 s^{p−1} − ... − ap.
    let mut char_poly = vec![1.0];
    for i in 0..p {
        char_poly.push(-a[i]);
    }
    let roots = poly_roots(&char_poly);

    // Continuous-time candidate modes; keep one member per conjugate pair.
    let mut modes: Vec<Complex<f64>> = Vec::new();
    for r in roots {
        if !r.re.is_finite() || !r.im.is_finite() {
            continue;
        }
        let mag = r.norm();
        if !(1e-8..=10.0).contains(&mag) {
            continue;
        }
        let lam = r.ln() / dts;
        if lam.im < -1e-12 {
            continue; // conjugate partner carries this pair
        }
        modes.push(lam);
    }
    if modes.is_empty() {
        return Err(MetricsError::DegenerateFit);
    }

    // Stage 2: linear LS for offset + per-mode amplitudes.
    // Columns: 1, then per mode either e^{σt} (real) or
    // e^{σt}cos(ωt), e^{σt}sin(ωt) (oscillatory).
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut col_map: Vec<(usize, bool)> = Vec::new(); // (mode idx, is_sin)
    for (mi, lam) in modes.iter().enumerate() {
        let osc = lam.im.abs() > 1e-9 / dts.max(1.0);
        if osc {
            let mut cc = Vec::with_capacity(n);
            let mut sc = Vec::with_capacity(n);
            for k in 0..n {
                let t = k as f64 * dts;
                let e = (lam.re * t).exp();
                cc.push(e * (lam.im * t).cos());
                sc.push(e * (lam.im * t).sin());
            }
            cols.push(cc);
            col_map.push((mi, false));
            cols.push(sc);
            col_map.push((mi, true));
        } else {
            let mut ec = Vec::with_capacity(n);
            for k in 0..n {
                let t = k as f64 * dts;
                ec.push((lam.re * t).exp());
            }
            cols.push(ec);
            col_map.push((mi, false));
        }
    }
    let mut design2 = DMatrix::<f64>::zeros(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            design2[(i, j)] = v;
        }
    }
    let target = DVector::<f64>::from_column_slice(&ys);
    let svd2 = design2.clone().svd(true, true);
    let coef = svd2
        .solve(&target, 1e-12)
        .map_err(|_| MetricsError::DegenerateFit)?;

    // Residual, normalized by the series' RMS deviation from its mean.
    let recon = &design2 * &coef;
    let err = &target - &recon;
    let mean = ys.iter().sum::<f64>() / n as f64;
    let dev_rms = (ys.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let err_rms = (err.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    let residual = if dev_rms > 0.0 {
        err_rms / dev_rms
    } else {
        err_rms
    };

    // Dominant mode by RMS contribution over the window.
    let mut best: Option<(f64, usize, f64, f64)> = None; // (rms, mode, c_cos, c_sin)
    let mut j = 1; // skip the offset column
    let mut idx = 0;
    while idx < col_map.len() {
        let (mi, _) = col_map[idx];
        let c_cos = coef[j];
        let (c_sin, used) = if idx + 1 < col_map.len() && col_map[idx + 1] == (mi, true) {
            (coef[j + 1], 2)
        } else {
            (0.0, 1)
        };
        let mut sum = 0.0;
        for k in 0..n {
            let v = c_cos * cols[j][k]
                + if used == 2 { c_sin * cols[j + 1][k] } else { 0.0 };
            sum += v * v;
        }
        let rms = (sum / n as f64).sqrt();
        if best.map_or(true, |(b, _, _, _)| rms > b) {
            best = Some((rms, mi, c_cos, c_sin));
        }
        j += used;
        idx += used;
    }
    let (_, mi, c_cos, c_sin) = best.ok_or(MetricsError::DegenerateFit)?;
    let lam = modes[mi];
    let sigma = lam.re;
    let omega = lam.im.abs();
    let norm = (sigma * sigma + omega * omega).sqrt();
    let damping_ratio = if norm > 0.0 { -sigma / norm } else { 0.0 };
    // A cos(ωt + φ) = c_cos cos(ωt) + c_sin sin(ωt)
    let amplitude = (c_cos * c_cos + c_sin * c_sin).sqrt();
    let phase_rad = if omega > 0.0 {
        (-c_sin).atan2(c_cos)
    } else {
        0.0
    };
    Ok(RingdownFit {
        frequency_hz: omega / (2.0 * std::f64::consts::PI),
        damping_ratio,
        sigma_per_s: sigma,
        amplitude,
        phase_rad,
        offset: coef[0],
        residual,
        rejected: residual > opts.reject_threshold,
    })
}

/// Frequency-quality numbers for one frequency channel of a simulation.
#[derive(Debug, Clone)]
pub struct ChannelMetrics {
    /// Channel name, e.g. `f_hz:sg1`.
    pub channel: String,
    /// Minimum frequency after the disturbance, Hz.
    pub nadir_hz: f64,
    /// Maximum frequency after the disturbance, Hz.
    pub peak_hz: f64,
    /// Mean over the trailing tail of the horizon, Hz.
    pub steady_hz: f64,
    /// Signed moving-average slope of largest magnitude, Hz/s.
    pub max_rocof_hz_per_s: f64,
    /// Time at which it occurs, s (simulation clock).
    pub max_rocof_time_s: f64,
}

/// Windowed post-disturbance power contribution of one power channel.
#[derive(Debug, Clone)]
pub struct PowerContribution {
    /// Channel name, e.g. `p_mw:gfor1`.
    pub channel: String,
    /// Pre-disturbance baseline, MW.
    pub baseline_mw: f64,
    /// `(window s, mean ΔP over [t_event, t_event+window] in MW)` pairs.
    pub windowed_delta_mw: Vec<(f64, f64)>,
}

/// Summary of one simulation: per-channel frequency metrics, the worst RoCoF
/// across them, and windowed power contributions measured from the
/// disturbance time (taken from the event list, never detected from data).
#[derive(Debug, Clone)]
pub struct SimSummary {
    pub event_time_s: f64,
    pub rocof_window_s: f64,
    pub frequency: Vec<ChannelMetrics>,
    pub power: Vec<PowerContribution>,
    /// Largest |RoCoF| over all reported frequency channels, Hz/s.
    pub worst_rocof_hz_per_s: f64,
}

/// Options for [`summarize`].
#[derive(Debug, Clone)]
pub struct SummaryOptions {
    /// Moving-average window for RoCoF, seconds.
    pub rocof_window_s: f64,
    /// Windows for mean power contributions, seconds.
    pub power_windows_s: Vec<f64>,
    /// Fraction of the post-event span averaged for the steady value.
    pub tail_fraction: f64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            rocof_window_s: 0.5,
            power_windows_s: vec![0.5, 1.0, 2.0, 10.0],
            tail_fraction: 0.1,
        }
    }
}

/// Summarize a simulation's `f_hz:*` and `p_mw:*` channels from the given
/// disturbance time. Channels that are entirely NaN after the event (tripped
/// units) keep NaN metrics rather than being dropped, so reports stay
/// positionally stable. Power windows longer than the remaining horizon are
/// skipped for all channels alike.
pub fn summarize(
    result: &crate::timedomain::SimResult,
    event_time_s: f64,
    opts: &SummaryOptions,
) -> Result<SimSummary, MetricsError> {
    let dt = result.dt_s
        * if result.time_s.len() >= 2 {
            ((result.time_s[1] - result.time_s[0]) / result.dt_s).round()
        } else {
            1.0
        };
    check_dt(dt)?;
    let k0 = result.index_at(event_time_s);
    let n = result.time_s.len();
    if k0 + 2 > n {
        return Err(MetricsError::SeriesTooShort { len: n, need: k0 + 2 });
    }
    let post = n - k0;
    let tail = ((post as f64 * opts.tail_fraction).ceil() as usize).clamp(1, post);

    let mut frequency = Vec::new();
    let mut worst = 0.0_f64;
    for ch in &result.channels {
        if !ch.name.starts_with("f_hz:") {
            continue;
        }
        let y = &ch.data[k0..];
        let nadir_hz = y.iter().copied().fold(f64::INFINITY, f64::min);
        let peak_hz = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let steady_hz = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
        let (slope, t_rel) = match max_abs_moving_slope(y, dt, opts.rocof_window_s) {
            Ok(v) => v,
            Err(MetricsError::SeriesTooShort { .. }) => (f64::NAN, f64::NAN),
            Err(e) => return Err(e),
        };
        if slope.abs() > worst.abs() {
            worst = slope;
        }
        frequency.push(ChannelMetrics {
            channel: ch.name.clone(),
            nadir_hz: if nadir_hz.is_finite() { nadir_hz } else { f64::NAN },
            peak_hz: if peak_hz.is_finite() { peak_hz } else { f64::NAN },
            steady_hz,
            max_rocof_hz_per_s: slope,
            max_rocof_time_s: result.time_s[k0] + t_rel,
        });
    }

    let mut power = Vec::new();
    for ch in &result.channels {
        if !ch.name.starts_with("p_mw:") {
            continue;
        }
        // Baseline: last sample strictly before the event (the sample at the
        // event index is recorded after events apply); falls back to the
        // first sample when the event sits at the start.
        let baseline = if k0 > 0 { ch.data[k0 - 1] } else { ch.data[0] };
        let delta: Vec<f64> = ch.data[k0..].iter().map(|&p| p - baseline).collect();
        let mut means = Vec::new();
        for &w in &opts.power_windows_s {
            let m = (w / dt).round() as usize;
            if m + 1 > delta.len() {
                continue;
            }
            means.push((w, delta[..=m].iter().sum::<f64>() / (m + 1) as f64));
        }
        power.push(PowerContribution {
            channel: ch.name.clone(),
            baseline_mw: baseline,
            windowed_delta_mw: means,
        });
    }

    Ok(SimSummary {
        event_time_s,
        rocof_window_s: opts.rocof_window_s,
        frequency,
        power,
        worst_rocof_hz_per_s: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn moving_slope_of_a_ramp_is_its_gradient() {
        let dt = 0.01;
        let y: Vec<f64> = (0..500).map(|k| -0.3 * k as f64 * dt).collect();
        let (slope, _) = max_abs_moving_slope(&y, dt, 0.5).unwrap();
        assert_relative_eq!(slope, -0.3, max_relative = 1e-12);
    }

    #[test]
    fn moving_slope_window_must_span_two_samples() {
        let y = vec![0.0; 100];
        let err = max_abs_moving_slope(&y, 1.0, 0.1).unwrap_err();
        assert!(matches!(err, MetricsError::WindowTooShort { .. }));
    }

    #[test]
    fn moving_slope_finds_the_steep_segment() {
        let dt = 0.01;
        // Flat, then a dive between 2 s and 3 s, then flat.
        let y: Vec<f64> = (0..500)
            .map(|k| {
                let t = k as f64 * dt;
                if t < 2.0 {
                    0.0
                } else if t < 3.0 {
                    -(t - 2.0)
                } else {
                    -1.0
                }
            })
            .collect();
        let (slope, t_at) = max_abs_moving_slope(&y, dt, 0.5).unwrap();
        assert_relative_eq!(slope, -1.0, max_relative = 1e-9);
        assert!((2.5..=3.0).contains(&t_at), "t_at = {t_at}");
    }

    #[test]
    fn nadir_is_the_series_minimum() {
        assert_eq!(nadir(&[50.0, 49.8, 49.91, 49.95]).unwrap(), 49.8);
    }

    #[test]
    fn windowed_means_of_constant_series() {
        let y = vec![10.0; 1101];
        let out = windowed_means(&y, 0.01, &[0.5, 1.0, 2.0, 10.0]).unwrap();
        for (_, mean) in out {
            assert_abs_diff_eq!(mean, 10.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn windowed_means_reject_window_beyond_series() {
        let y = vec![1.0; 50];
        let err = windowed_means(&y, 0.01, &[10.0]).unwrap_err();
        assert!(matches!(err, MetricsError::WindowExceedsSeries { .. }));
    }

    #[test]
    fn ringdown_fit_recovers_synthetic_damped_sinusoid() {
        let dt = 0.01;
        let (sigma, omega, a, phi, c) = (-0.35, 2.0 * std::f64::consts::PI * 1.3, 0.8, 0.4, 49.8);
        let y: Vec<f64> = (0..2000)
            .map(|k| {
                let t = k as f64 * dt;
                a * (sigma * t).exp() * (omega * t + phi).cos() + c
            })
            .collect();
        let fit = ringdown_fit(&y, dt).unwrap();
        assert!(!fit.rejected, "residual = {}", fit.residual);
        assert_relative_eq!(fit.frequency_hz, 1.3, max_relative = 1e-6);
        assert_relative_eq!(fit.sigma_per_s, sigma, max_relative = 1e-6);
        let xi = -sigma / (sigma * sigma + omega * omega).sqrt();
        assert_relative_eq!(fit.damping_ratio, xi, max_relative = 1e-6);
        assert_relative_eq!(fit.amplitude, a, max_relative = 1e-4);
        assert_abs_diff_eq!(fit.offset, c, epsilon = 1e-6);
    }

    #[test]
    fn ringdown_fit_recovers_pure_exponential_time_constant() {
        let dt = 0.01;
        let tau = 1.6;
        let y: Vec<f64> = (0..1500)
            .map(|k| {
                let t = k as f64 * dt;
                0.5 * (-t / tau).exp() + 1.0
            })
            .collect();
        let fit = ringdown_fit(&y, dt).unwrap();
        assert!(!fit.rejected);
        assert!(fit.frequency_hz.abs() < 1e-6);
        assert_relative_eq!(-1.0 / fit.sigma_per_s, tau, max_relative = 0.01);
        assert_abs_diff_eq!(fit.damping_ratio, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn ringdown_fit_flags_a_poor_model() {
        // A triangle wave is not a damped sinusoid; the residual must say so.
        let dt = 0.01;
        let y: Vec<f64> = (0..1000)
            .map(|k| {
                let t = k as f64 * dt;
                let frac = (t / 2.0).fract();
                if frac < 0.5 {
                    frac
                } else {
                    1.0 - frac
                }
            })
            .collect();
        let fit = ringdown_fit(&y, dt).unwrap();
        assert!(fit.rejected, "residual = {}", fit.residual);
    }

    #[test]
    fn ringdown_fit_needs_enough_samples() {
        let err = ringdown_fit(&[1.0, 2.0, 3.0], 0.1).unwrap_err();
        assert!(matches!(err, MetricsError::SeriesTooShort { .. }));
    }

    fn synthetic_result() -> crate::timedomain::SimResult {
        use crate::timedomain::{Channel, SimResult};
        // 0..10 s at 10 ms; event at 1 s. Frequency ramps from 50 down to
        // 49.8 between 1 s and 3 s, then holds. Power steps 100 → 120 MW.
        let dt = 0.01;
        let n = 1001;
        let time_s: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let f: Vec<f64> = time_s
            .iter()
            .map(|&t| {
                if t < 1.0 {
                    50.0
                } else if t < 3.0 {
                    50.0 - 0.1 * (t - 1.0)
                } else {
                    49.8
                }
            })
            .collect();
        let p: Vec<f64> = time_s
            .iter()
            .map(|&t| if t < 1.0 { 100.0 } else { 120.0 })
            .collect();
        SimResult {
            time_s,
            channels: vec![
                Channel {
                    name: "f_hz:sg1".into(),
                    unit: "Hz".into(),
                    data: f,
                },
                Channel {
                    name: "p_mw:sg1".into(),
                    unit: "MW".into(),
                    data: p,
                },
            ],
            dt_s: dt,
            warnings: vec![],
        }
    }

    #[test]
    fn summary_reads_ramp_and_step_correctly() {
        let res = synthetic_result();
        let sum = summarize(&res, 1.0, &SummaryOptions::default()).unwrap();
        assert_eq!(sum.frequency.len(), 1);
        let f = &sum.frequency[0];
        assert_abs_diff_eq!(f.nadir_hz, 49.8, epsilon = 1e-12);
        assert_abs_diff_eq!(f.peak_hz, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.steady_hz, 49.8, epsilon = 1e-12);
        // During the ramp the trailing 0.5 s slope is exactly −0.1 Hz/s.
        assert_abs_diff_eq!(f.max_rocof_hz_per_s, -0.1, epsilon = 1e-9);
        assert!(f.max_rocof_time_s > 1.0 && f.max_rocof_time_s <= 3.51);
        assert_abs_diff_eq!(sum.worst_rocof_hz_per_s, -0.1, epsilon = 1e-9);
        // Power stepped by +20 MW: every window mean is 20.
        let p = &sum.power[0];
        assert_abs_diff_eq!(p.baseline_mw, 100.0, epsilon = 1e-12);
        assert_eq!(p.windowed_delta_mw.len(), 3); // the 10 s window no longer fits
        for &(_, mean) in &p.windowed_delta_mw {
            assert_abs_diff_eq!(mean, 20.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn summary_keeps_nan_channels_for_tripped_units() {
        let mut res = synthetic_result();
        // Simulate a tripped unit: NaN after the event.
        for (k, v) in res.channels[0].data.iter_mut().enumerate() {
            if k >= 100 {
                *v = f64::NAN;
            }
        }
        let sum = summarize(&res, 1.0, &SummaryOptions::default()).unwrap();
        assert!(sum.frequency[0].nadir_hz.is_nan());
        assert_eq!(sum.frequency[0].channel, "f_hz:sg1");
    }

    #[test]
    fn summary_respects_recorded_stride() {
        // Same series recorded every 5th step: dt between samples is 50 ms.
        let res = synthetic_result();
        let strided = crate::timedomain::SimResult {
            time_s: res.time_s.iter().copied().step_by(5).collect(),
            channels: res
                .channels
                .iter()
                .map(|c| crate::timedomain::Channel {
                    name: c.name.clone(),
                    unit: c.unit.clone(),
                    data: c.data.iter().copied().step_by(5).collect(),
                })
                .collect(),
            dt_s: res.dt_s,
            warnings: vec![],
        };
        let sum = summarize(&strided, 1.0, &SummaryOptions::default()).unwrap();
        assert_abs_diff_eq!(
            sum.frequency[0].max_rocof_hz_per_s,
            -0.1,
            epsilon = 1e-9
        );
    }

    #[test]
    fn ringdown_fit_separates_two_modes() {
        // Slow dominant + fast decaying contaminant: the dominant is returned.
        let dt = 0.005;
        let y: Vec<f64> = (0..4000)
            .map(|k| {
                let t = k as f64 * dt;
                1.0 * (-0.2 * t).exp() * (2.0 * std::f64::consts::PI * 0.7 * t).cos()
                    + 0.3 * (-2.0 * t).exp() * (2.0 * std::f64::consts::PI * 4.0 * t).cos()
            })
            .collect();
        let fit = ringdown_fit(&y, dt).unwrap();
        assert!(!fit.rejected, "residual = {}", fit.residual);
        assert_relative_eq!(fit.frequency_hz, 0.7, max_relative = 1e-3);
        assert_relative_eq!(fit.sigma_per_s, -0.2, max_relative = 1e-3);
    }
}
