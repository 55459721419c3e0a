//! Deterministic rendering of study outputs: CSV tables and a plain-text
//! report. Every artifact starts with comment lines carrying the scenario
//! name and its configuration hash, so a result file can always be traced
//! back to the exact inputs that produced it.
//!
//! All renderers return `String`s and perform no I/O; callers decide where
//! the bytes go. Numbers are written with Rust's shortest round-trip float
//! formatting (dot decimal, locale-independent), so parsing a value back
//! recovers it bit for bit. Rows are `\n`-terminated, including the last.

use std::fmt::Write as _;

use crate::metrics::SimSummary;
use crate::reduced::PenetrationSweep;
use crate::smallsignal::ModeReport;
use crate::timedomain::SimResult;

/// Provenance stamp rendered at the top of every artifact.
#[derive(Debug, Clone, Copy)]
pub struct Header<'a> {
    pub scenario: &'a str,
    pub config_hash: &'a str,
}

impl Header<'_> {
    fn render(&self) -> String {
        format!(
            "# scenario: {}\n# config_hash: {}\n",
            self.scenario, self.config_hash
        )
    }
}

/// Shortest representation that parses back to exactly the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Minimal CSV quoting: fields containing a comma, quote or newline are
/// wrapped in double quotes with inner quotes doubled.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_row(fields: &[String]) -> String {
    let mut row = fields
        .iter()
        .map(|f| csv_field(f))
        .collect::<Vec<_>>()
        .join(",");
    row.push('\n');
    row
}

/// Recorded channels as one wide table, time first.
pub fn timeseries_csv(header: &Header, result: &SimResult) -> String {
    let mut out = header.render();
    let mut cols = vec!["time_s".to_string()];
    cols.extend(result.channels.iter().map(|c| c.name.clone()));
    out.push_str(&csv_row(&cols));
    for (k, t) in result.time_s.iter().enumerate() {
        let mut row = Vec::with_capacity(cols.len());
        row.push(fmt_f64(*t));
        for c in &result.channels {
            row.push(fmt_f64(c.data[k]));
        }
        out.push_str(&csv_row(&row));
    }
    out
}

/// One row per reported mode: eigenvalue, frequency, damping, class,
/// participating units.
pub fn modes_csv(header: &Header, modes: &[ModeReport]) -> String {
    let mut out = header.render();
    out.push_str("mode_id,re_1_per_s,im_rad_per_s,f_n_hz,damping_ratio,classification,participants\n");
    for m in modes {
        out.push_str(&csv_row(&[
            m.id.to_string(),
            fmt_f64(m.lambda.re),
            fmt_f64(m.lambda.im),
            fmt_f64(m.f_n_hz),
            fmt_f64(m.damping_ratio),
            m.classification.to_string(),
            m.participants.join(";"),
        ]));
    }
    out
}

/// Normalized participation factors: one row per state, one column per
/// reported mode (column ids match `modes.csv`).
pub fn pf_matrix_csv(header: &Header, state_names: &[String], modes: &[ModeReport]) -> String {
    let mut out = header.render();
    let mut cols = vec!["state".to_string()];
    cols.extend(modes.iter().map(|m| format!("mode_{}", m.id)));
    out.push_str(&csv_row(&cols));
    for (i, name) in state_names.iter().enumerate() {
        let mut row = Vec::with_capacity(cols.len());
        row.push(name.clone());
        for m in modes {
            row.push(fmt_f64(m.participation[i]));
        }
        out.push_str(&csv_row(&row));
    }
    out
}

/// Long-format metrics table: one row per (channel, metric) pair.
pub fn metrics_csv(header: &Header, summary: &SimSummary) -> String {
    let mut out = header.render();
    out.push_str("channel,metric,value\n");
    let mut push = |channel: &str, metric: &str, value: f64| {
        out.push_str(&csv_row(&[
            channel.to_string(),
            metric.to_string(),
            fmt_f64(value),
        ]));
    };
    push("", "event_time_s", summary.event_time_s);
    push("", "rocof_window_s", summary.rocof_window_s);
    push("", "worst_rocof_hz_per_s", summary.worst_rocof_hz_per_s);
    for f in &summary.frequency {
        push(&f.channel, "nadir_hz", f.nadir_hz);
        push(&f.channel, "peak_hz", f.peak_hz);
        push(&f.channel, "steady_hz", f.steady_hz);
        push(&f.channel, "max_rocof_hz_per_s", f.max_rocof_hz_per_s);
        push(&f.channel, "max_rocof_time_s", f.max_rocof_time_s);
    }
    for p in &summary.power {
        push(&p.channel, "baseline_mw", p.baseline_mw);
        for (window, delta) in &p.windowed_delta_mw {
            push(
                &p.channel,
                &format!("delta_mean_{}s_mw", fmt_f64(*window)),
                *delta,
            );
        }
    }
    out
}

/// Reduced-model sweep grid, one row per (α, β) cell. The α = 0 reference
/// values are recorded as comments so the ratios can be de-normalized.
pub fn sweep_csv(header: &Header, sweep: &PenetrationSweep) -> String {
    let mut out = header.render();
    let _ = writeln!(out, "# base_nadir_pu: {}", fmt_f64(sweep.base_nadir_pu));
    let _ = writeln!(
        out,
        "# base_rocof_pu_per_s: {}",
        fmt_f64(sweep.base_rocof_pu_per_s)
    );
    let _ = writeln!(out, "# dt_s: {}", fmt_f64(sweep.dt_s));
    let _ = writeln!(out, "# t_end_s: {}", fmt_f64(sweep.t_end_s));
    out.push_str("alpha,beta,nadir_ratio,rocof_ratio\n");
    for c in &sweep.cells {
        out.push_str(&csv_row(&[
            fmt_f64(c.alpha),
            fmt_f64(c.beta),
            fmt_f64(c.nadir_ratio),
            fmt_f64(c.rocof_ratio),
        ]));
    }
    out
}

/// Everything the text report can mention; absent sections are skipped.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    pub description: &'a str,
    pub warnings: &'a [String],
    pub summary: Option<&'a SimSummary>,
    pub modes: Option<&'a [ModeReport]>,
}

/// Human-readable run report.
pub fn report_txt(header: &Header, inputs: &ReportInputs) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Frequency study report");
    let _ = writeln!(out, "======================");
    let _ = writeln!(out, "scenario:    {}", header.scenario);
    let _ = writeln!(out, "config hash: {}", header.config_hash);
    if !inputs.description.is_empty() {
        let _ = writeln!(out, "\n{}", inputs.description);
    }
    if let Some(modes) = inputs.modes {
        let _ = writeln!(out, "\nFrequency modes");
        let _ = writeln!(out, "---------------");
        let _ = writeln!(
            out,
            "{:>8}  {:>22}  {:>10}  {:>8}  {:<16}  participants",
            "mode", "eigenvalue [1/s]", "f_n [Hz]", "zeta", "class"
        );
        for m in modes {
            let eig = format!("{:.4}{:+.4}j", m.lambda.re, m.lambda.im);
            let _ = writeln!(
                out,
                "{:>8}  {:>22}  {:>10.4}  {:>8.4}  {:<16}  {}",
                m.id,
                eig,
                m.f_n_hz,
                m.damping_ratio,
                m.classification.to_string(),
                m.participants.join(", "),
            );
        }
    }
    if let Some(s) = inputs.summary {
        let _ = writeln!(out, "\nFrequency metrics (event at t = {} s)", s.event_time_s);
        let _ = writeln!(out, "--------------------------------------");
        let _ = writeln!(
            out,
            "worst |RoCoF| over {} s windows: {:.4} Hz/s",
            s.rocof_window_s, s.worst_rocof_hz_per_s
        );
        let _ = writeln!(
            out,
            "{:<20}  {:>10}  {:>10}  {:>10}  {:>14}",
            "channel", "nadir [Hz]", "peak [Hz]", "steady [Hz]", "RoCoF [Hz/s]"
        );
        for f in &s.frequency {
            let _ = writeln!(
                out,
                "{:<20}  {:>10.4}  {:>10.4}  {:>10.4}  {:>14.4}",
                f.channel, f.nadir_hz, f.peak_hz, f.steady_hz, f.max_rocof_hz_per_s
            );
        }
        if !s.power.is_empty() {
            let _ = writeln!(out, "\nPower contributions (means over post-event windows)");
            for p in &s.power {
                let windows = p
                    .windowed_delta_mw
                    .iter()
                    .map(|(w, d)| format!("{w} s: {d:+.2} MW"))
                    .collect::<Vec<_>>()
                    .join(", ");
                let _ = writeln!(
                    out,
                    "{:<20}  baseline {:.2} MW; {}",
                    p.channel, p.baseline_mw, windows
                );
            }
        }
    }
    if !inputs.warnings.is_empty() {
        let _ = writeln!(out, "\nWarnings");
        let _ = writeln!(out, "--------");
        for w in inputs.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
