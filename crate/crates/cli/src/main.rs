//! Command-line front end: load a scenario (file or built-in), apply
//! overrides, validate it, run the requested analysis, and write
//! deterministic artifacts (CSV tables plus a text report).
//!
//! Exit codes: 0 on success, 2 when the input fails to parse or validate,
//! 3 when a valid scenario fails at run time.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridfreq::metrics::{summarize, SummaryOptions};
use gridfreq::report::{self, Header, ReportInputs};
use gridfreq::scenario::{
    apply_override, builtin, Scenario, ScenarioError, Severity, BUILTIN_NAMES,
};
use gridfreq::smallsignal::{analyze, ClassifyOptions, ModeClass};
use gridfreq::timedomain::simulate;

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gridfreq",
    version,
    about = "Frequency dynamics of mixed machine/converter power systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario and print every diagnostic
    Validate(CommonArgs),
    /// Run the time-domain simulation (timeseries.csv, report.txt)
    Simulate(CommonArgs),
    /// Linearize at the operating point and report the frequency modes
    /// (modes.csv, pf_matrix.csv, report.txt)
    Modes(CommonArgs),
    /// Simulate and compute frequency-quality metrics (metrics.csv, report.txt)
    Metrics(CommonArgs),
    /// Run the sweep the scenario declares, either a reduced-model grid or a
    /// one-parameter re-run grid (sweep.csv)
    Sweep(CommonArgs),
    /// Run a reduced-model penetration study (sweep.csv)
    Reduced(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file
    #[arg(long, value_name = "PATH", conflicts_with = "builtin")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: case1, case2, gfol_sweep, gfor_alpha, multimachine6
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Output directory (created if missing)
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override a scenario field before validation, e.g.
    /// --set system.units.vsc1.tau_p_gfor_s=1.0 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for the integrator step, seconds
    #[arg(long, value_name = "S")]
    dt: Option<f64>,
    /// Shorthand for the simulation horizon, seconds
    #[arg(long, value_name = "S")]
    t_end: Option<f64>,
    /// Worker threads for parallel sections (0 = automatic)
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }
    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Parse { .. }
            | ScenarioError::Validation { .. }
            | ScenarioError::UnknownBuiltin { .. }
            | ScenarioError::Override { .. }
            | ScenarioError::NotASystemScenario
            | ScenarioError::NotAReducedScenario => Failure::validation(e.to_string()),
            ScenarioError::Sim(_) | ScenarioError::Reduced(_) => Failure::runtime(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let args = match &cli.command {
        Command::Validate(a)
        | Command::Simulate(a)
        | Command::Modes(a)
        | Command::Metrics(a)
        | Command::Sweep(a)
        | Command::Reduced(a) => a,
    };
    if args.jobs > 0 {
        // Ignore "already initialized": only the first pool wins, which can
        // only happen in-process during tests.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build_global();
    }
    let (scenario, doc) = load_scenario(args)?;
    match cli.command {
        Command::Validate(_) => cmd_validate(&scenario),
        Command::Simulate(a) => cmd_simulate(&a, &scenario),
        Command::Modes(a) => cmd_modes(&a, &scenario),
        Command::Metrics(a) => cmd_metrics(&a, &scenario),
        Command::Sweep(a) => cmd_sweep(&a, &scenario, &doc),
        Command::Reduced(a) => cmd_reduced(&a, &scenario),
    }
}

/// Load from file or built-in, apply `--set`/`--dt`/`--t-end`, and parse into
/// the typed scenario. Returns the typed form and the raw JSON document (the
/// sweep command re-derives per-cell scenarios from the latter).
fn load_scenario(args: &CommonArgs) -> Result<(Scenario, serde_json::Value), Failure> {
    let mut doc: serde_json::Value = match (&args.scenario, &args.builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::validation(format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text).map_err(|e| {
                Failure::validation(format!("{} is not valid JSON: {e}", path.display()))
            })?
        }
        (None, Some(name)) => builtin(name)?.to_value(),
        _ => {
            return Err(Failure::validation(format!(
                "give exactly one of --scenario <PATH> or --builtin <NAME> (built-ins: {})",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    for spec in &args.set {
        apply_override(&mut doc, spec)?;
    }
    // The shorthands land on whichever study section the document carries.
    let section = if doc.get("system").is_some() {
        Some(("system.integrator.dt_s", "system.integrator.t_end_s"))
    } else if doc.get("reduced").is_some() {
        Some(("reduced.dt_s", "reduced.t_end_s"))
    } else {
        None
    };
    if let Some((dt_path, t_end_path)) = section {
        if let Some(dt) = args.dt {
            apply_override(&mut doc, &format!("{dt_path}={dt}"))?;
        }
        if let Some(t_end) = args.t_end {
            apply_override(&mut doc, &format!("{t_end_path}={t_end}"))?;
        }
    }
    let scenario = Scenario::from_value(doc.clone())?;
    Ok((scenario, doc))
}

/// Validate and report. Warnings go to stderr on every command; errors make
/// the whole invocation fail with exit code 2.
fn check(scenario: &Scenario) -> Result<(), Failure> {
    let diagnostics = scenario.validate();
    for d in diagnostics.iter().filter(|d| d.severity == Severity::Warning) {
        eprintln!("warning: {} ({})", d.message, d.path);
    }
    let errors: Vec<_> = diagnostics
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        return Ok(());
    }
    let listing = errors
        .iter()
        .map(|d| format!("  {d}"))
        .collect::<Vec<_>>()
        .join("\n");
    Err(Failure::validation(format!(
        "scenario `{}` failed validation with {} error(s):\n{listing}",
        scenario.name,
        errors.len()
    )))
}

fn cmd_validate(scenario: &Scenario) -> Result<(), Failure> {
    let diagnostics = scenario.validate();
    let errors = diagnostics
        .iter()
        .filter(|d| d.severity == Severity::Error)
        .count();
    let warnings = diagnostics.len() - errors;
    for d in &diagnostics {
        println!("{d}");
    }
    if errors == 0 {
        println!(
            "ok: scenario `{}` is valid ({warnings} warning(s))",
            scenario.name
        );
        Ok(())
    } else {
        Err(Failure::validation(format!(
            "scenario `{}` has {errors} error(s) and {warnings} warning(s)",
            scenario.name
        )))
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Failure::runtime(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Run the scenario's simulation, returning the result and the summary its
/// metrics section asks for (if any).
fn run_simulation(
    scenario: &Scenario,
) -> Result<(gridfreq::timedomain::SimResult, Option<gridfreq::metrics::SimSummary>), Failure> {
    let mut built = scenario.build_system()?;
    let result = simulate(&mut built.system, &built.events, &built.integrator)
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let sys = scenario.system.as_ref().expect("built implies system");
    let summary = match &sys.analyses.metrics {
        Some(m) => {
            let event_time = m
                .event_time_s
                .or_else(|| {
                    sys.events
                        .iter()
                        .map(|e| e.time_s())
                        .min_by(|a, b| a.total_cmp(b))
                })
                .unwrap_or(0.0);
            let opts = SummaryOptions {
                rocof_window_s: m.rocof_window_s,
                power_windows_s: m.power_windows_s.clone(),
                ..Default::default()
            };
            Some(
                summarize(&result, event_time, &opts)
                    .map_err(|e| Failure::runtime(e.to_string()))?,
            )
        }
        None => None,
    };
    Ok((result, summary))
}

fn cmd_simulate(args: &CommonArgs, scenario: &Scenario) -> Result<(), Failure> {
    check(scenario)?;
    let hash = scenario.config_hash();
    let header = Header {
        scenario: &scenario.name,
        config_hash: &hash,
    };
    let (result, summary) = run_simulation(scenario)?;
    println!(
        "simulated `{}`: {} samples, {} channels, dt = {} s",
        scenario.name,
        result.time_s.len(),
        result.channels.len(),
        result.dt_s
    );
    write_artifact(&args.out, "timeseries.csv", &report::timeseries_csv(&header, &result))?;
    let report_text = report::report_txt(
        &header,
        &ReportInputs {
            description: &scenario.description,
            warnings: &result.warnings,
            summary: summary.as_ref(),
            modes: None,
        },
    );
    write_artifact(&args.out, "report.txt", &report_text)
}

fn cmd_modes(args: &CommonArgs, scenario: &Scenario) -> Result<(), Failure> {
    check(scenario)?;
    let hash = scenario.config_hash();
    let header = Header {
        scenario: &scenario.name,
        config_hash: &hash,
    };
    let built = scenario.build_system()?;
    let h = scenario
        .system
        .as_ref()
        .and_then(|s| s.analyses.modes.as_ref())
        .map(|m| m.h)
        .unwrap_or(1e-6);
    let (ss, _ed, _pf, modes) = analyze(&built.system, h, &ClassifyOptions::default())
        .map_err(|e| Failure::runtime(e.to_string()))?;
    for m in modes
        .iter()
        .filter(|m| m.classification != ModeClass::Other)
    {
        println!(
            "mode {}: {} at {:.3} Hz (zeta = {:.3}), driven by [{}]",
            m.id,
            m.classification,
            m.f_n_hz,
            m.damping_ratio,
            m.participants.join(", ")
        );
    }
    write_artifact(&args.out, "modes.csv", &report::modes_csv(&header, &modes))?;
    write_artifact(
        &args.out,
        "pf_matrix.csv",
        &report::pf_matrix_csv(&header, &ss.state_names, &modes),
    )?;
    let report_text = report::report_txt(
        &header,
        &ReportInputs {
            description: &scenario.description,
            warnings: &[],
            summary: None,
            modes: Some(&modes),
        },
    );
    write_artifact(&args.out, "report.txt", &report_text)
}

fn cmd_metrics(args: &CommonArgs, scenario: &Scenario) -> Result<(), Failure> {
    check(scenario)?;
    // Metrics make no sense without a metrics analysis block; fall back to
    // defaults rather than refusing.
    let mut scenario = scenario.clone();
    if let Some(sys) = scenario.system.as_mut() {
        if sys.analyses.metrics.is_none() {
            sys.analyses.metrics = Some(Default::default());
        }
    }
    let hash = scenario.config_hash();
    let header = Header {
        scenario: &scenario.name,
        config_hash: &hash,
    };
    let (result, summary) = run_simulation(&scenario)?;
    let summary = summary.expect("metrics section was just ensured");
    println!(
        "metrics for `{}`: worst |RoCoF| {:.4} Hz/s over {} frequency channel(s)",
        scenario.name,
        summary.worst_rocof_hz_per_s,
        summary.frequency.len()
    );
    write_artifact(&args.out, "metrics.csv", &report::metrics_csv(&header, &summary))?;
    let report_text = report::report_txt(
        &header,
        &ReportInputs {
            description: &scenario.description,
            warnings: &result.warnings,
            summary: Some(&summary),
            modes: None,
        },
    );
    write_artifact(&args.out, "report.txt", &report_text)
}

fn cmd_reduced(args: &CommonArgs, scenario: &Scenario) -> Result<(), Failure> {
    check(scenario)?;
    let hash = scenario.config_hash();
    let header = Header {
        scenario: &scenario.name,
        config_hash: &hash,
    };
    let sweep = scenario.run_reduced()?;
    println!(
        "reduced study `{}`: {} cell(s), base nadir {:.5} pu, base RoCoF {:.5} pu/s",
        scenario.name,
        sweep.cells.len(),
        sweep.base_nadir_pu,
        sweep.base_rocof_pu_per_s
    );
    write_artifact(&args.out, "sweep.csv", &report::sweep_csv(&header, &sweep))
}

fn cmd_sweep(
    args: &CommonArgs,
    scenario: &Scenario,
    doc: &serde_json::Value,
) -> Result<(), Failure> {
    if scenario.reduced.is_some() {
        return cmd_reduced(args, scenario);
    }
    check(scenario)?;
    let sys = scenario
        .system
        .as_ref()
        .ok_or_else(|| Failure::validation("scenario has no study section".to_string()))?;
    let sweep = sys.analyses.sweep.as_ref().ok_or_else(|| {
        Failure::validation(format!(
            "scenario `{}` declares no sweep (analyses.sweep)",
            scenario.name
        ))
    })?;
    let hash = scenario.config_hash();
    let header = Header {
        scenario: &scenario.name,
        config_hash: &hash,
    };
    let mut out = format!(
        "# scenario: {}\n# config_hash: {}\n# sweep_path: {}\n",
        header.scenario, header.config_hash, sweep.path
    );
    out.push_str("value,channel,nadir_hz,steady_hz,max_rocof_hz_per_s\n");
    for value in &sweep.values {
        let raw = serde_json::to_string(value).expect("JSON value serializes");
        let mut cell_doc = doc.clone();
        apply_override(&mut cell_doc, &format!("{}={}", sweep.path, raw))?;
        let mut cell = Scenario::from_value(cell_doc)?;
        // The per-cell run needs metrics; reuse the parent block or defaults.
        if let Some(cs) = cell.system.as_mut() {
            if cs.analyses.metrics.is_none() {
                cs.analyses.metrics = Some(Default::default());
            }
        }
        let diagnostics = cell.validate();
        if diagnostics.iter().any(|d| d.severity == Severity::Error) {
            return Err(Failure::validation(format!(
                "sweep value {raw} produces an invalid scenario:\n{}",
                diagnostics
                    .iter()
                    .filter(|d| d.severity == Severity::Error)
                    .map(|d| format!("  {d}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            )));
        }
        let (_result, summary) = run_simulation(&cell)?;
        let summary = summary.expect("metrics block ensured above");
        for f in &summary.frequency {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                raw,
                f.channel,
                report::fmt_f64(f.nadir_hz),
                report::fmt_f64(f.steady_hz),
                report::fmt_f64(f.max_rocof_hz_per_s),
            ));
        }
        println!(
            "swept {} = {raw}: worst |RoCoF| {:.4} Hz/s",
            sweep.path, summary.worst_rocof_hz_per_s
        );
    }
    if sweep.values.is_empty() {
        println!("sweep grid is empty; writing zero rows");
    }
    write_artifact(&args.out, "sweep.csv", &out)
}
