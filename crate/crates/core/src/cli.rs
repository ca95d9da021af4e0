//! Command-line front end.
//!
//! Every subcommand reports failures through the exit code: `0` on success (a run that ends in
//! blow-up is a success), `2` for invalid flags or configuration, `3` when a numerical method
//! fails, `4` for filesystem errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::blowup::{self, BlowUpSet, BlowupOptions, WeakBlowUpReport};
use crate::error::{Error, Result};
use crate::flow::{self, RunSpec, SimulationResult, Termination};
use crate::io::config::read_run_spec;
use crate::io::summary::{build_summary, write_summary_json, SummaryContext};
use crate::io::svg::{render_svg, PlotData, PlotKind, PlotSpec};
use crate::io::trajectory::{self, format_f64};
use crate::model::Configuration;
use crate::thresholds::{self, CriticalOptions, ThresholdOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "homoflow",
    version,
    about = "Particle gradient flows of homogeneous aggregation-diffusion energies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the implicit gradient flow described by a configuration file.
    Simulate(SimulateArgs),
    /// Compute the critical couplings C_2, ..., C_pmax.
    Threshold(ThresholdArgs),
    /// Solve for a critical profile of the p-particle functional.
    CriticalProfile(CriticalArgs),
    /// Detect relative and weak blow-up sets in a snapshot file.
    Analyze(AnalyzeArgs),
    /// Render an SVG plot from trajectory files.
    Plot(PlotArgs),
    /// Run one simulation per parameter value and classify the outcomes.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct ThresholdFlags {
    /// Seed for the random multi-start points.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of local ascents per threshold (at least 16 are used).
    #[arg(long, default_value_t = 16)]
    starts: usize,
    /// Random starts draw log-gaps uniformly from [-SPREAD, SPREAD].
    #[arg(long, default_value_t = 1.2, value_name = "SPREAD")]
    log_spread: f64,
}

impl ThresholdFlags {
    fn options(&self) -> Result<ThresholdOptions> {
        if !(self.log_spread.is_finite() && self.log_spread > 0.0) {
            return Err(Error::validation("--log-spread", "must be positive and finite"));
        }
        Ok(ThresholdOptions {
            starts: self.starts,
            seed: self.seed,
            log_spread: self.log_spread,
            ..ThresholdOptions::default()
        })
    }
}

#[derive(Debug, Args)]
struct AnalysisFlags {
    /// Boundary ratio threshold of the relative blow-up test, in (0, 1).
    #[arg(long, default_value_t = 0.05)]
    eps_ratio: f64,
    /// Number of trailing snapshots examined.
    #[arg(long, default_value_t = 8)]
    k_tail: usize,
    /// Absolute smallness of a vanishing gap (default: 1e-6 times the initial scale).
    #[arg(long)]
    eps_abs: Option<f64>,
    /// Weak blow-up tolerance relative to the initial scale.
    #[arg(long, default_value_t = 1e-5)]
    gap_tol_rel: f64,
}

impl AnalysisFlags {
    fn options(&self) -> BlowupOptions {
        BlowupOptions {
            k_tail: self.k_tail,
            eps_ratio: self.eps_ratio,
            eps_abs: self.eps_abs,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for diagnostics.csv, snapshots.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Compute C_N for the summary only when N is at most this value.
    #[arg(long, default_value_t = 64)]
    threshold_max_n: usize,
    #[command(flatten)]
    threshold: ThresholdFlags,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    /// Homogeneity exponent, in (1, 2).
    #[arg(long)]
    m: f64,
    /// Largest particle count of the table.
    #[arg(long)]
    p_max: usize,
    /// Also write the table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    threshold: ThresholdFlags,
}

#[derive(Debug, Args)]
struct CriticalArgs {
    /// Homogeneity exponent, in (1, 2).
    #[arg(long)]
    m: f64,
    /// Particle count.
    #[arg(long)]
    p: usize,
    /// Coupling (default: C_p).
    #[arg(long)]
    chi: Option<f64>,
    /// Confinement strength.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Also write the profile as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    threshold: ThresholdFlags,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Snapshot file with header t,x1,...,xN.
    #[arg(long)]
    snapshots: PathBuf,
    /// Report path (default: analysis.json next to the snapshots).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Snapshot file with header t,x1,...,xN.
    #[arg(long, required_unless_present = "diagnostics")]
    snapshots: Option<PathBuf>,
    /// Diagnostics file (default: diagnostics.csv next to the snapshots).
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// energy_vs_t, moment_vs_t, worldlines, rescaled_worldlines or density_hist.
    #[arg(long)]
    kind: PlotKind,
    /// Output SVG file.
    #[arg(long)]
    out: PathBuf,
    /// Start of the time window.
    #[arg(long, allow_negative_numbers = true)]
    t_min: Option<f64>,
    /// End of the time window.
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 800)]
    width: u32,
    #[arg(long, default_value_t = 500)]
    height: u32,
    /// Particle range FIRST,LAST (1-based) for rescaled_worldlines (default: first detected set).
    #[arg(long, value_name = "FIRST,LAST")]
    set: Option<String>,
    #[command(flatten)]
    analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Base run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Parameter to vary: chi or alpha.
    #[arg(long, default_value = "chi")]
    param: String,
    /// Comma separated values, or START:STOP:COUNT for an evenly spaced grid.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Maximum number of concurrent simulations (default: all cores).
    #[arg(long, env = "HOMOFLOW_JOBS")]
    jobs: Option<usize>,
    /// Compute C_N for the summaries only when N is at most this value.
    #[arg(long, default_value_t = 64)]
    threshold_max_n: usize,
    #[command(flatten)]
    threshold: ThresholdFlags,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
        Error::Json(e) if e.is_io() => EXIT_IO,
        Error::Input(_) | Error::Parse { .. } | Error::Validation { .. } | Error::Domain(_) => EXIT_USAGE,
        Error::Csv(_) | Error::Json(_) => EXIT_USAGE,
        Error::Overflow(_)
        | Error::NotConverged { .. }
        | Error::Solver(_)
        | Error::NoCriticalPoint { .. }
        | Error::NonConvergent { .. }
        | Error::EmptyCone => EXIT_NUMERICAL,
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Threshold(a) => threshold(a),
        Command::CriticalProfile(a) => critical(a),
        Command::Analyze(a) => analyze(a),
        Command::Plot(a) => plot(a),
        Command::Sweep(a) => sweep(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_spec(spec: &RunSpec) -> Result<SimulationResult> {
    if spec.model.is_logarithmic() {
        flow::simulate_log(spec)
    } else {
        flow::simulate(spec)
    }
}

fn c_n_for(spec: &RunSpec, max_n: usize, opts: &ThresholdOptions) -> Result<Option<f64>> {
    if spec.model.is_logarithmic() || spec.model.n > max_n {
        return Ok(None);
    }
    Ok(Some(
        thresholds::compute_threshold(spec.model.n, spec.model.m, opts)?.c_p,
    ))
}

fn analyze_result(
    result: &SimulationResult,
    flags: &AnalysisFlags,
) -> (Option<Vec<BlowUpSet>>, Option<WeakBlowUpReport>) {
    if !result.termination.is_blowup() {
        return (None, None);
    }
    let sets = match blowup::detect_relative_blowup(&result.configurations(), &flags.options()) {
        Ok(s) => Some(s),
        Err(e) => {
            warn!("blow-up analysis skipped: {e}");
            None
        }
    };
    let weak = blowup::detect_weak_blowup(result, flags.gap_tol_rel * result.initial_scale);
    (sets, Some(weak))
}

fn termination_code(t: &Termination) -> i32 {
    match t {
        Termination::Failure { .. } => EXIT_NUMERICAL,
        _ => EXIT_OK,
    }
}

fn describe(t: &Termination) -> String {
    match t {
        Termination::Completed { t_max } => format!("completed at t = {t_max}"),
        Termination::BlowUp {
            t_estimate, min_gap, ..
        } => {
            format!("blowup at t = {t_estimate} (min gap {min_gap:e})")
        }
        Termination::Failure { reason } => format!("failure: {reason}"),
    }
}

fn simulate(a: SimulateArgs) -> Result<i32> {
    let spec = read_run_spec(&a.config)?;
    let topts = a.threshold.options()?;
    fs::create_dir_all(&a.out)?;
    info!("simulating N = {} with chi = {}", spec.model.n, spec.model.chi);
    let result = run_spec(&spec)?;
    trajectory::write_trajectory_csv(
        &result,
        &a.out.join("diagnostics.csv"),
        &a.out.join("snapshots.csv"),
    )?;
    let c_n = c_n_for(&spec, a.threshold_max_n, &topts)?;
    let (sets, weak) = analyze_result(&result, &a.analysis);
    let ctx = SummaryContext {
        c_n,
        blowup_sets: sets.as_deref(),
        weak: weak.as_ref(),
    };
    write_summary_json(&result, &ctx, &a.out.join("summary.json"))?;
    println!("{}", describe(&result.termination));
    println!("rows: {}, outputs in {}", result.rows.len(), a.out.display());
    Ok(termination_code(&result.termination))
}

fn threshold(a: ThresholdArgs) -> Result<i32> {
    let opts = a.threshold.options()?;
    let table = thresholds::threshold_table(a.p_max, a.m, &opts)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:>5}  {:>14}  {:>10}  {:>6}", "p", "C_p", "kkt", "optima")?;
    for e in &table.entries {
        writeln!(
            out,
            "{:>5}  {:>14.9}  {:>10.2e}  {:>6}",
            e.p,
            e.c_p,
            e.kkt_residual,
            e.local_optima.len()
        )?;
    }
    if !table.monotone {
        writeln!(out, "warning: the computed table is not non-increasing")?;
    }
    if let Some(path) = a.csv {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)?;
        w.write_record(["p", "C_p", "kkt_residual", "local_optima", "converged_starts"])?;
        for e in &table.entries {
            w.write_record([
                e.p.to_string(),
                format_f64(e.c_p),
                format_f64(e.kkt_residual),
                e.local_optima.len().to_string(),
                e.converged_starts.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(EXIT_OK)
}

fn critical(a: CriticalArgs) -> Result<i32> {
    let opts = CriticalOptions {
        threshold: a.threshold.options()?,
        ..CriticalOptions::default()
    };
    let chi = match a.chi {
        Some(c) => c,
        None => thresholds::compute_threshold(a.p, a.m, &opts.threshold)?.c_p,
    };
    let prof = thresholds::critical_profile(a.p, a.m, chi, a.alpha, &opts)?;
    let mut out = std::io::stdout().lock();
    writeln!(
        out,
        "# p = {}, m = {}, chi = {}, alpha = {}",
        prof.p, prof.m, prof.chi, prof.alpha
    )?;
    writeln!(
        out,
        "# residual = {:e}, gradient norm = {:e}, energy = {}",
        prof.residual,
        prof.gradient_norm,
        format_f64(prof.energy)
    )?;
    writeln!(out, "i,x")?;
    for (i, x) in prof.positions.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, format_f64(*x))?;
    }
    if let Some(path) = a.out {
        let mut text = serde_json::to_string_pretty(&prof)?;
        text.push('\n');
        fs::write(path, text)?;
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct AnalysisReport {
    snapshots: usize,
    t_end: f64,
    /// Particle ranges below are 0-based and inclusive.
    indexing: &'static str,
    thresholds: BlowupOptions,
    relative_sets: Vec<BlowUpSet>,
    weak: WeakBlowUpReport,
    /// Every relative set lies inside a weak range.
    consistent: bool,
}

fn analyze(a: AnalyzeArgs) -> Result<i32> {
    let snaps = trajectory::read_snapshots_csv(&a.snapshots)?;
    if snaps.is_empty() {
        return Err(Error::Input(format!(
            "{} has no snapshots",
            a.snapshots.display()
        )));
    }
    let configs: Vec<Configuration> = snaps.iter().map(|(_, c)| c.clone()).collect();
    let opts = a.analysis.options();
    let sets = blowup::detect_relative_blowup(&configs, &opts)?;
    let weak = blowup::weak_blowup_from_snapshots(&snaps, a.analysis.gap_tol_rel * configs[0].scale());
    let consistent = sets.iter().all(|s| weak.containing(s.l, s.r).is_some());
    let thresholds = sets.first().map_or(opts, |s| s.thresholds);
    let report = AnalysisReport {
        snapshots: snaps.len(),
        t_end: weak.t_end,
        indexing: "0-based, inclusive",
        thresholds,
        relative_sets: sets,
        weak,
        consistent,
    };
    let path = a.out.unwrap_or_else(|| sibling(&a.snapshots, "analysis.json"));
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(&path, text)?;
    println!("relative blow-up sets (1-based):");
    for s in &report.relative_sets {
        let (l, r) = s.one_based();
        println!(
            "  particles {l}..={r}{}",
            if s.profile_converged {
                ""
            } else {
                " (profile not settled)"
            }
        );
    }
    if report.relative_sets.is_empty() {
        println!("  none");
    }
    println!("weak blow-up ranges (1-based):");
    for (l, r) in &report.weak.sets {
        println!("  particles {}..={}", l + 1, r + 1);
    }
    println!("report written to {}", path.display());
    Ok(EXIT_OK)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn parse_set(s: &str) -> Result<(usize, usize)> {
    let bad = || {
        Error::validation(
            "--set",
            format!("expected FIRST,LAST with 1 <= FIRST < LAST, got {s:?}"),
        )
    };
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a >= b {
        return Err(bad());
    }
    Ok((a - 1, b - 1))
}

fn plot(a: PlotArgs) -> Result<i32> {
    let range = match (a.t_min, a.t_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY))),
    };
    let spec = PlotSpec {
        kind: a.kind,
        range,
        width: a.width,
        height: a.height,
    };
    let need_snapshots = || {
        a.snapshots
            .as_ref()
            .ok_or_else(|| Error::validation("--snapshots", format!("required for {}", a.kind.name())))
    };
    match a.kind {
        PlotKind::EnergyVsT | PlotKind::MomentVsT => {
            let path = match (&a.diagnostics, &a.snapshots) {
                (Some(d), _) => d.clone(),
                (None, Some(s)) => sibling(s, "diagnostics.csv"),
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let rows = trajectory::read_diagnostics_csv(&path)?;
            render_svg(PlotData::Diagnostics(&rows), &spec, &a.out)?;
        }
        PlotKind::Worldlines | PlotKind::DensityHist => {
            let snaps = trajectory::read_snapshots_csv(need_snapshots()?)?;
            render_svg(PlotData::Snapshots(&snaps), &spec, &a.out)?;
        }
        PlotKind::RescaledWorldlines => {
            let snaps = trajectory::read_snapshots_csv(need_snapshots()?)?;
            let set = match &a.set {
                Some(s) => parse_set(s)?,
                None => default_set(&snaps, &a.analysis)?,
            };
            let rescaled = blowup::rescale_trajectory(&snaps, set)?;
            render_svg(
                PlotData::Rescaled {
                    trajectory: &rescaled,
                    range: set,
                },
                &spec,
                &a.out,
            )?;
        }
    }
    println!("wrote {}", a.out.display());
    Ok(EXIT_OK)
}

fn default_set(snaps: &[(f64, Configuration)], flags: &AnalysisFlags) -> Result<(usize, usize)> {
    let configs: Vec<Configuration> = snaps.iter().map(|(_, c)| c.clone()).collect();
    if let Some(s) = blowup::detect_relative_blowup(&configs, &flags.options())?.first() {
        return Ok(s.range());
    }
    let tol = flags.gap_tol_rel * configs.first().map_or(1.0, |c| c.scale());
    blowup::weak_blowup_from_snapshots(snaps, tol)
        .sets
        .first()
        .copied()
        .ok_or_else(|| Error::Input("no blow-up set detected; pass --set FIRST,LAST".into()))
}

/// Parses `a,b,c` or `start:stop:count`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::validation("--values", msg);
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("invalid number {v:?}")))
    };
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected START:STOP:COUNT, got {s:?}")));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("invalid count {:?}", parts[2])))?;
        match count {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..count)
                .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        s.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if values.is_empty() {
        return Err(bad("no values given".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(bad(format!("non-finite value {v}")));
    }
    Ok(values)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let base = read_run_spec(&a.config)?;
    let topts = a.threshold.options()?;
    let values = parse_values(&a.values)?;
    let specs = values
        .iter()
        .map(|&v| {
            let mut s = base.clone();
            match a.param.as_str() {
                "chi" => s.model.chi = v,
                "alpha" => s.model.alpha = v,
                other => {
                    return Err(Error::validation(
                        "--param",
                        format!("cannot sweep {other:?} (use chi or alpha)"),
                    ))
                }
            }
            s.validate()?;
            Ok(s)
        })
        .collect::<Result<Vec<RunSpec>>>()?;
    let jobs = match a.jobs {
        Some(0) => return Err(Error::validation("--jobs", "must be at least 1")),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    fs::create_dir_all(&a.out)?;
    // C_N depends on N and m only, both fixed across the sweep
    let c_n = c_n_for(&base, a.threshold_max_n, &topts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Solver(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<SimulationResult>> = pool.install(|| specs.par_iter().map(run_spec).collect());

    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(a.out.join("phase.csv"))?;
    w.write_record([
        a.param.as_str(),
        "termination",
        "T_estimate",
        "max_f2",
        "t_max_f2",
    ])?;
    let mut code = EXIT_OK;
    for (i, (v, res)) in values.iter().zip(results).enumerate() {
        let result = res?;
        let ctx = SummaryContext {
            c_n,
            ..SummaryContext::default()
        };
        let summary = build_summary(&result, &ctx);
        let mut text = serde_json::to_string_pretty(&summary)?;
        text.push('\n');
        fs::write(a.out.join(format!("summary_{i:03}.json")), text)?;
        let t_est = match result.termination {
            Termination::Completed { .. } => f64::INFINITY,
            Termination::BlowUp { t_estimate, .. } => t_estimate,
            Termination::Failure { .. } => f64::NAN,
        };
        code = code.max(termination_code(&result.termination));
        w.write_record([
            format_f64(*v),
            result.termination.label().to_string(),
            format_f64(t_est),
            format_f64(summary.extrema.max_f2),
            format_f64(summary.extrema.t_of_max_f2),
        ])?;
        println!(
            "{} = {}: {}",
            a.param,
            format_f64(*v),
            describe(&result.termination)
        );
    }
    w.flush()?;
    Ok(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("0.1,0.2").unwrap(), vec![0.1, 0.2]);
        assert_eq!(parse_values("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_values("-1").unwrap(), vec![-1.0]);
        assert!(parse_values("0:1").is_err());
        assert!(parse_values("a,b").is_err());
        assert!(parse_values("0:1:0").is_err());
    }

    #[test]
    fn set_ranges() {
        assert_eq!(parse_set("3,4").unwrap(), (2, 3));
        assert!(parse_set("4,4").is_err());
        assert!(parse_set("0,2").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::EmptyCone), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::validation("k", "m")), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("x"))), EXIT_IO);
    }
}
