//! The `plan`, `compare` and `bench` commands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use tcplan::planner::{
    self, comfort_metrics, compare_modes, verify_safety, ModeOutcome, PlanError, Stage,
};
use tcplan::qp_build::SafetyMode;
use tcplan::scenario::ScenarioGenerator;
use tcplan::{PlannerConfig64, Scenario64};
use thiserror::Error;

use crate::exit;
use crate::export::{write_corridors, write_metrics, write_profile};
use crate::scenario_file::{load_scenario, ScenarioFileError};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioFileError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] anyhow::Error),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Scenario(_) => exit::PARSE,
            CommandError::Usage(_) => exit::USAGE,
            CommandError::Io(_) => exit::INTERNAL,
            CommandError::Plan(e) => plan_exit_code(e),
        }
    }
}

pub fn plan_exit_code(e: &PlanError) -> u8 {
    match e {
        PlanError::QpMaxIter { .. }
        | PlanError::Solver(_)
        | PlanError::Spline(_)
        | PlanError::Build(_) => exit::SOLVER,
        _ if e.is_infeasible() => exit::QP_INFEASIBLE,
        _ => match e.stage() {
            Stage::Scenario => exit::PARSE,
            Stage::Dp | Stage::Bounds => exit::SEARCH,
            Stage::Regions => exit::REGIONS,
            Stage::Qp => exit::SOLVER,
        },
    }
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_outputs(
    out: &Path,
    suffix: &str,
    result: &planner::PlanResult<f64>,
    sample_dt: f64,
) -> anyhow::Result<()> {
    let metrics = comfort_metrics(&result.spline);
    let mut w = create(out, &format!("profile{suffix}.csv"))?;
    write_profile(&mut w, &result.spline, sample_dt)?;
    w.flush()?;
    let mut w = create(out, &format!("corridors{suffix}.csv"))?;
    write_corridors(&mut w, &result.regions)?;
    w.flush()?;
    let mut w = create(out, &format!("metrics{suffix}.csv"))?;
    write_metrics(&mut w, result, &metrics)?;
    w.flush()?;
    Ok(())
}

fn ensure_dir(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

#[derive(Debug, Clone)]
pub struct PlanArgs {
    pub scenario: PathBuf,
    pub mode: SafetyMode,
    pub out: PathBuf,
    pub sample_dt: f64,
}

/// Plans one scenario and writes `profile.csv`, `corridors.csv` and
/// `metrics.csv` into the output directory. Returns a one-line summary.
pub fn run_plan(args: &PlanArgs) -> Result<String, CommandError> {
    if !(args.sample_dt > 0.0 && args.sample_dt.is_finite()) {
        return Err(CommandError::Usage(format!(
            "--sample-dt must be positive, got {}",
            args.sample_dt
        )));
    }
    let scenario = load_scenario(&args.scenario)?;
    let result = planner::plan(&scenario, &PlannerConfig64::with_mode(args.mode))?;
    let violations = verify_safety(&result, 1e-3);
    if let Some(v) = violations.first() {
        return Err(CommandError::Io(anyhow::anyhow!(
            "plan leaves its corridor: {v:?}"
        )));
    }
    ensure_dir(&args.out)?;
    write_outputs(&args.out, "", &result, args.sample_dt)?;
    let m = comfort_metrics(&result.spline);
    Ok(format!(
        "{}: J = {:.4}, max |a| = {:.3} m/s^2, avg a = {:.3} m/s^2, {} segments, {:.2} ms",
        result.mode,
        result.objective,
        m.max_abs_accel,
        m.avg_accel,
        result.spline.segments.len(),
        result.timings.total_us() / 1e3
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub mode: SafetyMode,
    /// The failure message when the mode failed.
    pub values: Result<CompareValues, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareValues {
    pub objective: f64,
    pub max_abs_accel: f64,
    pub avg_accel: f64,
    pub solve_ms: f64,
}

fn compare_row(outcome: &ModeOutcome<f64>) -> CompareRow {
    let values = match (&outcome.result, &outcome.metrics) {
        (Ok(r), Some(m)) => Ok(CompareValues {
            objective: r.objective,
            max_abs_accel: m.max_abs_accel,
            avg_accel: m.avg_accel,
            solve_ms: (r.timings.build_us + r.timings.solve_us) / 1e3,
        }),
        (Err(e), _) => Err(e.to_string()),
        (Ok(_), None) => Err("no metrics".to_string()),
    };
    CompareRow {
        mode: outcome.mode,
        values,
    }
}

pub fn format_table(rows: &[CompareRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<5}{:<12}{:>12}{:>10}{:>10}{:>10}",
        "mode", "status", "J", "max_acc", "avg_acc", "solve_ms"
    );
    for row in rows {
        match &row.values {
            Ok(v) => {
                let _ = writeln!(
                    s,
                    "{:<5}{:<12}{:>12.4}{:>10.3}{:>10.3}{:>10.3}",
                    row.mode.to_string(),
                    "ok",
                    v.objective,
                    v.max_abs_accel,
                    v.avg_accel,
                    v.solve_ms
                );
            }
            Err(_) => {
                let _ = writeln!(
                    s,
                    "{:<5}{:<12}{:>12}{:>10}{:>10}{:>10}",
                    row.mode.to_string(),
                    "failed",
                    "-",
                    "-",
                    "-",
                    "-"
                );
            }
        }
    }
    s
}

fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    writeln!(w, "mode,status,objective,max_abs_accel,avg_accel,solve_ms")?;
    for row in rows {
        match &row.values {
            Ok(v) => writeln!(
                w,
                "{},ok,{:?},{:?},{:?},{:?}",
                row.mode, v.objective, v.max_abs_accel, v.avg_accel, v.solve_ms
            )?,
            Err(_) => writeln!(w, "{},failed,-,-,-,-", row.mode)?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct CompareArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
}

/// Runs both safety modes on shared regions. Mode failures, including a
/// failure of the shared stages, become dashed rows; only scenario and
/// output errors are returned as errors.
pub fn run_compare(args: &CompareArgs) -> Result<Vec<CompareRow>, CommandError> {
    let scenario = load_scenario(&args.scenario)?;
    ensure_dir(&args.out)?;
    let rows = match compare_modes(&scenario, &PlannerConfig64::default()) {
        Ok(cmp) => {
            for outcome in [&cmp.rectangular, &cmp.trapezoidal] {
                if let Ok(r) = &outcome.result {
                    let suffix = format!("_{}", outcome.mode.to_string().to_lowercase());
                    write_outputs(&args.out, &suffix, r, 0.01)?;
                }
            }
            vec![compare_row(&cmp.rectangular), compare_row(&cmp.trapezoidal)]
        }
        Err(e) => [SafetyMode::Rectangular, SafetyMode::Trapezoidal]
            .map(|mode| CompareRow {
                mode,
                values: Err(e.to_string()),
            })
            .to_vec(),
    };
    write_compare_csv(&args.out.join("compare.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone)]
pub enum BenchSource {
    Dir(PathBuf),
    Seed { seed: u64, count: usize },
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub source: BenchSource,
    pub reps: usize,
}

/// Average, population standard deviation and maximum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stats {
    pub ave: f64,
    pub std: f64,
    pub worst: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let n = samples.len() as f64;
        let ave = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - ave).powi(2)).sum::<f64>() / n;
        let worst = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            ave,
            std: var.sqrt(),
            worst,
            count: samples.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeBench {
    pub mode: SafetyMode,
    pub succeeded: usize,
    pub failed: usize,
    /// dp, bounds, regions, build, solve, end-to-end; milliseconds.
    pub stages: [Stats; 6],
}

pub const STAGE_NAMES: [&str; 6] = ["dp", "bounds", "regions", "qp_build", "qp_solve", "total"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub scenarios: usize,
    pub reps: usize,
    pub modes: Vec<ModeBench>,
}

fn bench_scenarios(source: &BenchSource) -> Result<Vec<Scenario64>, CommandError> {
    match source {
        BenchSource::Seed { seed, count } => Ok(ScenarioGenerator::new(*seed).take(*count)),
        BenchSource::Dir(dir) => {
            let entries =
                fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "toml"))
                .collect();
            paths.sort();
            paths
                .iter()
                .map(|p| load_scenario(p).map_err(CommandError::from))
                .collect()
        }
    }
}

/// Plans every scenario `reps` times in both modes. Timings are collected
/// from successful runs only.
pub fn run_bench(args: &BenchArgs) -> Result<BenchSummary, CommandError> {
    if args.reps == 0 {
        return Err(CommandError::Usage("--reps must be at least 1".into()));
    }
    let scenarios = bench_scenarios(&args.source)?;
    if scenarios.is_empty() {
        return Err(CommandError::Usage("no scenarios to run".into()));
    }
    let mut modes = Vec::new();
    for mode in [SafetyMode::Trapezoidal, SafetyMode::Rectangular] {
        let config = PlannerConfig64::with_mode(mode);
        let mut samples: [Vec<f64>; 6] = Default::default();
        let (mut succeeded, mut failed) = (0, 0);
        for scenario in &scenarios {
            for _ in 0..args.reps {
                let start = Instant::now();
                let outcome = planner::plan(scenario, &config);
                let wall = start.elapsed().as_secs_f64() * 1e3;
                match outcome {
                    Ok(r) => {
                        succeeded += 1;
                        let t = r.timings;
                        let stage = [t.dp_us, t.bounds_us, t.regions_us, t.build_us, t.solve_us]
                            .map(|us| us / 1e3);
                        for (i, v) in stage.into_iter().enumerate() {
                            samples[i].push(v);
                        }
                        samples[5].push(wall);
                    }
                    Err(_) => failed += 1,
                }
            }
        }
        modes.push(ModeBench {
            mode,
            succeeded,
            failed,
            stages: samples.map(|s| Stats::of(&s)),
        });
    }
    Ok(BenchSummary {
        scenarios: scenarios.len(),
        reps: args.reps,
        modes,
    })
}

pub fn format_bench(summary: &BenchSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} scenarios x {} reps", summary.scenarios, summary.reps);
    for m in &summary.modes {
        let _ = writeln!(
            s,
            "\n{} corridor: {} succeeded, {} failed",
            m.mode, m.succeeded, m.failed
        );
        let _ = writeln!(
            s,
            "{:<10}{:>10}{:>10}{:>10}",
            "stage", "Ave(ms)", "Std(ms)", "Worst(ms)"
        );
        for (name, st) in STAGE_NAMES.iter().zip(&m.stages) {
            if st.count == 0 {
                let _ = writeln!(s, "{name:<10}{:>10}{:>10}{:>10}", "-", "-", "-");
            } else {
                let _ = writeln!(
                    s,
                    "{name:<10}{:>10.3}{:>10.3}{:>10.3}",
                    st.ave, st.std, st.worst
                );
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_single_sample_has_zero_std() {
        let s = Stats::of(&[3.0]);
        assert_eq!((s.ave, s.std, s.worst), (3.0, 0.0, 3.0));
        let s = Stats::of(&[1.0, 3.0]);
        assert_eq!((s.ave, s.std, s.worst), (2.0, 1.0, 3.0));
    }

    #[test]
    fn failed_rows_are_dashed() {
        let rows = vec![
            CompareRow {
                mode: SafetyMode::Rectangular,
                values: Err("infeasible".into()),
            },
            CompareRow {
                mode: SafetyMode::Trapezoidal,
                values: Ok(CompareValues {
                    objective: 1.5,
                    max_abs_accel: 0.2,
                    avg_accel: 0.1,
                    solve_ms: 1.0,
                }),
            },
        ];
        let table = format_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert!(lines[1].starts_with("RC") && lines[1].contains(" -"));
        assert!(lines[2].starts_with("TC") && lines[2].contains("1.5000"));
    }

    #[test]
    fn exit_codes_distinct_by_stage() {
        assert_eq!(
            plan_exit_code(&PlanError::QpInfeasible { iterations: 3 }),
            exit::QP_INFEASIBLE
        );
        assert_eq!(
            plan_exit_code(&PlanError::RectInfeasible(vec![])),
            exit::QP_INFEASIBLE
        );
        assert_eq!(
            plan_exit_code(&PlanError::QpMaxIter {
                iterations: 3,
                primal_residual: 1.0,
                dual_residual: 1.0
            }),
            exit::SOLVER
        );
    }
}
