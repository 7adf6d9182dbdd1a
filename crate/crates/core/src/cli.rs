//! Command implementations behind the `ucld` binary.
//!
//! Argument parsing and exit codes live in the binary; everything that
//! touches the solver or the file formats lives here so it can be tested
//! and reused from examples.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::constraints::{check_spinning_reserve, reserve_envelope};
use crate::de::{run, DeConfig, DeError, RunResult, TraceRow};
use crate::encoding::{EncodingError, Schedule};
use crate::model::{load_instance, ModelError, ProblemInstance};
use crate::oracle::{brute_force_grid, enumerate_uc, OracleError, OracleSolution};
use crate::penalty::{evaluate_schedule, EvaluationReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    De(#[from] DeError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("self-consistency check failed: {0}")]
    SelfCheck(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Loads an instance and optionally cuts it to `horizon` hours.
pub fn prepare_instance(path: &Path, horizon: Option<usize>) -> Result<ProblemInstance, CliError> {
    let inst = load_instance(path)?;
    Ok(match horizon {
        Some(h) => inst.with_horizon(h)?,
        None => inst,
    })
}

/// Contents of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub instance: String,
    pub seed: u64,
    pub steps: usize,
    pub evaluations: u64,
    #[serde(flatten)]
    pub evaluation: EvaluationReport,
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in trace {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes the supply-demand and reserve-envelope series.
pub fn write_plot_data(dir: &Path, s: &Schedule, inst: &ProblemInstance) -> Result<(), CliError> {
    let path = dir.join("supply_demand.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["t", "net_demand", "thermal", "hydro", "supply"]).map_err(csv_err(&path))?;
    for t in 0..s.steps() {
        let thermal: f64 = (0..inst.thermal.len()).filter(|&i| s.u[[i, t]]).map(|i| s.g[[i, t]]).sum();
        let hydro: f64 = s.hg.column(t).sum();
        let row = [inst.demand.net_demand[t], thermal, hydro, thermal + hydro];
        w.write_record(std::iter::once(t.to_string()).chain(row.iter().map(f64::to_string)))
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    let path = dir.join("reserve.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    w.write_record(["t", "required_low", "envelope_low", "required_high", "envelope_high", "s1", "s2"])
        .map_err(csv_err(&path))?;
    for (t, (s1, s2)) in check_spinning_reserve(s, inst).into_iter().enumerate() {
        let (low, high) = reserve_envelope(s, inst, t);
        let net = inst.demand.net_demand[t];
        let row = [
            (1.0 - inst.demand.alpha[t]) * net,
            low,
            (1.0 + inst.demand.beta[t]) * net,
            high,
            s1,
            s2,
        ];
        w.write_record(std::iter::once(t.to_string()).chain(row.iter().map(f64::to_string)))
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))
}

/// Runs one optimization and writes `schedule.csv`, `report.json` and
/// `trace.csv` into `out`.
///
/// The written schedule is read back and re-evaluated; a mismatch with the
/// reported totals is an error.
pub fn solve(inst: &ProblemInstance, cfg: &DeConfig, out: &Path, plot_data: bool) -> Result<RunResult, CliError> {
    let result = run(inst, cfg)?;
    fs::create_dir_all(out).map_err(io_err(out))?;

    let schedule_path = out.join("schedule.csv");
    let mut w = create(&schedule_path)?;
    result.schedule.write_csv(&mut w).map_err(csv_err(&schedule_path))?;
    w.flush().map_err(io_err(&schedule_path))?;

    let report = SolveReport {
        instance: inst.name.clone(),
        seed: cfg.seed,
        steps: inst.steps(),
        evaluations: result.evaluations,
        evaluation: result.report,
    };
    let report_path = out.join("report.json");
    let mut w = create(&report_path)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(|source| CliError::Json { path: report_path.clone(), source })?;
    writeln!(w).map_err(io_err(&report_path))?;
    w.flush().map_err(io_err(&report_path))?;

    write_trace(&out.join("trace.csv"), &result.trace)?;
    if plot_data {
        write_plot_data(out, &result.schedule, inst)?;
    }

    let reread = Schedule::read_csv(File::open(&schedule_path).map_err(io_err(&schedule_path))?, inst)?;
    let check = evaluate_schedule(&reread, &cfg.penalty.saturated(), inst);
    let scale = result.report.total.abs().max(1.0);
    if (check.total - result.report.total).abs() > 1e-9 * scale || check.feasible != result.report.feasible {
        return Err(CliError::SelfCheck(format!(
            "report total {} but schedule.csv evaluates to {}",
            result.report.total, check.total
        )));
    }
    Ok(result)
}

/// One batch run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BatchRow {
    pub seed: u64,
    pub feasible: bool,
    pub cost: f64,
    pub total: f64,
    pub penalty: f64,
    pub reserve_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
}

/// Mean and population standard deviation; `None` when empty.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

impl BatchSummary {
    pub fn feasible(&self) -> impl Iterator<Item = &BatchRow> {
        self.rows.iter().filter(|r| r.feasible)
    }

    pub fn feasibility_rate(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.feasible().count() as f64 / self.rows.len() as f64
        }
    }

    /// Lowest cost among feasible runs.
    pub fn best(&self) -> Option<f64> {
        self.feasible().map(|r| r.cost).min_by(f64::total_cmp)
    }

    /// Statistic over feasible runs only.
    pub fn stat(&self, f: impl Fn(&BatchRow) -> f64) -> Option<(f64, f64)> {
        mean_std(&self.feasible().map(f).collect::<Vec<_>>())
    }
}

impl fmt::Display for BatchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6} {:>8} {:>14} {:>14} {:>12}", "seed", "feasible", "cost", "total", "penalty")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>6} {:>8} {:>14.2} {:>14.2} {:>12.4}",
                r.seed,
                if r.feasible { "yes" } else { "no" },
                r.cost,
                r.total,
                r.penalty
            )?;
        }
        writeln!(f)?;
        let best = self.best().map_or("-".to_string(), |b| format!("{b:.2}"));
        writeln!(f, "{:<32} {}", "Best Solution", best)?;
        writeln!(f, "{:<32} {:.0}%", "Solutions With Penalty < 0.01", 100.0 * self.feasibility_rate())?;
        let cell = |s: Option<(f64, f64)>| s.map_or("-".to_string(), |(m, sd)| format!("{m:.2} ({sd:.2})"));
        writeln!(f, "{:<32} {}", "Cost", cell(self.stat(|r| r.cost)))?;
        writeln!(f, "{:<32} {}", "Fitness", cell(self.stat(|r| -r.total)))?;
        writeln!(f, "{:<32} {}", "Total Penalty", cell(self.stat(|r| r.penalty)))?;
        write!(f, "{:<32} {}", "Spinning Reserve Penalty", cell(self.stat(|r| r.reserve_penalty)))
    }
}

/// Runs `runs` independent optimizations with seeds `first_seed..`.
///
/// Runs execute in parallel; each engine evaluates serially.
pub fn batch(inst: &ProblemInstance, cfg: &DeConfig, runs: usize, first_seed: u64) -> Result<BatchSummary, CliError> {
    let rows = (0..runs as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = DeConfig { seed: first_seed + k, parallel: false, ..cfg.clone() };
            let r = run(inst, &cfg)?;
            Ok(BatchRow {
                seed: cfg.seed,
                feasible: r.report.feasible,
                cost: r.report.cost(),
                total: r.report.total,
                penalty: r.report.penalty(),
                reserve_penalty: r.report.reserve_penalty,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(BatchSummary { rows })
}

/// Exact enumeration, or the grid search when `grid` is given.
pub fn oracle(inst: &ProblemInstance, horizon: usize, grid: Option<f64>, budget: u64) -> Result<OracleSolution, CliError> {
    Ok(match grid {
        Some(step) => brute_force_grid(inst, horizon, step, budget)?,
        None => enumerate_uc(inst, horizon, budget)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub oracle_cost: f64,
    pub candidate_cost: f64,
    pub candidate_feasible: bool,
    /// `(candidate - oracle) / |oracle|`.
    pub relative_gap: f64,
    pub pass: bool,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "oracle {:.4}  candidate {:.4}  gap {:+.3}%  {}",
            self.oracle_cost,
            self.candidate_cost,
            100.0 * self.relative_gap,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// A candidate passes when it is feasible and costs at most `tolerance`
/// (relative) more than the oracle.
pub fn compare(oracle_cost: f64, candidate: &Schedule, inst: &ProblemInstance, tolerance: f64) -> Comparison {
    let report = evaluate_schedule(candidate, &Default::default(), inst);
    let candidate_cost = report.cost();
    let relative_gap = (candidate_cost - oracle_cost) / oracle_cost.abs().max(f64::MIN_POSITIVE);
    Comparison {
        oracle_cost,
        candidate_cost,
        candidate_feasible: report.feasible,
        relative_gap,
        pass: report.feasible && relative_gap <= tolerance,
    }
}

/// Writes an oracle schedule and a one-line cost file into `out`.
pub fn write_oracle(out: &Path, sol: &OracleSolution) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("oracle_schedule.csv");
    let mut w = create(&path)?;
    sol.schedule.write_csv(&mut w).map_err(csv_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    let path = out.join("oracle_cost.txt");
    fs::write(&path, format!("{}\n", sol.cost)).map_err(io_err(&path))
}
