use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ucld::cli::{self, CliError};
use ucld::de::DeConfig;
use ucld::encoding::Schedule;
use ucld::model::synth_demand;
use ucld::oracle::OracleError;
use ucld::repair::RepairOrder;

#[derive(Parser)]
#[command(name = "ucld", version, about = "Unit commitment and load dispatch with differential evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one instance and write schedule.csv, report.json, trace.csv.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        de: DeArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write supply_demand.csv and reserve.csv.
        #[arg(long)]
        plot_data: bool,
    },
    /// Repeat the optimization over consecutive seeds and summarize.
    Batch {
        instance: PathBuf,
        #[command(flatten)]
        de: DeArgs,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        first_seed: u64,
        /// Per-run rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Exact enumeration (or grid search) on a short horizon.
    Oracle {
        instance: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Grid step; switches to the grid search that also covers hydro.
        #[arg(long)]
        grid: Option<f64>,
        #[arg(long, default_value_t = 1 << 24)]
        budget: u64,
        /// Schedule CSV to compare against the oracle optimum.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        tolerance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic net-demand CSV.
    Synth {
        #[arg(long, default_value_t = 7)]
        days: u32,
        #[arg(long, default_value_t = 60.0)]
        peak: f64,
        #[arg(long, default_value_t = 30.0)]
        pv_peak: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    WaterFirst,
    BalanceFirst,
}

#[derive(Args)]
struct DeArgs {
    #[arg(long, default_value_t = 2000)]
    pop: usize,
    #[arg(long, default_value_t = 80_000)]
    gens: u64,
    #[arg(long, default_value_t = 0.8)]
    cr: f64,
    #[arg(long, default_value_t = 10_000)]
    rc: u64,
    #[arg(long, default_value_t = 1000.0)]
    max_supply_coeff: f64,
    #[arg(long, default_value_t = 100.0)]
    max_water_coeff: f64,
    #[arg(long, default_value_t = 0.025)]
    coeff_step: f64,
    #[arg(long, default_value_t = 10)]
    max_adjustments: usize,
    #[arg(long, value_enum, default_value = "water-first")]
    repair_order: OrderArg,
    /// Cut the demand profile to this many hours.
    #[arg(long)]
    horizon: Option<usize>,
    /// Evaluate the population on one thread.
    #[arg(long)]
    serial: bool,
}

impl DeArgs {
    fn config(&self, seed: u64) -> DeConfig {
        let mut cfg = DeConfig {
            population_size: self.pop,
            max_generations: self.gens,
            cr: self.cr,
            rc: self.rc,
            seed,
            parallel: !self.serial,
            ..DeConfig::default()
        };
        cfg.penalty.supply_coeff_max = self.max_supply_coeff;
        cfg.penalty.water_coeff_max = self.max_water_coeff;
        cfg.penalty.step = self.coeff_step;
        cfg.repair.max_adjustments = self.max_adjustments;
        cfg.repair.order = match self.repair_order {
            OrderArg::WaterFirst => RepairOrder::WaterFirst,
            OrderArg::BalanceFirst => RepairOrder::BalanceFirst,
        };
        cfg
    }
}

fn execute(command: Command) -> Result<ExitCode> {
    match command {
        Command::Solve { instance, de, seed, out, plot_data } => {
            let inst = cli::prepare_instance(&instance, de.horizon)?;
            let result = cli::solve(&inst, &de.config(seed), &out, plot_data)?;
            let r = &result.report;
            println!(
                "cost {:.4}  penalty {:.6}  total {:.4}  feasible {}  ({} evaluations, {:.1?})",
                r.cost(),
                r.penalty(),
                r.total,
                r.feasible,
                result.evaluations,
                result.wall_time
            );
            Ok(if r.feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Batch { instance, de, runs, first_seed, csv } => {
            let inst = cli::prepare_instance(&instance, de.horizon)?;
            let summary = cli::batch(&inst, &de.config(first_seed), runs, first_seed)?;
            println!("{summary}");
            if let Some(path) = csv {
                let mut w = csv::Writer::from_writer(BufWriter::new(
                    File::create(&path).with_context(|| format!("creating {}", path.display()))?,
                ));
                for row in &summary.rows {
                    w.serialize(row)?;
                }
                w.flush()?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { instance, horizon, grid, budget, compare, tolerance, out } => {
            let inst = cli::prepare_instance(&instance, None)?;
            let sol = match cli::oracle(&inst, horizon, grid, budget) {
                Err(CliError::Oracle(e @ OracleError::BudgetExceeded { .. })) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(3));
                }
                other => other?,
            };
            println!("oracle cost {:.6} ({} nodes)", sol.cost, sol.explored);
            if let Some(dir) = out {
                cli::write_oracle(&dir, &sol)?;
            }
            if let Some(path) = compare {
                let short = inst.with_horizon(horizon)?;
                let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
                let candidate = Schedule::read_csv(file, &short)?;
                let cmp = cli::compare(sol.cost, &candidate, &short, tolerance);
                println!("{cmp}");
                if !cmp.pass {
                    return Ok(ExitCode::from(2));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth { days, peak, pv_peak, seed, out } => {
            let demand = synth_demand(days, peak, pv_peak, seed)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            demand.write_csv(BufWriter::new(file))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors exit 1; code 2 is reserved for infeasible results.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
