//! Differential evolution over repaired chromosomes.
//!
//! Each generation advances the penalty schedule, rescores the incumbents
//! under the new coefficients, builds one trial per individual
//! (rand/1 mutation with a freshly drawn `F`, binomial crossover), repairs
//! and scores the trials, and keeps whichever of trial and incumbent has
//! the lower total. Every `rc` evaluations the chromosome just evaluated is
//! replaced by the encoding of its own repaired schedule.
//!
//! Randomness is drawn from one ChaCha stream per (generation, individual),
//! so serial and parallel evaluation produce identical runs.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{encode_from_schedule, Chromosome, EncodingError, Layout, Schedule};
use crate::model::ProblemInstance;
use crate::penalty::{evaluate, EvaluationReport, PenaltySchedule};
use crate::repair::{full_repair, RepairConfig, RepairOutcome};

#[derive(Debug, Error)]
pub enum DeError {
    #[error("population of {0} is too small, mutation needs at least 4 individuals")]
    PopulationTooSmall(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeConfig {
    pub population_size: usize,
    pub max_generations: u64,
    pub cr: f64,
    pub init_range: (f64, f64),
    /// Evaluations between genotype resets.
    pub rc: u64,
    pub seed: u64,
    pub repair: RepairConfig,
    pub penalty: PenaltySchedule,
    pub parallel: bool,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population_size: 2000,
            max_generations: 80_000,
            cr: 0.8,
            init_range: (-10.0, 10.0),
            rc: 10_000,
            seed: 0,
            repair: RepairConfig::default(),
            penalty: PenaltySchedule::default(),
            parallel: true,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<(), DeError> {
        if self.population_size < 4 {
            return Err(DeError::PopulationTooSmall(self.population_size));
        }
        if !(0.0..=1.0).contains(&self.cr) {
            return Err(DeError::InvalidConfig(format!("cr = {} outside [0, 1]", self.cr)));
        }
        let (lo, hi) = self.init_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DeError::InvalidConfig(format!("init range ({lo}, {hi}) is empty")));
        }
        if self.rc == 0 {
            return Err(DeError::InvalidConfig("rc must be positive".into()));
        }
        if self.penalty.step < 0.0 || self.penalty.supply_coeff_max < 0.0 || self.penalty.water_coeff_max < 0.0 {
            return Err(DeError::InvalidConfig("penalty coefficients must be non-negative".into()));
        }
        Ok(())
    }
}

/// One telemetry line per generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub gen: u64,
    pub best_total: f64,
    pub best_cost: f64,
    pub best_penalty: f64,
    pub feasible_count: usize,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub best: Chromosome,
    pub schedule: Schedule,
    /// Evaluation of `schedule` at saturated coefficients.
    pub report: EvaluationReport,
    pub trace: Vec<TraceRow>,
    pub wall_time: Duration,
    pub evaluations: u64,
}

/// `x1 + f * (x2 - x3)` componentwise.
pub fn mutate_with(x1: &[f64], x2: &[f64], x3: &[f64], f: f64) -> Vec<f64> {
    x1.iter()
        .zip(x2)
        .zip(x3)
        .map(|((a, b), c)| a + f * (b - c))
        .collect()
}

/// Three distinct partners other than `i`.
fn partners<R: Rng>(n: usize, i: usize, rng: &mut R) -> [usize; 3] {
    let mut picked = [usize::MAX; 3];
    for k in 0..3 {
        picked[k] = loop {
            let r = rng.random_range(0..n);
            if r != i && !picked[..k].contains(&r) {
                break r;
            }
        };
    }
    picked
}

/// Mutant for individual `i` with `F` drawn uniformly from `[0, 1)`.
pub fn mutate<R: Rng>(pop: &[Vec<f64>], i: usize, rng: &mut R) -> Result<Vec<f64>, DeError> {
    if pop.len() < 4 {
        return Err(DeError::PopulationTooSmall(pop.len()));
    }
    let [r1, r2, r3] = partners(pop.len(), i, rng);
    let f: f64 = rng.random();
    Ok(mutate_with(&pop[r1], &pop[r2], &pop[r3], f))
}

/// Binomial crossover; one uniformly chosen component always comes from `v`.
pub fn crossover<R: Rng>(x: &[f64], v: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    assert_eq!(x.len(), v.len());
    let forced = rng.random_range(0..x.len());
    x.iter()
        .zip(v)
        .enumerate()
        .map(|(j, (&xj, &vj))| if j == forced || rng.random::<f64>() < cr { vj } else { xj })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Survivor {
    Incumbent,
    Trial,
}

/// Lower total wins; ties keep the incumbent.
pub fn select(incumbent: &EvaluationReport, trial: &EvaluationReport) -> Survivor {
    if trial.total < incumbent.total {
        Survivor::Trial
    } else {
        Survivor::Incumbent
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn repair_genes(
    genes: &[f64],
    layout: Layout,
    inst: &ProblemInstance,
    cfg: &DeConfig,
) -> Result<(Chromosome, RepairOutcome), DeError> {
    let c = Chromosome::new(layout, genes.to_vec())?;
    let out = full_repair(&c, inst, &cfg.repair)?;
    Ok((c, out))
}

/// Scores a genome; a genome that cannot be decoded scores `+inf`.
fn score(genes: &[f64], layout: Layout, inst: &ProblemInstance, cfg: &DeConfig, sched: &PenaltySchedule) -> EvaluationReport {
    match repair_genes(genes, layout, inst, cfg) {
        Ok((_, out)) => evaluate(&out, sched, inst),
        Err(_) => EvaluationReport {
            fuel_cost: f64::INFINITY,
            startup_cost: 0.0,
            supply_penalty: 0.0,
            water_penalty: 0.0,
            reserve_penalty: 0.0,
            total: f64::INFINITY,
            feasible: false,
            supply_gap: f64::INFINITY,
            water_gap: 0.0,
            reserve_gap: 0.0,
        },
    }
}

fn map_indices<T: Send>(parallel: bool, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Penalty at saturated coefficients plus cost: the yardstick for the
/// returned solution.
fn final_total(r: &EvaluationReport, saturated: &PenaltySchedule) -> f64 {
    r.rescore(saturated).total
}

pub fn run(inst: &ProblemInstance, cfg: &DeConfig) -> Result<RunResult, DeError> {
    cfg.validate()?;
    let started = Instant::now();
    let layout = Layout::of(inst);
    let n = cfg.population_size;
    let saturated = cfg.penalty.saturated();
    let mut sched = cfg.penalty.at_generation(0);

    let (lo, hi) = cfg.init_range;
    let mut genes: Vec<Vec<f64>> = map_indices(cfg.parallel, n, |i| {
        let mut rng = stream_rng(cfg.seed, i as u64);
        (0..layout.genome_len()).map(|_| rng.random_range(lo..hi)).collect()
    });
    let mut reports: Vec<EvaluationReport> =
        map_indices(cfg.parallel, n, |i| score(&genes[i], layout, inst, cfg, &sched));
    let mut evaluations = 0u64;
    for g in genes.iter_mut() {
        evaluations += 1;
        if evaluations.is_multiple_of(cfg.rc) {
            reset_genotype(g, layout, inst, cfg)?;
        }
    }

    let mut best_feasible: Option<(f64, Vec<f64>)> = None;
    let note_feasible = |genes: &[Vec<f64>], reports: &[EvaluationReport], best: &mut Option<(f64, Vec<f64>)>| {
        for (g, r) in genes.iter().zip(reports) {
            if r.feasible {
                let t = final_total(r, &saturated);
                if best.as_ref().is_none_or(|(b, _)| t < *b) {
                    *best = Some((t, g.clone()));
                }
            }
        }
    };
    note_feasible(&genes, &reports, &mut best_feasible);

    let mut trace = Vec::with_capacity(cfg.max_generations as usize);
    for gen in 1..=cfg.max_generations {
        sched.advance();
        for r in reports.iter_mut() {
            *r = r.rescore(&sched);
        }
        let base = gen.wrapping_mul(n as u64);
        let trials: Vec<(Vec<f64>, EvaluationReport)> = map_indices(cfg.parallel, n, |i| {
            let mut rng = stream_rng(cfg.seed, base.wrapping_add(i as u64));
            let v = mutate(&genes, i, &mut rng).expect("population size validated");
            let u = crossover(&genes[i], &v, cfg.cr, &mut rng);
            let r = score(&u, layout, inst, cfg, &sched);
            (u, r)
        });
        for (i, (mut u, r)) in trials.into_iter().enumerate() {
            evaluations += 1;
            if evaluations.is_multiple_of(cfg.rc) && r.total.is_finite() {
                reset_genotype(&mut u, layout, inst, cfg)?;
            }
            if select(&reports[i], &r) == Survivor::Trial {
                genes[i] = u;
                reports[i] = r;
            }
        }
        note_feasible(&genes, &reports, &mut best_feasible);

        let best = reports
            .iter()
            .min_by(|a, b| a.total.total_cmp(&b.total))
            .expect("non-empty population");
        trace.push(TraceRow {
            gen,
            best_total: best.total,
            best_cost: best.cost(),
            best_penalty: best.penalty(),
            feasible_count: reports.iter().filter(|r| r.feasible).count(),
        });
    }

    let best_genes = match best_feasible {
        Some((_, g)) => g,
        None => {
            let i = (0..n)
                .min_by(|&a, &b| final_total(&reports[a], &saturated).total_cmp(&final_total(&reports[b], &saturated)))
                .expect("non-empty population");
            genes.swap_remove(i)
        }
    };
    let (best, out) = repair_genes(&best_genes, layout, inst, cfg)?;
    let report = evaluate(&out, &saturated, inst);
    Ok(RunResult {
        best,
        schedule: out.schedule,
        report,
        trace,
        wall_time: started.elapsed(),
        evaluations,
    })
}

/// Overwrites a genome with the encoding of its repaired schedule.
fn reset_genotype(genes: &mut Vec<f64>, layout: Layout, inst: &ProblemInstance, cfg: &DeConfig) -> Result<(), DeError> {
    let (c, out) = repair_genes(genes, layout, inst, cfg)?;
    *genes = encode_from_schedule(&out.schedule, &c, inst)?.into_genes();
    Ok(())
}
