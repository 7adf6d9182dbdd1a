//! Objective cost, penalty coefficients and fitness assembly.

use serde::{Deserialize, Serialize};

use crate::constraints::check_spinning_reserve;
use crate::encoding::Schedule;
use crate::model::ProblemInstance;
use crate::repair::RepairOutcome;

/// Total penalty below which a solution counts as feasible.
pub const FEASIBLE_PENALTY: f64 = 0.01;

/// Linearly ramped penalty coefficients.
///
/// `coeff(gen) = min(step * gen, max)`; the reserve weight is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySchedule {
    pub supply_coeff_max: f64,
    pub water_coeff_max: f64,
    pub step: f64,
    pub reserve_weight: f64,
    pub generation: u64,
}

impl Default for PenaltySchedule {
    fn default() -> Self {
        Self {
            supply_coeff_max: 1000.0,
            water_coeff_max: 100.0,
            step: 0.025,
            reserve_weight: 1.0,
            generation: 0,
        }
    }
}

impl PenaltySchedule {
    pub fn at_generation(mut self, generation: u64) -> Self {
        self.generation = generation;
        self
    }

    pub fn advance(&mut self) {
        self.generation += 1;
    }

    /// Both coefficients pinned at their maxima.
    pub fn saturated(&self) -> Self {
        Self {
            step: self.supply_coeff_max.max(self.water_coeff_max),
            generation: 1,
            ..*self
        }
    }

    pub fn supply_coeff(&self) -> f64 {
        (self.step * self.generation as f64).min(self.supply_coeff_max)
    }

    pub fn water_coeff(&self) -> f64 {
        (self.step * self.generation as f64).min(self.water_coeff_max)
    }

    fn penalties(&self, supply_gap: f64, water_gap: f64, reserve_gap: f64) -> (f64, f64, f64) {
        (
            self.supply_coeff() * supply_gap,
            self.water_coeff() * water_gap,
            self.reserve_weight * reserve_gap,
        )
    }

    /// Penalty at the saturated coefficients, the measure used to call a
    /// solution feasible.
    pub fn saturated_penalty(&self, supply_gap: f64, water_gap: f64, reserve_gap: f64) -> f64 {
        self.supply_coeff_max * supply_gap + self.water_coeff_max * water_gap + self.reserve_weight * reserve_gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub fuel_cost: f64,
    pub startup_cost: f64,
    pub supply_penalty: f64,
    pub water_penalty: f64,
    pub reserve_penalty: f64,
    pub total: f64,
    /// Penalty at saturated coefficients below [`FEASIBLE_PENALTY`].
    pub feasible: bool,
    /// `sum_t |supply - net demand|`.
    pub supply_gap: f64,
    /// `sum_j |hv[T_f] - hv_initial|`.
    pub water_gap: f64,
    /// `sum_t max(S1, 0) + max(S2, 0)`.
    pub reserve_gap: f64,
}

impl EvaluationReport {
    pub fn cost(&self) -> f64 {
        self.fuel_cost + self.startup_cost
    }

    pub fn penalty(&self) -> f64 {
        self.supply_penalty + self.water_penalty + self.reserve_penalty
    }

    fn assemble(
        (fuel_cost, startup_cost): (f64, f64),
        supply_gap: f64,
        water_gap: f64,
        reserve_gap: f64,
        sched: &PenaltySchedule,
    ) -> Self {
        let (supply_penalty, water_penalty, reserve_penalty) = sched.penalties(supply_gap, water_gap, reserve_gap);
        Self {
            fuel_cost,
            startup_cost,
            supply_penalty,
            water_penalty,
            reserve_penalty,
            total: fuel_cost + startup_cost + supply_penalty + water_penalty + reserve_penalty,
            feasible: sched.saturated_penalty(supply_gap, water_gap, reserve_gap) < FEASIBLE_PENALTY,
            supply_gap,
            water_gap,
            reserve_gap,
        }
    }

    /// Same solution under another coefficient snapshot.
    pub fn rescore(&self, sched: &PenaltySchedule) -> Self {
        Self::assemble(
            (self.fuel_cost, self.startup_cost),
            self.supply_gap,
            self.water_gap,
            self.reserve_gap,
            sched,
        )
    }
}

/// Fuel and startup cost. Hour 0 never pays a startup.
pub fn objective_cost(s: &Schedule, inst: &ProblemInstance) -> (f64, f64) {
    let mut fuel = 0.0;
    let mut startup = 0.0;
    for (i, p) in inst.thermal.iter().enumerate() {
        for t in 0..s.steps() {
            if s.u[[i, t]] {
                fuel += p.fuel_cost(s.g[[i, t]]);
                if t > 0 && !s.u[[i, t - 1]] {
                    startup += p.startup_cost;
                }
            }
        }
    }
    (fuel, startup)
}

fn reserve_gap(s: &Schedule, inst: &ProblemInstance) -> f64 {
    check_spinning_reserve(s, inst)
        .into_iter()
        .map(|(s1, s2)| s1.max(0.0) + s2.max(0.0))
        .sum()
}

/// Scores a repair outcome from its residuals.
pub fn evaluate(out: &RepairOutcome, sched: &PenaltySchedule, inst: &ProblemInstance) -> EvaluationReport {
    EvaluationReport::assemble(
        objective_cost(&out.schedule, inst),
        out.supply_gap(),
        out.water_gap(),
        reserve_gap(&out.schedule, inst),
        sched,
    )
}

/// Scores a schedule directly, recomputing the residuals from it.
pub fn evaluate_schedule(s: &Schedule, sched: &PenaltySchedule, inst: &ProblemInstance) -> EvaluationReport {
    let supply_gap = crate::constraints::check_supply_demand(s, inst).iter().map(|r| r.abs()).sum();
    let last = s.steps().checked_sub(1);
    let water_gap = inst
        .hydro
        .iter()
        .enumerate()
        .map(|(j, p)| last.map_or(0.0, |t| (s.hv[[j, t]] - p.hv_initial).abs()))
        .sum();
    EvaluationReport::assemble(objective_cost(s, inst), supply_gap, water_gap, reserve_gap(s, inst), sched)
}
