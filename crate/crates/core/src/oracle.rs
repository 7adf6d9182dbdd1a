//! Exact reference solvers for small instances.
//!
//! [`dispatch_qp`] solves one hour's economic dispatch by lambda iteration.
//! [`enumerate_uc`] walks every commitment pattern (pruned by minimum
//! downtime and a cost bound) and dispatches each hour optimally, with hydro
//! held idle. [`brute_force_grid`] additionally enumerates hydro and thermal
//! outputs on a grid and checks every constraint family on each leaf.

use thiserror::Error;

use crate::constraints::{ViolationReport, FEASIBILITY_TOL};
use crate::encoding::Schedule;
use crate::model::{ModelError, ProblemInstance, ReserveMode, ThermalPlant};
use crate::penalty::objective_cost;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space of {needed:.3e} candidates exceeds the budget of {budget}")]
    BudgetExceeded { needed: f64, budget: u64 },
    #[error("no feasible commitment pattern exists")]
    Infeasible,
    #[error("demand {demand} outside committed range [{min}, {max}]")]
    InfeasibleDispatch { demand: f64, min: f64, max: f64 },
    #[error("grid step {0} must be positive and finite")]
    InvalidGrid(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    /// Output of each plant in the committed set, same order.
    pub output: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub schedule: Schedule,
    /// Fuel plus startup cost.
    pub cost: f64,
    /// Leaves and partial patterns visited.
    pub explored: u64,
}

/// Unconstrained-by-balance output of `p` at incremental cost `lambda`.
///
/// Linear-cost plants sit at their minimum unless `lambda` exceeds their
/// marginal cost.
fn output_at(p: &ThermalPlant, lambda: f64) -> f64 {
    if p.cost_c > 0.0 {
        ((lambda - p.cost_b) / (2.0 * p.cost_c)).clamp(p.g_min, p.g_max)
    } else if lambda > p.cost_b {
        p.g_max
    } else {
        p.g_min
    }
}

/// Minimum-cost split of `demand` over the committed plants.
///
/// Bisects on the shared incremental cost until the bracket collapses, then
/// interpolates between the two bracket dispatches so that the balance is
/// exact. Every plant strictly inside its bounds ends with a marginal cost
/// inside the final bracket.
pub fn dispatch_qp(inst: &ProblemInstance, committed: &[usize], demand: f64) -> Result<Dispatch, OracleError> {
    let plants: Vec<&ThermalPlant> = committed.iter().map(|&i| &inst.thermal[i]).collect();
    let min: f64 = plants.iter().map(|p| p.g_min).sum();
    let max: f64 = plants.iter().map(|p| p.g_max).sum();
    if !(min - FEASIBILITY_TOL..=max + FEASIBILITY_TOL).contains(&demand) {
        return Err(OracleError::InfeasibleDispatch { demand, min, max });
    }
    let at = |lambda: f64| -> Vec<f64> { plants.iter().map(|p| output_at(p, lambda)).collect() };
    let mut lo = plants.iter().map(|p| p.marginal_cost(p.g_min)).fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = plants.iter().map(|p| p.marginal_cost(p.g_max)).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if at(mid).iter().sum::<f64>() < demand {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let below = at(lo);
    let above = at(hi);
    let low_total: f64 = below.iter().sum();
    let high_total: f64 = above.iter().sum();
    let theta = if high_total > low_total {
        ((demand - low_total) / (high_total - low_total)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let output: Vec<f64> = below
        .iter()
        .zip(&above)
        .zip(&plants)
        .map(|((b, a), p)| (b + theta * (a - b)).clamp(p.g_min, p.g_max))
        .collect();
    let cost = output.iter().zip(&plants).map(|(g, p)| p.fuel_cost(*g)).sum();
    Ok(Dispatch { output, cost })
}

fn committed_of(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

fn schedule_from_hours(inst: &ProblemInstance, hours: &[&HourOption]) -> Schedule {
    let mut s = Schedule::idle(inst);
    for (t, h) in hours.iter().enumerate() {
        for (i, &g) in h.g.iter().enumerate() {
            s.u[[i, t]] = h.mask >> i & 1 == 1;
            s.g[[i, t]] = g;
        }
        for (j, &hg) in h.hg.iter().enumerate() {
            s.hg[[j, t]] = hg;
        }
    }
    s.recompute_levels(inst);
    s
}

/// One admissible hour: commitment, outputs and its fuel cost.
#[derive(Debug, Clone)]
struct HourOption {
    mask: usize,
    g: Vec<f64>,
    hg: Vec<f64>,
    cost: f64,
}

/// Running state of a depth-first walk over hours.
struct Walk<'a> {
    inst: &'a ProblemInstance,
    options: &'a [Vec<HourOption>],
    lower_bound: Vec<f64>,
    off_run: Vec<u32>,
    levels: Vec<f64>,
    path: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    explored: u64,
}

impl<'a> Walk<'a> {
    fn new(inst: &'a ProblemInstance, options: &'a [Vec<HourOption>]) -> Self {
        let mut lower_bound = vec![0.0; options.len() + 1];
        for t in (0..options.len()).rev() {
            let cheapest = options[t].iter().map(|o| o.cost).fold(f64::INFINITY, f64::min);
            lower_bound[t] = lower_bound[t + 1] + cheapest;
        }
        Self {
            inst,
            options,
            lower_bound,
            off_run: vec![0; inst.thermal.len()],
            levels: inst.hydro.iter().map(|p| p.hv_initial).collect(),
            path: Vec::with_capacity(options.len()),
            best: None,
            explored: 0,
        }
    }

    /// Whether hour `t` may follow the current path, and its startup cost.
    fn transition(&self, t: usize, o: &HourOption) -> Option<f64> {
        let prev = self.path.last().map(|&k| &self.options[t - 1][k]);
        let mut startup = 0.0;
        for (i, p) in self.inst.thermal.iter().enumerate() {
            let on = o.mask >> i & 1 == 1;
            if !on {
                continue;
            }
            let run = self.off_run[i];
            if run > 0 && run < p.mdt {
                return None;
            }
            if let Some(prev) = prev {
                if prev.mask >> i & 1 == 1 {
                    let d = o.g[i] - prev.g[i];
                    if d > p.ramp_up + FEASIBILITY_TOL || -d > p.ramp_down + FEASIBILITY_TOL {
                        return None;
                    }
                } else {
                    startup += p.startup_cost;
                }
            }
        }
        for (j, p) in self.inst.hydro.iter().enumerate() {
            let before = prev.map_or(0.0, |h| h.hg[j]);
            let hg = o.hg[j];
            if hg > 0.0 && hg - before > p.ramp_gen_up + FEASIBILITY_TOL {
                return None;
            }
            if hg < 0.0 && before - hg > p.ramp_pump_down + FEASIBILITY_TOL {
                return None;
            }
            let level = p.next_level(self.levels[j], hg);
            if level > p.hv_max + FEASIBILITY_TOL || level < p.hv_min - FEASIBILITY_TOL {
                return None;
            }
        }
        Some(startup)
    }

    fn descend(&mut self, t: usize, cost: f64) {
        self.explored += 1;
        if t == self.options.len() {
            if self.best.as_ref().is_some_and(|(b, _)| cost >= *b) {
                return;
            }
            let hours: Vec<&HourOption> = self.path.iter().enumerate().map(|(t, &k)| &self.options[t][k]).collect();
            let s = schedule_from_hours(self.inst, &hours);
            if ViolationReport::evaluate(&s, self.inst).is_feasible(FEASIBILITY_TOL) {
                self.best = Some((cost, self.path.clone()));
            }
            return;
        }
        for k in 0..self.options[t].len() {
            let o = &self.options[t][k];
            let Some(startup) = self.transition(t, o) else { continue };
            let reached = cost + o.cost + startup;
            if self.best.as_ref().is_some_and(|(b, _)| reached + self.lower_bound[t + 1] >= *b) {
                continue;
            }
            let saved_runs = self.off_run.clone();
            let saved_levels = self.levels.clone();
            for i in 0..self.off_run.len() {
                self.off_run[i] = if o.mask >> i & 1 == 1 { 0 } else { self.off_run[i] + 1 };
            }
            for (j, p) in self.inst.hydro.iter().enumerate() {
                self.levels[j] = p.next_level(self.levels[j], o.hg[j]);
            }
            self.path.push(k);
            self.descend(t + 1, reached);
            self.path.pop();
            self.off_run = saved_runs;
            self.levels = saved_levels;
        }
    }

    fn finish(self) -> Result<OracleSolution, OracleError> {
        let (_, path) = self.best.ok_or(OracleError::Infeasible)?;
        let hours: Vec<&HourOption> = path.iter().enumerate().map(|(t, &k)| &self.options[t][k]).collect();
        let schedule = schedule_from_hours(self.inst, &hours);
        let (fuel, startup) = objective_cost(&schedule, self.inst);
        Ok(OracleSolution { schedule, cost: fuel + startup, explored: self.explored })
    }
}

/// Whether the static reserve envelope holds for a commitment at hour `t`.
fn reserve_holds(inst: &ProblemInstance, mask: usize, t: usize) -> bool {
    let mut low: f64 = inst.hydro.iter().map(|p| -p.hp_max).sum();
    let mut high: f64 = inst.hydro.iter().map(|p| p.hg_max).sum();
    for (i, p) in inst.thermal.iter().enumerate() {
        if mask >> i & 1 == 1 {
            low += p.g_min;
            high += p.g_max;
        }
    }
    let net = inst.demand.net_demand[t];
    low - (1.0 - inst.demand.alpha[t]) * net <= FEASIBILITY_TOL
        && (1.0 + inst.demand.beta[t]) * net - high <= FEASIBILITY_TOL
}

/// Optimal commitment over the first `horizon` hours with hydro idle.
///
/// Refuses when `2^(n_thermal * horizon)` exceeds `budget`. Patterns whose
/// hourly optimal dispatch breaks a ramp are discarded, so the result is
/// exact when ramps are at least `G_max - G_min` and an upper bound
/// otherwise.
pub fn enumerate_uc(inst: &ProblemInstance, horizon: usize, budget: u64) -> Result<OracleSolution, OracleError> {
    let inst = inst.with_horizon(horizon)?;
    let n = inst.thermal.len();
    let bits = n * horizon;
    if bits >= 64 || 1u64 << bits > budget {
        return Err(OracleError::BudgetExceeded { needed: 2f64.powi(bits as i32), budget });
    }
    let idle_hydro = vec![0.0; inst.hydro.len()];
    let options: Vec<Vec<HourOption>> = (0..horizon)
        .map(|t| {
            (0..1usize << n)
                .filter(|&mask| reserve_holds(&inst, mask, t))
                .filter_map(|mask| {
                    let committed = committed_of(mask, n);
                    let d = dispatch_qp(&inst, &committed, inst.demand.net_demand[t]).ok()?;
                    let mut g = vec![0.0; n];
                    for (k, &i) in committed.iter().enumerate() {
                        g[i] = d.output[k];
                    }
                    Some(HourOption { mask, g, hg: idle_hydro.clone(), cost: d.cost })
                })
                .collect()
        })
        .collect();
    if options.iter().any(Vec::is_empty) {
        return Err(OracleError::Infeasible);
    }
    let mut walk = Walk::new(&inst, &options);
    walk.descend(0, 0.0);
    walk.finish()
}

/// `lo`, every multiple of `step` strictly between, and `hi`.
pub fn grid_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if hi < lo {
        return Vec::new();
    }
    let mut pts = vec![lo];
    let mut k = (lo / step).floor() as i64 + 1;
    loop {
        let x = k as f64 * step;
        if x >= hi {
            break;
        }
        if x > lo {
            pts.push(x);
        }
        k += 1;
    }
    if hi > lo {
        pts.push(hi);
    }
    pts
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect()
    })
}

/// Grid-optimal schedule over the first `horizon` hours.
///
/// Hydro outputs and all but the last committed thermal output of each hour
/// range over [`grid_points`] of their admissible intervals; the last
/// committed plant takes whatever balances the hour. Every candidate that
/// survives the hour-to-hour checks is validated against all constraint
/// families.
pub fn brute_force_grid(
    inst: &ProblemInstance,
    horizon: usize,
    step: f64,
    budget: u64,
) -> Result<OracleSolution, OracleError> {
    if !(step.is_finite() && step > 0.0) {
        return Err(OracleError::InvalidGrid(step));
    }
    let inst = inst.with_horizon(horizon)?;
    let n = inst.thermal.len();
    let hydro_axes: Vec<Vec<f64>> = inst
        .hydro
        .iter()
        .map(|p| {
            let mut axis = grid_points(-p.hp_max, -p.hp_min, step);
            axis.push(0.0);
            axis.extend(grid_points(p.hg_min, p.hg_max, step));
            axis.sort_by(f64::total_cmp);
            axis.dedup_by(|a, b| a == b);
            axis
        })
        .collect();
    let thermal_axes: Vec<Vec<f64>> = inst.thermal.iter().map(|p| grid_points(p.g_min, p.g_max, step)).collect();

    let per_hour: f64 = (0..1usize << n)
        .map(|mask| {
            let committed = committed_of(mask, n);
            let free = committed.len().saturating_sub(1);
            committed[..free].iter().map(|&i| thermal_axes[i].len() as f64).product::<f64>()
        })
        .sum::<f64>()
        * hydro_axes.iter().map(|a| a.len() as f64).product::<f64>();
    if per_hour > budget as f64 {
        return Err(OracleError::BudgetExceeded { needed: per_hour.powi(horizon as i32), budget });
    }
    let hydro_combos = cartesian(&hydro_axes);

    let mut options: Vec<Vec<HourOption>> = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let net = inst.demand.net_demand[t];
        let mut hour = Vec::new();
        for mask in 0..1usize << n {
            if inst.reserve_mode == ReserveMode::Static && !reserve_holds(&inst, mask, t) {
                continue;
            }
            let committed = committed_of(mask, n);
            let free_axes: Vec<Vec<f64>> = committed
                .iter()
                .take(committed.len().saturating_sub(1))
                .map(|&i| thermal_axes[i].clone())
                .collect();
            let free_combos = cartesian(&free_axes);
            for hg in &hydro_combos {
                let hydro: f64 = hg.iter().sum();
                for free in &free_combos {
                    let mut g = vec![0.0; n];
                    for (k, &x) in free.iter().enumerate() {
                        g[committed[k]] = x;
                    }
                    let rest = net - hydro - free.iter().sum::<f64>();
                    match committed.last() {
                        None if rest.abs() <= FEASIBILITY_TOL => {}
                        None => continue,
                        Some(&last) => {
                            let p = &inst.thermal[last];
                            if rest < p.g_min - FEASIBILITY_TOL || rest > p.g_max + FEASIBILITY_TOL {
                                continue;
                            }
                            g[last] = rest.clamp(p.g_min, p.g_max);
                        }
                    }
                    let cost = committed.iter().map(|&i| inst.thermal[i].fuel_cost(g[i])).sum();
                    hour.push(HourOption { mask, g, hg: hg.clone(), cost });
                }
            }
        }
        if hour.is_empty() {
            return Err(OracleError::Infeasible);
        }
        hour.sort_by(|a, b| a.cost.total_cmp(&b.cost));
        options.push(hour);
    }
    let leaves: f64 = options.iter().map(|o| o.len() as f64).product();
    if leaves > budget as f64 {
        return Err(OracleError::BudgetExceeded { needed: leaves, budget });
    }
    let mut walk = Walk::new(&inst, &options);
    walk.descend(0, 0.0);
    walk.finish()
}
