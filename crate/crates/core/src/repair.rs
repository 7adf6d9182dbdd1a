//! Repair of decoded schedules.
//!
//! The stage chain fixes single-variable constraints in a fixed order:
//!
//! 1. thermal ramps between committed hours
//! 2. thermal output bounds
//! 3. minimum downtime (restarts inside a short off-block are cancelled)
//! 4. hydro generating bounds
//! 5. hydro pumping bounds
//! 6. hydro generating ramps
//! 7. hydro pumping ramps
//! 8. reservoir limits
//!
//! Two equality repairs follow: the backward terminal-water repair and the
//! adaptive supply-demand repair, whose plant order and step size come from
//! the chromosome. Whatever the equality repairs cannot close is returned as
//! residuals for the penalty terms.

use serde::{Deserialize, Serialize};

use crate::constraints::{check_supply_demand, thermal_window};
use crate::encoding::{decode, Chromosome, EncodingError, Schedule};
use crate::model::{ProblemInstance, PumpedStoragePlant};

/// Imbalance below which the supply-demand repair stops adjusting.
const BALANCE_EPS: f64 = 1e-12;

/// Order of the two equality repairs after the stage chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepairOrder {
    /// Terminal water first, then supply-demand on top of the final hydro
    /// schedule.
    #[default]
    WaterFirst,
    /// Supply-demand first, then terminal water; the balance shift caused
    /// by the water repair stays in the supply residual.
    BalanceFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    /// Passes over the thermal fleet per hour in the supply-demand repair.
    pub max_adjustments: usize,
    pub order: RepairOrder,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self { max_adjustments: 10, order: RepairOrder::WaterFirst }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub schedule: Schedule,
    /// Supply minus net demand per hour on the final schedule.
    pub supply_residual: Vec<f64>,
    /// `|hv[T_f] - hv_initial|` per hydro plant, in level units.
    pub water_residual: Vec<f64>,
}

impl RepairOutcome {
    pub fn supply_gap(&self) -> f64 {
        self.supply_residual.iter().map(|r| r.abs()).sum()
    }

    pub fn water_gap(&self) -> f64 {
        self.water_residual.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// Stage chain

/// Stage 1: clamp each committed hour into the ramp window around the
/// previous committed hour, sweeping forward.
pub fn clamp_thermal_ramps(s: &mut Schedule, inst: &ProblemInstance) {
    for i in 0..inst.thermal.len() {
        clamp_thermal_ramps_from(s, inst, i, 1);
    }
}

fn clamp_thermal_ramps_from(s: &mut Schedule, inst: &ProblemInstance, i: usize, from: usize) {
    let p = &inst.thermal[i];
    for t in from.max(1)..s.steps() {
        if s.u[[i, t]] && s.u[[i, t - 1]] {
            let prev = s.g[[i, t - 1]];
            s.g[[i, t]] = s.g[[i, t]].clamp(prev - p.ramp_down, prev + p.ramp_up);
        }
    }
}

/// Stage 2.
pub fn clamp_thermal_bounds(s: &mut Schedule, inst: &ProblemInstance) {
    for (i, p) in inst.thermal.iter().enumerate() {
        for t in 0..s.steps() {
            if s.u[[i, t]] {
                s.g[[i, t]] = s.g[[i, t]].clamp(p.g_min, p.g_max);
            } else {
                s.g[[i, t]] = 0.0;
            }
        }
    }
}

/// Stage 3: a committed hour that follows an off-block shorter than the
/// minimum downtime is turned off, extending the block until it is long
/// enough or the horizon ends.
pub fn enforce_min_downtime(s: &mut Schedule, inst: &ProblemInstance) {
    for (i, p) in inst.thermal.iter().enumerate() {
        let mut off_run = 0u32;
        for t in 0..s.steps() {
            if s.u[[i, t]] {
                if off_run > 0 && off_run < p.mdt {
                    s.turn_off(i, t);
                    off_run += 1;
                } else {
                    off_run = 0;
                }
            } else {
                off_run += 1;
            }
        }
    }
}

/// Stage 4.
pub fn clamp_hydro_generation(s: &mut Schedule, inst: &ProblemInstance) {
    for (j, p) in inst.hydro.iter().enumerate() {
        for t in 0..s.steps() {
            let hg = s.hg[[j, t]];
            if hg > 0.0 {
                s.hg[[j, t]] = hg.clamp(p.hg_min, p.hg_max);
            }
        }
    }
}

/// Stage 5.
pub fn clamp_hydro_pumping(s: &mut Schedule, inst: &ProblemInstance) {
    for (j, p) in inst.hydro.iter().enumerate() {
        for t in 0..s.steps() {
            let hg = s.hg[[j, t]];
            if hg < 0.0 {
                s.hg[[j, t]] = hg.clamp(-p.hp_max, -p.hp_min);
            }
        }
    }
}

/// Generation capped by the ramp from `prev`; idle when the cap falls below
/// the generating minimum.
#[inline]
fn ramp_limited_generation(p: &PumpedStoragePlant, prev: f64, hg: f64) -> f64 {
    if hg > 0.0 && hg - prev > p.ramp_gen_up {
        let capped = prev + p.ramp_gen_up;
        if capped < p.hg_min || capped <= 0.0 {
            0.0
        } else {
            capped
        }
    } else {
        hg
    }
}

#[inline]
fn ramp_limited_pumping(p: &PumpedStoragePlant, prev: f64, hg: f64) -> f64 {
    if hg < 0.0 && prev - hg > p.ramp_pump_down {
        let capped = prev - p.ramp_pump_down;
        if -capped < p.hp_min || capped >= 0.0 {
            0.0
        } else {
            capped
        }
    } else {
        hg
    }
}

/// Stage 6.
pub fn clamp_hydro_generation_ramps(s: &mut Schedule, inst: &ProblemInstance) {
    for (j, p) in inst.hydro.iter().enumerate() {
        let mut prev = 0.0;
        for t in 0..s.steps() {
            let hg = ramp_limited_generation(p, prev, s.hg[[j, t]]);
            s.hg[[j, t]] = hg;
            prev = hg;
        }
    }
}

/// Stage 7.
pub fn clamp_hydro_pumping_ramps(s: &mut Schedule, inst: &ProblemInstance) {
    for (j, p) in inst.hydro.iter().enumerate() {
        let mut prev = 0.0;
        for t in 0..s.steps() {
            let hg = ramp_limited_pumping(p, prev, s.hg[[j, t]]);
            s.hg[[j, t]] = hg;
            prev = hg;
        }
    }
}

/// Stage 8: sweeping forward, shrink each hour's output toward zero just
/// enough to keep the reservoir inside its limits.
///
/// Shrinking an hour can tighten the ramp constraints of the following hour,
/// so the stage 6/7 clamps are re-applied as the sweep advances. Outputs
/// that land strictly between zero and a mode minimum become idle. Levels
/// are recomputed.
pub fn enforce_reservoir_limits(s: &mut Schedule, inst: &ProblemInstance) {
    for (j, p) in inst.hydro.iter().enumerate() {
        let k = p.level_per_output();
        let mut level = p.hv_initial;
        let mut prev = 0.0;
        for t in 0..s.steps() {
            let mut hg = s.hg[[j, t]];
            hg = ramp_limited_generation(p, prev, hg);
            hg = ramp_limited_pumping(p, prev, hg);
            let most_pumping = (level - p.hv_max) / k;
            let most_generation = (level - p.hv_min) / k;
            hg = hg.clamp(most_pumping.min(0.0), most_generation.max(0.0));
            if (hg > 0.0 && hg < p.hg_min) || (hg < 0.0 && -hg < p.hp_min) {
                hg = 0.0;
            }
            s.hg[[j, t]] = hg;
            level = p.next_level(level, hg);
            s.hv[[j, t]] = level;
            prev = hg;
        }
    }
}

/// Applies stages 1-8 in order.
pub fn repair_stage_chain(s: &mut Schedule, inst: &ProblemInstance) {
    clamp_thermal_ramps(s, inst);
    clamp_thermal_bounds(s, inst);
    enforce_min_downtime(s, inst);
    clamp_hydro_generation(s, inst);
    clamp_hydro_pumping(s, inst);
    clamp_hydro_generation_ramps(s, inst);
    clamp_hydro_pumping_ramps(s, inst);
    enforce_reservoir_limits(s, inst);
    s.recompute_levels(inst);
}

// ---------------------------------------------------------------------------
// Supply-demand balance

/// Adaptive supply-demand repair.
///
/// Hour by hour, committed thermal plants are visited in the chromosome's
/// preference order, each moving toward closing the imbalance by at most
/// the chromosome's max-change step while staying inside its bounds and
/// ramp window. Up to `max_adjustments` passes are made per hour. After
/// each hour the ramp clamp is re-applied to the next hour, which is then
/// balanced in turn. Commitment is never changed.
///
/// Returns supply minus net demand per hour.
pub fn repair_supply_demand(
    s: &mut Schedule,
    c: &Chromosome,
    inst: &ProblemInstance,
    max_adjustments: usize,
) -> Vec<f64> {
    let order = c.repair_order();
    let max_step = c.max_change();
    let steps = s.steps();
    let mut residual = check_supply_demand(s, inst);
    for t in 0..steps {
        let mut need = -residual[t];
        'passes: for _ in 0..max_adjustments {
            if need.abs() <= BALANCE_EPS {
                break;
            }
            for &i in &order {
                if !s.u[[i, t]] {
                    continue;
                }
                let (lo, hi) = thermal_window(&inst.thermal[i], s, i, t);
                let g = s.g[[i, t]];
                let moved = (g + need.clamp(-max_step, max_step)).clamp(lo, hi);
                s.g[[i, t]] = moved;
                need -= moved - g;
                if need.abs() <= BALANCE_EPS {
                    break 'passes;
                }
            }
        }
        residual[t] = -need;
        if t + 1 < steps {
            for (i, p) in inst.thermal.iter().enumerate() {
                if s.u[[i, t + 1]] && s.u[[i, t]] {
                    let prev = s.g[[i, t]];
                    let before = s.g[[i, t + 1]];
                    let after = before.clamp(prev - p.ramp_down, prev + p.ramp_up);
                    s.g[[i, t + 1]] = after;
                    residual[t + 1] += after - before;
                }
            }
        }
    }
    residual
}

// ---------------------------------------------------------------------------
// Terminal water level

/// Closest point to `target` inside `[lo, hi]`, if non-empty.
#[inline]
fn nearest_in(lo: f64, hi: f64, target: f64) -> Option<f64> {
    (lo <= hi).then(|| target.clamp(lo, hi))
}

/// Backward terminal-water repair.
///
/// For each hydro plant, hours are visited from the last to the first; each
/// hour's output moves toward closing `hv[T_f] - hv_initial` as far as its
/// mode bounds, the ramps to both neighbouring hours, and the reservoir
/// limits at that hour and every later one allow. Levels are recomputed.
///
/// Returns `|hv[T_f] - hv_initial|` per plant.
pub fn repair_water_terminal(s: &mut Schedule, inst: &ProblemInstance) -> Vec<f64> {
    let steps = s.steps();
    let mut out = Vec::with_capacity(inst.hydro.len());
    for (j, p) in inst.hydro.iter().enumerate() {
        if steps == 0 {
            out.push(0.0);
            continue;
        }
        let k = p.level_per_output();
        // Extra generation (output units) that would close the gap.
        let mut need = (s.hv[[j, steps - 1]] - p.hv_initial) / k;
        let mut later_max = f64::NEG_INFINITY;
        let mut later_min = f64::INFINITY;
        for t in (0..steps).rev() {
            let level = s.hv[[j, t]];
            let hi_level = level.max(later_max);
            let lo_level = level.min(later_min);
            let cur = s.hg[[j, t]];
            let mut delta = 0.0;
            if need.abs() * k > f64::EPSILON * p.hv_max.abs().max(1.0) {
                let prev = if t == 0 { 0.0 } else { s.hg[[j, t - 1]] };
                let (mut lo, mut hi) =
                    (cur + (hi_level - p.hv_max) / k, cur + (lo_level - p.hv_min) / k);
                if t + 1 < steps {
                    let next = s.hg[[j, t + 1]];
                    if next > 0.0 {
                        lo = lo.max(next - p.ramp_gen_up);
                    } else if next < 0.0 {
                        hi = hi.min(next + p.ramp_pump_down);
                    }
                }
                let target = cur + need;
                let generating = nearest_in(p.hg_min.max(lo), p.hg_max.min(prev + p.ramp_gen_up).min(hi), target);
                let pumping = nearest_in(
                    (-p.hp_max).max(prev - p.ramp_pump_down).max(lo),
                    (-p.hp_min).min(hi),
                    target,
                );
                let idle = (lo <= 0.0 && 0.0 <= hi).then_some(0.0);
                let best = [Some(cur), generating, pumping, idle]
                    .into_iter()
                    .flatten()
                    .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
                    .expect("current output is a candidate");
                delta = best - cur;
                s.hg[[j, t]] = best;
                need -= delta;
            }
            later_max = hi_level - k * delta;
            later_min = lo_level - k * delta;
        }
        let mut level = p.hv_initial;
        for t in 0..steps {
            level = p.next_level(level, s.hg[[j, t]]);
            s.hv[[j, t]] = level;
        }
        out.push((level - p.hv_initial).abs());
    }
    out
}

/// Decode, stage chain, then both equality repairs in `cfg.order`.
pub fn full_repair(
    c: &Chromosome,
    inst: &ProblemInstance,
    cfg: &RepairConfig,
) -> Result<RepairOutcome, EncodingError> {
    let mut s = decode(c, inst)?;
    repair_stage_chain(&mut s, inst);
    let water_residual = match cfg.order {
        RepairOrder::WaterFirst => {
            let w = repair_water_terminal(&mut s, inst);
            repair_supply_demand(&mut s, c, inst, cfg.max_adjustments);
            w
        }
        RepairOrder::BalanceFirst => {
            repair_supply_demand(&mut s, c, inst, cfg.max_adjustments);
            repair_water_terminal(&mut s, inst)
        }
    };
    let supply_residual = check_supply_demand(&s, inst);
    Ok(RepairOutcome { schedule: s, supply_residual, water_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{check_hydro, check_thermal, ViolationReport, FEASIBILITY_TOL};
    use crate::encoding::{encode_from_schedule, Layout};
    use crate::model::{DemandProfile, ThermalPlant};
    use ndarray::{array, Array2};

    fn thermal(id: usize, g_min: f64, g_max: f64, ramp: f64, mdt: u32) -> ThermalPlant {
        ThermalPlant {
            id,
            g_min,
            g_max,
            ramp_up: ramp,
            ramp_down: ramp,
            mdt,
            min_uptime: None,
            startup_cost: 0.0,
            cost_a: 0.0,
            cost_b: 1.0,
            cost_c: 0.0,
        }
    }

    fn reservoir(id: usize) -> PumpedStoragePlant {
        PumpedStoragePlant {
            id,
            hg_min: 0.0,
            hg_max: 2.5,
            hp_min: 0.0,
            hp_max: 2.5,
            ramp_gen_up: 2.5,
            ramp_pump_down: 2.5,
            hv_min: 0.0,
            hv_max: 100.0,
            hv_initial: 50.0,
            epsilon: 10.0,
            eta: 0.8,
        }
    }

    fn instance(thermal: Vec<ThermalPlant>, hydro: Vec<PumpedStoragePlant>, net: Vec<f64>) -> ProblemInstance {
        ProblemInstance::new("t", thermal, hydro, DemandProfile::with_margins(net, 0.0, 0.0)).unwrap()
    }

    fn chromosome(thermal: Array2<f64>, pump: Array2<f64>, pref: &[f64], maxc: f64) -> Chromosome {
        Chromosome::from_parts(&thermal, &pump, pref, maxc).unwrap()
    }

    #[test]
    fn feasible_schedule_is_a_fixed_point() {
        let inst = instance(
            vec![thermal(0, 1.0, 11.0, 4.0, 2), thermal(1, 2.0, 6.0, 6.0, 0)],
            vec![reservoir(0)],
            vec![6.0, 8.0, 9.0, 7.0],
        );
        let c = chromosome(
            array![[3.0, 5.0, 7.0, 6.0], [3.0, 3.0, 2.0, -1.0]],
            array![[0.0, 0.0, 0.0, 1.0]],
            &[0.0, 0.0],
            1.0,
        );
        let s0 = decode(&c, &inst).unwrap();
        let mut s = s0.clone();
        repair_stage_chain(&mut s, &inst);
        assert_eq!(s, s0);
    }

    #[test]
    fn ramp_then_bound_clamp() {
        let inst = instance(vec![thermal(0, 1.0, 11.0, 4.0, 0)], vec![], vec![0.0; 2]);
        let mut s = Schedule::idle(&inst);
        s.u.fill(true);
        s.g = array![[0.0, 11.0]];
        clamp_thermal_ramps(&mut s, &inst);
        assert_eq!(s.g[[0, 1]], 4.0);
        clamp_thermal_bounds(&mut s, &inst);
        assert_eq!(s.g[[0, 1]], 4.0);
        assert_eq!(s.g[[0, 0]], 1.0);
    }

    #[test]
    fn restart_inside_downtime_is_cancelled() {
        let inst = instance(vec![thermal(0, 1.0, 5.0, 5.0, 10)], vec![], vec![0.0; 5]);
        let c = chromosome(array![[2.0, 2.0, -1.0, -1.0, 2.0]], Array2::zeros((0, 5)), &[0.0], 1.0);
        let mut s = decode(&c, &inst).unwrap();
        repair_stage_chain(&mut s, &inst);
        assert_eq!(s.u.row(0).to_vec(), vec![true, true, false, false, false]);
        assert_eq!(check_thermal(&s, &inst).mdt, 0.0);
    }

    #[test]
    fn downtime_block_ends_when_long_enough() {
        let inst = instance(vec![thermal(0, 1.0, 5.0, 5.0, 3)], vec![], vec![0.0; 7]);
        let c = chromosome(array![[2.0, -1.0, 2.0, 2.0, 2.0, 2.0, 2.0]], Array2::zeros((0, 7)), &[0.0], 1.0);
        let mut s = decode(&c, &inst).unwrap();
        enforce_min_downtime(&mut s, &inst);
        assert_eq!(s.u.row(0).to_vec(), vec![true, false, false, false, true, true, true]);
    }

    #[test]
    fn hydro_stages_clamp_by_sign() {
        let mut p = reservoir(0);
        p.hg_min = 0.5;
        p.hp_min = 0.5;
        p.ramp_gen_up = 1.0;
        p.ramp_pump_down = 1.0;
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![p], vec![0.0; 5]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[0.2, 4.0, -0.1, -4.0, 1.0]];
        clamp_hydro_generation(&mut s, &inst);
        clamp_hydro_pumping(&mut s, &inst);
        assert_eq!(s.hg.row(0).to_vec(), vec![0.5, 2.5, -0.5, -2.5, 1.0]);
        clamp_hydro_generation_ramps(&mut s, &inst);
        clamp_hydro_pumping_ramps(&mut s, &inst);
        // 0.5 ok; 2.5 capped to 1.5; -0.5 ok (pump jump 2.0 > 1 -> capped at 0.5 => idle);
        // then -2.5 after 0 -> -1.0; 1.0 after -1.0 -> capped at 0.0 -> idle.
        assert_eq!(s.hg.row(0).to_vec(), vec![0.5, 1.5, 0.0, -1.0, 0.0]);
        s.recompute_levels(&inst);
        let v = check_hydro(&s, &inst);
        assert_eq!(v.bounds + v.ramp_gen + v.ramp_pump, 0.0);
    }

    #[test]
    fn reservoir_limit_shrinks_output_and_keeps_ramps() {
        let mut p = reservoir(0);
        p.hv_max = 50.3;
        p.ramp_pump_down = 1.0;
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![p], vec![0.0; 4]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[-1.0, -2.0, -2.0, -2.0]];
        repair_stage_chain(&mut s, &inst);
        let v = check_hydro(&s, &inst);
        assert_eq!(v.capacity, 0.0);
        assert_eq!(v.bounds + v.ramp_gen + v.ramp_pump, 0.0);
        assert!(s.hv.iter().all(|&h| h <= 50.3 + 1e-12));
        // 50 -> 50.08 -> 50.24 -> 50.3 (capped) -> 50.3
        assert!((s.hv[[0, 2]] - 50.3).abs() < 1e-12);
        assert_eq!(s.hg[[0, 3]], 0.0);
    }

    #[test]
    fn balanced_hours_are_untouched() {
        let inst = instance(vec![thermal(0, 1.0, 11.0, 11.0, 0)], vec![], vec![5.0, 6.0]);
        let c = chromosome(array![[5.0, 6.0]], Array2::zeros((0, 2)), &[0.0], 10.0);
        let mut s = decode(&c, &inst).unwrap();
        let before = s.clone();
        let r = repair_supply_demand(&mut s, &c, &inst, 10);
        assert_eq!(r, vec![0.0, 0.0]);
        assert_eq!(s, before);
    }

    #[test]
    fn single_plant_closes_deficit() {
        // g = 5, demand 8: diff -3 with MaxC 10 -> g = 8.
        let inst = instance(vec![thermal(0, 1.0, 11.0, 11.0, 0)], vec![], vec![8.0]);
        let c = chromosome(array![[5.0]], Array2::zeros((0, 1)), &[0.0], 10.0);
        let mut s = decode(&c, &inst).unwrap();
        let r = repair_supply_demand(&mut s, &c, &inst, 10);
        assert_eq!(s.g[[0, 0]], 8.0);
        assert_eq!(r, vec![0.0]);
    }

    #[test]
    fn saturated_fleet_leaves_residual() {
        let inst = instance(
            vec![thermal(0, 1.0, 5.0, 5.0, 0), thermal(1, 1.0, 3.0, 3.0, 0)],
            vec![],
            vec![10.0],
        );
        let c = chromosome(array![[5.0], [3.0]], Array2::zeros((0, 1)), &[0.0, 1.0], 3.0);
        let mut s = decode(&c, &inst).unwrap();
        let r = repair_supply_demand(&mut s, &c, &inst, 10);
        assert!((r[0] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn preference_decides_who_moves() {
        let inst = instance(
            vec![thermal(0, 1.0, 10.0, 10.0, 0), thermal(1, 1.0, 10.0, 10.0, 0)],
            vec![],
            vec![8.0],
        );
        let run = |pref: &[f64]| {
            let c = chromosome(array![[3.0], [3.0]], Array2::zeros((0, 1)), pref, 10.0);
            let mut s = decode(&c, &inst).unwrap();
            repair_supply_demand(&mut s, &c, &inst, 10);
            (s.g[[0, 0]], s.g[[1, 0]])
        };
        assert_eq!(run(&[1.0, 0.0]), (5.0, 3.0));
        assert_eq!(run(&[0.0, 1.0]), (3.0, 5.0));
    }

    #[test]
    fn small_step_needs_several_passes() {
        let inst = instance(vec![thermal(0, 1.0, 20.0, 20.0, 0)], vec![], vec![15.0]);
        let c = chromosome(array![[2.0]], Array2::zeros((0, 1)), &[0.0], 1.0);
        let mut s = decode(&c, &inst).unwrap();
        let r = repair_supply_demand(&mut s, &c, &inst, 10);
        // Ten passes of one unit each.
        assert_eq!(s.g[[0, 0]], 12.0);
        assert!((r[0] + 3.0).abs() < 1e-12);
    }

    #[test]
    fn balance_respects_ramp_and_fixes_next_hour() {
        let inst = instance(vec![thermal(0, 1.0, 20.0, 3.0, 0)], vec![], vec![10.0, 4.0, 4.0]);
        let c = chromosome(array![[5.0, 8.0, 9.0]], Array2::zeros((0, 3)), &[0.0], 10.0);
        let mut s = decode(&c, &inst).unwrap();
        repair_stage_chain(&mut s, &inst);
        let r = repair_supply_demand(&mut s, &c, &inst, 10);
        // Hour 0 has no ramp reference and reaches 10; then 7, then 4.
        assert_eq!(s.g.row(0).to_vec(), vec![10.0, 7.0, 4.0]);
        assert_eq!(r, vec![0.0, 3.0, 0.0]);
        assert_eq!(check_thermal(&s, &inst).ramp, 0.0);
    }

    #[test]
    fn satisfied_terminal_level_is_untouched() {
        let inst = instance(vec![thermal(0, 0.0, 5.0, 5.0, 0)], vec![reservoir(0)], vec![0.0; 4]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[1.0, -1.0, 2.0, -2.0]];
        s.recompute_levels(&inst);
        let before = s.clone();
        let w = repair_water_terminal(&mut s, &inst);
        assert!(w[0] < 1e-12);
        assert_eq!(s.hg, before.hg);
    }

    #[test]
    fn last_hour_absorbs_small_surplus() {
        // 2.5 pumped at hour 0 leaves +0.2 level; the last hour generates it back.
        let inst = instance(vec![thermal(0, 0.0, 5.0, 5.0, 0)], vec![reservoir(0)], vec![0.0; 4]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[-2.5, 0.0, 0.0, 0.0]];
        s.recompute_levels(&inst);
        let w = repair_water_terminal(&mut s, &inst);
        assert!(w[0] < 1e-12, "{w:?}");
        assert!((s.hg[[0, 3]] - 2.5).abs() < 1e-12);
        assert_eq!(s.hg[[0, 1]], 0.0);
    }

    #[test]
    fn drained_reservoir_is_refilled_from_the_end() {
        // Three hours at full generation drain 0.6; the sweep idles hours
        // 2 and 1 (pumping is ramp-blocked after generation), then hour 0.
        let inst = instance(vec![thermal(0, 0.0, 5.0, 5.0, 0)], vec![reservoir(0)], vec![0.0; 3]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[2.5, 2.5, 2.5]];
        s.recompute_levels(&inst);
        assert!((s.hv[[0, 2]] - 49.4).abs() < 1e-12);
        let w = repair_water_terminal(&mut s, &inst);
        assert!(w[0] < 1e-12, "{w:?}");
        assert!(s.hg.iter().all(|h| h.abs() < 1e-12), "{:?}", s.hg);
    }

    #[test]
    fn capacity_of_later_hours_limits_the_move() {
        // Ceiling at 50.1: refilling at hour 0 would overflow, so the last
        // hour pumps, limited by the ceiling to 0.1 / 0.08 = 1.25.
        let mut p = reservoir(0);
        p.hv_max = 50.1;
        let inst = instance(vec![thermal(0, 0.0, 5.0, 5.0, 0)], vec![p], vec![0.0; 2]);
        let mut s = Schedule::idle(&inst);
        s.hg = array![[0.0, 2.5]];
        s.recompute_levels(&inst);
        let w = repair_water_terminal(&mut s, &inst);
        assert!(w[0] < 1e-12, "{w:?}");
        assert!(s.hv.iter().all(|&h| h <= 50.1 + 1e-12));
        let v = check_hydro(&s, &inst);
        assert_eq!(v.ramp_pump + v.ramp_gen + v.bounds, 0.0);
    }

    #[test]
    fn full_repair_leaves_capacity_gap_as_residual() {
        let inst = instance(
            vec![thermal(0, 1.0, 5.0, 5.0, 0), thermal(1, 1.0, 3.0, 3.0, 0)],
            vec![],
            vec![6.0, 12.0, 6.0],
        );
        let c = chromosome(array![[3.0, 3.0, 3.0], [2.0, 2.0, 2.0]], Array2::zeros((0, 3)), &[0.0, 0.0], 5.0);
        let out = full_repair(&c, &inst, &RepairConfig::default()).unwrap();
        assert!((out.supply_residual[1] + 4.0).abs() < 1e-12);
        assert!(out.supply_residual[0].abs() < 1e-12 && out.supply_residual[2].abs() < 1e-12);
        assert!((out.supply_gap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn full_repair_of_feasible_chromosome_is_identity() {
        let inst = instance(vec![thermal(0, 1.0, 11.0, 11.0, 0)], vec![reservoir(0)], vec![5.0, 7.0, 6.0]);
        let c = chromosome(array![[6.0, 6.0, 6.0]], array![[-1.0, 1.0, 0.0]], &[0.0], 1.0);
        let out = full_repair(&c, &inst, &RepairConfig::default()).unwrap();
        assert_eq!(out.schedule, decode(&c, &inst).unwrap());
        assert!(out.supply_gap() < 1e-12 && out.water_gap() < 1e-12);
    }

    #[test]
    fn balance_first_folds_water_shift_into_supply_residual() {
        let inst = instance(vec![thermal(0, 1.0, 11.0, 11.0, 0)], vec![reservoir(0)], vec![5.0, 5.0]);
        let c = chromosome(array![[5.0, 5.0]], array![[-1.0, 0.0]], &[0.0], 1.0);
        let cfg = RepairConfig { order: RepairOrder::BalanceFirst, ..RepairConfig::default() };
        let out = full_repair(&c, &inst, &cfg).unwrap();
        assert!(out.water_gap() < 1e-12);
        // Water repair set hour 1 to +1 after balancing; that surplus stays.
        assert!((out.supply_residual[1] - 1.0).abs() < 1e-12, "{:?}", out.supply_residual);

        let water_first = full_repair(&c, &inst, &RepairConfig::default()).unwrap();
        assert!(water_first.supply_gap() < 1e-12);
    }

    #[test]
    fn reencoded_outcome_repairs_to_itself() {
        let inst = instance(
            vec![thermal(0, 1.0, 11.0, 3.0, 2), thermal(1, 2.0, 6.0, 2.0, 1)],
            vec![reservoir(0)],
            vec![8.0, 10.0, 12.0, 9.0, 7.0],
        );
        let c = chromosome(
            array![[4.0, 9.0, -2.0, 8.0, 3.0], [5.0, 1.0, 6.0, 6.0, -3.0]],
            array![[-3.0, 1.0, 2.0, -0.5, 0.7]],
            &[0.3, 0.1],
            2.0,
        );
        let out = full_repair(&c, &inst, &RepairConfig::default()).unwrap();
        let again = full_repair(&encode_from_schedule(&out.schedule, &c, &inst).unwrap(), &inst, &RepairConfig::default())
            .unwrap();
        let diff = (&again.schedule.g - &out.schedule.g).mapv(f64::abs).sum()
            + (&again.schedule.hg - &out.schedule.hg).mapv(f64::abs).sum();
        assert!(diff <= FEASIBILITY_TOL, "{diff}");
        assert_eq!(again.schedule.u, out.schedule.u);
        let v = ViolationReport::evaluate(&out.schedule, &inst);
        assert!(v.repaired_families().iter().all(|(_, x)| *x <= FEASIBILITY_TOL), "{v:?}");
        let _ = Layout::of(&inst);
    }
}
