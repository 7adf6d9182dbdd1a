//! Violation measures for every constraint family.
//!
//! All evaluators are pure functions of a schedule and the instance. The
//! pre-horizon state is "every thermal plant committed at its hour-0 output,
//! every hydro plant idle", so hour 0 never pays a startup or breaks a ramp.

use serde::{Deserialize, Serialize};

use crate::encoding::Schedule;
use crate::model::{ProblemInstance, PumpedStoragePlant, ReserveMode, ThermalPlant};

/// Absolute tolerance on power and level quantities.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Supply minus net demand for every hour.
pub fn check_supply_demand(s: &Schedule, inst: &ProblemInstance) -> Vec<f64> {
    (0..s.steps())
        .map(|t| {
            let thermal: f64 = (0..inst.thermal.len())
                .filter(|&i| s.u[[i, t]])
                .map(|i| s.g[[i, t]])
                .sum();
            let hydro: f64 = (0..inst.hydro.len()).map(|j| s.hg[[j, t]]).sum();
            thermal + hydro - inst.demand.net_demand[t]
        })
        .collect()
}

/// Lowest and highest output the committed fleet can reach at hour `t`.
pub fn reserve_envelope(s: &Schedule, inst: &ProblemInstance, t: usize) -> (f64, f64) {
    let mut low = 0.0;
    let mut high = 0.0;
    for (i, p) in inst.thermal.iter().enumerate() {
        if !s.u[[i, t]] {
            continue;
        }
        let (lo, hi) = match inst.reserve_mode {
            ReserveMode::Static => (p.g_min, p.g_max),
            ReserveMode::RampAware => thermal_window(p, s, i, t),
        };
        low += lo;
        high += hi;
    }
    for (j, p) in inst.hydro.iter().enumerate() {
        let (lo, hi) = match inst.reserve_mode {
            ReserveMode::Static => (-p.hp_max, p.hg_max),
            ReserveMode::RampAware => hydro_capability(p, s, inst, j, t),
        };
        low += lo;
        high += hi;
    }
    (low, high)
}

/// Output range of a committed thermal plant at `t` given bounds and the
/// ramp from the previous committed hour.
pub fn thermal_window(p: &ThermalPlant, s: &Schedule, i: usize, t: usize) -> (f64, f64) {
    if t > 0 && s.u[[i, t - 1]] {
        let prev = s.g[[i, t - 1]];
        ((prev - p.ramp_down).max(p.g_min), (prev + p.ramp_up).min(p.g_max))
    } else {
        (p.g_min, p.g_max)
    }
}

fn hydro_capability(
    p: &PumpedStoragePlant,
    s: &Schedule,
    inst: &ProblemInstance,
    j: usize,
    t: usize,
) -> (f64, f64) {
    let prev_hg = if t == 0 { 0.0 } else { s.hg[[j, t - 1]] };
    let level = s.level_before(inst, j, t);
    let k = p.level_per_output();
    let hi = p.hg_max.min(prev_hg + p.ramp_gen_up).min((level - p.hv_min) / k);
    let lo = (-p.hp_max).max(prev_hg - p.ramp_pump_down).max(-(p.hv_max - level) / k);
    (lo.min(0.0), hi.max(0.0))
}

/// Reserve slacks `(S1, S2)` per hour; the reserve holds at `t` iff both
/// are `<= 0`.
pub fn check_spinning_reserve(s: &Schedule, inst: &ProblemInstance) -> Vec<(f64, f64)> {
    (0..s.steps())
        .map(|t| {
            let (low, high) = reserve_envelope(s, inst, t);
            let net = inst.demand.net_demand[t];
            let s1 = low - (1.0 - inst.demand.alpha[t]) * net;
            let s2 = (1.0 + inst.demand.beta[t]) * net - high;
            (s1, s2)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThermalViolations {
    pub bounds: f64,
    pub ramp: f64,
    pub mdt: f64,
}

/// Output bounds, ramps between committed hours, and minimum downtime.
///
/// The downtime measure counts committed hours that follow an off-block
/// shorter than the plant's minimum downtime.
pub fn check_thermal(s: &Schedule, inst: &ProblemInstance) -> ThermalViolations {
    let mut v = ThermalViolations::default();
    for (i, p) in inst.thermal.iter().enumerate() {
        let mut off_run = 0u32;
        for t in 0..s.steps() {
            let g = s.g[[i, t]];
            if !s.u[[i, t]] {
                v.bounds += g.abs();
                off_run += 1;
                continue;
            }
            v.bounds += (p.g_min - g).max(0.0) + (g - p.g_max).max(0.0);
            if t > 0 && s.u[[i, t - 1]] {
                let delta = g - s.g[[i, t - 1]];
                v.ramp += (delta - p.ramp_up).max(0.0) + (-delta - p.ramp_down).max(0.0);
            }
            if off_run > 0 && off_run < p.mdt {
                v.mdt += 1.0;
            }
            off_run = 0;
        }
    }
    v
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HydroViolations {
    pub bounds: f64,
    pub ramp_gen: f64,
    pub ramp_pump: f64,
    pub capacity: f64,
    pub terminal: f64,
}

/// Hydro output bounds by mode, mode ramps, reservoir limits and the
/// terminal level (`|hv[T_f] - hv_initial|`, in level units).
///
/// Uses the levels stored in the schedule.
pub fn check_hydro(s: &Schedule, inst: &ProblemInstance) -> HydroViolations {
    let mut v = HydroViolations::default();
    let steps = s.steps();
    for (j, p) in inst.hydro.iter().enumerate() {
        for t in 0..steps {
            let hg = s.hg[[j, t]];
            let prev = if t == 0 { 0.0 } else { s.hg[[j, t - 1]] };
            if hg > 0.0 {
                v.bounds += (p.hg_min - hg).max(0.0) + (hg - p.hg_max).max(0.0);
                v.ramp_gen += (hg - prev - p.ramp_gen_up).max(0.0);
            } else if hg < 0.0 {
                v.bounds += (p.hp_min + hg).max(0.0) + (-hg - p.hp_max).max(0.0);
                v.ramp_pump += (prev - hg - p.ramp_pump_down).max(0.0);
            }
            let hv = s.hv[[j, t]];
            v.capacity += (hv - p.hv_max).max(0.0) + (p.hv_min - hv).max(0.0);
        }
        if steps > 0 {
            v.terminal += (s.hv[[j, steps - 1]] - p.hv_initial).abs();
        }
    }
    v
}

/// Largest deviation from `eps * hv[t] - eps * hv[t-1] + eta * hg[t] = 0`.
pub fn water_conservation_error(s: &Schedule, inst: &ProblemInstance) -> f64 {
    let mut worst = 0.0f64;
    for (j, p) in inst.hydro.iter().enumerate() {
        for t in 0..s.steps() {
            let prev = s.level_before(inst, j, t);
            let r = p.epsilon * s.hv[[j, t]] - p.epsilon * prev + p.eta * s.hg[[j, t]];
            worst = worst.max(r.abs());
        }
    }
    worst
}

/// Per-family violation magnitudes of one schedule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub supply_demand: f64,
    pub reserve_low: f64,
    pub reserve_high: f64,
    pub thermal_bounds: f64,
    pub thermal_ramp: f64,
    pub mdt: f64,
    pub pump_bounds: f64,
    pub pump_ramp_gen: f64,
    pub pump_ramp_pump: f64,
    pub water_capacity: f64,
    pub water_terminal: f64,
}

impl ViolationReport {
    pub fn evaluate(s: &Schedule, inst: &ProblemInstance) -> Self {
        let th = check_thermal(s, inst);
        let hy = check_hydro(s, inst);
        let (reserve_low, reserve_high) = check_spinning_reserve(s, inst)
            .into_iter()
            .fold((0.0, 0.0), |(a, b), (s1, s2)| (a + s1.max(0.0), b + s2.max(0.0)));
        Self {
            supply_demand: check_supply_demand(s, inst).iter().map(|r| r.abs()).sum(),
            reserve_low,
            reserve_high,
            thermal_bounds: th.bounds,
            thermal_ramp: th.ramp,
            mdt: th.mdt,
            pump_bounds: hy.bounds,
            pump_ramp_gen: hy.ramp_gen,
            pump_ramp_pump: hy.ramp_pump,
            water_capacity: hy.capacity,
            water_terminal: hy.terminal,
        }
    }

    /// The families removed by repair stages 1-8 (stages 4 and 5 share
    /// `pump_bounds`).
    pub fn repaired_families(&self) -> [(&'static str, f64); 7] {
        [
            ("thermal_ramp", self.thermal_ramp),
            ("thermal_bounds", self.thermal_bounds),
            ("mdt", self.mdt),
            ("pump_bounds", self.pump_bounds),
            ("pump_ramp_gen", self.pump_ramp_gen),
            ("pump_ramp_pump", self.pump_ramp_pump),
            ("water_capacity", self.water_capacity),
        ]
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        [
            self.supply_demand,
            self.reserve_low,
            self.reserve_high,
            self.thermal_bounds,
            self.thermal_ramp,
            self.mdt,
            self.pump_bounds,
            self.pump_ramp_gen,
            self.pump_ramp_pump,
            self.water_capacity,
            self.water_terminal,
        ]
        .iter()
        .all(|&v| v <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DemandProfile;
    use ndarray::Array2;

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

    fn table_iv(id: usize) -> PumpedStoragePlant {
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

    fn instance(
        thermal: Vec<ThermalPlant>,
        hydro: Vec<PumpedStoragePlant>,
        net: Vec<f64>,
        margin: f64,
    ) -> ProblemInstance {
        ProblemInstance::new("t", thermal, hydro, DemandProfile::with_margins(net, margin, margin)).unwrap()
    }

    fn with_thermal(inst: &ProblemInstance, rows: &[&[f64]]) -> Schedule {
        let mut s = Schedule::idle(inst);
        for (i, row) in rows.iter().enumerate() {
            for (t, &g) in row.iter().enumerate() {
                if g > 0.0 {
                    s.u[[i, t]] = true;
                    s.g[[i, t]] = g;
                }
            }
        }
        s
    }

    #[test]
    fn balance_residual_sums_thermal_and_hydro() {
        let inst = instance(vec![thermal(0, 0.0, 11.0, 11.0, 0)], vec![], vec![5.0], 0.0);
        assert_eq!(check_supply_demand(&with_thermal(&inst, &[&[5.0]]), &inst), vec![0.0]);

        let inst = instance(vec![thermal(0, 0.0, 11.0, 11.0, 0)], vec![table_iv(0)], vec![5.0], 0.0);
        let mut s = with_thermal(&inst, &[&[5.0]]);
        s.hg[[0, 0]] = -2.0;
        assert_eq!(check_supply_demand(&s, &inst), vec![-2.0]);

        let inst = instance(vec![thermal(0, 0.0, 11.0, 11.0, 0)], vec![], vec![0.0], 0.0);
        assert_eq!(check_supply_demand(&Schedule::idle(&inst), &inst), vec![0.0]);
    }

    #[test]
    fn reserve_slacks() {
        // Committed capacity equal to net demand with zero margins.
        let inst = instance(vec![thermal(0, 0.0, 8.0, 8.0, 0)], vec![], vec![8.0], 0.0);
        let (s1, s2) = check_spinning_reserve(&with_thermal(&inst, &[&[8.0]]), &inst)[0];
        assert!(s1 <= 0.0);
        assert_eq!(s2, 0.0);

        // Nothing committed: S2 = 1.05 * 10.
        let inst = instance(vec![thermal(0, 0.0, 8.0, 8.0, 0)], vec![], vec![10.0], 0.05);
        let (_, s2) = check_spinning_reserve(&Schedule::idle(&inst), &inst)[0];
        assert!((s2 - 10.5).abs() < 1e-12);

        // Must-run plant above net demand: S1 = 11 - 10.
        let mut inst = instance(vec![thermal(0, 11.0, 11.0, 11.0, 0)], vec![], vec![10.0], 0.0);
        inst.demand.beta = vec![0.05];
        let (s1, _) = check_spinning_reserve(&with_thermal(&inst, &[&[11.0]]), &inst)[0];
        assert!((s1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pumping_capability_covers_negative_net_demand() {
        let inst = instance(vec![thermal(0, 1.0, 5.0, 5.0, 0)], vec![table_iv(0)], vec![-2.0], 0.05);
        let (s1, s2) = check_spinning_reserve(&Schedule::idle(&inst), &inst)[0];
        assert!((s1 - (-2.5 + 0.95 * 2.0)).abs() < 1e-12);
        assert!(s2 < 0.0);
    }

    #[test]
    fn feasible_thermal_schedule_has_no_violation() {
        let inst = instance(vec![thermal(0, 1.0, 11.0, 4.0, 2)], vec![], vec![0.0; 6], 0.0);
        let s = with_thermal(&inst, &[&[5.0, 8.0, 0.0, 0.0, 3.0, 6.0]]);
        assert_eq!(check_thermal(&s, &inst), ThermalViolations::default());
    }

    #[test]
    fn short_off_block_breaks_minimum_downtime() {
        // Generator 1 of the bundled data: minimum downtime 10 h.
        let inst = instance(vec![thermal(0, 11.0, 11.0, 11.0, 10)], vec![], vec![0.0; 4], 0.0);
        let s = with_thermal(&inst, &[&[0.0, 0.0, 0.0, 11.0]]);
        assert!(check_thermal(&s, &inst).mdt >= 1.0);
    }

    #[test]
    fn ramp_excess_is_measured() {
        let inst = instance(vec![thermal(0, 0.0, 11.0, 4.0, 0)], vec![], vec![0.0; 2], 0.0);
        let mut s = Schedule::idle(&inst);
        s.u.fill(true);
        s.g[[0, 1]] = 11.0;
        assert_eq!(check_thermal(&s, &inst).ramp, 7.0);
    }

    #[test]
    fn idle_hydro_is_feasible() {
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![table_iv(0)], vec![0.0; 24], 0.0);
        assert_eq!(check_hydro(&Schedule::idle(&inst), &inst), HydroViolations::default());
    }

    #[test]
    fn sustained_pumping_overflows_reservoir() {
        // 50 + 0.2 per hour reaches 100 after 250 h of full pumping.
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![table_iv(0)], vec![0.0; 300], 0.0);
        let mut s = Schedule::idle(&inst);
        s.hg.fill(-2.5);
        s.recompute_levels(&inst);
        let v = check_hydro(&s, &inst);
        assert!(v.capacity > 0.0);
        assert_eq!(v.bounds + v.ramp_gen + v.ramp_pump, 0.0);
    }

    #[test]
    fn unpaid_generation_leaves_terminal_gap() {
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![table_iv(0)], vec![0.0; 4], 0.0);
        let mut s = Schedule::idle(&inst);
        s.hg[[0, 1]] = 2.5;
        s.recompute_levels(&inst);
        assert!((check_hydro(&s, &inst).terminal - 0.2).abs() < 1e-12);
        assert!(water_conservation_error(&s, &inst) < 1e-12);
    }

    #[test]
    fn hydro_ramp_and_bounds_by_sign() {
        let mut p = table_iv(0);
        p.hg_min = 0.5;
        p.ramp_gen_up = 1.0;
        p.ramp_pump_down = 1.0;
        let inst = instance(vec![thermal(0, 0.0, 1.0, 1.0, 0)], vec![p], vec![0.0; 3], 0.0);
        let mut s = Schedule::idle(&inst);
        s.hg = Array2::from_shape_vec((1, 3), vec![0.2, -2.0, 2.0]).unwrap();
        s.recompute_levels(&inst);
        let v = check_hydro(&s, &inst);
        assert!((v.bounds - 0.3).abs() < 1e-12);
        // -2.0 after +0.2: pumping jump 2.2 vs 1.0; +2.0 after -2.0: jump 4.0 vs 1.0.
        assert!((v.ramp_pump - 1.2).abs() < 1e-12);
        assert!((v.ramp_gen - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ramp_aware_envelope_is_tighter() {
        let mut inst = instance(vec![thermal(0, 1.0, 11.0, 2.0, 0)], vec![table_iv(0)], vec![5.0; 2], 0.0);
        let s = with_thermal(&inst, &[&[5.0, 5.0]]);
        let static_env = reserve_envelope(&s, &inst, 1);
        inst.reserve_mode = ReserveMode::RampAware;
        let aware = reserve_envelope(&s, &inst, 1);
        assert_eq!(static_env, (1.0 - 2.5, 11.0 + 2.5));
        assert_eq!(aware, (3.0 - 2.5, 7.0 + 2.5));
    }
}
