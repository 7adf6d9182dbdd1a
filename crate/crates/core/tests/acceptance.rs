//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucld::cli::prepare_instance;
use ucld::constraints::{water_conservation_error, ViolationReport, FEASIBILITY_TOL};
use ucld::de::{self, DeConfig, RunResult};
use ucld::encoding::{Chromosome, Layout, Schedule};
use ucld::model::{DemandProfile, ProblemInstance, ThermalPlant};
use ucld::oracle::{brute_force_grid, dispatch_qp, enumerate_uc, grid_points};
use ucld::repair::{full_repair, RepairConfig};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn load(name: &str, horizon: Option<usize>) -> ProblemInstance {
    prepare_instance(&data(name), horizon).expect("bundled instance loads")
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn config(pop: usize, gens: u64, seed: u64) -> DeConfig {
    DeConfig {
        population_size: pop,
        max_generations: gens,
        seed,
        ..DeConfig::default()
    }
}

fn repair_property(conservation: &mut f64) -> Verdict {
    let inst = load("paper10.inst", None);
    let layout = Layout::of(&inst);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = Instant::now();
    let mut worst = (0.0f64, "");
    for _ in 0..1000 {
        let genes = (0..layout.genome_len()).map(|_| rng.random_range(-10.0..10.0)).collect();
        let c = Chromosome::new(layout, genes).unwrap();
        let out = full_repair(&c, &inst, &RepairConfig::default()).unwrap();
        for (name, v) in ViolationReport::evaluate(&out.schedule, &inst).repaired_families() {
            if v > worst.0 {
                worst = (v, name);
            }
        }
        *conservation = conservation.max(water_conservation_error(&out.schedule, &inst));
    }
    let elapsed = started.elapsed();
    verdict(
        worst.0 <= FEASIBILITY_TOL && elapsed < Duration::from_secs(60),
        format!("{} h, worst violation {:.2e} {}, {elapsed:.1?}", inst.steps(), worst.0, worst.1),
    )
}

fn oracle_equivalence() -> Verdict {
    let inst = load("two_thermal.inst", None);
    let started = Instant::now();
    let opt = enumerate_uc(&inst, 6, 1 << 24).unwrap().cost;
    let hits = (1..=5)
        .filter(|&seed| {
            let r = de::run(&inst, &config(50, 2000, seed)).unwrap().report;
            r.feasible && (r.cost() - opt) / opt <= 0.01
        })
        .count();
    let elapsed = started.elapsed();
    verdict(
        hits >= 4 && elapsed < Duration::from_secs(120),
        format!("optimum {opt:.4}, {hits}/5 seeds within 1%, {elapsed:.1?}"),
    )
}

fn hydro_value() -> Verdict {
    let inst = load("tiny_hydro.inst", None);
    let step = 0.5;
    let grid = brute_force_grid(&inst, 4, step, 1 << 24).unwrap();
    let resolution = step * inst.thermal.iter().map(|p| p.marginal_cost(p.g_max)).fold(0.0, f64::max);
    let run = de::run(&inst, &config(50, 2000, 1)).unwrap();
    let cost = run.report.cost();
    let pumps = run.schedule.hg[[0, 1]] < 0.0;
    verdict(
        run.report.feasible && (cost - grid.cost).abs() <= resolution && pumps,
        format!(
            "DE {cost:.4} vs grid {:.4} (resolution {resolution}), hour 1 hydro {:.3}",
            grid.cost,
            run.schedule.hg[[0, 1]]
        ),
    )
}

fn scaled_full_problem(runs: &mut Vec<RunResult>) -> Verdict {
    let inst = load("paper10.inst", Some(24));
    let started = Instant::now();
    for seed in 1..=10 {
        runs.push(de::run(&inst, &config(200, 5000, seed)).unwrap());
    }
    let elapsed = started.elapsed();
    let feasible = runs.iter().filter(|r| r.report.feasible).count();
    verdict(
        feasible >= 2 && elapsed < Duration::from_secs(15 * 60),
        format!("{feasible}/10 feasible, {elapsed:.1?}"),
    )
}

fn frozen_penalty() -> Verdict {
    let inst = load("paper10.inst", Some(24));
    let mut rises = 0;
    for seed in 1..=3 {
        let mut cfg = config(50, 500, seed);
        cfg.penalty.step = 0.0;
        let trace = de::run(&inst, &cfg).unwrap().trace;
        rises += trace.windows(2).filter(|w| w[1].best_total > w[0].best_total).count();
    }
    verdict(rises == 0, format!("{rises} increases over 3 x 500 generations"))
}

fn random_plant(rng: &mut ChaCha8Rng, id: usize) -> ThermalPlant {
    let g_min = rng.random_range(0.0..20.0);
    let g_max = g_min + rng.random_range(5.0..60.0);
    ThermalPlant {
        id,
        g_min,
        g_max,
        ramp_up: g_max,
        ramp_down: g_max,
        mdt: 0,
        min_uptime: None,
        startup_cost: 0.0,
        cost_a: rng.random_range(0.0..5.0),
        cost_b: rng.random_range(0.5..20.0),
        cost_c: if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.001..0.1) },
    }
}

/// Cheapest split found by walking the first plant over a fine grid; the
/// second plant takes the remainder.
fn grid_dispatch(a: &ThermalPlant, b: &ThermalPlant, demand: f64, step: f64) -> f64 {
    grid_points(a.g_min, a.g_max, step)
        .into_iter()
        .filter_map(|x| {
            let y = demand - x;
            (b.g_min - 1e-12..=b.g_max + 1e-12).contains(&y).then(|| a.fuel_cost(x) + b.fuel_cost(y))
        })
        .fold(f64::INFINITY, f64::min)
}

fn dispatch_kkt() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut kkt, mut cost_excess) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let plants = vec![random_plant(&mut rng, 0), random_plant(&mut rng, 1)];
        let (lo, hi) = (plants[0].g_min + plants[1].g_min, plants[0].g_max + plants[1].g_max);
        let demand = rng.random_range(lo..hi);
        let inst = ProblemInstance::new(
            "dispatch",
            plants.clone(),
            vec![],
            DemandProfile::with_margins(vec![demand], 0.0, 0.0),
        )
        .unwrap();
        let d = dispatch_qp(&inst, &[0, 1], demand).unwrap();

        // Interior plants share one marginal; bound plants sit on the right side of it.
        let tol = 1e-9;
        let (mut floor, mut ceil) = (f64::NEG_INFINITY, f64::INFINITY);
        for (p, &g) in plants.iter().zip(&d.output) {
            let mc = p.marginal_cost(g);
            if g > p.g_min + tol {
                floor = floor.max(mc);
            }
            if g < p.g_max - tol {
                ceil = ceil.min(mc);
            }
        }
        kkt = kkt.max(floor - ceil);

        let step = (plants[0].g_max - plants[0].g_min) / 20_000.0;
        let grid = grid_dispatch(&plants[0], &plants[1], demand, step);
        let resolution = step * plants.iter().map(|p| p.marginal_cost(p.g_max)).fold(0.0, f64::max);
        // Positive when the dispatch is worse than the grid beyond its resolution.
        cost_excess = cost_excess.max(d.cost - grid - 1e-9).max(grid - d.cost - resolution);
    }
    (kkt, cost_excess)
}

fn conservation_and_kkt(conservation: f64, runs: &[RunResult]) -> Verdict {
    let inst = load("paper10.inst", Some(24));
    let conservation = runs
        .iter()
        .map(|r| water_conservation_error(&r.schedule, &inst))
        .fold(conservation, f64::max);
    let (kkt, cost_excess) = dispatch_kkt();
    verdict(
        conservation <= 1e-12 && kkt <= 1e-6 && cost_excess <= 0.0,
        format!("conservation {conservation:.2e}, marginal spread {kkt:.2e}, grid excess {cost_excess:.2e}"),
    )
}

fn solve_files(out: &Path, serial: bool) -> Vec<Vec<u8>> {
    let mut args = vec![
        "solve".to_string(),
        data("paper10.inst").display().to_string(),
        "--horizon=24".into(),
        "--pop=60".into(),
        "--gens=300".into(),
        "--seed=5".into(),
        format!("--out={}", out.display()),
    ];
    if serial {
        args.push("--serial".into());
    }
    let status = Command::new(env!("CARGO_BIN_EXE_ucld")).args(&args).output().unwrap().status;
    assert!(matches!(status.code(), Some(0 | 2)), "solve failed: {status}");
    ["schedule.csv", "report.json"].iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect()
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let serial = solve_files(&dir.path().join("serial"), true);
    let parallel = solve_files(&dir.path().join("parallel"), false);
    let again = solve_files(&dir.path().join("again"), false);
    verdict(
        serial == parallel && parallel == again,
        format!("schedule.csv and report.json identical: {}", serial == parallel && parallel == again),
    )
}

fn at_max_share(s: &Schedule, inst: &ProblemInstance, i: usize) -> f64 {
    let p = &inst.thermal[i];
    let hours = (0..s.steps()).filter(|&t| s.u[[i, t]] && s.g[[i, t]] >= p.g_max - 1e-6).count();
    hours as f64 / s.steps() as f64
}

fn cheap_plants_at_max(runs: &[RunResult]) -> Verdict {
    let inst = load("paper10.inst", Some(24));
    let Some(best) = runs
        .iter()
        .filter(|r| r.report.feasible)
        .min_by(|a, b| a.report.total.total_cmp(&b.report.total))
    else {
        return verdict(false, "no feasible run");
    };
    let shares = [at_max_share(&best.schedule, &inst, 0), at_max_share(&best.schedule, &inst, 1)];
    verdict(
        shares.iter().all(|&s| s >= 0.9),
        format!(
            "best cost {:.2}: generator 1 at max {:.0}%, generator 2 at max {:.0}%",
            best.report.cost(),
            100.0 * shares[0],
            100.0 * shares[1]
        ),
    )
}

fn main() -> ExitCode {
    let mut conservation = 0.0;
    let mut runs = Vec::new();
    let results = [
        ("repair feasibility", repair_property(&mut conservation)),
        ("oracle equivalence", oracle_equivalence()),
        ("hydro value", hydro_value()),
        ("scaled full problem", scaled_full_problem(&mut runs)),
        ("frozen-penalty monotonicity", frozen_penalty()),
        ("conservation and KKT", conservation_and_kkt(conservation, &runs)),
        ("determinism", determinism()),
        ("cheap plants at max", cheap_plants_at_max(&runs)),
    ];
    let mut failed = 0;
    for (k, (name, v)) in results.iter().enumerate() {
        println!("{} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
