//! Runs the optimizer on the small bundled instances and compares against
//! exhaustive search.

use std::path::Path;

use ucld::cli::{compare, prepare_instance};
use ucld::de::{run, DeConfig};
use ucld::oracle::{brute_force_grid, enumerate_uc};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");

    let inst = prepare_instance(&dir.join("two_thermal.inst"), None)?;
    let exact = enumerate_uc(&inst, inst.steps(), 1 << 24)?;
    println!("two_thermal: optimum {:.4} after {} nodes", exact.cost, exact.explored);
    for seed in 1..=5 {
        let r = run(&inst, &DeConfig { population_size: 50, max_generations: 2000, seed, ..DeConfig::default() })?;
        println!("  seed {seed}: {}", compare(exact.cost, &r.schedule, &inst, 0.01));
    }

    let inst = prepare_instance(&dir.join("tiny_hydro.inst"), None)?;
    for step in [1.0, 0.5, 0.25] {
        let grid = brute_force_grid(&inst, inst.steps(), step, 1 << 26)?;
        println!(
            "tiny_hydro grid {step}: cost {:.4}, hydro {:?}",
            grid.cost,
            grid.schedule.hg.row(0).to_vec()
        );
    }
    for seed in 1..=3 {
        let r = run(&inst, &DeConfig { population_size: 50, max_generations: 2000, seed, ..DeConfig::default() })?;
        println!(
            "  seed {seed}: cost {:.4}, feasible {}, hydro {:?}",
            r.report.cost(),
            r.report.feasible,
            r.schedule.hg.row(0).iter().map(|x| (x * 1e6).round() / 1e6).collect::<Vec<_>>()
        );
    }
    Ok(())
}
