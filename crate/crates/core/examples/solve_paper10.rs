//! Optimizes the ten-thermal, four-storage instance over one day and prints
//! the hourly dispatch.
//!
//! cargo run --release --example solve_paper10 -- [generations] [seed]

use std::path::Path;

use ucld::cli::prepare_instance;
use ucld::de::{run, DeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let gens = args.next().map_or(Ok(2000), |s| s.parse())?;
    let seed = args.next().map_or(Ok(1), |s| s.parse())?;

    let inst = prepare_instance(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/paper10.inst"), Some(24))?;
    let cfg = DeConfig { population_size: 200, max_generations: gens, seed, ..DeConfig::default() };
    let result = run(&inst, &cfg)?;
    let (s, r) = (&result.schedule, &result.report);

    print!("{:>4} {:>8}", "hour", "demand");
    for i in 0..inst.thermal.len() {
        print!(" {:>6}", format!("G{}", i + 1));
    }
    for j in 0..inst.hydro.len() {
        print!(" {:>6}", format!("H{}", j + 1));
    }
    println!();
    for t in 0..s.steps() {
        print!("{t:>4} {:>8.2}", inst.demand.net_demand[t]);
        for i in 0..inst.thermal.len() {
            if s.u[[i, t]] {
                print!(" {:>6.2}", s.g[[i, t]]);
            } else {
                print!(" {:>6}", "-");
            }
        }
        for j in 0..inst.hydro.len() {
            print!(" {:>6.2}", s.hg[[j, t]]);
        }
        println!();
    }
    println!(
        "\nfuel {:.2}  startup {:.2}  penalty {:.4}  feasible {}  {:.1?}",
        r.fuel_cost,
        r.startup_cost,
        r.penalty(),
        r.feasible,
        result.wall_time
    );
    Ok(())
}
