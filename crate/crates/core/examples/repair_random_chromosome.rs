//! Decodes one random chromosome, repairs it, and shows how each constraint
//! family changes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucld::cli::prepare_instance;
use ucld::constraints::{water_conservation_error, ViolationReport};
use ucld::encoding::{decode, Chromosome, Layout};
use ucld::repair::{full_repair, RepairConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(3), |s| s.parse())?;
    let inst = prepare_instance(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/paper10.inst"), Some(24))?;
    let layout = Layout::of(&inst);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let genes = (0..layout.genome_len()).map(|_| rng.random_range(-10.0..10.0)).collect();
    let c = Chromosome::new(layout, genes)?;

    let before = ViolationReport::evaluate(&decode(&c, &inst)?, &inst);
    let out = full_repair(&c, &inst, &RepairConfig::default())?;
    let after = ViolationReport::evaluate(&out.schedule, &inst);

    println!("{:<22} {:>12} {:>12}", "family", "decoded", "repaired");
    for ((name, b), (_, a)) in before.repaired_families().into_iter().zip(after.repaired_families()) {
        println!("{name:<22} {b:>12.4} {a:>12.2e}");
    }
    println!("{:<22} {:>12} {:>12.4}", "supply gap", "", out.supply_gap());
    println!("{:<22} {:>12} {:>12.4}", "water gap", "", out.water_gap());
    println!("{:<22} {:>12} {:>12.2e}", "conservation", "", water_conservation_error(&out.schedule, &inst));
    println!("repair order {:?}, max change {:.3}", c.repair_order(), c.max_change());
    Ok(())
}
