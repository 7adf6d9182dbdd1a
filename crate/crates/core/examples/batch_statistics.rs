//! Repeats a reduced-budget optimization over several seeds and prints the
//! summary table.
//!
//! cargo run --release --example batch_statistics -- [runs] [generations]

use std::path::Path;

use ucld::cli::{batch, prepare_instance};
use ucld::de::DeConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let runs = args.next().map_or(Ok(4), |s| s.parse())?;
    let gens = args.next().map_or(Ok(5000), |s| s.parse())?;
    let inst = prepare_instance(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/paper10.inst"), Some(24))?;
    let cfg = DeConfig { population_size: 200, max_generations: gens, ..DeConfig::default() };
    println!("{}", batch(&inst, &cfg, runs, 1)?);
    Ok(())
}
