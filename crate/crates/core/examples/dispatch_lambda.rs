//! Economic dispatch of the ten thermal plants across a range of demands,
//! showing the shared incremental cost.

use std::path::Path;

use ucld::cli::prepare_instance;
use ucld::oracle::dispatch_qp;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = prepare_instance(&Path::new(env!("CARGO_MANIFEST_DIR")).join("data/paper10.inst"), Some(1))?;
    let all: Vec<usize> = (0..inst.thermal.len()).collect();
    let min: f64 = inst.thermal.iter().map(|p| p.g_min).sum();
    let max: f64 = inst.thermal.iter().map(|p| p.g_max).sum();
    for k in 0..=10 {
        let demand = min + (max - min) * k as f64 / 10.0;
        let d = dispatch_qp(&inst, &all, demand)?;
        // Plants strictly inside their bounds all run at the same marginal.
        let lambda = inst
            .thermal
            .iter()
            .zip(&d.output)
            .find(|(p, &g)| g > p.g_min + 1e-9 && g < p.g_max - 1e-9)
            .map_or("-".to_string(), |(p, &g)| format!("{:.3}", p.marginal_cost(g)));
        let outputs: Vec<String> = d.output.iter().map(|g| format!("{g:.1}")).collect();
        println!("demand {demand:>7.2}  cost {:>9.2}  lambda {lambda:>7}  [{}]", d.cost, outputs.join(" "));
    }
    Ok(())
}
