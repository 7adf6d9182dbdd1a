//! Prints a week of synthetic net demand as a coarse text chart.

use ucld::model::synth_demand;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(7), |s| s.parse())?;
    let d = synth_demand(7, 60.0, 30.0, seed)?;
    let lo = d.net_demand.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = d.net_demand.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (t, &x) in d.net_demand.iter().enumerate() {
        let width = ((x - lo) / (hi - lo) * 60.0).round() as usize;
        println!("{t:>4} {x:>7.2} {}", "#".repeat(width));
    }
    let mean = d.net_demand.iter().sum::<f64>() / d.steps() as f64;
    println!("min {lo:.2}  max {hi:.2}  mean {mean:.2}");
    Ok(())
}
