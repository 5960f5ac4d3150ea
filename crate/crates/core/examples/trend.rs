//! Runs the synthetic model comparison for a range of seeds.
//!
//! `cargo run --release -p zrfl-core --example trend -- [seeds] [epochs]`

use zrfl_core::trend::{run_trend, TrendConfig, TrendTally};

fn main() -> zrfl_core::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let mut config = TrendConfig::reference();
    if let Some(epochs) = args.get(2).and_then(|s| s.parse().ok()) {
        config.epochs = epochs;
    }
    let mut runs = Vec::new();
    for seed in 0..seeds {
        let run = run_trend(&config, seed)?;
        println!("seed {seed}: raw AP {:.4} ABX {:.4}", run.raw_ap, run.raw_abx);
        for m in &run.models {
            println!(
                "  {:<10} AP {:.4} ABX {:.4} best epoch {:?} ({:.1}s)",
                m.kind.name(),
                m.ap,
                m.abx,
                m.best_epoch,
                m.seconds
            );
        }
        runs.push(run);
    }
    println!("{:?}", TrendTally::from_runs(&runs));
    Ok(())
}
