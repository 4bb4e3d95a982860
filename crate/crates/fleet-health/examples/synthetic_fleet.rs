//! Generate a synthetic railcar fleet with a planted degradation signal
//! and poke at the emitted record files.
//!
//! Run with: cargo run --example synthetic_fleet

use anyhow::Result;
use fleet_health::data::ComponentId;
use fleet_health::synth::{generate, SynthConfig};

fn main() -> Result<()> {
    let cfg = SynthConfig {
        n_cars: 300,
        seed: 42,
        ..Default::default()
    };
    let output = generate(&cfg)?;

    println!("fleet of {} cars, {} events", output.cars.len(), output.events.len());
    let trips: usize = output.cars.iter().map(|c| c.trips.len()).sum();
    println!("trip log rows: {trips}");

    for component in 1..=cfg.components {
        let rows: Vec<_> = output
            .truth
            .iter()
            .filter(|t| t.sample.component == ComponentId(component))
            .collect();
        let failures = rows.iter().filter(|t| t.y == 1).count();
        let mean_q: f64 = rows.iter().map(|t| t.q).sum::<f64>() / rows.len() as f64;
        println!(
            "component #{component}: {failures}/{} samples fail in the horizon (mean latent q {mean_q:.3})",
            rows.len()
        );
    }

    let dir = std::env::temp_dir().join("fleet-health-example-synth");
    output.write_csvs(&dir)?;
    println!("CSVs written under {}", dir.display());
    Ok(())
}
