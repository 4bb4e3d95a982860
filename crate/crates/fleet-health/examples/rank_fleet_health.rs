//! Aggregate per-component failure probabilities into health rates and
//! rank a small fleet, sickest first.
//!
//! Run with: cargo run --example rank_fleet_health

use anyhow::Result;
use fleet_health::health::{health_score, rank_fleet, ComponentWeights};

fn main() -> Result<()> {
    // Expert-style criticality weights for four components; they get
    // normalized to sum 1.
    let weights = ComponentWeights::new(vec![4.0, 3.0, 2.0, 1.0])?;
    println!("normalized weights: {:?}", weights.as_slice());

    let fleet: Vec<(&str, Vec<Option<f64>>)> = vec![
        ("RC0001", vec![Some(0.10), Some(0.05), Some(0.20), Some(0.01)]),
        ("RC0002", vec![Some(0.85), Some(0.40), Some(0.30), Some(0.25)]),
        ("RC0003", vec![Some(0.05), Some(0.02), Some(0.01), Some(0.02)]),
        // This car does not carry component #4 at all.
        ("RC0004", vec![Some(0.45), Some(0.55), Some(0.35), None]),
        ("RC0005", vec![Some(0.30), Some(0.30), Some(0.30), Some(0.30)]),
    ];

    let mut scored = Vec::new();
    for (car, probs) in fleet {
        let score = health_score(&weights, &probs)?;
        scored.push((car.to_string(), probs, score));
    }
    let ranked = rank_fleet(scored)?;

    println!("maintenance priority:");
    for row in &ranked {
        println!(
            "  #{} {} health rate {:.3}",
            row.rank, row.railcar_id, row.score
        );
    }
    Ok(())
}
