//! Train a per-component failure classifier on synthetic data and inspect
//! its feature importances.
//!
//! Run with: cargo run --example train_forest

use anyhow::Result;
use fleet_health::data::ComponentId;
use fleet_health::features::{attach_targets, engineer_features, label_targets, split_by_component};
use fleet_health::forest::{fit_forest, ForestParams};
use fleet_health::synth::{generate, SynthConfig};

fn main() -> Result<()> {
    let cfg = SynthConfig {
        n_cars: 400,
        missingness: 0.0,
        seed: 7,
        ..Default::default()
    };
    let fleet = generate(&cfg)?;
    let by_component = split_by_component(&fleet.events);
    let events = &by_component[&ComponentId(1)];
    let matrix = engineer_features(events, &fleet.cars, &cfg.cutoff)?;
    let matrix = attach_targets(matrix, &label_targets(events, &cfg.cutoff))?;
    let targets = matrix.target().unwrap().to_vec();

    let params = ForestParams {
        n_trees: 100,
        seed: 7,
        ..Default::default()
    };
    let model = fit_forest(&matrix, &targets, &params, ComponentId(1))?;

    println!("forest of {} trees on {} samples", params.n_trees, matrix.n_rows());
    let mut ranked: Vec<(&str, f64)> = matrix
        .defs()
        .iter()
        .map(|d| d.name.as_str())
        .zip(model.feature_importances().iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("feature importances:");
    for (name, importance) in &ranked {
        println!("  {importance:.3}  {name}");
    }

    let probs = model.predict_proba(&matrix)?;
    let mean_pos: f64 = probs
        .iter()
        .zip(&targets)
        .filter(|(_, &t)| t == 1)
        .map(|(p, _)| *p)
        .sum::<f64>()
        / targets.iter().filter(|&&t| t == 1).count() as f64;
    let mean_neg: f64 = probs
        .iter()
        .zip(&targets)
        .filter(|(_, &t)| t == 0)
        .map(|(p, _)| *p)
        .sum::<f64>()
        / targets.iter().filter(|&&t| t == 0).count() as f64;
    println!("mean predicted p: failures {mean_pos:.3}, survivors {mean_neg:.3}");
    Ok(())
}
