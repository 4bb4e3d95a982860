//! Extract principal components from correlated usage features and append
//! them as new columns.
//!
//! Run with: cargo run --example pca_features

use anyhow::Result;
use fleet_health::data::{ComponentId, SampleId};
use fleet_health::matrix::{FeatureDef, FeatureMatrix, Value};
use fleet_health::pca;
use rand::Rng;
use rand::SeedableRng;

fn main() -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let n = 150;

    // Age and mileage move together (usage), loading pattern is its own
    // axis: two real dimensions hiding in four columns.
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let usage: f64 = rng.gen_range(0.0..1.0);
        let pattern: f64 = rng.gen_range(0.0..1.0);
        let jitter = |rng: &mut rand_chacha::ChaCha8Rng| rng.gen_range(-0.03..0.03);
        rows.push(vec![
            Value::Num(usage * 3000.0 + jitter(&mut rng) * 3000.0),
            Value::Num(usage * 450_000.0 + jitter(&mut rng) * 450_000.0),
            Value::Num(pattern * 40.0 + jitter(&mut rng) * 40.0),
            Value::Num(pattern * 12.0 + jitter(&mut rng) * 12.0),
        ]);
    }
    let defs = vec![
        FeatureDef::numeric("component_age", Some("days")),
        FeatureDef::numeric("car_mileage", Some("miles")),
        FeatureDef::numeric("loading_count", Some("count")),
        FeatureDef::numeric("avg_days_in_service", Some("days")),
    ];
    let ids = (0..n)
        .map(|i| SampleId {
            railcar_id: format!("RC{i:04}"),
            component: ComponentId(1),
            location: 1,
        })
        .collect();
    let matrix = FeatureMatrix::new(defs, ids, rows)?;

    let subset: Vec<String> = matrix.defs().iter().map(|d| d.name.clone()).collect();
    let (model, projected) = pca::fit_project(&matrix, &subset, 2, true)?;

    let total: f64 = model.eigenvalues.iter().sum();
    println!("retained {} components of {}", model.m, subset.len());
    for (k, lambda) in model.eigenvalues.iter().enumerate() {
        println!(
            "  pca_{}: eigenvalue {lambda:.3} ({:.1}% of retained variance)",
            k + 1,
            100.0 * lambda / total
        );
        let loadings: Vec<String> = model.components[k]
            .iter()
            .zip(&subset)
            .map(|(w, name)| format!("{name} {w:+.2}"))
            .collect();
        println!("        loadings: {}", loadings.join(", "));
    }

    let names: Vec<&str> = projected.defs().iter().map(|d| d.name.as_str()).collect();
    println!("projected schema: {names:?}");
    println!("model json:\n{}", model.to_json()?);
    Ok(())
}
