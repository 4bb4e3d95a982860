//! Rebalance a skewed training set by synthesizing minority rows on
//! minority-to-minority segments.
//!
//! Run with: cargo run --example rebalance_adasyn

use anyhow::Result;
use fleet_health::adasyn::{adasyn, is_synthetic, AdasynParams};
use fleet_health::data::{ComponentId, SampleId};
use fleet_health::matrix::{FeatureDef, FeatureMatrix, Value};
use rand::Rng;
use rand::SeedableRng;

fn main() -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..180 {
        rows.push(vec![
            Value::Num(rng.gen_range(-1.0..1.0)),
            Value::Num(rng.gen_range(-1.0..1.0)),
        ]);
        targets.push(0);
    }
    for _ in 0..20 {
        rows.push(vec![
            Value::Num(rng.gen_range(1.5..2.5)),
            Value::Num(rng.gen_range(1.5..2.5)),
        ]);
        targets.push(1);
    }
    let defs = vec![
        FeatureDef::numeric("x", None),
        FeatureDef::numeric("y", None),
    ];
    let ids = (0..rows.len())
        .map(|i| SampleId {
            railcar_id: format!("RC{i:04}"),
            component: ComponentId(1),
            location: 1,
        })
        .collect();
    let matrix = FeatureMatrix::new(defs, ids, rows)?;

    println!(
        "before: {} majority, {} minority",
        targets.iter().filter(|&&t| t == 0).count(),
        targets.iter().filter(|&&t| t == 1).count()
    );

    let params = AdasynParams {
        beta: 1.0,
        k: 5,
        seed: 5,
    };
    let balanced = adasyn(&matrix, &targets, &params)?;
    let out = balanced.target().unwrap();
    let synthetic = balanced
        .sample_ids()
        .iter()
        .filter(|id| is_synthetic(id))
        .count();
    println!(
        "after:  {} majority, {} minority ({synthetic} synthetic rows appended)",
        out.iter().filter(|&&t| t == 0).count(),
        out.iter().filter(|&&t| t == 1).count()
    );

    println!("first three synthetic rows:");
    for i in matrix.n_rows()..(matrix.n_rows() + 3).min(balanced.n_rows()) {
        let cells: Vec<String> = balanced
            .row(i)
            .iter()
            .map(|v| format!("{:.3}", v.as_num().unwrap()))
            .collect();
        println!("  {} -> [{}]", balanced.sample_ids()[i], cells.join(", "));
    }
    Ok(())
}
