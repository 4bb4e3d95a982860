//! Cluster a small mixed-type dataset with the operational-set DBSCAN and
//! fill its missing cells from the cluster medians/modes.
//!
//! Run with: cargo run --example cluster_and_impute

use anyhow::Result;
use fleet_health::data::{ComponentId, SampleId};
use fleet_health::dbscan::{cluster, impute, DbscanParams, GowerMetric, Label};
use fleet_health::matrix::{FeatureDef, FeatureMatrix, Value};

fn main() -> Result<()> {
    // Two obvious service profiles: young/lightly-used vs old/heavily-used,
    // with a few holes punched into the cells.
    let defs = vec![
        FeatureDef::numeric("component_age", Some("days")),
        FeatureDef::numeric("car_mileage", Some("miles")),
        FeatureDef::categorical("condition_code"),
    ];
    let raw: Vec<(Option<f64>, Option<f64>, Option<&str>)> = vec![
        (Some(200.0), Some(40_000.0), Some("new")),
        (Some(260.0), Some(48_000.0), Some("new")),
        (Some(230.0), None, Some("new")),
        (Some(310.0), Some(52_000.0), None),
        (Some(2_600.0), Some(390_000.0), Some("refurbished")),
        (Some(2_800.0), Some(410_000.0), Some("refurbished")),
        (None, Some(405_000.0), Some("refurbished")),
        (Some(2_500.0), Some(385_000.0), None),
        // A stray row far from both groups.
        (Some(1_200.0), Some(150_000.0), Some("new")),
    ];
    let rows = raw
        .iter()
        .map(|(age, miles, condition)| {
            vec![
                age.map_or(Value::Missing, Value::Num),
                miles.map_or(Value::Missing, Value::Num),
                condition.map_or(Value::Missing, |c| Value::Cat(c.to_string())),
            ]
        })
        .collect();
    let ids = (0..raw.len())
        .map(|i| SampleId {
            railcar_id: format!("RC{:03}", i + 1),
            component: ComponentId(1),
            location: 1,
        })
        .collect();
    let matrix = FeatureMatrix::new(defs, ids, rows)?;

    let metric = GowerMetric::fit(&matrix);
    println!(
        "gower(row0, row1) = {:.3}, gower(row0, row4) = {:.3}",
        metric.distance(matrix.row(0), matrix.row(1)).value,
        metric.distance(matrix.row(0), matrix.row(4)).value,
    );

    let params = DbscanParams {
        eps: 0.12,
        min_points: 3,
        n_factor: 3.0,
        seed: 1,
    };
    let assignment = cluster(&matrix, &params)?;
    println!(
        "{} clusters, {} noise rows",
        assignment.cluster_count,
        assignment.noise_count()
    );
    for (i, label) in assignment.labels.iter().enumerate() {
        let text = match label {
            Label::Cluster(k) => format!("cluster {k}"),
            Label::Noise => "noise".to_string(),
        };
        println!("  {} -> {text}", matrix.sample_ids()[i]);
    }

    let filled = impute(&matrix, &assignment)?;
    println!("after imputation, missing cells: {}", filled.has_missing());
    for i in [2usize, 3, 6, 7] {
        let cells: Vec<String> = filled.row(i).iter().map(|v| v.to_string()).collect();
        println!("  row {i}: [{}]", cells.join(", "));
    }
    Ok(())
}
