//! Adaptive synthetic oversampling of the minority (failure) class.
//!
//! Synthetic rows are placed on segments between minority points, with
//! more mass near points whose neighborhoods are dominated by the
//! majority class. Runs on fully numeric matrices (after imputation and
//! categorical encoding) and only ever on training rows.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::SampleId;
use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdasynParams {
    /// Target balance level in (0, 1]: 1.0 aims for a fully balanced set.
    pub beta: f64,
    /// Neighbor count; clipped to minority-1 when the minority class is
    /// smaller than k+1.
    pub k: usize,
    pub seed: u64,
}

impl Default for AdasynParams {
    fn default() -> Self {
        AdasynParams {
            beta: 1.0,
            k: 5,
            seed: 0,
        }
    }
}

impl AdasynParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidArgument("beta must be in (0, 1]".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Indices of the `k` nearest rows to `query` (self excluded), ties broken
/// by index.
fn k_nearest(rows: &[Vec<f64>], candidates: &[usize], query: usize, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .copied()
        .filter(|&i| i != query)
        .map(|i| (squared_distance(&rows[query], &rows[i]), i))
        .collect();
    scored.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scored.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Oversample the minority class (target 1). Original rows come back
/// unchanged, in order, as a prefix; synthetic rows are appended with
/// target 1 and railcar ids prefixed `__synthetic_`.
pub fn adasyn(
    matrix: &FeatureMatrix,
    targets: &[u8],
    params: &AdasynParams,
) -> Result<FeatureMatrix> {
    params.validate()?;
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if targets.len() != matrix.n_rows() {
        return Err(Error::SchemaMismatch(
            "targets do not match matrix rows".into(),
        ));
    }
    if let Some(def) = matrix
        .defs()
        .iter()
        .find(|d| d.kind != FeatureKind::Numeric)
    {
        return Err(Error::SchemaMismatch(format!(
            "feature '{}' is categorical; encode before resampling",
            def.name
        )));
    }

    let minority: Vec<usize> = (0..targets.len()).filter(|&i| targets[i] == 1).collect();
    let majority_count = targets.len() - minority.len();
    if minority.is_empty() || majority_count == 0 {
        return Err(Error::SingleClass);
    }

    let rows: Vec<Vec<f64>> = (0..matrix.n_rows())
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .map(|v| v.as_num().ok_or_else(|| {
                    Error::SchemaMismatch("missing cell in resampling input".into())
                }))
                .collect()
        })
        .collect::<Result<_>>()?;

    let g_total = ((majority_count as f64 - minority.len() as f64) * params.beta).floor();
    if g_total <= 0.0 {
        let mut out = matrix.clone();
        out = out.with_target(targets.to_vec())?;
        return Ok(out);
    }

    // Learning-difficulty weights: fraction of majority points among each
    // minority point's k nearest neighbors in the full dataset.
    let all: Vec<usize> = (0..rows.len()).collect();
    let k_all = params.k.min(rows.len() - 1);
    let ratios: Vec<f64> = minority
        .iter()
        .map(|&i| {
            let neighbors = k_nearest(&rows, &all, i, k_all);
            let majority_neighbors =
                neighbors.iter().filter(|&&j| targets[j] == 0).count();
            majority_neighbors as f64 / k_all as f64
        })
        .collect();
    let ratio_sum: f64 = ratios.iter().sum();
    let normalized: Vec<f64> = if ratio_sum > 0.0 {
        ratios.iter().map(|r| r / ratio_sum).collect()
    } else {
        // Every minority neighborhood is pure; fall back to uniform weights.
        vec![1.0 / minority.len() as f64; minority.len()]
    };

    let k_min = params.k.min(minority.len().saturating_sub(1));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut synthetic_rows: Vec<Vec<Value>> = Vec::new();
    let mut synthetic_ids: Vec<SampleId> = Vec::new();
    for (idx, &i) in minority.iter().enumerate() {
        let count = (normalized[idx] * g_total).round() as usize;
        if count == 0 {
            continue;
        }
        let neighbors = if k_min > 0 {
            k_nearest(&rows, &minority, i, k_min)
        } else {
            Vec::new()
        };
        for _ in 0..count {
            let lambda: f64 = rng.gen();
            let source = if neighbors.is_empty() {
                i // lone minority point: duplicate it
            } else {
                neighbors[rng.gen_range(0..neighbors.len())]
            };
            let row: Vec<Value> = rows[i]
                .iter()
                .zip(&rows[source])
                .map(|(a, b)| Value::Num(a + lambda * (b - a)))
                .collect();
            let seed_id = &matrix.sample_ids()[i];
            synthetic_ids.push(SampleId {
                railcar_id: format!("__synthetic_{}", synthetic_rows.len()),
                component: seed_id.component,
                location: seed_id.location,
            });
            synthetic_rows.push(row);
        }
    }

    let mut ids = matrix.sample_ids().to_vec();
    ids.extend(synthetic_ids);
    let mut all_rows = matrix.rows().to_vec();
    let synthetic_count = synthetic_rows.len();
    all_rows.extend(synthetic_rows);
    let mut target = targets.to_vec();
    target.extend(std::iter::repeat(1).take(synthetic_count));

    FeatureMatrix::new(matrix.defs().to_vec(), ids, all_rows)?.with_target(target)
}

/// True for sample ids created by [`adasyn`].
pub fn is_synthetic(id: &SampleId) -> bool {
    id.railcar_id.starts_with("__synthetic_")
}
