//! Principal component extraction: standardize, covariance, symmetric
//! eigendecomposition (cyclic Jacobi), and projection of the retained
//! components onto new feature columns.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureDef, FeatureMatrix};

/// Off-diagonal magnitude at which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-12;
/// Sweep cap; cyclic Jacobi converges long before this for any plausible
/// feature-subset size.
const JACOBI_MAX_SWEEPS: usize = 100;

/// A fitted projection: per-feature centering/scaling plus the retained
/// orthonormal components, sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `m` component vectors, each of length `feature_subset.len()`.
    pub components: Vec<Vec<f64>>,
    pub feature_subset: Vec<String>,
    pub m: usize,
    /// Columns that were centered but not scaled (and excluded from the
    /// covariance) because they had no variance.
    pub zero_variance: Vec<bool>,
}

impl PcaModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<PcaModel> {
        Ok(serde_json::from_str(json)?)
    }

    /// Standardized value of input column `j` (centered only when the
    /// column had zero variance).
    fn standardized(&self, j: usize, x: f64) -> f64 {
        if self.zero_variance[j] {
            x - self.means[j]
        } else {
            (x - self.means[j]) / self.stds[j]
        }
    }
}

/// Center and scale columns to mean 0 and sample standard deviation 1.
/// Zero-variance columns are centered, left unscaled, and flagged.
///
/// Input and output are column-major. Returns `(B, means, stds, zero_variance)`.
pub fn standardize(
    columns: &[Vec<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<bool>)> {
    if columns.is_empty() || columns[0].is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "sample standard deviation needs at least 2 rows".into(),
        ));
    }
    if columns.iter().any(|c| c.len() != n) {
        return Err(Error::SchemaMismatch("ragged columns".into()));
    }

    let mut out = Vec::with_capacity(columns.len());
    let mut means = Vec::with_capacity(columns.len());
    let mut stds = Vec::with_capacity(columns.len());
    let mut zero_variance = Vec::with_capacity(columns.len());
    for col in columns {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        let degenerate = std == 0.0;
        let scaled: Vec<f64> = if degenerate {
            col.iter().map(|x| x - mean).collect()
        } else {
            col.iter().map(|x| (x - mean) / std).collect()
        };
        out.push(scaled);
        means.push(mean);
        stds.push(std);
        zero_variance.push(degenerate);
    }
    Ok((out, means, stds, zero_variance))
}

/// Sample covariance `B^T B / (n - 1)` of centered column-major data.
pub fn covariance(b: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if b.is_empty() || b[0].is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = b[0].len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "covariance needs at least 2 rows".into(),
        ));
    }
    let d = b.len();
    let mut s = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in i..d {
            let dot: f64 = b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
            let value = dot / (n - 1) as f64;
            s[i][j] = value;
            s[j][i] = value;
        }
    }
    Ok(s)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi
/// rotations. Pairs come back sorted by descending eigenvalue, each
/// eigenvector's largest-magnitude entry made positive.
pub fn eigen_symmetric(s: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = s.len();
    if d == 0 {
        return Err(Error::EmptyDataset);
    }
    for row in s {
        if row.len() != d {
            return Err(Error::SchemaMismatch("matrix is not square".into()));
        }
    }
    for i in 0..d {
        for j in 0..d {
            if (s[i][j] - s[j][i]).abs() > 1e-10 {
                return Err(Error::NotSymmetric);
            }
        }
    }

    let mut a: Vec<Vec<f64>> = s.to_vec();
    let mut v = vec![vec![0.0; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= JACOBI_TOL {
            converged = true;
            break;
        }
        for p in 0..d.saturating_sub(1) {
            for q in (p + 1)..d {
                if a[p][q].abs() <= JACOBI_TOL {
                    continue;
                }
                // Rotation angle that annihilates a[p][q].
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * c;

                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - sn * vkq;
                    v[k][q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        // One last check after the final sweep.
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(a[p][q].abs());
            }
        }
        if off > JACOBI_TOL {
            return Err(Error::NoConvergence(JACOBI_MAX_SWEEPS));
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..d)
        .map(|j| (a[j][j], (0..d).map(|i| v[i][j]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());

    for (_, vector) in pairs.iter_mut() {
        let mut max_idx = 0;
        for (i, value) in vector.iter().enumerate() {
            if value.abs() > vector[max_idx].abs() {
                max_idx = i;
            }
        }
        if vector[max_idx] < 0.0 {
            for value in vector.iter_mut() {
                *value = -*value;
            }
        }
    }

    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok((eigenvalues, eigenvectors))
}

/// Fit a PCA on the named numeric columns and retain the top `m`
/// components.
pub fn fit(matrix: &FeatureMatrix, feature_subset: &[String], m: usize) -> Result<PcaModel> {
    if feature_subset.is_empty() {
        return Err(Error::InvalidArgument("empty PCA feature subset".into()));
    }
    if m < 1 || m > feature_subset.len() {
        return Err(Error::InvalidArgument(format!(
            "m = {m} out of range 1..={}",
            feature_subset.len()
        )));
    }
    let columns: Vec<Vec<f64>> = feature_subset
        .iter()
        .map(|name| matrix.numeric_column(matrix.feature_index(name)?))
        .collect::<Result<_>>()?;
    let (b, means, stds, zero_variance) = standardize(&columns)?;

    let active: Vec<usize> = (0..b.len()).filter(|&j| !zero_variance[j]).collect();
    if m > active.len() {
        return Err(Error::InvalidArgument(format!(
            "m = {m} exceeds the {} informative columns",
            active.len()
        )));
    }
    let active_b: Vec<Vec<f64>> = active.iter().map(|&j| b[j].clone()).collect();
    let s = covariance(&active_b)?;
    let (eigenvalues, eigenvectors) = eigen_symmetric(&s)?;

    // Embed the active-space eigenvectors back into the full subset,
    // zero-weighting degenerate columns.
    let components: Vec<Vec<f64>> = eigenvectors
        .into_iter()
        .take(m)
        .map(|vector| {
            let mut full = vec![0.0; feature_subset.len()];
            for (k, &j) in active.iter().enumerate() {
                full[j] = vector[k];
            }
            full
        })
        .collect();
    let eigenvalues = eigenvalues
        .into_iter()
        .take(m)
        .map(|l| if l < 0.0 { 0.0 } else { l })
        .collect();

    Ok(PcaModel {
        means,
        stds,
        eigenvalues,
        components,
        feature_subset: feature_subset.to_vec(),
        m,
        zero_variance,
    })
}

/// Score columns (`m` of them, row-aligned with the matrix) for a fitted
/// model.
pub fn project(model: &PcaModel, matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    let columns: Vec<Vec<f64>> = model
        .feature_subset
        .iter()
        .map(|name| matrix.numeric_column(matrix.feature_index(name)?))
        .collect::<Result<_>>()?;
    let n = matrix.n_rows();
    let mut scores = vec![vec![0.0; n]; model.m];
    for (k, component) in model.components.iter().enumerate() {
        for i in 0..n {
            let mut dot = 0.0;
            for (j, col) in columns.iter().enumerate() {
                dot += model.standardized(j, col[i]) * component[j];
            }
            scores[k][i] = dot;
        }
    }
    Ok(scores)
}

/// Fit on the subset, append the `m` score columns (`pca_1`..`pca_m`), and
/// keep or drop the source columns.
pub fn fit_project(
    matrix: &FeatureMatrix,
    feature_subset: &[String],
    m: usize,
    keep_originals: bool,
) -> Result<(PcaModel, FeatureMatrix)> {
    let model = fit(matrix, feature_subset, m)?;
    let projected = apply(&model, matrix, keep_originals)?;
    Ok((model, projected))
}

/// Apply a fitted model to a matrix with the same subset columns.
pub fn apply(
    model: &PcaModel,
    matrix: &FeatureMatrix,
    keep_originals: bool,
) -> Result<FeatureMatrix> {
    let scores = project(model, matrix)?;
    let defs = (1..=model.m)
        .map(|k| FeatureDef::numeric(&format!("pca_{k}"), None))
        .collect();
    let appended = matrix.append_numeric_columns(defs, scores)?;
    if keep_originals {
        Ok(appended)
    } else {
        appended.drop_columns(&model.feature_subset)
    }
}
