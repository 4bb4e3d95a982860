//! Density-based clustering with an operational-set shortcut, plus
//! cluster-based imputation of missing cells.
//!
//! Instead of scanning the whole dataset for every neighborhood query, the
//! clusterer keeps an *operational set* (OP): all points within
//! `n_factor * eps` of a center point. Neighbor scans run inside the OP
//! only; the complement (the *potential set*, PD) is ignored until the OP
//! is re-centered. The OP is rebuilt whenever cluster expansion reaches a
//! point more than `(n_factor - 1) * eps` away from the current center,
//! which guarantees no eps-neighborhood is ever truncated, so the result
//! matches a full-scan DBSCAN exactly (up to label numbering and the
//! deterministic border-point visiting order).
//!
//! Distances are Gower distances over the observed cells, so rows with
//! mixed numeric/categorical features and missing values cluster without
//! any pre-filling. Note: pairwise deletion of missing cells can break the
//! triangle inequality, so the full-scan equivalence is exact on complete
//! data and a close approximation when cells are missing.

use std::cell::Cell;
use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{FeatureDef, FeatureKind, FeatureMatrix, Value};

/// Clustering parameters. `eps` is in Gower-distance units ([0, 1]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_points: usize,
    /// Operational-set radius multiplier: the OP spans `n_factor * eps`.
    pub n_factor: f64,
    /// Seed for the random visiting order (which also picks each center).
    pub seed: u64,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams {
            eps: 0.15,
            min_points: 5,
            n_factor: 3.0,
            seed: 0,
        }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("eps must be > 0".into()));
        }
        if self.min_points < 1 {
            return Err(Error::InvalidArgument("min_points must be >= 1".into()));
        }
        if !(self.n_factor >= 1.0) {
            return Err(Error::InvalidArgument("n_factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-sample cluster label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn is_noise(&self) -> bool {
        matches!(self, Label::Noise)
    }
}

/// Cluster labels for every row of the clustered matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<Label>,
    pub cluster_count: usize,
}

impl ClusterAssignment {
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_noise()).count()
    }
}

/// Result of one Gower distance evaluation. `no_overlap` flags pairs with
/// no mutually observed feature (the distance defaults to 1.0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GowerDistance {
    pub value: f64,
    pub no_overlap: bool,
}

/// Gower distance over a fixed schema, with numeric ranges taken from the
/// dataset it was fitted on. Missing cells are skipped pairwise. Carries
/// an evaluation counter for performance assertions.
#[derive(Debug)]
pub struct GowerMetric {
    defs: Vec<FeatureDef>,
    /// Per-feature (min, max) over observed values; None for categorical
    /// or never-observed columns.
    ranges: Vec<Option<(f64, f64)>>,
    calls: Cell<u64>,
}

impl GowerMetric {
    /// Scan the matrix once to fix numeric ranges.
    pub fn fit(matrix: &FeatureMatrix) -> GowerMetric {
        let mut ranges = vec![None; matrix.n_features()];
        for (j, def) in matrix.defs().iter().enumerate() {
            if def.kind != FeatureKind::Numeric {
                continue;
            }
            let mut bounds: Option<(f64, f64)> = None;
            for row in matrix.rows() {
                if let Value::Num(x) = row[j] {
                    bounds = Some(match bounds {
                        Some((lo, hi)) => (lo.min(x), hi.max(x)),
                        None => (x, x),
                    });
                }
            }
            ranges[j] = bounds;
        }
        GowerMetric {
            defs: matrix.defs().to_vec(),
            ranges,
            calls: Cell::new(0),
        }
    }

    /// Distance in [0, 1]: mean over mutually observed features of the
    /// range-scaled numeric gap or the 0/1 categorical mismatch.
    ///
    /// Panics if the rows do not conform to the fitted schema.
    pub fn distance(&self, a: &[Value], b: &[Value]) -> GowerDistance {
        assert_eq!(a.len(), self.defs.len(), "schema mismatch: row arity");
        assert_eq!(b.len(), self.defs.len(), "schema mismatch: row arity");
        self.calls.set(self.calls.get() + 1);
        let mut total = 0.0;
        let mut observed = 0usize;
        for j in 0..self.defs.len() {
            match (&a[j], &b[j]) {
                (Value::Missing, _) | (_, Value::Missing) => {}
                (Value::Num(x), Value::Num(y)) => {
                    debug_assert_eq!(self.defs[j].kind, FeatureKind::Numeric, "schema mismatch");
                    let (lo, hi) = self.ranges[j].expect("numeric range fitted");
                    let range = hi - lo;
                    if range > 0.0 {
                        total += (x - y).abs() / range;
                    }
                    observed += 1;
                }
                (Value::Cat(x), Value::Cat(y)) => {
                    debug_assert_eq!(
                        self.defs[j].kind,
                        FeatureKind::Categorical,
                        "schema mismatch"
                    );
                    if x != y {
                        total += 1.0;
                    }
                    observed += 1;
                }
                _ => panic!("schema mismatch: numeric and categorical cells in '{}'", self.defs[j].name),
            }
        }
        if observed == 0 {
            GowerDistance {
                value: 1.0,
                no_overlap: true,
            }
        } else {
            GowerDistance {
                value: total / observed as f64,
                no_overlap: false,
            }
        }
    }

    /// Number of distance evaluations since construction or the last reset.
    pub fn distance_calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn reset_distance_calls(&self) {
        self.calls.set(0);
    }
}

/// Split the dataset around center `p_index`: the operational set holds
/// every row within `n_factor * eps` of the center, the potential set is
/// the rest. Both are ascending index lists and partition the dataset.
pub fn build_operational_set(
    metric: &GowerMetric,
    rows: &[Vec<Value>],
    p_index: usize,
    params: &DbscanParams,
) -> (Vec<usize>, Vec<usize>) {
    let size = params.n_factor * params.eps;
    let mut op = Vec::new();
    let mut pd = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        // The center always belongs to its own set; an all-missing row
        // reports the no-overlap fallback distance even to itself.
        if i == p_index || metric.distance(&rows[p_index], row).value <= size {
            op.push(i);
        } else {
            pd.push(i);
        }
    }
    (op, pd)
}

/// Density-based clustering of the matrix rows. Equivalent to a full-scan
/// DBSCAN with the same `eps`/`min_points`; the operational set only
/// changes how neighborhoods are found, never their contents.
pub fn cluster(matrix: &FeatureMatrix, params: &DbscanParams) -> Result<ClusterAssignment> {
    let metric = GowerMetric::fit(matrix);
    cluster_with_metric(matrix, &metric, params)
}

/// [`cluster`] with a caller-supplied metric, so distance evaluations can
/// be counted.
pub fn cluster_with_metric(
    matrix: &FeatureMatrix,
    metric: &GowerMetric,
    params: &DbscanParams,
) -> Result<ClusterAssignment> {
    params.validate()?;
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let rows = matrix.rows();

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    order.shuffle(&mut rng);

    let mut visited = vec![false; n];
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut cluster_count = 0usize;

    // Current operational set, kept in ascending index order.
    let mut op: Vec<usize> = Vec::new();
    let mut op_center: Option<usize> = None;
    let recenter_slack = (params.n_factor - 1.0) * params.eps;

    let rebuild_op = |center: usize, op: &mut Vec<usize>| {
        let size = params.n_factor * params.eps;
        op.clear();
        for i in 0..n {
            if i == center || metric.distance(&rows[center], &rows[i]).value <= size {
                op.push(i);
            }
        }
    };

    // A point's eps-ball is guaranteed to lie inside the OP only while the
    // point stays within (n_factor - 1) * eps of the center; outside that
    // slack the OP must be rebuilt around the point before scanning.
    let ensure_op_covers = |point: usize, op: &mut Vec<usize>, center: &mut Option<usize>| {
        let covered = center
            .map(|c| metric.distance(&rows[point], &rows[c]).value <= recenter_slack)
            .unwrap_or(false);
        if !covered {
            rebuild_op(point, op);
            *center = Some(point);
        }
    };

    let neighbors_in_op = |point: usize, op: &[usize]| -> Vec<usize> {
        op.iter()
            .copied()
            .filter(|&i| metric.distance(&rows[point], &rows[i]).value <= params.eps)
            .collect()
    };

    for &seed_point in &order {
        if visited[seed_point] {
            continue;
        }
        visited[seed_point] = true;
        ensure_op_covers(seed_point, &mut op, &mut op_center);

        let seed_neighbors = neighbors_in_op(seed_point, &op);
        if seed_neighbors.len() < params.min_points {
            continue; // tentative noise; may become a border point later
        }

        let cluster_id = cluster_count;
        cluster_count += 1;
        labels[seed_point] = Some(cluster_id);

        let mut queue: VecDeque<usize> = seed_neighbors
            .into_iter()
            .filter(|&q| q != seed_point)
            .collect();
        while let Some(q) = queue.pop_front() {
            if labels[q].is_none() {
                labels[q] = Some(cluster_id); // noise or fresh point becomes a member
            }
            if visited[q] {
                continue;
            }
            visited[q] = true;
            ensure_op_covers(q, &mut op, &mut op_center);
            let q_neighbors = neighbors_in_op(q, &op);
            if q_neighbors.len() >= params.min_points {
                for x in q_neighbors {
                    if !visited[x] || labels[x].is_none() {
                        queue.push_back(x);
                    }
                }
            }
        }
    }

    let labels = labels
        .into_iter()
        .map(|l| l.map_or(Label::Noise, Label::Cluster))
        .collect();
    Ok(ClusterAssignment {
        labels,
        cluster_count,
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn mode<'a>(counts: &BTreeMap<&'a str, usize>) -> &'a str {
    // BTreeMap iterates keys in order, so on tied counts the
    // lexicographically smallest value wins.
    let mut best: Option<(&str, usize)> = None;
    for (&value, &count) in counts {
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((value, count));
        }
    }
    best.expect("mode of non-empty counts").0
}

/// Fill every missing cell: numeric cells take the median of observed
/// values in the same cluster, categorical cells the mode (ties to the
/// lexicographically smallest value). Noise rows, and clusters with no
/// observed value for a feature, fall back to the global median/mode.
pub fn impute(matrix: &FeatureMatrix, assignment: &ClusterAssignment) -> Result<FeatureMatrix> {
    if assignment.labels.len() != matrix.n_rows() {
        return Err(Error::SchemaMismatch(
            "cluster assignment does not match matrix rows".into(),
        ));
    }
    let n_features = matrix.n_features();
    let mut rows = matrix.rows().to_vec();

    for j in 0..n_features {
        let def = &matrix.defs()[j];
        let needs_fill = rows.iter().any(|r| r[j].is_missing());
        if !needs_fill {
            continue;
        }
        match def.kind {
            FeatureKind::Numeric => {
                let mut global: Vec<f64> = Vec::new();
                let mut per_cluster: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
                for (i, row) in rows.iter().enumerate() {
                    if let Value::Num(x) = row[j] {
                        global.push(x);
                        if let Label::Cluster(c) = assignment.labels[i] {
                            per_cluster.entry(c).or_default().push(x);
                        }
                    }
                }
                if global.is_empty() {
                    return Err(Error::AllMissing(def.name.clone()));
                }
                global.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let global_fill = median(&global);
                let cluster_fill: BTreeMap<usize, f64> = per_cluster
                    .into_iter()
                    .map(|(c, mut v)| {
                        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                        (c, median(&v))
                    })
                    .collect();
                for (i, row) in rows.iter_mut().enumerate() {
                    if row[j].is_missing() {
                        let fill = match assignment.labels[i] {
                            Label::Cluster(c) => {
                                cluster_fill.get(&c).copied().unwrap_or(global_fill)
                            }
                            Label::Noise => global_fill,
                        };
                        row[j] = Value::Num(fill);
                    }
                }
            }
            FeatureKind::Categorical => {
                let mut global: BTreeMap<&str, usize> = BTreeMap::new();
                let mut per_cluster: BTreeMap<usize, BTreeMap<&str, usize>> = BTreeMap::new();
                for (i, row) in matrix.rows().iter().enumerate() {
                    if let Value::Cat(s) = &row[j] {
                        *global.entry(s.as_str()).or_insert(0) += 1;
                        if let Label::Cluster(c) = assignment.labels[i] {
                            *per_cluster
                                .entry(c)
                                .or_default()
                                .entry(s.as_str())
                                .or_insert(0) += 1;
                        }
                    }
                }
                if global.is_empty() {
                    return Err(Error::AllMissing(def.name.clone()));
                }
                let global_fill = mode(&global).to_string();
                let cluster_fill: BTreeMap<usize, String> = per_cluster
                    .iter()
                    .map(|(&c, counts)| (c, mode(counts).to_string()))
                    .collect();
                for (i, row) in rows.iter_mut().enumerate() {
                    if row[j].is_missing() {
                        let fill = match assignment.labels[i] {
                            Label::Cluster(c) => cluster_fill
                                .get(&c)
                                .cloned()
                                .unwrap_or_else(|| global_fill.clone()),
                            Label::Noise => global_fill.clone(),
                        };
                        row[j] = Value::Cat(fill);
                    }
                }
            }
        }
    }

    let mut out = FeatureMatrix::new(
        matrix.defs().to_vec(),
        matrix.sample_ids().to_vec(),
        rows,
    )?;
    if let Some(target) = matrix.target() {
        out = out.with_target(target.to_vec())?;
    }
    Ok(out)
}
