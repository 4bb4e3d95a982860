//! Per-component failure classifier: a random forest of CART trees with
//! Gini splits, plus impurity-based feature importances and a versioned
//! JSON model format.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ComponentId;
use crate::error::{Error, Result};
use crate::matrix::{FeatureDef, FeatureKind, FeatureMatrix, Value};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Minimum training rows (bootstrap multiplicity counted) in any leaf.
    pub min_leaf: usize,
    /// Features sampled per split; defaults to ceil(sqrt(K)).
    pub mtry: Option<usize>,
    /// Train each tree on a bootstrap resample of the rows.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 5,
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidArgument("n_trees must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidArgument("max_depth must be >= 1".into()));
        }
        if self.min_leaf < 1 {
            return Err(Error::InvalidArgument("min_leaf must be >= 1".into()));
        }
        if let Some(mtry) = self.mtry {
            if mtry < 1 || mtry > n_features {
                return Err(Error::InvalidArgument(format!(
                    "mtry = {mtry} out of range 1..={n_features}"
                )));
            }
        }
        Ok(())
    }

    fn effective_mtry(&self, n_features: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features)
    }
}

/// Gini impurity `1 - sum((c_k / n)^2)`; 0 for pure counts, 0.5 at a
/// balanced binary split.
pub fn gini(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("gini of all-zero counts".into()));
    }
    let sum_sq: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * p
        })
        .sum();
    Ok(1.0 - sum_sq)
}

fn gini2(pos: usize, total: usize) -> f64 {
    let p = pos as f64 / total as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Row goes left when `value <= threshold`.
    Numeric { feature: usize, threshold: f64 },
    /// Row goes left when `value == category`.
    Categorical { feature: usize, category: String },
}

impl SplitRule {
    fn feature(&self) -> usize {
        match self {
            SplitRule::Numeric { feature, .. } => *feature,
            SplitRule::Categorical { feature, .. } => *feature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        rule: SplitRule,
        left: usize,
        right: usize,
        left_count: usize,
        right_count: usize,
    },
    Leaf {
        positives: usize,
        total: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

/// Fitted forest for one component, with the probability threshold picked
/// during evaluation and the categories seen per feature at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedComponentModel {
    pub component: ComponentId,
    pub schema: Vec<FeatureDef>,
    pub params: ForestParams,
    pub threshold: f64,
    pub importances: Vec<f64>,
    /// Lexicographically sorted category values per feature (empty for
    /// numeric features).
    pub categories: Vec<Vec<String>>,
    trees: Vec<Tree>,
}

/// Column-oriented training view: numeric values, or category codes into
/// the sorted category table.
enum Column {
    Num(Vec<f64>),
    Cat(Vec<u32>),
}

struct TrainingData {
    columns: Vec<Column>,
    categories: Vec<Vec<String>>,
    targets: Vec<u8>,
}

fn extract_columns(matrix: &FeatureMatrix) -> Result<TrainingData> {
    let n = matrix.n_rows();
    let mut columns = Vec::with_capacity(matrix.n_features());
    let mut categories = Vec::with_capacity(matrix.n_features());
    for (j, def) in matrix.defs().iter().enumerate() {
        match def.kind {
            FeatureKind::Numeric => {
                let col = matrix.numeric_column(j)?;
                columns.push(Column::Num(col));
                categories.push(Vec::new());
            }
            FeatureKind::Categorical => {
                let mut values: Vec<String> = Vec::with_capacity(n);
                for i in 0..n {
                    match matrix.value(i, j) {
                        Value::Cat(s) => values.push(s.clone()),
                        _ => {
                            return Err(Error::SchemaMismatch(format!(
                                "feature '{}' has a missing or numeric cell",
                                def.name
                            )));
                        }
                    }
                }
                let mut cats: Vec<String> = values.clone();
                cats.sort();
                cats.dedup();
                let codes = values
                    .iter()
                    .map(|v| cats.binary_search(v).unwrap() as u32)
                    .collect();
                columns.push(Column::Cat(codes));
                categories.push(cats);
            }
        }
    }
    Ok(TrainingData {
        columns,
        categories,
        targets: Vec::new(),
    })
}

/// Deterministic per-tree seed derivation (splitmix64 of seed and index).
fn tree_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

struct CandidateSplit {
    rule: SplitRule,
    gain: f64,
}

struct TreeBuilder<'a> {
    data: &'a TrainingData,
    params: &'a ForestParams,
    mtry: usize,
    n_root: usize,
    nodes: Vec<Node>,
    importances: Vec<f64>,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let total = rows.len();
        let positives = rows.iter().filter(|&&i| self.data.targets[i] == 1).count();
        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf { positives, total });
            nodes.len() - 1
        };

        if positives == 0 || positives == total || depth >= self.params.max_depth {
            return make_leaf(&mut self.nodes);
        }

        let features = self.sample_features(rng);
        let best = self.best_split(&rows, positives, &features);
        let Some(best) = best else {
            return make_leaf(&mut self.nodes);
        };

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.goes_left(&best.rule, i));
        let left_count = left_rows.len();
        let right_count = right_rows.len();
        self.importances[best.rule.feature()] +=
            best.gain * total as f64 / self.n_root as f64;

        let placeholder = self.nodes.len();
        self.nodes.push(Node::Leaf {
            positives: 0,
            total: 0,
        });
        let left = self.build(left_rows, depth + 1, rng);
        let right = self.build(right_rows, depth + 1, rng);
        self.nodes[placeholder] = Node::Internal {
            rule: best.rule,
            left,
            right,
            left_count,
            right_count,
        };
        placeholder
    }

    /// Distinct feature indices for one split, in ascending order so equal
    /// gains resolve to the lowest feature index.
    fn sample_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let k = self.data.columns.len();
        if self.mtry >= k {
            return (0..k).collect();
        }
        let mut pool: Vec<usize> = (0..k).collect();
        for i in 0..self.mtry {
            let j = rng.gen_range(i..k);
            pool.swap(i, j);
        }
        let mut picked = pool[..self.mtry].to_vec();
        picked.sort_unstable();
        picked
    }

    fn goes_left(&self, rule: &SplitRule, row: usize) -> bool {
        match rule {
            SplitRule::Numeric { feature, threshold } => match &self.data.columns[*feature] {
                Column::Num(values) => values[row] <= *threshold,
                Column::Cat(_) => unreachable!("numeric rule on categorical column"),
            },
            SplitRule::Categorical { feature, category } => {
                match &self.data.columns[*feature] {
                    Column::Cat(codes) => {
                        let cats = &self.data.categories[*feature];
                        cats[codes[row] as usize] == *category
                    }
                    Column::Num(_) => unreachable!("categorical rule on numeric column"),
                }
            }
        }
    }

    fn best_split(
        &self,
        rows: &[usize],
        positives: usize,
        features: &[usize],
    ) -> Option<CandidateSplit> {
        let total = rows.len();
        let parent = gini2(positives, total);
        let min_leaf = self.params.min_leaf;
        let mut best: Option<CandidateSplit> = None;

        let mut consider = |rule: SplitRule, left_pos: usize, left_total: usize| {
            let right_total = total - left_total;
            if left_total < min_leaf || right_total < min_leaf {
                return;
            }
            let right_pos = positives - left_pos;
            let weighted = (left_total as f64 * gini2(left_pos, left_total)
                + right_total as f64 * gini2(right_pos, right_total))
                / total as f64;
            let gain = parent - weighted;
            // Strict improvement keeps the first candidate on ties, and
            // candidates are visited in (feature, threshold/category)
            // order.
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(CandidateSplit { rule, gain });
            }
        };

        for &f in features {
            match &self.data.columns[f] {
                Column::Num(values) => {
                    let mut pairs: Vec<(f64, u8)> = rows
                        .iter()
                        .map(|&i| (values[i], self.data.targets[i]))
                        .collect();
                    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                    let mut left_pos = 0usize;
                    let mut left_total = 0usize;
                    for w in 0..pairs.len() - 1 {
                        left_pos += usize::from(pairs[w].1);
                        left_total += 1;
                        if pairs[w].0 == pairs[w + 1].0 {
                            continue;
                        }
                        let threshold = (pairs[w].0 + pairs[w + 1].0) / 2.0;
                        consider(
                            SplitRule::Numeric {
                                feature: f,
                                threshold,
                            },
                            left_pos,
                            left_total,
                        );
                    }
                }
                Column::Cat(codes) => {
                    let n_cats = self.data.categories[f].len();
                    let mut pos = vec![0usize; n_cats];
                    let mut count = vec![0usize; n_cats];
                    for &i in rows {
                        let c = codes[i] as usize;
                        pos[c] += usize::from(self.data.targets[i]);
                        count[c] += 1;
                    }
                    for c in 0..n_cats {
                        if count[c] == 0 {
                            continue;
                        }
                        consider(
                            SplitRule::Categorical {
                                feature: f,
                                category: self.data.categories[f][c].clone(),
                            },
                            pos[c],
                            count[c],
                        );
                    }
                }
            }
        }
        best
    }
}

/// Fit `n_trees` CART trees on bootstrap resamples, each split searched
/// over a seeded random feature subset. Trees train in parallel with
/// deterministic per-tree seeds.
pub fn fit_forest(
    matrix: &FeatureMatrix,
    targets: &[u8],
    params: &ForestParams,
    component: ComponentId,
) -> Result<TrainedComponentModel> {
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if targets.len() != matrix.n_rows() {
        return Err(Error::SchemaMismatch(
            "targets do not match matrix rows".into(),
        ));
    }
    params.validate(matrix.n_features())?;
    let positives = targets.iter().filter(|&&t| t == 1).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::SingleClass);
    }

    let mut data = extract_columns(matrix)?;
    data.targets = targets.to_vec();
    let n = matrix.n_rows();
    let mtry = params.effective_mtry(matrix.n_features());

    let results: Vec<(Tree, Vec<f64>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, t));
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                data: &data,
                params,
                mtry,
                n_root: rows.len(),
                nodes: Vec::new(),
                importances: vec![0.0; matrix.n_features()],
            };
            builder.build(rows, 0, &mut rng);
            (
                Tree {
                    nodes: builder.nodes,
                },
                builder.importances,
            )
        })
        .collect();

    let mut importances = vec![0.0; matrix.n_features()];
    let mut trees = Vec::with_capacity(params.n_trees);
    for (tree, imp) in results {
        for (acc, x) in importances.iter_mut().zip(&imp) {
            *acc += x;
        }
        trees.push(tree);
    }
    for x in importances.iter_mut() {
        *x /= params.n_trees as f64;
    }
    let sum: f64 = importances.iter().sum();
    if sum > 0.0 {
        for x in importances.iter_mut() {
            *x /= sum;
        }
    }

    Ok(TrainedComponentModel {
        component,
        schema: matrix.defs().to_vec(),
        params: *params,
        threshold: 0.5,
        importances,
        categories: data.categories,
        trees,
    })
}

impl TrainedComponentModel {
    /// Mean over trees of the positive fraction at the reached leaf.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        if matrix.defs() != self.schema.as_slice() {
            return Err(Error::SchemaMismatch(
                "prediction matrix schema differs from the training schema".into(),
            ));
        }
        (0..matrix.n_rows())
            .map(|i| {
                let row = matrix.row(i);
                let mut acc = 0.0;
                for tree in &self.trees {
                    acc += self.tree_proba(tree, row)?;
                }
                Ok(acc / self.trees.len() as f64)
            })
            .collect()
    }

    fn tree_proba(&self, tree: &Tree, row: &[Value]) -> Result<f64> {
        let mut node = 0usize;
        loop {
            match &tree.nodes[node] {
                Node::Leaf { positives, total } => {
                    return Ok(*positives as f64 / *total as f64);
                }
                Node::Internal {
                    rule,
                    left,
                    right,
                    left_count,
                    right_count,
                } => {
                    let go_left = match rule {
                        SplitRule::Numeric { feature, threshold } => {
                            match &row[*feature] {
                                Value::Num(x) => x <= threshold,
                                _ => {
                                    return Err(Error::SchemaMismatch(format!(
                                        "expected numeric value for '{}'",
                                        self.schema[*feature].name
                                    )));
                                }
                            }
                        }
                        SplitRule::Categorical { feature, category } => {
                            match &row[*feature] {
                                Value::Cat(s) => {
                                    if self.categories[*feature].binary_search(s).is_err() {
                                        // Category never seen at fit time:
                                        // follow the branch that held more
                                        // training rows.
                                        left_count >= right_count
                                    } else {
                                        s == category
                                    }
                                }
                                _ => {
                                    return Err(Error::SchemaMismatch(format!(
                                        "expected categorical value for '{}'",
                                        self.schema[*feature].name
                                    )));
                                }
                            }
                        }
                    };
                    node = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Mean decrease in Gini impurity per feature, normalized to sum 1
    /// when any split exists (all zeros otherwise).
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }

    /// False when no tree made any split, in which case the importances
    /// are all zero and unnormalized.
    pub fn has_splits(&self) -> bool {
        self.trees
            .iter()
            .any(|t| t.nodes.iter().any(|n| matches!(n, Node::Internal { .. })))
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidArgument(
                "threshold must be in [0, 1]".into(),
            ));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            version: u32,
            model: &'a TrainedComponentModel,
        }
        Ok(serde_json::to_string_pretty(&Envelope {
            version: MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(json: &str) -> Result<TrainedComponentModel> {
        #[derive(Deserialize)]
        struct Envelope {
            version: u32,
            model: TrainedComponentModel,
        }
        let envelope: Envelope = serde_json::from_str(json)?;
        if envelope.version != MODEL_FORMAT_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported model format version {}",
                envelope.version
            )));
        }
        Ok(envelope.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SampleId;

    fn sid(n: usize) -> SampleId {
        SampleId {
            railcar_id: format!("RC{n:04}"),
            component: ComponentId(1),
            location: 1,
        }
    }

    fn numeric_matrix(points: &[Vec<f64>]) -> FeatureMatrix {
        let d = points[0].len();
        let defs = (0..d)
            .map(|j| FeatureDef::numeric(&format!("x{j}"), None))
            .collect();
        let rows = points
            .iter()
            .map(|p| p.iter().map(|&x| Value::Num(x)).collect())
            .collect();
        FeatureMatrix::new(defs, (0..points.len()).map(sid).collect(), rows).unwrap()
    }

    fn accuracy(model: &TrainedComponentModel, matrix: &FeatureMatrix, targets: &[u8]) -> f64 {
        let probs = model.predict_proba(matrix).unwrap();
        let correct = probs
            .iter()
            .zip(targets)
            .filter(|(p, &t)| (ONE_HALF < **p) == (t == 1))
            .count();
        correct as f64 / targets.len() as f64
    }

    const ONE_HALF: f64 = 0.5;

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[4, 0]).unwrap(), 0.0);
        assert_eq!(gini(&[2, 2]).unwrap(), 0.5);
        assert_eq!(gini(&[3, 1]).unwrap(), 0.375);
        assert!(gini(&[0, 0]).is_err());
    }

    #[test]
    fn separable_pair_fits_perfectly() {
        let matrix = numeric_matrix(&[vec![0.0], vec![1.0]]);
        let targets = vec![0, 1];
        // Seed chosen so the two-row bootstrap draws both rows.
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_leaf: 1,
            mtry: Some(1),
            bootstrap: true,
            seed: 3,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        assert_eq!(accuracy(&model, &matrix, &targets), 1.0);
    }

    #[test]
    fn xor_is_learned_at_depth_two() {
        let matrix = numeric_matrix(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let targets = vec![0, 1, 1, 0];
        let params = ForestParams {
            n_trees: 200,
            max_depth: 2,
            min_leaf: 1,
            mtry: Some(2),
            bootstrap: true,
            seed: 3,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        assert_eq!(accuracy(&model, &matrix, &targets), 1.0);
    }

    #[test]
    fn single_class_targets_error() {
        let matrix = numeric_matrix(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit_forest(&matrix, &[1, 1], &ForestParams::default(), ComponentId(1)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn unrestricted_tree_memorizes_duplicate_free_data() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let points: Vec<Vec<f64>> = (0..64)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let targets: Vec<u8> = (0..64).map(|_| rng.gen_range(0..2u8)).collect();
        let matrix = numeric_matrix(&points);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1000,
            min_leaf: 1,
            mtry: Some(3),
            bootstrap: false,
            seed: 0,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        assert_eq!(accuracy(&model, &matrix, &targets), 1.0);
    }

    #[test]
    fn mean_of_leaf_fractions() {
        // Two stump trees with leaves 0.2 and 0.6 average to 0.4.
        let tree = |p: usize, t: usize| Tree {
            nodes: vec![Node::Leaf {
                positives: p,
                total: t,
            }],
        };
        let model = TrainedComponentModel {
            component: ComponentId(1),
            schema: vec![FeatureDef::numeric("x0", None)],
            params: ForestParams::default(),
            threshold: 0.5,
            importances: vec![0.0],
            categories: vec![Vec::new()],
            trees: vec![tree(1, 5), tree(3, 5)],
        };
        let matrix = numeric_matrix(&[vec![0.0]]);
        let probs = model.predict_proba(&matrix).unwrap();
        assert!((probs[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn pure_training_row_predicts_one_with_single_tree() {
        let matrix = numeric_matrix(&[vec![0.0], vec![10.0], vec![11.0]]);
        let targets = vec![0, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            max_depth: 4,
            min_leaf: 1,
            mtry: Some(1),
            bootstrap: false,
            seed: 0,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let probs = model.predict_proba(&matrix).unwrap();
        assert_eq!(probs[1], 1.0);
        assert_eq!(probs[2], 1.0);
        assert_eq!(probs[0], 0.0);
    }

    #[test]
    fn planted_feature_ranks_first_in_importances() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200;
        let mut points = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let signal: f64 = rng.gen();
            let noise1: f64 = rng.gen();
            let noise2: f64 = rng.gen();
            points.push(vec![noise1, signal, noise2]);
            targets.push(u8::from(signal > 0.5));
        }
        let matrix = numeric_matrix(&points);
        let params = ForestParams {
            n_trees: 30,
            max_depth: 6,
            min_leaf: 2,
            mtry: Some(2),
            bootstrap: true,
            seed: 5,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let imp = model.feature_importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp[1] > imp[0] && imp[1] > imp[2], "importances {imp:?}");
    }

    #[test]
    fn one_split_forest_gives_that_feature_everything() {
        let matrix = numeric_matrix(&[vec![0.0], vec![1.0], vec![0.1], vec![0.9]]);
        let targets = vec![0, 1, 0, 1];
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_leaf: 1,
            mtry: Some(1),
            bootstrap: false,
            seed: 0,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        assert!(model.has_splits());
        assert_eq!(model.feature_importances(), &[1.0]);
    }

    #[test]
    fn duplicated_informative_columns_share_importance_mass() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 300;
        let mut points = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let signal: f64 = rng.gen();
            let noise: f64 = rng.gen();
            // Twin columns mirror a ~0.95-correlated feature pair.
            points.push(vec![signal, signal + rng.gen::<f64>() * 0.02, noise]);
            targets.push(u8::from(signal > 0.5));
        }
        let matrix = numeric_matrix(&points);
        let params = ForestParams {
            n_trees: 40,
            max_depth: 6,
            min_leaf: 2,
            mtry: Some(1),
            bootstrap: true,
            seed: 9,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let imp = model.feature_importances();
        assert!(imp[0] > 0.1 && imp[1] > 0.1, "importances {imp:?}");
        assert!(imp[0] + imp[1] > 0.8, "importances {imp:?}");
    }

    #[test]
    fn fixed_seed_reproduces_the_forest() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let points: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.gen(), rng.gen()])
            .collect();
        let targets: Vec<u8> = points
            .iter()
            .map(|p| u8::from(p[0] + p[1] > 1.0))
            .collect();
        let matrix = numeric_matrix(&points);
        let params = ForestParams {
            n_trees: 16,
            seed: 33,
            ..Default::default()
        };
        let a = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let b = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn categorical_splits_and_unseen_category_routing() {
        let defs = vec![FeatureDef::categorical("condition")];
        let rows = vec![
            vec![Value::Cat("new".into())],
            vec![Value::Cat("new".into())],
            vec![Value::Cat("new".into())],
            vec![Value::Cat("refurbished".into())],
            vec![Value::Cat("refurbished".into())],
        ];
        let matrix = FeatureMatrix::new(defs.clone(), (0..5).map(sid).collect(), rows).unwrap();
        let targets = vec![0, 0, 0, 1, 1];
        let params = ForestParams {
            n_trees: 1,
            max_depth: 2,
            min_leaf: 1,
            mtry: Some(1),
            bootstrap: false,
            seed: 0,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let probe = FeatureMatrix::new(
            defs,
            vec![sid(10), sid(11), sid(12)],
            vec![
                vec![Value::Cat("new".into())],
                vec![Value::Cat("refurbished".into())],
                vec![Value::Cat("rebuilt".into())], // unseen
            ],
        )
        .unwrap();
        let probs = model.predict_proba(&probe).unwrap();
        assert_eq!(probs[0], 0.0);
        assert_eq!(probs[1], 1.0);
        // Unseen category follows the larger branch ("new" held 3 of 5 rows).
        assert_eq!(probs[2], 0.0);
    }

    #[test]
    fn schema_mismatch_is_rejected_at_predict_time() {
        let matrix = numeric_matrix(&[vec![0.0], vec![1.0], vec![0.2], vec![0.8]]);
        let targets = vec![0, 1, 0, 1];
        let params = ForestParams {
            n_trees: 1,
            min_leaf: 1,
            ..Default::default()
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let other = FeatureMatrix::new(
            vec![FeatureDef::numeric("different", None)],
            vec![sid(0)],
            vec![vec![Value::Num(0.0)]],
        )
        .unwrap();
        assert!(model.predict_proba(&other).is_err());
    }

    #[test]
    fn json_round_trip_preserves_the_model() {
        let matrix = numeric_matrix(&[vec![0.0], vec![1.0], vec![0.2], vec![0.8]]);
        let targets = vec![0, 1, 0, 1];
        let params = ForestParams {
            n_trees: 3,
            min_leaf: 1,
            ..Default::default()
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1))
            .unwrap()
            .with_threshold(0.35)
            .unwrap();
        let back = TrainedComponentModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn probabilities_stay_in_unit_interval_and_track_the_hazard() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 400;
        let mut points = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        for _ in 0..n {
            let age: f64 = rng.gen_range(0.0..10.0);
            let q = 1.0 / (1.0 + (-(age - 5.0)).exp());
            points.push(vec![age]);
            targets.push(u8::from(rng.gen::<f64>() < q));
        }
        let matrix = numeric_matrix(&points);
        let params = ForestParams {
            n_trees: 50,
            max_depth: 4,
            min_leaf: 5,
            mtry: Some(1),
            bootstrap: true,
            seed: 19,
        };
        let model = fit_forest(&matrix, &targets, &params, ComponentId(1)).unwrap();
        let probs = model.predict_proba(&matrix).unwrap();
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        // Rank correlation between age and predicted probability.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| points[a][0].partial_cmp(&points[b][0]).unwrap());
        let mut age_rank = vec![0usize; n];
        for (r, &i) in order.iter().enumerate() {
            age_rank[i] = r;
        }
        let mut order_p: Vec<usize> = (0..n).collect();
        order_p.sort_by(|&a, &b| probs[a].partial_cmp(&probs[b]).unwrap());
        let mut p_rank = vec![0usize; n];
        for (r, &i) in order_p.iter().enumerate() {
            p_rank[i] = r;
        }
        let mean = (n as f64 - 1.0) / 2.0;
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for i in 0..n {
            let a = age_rank[i] as f64 - mean;
            let b = p_rank[i] as f64 - mean;
            cov += a * b;
            var_a += a * a;
            var_b += b * b;
        }
        let spearman = cov / (var_a.sqrt() * var_b.sqrt());
        assert!(spearman > 0.8, "rank correlation {spearman}");
    }
}

