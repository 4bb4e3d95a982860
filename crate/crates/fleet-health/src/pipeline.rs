//! End-to-end orchestration: declarative configuration, the five model
//! variants, and the staged pipeline (features -> impute -> train ->
//! score) with deterministic seeding and inspectable CSV/JSON artifacts
//! at every stage.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adasyn::{self, AdasynParams};
use crate::data::{self, ComponentId, CutoffConfig};
use crate::dbscan::{self, DbscanParams};
use crate::error::{Error, Result};
use crate::features;
use crate::forest::{self, ForestParams, TrainedComponentModel, MODEL_FORMAT_VERSION};
use crate::health::{self, ComponentWeights, HealthReport};
use crate::matrix::{FeatureDef, FeatureKind, FeatureMatrix, Value};
use crate::metrics;
use crate::pca::{self, PcaModel};
use crate::split;

/// The CLI-selectable pipeline configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    WithoutPca,
    BPcaK,
    BPcaNk,
    Adasyn,
    AdasynPca,
}

impl Variant {
    pub fn uses_pca(&self) -> bool {
        matches!(self, Variant::BPcaK | Variant::BPcaNk | Variant::AdasynPca)
    }

    pub fn keeps_originals(&self) -> bool {
        !matches!(self, Variant::BPcaNk)
    }

    pub fn uses_adasyn(&self) -> bool {
        matches!(self, Variant::Adasyn | Variant::AdasynPca)
    }

    pub fn all() -> [Variant; 5] {
        [
            Variant::WithoutPca,
            Variant::BPcaK,
            Variant::BPcaNk,
            Variant::Adasyn,
            Variant::AdasynPca,
        ]
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Variant::WithoutPca => "without-pca",
            Variant::BPcaK => "b-pca-k",
            Variant::BPcaNk => "b-pca-nk",
            Variant::Adasyn => "adasyn",
            Variant::AdasynPca => "adasyn-pca",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "without-pca" => Ok(Variant::WithoutPca),
            "b-pca-k" => Ok(Variant::BPcaK),
            "b-pca-nk" => Ok(Variant::BPcaNk),
            "adasyn" => Ok(Variant::Adasyn),
            "adasyn-pca" => Ok(Variant::AdasynPca),
            other => Err(Error::Config(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbscanSettings {
    pub eps: f64,
    pub min_points: usize,
    pub n_factor: f64,
}

impl Default for DbscanSettings {
    fn default() -> Self {
        DbscanSettings {
            eps: 0.15,
            min_points: 5,
            n_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcaSettings {
    pub subset: Vec<String>,
    pub m: usize,
    /// Explicit override; the variant decides when unset, and a
    /// contradicting override is a config error.
    pub keep_originals: Option<bool>,
}

impl Default for PcaSettings {
    fn default() -> Self {
        PcaSettings {
            subset: vec![
                "mileage_since_last_replacement".into(),
                "component_age".into(),
                "car_age".into(),
                "car_mileage".into(),
            ],
            m: 2,
            keep_originals: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdasynSettings {
    /// Explicit override; the variant decides when unset.
    pub enabled: Option<bool>,
    pub beta: f64,
    pub k: usize,
}

impl Default for AdasynSettings {
    fn default() -> Self {
        AdasynSettings {
            enabled: None,
            beta: 1.0,
            k: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: Option<usize>,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            n_trees: 200,
            max_depth: 12,
            min_leaf: 5,
            mtry: None,
        }
    }
}

fn default_cutoff_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2019, 1, 1).unwrap()
}

fn default_horizon() -> u32 {
    365
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_variant() -> Variant {
    Variant::BPcaK
}

/// Declarative pipeline configuration; every CLI flag overrides its key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub events: PathBuf,
    #[serde(default)]
    pub cars: PathBuf,
    #[serde(default)]
    pub trips: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: PathBuf,
    #[serde(default = "default_cutoff_date")]
    pub cutoff_date: NaiveDate,
    #[serde(default = "default_horizon")]
    pub horizon_days: u32,
    #[serde(default)]
    pub dbscan: DbscanSettings,
    #[serde(default)]
    pub pca: PcaSettings,
    #[serde(default)]
    pub adasyn: AdasynSettings,
    #[serde(default)]
    pub forest: ForestSettings,
    /// Component criticality weights; uniform when unset.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Whether this run appends PCA features, honoring explicit overrides
    /// only when they agree with the variant.
    pub fn effective_keep_originals(&self) -> bool {
        self.pca.keep_originals.unwrap_or(self.variant.keeps_originals())
    }

    pub fn effective_adasyn(&self) -> bool {
        self.adasyn.enabled.unwrap_or(self.variant.uses_adasyn())
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.as_os_str().is_empty() {
            return Err(Error::Config("events path is not set".into()));
        }
        if self.cars.as_os_str().is_empty() {
            return Err(Error::Config("cars path is not set".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("out_dir is not set".into()));
        }
        if self.horizon_days == 0 {
            return Err(Error::Config("horizon_days must be > 0".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        if !(self.dbscan.eps > 0.0) || self.dbscan.min_points < 1 || !(self.dbscan.n_factor >= 1.0)
        {
            return Err(Error::Config("invalid dbscan settings".into()));
        }
        if self.pca.subset.is_empty() || self.pca.m < 1 || self.pca.m > self.pca.subset.len() {
            return Err(Error::Config("invalid pca settings".into()));
        }
        if !(self.adasyn.beta > 0.0 && self.adasyn.beta <= 1.0) || self.adasyn.k < 1 {
            return Err(Error::Config("invalid adasyn settings".into()));
        }
        if self.forest.n_trees < 1 || self.forest.max_depth < 1 || self.forest.min_leaf < 1 {
            return Err(Error::Config("invalid forest settings".into()));
        }
        if let Some(weights) = &self.weights {
            if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::Config("invalid weights".into()));
            }
            if weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("weights sum to zero".into()));
            }
        }

        // The variant pins keep_originals and adasyn.enabled; explicit
        // overrides may only restate what the variant implies.
        if let Some(keep) = self.pca.keep_originals {
            if !self.variant.uses_pca() {
                return Err(Error::Config(format!(
                    "pca.keep_originals set but variant '{}' does not use PCA",
                    self.variant
                )));
            }
            if keep != self.variant.keeps_originals() {
                return Err(Error::Config(format!(
                    "pca.keep_originals = {keep} conflicts with variant '{}'",
                    self.variant
                )));
            }
        }
        if let Some(enabled) = self.adasyn.enabled {
            if enabled != self.variant.uses_adasyn() {
                return Err(Error::Config(format!(
                    "adasyn.enabled = {enabled} conflicts with variant '{}'",
                    self.variant
                )));
            }
        }
        Ok(())
    }

    pub fn cutoff(&self) -> Result<CutoffConfig> {
        CutoffConfig::new(self.cutoff_date, self.horizon_days)
            .map_err(|e| Error::Config(e.to_string()))
    }

    fn dbscan_params(&self, component: ComponentId) -> DbscanParams {
        DbscanParams {
            eps: self.dbscan.eps,
            min_points: self.dbscan.min_points,
            n_factor: self.dbscan.n_factor,
            seed: derive_seed(self.seed, 1000 + u64::from(component.0)),
        }
    }

    fn adasyn_params(&self, component: ComponentId) -> AdasynParams {
        AdasynParams {
            beta: self.adasyn.beta,
            k: self.adasyn.k,
            seed: derive_seed(self.seed, 2000 + u64::from(component.0)),
        }
    }

    fn forest_params(&self, component: ComponentId, tag: u64) -> ForestParams {
        ForestParams {
            n_trees: self.forest.n_trees,
            max_depth: self.forest.max_depth,
            min_leaf: self.forest.min_leaf,
            mtry: self.forest.mtry,
            bootstrap: true,
            seed: derive_seed(self.seed, 3000 + u64::from(component.0) * 101 + tag),
        }
    }
}

/// splitmix64 mix of the global seed with a stage tag.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(tag.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Files created by a run, removed as a group when a stage fails.
#[derive(Debug, Default)]
struct OutputLog {
    files: Vec<PathBuf>,
}

impl OutputLog {
    fn track(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    fn cleanup(&self) {
        for file in &self.files {
            let _ = std::fs::remove_file(file);
        }
    }
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn component_file(dir: &Path, component: ComponentId, suffix: &str) -> PathBuf {
    dir.join(format!("component_{component}{suffix}"))
}

/// One-hot categorical encoding plus per-column standardization, fitted
/// on training rows only. Turns a mixed matrix into the fully numeric
/// form the resampler and its forests consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericEncoder {
    source_names: Vec<String>,
    /// Category table per source feature (empty for numeric features).
    categories: Vec<Vec<String>>,
    output_defs: Vec<FeatureDef>,
    means: Vec<f64>,
    stds: Vec<f64>,
    zero_variance: Vec<bool>,
}

impl NumericEncoder {
    pub fn fit(matrix: &FeatureMatrix) -> Result<NumericEncoder> {
        let mut categories = Vec::with_capacity(matrix.n_features());
        let mut output_defs = Vec::new();
        for (j, def) in matrix.defs().iter().enumerate() {
            match def.kind {
                FeatureKind::Numeric => {
                    categories.push(Vec::new());
                    output_defs.push(def.clone());
                }
                FeatureKind::Categorical => {
                    let mut values: Vec<String> = matrix
                        .rows()
                        .iter()
                        .filter_map(|row| row[j].as_cat().map(str::to_string))
                        .collect();
                    values.sort();
                    values.dedup();
                    for category in &values {
                        output_defs.push(FeatureDef::numeric(
                            &format!("{}={category}", def.name),
                            None,
                        ));
                    }
                    categories.push(values);
                }
            }
        }

        let raw = Self::raw_columns(matrix, &categories)?;
        let (_, means, stds, zero_variance) = pca::standardize(&raw)?;
        Ok(NumericEncoder {
            source_names: matrix.defs().iter().map(|d| d.name.clone()).collect(),
            categories,
            output_defs,
            means,
            stds,
            zero_variance,
        })
    }

    fn raw_columns(
        matrix: &FeatureMatrix,
        categories: &[Vec<String>],
    ) -> Result<Vec<Vec<f64>>> {
        let n = matrix.n_rows();
        let mut columns = Vec::new();
        for (j, def) in matrix.defs().iter().enumerate() {
            match def.kind {
                FeatureKind::Numeric => {
                    columns.push(matrix.numeric_column(j)?);
                }
                FeatureKind::Categorical => {
                    for category in &categories[j] {
                        let mut column = Vec::with_capacity(n);
                        for row in matrix.rows() {
                            match row[j].as_cat() {
                                Some(s) => column.push(f64::from(s == category.as_str())),
                                None => {
                                    return Err(Error::SchemaMismatch(format!(
                                        "missing cell in '{}'",
                                        def.name
                                    )));
                                }
                            }
                        }
                        columns.push(column);
                    }
                }
            }
        }
        Ok(columns)
    }

    /// Encode and standardize with the fitted statistics; unseen
    /// categories produce all-zero indicator columns.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let names: Vec<String> = matrix.defs().iter().map(|d| d.name.clone()).collect();
        if names != self.source_names {
            return Err(Error::SchemaMismatch(
                "encoder input schema differs from the fitted schema".into(),
            ));
        }
        let raw = Self::raw_columns(matrix, &self.categories)?;
        let rows: Vec<Vec<Value>> = (0..matrix.n_rows())
            .map(|i| {
                raw.iter()
                    .enumerate()
                    .map(|(c, col)| {
                        let x = col[i];
                        let scaled = if self.zero_variance[c] {
                            x - self.means[c]
                        } else {
                            (x - self.means[c]) / self.stds[c]
                        };
                        Value::Num(scaled)
                    })
                    .collect()
            })
            .collect();
        let mut out = FeatureMatrix::new(
            self.output_defs.clone(),
            matrix.sample_ids().to_vec(),
            rows,
        )?;
        if let Some(target) = matrix.target() {
            out = out.with_target(target.to_vec())?;
        }
        Ok(out)
    }
}

/// Per-component fitted transform persisted for the scoring stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTransform {
    pub pca: Option<PcaModel>,
    pub keep_originals: bool,
    pub encoder: Option<NumericEncoder>,
}

impl ComponentTransform {
    pub fn apply(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut working = matrix.clone();
        if let Some(model) = &self.pca {
            working = pca::apply(model, &working, self.keep_originals)?;
        }
        if let Some(encoder) = &self.encoder {
            working = encoder.transform(&working)?;
        }
        Ok(working)
    }
}

/// Evaluation readouts for one component model.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentOutcome {
    pub component: ComponentId,
    pub auc: f64,
    pub threshold: f64,
    pub capture_half: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub variant: Variant,
    pub components: Vec<ComponentOutcome>,
    pub fleet_capture_half: f64,
    pub health_report: PathBuf,
}

fn features_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir.join("features")
}

fn imputed_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir.join("imputed")
}

fn models_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir.join("models")
}

fn metrics_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir.join("metrics")
}

fn train_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out_dir.join("train")
}

fn list_component_files(dir: &Path) -> Result<Vec<(ComponentId, PathBuf)>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Err(Error::MissingArtifact(format!(
            "{}; run the prior stage first",
            dir.display()
        )));
    }
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = match path.file_name().and_then(|n| n.to_str()) {
            Some(n) => n,
            None => continue,
        };
        if let Some(rest) = name.strip_prefix("component_") {
            if let Some(id) = rest.strip_suffix(".csv") {
                let id: u8 = id.parse().map_err(|_| {
                    Error::InvalidArgument(format!("unexpected file name '{name}'"))
                })?;
                out.push((ComponentId(id), path.clone()));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::MissingArtifact(format!(
            "no component matrices under {}",
            dir.display()
        )));
    }
    out.sort();
    Ok(out)
}

fn read_component_matrix(path: &Path) -> Result<FeatureMatrix> {
    let schema_path = path.with_extension("schema.json");
    let schema = if schema_path.exists() {
        Some(FeatureMatrix::read_schema(&schema_path)?)
    } else {
        None
    };
    FeatureMatrix::read_csv(path, schema)
}

fn write_component_matrix(
    log: &mut OutputLog,
    dir: &Path,
    component: ComponentId,
    matrix: &FeatureMatrix,
) -> Result<()> {
    let csv_path = log.track(component_file(dir, component, ".csv"));
    let schema_path = log.track(component_file(dir, component, ".schema.json"));
    matrix.write_csv(&csv_path)?;
    matrix.write_schema(&schema_path)?;
    Ok(())
}

/// Ingest the raw CSVs, split by component, and write one labeled feature
/// matrix per component.
pub fn stage_features(cfg: &PipelineConfig) -> Result<Vec<ComponentId>> {
    let mut log = OutputLog::default();
    features_inner(cfg, &mut log).map_err(|e| {
        log.cleanup();
        e.with_stage("features")
    })
}

fn features_inner(cfg: &PipelineConfig, log: &mut OutputLog) -> Result<Vec<ComponentId>> {
    cfg.validate()?;
    let cutoff = cfg.cutoff()?;
    let events = data::read_events(&cfg.events)?;
    if events.is_empty() {
        return Err(Error::Ingest(format!(
            "no events in {}",
            cfg.events.display()
        )));
    }
    let mut cars = data::read_cars(&cfg.cars)?;
    if let Some(trips) = &cfg.trips {
        data::read_trips_into(trips, &mut cars)?;
    }

    let dir = features_dir(cfg);
    ensure_dir(&dir)?;
    let by_component = features::split_by_component(&events);
    let mut components = Vec::new();
    for (component, component_events) in &by_component {
        let matrix = features::engineer_features(component_events, &cars, &cutoff)?;
        let labels = features::label_targets(component_events, &cutoff);
        let matrix = features::attach_targets(matrix, &labels)?;
        write_component_matrix(log, &dir, *component, &matrix)?;
        components.push(*component);
    }
    Ok(components)
}

/// Cluster each component matrix and fill its missing cells.
pub fn stage_impute(cfg: &PipelineConfig) -> Result<()> {
    let mut log = OutputLog::default();
    impute_inner(cfg, &mut log).map_err(|e| {
        log.cleanup();
        e.with_stage("impute")
    })
}

fn impute_inner(cfg: &PipelineConfig, log: &mut OutputLog) -> Result<()> {
    cfg.validate()?;
    let out = imputed_dir(cfg);
    ensure_dir(&out)?;
    for (component, path) in list_component_files(&features_dir(cfg))? {
        let matrix = read_component_matrix(&path)?;
        let assignment = dbscan::cluster(&matrix, &cfg.dbscan_params(component))?;
        let filled = dbscan::impute(&matrix, &assignment)?;
        write_component_matrix(log, &out, component, &filled)?;
    }
    Ok(())
}

struct TrainedComponent {
    outcome: ComponentOutcome,
    model: TrainedComponentModel,
    transform: ComponentTransform,
    roc: metrics::RocCurve,
    gain: metrics::GainCurve,
    train_matrix: FeatureMatrix,
    eval_matrix: FeatureMatrix,
}

fn train_component(
    cfg: &PipelineConfig,
    component: ComponentId,
    matrix: &FeatureMatrix,
    train_cars: &BTreeSet<String>,
) -> Result<TrainedComponent> {
    if matrix.target().is_none() {
        return Err(Error::SchemaMismatch("imputed matrix lacks targets".into()));
    }

    // Variant transform happens before the split, mirroring the staged
    // artifact layout; PCA is unsupervised so it sees every row.
    let (pca_model, working) = if cfg.variant.uses_pca() {
        let (model, projected) = pca::fit_project(
            matrix,
            &cfg.pca.subset,
            cfg.pca.m,
            cfg.effective_keep_originals(),
        )?;
        (Some(model), projected)
    } else {
        (None, matrix.clone())
    };

    let train_rows: Vec<usize> = (0..working.n_rows())
        .filter(|&i| train_cars.contains(&working.sample_ids()[i].railcar_id))
        .collect();
    let eval_rows: Vec<usize> = (0..working.n_rows())
        .filter(|&i| !train_cars.contains(&working.sample_ids()[i].railcar_id))
        .collect();
    let train_matrix = working.select_rows(&train_rows);
    let eval_matrix = working.select_rows(&eval_rows);

    let (fit_matrix, eval_used, encoder) = if cfg.effective_adasyn() {
        let encoder = NumericEncoder::fit(&train_matrix)?;
        let train_encoded = encoder.transform(&train_matrix)?;
        let augmented = adasyn::adasyn(
            &train_encoded,
            train_encoded.target().expect("targets carried"),
            &cfg.adasyn_params(component),
        )?;
        let eval_encoded = encoder.transform(&eval_matrix)?;
        (augmented, eval_encoded, Some(encoder))
    } else {
        (train_matrix.clone(), eval_matrix.clone(), None)
    };

    let fit_targets = fit_matrix.target().expect("targets carried").to_vec();
    let model = forest::fit_forest(
        &fit_matrix,
        &fit_targets,
        &cfg.forest_params(component, 0),
        component,
    )?;

    let eval_targets = eval_used
        .target()
        .expect("targets carried")
        .to_vec();
    let scores = model.predict_proba(&eval_used)?;
    let roc = metrics::roc_auc(&scores, &eval_targets)?;
    let threshold = metrics::select_threshold(&roc);
    let gain = metrics::gain_curve(&scores, &eval_targets)?;
    let capture_half = metrics::capture_at(&gain, 0.5);
    let model = model.with_threshold(threshold)?;

    Ok(TrainedComponent {
        outcome: ComponentOutcome {
            component,
            auc: roc.auc,
            threshold,
            capture_half,
        },
        model,
        transform: ComponentTransform {
            pca: pca_model,
            keep_originals: cfg.effective_keep_originals(),
            encoder,
        },
        roc,
        gain,
        train_matrix: fit_matrix,
        eval_matrix: eval_used,
    })
}

/// Write a matrix CSV with a trailing provenance column distinguishing
/// original rows from resampled ones.
fn write_provenance_csv(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec!["sample_id".into()];
    header.extend(matrix.defs().iter().map(|d| d.name.clone()));
    header.push("target".into());
    header.push("provenance".into());
    writer.write_record(&header)?;
    let targets = matrix
        .target()
        .ok_or_else(|| Error::SchemaMismatch("matrix lacks targets".into()))?;
    for (i, row) in matrix.rows().iter().enumerate() {
        let id = &matrix.sample_ids()[i];
        let mut record = vec![id.to_string()];
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(targets[i].to_string());
        record.push(
            if adasyn::is_synthetic(id) {
                "synthetic"
            } else {
                "original"
            }
            .to_string(),
        );
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Fit the per-component forests on the train side of a railcar-grouped
/// split and evaluate on the held-out cars.
pub fn stage_train(cfg: &PipelineConfig) -> Result<Vec<ComponentOutcome>> {
    let mut log = OutputLog::default();
    train_inner(cfg, &mut log).map_err(|e| {
        log.cleanup();
        e.with_stage("train")
    })
}

fn train_inner(cfg: &PipelineConfig, log: &mut OutputLog) -> Result<Vec<ComponentOutcome>> {
    cfg.validate()?;
    let files = list_component_files(&imputed_dir(cfg))?;
    let matrices: Vec<(ComponentId, FeatureMatrix)> = files
        .iter()
        .map(|(component, path)| Ok((*component, read_component_matrix(path)?)))
        .collect::<Result<_>>()?;

    // One global railcar split shared by every component: car-level label
    // is "any sample positive anywhere".
    let mut car_labels: BTreeMap<String, u8> = BTreeMap::new();
    for (_, matrix) in &matrices {
        let targets = matrix
            .target()
            .ok_or_else(|| Error::SchemaMismatch("imputed matrix lacks targets".into()))?;
        for (id, &t) in matrix.sample_ids().iter().zip(targets) {
            let entry = car_labels.entry(id.railcar_id.clone()).or_insert(0);
            *entry = (*entry).max(t);
        }
    }
    let (train_cars, test_cars) =
        split::split_railcars(&car_labels, cfg.test_fraction, derive_seed(cfg.seed, 1))?;
    let train_set: BTreeSet<String> = train_cars.into_iter().collect();

    let models = models_dir(cfg);
    let metrics_out = metrics_dir(cfg);
    let train_out = train_dir(cfg);
    ensure_dir(&models)?;
    ensure_dir(&metrics_out)?;
    ensure_dir(&train_out)?;

    let split_path = log.track(train_out.join("test_cars.json"));
    std::fs::write(&split_path, serde_json::to_string_pretty(&test_cars)? + "\n")?;

    let trained: Vec<TrainedComponent> = matrices
        .par_iter()
        .map(|(component, matrix)| train_component(cfg, *component, matrix, &train_set))
        .collect::<Result<_>>()?;

    let mut outcomes = Vec::with_capacity(trained.len());
    for result in &trained {
        let component = result.outcome.component;
        let model_path = log.track(component_file(&models, component, ".model.json"));
        std::fs::write(&model_path, result.model.to_json()? + "\n")?;
        let transform_path = log.track(component_file(&models, component, ".transform.json"));
        std::fs::write(
            &transform_path,
            serde_json::to_string_pretty(&result.transform)? + "\n",
        )?;
        let roc_path = log.track(component_file(&metrics_out, component, "_roc.csv"));
        metrics::write_roc_csv(&result.roc, &roc_path)?;
        let gain_path = log.track(component_file(&metrics_out, component, "_gain.csv"));
        metrics::write_gain_csv(&result.gain, &gain_path)?;
        let train_path = log.track(component_file(&train_out, component, "_train.csv"));
        write_provenance_csv(&result.train_matrix, &train_path)?;
        let eval_path = log.track(component_file(&train_out, component, "_eval.csv"));
        write_provenance_csv(&result.eval_matrix, &eval_path)?;
        outcomes.push(result.outcome.clone());
    }

    let summary_path = log.track(metrics_out.join("summary.csv"));
    let mut writer = csv::Writer::from_path(&summary_path)?;
    writer.write_record(["component", "auc", "threshold", "capture_50"])?;
    for outcome in &outcomes {
        writer.write_record([
            outcome.component.to_string(),
            outcome.auc.to_string(),
            outcome.threshold.to_string(),
            outcome.capture_half.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(outcomes)
}

/// Score every railcar with the trained models, rank the fleet, and write
/// the held-out-car gain curve.
pub fn stage_score(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    let mut log = OutputLog::default();
    score_inner(cfg, &mut log).map_err(|e| {
        log.cleanup();
        e.with_stage("score")
    })
}

fn score_inner(cfg: &PipelineConfig, log: &mut OutputLog) -> Result<PipelineSummary> {
    cfg.validate()?;
    let files = list_component_files(&imputed_dir(cfg))?;
    let models = models_dir(cfg);
    let components: Vec<ComponentId> = files.iter().map(|(c, _)| *c).collect();

    let weights = match &cfg.weights {
        Some(raw) => {
            if raw.len() != components.len() {
                return Err(Error::Config(format!(
                    "{} weights for {} components",
                    raw.len(),
                    components.len()
                )));
            }
            ComponentWeights::new(raw.clone())?
        }
        None => ComponentWeights::uniform(components.len())?,
    };

    // car -> per-component max probability over locations, plus the
    // car-level observed label for the held-out gain readout.
    let mut car_probs: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    let mut car_failed: BTreeMap<String, bool> = BTreeMap::new();
    for (slot, (component, path)) in files.iter().enumerate() {
        let matrix = read_component_matrix(path)?;
        let model_path = component_file(&models, *component, ".model.json");
        let model = TrainedComponentModel::from_json(
            &std::fs::read_to_string(&model_path)
                .map_err(|e| Error::MissingArtifact(format!("{}: {e}", model_path.display())))?,
        )?;
        let transform_path = component_file(&models, *component, ".transform.json");
        let transform: ComponentTransform = serde_json::from_str(
            &std::fs::read_to_string(&transform_path).map_err(|e| {
                Error::MissingArtifact(format!("{}: {e}", transform_path.display()))
            })?,
        )?;
        let working = transform.apply(&matrix)?;
        let probs = model.predict_proba(&working)?;
        let targets = matrix
            .target()
            .ok_or_else(|| Error::SchemaMismatch("imputed matrix lacks targets".into()))?;
        for (i, id) in matrix.sample_ids().iter().enumerate() {
            let slots = car_probs
                .entry(id.railcar_id.clone())
                .or_insert_with(|| vec![None; components.len()]);
            let current = &mut slots[slot];
            *current = Some(match *current {
                Some(existing) => existing.max(probs[i]),
                None => probs[i],
            });
            let failed = car_failed.entry(id.railcar_id.clone()).or_insert(false);
            *failed |= targets[i] == 1;
        }
    }

    let mut ranked_input = Vec::with_capacity(car_probs.len());
    for (car, probs) in &car_probs {
        let score = health::health_score(&weights, probs)?;
        ranked_input.push((car.clone(), probs.clone(), score));
    }
    let rows = health::rank_fleet(ranked_input)?;

    let report = HealthReport {
        components: components.clone(),
        weights_used: weights,
        model_versions: components
            .iter()
            .map(|c| (*c, MODEL_FORMAT_VERSION))
            .collect(),
        rows,
    };
    let report_path = log.track(cfg.out_dir.join("health_report.csv"));
    report.write_csv(&report_path)?;

    // Gain over the held-out cars, ranked by health rate.
    let split_path = train_dir(cfg).join("test_cars.json");
    let test_cars: Vec<String> = serde_json::from_str(
        &std::fs::read_to_string(&split_path)
            .map_err(|e| Error::MissingArtifact(format!("{}: {e}", split_path.display())))?,
    )?;
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for row in &report.rows {
        if test_cars.binary_search(&row.railcar_id).is_ok() {
            scores.push(row.score);
            labels.push(u8::from(car_failed[&row.railcar_id]));
        }
    }
    let fleet_gain = metrics::gain_curve(&scores, &labels)?;
    let gain_path = log.track(metrics_dir(cfg).join("fleet_gain.csv"));
    ensure_dir(&metrics_dir(cfg))?;
    metrics::write_gain_csv(&fleet_gain, &gain_path)?;
    let fleet_capture_half = metrics::capture_at(&fleet_gain, 0.5);

    // Rebuild the component outcomes from the summary written at train
    // time so the monolithic and staged paths report identical numbers.
    let summary_path = metrics_dir(cfg).join("summary.csv");
    let mut outcomes = Vec::new();
    let mut reader = csv::Reader::from_path(&summary_path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", summary_path.display())))?;
    for record in reader.records() {
        let record = record?;
        outcomes.push(ComponentOutcome {
            component: ComponentId(record[0].parse().map_err(|_| {
                Error::InvalidArgument("bad component id in summary.csv".into())
            })?),
            auc: record[1]
                .parse()
                .map_err(|_| Error::InvalidArgument("bad auc in summary.csv".into()))?,
            threshold: record[2]
                .parse()
                .map_err(|_| Error::InvalidArgument("bad threshold in summary.csv".into()))?,
            capture_half: record[3]
                .parse()
                .map_err(|_| Error::InvalidArgument("bad capture in summary.csv".into()))?,
        });
    }

    Ok(PipelineSummary {
        variant: cfg.variant,
        components: outcomes,
        fleet_capture_half,
        health_report: report_path,
    })
}

/// Cross-validated AUC per component: stratified folds over the imputed
/// matrices, with the variant transform and per-fold resampling applied
/// the same way as the train stage.
pub fn stage_evaluate(cfg: &PipelineConfig, folds: usize) -> Result<Vec<(ComponentId, f64)>> {
    let mut log = OutputLog::default();
    evaluate_inner(cfg, folds, &mut log).map_err(|e| {
        log.cleanup();
        e.with_stage("evaluate")
    })
}

fn evaluate_inner(
    cfg: &PipelineConfig,
    folds: usize,
    log: &mut OutputLog,
) -> Result<Vec<(ComponentId, f64)>> {
    cfg.validate()?;
    let files = list_component_files(&imputed_dir(cfg))?;
    let metrics_out = metrics_dir(cfg);
    ensure_dir(&metrics_out)?;

    let results: Vec<(ComponentId, Vec<f64>)> = files
        .par_iter()
        .map(|(component, path)| -> Result<(ComponentId, Vec<f64>)> {
            let matrix = read_component_matrix(path)?;
            let targets = matrix
                .target()
                .ok_or_else(|| Error::SchemaMismatch("imputed matrix lacks targets".into()))?
                .to_vec();
            let working = if cfg.variant.uses_pca() {
                pca::fit_project(
                    &matrix,
                    &cfg.pca.subset,
                    cfg.pca.m,
                    cfg.effective_keep_originals(),
                )?
                .1
            } else {
                matrix
            };
            let assignment = split::stratified_folds(
                &targets,
                folds,
                derive_seed(cfg.seed, 2 + u64::from(component.0)),
            )?;
            let mut aucs = Vec::with_capacity(folds);
            for fold in 0..folds {
                let train_rows: Vec<usize> =
                    (0..targets.len()).filter(|&i| assignment[i] != fold).collect();
                let eval_rows: Vec<usize> =
                    (0..targets.len()).filter(|&i| assignment[i] == fold).collect();
                let train_matrix = working.select_rows(&train_rows);
                let eval_matrix = working.select_rows(&eval_rows);
                let (fit_matrix, eval_used) = if cfg.effective_adasyn() {
                    let encoder = NumericEncoder::fit(&train_matrix)?;
                    let train_encoded = encoder.transform(&train_matrix)?;
                    let augmented = adasyn::adasyn(
                        &train_encoded,
                        train_encoded.target().expect("targets carried"),
                        &cfg.adasyn_params(*component),
                    )?;
                    (augmented, encoder.transform(&eval_matrix)?)
                } else {
                    (train_matrix, eval_matrix)
                };
                let fit_targets = fit_matrix.target().expect("targets carried").to_vec();
                let model = forest::fit_forest(
                    &fit_matrix,
                    &fit_targets,
                    &cfg.forest_params(*component, 10 + fold as u64),
                    *component,
                )?;
                let scores = model.predict_proba(&eval_used)?;
                let eval_targets = eval_used.target().expect("targets carried");
                aucs.push(metrics::roc_auc(&scores, eval_targets)?.auc);
            }
            Ok((*component, aucs))
        })
        .collect::<Result<_>>()?;

    let cv_path = log.track(metrics_out.join("cv_auc.csv"));
    let mut writer = csv::Writer::from_path(&cv_path)?;
    writer.write_record(["component", "fold", "auc"])?;
    let mut means = Vec::new();
    for (component, aucs) in &results {
        for (fold, auc) in aucs.iter().enumerate() {
            writer.write_record([
                component.to_string(),
                fold.to_string(),
                auc.to_string(),
            ])?;
        }
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        writer.write_record([component.to_string(), "mean".to_string(), mean.to_string()])?;
        means.push((*component, mean));
    }
    writer.flush()?;
    Ok(means)
}

/// Run the whole pipeline (features -> impute -> train -> score) and
/// print a per-component AUC summary row for the configured variant.
/// Any stage failure removes the files this run created.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    let mut log = OutputLog::default();
    let result = (|| -> Result<PipelineSummary> {
        features_inner(cfg, &mut log).map_err(|e| e.with_stage("features"))?;
        impute_inner(cfg, &mut log).map_err(|e| e.with_stage("impute"))?;
        train_inner(cfg, &mut log).map_err(|e| e.with_stage("train"))?;
        score_inner(cfg, &mut log).map_err(|e| e.with_stage("score"))
    })();
    match result {
        Ok(summary) => {
            print_summary(&summary);
            Ok(summary)
        }
        Err(e) => {
            log.cleanup();
            Err(e)
        }
    }
}

/// Table of per-component AUC for one variant run.
pub fn print_summary(summary: &PipelineSummary) {
    let header: Vec<String> = summary
        .components
        .iter()
        .map(|o| format!("component #{}", o.component))
        .collect();
    println!("model        | {}", header.join(" | "));
    let cells: Vec<String> = summary
        .components
        .iter()
        .map(|o| format!("{:12.2}", o.auc))
        .collect();
    println!("{:12} | {}", summary.variant.to_string(), cells.join(" | "));
    println!(
        "fleet capture at 50% of held-out cars: {:.3}",
        summary.fleet_capture_half
    );
}
