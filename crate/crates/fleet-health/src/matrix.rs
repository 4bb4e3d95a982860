//! The samples-by-features table with explicit missing cells, plus its
//! CSV form (`sample_id` column first, `target` column last) and a JSON
//! schema sidecar.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SampleId;
use crate::error::{Error, Result};

/// One cell of the feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
            Value::Missing => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// Name, kind, and optional unit of one feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
}

impl FeatureDef {
    pub fn numeric(name: &str, unit: Option<&str>) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Numeric,
            unit: unit.map(str::to_string),
        }
    }

    pub fn categorical(name: &str) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Categorical,
            unit: None,
        }
    }
}

/// Rectangular table of samples x named features with explicit missing
/// cells and an optional 0/1 target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    defs: Vec<FeatureDef>,
    sample_ids: Vec<SampleId>,
    rows: Vec<Vec<Value>>,
    target: Option<Vec<u8>>,
}

impl FeatureMatrix {
    pub fn new(
        defs: Vec<FeatureDef>,
        sample_ids: Vec<SampleId>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for def in &defs {
            if def.name == "sample_id" || def.name == "target" || def.name == "provenance" {
                return Err(Error::SchemaMismatch(format!(
                    "feature name '{}' is reserved",
                    def.name
                )));
            }
            if !names.insert(def.name.clone()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate feature name '{}'",
                    def.name
                )));
            }
        }
        if sample_ids.len() != rows.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} sample ids for {} rows",
                sample_ids.len(),
                rows.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for id in &sample_ids {
            if !ids.insert(id.clone()) {
                return Err(Error::SchemaMismatch(format!("duplicate sample id '{id}'")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != defs.len() {
                return Err(Error::SchemaMismatch(format!(
                    "row {i} has {} cells, expected {}",
                    row.len(),
                    defs.len()
                )));
            }
            for (cell, def) in row.iter().zip(&defs) {
                match (cell, def.kind) {
                    (Value::Num(x), FeatureKind::Numeric) if !x.is_finite() => {
                        return Err(Error::SchemaMismatch(format!(
                            "non-finite value in '{}'",
                            def.name
                        )));
                    }
                    (Value::Num(_), FeatureKind::Categorical) => {
                        return Err(Error::SchemaMismatch(format!(
                            "numeric value in categorical feature '{}'",
                            def.name
                        )));
                    }
                    (Value::Cat(_), FeatureKind::Numeric) => {
                        return Err(Error::SchemaMismatch(format!(
                            "categorical value in numeric feature '{}'",
                            def.name
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(FeatureMatrix {
            defs,
            sample_ids,
            rows,
            target: None,
        })
    }

    /// Attach a 0/1 target vector, one entry per row.
    pub fn with_target(mut self, target: Vec<u8>) -> Result<Self> {
        if target.len() != self.rows.len() {
            return Err(Error::SchemaMismatch(format!(
                "target has {} entries for {} rows",
                target.len(),
                self.rows.len()
            )));
        }
        if target.iter().any(|&t| t > 1) {
            return Err(Error::SchemaMismatch("target entries must be 0 or 1".into()));
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.defs.len()
    }

    pub fn defs(&self) -> &[FeatureDef] {
        &self.defs
    }

    pub fn sample_ids(&self) -> &[SampleId] {
        &self.sample_ids
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Value] {
        &self.rows[i]
    }

    pub fn value(&self, row: usize, col: usize) -> &Value {
        &self.rows[row][col]
    }

    pub fn target(&self) -> Option<&[u8]> {
        self.target.as_deref()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.defs
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("no feature named '{name}'")))
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().flatten().any(Value::is_missing)
    }

    /// Fully observed numeric column; errors on missing or categorical cells.
    pub fn numeric_column(&self, col: usize) -> Result<Vec<f64>> {
        let def = &self.defs[col];
        self.rows
            .iter()
            .map(|row| {
                row[col].as_num().ok_or_else(|| {
                    Error::SchemaMismatch(format!(
                        "feature '{}' is not fully observed numeric",
                        def.name
                    ))
                })
            })
            .collect()
    }

    /// New matrix with extra numeric columns appended; target is preserved.
    pub fn append_numeric_columns(
        &self,
        defs: Vec<FeatureDef>,
        columns: Vec<Vec<f64>>,
    ) -> Result<FeatureMatrix> {
        if defs.len() != columns.len() {
            return Err(Error::SchemaMismatch(
                "column count does not match new defs".into(),
            ));
        }
        for col in &columns {
            if col.len() != self.n_rows() {
                return Err(Error::SchemaMismatch(
                    "appended column length does not match row count".into(),
                ));
            }
        }
        let mut new_defs = self.defs.clone();
        new_defs.extend(defs);
        let mut rows = self.rows.clone();
        for (i, row) in rows.iter_mut().enumerate() {
            for col in &columns {
                row.push(Value::Num(col[i]));
            }
        }
        let mut out = FeatureMatrix::new(new_defs, self.sample_ids.clone(), rows)?;
        out.target = self.target.clone();
        Ok(out)
    }

    /// New matrix without the named columns; target is preserved.
    pub fn drop_columns(&self, names: &[String]) -> Result<FeatureMatrix> {
        let drop: Vec<usize> = names
            .iter()
            .map(|n| self.feature_index(n))
            .collect::<Result<_>>()?;
        let keep: Vec<usize> = (0..self.defs.len()).filter(|i| !drop.contains(i)).collect();
        let defs = keep.iter().map(|&i| self.defs[i].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|row| keep.iter().map(|&i| row[i].clone()).collect())
            .collect();
        let mut out = FeatureMatrix::new(defs, self.sample_ids.clone(), rows)?;
        out.target = self.target.clone();
        Ok(out)
    }

    /// New matrix restricted to the given row indices; target follows.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            defs: self.defs.clone(),
            sample_ids: indices.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            target: self
                .target
                .as_ref()
                .map(|t| indices.iter().map(|&i| t[i]).collect()),
        }
    }

    /// Write `sample_id,<features...>[,target]` CSV. Missing cells are
    /// empty fields; floats use the shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = vec!["sample_id".into()];
        header.extend(self.defs.iter().map(|d| d.name.clone()));
        if self.target.is_some() {
            header.push("target".into());
        }
        writer.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut record: Vec<String> = vec![self.sample_ids[i].to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            if let Some(target) = &self.target {
                record.push(target[i].to_string());
            }
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Write the schema sidecar used to re-read the CSV without type
    /// inference.
    pub fn write_schema(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.defs)?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    /// Read a matrix CSV. With `schema: None` column kinds are inferred: a
    /// column is numeric when every non-empty cell parses as a float.
    pub fn read_csv(path: &Path, schema: Option<Vec<FeatureDef>>) -> Result<FeatureMatrix> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::Ingest(format!("{}: {e}", path.display())))?;
        let header = reader.headers()?.clone();
        if header.is_empty() || &header[0] != "sample_id" {
            return Err(Error::SchemaMismatch(
                "matrix CSV must start with a sample_id column".into(),
            ));
        }
        let has_target = header.len() > 1 && &header[header.len() - 1] == "target";
        let feature_names: Vec<String> = header
            .iter()
            .skip(1)
            .take(header.len() - 1 - usize::from(has_target))
            .map(str::to_string)
            .collect();

        let mut sample_ids = Vec::new();
        let mut raw_rows: Vec<Vec<String>> = Vec::new();
        let mut target = Vec::new();
        for record in reader.records() {
            let record = record?;
            if record.len() != header.len() {
                return Err(Error::SchemaMismatch("ragged matrix CSV row".into()));
            }
            sample_ids.push(record[0].parse::<SampleId>()?);
            raw_rows.push(
                (1..=feature_names.len())
                    .map(|j| record[j].to_string())
                    .collect(),
            );
            if has_target {
                let t = &record[header.len() - 1];
                target.push(match t {
                    "0" => 0,
                    "1" => 1,
                    other => {
                        return Err(Error::SchemaMismatch(format!(
                            "invalid target '{other}'"
                        )));
                    }
                });
            }
        }

        let defs = match schema {
            Some(defs) => {
                let names: Vec<&str> = defs.iter().map(|d| d.name.as_str()).collect();
                let found: Vec<&str> = feature_names.iter().map(String::as_str).collect();
                if names != found {
                    return Err(Error::SchemaMismatch(
                        "schema feature names do not match CSV header".into(),
                    ));
                }
                defs
            }
            None => feature_names
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let numeric = raw_rows
                        .iter()
                        .filter(|row| !row[j].is_empty())
                        .all(|row| row[j].parse::<f64>().is_ok());
                    if numeric {
                        FeatureDef::numeric(name, None)
                    } else {
                        FeatureDef::categorical(name)
                    }
                })
                .collect(),
        };

        let rows = raw_rows
            .into_iter()
            .map(|raw| {
                raw.into_iter()
                    .zip(&defs)
                    .map(|(cell, def)| {
                        if cell.is_empty() {
                            return Ok(Value::Missing);
                        }
                        match def.kind {
                            FeatureKind::Numeric => cell
                                .parse::<f64>()
                                .map(Value::Num)
                                .map_err(|_| {
                                    Error::SchemaMismatch(format!(
                                        "non-numeric cell '{cell}' in '{}'",
                                        def.name
                                    ))
                                }),
                            FeatureKind::Categorical => Ok(Value::Cat(cell)),
                        }
                    })
                    .collect::<Result<Vec<Value>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let matrix = FeatureMatrix::new(defs, sample_ids, rows)?;
        if has_target {
            matrix.with_target(target)
        } else {
            Ok(matrix)
        }
    }

    pub fn read_schema(path: &Path) -> Result<Vec<FeatureDef>> {
        let json = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}
