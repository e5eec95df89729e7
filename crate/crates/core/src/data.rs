//! Data model for multi-cohort feature matrices, score panels, sample
//! metadata, and cross-cohort train/holdout group assembly.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::{format_f64, Fingerprint};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

// ── feature descriptors ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sequence {
    T1,
    T1ce,
    T2,
    Flair,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    NecroticCore,
    Enhancing,
    Edema,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureClass {
    Shape,
    FirstOrder,
    Glcm,
    Glszm,
    Gldm,
    Ngtdm,
    Glrlm,
    Other,
}

/// Provenance descriptor for one feature column.
///
/// Parsed from the column name using the convention
/// `<sequence>_<region>_<class>_<feature>`, case-insensitive; tokens that do
/// not match a known value map to `Other`. Parsing is a pure function of the
/// name string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub sequence: Sequence,
    pub region: Region,
    pub feature_class: FeatureClass,
}

impl FeatureDescriptor {
    pub fn parse(name: &str) -> FeatureDescriptor {
        let tokens: Vec<&str> = name.split('_').collect();
        let (sequence, region, feature_class) = if tokens.len() >= 3 {
            (
                parse_sequence(tokens[0]),
                parse_region(tokens[1]),
                parse_class(tokens[2]),
            )
        } else {
            (Sequence::Other, Region::Other, FeatureClass::Other)
        };
        FeatureDescriptor { name: name.to_string(), sequence, region, feature_class }
    }
}

fn parse_sequence(tok: &str) -> Sequence {
    match tok.to_ascii_lowercase().as_str() {
        "t1" => Sequence::T1,
        "t1ce" => Sequence::T1ce,
        "t2" => Sequence::T2,
        "flair" => Sequence::Flair,
        _ => Sequence::Other,
    }
}

fn parse_region(tok: &str) -> Region {
    match tok.to_ascii_lowercase().as_str() {
        "necrotic" | "necroticcore" | "core" => Region::NecroticCore,
        "enhancing" => Region::Enhancing,
        "edema" => Region::Edema,
        _ => Region::Other,
    }
}

fn parse_class(tok: &str) -> FeatureClass {
    match tok.to_ascii_lowercase().as_str() {
        "shape" => FeatureClass::Shape,
        "firstorder" => FeatureClass::FirstOrder,
        "glcm" => FeatureClass::Glcm,
        "glszm" => FeatureClass::Glszm,
        "gldm" => FeatureClass::Gldm,
        "ngtdm" => FeatureClass::Ngtdm,
        "glrlm" => FeatureClass::Glrlm,
        _ => FeatureClass::Other,
    }
}

// ── sample metadata ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_id: String,
    pub batch_id: String,
    pub age_years: Option<f64>,
    pub sex: Option<Sex>,
    pub survival_years: Option<f64>,
    pub event_observed: Option<bool>,
    pub tumor_volume_cm3: Option<f64>,
}

impl SampleMeta {
    pub fn new(sample_id: impl Into<String>, batch_id: impl Into<String>) -> SampleMeta {
        SampleMeta {
            sample_id: sample_id.into(),
            batch_id: batch_id.into(),
            age_years: None,
            sex: None,
            survival_years: None,
            event_observed: None,
            tumor_volume_cm3: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sample_id.is_empty() {
            return Err(Error::ConfigInvalid("empty sample_id".into()));
        }
        if self.batch_id.is_empty() {
            return Err(Error::ConfigInvalid(format!("sample `{}` has empty batch_id", self.sample_id)));
        }
        if self.survival_years.is_some() != self.event_observed.is_some() {
            return Err(Error::ConfigInvalid(format!(
                "sample `{}`: survival_years and event_observed must be present together",
                self.sample_id
            )));
        }
        if let Some(t) = self.survival_years {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::NegativeTime(t));
            }
        }
        if let Some(v) = self.tumor_volume_cm3 {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::ConfigInvalid(format!("sample `{}`: negative tumor volume", self.sample_id)));
            }
        }
        Ok(())
    }
}

// ── feature matrix ───────────────────────────────────────────────────────

/// Samples × features table with per-sample batch id and per-feature
/// provenance. Immutable after construction; all values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    samples: Vec<SampleMeta>,
    descriptors: Vec<FeatureDescriptor>,
    values: Matrix,
    /// Content hash of the matrix this one was derived from; fresh matrices
    /// point at themselves. Propagated through row/column selection and
    /// fitted transforms so freeze() can verify all parts share one origin.
    lineage: String,
}

impl FeatureMatrix {
    pub fn new(
        samples: Vec<SampleMeta>,
        descriptors: Vec<FeatureDescriptor>,
        values: Matrix,
    ) -> Result<FeatureMatrix> {
        if values.n_rows() != samples.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples vs {} value rows",
                samples.len(),
                values.n_rows()
            )));
        }
        if values.n_cols() != descriptors.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} descriptors vs {} value columns",
                descriptors.len(),
                values.n_cols()
            )));
        }
        let mut seen_ids = BTreeSet::new();
        for s in &samples {
            s.validate()?;
            if !seen_ids.insert(s.sample_id.clone()) {
                return Err(Error::DuplicateSampleId(s.sample_id.clone()));
            }
        }
        let mut seen_names = BTreeSet::new();
        for d in &descriptors {
            if d.name.is_empty() {
                return Err(Error::ConfigInvalid("empty feature name".into()));
            }
            if !seen_names.insert(d.name.clone()) {
                return Err(Error::FeatureMismatch(format!("duplicate feature name `{}`", d.name)));
            }
        }
        if !values.all_finite() {
            return Err(Error::NonFiniteValue("feature matrix contains NaN or infinity".into()));
        }
        let mut m = FeatureMatrix { samples, descriptors, values, lineage: String::new() };
        m.lineage = m.content_fingerprint();
        Ok(m)
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn n_features(&self) -> usize {
        self.descriptors.len()
    }

    pub fn samples(&self) -> &[SampleMeta] {
        &self.samples
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.descriptors.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn sample_ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.sample_id.as_str()).collect()
    }

    pub fn batch_ids(&self) -> Vec<&str> {
        self.samples.iter().map(|s| s.batch_id.as_str()).collect()
    }

    pub fn distinct_batches(&self) -> BTreeSet<String> {
        self.samples.iter().map(|s| s.batch_id.clone()).collect()
    }

    pub fn lineage(&self) -> &str {
        &self.lineage
    }

    /// Column indices whose values are constant (flagged at ingestion;
    /// preprocessing decides their fate).
    pub fn zero_variance_columns(&self) -> Vec<usize> {
        (0..self.n_features())
            .filter(|&j| {
                let first = self.values.get(0, j);
                (1..self.n_samples()).all(|i| self.values.get(i, j) == first)
            })
            .collect()
    }

    /// SHA-256 over dims, sample ids, batch ids, feature names, and raw f64
    /// bits of the values.
    pub fn content_fingerprint(&self) -> String {
        let mut fp = Fingerprint::new("feature-matrix/v1");
        fp.push_u64(self.n_samples() as u64);
        fp.push_u64(self.n_features() as u64);
        for s in &self.samples {
            fp.push_str(&s.sample_id);
            fp.push_str(&s.batch_id);
        }
        for d in &self.descriptors {
            fp.push_str(&d.name);
        }
        fp.push_f64s(self.values.data());
        fp.finish()
    }

    /// Row subset preserving lineage (used by the outlier gate).
    pub fn select_samples(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::IndexOutOfRange(i));
            }
        }
        Ok(FeatureMatrix {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            descriptors: self.descriptors.clone(),
            values: self.values.select_rows(indices),
            lineage: self.lineage.clone(),
        })
    }

    /// Column subset preserving lineage (used by fitted transforms).
    pub fn select_features(&self, indices: &[usize]) -> Result<FeatureMatrix> {
        for &j in indices {
            if j >= self.n_features() {
                return Err(Error::IndexOutOfRange(j));
            }
        }
        Ok(FeatureMatrix {
            samples: self.samples.clone(),
            descriptors: indices.iter().map(|&j| self.descriptors[j].clone()).collect(),
            values: self.values.select_cols(indices),
            lineage: self.lineage.clone(),
        })
    }

    /// Replace values while keeping samples/descriptors/lineage (used by
    /// fitted transforms; dimensions must match).
    pub(crate) fn with_values(&self, values: Matrix) -> Result<FeatureMatrix> {
        if values.n_rows() != self.n_samples() || values.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch("with_values shape".into()));
        }
        if !values.all_finite() {
            return Err(Error::NonFiniteValue("transformed values not finite".into()));
        }
        Ok(FeatureMatrix {
            samples: self.samples.clone(),
            descriptors: self.descriptors.clone(),
            values,
            lineage: self.lineage.clone(),
        })
    }

    pub(crate) fn with_columns_and_values(
        &self,
        keep: &[usize],
        values: Matrix,
    ) -> Result<FeatureMatrix> {
        if values.n_rows() != self.n_samples() || values.n_cols() != keep.len() {
            return Err(Error::DimensionMismatch("column-filtered shape".into()));
        }
        if !values.all_finite() {
            return Err(Error::NonFiniteValue("transformed values not finite".into()));
        }
        Ok(FeatureMatrix {
            samples: self.samples.clone(),
            descriptors: keep.iter().map(|&j| self.descriptors[j].clone()).collect(),
            values,
            lineage: self.lineage.clone(),
        })
    }

    pub fn merge_metadata(&mut self, meta: &BTreeMap<String, MetadataRecord>) -> Result<()> {
        for s in &mut self.samples {
            if let Some(rec) = meta.get(&s.sample_id) {
                s.age_years = rec.age_years;
                s.sex = rec.sex;
                s.survival_years = rec.survival_years;
                s.event_observed = rec.event_observed;
                s.tumor_volume_cm3 = rec.tumor_volume_cm3;
                s.validate()?;
            }
        }
        Ok(())
    }
}

// ── CSV ingestion / serialization ────────────────────────────────────────

/// Column-name mapping for feature CSV ingestion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    pub sample_id_column: String,
    pub batch_id_column: String,
}

impl Default for CsvSchema {
    fn default() -> CsvSchema {
        CsvSchema { sample_id_column: "sample_id".into(), batch_id_column: "batch_id".into() }
    }
}

/// Load a feature CSV: one `sample_id` column, one `batch_id` column, every
/// other column a numeric feature. Feature columns are reordered into the
/// canonical (lexicographic by name) order.
pub fn load_feature_matrix(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<FeatureMatrix> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();

    let sid_col = headers
        .iter()
        .position(|h| h == &schema.sample_id_column)
        .ok_or_else(|| Error::MissingColumn(schema.sample_id_column.clone()))?;
    let bid_col = headers
        .iter()
        .position(|h| h == &schema.batch_id_column)
        .ok_or_else(|| Error::MissingColumn(schema.batch_id_column.clone()))?;

    let mut feature_cols: Vec<(String, usize)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != sid_col && i != bid_col)
        .map(|(i, h)| (h.clone(), i))
        .collect();
    feature_cols.sort_by(|a, b| a.0.cmp(&b.0));

    let mut samples = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let sample_id = get(sid_col);
        let batch_id = get(bid_col);
        let mut row = Vec::with_capacity(feature_cols.len());
        for (name, i) in &feature_cols {
            let raw = get(*i);
            let v: f64 = raw.parse().map_err(|_| Error::NonNumericCell {
                row: row_idx,
                col: name.clone(),
                value: raw.clone(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumericCell { row: row_idx, col: name.clone(), value: raw });
            }
            row.push(v);
        }
        samples.push(SampleMeta::new(sample_id, batch_id));
        rows.push(row);
    }

    let descriptors = feature_cols
        .iter()
        .map(|(name, _)| FeatureDescriptor::parse(name))
        .collect();
    FeatureMatrix::new(samples, descriptors, Matrix::from_rows(&rows)?)
}

/// Write a feature CSV in the canonical layout (sample_id, batch_id, sorted
/// features; values with 17 significant digits for bit-exact re-ingestion).
pub fn write_feature_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["sample_id".to_string(), "batch_id".to_string()];
    header.extend(matrix.descriptors().iter().map(|d| d.name.clone()));
    writer.write_record(&header)?;
    for (i, s) in matrix.samples().iter().enumerate() {
        let mut record = vec![s.sample_id.clone(), s.batch_id.clone()];
        record.extend(matrix.values().row(i).iter().map(|&v| format_f64(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Optional per-sample metadata sidecar, keyed by sample_id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub age_years: Option<f64>,
    pub sex: Option<Sex>,
    pub survival_years: Option<f64>,
    pub event_observed: Option<bool>,
    pub tumor_volume_cm3: Option<f64>,
}

pub fn load_sample_metadata(path: impl AsRef<Path>) -> Result<BTreeMap<String, MetadataRecord>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let sid_col = col("sample_id").ok_or_else(|| Error::MissingColumn("sample_id".into()))?;

    let parse_f64 = |raw: &str, row: usize, name: &str| -> Result<Option<f64>> {
        if raw.is_empty() {
            return Ok(None);
        }
        raw.parse::<f64>()
            .map(Some)
            .map_err(|_| Error::NonNumericCell { row, col: name.to_string(), value: raw.to_string() })
    };

    let mut out = BTreeMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let get = |i: Option<usize>| i.and_then(|i| record.get(i)).unwrap_or("").trim().to_string();
        let sample_id = get(Some(sid_col));
        let sex = match get(col("sex")).to_ascii_uppercase().as_str() {
            "" => None,
            "M" | "MALE" => Some(Sex::M),
            "F" | "FEMALE" => Some(Sex::F),
            other => {
                return Err(Error::NonNumericCell {
                    row: row_idx,
                    col: "sex".into(),
                    value: other.to_string(),
                })
            }
        };
        let event = match get(col("event_observed")).to_ascii_lowercase().as_str() {
            "" => None,
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            other => {
                return Err(Error::NonNumericCell {
                    row: row_idx,
                    col: "event_observed".into(),
                    value: other.to_string(),
                })
            }
        };
        let rec = MetadataRecord {
            age_years: parse_f64(&get(col("age_years")), row_idx, "age_years")?,
            sex,
            survival_years: parse_f64(&get(col("survival_years")), row_idx, "survival_years")?,
            event_observed: event,
            tumor_volume_cm3: parse_f64(&get(col("tumor_volume_cm3")), row_idx, "tumor_volume_cm3")?,
        };
        if out.insert(sample_id.clone(), rec).is_some() {
            return Err(Error::DuplicateSampleId(sample_id));
        }
    }
    Ok(out)
}

// ── score panels ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignatureMatrix {
    PanCancer,
    Gbm,
}

impl SignatureMatrix {
    pub fn short_name(&self) -> &'static str {
        match self {
            SignatureMatrix::PanCancer => "pan",
            SignatureMatrix::Gbm => "gbm",
        }
    }

    /// Canonical category names for this signature matrix.
    pub fn canonical_categories(&self) -> &'static [&'static str] {
        match self {
            SignatureMatrix::PanCancer => &PAN_CANCER_CATEGORIES,
            SignatureMatrix::Gbm => &GBM_CATEGORIES,
        }
    }
}

/// Categories shared by both signature matrices.
pub const SHARED_CATEGORIES: [&str; 5] =
    ["immune_score", "t_cells", "tams", "dendritic_cells", "nk_cells"];

/// 11 pan-cancer categories: the 5 shared plus 6 pan-cancer-only.
pub const PAN_CANCER_CATEGORIES: [&str; 11] = [
    "immune_score",
    "t_cells",
    "tams",
    "dendritic_cells",
    "nk_cells",
    "cd8_t_cells",
    "cd4_t_cells",
    "treg_cells",
    "m0_macrophages",
    "m1_macrophages",
    "m2_macrophages",
];

/// 6 glioblastoma categories: the 5 shared plus microglia.
pub const GBM_CATEGORIES: [&str; 6] =
    ["immune_score", "t_cells", "tams", "dendritic_cells", "nk_cells", "microglia"];

/// Per-sample continuous scores for named categories under one signature
/// matrix, aligned to a feature matrix's sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePanel {
    pub signature_matrix: SignatureMatrix,
    categories: Vec<String>,
    sample_ids: Vec<String>,
    scores: Matrix,
}

impl ScorePanel {
    pub fn new(
        signature_matrix: SignatureMatrix,
        categories: Vec<String>,
        sample_ids: Vec<String>,
        scores: Matrix,
    ) -> Result<ScorePanel> {
        if scores.n_rows() != sample_ids.len() || scores.n_cols() != categories.len() {
            return Err(Error::DimensionMismatch("score panel shape".into()));
        }
        let mut seen = BTreeSet::new();
        for c in &categories {
            if c.is_empty() || !seen.insert(c.clone()) {
                return Err(Error::ConfigInvalid(format!("bad category name `{}`", c)));
            }
        }
        let mut ids = BTreeSet::new();
        for s in &sample_ids {
            if !ids.insert(s.clone()) {
                return Err(Error::DuplicateSampleId(s.clone()));
            }
        }
        if scores.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFiniteValue("scores must be finite and non-negative".into()));
        }
        Ok(ScorePanel { signature_matrix, categories, sample_ids, scores })
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn scores(&self) -> &Matrix {
        &self.scores
    }

    pub fn category_scores(&self, category: &str) -> Option<Vec<f64>> {
        let j = self.categories.iter().position(|c| c == category)?;
        Some(self.scores.column(j))
    }
}

/// Load a score CSV: `sample_id`, then one numeric column per category.
pub fn load_score_panel(path: impl AsRef<Path>, signature: SignatureMatrix) -> Result<ScorePanel> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let sid_col = headers
        .iter()
        .position(|h| h == "sample_id")
        .ok_or_else(|| Error::MissingColumn("sample_id".into()))?;
    let categories: Vec<(String, usize)> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != sid_col)
        .map(|(i, h)| (h.clone(), i))
        .collect();

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        ids.push(record.get(sid_col).unwrap_or("").trim().to_string());
        let mut row = Vec::with_capacity(categories.len());
        for (name, i) in &categories {
            let raw = record.get(*i).unwrap_or("").trim().to_string();
            let v: f64 = raw.parse().map_err(|_| Error::NonNumericCell {
                row: row_idx,
                col: name.clone(),
                value: raw.clone(),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    ScorePanel::new(
        signature,
        categories.into_iter().map(|(n, _)| n).collect(),
        ids,
        Matrix::from_rows(&rows)?,
    )
}

pub fn write_score_panel(panel: &ScorePanel, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["sample_id".to_string()];
    header.extend(panel.categories().iter().cloned());
    writer.write_record(&header)?;
    for (i, id) in panel.sample_ids().iter().enumerate() {
        let mut record = vec![id.clone()];
        record.extend(panel.scores().row(i).iter().map(|&v| format_f64(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reorder/filter panel rows to match the matrix's sample order exactly.
pub fn align_scores(matrix: &FeatureMatrix, panel: &ScorePanel) -> Result<ScorePanel> {
    let index: BTreeMap<&str, usize> = panel
        .sample_ids()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let mut order = Vec::with_capacity(matrix.n_samples());
    for s in matrix.samples() {
        match index.get(s.sample_id.as_str()) {
            Some(&i) => order.push(i),
            None => return Err(Error::MissingScoreForSample(s.sample_id.clone())),
        }
    }
    ScorePanel::new(
        panel.signature_matrix,
        panel.categories().to_vec(),
        order.iter().map(|&i| panel.sample_ids()[i].clone()).collect(),
        panel.scores().select_rows(&order),
    )
}

// ── group assembly ───────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSplit {
    pub group_id: String,
    pub train_cohorts: BTreeSet<String>,
    pub holdout_cohort: String,
}

impl GroupSplit {
    pub fn new(
        group_id: impl Into<String>,
        train_cohorts: impl IntoIterator<Item = String>,
        holdout_cohort: impl Into<String>,
    ) -> Result<GroupSplit> {
        let split = GroupSplit {
            group_id: group_id.into(),
            train_cohorts: train_cohorts.into_iter().collect(),
            holdout_cohort: holdout_cohort.into(),
        };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_cohorts.is_empty() {
            return Err(Error::InvalidGroupSplit("no training cohorts".into()));
        }
        if self.holdout_cohort.is_empty() {
            return Err(Error::InvalidGroupSplit("empty holdout cohort".into()));
        }
        if self.train_cohorts.contains(&self.holdout_cohort) {
            return Err(Error::InvalidGroupSplit(format!(
                "holdout cohort `{}` is listed among training cohorts",
                self.holdout_cohort
            )));
        }
        Ok(())
    }
}

/// Row-concatenate the training cohorts (in sorted cohort order, batch ids
/// preserved) and return the untouched holdout cohort alongside.
pub fn assemble_group(
    cohorts: &BTreeMap<String, FeatureMatrix>,
    split: &GroupSplit,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    split.validate()?;
    let holdout = cohorts
        .get(&split.holdout_cohort)
        .ok_or_else(|| Error::UnknownCohort(split.holdout_cohort.clone()))?;

    let mut train_parts: Vec<&FeatureMatrix> = Vec::new();
    for name in &split.train_cohorts {
        train_parts.push(cohorts.get(name).ok_or_else(|| Error::UnknownCohort(name.clone()))?);
    }

    let reference = train_parts[0].feature_names();
    for part in train_parts.iter().skip(1).chain(std::iter::once(&holdout)) {
        if part.feature_names() != reference {
            return Err(Error::FeatureMismatch(
                "cohorts disagree on feature names/order".into(),
            ));
        }
    }

    let mut samples = Vec::new();
    let mut values = Vec::new();
    for part in &train_parts {
        samples.extend(part.samples().iter().cloned());
        values.push(part.values());
    }
    let train = FeatureMatrix::new(
        samples,
        train_parts[0].descriptors().to_vec(),
        Matrix::vstack(&values)?,
    )?;
    Ok((train, holdout.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn tiny_matrix(batch: &str, ids: &[&str], p: usize, offset: f64) -> FeatureMatrix {
        let samples = ids.iter().map(|id| SampleMeta::new(*id, batch)).collect();
        let descriptors = (0..p)
            .map(|j| FeatureDescriptor::parse(&format!("f{:02}", j)))
            .collect();
        let rows: Vec<Vec<f64>> = (0..ids.len())
            .map(|i| (0..p).map(|j| offset + (i * p + j) as f64).collect())
            .collect();
        FeatureMatrix::new(samples, descriptors, Matrix::from_rows(&rows).unwrap()).unwrap()
    }

    #[test]
    fn descriptor_parse_encodes_tokens() {
        let d = FeatureDescriptor::parse("T1CE_enhancing_glcm_ClusterProminence");
        assert_eq!(d.sequence, Sequence::T1ce);
        assert_eq!(d.region, Region::Enhancing);
        assert_eq!(d.feature_class, FeatureClass::Glcm);
        assert_eq!(d.name, "T1CE_enhancing_glcm_ClusterProminence");

        let d = FeatureDescriptor::parse("flair_edema_shape_Sphericity");
        assert_eq!(d.sequence, Sequence::Flair);
        assert_eq!(d.region, Region::Edema);
        assert_eq!(d.feature_class, FeatureClass::Shape);

        let d = FeatureDescriptor::parse("weird_name");
        assert_eq!(d.sequence, Sequence::Other);
        assert_eq!(d.region, Region::Other);
        assert_eq!(d.feature_class, FeatureClass::Other);

        let d = FeatureDescriptor::parse("t2_necrotic_ngtdm_Busyness");
        assert_eq!(d.region, Region::NecroticCore);
        assert_eq!(d.feature_class, FeatureClass::Ngtdm);
    }

    #[test]
    fn load_feature_matrix_shape_contract() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "sample_id,batch_id,b_feat,a_feat,c_feat").unwrap();
        writeln!(f, "s1,siteA,1.0,2.0,3.0").unwrap();
        writeln!(f, "s2,siteA,4.0,5.0,6.0").unwrap();
        writeln!(f, "s3,siteB,7.0,8.0,9.0").unwrap();
        writeln!(f, "s4,siteB,10.0,11.0,12.0").unwrap();
        drop(f);
        let m = load_feature_matrix(&path, &CsvSchema::default()).unwrap();
        assert_eq!(m.n_samples(), 4);
        assert_eq!(m.n_features(), 3);
        // canonical (lexicographic) column order
        assert_eq!(m.feature_names(), vec!["a_feat", "b_feat", "c_feat"]);
        assert_eq!(m.values().row(0), &[2.0, 1.0, 3.0]);
    }

    #[test]
    fn load_rejects_non_numeric_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "sample_id,batch_id,x").unwrap();
        writeln!(f, "s1,a,1.0").unwrap();
        writeln!(f, "s2,a,abc").unwrap();
        drop(f);
        match load_feature_matrix(&path, &CsvSchema::default()) {
            Err(Error::NonNumericCell { row, col, value }) => {
                assert_eq!(row, 1);
                assert_eq!(col, "x");
                assert_eq!(value, "abc");
            }
            other => panic!("expected NonNumericCell, got {:?}", other),
        }
    }

    #[test]
    fn load_rejects_missing_column_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "sample_id,x\ns1,1.0\n").unwrap();
        assert!(matches!(
            load_feature_matrix(&path, &CsvSchema::default()),
            Err(Error::MissingColumn(c)) if c == "batch_id"
        ));
        std::fs::write(&path, "sample_id,batch_id,x\ns1,a,1.0\ns1,a,2.0\n").unwrap();
        assert!(matches!(
            load_feature_matrix(&path, &CsvSchema::default()),
            Err(Error::DuplicateSampleId(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_matrix("siteA", &["s1", "s2", "s3"], 4, 0.25);
        let path = dir.path().join("out.csv");
        write_feature_matrix(&m, &path).unwrap();
        let back = load_feature_matrix(&path, &CsvSchema::default()).unwrap();
        assert_eq!(back.values(), m.values());
        assert_eq!(back.feature_names(), m.feature_names());
        // second round trip gives identical bytes
        let path2 = dir.path().join("out2.csv");
        write_feature_matrix(&back, &path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn assemble_group_partitions_samples() {
        let mut cohorts = BTreeMap::new();
        cohorts.insert("tcga".to_string(), tiny_matrix("tcga", &["t1", "t2"], 3, 0.0));
        cohorts.insert("cptac".to_string(), tiny_matrix("cptac", &["c1", "c2", "c3"], 3, 1.0));
        cohorts.insert("ivy".to_string(), tiny_matrix("ivy", &["i1"], 3, 2.0));
        let split = GroupSplit::new(
            "G1",
            ["tcga".to_string(), "cptac".to_string()],
            "ivy",
        )
        .unwrap();
        let (train, holdout) = assemble_group(&cohorts, &split).unwrap();
        assert_eq!(train.n_samples() + holdout.n_samples(), 6);
        assert_eq!(holdout.n_samples(), 1);
        let train_ids: BTreeSet<_> = train.sample_ids().into_iter().collect();
        assert!(!train_ids.contains("i1"));
        // batch ids preserved
        assert_eq!(train.distinct_batches().len(), 2);
    }

    #[test]
    fn assemble_group_cohort_sizes_anchor() {
        // four training cohorts totalling 155 and a holdout of 21 → 176
        let sizes = [50usize, 45, 40, 20];
        let mut cohorts = BTreeMap::new();
        for (k, n) in sizes.iter().enumerate() {
            let ids: Vec<String> = (0..*n).map(|i| format!("c{}_{}", k, i)).collect();
            let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
            cohorts.insert(format!("site{}", k), tiny_matrix(&format!("site{}", k), &refs, 2, 0.0));
        }
        let ids: Vec<String> = (0..21).map(|i| format!("h_{}", i)).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        cohorts.insert("holdout".to_string(), tiny_matrix("holdout", &refs, 2, 0.0));

        let split = GroupSplit::new(
            "G1",
            (0..4).map(|k| format!("site{}", k)),
            "holdout",
        )
        .unwrap();
        let (train, holdout) = assemble_group(&cohorts, &split).unwrap();
        assert_eq!(train.n_samples(), 155);
        assert_eq!(holdout.n_samples(), 21);
        assert_eq!(train.n_samples() + holdout.n_samples(), 176);
    }

    #[test]
    fn group_split_rejects_holdout_in_train() {
        let err = GroupSplit::new("G1", ["a".to_string(), "b".to_string()], "a");
        assert!(matches!(err, Err(Error::InvalidGroupSplit(_))));
    }

    #[test]
    fn assemble_group_rejects_feature_mismatch() {
        let mut cohorts = BTreeMap::new();
        cohorts.insert("a".to_string(), tiny_matrix("a", &["s1", "s2"], 3, 0.0));
        // different feature count
        cohorts.insert("b".to_string(), tiny_matrix("b", &["s3", "s4"], 4, 0.0));
        let split = GroupSplit::new("G", ["a".to_string()], "b").unwrap();
        assert!(matches!(assemble_group(&cohorts, &split), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn align_scores_reorders_and_filters() {
        let m = tiny_matrix("a", &["s2", "s1"], 2, 0.0);
        let panel = ScorePanel::new(
            SignatureMatrix::PanCancer,
            vec!["score".to_string()],
            vec!["s1".to_string(), "s2".to_string(), "extra".to_string()],
            Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
        )
        .unwrap();
        let aligned = align_scores(&m, &panel).unwrap();
        assert_eq!(aligned.sample_ids(), &["s2".to_string(), "s1".to_string()]);
        assert_eq!(aligned.scores().column(0), vec![2.0, 1.0]);

        // already aligned → identical
        let again = align_scores(&m, &aligned).unwrap();
        assert_eq!(again, aligned);

        // missing sample → error
        let small = ScorePanel::new(
            SignatureMatrix::PanCancer,
            vec!["score".to_string()],
            vec!["s1".to_string()],
            Matrix::from_rows(&[vec![1.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(
            align_scores(&m, &small),
            Err(Error::MissingScoreForSample(id)) if id == "s2"
        ));
    }

    #[test]
    fn category_universe_is_seventeen_labels() {
        let pan: BTreeSet<_> = PAN_CANCER_CATEGORIES.iter().collect();
        let gbm: BTreeSet<_> = GBM_CATEGORIES.iter().collect();
        assert_eq!(pan.len(), 11);
        assert_eq!(gbm.len(), 6);
        let shared: Vec<_> = pan.intersection(&gbm).collect();
        assert_eq!(shared.len(), 5);
        assert!(gbm.contains(&"microglia") && !pan.contains(&"microglia"));
        // 11 + 6 labels in total across the two matrices
        assert_eq!(PAN_CANCER_CATEGORIES.len() + GBM_CATEGORIES.len(), 17);
    }

    #[test]
    fn metadata_invariant_enforced() {
        let mut s = SampleMeta::new("x", "b");
        s.survival_years = Some(1.0);
        assert!(s.validate().is_err());
        s.event_observed = Some(true);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn zero_variance_columns_flagged() {
        let samples = vec![SampleMeta::new("a", "x"), SampleMeta::new("b", "x")];
        let descriptors = vec![FeatureDescriptor::parse("f0"), FeatureDescriptor::parse("f1")];
        let m = FeatureMatrix::new(
            samples,
            descriptors,
            Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0, 3.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(m.zero_variance_columns(), vec![0]);
    }

    #[test]
    fn rejects_non_finite_values() {
        let samples = vec![SampleMeta::new("a", "x")];
        let descriptors = vec![FeatureDescriptor::parse("f0")];
        let err = FeatureMatrix::new(
            samples,
            descriptors,
            Matrix::from_rows(&[vec![f64::NAN]]).unwrap(),
        );
        assert!(matches!(err, Err(Error::NonFiniteValue(_))));
    }
}
