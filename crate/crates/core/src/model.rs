//! Fitting and evaluating the additive surrogate.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Column, ColumnType, Dataset, PredictionVector, TypeHints, Value};
use crate::design::{assemble, default_terms, encode_features, EncoderSet, TermKey};
use crate::encoding::{build_encoder, Encoder, EncoderKind, SparseWeights};
use crate::error::{MidError, Result};
use crate::solver::{solve, SolveReport, SolverConfig};
use crate::sum::exact_sum;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// 1 for main effects only, 2 to add all pairwise interactions.
    pub order: usize,
    /// Explicit term list; overrides `order`.
    pub terms: Option<Vec<TermKey>>,
    pub k_main: usize,
    pub k_inter: usize,
    /// Encoding for numeric features with many distinct values.
    pub encoding: EncoderKind,
    pub solver: SolverConfig,
    /// Free-form record of where the data came from.
    pub provenance: Option<serde_json::Value>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            order: 2,
            terms: None,
            k_main: 25,
            k_inter: 5,
            encoding: EncoderKind::Linear,
            solver: SolverConfig::default(),
            provenance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
    /// Observed `[min, max]` of a numeric training column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderRole {
    Main,
    Interaction,
}

/// Coefficients of one effect, row-major for interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    pub term: TermKey,
    pub shape: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub delta: Vec<f64>,
}

impl EffectTable {
    #[inline]
    fn eval(&self, wp: &SparseWeights, wq: Option<&SparseWeights>) -> f64 {
        match wq {
            None => wp.dot(&self.coefficients),
            Some(wq) => {
                let kq = self.shape[1];
                let mut v = 0.0;
                for (s, ws) in wp.iter() {
                    let row = &self.coefficients[s * kq..(s + 1) * kq];
                    v += ws * wq.dot(row);
                }
                v
            }
        }
    }

    /// Largest weighted grid-line sum, relative to `max |beta| * max delta`.
    pub fn centering_violation(&self) -> f64 {
        let scale = self.coefficients.iter().fold(0.0f64, |m, b| m.max(b.abs()))
            * self.delta.iter().fold(0.0f64, |m, d| m.max(*d));
        if scale == 0.0 {
            return 0.0;
        }
        let wsum = |idx: &mut dyn Iterator<Item = usize>| -> f64 {
            exact_sum(idx.map(|c| self.coefficients[c] * self.delta[c])).abs()
        };
        let worst = match self.shape[..] {
            [k] => wsum(&mut (0..k)),
            [kp, kq] => {
                let rows = (0..kp).map(|s| wsum(&mut (0..kq).map(|t| s * kq + t)));
                let cols = (0..kq).map(|t| wsum(&mut (0..kp).map(|s| s * kq + t)));
                rows.chain(cols).fold(0.0, f64::max)
            }
            _ => unreachable!("effects have one or two dimensions"),
        };
        worst / scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub order: usize,
    pub k_main: usize,
    pub k_inter: usize,
    pub encoding: EncoderKind,
    pub solver: SolverConfig,
    pub report: SolveReport,
    pub n_rows: usize,
    pub library_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Fitted surrogate: intercept plus main and pairwise effects.
#[derive(Debug, Clone, PartialEq)]
pub struct MidModel {
    features: Vec<FeatureInfo>,
    encoders: EncoderSet,
    intercept: f64,
    terms: Vec<EffectTable>,
    uvr_train: Option<f64>,
    fit_meta: Option<FitMeta>,
}

/// Per-feature encoder weights for a batch of rows.
struct Encoded {
    main: Vec<Option<Vec<SparseWeights>>>,
    inter: Vec<Option<Vec<SparseWeights>>>,
}

pub fn fit(dataset: &Dataset, predictions: &PredictionVector, options: &FitOptions) -> Result<MidModel> {
    let n = dataset.n_rows();
    let d = dataset.n_cols();
    if n < 2 {
        return Err(MidError::InvalidData(format!("at least 2 rows are required, got {n}")));
    }
    if predictions.len() != n {
        return Err(MidError::InvalidData(format!(
            "{} predictions for {n} rows",
            predictions.len()
        )));
    }
    if options.k_main < 2 || options.k_inter < 2 {
        return Err(MidError::InvalidArgument(format!(
            "k must be at least 2, got ({}, {})",
            options.k_main, options.k_inter
        )));
    }
    let mut terms = match &options.terms {
        Some(t) => t.clone(),
        None => {
            if !(1..=2).contains(&options.order) {
                return Err(MidError::InvalidArgument(format!(
                    "order must be 1 or 2, got {}",
                    options.order
                )));
            }
            default_terms(d, options.order)
        }
    };
    terms.sort();
    terms.dedup();
    if terms.is_empty() {
        return Err(MidError::InvalidArgument("no terms to fit".into()));
    }
    if let Some(t) = terms.iter().find(|t| t.features().iter().any(|&j| j >= d)) {
        return Err(MidError::InvalidArgument(format!("term {t} references a missing feature")));
    }
    let order = terms.iter().map(TermKey::order).max().unwrap_or(1);

    let mut encoders = EncoderSet {
        main: vec![None; d],
        interaction: vec![None; d],
    };
    for t in &terms {
        for j in t.features() {
            let (slot, k) = if t.is_main() {
                (&mut encoders.main[j], options.k_main)
            } else {
                (&mut encoders.interaction[j], options.k_inter)
            };
            if slot.is_none() {
                *slot = Some(build_encoder(dataset.column(j), k, Some(options.encoding))?);
            }
        }
    }

    let y = predictions.as_slice();
    let intercept = exact_sum(y.iter().copied()) / n as f64;
    let y_tilde: Vec<f64> = y.iter().map(|v| v - intercept).collect();
    let system = assemble(dataset, &encoders, &terms)?;
    let report = solve(&system, &y_tilde, &options.solver)?;

    let tables = system
        .blocks()
        .iter()
        .map(|b| EffectTable {
            term: b.term,
            shape: b.shape.clone(),
            coefficients: report.coefficients[b.cols.clone()].to_vec(),
            delta: system.delta()[b.cols.clone()].to_vec(),
        })
        .collect();

    let features = dataset
        .names()
        .iter()
        .zip(dataset.columns())
        .map(|(name, col)| FeatureInfo {
            name: name.clone(),
            column_type: col.column_type(),
            range: col.as_numeric().map(|v| {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                [lo, hi]
            }),
        })
        .collect();

    let mut model = MidModel {
        features,
        encoders,
        intercept,
        terms: tables,
        uvr_train: None,
        fit_meta: Some(FitMeta {
            order,
            k_main: options.k_main,
            k_inter: options.k_inter,
            encoding: options.encoding,
            solver: options.solver,
            report,
            n_rows: n,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            provenance: options.provenance.clone(),
        }),
    };
    model.uvr_train = match model.uvr(dataset, predictions) {
        Ok(v) => Some(v),
        Err(MidError::Undefined(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(model)
}

impl MidModel {
    /// Builds a model from explicit parts; coefficients are taken as given.
    pub fn from_parts(
        features: Vec<FeatureInfo>,
        encoders: EncoderSet,
        intercept: f64,
        mut terms: Vec<EffectTable>,
    ) -> Result<Self> {
        let d = features.len();
        if encoders.main.len() != d || encoders.interaction.len() != d {
            return Err(MidError::InvalidData("encoder set does not match the feature list".into()));
        }
        if !intercept.is_finite() {
            return Err(MidError::InvalidData("non-finite intercept".into()));
        }
        terms.sort_by_key(|t| t.term);
        for w in terms.windows(2) {
            if w[0].term == w[1].term {
                return Err(MidError::InvalidData(format!("duplicate term {}", w[0].term)));
            }
        }
        for e in encoders.main.iter().chain(&encoders.interaction).flatten() {
            e.validate()?;
        }
        for t in &terms {
            if t.term.features().iter().any(|&j| j >= d) {
                return Err(MidError::InvalidData(format!("term {} references a missing feature", t.term)));
            }
            let shape = encoders.block_shape(&t.term).map_err(|e| MidError::InvalidData(e.to_string()))?;
            let width: usize = shape.iter().product();
            if shape != t.shape || t.coefficients.len() != width || t.delta.len() != width {
                return Err(MidError::InvalidData(format!("effect {} has inconsistent dimensions", t.term)));
            }
            if t.coefficients.iter().chain(&t.delta).any(|v| !v.is_finite()) {
                return Err(MidError::InvalidData(format!("effect {} has non-finite entries", t.term)));
            }
        }
        Ok(MidModel {
            features,
            encoders,
            intercept,
            terms,
            uvr_train: None,
            fit_meta: None,
        })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn features(&self) -> &[FeatureInfo] {
        &self.features
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn encoders(&self) -> &EncoderSet {
        &self.encoders
    }

    pub fn terms(&self) -> &[EffectTable] {
        &self.terms
    }

    pub fn term_keys(&self) -> Vec<TermKey> {
        self.terms.iter().map(|t| t.term).collect()
    }

    pub fn uvr_train(&self) -> Option<f64> {
        self.uvr_train
    }

    pub fn fit_meta(&self) -> Option<&FitMeta> {
        self.fit_meta.as_ref()
    }

    pub fn n_main_terms(&self) -> usize {
        self.terms.iter().filter(|t| t.term.is_main()).count()
    }

    pub fn n_interaction_terms(&self) -> usize {
        self.terms.len() - self.n_main_terms()
    }

    /// Type hints that make a CSV reader reproduce the training column types.
    pub fn type_hints(&self) -> TypeHints {
        self.features
            .iter()
            .map(|f| (f.name.clone(), f.column_type))
            .collect()
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| MidError::UnknownColumn(name.to_string()))
    }

    pub fn term_label(&self, term: &TermKey) -> String {
        term.label(&self.feature_names())
    }

    /// Resolves `x1` or `x1:x2` to a fitted term.
    pub fn term_key(&self, label: &str) -> Result<TermKey> {
        let unknown = || MidError::UnknownTerm(label.to_string());
        let parts: Vec<&str> = label.split(':').collect();
        let key = match parts[..] {
            [a] => TermKey::main(self.feature_index(a).map_err(|_| unknown())?),
            [a, b] => {
                let p = self.feature_index(a).map_err(|_| unknown())?;
                let q = self.feature_index(b).map_err(|_| unknown())?;
                TermKey::pair(p, q).map_err(|_| unknown())?
            }
            _ => return Err(unknown()),
        };
        self.term_position(&key).map(|_| key).ok_or_else(unknown)
    }

    fn term_position(&self, key: &TermKey) -> Option<usize> {
        self.terms.binary_search_by(|t| t.term.cmp(key)).ok()
    }

    pub fn effect_table(&self, key: &TermKey) -> Option<&EffectTable> {
        self.term_position(key).map(|i| &self.terms[i])
    }

    /// Reorders `dataset` columns to the model's features, by name.
    pub fn align(&self, dataset: &Dataset) -> Result<Dataset> {
        let cols = self
            .features
            .iter()
            .map(|f| {
                let col = dataset.column_by_name(&f.name)?;
                let col = match (f.column_type, col) {
                    (ColumnType::Categorical, Column::Numeric(v)) => {
                        let labels: Vec<String> = v.iter().map(|x| Value::Num(*x).to_string()).collect();
                        Column::categorical_from_labels(&labels)
                    }
                    (ColumnType::Numeric, Column::Categorical { .. }) => {
                        return Err(MidError::InvalidData(format!(
                            "feature '{}' was numeric at fit time but is categorical here",
                            f.name
                        )))
                    }
                    _ => col.clone(),
                };
                Ok((f.name.clone(), col))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(cols)
    }

    fn encode(&self, dataset: &Dataset) -> Result<Encoded> {
        let aligned = self.align(dataset)?;
        Ok(Encoded {
            main: encode_features(&aligned, &self.encoders.main)?,
            inter: encode_features(&aligned, &self.encoders.interaction)?,
        })
    }

    fn term_column(&self, table: &EffectTable, enc: &Encoded, n: usize) -> Vec<f64> {
        let t = &table.term;
        match t.second() {
            None => {
                let w = enc.main[t.first()].as_ref().expect("encoded main feature");
                w.iter().map(|wp| table.eval(wp, None)).collect()
            }
            Some(q) => {
                let wp = enc.inter[t.first()].as_ref().expect("encoded feature");
                let wq = enc.inter[q].as_ref().expect("encoded feature");
                (0..n).map(|i| table.eval(&wp[i], Some(&wq[i]))).collect()
            }
        }
    }

    /// Value of every term at every row, indexed `[term][row]` in term order.
    pub fn term_values(&self, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
        let enc = self.encode(dataset)?;
        let n = dataset.n_rows();
        Ok(self
            .terms
            .par_iter()
            .map(|t| self.term_column(t, &enc, n))
            .collect())
    }

    /// Intercept plus every effect, summed exactly per row.
    pub fn predict(&self, dataset: &Dataset) -> Result<PredictionVector> {
        let values = self.term_values(dataset)?;
        Ok(PredictionVector::from_sums(predict_from_terms(self.intercept, &values, dataset.n_rows())))
    }

    /// Effect of `term` at explicit points, each holding one value per feature
    /// of the term. With `include_main`, an interaction also gets the main
    /// effects of both of its features added.
    pub fn effect(&self, term: &TermKey, points: &[Vec<Value>], include_main: bool) -> Result<Vec<f64>> {
        let names = self.feature_names();
        let table = self
            .effect_table(term)
            .ok_or_else(|| MidError::UnknownTerm(term.label(&names)))?;
        let encode = |e: &Option<Encoder>, j: usize, v: &Value| -> Result<SparseWeights> {
            e.as_ref()
                .expect("fitted term has encoders")
                .encode(v)
                .map_err(|err| err.with_feature(&names[j]))
        };
        points
            .iter()
            .map(|pt| {
                if pt.len() != term.order() {
                    return Err(MidError::InvalidArgument(format!(
                        "effect {} takes {} value(s) per point, got {}",
                        term.label(&names),
                        term.order(),
                        pt.len()
                    )));
                }
                match term.second() {
                    None => Ok(table.eval(&encode(&self.encoders.main[term.first()], term.first(), &pt[0])?, None)),
                    Some(q) => {
                        let p = term.first();
                        let wp = encode(&self.encoders.interaction[p], p, &pt[0])?;
                        let wq = encode(&self.encoders.interaction[q], q, &pt[1])?;
                        let mut v = table.eval(&wp, Some(&wq));
                        if include_main {
                            for (j, x) in [(p, &pt[0]), (q, &pt[1])] {
                                if let Some(m) = self.effect_table(&TermKey::main(j)) {
                                    v += m.eval(&encode(&self.encoders.main[j], j, x)?, None);
                                }
                            }
                        }
                        Ok(v)
                    }
                }
            })
            .collect()
    }

    /// Evaluation grid for one feature: all levels or distinct values for
    /// indicator encoders, otherwise `size` equispaced points over the
    /// observed training range.
    pub fn feature_grid(&self, j: usize, size: usize) -> Vec<Value> {
        let enc = self.encoders.main[j].as_ref().or(self.encoders.interaction[j].as_ref());
        match (enc, self.features[j].range) {
            (Some(e @ Encoder::Indicator(_)), _) => e.grid_values(),
            (_, Some([lo, hi])) => equispaced(lo, hi, size).into_iter().map(Value::Num).collect(),
            (Some(e), None) => e.grid_values(),
            (None, None) => Vec::new(),
        }
    }

    /// Uninterpreted variation ratio on `dataset` against `predictions`.
    pub fn uvr(&self, dataset: &Dataset, predictions: &PredictionVector) -> Result<f64> {
        let fitted = self.predict(dataset)?;
        uvr_of(predictions.as_slice(), fitted.as_slice())
    }

    /// Largest relative grid-line centering residual over all effects.
    pub fn centering_violation(&self) -> f64 {
        self.terms
            .iter()
            .map(EffectTable::centering_violation)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let version = raw
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| MidError::InvalidData("model file has no version field".into()))?;
        if version != MODEL_VERSION as u64 {
            return Err(MidError::Version {
                found: version.min(u32::MAX as u64) as u32,
                supported: MODEL_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(raw)?;
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub(crate) fn predict_from_terms(intercept: f64, values: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(values.len() + 1);
    (0..n)
        .map(|i| {
            buf.clear();
            buf.push(intercept);
            buf.extend(values.iter().map(|col| col[i]));
            exact_sum(buf.iter().copied())
        })
        .collect()
}

/// `sum (y - f)^2 / sum (y - mean y)^2`.
pub fn uvr_of(y: &[f64], fitted: &[f64]) -> Result<f64> {
    if y.len() != fitted.len() || y.is_empty() {
        return Err(MidError::InvalidData("prediction and fitted lengths differ".into()));
    }
    let n = y.len() as f64;
    let mean = exact_sum(y.iter().copied()) / n;
    let total = exact_sum(y.iter().map(|v| (v - mean) * (v - mean)));
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if total <= n * (f64::EPSILON * scale).powi(2) {
        return Err(MidError::Undefined(
            "uninterpreted variation ratio needs non-constant predictions".into(),
        ));
    }
    let resid = exact_sum(y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)));
    Ok(resid / total)
}

pub fn equispaced(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..size)
            .map(|i| {
                if i == size - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (size - 1) as f64
                }
            })
            .collect(),
    }
}

impl PredictionVector {
    fn from_sums(values: Vec<f64>) -> Self {
        PredictionVector::new(values).expect("sums of finite values are finite")
    }
}

#[derive(Serialize, Deserialize)]
struct EncoderEntry {
    feature: String,
    role: EncoderRole,
    #[serde(flatten)]
    encoder: Encoder,
}

#[derive(Serialize, Deserialize)]
struct TermEntry {
    features: Vec<String>,
    shape: Vec<usize>,
    coefficients: Vec<f64>,
    delta: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    intercept: f64,
    features: Vec<FeatureInfo>,
    encoders: Vec<EncoderEntry>,
    terms: Vec<TermEntry>,
    uvr_train: Option<f64>,
    #[serde(default)]
    fit_meta: Option<FitMeta>,
}

impl ModelFile {
    fn from_model(m: &MidModel) -> Self {
        let names = m.feature_names();
        let mut encoders = Vec::new();
        for (role, list) in [
            (EncoderRole::Main, &m.encoders.main),
            (EncoderRole::Interaction, &m.encoders.interaction),
        ] {
            for (j, e) in list.iter().enumerate() {
                if let Some(e) = e {
                    encoders.push(EncoderEntry {
                        feature: names[j].clone(),
                        role,
                        encoder: e.clone(),
                    });
                }
            }
        }
        ModelFile {
            version: MODEL_VERSION,
            intercept: m.intercept,
            features: m.features.clone(),
            encoders,
            terms: m
                .terms
                .iter()
                .map(|t| TermEntry {
                    features: t.term.features().into_iter().map(|j| names[j].clone()).collect(),
                    shape: t.shape.clone(),
                    coefficients: t.coefficients.clone(),
                    delta: t.delta.clone(),
                })
                .collect(),
            uvr_train: m.uvr_train,
            fit_meta: m.fit_meta.clone(),
        }
    }

    fn into_model(self) -> Result<MidModel> {
        let d = self.features.len();
        let index = |name: &str| {
            self.features
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| MidError::InvalidData(format!("model file references unknown feature '{name}'")))
        };
        let mut set = EncoderSet {
            main: vec![None; d],
            interaction: vec![None; d],
        };
        for e in self.encoders {
            let j = index(&e.feature)?;
            let slot = match e.role {
                EncoderRole::Main => &mut set.main[j],
                EncoderRole::Interaction => &mut set.interaction[j],
            };
            if slot.replace(e.encoder).is_some() {
                return Err(MidError::InvalidData(format!("duplicate encoder for '{}'", e.feature)));
            }
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            let key = match &t.features[..] {
                [a] => TermKey::main(index(a)?),
                [a, b] => TermKey::pair(index(a)?, index(b)?).map_err(|e| MidError::InvalidData(e.to_string()))?,
                _ => return Err(MidError::InvalidData("terms must have one or two features".into())),
            };
            terms.push(EffectTable {
                term: key,
                shape: t.shape,
                coefficients: t.coefficients,
                delta: t.delta,
            });
        }
        let mut model = MidModel::from_parts(self.features, set, self.intercept, terms)?;
        model.uvr_train = self.uvr_train;
        model.fit_meta = self.fit_meta;
        Ok(model)
    }
}
