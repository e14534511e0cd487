//! Per-feature encoding functions.
//!
//! Every encoder maps a value to nonnegative weights over `k` basis functions
//! that sum to one. Effects are linear in those weights, so a main effect is
//! `sum_s beta_s * chi_s(x)` and an interaction is the tensor product of two
//! encoders.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Column, Value};
use crate::error::{MidError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// One basis function per distinct value or level.
    Indicator,
    /// Piecewise constant over half-open intervals between breakpoints.
    Step,
    /// Piecewise linear hat functions on knots, constant outside the knots.
    Linear,
}

impl std::str::FromStr for EncoderKind {
    type Err = MidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(EncoderKind::Indicator),
            "step" => Ok(EncoderKind::Step),
            "linear" => Ok(EncoderKind::Linear),
            other => Err(MidError::InvalidArgument(format!(
                "unknown encoding '{other}' (expected linear, step or indicator)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IndicatorGrid {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl IndicatorGrid {
    fn len(&self) -> usize {
        match self {
            IndicatorGrid::Numeric(v) => v.len(),
            IndicatorGrid::Categorical(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "grid", rename_all = "snake_case")]
pub enum Encoder {
    Indicator(IndicatorGrid),
    /// The `k - 1` interior breakpoints.
    Step(Vec<f64>),
    /// The `k` knots; the first and last are the observed extremes.
    Linear(Vec<f64>),
}

/// At most two nonzero weights, which is all any encoder produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseWeights {
    idx: [u32; 2],
    w: [f64; 2],
    len: u8,
}

impl SparseWeights {
    pub fn one(i: usize) -> Self {
        SparseWeights {
            idx: [i as u32, 0],
            w: [1.0, 0.0],
            len: 1,
        }
    }

    fn two(i: usize, wi: f64, j: usize, wj: f64) -> Self {
        SparseWeights {
            idx: [i as u32, j as u32],
            w: [wi, wj],
            len: 2,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(move |i| (self.idx[i] as usize, self.w[i]))
    }

    pub fn nnz(&self) -> usize {
        self.len as usize
    }

    pub fn to_dense(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (i, w) in self.iter() {
            out[i] += w;
        }
        out
    }

    /// Weighted sum of `coefficients` under these weights.
    #[inline]
    pub fn dot(&self, coefficients: &[f64]) -> f64 {
        match self.len {
            1 => self.w[0] * coefficients[self.idx[0] as usize],
            _ => {
                self.w[0] * coefficients[self.idx[0] as usize]
                    + self.w[1] * coefficients[self.idx[1] as usize]
            }
        }
    }
}

/// Type-7 empirical quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn dedup_increasing(mut v: Vec<f64>) -> Vec<f64> {
    v.dedup_by(|a, b| a <= b);
    v
}

/// Chooses and fits an encoder for one column.
///
/// Categorical columns and numeric columns with at most `k_max` distinct
/// values get an indicator encoder. Other numeric columns get `kind_override`
/// (linear by default) with knots at empirical quantiles; coinciding quantiles
/// are merged so `k` can come out below `k_max`.
pub fn build_encoder(column: &Column, k_max: usize, kind_override: Option<EncoderKind>) -> Result<Encoder> {
    if k_max < 2 {
        return Err(MidError::InvalidArgument(format!(
            "number of encoding functions must be at least 2, got {k_max}"
        )));
    }
    if column.is_empty() {
        return Err(MidError::InvalidData("cannot build an encoder for an empty column".into()));
    }
    match column {
        Column::Categorical { codes, levels } => {
            let used: BTreeSet<u32> = codes.iter().copied().collect();
            Ok(Encoder::Indicator(IndicatorGrid::Categorical(
                used.into_iter().map(|c| levels[c as usize].clone()).collect(),
            )))
        }
        Column::Numeric(values) => {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            let kind = kind_override.unwrap_or(EncoderKind::Linear);
            if distinct.len() <= k_max || distinct.len() == 1 || kind == EncoderKind::Indicator {
                return Ok(Encoder::Indicator(IndicatorGrid::Numeric(distinct)));
            }
            let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
            match kind {
                EncoderKind::Linear => {
                    let knots = (0..k_max)
                        .map(|s| match s {
                            0 => min,
                            s if s == k_max - 1 => max,
                            s => quantile_sorted(&sorted, s as f64 / (k_max - 1) as f64),
                        })
                        .collect();
                    Ok(Encoder::Linear(dedup_increasing(knots)))
                }
                EncoderKind::Step => {
                    let breaks: Vec<f64> = (1..k_max)
                        .map(|s| quantile_sorted(&sorted, s as f64 / k_max as f64))
                        .filter(|&b| b > min && b < max)
                        .collect();
                    let breaks = dedup_increasing(breaks);
                    if breaks.is_empty() {
                        Ok(Encoder::Indicator(IndicatorGrid::Numeric(distinct)))
                    } else {
                        Ok(Encoder::Step(breaks))
                    }
                }
                EncoderKind::Indicator => unreachable!(),
            }
        }
    }
}

impl Encoder {
    pub fn kind(&self) -> EncoderKind {
        match self {
            Encoder::Indicator(_) => EncoderKind::Indicator,
            Encoder::Step(_) => EncoderKind::Step,
            Encoder::Linear(_) => EncoderKind::Linear,
        }
    }

    /// Number of encoding functions.
    pub fn k(&self) -> usize {
        match self {
            Encoder::Indicator(g) => g.len(),
            Encoder::Step(b) => b.len() + 1,
            Encoder::Linear(knots) => knots.len(),
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Encoder::Indicator(IndicatorGrid::Categorical(_)))
    }

    pub fn encode(&self, value: &Value) -> Result<SparseWeights> {
        match (self, value) {
            (Encoder::Indicator(IndicatorGrid::Categorical(levels)), v) => {
                let label = v.to_string();
                levels
                    .iter()
                    .position(|l| *l == label)
                    .map(SparseWeights::one)
                    .ok_or_else(|| unknown_level(label))
            }
            (Encoder::Indicator(IndicatorGrid::Numeric(values)), Value::Num(x)) => values
                .binary_search_by(|v| v.total_cmp(x))
                .map(SparseWeights::one)
                .map_err(|_| unknown_level(x.to_string())),
            (_, Value::Num(x)) => Ok(self.encode_f64(*x)),
            (_, Value::Level(l)) => Err(MidError::InvalidData(format!(
                "categorical value '{l}' given to a numeric encoder"
            ))),
        }
    }

    /// Encodes a number; only valid for step and linear encoders.
    #[inline]
    pub fn encode_f64(&self, x: f64) -> SparseWeights {
        match self {
            Encoder::Step(breaks) => SparseWeights::one(breaks.partition_point(|&b| b <= x)),
            Encoder::Linear(knots) => {
                let k = knots.len();
                if x <= knots[0] {
                    return SparseWeights::one(0);
                }
                if x >= knots[k - 1] {
                    return SparseWeights::one(k - 1);
                }
                let s = knots.partition_point(|&t| t <= x) - 1;
                let upper = (x - knots[s]) / (knots[s + 1] - knots[s]);
                if upper == 0.0 {
                    SparseWeights::one(s)
                } else {
                    SparseWeights::two(s, 1.0 - upper, s + 1, upper)
                }
            }
            Encoder::Indicator(_) => panic!("encode_f64 called on an indicator encoder"),
        }
    }

    /// Encodes every row of a column.
    pub fn encode_column(&self, column: &Column) -> Result<Vec<SparseWeights>> {
        match (self, column) {
            (Encoder::Indicator(IndicatorGrid::Categorical(levels)), Column::Categorical { codes, levels: col_levels }) => {
                let map: Vec<Option<usize>> = col_levels
                    .iter()
                    .map(|l| levels.iter().position(|e| e == l))
                    .collect();
                codes
                    .iter()
                    .map(|&c| {
                        map[c as usize]
                            .map(SparseWeights::one)
                            .ok_or_else(|| unknown_level(col_levels[c as usize].clone()))
                    })
                    .collect()
            }
            (Encoder::Indicator(_), col) => (0..col.len()).map(|r| self.encode(&col.value(r))).collect(),
            (_, Column::Numeric(v)) => Ok(v.iter().map(|&x| self.encode_f64(x)).collect()),
            (_, Column::Categorical { .. }) => Err(MidError::InvalidData(
                "categorical column given to a numeric encoder".into(),
            )),
        }
    }

    /// Representative values: levels, distinct values, knots, or interval
    /// left ends for step encoders.
    pub fn grid_values(&self) -> Vec<Value> {
        match self {
            Encoder::Indicator(IndicatorGrid::Categorical(l)) => l.iter().cloned().map(Value::Level).collect(),
            Encoder::Indicator(IndicatorGrid::Numeric(v)) | Encoder::Linear(v) => {
                v.iter().copied().map(Value::Num).collect()
            }
            Encoder::Step(b) => b.iter().copied().map(Value::Num).collect(),
        }
    }

    /// Checks the structural invariants of a deserialized encoder.
    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0].partial_cmp(&w[1]) == Some(Ordering::Less));
        let ok = match self {
            Encoder::Indicator(IndicatorGrid::Numeric(v)) => !v.is_empty() && increasing(v),
            Encoder::Indicator(IndicatorGrid::Categorical(l)) => {
                !l.is_empty() && l.iter().collect::<BTreeSet<_>>().len() == l.len()
            }
            Encoder::Step(b) => !b.is_empty() && increasing(b),
            Encoder::Linear(k) => k.len() >= 2 && increasing(k),
        };
        if ok {
            Ok(())
        } else {
            Err(MidError::InvalidData(format!("malformed {:?} encoder grid", self.kind())))
        }
    }
}

fn unknown_level(level: String) -> MidError {
    MidError::UnknownLevel {
        feature: String::new(),
        level,
    }
}

impl MidError {
    /// Fills in the feature name on an [`MidError::UnknownLevel`].
    pub fn with_feature(self, name: &str) -> MidError {
        match self {
            MidError::UnknownLevel { level, .. } => MidError::UnknownLevel {
                feature: name.to_string(),
                level,
            },
            other => other,
        }
    }
}
