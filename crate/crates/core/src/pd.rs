//! Partial dependence and the decomposition built on it.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::data::{eval_builtin, Builtin, Column, Dataset, Value};
use crate::error::{MidError, Result};
use crate::model::{equispaced, MidModel};
use crate::sum::exact_sum;

/// Anything that maps rows to predictions.
pub trait Predictor: Sync {
    fn predict_rows(&self, rows: &Dataset) -> Result<Vec<f64>>;
}

impl Predictor for MidModel {
    fn predict_rows(&self, rows: &Dataset) -> Result<Vec<f64>> {
        Ok(self.predict(rows)?.into_inner())
    }
}

impl Predictor for Builtin {
    fn predict_rows(&self, rows: &Dataset) -> Result<Vec<f64>> {
        Ok(eval_builtin(*self, rows)?.into_inner())
    }
}

/// Wraps a closure over rows.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&Dataset) -> Result<Vec<f64>> + Sync,
{
    fn predict_rows(&self, rows: &Dataset) -> Result<Vec<f64>> {
        (self.0)(rows)
    }
}

pub const DEFAULT_PD_GRID: usize = 51;

fn check_features(dataset: &Dataset, features: &[usize]) -> Result<()> {
    if features.is_empty() || features.len() > 2 {
        return Err(MidError::InvalidArgument(format!(
            "partial dependence takes one or two features, got {}",
            features.len()
        )));
    }
    if let Some(&j) = features.iter().find(|&&j| j >= dataset.n_cols()) {
        return Err(MidError::InvalidArgument(format!("feature index {j} out of range")));
    }
    if features.len() == 2 && features[0] == features[1] {
        return Err(MidError::InvalidArgument("feature pair must be distinct".into()));
    }
    Ok(())
}

/// Equispaced points over the observed range, or all levels.
pub fn pd_grid(dataset: &Dataset, j: usize, size: usize) -> Vec<Value> {
    match dataset.column(j) {
        Column::Numeric(v) => {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            equispaced(lo, hi, size).into_iter().map(Value::Num).collect()
        }
        Column::Categorical { levels, .. } => levels.iter().cloned().map(Value::Level).collect(),
    }
}

/// Average prediction with the chosen features overwritten by each grid point.
pub fn pd(predictor: &dyn Predictor, dataset: &Dataset, features: &[usize], grid: &[Vec<Value>]) -> Result<Vec<f64>> {
    check_features(dataset, features)?;
    let n = dataset.n_rows();
    if n == 0 {
        return Err(MidError::InvalidData("partial dependence needs at least one row".into()));
    }
    grid.par_iter()
        .map(|point| {
            if point.len() != features.len() {
                return Err(MidError::InvalidArgument(format!(
                    "grid point has {} values for {} features",
                    point.len(),
                    features.len()
                )));
            }
            if point.iter().any(|v| matches!(v, Value::Num(x) if !x.is_finite())) {
                return Err(MidError::InvalidArgument("grid points must be finite".into()));
            }
            let mut ds = dataset.clone();
            for (&j, v) in features.iter().zip(point) {
                ds = ds.with_column(j, Column::constant(v, n))?;
            }
            let y = predictor.predict_rows(&ds)?;
            Ok(exact_sum(y) / n as f64)
        })
        .collect()
}

/// Partial dependence at every row's own values of `features`, evaluated
/// once per distinct value combination.
fn pd_at_rows(predictor: &dyn Predictor, dataset: &Dataset, features: &[usize]) -> Result<Vec<f64>> {
    let n = dataset.n_rows();
    let key = |i: usize| -> Vec<String> {
        features.iter().map(|&j| value_key(&dataset.value(i, j))).collect()
    };
    let mut distinct: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    let mut points = Vec::new();
    let mut index = Vec::with_capacity(n);
    for i in 0..n {
        let k = key(i);
        let next = points.len();
        let slot = *distinct.entry(k).or_insert(next);
        if slot == next {
            points.push(features.iter().map(|&j| dataset.value(i, j)).collect::<Vec<_>>());
        }
        index.push(slot);
    }
    let values = pd(predictor, dataset, features, &points)?;
    Ok(index.into_iter().map(|s| values[s]).collect())
}

fn value_key(v: &Value) -> String {
    match v {
        Value::Num(x) => format!("n{:016x}", x.to_bits()),
        Value::Level(l) => format!("l{l}"),
    }
}

fn centered(v: Vec<f64>) -> Vec<f64> {
    let mean = exact_sum(v.iter().copied()) / v.len() as f64;
    v.into_iter().map(|x| x - mean).collect()
}

/// Partial-dependence effects evaluated at the dataset rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PdDecomposition {
    pub features: Vec<usize>,
    /// Centered main effect of each feature, per row.
    pub main: Vec<Vec<f64>>,
    /// Centered pair effect with both main effects removed, per row.
    pub interaction: Option<Vec<f64>>,
    /// Centered joint partial dependence of the pair, per row.
    pub joint: Option<Vec<f64>>,
}

pub fn pd_decompose(predictor: &dyn Predictor, dataset: &Dataset, features: &[usize]) -> Result<PdDecomposition> {
    check_features(dataset, features)?;
    let main = features
        .iter()
        .map(|&j| pd_at_rows(predictor, dataset, &[j]).map(centered))
        .collect::<Result<Vec<_>>>()?;
    let (interaction, joint) = if features.len() == 2 {
        let joint = centered(pd_at_rows(predictor, dataset, features)?);
        let pure = joint
            .iter()
            .enumerate()
            .map(|(i, v)| v - main[0][i] - main[1][i])
            .collect();
        (Some(pure), Some(joint))
    } else {
        (None, None)
    };
    Ok(PdDecomposition {
        features: features.to_vec(),
        main,
        interaction,
        joint,
    })
}

/// Centered partial-dependence main effect of `j` on an arbitrary grid; the
/// centering constant is the mean over the dataset's own values of `j`.
pub fn pd_main_effect(predictor: &dyn Predictor, dataset: &Dataset, j: usize, grid: &[Value]) -> Result<Vec<f64>> {
    check_features(dataset, &[j])?;
    let at_rows = pd_at_rows(predictor, dataset, &[j])?;
    let mean = exact_sum(at_rows.iter().copied()) / at_rows.len() as f64;
    let points: Vec<Vec<Value>> = grid.iter().map(|v| vec![v.clone()]).collect();
    Ok(pd(predictor, dataset, &[j], &points)?.into_iter().map(|v| v - mean).collect())
}

/// Share of the pair's joint partial-dependence variation carried by the
/// pure interaction; `None` when the joint variation vanishes.
pub fn h_statistic(predictor: &dyn Predictor, dataset: &Dataset, pair: (usize, usize)) -> Result<Option<f64>> {
    if pair.0 == pair.1 {
        return Err(MidError::InvalidArgument("H-statistic needs two distinct features".into()));
    }
    let dec = pd_decompose(predictor, dataset, &[pair.0, pair.1])?;
    let pure = dec.interaction.expect("pair decomposition");
    let joint = dec.joint.expect("pair decomposition");
    let num = exact_sum(pure.iter().map(|v| v * v));
    let den = exact_sum(joint.iter().map(|v| v * v));
    let scale = joint.iter().chain(&pure).fold(0.0f64, |m, v| m.max(v.abs()));
    if den <= joint.len() as f64 * (1e-12 * scale).powi(2) || den == 0.0 {
        return Ok(None);
    }
    Ok(Some(num / den))
}
