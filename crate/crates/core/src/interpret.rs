//! Queries over a fitted model: importance, breakdowns, ICE curves and
//! Shapley values.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Column, ColumnType, Dataset, Value};
use crate::design::TermKey;
use crate::encoding::{Encoder, IndicatorGrid};
use crate::error::{MidError, Result};
use crate::model::{equispaced, predict_from_terms, MidModel};
use crate::sum::exact_sum;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceRow {
    pub term: TermKey,
    pub label: String,
    /// Mean absolute effect over the dataset.
    pub importance: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceTable {
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceTable {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.label == label).map(|r| r.importance)
    }
}

/// Descending by magnitude, ties by term order.
fn by_magnitude(a: (f64, &TermKey), b: (f64, &TermKey)) -> Ordering {
    b.0.abs().total_cmp(&a.0.abs()).then_with(|| a.1.cmp(b.1))
}

pub fn importance(model: &MidModel, dataset: &Dataset) -> Result<ImportanceTable> {
    let n = dataset.n_rows();
    if n == 0 {
        return Err(MidError::InvalidData("importance needs at least one row".into()));
    }
    let values = model.term_values(dataset)?;
    let names = model.feature_names();
    let mut rows: Vec<ImportanceRow> = model
        .terms()
        .iter()
        .zip(&values)
        .map(|(t, v)| ImportanceRow {
            term: t.term,
            label: t.term.label(&names),
            importance: exact_sum(v.iter().map(|x| x.abs())) / n as f64,
            rank: 0,
        })
        .collect();
    rows.sort_by(|a, b| by_magnitude((a.importance, &a.term), (b.importance, &b.term)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ImportanceTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownItem {
    pub term: TermKey,
    pub label: String,
    pub contribution: f64,
    /// Intercept plus this and all preceding contributions.
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownResult {
    pub row: usize,
    pub intercept: f64,
    pub items: Vec<BreakdownItem>,
    pub total: f64,
}

impl BreakdownResult {
    pub fn nonzero(&self) -> impl Iterator<Item = &BreakdownItem> {
        self.items.iter().filter(|i| i.contribution != 0.0)
    }
}

/// Splits the prediction for one row into per-term contributions, largest
/// magnitude first.
pub fn breakdown(model: &MidModel, dataset: &Dataset, row: usize) -> Result<BreakdownResult> {
    if row >= dataset.n_rows() {
        return Err(MidError::InvalidArgument(format!(
            "row {row} out of range for {} rows",
            dataset.n_rows()
        )));
    }
    let single = dataset.row(row);
    let values = model.term_values(&single)?;
    let names = model.feature_names();
    let mut items: Vec<(TermKey, f64)> = model
        .terms()
        .iter()
        .zip(&values)
        .map(|(t, v)| (t.term, v[0]))
        .collect();
    items.sort_by(|a, b| by_magnitude((a.1, &a.0), (b.1, &b.0)));

    let intercept = model.intercept();
    let mut running = vec![intercept];
    let items: Vec<BreakdownItem> = items
        .into_iter()
        .map(|(term, c)| {
            running.push(c);
            BreakdownItem {
                term,
                label: term.label(&names),
                contribution: c,
                cumulative: exact_sum(running.iter().copied()),
            }
        })
        .collect();
    let total = items.last().map_or(intercept, |i| i.cumulative);
    Ok(BreakdownResult {
        row,
        intercept,
        items,
        total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IceCurves {
    pub variable: usize,
    pub name: String,
    pub grid: Vec<Value>,
    /// One curve per row, each with one value per grid point.
    pub curves: Vec<Vec<f64>>,
    pub centered: bool,
    /// Grid point subtracted from every curve when centered.
    pub reference: Option<Value>,
    pub term: Option<TermKey>,
}

/// Sweep points for `variable`: levels for categorical features, the known
/// values for numeric indicator encoders, and otherwise `grid_size`
/// equispaced points over the dataset's range.
pub fn ice_grid(model: &MidModel, dataset: &Dataset, variable: usize, grid_size: usize) -> Result<Vec<Value>> {
    let enc = model.encoders().main[variable]
        .as_ref()
        .or(model.encoders().interaction[variable].as_ref());
    let name = &model.features()[variable].name;
    if let Some(Encoder::Indicator(grid)) = enc {
        let values = match grid {
            IndicatorGrid::Categorical(l) => l.iter().cloned().map(Value::Level).collect(),
            IndicatorGrid::Numeric(v) => v.iter().copied().map(Value::Num).collect(),
        };
        return Ok(values);
    }
    match model.features()[variable].column_type {
        ColumnType::Categorical => {
            let col = dataset.column_by_name(name)?;
            let Column::Categorical { levels, .. } = col else {
                return Err(MidError::InvalidData(format!("feature '{name}' should be categorical")));
            };
            Ok(levels.iter().cloned().map(Value::Level).collect())
        }
        ColumnType::Numeric => {
            let v = dataset
                .column_by_name(name)?
                .as_numeric()
                .ok_or_else(|| MidError::InvalidData(format!("feature '{name}' should be numeric")))?;
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok(equispaced(lo, hi, grid_size).into_iter().map(Value::Num).collect())
        }
    }
}

/// Ceteris-paribus curves of `variable` for every row of `dataset`.
///
/// With `term`, each curve is that single effect swept along the variable
/// instead of the full prediction.
pub fn ice(
    model: &MidModel,
    dataset: &Dataset,
    variable: &str,
    grid_size: usize,
    centered: bool,
    term: Option<TermKey>,
) -> Result<IceCurves> {
    if grid_size < 2 {
        return Err(MidError::InvalidArgument(format!("grid size must be at least 2, got {grid_size}")));
    }
    let j = model.feature_index(variable)?;
    let term_pos = match term {
        Some(t) => {
            if !t.contains(j) {
                return Err(MidError::InvalidArgument(format!(
                    "term {} does not contain '{variable}'",
                    model.term_label(&t)
                )));
            }
            let pos = model
                .terms()
                .iter()
                .position(|e| e.term == t)
                .ok_or_else(|| MidError::UnknownTerm(model.term_label(&t)))?;
            Some(pos)
        }
        None => None,
    };
    let aligned = model.align(dataset)?;
    let grid = ice_grid(model, &aligned, j, grid_size)?;
    let n = aligned.n_rows();

    let columns: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|g| {
            let swept = aligned.with_column(j, Column::constant(g, n))?;
            let values = model.term_values(&swept)?;
            Ok(match term_pos {
                Some(p) => values[p].clone(),
                None => predict_from_terms(model.intercept(), &values, n),
            })
        })
        .collect::<Result<_>>()?;

    let mut curves: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    if centered {
        for c in &mut curves {
            let base = c[0];
            for v in c.iter_mut() {
                *v -= base;
            }
        }
    }
    Ok(IceCurves {
        variable: j,
        name: variable.to_string(),
        reference: centered.then(|| grid[0].clone()),
        grid,
        curves,
        centered,
        term,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapMatrix {
    pub names: Vec<String>,
    pub intercept: f64,
    /// `n x d`, one row per observation.
    pub values: Vec<Vec<f64>>,
}

/// Each feature gets its main effect plus half of every interaction it is in.
pub fn mid_shapley(model: &MidModel, dataset: &Dataset) -> Result<ShapMatrix> {
    let values = model.term_values(dataset)?;
    let d = model.n_features();
    let n = dataset.n_rows();
    let mut phi = vec![vec![0.0; d]; n];
    for (t, v) in model.terms().iter().zip(&values) {
        let feats = t.term.features();
        let w = 1.0 / feats.len() as f64;
        for (i, row) in phi.iter_mut().enumerate() {
            for &j in &feats {
                row[j] += w * v[i];
            }
        }
    }
    Ok(ShapMatrix {
        names: model.feature_names(),
        intercept: model.intercept(),
        values: phi,
    })
}

/// Largest feature count accepted by [`brute_force_shapley`].
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// Exact Shapley values for one row by enumerating all feature subsets, with
/// the value of a coalition `S` being the sum of all effects whose features
/// lie inside `S`.
pub fn brute_force_shapley(model: &MidModel, dataset: &Dataset, row: usize) -> Result<Vec<f64>> {
    let d = model.n_features();
    if d > BRUTE_FORCE_MAX_FEATURES {
        return Err(MidError::InvalidArgument(format!(
            "subset enumeration supports at most {BRUTE_FORCE_MAX_FEATURES} features, model has {d}"
        )));
    }
    if row >= dataset.n_rows() {
        return Err(MidError::InvalidArgument(format!("row {row} out of range")));
    }
    let values = model.term_values(&dataset.row(row))?;
    let size = 1usize << d;
    let mut v = vec![0.0; size];
    for (t, val) in model.terms().iter().zip(&values) {
        let mask = t.term.features().iter().fold(0usize, |m, &j| m | (1 << j));
        v[mask] += val[0];
    }
    // subset sums: v[S] = sum over masks contained in S
    for j in 0..d {
        for s in 0..size {
            if s & (1 << j) != 0 {
                v[s] += v[s ^ (1 << j)];
            }
        }
    }
    // w(s) = s! (d - s - 1)! / d!
    let weights: Vec<f64> = (0..d)
        .map(|s| {
            let mut binom = 1.0;
            for i in 0..s {
                binom = binom * (d - 1 - i) as f64 / (i + 1) as f64;
            }
            1.0 / (d as f64 * binom)
        })
        .collect();
    Ok((0..d)
        .map(|j| {
            let bit = 1 << j;
            exact_sum(
                (0..size)
                    .filter(|s| s & bit == 0)
                    .map(|s| weights[(s as u32).count_ones() as usize] * (v[s | bit] - v[s])),
            )
        })
        .collect())
}

/// Mean absolute Shapley value per feature, largest first.
pub fn shap_importance(shap: &ShapMatrix) -> Vec<(String, f64)> {
    let n = shap.values.len().max(1) as f64;
    let mut out: Vec<(String, f64)> = shap
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), exact_sum(shap.values.iter().map(|r| r[j].abs())) / n))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_friedman1, PredictionVector};
    use crate::design::EncoderSet;
    use crate::encoding::IndicatorGrid;
    use crate::model::{fit, EffectTable, FeatureInfo, FitOptions};

    fn friedman_model() -> (MidModel, Dataset) {
        let (ds, y) = gen_friedman1(400, 11, 0.0).unwrap();
        let m = fit(&ds, &y, &FitOptions { k_main: 10, k_inter: 4, ..Default::default() }).unwrap();
        (m, ds)
    }

    fn pair_only_model(v: f64) -> (MidModel, Dataset) {
        let lv = || Some(Encoder::Indicator(IndicatorGrid::Categorical(vec!["a".into(), "b".into()])));
        let features = vec![
            FeatureInfo { name: "p".into(), column_type: ColumnType::Categorical, range: None },
            FeatureInfo { name: "q".into(), column_type: ColumnType::Categorical, range: None },
        ];
        let enc = EncoderSet { main: vec![None, None], interaction: vec![lv(), lv()] };
        let t = EffectTable {
            term: TermKey::pair(0, 1).unwrap(),
            shape: vec![2, 2],
            coefficients: vec![v, -v, -v, v],
            delta: vec![1.0; 4],
        };
        let m = MidModel::from_parts(features, enc, 0.5, vec![t]).unwrap();
        let ds = Dataset::new(vec![
            ("p".into(), Column::categorical_from_labels(&["a"])),
            ("q".into(), Column::categorical_from_labels(&["a"])),
        ])
        .unwrap();
        (m, ds)
    }

    #[test]
    fn pair_value_splits_in_half() {
        let (m, ds) = pair_only_model(3.0);
        let s = mid_shapley(&m, &ds).unwrap();
        assert_eq!(s.values[0], vec![1.5, 1.5]);
        assert_eq!(brute_force_shapley(&m, &ds, 0).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn shapley_matches_enumeration_and_is_efficient() {
        let (m, ds) = friedman_model();
        let rows = ds.slice(0, 20);
        let s = mid_shapley(&m, &rows).unwrap();
        let pred = m.predict(&rows).unwrap();
        for i in 0..20 {
            let bf = brute_force_shapley(&m, &rows, i).unwrap();
            for (a, b) in s.values[i].iter().zip(&bf) {
                assert!((a - b).abs() < 1e-8);
            }
            let total: f64 = s.values[i].iter().sum::<f64>() + s.intercept;
            assert!((total - pred.as_slice()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn breakdown_total_is_prediction() {
        let (m, ds) = friedman_model();
        let pred = m.predict(&ds).unwrap();
        for i in [0, 7, 99] {
            let b = breakdown(&m, &ds, i).unwrap();
            assert_eq!(b.total, pred.as_slice()[i]);
            assert_eq!(b.items.len(), 55);
            assert!(b.items.windows(2).all(|w| w[0].contribution.abs() >= w[1].contribution.abs()));
        }
    }

    #[test]
    fn importance_is_sorted_and_ranked() {
        let (m, ds) = friedman_model();
        let imp = importance(&m, &ds).unwrap();
        assert!(imp.rows.windows(2).all(|w| w[0].importance >= w[1].importance));
        assert_eq!(imp.rows[0].rank, 1);
        assert!(imp.get("x4").unwrap() > imp.get("x5").unwrap());
    }

    #[test]
    fn ice_passes_through_prediction_and_centers() {
        let (m, ds) = friedman_model();
        let rows = ds.slice(0, 10);
        let x1 = rows.column(0).as_numeric().unwrap().to_vec();
        // put the first grid point on each row's own x1 by sweeping a one-row set
        for i in 0..3 {
            let one = rows.row(i);
            let c = ice(&m, &one, "x1", 2, false, None).unwrap();
            let own = m.predict(&one).unwrap().as_slice()[0];
            assert_eq!(c.grid[0], Value::Num(x1[i]));
            assert_eq!(c.curves[0][0], own);
        }
        let c = ice(&m, &rows, "x1", 11, true, None).unwrap();
        assert!(c.curves.iter().all(|cv| cv[0] == 0.0));
        assert_eq!(c.reference, Some(c.grid[0].clone()));
    }

    #[test]
    fn ice_for_absent_variable_is_flat() {
        let (ds, y) = gen_friedman1(200, 4, 0.0).unwrap();
        let terms = Some(vec![TermKey::main(0), TermKey::main(1)]);
        let m = fit(&ds, &y, &FitOptions { terms, k_main: 6, ..Default::default() }).unwrap();
        let c = ice(&m, &ds.slice(0, 5), "x7", 5, false, None).unwrap();
        let pred = m.predict(&ds.slice(0, 5)).unwrap();
        for (cv, p) in c.curves.iter().zip(pred.as_slice()) {
            assert!(cv.iter().all(|v| v == p));
        }
    }

    #[test]
    fn shap_importance_single_row() {
        let s = ShapMatrix { names: vec!["a".into(), "b".into()], intercept: 0.0, values: vec![vec![-2.0, 1.0]] };
        assert_eq!(shap_importance(&s), vec![("a".to_string(), 2.0), ("b".to_string(), 1.0)]);
        let zero = ShapMatrix { names: vec!["a".into()], intercept: 0.0, values: vec![vec![0.0]; 3] };
        assert_eq!(shap_importance(&zero)[0].1, 0.0);
    }

    #[test]
    fn balanced_indicator_importance_is_one() {
        let ds = Dataset::new(vec![("g".into(), Column::categorical_from_labels(&["a", "b", "a", "b"]))]).unwrap();
        let y = PredictionVector::new(vec![1.0, 3.0, 1.0, 3.0]).unwrap();
        let m = fit(&ds, &y, &FitOptions { order: 1, ..Default::default() }).unwrap();
        assert!((importance(&m, &ds).unwrap().rows[0].importance - 1.0).abs() < 1e-12);
    }
}
