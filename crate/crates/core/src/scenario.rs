//! End-to-end synthetic workflows.

use serde::Serialize;

use crate::data::{eval_builtin, gen_correlated_pair, gen_friedman1, Builtin, Dataset, PredictionVector, Value};
use crate::design::TermKey;
use crate::error::Result;
use crate::model::{equispaced, fit, FitOptions, MidModel};
use crate::pd::pd_main_effect;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanReport {
    pub n: usize,
    pub seed: u64,
    pub test_seed: u64,
    pub n_main_terms: usize,
    pub n_interaction_terms: usize,
    pub intercept: f64,
    pub uvr_train: Option<f64>,
    pub uvr_test: Option<f64>,
}

pub struct FriedmanRun {
    pub train: Dataset,
    pub train_predictions: PredictionVector,
    pub test: Dataset,
    pub test_predictions: PredictionVector,
    pub model: MidModel,
    pub report: FriedmanReport,
}

/// Generates noise-free training and held-out sets (the held-out set uses
/// `seed + 1`), fits the surrogate and scores it on both.
pub fn run_friedman(n: usize, seed: u64, options: &FitOptions) -> Result<FriedmanRun> {
    let test_seed = seed.wrapping_add(1);
    let (train, y) = gen_friedman1(n, seed, 0.0)?;
    let (test, y_test) = gen_friedman1(n, test_seed, 0.0)?;
    let model = fit(&train, &y, options)?;
    let uvr_test = model.uvr(&test, &y_test).ok();
    let report = FriedmanReport {
        n,
        seed,
        test_seed,
        n_main_terms: model.n_main_terms(),
        n_interaction_terms: model.n_interaction_terms(),
        intercept: model.intercept(),
        uvr_train: model.uvr_train(),
        uvr_test,
    };
    Ok(FriedmanRun {
        train,
        train_predictions: y,
        test,
        test_predictions: y_test,
        model,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub feature: String,
    /// Largest gap between the two surrogates' main effects over the grid.
    pub mid_max_diff: f64,
    pub pd_diff_at_min: f64,
    pub pd_diff_at_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCurves {
    pub feature: String,
    pub grid: Vec<f64>,
    pub mid_a: Vec<f64>,
    pub mid_b: Vec<f64>,
    pub pd_a: Vec<f64>,
    pub pd_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub n: usize,
    pub seed: u64,
    pub k_main: usize,
    pub grid_size: usize,
    /// Largest on-sample gap between the two prediction functions.
    pub on_sample_max_diff: f64,
    pub rows: Vec<StabilityRow>,
    #[serde(skip)]
    pub curves: Vec<StabilityCurves>,
}

pub struct StabilityRun {
    pub data: Dataset,
    pub predictions_a: PredictionVector,
    pub predictions_b: PredictionVector,
    pub model_a: MidModel,
    pub model_b: MidModel,
    pub report: StabilityReport,
}

/// Fits main-effect surrogates to two functions that agree on the correlated
/// sample but not off it, and contrasts their effects with partial dependence.
pub fn run_stability(n: usize, seed: u64, options: &FitOptions, grid_size: usize) -> Result<StabilityRun> {
    let data = gen_correlated_pair(n, seed)?;
    let ya = eval_builtin(Builtin::StabilityA, &data)?;
    let yb = eval_builtin(Builtin::StabilityB, &data)?;
    let opts = FitOptions {
        terms: Some(vec![TermKey::main(0), TermKey::main(1)]),
        ..options.clone()
    };
    let model_a = fit(&data, &ya, &opts)?;
    let model_b = fit(&data, &yb, &opts)?;
    let on_sample_max_diff = ya
        .as_slice()
        .iter()
        .zip(yb.as_slice())
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));

    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for j in 0..2 {
        let x = data.column(j).as_numeric().expect("numeric feature");
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let grid = equispaced(lo, hi, grid_size);
        let points: Vec<Vec<Value>> = grid.iter().map(|&g| vec![Value::Num(g)]).collect();
        let key = TermKey::main(j);
        let mid_a = model_a.effect(&key, &points, false)?;
        let mid_b = model_b.effect(&key, &points, false)?;
        let values: Vec<Value> = grid.iter().map(|&g| Value::Num(g)).collect();
        let pd_a = pd_main_effect(&Builtin::StabilityA, &data, j, &values)?;
        let pd_b = pd_main_effect(&Builtin::StabilityB, &data, j, &values)?;
        let last = grid.len() - 1;
        rows.push(StabilityRow {
            feature: data.names()[j].clone(),
            mid_max_diff: mid_a.iter().zip(&mid_b).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())),
            pd_diff_at_min: (pd_a[0] - pd_b[0]).abs(),
            pd_diff_at_max: (pd_a[last] - pd_b[last]).abs(),
        });
        curves.push(StabilityCurves {
            feature: data.names()[j].clone(),
            grid,
            mid_a,
            mid_b,
            pd_a,
            pd_b,
        });
    }
    Ok(StabilityRun {
        data,
        predictions_a: ya,
        predictions_b: yb,
        model_a,
        model_b,
        report: StabilityReport {
            n,
            seed,
            k_main: options.k_main,
            grid_size,
            on_sample_max_diff,
            rows,
            curves,
        },
    })
}
