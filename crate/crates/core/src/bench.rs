//! Wall-clock comparison of the solver strategies on ring-shaped
//! classification data.

use std::time::Instant;

use serde::Serialize;

use crate::data::gen_circle;
use crate::error::{MidError, Result};
use crate::model::{fit, FitOptions, MidModel};
use crate::solver::{SolverConfig, SolverMethod};

/// Largest `n * m` the benchmark will allocate.
pub const MAX_CELLS: f64 = 1e8;

/// Columns of the order-2 design: `k1 d + k2^2 d (d - 1) / 2`.
pub fn parameter_count(d: usize, k_main: usize, k_inter: usize) -> usize {
    k_main * d + k_inter * k_inter * d * d.saturating_sub(1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub n: usize,
    pub d: usize,
    pub k_main: usize,
    pub k_inter: usize,
    pub methods: Vec<SolverMethod>,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 10_000,
            d: 8,
            k_main: 25,
            k_inter: 5,
            methods: vec![SolverMethod::NullspaceSvd, SolverMethod::NormalCholesky],
            reps: 1,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(MidError::InvalidArgument("reps must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(MidError::InvalidArgument("at least one method is required".into()));
        }
        if self.n < 2 || self.d == 0 {
            return Err(MidError::InvalidArgument("need n >= 2 and d >= 1".into()));
        }
        let m = parameter_count(self.d, self.k_main, self.k_inter);
        if self.n as f64 * m as f64 > MAX_CELLS {
            return Err(MidError::InvalidArgument(format!(
                "n * m = {} exceeds the limit of {MAX_CELLS:e}",
                self.n as f64 * m as f64
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodTiming {
    pub method: SolverMethod,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub reps: usize,
    pub rank: Option<usize>,
    pub ridge: Option<f64>,
    /// Largest effect difference against the first method, over all terms
    /// and training rows.
    pub max_effect_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub n: usize,
    pub d: usize,
    pub k_main: usize,
    pub k_inter: usize,
    /// Nominal parameter count.
    pub m: usize,
    /// Actual design columns after knot merging.
    pub columns: usize,
    pub response_sd: f64,
    pub tolerance: f64,
    pub timings: Vec<MethodTiming>,
}

impl BenchResult {
    pub fn timing(&self, method: SolverMethod) -> Option<&MethodTiming> {
        self.timings.iter().find(|t| t.method == method)
    }
}

/// Relative tolerance on effect agreement, in units of the response sd.
pub const AGREEMENT_TOL: f64 = 1e-3;

/// Times a full order-2 fit per method. Effects must agree across methods
/// before any timing is returned.
pub fn run_solver_bench(cfg: &BenchConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let (ds, y) = gen_circle(cfg.n, cfg.d, cfg.seed)?;
    let mean = y.mean();
    let sd = (y.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
    let tolerance = AGREEMENT_TOL * sd.max(f64::MIN_POSITIVE);

    let mut reference: Option<Vec<Vec<f64>>> = None;
    let mut timings = Vec::new();
    let mut columns = 0;
    for &method in &cfg.methods {
        let opts = FitOptions {
            order: 2,
            k_main: cfg.k_main,
            k_inter: cfg.k_inter,
            solver: SolverConfig::new(method),
            ..Default::default()
        };
        let mut times = Vec::with_capacity(cfg.reps);
        let mut model: Option<MidModel> = None;
        for _ in 0..cfg.reps {
            let t0 = Instant::now();
            let m = fit(&ds, &y, &opts)?;
            times.push(t0.elapsed().as_secs_f64() * 1e3);
            model = Some(m);
        }
        let model = model.expect("at least one repetition");
        columns = model.terms().iter().map(|t| t.coefficients.len()).sum();
        let effects = model.term_values(&ds)?;
        let diff = match &reference {
            None => 0.0,
            Some(r) => r
                .iter()
                .flatten()
                .zip(effects.iter().flatten())
                .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())),
        };
        if diff > tolerance {
            return Err(MidError::Numerical(format!(
                "{method} effects differ from {} by {diff:e} (tolerance {tolerance:e})",
                cfg.methods[0]
            )));
        }
        if reference.is_none() {
            reference = Some(effects);
        }
        let report = &model.fit_meta().expect("fitted model").report;
        timings.push(MethodTiming {
            method,
            mean_ms: times.iter().sum::<f64>() / times.len() as f64,
            min_ms: times.iter().cloned().fold(f64::INFINITY, f64::min),
            reps: cfg.reps,
            rank: report.rank,
            ridge: report.ridge,
            max_effect_diff: diff,
        });
    }
    Ok(BenchResult {
        n: cfg.n,
        d: cfg.d,
        k_main: cfg.k_main,
        k_inter: cfg.k_inter,
        m: parameter_count(cfg.d, cfg.k_main, cfg.k_inter),
        columns,
        response_sd: sd,
        tolerance,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_counts() {
        assert_eq!(parameter_count(8, 25, 5), 900);
        assert_eq!(parameter_count(16, 25, 5), 3400);
        assert_eq!(parameter_count(1, 25, 5), 25);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(BenchConfig { reps: 0, ..Default::default() }.validate().is_err());
        assert!(BenchConfig { methods: vec![], ..Default::default() }.validate().is_err());
        assert!(BenchConfig { n: 1_000_000, d: 16, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn small_bench_agrees() {
        let cfg = BenchConfig {
            n: 400,
            d: 3,
            k_main: 6,
            k_inter: 3,
            methods: SolverMethod::ALL.to_vec(),
            reps: 1,
            seed: 1,
        };
        let r = run_solver_bench(&cfg).unwrap();
        assert_eq!(r.timings.len(), 3);
        assert!(r.timings.iter().all(|t| t.max_effect_diff <= r.tolerance));
    }
}
