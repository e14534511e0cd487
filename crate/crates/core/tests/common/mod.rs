//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use mid_core::data::{Column, ColumnType, Dataset, Value};
use mid_core::design::{EncoderSet, LinearSystem, TermKey};
use mid_core::encoding::{Encoder, IndicatorGrid};
use mid_core::model::{EffectTable, FeatureInfo};
use mid_core::MidModel;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves `min ||y - X b||^2 s.t. M b = 0` through the Lagrange system.
/// Returns `None` when the system is singular.
pub fn kkt_solve(x: &DMatrix<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let (p, c) = (x.ncols(), m.nrows());
    let mut k = DMatrix::zeros(p + c, p + c);
    k.view_mut((0, 0), (p, p)).copy_from(&(x.transpose() * x));
    k.view_mut((0, p), (p, c)).copy_from(&m.transpose());
    k.view_mut((p, 0), (c, p)).copy_from(m);
    let mut rhs = DVector::zeros(p + c);
    rhs.rows_mut(0, p).copy_from(&(x.transpose() * y));
    let svd = k.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return None;
    }
    let sol = k.lu().solve(&rhs)?;
    Some(sol.rows(0, p).into_owned())
}

/// Pseudoinverse solution `A^+ b` from the eigendecomposition of `A^T A`.
pub fn pinv_apply(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let e = SymmetricEigen::new(a.transpose() * a);
    let lmax = e.eigenvalues.amax();
    let atb = a.transpose() * b;
    let mut x = DVector::zeros(a.ncols());
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        if l > 1e-12 * lmax {
            let v = e.eigenvectors.column(i);
            x += v * (v.dot(&atb) / l);
        }
    }
    x
}

/// Orthogonal projector onto the null space of `m`.
pub fn null_projector(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(k, k);
    }
    let e = SymmetricEigen::new(m.transpose() * m);
    let lmax = e.eigenvalues.amax();
    let mut p = DMatrix::zeros(k, k);
    for (i, &l) in e.eigenvalues.iter().enumerate() {
        if l <= 1e-12 * lmax {
            let v = e.eigenvectors.column(i);
            p += &v * v.transpose();
        }
    }
    p
}

/// Weighted minimum-norm constrained least squares via pseudoinverses:
/// `gamma = (X~ P)^+ y` with `P` the projector onto the null space of `M~`,
/// mapped back by `Delta^{-1/2}`. Dead columns are dropped first.
pub fn pinv_solve(x: &DMatrix<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let p = x.ncols();
    let delta: Vec<f64> = (0..p).map(|j| x.column(j).sum()).collect();
    let live: Vec<usize> = (0..p).filter(|&j| delta[j] > 0.0).collect();
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(live.len(), live.iter().map(|&j| 1.0 / delta[j].sqrt())));
    let xl = x.select_columns(&live) * &scale;
    let ml = m.select_columns(&live) * &scale;
    let gamma = pinv_apply(&(&xl * null_projector(&ml)), y);
    let beta_live = &scale * gamma;
    let mut beta = DVector::zeros(p);
    for (i, &j) in live.iter().enumerate() {
        beta[j] = beta_live[i];
    }
    beta
}

/// Random system of dense blocks with rows summing to one within each block
/// and grid-line constraints from column sums, optionally with duplicated
/// and empty columns.
pub struct TinySystem {
    pub system: LinearSystem,
    pub x: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub y: DVector<f64>,
    pub rank_deficient: bool,
    pub has_dead: bool,
}

pub fn random_tiny_system(seed: u64) -> TinySystem {
    let mut r = rng(seed);
    let n = r.random_range(8..=30);
    let n_blocks = r.random_range(1..=3);
    let mut blocks = Vec::new();
    let mut total = 0;
    let mut rank_deficient = false;
    let mut has_dead = false;
    for b in 0..n_blocks {
        let k = r.random_range(2..=4).min(12 - total - 2 * (n_blocks - b - 1));
        let mut x = DMatrix::<f64>::zeros(n, k);
        let dead = k >= 3 && r.random_bool(0.25);
        let dup = k >= 3 && !dead && r.random_bool(0.25);
        let usable = if dead || dup { k - 1 } else { k };
        for i in 0..n {
            if r.random_bool(0.5) {
                x[(i, r.random_range(0..usable))] = 1.0;
            } else {
                let s = r.random_range(0..usable - 1);
                let w: f64 = r.random();
                x[(i, s)] = 1.0 - w;
                x[(i, s + 1)] = w;
            }
        }
        if dup {
            // column 0 split into two identical halves
            let half = x.column(0) * 0.5;
            x.set_column(0, &half);
            x.set_column(k - 1, &half);
            rank_deficient = true;
        }
        has_dead |= dead;
        let sums: Vec<f64> = (0..k).map(|j| x.column(j).sum()).collect();
        let m = DMatrix::from_row_slice(1, k, &sums);
        blocks.push((TermKey::main(b), x, m));
        total += k;
    }
    let xs: Vec<&DMatrix<f64>> = blocks.iter().map(|b| &b.1).collect();
    let mut x = DMatrix::zeros(n, total);
    let mut m = DMatrix::zeros(n_blocks, total);
    let mut off = 0;
    for (b, xb) in xs.iter().enumerate() {
        x.view_mut((0, off), (n, xb.ncols())).copy_from(xb);
        m.view_mut((b, off), (1, xb.ncols())).copy_from(&blocks[b].2);
        off += xb.ncols();
    }
    let y = DVector::from_fn(n, |_, _| r.random_range(-3.0..3.0));
    let system = LinearSystem::from_dense_blocks(blocks).unwrap();
    TinySystem {
        system,
        x,
        m,
        y,
        rank_deficient,
        has_dead,
    }
}

/// Exact Shapley values from the textbook subset formula with factorial
/// weights and a directly evaluated coalition value.
pub fn shapley_oracle(term_features: &[Vec<usize>], term_values: &[f64], d: usize) -> Vec<f64> {
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let value = |s: u32| -> f64 {
        term_features
            .iter()
            .zip(term_values)
            .filter(|(f, _)| f.iter().all(|&j| s & (1 << j) != 0))
            .map(|(_, v)| v)
            .sum()
    };
    (0..d)
        .map(|j| {
            let mut phi = 0.0;
            for s in 0u32..(1 << d) {
                if s & (1 << j) != 0 {
                    continue;
                }
                let size = s.count_ones() as usize;
                let w = fact(size) * fact(d - size - 1) / fact(d);
                phi += w * (value(s | (1 << j)) - value(s));
            }
            phi
        })
        .collect()
}

/// Random model over `d` features with a random mix of numeric (linear or
/// step) and categorical encoders, random terms and coefficients, plus a
/// few random rows (some outside the knot range).
pub fn random_model(seed: u64, d: usize) -> (MidModel, Dataset) {
    let mut r = rng(seed);
    let mut features = Vec::new();
    let mut main = Vec::new();
    let mut inter = Vec::new();
    let mut columns = Vec::new();
    let rows = 4;
    for j in 0..d {
        let name = format!("f{j}");
        if r.random_bool(0.3) {
            let nl = r.random_range(2..=4);
            let levels: Vec<String> = (0..nl).map(|l| format!("L{l}")).collect();
            let e = Encoder::Indicator(IndicatorGrid::Categorical(levels.clone()));
            main.push(Some(e.clone()));
            inter.push(Some(e));
            let labels: Vec<String> = (0..rows).map(|_| levels.choose(&mut r).unwrap().clone()).collect();
            columns.push((name.clone(), Column::categorical_from_labels(&labels)));
            features.push(FeatureInfo { name, column_type: ColumnType::Categorical, range: None });
        } else {
            let mk = |r: &mut ChaCha8Rng, k: usize| {
                let mut v: Vec<f64> = (0..k).map(|_| r.random_range(0.0..1.0)).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            };
            let k = r.random_range(2..=6);
            let km = mk(&mut r, k);
            let k = r.random_range(2..=4);
            let ki = mk(&mut r, k);
            let to_enc = |r: &mut ChaCha8Rng, v: Vec<f64>| {
                if r.random_bool(0.7) || v.len() < 2 {
                    if v.len() < 2 {
                        Encoder::Linear(vec![0.0, 1.0])
                    } else {
                        Encoder::Linear(v)
                    }
                } else {
                    Encoder::Step(v)
                }
            };
            main.push(Some(to_enc(&mut r, km)));
            inter.push(Some(to_enc(&mut r, ki)));
            let vals: Vec<f64> = (0..rows).map(|_| r.random_range(-0.2..1.2)).collect();
            columns.push((name.clone(), Column::Numeric(vals)));
            features.push(FeatureInfo { name, column_type: ColumnType::Numeric, range: Some([0.0, 1.0]) });
        }
    }
    let encoders = EncoderSet { main, interaction: inter };
    let mut terms = Vec::new();
    for j in 0..d {
        if r.random_bool(0.7) {
            terms.push(TermKey::main(j));
        }
    }
    for p in 0..d {
        for q in p + 1..d {
            if r.random_bool(0.4) {
                terms.push(TermKey::pair(p, q).unwrap());
            }
        }
    }
    if terms.is_empty() {
        terms.push(TermKey::main(0));
    }
    let tables = terms
        .into_iter()
        .map(|t| {
            let shape = encoders.block_shape(&t).unwrap();
            let width: usize = shape.iter().product();
            EffectTable {
                term: t,
                shape,
                coefficients: (0..width).map(|_| r.random_range(-2.0..2.0)).collect(),
                delta: vec![1.0; width],
            }
        })
        .collect();
    let intercept = r.random_range(-1.0..1.0);
    let model = MidModel::from_parts(features, encoders, intercept, tables).unwrap();
    (model, Dataset::new(columns).unwrap())
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

pub fn simpson2(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
    simpson(|u| simpson(|v| f(u, v), 0.0, 1.0, n), 0.0, 1.0, n)
}

pub fn num(v: f64) -> Value {
    Value::Num(v)
}
