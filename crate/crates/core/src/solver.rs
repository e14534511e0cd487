//! Weighted minimum-norm least squares under centering constraints.
//!
//! With `gamma = Delta^{1/2} beta` the problem is
//!
//! ```text
//! minimize ||y - X Delta^{-1/2} gamma||^2   subject to   M Delta^{-1/2} gamma = 0
//! ```
//!
//! and among all minimizers the one with the smallest `||gamma||` is returned.
//! Dead columns (zero weight) are left out and their coefficients are 0.
//!
//! Three strategies are available:
//!
//! * [`SolverMethod::NullspaceSvd`]: per-block null-space bases `Z` of the
//!   scaled constraints, then an SVD pseudoinverse of `X Delta^{-1/2} Z`.
//!   Rank revealing and exact on the constraints.
//! * [`SolverMethod::Penalty`]: stacks `kappa * M Delta^{-1/2}` under the
//!   scaled design and solves the unconstrained problem by SVD. Constraints
//!   hold to `O(1/kappa^2)`.
//! * [`SolverMethod::NormalCholesky`]: `LL^T` factorization of the reduced
//!   normal equations `Z^T Delta^{-1/2} X^T X Delta^{-1/2} Z`. Fastest, but
//!   it cannot detect rank deficiency; a singular system gets one small ridge
//!   of `max(rank_tol, sqrt(eps))` times the mean diagonal.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::LinearSystem;
use crate::error::{MidError, Result};

/// Relative singular-value cutoff for the rank of a constraint block.
const CONSTRAINT_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    NullspaceSvd,
    Penalty,
    NormalCholesky,
}

impl SolverMethod {
    pub const ALL: [SolverMethod; 3] = [
        SolverMethod::NullspaceSvd,
        SolverMethod::Penalty,
        SolverMethod::NormalCholesky,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverMethod::NullspaceSvd => "nullspace_svd",
            SolverMethod::Penalty => "penalty",
            SolverMethod::NormalCholesky => "normal_cholesky",
        }
    }
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMethod {
    type Err = MidError;

    fn from_str(s: &str) -> Result<Self> {
        SolverMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                MidError::InvalidArgument(format!(
                    "unknown solver method '{s}' (expected nullspace_svd, penalty or normal_cholesky)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Penalty factor; defaults to `1e4 * sqrt(max delta)`.
    pub kappa: Option<f64>,
    /// Relative singular-value cutoff; defaults to `max(rows, cols) * eps`.
    pub rank_tol: Option<f64>,
}

impl SolverConfig {
    pub fn new(method: SolverMethod) -> Self {
        SolverConfig {
            method,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappa {
            if !(k > 1.0 && k.is_finite()) {
                return Err(MidError::InvalidArgument(format!("kappa must be > 1, got {k}")));
            }
        }
        if let Some(t) = self.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(MidError::InvalidArgument(format!("rank_tol must lie in (0, 1), got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Coefficients in the original (unweighted) parameterization.
    #[serde(skip)]
    pub coefficients: Vec<f64>,
    /// Rank of the reduced design; `None` when the method cannot tell.
    pub rank: Option<usize>,
    pub residual_ss: f64,
    /// `max |M beta|` over all constraint rows.
    pub constraint_violation: f64,
    pub method_used: SolverMethod,
    pub elapsed_ms: f64,
    pub kappa: Option<f64>,
    pub rank_tol: f64,
    /// Ridge added to the normal equations after a failed factorization.
    pub ridge: Option<f64>,
    pub dead_columns: usize,
    pub live_columns: usize,
}

pub fn solve(system: &LinearSystem, y_tilde: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    match config.method {
        SolverMethod::NullspaceSvd => solve_nullspace(system, y_tilde, config),
        SolverMethod::Penalty => solve_penalty(system, y_tilde, config),
        SolverMethod::NormalCholesky => solve_normal_cholesky(system, y_tilde, config),
    }
}

/// Live-column bookkeeping shared by all methods.
struct Live {
    /// Live index of every column, `None` for dead columns.
    index: Vec<Option<usize>>,
    /// Global column of every live index.
    cols: Vec<usize>,
    /// `Delta^{-1/2}` per live index.
    scale: Vec<f64>,
}

fn prepare(system: &LinearSystem, y: &[f64], config: &SolverConfig) -> Result<Live> {
    config.validate()?;
    if y.len() != system.n_rows() {
        return Err(MidError::InvalidArgument(format!(
            "target has {} entries, design has {} rows",
            y.len(),
            system.n_rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(MidError::Numerical("non-finite target value".into()));
    }
    let mut index = vec![None; system.n_cols()];
    let mut cols = Vec::new();
    let mut scale = Vec::new();
    for (c, &d) in system.delta().iter().enumerate() {
        if !d.is_finite() {
            return Err(MidError::Numerical("non-finite design weight".into()));
        }
        if d > 0.0 {
            index[c] = Some(cols.len());
            cols.push(c);
            scale.push(1.0 / d.sqrt());
        }
    }
    if cols.is_empty() {
        return Err(MidError::Numerical("all design columns are dead".into()));
    }
    Ok(Live { index, cols, scale })
}

/// Null-space basis of one constraint block, in live-index coordinates.
struct BlockBasis {
    /// Live indices covered by the block (contiguous).
    live_start: usize,
    live_len: usize,
    /// `live_len x nullity`, orthonormal columns.
    z: DMatrix<f64>,
    /// Offset of this block's columns in the reduced parameter vector.
    offset: usize,
}

fn scaled_block_constraints(system: &LinearSystem, live: &Live, block: usize, live_start: usize, live_len: usize) -> DMatrix<f64> {
    let rows: Vec<Vec<(usize, f64)>> = system.blocks()[block]
        .constraint_rows
        .clone()
        .map(|r| {
            system.constraints()[r]
                .entries
                .iter()
                .filter_map(|&(c, w)| live.index[c].map(|l| (l - live_start, w * live.scale[l])))
                .filter(|&(_, w)| w != 0.0)
                .collect::<Vec<_>>()
        })
        .filter(|r| !r.is_empty())
        .collect();
    let mut m = DMatrix::zeros(rows.len(), live_len);
    for (r, entries) in rows.iter().enumerate() {
        for &(c, w) in entries {
            m[(r, c)] += w;
        }
    }
    m
}

/// Orthonormal basis of `{z : m z = 0}` from the right singular vectors.
fn nullspace_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(k, k);
    }
    let square = if m.nrows() < k {
        let mut sq = DMatrix::zeros(k, k);
        sq.rows_mut(0, m.nrows()).copy_from(m);
        sq
    } else {
        m.clone()
    };
    let (_, sigma, v) = svd(&square);
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let null: Vec<usize> = (0..sigma.len())
        .filter(|&i| sigma[i] <= CONSTRAINT_RANK_TOL * smax || smax == 0.0)
        .collect();
    v.select_columns(&null)
}

fn block_bases(system: &LinearSystem, live: &Live) -> Vec<BlockBasis> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (b, block) in system.blocks().iter().enumerate() {
        let live_idx: Vec<usize> = block.cols.clone().filter_map(|c| live.index[c]).collect();
        let Some(&live_start) = live_idx.first() else {
            continue;
        };
        let live_len = live_idx.len();
        let m = scaled_block_constraints(system, live, b, live_start, live_len);
        let z = nullspace_basis(&m);
        let nullity = z.ncols();
        out.push(BlockBasis {
            live_start,
            live_len,
            z,
            offset,
        });
        offset += nullity;
    }
    out
}

/// Minimum-norm least-squares solution of `a x = b` and the numerical rank.
/// Thin SVD `a = U diag(s) V^T`. nalgebra's SVD loses accuracy on exactly
/// rank-deficient matrices, which are routine here, so faer does the work.
fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (n, p) = a.shape();
    let m = faer::Mat::<f64>::from_fn(n, p, |i, j| a[(i, j)]);
    let d = m.thin_svd().expect("SVD converges on finite input");
    let (u, s, v) = (d.U(), d.S().column_vector(), d.V());
    let r = s.nrows();
    (
        DMatrix::from_fn(n, r, |i, j| u[(i, j)]),
        DVector::from_fn(r, |i, _| s[i]),
        DMatrix::from_fn(p, r, |i, j| v[(i, j)]),
    )
}

fn min_norm_lstsq(a: DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let (n, p) = a.shape();
    if p == 0 {
        return (DVector::zeros(0), 0);
    }
    let (r, rhs) = if n > p {
        let qr = a.qr();
        let mut qtb = b.clone();
        qr.q_tr_mul(&mut qtb);
        (qr.r(), qtb.rows(0, p).into_owned())
    } else {
        (a, b.clone())
    };
    let (u, sigma, v) = svd(&r);
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * smax;
    let utb = u.tr_mul(&rhs);
    let mut coef = DVector::zeros(sigma.len());
    let mut rank = 0;
    for i in 0..sigma.len() {
        if sigma[i] > cutoff && sigma[i] > 0.0 {
            coef[i] = utb[i] / sigma[i];
            rank += 1;
        }
    }
    (v * coef, rank)
}

fn default_rank_tol(config: &SolverConfig, rows: usize, cols: usize) -> f64 {
    config
        .rank_tol
        .unwrap_or_else(|| rows.max(cols).max(1) as f64 * f64::EPSILON)
}

/// Maps reduced coefficients back to `beta` via the block bases.
fn expand(system: &LinearSystem, live: &Live, bases: &[BlockBasis], eta: &DVector<f64>) -> Vec<f64> {
    let mut beta = vec![0.0; system.n_cols()];
    for bb in bases {
        let gamma = &bb.z * eta.rows(bb.offset, bb.z.ncols());
        for l in 0..bb.live_len {
            let li = bb.live_start + l;
            beta[live.cols[li]] = gamma[l] * live.scale[li];
        }
    }
    beta
}

#[allow(clippy::too_many_arguments)]
fn finish(
    system: &LinearSystem,
    y: &[f64],
    live: &Live,
    coefficients: Vec<f64>,
    method: SolverMethod,
    rank: Option<usize>,
    kappa: Option<f64>,
    rank_tol: f64,
    ridge: Option<f64>,
    started: Instant,
) -> Result<SolveReport> {
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(MidError::Numerical(format!("{method} produced non-finite coefficients")));
    }
    let fitted = system.apply(&coefficients);
    let residual_ss = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let constraint_violation = system
        .constraint_residuals(&coefficients)
        .into_iter()
        .fold(0.0, |m, r| f64::max(m, r.abs()));
    Ok(SolveReport {
        coefficients,
        rank,
        residual_ss,
        constraint_violation,
        method_used: method,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        kappa,
        rank_tol,
        ridge,
        dead_columns: system.n_cols() - live.cols.len(),
        live_columns: live.cols.len(),
    })
}

/// Null-space method: exact constraints, SVD pseudoinverse of the reduced design.
pub fn solve_nullspace(system: &LinearSystem, y_tilde: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let live = prepare(system, y_tilde, config)?;
    let bases = block_bases(system, &live);
    let p: usize = bases.iter().map(|b| b.z.ncols()).sum();
    let n = system.n_rows();

    let mut owner = vec![usize::MAX; live.cols.len()];
    for (bi, bb) in bases.iter().enumerate() {
        owner[bb.live_start..bb.live_start + bb.live_len].fill(bi);
    }
    let mut reduced = DMatrix::<f64>::zeros(n, p);
    for i in 0..n {
        for (c, v) in system.row(i) {
            let Some(l) = live.index[c] else { continue };
            let bb = &bases[owner[l]];
            let s = v * live.scale[l];
            let local = l - bb.live_start;
            for k in 0..bb.z.ncols() {
                reduced[(i, bb.offset + k)] += s * bb.z[(local, k)];
            }
        }
    }

    let rank_tol = default_rank_tol(config, n, p);
    let (eta, rank) = min_norm_lstsq(reduced, &DVector::from_column_slice(y_tilde), rank_tol);
    let beta = expand(system, &live, &bases, &eta);
    finish(system, y_tilde, &live, beta, SolverMethod::NullspaceSvd, Some(rank), None, rank_tol, None, started)
}

/// Default penalty factor for a system.
pub fn default_kappa(system: &LinearSystem) -> f64 {
    let max_delta = system.delta().iter().cloned().fold(0.0, f64::max);
    1e4 * max_delta.sqrt().max(1.0)
}

/// Penalty method: constraints appended as `kappa`-weighted rows.
pub fn solve_penalty(system: &LinearSystem, y_tilde: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let live = prepare(system, y_tilde, config)?;
    let kappa = config.kappa.unwrap_or_else(|| default_kappa(system));
    let n = system.n_rows();
    let l = live.cols.len();

    let penalty_rows: Vec<Vec<(usize, f64)>> = system
        .constraints()
        .iter()
        .map(|r| {
            r.entries
                .iter()
                .filter_map(|&(c, w)| live.index[c].map(|li| (li, kappa * w * live.scale[li])))
                .filter(|&(_, w)| w != 0.0)
                .collect::<Vec<_>>()
        })
        .filter(|r| !r.is_empty())
        .collect();
    let c = penalty_rows.len();

    // heavy rows first keeps Householder QR accurate on the stiff system
    let mut a = DMatrix::<f64>::zeros(c + n, l);
    for (r, entries) in penalty_rows.iter().enumerate() {
        for &(li, w) in entries {
            a[(r, li)] += w;
        }
    }
    for i in 0..n {
        for (col, v) in system.row(i) {
            if let Some(li) = live.index[col] {
                a[(c + i, li)] += v * live.scale[li];
            }
        }
    }
    let mut b = DVector::zeros(c + n);
    b.rows_mut(c, n).copy_from_slice(y_tilde);

    let rank_tol = default_rank_tol(config, c + n, l);
    let (gamma, rank) = min_norm_lstsq(a, &b, rank_tol);
    let mut beta = vec![0.0; system.n_cols()];
    for (li, &col) in live.cols.iter().enumerate() {
        beta[col] = gamma[li] * live.scale[li];
    }
    finish(system, y_tilde, &live, beta, SolverMethod::Penalty, Some(rank), Some(kappa), rank_tol, None, started)
}

/// `LL^T` factorization accepted only if every pivot keeps a fraction `tol`
/// of its diagonal entry.
fn checked_cholesky(g: &DMatrix<f64>, tol: f64) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let chol = Cholesky::new(g.clone())?;
    let l = chol.l_dirty();
    let ok = (0..g.nrows()).all(|i| {
        let pivot = l[(i, i)] * l[(i, i)];
        pivot.is_finite() && pivot > tol * g[(i, i)]
    });
    ok.then_some(chol)
}

/// Cholesky method on the reduced normal equations.
pub fn solve_normal_cholesky(system: &LinearSystem, y_tilde: &[f64], config: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let live = prepare(system, y_tilde, config)?;
    let bases = block_bases(system, &live);
    let p: usize = bases.iter().map(|b| b.z.ncols()).sum();
    let l = live.cols.len();
    let n = system.n_rows();

    // Gram matrix and right-hand side of the scaled live design
    let mut gram = DMatrix::<f64>::zeros(l, l);
    let mut rhs = DVector::<f64>::zeros(l);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for i in 0..n {
        entries.clear();
        entries.extend(
            system
                .row(i)
                .filter_map(|(c, v)| live.index[c].map(|li| (li, v * live.scale[li]))),
        );
        for &(a, va) in &entries {
            rhs[a] += va * y_tilde[i];
            for &(b, vb) in &entries {
                if b >= a {
                    gram[(a, b)] += va * vb;
                }
            }
        }
    }
    for a in 0..l {
        for b in a + 1..l {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    // Z^T G Z and Z^T h with block-diagonal Z
    let mut gz = DMatrix::<f64>::zeros(l, p);
    for bb in &bases {
        let prod = gram.columns(bb.live_start, bb.live_len) * &bb.z;
        gz.columns_mut(bb.offset, bb.z.ncols()).copy_from(&prod);
    }
    let mut reduced = DMatrix::<f64>::zeros(p, p);
    let mut reduced_rhs = DVector::<f64>::zeros(p);
    for bb in &bases {
        let zt = bb.z.transpose();
        let rows = &zt * gz.rows(bb.live_start, bb.live_len);
        reduced.rows_mut(bb.offset, bb.z.ncols()).copy_from(&rows);
        let r = &zt * rhs.rows(bb.live_start, bb.live_len);
        reduced_rhs.rows_mut(bb.offset, bb.z.ncols()).copy_from(&r);
    }
    // symmetrize away rounding
    for a in 0..p {
        for b in a + 1..p {
            let v = 0.5 * (reduced[(a, b)] + reduced[(b, a)]);
            reduced[(a, b)] = v;
            reduced[(b, a)] = v;
        }
    }

    let rank_tol = default_rank_tol(config, n, p);
    let mut ridge = None;
    let chol = match checked_cholesky(&reduced, rank_tol) {
        Some(c) => c,
        None => {
            let mean_diag = reduced.trace() / p.max(1) as f64;
            let lambda = rank_tol.max(f64::EPSILON.sqrt()) * mean_diag.max(f64::MIN_POSITIVE);
            let mut regularized = reduced.clone();
            for i in 0..p {
                regularized[(i, i)] += lambda;
            }
            ridge = Some(lambda);
            Cholesky::new(regularized)
                .ok_or_else(|| MidError::Numerical("Cholesky factorization failed after ridge retry".into()))?
        }
    };
    let eta = chol.solve(&reduced_rhs);
    let beta = expand(system, &live, &bases, &eta);
    finish(system, y_tilde, &live, beta, SolverMethod::NormalCholesky, None, None, rank_tol, ridge, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::TermKey;

    fn system(blocks: Vec<(DMatrix<f64>, DMatrix<f64>)>) -> LinearSystem {
        LinearSystem::from_dense_blocks(
            blocks
                .into_iter()
                .enumerate()
                .map(|(i, (x, m))| (TermKey::main(i), x, m))
                .collect(),
        )
        .unwrap()
    }

    /// Dense KKT solve of `min ||y - X b||^2 s.t. M b = 0` (full-rank case).
    fn kkt_oracle(x: &DMatrix<f64>, m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let (p, c) = (x.ncols(), m.nrows());
        let mut k = DMatrix::zeros(p + c, p + c);
        k.view_mut((0, 0), (p, p)).copy_from(&(x.transpose() * x));
        k.view_mut((0, p), (p, c)).copy_from(&m.transpose());
        k.view_mut((p, 0), (c, p)).copy_from(m);
        let mut rhs = DVector::zeros(p + c);
        rhs.rows_mut(0, p).copy_from(&(x.transpose() * y));
        let sol = k.lu().solve(&rhs).expect("nonsingular KKT system");
        sol.rows(0, p).into_owned()
    }

    fn small_system() -> (LinearSystem, Vec<f64>) {
        // 6 rows, two blocks of two columns, one constraint on the first block
        let x1 = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 1.0, 0.0, 0.25, 0.75, 0.0, 1.0]);
        let x2 = DMatrix::from_row_slice(6, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.3, 0.7, 0.0, 1.0, 0.6, 0.4]);
        let m1 = DMatrix::from_row_slice(1, 2, &[x1.column(0).sum(), x1.column(1).sum()]);
        let m2 = DMatrix::zeros(0, 2);
        let y = vec![1.0, -0.5, 2.0, 0.3, 0.0, -1.2];
        (system(vec![(x1, m1), (x2, m2)]), y)
    }

    #[test]
    fn nullspace_matches_kkt_on_tiny_system() {
        let (sys, y) = small_system();
        let r = solve_nullspace(&sys, &y, &SolverConfig::default()).unwrap();
        let oracle = kkt_oracle(&sys.design_dense(), &sys.constraints_dense(), &DVector::from_column_slice(&y));
        for (a, b) in r.coefficients.iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert!(r.constraint_violation < 1e-12);
        assert_eq!(r.rank, Some(3));
    }

    #[test]
    fn unconstrained_matches_normal_equations() {
        let x = DMatrix::from_row_slice(5, 3, &[1.0, 0.0, 0.0, 0.2, 0.8, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 1.0, 0.7, 0.0, 0.3]);
        let y = DVector::from_column_slice(&[1.0, 2.0, -1.0, 0.5, 0.1]);
        let sys = system(vec![(x.clone(), DMatrix::zeros(0, 3))]);
        let oracle = (x.transpose() * &x).lu().solve(&(x.transpose() * &y)).unwrap();
        for method in SolverMethod::ALL {
            let r = solve(&sys, y.as_slice(), &SolverConfig::new(method)).unwrap();
            for (a, b) in r.coefficients.iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-10, "{method}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn duplicate_columns_split_equally() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let y = [2.0, 0.0, 2.0, 0.0];
        let sys = system(vec![(x, DMatrix::zeros(0, 2))]);
        let r = solve_nullspace(&sys, &y, &SolverConfig::default()).unwrap();
        assert!((r.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((r.coefficients[1] - 1.0).abs() < 1e-12);
        assert_eq!(r.rank, Some(1));

        let c = solve_normal_cholesky(&sys, &y, &SolverConfig::default()).unwrap();
        assert!(c.ridge.is_some());
        assert!(c.rank.is_none());
        assert!((c.coefficients[0] - c.coefficients[1]).abs() < 1e-6);
        assert!((c.coefficients[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rank_deficient_solution_is_stationary() {
        // hat weights on three knots, the first column split into identical
        // halves, plus a second block with an empty column
        let n = 30;
        let t = |i: usize, s: f64| ((i as f64 * 0.7 + s).sin() + 1.0) / 2.0;
        let mut x1 = DMatrix::zeros(n, 4);
        let mut x2 = DMatrix::zeros(n, 3);
        for i in 0..n {
            let (u, v) = (t(i, 0.0), t(i, 1.3));
            let (a, b) = if u < 0.5 { (0, 2.0 * u) } else { (1, 2.0 * u - 1.0) };
            x1[(i, a)] = 1.0 - b;
            x1[(i, a + 1)] = b;
            x2[(i, 0)] = 1.0 - v;
            x2[(i, 1)] = v;
        }
        let half = x1.column(0) * 0.5;
        x1.set_column(0, &half);
        x1.set_column(3, &half);
        let sums = |x: &DMatrix<f64>| DMatrix::from_row_slice(1, x.ncols(), &x.row_sum().as_slice().to_vec());
        let (m1, m2) = (sums(&x1), sums(&x2));
        let sys = system(vec![(x1, m1), (x2, m2)]);
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 1.9).cos() * 2.0 + t(i, 0.0) * t(i, 1.3)).collect();

        let x = sys.design_dense();
        let m = sys.constraints_dense();
        let lu = (&m * m.transpose()).lu();
        for method in [SolverMethod::NullspaceSvd, SolverMethod::Penalty] {
            let r = solve(&sys, &y, &SolverConfig::new(method)).unwrap();
            let b = DVector::from_column_slice(&r.coefficients);
            let g = x.transpose() * (DVector::from_column_slice(&y) - &x * &b);
            let projected = &g - m.transpose() * lu.solve(&(&m * &g)).unwrap();
            assert!(projected.amax() < 1e-8, "{method}: {:e}", projected.amax());
            assert!((r.coefficients[0] - r.coefficients[3]).abs() < 1e-10);
        }
    }

    #[test]
    fn penalty_without_constraints_ignores_kappa() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.5, 0.5, 0.0, 1.0, 0.2, 0.8]);
        let y = [1.0, 0.0, -1.0, 0.5];
        let sys = system(vec![(x, DMatrix::zeros(0, 2))]);
        let a = solve_penalty(&sys, &y, &SolverConfig { kappa: Some(10.0), ..SolverConfig::new(SolverMethod::Penalty) }).unwrap();
        let b = solve_penalty(&sys, &y, &SolverConfig { kappa: Some(1e6), ..SolverConfig::new(SolverMethod::Penalty) }).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn penalty_violation_shrinks_quadratically() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.4, 0.6, 0.0, 0.0, 1.0]);
        let m = DMatrix::from_row_slice(1, 3, &[x.column(0).sum(), x.column(1).sum(), x.column(2).sum()]);
        let sys = system(vec![(x, m)]);
        let y = [3.0, 1.0, 2.5, 4.0];
        let v = |k: f64| {
            solve_penalty(&sys, &y, &SolverConfig { kappa: Some(k), ..SolverConfig::new(SolverMethod::Penalty) })
                .unwrap()
                .constraint_violation
        };
        let ratio = v(1e2) / v(1e3);
        assert!((50.0..200.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn dead_columns_get_zero() {
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let m = DMatrix::from_row_slice(1, 3, &[2.0, 0.0, 1.0]);
        let sys = system(vec![(x, m)]);
        let r = solve_nullspace(&sys, &[1.0, -2.0, 1.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.coefficients[1], 0.0);
        assert_eq!(r.dead_columns, 1);
        assert!((r.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((r.coefficients[2] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        let x = DMatrix::zeros(3, 2);
        let sys = system(vec![(x, DMatrix::zeros(0, 2))]);
        assert!(matches!(
            solve_nullspace(&sys, &[0.0; 3], &SolverConfig::default()),
            Err(MidError::Numerical(_))
        ));
        let (sys, _) = small_system();
        assert!(solve_nullspace(&sys, &[f64::NAN; 6], &SolverConfig::default()).is_err());
        assert!(solve_nullspace(&sys, &[0.0; 2], &SolverConfig::default()).is_err());
        let bad = SolverConfig { kappa: Some(0.5), ..SolverConfig::new(SolverMethod::Penalty) };
        assert!(solve(&sys, &[0.0; 6], &bad).is_err());
    }

    #[test]
    fn deterministic() {
        let (sys, y) = small_system();
        for method in SolverMethod::ALL {
            let a = solve(&sys, &y, &SolverConfig::new(method)).unwrap();
            let b = solve(&sys, &y, &SolverConfig::new(method)).unwrap();
            assert_eq!(a.coefficients, b.coefficients);
        }
    }
}
