//! Assembly of the constrained least-squares system.
//!
//! Columns are grouped into one block per term. A main-effect block holds the
//! `k_j` encoder weights of feature `j`; an interaction block for `(p, q)`
//! holds the `k_p * k_q` products `chi_p^s * chi_q^t`, laid out row-major in
//! `(s, t)`. Centering constraints never cross blocks: one row per main effect
//! and `k_p + k_q` grid-line rows per interaction, with raw weight sums as
//! entries. The diagonal weight matrix is the vector of column sums.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encoding::{Encoder, SparseWeights};
use crate::error::{MidError, Result};

/// Feature set of an effect: one feature (main effect) or an ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermKey {
    first: usize,
    second: Option<usize>,
}

impl TermKey {
    pub fn main(j: usize) -> Self {
        TermKey {
            first: j,
            second: None,
        }
    }

    /// Interaction between two distinct features, stored in sorted order.
    pub fn pair(p: usize, q: usize) -> Result<Self> {
        if p == q {
            return Err(MidError::InvalidArgument(format!(
                "interaction needs two distinct features, got ({p}, {q})"
            )));
        }
        Ok(TermKey {
            first: p.min(q),
            second: Some(p.max(q)),
        })
    }

    pub fn order(&self) -> usize {
        1 + self.second.is_some() as usize
    }

    pub fn is_main(&self) -> bool {
        self.second.is_none()
    }

    pub fn first(&self) -> usize {
        self.first
    }

    pub fn second(&self) -> Option<usize> {
        self.second
    }

    pub fn features(&self) -> Vec<usize> {
        match self.second {
            Some(q) => vec![self.first, q],
            None => vec![self.first],
        }
    }

    pub fn contains(&self, j: usize) -> bool {
        self.first == j || self.second == Some(j)
    }

    /// `x1` or `x1:x2`.
    pub fn label(&self, names: &[String]) -> String {
        match self.second {
            Some(q) => format!("{}:{}", names[self.first], names[q]),
            None => names[self.first].clone(),
        }
    }
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.second {
            Some(q) => write!(f, "{}:{}", self.first, q),
            None => write!(f, "{}", self.first),
        }
    }
}

/// All main effects, plus all pairs when `order == 2`.
pub fn default_terms(n_features: usize, order: usize) -> Vec<TermKey> {
    let mut terms: Vec<TermKey> = (0..n_features).map(TermKey::main).collect();
    if order >= 2 {
        for p in 0..n_features {
            for q in p + 1..n_features {
                terms.push(TermKey { first: p, second: Some(q) });
            }
        }
    }
    terms
}

/// Encoders for every feature, split by role.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSet {
    pub main: Vec<Option<Encoder>>,
    pub interaction: Vec<Option<Encoder>>,
}

impl EncoderSet {
    pub fn block_shape(&self, term: &TermKey) -> Result<Vec<usize>> {
        let missing = || MidError::InvalidArgument(format!("term {term} references a feature without an encoder"));
        match term.second {
            None => {
                let e = self.main.get(term.first).and_then(Option::as_ref).ok_or_else(missing)?;
                Ok(vec![e.k()])
            }
            Some(q) => {
                let ep = self.interaction.get(term.first).and_then(Option::as_ref).ok_or_else(missing)?;
                let eq = self.interaction.get(q).and_then(Option::as_ref).ok_or_else(missing)?;
                Ok(vec![ep.k(), eq.k()])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub term: TermKey,
    /// `[k]` for main effects, `[k_p, k_q]` for interactions.
    pub shape: Vec<usize>,
    pub cols: Range<usize>,
    pub constraint_rows: Range<usize>,
}

/// One centering constraint; entries are `(column, weight)` within one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub block: usize,
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinearSystem {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    constraints: Vec<ConstraintRow>,
    delta: Vec<f64>,
    blocks: Vec<Block>,
}

impl LinearSystem {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Diagonal of the weight matrix: column sums of the design.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn constraints(&self) -> &[ConstraintRow] {
        &self.constraints
    }

    pub fn is_dead(&self, col: usize) -> bool {
        self.delta[col] == 0.0
    }

    pub fn dead_columns(&self) -> Vec<usize> {
        (0..self.n_cols).filter(|&c| self.is_dead(c)).collect()
    }

    /// Nonzero design entries of one row.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .zip(&self.values[r])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// `X * beta`.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(c, v)| v * beta[c]).sum())
            .collect()
    }

    /// `M * beta`, one entry per constraint row.
    pub fn constraint_residuals(&self, beta: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|r| r.entries.iter().map(|&(c, w)| w * beta[c]).sum())
            .collect()
    }

    pub fn design_dense(&self) -> DMatrix<f64> {
        let mut x = DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (c, v) in self.row(i) {
                x[(i, c)] += v;
            }
        }
        x
    }

    pub fn constraints_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.constraints.len(), self.n_cols);
        for (r, row) in self.constraints.iter().enumerate() {
            for &(c, w) in &row.entries {
                m[(r, c)] += w;
            }
        }
        m
    }

    /// Builds a system from dense per-block designs and constraints. Design
    /// entries must be nonnegative; all blocks share the row count.
    pub fn from_dense_blocks(blocks: Vec<(TermKey, DMatrix<f64>, DMatrix<f64>)>) -> Result<Self> {
        let n_rows = blocks.first().map_or(0, |(_, x, _)| x.nrows());
        let n_cols: usize = blocks.iter().map(|(_, x, _)| x.ncols()).sum();
        let mut out_blocks = Vec::with_capacity(blocks.len());
        let mut constraints = Vec::new();
        let mut offset = 0;
        for (b, (term, x, m)) in blocks.iter().enumerate() {
            if x.nrows() != n_rows || m.ncols() != x.ncols() {
                return Err(MidError::InvalidArgument("inconsistent block dimensions".into()));
            }
            if x.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(MidError::InvalidArgument("design entries must be finite and nonnegative".into()));
            }
            let start = constraints.len();
            for r in 0..m.nrows() {
                let entries = (0..m.ncols())
                    .filter(|&c| m[(r, c)] != 0.0)
                    .map(|c| (offset + c, m[(r, c)]))
                    .collect();
                constraints.push(ConstraintRow { block: b, entries });
            }
            out_blocks.push(Block {
                term: *term,
                shape: vec![x.ncols()],
                cols: offset..offset + x.ncols(),
                constraint_rows: start..constraints.len(),
            });
            offset += x.ncols();
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for i in 0..n_rows {
            let mut offset = 0;
            for (_, x, _) in &blocks {
                for c in 0..x.ncols() {
                    if x[(i, c)] != 0.0 {
                        col_idx.push((offset + c) as u32);
                        values.push(x[(i, c)]);
                    }
                }
                offset += x.ncols();
            }
            row_ptr.push(col_idx.len());
        }
        let delta = column_sums(n_rows, n_cols, &row_ptr, &col_idx, &values);
        Ok(LinearSystem {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
            constraints,
            delta,
            blocks: out_blocks,
        })
    }
}

/// Column sums accumulated in row order.
fn column_sums(n_rows: usize, n_cols: usize, row_ptr: &[usize], col_idx: &[u32], values: &[f64]) -> Vec<f64> {
    let mut delta = vec![0.0; n_cols];
    for i in 0..n_rows {
        for e in row_ptr[i]..row_ptr[i + 1] {
            delta[col_idx[e] as usize] += values[e];
        }
    }
    delta
}

/// Encodes every column an encoder exists for.
pub(crate) fn encode_features(dataset: &Dataset, encoders: &[Option<Encoder>]) -> Result<Vec<Option<Vec<SparseWeights>>>> {
    encoders
        .iter()
        .enumerate()
        .map(|(j, e)| match e {
            Some(e) => e
                .encode_column(dataset.column(j))
                .map(Some)
                .map_err(|err| err.with_feature(&dataset.names()[j])),
            None => Ok(None),
        })
        .collect()
}

/// Builds design, constraints and weights for `terms` over `dataset`.
pub fn assemble(dataset: &Dataset, encoders: &EncoderSet, terms: &[TermKey]) -> Result<LinearSystem> {
    if terms.is_empty() {
        return Err(MidError::InvalidArgument("at least one term is required".into()));
    }
    let d = dataset.n_cols();
    if encoders.main.len() != d || encoders.interaction.len() != d {
        return Err(MidError::InvalidArgument(format!(
            "encoder set covers {} features, dataset has {d}",
            encoders.main.len()
        )));
    }
    for t in terms {
        if t.features().iter().any(|&j| j >= d) {
            return Err(MidError::InvalidArgument(format!("term {t} references a missing feature")));
        }
    }

    let main_w = encode_features(dataset, &encoders.main)?;
    let inter_w = encode_features(dataset, &encoders.interaction)?;

    let mut blocks = Vec::with_capacity(terms.len());
    let mut offset = 0;
    for t in terms {
        let shape = encoders.block_shape(t)?;
        let width: usize = shape.iter().product();
        blocks.push(Block {
            term: *t,
            shape,
            cols: offset..offset + width,
            constraint_rows: 0..0,
        });
        offset += width;
    }
    let n_cols = offset;
    let n_rows = dataset.n_rows();

    let nnz_per_row: usize = terms.iter().map(|t| if t.is_main() { 2 } else { 4 }).sum();
    let mut row_ptr = Vec::with_capacity(n_rows + 1);
    let mut col_idx = Vec::with_capacity(n_rows * nnz_per_row);
    let mut values = Vec::with_capacity(n_rows * nnz_per_row);
    row_ptr.push(0);
    for i in 0..n_rows {
        for b in &blocks {
            let base = b.cols.start;
            match b.term.second {
                None => {
                    let w = &main_w[b.term.first].as_ref().expect("encoded main feature")[i];
                    for (s, ws) in w.iter() {
                        col_idx.push((base + s) as u32);
                        values.push(ws);
                    }
                }
                Some(q) => {
                    let kq = b.shape[1];
                    let wp = &inter_w[b.term.first].as_ref().expect("encoded feature")[i];
                    let wq = &inter_w[q].as_ref().expect("encoded feature")[i];
                    for (s, ws) in wp.iter() {
                        for (t, wt) in wq.iter() {
                            col_idx.push((base + s * kq + t) as u32);
                            values.push(ws * wt);
                        }
                    }
                }
            }
        }
        row_ptr.push(col_idx.len());
    }
    let delta = column_sums(n_rows, n_cols, &row_ptr, &col_idx, &values);

    let mut constraints = Vec::new();
    for (bi, b) in blocks.iter_mut().enumerate() {
        let start = constraints.len();
        let base = b.cols.start;
        match b.shape[..] {
            [k] => constraints.push(ConstraintRow {
                block: bi,
                entries: (0..k).map(|s| (base + s, delta[base + s])).collect(),
            }),
            [kp, kq] => {
                for s in 0..kp {
                    constraints.push(ConstraintRow {
                        block: bi,
                        entries: (0..kq).map(|t| (base + s * kq + t, delta[base + s * kq + t])).collect(),
                    });
                }
                for t in 0..kq {
                    constraints.push(ConstraintRow {
                        block: bi,
                        entries: (0..kp).map(|s| (base + s * kq + t, delta[base + s * kq + t])).collect(),
                    });
                }
            }
            _ => unreachable!("blocks have one or two dimensions"),
        }
        b.constraint_rows = start..constraints.len();
    }

    Ok(LinearSystem {
        n_rows,
        n_cols,
        row_ptr,
        col_idx,
        values,
        constraints,
        delta,
        blocks,
    })
}
