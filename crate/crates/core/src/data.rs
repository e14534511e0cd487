//! Typed columnar datasets, CSV ingestion and the seeded synthetic scenarios.
//!
//! A [`Dataset`] holds named numeric or categorical columns of equal length.
//! Predictions of the black-box model travel alongside as a
//! [`PredictionVector`]. All generators draw from a `ChaCha8` stream seeded by
//! `seed_from_u64`, so `(n, seed, parameters)` fully determines the output.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MidError, Result};

/// Name of the pseudo-random generator used by every scenario generator.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha, seed_from_u64)";

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical { codes: Vec<u32>, levels: Vec<String> },
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column_type(&self) -> ColumnType {
        match self {
            Column::Numeric(_) => ColumnType::Numeric,
            Column::Categorical { .. } => ColumnType::Categorical,
        }
    }

    /// Builds a categorical column from raw labels; levels are sorted.
    pub fn categorical_from_labels<S: AsRef<str>>(labels: &[S]) -> Column {
        let levels: Vec<String> = labels
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, u32> = levels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as u32))
            .collect();
        let codes = labels.iter().map(|s| index[s.as_ref()]).collect();
        Column::Categorical { codes, levels }
    }

    /// A column holding `value` in every one of `n` rows.
    pub fn constant(value: &Value, n: usize) -> Column {
        match value {
            Value::Num(x) => Column::Numeric(vec![*x; n]),
            Value::Level(l) => Column::Categorical {
                codes: vec![0; n],
                levels: vec![l.clone()],
            },
        }
    }

    pub fn value(&self, row: usize) -> Value {
        match self {
            Column::Numeric(v) => Value::Num(v[row]),
            Column::Categorical { codes, levels } => Value::Level(levels[codes[row] as usize].clone()),
        }
    }

    pub fn as_numeric(&self) -> Option<&[f64]> {
        match self {
            Column::Numeric(v) => Some(v),
            Column::Categorical { .. } => None,
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Numeric(v) => Column::Numeric(rows.iter().map(|&r| v[r]).collect()),
            Column::Categorical { codes, levels } => Column::Categorical {
                codes: rows.iter().map(|&r| codes[r]).collect(),
                levels: levels.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Numeric,
    Categorical,
}

/// A single cell value, used for grids and query points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Level(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Level(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Level(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    n_rows: usize,
}

impl Dataset {
    pub fn new(columns: Vec<(String, Column)>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |(_, c)| c.len());
        let mut seen = BTreeSet::new();
        for (name, col) in &columns {
            if !seen.insert(name.as_str()) {
                return Err(MidError::InvalidData(format!("duplicate column name '{name}'")));
            }
            if col.len() != n_rows {
                return Err(MidError::InvalidData(format!(
                    "column '{name}' has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            match col {
                Column::Numeric(v) => {
                    if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                        return Err(MidError::InvalidData(format!(
                            "non-finite value in column '{name}' at row {}",
                            row + 1
                        )));
                    }
                }
                Column::Categorical { codes, levels } => {
                    if codes.iter().any(|&c| c as usize >= levels.len()) {
                        return Err(MidError::InvalidData(format!(
                            "level code out of range in column '{name}'"
                        )));
                    }
                }
            }
        }
        let (names, columns) = columns.into_iter().unzip();
        Ok(Dataset {
            names,
            columns,
            n_rows,
        })
    }

    /// Convenience constructor for all-numeric data.
    pub fn from_numeric(columns: Vec<(&str, Vec<f64>)>) -> Result<Self> {
        Dataset::new(
            columns
                .into_iter()
                .map(|(n, v)| (n.to_string(), Column::Numeric(v)))
                .collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_by_name(&self, name: &str) -> Result<&Column> {
        self.index_of(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| MidError::UnknownColumn(name.to_string()))
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        self.columns[col].value(row)
    }

    /// Copy of the dataset with one column swapped out.
    pub fn with_column(&self, idx: usize, column: Column) -> Result<Dataset> {
        if column.len() != self.n_rows {
            return Err(MidError::InvalidData(format!(
                "replacement column has {} rows, expected {}",
                column.len(),
                self.n_rows
            )));
        }
        let mut out = self.clone();
        out.columns[idx] = column;
        Ok(out)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n_rows: rows.len(),
        }
    }

    pub fn row(&self, i: usize) -> Dataset {
        self.select_rows(&[i])
    }

    /// Rows `start..end`, clamped to the dataset.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let end = end.min(self.n_rows);
        let rows: Vec<usize> = (start.min(end)..end).collect();
        self.select_rows(&rows)
    }
}

/// Black-box model outputs aligned with a dataset's rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector(Vec<f64>);

impl PredictionVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MidError::InvalidData(format!(
                "non-finite prediction at row {}",
                i + 1
            )));
        }
        Ok(PredictionVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

pub type TypeHints = HashMap<String, ColumnType>;

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn parse_finite(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Reads a CSV file into a typed dataset plus the prediction column.
pub fn load_csv(
    path: impl AsRef<Path>,
    prediction_column: &str,
    hints: &TypeHints,
) -> Result<(Dataset, PredictionVector)> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, prediction_column, hints)
}

/// Like [`load_csv`] but from any reader. Lines starting with `#` are comments.
pub fn read_csv<R: Read>(
    reader: R,
    prediction_column: &str,
    hints: &TypeHints,
) -> Result<(Dataset, PredictionVector)> {
    let (headers, cells) = read_cells(reader)?;
    let pred_idx = headers
        .iter()
        .position(|h| h == prediction_column)
        .ok_or_else(|| MidError::UnknownColumn(prediction_column.to_string()))?;

    let mut predictions = Vec::with_capacity(cells.len());
    for (r, row) in cells.iter().enumerate() {
        let cell = row[pred_idx].as_str();
        predictions.push(parse_finite(cell).ok_or_else(|| MidError::NotNumeric {
            column: prediction_column.to_string(),
            row: r + 1,
            value: cell.to_string(),
        })?);
    }

    let mut columns = Vec::with_capacity(headers.len() - 1);
    for (c, name) in headers.iter().enumerate() {
        if c == pred_idx {
            continue;
        }
        let raw: Vec<&str> = cells.iter().map(|row| row[c].as_str()).collect();
        columns.push((name.clone(), typed_column(name, &raw, hints.get(name).copied())?));
    }
    let dataset = Dataset::new(columns)?;
    Ok((dataset, PredictionVector::new(predictions)?))
}

/// Reads a CSV without a prediction column.
pub fn read_features_csv<R: Read>(reader: R, hints: &TypeHints) -> Result<Dataset> {
    let (headers, cells) = read_cells(reader)?;
    let mut columns = Vec::with_capacity(headers.len());
    for (c, name) in headers.iter().enumerate() {
        let raw: Vec<&str> = cells.iter().map(|row| row[c].as_str()).collect();
        columns.push((name.clone(), typed_column(name, &raw, hints.get(name).copied())?));
    }
    Dataset::new(columns)
}

fn read_cells<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut cells = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(MidError::RaggedRow {
                row: r + 1,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let row: Vec<String> = record.iter().map(str::to_string).collect();
        if let Some(c) = row.iter().position(|cell| is_missing(cell)) {
            return Err(MidError::MissingValue {
                row: r + 1,
                column: headers[c].clone(),
            });
        }
        cells.push(row);
    }
    Ok((headers, cells))
}

fn typed_column(name: &str, raw: &[&str], hint: Option<ColumnType>) -> Result<Column> {
    match hint {
        Some(ColumnType::Categorical) => Ok(Column::categorical_from_labels(raw)),
        Some(ColumnType::Numeric) => raw
            .iter()
            .enumerate()
            .map(|(r, cell)| {
                parse_finite(cell).ok_or_else(|| MidError::NotNumeric {
                    column: name.to_string(),
                    row: r + 1,
                    value: cell.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Column::Numeric),
        None => match raw.iter().map(|c| parse_finite(c)).collect::<Option<Vec<_>>>() {
            Some(values) => Ok(Column::Numeric(values)),
            None => Ok(Column::categorical_from_labels(raw)),
        },
    }
}

/// Writes the dataset (and optionally a prediction column) as CSV.
pub fn write_csv<W: Write>(
    writer: W,
    dataset: &Dataset,
    predictions: Option<(&str, &[f64])>,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.names().iter().map(String::as_str).collect();
    if let Some((name, _)) = predictions {
        header.push(name);
    }
    wtr.write_record(&header)?;
    for r in 0..dataset.n_rows() {
        let mut record: Vec<String> = (0..dataset.n_cols())
            .map(|c| dataset.value(r, c).to_string())
            .collect();
        if let Some((_, p)) = predictions {
            record.push(p[r].to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    predictions: Option<(&str, &[f64])>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(std::io::BufWriter::new(file), dataset, predictions)
}

/// Provenance of a generated dataset; written next to CLI outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorMeta {
    pub scenario: String,
    pub n: usize,
    pub seed: u64,
    pub algorithm: String,
    pub parameters: serde_json::Value,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The noise-free Friedman #1 regression function. Only the first five
/// coordinates matter.
pub fn friedman1_value(x: &[f64]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

pub fn stability_a_value(x1: f64, x2: f64) -> f64 {
    x1 + x2 * x2
}

/// Agrees with [`stability_a_value`] on the diagonal `x1 == x2` and departs
/// from it cubically off the diagonal.
pub fn stability_b_value(x1: f64, x2: f64) -> f64 {
    stability_a_value(x1, x2) + 10.0 * (x1 - x2).powi(3)
}

/// Ten independent `Uniform[0, 1]` features `x1..x10` with the Friedman #1
/// response plus `Normal(0, noise_sd^2)` noise.
pub fn gen_friedman1(n: usize, seed: u64, noise_sd: f64) -> Result<(Dataset, PredictionVector)> {
    if n == 0 {
        return Err(MidError::InvalidArgument("n must be at least 1".into()));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(MidError::InvalidArgument("noise_sd must be finite and >= 0".into()));
    }
    let mut rng = rng(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let mut cols = vec![Vec::with_capacity(n); 10];
    let mut y = Vec::with_capacity(n);
    let mut x = [0.0; 10];
    for _ in 0..n {
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = rng.random::<f64>();
            cols[j].push(*xj);
        }
        let eps: f64 = noise.sample(&mut rng);
        y.push(friedman1_value(&x) + noise_sd * eps);
    }
    let columns = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| (format!("x{}", j + 1), Column::Numeric(v)))
        .collect();
    Ok((Dataset::new(columns)?, PredictionVector::new(y)?))
}

/// `(x1, x2) = (U + Z1, U + Z2)` with `U ~ Uniform[0, 1]` and
/// `Z1, Z2 ~ Normal(0, 0.05^2)` independent.
pub fn gen_correlated_pair(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(MidError::InvalidArgument("n must be at least 1".into()));
    }
    let mut rng = rng(seed);
    let z = Normal::new(0.0, 0.05).expect("valid sd");
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        x1.push(u + z.sample(&mut rng));
        x2.push(u + z.sample(&mut rng));
    }
    Dataset::from_numeric(vec![("x1", x1), ("x2", x2)])
}

/// Volume of the unit ball in `d` dimensions.
fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => unit_ball_volume(d - 2) * 2.0 * PI / d as f64,
    }
}

/// Two-class ring data: points uniform on `[-1, 1]^d`, labelled 1 inside the
/// centred ball holding half of the cube's volume and 0 outside.
pub fn gen_circle(n: usize, d: usize, seed: u64) -> Result<(Dataset, PredictionVector)> {
    if n == 0 || d == 0 {
        return Err(MidError::InvalidArgument("n and d must be at least 1".into()));
    }
    let radius = (2f64.powi(d as i32 - 1) / unit_ball_volume(d)).powf(1.0 / d as f64);
    let mut rng = rng(seed);
    let mut cols = vec![Vec::with_capacity(n); d];
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut r2 = 0.0f64;
        for col in cols.iter_mut() {
            let x = rng.random_range(-1.0..1.0);
            r2 += x * x;
            col.push(x);
        }
        y.push(if r2.sqrt() <= radius { 1.0 } else { 0.0 });
    }
    let columns = cols
        .into_iter()
        .enumerate()
        .map(|(j, v)| (format!("x{}", j + 1), Column::Numeric(v)))
        .collect();
    Ok((Dataset::new(columns)?, PredictionVector::new(y)?))
}

/// Analytic black-box functions available without a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Friedman1,
    StabilityA,
    StabilityB,
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::Friedman1 => 10,
            Builtin::StabilityA | Builtin::StabilityB => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Friedman1 => "friedman1",
            Builtin::StabilityA => "stability_a",
            Builtin::StabilityB => "stability_b",
        }
    }

    fn eval_row(self, x: &[f64]) -> f64 {
        match self {
            Builtin::Friedman1 => friedman1_value(x),
            Builtin::StabilityA => stability_a_value(x[0], x[1]),
            Builtin::StabilityB => stability_b_value(x[0], x[1]),
        }
    }
}

impl FromStr for Builtin {
    type Err = MidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "friedman1" => Ok(Builtin::Friedman1),
            "stability_a" => Ok(Builtin::StabilityA),
            "stability_b" => Ok(Builtin::StabilityB),
            other => Err(MidError::InvalidArgument(format!(
                "unknown builtin function '{other}' (expected friedman1, stability_a or stability_b)"
            ))),
        }
    }
}

/// Evaluates a builtin function on the dataset's columns, taken positionally.
pub fn eval_builtin(builtin: Builtin, rows: &Dataset) -> Result<PredictionVector> {
    if rows.n_cols() != builtin.arity() {
        return Err(MidError::Arity {
            name: builtin.name().to_string(),
            expected: builtin.arity(),
            found: rows.n_cols(),
        });
    }
    let cols: Vec<&[f64]> = rows
        .columns()
        .iter()
        .zip(rows.names())
        .map(|(c, name)| {
            c.as_numeric().ok_or_else(|| {
                MidError::InvalidData(format!("builtin '{}' needs numeric column '{name}'", builtin.name()))
            })
        })
        .collect::<Result<_>>()?;
    let mut x = vec![0.0; cols.len()];
    let values = (0..rows.n_rows())
        .map(|r| {
            for (xj, col) in x.iter_mut().zip(&cols) {
                *xj = col[r];
            }
            builtin.eval_row(&x)
        })
        .collect();
    PredictionVector::new(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hints() -> TypeHints {
        TypeHints::new()
    }

    #[test]
    fn parses_mixed_columns() {
        let csv = "x,c,yhat\n1,a,0\n2,b,1\n3,a,0\n";
        let (ds, pred) = read_csv(csv.as_bytes(), "yhat", &hints()).unwrap();
        assert_eq!(ds.names(), &["x", "c"]);
        assert_eq!(ds.column(0), &Column::Numeric(vec![1.0, 2.0, 3.0]));
        match ds.column(1) {
            Column::Categorical { codes, levels } => {
                assert_eq!(levels, &["a", "b"]);
                assert_eq!(codes, &[0, 1, 0]);
            }
            other => panic!("expected categorical, got {other:?}"),
        }
        assert_eq!(pred.as_slice(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn empty_cell_is_rejected_with_row_number() {
        let csv = "x,yhat\n1,0\n,1\n";
        let err = read_csv(csv.as_bytes(), "yhat", &hints()).unwrap_err();
        assert!(err.to_string().contains("missing value at row 2"), "{err}");
    }

    #[test]
    fn hint_forces_categorical() {
        let csv = "x,yhat\n1,0\n2,1\n1,0\n";
        let mut h = hints();
        h.insert("x".into(), ColumnType::Categorical);
        let (ds, _) = read_csv(csv.as_bytes(), "yhat", &h).unwrap();
        match ds.column(0) {
            Column::Categorical { levels, .. } => assert_eq!(levels, &["1", "2"]),
            other => panic!("expected categorical, got {other:?}"),
        }
    }

    #[test]
    fn prediction_column_errors() {
        let csv = "x,yhat\n1,a\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), "yhat", &hints()),
            Err(MidError::NotNumeric { .. })
        ));
        assert!(matches!(
            read_csv(csv.as_bytes(), "pred", &hints()),
            Err(MidError::UnknownColumn(_))
        ));
        let ragged = "x,yhat\n1,0\n1,2,3\n";
        assert!(matches!(
            read_csv(ragged.as_bytes(), "yhat", &hints()),
            Err(MidError::RaggedRow { row: 2, .. })
        ));
        assert!(load_csv("/nonexistent/file.csv", "yhat", &hints()).is_err());
    }

    #[test]
    fn comment_lines_are_skipped() {
        let csv = "# {\"version\":1}\nx,yhat\n1,2\n";
        let (ds, pred) = read_csv(csv.as_bytes(), "yhat", &hints()).unwrap();
        assert_eq!(ds.n_rows(), 1);
        assert_eq!(pred.as_slice(), &[2.0]);
    }

    #[test]
    fn friedman_structural_value_at_center() {
        let x = [0.5; 10];
        assert!((friedman1_value(&x) - 14.5711).abs() < 1e-4);
        let cols = (1..=10)
            .map(|j| (format!("x{j}"), Column::Numeric(vec![0.5])))
            .collect();
        let ds = Dataset::new(cols).unwrap();
        let p = eval_builtin(Builtin::Friedman1, &ds).unwrap();
        assert!((p.as_slice()[0] - 14.5711).abs() < 1e-4);
    }

    #[test]
    fn generators_are_deterministic() {
        let a = gen_friedman1(50, 7, 1.0).unwrap();
        let b = gen_friedman1(50, 7, 1.0).unwrap();
        assert_eq!(a, b);
        let c = gen_friedman1(50, 8, 1.0).unwrap();
        assert_ne!(a.0, c.0);
        assert_eq!(gen_correlated_pair(30, 3).unwrap(), gen_correlated_pair(30, 3).unwrap());
        assert_eq!(gen_circle(30, 3, 3).unwrap(), gen_circle(30, 3, 3).unwrap());
    }

    #[test]
    fn friedman_features_in_unit_interval() {
        let (ds, _) = gen_friedman1(500, 1, 0.0).unwrap();
        for col in ds.columns() {
            assert!(col.as_numeric().unwrap().iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn stability_functions() {
        let ds = Dataset::from_numeric(vec![("x1", vec![0.3, 0.7]), ("x2", vec![0.5, 0.7])]).unwrap();
        let a = eval_builtin(Builtin::StabilityA, &ds).unwrap();
        let b = eval_builtin(Builtin::StabilityB, &ds).unwrap();
        assert!((a.as_slice()[0] - 0.55).abs() < 1e-15);
        assert_eq!(a.as_slice()[1], b.as_slice()[1]);
        assert!(matches!(
            eval_builtin(Builtin::Friedman1, &ds),
            Err(MidError::Arity { expected: 10, found: 2, .. })
        ));
    }

    #[test]
    fn circle_labels_split_roughly_in_half() {
        let (_, y) = gen_circle(4000, 4, 11).unwrap();
        let frac = y.mean();
        assert!((frac - 0.5).abs() < 0.05, "inside fraction {frac}");
    }

    #[test]
    fn csv_round_trip() {
        let (ds, y) = gen_friedman1(20, 5, 0.5).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &ds, Some(("yhat", y.as_slice()))).unwrap();
        let (back, yb) = read_csv(buf.as_slice(), "yhat", &hints()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(yb, y);
    }
}
