//! Maximum interpretation decomposition: a low-order additive surrogate of a
//! black-box prediction function, fitted by constrained least squares.

pub mod bench;
pub mod data;
pub mod design;
pub mod encoding;
pub mod error;
pub mod interpret;
pub mod model;
pub mod pd;
pub mod scenario;
pub mod solver;
pub mod sum;

pub use data::{Column, ColumnType, Dataset, PredictionVector, Value};
pub use design::{EncoderSet, LinearSystem, TermKey};
pub use encoding::{Encoder, EncoderKind};
pub use error::{ErrorCategory, MidError, Result};
pub use interpret::{BreakdownResult, IceCurves, ImportanceTable, ShapMatrix};
pub use model::{fit, EffectTable, FitOptions, MidModel};
pub use pd::Predictor;
pub use solver::{SolveReport, SolverConfig, SolverMethod};
pub use sum::exact_sum;
