//! Criterion benchmarks for the solver strategies; see `benches/`.
