//! Criterion benchmarks for the perishgood core crate; see `benches/`.
