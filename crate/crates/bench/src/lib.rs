//! Criterion benchmarks for `coflow-core`; see `benches/`.
