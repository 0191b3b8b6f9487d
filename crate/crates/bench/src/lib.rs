//! Criterion benchmarks for spherefield; see `benches/`.
