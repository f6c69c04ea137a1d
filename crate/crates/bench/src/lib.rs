//! Criterion benchmarks for pdc-core live in `benches/`.
