//! Criterion benchmarks for pproj-core live in `benches/`.
