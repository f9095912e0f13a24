//! Criterion benchmarks for bgwscale; see `benches/`.
