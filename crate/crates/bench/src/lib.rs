//! Criterion benchmarks for the core pipeline live under benches/.
