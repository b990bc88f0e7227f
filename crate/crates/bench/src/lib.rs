//! Criterion benchmarks for `flowweld`; see `benches/`.
