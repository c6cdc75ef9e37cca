//! Criterion benchmarks for the `lwe-attack` crate; see `benches/`.
