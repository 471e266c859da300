//! Criterion benchmarks for spp-core; see `benches/spp.rs`.
