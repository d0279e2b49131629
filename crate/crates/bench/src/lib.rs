//! Criterion benchmarks for the simulation and event kernels; see `benches/kernels.rs`.
