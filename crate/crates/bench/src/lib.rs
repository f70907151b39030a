//! Criterion benchmarks for the numerical kernels and the full network;
//! see `benches/kernels.rs`.
