//! Criterion benchmarks for `permnqs-core`; see `benches/estimators.rs`.
//!
//! Run with `cargo bench -p permnqs-bench`.
