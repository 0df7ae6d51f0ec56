//! Criterion benchmarks for section modules and table rows; see `benches/`.
//! Run with `cargo bench -p gkm-bench`.
