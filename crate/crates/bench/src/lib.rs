//! Criterion benchmarks for the consensus core; run with `cargo bench -p consensus-bench`.
