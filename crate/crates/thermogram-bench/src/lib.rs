//! Benchmark-only package; see `benches/stages.rs`.
