//! Benchmarks only; see `benches/`. Run with `cargo bench -p elmfin-bench`.

pub use elmfin;
