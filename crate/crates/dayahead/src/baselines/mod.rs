//! Benchmark models.
pub mod lasso;
