//! Experiments, codebook files and reports for shape-gain limited-feedback
//! precoding, on top of `shapegain-core`.

pub mod codebook_io;
pub mod config;
pub mod experiments;
pub mod report;

pub use config::ExperimentSpec;
