//! Kineme discovery from head-pose time series, reconstruction-error features
//! and cross-corpus evaluation of severity classifiers and regressors.

pub mod codebook;
pub mod config;
mod container;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod ingest;
mod linalg;
pub mod models;
pub mod nmf;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/kinemes.md")]
    mod kinemes {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
