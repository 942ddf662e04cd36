//! Counterfactual explanations for tabular classifiers from a class-pure ball
//! coverage of the training data.

pub mod association;
pub mod baselines;
pub mod bench;
pub mod cli;
pub mod coverage;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod predictor;
pub mod report;
pub mod tabular;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/coverage.md")]
    mod coverage {}
    #[doc = include_str!("../../../book/src/search.md")]
    mod search {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
