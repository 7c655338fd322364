//! Bayesian multiple changepoint detection for multivariate series through a
//! multinomial-logistic loss, with Pólya-Gamma augmented Gibbs sampling.

pub mod bench;
pub mod data;
pub mod draws_io;
pub mod error;
pub mod gibbs;
pub mod model;
pub mod mvn;
pub mod pg;
pub mod rng;
pub mod selection;
pub mod sim;
pub mod summary;
pub mod tempering;

pub use data::{ChangepointVector, ScaleOrder, SegmentLabels, SeriesMatrix};
pub use error::{Error, Result};
pub use gibbs::{run_bclr, run_chain, ChainState, GibbsConfig, Init, PosteriorDraws, Sampler};
pub use model::{CoefficientSet, GaussianPrior, HorseshoeState, KappaPrior, PriorSpec};
