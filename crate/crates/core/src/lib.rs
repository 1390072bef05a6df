//! Gender bias measurement and mitigation tooling for masked language models.
//!
//! - [`stats`]: the chi-squared equal-rate test and DisCo score aggregation.
//! - [`disco`]: template slot-filling evaluation with gendered name pairs.
//! - [`mbe`]: pairwise sentence-likelihood comparison between genders.
//! - [`cda`]: counterfactual data augmentation and fine-tuning manifests.
//! - [`debias`]: prompt-based self-debiasing of slot predictions.
//! - [`gateway`]: HTTP client and in-process mock for model access.
//! - [`report`]: result tables in JSON and CSV.

pub mod cda;
pub mod debias;
pub mod disco;
pub mod gateway;
pub mod lang;
pub mod mbe;
pub mod report;
pub mod stats;

pub use lang::Language;
