//! Bayesian inference for univariate Normal mixtures.
//!
//! A data-augmentation Gibbs sampler under independent Normal and
//! inverse-Gamma priors on each component, label-invariant summaries of
//! the mixing measure, and within-model evidence estimates combined into a
//! posterior over the number of components.

mod evidence;
mod gibbs;
mod prior;
mod summary;

pub use evidence::{log_marginal_likelihood, posterior_over_g, Evidence, EvidenceConfig, GPosterior};
pub use gibbs::{
    gibbs_allocation_probabilities, gibbs_allocations, gibbs_sweep, run_gibbs, GibbsConfig, GibbsState,
    PosteriorSample,
};
pub use prior::ConjugatePrior;
pub use summary::{evaluate_functional, summarize_h, Functional, HSummary, ParamSet, Quantiles};
