//! Finite mixture models.
//!
//! Densities, simulation and label-free mixing measures for Normal,
//! bivariate Normal and Poisson components; EM and data-augmentation Gibbs
//! fitting; evidence-based choice of the number of components; compound
//! distributions; and the Pólya-urn partition prior.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the scalar to `f64`, which is what most callers want. Exact
//! partition probabilities use [`Rational`].

pub mod bayes;
pub mod compound;
pub mod dp;
pub mod em;
mod error;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod scalar;

pub use error::{Error, Result};
pub use model::{Family, Obs};
pub use scalar::Scalar;

/// Arbitrary-precision rational.
pub type Rational = num_rational::BigRational;

pub type Component = model::Component<f64>;
pub type Atom = model::Atom<f64>;
pub type MixingMeasure = model::MixingMeasure<f64>;
pub type MixtureModel = model::MixtureModel<f64>;
pub type Dataset = model::Dataset<f64>;
pub type HmmSpec = sampling::HmmSpec<f64>;
pub type LabeledSample = sampling::LabeledSample<f64>;
pub type EmConfig = em::EmConfig<f64>;
pub type EmState = em::EmState<f64>;
pub type Responsibilities = em::Responsibilities<f64>;
pub type ConjugatePrior = bayes::ConjugatePrior<f64>;
pub type PosteriorSample = bayes::PosteriorSample<f64>;
pub type BetaBinomial = compound::BetaBinomial<f64>;
pub type NegativeBinomial = compound::NegativeBinomial<f64>;
pub type DirichletMultinomial = compound::DirichletMultinomial<f64>;
