//! Mixture models as mixing measures over a parametric component family.

mod component;
mod data;
mod measure;
mod mixture;
pub mod modes;

pub use component::{Component, Family};
pub use data::{Dataset, Obs};
pub use measure::{Atom, MixingMeasure, PARAMETER_EPSILON, WEIGHT_EPSILON};
pub use mixture::MixtureModel;
pub use modes::{count_modes, covering_interval, ModeReport};
