//! Label-invariant summaries of posterior mixing measures.
//!
//! Every functional is evaluated on the canonical form of each snapshot's
//! measure, so the result cannot depend on how atoms happen to be labelled.
//! No per-label quantity is exposed.

use super::gibbs::PosteriorSample;
use crate::error::{Error, Result};
use crate::model::{Component, MixingMeasure, MixtureModel, Obs};
use crate::scalar::{count, lit, stable_sum, Scalar};

/// Half-open box `[mean.0, mean.1) x [sigma.0, sigma.1)` in Normal
/// parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSet<T> {
    pub mean: (T, T),
    pub sigma: (T, T),
}

impl<T: Scalar> ParamSet<T> {
    pub fn whole() -> Self {
        Self {
            mean: (T::neg_infinity(), T::infinity()),
            sigma: (T::zero(), T::infinity()),
        }
    }

    pub fn mean_below(x: T) -> Self {
        Self {
            mean: (T::neg_infinity(), x),
            ..Self::whole()
        }
    }

    pub fn mean_at_least(x: T) -> Self {
        Self {
            mean: (x, T::infinity()),
            ..Self::whole()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean.0 < self.mean.1 && self.sigma.0 < self.sigma.1 && self.sigma.1 > T::zero()) {
            return Err(Error::domain("parameter set is empty"));
        }
        Ok(())
    }

    pub fn contains(&self, c: &Component<T>) -> Result<bool> {
        match *c {
            Component::Normal { mu, sigma } => Ok(self.mean.0 <= mu
                && mu < self.mean.1
                && self.sigma.0 <= sigma
                && sigma < self.sigma.1),
            other => Err(Error::FamilyMismatch {
                expected: crate::model::Family::Normal,
                found: other.family(),
            }),
        }
    }
}

/// Functionals of the mixing measure `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum Functional<T> {
    /// Number of distinct atoms of `H` in the set.
    AtomCountInSet(ParamSet<T>),
    /// `H(set)`.
    TotalWeightInSet(ParamSet<T>),
    /// Weight of the atom with the largest variance.
    WeightOfLargestVarianceComponent,
    /// Mixture density at each point.
    PredictiveDensityAt(Vec<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles<T> {
    pub q025: T,
    pub q50: T,
    pub q975: T,
}

/// Per-snapshot values of a functional (one vector per snapshot, one entry
/// per output coordinate) with coordinatewise mean and quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct HSummary<T> {
    pub values: Vec<Vec<T>>,
    pub mean: Vec<T>,
    pub quantiles: Vec<Quantiles<T>>,
}

/// Value of `functional` on one measure.
pub fn evaluate_functional<T: Scalar>(measure: &MixingMeasure<T>, functional: &Functional<T>) -> Result<Vec<T>> {
    let h = measure.canonicalize()?;
    match functional {
        Functional::AtomCountInSet(set) => {
            set.validate()?;
            let mut k = 0usize;
            for a in h.atoms() {
                if set.contains(&a.component)? {
                    k += 1;
                }
            }
            Ok(vec![count(k)])
        }
        Functional::TotalWeightInSet(set) => {
            set.validate()?;
            let mut ws = Vec::new();
            for a in h.atoms() {
                if set.contains(&a.component)? {
                    ws.push(a.weight);
                }
            }
            Ok(vec![stable_sum(ws)])
        }
        Functional::WeightOfLargestVarianceComponent => {
            let best = h
                .atoms()
                .iter()
                .fold(None::<&crate::model::Atom<T>>, |best, a| match best {
                    Some(b) if b.component.variance() >= a.component.variance() => Some(b),
                    _ => Some(a),
                })
                .expect("canonical measure is non-empty");
            Ok(vec![best.weight])
        }
        Functional::PredictiveDensityAt(points) => {
            if points.is_empty() {
                return Err(Error::domain("no evaluation points"));
            }
            let model = MixtureModel::new(h);
            points.iter().map(|&y| model.density(Obs::Real(y))).collect()
        }
    }
}

fn quantile<T: Scalar>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac: T = lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Evaluates `functional` on every snapshot of the raw chain.
pub fn summarize_h<T: Scalar>(sample: &PosteriorSample<T>, functional: &Functional<T>) -> Result<HSummary<T>> {
    if sample.snapshots.is_empty() {
        return Err(Error::domain("posterior sample is empty"));
    }
    let values = sample
        .snapshots
        .iter()
        .map(|s| evaluate_functional(&s.measure, functional))
        .collect::<Result<Vec<_>>>()?;
    let dim = values[0].len();
    let n: T = count(values.len());
    let mut mean = Vec::with_capacity(dim);
    let mut quantiles = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut col: Vec<T> = values.iter().map(|v| v[j]).collect();
        mean.push(stable_sum(col.iter().copied()) / n);
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite functional values"));
        quantiles.push(Quantiles {
            q025: quantile(&col, 0.025),
            q50: quantile(&col, 0.5),
            q975: quantile(&col, 0.975),
        });
    }
    Ok(HSummary {
        values,
        mean,
        quantiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure() -> MixingMeasure<f64> {
        MixingMeasure::from_parts(
            &[0.2, 0.3, 0.5],
            &[
                Component::normal(-2.0, 1.0).unwrap(),
                Component::normal(1.0, 3.0).unwrap(),
                Component::normal(4.0, 0.5).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn whole_space_carries_all_weight() {
        let v = evaluate_functional(&measure(), &Functional::TotalWeightInSet(ParamSet::whole())).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-15);
        let v = evaluate_functional(&measure(), &Functional::AtomCountInSet(ParamSet::whole())).unwrap();
        assert_eq!(v, vec![3.0]);
    }

    #[test]
    fn set_functionals() {
        let m = measure();
        let neg = ParamSet::mean_below(0.0);
        assert_eq!(evaluate_functional(&m, &Functional::AtomCountInSet(neg)).unwrap(), vec![1.0]);
        assert_eq!(evaluate_functional(&m, &Functional::TotalWeightInSet(neg)).unwrap(), vec![0.2]);
        assert_eq!(
            evaluate_functional(&m, &Functional::WeightOfLargestVarianceComponent).unwrap(),
            vec![0.3]
        );
    }

    #[test]
    fn empty_sets_and_points_are_rejected() {
        let empty = ParamSet {
            mean: (1.0, 1.0),
            sigma: (0.0, f64::INFINITY),
        };
        assert!(evaluate_functional(&measure(), &Functional::AtomCountInSet(empty)).is_err());
        assert!(evaluate_functional(&measure(), &Functional::PredictiveDensityAt(vec![])).is_err());
    }

    #[test]
    fn duplicated_atoms_count_once() {
        let m = MixingMeasure::from_parts(
            &[0.5, 0.5],
            &[Component::normal(-1.0, 1.0).unwrap(), Component::normal(-1.0, 1.0).unwrap()],
        )
        .unwrap();
        let v = evaluate_functional(&m, &Functional::AtomCountInSet(ParamSet::mean_below(0.0))).unwrap();
        assert_eq!(v, vec![1.0]);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 2.0);
        assert_eq!(quantile(&xs, 0.025), 0.1);
    }
}
