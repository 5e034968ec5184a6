use crate::error::{Error, Result};
use crate::model::{Dataset, Family, MixingMeasure, Obs};
use crate::scalar::{log_sum_exp, CompensatedSum, Scalar};

/// A component family paired with a mixing measure:
/// `f(y) = sum_g eta_g f(y|theta_g)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel<T> {
    measure: MixingMeasure<T>,
}

impl<T: Scalar> MixtureModel<T> {
    pub fn new(measure: MixingMeasure<T>) -> Self {
        Self { measure }
    }

    pub fn family(&self) -> Family {
        self.measure.family()
    }

    pub fn measure(&self) -> &MixingMeasure<T> {
        &self.measure
    }

    pub fn into_measure(self) -> MixingMeasure<T> {
        self.measure
    }

    pub fn num_components(&self) -> usize {
        self.measure.len()
    }

    /// Mixture density at `y`, summed over atoms in stored order with
    /// compensated summation.
    pub fn density(&self, y: Obs<T>) -> Result<T> {
        let mut acc = CompensatedSum::new();
        for a in self.measure.atoms() {
            let f = a.component.density(y)?;
            acc.add(a.weight * f);
        }
        Ok(acc.total())
    }

    /// `ln f(y)` through log-sum-exp over `ln eta_g + ln f(y|theta_g)`.
    pub fn ln_density(&self, y: Obs<T>) -> Result<T> {
        let terms = self.log_terms(y)?;
        Ok(log_sum_exp(&terms))
    }

    /// Per-atom `ln eta_g + ln f(y|theta_g)`; zero-weight atoms give `-inf`.
    pub fn log_terms(&self, y: Obs<T>) -> Result<Vec<T>> {
        self.measure
            .atoms()
            .iter()
            .map(|a| {
                let lf = a.component.ln_density(y)?;
                Ok(if a.weight > T::zero() {
                    a.weight.ln() + lf
                } else {
                    T::neg_infinity()
                })
            })
            .collect()
    }

    /// Posterior allocation probabilities of one observation,
    /// `eta_g f(y|theta_g) / sum_h eta_h f(y|theta_h)`.
    ///
    /// Fails with [`Error::DegeneratePoint`] (carrying `index`) when every
    /// term underflows.
    pub fn allocation_probabilities(&self, y: Obs<T>, index: usize) -> Result<Vec<T>> {
        self.allocation_row(y, index).map(|(r, _)| r)
    }

    /// Allocation probabilities together with `ln f(y)`. Both the EM
    /// E-step and the Gibbs allocation update go through here.
    pub(crate) fn allocation_row(&self, y: Obs<T>, index: usize) -> Result<(Vec<T>, T)> {
        let mut terms = self.log_terms(y)?;
        let norm = log_sum_exp(&terms);
        if !norm.is_finite() {
            return Err(Error::DegeneratePoint { index });
        }
        for t in &mut terms {
            *t = (*t - norm).exp();
        }
        Ok((terms, norm))
    }

    /// `sum_i ln sum_g eta_g f(y_i|theta_g)`; `0` for an empty dataset,
    /// `-inf` if some observation has zero density.
    pub fn log_likelihood(&self, data: &Dataset<T>) -> Result<T> {
        let mut acc = CompensatedSum::new();
        for y in data.iter() {
            let l = self.ln_density(y)?;
            if l == T::neg_infinity() {
                return Ok(l);
            }
            acc.add(l);
        }
        Ok(acc.total())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Component;

    fn n(mu: f64, sigma: f64) -> Component<f64> {
        Component::normal(mu, sigma).unwrap()
    }

    fn model(w: &[f64], c: &[Component<f64>]) -> MixtureModel<f64> {
        MixtureModel::new(MixingMeasure::from_parts(w, c).unwrap())
    }

    #[test]
    fn single_component_reduces_to_component_density() {
        let m = model(&[1.0], &[n(0.0, 1.0)]);
        let d = m.density(Obs::Real(0.0)).unwrap();
        assert!((d - 0.398_942_280_401_432_7).abs() < 1e-16);
        for y in [-2.0, 0.3, 5.0] {
            assert_eq!(m.density(Obs::Real(y)).unwrap(), n(0.0, 1.0).density(Obs::Real(y)).unwrap());
        }
    }

    #[test]
    fn empty_dataset_has_zero_log_likelihood() {
        let m = model(&[1.0], &[n(0.0, 1.0)]);
        assert_eq!(m.log_likelihood(&Dataset::Real(vec![])).unwrap(), 0.0);
    }

    #[test]
    fn single_point_log_likelihood() {
        let m = model(&[1.0], &[n(2.0, 0.5)]);
        let ll = m.log_likelihood(&Dataset::Real(vec![2.0])).unwrap();
        let expected = -(0.5_f64).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((ll - expected).abs() < 1e-15);
    }

    #[test]
    fn out_of_support_is_a_domain_error() {
        let m = model(&[0.7, 0.3], &[Component::poisson(4.0).unwrap(), Component::poisson(6.0).unwrap()]);
        assert!(matches!(m.density(Obs::Real(-1.0)), Err(Error::Domain(_))));
        assert!(matches!(m.log_likelihood(&Dataset::Real(vec![1.0, -2.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn log_density_agrees_with_density() {
        let m = model(&[0.3, 0.5, 0.2], &[n(2.0, 1.0), n(3.0, 0.5), n(3.4, 1.3)]);
        for y in [-1.0, 2.5, 3.0, 7.0] {
            let a = m.density(Obs::Real(y)).unwrap().ln();
            let b = m.ln_density(Obs::Real(y)).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn far_tail_log_density_stays_finite() {
        let m = model(&[0.5, 0.5], &[n(0.0, 1.0), n(1.0, 1.0)]);
        assert_eq!(m.density(Obs::Real(100.0)).unwrap(), 0.0);
        let l = m.ln_density(Obs::Real(100.0)).unwrap();
        assert!(l.is_finite() && l < -4000.0);
    }

    #[test]
    fn allocation_probabilities_sum_to_one() {
        let m = model(&[0.5, 0.5], &[n(0.0, 1.0), n(4.0, 1.0)]);
        let r = m.allocation_probabilities(Obs::Real(2.0), 0).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15 && (r[1] - 0.5).abs() < 1e-15);
    }
}
