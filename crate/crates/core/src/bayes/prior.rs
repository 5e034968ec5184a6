use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Atom, Component, MixingMeasure};
use crate::scalar::{lit, stable_sum, Scalar};

/// Prior for a `G`-component Normal mixture.
///
/// `eta ~ Dirichlet(dirichlet_weights)`, and independently for each
/// component `mu_g ~ N(mean_loc, mean_scale^2)`,
/// `sigma_g^2 ~ InvGamma(ig_shape, ig_scale)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatePrior<T> {
    pub dirichlet_weights: Vec<T>,
    pub mean_loc: T,
    pub mean_scale: T,
    pub ig_shape: T,
    pub ig_scale: T,
}

impl<T: Scalar> ConjugatePrior<T> {
    pub fn new(dirichlet_weights: Vec<T>, mean_loc: T, mean_scale: T, ig_shape: T, ig_scale: T) -> Result<Self> {
        let p = Self {
            dirichlet_weights,
            mean_loc,
            mean_scale,
            ig_shape,
            ig_scale,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x.is_finite() && x > T::zero();
        if self.dirichlet_weights.is_empty() || !self.dirichlet_weights.iter().all(|&a| pos(a)) {
            return Err(Error::domain("Dirichlet weights must be a non-empty list of positive values"));
        }
        if !self.mean_loc.is_finite() {
            return Err(Error::domain("prior mean location must be finite"));
        }
        if !(pos(self.mean_scale) && pos(self.ig_shape) && pos(self.ig_scale)) {
            return Err(Error::domain("prior scale, shape and inverse-gamma scale must be > 0"));
        }
        Ok(())
    }

    pub fn num_components(&self) -> usize {
        self.dirichlet_weights.len()
    }

    /// Data-scaled weakly informative default: unit Dirichlet weights, mean
    /// prior centred at the midrange with the range as its scale,
    /// `InvGamma(2, sample variance)` on variances.
    pub fn default_for(data: &[T], g: usize) -> Result<Self> {
        if g == 0 {
            return Err(Error::domain("G must be at least 1"));
        }
        let (lo, hi) = data
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(a, b), &y| (a.min(y), b.max(y)));
        let (loc, range) = if data.is_empty() {
            (T::zero(), T::one())
        } else {
            ((lo + hi) / lit(2.0), hi - lo)
        };
        let n: T = lit(data.len().max(1) as f64);
        let mean = stable_sum(data.iter().copied()) / n;
        let var = stable_sum(data.iter().map(|&y| (y - mean) * (y - mean))) / n;
        let positive_or_one = |x: T| if x.is_finite() && x > T::zero() { x } else { T::one() };
        Self::new(
            vec![T::one(); g],
            loc,
            positive_or_one(range),
            lit(2.0),
            positive_or_one(var),
        )
    }

    /// Draws `(mu, sigma)` for one component; variance first.
    pub(crate) fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Component<T> {
        let var = sample_inverse_gamma(self.ig_shape, self.ig_scale, rng);
        let mu = self.mean_loc + self.mean_scale * lit(StandardNormal.sample(rng));
        Component::Normal { mu, sigma: var.sqrt() }
    }

    /// A draw of the whole mixing measure from the prior.
    pub fn sample_measure<R: Rng + ?Sized>(&self, rng: &mut R) -> MixingMeasure<T> {
        let eta = sample_dirichlet(&self.dirichlet_weights, rng);
        let atoms = eta
            .into_iter()
            .map(|w| Atom::new(w, self.sample_component(rng)))
            .collect();
        MixingMeasure::normalized(atoms).expect("Dirichlet draw is a probability vector")
    }
}

/// `scale / Gamma(shape, 1)`.
pub(crate) fn sample_inverse_gamma<T: Scalar, R: Rng + ?Sized>(shape: T, scale: T, rng: &mut R) -> T {
    let g = Gamma::new(shape.to_f64_lossless(), 1.0).expect("validated shape");
    let x: f64 = g.sample(rng);
    scale / lit(x.max(f64::MIN_POSITIVE))
}

/// Normalised independent `Gamma(alpha_k, 1)` draws.
pub(crate) fn sample_dirichlet<T: Scalar, R: Rng + ?Sized>(alpha: &[T], rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|&a| Gamma::new(a.to_f64_lossless(), 1.0).expect("validated concentration").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter().map(|&x| lit(x / total)).collect()
    } else {
        // Every gamma draw underflowed; the largest concentration wins.
        let k = alpha
            .iter()
            .enumerate()
            .fold(0, |b, (i, &a)| if a > alpha[b] { i } else { b });
        (0..alpha.len()).map(|i| if i == k { T::one() } else { T::zero() }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn validation() {
        assert!(ConjugatePrior::new(vec![1.0], 0.0, 1.0, 2.0, 1.0).is_ok());
        assert!(ConjugatePrior::new(vec![], 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(ConjugatePrior::new(vec![0.0], 0.0, 1.0, 2.0, 1.0).is_err());
        assert!(ConjugatePrior::new(vec![1.0], 0.0, -1.0, 2.0, 1.0).is_err());
        assert!(ConjugatePrior::new(vec![1.0], 0.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn defaults_follow_the_data() {
        let p = ConjugatePrior::<f64>::default_for(&[0.0, 2.0, 10.0], 3).unwrap();
        assert_eq!(p.dirichlet_weights, vec![1.0; 3]);
        assert_eq!(p.mean_loc, 5.0);
        assert_eq!(p.mean_scale, 10.0);
        assert_eq!(p.ig_shape, 2.0);
        assert!((p.ig_scale - 56.0 / 3.0).abs() < 1e-12);
        let p = ConjugatePrior::<f64>::default_for(&[], 2).unwrap();
        assert_eq!((p.mean_loc, p.mean_scale, p.ig_scale), (0.0, 1.0, 1.0));
    }

    #[test]
    fn dirichlet_draws_are_on_the_simplex() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let d = sample_dirichlet(&[0.5, 1.0, 3.0], &mut rng);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&x| x >= 0.0));
        }
    }
}
