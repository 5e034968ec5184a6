//! Generative simulation.
//!
//! Mixture draws are two-stage: the allocation `z_i` is drawn from the
//! weights by inverse cdf over the stored atom order, then `y_i` from the
//! allocated component. The HMM sampler consumes the generator in exactly
//! the same pattern, so an HMM whose initial distribution and transition
//! rows all equal `eta` reproduces [`sample_mixture`] bit for bit.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Component, Dataset, MixtureModel};
use crate::rng::rng_from_seed;
use crate::scalar::{lit, stable_sum, Scalar};

/// Draws an index from a probability vector by inverse cdf.
///
/// Falls back to the last positive-weight index if rounding leaves `u`
/// above the accumulated total.
pub fn sample_categorical<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u: T = lit(rng.random::<f64>());
    let mut cum = T::zero();
    for (g, &p) in probs.iter().enumerate() {
        cum = cum + p;
        if u < cum {
            return g;
        }
    }
    probs.iter().rposition(|&p| p > T::zero()).unwrap_or(0)
}

/// Observations together with their latent allocations (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample<T> {
    pub data: Dataset<T>,
    pub z: Vec<usize>,
    pub seed: u64,
}

/// `n` draws from `model` with their allocations.
pub fn sample_mixture<T: Scalar>(model: &MixtureModel<T>, n: usize, seed: u64) -> LabeledSample<T> {
    let mut rng = rng_from_seed(seed);
    sample_mixture_with(model, n, &mut rng, seed)
}

pub(crate) fn sample_mixture_with<T: Scalar, R: Rng + ?Sized>(
    model: &MixtureModel<T>,
    n: usize,
    rng: &mut R,
    seed: u64,
) -> LabeledSample<T> {
    let weights = model.measure().weights();
    let components = model.measure().components();
    let mut data = Dataset::empty(model.family());
    let mut z = Vec::with_capacity(n);
    for _ in 0..n {
        let g = sample_categorical(&weights, rng);
        data.push(components[g].sample(rng));
        z.push(g);
    }
    LabeledSample { data, z, seed }
}

/// Hidden Markov model with a shared emission family.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmSpec<T> {
    initial: Vec<T>,
    transition: Vec<Vec<T>>,
    emissions: Vec<Component<T>>,
}

fn check_probability_vector<T: Scalar>(p: &[T], what: &str) -> Result<()> {
    if p.iter().any(|&x| !(x.is_finite() && x >= T::zero())) {
        return Err(Error::domain(format!("{what} has a negative or non-finite entry")));
    }
    let total = stable_sum(p.iter().copied());
    if (total - T::one()).abs() > T::simplex_tolerance() {
        return Err(Error::domain(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl<T: Scalar> HmmSpec<T> {
    pub fn new(initial: Vec<T>, transition: Vec<Vec<T>>, emissions: Vec<Component<T>>) -> Result<Self> {
        let g = emissions.len();
        if g == 0 {
            return Err(Error::domain("an HMM needs at least one state"));
        }
        let family = emissions[0].family();
        if let Some(e) = emissions.iter().find(|e| e.family() != family) {
            return Err(Error::FamilyMismatch {
                expected: family,
                found: e.family(),
            });
        }
        if initial.len() != g || transition.len() != g || transition.iter().any(|r| r.len() != g) {
            return Err(Error::domain(format!(
                "initial distribution and transition matrix must be sized for {g} states"
            )));
        }
        check_probability_vector(&initial, "initial distribution")?;
        for (h, row) in transition.iter().enumerate() {
            check_probability_vector(row, &format!("transition row {h}"))?;
        }
        Ok(Self {
            initial,
            transition,
            emissions,
        })
    }

    pub fn num_states(&self) -> usize {
        self.emissions.len()
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn transition(&self) -> &[Vec<T>] {
        &self.transition
    }

    pub fn emissions(&self) -> &[Component<T>] {
        &self.emissions
    }
}

/// State path (0-based) and emissions of a length-`len` HMM realisation.
pub fn sample_hmm<T: Scalar>(spec: &HmmSpec<T>, len: usize, seed: u64) -> Result<(Vec<usize>, Dataset<T>)> {
    if len == 0 {
        return Err(Error::domain("sequence length must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut states = Vec::with_capacity(len);
    let mut data = Dataset::empty(spec.emissions[0].family());
    let mut probs = spec.initial.as_slice();
    for _ in 0..len {
        let g = sample_categorical(probs, &mut rng);
        data.push(spec.emissions[g].sample(&mut rng));
        states.push(g);
        probs = &spec.transition[g];
    }
    Ok((states, data))
}

/// Mixing distribution over the Normal variance `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleMixing<T> {
    /// `sigma^2 ~ InvGamma(shape, scale)`; `shape = scale = nu/2` gives Student-t with `nu` dof.
    InverseGamma { shape: T, scale: T },
    /// `sigma^2 ~ Exp(rate)`; gives a Laplace law with scale `1/sqrt(2 rate)`.
    Exponential { rate: T },
}

/// `n` draws of `y | sigma^2 ~ N(mu, sigma^2)` with `sigma^2` from `mixing`.
pub fn sample_scale_mixture<T: Scalar>(mu: T, mixing: ScaleMixing<T>, n: usize, seed: u64) -> Result<Vec<T>> {
    if !mu.is_finite() {
        return Err(Error::domain("location must be finite"));
    }
    let positive = |x: T| x.is_finite() && x > T::zero();
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    match mixing {
        ScaleMixing::InverseGamma { shape, scale } => {
            if !(positive(shape) && positive(scale)) {
                return Err(Error::domain("inverse-gamma shape and scale must be > 0"));
            }
            let gamma = Gamma::new(shape.to_f64_lossless(), 1.0).map_err(|e| Error::domain(e.to_string()))?;
            let scale = scale.to_f64_lossless();
            for _ in 0..n {
                let var = scale / gamma.sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                out.push(mu + lit::<T>(var.sqrt() * z));
            }
        }
        ScaleMixing::Exponential { rate } => {
            if !positive(rate) {
                return Err(Error::domain("exponential rate must be > 0"));
            }
            let exp = Exp::new(rate.to_f64_lossless()).map_err(|e| Error::domain(e.to_string()))?;
            for _ in 0..n {
                let var: f64 = exp.sample(&mut rng);
                let z: f64 = StandardNormal.sample(&mut rng);
                out.push(mu + lit::<T>(var.sqrt() * z));
            }
        }
    }
    Ok(out)
}

/// `n` draws from the mixture over `theta` of `Uniform[0, theta]`, with
/// atoms given as `(weight, theta)`. The result has a non-increasing
/// density on `[0, inf)`.
pub fn sample_monotone_density<T: Scalar>(atoms: &[(T, T)], n: usize, seed: u64) -> Result<Vec<T>> {
    if atoms.is_empty() {
        return Err(Error::domain("at least one atom is required"));
    }
    if let Some(&(_, t)) = atoms.iter().find(|a| !(a.1.is_finite() && a.1 > T::zero())) {
        return Err(Error::domain(format!("uniform endpoint must be > 0, got {t}")));
    }
    let weights: Vec<T> = atoms.iter().map(|a| a.0).collect();
    check_probability_vector(&weights, "atom weights")?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n)
        .map(|_| {
            let g = sample_categorical(&weights, &mut rng);
            atoms[g].1 * lit(rng.random::<f64>())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MixingMeasure, Obs};

    fn normal(mu: f64, s: f64) -> Component<f64> {
        Component::normal(mu, s).unwrap()
    }

    #[test]
    fn empty_and_degenerate_mixture_samples() {
        let m = MixtureModel::new(MixingMeasure::from_parts(&[1.0], &[normal(0.0, 1.0)]).unwrap());
        let s = sample_mixture(&m, 0, 1);
        assert!(s.data.is_empty() && s.z.is_empty());
        let s = sample_mixture(&m, 100, 1);
        assert!(s.z.iter().all(|&z| z == 0));
        assert_eq!(s.data.len(), 100);
    }

    #[test]
    fn categorical_skips_zero_weights() {
        let mut rng = rng_from_seed(9);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn identity_transition_keeps_the_first_state() {
        let spec = HmmSpec::new(
            vec![1.0, 0.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![normal(0.0, 1.0), normal(5.0, 1.0)],
        )
        .unwrap();
        let (states, data) = sample_hmm(&spec, 50, 4).unwrap();
        assert!(states.iter().all(|&s| s == 0));
        assert_eq!(data.len(), 50);
    }

    #[test]
    fn hmm_validation() {
        let e = vec![normal(0.0, 1.0), normal(1.0, 1.0)];
        assert!(HmmSpec::new(vec![0.5, 0.5], vec![vec![0.5, 0.6], vec![0.5, 0.5]], e.clone()).is_err());
        assert!(HmmSpec::new(vec![0.5, 0.5], vec![vec![1.0, 0.0]], e.clone()).is_err());
        assert!(HmmSpec::new(vec![1.5, -0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], e.clone()).is_err());
        let spec = HmmSpec::new(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]], e).unwrap();
        assert!(sample_hmm(&spec, 0, 1).is_err());
    }

    #[test]
    fn hmm_with_repeated_rows_is_iid_mixture_sampling() {
        let eta = vec![0.3, 0.5, 0.2];
        let comps = vec![normal(2.0, 1.0), normal(3.0, 0.5), normal(3.4, 1.3)];
        let spec = HmmSpec::new(eta.clone(), vec![eta.clone(); 3], comps.clone()).unwrap();
        let model = MixtureModel::new(MixingMeasure::from_parts(&eta, &comps).unwrap());
        let (states, data) = sample_hmm(&spec, 1000, 77).unwrap();
        let s = sample_mixture(&model, 1000, 77);
        assert_eq!(states, s.z);
        assert_eq!(data, s.data);
    }

    #[test]
    fn scale_mixture_validation_and_empty() {
        assert!(sample_scale_mixture(0.0, ScaleMixing::Exponential { rate: 0.0 }, 5, 1).is_err());
        assert!(sample_scale_mixture(0.0, ScaleMixing::InverseGamma { shape: -1.0, scale: 1.0 }, 5, 1).is_err());
        assert!(sample_scale_mixture(0.0, ScaleMixing::Exponential { rate: 1.0 }, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn monotone_sampler_validation() {
        assert!(sample_monotone_density(&[(1.0, 0.0)], 5, 1).is_err());
        assert!(sample_monotone_density(&[(0.5, 1.0)], 5, 1).is_err());
        assert!(sample_monotone_density::<f64>(&[(1.0, 1.0)], 0, 1).unwrap().is_empty());
        let ys = sample_monotone_density(&[(0.5, 1.0), (0.5, 2.0)], 1000, 1).unwrap();
        assert!(ys.iter().all(|&y| (0.0..2.0).contains(&y)));
    }

    #[test]
    fn bivariate_and_poisson_mixtures_sample() {
        let m = MixtureModel::new(
            MixingMeasure::from_parts(
                &[0.7, 0.3],
                &[Component::poisson(4.0).unwrap(), Component::poisson(6.0).unwrap()],
            )
            .unwrap(),
        );
        let s = sample_mixture(&m, 10, 2);
        assert!(s.data.iter().all(|y| matches!(y, Obs::Count(_))));
    }
}
