//! Within-model marginal likelihoods and the posterior over `G`.
//!
//! `p(y|G)` is estimated by plain Monte Carlo over prior draws of
//! `(eta, theta)`. The estimator is unbiased but has high variance when the
//! prior is diffuse relative to the likelihood; it tends to underestimate
//! the evidence of larger models at a fixed number of draws.

use rayon::prelude::*;

use super::prior::ConjugatePrior;
use crate::error::{Error, Result};
use crate::model::{Component, Dataset, Family, MixingMeasure};
use crate::rng::rng_stream;
use crate::scalar::{count, lit, log_sum_exp, stable_sum, CompensatedSum, Scalar};

pub const MIN_PRIOR_DRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvidenceConfig {
    pub n_prior_draws: usize,
    pub seed: u64,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            n_prior_draws: 10_000,
            seed: 0,
        }
    }
}

/// Estimate of `ln p(y|G)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence<T> {
    pub log_estimate: T,
    /// Delta-method standard error of `log_estimate`.
    pub std_error: T,
    /// Every prior draw gave a zero likelihood; `log_estimate` is `-inf`.
    pub underflow: bool,
}

/// Log-likelihood of a univariate Normal mixture, with the per-component
/// constants hoisted out of the loop over observations.
fn normal_log_likelihood<T: Scalar>(measure: &MixingMeasure<T>, ys: &[T]) -> T {
    let half = lit::<T>(0.5);
    let ln_root_tau = half * T::TAU().ln();
    let comps: Vec<(T, T, T)> = measure
        .atoms()
        .iter()
        .filter(|a| a.weight > T::zero())
        .map(|a| match a.component {
            Component::Normal { mu, sigma } => (a.weight.ln() - sigma.ln() - ln_root_tau, mu, sigma.recip()),
            _ => unreachable!("prior draws are univariate Normal"),
        })
        .collect();
    let mut terms = vec![T::zero(); comps.len()];
    let mut acc = CompensatedSum::new();
    for &y in ys {
        let mut max = T::neg_infinity();
        for (t, &(c, mu, inv)) in terms.iter_mut().zip(&comps) {
            let z = (y - mu) * inv;
            *t = c - half * z * z;
            max = max.max(*t);
        }
        if max == T::neg_infinity() {
            return max;
        }
        let s = terms.iter().fold(T::zero(), |s, &t| s + (t - max).exp());
        acc.add(max + s.ln());
    }
    acc.total()
}

fn evidence_with_streams<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    prior: &ConjugatePrior<T>,
    config: EvidenceConfig,
    stream_base: u64,
) -> Result<Evidence<T>> {
    if !matches!(data, Dataset::Real(_)) {
        return Err(Error::FamilyMismatch {
            expected: Family::Normal,
            found: data.family(),
        });
    }
    prior.validate()?;
    if prior.num_components() != g {
        return Err(Error::domain(format!("prior is for {} components, not {g}", prior.num_components())));
    }
    if config.n_prior_draws < MIN_PRIOR_DRAWS {
        return Err(Error::domain(format!(
            "n_prior_draws must be at least {MIN_PRIOR_DRAWS}, got {}",
            config.n_prior_draws
        )));
    }
    let Dataset::Real(ys) = data else { unreachable!("checked above") };
    let lls: Vec<T> = (0..config.n_prior_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_stream(config.seed, stream_base + k as u64);
            normal_log_likelihood(&prior.sample_measure(&mut rng), ys)
        })
        .collect();
    let m: T = count(config.n_prior_draws);
    let max = lls.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Ok(Evidence {
            log_estimate: T::neg_infinity(),
            std_error: T::infinity(),
            underflow: true,
        });
    }
    let log_estimate = log_sum_exp(&lls) - m.ln();
    let w: Vec<T> = lls.iter().map(|&l| (l - max).exp()).collect();
    let mean = stable_sum(w.iter().copied()) / m;
    let var = stable_sum(w.iter().map(|&x| (x - mean) * (x - mean))) / (m - T::one());
    Ok(Evidence {
        log_estimate,
        std_error: (var / m).sqrt() / mean,
        underflow: false,
    })
}

/// Monte-Carlo estimate of `ln p(y|G)`: the log of the average likelihood
/// over `n_prior_draws` draws from `prior`.
pub fn log_marginal_likelihood<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    prior: &ConjugatePrior<T>,
    config: EvidenceConfig,
) -> Result<Evidence<T>> {
    evidence_with_streams(data, g, prior, config, 0)
}

/// Posterior over the number of components.
#[derive(Debug, Clone, PartialEq)]
pub struct GPosterior<T> {
    pub g_values: Vec<usize>,
    pub evidence: Vec<Evidence<T>>,
    pub posterior: Vec<T>,
}

impl<T: Scalar> GPosterior<T> {
    /// `G` with the largest posterior probability (first on ties).
    pub fn mode(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.posterior.iter().enumerate() {
            if p > self.posterior[best] {
                best = k;
            }
        }
        self.g_values[best]
    }
}

/// `p(G|y) = p(G) p(y|G) / sum_G' p(G') p(y|G')` with evidences from
/// [`log_marginal_likelihood`]. Each `G` uses its own block of RNG streams.
pub fn posterior_over_g<T, F>(
    data: &Dataset<T>,
    g_values: &[usize],
    prior_builder: F,
    prior_on_g: &[T],
    config: EvidenceConfig,
) -> Result<GPosterior<T>>
where
    T: Scalar,
    F: Fn(usize) -> Result<ConjugatePrior<T>>,
{
    if g_values.is_empty() {
        return Err(Error::domain("no values of G to compare"));
    }
    if prior_on_g.len() != g_values.len() {
        return Err(Error::domain("prior on G must have one entry per candidate G"));
    }
    if prior_on_g.iter().any(|&p| !(p >= T::zero() && p.is_finite())) {
        return Err(Error::domain("prior on G has a negative or non-finite entry"));
    }
    let total = stable_sum(prior_on_g.iter().copied());
    if (total - T::one()).abs() > T::simplex_tolerance() {
        return Err(Error::domain(format!("prior on G sums to {total}, not 1")));
    }
    let evidence = g_values
        .iter()
        .map(|&g| evidence_with_streams(data, g, &prior_builder(g)?, config, (g as u64) << 40))
        .collect::<Result<Vec<_>>>()?;
    let log_post: Vec<T> = evidence
        .iter()
        .zip(prior_on_g)
        .map(|(e, &p)| if p > T::zero() { p.ln() + e.log_estimate } else { T::neg_infinity() })
        .collect();
    let norm = log_sum_exp(&log_post);
    if !norm.is_finite() {
        return Err(Error::domain("every candidate G has zero posterior mass"));
    }
    Ok(GPosterior {
        g_values: g_values.to_vec(),
        evidence,
        posterior: log_post.iter().map(|&l| (l - norm).exp()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_likelihood_matches_the_model() {
        use crate::model::MixtureModel;
        let prior = ConjugatePrior::new(vec![1.0, 2.0, 0.5], 0.0, 3.0, 2.0, 1.5).unwrap();
        let ys: Vec<f64> = (0..200).map(|k| -6.0 + 0.06 * k as f64).collect();
        let data = Dataset::Real(ys.clone());
        let mut rng = rng_stream(3, 0);
        for _ in 0..20 {
            let m = prior.sample_measure(&mut rng);
            let slow = MixtureModel::new(m.clone()).log_likelihood(&data).unwrap();
            let fast = normal_log_likelihood(&m, &ys);
            assert!((slow - fast).abs() <= 1e-10 * slow.abs().max(1.0), "{slow} vs {fast}");
        }
    }

    #[test]
    fn empty_data_has_zero_log_evidence() {
        let prior = ConjugatePrior::new(vec![1.0, 1.0], 0.0, 1.0, 2.0, 1.0).unwrap();
        let e = log_marginal_likelihood(&Dataset::Real(vec![]), 2, &prior, EvidenceConfig::default()).unwrap();
        assert_eq!(e.log_estimate, 0.0);
        assert!(!e.underflow);
    }

    #[test]
    fn too_few_draws_is_rejected() {
        let prior = ConjugatePrior::new(vec![1.0], 0.0, 1.0, 2.0, 1.0).unwrap();
        let cfg = EvidenceConfig {
            n_prior_draws: 10,
            seed: 0,
        };
        assert!(log_marginal_likelihood(&Dataset::Real(vec![0.0]), 1, &prior, cfg).is_err());
    }

    #[test]
    fn point_mass_prior_on_g_is_preserved() {
        let data = Dataset::Real(vec![0.1, -0.4, 0.3]);
        let build = |g: usize| ConjugatePrior::default_for(&[0.1, -0.4, 0.3], g);
        let post = posterior_over_g(&data, &[1, 2, 3], build, &[0.0, 1.0, 0.0], EvidenceConfig::default()).unwrap();
        assert_eq!(post.posterior, vec![0.0, 1.0, 0.0]);
        assert_eq!(post.mode(), 2);
    }

    #[test]
    fn equal_evidence_with_uniform_prior_is_uniform() {
        // With no data every evidence is exactly 1.
        let data = Dataset::Real(vec![]);
        let build = |g: usize| ConjugatePrior::default_for(&[], g);
        let third: f64 = 1.0 / 3.0;
        let post = posterior_over_g(&data, &[1, 2, 3], build, &[third, third, third], EvidenceConfig::default())
            .unwrap();
        for p in &post.posterior {
            assert!((p - third).abs() < 1e-15);
        }
    }

    #[test]
    fn prior_on_g_must_be_a_distribution() {
        let data = Dataset::Real(vec![0.0]);
        let build = |g: usize| ConjugatePrior::default_for(&[0.0], g);
        assert!(posterior_over_g(&data, &[1, 2], build, &[0.5, 0.6], EvidenceConfig::default()).is_err());
        assert!(posterior_over_g(&data, &[], build, &[], EvidenceConfig::default()).is_err());
    }
}
