use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::prior::{sample_dirichlet, sample_inverse_gamma, ConjugatePrior};
use crate::em::{distinct_points, Responsibilities};
use crate::error::{Error, Result};
use crate::model::{Atom, Component, Dataset, Family, MixingMeasure, MixtureModel, Obs};
use crate::rng::{rng_from_seed, FinmixRng};
use crate::sampling::sample_categorical;
use crate::scalar::{count, lit, stable_sum, Scalar};

/// Sampler state: allocations (0-based), mixing measure, sweep counter.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsState<T> {
    pub z: Vec<usize>,
    pub measure: MixingMeasure<T>,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub n_samples: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            n_samples: 2000,
            thin: 1,
            seed: 0,
        }
    }
}

/// Raw, unrelabelled chain output. Atom labels switch freely between
/// snapshots; only label-invariant functionals of the measure are
/// meaningful (see [`super::summarize_h`]).
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSample<T> {
    pub snapshots: Vec<GibbsState<T>>,
    pub seed: u64,
    pub config: GibbsConfig,
}

fn reals<T: Scalar>(data: &Dataset<T>) -> Result<&[T]> {
    match data {
        Dataset::Real(v) => Ok(v),
        d => Err(Error::FamilyMismatch {
            expected: Family::Normal,
            found: d.family(),
        }),
    }
}

/// Allocation probabilities used by the Gibbs update. Row `i` is computed
/// by the same routine as the EM E-step.
pub fn gibbs_allocation_probabilities<T: Scalar>(
    measure: &MixingMeasure<T>,
    data: &Dataset<T>,
) -> Result<Responsibilities<T>> {
    let model = MixtureModel::new(measure.clone());
    let rows = data
        .iter()
        .enumerate()
        .map(|(i, y)| model.allocation_probabilities(y, i))
        .collect::<Result<Vec<_>>>()?;
    Responsibilities::from_rows(rows, measure.len())
}

/// Independent draws `P(z_i = g) = r_ig`.
pub fn gibbs_allocations<T: Scalar>(measure: &MixingMeasure<T>, data: &Dataset<T>, seed: u64) -> Result<Vec<usize>> {
    allocations_with(measure, data, &mut rng_from_seed(seed))
}

fn allocations_with<T: Scalar, R: Rng + ?Sized>(
    measure: &MixingMeasure<T>,
    data: &Dataset<T>,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let model = MixtureModel::new(measure.clone());
    data.iter()
        .enumerate()
        .map(|(i, y)| Ok(sample_categorical(&model.allocation_probabilities(y, i)?, rng)))
        .collect()
}

/// One full scan: allocations, weights, then per component the variance
/// given the current mean followed by the mean given the new variance.
/// Components with no allocated observations are redrawn from the prior.
pub fn gibbs_sweep<T: Scalar>(
    state: &GibbsState<T>,
    data: &Dataset<T>,
    prior: &ConjugatePrior<T>,
    seed: u64,
) -> Result<GibbsState<T>> {
    sweep_with(state, data, prior, &mut rng_from_seed(seed))
}

fn sweep_with<T: Scalar, R: Rng + ?Sized>(
    state: &GibbsState<T>,
    data: &Dataset<T>,
    prior: &ConjugatePrior<T>,
    rng: &mut R,
) -> Result<GibbsState<T>> {
    let ys = reals(data)?;
    let g = state.measure.len();
    if prior.num_components() != g {
        return Err(Error::domain(format!(
            "prior is for {} components, state has {g}",
            prior.num_components()
        )));
    }
    let z = allocations_with(&state.measure, data, rng)?;

    let mut members: Vec<Vec<T>> = vec![Vec::new(); g];
    for (&zi, &y) in z.iter().zip(ys) {
        members[zi].push(y);
    }
    let alpha: Vec<T> = prior
        .dirichlet_weights
        .iter()
        .zip(&members)
        .map(|(&a, m)| a + count(m.len()))
        .collect();
    let eta = sample_dirichlet(&alpha, rng);

    let half = lit::<T>(0.5);
    let mut atoms = Vec::with_capacity(g);
    for (k, group) in members.iter().enumerate() {
        let component = if group.is_empty() {
            prior.sample_component(rng)
        } else {
            let Component::Normal { mu, .. } = state.measure.atoms()[k].component else {
                return Err(Error::FamilyMismatch {
                    expected: Family::Normal,
                    found: state.measure.family(),
                });
            };
            let nk: T = count(group.len());
            let ss = stable_sum(group.iter().map(|&y| (y - mu) * (y - mu)));
            let var = sample_inverse_gamma(prior.ig_shape + half * nk, prior.ig_scale + half * ss, rng);
            let prior_prec = T::one() / (prior.mean_scale * prior.mean_scale);
            let prec = prior_prec + nk / var;
            let mean = (prior.mean_loc * prior_prec + stable_sum(group.iter().copied()) / var) / prec;
            let z0: f64 = StandardNormal.sample(rng);
            Component::Normal {
                mu: mean + lit::<T>(z0) / prec.sqrt(),
                sigma: var.sqrt(),
            }
        };
        atoms.push(Atom::new(eta[k], component));
    }
    Ok(GibbsState {
        z,
        measure: MixingMeasure::normalized(atoms)?,
        iteration: state.iteration + 1,
    })
}

fn initial_state<T: Scalar>(
    data: &Dataset<T>,
    ys: &[T],
    g: usize,
    prior: &ConjugatePrior<T>,
    rng: &mut FinmixRng,
) -> Result<GibbsState<T>> {
    let measure = if ys.len() >= g.max(2) {
        let n: T = count(ys.len());
        let mean = stable_sum(ys.iter().copied()) / n;
        let var = stable_sum(ys.iter().map(|&y| (y - mean) * (y - mean))) / n;
        let sigma = if var > T::zero() { var.sqrt() } else { T::one() };
        let atoms = distinct_points(data, g, rng)
            .into_iter()
            .map(|y| match y {
                Obs::Real(mu) => Ok(Atom::new(T::one() / count(g), Component::normal(mu, sigma)?)),
                other => Err(Error::FamilyMismatch {
                    expected: Family::Normal,
                    found: other.family(),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        MixingMeasure::normalized(atoms)?
    } else {
        prior.sample_measure(rng)
    };
    Ok(GibbsState {
        z: Vec::new(),
        measure,
        iteration: 0,
    })
}

/// Runs `burn_in + n_samples * thin` sweeps and keeps every `thin`-th
/// state after burn-in.
pub fn run_gibbs<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    prior: &ConjugatePrior<T>,
    config: GibbsConfig,
) -> Result<PosteriorSample<T>> {
    let ys = reals(data)?;
    prior.validate()?;
    if g == 0 || prior.num_components() != g {
        return Err(Error::domain(format!(
            "G = {g} does not match a prior for {} components",
            prior.num_components()
        )));
    }
    if config.n_samples == 0 || config.thin == 0 {
        return Err(Error::domain("n_samples and thin must be at least 1"));
    }
    let mut rng = rng_from_seed(config.seed);
    let mut state = initial_state(data, ys, g, prior, &mut rng)?;
    for _ in 0..config.burn_in {
        state = sweep_with(&state, data, prior, &mut rng)?;
    }
    let mut snapshots = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        for _ in 0..config.thin {
            state = sweep_with(&state, data, prior, &mut rng)?;
        }
        snapshots.push(state.clone());
    }
    Ok(PosteriorSample {
        snapshots,
        seed: config.seed,
        config,
    })
}
