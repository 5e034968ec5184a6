//! Maximum-likelihood fitting by EM, with soft and hard-classification
//! variants.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Atom, Component, Dataset, Family, MixingMeasure, MixtureModel, Obs};
use crate::rng::{rng_stream, FinmixRng};
use crate::scalar::{count, lit, stable_sum, Scalar};

/// Components whose total responsibility falls below this are empty.
pub const EMPTY_COMPONENT_MASS: f64 = 1e-300;
/// Lower bound on fitted Poisson rates.
pub const POISSON_RATE_FLOOR: f64 = 1e-8;

/// Row-stochastic `n x G` matrix of allocation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities<T> {
    n: usize,
    g: usize,
    values: Vec<T>,
}

impl<T: Scalar> Responsibilities<T> {
    /// Validates that every row is a probability vector.
    pub fn from_rows(rows: Vec<Vec<T>>, g: usize) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * g);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != g {
                return Err(Error::domain(format!("row {i} has {} entries, expected {g}", row.len())));
            }
            if row.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
                return Err(Error::domain(format!("row {i} has entries outside [0, 1]")));
            }
            let s = stable_sum(row.iter().copied());
            if (s - T::one()).abs() > T::simplex_tolerance() {
                return Err(Error::domain(format!("row {i} sums to {s}")));
            }
            values.extend(row);
        }
        Ok(Self { n, g, values })
    }

    /// One-hot rows from 0-based allocations.
    pub fn one_hot(z: &[usize], g: usize) -> Result<Self> {
        let mut values = vec![T::zero(); z.len() * g];
        for (i, &zi) in z.iter().enumerate() {
            if zi >= g {
                return Err(Error::domain(format!("allocation {zi} of observation {i} out of range")));
            }
            values[i * g + zi] = T::one();
        }
        Ok(Self { n: z.len(), g, values })
    }

    pub fn num_observations(&self) -> usize {
        self.n
    }

    pub fn num_components(&self) -> usize {
        self.g
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.g..(i + 1) * self.g]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.g.max(1))
    }

    /// Per-row argmax with ties going to the lowest index.
    pub fn argmax(&self) -> Vec<usize> {
        self.rows().map(argmax_lowest).collect()
    }
}

fn argmax_lowest<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (g, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = g;
        }
    }
    best
}

/// How the first model of each EM run is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<T> {
    /// Random row-stochastic responsibilities followed by an M-step.
    RandomResponsibilities,
    /// `G` distinct data points as locations, chosen with squared-distance
    /// weighting, pooled spread, equal weights.
    KPointSeeding,
    UserSupplied(MixingMeasure<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig<T> {
    pub max_iter: usize,
    /// Stop when `|l_k - l_{k-1}| / (1 + |l_k|) < tol`.
    pub tol: T,
    pub init: Init<T>,
    /// `None` means `1e-6` times the overall sample variance.
    pub variance_floor: Option<T>,
    /// Extra seeded initialisations beyond the first. When positive, empty
    /// components are re-seeded instead of aborting the run.
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for EmConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            tol: lit(1e-8),
            init: Init::KPointSeeding,
            variance_floor: None,
            restarts: 0,
            seed: 0,
        }
    }
}

impl<T: Scalar> EmConfig<T> {
    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= T::zero() {
            return Err(Error::domain("tol must be > 0"));
        }
        if let Some(f) = self.variance_floor {
            if !(f > T::zero() && f.is_finite()) {
                return Err(Error::domain("variance_floor must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// The floor this config implies for `data`.
    pub fn resolved_variance_floor(&self, data: &Dataset<T>) -> T {
        self.variance_floor.unwrap_or_else(|| default_variance_floor(data))
    }
}

/// Result of an EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct EmState<T> {
    pub model: MixtureModel<T>,
    pub responsibilities: Responsibilities<T>,
    /// Log-likelihood before the first M-step and after every iteration.
    /// For hard EM this is the classification log-likelihood
    /// `sum_i ln f(y_i | theta_{z_i})`.
    pub loglik_trace: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Which initialisation produced this state.
    pub restart: usize,
    pub seed: u64,
}

impl<T: Scalar> EmState<T> {
    pub fn final_log_likelihood(&self) -> T {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Sample mean and (divisor `n`) variance of the reals in `data`, or the
/// mean of the two marginal variances for paired data.
fn overall_moments<T: Scalar>(data: &Dataset<T>) -> (Vec<T>, T) {
    let n: T = count(data.len().max(1));
    match data {
        Dataset::Pair(v) => {
            let m0 = stable_sum(v.iter().map(|p| p[0])) / n;
            let m1 = stable_sum(v.iter().map(|p| p[1])) / n;
            let v0 = stable_sum(v.iter().map(|p| (p[0] - m0) * (p[0] - m0))) / n;
            let v1 = stable_sum(v.iter().map(|p| (p[1] - m1) * (p[1] - m1))) / n;
            (vec![m0, m1], (v0 + v1) / lit(2.0))
        }
        _ => {
            let xs = data.as_reals().unwrap_or_default();
            let m = stable_sum(xs.iter().copied()) / n;
            let v = stable_sum(xs.iter().map(|&x| (x - m) * (x - m))) / n;
            (vec![m], v)
        }
    }
}

/// `1e-6` times the overall sample variance, never below `1e-12`.
pub fn default_variance_floor<T: Scalar>(data: &Dataset<T>) -> T {
    let (_, var) = overall_moments(data);
    (lit::<T>(1e-6) * var).max(lit(1e-12))
}

fn check_compatible<T: Scalar>(data: &Dataset<T>, family: Family) -> Result<()> {
    match (family, data) {
        (Family::Normal, Dataset::Real(_)) | (Family::BivariateNormal, Dataset::Pair(_)) => Ok(()),
        (Family::Poisson, Dataset::Count(_)) => Ok(()),
        (Family::Poisson, Dataset::Real(v)) => {
            for (i, &x) in v.iter().enumerate() {
                if Obs::Real(x).as_count().is_none() {
                    return Err(Error::domain(format!("observation {i} ({x}) is not a count")));
                }
            }
            Ok(())
        }
        (f, d) => Err(Error::FamilyMismatch {
            expected: f,
            found: d.family(),
        }),
    }
}

/// E-step: `r_ig = eta_g f(y_i|theta_g) / sum_h eta_h f(y_i|theta_h)`.
pub fn e_step<T: Scalar>(model: &MixtureModel<T>, data: &Dataset<T>) -> Result<Responsibilities<T>> {
    e_step_with_loglik(model, data).map(|(r, _)| r)
}

/// E-step that also returns the log-likelihood of `model`.
pub(crate) fn e_step_with_loglik<T: Scalar>(
    model: &MixtureModel<T>,
    data: &Dataset<T>,
) -> Result<(Responsibilities<T>, T)> {
    let g = model.num_components();
    let mut values = Vec::with_capacity(data.len() * g);
    let mut ll = crate::scalar::CompensatedSum::new();
    for (i, y) in data.iter().enumerate() {
        let (row, norm) = model.allocation_row(y, i)?;
        ll.add(norm);
        values.extend(row);
    }
    Ok((
        Responsibilities {
            n: data.len(),
            g,
            values,
        },
        ll.total(),
    ))
}

/// M-step maximising `sum_i sum_g r_ig ln(eta_g f(y_i|theta_g))`.
///
/// Normal variances are floored at the config's variance floor, bivariate
/// covariance eigenvalues likewise, Poisson rates at `1e-8`. A component
/// with total responsibility below `1e-300` is an [`Error::EmptyComponent`].
pub fn m_step<T: Scalar>(
    data: &Dataset<T>,
    r: &Responsibilities<T>,
    family: Family,
    config: &EmConfig<T>,
) -> Result<MixingMeasure<T>> {
    config.validate()?;
    check_compatible(data, family)?;
    m_step_inner::<T, FinmixRng>(data, r, family, config.resolved_variance_floor(data), None)
}

fn m_step_inner<T: Scalar, R: Rng>(
    data: &Dataset<T>,
    r: &Responsibilities<T>,
    family: Family,
    floor: T,
    mut reseed: Option<&mut R>,
) -> Result<MixingMeasure<T>> {
    if r.n != data.len() {
        return Err(Error::domain(format!(
            "{} responsibility rows for {} observations",
            r.n,
            data.len()
        )));
    }
    let n = data.len();
    let mut atoms = Vec::with_capacity(r.g);
    for g in 0..r.g {
        let col = || (0..n).map(move |i| r.values[i * r.g + g]);
        let mass = stable_sum(col());
        if mass.is_nan() || mass < lit(EMPTY_COMPONENT_MASS) {
            match reseed.as_deref_mut() {
                Some(rng) if n > 0 => {
                    let i = rng.random_range(0..n);
                    let c = seed_component(data, family, data.get(i), floor)?;
                    atoms.push(Atom::new(T::one() / count(n), c));
                    continue;
                }
                _ => return Err(Error::EmptyComponent { component: g }),
            }
        }
        let component = match (family, data) {
            (Family::Normal, Dataset::Real(v)) => {
                let mu = stable_sum(col().zip(v).map(|(w, &y)| w * y)) / mass;
                let var = stable_sum(col().zip(v).map(|(w, &y)| w * (y - mu) * (y - mu))) / mass;
                Component::normal(mu, var.max(floor).sqrt())?
            }
            (Family::BivariateNormal, Dataset::Pair(v)) => {
                let m0 = stable_sum(col().zip(v).map(|(w, p)| w * p[0])) / mass;
                let m1 = stable_sum(col().zip(v).map(|(w, p)| w * p[1])) / mass;
                let c00 = stable_sum(col().zip(v).map(|(w, p)| w * (p[0] - m0) * (p[0] - m0))) / mass;
                let c01 = stable_sum(col().zip(v).map(|(w, p)| w * (p[0] - m0) * (p[1] - m1))) / mass;
                let c11 = stable_sum(col().zip(v).map(|(w, p)| w * (p[1] - m1) * (p[1] - m1))) / mass;
                Component::bivariate_normal([m0, m1], floor_covariance([[c00, c01], [c01, c11]], floor))?
            }
            (Family::Poisson, _) => {
                let ys: Vec<T> = data.as_reals().ok_or_else(|| Error::domain("paired data for a Poisson fit"))?;
                let lambda = stable_sum(col().zip(&ys).map(|(w, &y)| w * y)) / mass;
                Component::poisson(lambda.max(lit(POISSON_RATE_FLOOR)))?
            }
            (f, d) => {
                return Err(Error::FamilyMismatch {
                    expected: f,
                    found: d.family(),
                })
            }
        };
        atoms.push(Atom::new(mass / count(n.max(1)), component));
    }
    MixingMeasure::normalized(atoms)
}

/// Clamps the eigenvalues of a symmetric 2x2 matrix at `floor`.
fn floor_covariance<T: Scalar>(c: [[T; 2]; 2], floor: T) -> [[T; 2]; 2] {
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let half = lit::<T>(0.5);
    let mid = (a + d) * half;
    let rad = (((a - d) * half).powi(2) + b * b).sqrt();
    let (l1, l2) = (mid + rad, mid - rad);
    if l2 >= floor && a * d - b * b > T::zero() {
        return c;
    }
    // Unit eigenvector of l1; the l2 eigenvector is its rotation.
    let (vx, vy) = if b != T::zero() {
        let (x, y) = (l1 - d, b);
        let norm = (x * x + y * y).sqrt();
        (x / norm, y / norm)
    } else if a >= d {
        (T::one(), T::zero())
    } else {
        (T::zero(), T::one())
    };
    let (l1, l2) = (l1.max(floor), l2.max(floor));
    let off = (l1 - l2) * vx * vy;
    [[l1 * vx * vx + l2 * vy * vy, off], [off, l1 * vy * vy + l2 * vx * vx]]
}

/// Component centred at observation `y` with the pooled spread of `data`.
fn seed_component<T: Scalar>(data: &Dataset<T>, family: Family, y: Obs<T>, floor: T) -> Result<Component<T>> {
    match (family, y) {
        (Family::Normal, Obs::Real(x)) => {
            let (_, var) = overall_moments(data);
            Component::normal(x, var.max(floor).sqrt())
        }
        (Family::BivariateNormal, Obs::Pair(p)) => {
            let Dataset::Pair(v) = data else { unreachable!("checked by caller") };
            let n: T = count(v.len().max(1));
            let m0 = stable_sum(v.iter().map(|q| q[0])) / n;
            let m1 = stable_sum(v.iter().map(|q| q[1])) / n;
            let c00 = stable_sum(v.iter().map(|q| (q[0] - m0) * (q[0] - m0))) / n;
            let c01 = stable_sum(v.iter().map(|q| (q[0] - m0) * (q[1] - m1))) / n;
            let c11 = stable_sum(v.iter().map(|q| (q[1] - m1) * (q[1] - m1))) / n;
            Component::bivariate_normal(p, floor_covariance([[c00, c01], [c01, c11]], floor))
        }
        (Family::Poisson, obs) => {
            let k = obs.as_count().ok_or_else(|| Error::domain("non-count observation"))?;
            Component::poisson(lit::<T>(k as f64).max(lit(0.5)))
        }
        (f, obs) => Err(Error::FamilyMismatch {
            expected: f,
            found: obs.family(),
        }),
    }
}

fn squared_distance<T: Scalar>(a: Obs<T>, b: Obs<T>) -> f64 {
    match (a, b) {
        (Obs::Real(x), Obs::Real(y)) => (x - y).to_f64_lossless().powi(2),
        (Obs::Pair(x), Obs::Pair(y)) => {
            (x[0] - y[0]).to_f64_lossless().powi(2) + (x[1] - y[1]).to_f64_lossless().powi(2)
        }
        (Obs::Count(x), Obs::Count(y)) => (x.abs_diff(y) as f64).powi(2),
        _ => f64::INFINITY,
    }
}

/// `g` observations with pairwise distinct values where possible. The first
/// is uniform over the data; each later one is drawn with probability
/// proportional to its squared distance from the nearest point already
/// chosen, so seeds spread across separated clusters.
pub(crate) fn distinct_points<T: Scalar, R: Rng>(data: &Dataset<T>, g: usize, rng: &mut R) -> Vec<Obs<T>> {
    let n = data.len();
    let mut chosen: Vec<Obs<T>> = Vec::with_capacity(g);
    if n == 0 || g == 0 {
        return chosen;
    }
    let first = data.get(rng.random_range(0..n));
    chosen.push(first);
    let mut nearest: Vec<f64> = data.iter().map(|y| squared_distance(y, first)).collect();
    while chosen.len() < g {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            break;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if u < acc {
                    break;
                }
            }
        }
        let y = data.get(pick.expect("positive total has a positive term"));
        chosen.push(y);
        for (d, x) in nearest.iter_mut().zip(data.iter()) {
            *d = d.min(squared_distance(x, y));
        }
    }
    // Fewer than `g` distinct values: repeat in shuffled order.
    if chosen.len() < g {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(rng);
        let mut k = 0;
        while chosen.len() < g {
            chosen.push(data.get(idx[k % n]));
            k += 1;
        }
    }
    chosen
}

fn initial_model<T: Scalar, R: Rng>(
    data: &Dataset<T>,
    g: usize,
    family: Family,
    init: &Init<T>,
    floor: T,
    rng: &mut R,
) -> Result<MixtureModel<T>> {
    match init {
        Init::KPointSeeding => {
            let pts = distinct_points(data, g, rng);
            let atoms = pts
                .into_iter()
                .map(|y| Ok(Atom::new(T::one() / count(g), seed_component(data, family, y, floor)?)))
                .collect::<Result<Vec<_>>>()?;
            Ok(MixtureModel::new(MixingMeasure::normalized(atoms)?))
        }
        Init::RandomResponsibilities => {
            let rows: Vec<Vec<T>> = (0..data.len())
                .map(|_| {
                    let raw: Vec<f64> = (0..g).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|&x| lit(x / s)).collect()
                })
                .collect();
            let r = Responsibilities::from_rows(rows, g)?;
            Ok(MixtureModel::new(m_step_inner(data, &r, family, floor, Some(rng))?))
        }
        Init::UserSupplied(m) => {
            if m.family() != family {
                return Err(Error::FamilyMismatch {
                    expected: family,
                    found: m.family(),
                });
            }
            if m.len() != g {
                return Err(Error::domain(format!("initial measure has {} atoms, expected {g}", m.len())));
            }
            Ok(MixtureModel::new(m.clone()))
        }
    }
}

fn check_run_args<T: Scalar>(data: &Dataset<T>, g: usize, family: Family, config: &EmConfig<T>) -> Result<()> {
    config.validate()?;
    check_compatible(data, family)?;
    if g == 0 {
        return Err(Error::domain("G must be at least 1"));
    }
    if data.len() < g {
        return Err(Error::domain(format!("need n >= G, got n = {} and G = {g}", data.len())));
    }
    Ok(())
}

fn relative_change<T: Scalar>(cur: T, prev: T) -> T {
    (cur - prev).abs() / (T::one() + cur.abs())
}

fn soft_run<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    family: Family,
    config: &EmConfig<T>,
    floor: T,
    restart: usize,
) -> Result<EmState<T>> {
    let mut rng = rng_stream(config.seed, restart as u64);
    let mut model = initial_model(data, g, family, &config.init, floor, &mut rng).map_err(|e| e.at_iteration(0))?;
    let (mut r, ll) = e_step_with_loglik(&model, data).map_err(|e| e.at_iteration(0))?;
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let reseed = config.restarts > 0;
    for it in 1..=config.max_iter {
        let measure = if reseed {
            m_step_inner(data, &r, family, floor, Some(&mut rng))
        } else {
            m_step_inner::<T, FinmixRng>(data, &r, family, floor, None)
        }
        .map_err(|e| e.at_iteration(it))?;
        model = MixtureModel::new(measure);
        let (r_new, ll) = e_step_with_loglik(&model, data).map_err(|e| e.at_iteration(it))?;
        r = r_new;
        let prev = *trace.last().unwrap();
        trace.push(ll);
        iterations = it;
        if relative_change(ll, prev) < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmState {
        model,
        responsibilities: r,
        loglik_trace: trace,
        iterations,
        converged,
        restart,
        seed: config.seed,
    })
}

fn best_of<T: Scalar>(runs: Vec<Result<EmState<T>>>) -> Result<EmState<T>> {
    let mut best: Option<EmState<T>> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(s) => {
                let better = match &best {
                    None => true,
                    Some(b) => s.final_log_likelihood() > b.final_log_likelihood(),
                };
                if better {
                    best = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one run"))
}

/// Soft EM from `restarts + 1` seeded initialisations (run in parallel);
/// returns the run with the highest final log-likelihood, ties going to
/// the earliest restart.
pub fn run_em<T: Scalar>(data: &Dataset<T>, g: usize, family: Family, config: &EmConfig<T>) -> Result<EmState<T>> {
    check_run_args(data, g, family, config)?;
    let floor = config.resolved_variance_floor(data);
    let runs: Vec<Result<EmState<T>>> = (0..=config.restarts)
        .into_par_iter()
        .map(|k| soft_run(data, g, family, config, floor, k))
        .collect();
    best_of(runs)
}

fn classification_loglik<T: Scalar>(comps: &[Component<T>], data: &Dataset<T>, z: &[usize]) -> Result<T> {
    let mut acc = crate::scalar::CompensatedSum::new();
    for (i, y) in data.iter().enumerate() {
        acc.add(comps[z[i]].ln_density(y)?);
    }
    Ok(acc.total())
}

fn hard_run<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    family: Family,
    config: &EmConfig<T>,
    floor: T,
    restart: usize,
) -> Result<EmState<T>> {
    let mut rng = rng_stream(config.seed, restart as u64);
    let mut model = initial_model(data, g, family, &config.init, floor, &mut rng).map_err(|e| e.at_iteration(0))?;
    let mut z: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..=config.max_iter {
        let comps = model.measure().components();
        let z_new = data
            .iter()
            .map(|y| {
                let lf = comps.iter().map(|c| c.ln_density(y)).collect::<Result<Vec<T>>>()?;
                Ok(argmax_lowest(&lf))
            })
            .collect::<Result<Vec<usize>>>()
            .map_err(|e| e.at_iteration(it))?;
        trace.push(classification_loglik(&comps, data, &z_new).map_err(|e| e.at_iteration(it))?);
        if z_new == z {
            converged = true;
            break;
        }
        z = z_new;
        if it == config.max_iter {
            break;
        }
        let r = Responsibilities::one_hot(&z, g)?;
        model = MixtureModel::new(
            m_step_inner::<T, FinmixRng>(data, &r, family, floor, None).map_err(|e| e.at_iteration(it + 1))?,
        );
        iterations = it + 1;
    }
    Ok(EmState {
        model,
        responsibilities: Responsibilities::one_hot(&z, g)?,
        loglik_trace: trace,
        iterations,
        converged,
        restart,
        seed: config.seed,
    })
}

/// Hard-classification EM: each observation goes to the component
/// maximising `f(y_i|theta_g)` (ties to the lowest index), followed by
/// groupwise maximum likelihood. Stops when the allocation repeats.
pub fn run_hard_em<T: Scalar>(
    data: &Dataset<T>,
    g: usize,
    family: Family,
    config: &EmConfig<T>,
) -> Result<EmState<T>> {
    check_run_args(data, g, family, config)?;
    let floor = config.resolved_variance_floor(data);
    let runs: Vec<Result<EmState<T>>> = (0..=config.restarts)
        .into_par_iter()
        .map(|k| hard_run(data, g, family, config, floor, k))
        .collect();
    best_of(runs)
}
