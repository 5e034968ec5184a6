use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Obs;
use crate::scalar::{lit, ln_factorial, normal_ln_pdf, Scalar};

/// Parametric family shared by every atom of a mixing measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    BivariateNormal,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::BivariateNormal => "bivariate_normal",
            Family::Poisson => "poisson",
        }
    }
}

/// One parametric component density `f(.|theta)`.
///
/// Construct through [`Component::normal`], [`Component::bivariate_normal`]
/// or [`Component::poisson`], which enforce the parameter constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Component<T> {
    Normal { mu: T, sigma: T },
    BivariateNormal { mean: [T; 2], cov: [[T; 2]; 2] },
    Poisson { lambda: T },
}

impl<T: Scalar> Component<T> {
    pub fn normal(mu: T, sigma: T) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("normal mean must be finite, got {mu}")));
        }
        if !(sigma.is_finite() && sigma > T::zero()) {
            return Err(Error::domain(format!("normal sigma must be finite and > 0, got {sigma}")));
        }
        Ok(Component::Normal { mu, sigma })
    }

    pub fn bivariate_normal(mean: [T; 2], cov: [[T; 2]; 2]) -> Result<Self> {
        if !mean.iter().all(|m| m.is_finite()) {
            return Err(Error::domain("bivariate mean must be finite"));
        }
        let [[a, b], [c, d]] = cov;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("covariance entries must be finite"));
        }
        let scale = a.abs().max(d.abs()).max(T::one());
        if (b - c).abs() > lit::<T>(1e-12) * scale {
            return Err(Error::domain("covariance matrix must be symmetric"));
        }
        let off = (b + c) / lit(2.0);
        if !(a > T::zero() && d > T::zero() && a * d - off * off > T::zero()) {
            return Err(Error::domain("covariance matrix must be positive definite"));
        }
        Ok(Component::BivariateNormal {
            mean,
            cov: [[a, off], [off, d]],
        })
    }

    pub fn poisson(lambda: T) -> Result<Self> {
        if !(lambda.is_finite() && lambda > T::zero()) {
            return Err(Error::domain(format!("poisson rate must be finite and > 0, got {lambda}")));
        }
        Ok(Component::Poisson { lambda })
    }

    pub fn family(&self) -> Family {
        match self {
            Component::Normal { .. } => Family::Normal,
            Component::BivariateNormal { .. } => Family::BivariateNormal,
            Component::Poisson { .. } => Family::Poisson,
        }
    }

    /// Flat parameter vector, in canonical comparison order.
    pub fn params(&self) -> Vec<T> {
        match *self {
            Component::Normal { mu, sigma } => vec![mu, sigma],
            Component::BivariateNormal { mean, cov } => {
                vec![mean[0], mean[1], cov[0][0], cov[0][1], cov[1][1]]
            }
            Component::Poisson { lambda } => vec![lambda],
        }
    }

    /// Variance of the component (trace of the covariance for the bivariate case).
    pub fn variance(&self) -> T {
        match *self {
            Component::Normal { sigma, .. } => sigma * sigma,
            Component::BivariateNormal { cov, .. } => cov[0][0] + cov[1][1],
            Component::Poisson { lambda } => lambda,
        }
    }

    /// Total order on parameters within one family.
    ///
    /// Normals order by mean then sigma, bivariate Normals by mean vector
    /// then covariance entries, Poissons by rate.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        match self.family().cmp_key().cmp(&other.family().cmp_key()) {
            Ordering::Equal => {}
            o => return o,
        }
        for (a, b) in self.params().iter().zip(other.params().iter()) {
            match a.partial_cmp(b).unwrap_or(Ordering::Equal) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Largest absolute parameter difference; infinite across families.
    pub fn param_distance(&self, other: &Self) -> T {
        if self.family() != other.family() {
            return T::infinity();
        }
        self.params()
            .iter()
            .zip(other.params().iter())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    /// Whether `y` lies in the support of this family.
    pub fn check_support(&self, y: Obs<T>) -> Result<()> {
        self.ln_density(y).map(|_| ())
    }

    /// `ln f(y|theta)`.
    pub fn ln_density(&self, y: Obs<T>) -> Result<T> {
        match (*self, y) {
            (Component::Normal { mu, sigma }, Obs::Real(x)) => {
                if !x.is_finite() {
                    return Err(Error::domain(format!("observation {x} is not finite")));
                }
                Ok(normal_ln_pdf(x, mu, sigma))
            }
            (Component::BivariateNormal { mean, cov }, Obs::Pair([x1, x2])) => {
                if !(x1.is_finite() && x2.is_finite()) {
                    return Err(Error::domain("bivariate observation is not finite"));
                }
                Ok(bivariate_ln_pdf([x1, x2], mean, cov))
            }
            (Component::Poisson { lambda }, obs) => {
                let k = obs.as_count().ok_or_else(|| {
                    Error::domain(format!("{obs:?} is outside the Poisson support"))
                })?;
                let kf: T = lit(k as f64);
                Ok(kf * lambda.ln() - lambda - ln_factorial::<T>(k))
            }
            (c, obs) => Err(Error::FamilyMismatch {
                expected: c.family(),
                found: obs.family(),
            }),
        }
    }

    pub fn density(&self, y: Obs<T>) -> Result<T> {
        Ok(self.ln_density(y)?.exp())
    }

    /// Draws one observation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Obs<T> {
        match *self {
            Component::Normal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                Obs::Real(mu + sigma * lit(z))
            }
            Component::BivariateNormal { mean, cov } => {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                let (z1, z2) = (lit::<T>(z1), lit::<T>(z2));
                let l11 = cov[0][0].sqrt();
                let l21 = cov[0][1] / l11;
                let l22 = (cov[1][1] - l21 * l21).sqrt();
                Obs::Pair([mean[0] + l11 * z1, mean[1] + l21 * z1 + l22 * z2])
            }
            Component::Poisson { lambda } => {
                let d = Poisson::new(lambda.to_f64_lossless()).expect("validated rate");
                let k: f64 = d.sample(rng);
                Obs::Count(k as u64)
            }
        }
    }
}

impl Family {
    fn cmp_key(self) -> u8 {
        match self {
            Family::Normal => 0,
            Family::BivariateNormal => 1,
            Family::Poisson => 2,
        }
    }
}

/// Bivariate Normal log-density via the explicit 2x2 inverse.
pub(crate) fn bivariate_ln_pdf<T: Scalar>(y: [T; 2], mean: [T; 2], cov: [[T; 2]; 2]) -> T {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[0][1];
    let dx = y[0] - mean[0];
    let dy = y[1] - mean[1];
    let quad = (cov[1][1] * dx * dx - lit::<T>(2.0) * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    let half = lit::<T>(0.5);
    -T::TAU().ln() - half * det.ln() - half * quad
}
