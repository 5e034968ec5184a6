//! Counting the modes of univariate Normal mixtures.
//!
//! The derivative `f'(y) = sum_g eta_g phi(y|mu_g, sigma_g) (mu_g - y) / sigma_g^2`
//! is evaluated on a uniform grid. Every `+ -> -` sign change brackets a
//! strict local maximum, which is then refined by bisection.

use crate::error::{Error, Result};
use crate::model::{Component, MixtureModel, Obs};
use crate::scalar::{lit, normal_ln_pdf, CompensatedSum, Scalar};

/// Location tolerance of the bisection refinement.
pub const MODE_TOLERANCE: f64 = 1e-10;
/// Smallest accepted grid.
pub const MIN_GRID_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeReport<T> {
    pub locations: Vec<T>,
}

impl<T> ModeReport<T> {
    pub fn count(&self) -> usize {
        self.locations.len()
    }
}

fn normal_atoms<T: Scalar>(model: &MixtureModel<T>) -> Result<Vec<(T, T, T)>> {
    model
        .measure()
        .atoms()
        .iter()
        .map(|a| match a.component {
            Component::Normal { mu, sigma } => Ok((a.weight, mu, sigma)),
            other => Err(Error::FamilyMismatch {
                expected: crate::model::Family::Normal,
                found: other.family(),
            }),
        })
        .collect()
}

fn derivative<T: Scalar>(atoms: &[(T, T, T)], y: T) -> T {
    let mut acc = CompensatedSum::new();
    for &(w, mu, sigma) in atoms {
        acc.add(w * normal_ln_pdf(y, mu, sigma).exp() * (mu - y) / (sigma * sigma));
    }
    acc.total()
}

/// `[min(mu_g - k sigma_max), max(mu_g + k sigma_max)]`.
pub fn covering_interval<T: Scalar>(model: &MixtureModel<T>, pad_sigmas: T) -> Result<(T, T)> {
    let atoms = normal_atoms(model)?;
    let smax = atoms.iter().map(|a| a.2).fold(T::zero(), T::max);
    let lo = atoms.iter().map(|a| a.1).fold(T::infinity(), T::min) - pad_sigmas * smax;
    let hi = atoms.iter().map(|a| a.1).fold(T::neg_infinity(), T::max) + pad_sigmas * smax;
    Ok((lo, hi))
}

/// Strict local maxima of a univariate Normal mixture density on `[lo, hi]`.
///
/// The interval must hold essentially all of the mass: if the density at
/// either endpoint exceeds `1e-12` times the largest grid value the call
/// fails with [`Error::IntervalTooSmall`].
pub fn count_modes<T: Scalar>(
    model: &MixtureModel<T>,
    lo: T,
    hi: T,
    grid_points: usize,
) -> Result<ModeReport<T>> {
    let atoms = normal_atoms(model)?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::domain(format!("search interval [{lo}, {hi}] is empty")));
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::domain(format!(
            "grid_points must be at least {MIN_GRID_POINTS}, got {grid_points}"
        )));
    }
    let step = (hi - lo) / lit(grid_points as f64);
    let grid: Vec<T> = (0..=grid_points)
        .map(|k| if k == grid_points { hi } else { lo + step * lit(k as f64) })
        .collect();

    let dens: Vec<T> = grid
        .iter()
        .map(|&y| model.density(Obs::Real(y)))
        .collect::<Result<_>>()?;
    let peak = dens.iter().copied().fold(T::zero(), T::max);
    let cutoff = lit::<T>(1e-12) * peak;
    if dens[0] > cutoff || dens[grid_points] > cutoff {
        return Err(Error::IntervalTooSmall(format!(
            "density at endpoints ({}, {}) exceeds 1e-12 of the maximum {peak}",
            dens[0], dens[grid_points]
        )));
    }

    let tol: T = lit(MODE_TOLERANCE);
    let mut locations = Vec::new();
    // Last grid point where the derivative was strictly positive, reset
    // whenever it turns strictly negative.
    let mut rising: Option<T> = None;
    for &y in &grid {
        let d = derivative(&atoms, y);
        if d > T::zero() {
            rising = Some(y);
        } else if d < T::zero() {
            if let Some(a) = rising.take() {
                locations.push(bisect(&atoms, a, y, tol));
            }
        }
    }
    Ok(ModeReport { locations })
}

/// Root of the derivative in `[a, b]` with `f'(a) > 0 > f'(b)`.
fn bisect<T: Scalar>(atoms: &[(T, T, T)], mut a: T, mut b: T, tol: T) -> T {
    let half = lit::<T>(0.5);
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mid = a + (b - a) * half;
        if mid <= a || mid >= b {
            break;
        }
        let d = derivative(atoms, mid);
        if d > T::zero() {
            a = mid;
        } else if d < T::zero() {
            b = mid;
        } else {
            return mid;
        }
    }
    a + (b - a) * half
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MixingMeasure;

    fn normal_mixture(parts: &[(f64, f64, f64)]) -> MixtureModel<f64> {
        let w: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let c: Vec<Component<f64>> = parts
            .iter()
            .map(|p| Component::normal(p.1, p.2).unwrap())
            .collect();
        MixtureModel::new(MixingMeasure::from_parts(&w, &c).unwrap())
    }

    #[test]
    fn single_normal_has_one_mode_at_its_mean() {
        let m = normal_mixture(&[(1.0, 0.0, 1.0)]);
        let r = count_modes(&m, -8.0, 8.0, 1000).unwrap();
        assert_eq!(r.count(), 1);
        assert!(r.locations[0].abs() < 1e-10);
    }

    #[test]
    fn three_component_unimodal_example() {
        let m = normal_mixture(&[(0.3, 2.0, 1.0), (0.5, 3.0, 0.5), (0.2, 3.4, 1.3)]);
        let (lo, hi) = covering_interval(&m, 8.0).unwrap();
        assert_eq!(count_modes(&m, lo, hi, 10_000).unwrap().count(), 1);
    }

    #[test]
    fn five_components_three_modes() {
        let m = normal_mixture(&[
            (0.1, 0.0, 0.6),
            (0.2, 1.5, 0.6),
            (0.3, 3.0, 0.6),
            (0.3, 4.5, 0.6),
            (0.1, 6.0, 0.6),
        ]);
        let (lo, hi) = covering_interval(&m, 8.0).unwrap();
        assert_eq!(count_modes(&m, lo, hi, 10_000).unwrap().count(), 3);
    }

    #[test]
    fn well_separated_components_each_give_a_mode() {
        let m = normal_mixture(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]);
        let r = count_modes(&m, -15.0, 15.0, 2000).unwrap();
        assert_eq!(r.count(), 2);
        assert!((r.locations[0] + 5.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_interval_is_rejected() {
        let m = normal_mixture(&[(1.0, 0.0, 1.0)]);
        assert!(matches!(count_modes(&m, -1.0, 8.0, 1000), Err(Error::IntervalTooSmall(_))));
        assert!(matches!(count_modes(&m, -8.0, 8.0, 10), Err(Error::Domain(_))));
        assert!(matches!(count_modes(&m, 8.0, -8.0, 1000), Err(Error::Domain(_))));
    }
}
