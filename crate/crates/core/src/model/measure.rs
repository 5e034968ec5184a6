use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{Component, Family};
use crate::scalar::{lit, stable_sum, Scalar};

/// Weights below this are dropped by [`MixingMeasure::canonicalize`].
pub const WEIGHT_EPSILON: f64 = 1e-12;
/// Atoms whose parameters differ by at most this (absolute, per
/// coordinate) are merged by [`MixingMeasure::canonicalize`].
pub const PARAMETER_EPSILON: f64 = 1e-9;

/// A weighted atom `(eta_g, theta_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub weight: T,
    pub component: Component<T>,
}

impl<T: Scalar> Atom<T> {
    pub fn new(weight: T, component: Component<T>) -> Self {
        Self { weight, component }
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.component
            .canonical_cmp(&other.component)
            .then_with(|| self.weight.partial_cmp(&other.weight).unwrap_or(Ordering::Equal))
    }
}

/// Discrete mixing measure `H = sum_g eta_g delta_{theta_g}`.
///
/// Atoms share one family, weights are non-negative and sum to one. The
/// stored order is the summation order used for densities; it carries no
/// meaning beyond that.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMeasure<T> {
    atoms: Vec<Atom<T>>,
}

impl<T: Scalar> MixingMeasure<T> {
    pub fn new(atoms: Vec<Atom<T>>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidMeasure("a mixing measure needs at least one atom".into()))?;
        let family = first.component.family();
        for (g, a) in atoms.iter().enumerate() {
            if a.component.family() != family {
                return Err(Error::FamilyMismatch {
                    expected: family,
                    found: a.component.family(),
                });
            }
            if !(a.weight.is_finite() && a.weight >= T::zero()) {
                return Err(Error::InvalidMeasure(format!(
                    "weight of atom {g} must be finite and non-negative, got {}",
                    a.weight
                )));
            }
        }
        let total = stable_sum(atoms.iter().map(|a| a.weight));
        if (total - T::one()).abs() > T::simplex_tolerance() {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// Builds a measure from parallel weight and component lists.
    pub fn from_parts(weights: &[T], components: &[Component<T>]) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::domain(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        Self::new(
            weights
                .iter()
                .zip(components)
                .map(|(&w, &c)| Atom::new(w, c))
                .collect(),
        )
    }

    /// Like [`MixingMeasure::new`] but rescales positive weights to sum to one.
    pub fn normalized(mut atoms: Vec<Atom<T>>) -> Result<Self> {
        let total = stable_sum(atoms.iter().map(|a| a.weight));
        if !(total.is_finite() && total > T::zero()) {
            return Err(Error::InvalidMeasure(format!("cannot normalize weights summing to {total}")));
        }
        for a in &mut atoms {
            a.weight = a.weight / total;
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    /// Number of atoms `G`.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn family(&self) -> Family {
        self.atoms[0].component.family()
    }

    pub fn weights(&self) -> Vec<T> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn components(&self) -> Vec<Component<T>> {
        self.atoms.iter().map(|a| a.component).collect()
    }

    /// Canonical representative of the mixing measure, using the default
    /// epsilons.
    pub fn canonicalize(&self) -> Result<Self> {
        self.canonicalize_with(lit(WEIGHT_EPSILON), lit(PARAMETER_EPSILON))
    }

    /// Drops atoms with weight below `weight_eps`, merges atoms whose
    /// parameters agree within `param_eps` (summing their weights), sorts
    /// by the canonical parameter order and renormalizes.
    pub fn canonicalize_with(&self, weight_eps: T, param_eps: T) -> Result<Self> {
        let mut kept: Vec<Atom<T>> = self
            .atoms
            .iter()
            .filter(|a| a.weight >= weight_eps)
            .copied()
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidMeasure("every atom has negligible weight".into()));
        }
        kept.sort_by(|a, b| a.canonical_cmp(b));

        // Sorted order puts coincident parameters next to each other; each
        // group is anchored at its first member so merging cannot chain.
        let mut merged: Vec<Atom<T>> = Vec::with_capacity(kept.len());
        let mut anchor: Option<Component<T>> = None;
        for a in kept {
            match (anchor, merged.last_mut()) {
                (Some(c), Some(last)) if c.param_distance(&a.component) <= param_eps => {
                    last.weight = last.weight + a.weight;
                }
                _ => {
                    anchor = Some(a.component);
                    merged.push(a);
                }
            }
        }
        merged.sort_by(|a, b| a.canonical_cmp(b));
        Self::normalized(merged)
    }

    /// Reorders atoms: atom `g` of the result is atom `perm[g]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let g = self.atoms.len();
        if perm.len() != g {
            return Err(Error::domain(format!("permutation of length {} for {g} atoms", perm.len())));
        }
        let mut seen = vec![false; g];
        for &p in perm {
            if p >= g || seen[p] {
                return Err(Error::domain(format!("{perm:?} is not a permutation of 0..{g}")));
            }
            seen[p] = true;
        }
        Ok(Self {
            atoms: perm.iter().map(|&p| self.atoms[p]).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(mu: f64, sigma: f64) -> Component<f64> {
        Component::normal(mu, sigma).unwrap()
    }

    fn fig1() -> MixingMeasure<f64> {
        MixingMeasure::from_parts(&[0.3, 0.5, 0.2], &[n(2.0, 1.0), n(3.0, 0.5), n(3.4, 1.3)]).unwrap()
    }

    #[test]
    fn rejects_bad_weights_and_mixed_families() {
        assert!(MixingMeasure::<f64>::new(vec![]).is_err());
        assert!(MixingMeasure::from_parts(&[0.5, 0.6], &[n(0.0, 1.0), n(1.0, 1.0)]).is_err());
        assert!(MixingMeasure::from_parts(&[1.5, -0.5], &[n(0.0, 1.0), n(1.0, 1.0)]).is_err());
        let mixed = MixingMeasure::from_parts(
            &[0.5, 0.5],
            &[n(0.0, 1.0), Component::poisson(1.0).unwrap()],
        );
        assert!(matches!(mixed, Err(Error::FamilyMismatch { .. })));
    }

    #[test]
    fn duplicates_merge() {
        let m = MixingMeasure::from_parts(&[0.5, 0.5], &[n(1.0, 2.0), n(1.0, 2.0)]).unwrap();
        let c = m.canonicalize().unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.atoms()[0].weight, 1.0);
    }

    #[test]
    fn zero_weight_atoms_drop() {
        let m = MixingMeasure::from_parts(&[1.0, 0.0], &[n(1.0, 2.0), n(5.0, 1.0)]).unwrap();
        let c = m.canonicalize().unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.atoms()[0].component, n(1.0, 2.0));
    }

    #[test]
    fn all_zero_weights_are_invalid() {
        let m = MixingMeasure {
            atoms: vec![Atom::new(0.0, n(0.0, 1.0))],
        };
        assert!(matches!(m.canonicalize(), Err(Error::InvalidMeasure(_))));
    }

    #[test]
    fn every_permutation_canonicalizes_identically() {
        let base = fig1();
        let target = base.canonicalize().unwrap();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            assert_eq!(base.permute(&p).unwrap().canonicalize().unwrap(), target);
        }
        let means: Vec<f64> = target
            .components()
            .iter()
            .map(|c| match c {
                Component::Normal { mu, .. } => *mu,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(means, vec![2.0, 3.0, 3.4]);
    }

    #[test]
    fn permute_validates_bijection() {
        let m = fig1();
        assert_eq!(m.permute(&[0, 1, 2]).unwrap(), m);
        assert!(m.permute(&[0, 0, 1]).is_err());
        assert!(m.permute(&[0, 1]).is_err());
        assert!(m.permute(&[0, 1, 3]).is_err());
        let r = m.permute(&[2, 1, 0]).unwrap();
        assert_eq!(r.atoms()[0], m.atoms()[2]);
    }

    #[test]
    fn near_coincident_parameters_merge() {
        let m = MixingMeasure::from_parts(
            &[0.25, 0.25, 0.5],
            &[n(1.0, 1.0), n(1.0 + 1e-11, 1.0), n(2.0, 1.0)],
        )
        .unwrap();
        let c = m.canonicalize().unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.weights(), vec![0.5, 0.5]);
    }
}
