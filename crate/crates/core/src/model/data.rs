use crate::model::Family;

/// A single observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obs<T> {
    Real(T),
    Pair([T; 2]),
    Count(u64),
}

impl<T: crate::Scalar> Obs<T> {
    /// The family whose support this observation's shape belongs to.
    pub fn family(&self) -> Family {
        match self {
            Obs::Real(_) => Family::Normal,
            Obs::Pair(_) => Family::BivariateNormal,
            Obs::Count(_) => Family::Poisson,
        }
    }

    /// Interprets the observation as a count. Integral, non-negative reals
    /// are accepted.
    pub fn as_count(&self) -> Option<u64> {
        match *self {
            Obs::Count(k) => Some(k),
            Obs::Real(x) if x >= T::zero() && x.fract() == T::zero() && x.is_finite() => {
                x.to_u64()
            }
            _ => None,
        }
    }
}

/// A homogeneous sample `y_1, ..., y_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset<T> {
    Real(Vec<T>),
    Pair(Vec<[T; 2]>),
    Count(Vec<u64>),
}

impl<T: crate::Scalar> Dataset<T> {
    pub fn empty(family: Family) -> Self {
        match family {
            Family::Normal => Dataset::Real(Vec::new()),
            Family::BivariateNormal => Dataset::Pair(Vec::new()),
            Family::Poisson => Dataset::Count(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Real(v) => v.len(),
            Dataset::Pair(v) => v.len(),
            Dataset::Count(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Family matching the shape of the stored observations.
    pub fn family(&self) -> Family {
        match self {
            Dataset::Real(_) => Family::Normal,
            Dataset::Pair(_) => Family::BivariateNormal,
            Dataset::Count(_) => Family::Poisson,
        }
    }

    pub fn get(&self, i: usize) -> Obs<T> {
        match self {
            Dataset::Real(v) => Obs::Real(v[i]),
            Dataset::Pair(v) => Obs::Pair(v[i]),
            Dataset::Count(v) => Obs::Count(v[i]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Obs<T>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub(crate) fn push(&mut self, y: Obs<T>) {
        match (self, y) {
            (Dataset::Real(v), Obs::Real(x)) => v.push(x),
            (Dataset::Pair(v), Obs::Pair(x)) => v.push(x),
            (Dataset::Count(v), Obs::Count(x)) => v.push(x),
            (d, y) => panic!("pushing {y:?} into {:?} dataset", d.family()),
        }
    }

    /// Observations as reals; counts are widened, pairs are rejected.
    pub fn as_reals(&self) -> Option<Vec<T>> {
        match self {
            Dataset::Real(v) => Some(v.clone()),
            Dataset::Count(v) => Some(v.iter().map(|&k| crate::scalar::lit(k as f64)).collect()),
            Dataset::Pair(_) => None,
        }
    }
}
