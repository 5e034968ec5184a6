//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model arithmetic is written against [`Scalar`], which is implemented
//! for `f32` and `f64`. Random variates are always drawn in `f64` and then
//! converted, so a given seed produces the same stream for both widths.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::sync::OnceLock;

use num_traits::{Float, FloatConst, FromPrimitive, NumCast, ToPrimitive};

/// Floating-point type usable as the scalar of a mixture model.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Natural log of the gamma function for `self > 0`.
    fn ln_gamma(self) -> Self;

    /// Tolerance used when validating that probability vectors sum to one.
    fn simplex_tolerance() -> Self;

    /// Widen to `f64`.
    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }
}

/// `ln((k - 1)!)` for `k = 1..=171` from the rounded factorial, which is
/// more accurate than the Lanczos series at small integers (and exact at 1, 2).
fn ln_gamma_integer(k: f64) -> Option<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if k.fract() != 0.0 || !(1.0..=171.0).contains(&k) {
        return None;
    }
    let table = TABLE.get_or_init(|| {
        let mut f = 1.0f64;
        let mut out = vec![0.0];
        for j in 1..171 {
            f *= j as f64;
            out.push(f.ln());
        }
        out
    });
    Some(table[k as usize - 1])
}

impl Scalar for f64 {
    fn ln_gamma(self) -> Self {
        ln_gamma_integer(self).unwrap_or_else(|| statrs::function::gamma::ln_gamma(self))
    }

    fn simplex_tolerance() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn ln_gamma(self) -> Self {
        <f64 as Scalar>::ln_gamma(self as f64) as f32
    }

    fn simplex_tolerance() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// `ln(sum(exp(xs)))` without overflow; `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if !m.is_finite() {
        return m;
    }
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add((x - m).exp());
    }
    m + acc.total().ln()
}

/// `ln(k!)`.
#[inline]
pub fn ln_factorial<T: Scalar>(k: u64) -> T {
    (lit::<T>(k as f64) + T::one()).ln_gamma()
}

/// `ln(a (a+1) ... (a+k-1)) = lnGamma(a+k) - lnGamma(a)`, summed term by
/// term for short products to avoid cancellation between two large values.
pub fn ln_rising<T: Scalar>(a: T, k: u64) -> T {
    if k <= 64 {
        (0..k).map(|j| (a + lit(j as f64)).ln()).collect::<CompensatedSum<T>>().total()
    } else {
        (a + lit(k as f64)).ln_gamma() - a.ln_gamma()
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    compensation: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            compensation: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation = self.compensation + ((self.sum - t) + x);
        } else {
            self.compensation = self.compensation + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn total(&self) -> T {
        self.sum + self.compensation
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn stable_sum<T: Scalar, I: IntoIterator<Item = T>>(xs: I) -> T {
    xs.into_iter().collect::<CompensatedSum<T>>().total()
}

/// Log-density of `N(mu, sigma^2)` at `y`.
#[inline]
pub fn normal_ln_pdf<T: Scalar>(y: T, mu: T, sigma: T) -> T {
    let z = (y - mu) / sigma;
    let half = lit::<T>(0.5);
    -half * z * z - sigma.ln() - half * (T::TAU()).ln()
}
