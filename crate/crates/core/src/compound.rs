//! Compound (continuous-mixture) distributions with closed-form pmfs:
//! Beta-mixed binomial, Dirichlet-mixed multinomial and Gamma-mixed Poisson.
//!
//! For small supports the pmfs are evaluated as exact-integer coefficients
//! times rising factorials, which keeps identities such as the discrete
//! uniform `BetaBinomial(n, 1, 1)` and the geometric `NegativeBinomial(1, 1)`
//! exact to the last bit. Everything else goes through log-gamma
//! differences, so no factorial overflows for counts up to `1e6`.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::scalar::{lit, ln_factorial, ln_rising, Scalar};

/// Largest total count evaluated by the product route.
const PRODUCT_ROUTE_MAX: u64 = 170;
/// Largest count for which the negative-binomial coefficient is built as a
/// product of term ratios.
const RATIO_ROUTE_MAX: u64 = 1000;

fn positive<T: Scalar>(x: T) -> bool {
    x.is_finite() && x > T::zero()
}

/// `a (a+1) ... (a+k-1)`.
fn rising<T: Scalar>(a: T, k: u64) -> T {
    (0..k).fold(T::one(), |acc, j| acc * (a + lit(j as f64)))
}

fn binomial_u128(m: u64, k: u64) -> Option<u128> {
    let k = k.min(m - k);
    let mut c: u128 = 1;
    for j in 1..=k as u128 {
        c = c.checked_mul(m as u128 - k as u128 + j)? / j;
    }
    Some(c)
}

/// `n! / prod_k c_k!` as an exact integer, if it fits.
fn multinomial_u128(counts: &[u64]) -> Option<u128> {
    let mut partial = 0u64;
    let mut coef: u128 = 1;
    for &c in counts {
        partial += c;
        coef = coef.checked_mul(binomial_u128(partial, c)?)?;
    }
    Some(coef)
}

fn dm_ln_pmf<T: Scalar>(alpha: &[T], counts: &[u64]) -> T {
    let n: u64 = counts.iter().sum();
    let a: T = alpha.iter().copied().fold(T::zero(), |s, x| s + x);
    let mut acc = ln_factorial::<T>(n) - ln_rising(a, n);
    for (&ak, &ck) in alpha.iter().zip(counts) {
        acc = acc - ln_factorial::<T>(ck) + ln_rising(ak, ck);
    }
    acc
}

/// Shared Dirichlet-multinomial kernel; the beta-binomial is its `K = 2` case.
fn dm_pmf<T: Scalar>(alpha: &[T], counts: &[u64]) -> T {
    let n: u64 = counts.iter().sum();
    if n <= PRODUCT_ROUTE_MAX {
        if let Some(coef) = multinomial_u128(counts) {
            let a: T = alpha.iter().copied().fold(T::zero(), |s, x| s + x);
            let mut num = T::from_u128(coef).unwrap_or_else(T::infinity);
            for (&ak, &ck) in alpha.iter().zip(counts) {
                num = num * rising(ak, ck);
            }
            let den = rising(a, n);
            let p = num / den;
            if num.is_finite() && den.is_finite() && num > T::zero() && p.is_finite() {
                return p;
            }
        }
    }
    dm_ln_pmf(alpha, counts).exp()
}

/// Binomial with a `Beta(alpha, beta)` success probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBinomial<T> {
    pub trials: u64,
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> BetaBinomial<T> {
    pub fn new(trials: u64, alpha: T, beta: T) -> Result<Self> {
        if !(positive(alpha) && positive(beta)) {
            return Err(Error::domain("beta-binomial alpha and beta must be > 0"));
        }
        Ok(Self { trials, alpha, beta })
    }

    fn check(&self, y: u64) -> Result<()> {
        if y > self.trials {
            return Err(Error::domain(format!("y = {y} outside 0..={}", self.trials)));
        }
        Ok(())
    }

    /// `C(n, y) B(alpha + y, beta + n - y) / B(alpha, beta)`.
    pub fn pmf(&self, y: u64) -> Result<T> {
        self.check(y)?;
        Ok(dm_pmf(&[self.alpha, self.beta], &[y, self.trials - y]))
    }

    pub fn ln_pmf(&self, y: u64) -> Result<T> {
        self.check(y)?;
        Ok(dm_ln_pmf(&[self.alpha, self.beta], &[y, self.trials - y]))
    }

    pub fn mean(&self) -> T {
        lit::<T>(self.trials as f64) * self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> T {
        let n: T = lit(self.trials as f64);
        let s = self.alpha + self.beta;
        n * self.alpha * self.beta * (s + n) / (s * s * (s + T::one()))
    }

    /// Variance relative to `Bin(n, alpha / (alpha + beta))`:
    /// `(alpha + beta + n) / (alpha + beta + 1)`, and 1 when `n <= 1`.
    pub fn over_dispersion_ratio(&self) -> T {
        if self.trials <= 1 {
            return T::one();
        }
        let s = self.alpha + self.beta;
        (s + lit(self.trials as f64)) / (s + T::one())
    }

    /// `(y, pmf(y))` for `y = 0..=n`.
    pub fn table(&self) -> Vec<(u64, T)> {
        (0..=self.trials).map(|y| (y, self.pmf(y).expect("in range"))).collect()
    }

    /// Two-stage draw: `p ~ Beta(alpha, beta)`, `y ~ Bin(n, p)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let p: f64 = Beta::new(self.alpha.to_f64_lossless(), self.beta.to_f64_lossless())
            .expect("validated")
            .sample(rng);
        Binomial::new(self.trials, p.clamp(0.0, 1.0)).expect("p in [0,1]").sample(rng)
    }
}

/// Poisson with a `Gamma(alpha, rate = beta)` mean; `p = 1 / (1 + beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeBinomial<T> {
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> NegativeBinomial<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        if !(positive(alpha) && positive(beta)) {
            return Err(Error::domain("negative-binomial alpha and beta must be > 0"));
        }
        Ok(Self { alpha, beta })
    }

    pub fn p(&self) -> T {
        T::one() / (T::one() + self.beta)
    }

    /// `1 - p`, computed without cancellation.
    fn q(&self) -> T {
        self.beta / (T::one() + self.beta)
    }

    /// `Gamma(alpha + y) / (y! Gamma(alpha)) p^y (1 - p)^alpha`.
    pub fn pmf(&self, y: u64) -> T {
        if y <= RATIO_ROUTE_MAX {
            let coef = (0..y).fold(T::one(), |acc, j| {
                acc * ((self.alpha + lit(j as f64)) / lit((j + 1) as f64))
            });
            let v = coef * self.p().powi(y as i32) * self.q().powf(self.alpha);
            if coef.is_finite() && v.is_finite() && v > T::zero() {
                return v;
            }
        }
        self.ln_pmf(y).exp()
    }

    pub fn ln_pmf(&self, y: u64) -> T {
        let yf: T = lit(y as f64);
        ln_rising(self.alpha, y) - ln_factorial::<T>(y)
            + yf * self.p().ln()
            + self.alpha * self.q().ln()
    }

    pub fn mean(&self) -> T {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> T {
        self.alpha * (T::one() + self.beta) / (self.beta * self.beta)
    }

    /// Variance relative to a Poisson with the same mean: `1 + 1 / beta`.
    pub fn over_dispersion_ratio(&self) -> T {
        T::one() + T::one() / self.beta
    }

    /// `ceil(mean + 20 sd)`, extended until a geometric bound on the
    /// remaining tail mass drops below `1e-13`. The extension matters only
    /// for small `alpha`, where the 20-sd rule can leave `1e-7` uncovered.
    pub fn default_support_max(&self) -> u64 {
        let m = self.mean() + lit::<T>(20.0) * self.variance().sqrt();
        let mut y = m.ceil().to_u64().unwrap_or(u64::MAX);
        let p = self.p();
        let bound = lit::<T>(1e-13);
        while y < u64::MAX / 2 {
            // Successive-term ratios p (alpha + y) / (y + 1) tend to p; the
            // larger of the current ratio and p bounds all later ones.
            let r = (p * (self.alpha + lit(y as f64)) / lit((y + 1) as f64)).max(p);
            if r < T::one() && self.pmf(y) * r / (T::one() - r) < bound {
                break;
            }
            y += 1;
        }
        y
    }

    pub fn table(&self, max_y: u64) -> Vec<(u64, T)> {
        (0..=max_y).map(|y| (y, self.pmf(y))).collect()
    }

    /// Two-stage draw: `theta ~ Gamma(alpha, rate beta)`, `y ~ Poisson(theta)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let theta: f64 = Gamma::new(self.alpha.to_f64_lossless(), 1.0 / self.beta.to_f64_lossless())
            .expect("validated")
            .sample(rng);
        if theta <= 0.0 {
            return 0;
        }
        let y: f64 = Poisson::new(theta).expect("positive rate").sample(rng);
        y as u64
    }
}

/// Multinomial with a `Dirichlet(concentration)` probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletMultinomial<T> {
    pub trials: u64,
    pub concentration: Vec<T>,
}

impl<T: Scalar> DirichletMultinomial<T> {
    pub fn new(trials: u64, concentration: Vec<T>) -> Result<Self> {
        if concentration.len() < 2 {
            return Err(Error::domain("Dirichlet-multinomial needs at least two categories"));
        }
        if !concentration.iter().all(|&a| positive(a)) {
            return Err(Error::domain("concentrations must be > 0"));
        }
        Ok(Self { trials, concentration })
    }

    fn check(&self, counts: &[u64]) -> Result<()> {
        if counts.len() != self.concentration.len() {
            return Err(Error::domain(format!(
                "{} counts for {} categories",
                counts.len(),
                self.concentration.len()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total != self.trials {
            return Err(Error::domain(format!("counts sum to {total}, expected {}", self.trials)));
        }
        Ok(())
    }

    /// Multinomial coefficient times a ratio of multivariate Beta functions.
    pub fn pmf(&self, counts: &[u64]) -> Result<T> {
        self.check(counts)?;
        Ok(dm_pmf(&self.concentration, counts))
    }

    pub fn ln_pmf(&self, counts: &[u64]) -> Result<T> {
        self.check(counts)?;
        Ok(dm_ln_pmf(&self.concentration, counts))
    }

    /// Two-stage draw: `p ~ Dirichlet`, then sequential binomials.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u64> {
        let g: Vec<f64> = self
            .concentration
            .iter()
            .map(|a| Gamma::new(a.to_f64_lossless(), 1.0).expect("validated").sample(rng))
            .collect();
        let total: f64 = g.iter().sum();
        let mut remaining_n = self.trials;
        let mut remaining_p = 1.0;
        let k = g.len();
        let mut out = Vec::with_capacity(k);
        for (j, &gj) in g.iter().enumerate() {
            if j + 1 == k {
                out.push(remaining_n);
                break;
            }
            let pj = if total > 0.0 { gj / total } else { 1.0 / k as f64 };
            let cond = if remaining_p > 0.0 { (pj / remaining_p).clamp(0.0, 1.0) } else { 0.0 };
            let c = Binomial::new(remaining_n, cond).expect("valid").sample(rng);
            out.push(c);
            remaining_n -= c;
            remaining_p -= pj;
        }
        out
    }
}

/// All count vectors of length `k` summing to `n`, in lexicographic order.
pub fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    fn rec(n: u64, k: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            prefix.push(n);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in 0..=n {
            prefix.push(c);
            rec(n - c, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Families whose over-dispersion relative to the base model is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverDispersed<T> {
    BetaBinomial(BetaBinomial<T>),
    NegativeBinomial(NegativeBinomial<T>),
}

/// Compound variance over the base-model variance at matched mean; `>= 1`.
pub fn over_dispersion_ratio<T: Scalar>(dist: &OverDispersed<T>) -> T {
    match dist {
        OverDispersed::BetaBinomial(d) => d.over_dispersion_ratio(),
        OverDispersed::NegativeBinomial(d) => d.over_dispersion_ratio(),
    }
}
