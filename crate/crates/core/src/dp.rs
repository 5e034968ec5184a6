//! Dirichlet-process partition prior: Pólya-urn partition probabilities,
//! sequential Chinese-restaurant sampling and expected cluster counts.
//!
//! Indices are 0-based. Partitions are kept canonical (blocks sorted by
//! least element, indices sorted inside each block) so equal partitions
//! compare and hash equal.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::scalar::{count, ln_rising, CompensatedSum, Scalar};

/// A set partition of `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Validates that `blocks` are non-empty, disjoint and cover `0..n`.
    pub fn from_blocks(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::domain("a partition needs at least one block"));
        }
        let n: usize = blocks.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::domain("empty block"));
            }
            for &i in b.iter() {
                if i >= n || seen[i] {
                    return Err(Error::domain(format!("index {i} repeated or outside 0..{n}")));
                }
                seen[i] = true;
            }
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { blocks })
    }

    /// Partition whose blocks are the level sets of `labels`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            by_label.entry(l).or_default().push(i);
        }
        Self::from_blocks(by_label.into_values().collect())
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// Number of blocks `d`.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of indices `n`.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block sizes in canonical block order.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    /// Block sizes in decreasing order: the integer partition of `n`.
    pub fn size_profile(&self) -> Vec<usize> {
        let mut s = self.sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Restricted-growth string: label of each index, blocks numbered by
    /// first appearance.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (j, b) in self.blocks.iter().enumerate() {
            for &i in b {
                out[i] = j;
            }
        }
        out
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if !(alpha.is_finite() && alpha > T::zero()) {
        return Err(Error::domain("alpha must be > 0"));
    }
    Ok(())
}

/// `ln[ alpha^d prod_j (n_j - 1)! / (alpha (alpha+1) ... (alpha+n-1)) ]`.
pub fn partition_log_prob<T: Scalar>(partition: &Partition, alpha: T) -> Result<T> {
    check_alpha(alpha)?;
    let mut acc = count::<T>(partition.num_blocks()) * alpha.ln();
    for s in partition.sizes() {
        acc = acc + count::<T>(s).ln_gamma();
    }
    Ok(acc - ln_rising(alpha, partition.len() as u64))
}

/// Exact rational partition probability for rational `alpha`.
pub fn partition_prob_exact(partition: &Partition, alpha: &BigRational) -> Result<BigRational> {
    if *alpha <= BigRational::zero() {
        return Err(Error::domain("alpha must be > 0"));
    }
    let mut num = BigRational::one();
    for s in partition.sizes() {
        num *= alpha;
        for k in 1..s {
            num *= BigRational::from_integer(BigInt::from(k));
        }
    }
    let mut den = BigRational::one();
    for i in 0..partition.len() {
        den *= alpha + BigRational::from_integer(BigInt::from(i));
    }
    Ok(num / den)
}

/// Parameters of a sequential CRP draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrpConfig {
    pub alpha: f64,
    pub n: usize,
    pub seed: u64,
}

impl CrpConfig {
    pub fn new(alpha: f64, n: usize, seed: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if n == 0 {
            return Err(Error::domain("CRP needs n >= 1"));
        }
        Ok(Self { alpha, n, seed })
    }
}

/// One CRP draw from `config.seed`.
pub fn sample_crp(config: &CrpConfig) -> Result<Partition> {
    let config = CrpConfig::new(config.alpha, config.n, config.seed)?;
    let mut rng = rng_from_seed(config.seed);
    Ok(sample_crp_with(config.alpha, config.n, &mut rng))
}

/// Sequential seating: index `i` (0-based) joins block `j` with probability
/// `n_j / (alpha + i)` and opens a new block with probability `alpha / (alpha + i)`.
pub fn sample_crp_with<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Partition {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let u = rng.random::<f64>() * (alpha + i as f64);
        let mut acc = 0.0;
        let mut chosen = None;
        for (j, b) in blocks.iter().enumerate() {
            acc += b.len() as f64;
            if u < acc {
                chosen = Some(j);
                break;
            }
        }
        match chosen {
            Some(j) => blocks[j].push(i),
            None => blocks.push(vec![i]),
        }
    }
    Partition { blocks }
}

/// Prior mean number of blocks, `sum_{i=1}^n alpha / (alpha + i - 1)`.
///
/// Grows like `alpha ln(n / alpha)` for large `n`.
pub fn expected_cluster_count<T: Scalar>(alpha: T, n: usize) -> Result<T> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::domain("expected cluster count needs n >= 1"));
    }
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        acc.add(alpha / (alpha + count(i)));
    }
    Ok(acc.total())
}

/// Exact rational version of [`expected_cluster_count`].
pub fn expected_cluster_count_exact(alpha: &BigRational, n: usize) -> Result<BigRational> {
    if *alpha <= BigRational::zero() {
        return Err(Error::domain("alpha must be > 0"));
    }
    if n == 0 {
        return Err(Error::domain("expected cluster count needs n >= 1"));
    }
    Ok((0..n).fold(BigRational::zero(), |acc, i| {
        acc + alpha / (alpha + BigRational::from_integer(BigInt::from(i)))
    }))
}

/// Variance of the number of blocks, `sum alpha (i-1) / (alpha + i - 1)^2`.
pub fn cluster_count_variance<T: Scalar>(alpha: T, n: usize) -> Result<T> {
    check_alpha(alpha)?;
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        let d = alpha + count(i);
        acc.add(alpha * count::<T>(i) / (d * d));
    }
    Ok(acc.total())
}

/// Law of the number of blocks: entry `k - 1` is `P(d = k)`, i.e.
/// `alpha^k |s(n, k)| / (alpha (alpha+1) ... (alpha+n-1))` with unsigned
/// Stirling numbers of the first kind, built by the seating recursion.
pub fn cluster_count_pmf<T: Scalar>(alpha: T, n: usize) -> Result<Vec<T>> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::domain("cluster count law needs n >= 1"));
    }
    let mut p = vec![T::zero(); n];
    p[0] = T::one();
    for i in 1..n {
        let d = alpha + count(i);
        let (stay, open) = (count::<T>(i) / d, alpha / d);
        for k in (1..=i).rev() {
            p[k] = p[k] * stay + p[k - 1] * open;
        }
        p[0] = p[0] * stay;
    }
    Ok(p)
}

/// Iterator over all partitions of `{0, .., n-1}` via restricted-growth strings.
#[derive(Debug, Clone)]
pub struct Partitions {
    rgs: Vec<usize>,
    done: bool,
}

/// All `Bell(n)` partitions of `{0, .., n-1}`, starting with the single block.
pub fn partitions(n: usize) -> Partitions {
    Partitions { rgs: vec![0; n], done: n == 0 }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let out = Partition::from_labels(&self.rgs).expect("restricted-growth strings are valid");
        // Advance: rightmost position that may grow, then reset the tail.
        let n = self.rgs.len();
        let mut prefix_max = vec![0; n];
        for i in 1..n {
            prefix_max[i] = prefix_max[i - 1].max(self.rgs[i - 1]);
        }
        match (1..n).rev().find(|&i| self.rgs[i] <= prefix_max[i]) {
            Some(i) => {
                self.rgs[i] += 1;
                for x in &mut self.rgs[i + 1..] {
                    *x = 0;
                }
            }
            None => self.done = true,
        }
        Some(out)
    }
}

/// Histogram of `d` over `runs` CRP draws on one seeded stream; index `d - 1`.
pub fn crp_cluster_histogram(alpha: f64, n: usize, runs: usize, seed: u64) -> Result<Vec<u64>> {
    CrpConfig::new(alpha, n, seed)?;
    let mut rng = rng_from_seed(seed);
    let mut hist = vec![0u64; n];
    for _ in 0..runs {
        hist[sample_crp_with(alpha, n, &mut rng).num_blocks() - 1] += 1;
    }
    Ok(hist)
}

/// Asymptotic `alpha ln(n / alpha)`.
pub fn asymptotic_cluster_count<T: Scalar>(alpha: T, n: usize) -> T {
    alpha * (count::<T>(n) / alpha).ln()
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn hand_values() {
        let one = Partition::from_blocks(vec![vec![0]]).unwrap();
        assert!(partition_log_prob(&one, 3.7f64).unwrap().abs() < 1e-15);
        let p = Partition::from_blocks(vec![vec![2, 0, 1]]).unwrap();
        assert!((partition_log_prob(&p, 1.0f64).unwrap().exp() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(partition_prob_exact(&p, &q(1, 1)).unwrap(), q(1, 3));
        let two = Partition::from_blocks(vec![vec![1], vec![0]]).unwrap();
        assert_eq!(two.blocks(), &[vec![0], vec![1]]);
        assert_eq!(partition_prob_exact(&two, &q(1, 1)).unwrap(), q(1, 2));
        assert!(partition_log_prob(&two, 0.0).is_err());
    }

    #[test]
    fn validation() {
        assert!(Partition::from_blocks(vec![]).is_err());
        assert!(Partition::from_blocks(vec![vec![0], vec![0]]).is_err());
        assert!(Partition::from_blocks(vec![vec![0], vec![2]]).is_err());
        assert!(Partition::from_blocks(vec![vec![0], vec![]]).is_err());
    }

    #[test]
    fn enumeration_counts_and_sums() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203, 877, 4140];
        for (n, &b) in bell.iter().enumerate().skip(1) {
            let all: Vec<Partition> = partitions(n).collect();
            assert_eq!(all.len(), b);
            let s: f64 = all.iter().map(|p| partition_log_prob(p, 1.3f64).unwrap().exp()).sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} sum={s}");
        }
        let exact: BigRational = partitions(5).map(|p| partition_prob_exact(&p, &q(2, 3)).unwrap()).sum();
        assert_eq!(exact, BigRational::one());
    }

    #[test]
    fn expected_counts() {
        assert_eq!(expected_cluster_count_exact(&q(1, 1), 4).unwrap(), q(25, 12));
        assert_eq!(expected_cluster_count(5.0, 1).unwrap(), 1.0);
        let e: f64 = expected_cluster_count(2.0, 10_000).unwrap();
        let a: f64 = asymptotic_cluster_count(2.0, 10_000);
        assert!((e - a).abs() / a < 0.1);
        let mut prev = 0.0;
        for n in 1..50 {
            let v: f64 = expected_cluster_count(0.7, n).unwrap();
            assert!(v > prev);
            if n > 1 {
                assert!(expected_cluster_count(0.8, n).unwrap() > v);
            }
            prev = v;
        }
    }

    #[test]
    fn cluster_count_law_matches_enumeration() {
        for alpha in [0.3f64, 1.0, 4.0] {
            let law = cluster_count_pmf(alpha, 6).unwrap();
            let mut by_d = [0.0; 6];
            for p in partitions(6) {
                by_d[p.num_blocks() - 1] += partition_log_prob(&p, alpha).unwrap().exp();
            }
            for (a, b) in law.iter().zip(by_d) {
                assert!((a - b).abs() < 1e-14);
            }
            let mean: f64 = law.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum();
            assert!((mean - expected_cluster_count(alpha, 6).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn crp_edge_cases() {
        let p = sample_crp(&CrpConfig { alpha: 2.0, n: 1, seed: 3 }).unwrap();
        assert_eq!(p.blocks(), &[vec![0]]);
        for seed in 0..100 {
            let p = sample_crp(&CrpConfig { alpha: 1e-9, n: 20, seed }).unwrap();
            assert_eq!(p.num_blocks(), 1);
        }
        assert!(sample_crp(&CrpConfig { alpha: 1.0, n: 0, seed: 0 }).is_err());
    }

    #[test]
    fn crp_frequencies_match_formula() {
        let mut rng = rng_from_seed(11);
        let runs = 100_000;
        let mut freq: HashMap<Partition, usize> = HashMap::new();
        for _ in 0..runs {
            *freq.entry(sample_crp_with(1.0, 4, &mut rng)).or_default() += 1;
        }
        for p in partitions(4) {
            let pr = partition_log_prob(&p, 1.0f64).unwrap().exp();
            let obs = *freq.get(&p).unwrap_or(&0) as f64 / runs as f64;
            let se = (pr * (1.0 - pr) / runs as f64).sqrt();
            assert!((obs - pr).abs() < 4.5 * se, "{p:?}: {obs} vs {pr}");
        }
    }

    #[test]
    fn labels_round_trip() {
        for p in partitions(6) {
            assert_eq!(Partition::from_labels(&p.labels()).unwrap(), p);
        }
    }
}
