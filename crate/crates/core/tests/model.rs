mod common;

use finmix::model::{count_modes, covering_interval, Atom, Component, MixingMeasure, MixtureModel};
use finmix::{Dataset, Obs};
use proptest::prelude::*;

fn normal_measure(parts: &[(f64, f64, f64)]) -> MixingMeasure<f64> {
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let atoms = parts
        .iter()
        .map(|&(w, mu, s)| Atom::new(w / total, Component::normal(mu, s).unwrap()))
        .collect();
    MixingMeasure::normalized(atoms).unwrap()
}

fn normal_parts() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.05f64..1.0, -10.0f64..10.0, 0.2f64..3.0), 1..6)
}

fn density(m: &MixingMeasure<f64>, y: f64) -> f64 {
    MixtureModel::new(m.clone()).density(Obs::Real(y)).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()) || a == b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_mixtures_integrate_to_one(parts in normal_parts()) {
        let m = normal_measure(&parts);
        let model = MixtureModel::new(m.clone());
        let f = |y: f64| model.density(Obs::Real(y)).unwrap();
        let integral = common::integrate(&f, -40.0, 40.0, 0.25);
        prop_assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn poisson_mixtures_sum_to_one(parts in prop::collection::vec((0.05f64..1.0, 0.1f64..60.0), 1..5)) {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let atoms = parts.iter().map(|&(w, l)| Atom::new(w / total, Component::poisson(l).unwrap())).collect();
        let model = MixtureModel::new(MixingMeasure::normalized(atoms).unwrap());
        let lmax = parts.iter().map(|p| p.1).fold(0.0, f64::max);
        let top = (lmax + 20.0 * lmax.sqrt() + 20.0).ceil() as u64;
        let s: f64 = (0..=top).map(|y| model.density(Obs::Count(y)).unwrap()).sum();
        prop_assert!((1.0 - 1e-10..=1.0 + 1e-10).contains(&s), "sum {s}");
    }

    #[test]
    fn density_is_label_free(parts in normal_parts(), seed in any::<u64>(), split in 0.05f64..0.95) {
        let m = normal_measure(&parts);
        let k = m.len();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let permuted = m.permute(&perm).unwrap();

        let mut with_zero = m.atoms().to_vec();
        with_zero.push(Atom::new(0.0, Component::normal(123.0, 4.0).unwrap()));
        let with_zero = MixingMeasure::new(with_zero).unwrap();

        let j = (seed as usize) % k;
        let mut dup = m.atoms().to_vec();
        let a = dup[j];
        dup[j] = Atom::new(a.weight * split, a.component);
        dup.push(Atom::new(a.weight * (1.0 - split), a.component));
        let dup = MixingMeasure::normalized(dup).unwrap();

        let base = m.canonicalize().unwrap();
        for other in [&permuted, &with_zero, &dup] {
            let c = other.canonicalize().unwrap();
            prop_assert_eq!(c.len(), base.len());
            for i in 0..100 {
                let y = -15.0 + 0.3 * i as f64;
                let (a, b) = (density(&base, y), density(&c, y));
                prop_assert!(rel_close(a, b, 1e-14), "y={} {} vs {}", y, a, b);
            }
        }
    }

    #[test]
    fn canonicalize_is_idempotent(parts in normal_parts()) {
        let c = normal_measure(&parts).canonicalize().unwrap();
        prop_assert_eq!(c.canonicalize().unwrap(), c);
    }

    #[test]
    fn mode_count_is_at_most_g(parts in normal_parts()) {
        let model = MixtureModel::new(normal_measure(&parts));
        let (lo, hi) = covering_interval(&model, 12.0).unwrap();
        let modes = count_modes(&model, lo, hi, 20_000).unwrap();
        prop_assert!(modes.count() >= 1 && modes.count() <= parts.len());
    }

    #[test]
    fn log_likelihood_matches_sum_of_log_densities(parts in normal_parts(), ys in prop::collection::vec(-12.0f64..12.0, 0..40)) {
        let model = MixtureModel::new(normal_measure(&parts));
        let ll = model.log_likelihood(&Dataset::Real(ys.clone())).unwrap();
        let direct: f64 = ys.iter().map(|&y| model.density(Obs::Real(y)).unwrap().ln()).sum();
        prop_assert!((ll - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
    }
}

fn fig1() -> MixtureModel<f64> {
    MixtureModel::new(normal_measure(&[(0.3, 2.0, 1.0), (0.5, 3.0, 0.5), (0.2, 3.4, 1.3)]))
}

fn fig7() -> MixtureModel<f64> {
    let means = [0.0, 1.5, 3.0, 4.5, 6.0];
    let weights = [0.1, 0.2, 0.3, 0.3, 0.1];
    let parts: Vec<_> = weights.iter().zip(means).map(|(&w, m)| (w, m, 0.6)).collect();
    MixtureModel::new(normal_measure(&parts))
}

#[test]
fn figure_mode_counts() {
    let m = fig1();
    let (lo, hi) = covering_interval(&m, 12.0).unwrap();
    assert_eq!(count_modes(&m, lo, hi, 10_000).unwrap().count(), 1);
    let m = fig7();
    let (lo, hi) = covering_interval(&m, 12.0).unwrap();
    assert_eq!(count_modes(&m, lo, hi, 10_000).unwrap().count(), 3);
}

#[test]
fn fig1_is_leptokurtic_with_negative_skew() {
    let m = fig1();
    let f = |y: f64| m.density(Obs::Real(y)).unwrap();
    let moment = |k: i32, c: f64| common::integrate(&|y: f64| (y - c).powi(k) * f(y), -20.0, 25.0, 0.25);
    let mean = moment(1, 0.0);
    let var = moment(2, mean);
    let skew = moment(3, mean) / var.powf(1.5);
    let kurt = moment(4, mean) / (var * var);
    assert!(skew < 0.0, "skewness {skew}");
    assert!(kurt > 3.0, "kurtosis {kurt}");
}

#[test]
fn single_normal_mode_is_its_mean() {
    let m = MixtureModel::new(normal_measure(&[(1.0, 1.234, 0.7)]));
    let r = count_modes(&m, -10.0, 12.0, 1000).unwrap();
    assert_eq!(r.count(), 1);
    assert!((r.locations[0] - 1.234).abs() < 1e-10);
}
