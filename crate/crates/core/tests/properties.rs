use std::sync::OnceLock;

use accim::interval::{covers, merge};
use accim::maps::build_open_system;
use accim::operator::{TowerDensity, TransferOperator};
use accim::tower::{build_tower, choose_delta, Tower};
use accim::{presets, Interval};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tower() -> &'static Tower {
    static T: OnceLock<Tower> = OnceLock::new();
    T.get_or_init(|| {
        let s = build_open_system(presets::perturbed_tripling(), presets::offset_hole()).unwrap();
        build_tower(&s, choose_delta(&s).unwrap(), 25).unwrap()
    })
}

fn op() -> &'static TransferOperator<'static> {
    static OP: OnceLock<TransferOperator<'static>> = OnceLock::new();
    OP.get_or_init(|| TransferOperator::new(tower(), 8).unwrap())
}

fn random_density(op: &TransferOperator, seed: u64, signed: bool) -> TowerDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = op.uniform();
    for v in f.values_mut() {
        *v = if signed { rng.random_range(-1.0..1.0) } else { rng.random_range(0.0..2.0) };
    }
    f
}

fn max_abs_diff(a: &TowerDensity, b: &TowerDensity) -> f64 {
    a.values().iter().zip(b.values()).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transfer_operator_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let op = op();
        let f = random_density(op, s1, true);
        let h = random_density(op, s2, true);
        let lhs = op.apply(&f.combine(a, &h, b));
        let rhs = op.apply(&f).combine(a, &op.apply(&h), b);
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-9);
    }

    #[test]
    fn transfer_operator_is_positive_and_loses_mass(seed in any::<u64>()) {
        let op = op();
        let f = random_density(op, seed, false);
        let pf = op.apply(&f);
        prop_assert!(pf.is_nonnegative());
        prop_assert!(op.integral(&pf) <= op.integral(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn normalize_ignores_scale(seed in any::<u64>(), c in 1e-3..1e3f64) {
        let op = op();
        let f = random_density(op, seed, false);
        let a = op.normalize(&f).unwrap();
        let b = op.normalize(&f.scale(c)).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-9);
        prop_assert!((op.integral(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_gives_sorted_disjoint_cover(raw in proptest::collection::vec((0.0..1.0f64, 0.0..0.2f64), 1..12)) {
        let pieces: Vec<Interval> = raw.iter().map(|(a, l)| Interval::new(*a, (a + l).min(1.0))).collect();
        let m = merge(pieces.clone());
        prop_assert!(m.windows(2).all(|w| w[0].hi < w[1].lo));
        prop_assert!(covers(&m, &pieces));
        let total: f64 = m.iter().map(Interval::len).sum();
        prop_assert!(total <= pieces.iter().map(Interval::len).sum::<f64>() + 1e-12);
    }

    #[test]
    fn intersection_is_symmetric(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64, d in 0.0..1.0f64) {
        let (x, y) = (Interval::new(a, b), Interval::new(c, d));
        prop_assert_eq!(x.intersect(&y, 0.0), y.intersect(&x, 0.0));
        prop_assert!((x.overlap_len(&y) - y.overlap_len(&x)).abs() == 0.0);
        if let Some(z) = x.intersect(&y, 0.0) {
            prop_assert!(x.contains_interval(&z) && y.contains_interval(&z));
        }
    }
}
