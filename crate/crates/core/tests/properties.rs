use proptest::prelude::*;
use rug::Rational;

use mdyn::arith::CertifiedValue;
use mdyn::conditions::{gap_analysis, kappa_fit, small_gap_identity, sr_sum, tsr_sum, CriticalValueData};
use mdyn::conjugacy::push_forward;
use mdyn::error::Error;
use mdyn::homeo::HomeoSpec;
use mdyn::map_model::MapSpec;
use mdyn::symbolic::itinerary;

fn logistic(k: u32) -> MapSpec {
    MapSpec::logistic(Rational::from((k, 1000))).unwrap()
}

fn homeo() -> impl Strategy<Value = HomeoSpec> {
    prop_oneof![
        Just(HomeoSpec::Identity),
        Just(HomeoSpec::Square),
        Just(HomeoSpec::Sqrt),
        Just(HomeoSpec::SinSquared),
        Just(HomeoSpec::ArcsinSqrt),
        (1u32..9, 1u32..9).prop_map(|(a, b)| HomeoSpec::PiecewiseLinear(vec![
            (Rational::new(), Rational::new()),
            (Rational::from((a, 10)), Rational::from((b, 10))),
            (Rational::from(1), Rational::from(1)),
        ])),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn sr_is_monotone_in_delta(k in 3600u32..=4000, a in 1u32..50, b in 1u32..50) {
        let (lo, hi) = (a.min(b) as f64 / 100.0, a.max(b) as f64 / 100.0);
        let rep = sr_sum(&logistic(k), &[lo, hi], 150).unwrap();
        for c in &rep.critical {
            let (s, t) = (&c.series[0], &c.series[1]);
            prop_assume!(s.ambiguous == 0 && t.ambiguous == 0);
            prop_assert!(s.visits <= t.visits);
            for (x, y) in s.values.iter().zip(&t.values) {
                prop_assert!(x <= y);
            }
        }
    }

    #[test]
    fn tsr_is_monotone_in_m(k in 3600u32..=4000, a in 1usize..30, b in 1usize..30) {
        let (lo, hi) = (a.min(b), a.max(b));
        let rep = tsr_sum(&logistic(k), &[lo, hi], 200).unwrap();
        for c in &rep.critical {
            for (x, y) in c.series[0].sums.iter().zip(&c.series[1].sums) {
                prop_assert!(x >= y);
            }
        }
    }

    #[test]
    fn kappa_lower_never_exceeds_kappa_bar(k in 3600u32..=4000) {
        let map = logistic(k);
        let cv = match CriticalValueData::compute(&map, 400, 0) {
            Ok(cv) => cv,
            Err(Error::TruncatedByCriticalHit { .. }) => return Ok(()),
            Err(e) => panic!("{e}"),
        };
        let fit = kappa_fit(&map, &cv.data.kneading, 400);
        if let (Some(a), Some(b)) = (fit.kappa_lower, fit.kappa_bar) {
            prop_assert!(0.0 < a && a <= b && b.is_finite());
        } else {
            prop_assert!(fit.insufficient.is_some());
        }
    }

    #[test]
    fn gap_windows_are_disjoint_and_short(k in 3600u32..=4000, t in 3usize..60) {
        let map = logistic(k);
        let Ok(cv) = CriticalValueData::compute(&map, 400, 0) else { return Ok(()) };
        let Ok(g) = gap_analysis(&cv.times[0], 0, t) else { return Ok(()) };
        prop_assert_eq!(g.count, g.windows.len());
        for w in &g.windows {
            prop_assert!(w.t2 - w.t1 < t);
            prop_assert!(w.left.1 - w.left.0 < t && w.right.1 - w.right.0 < t);
            prop_assert!(w.t1 <= w.left.0.min(w.right.0) && w.left.1.max(w.right.1) <= w.t2);
        }
        for p in g.windows.windows(2) {
            prop_assert!(p[0].t2 < p[1].t1);
        }
        prop_assert!((0.0..=1.0).contains(&g.epsilon));
        prop_assert_eq!(g.passes, g.count as f64 >= g.bound);
    }

    #[test]
    fn small_gap_identity_holds(k in 3600u32..=4000, t in 1usize..40) {
        let map = logistic(k);
        let Ok(cv) = CriticalValueData::compute(&map, 300, 0) else { return Ok(()) };
        for id in small_gap_identity(&cv.chains[0], &cv.data.kneading, t) {
            if id.undetermined == 0 {
                prop_assert!(id.holds, "{:?}", id);
            }
        }
    }

    #[test]
    fn homeo_round_trip(h in homeo(), n in 0u32..=1000) {
        let x = CertifiedValue::exact(Rational::from((n, 1000)), 128).forget_exact();
        let back = h.apply_inverse(&h.apply(&x, 128), 128);
        prop_assert!(back.overlaps(&x));
        prop_assert!(back.width_f64() < 1e-20);
    }

    #[test]
    fn pushforward_conjugates(h in homeo(), n in 0u32..=1000) {
        let f = MapSpec::tent();
        let g = push_forward(&f, &h).unwrap();
        let x = CertifiedValue::exact(Rational::from((n, 1000)), 128).forget_exact();
        let lhs = h.apply(&f.evaluate(&x, 128), 128);
        let rhs = g.evaluate(&h.apply(&x, 128), 128);
        prop_assert!(lhs.overlaps(&rhs));
    }

    #[test]
    fn tent_itinerary_matches_exact_orbit(p in 1u32..1000, q in 1001u32..5000) {
        let x0 = Rational::from((p, q));
        let seq = itinerary(&MapSpec::tent(), &CertifiedValue::exact(x0.clone(), 128), 40);
        let half = Rational::from((1, 2));
        let mut x = x0;
        for j in 0..seq.certified {
            prop_assert!(x != half);
            prop_assert_eq!(seq.symbols[j], u16::from(x > half));
            x = if x < half { Rational::from(&x * 2) } else { 2 - Rational::from(&x * 2) };
        }
    }
}
