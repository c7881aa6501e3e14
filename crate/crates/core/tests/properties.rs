use std::path::Path;

use proptest::prelude::*;
use rankforge::dataset::{read_csv, synthesize, write_csv, CategoryTable, SynthOptions};
use rankforge::fit::{fit, gradient, FitOptions};
use rankforge::model::{
    expected_score, implicit_loss_d1, implicit_loss_d2, matched_scores, outcome_probs, ZGrid,
};
use rankforge::online::{run, spearman};
use rankforge::{LossKind, ModelParams, NumericalScores, Thresholds};

fn phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Strictly increasing cut points.
fn thresholds() -> impl Strategy<Value = Thresholds> {
    prop::collection::vec(0.01f64..1.5, 1..8).prop_map(|gaps| {
        let mut acc = -gaps.iter().sum::<f64>() / 2.0;
        let interior = gaps
            .iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect();
        Thresholds::new(interior).unwrap()
    })
}

fn symmetric_thresholds() -> impl Strategy<Value = Thresholds> {
    (prop::collection::vec(0.01f64..1.0, 1..4), any::<bool>()).prop_map(|(gaps, odd)| {
        let mut half = Vec::new();
        let mut acc = 0.0;
        for g in gaps {
            acc += g;
            half.push(acc);
        }
        let mut interior: Vec<f64> = half.iter().rev().map(|v| -v).collect();
        if odd {
            interior.push(0.0);
        }
        interior.extend(&half);
        Thresholds::new(interior).unwrap()
    })
}

fn decreasing_scores(levels: usize) -> impl Strategy<Value = NumericalScores> {
    prop::collection::vec(0.01f64..2.0, levels - 1).prop_map(move |steps| {
        let mut v = vec![3.0];
        for s in steps {
            v.push(v.last().unwrap() - s);
        }
        NumericalScores::new(v).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn probabilities_sum_to_one(c in thresholds(), z in -20.0f64..20.0) {
        let s: f64 = outcome_probs(z, &c).iter().sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cumulative_identity(c in thresholds(), z in -6.0f64..6.0) {
        let p = outcome_probs(z, &c);
        let mut acc = 0.0;
        for (y, &cy) in c.interior().iter().enumerate() {
            acc += p[y];
            prop_assert!((acc - phi(z + cy)).abs() <= 1e-12);
        }
    }

    #[test]
    fn mirror_symmetry(c in symmetric_thresholds(), z in -6.0f64..6.0) {
        let (p, q) = (outcome_probs(z, &c), outcome_probs(-z, &c));
        let l = p.len();
        for y in 0..l {
            prop_assert!((p[y] - q[l - 1 - y]).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_identity(c in thresholds(), seed in 0u64..1000, z in -8.0f64..8.0) {
        let levels = c.levels();
        let r: Vec<f64> = (0..levels).map(|k| ((seed + 7 * k as u64) % 11) as f64 - 5.0).collect();
        let r = NumericalScores::new(r).unwrap();
        for y in 0..levels {
            let lhs = implicit_loss_d1(y, z, &c, &r);
            prop_assert!((lhs - (expected_score(z, &c, &r) - r.get(y))).abs() <= 1e-15);
        }
    }

    #[test]
    fn decreasing_scores_give_convex_losses(
        (c, r) in thresholds().prop_flat_map(|c| {
            let l = c.levels();
            (Just(c), decreasing_scores(l))
        })
    ) {
        let grid = ZGrid { lo: -8.0, hi: 8.0, points: 801 };
        for z in grid.iter() {
            prop_assert!(implicit_loss_d2(0, z, &c, &r) > 0.0);
        }
    }

    #[test]
    fn matched_scores_are_antisymmetric(c in symmetric_thresholds(), r0 in 0.1f64..5.0) {
        let r = matched_scores(&c, r0).unwrap();
        let l = r.levels();
        prop_assert_eq!(r.get(0), r0);
        for y in 0..l {
            prop_assert_eq!(r.get(y), -r.get(l - 1 - y));
        }
    }

    #[test]
    fn spearman_bounds_and_invariance(v in prop::collection::vec(-10.0f64..10.0, 2..30), seed in 0u64..100) {
        let w: Vec<f64> = v.iter().enumerate().map(|(i, x)| x * 0.5 + ((i as u64 * 31 + seed) % 7) as f64).collect();
        let r = spearman(&v, &w).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert_eq!(r, spearman(&w, &v).unwrap());
        // a strictly increasing transform keeps every rank
        let e: Vec<f64> = v.iter().map(|x| x.exp()).collect();
        prop_assert!((spearman(&e, &w).unwrap() - r).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn penalized_fit_is_centered_and_stationary(seed in 0u64..10_000, gamma in 0.05f64..5.0, eta in -0.5f64..0.5) {
        let p = ModelParams::fivb().with_gamma(gamma).with_eta(eta);
        let (d, _) = synthesize(6, 60, &p, seed, None, &SynthOptions::default()).unwrap();
        for kind in [LossKind::LogScore, LossKind::ImplicitFivb] {
            let f = fit(&d, &p, kind, &FitOptions::default()).unwrap();
            prop_assert!(f.theta.iter().sum::<f64>().abs() <= 1e-9);
            let g = gradient(&f.theta, &d, &p, kind);
            prop_assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() <= 1e-8);
        }
    }

    #[test]
    fn online_updates_are_zero_sum(seed in 0u64..10_000, mu in 0.001f64..0.2) {
        let mut p = ModelParams::fivb();
        p.mu = mu;
        let (d, _) = synthesize(5, 80, &p, seed, None, &SynthOptions::default()).unwrap();
        let init: Vec<f64> = (0..d.team_count()).map(|i| 50.0 * i as f64).collect();
        for kind in [LossKind::LogScore, LossKind::ImplicitFivb] {
            let r = run(&d, &init, &p, kind, None).unwrap();
            let drift = r.state.theta.iter().sum::<f64>() - init.iter().sum::<f64>();
            prop_assert!(drift.abs() <= 1e-9);
        }
    }

    #[test]
    fn csv_round_trip(seed in 0u64..10_000, teams in 2usize..9, matches in 1usize..60) {
        let p = ModelParams::fivb();
        let (d, _) = synthesize(teams, matches, &p, seed, None, &SynthOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        let back = read_csv(buf.as_slice(), Path::new("mem"), &CategoryTable::fivb()).unwrap();
        // indices follow first appearance, so compare by name
        let named = |ds: &rankforge::dataset::Dataset| -> Vec<_> {
            ds.matches
                .iter()
                .map(|m| (m.t, m.date, ds.teams[m.home].clone(), ds.teams[m.away].clone(), m.outcome, m.home_venue, m.category))
                .collect()
        };
        prop_assert_eq!(named(&back), named(&d));
        // teams that never played are not listed in the file
        prop_assert!(back.teams.len() <= d.teams.len());
    }
}
