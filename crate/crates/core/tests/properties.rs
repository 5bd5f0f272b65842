use std::f64::consts::PI;

use bell_ch::determinize::{determinize, DeterminizeMode};
use bell_ch::inequality::{u_value, SettingQuad};
use bell_ch::model::{
    builtin_counterexample, builtin_malus_lhv, builtin_quantum, frechet_bounds, load_model,
    HiddenSample, Model, Setting, TableModel, TableRow, Wing,
};
use bell_ch::montecarlo::{
    estimate_ch, estimate_joint, tally, EnsembleSampler, MCPlan, OutcomeSampler,
};
use proptest::prelude::*;
use rand::distr::OpenClosed01;
use rand::Rng;

fn prob() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64]
}

proptest! {
    #[test]
    fn u_is_bounded(p in prob(), q in prob(), r in prob(), s in prob()) {
        let u = u_value(p, q, r, s).unwrap();
        prop_assert!((-1.0 - 1e-12..=1e-12).contains(&u), "U = {u}");
    }

    #[test]
    fn u_rejects_out_of_range(p in prop_oneof![-10.0..-1e-9f64, 1.0 + 1e-9..10.0f64]) {
        prop_assert!(u_value(p, 0.5, 0.5, 0.5).is_err());
        prop_assert!(u_value(0.5, 0.5, 0.5, p).is_err());
    }

    #[test]
    fn angles_reduce_mod_pi(deg in -1e4..1e4f64, k in -20i32..20) {
        let s = Setting::degrees(deg);
        let Setting::Angle(r) = s else { unreachable!() };
        prop_assert!((0.0..PI).contains(&r));
        prop_assert!(s.matches(&Setting::degrees(deg + 180.0 * f64::from(k))));
    }

    #[test]
    fn degrees_round_trip(deg in 0.0..180.0f64) {
        let back = Setting::degrees(deg).as_degrees().unwrap();
        prop_assert!((back - deg).abs() <= 1e-12, "{deg} -> {back}");
        prop_assert!((deg.to_radians().to_degrees() - deg).abs() <= 1e-15 * deg.max(1.0));
    }

    #[test]
    fn factorable_joint_is_product(deg_a in 0.0..180.0f64, deg_b in 0.0..180.0f64, lambda in 0.0..PI) {
        let m = builtin_malus_lhv();
        let l = HiddenSample::Continuous(lambda);
        let (a, b) = (Setting::degrees(deg_a), Setting::degrees(deg_b));
        let product = m.p1(&l, &a).unwrap() * m.p2(&l, &b).unwrap();
        prop_assert_eq!(m.joint(&l, &a, &b).unwrap().to_bits(), product.to_bits());
    }

    #[test]
    fn table_models_round_trip(rows in proptest::collection::vec(table_row(), 1..5), eta in 0.05..=1.0f64) {
        let total: f64 = rows.iter().map(|r| r.weight).sum();
        let rows: Vec<TableRow> = rows.into_iter().map(|mut r| { r.weight /= total; r }).collect();
        let model = TableModel::new(
            "random",
            vec![Setting::label("x"), Setting::degrees(30.0)],
            vec![Setting::label("y"), Setting::degrees(112.5)],
            eta,
            rows,
        );
        let Ok(model) = model else { return Ok(()) };
        let again = load_model(&model.to_toml()).unwrap();
        prop_assert_eq!(&again, &model);
    }
}

/// Two settings per wing with an optional Fréchet-valid joint.
fn table_row() -> impl Strategy<Value = TableRow> {
    (
        0.01..1.0f64,
        [prob(), prob()],
        [prob(), prob()],
        [[0.0..=1.0f64, 0.0..=1.0f64], [0.0..=1.0f64, 0.0..=1.0f64]],
        any::<bool>(),
    )
        .prop_map(|(weight, p1, p2, t, with_joint)| {
            let joint = with_joint.then(|| {
                (0..2)
                    .map(|i| {
                        (0..2)
                            .map(|j| {
                                let (lo, hi) = frechet_bounds(p1[i], p2[j]);
                                lo + t[i][j] * (hi - lo)
                            })
                            .collect()
                    })
                    .collect()
            });
            TableRow {
                weight,
                p1: p1.to_vec(),
                p2: p2.to_vec(),
                joint,
            }
        })
}

// For a factorable model the four-cell draw and two independent Bernoulli
// draws must give the same outcome distribution.
#[test]
fn four_cell_matches_independent_bernoulli_for_factorable_models() {
    let m = builtin_malus_lhv();
    let (a, b) = (Setting::degrees(10.0), Setting::degrees(55.0));
    let plan = MCPlan::new(400_000, 11);
    let four_cell = tally::<4, _>(&plan, 100, |rng| {
        let (x, y) = m.sample_pair(rng, &a, &b)?;
        Ok(usize::from(x) * 2 + usize::from(y))
    })
    .unwrap();
    let bernoulli = tally::<4, _>(&plan, 101, |rng| {
        let l = m.lambda_space().sample(rng);
        let x = rng.sample::<f64, _>(OpenClosed01) <= m.p1(&l, &a)?;
        let y = rng.sample::<f64, _>(OpenClosed01) <= m.p2(&l, &b)?;
        Ok(usize::from(x) * 2 + usize::from(y))
    })
    .unwrap();
    // two-sample test per cell, 4 sigma
    let n = plan.trials as f64;
    for k in 0..4 {
        let (p, q) = (four_cell[k] as f64 / n, bernoulli[k] as f64 / n);
        let se = ((p * (1.0 - p) + q * (1.0 - q)) / n).sqrt();
        assert!((p - q).abs() <= 4.0 * se, "cell {k}: {p} vs {q}");
    }
}

#[test]
fn determinized_responses_are_binary_and_marginals_exact() {
    let m = builtin_malus_lhv();
    let det = determinize(&m, DeterminizeMode::Independent).unwrap();
    for i in 0..200 {
        let l = HiddenSample::Continuous(PI * i as f64 / 200.0);
        for deg in [0.0, 17.0, 90.0, 133.3] {
            let s = Setting::degrees(deg);
            assert_eq!(
                det.marginal_measure(Wing::Two, &l, &s).unwrap().to_bits(),
                m.p2(&l, &s).unwrap().to_bits()
            );
        }
    }
}

// |estimate − truth| ≤ 4·stderr for at least 99 of 100 seeds.
fn consistency(name: &str, mut within: impl FnMut(u64) -> bool) {
    let hits = (0..100u64).filter(|&seed| within(seed)).count();
    assert!(hits >= 99, "{name}: only {hits}/100 seeds within 4 sigma");
}

#[test]
fn estimates_are_consistent_across_seeds() {
    let quad = SettingQuad::degrees(0.0, 45.0, 22.5, 67.5);
    let malus = builtin_malus_lhv();
    let q = builtin_quantum(1.0).unwrap();
    let ce = builtin_counterexample();
    let up = Setting::label("up");
    consistency("malus ch", |seed| {
        estimate_ch(&malus, &quad, &MCPlan::new(20_000, seed))
            .unwrap()
            .agrees_with(2f64.sqrt() / 4.0 - 0.5)
    });
    consistency("quantum ch", |seed| {
        estimate_ch(&EnsembleSampler(&q), &quad, &MCPlan::new(20_000, seed))
            .unwrap()
            .agrees_with((2f64.sqrt() - 1.0) / 2.0)
    });
    consistency("malus joint", |seed| {
        estimate_joint(
            &malus,
            &Setting::degrees(0.0),
            &Setting::degrees(22.5),
            &MCPlan::new(20_000, seed),
        )
        .unwrap()
        .agrees_with(0.25 + (45f64.to_radians()).cos() / 8.0)
    });
    consistency("counterexample joint", |seed| {
        estimate_joint(&ce, &up, &up, &MCPlan::new(20_000, seed))
            .unwrap()
            .agrees_with(0.5)
    });
}

#[test]
fn estimates_stay_in_range() {
    let malus = builtin_malus_lhv();
    let quad = SettingQuad::degrees(0.0, 45.0, 22.5, 67.5);
    for seed in 0..5 {
        let ch = estimate_ch(&malus, &quad, &MCPlan::new(5_000, seed)).unwrap();
        assert!(ch
            .terms
            .iter()
            .all(|t| (0.0..=1.0).contains(&t.estimate.value)));
        assert!((-3.0..=3.0).contains(&ch.verdict.statistic));
    }
}
