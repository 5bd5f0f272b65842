//! The CH quantity `U`, the factorability defect, the ensemble CH statistic
//! and the no-enhancement condition.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EnsemblePrediction, HiddenSample, Model, Setting};
use crate::quadrature::IntegrationPlan;

/// Tolerance on bound comparisons for inexact (quadrature or closed-form
/// trigonometric) inputs.
pub const BOUND_TOLERANCE: f64 = 1e-12;

/// The four analyzer settings `(a, a′, b, b′)` entering U and the CH statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettingQuad {
    pub a: Setting,
    pub a_prime: Setting,
    pub b: Setting,
    pub b_prime: Setting,
}

impl SettingQuad {
    pub fn new(a: Setting, a_prime: Setting, b: Setting, b_prime: Setting) -> Self {
        SettingQuad {
            a,
            a_prime,
            b,
            b_prime,
        }
    }

    pub fn degrees(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        SettingQuad::new(
            Setting::degrees(a),
            Setting::degrees(a_prime),
            Setting::degrees(b),
            Setting::degrees(b_prime),
        )
    }

    /// Parses four comma-separated setting tokens.
    pub fn parse(list: &str) -> Result<Self> {
        let parts = list
            .split(',')
            .map(Setting::parse)
            .collect::<Result<Vec<_>>>()?;
        match <[Setting; 4]>::try_from(parts) {
            Ok([a, a_prime, b, b_prime]) => Ok(SettingQuad::new(a, a_prime, b, b_prime)),
            Err(v) => Err(Error::InvalidArgument(format!(
                "expected four settings a,a',b,b', got {}",
                v.len()
            ))),
        }
    }
}

fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain: "[0, 1]",
        })
    }
}

/// `U = p1a·p2b − p1a·p2b′ + p1a′·p2b + p1a′·p2b′ − p1a′ − p2b`.
pub fn u_value(p1a: f64, p1a_prime: f64, p2b: f64, p2b_prime: f64) -> Result<f64> {
    check_unit("p1(a)", p1a)?;
    check_unit("p1(a')", p1a_prime)?;
    check_unit("p2(b)", p2b)?;
    check_unit("p2(b')", p2b_prime)?;
    Ok(p1a * p2b - p1a * p2b_prime + p1a_prime * p2b + p1a_prime * p2b_prime - p1a_prime - p2b)
}

/// One deterministic assignment of the four singles and its exact U.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UCase {
    pub x: u8,
    pub x_prime: u8,
    pub y: u8,
    pub y_prime: u8,
    pub u: i8,
}

impl UCase {
    pub fn new(x: u8, x_prime: u8, y: u8, y_prime: u8) -> Self {
        let (x, xp, y, yp) = (x as i8, x_prime as i8, y as i8, y_prime as i8);
        let u = x * y - x * yp + xp * y + xp * yp - xp - y;
        UCase {
            x: x as u8,
            x_prime: xp as u8,
            y: y as u8,
            y_prime: yp as u8,
            u,
        }
    }
}

/// All sixteen 0/1 assignments of `(x, x′, y, y′)`, in binary counting order
/// with `x` most significant.
pub fn enumerate_deterministic_u() -> Vec<UCase> {
    (0u8..16)
        .map(|bits| UCase::new((bits >> 3) & 1, (bits >> 2) & 1, (bits >> 1) & 1, bits & 1))
        .collect()
}

/// Number of cases with `U = −1` and `U = 0`.
pub fn dichotomy_counts(cases: &[UCase]) -> (usize, usize) {
    let minus = cases.iter().filter(|c| c.u == -1).count();
    let zero = cases.iter().filter(|c| c.u == 0).count();
    (minus, zero)
}

/// `joint(λ,a,b) − p1(λ,a)·p2(λ,b)`; zero exactly where the joint factors.
pub fn factorability_defect(
    model: &dyn Model,
    lambda: &HiddenSample,
    a: &Setting,
    b: &Setting,
) -> Result<f64> {
    let joint = model.joint(lambda, a, b)?;
    Ok(joint - model.p1(lambda, a)? * model.p2(lambda, b)?)
}

/// U at λ from the model's singles.
pub fn u_at(model: &dyn Model, lambda: &HiddenSample, quad: &SettingQuad) -> Result<f64> {
    u_value(
        model.p1(lambda, &quad.a)?,
        model.p1(lambda, &quad.a_prime)?,
        model.p2(lambda, &quad.b)?,
        model.p2(lambda, &quad.b_prime)?,
    )
}

/// Whether `−1 ≤ U ≤ 0` at λ. This holds for every input in `[0,1]⁴`, so a
/// `false` here means an arithmetic bug, not a property of the model.
pub fn u_bounds_check(
    model: &dyn Model,
    lambda: &HiddenSample,
    quad: &SettingQuad,
) -> Result<bool> {
    let u = u_at(model, lambda, quad)?;
    Ok((-1.0 - BOUND_TOLERANCE..=BOUND_TOLERANCE).contains(&u))
}

/// Outcome of comparing a CH statistic with `[−p12(∞,∞), 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CHVerdict {
    pub statistic: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub satisfied: bool,
    /// Distance to the nearer bound; negative when a bound is crossed.
    pub margin: f64,
    /// Slack applied in the comparison (0 for exact inputs).
    pub tolerance: f64,
}

impl CHVerdict {
    pub fn new(statistic: f64, lower_bound: f64, tolerance: f64) -> Self {
        let upper_bound = 0.0;
        let margin = (statistic - lower_bound).min(upper_bound - statistic);
        CHVerdict {
            statistic,
            lower_bound,
            upper_bound,
            satisfied: margin >= -tolerance,
            margin,
            tolerance,
        }
    }
}

/// The six CH terms in order: `p12(a,b), p12(a,b′), p12(a′,b), p12(a′,b′),
/// p12(a′,∞), p12(∞,b)`, with their signs in the statistic.
pub fn ch_terms(quad: &SettingQuad) -> [(Setting, Setting, f64); 6] {
    let q = quad;
    [
        (q.a.clone(), q.b.clone(), 1.0),
        (q.a.clone(), q.b_prime.clone(), -1.0),
        (q.a_prime.clone(), q.b.clone(), 1.0),
        (q.a_prime.clone(), q.b_prime.clone(), 1.0),
        (q.a_prime.clone(), Setting::Removed, -1.0),
        (Setting::Removed, q.b.clone(), -1.0),
    ]
}

pub fn ch_statistic(pred: &dyn EnsemblePrediction, quad: &SettingQuad) -> Result<CHVerdict> {
    let mut statistic = 0.0;
    for (x, y, sign) in ch_terms(quad) {
        statistic += sign * pred.p12(&x, &y)?;
    }
    let lower = -pred.p12(&Setting::Removed, &Setting::Removed)?;
    let tolerance = if pred.is_exact() {
        0.0
    } else {
        BOUND_TOLERANCE
    };
    Ok(CHVerdict::new(statistic, lower, tolerance))
}

/// Ensemble probabilities of a model, integrated over ρ(λ) on demand.
#[derive(Debug)]
pub struct IntegratedPrediction<'m> {
    model: &'m dyn Model,
    nodes: Vec<(HiddenSample, f64)>,
    exact: bool,
}

impl IntegratedPrediction<'_> {
    fn integrate<F: Fn(&HiddenSample) -> Result<f64>>(&self, f: F) -> Result<f64> {
        let mut total = 0.0;
        for (lambda, w) in &self.nodes {
            total += w * f(lambda)?;
        }
        Ok(total)
    }

    pub fn model(&self) -> &dyn Model {
        self.model
    }
}

impl EnsemblePrediction for IntegratedPrediction<'_> {
    fn p1(&self, a: &Setting) -> Result<f64> {
        self.integrate(|l| self.model.p1(l, a))
    }

    fn p2(&self, b: &Setting) -> Result<f64> {
        self.integrate(|l| self.model.p2(l, b))
    }

    fn p12(&self, a: &Setting, b: &Setting) -> Result<f64> {
        self.integrate(|l| self.model.joint(l, a, b))
    }

    fn is_exact(&self) -> bool {
        self.exact
    }
}

/// Integrates a model over ρ(λ): an exact weighted sum for discrete λ, the
/// midpoint rule for continuous λ (which then requires `plan`).
pub fn ensemble_prediction<'m>(
    model: &'m dyn Model,
    plan: Option<&IntegrationPlan>,
) -> Result<IntegratedPrediction<'m>> {
    let space = model.lambda_space();
    Ok(IntegratedPrediction {
        model,
        nodes: space.nodes(plan)?,
        exact: space.is_discrete(),
    })
}

/// `p(λ, s) ≤ p(λ, ∞)` on both wings for every listed setting.
pub fn no_enhancement_check(
    model: &dyn Model,
    lambda: &HiddenSample,
    settings: &[Setting],
) -> Result<bool> {
    let removed1 = model.p1(lambda, &Setting::Removed)?;
    let removed2 = model.p2(lambda, &Setting::Removed)?;
    let mut ok = true;
    for s in settings {
        ok &= model.p1(lambda, s)? <= removed1;
        ok &= model.p2(lambda, s)? <= removed2;
    }
    Ok(ok)
}

/// Largest `|defect|` at which a model counts as factorable.
pub const FACTORABLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct DefectEntry {
    pub lambda: HiddenSample,
    pub a: Setting,
    pub b: Setting,
    pub joint: f64,
    pub product: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DefectReport {
    pub model: String,
    /// Every λ was visited (discrete models); otherwise λ was sampled and
    /// `entries` keeps the worst point per setting pair.
    pub exhaustive: bool,
    pub samples: usize,
    pub entries: Vec<DefectEntry>,
    pub max_abs_defect: f64,
}

impl DefectReport {
    pub fn is_factorable(&self) -> bool {
        self.max_abs_defect <= FACTORABLE_TOLERANCE
    }
}

/// Factorability defects over λ for every pair in `wing1 × wing2`.
pub fn defect_report(
    model: &dyn Model,
    wing1: &[Setting],
    wing2: &[Setting],
    samples: usize,
    seed: u64,
) -> Result<DefectReport> {
    let entry = |lambda: HiddenSample, a: &Setting, b: &Setting| -> Result<DefectEntry> {
        let joint = model.joint(&lambda, a, b)?;
        let product = model.p1(&lambda, a)? * model.p2(&lambda, b)?;
        Ok(DefectEntry {
            lambda,
            a: a.clone(),
            b: b.clone(),
            joint,
            product,
            defect: joint - product,
        })
    };
    let space = model.lambda_space();
    let mut entries = Vec::new();
    let (exhaustive, visited) = if space.is_discrete() {
        let nodes = space.nodes(None)?;
        for (lambda, _) in &nodes {
            for a in wing1 {
                for b in wing2 {
                    entries.push(entry(*lambda, a, b)?);
                }
            }
        }
        (true, nodes.len())
    } else {
        if samples == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be at least 1".into(),
            ));
        }
        let lambdas: Vec<_> = (0..samples)
            .map(|i| {
                space.sample(&mut crate::rng::trial_rng(
                    seed,
                    crate::rng::streams::FACTORABILITY,
                    i as u64,
                ))
            })
            .collect();
        for a in wing1 {
            for b in wing2 {
                let mut worst: Option<DefectEntry> = None;
                for lambda in &lambdas {
                    let e = entry(*lambda, a, b)?;
                    if worst
                        .as_ref()
                        .is_none_or(|w| e.defect.abs() > w.defect.abs())
                    {
                        worst = Some(e);
                    }
                }
                entries.extend(worst);
            }
        }
        (false, samples)
    };
    let max_abs_defect = entries.iter().map(|e| e.defect.abs()).fold(0.0, f64::max);
    Ok(DefectReport {
        model: model.name().to_string(),
        exhaustive,
        samples: visited,
        entries,
        max_abs_defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_counterexample, builtin_deterministic, builtin_malus_lhv, builtin_quantum,
        LambdaSpace, Wing,
    };
    use std::f64::consts::{PI, SQRT_2};

    fn lbl(s: &str) -> Setting {
        Setting::label(s)
    }
    const L0: HiddenSample = HiddenSample::Discrete(0);

    #[test]
    fn u_value_examples() {
        assert_eq!(u_value(1.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(u_value(0.0, 1.0, 1.0, 0.0).unwrap(), -1.0);
        assert_eq!(u_value(0.5, 0.5, 0.5, 0.5).unwrap(), -0.5);
        assert!(matches!(
            u_value(1.2, 0.0, 0.0, 0.0),
            Err(Error::Domain { .. })
        ));
        assert!(u_value(0.0, 0.0, 0.0, -0.01).is_err());
        assert!(u_value(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sixteen_cases_split_evenly() {
        let cases = enumerate_deterministic_u();
        assert_eq!(cases.len(), 16);
        assert_eq!(dichotomy_counts(&cases), (8, 8));
        assert_eq!(cases[0].u, 0);
        assert_eq!(cases[15].u, 0);
        assert_eq!(UCase::new(1, 1, 0, 0).u, -1);
        for c in &cases {
            let f = u_value(c.x as f64, c.x_prime as f64, c.y as f64, c.y_prime as f64).unwrap();
            assert_eq!(f, c.u as f64);
        }
    }

    #[test]
    fn counterexample_defects() {
        let m = builtin_counterexample();
        assert_eq!(
            factorability_defect(&m, &L0, &lbl("up"), &lbl("up")).unwrap(),
            0.25
        );
        assert_eq!(
            factorability_defect(&m, &L0, &lbl("up"), &lbl("down")).unwrap(),
            -0.25
        );
        assert!(factorability_defect(&m, &L0, &lbl("left"), &lbl("up")).is_err());
    }

    #[test]
    fn defect_reports() {
        let ce = builtin_counterexample();
        let both = [lbl("up"), lbl("down")];
        let r = defect_report(&ce, &both, &both, 0, 0).unwrap();
        assert!(r.exhaustive);
        assert_eq!(r.entries.len(), 4);
        assert_eq!(r.max_abs_defect, 0.25);
        assert!(!r.is_factorable());

        let m = builtin_malus_lhv();
        let angles = m.settings(Wing::One);
        let r = defect_report(&m, &angles, &angles, 500, 1).unwrap();
        assert!(!r.exhaustive);
        assert_eq!(r.entries.len(), 64);
        assert!(r.is_factorable());
        assert!(defect_report(&m, &angles, &angles, 0, 1).is_err());
    }

    #[test]
    fn malus_defect_is_zero() {
        let m = builtin_malus_lhv();
        for k in 0..20 {
            let l = HiddenSample::Continuous(0.157 * k as f64);
            let d = factorability_defect(
                &m,
                &l,
                &Setting::degrees(3.0 * k as f64),
                &Setting::degrees(50.0),
            )
            .unwrap();
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn u_bounds_examples() {
        let malus = builtin_malus_lhv();
        let quad = SettingQuad::new(
            Setting::angle(0.0),
            Setting::angle(PI / 4.0),
            Setting::angle(PI / 8.0),
            Setting::angle(3.0 * PI / 8.0),
        );
        assert!(u_bounds_check(&malus, &HiddenSample::Continuous(0.0), &quad).unwrap());

        let ce = builtin_counterexample();
        let q = SettingQuad::new(lbl("up"), lbl("down"), lbl("up"), lbl("down"));
        assert_eq!(u_at(&ce, &L0, &q).unwrap(), -0.5);
        assert!(u_bounds_check(&ce, &L0, &q).unwrap());

        let det = builtin_deterministic(
            &[(lbl("a"), false), (lbl("a'"), true)],
            &[(lbl("b"), true), (lbl("b'"), false)],
        )
        .unwrap();
        let q = SettingQuad::new(lbl("a"), lbl("a'"), lbl("b"), lbl("b'"));
        assert_eq!(u_at(&det, &L0, &q).unwrap(), -1.0);
        assert!(u_bounds_check(&det, &L0, &q).unwrap());
    }

    #[test]
    fn quantum_violates_ch() {
        let q = builtin_quantum(1.0).unwrap();
        let v = ch_statistic(&q, &SettingQuad::degrees(0.0, 45.0, 22.5, 67.5)).unwrap();
        assert!((v.statistic - (SQRT_2 - 1.0) / 2.0).abs() < 1e-12);
        assert!((v.statistic - 0.2071068).abs() < 1e-7);
        assert!(!v.satisfied);
        assert!(v.margin < 0.0);
        assert_eq!(v.lower_bound, -1.0);
    }

    #[test]
    fn counterexample_ch_boundary_and_zero() {
        let m = builtin_counterexample();
        let pred = ensemble_prediction(&m, None).unwrap();
        assert!(pred.is_exact());
        let v = ch_statistic(
            &pred,
            &SettingQuad::new(lbl("up"), lbl("down"), lbl("down"), lbl("up")),
        )
        .unwrap();
        assert_eq!(v.statistic, -1.0);
        assert!(v.satisfied);
        assert_eq!(v.margin, 0.0);
        let v = ch_statistic(
            &pred,
            &SettingQuad::new(lbl("up"), lbl("down"), lbl("up"), lbl("down")),
        )
        .unwrap();
        assert_eq!(v.statistic, 0.0);
        assert!(v.satisfied);
        assert_eq!(pred.p12(&lbl("up"), &lbl("up")).unwrap(), 0.5);
    }

    #[test]
    fn malus_ensemble_matches_analytic_integral() {
        let m = builtin_malus_lhv();
        assert!(matches!(
            ensemble_prediction(&m, None),
            Err(Error::MissingQuadrature)
        ));
        let pred = ensemble_prediction(&m, Some(&IntegrationPlan::default())).unwrap();
        for k in 0..12 {
            let a = 15.0 * k as f64;
            let b = 7.0 * k as f64 + 3.0;
            let truth = 0.25 + 0.125 * (2.0 * (a - b).to_radians()).cos();
            let got = pred
                .p12(&Setting::degrees(a), &Setting::degrees(b))
                .unwrap();
            assert!((got - truth).abs() <= 1e-9, "{a} {b}: {got} vs {truth}");
            assert!((pred.p1(&Setting::degrees(a)).unwrap() - 0.5).abs() <= 1e-12);
        }
        let v = ch_statistic(&pred, &SettingQuad::degrees(0.0, 45.0, 22.5, 67.5)).unwrap();
        assert!((v.statistic - (SQRT_2 / 4.0 - 0.5)).abs() <= 1e-9);
        assert!(v.satisfied);
    }

    #[test]
    fn no_enhancement_examples() {
        let malus = builtin_malus_lhv();
        let angles: Vec<_> = (0..10).map(|k| Setting::degrees(17.0 * k as f64)).collect();
        assert!(no_enhancement_check(&malus, &HiddenSample::Continuous(0.4), &angles).unwrap());
        let ce = builtin_counterexample();
        assert!(no_enhancement_check(&ce, &L0, &[lbl("up"), lbl("down")]).unwrap());
        assert!(no_enhancement_check(&ce, &L0, &[lbl("left")]).is_err());

        #[derive(Debug)]
        struct Enhanced(LambdaSpace);
        impl Model for Enhanced {
            fn name(&self) -> &str {
                "enhanced"
            }
            fn lambda_space(&self) -> &LambdaSpace {
                &self.0
            }
            fn efficiency(&self) -> f64 {
                0.8
            }
            fn settings(&self, _: Wing) -> Vec<Setting> {
                vec![Setting::label("a")]
            }
            fn response(&self, _: Wing, _: &HiddenSample, _: &Setting) -> Result<f64> {
                Ok(0.9)
            }
        }
        let m = Enhanced(LambdaSpace::discrete(vec![1.0]));
        assert!(!no_enhancement_check(&m, &L0, &[lbl("a")]).unwrap());
    }

    #[test]
    fn verdict_margin_sign() {
        let v = CHVerdict::new(-0.25, -1.0, 0.0);
        assert_eq!(v.margin, 0.25);
        assert!(v.satisfied);
        let v = CHVerdict::new(-1.5, -1.0, 0.0);
        assert_eq!(v.margin, -0.5);
        assert!(!v.satisfied);
    }

    #[test]
    fn quad_parsing() {
        let q = SettingQuad::parse("0,45,22.5,67.5").unwrap();
        assert!(q.b.matches(&Setting::degrees(22.5)));
        assert!(SettingQuad::parse("up,down,up").is_err());
    }
}
