//! Embedding stochastic models into deterministic ones.
//!
//! An auxiliary variable μ, uniform on `(0, 1]`, turns a response
//! probability `p` into the indicator `μ ≤ p`, whose μ-average is `p` again.
//! With one μ per wing ([`DeterminizeMode::Independent`]) every marginal is
//! preserved and the λ-level joint becomes `p1·p2`. With one shared μ cut into
//! four intervals ([`DeterminizeMode::Coupled`]) a given λ-level joint is also
//! reproduced.
//!
//! A single shared μ cannot reproduce every setting pair of a non-factorable
//! model at once. Coupled mode is anchored on one wing-1 setting: it is exact
//! for `joint(λ, anchor, b)` for every wing-2 `b`, and the report names the
//! pair it was built for.

use std::fmt;

use rand::distr::OpenClosed01;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{ensemble_prediction, u_value, SettingQuad};
use crate::model::{EnsemblePrediction, HiddenSample, Model, Setting, Wing};
use crate::montecarlo::{tally, Estimate, MCPlan, OutcomeSampler, SIGMA_GATE};
use crate::quadrature::IntegrationPlan;
use crate::rng::{streams, TrialRng};

/// Ensemble marginal agreement required under quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-9;

/// Per-λ slack for coupled mode, whose wing-2 measure is a difference of cuts.
pub const COUPLED_PER_LAMBDA_TOLERANCE: f64 = 1e-12;

/// Shared-μ partition of `(0, 1]` into intervals of lengths
/// `(j, p1 − j, p2 − j, 1 − p1 − p2 + j)` for outcomes `(1,1), (1,0), (0,1), (0,0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingPartition {
    cuts: [f64; 3],
}

impl CouplingPartition {
    /// `joint` is clamped into its Fréchet interval so the cuts stay ordered.
    pub fn new(p1: f64, p2: f64, joint: f64) -> Self {
        let p1 = p1.clamp(0.0, 1.0);
        let p2 = p2.clamp(0.0, 1.0);
        let upper = p1.min(p2);
        let j = joint.clamp((p1 + p2 - 1.0).clamp(0.0, upper), upper);
        let third = (p1 + p2 - j).clamp(p1, 1.0);
        CouplingPartition {
            cuts: [j, p1, third],
        }
    }

    pub fn cuts(&self) -> [f64; 3] {
        self.cuts
    }

    pub fn lengths(&self) -> [f64; 4] {
        let [c0, c1, c2] = self.cuts;
        [c0, c1 - c0, c2 - c1, 1.0 - c2]
    }

    /// Outcome pair for μ; intervals are closed on the right so that
    /// `μ = p` exactly yields a detection.
    pub fn outcome(&self, mu: f64) -> (bool, bool) {
        let [c0, c1, c2] = self.cuts;
        if mu <= c0 {
            (true, true)
        } else if mu <= c1 {
            (true, false)
        } else if mu <= c2 {
            (false, true)
        } else {
            (false, false)
        }
    }

    /// μ-measure of wing 2 firing: `(0, c0] ∪ (c1, c2]`.
    pub fn wing2_measure(&self) -> f64 {
        let [c0, c1, c2] = self.cuts;
        c0 + (c2 - c1)
    }

    /// μ-measure of wing 2 firing together with `μ ≤ x`.
    pub fn wing2_overlap(&self, x: f64) -> f64 {
        let [c0, c1, c2] = self.cuts;
        x.min(c0) + (x.min(c2) - c1).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeterminizeMode {
    /// μ₁, μ₂ independent, one per wing.
    Independent,
    /// One μ shared by both wings, partitioned per λ from the joint of
    /// `(a, b)`; wing 2 at any setting `t` uses the partition of `(a, t)`.
    Coupled { a: Setting, b: Setting },
}

impl fmt::Display for DeterminizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeterminizeMode::Independent => f.write_str("independent"),
            DeterminizeMode::Coupled { a, b } => write!(f, "coupled({a},{b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Mu {
    Independent { mu1: f64, mu2: f64 },
    Coupled(f64),
}

/// A point `(λ, μ…)` of the extended hidden space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedSample {
    pub lambda: HiddenSample,
    pub mu: Mu,
}

/// A model over `(λ, μ…)` whose responses are 0 or 1.
#[derive(Debug, Clone)]
pub struct DeterminizedModel<'m> {
    base: &'m dyn Model,
    mode: DeterminizeMode,
}

pub fn determinize(model: &dyn Model, mode: DeterminizeMode) -> Result<DeterminizedModel<'_>> {
    if let DeterminizeMode::Coupled { a, b } = &mode {
        if a.is_removed() || b.is_removed() {
            return Err(Error::InvalidArgument(
                "coupled determinization is built for a pair of registered settings".into(),
            ));
        }
        // Surface unknown settings now rather than at first evaluation.
        let probe = model
            .lambda_space()
            .nodes(Some(&IntegrationPlan { panels: 1 }))?;
        if let Some((l, _)) = probe.first() {
            model.joint(l, a, b)?;
        }
    }
    Ok(DeterminizedModel { base: model, mode })
}

impl<'m> DeterminizedModel<'m> {
    pub fn base(&self) -> &'m dyn Model {
        self.base
    }

    pub fn mode(&self) -> &DeterminizeMode {
        &self.mode
    }

    /// The setting pair a coupled model reproduces exactly.
    pub fn pair(&self) -> Option<(&Setting, &Setting)> {
        match &self.mode {
            DeterminizeMode::Independent => None,
            DeterminizeMode::Coupled { a, b } => Some((a, b)),
        }
    }

    pub fn sample(&self, rng: &mut TrialRng) -> ExtendedSample {
        let lambda = self.base.lambda_space().sample(rng);
        let mu = match self.mode {
            DeterminizeMode::Independent => Mu::Independent {
                mu1: rng.sample(OpenClosed01),
                mu2: rng.sample(OpenClosed01),
            },
            DeterminizeMode::Coupled { .. } => Mu::Coupled(rng.sample(OpenClosed01)),
        };
        ExtendedSample { lambda, mu }
    }

    fn partition(
        &self,
        anchor: &Setting,
        lambda: &HiddenSample,
        b: &Setting,
    ) -> Result<CouplingPartition> {
        Ok(CouplingPartition::new(
            self.base.p1(lambda, anchor)?,
            self.base.p2(lambda, b)?,
            self.base.joint(lambda, anchor, b)?,
        ))
    }

    /// Binary response of `wing` at `setting`.
    pub fn response(&self, wing: Wing, sample: &ExtendedSample, setting: &Setting) -> Result<bool> {
        let lambda = &sample.lambda;
        match (&self.mode, sample.mu, wing) {
            (DeterminizeMode::Independent, Mu::Independent { mu1, .. }, Wing::One) => {
                Ok(mu1 <= self.base.p1(lambda, setting)?)
            }
            (DeterminizeMode::Independent, Mu::Independent { mu2, .. }, Wing::Two) => {
                Ok(mu2 <= self.base.p2(lambda, setting)?)
            }
            (DeterminizeMode::Coupled { .. }, Mu::Coupled(mu), Wing::One) => {
                Ok(mu <= self.base.p1(lambda, setting)?)
            }
            (DeterminizeMode::Coupled { a, .. }, Mu::Coupled(mu), Wing::Two) => {
                Ok(self.partition(a, lambda, setting)?.outcome(mu).1)
            }
            _ => Err(Error::InvalidArgument(
                "extended sample does not match the determinization mode".into(),
            )),
        }
    }

    pub fn responses(
        &self,
        sample: &ExtendedSample,
        a: &Setting,
        b: &Setting,
    ) -> Result<(bool, bool)> {
        Ok((
            self.response(Wing::One, sample, a)?,
            self.response(Wing::Two, sample, b)?,
        ))
    }

    /// `∫ p̃(λ, μ, s) dμ`, from the lengths of the firing intervals.
    pub fn marginal_measure(
        &self,
        wing: Wing,
        lambda: &HiddenSample,
        setting: &Setting,
    ) -> Result<f64> {
        match (&self.mode, wing) {
            (DeterminizeMode::Independent, _) | (DeterminizeMode::Coupled { .. }, Wing::One) => {
                // length of (0, p]
                self.base.prob(wing, lambda, setting)
            }
            (DeterminizeMode::Coupled { a, .. }, Wing::Two) => {
                Ok(self.partition(a, lambda, setting)?.wing2_measure())
            }
        }
    }

    /// `∫ p̃₁ p̃₂ dμ…` at λ.
    pub fn joint_measure(&self, lambda: &HiddenSample, a: &Setting, b: &Setting) -> Result<f64> {
        match &self.mode {
            DeterminizeMode::Independent => Ok(self.base.p1(lambda, a)? * self.base.p2(lambda, b)?),
            DeterminizeMode::Coupled { a: anchor, .. } => {
                let x = self.base.p1(lambda, a)?;
                Ok(self.partition(anchor, lambda, b)?.wing2_overlap(x))
            }
        }
    }
}

impl OutcomeSampler for DeterminizedModel<'_> {
    fn sample_pair(&self, rng: &mut TrialRng, a: &Setting, b: &Setting) -> Result<(bool, bool)> {
        let sample = self.sample(rng);
        self.responses(&sample, a, b)
    }

    fn sample_single(&self, rng: &mut TrialRng, wing: Wing, s: &Setting) -> Result<bool> {
        let sample = self.sample(rng);
        self.response(wing, &sample, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VerificationPlan {
    Quadrature(IntegrationPlan),
    MonteCarlo(MCPlan),
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginalDeviation {
    pub wing: Wing,
    pub setting: Setting,
    /// max over λ of `|∫ p̃ dμ − p(λ, s)|`.
    pub per_lambda: f64,
    pub base: f64,
    pub determinized: f64,
    pub ensemble: f64,
    pub stderr: Option<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointDeviation {
    pub a: Setting,
    pub b: Setting,
    /// max over λ of `|∫ p̃₁p̃₂ dμ − joint(λ, a, b)|`.
    pub per_lambda: f64,
    /// Whether this pair must be reproduced for the report to pass.
    pub required: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub model: String,
    pub mode: String,
    pub method: String,
    pub per_lambda_tolerance: f64,
    pub ensemble_tolerance: f64,
    pub marginals: Vec<MarginalDeviation>,
    pub joints: Vec<JointDeviation>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl EquivalenceReport {
    pub fn max_marginal_deviation(&self) -> f64 {
        self.marginals
            .iter()
            .map(|m| m.per_lambda.max(m.ensemble))
            .fold(0.0, f64::max)
    }

    pub fn joint_deviation(&self, a: &Setting, b: &Setting) -> Option<f64> {
        self.joints
            .iter()
            .find(|j| j.a.matches(a) && j.b.matches(b))
            .map(|j| j.per_lambda)
    }
}

/// Compares the determinized model's marginals (and λ-level joints) with the
/// base model's, on both wings for every listed setting.
pub fn verify_marginals(
    det: &DeterminizedModel<'_>,
    wing1: &[Setting],
    wing2: &[Setting],
    plan: &VerificationPlan,
) -> Result<EquivalenceReport> {
    let base = det.base();
    let space = base.lambda_space();
    let quadrature = match plan {
        VerificationPlan::Quadrature(q) => *q,
        VerificationPlan::MonteCarlo(_) => IntegrationPlan::default(),
    };
    let nodes = space.nodes(Some(&quadrature))?;
    let base_pred = ensemble_prediction(base, Some(&quadrature))?;
    let per_lambda_tolerance = match det.mode() {
        DeterminizeMode::Independent => 0.0,
        DeterminizeMode::Coupled { .. } => COUPLED_PER_LAMBDA_TOLERANCE,
    };

    let mut marginals = Vec::new();
    let mut pass = true;
    let mut index = 0u64;
    for (wing, settings) in [(Wing::One, wing1), (Wing::Two, wing2)] {
        for s in settings {
            let mut per_lambda: f64 = 0.0;
            let mut integrated = 0.0;
            for (lambda, w) in &nodes {
                let measure = det.marginal_measure(wing, lambda, s)?;
                per_lambda = per_lambda.max((measure - base.prob(wing, lambda, s)?).abs());
                integrated += w * measure;
            }
            let base_value = match wing {
                Wing::One => base_pred.p1(s)?,
                Wing::Two => base_pred.p2(s)?,
            };
            let (determinized, stderr, tolerance) = match plan {
                VerificationPlan::Quadrature(_) => (integrated, None, QUADRATURE_TOLERANCE),
                VerificationPlan::MonteCarlo(mc) => {
                    let stream = streams::MARGINALS_BASE + index;
                    let [hits, _] = tally::<2, _>(mc, stream, |rng| {
                        Ok(usize::from(!det.sample_single(rng, wing, s)?))
                    })?;
                    let est = Estimate::from_counts(hits, mc.trials, mc.seed);
                    // the base value itself carries quadrature error
                    (
                        est.value,
                        Some(est.stderr),
                        SIGMA_GATE * est.stderr + QUADRATURE_TOLERANCE,
                    )
                }
            };
            index += 1;
            let ensemble = (determinized - base_value).abs();
            pass &= per_lambda <= per_lambda_tolerance && ensemble <= tolerance;
            marginals.push(MarginalDeviation {
                wing,
                setting: s.clone(),
                per_lambda,
                base: base_value,
                determinized,
                ensemble,
                stderr,
                tolerance,
            });
        }
    }

    let anchor = det.pair().map(|(a, _)| a.clone());
    let mut joints = Vec::new();
    for a in wing1 {
        for b in wing2 {
            let mut worst: f64 = 0.0;
            for (lambda, _) in &nodes {
                let d = det.joint_measure(lambda, a, b)? - base.joint(lambda, a, b)?;
                worst = worst.max(d.abs());
            }
            let required = anchor.as_ref().is_some_and(|x| x.matches(a));
            if required {
                pass &= worst <= per_lambda_tolerance;
            }
            joints.push(JointDeviation {
                a: a.clone(),
                b: b.clone(),
                per_lambda: worst,
                required,
            });
        }
    }

    let mut notes = Vec::new();
    let worst_joint = joints.iter().map(|j| j.per_lambda).fold(0.0, f64::max);
    match det.mode() {
        DeterminizeMode::Independent if worst_joint > COUPLED_PER_LAMBDA_TOLERANCE => notes.push(format!(
            "independent mu reproduces p1*p2, not the lambda-level joint: max joint deviation {worst_joint} \
             is expected for a non-factorable model and does not affect the marginals"
        )),
        DeterminizeMode::Coupled { a, b } => notes.push(format!(
            "coupled mu built for pair ({a},{b}); joints are exact for wing-1 setting {a} only"
        )),
        _ => {}
    }

    let (method, ensemble_tolerance) = match plan {
        VerificationPlan::Quadrature(q) => (
            if space.is_discrete() {
                "exact-sum".to_string()
            } else {
                format!("midpoint-{}", q.panels)
            },
            QUADRATURE_TOLERANCE,
        ),
        VerificationPlan::MonteCarlo(mc) => (format!("monte-carlo-{}", mc.trials), SIGMA_GATE),
    };

    Ok(EquivalenceReport {
        model: base.name().to_string(),
        mode: det.mode().to_string(),
        method,
        per_lambda_tolerance,
        ensemble_tolerance,
        marginals,
        joints,
        notes,
        pass,
    })
}

/// Counts of U over sampled `(λ, μ…)` evaluated on binary responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UHistogram {
    pub minus_one: u64,
    pub zero: u64,
    /// Anything else; always zero for a correct implementation.
    pub other: u64,
}

impl UHistogram {
    pub fn total(&self) -> u64 {
        self.minus_one + self.zero + self.other
    }

    pub fn within_dichotomy(&self) -> bool {
        self.other == 0
    }
}

pub fn deterministic_u_audit(
    det: &DeterminizedModel<'_>,
    quad: &SettingQuad,
    sample_count: u64,
    seed: u64,
) -> Result<UHistogram> {
    deterministic_u_audit_with(det, quad, &MCPlan::new(sample_count, seed))
}

pub fn deterministic_u_audit_with(
    det: &DeterminizedModel<'_>,
    quad: &SettingQuad,
    plan: &MCPlan,
) -> Result<UHistogram> {
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let [minus_one, zero, other] = tally::<3, _>(plan, streams::U_AUDIT, |rng| {
        let sample = det.sample(rng);
        let u = u_value(
            bit(det.response(Wing::One, &sample, &quad.a)?),
            bit(det.response(Wing::One, &sample, &quad.a_prime)?),
            bit(det.response(Wing::Two, &sample, &quad.b)?),
            bit(det.response(Wing::Two, &sample, &quad.b_prime)?),
        )?;
        Ok(if u == -1.0 {
            0
        } else if u == 0.0 {
            1
        } else {
            2
        })
    })?;
    Ok(UHistogram {
        minus_one,
        zero,
        other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_counterexample, builtin_deterministic, builtin_malus_lhv};
    use crate::rng::trial_rng;

    fn lbl(s: &str) -> Setting {
        Setting::label(s)
    }
    const L0: HiddenSample = HiddenSample::Discrete(0);

    #[test]
    fn threshold_examples() {
        // a base with p1 = 0.3 at a single λ
        let table = crate::model::TableModel::new(
            "t",
            vec![lbl("a")],
            vec![lbl("b")],
            1.0,
            vec![crate::model::TableRow {
                weight: 1.0,
                p1: vec![0.3],
                p2: vec![0.6],
                joint: None,
            }],
        )
        .unwrap();
        let det = determinize(&table, DeterminizeMode::Independent).unwrap();
        let at = |mu1| ExtendedSample {
            lambda: L0,
            mu: Mu::Independent { mu1, mu2: 0.5 },
        };
        assert!(det.response(Wing::One, &at(0.2), &lbl("a")).unwrap());
        assert!(!det.response(Wing::One, &at(0.7), &lbl("a")).unwrap());
        assert!(det.response(Wing::One, &at(0.3), &lbl("a")).unwrap());
    }

    #[test]
    fn coupled_counterexample_intervals() {
        let ce = builtin_counterexample();
        let det = determinize(
            &ce,
            DeterminizeMode::Coupled {
                a: lbl("up"),
                b: lbl("up"),
            },
        )
        .unwrap();
        let at = |mu| ExtendedSample {
            lambda: L0,
            mu: Mu::Coupled(mu),
        };
        assert_eq!(
            det.responses(&at(0.25), &lbl("up"), &lbl("up")).unwrap(),
            (true, true)
        );
        assert_eq!(
            det.responses(&at(0.75), &lbl("up"), &lbl("up")).unwrap(),
            (false, false)
        );
        let part = CouplingPartition::new(0.5, 0.5, 0.5);
        assert_eq!(part.lengths(), [0.5, 0.0, 0.0, 0.5]);
        assert_eq!(det.joint_measure(&L0, &lbl("up"), &lbl("up")).unwrap(), 0.5);
        assert_eq!(
            det.joint_measure(&L0, &lbl("up"), &lbl("down")).unwrap(),
            0.0
        );
    }

    #[test]
    fn partition_lengths_match_the_four_cells() {
        let p = CouplingPartition::new(0.7, 0.4, 0.25);
        let [a, b, c, d] = p.lengths();
        assert!((a - 0.25).abs() < 1e-15);
        assert!((b - 0.45).abs() < 1e-15);
        assert!((c - 0.15).abs() < 1e-15);
        assert!((d - 0.15).abs() < 1e-15);
        assert!((p.wing2_measure() - 0.4).abs() < 1e-15);
        assert_eq!(p.wing2_overlap(0.7), 0.25);
        assert_eq!(p.outcome(0.7), (true, false));
        assert_eq!(p.outcome(0.8), (false, true));
        assert_eq!(p.outcome(1.0), (false, false));
    }

    #[test]
    fn independent_mode_preserves_marginals_exactly_per_lambda() {
        let ce = builtin_counterexample();
        let det = determinize(&ce, DeterminizeMode::Independent).unwrap();
        let report = verify_marginals(
            &det,
            &[lbl("up"), lbl("down")],
            &[lbl("up"), lbl("down")],
            &VerificationPlan::Quadrature(IntegrationPlan::default()),
        )
        .unwrap();
        assert!(report.pass);
        assert!(report
            .marginals
            .iter()
            .all(|m| m.per_lambda == 0.0 && m.ensemble == 0.0));
        assert_eq!(report.joint_deviation(&lbl("up"), &lbl("up")), Some(0.25));
        assert_eq!(report.joint_deviation(&lbl("up"), &lbl("down")), Some(0.25));
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn coupled_mode_reproduces_counterexample_joint() {
        let ce = builtin_counterexample();
        let det = determinize(
            &ce,
            DeterminizeMode::Coupled {
                a: lbl("up"),
                b: lbl("up"),
            },
        )
        .unwrap();
        let report = verify_marginals(
            &det,
            &[lbl("up"), lbl("down")],
            &[lbl("up"), lbl("down")],
            &VerificationPlan::Quadrature(IntegrationPlan::default()),
        )
        .unwrap();
        assert!(report.pass, "{report:#?}");
        assert_eq!(report.joint_deviation(&lbl("up"), &lbl("up")), Some(0.0));
        assert_eq!(report.joint_deviation(&lbl("up"), &lbl("down")), Some(0.0));
    }

    #[test]
    fn malus_marginals_under_quadrature() {
        let m = builtin_malus_lhv();
        let det = determinize(&m, DeterminizeMode::Independent).unwrap();
        let settings: Vec<_> = [0.0, 22.5, 45.0, 67.5].map(Setting::degrees).to_vec();
        let report = verify_marginals(
            &det,
            &settings,
            &settings,
            &VerificationPlan::Quadrature(IntegrationPlan::default()),
        )
        .unwrap();
        assert!(report.pass);
        assert!(report.max_marginal_deviation() <= 1e-9);
        // the product joint is what malus has anyway
        assert!(report.joints.iter().all(|j| j.per_lambda == 0.0));
    }

    #[test]
    fn responses_are_binary_and_audit_dichotomous() {
        let m = builtin_malus_lhv();
        let det = determinize(&m, DeterminizeMode::Independent).unwrap();
        let quad = SettingQuad::degrees(0.0, 45.0, 22.5, 67.5);
        let h = deterministic_u_audit(&det, &quad, 20_000, 11).unwrap();
        assert_eq!(h.total(), 20_000);
        assert!(h.within_dichotomy());
        assert_eq!(h, deterministic_u_audit(&det, &quad, 20_000, 11).unwrap());

        let mut rng = trial_rng(1, 0, 0);
        let s = det.sample(&mut rng);
        assert!(matches!(s.mu, Mu::Independent { .. }));
    }

    #[test]
    fn deterministic_base_audits_to_minus_one() {
        let m = builtin_deterministic(
            &[(lbl("a"), false), (lbl("a'"), true)],
            &[(lbl("b"), true), (lbl("b'"), false)],
        )
        .unwrap();
        let quad = SettingQuad::new(lbl("a"), lbl("a'"), lbl("b"), lbl("b'"));
        for mode in [
            DeterminizeMode::Independent,
            DeterminizeMode::Coupled {
                a: lbl("a"),
                b: lbl("b"),
            },
        ] {
            let det = determinize(&m, mode).unwrap();
            let h = deterministic_u_audit(&det, &quad, 5_000, 2).unwrap();
            assert_eq!(h.minus_one, 5_000);
        }
    }

    #[test]
    fn coupled_requires_registered_pair() {
        let ce = builtin_counterexample();
        assert!(determinize(
            &ce,
            DeterminizeMode::Coupled {
                a: lbl("left"),
                b: lbl("up")
            }
        )
        .is_err());
        assert!(determinize(
            &ce,
            DeterminizeMode::Coupled {
                a: Setting::Removed,
                b: lbl("up")
            }
        )
        .is_err());
    }
}
