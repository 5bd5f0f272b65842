//! Hidden-variable spaces, response models and ensemble predictions.
//!
//! A [`Model`] assigns to every hidden state `λ` and analyzer [`Setting`] the
//! probability that a count is triggered on each wing, together with the
//! probability that both are triggered. Nothing here assumes the joint factors;
//! factorability is something the `inequality` module measures.

mod malus;
mod quantum;
mod table;

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::quadrature::{midpoint_nodes, IntegrationPlan};
use crate::rng::{streams, trial_rng};

pub use malus::{builtin_malus_lhv, MalusModel};
pub use quantum::{builtin_quantum, QuantumPrediction};
pub use table::{
    builtin_counterexample, builtin_deterministic, load_model, load_model_file, TableModel,
    TableRow,
};

/// Slack allowed on Fréchet bounds, which are usually computed from sums of
/// inexact probabilities.
pub const FRECHET_TOLERANCE: f64 = 1e-12;

/// Settings closer than this (in radians, modulo π) are the same polarizer angle.
const ANGLE_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Wing {
    One,
    Two,
}

impl fmt::Display for Wing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wing::One => f.write_str("1"),
            Wing::Two => f.write_str("2"),
        }
    }
}

/// An analyzer configuration on one wing.
#[derive(Debug, Clone, PartialEq)]
pub enum Setting {
    /// Polarizer angle in radians, always in `[0, π)`.
    Angle(f64),
    /// A symbolic setting such as `up` or `down`.
    Label(String),
    /// Polarizer absent.
    Removed,
}

impl Setting {
    /// Polarizer angle in radians, reduced modulo π. `rad` must be finite.
    pub fn angle(rad: f64) -> Self {
        debug_assert!(rad.is_finite());
        let mut r = rad.rem_euclid(PI);
        if r >= PI {
            r = 0.0;
        }
        Setting::Angle(r)
    }

    pub fn degrees(deg: f64) -> Self {
        Setting::angle(deg.to_radians())
    }

    pub fn label(name: impl Into<String>) -> Self {
        Setting::Label(name.into())
    }

    /// Parses a user token: a number is an angle in degrees, `removed`/`inf`
    /// is the absent polarizer, anything else is a label.
    pub fn parse(token: &str) -> Result<Self> {
        let token = token.trim();
        if token.is_empty() {
            return Err(Error::InvalidArgument("empty setting".into()));
        }
        match token.to_ascii_lowercase().as_str() {
            "removed" | "inf" | "infinity" | "∞" => return Ok(Setting::Removed),
            _ => {}
        }
        if let Ok(deg) = token.parse::<f64>() {
            if !deg.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite angle `{token}`"
                )));
            }
            return Ok(Setting::degrees(deg));
        }
        Ok(Setting::Label(token.to_string()))
    }

    pub fn is_removed(&self) -> bool {
        matches!(self, Setting::Removed)
    }

    /// Angle in degrees, if this is an angle setting.
    pub fn as_degrees(&self) -> Option<f64> {
        match self {
            Setting::Angle(r) => Some(r.to_degrees()),
            _ => None,
        }
    }

    /// Equality used for lookups: angles match modulo π within a tiny tolerance.
    pub fn matches(&self, other: &Setting) -> bool {
        match (self, other) {
            (Setting::Angle(x), Setting::Angle(y)) => {
                let d = (x - y).rem_euclid(PI);
                d.min(PI - d) <= ANGLE_MATCH_TOLERANCE
            }
            (Setting::Label(x), Setting::Label(y)) => x == y,
            (Setting::Removed, Setting::Removed) => true,
            _ => false,
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setting::Angle(r) => {
                let deg = (r.to_degrees() * 1e9).round() / 1e9;
                write!(f, "{deg}")
            }
            Setting::Label(l) => f.write_str(l),
            Setting::Removed => f.write_str("removed"),
        }
    }
}

impl Serialize for Setting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// One draw of the hidden state `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HiddenSample {
    /// Row index into a discrete λ table.
    Discrete(usize),
    /// A point of a continuous λ space (the polarization angle for the
    /// builtin continuous model).
    Continuous(f64),
}

impl fmt::Display for HiddenSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HiddenSample::Discrete(i) => write!(f, "#{i}"),
            HiddenSample::Continuous(x) => write!(f, "{x}"),
        }
    }
}

/// The space λ ranges over, together with its density ρ(λ).
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpace {
    /// Finitely many states with nonnegative weights summing to one.
    Discrete {
        weights: Vec<f64>,
        cumulative: Vec<f64>,
    },
    /// λ uniform on `[0, π)`.
    UniformAngle,
}

impl LambdaSpace {
    pub fn discrete(weights: Vec<f64>) -> Self {
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        LambdaSpace::Discrete {
            weights,
            cumulative,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, LambdaSpace::Discrete { .. })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HiddenSample {
        match self {
            LambdaSpace::Discrete { cumulative, .. } => {
                let u: f64 = rng.random();
                let total = cumulative.last().copied().unwrap_or(1.0);
                let target = u * total;
                let idx = cumulative.partition_point(|&c| c <= target);
                HiddenSample::Discrete(idx.min(cumulative.len().saturating_sub(1)))
            }
            LambdaSpace::UniformAngle => HiddenSample::Continuous(rng.random::<f64>() * PI),
        }
    }

    /// Weighted nodes that integrate against ρ(λ). Discrete spaces return every
    /// state with its weight (an exact sum); continuous spaces need a plan.
    pub fn nodes(&self, plan: Option<&IntegrationPlan>) -> Result<Vec<(HiddenSample, f64)>> {
        match self {
            LambdaSpace::Discrete { weights, .. } => Ok(weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (HiddenSample::Discrete(i), w))
                .collect()),
            LambdaSpace::UniformAngle => {
                let plan = plan.ok_or(Error::MissingQuadrature)?;
                // ρ = 1/π on [0, π): each panel carries weight 1/n.
                Ok(midpoint_nodes(0.0, PI, plan.panels)?
                    .into_iter()
                    .map(|(x, w)| (HiddenSample::Continuous(x), w / PI))
                    .collect())
            }
        }
    }
}

/// A local hidden-variable model.
///
/// Implementors supply the per-λ response of each wing for registered
/// (non-removed) settings, and optionally a correlated λ-level joint. The
/// removed-polarizer setting is handled here: it always has probability
/// [`Model::efficiency`] and is independent of the other wing.
pub trait Model: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    fn lambda_space(&self) -> &LambdaSpace;

    /// Detection probability with the polarizer removed.
    fn efficiency(&self) -> f64 {
        1.0
    }

    /// Settings the model is defined for on `wing`, excluding [`Setting::Removed`].
    /// Continuous-angle models return a representative grid.
    fn settings(&self, wing: Wing) -> Vec<Setting>;

    /// Response probability for a non-removed setting.
    fn response(&self, wing: Wing, lambda: &HiddenSample, setting: &Setting) -> Result<f64>;

    /// A λ-level joint that differs from the product, if any. `None` means
    /// the model is factorable at this point.
    fn correlated_joint(
        &self,
        _lambda: &HiddenSample,
        _a: &Setting,
        _b: &Setting,
    ) -> Result<Option<f64>> {
        Ok(None)
    }

    fn prob(&self, wing: Wing, lambda: &HiddenSample, setting: &Setting) -> Result<f64> {
        match setting {
            Setting::Removed => Ok(self.efficiency()),
            s => self.response(wing, lambda, s),
        }
    }

    fn p1(&self, lambda: &HiddenSample, a: &Setting) -> Result<f64> {
        self.prob(Wing::One, lambda, a)
    }

    fn p2(&self, lambda: &HiddenSample, b: &Setting) -> Result<f64> {
        self.prob(Wing::Two, lambda, b)
    }

    /// Probability that both counts are triggered at λ.
    fn joint(&self, lambda: &HiddenSample, a: &Setting, b: &Setting) -> Result<f64> {
        let x = self.p1(lambda, a)?;
        let y = self.p2(lambda, b)?;
        if !a.is_removed() && !b.is_removed() {
            if let Some(j) = self.correlated_joint(lambda, a, b)? {
                return Ok(j);
            }
        }
        Ok(x * y)
    }
}

/// Ensemble-level probabilities, after integrating over ρ(λ).
pub trait EnsemblePrediction: Send + Sync {
    fn p1(&self, a: &Setting) -> Result<f64>;
    fn p2(&self, b: &Setting) -> Result<f64>;
    fn p12(&self, a: &Setting, b: &Setting) -> Result<f64>;

    /// True when the values are exact sums of exactly representable terms,
    /// so bound checks need no tolerance.
    fn is_exact(&self) -> bool {
        false
    }
}

/// Fréchet interval `[max(0, p1+p2-1), min(p1, p2)]` for a pair joint.
pub fn frechet_bounds(p1: f64, p2: f64) -> (f64, f64) {
    ((p1 + p2 - 1.0).max(0.0), p1.min(p2))
}

pub fn within_frechet(p1: f64, p2: f64, joint: f64) -> bool {
    let (lo, hi) = frechet_bounds(p1, p2);
    joint >= lo - FRECHET_TOLERANCE && joint <= hi + FRECHET_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    SingleOutOfRange,
    JointOutOfRange,
    JointBelowFrechet,
    JointAboveFrechet,
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub lambda: HiddenSample,
    pub wing: Option<Wing>,
    pub a: Setting,
    pub b: Option<Setting>,
    pub kind: ViolationKind,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub model: String,
    pub samples: usize,
    pub checks: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

fn with_removed(mut settings: Vec<Setting>) -> Vec<Setting> {
    settings.push(Setting::Removed);
    settings
}

/// Samples `sample_count` hidden states and checks the range and Fréchet
/// invariants for every pair of registered settings (including removed).
pub fn validate_model(
    model: &dyn Model,
    sample_count: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(Error::InvalidArgument(
            "sample_count must be at least 1".into(),
        ));
    }
    let wing1 = with_removed(model.settings(Wing::One));
    let wing2 = with_removed(model.settings(Wing::Two));
    let mut violations = Vec::new();
    let mut checks = 0u64;

    for i in 0..sample_count {
        let mut rng = trial_rng(seed, streams::VALIDATE, i as u64);
        let lambda = model.lambda_space().sample(&mut rng);

        let mut singles = |wing: Wing, settings: &[Setting]| -> Result<Vec<f64>> {
            settings
                .iter()
                .map(|s| {
                    let p = model.prob(wing, &lambda, s)?;
                    checks += 1;
                    if !(0.0..=1.0).contains(&p) {
                        violations.push(Violation {
                            lambda,
                            wing: Some(wing),
                            a: s.clone(),
                            b: None,
                            kind: ViolationKind::SingleOutOfRange,
                            value: p,
                        });
                    }
                    Ok(p)
                })
                .collect()
        };
        let p1s = singles(Wing::One, &wing1)?;
        let p2s = singles(Wing::Two, &wing2)?;

        for (a, &x) in wing1.iter().zip(&p1s) {
            for (b, &y) in wing2.iter().zip(&p2s) {
                let j = model.joint(&lambda, a, b)?;
                checks += 1;
                let (lo, hi) = frechet_bounds(x, y);
                let kind = if !(0.0..=1.0).contains(&j) {
                    Some(ViolationKind::JointOutOfRange)
                } else if j < lo - FRECHET_TOLERANCE {
                    Some(ViolationKind::JointBelowFrechet)
                } else if j > hi + FRECHET_TOLERANCE {
                    Some(ViolationKind::JointAboveFrechet)
                } else {
                    None
                };
                if let Some(kind) = kind {
                    violations.push(Violation {
                        lambda,
                        wing: None,
                        a: a.clone(),
                        b: Some(b.clone()),
                        kind,
                        value: j,
                    });
                }
            }
        }
    }

    Ok(ValidationReport {
        model: model.name().to_string(),
        samples: sample_count,
        checks,
        violations,
    })
}
