//! Seeded Monte Carlo estimation of singles, coincidences and CH statistics.
//!
//! Trial `i` of a run draws from the counter-based stream
//! `(seed, stream, i)` (see [`crate::rng`]). Workers split the index range
//! and return integer counts, so an estimate depends only on
//! `(trials, seed)`, never on how many workers ran it.

use rand::distr::OpenClosed01;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::determinize::CouplingPartition;
use crate::error::{Error, Result};
use crate::inequality::{ch_terms, CHVerdict, SettingQuad};
use crate::model::{EnsemblePrediction, Model, Setting, Wing};
use crate::rng::{seek, stream_rng, streams, TrialRng};

/// Statistical checks accept deviations up to this many standard errors.
pub const SIGMA_GATE: f64 = 4.0;

pub const DEFAULT_TRIALS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MCPlan {
    pub trials: u64,
    pub seed: u64,
    /// Number of index ranges to split the run into. Advisory only.
    pub worker_hint: usize,
}

impl MCPlan {
    pub fn new(trials: u64, seed: u64) -> Self {
        MCPlan {
            trials,
            seed,
            worker_hint: rayon::current_num_threads(),
        }
    }

    pub fn with_workers(mut self, worker_hint: usize) -> Self {
        self.worker_hint = worker_hint;
        self
    }
}

/// A Bernoulli proportion with its plug-in standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            trials,
            seed,
        }
    }

    /// `|value − truth| ≤ SIGMA_GATE · stderr`.
    pub fn agrees_with(&self, truth: f64) -> bool {
        (self.value - truth).abs() <= SIGMA_GATE * self.stderr
    }
}

/// Runs `plan.trials` trials on `stream`, each returning a category in
/// `0..K`, and returns the per-category counts.
pub fn tally<const K: usize, F>(plan: &MCPlan, stream: u64, trial: F) -> Result<[u64; K]>
where
    F: Fn(&mut TrialRng) -> Result<usize> + Sync,
{
    if plan.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let chunks = (plan.worker_hint.max(1) as u64).min(plan.trials);
    let size = plan.trials.div_ceil(chunks);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * size;
            let end = (start + size).min(plan.trials);
            let mut rng = stream_rng(plan.seed, stream);
            let mut counts = [0u64; K];
            for i in start..end {
                seek(&mut rng, i);
                counts[trial(&mut rng)?] += 1;
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(partial.into_iter().fold([0u64; K], |mut acc, c| {
        acc.iter_mut().zip(c).for_each(|(a, x)| *a += x);
        acc
    }))
}

/// Anything that can produce detection outcomes trial by trial.
pub trait OutcomeSampler: Sync {
    fn sample_pair(&self, rng: &mut TrialRng, a: &Setting, b: &Setting) -> Result<(bool, bool)>;
    fn sample_single(&self, rng: &mut TrialRng, wing: Wing, s: &Setting) -> Result<bool>;
}

/// λ-level sampling: draw λ, then the outcome pair from the four-cell
/// distribution `(j, p1−j, p2−j, 1−p1−p2+j)` at that λ.
impl<M: Model + ?Sized> OutcomeSampler for M {
    fn sample_pair(&self, rng: &mut TrialRng, a: &Setting, b: &Setting) -> Result<(bool, bool)> {
        let lambda = self.lambda_space().sample(rng);
        let cell = CouplingPartition::new(
            self.p1(&lambda, a)?,
            self.p2(&lambda, b)?,
            self.joint(&lambda, a, b)?,
        );
        Ok(cell.outcome(rng.sample(OpenClosed01)))
    }

    fn sample_single(&self, rng: &mut TrialRng, wing: Wing, s: &Setting) -> Result<bool> {
        let lambda = self.lambda_space().sample(rng);
        let p = self.prob(wing, &lambda, s)?;
        Ok(rng.sample::<f64, _>(OpenClosed01) <= p)
    }
}

/// Samples outcomes straight from ensemble probabilities. This is the only
/// way to simulate a prediction that has no hidden variable, such as the
/// quantum one; [`estimate_joint`] and friends accept it explicitly.
#[derive(Clone, Copy)]
pub struct EnsembleSampler<'p>(pub &'p dyn EnsemblePrediction);

impl OutcomeSampler for EnsembleSampler<'_> {
    fn sample_pair(&self, rng: &mut TrialRng, a: &Setting, b: &Setting) -> Result<(bool, bool)> {
        let cell = CouplingPartition::new(self.0.p1(a)?, self.0.p2(b)?, self.0.p12(a, b)?);
        Ok(cell.outcome(rng.sample(OpenClosed01)))
    }

    fn sample_single(&self, rng: &mut TrialRng, wing: Wing, s: &Setting) -> Result<bool> {
        let p = match wing {
            Wing::One => self.0.p1(s)?,
            Wing::Two => self.0.p2(s)?,
        };
        Ok(rng.sample::<f64, _>(OpenClosed01) <= p)
    }
}

fn joint_on_stream<S: OutcomeSampler + ?Sized>(
    source: &S,
    a: &Setting,
    b: &Setting,
    plan: &MCPlan,
    stream: u64,
) -> Result<Estimate> {
    let [both, _] = tally::<2, _>(plan, stream, |rng| {
        let (x, y) = source.sample_pair(rng, a, b)?;
        Ok(usize::from(!(x && y)))
    })?;
    Ok(Estimate::from_counts(both, plan.trials, plan.seed))
}

/// Fraction of trials in which both wings fire.
pub fn estimate_joint<S: OutcomeSampler + ?Sized>(
    source: &S,
    a: &Setting,
    b: &Setting,
    plan: &MCPlan,
) -> Result<Estimate> {
    joint_on_stream(source, a, b, plan, streams::JOINT)
}

pub fn estimate_singles<S: OutcomeSampler + ?Sized>(
    source: &S,
    wing: Wing,
    s: &Setting,
    plan: &MCPlan,
) -> Result<Estimate> {
    let stream = match wing {
        Wing::One => streams::SINGLES_WING1,
        Wing::Two => streams::SINGLES_WING2,
    };
    let [hits, _] = tally::<2, _>(plan, stream, |rng| {
        Ok(usize::from(!source.sample_single(rng, wing, s)?))
    })?;
    Ok(Estimate::from_counts(hits, plan.trials, plan.seed))
}

#[derive(Debug, Clone, Serialize)]
pub struct TermEstimate {
    pub a: Setting,
    pub b: Setting,
    pub sign: f64,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloCH {
    pub verdict: CHVerdict,
    /// Standard error of the statistic, the six terms combined in quadrature.
    pub stderr: f64,
    pub terms: Vec<TermEstimate>,
    /// Estimate of `p12(∞, ∞)`.
    pub removed_pair: Estimate,
}

impl MonteCarloCH {
    pub fn agrees_with(&self, truth: f64) -> bool {
        (self.verdict.statistic - truth).abs() <= SIGMA_GATE * self.stderr
    }
}

/// Estimates the six CH terms on independent streams and combines them.
/// The verdict allows `SIGMA_GATE` combined standard errors of slack.
pub fn estimate_ch<S: OutcomeSampler + ?Sized>(
    source: &S,
    quad: &SettingQuad,
    plan: &MCPlan,
) -> Result<MonteCarloCH> {
    let mut terms = Vec::with_capacity(6);
    let mut statistic = 0.0;
    let mut variance = 0.0;
    for (k, (a, b, sign)) in ch_terms(quad).into_iter().enumerate() {
        let estimate = joint_on_stream(source, &a, &b, plan, streams::CH_BASE + k as u64)?;
        statistic += sign * estimate.value;
        variance += estimate.stderr * estimate.stderr;
        terms.push(TermEstimate {
            a,
            b,
            sign,
            estimate,
        });
    }
    let removed_pair = joint_on_stream(
        source,
        &Setting::Removed,
        &Setting::Removed,
        plan,
        streams::CH_BASE + 6,
    )?;
    let stderr = variance.sqrt();
    let slack = SIGMA_GATE * (variance + removed_pair.stderr * removed_pair.stderr).sqrt();
    Ok(MonteCarloCH {
        verdict: CHVerdict::new(statistic, -removed_pair.value, slack),
        stderr,
        terms,
        removed_pair,
    })
}
