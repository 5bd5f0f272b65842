//! The `bellch` command line.
//!
//! Exit codes: 0 success or inequality satisfied, 2 usage or validation
//! error, 3 an informational finding (CH violated, model not factorable,
//! determinization check not passing). A failed `paper-suite` item exits 1.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::determinize::{
    deterministic_u_audit_with, determinize, verify_marginals, DeterminizeMode, EquivalenceReport,
    UHistogram, VerificationPlan,
};
use crate::error::{Error, Result};
use crate::inequality::{
    ch_statistic, defect_report, dichotomy_counts, ensemble_prediction, enumerate_deterministic_u,
    CHVerdict, SettingQuad,
};
use crate::model::{
    builtin_counterexample, builtin_deterministic, builtin_quantum, load_model_file,
    validate_model, MalusModel, Model, QuantumPrediction, Setting, Wing,
};
use crate::montecarlo::{estimate_ch, EnsembleSampler, MCPlan, MonteCarloCH, DEFAULT_TRIALS};
use crate::quadrature::IntegrationPlan;
use crate::scan::{argmax, csv_real, scan, to_csv, ScanGrid};
use crate::suite::{self, SuiteConfig, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SUITE_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FINDING: i32 = 3;

const DEFAULT_VALIDATE_SAMPLES: u64 = 10_000;
const DEFAULT_AUDIT_SAMPLES: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "bellch",
    version,
    about = "Clauser-Horne inequality laboratory"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// RNG seed (default 0xB311)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte Carlo trials per estimated probability
    #[arg(long, global = true)]
    pub trials: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// counterexample | malus[:eta] | quantum[:eta] | deterministic:x,x',y,y' | file:PATH
    #[arg(long, global = true)]
    pub model: Option<String>,

    /// Midpoint panels for continuous hidden variables
    #[arg(long, global = true)]
    pub panels: Option<usize>,

    /// Worker hint for Monte Carlo (results do not depend on it)
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// TOML experiment config; flags override its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChMode {
    Closed,
    Quadrature,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetMode {
    Independent,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyMethod {
    Quadrature,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate U over the sixteen deterministic assignments
    EnumerateU,
    /// Report joint − p1·p2 over hidden states
    Factorability {
        /// Settings to check on both wings (default: the model's own)
        #[arg(long)]
        settings: Option<String>,
    },
    /// Evaluate the CH statistic at four settings
    Ch {
        /// a,a',b,b' in degrees
        #[arg(long, conflicts_with = "settings")]
        angles: Option<String>,
        /// a,a',b,b' as labels, degrees or `removed`
        #[arg(long)]
        settings: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ChMode>,
    },
    /// Scan the family a=0, a'=2θ, b=θ, b'=3θ and write CSV
    Scan {
        /// First θ in degrees
        #[arg(long)]
        from: Option<f64>,
        /// Last θ in degrees
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
    },
    /// Determinize a model and check it against the original
    Determinize {
        #[arg(long = "mode", value_enum)]
        det_mode: Option<DetMode>,
        /// Setting pair a,b the coupled mode is built for
        #[arg(long)]
        pair: Option<String>,
        /// a,a',b,b' for the U audit; marginals are checked on these settings
        #[arg(long, alias = "angles")]
        settings: Option<String>,
        #[arg(long, value_enum)]
        verify: Option<VerifyMethod>,
    },
    /// Run every reproduction check in order
    PaperSuite,
    /// Sample hidden states and check range and Fréchet invariants
    Validate {
        #[arg(long)]
        samples: Option<u64>,
    },
}

/// Values a config file may set. Field names match the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub panels: Option<usize>,
    pub workers: Option<usize>,
    /// Four settings a,a',b,b' (labels or degrees), comma-separated.
    pub settings: Option<String>,
    pub mode: Option<ChMode>,
    pub determinize_mode: Option<DetMode>,
    pub pair: Option<String>,
    pub verify: Option<VerifyMethod>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub step: Option<f64>,
    pub samples: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| {
            Error::InvalidArgument(format!("config {}: {}", path.display(), e.message().trim()))
        })
    }
}

/// What a command produced: text for stdout and stderr, and the exit code.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

impl Outcome {
    fn new(stdout: String, code: i32) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code,
        }
    }
}

/// A builtin or loaded model, or the λ-free quantum prediction.
#[derive(Debug)]
pub enum Subject {
    Model(Box<dyn Model>),
    Quantum(QuantumPrediction),
}

impl Subject {
    pub fn name(&self) -> &str {
        match self {
            Subject::Model(m) => m.name(),
            Subject::Quantum(_) => "quantum",
        }
    }

    fn model(&self, purpose: &str) -> Result<&dyn Model> {
        match self {
            Subject::Model(m) => Ok(m.as_ref()),
            Subject::Quantum(_) => Err(Error::Unsupported(format!(
                "the quantum prediction has no hidden variable; {purpose} needs a lambda-level model"
            ))),
        }
    }
}

fn parse_efficiency(arg: Option<&str>) -> Result<f64> {
    match arg {
        None => Ok(1.0),
        Some(s) => s
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("bad efficiency `{s}`"))),
    }
}

/// Resolves a `--model` value.
pub fn parse_subject(spec: &str) -> Result<Subject> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    match name {
        "counterexample" if arg.is_none() => Ok(Subject::Model(Box::new(builtin_counterexample()))),
        "malus" => Ok(Subject::Model(Box::new(MalusModel::with_efficiency(
            parse_efficiency(arg)?,
        )?))),
        "quantum" => Ok(Subject::Quantum(builtin_quantum(parse_efficiency(arg)?)?)),
        "deterministic" => {
            let bits = arg
                .unwrap_or_default()
                .split(',')
                .map(|b| match b.trim() {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::InvalidArgument(format!(
                        "deterministic response `{other}` is not 0 or 1"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            let [x, xp, y, yp] = <[bool; 4]>::try_from(bits).map_err(|_| {
                Error::InvalidArgument("deterministic:x,x',y,y' needs four bits".into())
            })?;
            let m = builtin_deterministic(
                &[(Setting::label("a"), x), (Setting::label("a'"), xp)],
                &[(Setting::label("b"), y), (Setting::label("b'"), yp)],
            )?;
            Ok(Subject::Model(Box::new(m)))
        }
        "file" => {
            let path = arg.ok_or_else(|| Error::InvalidArgument("file: needs a path".into()))?;
            Ok(Subject::Model(Box::new(load_model_file(Path::new(path))?)))
        }
        _ => Err(Error::InvalidArgument(format!("unknown model `{spec}`"))),
    }
}

/// Default `(a, a′, b, b′)`: the canonical angles for angle models, the first
/// two registered settings of each wing otherwise.
fn default_quad(subject: &Subject) -> SettingQuad {
    let Subject::Model(m) = subject else {
        return suite::canonical_angles();
    };
    let pick = |wing| {
        let s = m.settings(wing);
        let first = s[0].clone();
        let second = s.get(1).cloned().unwrap_or_else(|| first.clone());
        (first, second)
    };
    let (a, ap) = pick(Wing::One);
    let (b, bp) = pick(Wing::Two);
    if matches!(a, Setting::Angle(_)) {
        suite::canonical_angles()
    } else {
        SettingQuad::new(a, ap, b, bp)
    }
}

fn parse_list(list: &str) -> Result<Vec<Setting>> {
    list.split(',').map(Setting::parse).collect()
}

/// Flags merged over the config file.
struct Resolved {
    seed: u64,
    trials: Option<u64>,
    format: Format,
    out: Option<PathBuf>,
    model: Option<String>,
    panels: usize,
    workers: Option<usize>,
    config: ExperimentConfig,
}

impl Resolved {
    fn new(global: &GlobalArgs) -> Result<Self> {
        let config = match &global.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let panels = global
            .panels
            .or(config.panels)
            .unwrap_or(IntegrationPlan::default().panels);
        if panels == 0 {
            return Err(Error::InvalidArgument("--panels must be at least 1".into()));
        }
        Ok(Resolved {
            seed: global.seed.or(config.seed).unwrap_or(DEFAULT_SEED),
            trials: global.trials.or(config.trials),
            format: global.format.or(config.format).unwrap_or(Format::Text),
            out: global.out.clone().or(config.out.clone()),
            model: global.model.clone().or(config.model.clone()),
            panels,
            workers: global.workers.or(config.workers),
            config,
        })
    }

    fn subject(&self, default: &str) -> Result<Subject> {
        parse_subject(self.model.as_deref().unwrap_or(default))
    }

    fn plan(&self, default_trials: u64) -> Result<MCPlan> {
        let trials = self.trials.unwrap_or(default_trials);
        if trials == 0 {
            return Err(Error::InvalidArgument("--trials must be at least 1".into()));
        }
        let plan = MCPlan::new(trials, self.seed);
        Ok(match self.workers {
            Some(w) => plan.with_workers(w.max(1)),
            None => plan,
        })
    }

    fn integration(&self) -> IntegrationPlan {
        IntegrationPlan {
            panels: self.panels,
        }
    }

    /// Writes `body` to `--out` if given, otherwise returns it for stdout.
    fn emit(&self, body: String) -> Result<String> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, body)?;
                Ok(String::new())
            }
            None => Ok(body),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Runs a parsed command line. Errors become exit code 2 with a message.
pub fn run(cli: &Cli) -> Outcome {
    match dispatch(cli) {
        Ok(outcome) => outcome,
        Err(e) => Outcome {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            code: EXIT_USAGE,
        },
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let r = Resolved::new(&cli.global)?;
    match &cli.command {
        Command::EnumerateU => cmd_enumerate_u(&r),
        Command::Factorability { settings } => cmd_factorability(&r, settings.as_deref()),
        Command::Ch {
            angles,
            settings,
            mode,
        } => {
            let list = angles.as_deref().or(settings.as_deref());
            cmd_ch(&r, list, mode.or(r.config.mode))
        }
        Command::Scan { from, to, step } => {
            let d = ScanGrid::default();
            let grid = ScanGrid::new(
                from.or(r.config.from).unwrap_or(d.from),
                to.or(r.config.to).unwrap_or(d.to),
                step.or(r.config.step).unwrap_or(d.step),
            )?;
            cmd_scan(&r, &grid)
        }
        Command::Determinize {
            det_mode,
            pair,
            settings,
            verify,
        } => cmd_determinize(
            &r,
            det_mode
                .or(r.config.determinize_mode)
                .unwrap_or(DetMode::Independent),
            pair.as_deref().or(r.config.pair.as_deref()),
            settings.as_deref(),
            verify
                .or(r.config.verify)
                .unwrap_or(VerifyMethod::Quadrature),
        ),
        Command::PaperSuite => cmd_paper_suite(&r),
        Command::Validate { samples } => cmd_validate(&r, samples.or(r.config.samples)),
    }
}

pub fn cmd_enumerate_u_text() -> String {
    let cases = enumerate_deterministic_u();
    let (minus, zero) = dichotomy_counts(&cases);
    let mut out = String::from("x  x' y  y'   U\n");
    for c in &cases {
        let _ = writeln!(
            out,
            "{}  {}  {}  {}  {:>3}",
            c.x, c.x_prime, c.y, c.y_prime, c.u
        );
    }
    let _ = writeln!(out, "U=-1: {minus}, U=0: {zero}");
    out
}

fn cmd_enumerate_u(r: &Resolved) -> Result<Outcome> {
    let cases = enumerate_deterministic_u();
    let (minus, zero) = dichotomy_counts(&cases);
    let body = match r.format {
        Format::Text => cmd_enumerate_u_text(),
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                cases: &'a [crate::inequality::UCase],
                minus_one: usize,
                zero: usize,
            }
            to_json(&Doc {
                cases: &cases,
                minus_one: minus,
                zero,
            })
        }
        Format::Csv => {
            let mut out = String::from("x,xprime,y,yprime,u\n");
            for c in &cases {
                let _ = writeln!(out, "{},{},{},{},{}", c.x, c.x_prime, c.y, c.y_prime, c.u);
            }
            out
        }
    };
    let code = if (minus, zero) == (8, 8) {
        EXIT_OK
    } else {
        EXIT_FINDING
    };
    Ok(Outcome::new(r.emit(body)?, code))
}

fn cmd_factorability(r: &Resolved, settings: Option<&str>) -> Result<Outcome> {
    let subject = r.subject("counterexample")?;
    let model = subject.model("factorability")?;
    let (w1, w2) = match settings.or(r.config.settings.as_deref()) {
        Some(list) => {
            let s = parse_list(list)?;
            (s.clone(), s)
        }
        None => (model.settings(Wing::One), model.settings(Wing::Two)),
    };
    let samples = r.trials.unwrap_or(DEFAULT_VALIDATE_SAMPLES) as usize;
    let report = defect_report(model, &w1, &w2, samples, r.seed)?;
    let code = if report.is_factorable() {
        EXIT_OK
    } else {
        EXIT_FINDING
    };
    let body = match r.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut out = String::from("lambda,a,b,joint,product,defect\n");
            for e in &report.entries {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    e.lambda,
                    e.a,
                    e.b,
                    csv_real(e.joint),
                    csv_real(e.product),
                    csv_real(e.defect)
                );
            }
            out
        }
        Format::Text => {
            let mut out = format!(
                "model {} ({})\n{:>10} {:>8} {:>8} {:>10} {:>10} {:>10}\n",
                report.model,
                if report.exhaustive {
                    "every lambda".to_string()
                } else {
                    format!("worst of {} sampled lambdas per pair", report.samples)
                },
                "lambda",
                "a",
                "b",
                "joint",
                "p1*p2",
                "defect"
            );
            for e in &report.entries {
                let _ = writeln!(
                    out,
                    "{:>10} {:>8} {:>8} {:>10.6} {:>10.6} {:>10.6}",
                    e.lambda.to_string(),
                    e.a.to_string(),
                    e.b.to_string(),
                    e.joint,
                    e.product,
                    e.defect
                );
            }
            let _ = writeln!(
                out,
                "max |defect| = {}\n{}",
                report.max_abs_defect,
                if report.is_factorable() {
                    "FACTORABLE"
                } else {
                    "NOT FACTORABLE"
                }
            );
            out
        }
    };
    Ok(Outcome::new(r.emit(body)?, code))
}

#[derive(Debug, Serialize)]
struct ChOutput<'a> {
    model: &'a str,
    mode: &'static str,
    settings: &'a SettingQuad,
    #[serde(flatten)]
    verdict: CHVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<&'a MonteCarloCH>,
}

fn cmd_ch(r: &Resolved, list: Option<&str>, mode: Option<ChMode>) -> Result<Outcome> {
    let subject = r.subject("quantum")?;
    let quad = match list.or(r.config.settings.as_deref()) {
        Some(l) => SettingQuad::parse(l)?,
        None => default_quad(&subject),
    };
    let mode = mode.unwrap_or(match &subject {
        Subject::Model(m) if !m.lambda_space().is_discrete() => ChMode::Quadrature,
        _ => ChMode::Closed,
    });
    let mut mc = None;
    let verdict = match (&subject, mode) {
        (Subject::Quantum(q), ChMode::Closed | ChMode::Quadrature) => ch_statistic(q, &quad)?,
        (Subject::Quantum(q), ChMode::Mc) => {
            let est = estimate_ch(&EnsembleSampler(q), &quad, &r.plan(DEFAULT_TRIALS)?)?;
            let v = est.verdict;
            mc = Some(est);
            v
        }
        (Subject::Model(m), ChMode::Closed) => {
            if !m.lambda_space().is_discrete() {
                return Err(Error::Unsupported(format!(
                    "`{}` has a continuous hidden variable; use --mode quadrature or mc",
                    m.name()
                )));
            }
            ch_statistic(&ensemble_prediction(m.as_ref(), None)?, &quad)?
        }
        (Subject::Model(m), ChMode::Quadrature) => ch_statistic(
            &ensemble_prediction(m.as_ref(), Some(&r.integration()))?,
            &quad,
        )?,
        (Subject::Model(m), ChMode::Mc) => {
            let est = estimate_ch(m.as_ref(), &quad, &r.plan(DEFAULT_TRIALS)?)?;
            let v = est.verdict;
            mc = Some(est);
            v
        }
    };
    let mode_name = match mode {
        ChMode::Closed => "closed",
        ChMode::Quadrature => "quadrature",
        ChMode::Mc => "mc",
    };
    let code = if verdict.satisfied {
        EXIT_OK
    } else {
        EXIT_FINDING
    };
    let body = match r.format {
        Format::Json => to_json(&ChOutput {
            model: subject.name(),
            mode: mode_name,
            settings: &quad,
            verdict,
            monte_carlo: mc.as_ref(),
        }),
        Format::Csv => {
            let deg = |s: &Setting| s.to_string();
            format!(
                "a,aprime,b,bprime,statistic,lower,upper,satisfied\n{},{},{},{},{},{},{},{}\n",
                deg(&quad.a),
                deg(&quad.a_prime),
                deg(&quad.b),
                deg(&quad.b_prime),
                csv_real(verdict.statistic),
                csv_real(verdict.lower_bound),
                csv_real(verdict.upper_bound),
                verdict.satisfied
            )
        }
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "model      {}", subject.name());
            let _ = writeln!(
                out,
                "settings   a={} a'={} b={} b'={}",
                quad.a, quad.a_prime, quad.b, quad.b_prime
            );
            let _ = writeln!(out, "mode       {mode_name}");
            let _ = writeln!(out, "statistic  {}", verdict.statistic);
            if let Some(est) = &mc {
                let _ = writeln!(
                    out,
                    "stderr     {} (N={} per term, seed {})",
                    est.stderr,
                    r.plan(DEFAULT_TRIALS)?.trials,
                    r.seed
                );
            }
            let _ = writeln!(
                out,
                "bounds     [{}, {}]",
                verdict.lower_bound, verdict.upper_bound
            );
            let _ = writeln!(out, "margin     {}", verdict.margin);
            let _ = writeln!(
                out,
                "verdict    {}",
                if verdict.satisfied {
                    "satisfied"
                } else {
                    "VIOLATED"
                }
            );
            out
        }
    };
    Ok(Outcome::new(r.emit(body)?, code))
}

fn cmd_scan(r: &Resolved, grid: &ScanGrid) -> Result<Outcome> {
    let subject = r.subject("quantum")?;
    let rows = match &subject {
        Subject::Quantum(q) => scan(q, grid)?,
        Subject::Model(m) => {
            let plan = r.integration();
            let pred = ensemble_prediction(m.as_ref(), Some(&plan))?;
            scan(&pred, grid)?
        }
    };
    let best = argmax(&rows).expect("grids are never empty");
    let summary = format!(
        "argmax theta={} statistic={}\n",
        best.theta_deg, best.verdict.statistic
    );
    let body = match r.format {
        Format::Json => to_json(&rows),
        Format::Csv | Format::Text => to_csv(&rows),
    };
    Ok(match &r.out {
        Some(_) => {
            r.emit(body)?;
            Outcome::new(summary, EXIT_OK)
        }
        None => Outcome {
            stdout: body,
            stderr: summary,
            code: EXIT_OK,
        },
    })
}

#[derive(Debug, Serialize)]
struct DeterminizeOutput<'a> {
    report: &'a EquivalenceReport,
    audit_settings: &'a SettingQuad,
    audit: UHistogram,
    pass: bool,
}

fn cmd_determinize(
    r: &Resolved,
    mode: DetMode,
    pair: Option<&str>,
    settings: Option<&str>,
    verify: VerifyMethod,
) -> Result<Outcome> {
    let subject = r.subject("counterexample")?;
    let model = subject.model("determinization")?;
    let quad = match settings.or(r.config.settings.as_deref()) {
        Some(l) => SettingQuad::parse(l)?,
        None => default_quad(&subject),
    };
    let det_mode = match mode {
        DetMode::Independent => DeterminizeMode::Independent,
        DetMode::Coupled => {
            let (a, b) = match pair {
                Some(p) => {
                    let parsed = parse_list(p)?;
                    let [a, b] = <[Setting; 2]>::try_from(parsed).map_err(|_| {
                        Error::InvalidArgument("--pair needs exactly two settings a,b".into())
                    })?;
                    (a, b)
                }
                None => (quad.a.clone(), quad.b.clone()),
            };
            DeterminizeMode::Coupled { a, b }
        }
    };
    let det = determinize(model, det_mode)?;
    let dedup = |x: &Setting, y: &Setting| {
        if x.matches(y) {
            vec![x.clone()]
        } else {
            vec![x.clone(), y.clone()]
        }
    };
    let wing1 = dedup(&quad.a, &quad.a_prime);
    let wing2 = dedup(&quad.b, &quad.b_prime);
    let plan = match verify {
        VerifyMethod::Quadrature => VerificationPlan::Quadrature(r.integration()),
        VerifyMethod::Mc => VerificationPlan::MonteCarlo(r.plan(DEFAULT_TRIALS)?),
    };
    let report = verify_marginals(&det, &wing1, &wing2, &plan)?;
    let audit_plan = r.plan(DEFAULT_AUDIT_SAMPLES)?;
    let audit = deterministic_u_audit_with(&det, &quad, &audit_plan)?;
    let pass = report.pass && audit.within_dichotomy();
    let code = if pass { EXIT_OK } else { EXIT_FINDING };

    let body = match r.format {
        Format::Json | Format::Csv => to_json(&DeterminizeOutput {
            report: &report,
            audit_settings: &quad,
            audit,
            pass,
        }),
        Format::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "model    {}\nmode     {}\nmethod   {}",
                report.model, report.mode, report.method
            );
            let _ = writeln!(
                out,
                "marginals (per-lambda tolerance {}):",
                report.per_lambda_tolerance
            );
            for m in &report.marginals {
                let _ = writeln!(
                    out,
                    "  wing {} {:>8}  base {:.12}  determinized {:.12}  |dev| {:e}  per-lambda {:e}  tol {:e}",
                    m.wing,
                    m.setting.to_string(),
                    m.base,
                    m.determinized,
                    m.ensemble,
                    m.per_lambda,
                    m.tolerance
                );
            }
            let _ = writeln!(
                out,
                "max marginal deviation = {:e}",
                report.max_marginal_deviation()
            );
            let _ = writeln!(out, "lambda-level joints:");
            for j in &report.joints {
                let _ = writeln!(
                    out,
                    "  ({:>6},{:>6})  joint deviation {}{}",
                    j.a.to_string(),
                    j.b.to_string(),
                    j.per_lambda,
                    if j.required { "  [required]" } else { "" }
                );
            }
            for n in &report.notes {
                let _ = writeln!(out, "note: {n}");
            }
            let _ = writeln!(
                out,
                "U audit at a={} a'={} b={} b'={}: U=-1 x{}, U=0 x{}, other x{}",
                quad.a,
                quad.a_prime,
                quad.b,
                quad.b_prime,
                audit.minus_one,
                audit.zero,
                audit.other
            );
            let _ = writeln!(out, "{}", if pass { "PASS" } else { "FAIL" });
            out
        }
    };
    Ok(Outcome::new(r.emit(body)?, code))
}

fn cmd_paper_suite(r: &Resolved) -> Result<Outcome> {
    let mut cfg = SuiteConfig::new(r.seed);
    if let Some(w) = r.workers {
        cfg.workers = w.max(1);
    }
    if let Some(t) = r.trials {
        cfg.trials = t.max(1);
    }
    let items = suite::run(&cfg)?;
    let all = items.iter().all(|i| i.pass);
    let body = match r.format {
        Format::Json => to_json(&items),
        Format::Csv => {
            let mut out = String::from("id,name,pass\n");
            for i in &items {
                let _ = writeln!(out, "{},{},{}", i.id, i.name, i.pass);
            }
            out
        }
        Format::Text => {
            let mut out = String::new();
            for i in &items {
                let _ = writeln!(
                    out,
                    "{} {:>2} {}: {}",
                    if i.pass { "PASS" } else { "FAIL" },
                    i.id,
                    i.name,
                    i.detail
                );
            }
            let passed = items.iter().filter(|i| i.pass).count();
            let _ = writeln!(out, "{passed}/{} passed (seed {})", items.len(), r.seed);
            out
        }
    };
    Ok(Outcome::new(
        r.emit(body)?,
        if all { EXIT_OK } else { EXIT_SUITE_FAILED },
    ))
}

fn cmd_validate(r: &Resolved, samples: Option<u64>) -> Result<Outcome> {
    let subject = r.subject("counterexample")?;
    let model = subject.model("validation")?;
    let n = samples.or(r.trials).unwrap_or(DEFAULT_VALIDATE_SAMPLES) as usize;
    let report = validate_model(model, n, r.seed)?;
    let body = match r.format {
        Format::Json | Format::Csv => to_json(&report),
        Format::Text => {
            let mut out = format!(
                "model {}: {} samples, {} checks, {} violations\n",
                report.model,
                report.samples,
                report.checks,
                report.violations.len()
            );
            for v in report.violations.iter().take(20) {
                let _ = writeln!(
                    out,
                    "  lambda {} a={} b={} {:?} value {}",
                    v.lambda,
                    v.a,
                    v.b.as_ref()
                        .map(|b| b.to_string())
                        .unwrap_or_else(|| "-".into()),
                    v.kind,
                    v.value
                );
            }
            out
        }
    };
    let code = if report.is_clean() {
        EXIT_OK
    } else {
        EXIT_USAGE
    };
    Ok(Outcome::new(r.emit(body)?, code))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        let mut full = vec!["bellch"];
        full.extend_from_slice(args);
        run(&Cli::try_parse_from(full).expect("arguments parse"))
    }

    #[test]
    fn enumerate_u_summary() {
        let out = run_args(&["enumerate-u"]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("U=-1: 8, U=0: 8"));
        assert!(out.stdout.lines().nth(1).unwrap().ends_with(" 0"));
    }

    #[test]
    fn factorability_exit_codes() {
        let out = run_args(&["factorability", "--model", "counterexample"]);
        assert_eq!(out.code, 3, "{out:?}");
        assert!(out.stdout.contains("max |defect| = 0.25"));
        let out = run_args(&["factorability", "--model", "malus", "--trials", "200"]);
        assert_eq!(out.code, 0, "{out:?}");
        assert!(out.stdout.contains("max |defect| = 0"));
        let out = run_args(&["factorability", "--model", "quantum"]);
        assert_eq!(out.code, 2);
        assert!(out.stderr.contains("unsupported input"));
    }

    #[test]
    fn ch_examples() {
        let out = run_args(&[
            "ch",
            "--model",
            "quantum",
            "--angles",
            "0,45,22.5,67.5",
            "--mode",
            "closed",
        ]);
        assert_eq!(out.code, 3);
        assert!(out.stdout.contains("VIOLATED"));
        assert!(out.stdout.contains("statistic  0.20710678"));

        let out = run_args(&[
            "ch",
            "--model",
            "malus",
            "--angles",
            "0,45,22.5,67.5",
            "--mode",
            "quadrature",
        ]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("statistic  -0.14644660"));

        let out = run_args(&[
            "ch",
            "--model",
            "counterexample",
            "--settings",
            "up,down,down,up",
        ]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("statistic  -1\n"));
        assert!(out.stdout.contains("margin     0\n"));

        let out = run_args(&["ch", "--model", "malus", "--mode", "closed"]);
        assert_eq!(out.code, 2);
        let out = run_args(&["ch", "--model", "quantum", "--angles", "0,45,x,67.5"]);
        assert_eq!(out.code, 2);
        let out = run_args(&["ch", "--model", "quantum", "--angles", "0,45"]);
        assert_eq!(out.code, 2);
    }

    #[test]
    fn unknown_and_bad_models() {
        assert_eq!(run_args(&["ch", "--model", "nonsense"]).code, 2);
        assert_eq!(run_args(&["ch", "--model", "quantum:1.5"]).code, 2);
        assert_eq!(
            run_args(&["ch", "--model", "file:/nonexistent/model.toml"]).code,
            2
        );
        assert_eq!(
            run_args(&["determinize", "--model", "deterministic:0,1,1"]).code,
            2
        );
    }

    #[test]
    fn determinize_examples() {
        let out = run_args(&[
            "determinize",
            "--model",
            "counterexample",
            "--mode",
            "coupled",
            "--pair",
            "up,up",
        ]);
        assert_eq!(out.code, 0, "{}", out.stdout);
        assert!(out
            .stdout
            .contains("(    up,    up)  joint deviation 0  [required]"));

        let out = run_args(&[
            "determinize",
            "--model",
            "counterexample",
            "--mode",
            "independent",
        ]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("joint deviation 0.25"));
        assert!(out.stdout.contains("note: independent mu"));

        let out = run_args(&[
            "determinize",
            "--model",
            "deterministic:0,1,1,0",
            "--settings",
            "a,a',b,b'",
        ]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("U=-1 x100000, U=0 x0, other x0"));
    }

    #[test]
    fn scan_rejects_empty_grid() {
        let out = run_args(&["scan", "--from", "10", "--to", "10"]);
        assert_eq!(out.code, 2);
        let out = run_args(&["scan", "--step", "0.7"]);
        assert_eq!(out.code, 2);
    }

    #[test]
    fn scan_reports_argmax() {
        let out = run_args(&["scan", "--model", "malus", "--panels", "256"]);
        assert_eq!(out.code, 0);
        assert!(
            out.stderr
                .starts_with("argmax theta=22.5 statistic=-0.1464466"),
            "{}",
            out.stderr
        );
        assert_eq!(out.stdout.lines().count(), 182);
    }
}
