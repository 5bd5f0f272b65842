//! Discrete models given as a table of λ rows, and their TOML file format.
//!
//! ```toml
//! name = "counterexample"
//! wing1_settings = ["up", "down"]   # labels, or numbers in degrees
//! wing2_settings = ["up", "down"]
//! efficiency = 1.0                  # optional, default 1
//!
//! [[lambdas]]
//! weight = 1.0
//! p1 = [0.5, 0.5]
//! p2 = [0.5, 0.5]
//! joint = [[0.5, 0.0], [0.0, 0.5]]  # optional; omitted means p1 * p2
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{frechet_bounds, HiddenSample, LambdaSpace, Model, Setting, Wing, FRECHET_TOLERANCE};
use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub weight: f64,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// `joint[i][j]` for wing-1 setting `i` and wing-2 setting `j`.
    pub joint: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableModel {
    name: String,
    wing1: Vec<Setting>,
    wing2: Vec<Setting>,
    efficiency: f64,
    rows: Vec<TableRow>,
    space: LambdaSpace,
}

impl TableModel {
    /// Builds a model, checking every invariant: settings distinct and not
    /// removed, efficiency in (0, 1], weights nonnegative and normalized,
    /// probabilities in [0, 1], joints within the Fréchet bounds.
    pub fn new(
        name: impl Into<String>,
        wing1: Vec<Setting>,
        wing2: Vec<Setting>,
        efficiency: f64,
        rows: Vec<TableRow>,
    ) -> Result<Self> {
        check_settings("wing1_settings", &wing1)?;
        check_settings("wing2_settings", &wing2)?;
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Domain {
                what: "efficiency",
                value: efficiency,
                domain: "(0, 1]",
            });
        }
        if rows.is_empty() {
            return Err(Error::Malformed(
                "at least one lambda row is required".into(),
            ));
        }
        for (r, row) in rows.iter().enumerate() {
            check_row(r, row, &wing1, &wing2)?;
        }
        let sum: f64 = rows.iter().map(|r| r.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Normalization { sum });
        }
        let space = LambdaSpace::discrete(rows.iter().map(|r| r.weight).collect());
        Ok(TableModel {
            name: name.into(),
            wing1,
            wing2,
            efficiency,
            rows,
            space,
        })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn wing_settings(&self, wing: Wing) -> &[Setting] {
        match wing {
            Wing::One => &self.wing1,
            Wing::Two => &self.wing2,
        }
    }

    pub fn index_of(&self, wing: Wing, setting: &Setting) -> Result<usize> {
        self.wing_settings(wing)
            .iter()
            .position(|s| s.matches(setting))
            .ok_or_else(|| Error::UnknownSetting {
                wing,
                setting: setting.to_string(),
            })
    }

    fn row(&self, lambda: &HiddenSample) -> Result<&TableRow> {
        match lambda {
            HiddenSample::Discrete(i) => self.rows.get(*i).ok_or_else(|| {
                Error::InvalidArgument(format!("lambda row {i} does not exist in `{}`", self.name))
            }),
            HiddenSample::Continuous(_) => Err(Error::Unsupported(format!(
                "`{}` has a discrete lambda space",
                self.name
            ))),
        }
    }

    /// Serializes to the table-model TOML format. Angles are written in degrees.
    pub fn to_toml(&self) -> String {
        let entry = |s: &Setting| match s {
            Setting::Angle(r) => SettingEntry::Degrees(r.to_degrees()),
            Setting::Label(l) => SettingEntry::Label(l.clone()),
            Setting::Removed => unreachable!("tables never register the removed setting"),
        };
        let doc = TableDocument {
            name: Some(self.name.clone()),
            wing1_settings: self.wing1.iter().map(entry).collect(),
            wing2_settings: self.wing2.iter().map(entry).collect(),
            efficiency: self.efficiency,
            lambdas: self
                .rows
                .iter()
                .map(|r| RowDocument {
                    weight: r.weight,
                    p1: r.p1.clone(),
                    p2: r.p2.clone(),
                    joint: r.joint.clone(),
                })
                .collect(),
        };
        toml::to_string(&doc).expect("table documents always serialize")
    }
}

fn check_settings(field: &str, settings: &[Setting]) -> Result<()> {
    if settings.is_empty() {
        return Err(Error::Malformed(format!("`{field}` is empty")));
    }
    for (i, s) in settings.iter().enumerate() {
        if s.is_removed() {
            return Err(Error::Malformed(format!(
                "`{field}` lists the removed setting; it is implied by `efficiency`"
            )));
        }
        if settings[..i].iter().any(|t| t.matches(s)) {
            return Err(Error::Malformed(format!("`{field}` repeats setting `{s}`")));
        }
    }
    Ok(())
}

fn check_probability(row: usize, field: String, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange { row, field, value })
    }
}

fn check_row(r: usize, row: &TableRow, wing1: &[Setting], wing2: &[Setting]) -> Result<()> {
    if !row.weight.is_finite() {
        return Err(Error::Malformed(format!(
            "lambda row {r}: weight is not finite"
        )));
    }
    if row.weight < 0.0 {
        return Err(Error::NegativeWeight {
            row: r,
            weight: row.weight,
        });
    }
    if row.p1.len() != wing1.len() || row.p2.len() != wing2.len() {
        return Err(Error::Malformed(format!(
            "lambda row {r}: expected {} p1 and {} p2 entries, found {} and {}",
            wing1.len(),
            wing2.len(),
            row.p1.len(),
            row.p2.len()
        )));
    }
    for (s, &p) in wing1.iter().zip(&row.p1) {
        check_probability(r, format!("p1[{s}]"), p)?;
    }
    for (s, &p) in wing2.iter().zip(&row.p2) {
        check_probability(r, format!("p2[{s}]"), p)?;
    }
    let Some(joint) = &row.joint else {
        return Ok(());
    };
    if joint.len() != wing1.len() || joint.iter().any(|line| line.len() != wing2.len()) {
        return Err(Error::Malformed(format!(
            "lambda row {r}: joint must be a {}x{} matrix",
            wing1.len(),
            wing2.len()
        )));
    }
    for (i, a) in wing1.iter().enumerate() {
        for (j, b) in wing2.iter().enumerate() {
            let value = joint[i][j];
            check_probability(r, format!("joint[{a}][{b}]"), value)?;
            let (lower, upper) = frechet_bounds(row.p1[i], row.p2[j]);
            if value < lower - FRECHET_TOLERANCE || value > upper + FRECHET_TOLERANCE {
                return Err(Error::FrechetViolation {
                    row: r,
                    a: a.to_string(),
                    b: b.to_string(),
                    joint: value,
                    lower,
                    upper,
                });
            }
        }
    }
    Ok(())
}

impl Model for TableModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn lambda_space(&self) -> &LambdaSpace {
        &self.space
    }

    fn efficiency(&self) -> f64 {
        self.efficiency
    }

    fn settings(&self, wing: Wing) -> Vec<Setting> {
        self.wing_settings(wing).to_vec()
    }

    fn response(&self, wing: Wing, lambda: &HiddenSample, setting: &Setting) -> Result<f64> {
        let idx = self.index_of(wing, setting)?;
        let row = self.row(lambda)?;
        Ok(match wing {
            Wing::One => row.p1[idx],
            Wing::Two => row.p2[idx],
        })
    }

    fn correlated_joint(
        &self,
        lambda: &HiddenSample,
        a: &Setting,
        b: &Setting,
    ) -> Result<Option<f64>> {
        let i = self.index_of(Wing::One, a)?;
        let j = self.index_of(Wing::Two, b)?;
        Ok(self.row(lambda)?.joint.as_ref().map(|m| m[i][j]))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SettingEntry {
    Degrees(f64),
    Label(String),
}

fn default_efficiency() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowDocument {
    weight: f64,
    p1: Vec<f64>,
    p2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    joint: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    wing1_settings: Vec<SettingEntry>,
    wing2_settings: Vec<SettingEntry>,
    #[serde(default = "default_efficiency")]
    efficiency: f64,
    lambdas: Vec<RowDocument>,
}

fn entry_to_setting(field: &str, entry: SettingEntry) -> Result<Setting> {
    match entry {
        SettingEntry::Degrees(d) if d.is_finite() => Ok(Setting::degrees(d)),
        SettingEntry::Degrees(d) => Err(Error::Malformed(format!(
            "`{field}`: angle {d} is not finite"
        ))),
        SettingEntry::Label(l) => match Setting::parse(&l)? {
            Setting::Removed => Err(Error::Malformed(format!(
                "`{field}` lists the removed setting; it is implied by `efficiency`"
            ))),
            // Numeric strings stay labels: only bare numbers are angles.
            _ => Ok(Setting::Label(l)),
        },
    }
}

/// Parses and validates a table-model document.
pub fn load_model(document: &str) -> Result<TableModel> {
    let doc: TableDocument =
        toml::from_str(document).map_err(|e| Error::Malformed(e.message().trim().to_string()))?;
    let convert = |field: &str, entries: Vec<SettingEntry>| -> Result<Vec<Setting>> {
        entries
            .into_iter()
            .map(|e| entry_to_setting(field, e))
            .collect()
    };
    let wing1 = convert("wing1_settings", doc.wing1_settings)?;
    let wing2 = convert("wing2_settings", doc.wing2_settings)?;
    let rows = doc
        .lambdas
        .into_iter()
        .map(|r| TableRow {
            weight: r.weight,
            p1: r.p1,
            p2: r.p2,
            joint: r.joint,
        })
        .collect();
    TableModel::new(
        doc.name.unwrap_or_else(|| "table".to_string()),
        wing1,
        wing2,
        doc.efficiency,
        rows,
    )
}

pub fn load_model_file(path: &Path) -> Result<TableModel> {
    load_model(&std::fs::read_to_string(path)?)
}

/// Two classical systems emitted either both "up" or both "down", each with
/// irreducible probability 1/2, from a single hidden state.
pub fn builtin_counterexample() -> TableModel {
    let labels = || vec![Setting::label("up"), Setting::label("down")];
    TableModel::new(
        "counterexample",
        labels(),
        labels(),
        1.0,
        vec![TableRow {
            weight: 1.0,
            p1: vec![0.5, 0.5],
            p2: vec![0.5, 0.5],
            joint: Some(vec![vec![0.5, 0.0], vec![0.0, 0.5]]),
        }],
    )
    .expect("counterexample table is valid")
}

/// Single-λ model whose responses are fixed to 0 or 1 per setting; the joint
/// is the product.
pub fn builtin_deterministic(
    wing1: &[(Setting, bool)],
    wing2: &[(Setting, bool)],
) -> Result<TableModel> {
    let split = |assignment: &[(Setting, bool)]| -> (Vec<Setting>, Vec<f64>) {
        assignment
            .iter()
            .map(|(s, on)| (s.clone(), if *on { 1.0 } else { 0.0 }))
            .unzip()
    };
    let (s1, p1) = split(wing1);
    let (s2, p2) = split(wing2);
    TableModel::new(
        "deterministic",
        s1,
        s2,
        1.0,
        vec![TableRow {
            weight: 1.0,
            p1,
            p2,
            joint: None,
        }],
    )
}
