//! One-parameter angle scans of the CH statistic along the family
//! `a = 0, a′ = 2θ, b = θ, b′ = 3θ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{ch_statistic, CHVerdict, SettingQuad};
use crate::model::EnsemblePrediction;

pub const CSV_HEADER: &str = "a_deg,aprime_deg,b_deg,bprime_deg,statistic,lower,upper,satisfied";

/// Grid of θ values in degrees, `from, from + step, …, to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl ScanGrid {
    /// The step must be positive and divide `to − from` (within 1e-9 steps).
    pub fn new(from: f64, to: f64, step: f64) -> Result<Self> {
        if !(from.is_finite() && to.is_finite() && step.is_finite()) {
            return Err(Error::InvalidArgument("scan bounds must be finite".into()));
        }
        if step <= 0.0 || to <= from {
            return Err(Error::InvalidArgument(format!(
                "zero-length scan grid: from {from} to {to} step {step}"
            )));
        }
        let steps = (to - from) / step;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "step {step} does not divide the range [{from}, {to}]"
            )));
        }
        Ok(ScanGrid { from, to, step })
    }

    pub fn thetas(&self) -> Vec<f64> {
        let n = ((self.to - self.from) / self.step).round() as usize;
        (0..=n).map(|k| self.from + k as f64 * self.step).collect()
    }
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid {
            from: 0.0,
            to: 90.0,
            step: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub theta_deg: f64,
    pub a_deg: f64,
    pub aprime_deg: f64,
    pub b_deg: f64,
    pub bprime_deg: f64,
    pub verdict: CHVerdict,
}

/// `(a, a′, b, b′)` in degrees for parameter θ.
pub fn family_angles(theta_deg: f64) -> [f64; 4] {
    [0.0, 2.0 * theta_deg, theta_deg, 3.0 * theta_deg]
}

pub fn scan(pred: &dyn EnsemblePrediction, grid: &ScanGrid) -> Result<Vec<ScanRow>> {
    grid.thetas()
        .into_iter()
        .map(|theta| {
            let [a, ap, b, bp] = family_angles(theta);
            Ok(ScanRow {
                theta_deg: theta,
                a_deg: a,
                aprime_deg: ap,
                b_deg: b,
                bprime_deg: bp,
                verdict: ch_statistic(pred, &SettingQuad::degrees(a, ap, b, bp))?,
            })
        })
        .collect()
}

/// First row attaining the largest statistic.
pub fn argmax(rows: &[ScanRow]) -> Option<&ScanRow> {
    rows.iter()
        .fold(None, |best: Option<&ScanRow>, r| match best {
            Some(b) if b.verdict.statistic >= r.verdict.statistic => Some(b),
            _ => Some(r),
        })
}

/// A real with 17 significant digits.
pub fn csv_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let v = &r.verdict;
        let fields = [
            r.a_deg,
            r.aprime_deg,
            r.b_deg,
            r.bprime_deg,
            v.statistic,
            v.lower_bound,
            v.upper_bound,
        ]
        .map(csv_real)
        .join(",");
        out.push_str(&format!("{fields},{}\n", v.satisfied));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_quantum;

    #[test]
    fn grid_validation() {
        assert!(ScanGrid::new(0.0, 0.0, 0.5).is_err());
        assert!(ScanGrid::new(0.0, 90.0, 0.0).is_err());
        assert!(ScanGrid::new(0.0, 90.0, 0.7).is_err());
        let g = ScanGrid::new(0.0, 90.0, 0.5).unwrap();
        let t = g.thetas();
        assert_eq!(t.len(), 181);
        assert_eq!(t[45], 22.5);
        assert_eq!(*t.last().unwrap(), 90.0);
    }

    #[test]
    fn quantum_scan_peaks_at_22_5() {
        let q = builtin_quantum(1.0).unwrap();
        let rows = scan(&q, &ScanGrid::default()).unwrap();
        let best = argmax(&rows).unwrap();
        assert_eq!(best.theta_deg, 22.5);
        assert!((best.verdict.statistic - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_shape() {
        let q = builtin_quantum(1.0).unwrap();
        let rows = scan(&q, &ScanGrid::new(0.0, 1.0, 0.5).unwrap()).unwrap();
        let csv = to_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(!csv.contains('\r'));
        let fields: Vec<_> = lines[1].split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[4].parse::<f64>().unwrap(), rows[0].verdict.statistic);
        assert_eq!(csv_real(0.1), "1.0000000000000001e-1");
    }
}
