use super::{EnsemblePrediction, Setting, Wing};
use crate::error::{Error, Result};

/// Closed-form quantum prediction for a maximally correlated photon pair with
/// detector efficiency η: singles η/2, coincidences (η²/2)·cos²(a − b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumPrediction {
    efficiency: f64,
}

pub fn builtin_quantum(efficiency: f64) -> Result<QuantumPrediction> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::Domain {
            what: "efficiency",
            value: efficiency,
            domain: "(0, 1]",
        });
    }
    Ok(QuantumPrediction { efficiency })
}

impl QuantumPrediction {
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    fn single(&self, wing: Wing, s: &Setting) -> Result<f64> {
        match s {
            Setting::Angle(_) => Ok(self.efficiency / 2.0),
            Setting::Removed => Ok(self.efficiency),
            Setting::Label(_) => Err(Error::UnknownSetting {
                wing,
                setting: s.to_string(),
            }),
        }
    }
}

impl EnsemblePrediction for QuantumPrediction {
    fn p1(&self, a: &Setting) -> Result<f64> {
        self.single(Wing::One, a)
    }

    fn p2(&self, b: &Setting) -> Result<f64> {
        self.single(Wing::Two, b)
    }

    fn p12(&self, a: &Setting, b: &Setting) -> Result<f64> {
        let eta = self.efficiency;
        match (a, b) {
            (Setting::Angle(x), Setting::Angle(y)) => Ok(eta * eta / 2.0 * (x - y).cos().powi(2)),
            (Setting::Removed, Setting::Removed) => Ok(eta * eta),
            (Setting::Angle(_), Setting::Removed) | (Setting::Removed, Setting::Angle(_)) => {
                Ok(eta * eta / 2.0)
            }
            (Setting::Label(_), _) => Err(Error::UnknownSetting {
                wing: Wing::One,
                setting: a.to_string(),
            }),
            (_, Setting::Label(_)) => Err(Error::UnknownSetting {
                wing: Wing::Two,
                setting: b.to_string(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let q = builtin_quantum(1.0).unwrap();
        let d = Setting::degrees;
        assert_eq!(q.p12(&d(30.0), &d(30.0)).unwrap(), 0.5);
        assert!(q.p12(&d(0.0), &d(90.0)).unwrap() < 1e-30);
        assert!((q.p12(&d(0.0), &d(22.5)).unwrap() - 0.4267766952966369).abs() < 1e-15);
        assert_eq!(q.p12(&d(10.0), &Setting::Removed).unwrap(), 0.5);
        assert_eq!(q.p1(&d(10.0)).unwrap(), 0.5);

        let q = builtin_quantum(0.5).unwrap();
        assert_eq!(q.p12(&Setting::Removed, &Setting::Removed).unwrap(), 0.25);
        assert_eq!(q.p2(&d(10.0)).unwrap(), 0.25);
    }

    #[test]
    fn efficiency_domain() {
        for bad in [0.0, -0.1, 1.0000001, f64::NAN] {
            assert!(matches!(builtin_quantum(bad), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn labels_are_rejected() {
        let q = builtin_quantum(1.0).unwrap();
        assert!(q.p12(&Setting::label("up"), &Setting::Removed).is_err());
        assert!(q.p1(&Setting::label("up")).is_err());
    }
}
