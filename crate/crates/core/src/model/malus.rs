use super::{HiddenSample, LambdaSpace, Model, Setting, Wing};
use crate::error::{Error, Result};

/// Factorable stochastic model: λ is a polarization angle uniform on
/// `[0, π)` and each wing fires with probability `cos²(setting − λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MalusModel {
    efficiency: f64,
    space: LambdaSpace,
}

impl MalusModel {
    /// `efficiency` is the removed-polarizer detection probability. Values
    /// below 1 break no-enhancement on purpose.
    pub fn with_efficiency(efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Domain {
                what: "efficiency",
                value: efficiency,
                domain: "(0, 1]",
            });
        }
        Ok(MalusModel {
            efficiency,
            space: LambdaSpace::UniformAngle,
        })
    }
}

pub fn builtin_malus_lhv() -> MalusModel {
    MalusModel::with_efficiency(1.0).expect("unit efficiency is valid")
}

impl Model for MalusModel {
    fn name(&self) -> &str {
        "malus"
    }

    fn lambda_space(&self) -> &LambdaSpace {
        &self.space
    }

    fn efficiency(&self) -> f64 {
        self.efficiency
    }

    /// Every angle is accepted; this grid (22.5° steps) is what validation sweeps.
    fn settings(&self, _wing: Wing) -> Vec<Setting> {
        (0..8).map(|k| Setting::degrees(22.5 * k as f64)).collect()
    }

    fn response(&self, wing: Wing, lambda: &HiddenSample, setting: &Setting) -> Result<f64> {
        let Setting::Angle(angle) = setting else {
            return Err(Error::UnknownSetting {
                wing,
                setting: setting.to_string(),
            });
        };
        match lambda {
            HiddenSample::Continuous(pol) => Ok((angle - pol).cos().powi(2)),
            HiddenSample::Discrete(_) => Err(Error::Unsupported(
                "malus model has a continuous lambda space".into(),
            )),
        }
    }
}
