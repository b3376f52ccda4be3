//! Small library of analytic fields used for initial states, wall data,
//! body forces, controls and targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Geometry and material constants a preset may depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PresetContext {
    pub lx: f64,
    pub ly: f64,
    pub mu: f64,
    /// Slip friction, `None` for no-slip walls.
    pub alpha: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldPreset {
    #[default]
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// Single decaying vortex cell
    /// `A e^{-mu k^2 t} (sin(kx x) cos(ky y), -(kx/ky) cos(kx x) sin(ky y))`
    /// with `kx = pi/lx`, `ky = pi/ly`; divergence-free with zero normal
    /// velocity on the box walls.
    TaylorVortex {
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Channel profile `(G y (ly - y) / (2 mu) + G ly / (2 alpha), 0)`, the
    /// steady flow driven by the body force `(G, 0)` (last term only under
    /// slip walls).
    Poiseuille {
        #[serde(default = "one")]
        gradient: f64,
    },
}

impl FieldPreset {
    pub fn validate(&self, key: &str) -> Result<()> {
        let finite = match self {
            FieldPreset::Zero => true,
            FieldPreset::Constant { value } => value.iter().all(|v| v.is_finite()),
            FieldPreset::TaylorVortex { amplitude } => amplitude.is_finite(),
            FieldPreset::Poiseuille { gradient } => gradient.is_finite(),
        };
        if finite {
            Ok(())
        } else {
            Err(Error::config(key, "preset parameters must be finite"))
        }
    }

    pub fn eval(&self, ctx: &PresetContext, t: f64, x: f64, y: f64) -> [f64; 2] {
        match *self {
            FieldPreset::Zero => [0.0, 0.0],
            FieldPreset::Constant { value } => value,
            FieldPreset::TaylorVortex { amplitude } => {
                let (kx, ky) = (PI / ctx.lx, PI / ctx.ly);
                let a = amplitude * (-ctx.mu * (kx * kx + ky * ky) * t).exp();
                [
                    a * (kx * x).sin() * (ky * y).cos(),
                    -a * (kx / ky) * (kx * x).cos() * (ky * y).sin(),
                ]
            }
            FieldPreset::Poiseuille { gradient } => {
                let slip = ctx.alpha.map_or(0.0, |a| gradient * ctx.ly / (2.0 * a));
                [gradient * y * (ctx.ly - y) / (2.0 * ctx.mu) + slip, 0.0]
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            FieldPreset::Zero => true,
            FieldPreset::Constant { value } => value == &[0.0, 0.0],
            FieldPreset::TaylorVortex { amplitude } => *amplitude == 0.0,
            FieldPreset::Poiseuille { gradient } => *gradient == 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_vortex_is_divergence_free() {
        let ctx = PresetContext {
            lx: 2.0,
            ly: 1.0,
            mu: 0.1,
            alpha: None,
        };
        let p = FieldPreset::TaylorVortex { amplitude: 1.5 };
        let h = 1e-5;
        for &(x, y) in &[(0.3, 0.2), (1.1, 0.7), (1.9, 0.45)] {
            let dx = (p.eval(&ctx, 0.2, x + h, y)[0] - p.eval(&ctx, 0.2, x - h, y)[0]) / (2.0 * h);
            let dy = (p.eval(&ctx, 0.2, x, y + h)[1] - p.eval(&ctx, 0.2, x, y - h)[1]) / (2.0 * h);
            assert!((dx + dy).abs() < 1e-8);
        }
        assert!(p.eval(&ctx, 0.0, 0.0, 0.3)[0].abs() < 1e-15);
        assert!(p.eval(&ctx, 0.0, 0.4, 0.0)[1].abs() < 1e-15);
    }

    #[test]
    fn poiseuille_wall_value() {
        let ctx = PresetContext {
            lx: 1.0,
            ly: 1.0,
            mu: 1.0,
            alpha: Some(10.0),
        };
        let p = FieldPreset::Poiseuille { gradient: 1.0 };
        assert!((p.eval(&ctx, 0.0, 0.5, 0.0)[0] - 0.05).abs() < 1e-15);
        assert!((p.eval(&ctx, 0.0, 0.5, 0.5)[0] - 0.175).abs() < 1e-15);
    }
}
