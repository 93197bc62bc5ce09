//! The small-population correction `D_ε`.
//!
//! `D_ε` is an extra death rate that vanishes on the well-populated set
//! `S = {φ_ε >= -f_ε}` and grows linearly (slope `K_D`, capped at `D0`) with
//! the distance to it. The critical scale `f_ε = c ε log(1/ε)` corresponds to
//! a density threshold `e^{-f_ε/ε} = ε^c`, polynomial in `ε`.
//!
//! The distance profile is regularized by a ramp `ρ` that vanishes on
//! `[0, w]`, is `C^2`, and has slope exactly one past `2w`:
//!
//! ```text
//! ρ(s) = 0                          s <= w
//! ρ(s) = w (τ^3 - τ^4 / 2)          τ = (s - w) / w in (0, 1)
//! ρ(s) = s - 3w/2                   s >= 2w
//! ```
//!
//! so `0 <= ρ' <= 1` and `|ρ''| <= 3 / (2w)`.

use serde::{Deserialize, Serialize};

use crate::environment::EnvironmentSpec;
use crate::error::{Error, Result};
use crate::grid::{FieldRole, TraitField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMode {
    Off,
    DistanceRamp,
    /// Comparison mode: the mortality `(1/ε) sqrt(u / ū)` with
    /// `ū = e^{-f_ε/ε}`, read as a per-capita rate in the potential equation.
    SqrtMortality,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSpec {
    pub mode: CorrectionMode,
    /// `f_ε = c_threshold · ε log(1/ε)`.
    pub c_threshold: f64,
    /// `K_D`.
    pub slope: f64,
    /// `D0`.
    pub cap: f64,
    /// Ramp width `w`; defaults to `f_ε`, so that `D` vanishes within `f_ε`
    /// of `S` and has full slope `K_D` beyond `2 f_ε`.
    #[serde(default)]
    pub smoothing_width: Option<f64>,
}

impl CorrectionSpec {
    pub fn off() -> Self {
        CorrectionSpec {
            mode: CorrectionMode::Off,
            c_threshold: 1.0,
            slope: 0.0,
            cap: 0.0,
            smoothing_width: None,
        }
    }

    pub fn distance_ramp(c_threshold: f64, slope: f64, cap: f64) -> Self {
        CorrectionSpec {
            mode: CorrectionMode::DistanceRamp,
            c_threshold,
            slope,
            cap,
            smoothing_width: None,
        }
    }

    /// `f_ε = c ε log(1/ε)`.
    pub fn threshold(&self, eps: f64) -> f64 {
        self.c_threshold * eps * (1.0 / eps).ln()
    }

    pub fn width(&self, eps: f64) -> f64 {
        self.smoothing_width.unwrap_or(self.threshold(eps))
    }

    /// Largest value `D` can take.
    pub fn max_rate(&self) -> f64 {
        match self.mode {
            CorrectionMode::Off => 0.0,
            _ => self.cap,
        }
    }

    pub fn validate(&self, env: &EnvironmentSpec, eps: f64) -> Result<()> {
        if self.mode == CorrectionMode::Off {
            return Ok(());
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::hypothesis(
                "sizefe",
                format!("ε must lie in (0, 1), got {eps}"),
            ));
        }
        if !(self.c_threshold >= 1.0) {
            return Err(Error::hypothesis(
                "sizefe",
                format!(
                    "f_ε >= ε log(1/ε) needs c_threshold >= 1, got {}",
                    self.c_threshold
                ),
            ));
        }
        if !(self.cap > 0.0) {
            return Err(Error::hypothesis(
                "assdep",
                format!("cap D0 must be positive, got {}", self.cap),
            ));
        }
        let fe = self.threshold(eps);
        if let Some(w) = self.smoothing_width {
            if w < fe {
                return Err(Error::hypothesis(
                    "assdep",
                    format!("smoothing width {w} below the critical scale f_ε = {fe}"),
                ));
            }
        }
        if self.mode == CorrectionMode::DistanceRamp {
            let rate_slope = env.max_rate_slope();
            if self.slope < 2.0 * rate_slope {
                return Err(Error::hypothesis(
                    "assdep",
                    format!(
                        "slope K_D = {} below 2 max|∂x r| = {}",
                        self.slope,
                        2.0 * rate_slope
                    ),
                ));
            }
            if 2.0 * rate_slope > self.cap / (2.0 * fe) {
                return Err(Error::hypothesis(
                    "assdep",
                    format!(
                        "2 max|∂x r| = {} exceeds D0 / (2 f_ε) = {}: slope and cap conditions conflict",
                        2.0 * rate_slope,
                        self.cap / (2.0 * fe)
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// `D_ε` on the grid plus whether the populated set was empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionField {
    pub field: TraitField,
    pub empty_support: bool,
}

/// The regularized distance ramp.
pub fn ramp(s: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return s.max(0.0);
    }
    if s <= w {
        0.0
    } else if s >= 2.0 * w {
        s - 1.5 * w
    } else {
        let t = (s - w) / w;
        w * (t * t * t - 0.5 * t * t * t * t)
    }
}

/// Closed intervals where `φ >= level`, with endpoints located by linear
/// interpolation between grid points.
pub fn superlevel_intervals(phi: &TraitField, level: f64) -> Vec<(f64, f64)> {
    let g = phi.grid();
    let v = phi.values();
    let h = g.spacing();
    phi.superlevel_set(level)
        .components()
        .into_iter()
        .map(|(a, b)| {
            let left = if a == 0 {
                g.point(0)
            } else {
                g.point(a - 1) + h * (level - v[a - 1]) / (v[a] - v[a - 1])
            };
            let right = if b == v.len() - 1 {
                g.point(b)
            } else {
                g.point(b) + h * (v[b] - level) / (v[b] - v[b + 1])
            };
            (left, right)
        })
        .collect()
}

/// Distance from `x` to a sorted union of disjoint intervals.
pub fn distance_to_intervals(x: f64, intervals: &[(f64, f64)]) -> f64 {
    intervals.iter().fold(f64::INFINITY, |d, &(a, b)| {
        let di = if x < a {
            a - x
        } else if x > b {
            x - b
        } else {
            0.0
        };
        d.min(di)
    })
}

pub fn correction_build(
    spec: &CorrectionSpec,
    phi: &TraitField,
    eps: f64,
) -> Result<CorrectionField> {
    if !(eps > 0.0) {
        return Err(Error::NonPositiveEpsilon(eps));
    }
    let grid = *phi.grid();
    let fe = spec.threshold(eps);
    match spec.mode {
        CorrectionMode::Off => Ok(CorrectionField {
            field: TraitField::zeros(grid, FieldRole::Correction),
            empty_support: false,
        }),
        CorrectionMode::DistanceRamp => {
            let intervals = superlevel_intervals(phi, -fe);
            if intervals.is_empty() {
                return Ok(CorrectionField {
                    field: TraitField::raw(grid, vec![spec.cap; grid.len()], FieldRole::Correction),
                    empty_support: true,
                });
            }
            let w = spec.width(eps);
            let values = grid
                .points()
                .map(|x| (spec.slope * ramp(distance_to_intervals(x, &intervals), w)).min(spec.cap))
                .collect();
            Ok(CorrectionField {
                field: TraitField::raw(grid, values, FieldRole::Correction),
                empty_support: false,
            })
        }
        CorrectionMode::SqrtMortality => {
            // (1/ε) sqrt(u/ū) / (u/ε) = exp((f_ε - φ) / (2ε)), capped at D0.
            let log_cap = spec.cap.ln();
            let values = phi
                .values()
                .iter()
                .map(|p| {
                    let e = (fe - p) / (2.0 * eps);
                    if e >= log_cap {
                        spec.cap
                    } else {
                        e.exp()
                    }
                })
                .collect();
            Ok(CorrectionField {
                field: TraitField::raw(grid, values, FieldRole::Correction),
                empty_support: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RateProfile;
    use crate::grid::Grid;

    fn grid() -> Grid {
        Grid::symmetric(2.0, 401).unwrap()
    }

    #[test]
    fn ramp_shape() {
        let w = 0.2;
        assert_eq!(ramp(0.1, w), 0.0);
        assert_eq!(ramp(w, w), 0.0);
        assert!((ramp(2.0 * w, w) - 0.5 * w).abs() < 1e-15);
        assert!((ramp(1.0, w) - (1.0 - 0.3)).abs() < 1e-15);
        // slope in [0, 1], continuous derivative at both joints
        let d = 1e-6;
        for k in 0..1000 {
            let s = k as f64 * 0.001;
            let slope = (ramp(s + d, w) - ramp(s, w)) / d;
            assert!((-1e-9..=1.0 + 1e-6).contains(&slope), "s={s} slope={slope}");
        }
    }

    #[test]
    fn fully_populated_gives_zero() {
        let spec = CorrectionSpec::distance_ramp(1.0, 4.0, 2.0);
        let phi = TraitField::constant(grid(), FieldRole::Potential, 0.0).unwrap();
        let d = correction_build(&spec, &phi, 0.01).unwrap();
        assert_eq!(d.field.sup_norm(), 0.0);
        assert!(!d.empty_support);
    }

    #[test]
    fn point_set_gives_linear_distance_then_cap() {
        let spec = CorrectionSpec {
            smoothing_width: Some(0.0),
            ..CorrectionSpec::distance_ramp(1.0, 2.0, 3.0)
        };
        let g = grid();
        // populated only at x = 0, steep drop elsewhere
        let phi = TraitField::from_fn(g, FieldRole::Potential, |x| {
            if x.abs() < 1e-9 {
                0.0
            } else {
                -50.0
            }
        })
        .unwrap();
        let d = correction_build(&spec, &phi, 0.01).unwrap().field;
        let fe = spec.threshold(0.01);
        let i = g.nearest_index(0.5);
        // crossing lies a fraction fe/50 of a cell from zero
        assert!((d.values()[i] - 2.0 * 0.5).abs() <= 2.0 * g.spacing() * fe / 50.0 + 1e-12);
        assert_eq!(d.values()[g.nearest_index(1.9)], 3.0);
        assert_eq!(d.values()[g.nearest_index(0.0)], 0.0);
    }

    #[test]
    fn empty_support_is_flagged() {
        let spec = CorrectionSpec::distance_ramp(1.0, 2.0, 3.0);
        let phi = TraitField::constant(grid(), FieldRole::Potential, -5.0).unwrap();
        let d = correction_build(&spec, &phi, 0.01).unwrap();
        assert!(d.empty_support);
        assert!(d.field.values().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn ramp_correction_invariants() {
        let spec = CorrectionSpec::distance_ramp(1.5, 3.0, 1.2);
        let g = grid();
        let eps = 0.02;
        let phi = TraitField::from_fn(g, FieldRole::Potential, |x| {
            -(x - 0.3).powi(2) * (1.0 + x.sin().powi(2))
        })
        .unwrap();
        let d = correction_build(&spec, &phi, eps).unwrap().field;
        let fe = spec.threshold(eps);
        for (k, &p) in phi.values().iter().enumerate() {
            if p >= -fe {
                assert_eq!(d.values()[k], 0.0);
            }
            assert!((0.0..=1.2).contains(&d.values()[k]));
        }
        assert!(d.lipschitz() <= 3.0 * (1.0 + 1e-9));
    }

    #[test]
    fn sqrt_mortality_kills_below_threshold() {
        let spec = CorrectionSpec {
            mode: CorrectionMode::SqrtMortality,
            ..CorrectionSpec::distance_ramp(1.0, 0.0, 5.0)
        };
        let eps = 0.05;
        let fe = spec.threshold(eps);
        let g = grid();
        let phi = TraitField::from_fn(g, FieldRole::Potential, |x| -x.abs()).unwrap();
        let d = correction_build(&spec, &phi, eps).unwrap().field;
        for (k, &p) in phi.values().iter().enumerate() {
            let expected = ((fe - p) / (2.0 * eps)).exp().min(5.0);
            assert!((d.values()[k] - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn validator_enforces_slope_and_scale() {
        let g = Grid::symmetric(3.0, 301).unwrap();
        let r = RateProfile::Quadratic {
            peak: 1.0,
            center: 0.0,
            curvature: 0.5,
        }
        .sample(&g)
        .unwrap();
        let env = EnvironmentSpec::new(r, 2.0, 0.5, 0.5);
        // max |r'| = 3 at the edges
        let weak = CorrectionSpec::distance_ramp(1.0, 5.0, 10.0);
        assert!(matches!(
            weak.validate(&env, 0.01),
            Err(Error::Hypothesis {
                hypothesis: "assdep",
                ..
            })
        ));
        let ok = CorrectionSpec::distance_ramp(1.0, 6.0, 10.0);
        ok.validate(&env, 0.01).unwrap();
        let small_c = CorrectionSpec::distance_ramp(0.5, 6.0, 10.0);
        assert!(matches!(
            small_c.validate(&env, 0.01),
            Err(Error::Hypothesis {
                hypothesis: "sizefe",
                ..
            })
        ));
        let tight_cap = CorrectionSpec::distance_ramp(1.0, 6.0, 0.3);
        assert!(matches!(
            tight_cap.validate(&env, 0.01),
            Err(Error::Hypothesis {
                hypothesis: "assdep",
                ..
            })
        ));
    }
}
