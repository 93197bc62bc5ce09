//! Reproduction-rate landscapes and the confinement hypotheses on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldRole, Grid, TraitField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: f64,
    pub height: f64,
    pub width: f64,
}

/// Closed-form rate families `r(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RateProfile {
    /// `peak - curvature (x - center)^2`.
    Quadratic {
        peak: f64,
        center: f64,
        curvature: f64,
    },
    /// `inside` on `|x - center| <= half_width`, a cosine transition of length
    /// `transition`, then `outside`.
    Plateau {
        inside: f64,
        outside: f64,
        #[serde(default)]
        center: f64,
        half_width: f64,
        transition: f64,
    },
    /// `base + Σ height exp(-(x - center)^2 / (2 width^2))`.
    Bumps { base: f64, bumps: Vec<GaussianBump> },
}

impl RateProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RateProfile::Quadratic {
                peak,
                center,
                curvature,
            } => peak - curvature * (x - center).powi(2),
            RateProfile::Plateau {
                inside,
                outside,
                center,
                half_width,
                transition,
            } => {
                let d = (x - center).abs() - half_width;
                if d <= 0.0 {
                    *inside
                } else if d >= *transition {
                    *outside
                } else {
                    let s = 0.5 * (1.0 - (std::f64::consts::PI * d / transition).cos());
                    inside + (outside - inside) * s
                }
            }
            RateProfile::Bumps { base, bumps } => {
                base + bumps
                    .iter()
                    .map(|b| b.height * (-0.5 * ((x - b.center) / b.width).powi(2)).exp())
                    .sum::<f64>()
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<TraitField> {
        TraitField::from_fn(*grid, FieldRole::Rate, |x| self.eval(x))
    }
}

/// A reproduction rate on the grid, optionally replaced by a second landscape
/// from `t_switch` on, together with the confinement radii.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    rate: TraitField,
    switch: Option<(f64, TraitField)>,
    /// `r <= -r0` for `|x| > radius`.
    pub radius: f64,
    pub r0: f64,
    /// `min_{|x| < inner_radius} r > 0`.
    pub inner_radius: f64,
}

impl EnvironmentSpec {
    pub fn new(rate: TraitField, radius: f64, r0: f64, inner_radius: f64) -> Self {
        EnvironmentSpec {
            rate: rate.with_role(FieldRole::Rate),
            switch: None,
            radius,
            r0,
            inner_radius,
        }
    }

    pub fn with_switch(mut self, t_switch: f64, rate_after: TraitField) -> Self {
        self.switch = Some((t_switch, rate_after.with_role(FieldRole::Rate)));
        self
    }

    pub fn grid(&self) -> &Grid {
        self.rate.grid()
    }

    /// Rate in force at time `t`.
    pub fn rate_at(&self, t: f64) -> &TraitField {
        match &self.switch {
            Some((ts, after)) if t >= *ts => after,
            _ => &self.rate,
        }
    }

    pub fn initial_rate(&self) -> &TraitField {
        &self.rate
    }

    pub fn switch(&self) -> Option<(f64, &TraitField)> {
        self.switch.as_ref().map(|(t, r)| (*t, r))
    }

    fn rates(&self) -> impl Iterator<Item = &TraitField> {
        std::iter::once(&self.rate).chain(self.switch.as_ref().map(|(_, r)| r))
    }

    /// `max |r|` over all landscapes.
    pub fn sup_rate(&self) -> f64 {
        self.rates().map(|r| r.sup_norm()).fold(0.0, f64::max)
    }

    /// `max r` over all landscapes.
    pub fn max_rate(&self) -> f64 {
        self.rates()
            .map(|r| r.max())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max |∂x r|` by finite differences over all landscapes.
    pub fn max_rate_slope(&self) -> f64 {
        self.rates().map(|r| r.lipschitz()).fold(0.0, f64::max)
    }

    /// Checks the confinement hypotheses on every landscape.
    pub fn validate(&self) -> Result<()> {
        let grid = *self.grid();
        if !(self.r0 > 0.0) {
            return Err(Error::hypothesis(
                "boundeta",
                format!("r0 must be positive, got {}", self.r0),
            ));
        }
        if !(grid.x_min() < -self.radius && grid.x_max() > self.radius) {
            return Err(Error::hypothesis(
                "boundeta",
                format!(
                    "grid [{}, {}] must extend beyond the confinement radius {}",
                    grid.x_min(),
                    grid.x_max(),
                    self.radius
                ),
            ));
        }
        for r in self.rates() {
            for (k, x) in grid.points().enumerate() {
                let v = r.values()[k];
                if x.abs() > self.radius && v > -self.r0 {
                    return Err(Error::hypothesis(
                        "boundeta",
                        format!(
                            "r({x:.4}) = {v:.4} > -r0 = {:.4} outside |x| <= {}",
                            -self.r0, self.radius
                        ),
                    ));
                }
            }
        }
        let inner: Vec<f64> = grid
            .points()
            .zip(self.rate.values())
            .filter(|(x, _)| x.abs() < self.inner_radius)
            .map(|(_, v)| *v)
            .collect();
        if inner.is_empty() {
            return Err(Error::hypothesis(
                "boundpop",
                "no grid point inside the inner radius",
            ));
        }
        let min_inner = inner.iter().copied().fold(f64::INFINITY, f64::min);
        if min_inner <= 0.0 {
            return Err(Error::hypothesis(
                "boundpop",
                format!(
                    "min r on |x| < {} is {min_inner:.4}, must be positive",
                    self.inner_radius
                ),
            ));
        }
        Ok(())
    }
}
