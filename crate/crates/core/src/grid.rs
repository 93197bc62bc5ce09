//! Uniform trait grids, sampled fields and point-set masks.
//!
//! The trait line is truncated to `[x_min, x_max]` and sampled at `n` equally
//! spaced points. Everything downstream (kernels, solvers, diagnostics) works on
//! these samples; off-grid values are produced by piecewise-linear
//! interpolation with constant extension past either end.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_POINTS} points, got {n}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "bad interval [{x_min}, {x_max}]"
            )));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Ok(Grid { x_min, x_max, n, h })
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Grid::new(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn point(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.h
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.n).map(move |k| self.point(k))
    }

    /// Index of the grid point closest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let k = ((x - self.x_min) / self.h).round();
        k.clamp(0.0, (self.n - 1) as f64) as usize
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= 1e-12 * (1.0 + self.x_min.abs())
            && (self.x_max - other.x_max).abs() <= 1e-12 * (1.0 + self.x_max.abs())
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[{}, {}]x{} vs [{}, {}]x{}",
                self.x_min, self.x_max, self.n, other.x_min, other.x_max, other.n
            )))
        }
    }
}

/// What a sampled field represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Density,
    Potential,
    Rate,
    Correction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraitField {
    grid: Grid,
    values: Vec<f64>,
    role: FieldRole,
}

impl TraitField {
    pub fn new(grid: Grid, values: Vec<f64>, role: FieldRole) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "field",
                index,
            });
        }
        if role == FieldRole::Density {
            if let Some(index) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "density negative at index {index}"
                )));
            }
        }
        Ok(TraitField { grid, values, role })
    }

    pub fn from_fn(grid: Grid, role: FieldRole, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.points().map(f).collect();
        TraitField::new(grid, values, role)
    }

    pub fn constant(grid: Grid, role: FieldRole, value: f64) -> Result<Self> {
        TraitField::new(grid, vec![value; grid.len()], role)
    }

    pub fn zeros(grid: Grid, role: FieldRole) -> Self {
        TraitField {
            grid,
            values: vec![0.0; grid.len()],
            role,
        }
    }

    /// Builds a field without validation. Callers guarantee finiteness.
    pub(crate) fn raw(grid: Grid, values: Vec<f64>, role: FieldRole) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        TraitField { grid, values, role }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Riemann sum `h * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// Piecewise-linear interpolation, constant beyond the ends.
    pub fn interpolate(&self, x: f64) -> f64 {
        interpolate_clamped(&self.values, (x - self.grid.x_min()) / self.grid.spacing())
    }

    /// Largest one-sided difference quotient `max |Δφ/Δx|`.
    pub fn lipschitz(&self) -> f64 {
        let h = self.grid.spacing();
        self.values
            .windows(2)
            .fold(0.0_f64, |m, w| m.max(((w[1] - w[0]) / h).abs()))
    }

    /// Smallest centered second difference over the interior points.
    pub fn min_second_difference(&self) -> f64 {
        let h2 = self.grid.spacing().powi(2);
        self.values
            .windows(3)
            .fold(f64::INFINITY, |m, w| m.min((w[2] - 2.0 * w[1] + w[0]) / h2))
    }

    pub fn sup_distance(&self, other: &TraitField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Membership mask `{x : value(x) >= level}`.
    pub fn superlevel_set(&self, level: f64) -> SetMask {
        SetMask::from_flags(self.grid, self.values.iter().map(|&v| v >= level).collect())
    }
}

/// Linear interpolation of `values` at fractional index `s`, clamped to the ends.
#[inline]
pub(crate) fn interpolate_clamped(values: &[f64], s: f64) -> f64 {
    let last = values.len() - 1;
    if s <= 0.0 {
        return values[0];
    }
    if s >= last as f64 {
        return values[last];
    }
    let k = s.floor() as usize;
    let theta = s - k as f64;
    if theta == 0.0 {
        values[k]
    } else {
        values[k] + theta * (values[k + 1] - values[k])
    }
}

/// A subset of grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMask {
    grid: Grid,
    flags: Vec<bool>,
}

impl SetMask {
    pub fn from_flags(grid: Grid, flags: Vec<bool>) -> Self {
        assert_eq!(flags.len(), grid.len(), "mask length must match the grid");
        SetMask { grid, flags }
    }

    pub fn empty(grid: Grid) -> Self {
        SetMask::from_flags(grid, vec![false; grid.len()])
    }

    pub fn full(grid: Grid) -> Self {
        SetMask::from_flags(grid, vec![true; grid.len()])
    }

    /// Grid points inside the closed interval `[a, b]`.
    pub fn interval(grid: Grid, a: f64, b: f64) -> Self {
        let tol = 1e-9 * grid.spacing();
        let flags = grid
            .points()
            .map(|x| x >= a - tol && x <= b + tol)
            .collect();
        SetMask::from_flags(grid, flags)
    }

    pub fn from_indices(grid: Grid, indices: &[usize]) -> Self {
        let mut flags = vec![false; grid.len()];
        for &i in indices {
            flags[i] = true;
        }
        SetMask::from_flags(grid, flags)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn contains(&self, k: usize) -> bool {
        self.flags[k]
    }

    pub fn is_empty(&self) -> bool {
        !self.flags.iter().any(|&f| f)
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.flags.len()).filter(|&k| self.flags[k]).collect()
    }

    pub fn member_points(&self) -> Vec<f64> {
        self.indices()
            .into_iter()
            .map(|k| self.grid.point(k))
            .collect()
    }

    /// Maximal runs of consecutive members as inclusive index ranges, sorted.
    pub fn components(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = None;
        for (k, &f) in self.flags.iter().enumerate() {
            match (f, start) {
                (true, None) => start = Some(k),
                (false, Some(s)) => {
                    out.push((s, k - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            out.push((s, self.flags.len() - 1));
        }
        out
    }

    /// Components as closed trait intervals.
    pub fn component_intervals(&self) -> Vec<(f64, f64)> {
        self.components()
            .into_iter()
            .map(|(a, b)| (self.grid.point(a), self.grid.point(b)))
            .collect()
    }

    pub fn union(&self, other: &SetMask) -> SetMask {
        let flags = self
            .flags
            .iter()
            .zip(&other.flags)
            .map(|(a, b)| *a || *b)
            .collect();
        SetMask::from_flags(self.grid, flags)
    }

    /// Distance from every grid point to the mask (`+inf` if the mask is empty).
    pub fn distance_field(&self) -> Vec<f64> {
        let n = self.flags.len();
        let h = self.grid.spacing();
        let mut left = vec![f64::INFINITY; n];
        let mut last: Option<usize> = None;
        for k in 0..n {
            if self.flags[k] {
                last = Some(k);
            }
            if let Some(j) = last {
                left[k] = (k - j) as f64 * h;
            }
        }
        let mut next: Option<usize> = None;
        for k in (0..n).rev() {
            if self.flags[k] {
                next = Some(k);
            }
            if let Some(j) = next {
                left[k] = left[k].min((j - k) as f64 * h);
            }
        }
        left
    }
}

/// `d(x, Ω) = min over members y of |x - y|`; `+inf` when `Ω` is empty.
pub fn distance_to_set(x: f64, set: &SetMask) -> f64 {
    let grid = set.grid();
    if set.is_empty() {
        return f64::INFINITY;
    }
    // Nearest members on either side of x.
    let s = ((x - grid.x_min()) / grid.spacing()).floor();
    let n = grid.len() as isize;
    let pivot = (s as isize).clamp(-1, n - 1);
    let mut best = f64::INFINITY;
    let mut k = pivot;
    while k >= 0 {
        if set.contains(k as usize) {
            best = best.min((x - grid.point(k as usize)).abs());
            break;
        }
        k -= 1;
    }
    let mut k = pivot + 1;
    while k < n {
        if set.contains(k as usize) {
            best = best.min((x - grid.point(k as usize)).abs());
            break;
        }
        k += 1;
    }
    best
}

/// `δ(O1, O2) = sup over x in O1 of d(x, O2)`.
///
/// Zero when `O1` is empty, `+inf` when `O1` is nonempty and `O2` is empty.
pub fn semi_distance(o1: &SetMask, o2: &SetMask) -> f64 {
    if o1.is_empty() {
        return 0.0;
    }
    if o2.is_empty() {
        return f64::INFINITY;
    }
    let dist = o2.distance_field();
    o1.indices()
        .into_iter()
        .fold(0.0_f64, |m, k| m.max(dist[k]))
}
