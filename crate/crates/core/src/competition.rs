//! Competition kernels `I` and the nonlocal term `I ⋆ u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldRole, Grid, TraitField};
use crate::measure::DiscreteMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CompetitionFamily {
    /// `a exp(-z^2 / (2 width^2))`; Fourier transform strictly positive.
    Gaussian { amplitude: f64, width: f64 },
    /// `I ≡ a`: a single resource. Positive semidefinite only.
    Constant { amplitude: f64 },
    /// Tabulated values at increasing offsets, linearly interpolated.
    Custom { offsets: Vec<f64>, values: Vec<f64> },
}

/// How positivity of the quadratic form `Σ I(x_i - x_k) c_i c_k` is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Positivity {
    /// Strictly positive Fourier transform (analytic).
    Definite,
    /// Nonnegative but degenerate (analytic); the environment `I ⋆ μ` is
    /// unique while `μ` need not be.
    SemiDefinite,
    /// Every sampled quadratic form on the grid was positive.
    SpotChecked,
    /// A sampled quadratic form was nonpositive.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionKernel {
    family: CompetitionFamily,
    positivity: Positivity,
}

impl CompetitionKernel {
    pub fn new(family: CompetitionFamily) -> Result<Self> {
        let positivity = match &family {
            CompetitionFamily::Gaussian { amplitude, width } => {
                if !(*amplitude > 0.0 && *width > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "gaussian needs amplitude > 0 and width > 0, got {amplitude}, {width}"
                    )));
                }
                Positivity::Definite
            }
            CompetitionFamily::Constant { amplitude } => {
                if !(*amplitude > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "constant kernel needs a positive amplitude, got {amplitude}"
                    )));
                }
                Positivity::SemiDefinite
            }
            CompetitionFamily::Custom { offsets, values } => {
                if offsets.len() < 2 || offsets.len() != values.len() {
                    return Err(Error::InvalidKernel(
                        "custom kernel needs matching offsets/values (>= 2)".into(),
                    ));
                }
                if offsets.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidKernel("custom offsets must increase".into()));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidKernel("custom values must be finite".into()));
                }
                // Certified later against a grid.
                Positivity::Failed
            }
        };
        Ok(CompetitionKernel { family, positivity })
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Result<Self> {
        CompetitionKernel::new(CompetitionFamily::Gaussian { amplitude, width })
    }

    pub fn constant(amplitude: f64) -> Result<Self> {
        CompetitionKernel::new(CompetitionFamily::Constant { amplitude })
    }

    pub fn family(&self) -> &CompetitionFamily {
        &self.family
    }

    pub fn positivity(&self) -> Positivity {
        self.positivity
    }

    pub fn eval(&self, z: f64) -> f64 {
        match &self.family {
            CompetitionFamily::Gaussian { amplitude, width } => {
                amplitude * (-0.5 * (z / width).powi(2)).exp()
            }
            CompetitionFamily::Constant { amplitude } => *amplitude,
            CompetitionFamily::Custom { offsets, values } => {
                let last = offsets.len() - 1;
                if z <= offsets[0] {
                    return values[0];
                }
                if z >= offsets[last] {
                    return values[last];
                }
                let k = offsets.partition_point(|&o| o <= z) - 1;
                let t = (z - offsets[k]) / (offsets[k + 1] - offsets[k]);
                values[k] + t * (values[k + 1] - values[k])
            }
        }
    }

    /// `sup |I|`, evaluated on `[-range, range]` for tabulated kernels.
    pub fn sup_norm(&self, range: f64) -> f64 {
        match &self.family {
            CompetitionFamily::Gaussian { amplitude, .. } => amplitude.abs(),
            CompetitionFamily::Constant { amplitude } => amplitude.abs(),
            CompetitionFamily::Custom { offsets, values } => offsets
                .iter()
                .zip(values)
                .filter(|(o, _)| o.abs() <= range)
                .fold(
                    self.eval(range).abs().max(self.eval(-range).abs()),
                    |m, (_, v)| m.max(v.abs()),
                ),
        }
    }

    /// Certifies a tabulated kernel by sampling quadratic forms over the grid
    /// points. Analytic families keep their certificate.
    pub fn certify_on(mut self, grid: &Grid, samples: usize, seed: u64) -> Self {
        if let CompetitionFamily::Custom { offsets, .. } = &self.family {
            let range = grid.width();
            if offsets[0] > -range || offsets[offsets.len() - 1] < range {
                self.positivity = Positivity::Failed;
                return self;
            }
            let plan = ConvolutionPlan::new(self.clone(), *grid);
            let mut rng = SplitMix64(seed);
            let ok = (0..samples).all(|_| {
                let c: Vec<f64> = (0..grid.len())
                    .map(|_| rng.next_f64() * 2.0 - 1.0)
                    .collect();
                let ic = plan.apply_values(&c);
                let q: f64 = ic.iter().zip(&c).map(|(a, b)| a * b).sum();
                q > 0.0
            });
            self.positivity = if ok {
                Positivity::SpotChecked
            } else {
                Positivity::Failed
            };
        }
        self
    }

    /// Gram matrix entry helper.
    pub fn gram(&self, points: &[f64]) -> Vec<Vec<f64>> {
        points
            .iter()
            .map(|&x| points.iter().map(|&y| self.eval(x - y)).collect())
            .collect()
    }
}

/// Precomputed Toeplitz table `I(m h)` for `m = -(n-1)..=n-1`; evaluates
/// `x_i -> h Σ_k I(x_i - x_k) u_k` without re-evaluating the kernel.
#[derive(Debug, Clone)]
pub struct ConvolutionPlan {
    kernel: CompetitionKernel,
    grid: Grid,
    table: Vec<f64>,
}

impl ConvolutionPlan {
    pub fn new(kernel: CompetitionKernel, grid: Grid) -> Self {
        let n = grid.len() as isize;
        let h = grid.spacing();
        let table = (-(n - 1)..n).map(|m| kernel.eval(m as f64 * h)).collect();
        ConvolutionPlan {
            kernel,
            grid,
            table,
        }
    }

    pub fn kernel(&self) -> &CompetitionKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply_values(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let h = self.grid.spacing();
        let mut out = vec![0.0; n];
        for (k, &uk) in u.iter().enumerate() {
            if uk == 0.0 {
                continue;
            }
            let w = uk * h;
            // out[i] += I((i - k) h) u_k h; table index of (i - k) is i - k + n - 1
            let row = &self.table[(n - 1 - k)..(2 * n - 1 - k)];
            for (o, t) in out.iter_mut().zip(row) {
                *o += t * w;
            }
        }
        out
    }

    pub fn apply(&self, u: &TraitField) -> Result<TraitField> {
        self.grid.check_same(u.grid())?;
        if let Some(index) = u.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "convolution input",
                index,
            });
        }
        Ok(TraitField::raw(
            self.grid,
            self.apply_values(u.values()),
            FieldRole::Rate,
        ))
    }
}

/// `x -> ∫ I(x - y) u(y) dy`, Riemann sum on the grid.
pub fn convolve(kernel: &CompetitionKernel, u: &TraitField) -> Result<TraitField> {
    ConvolutionPlan::new(kernel.clone(), *u.grid()).apply(u)
}

/// `x -> Σ_i α_i I(x - x_i)` sampled on `grid`.
pub fn convolve_measure(
    kernel: &CompetitionKernel,
    mu: &DiscreteMeasure,
    grid: &Grid,
) -> Result<TraitField> {
    if let Some(index) = mu
        .atoms()
        .iter()
        .position(|a| !(a.x.is_finite() && a.mass.is_finite()))
    {
        return Err(Error::NonFinite {
            what: "measure atom",
            index,
        });
    }
    let values = grid
        .points()
        .map(|x| {
            mu.atoms()
                .iter()
                .map(|a| a.mass * kernel.eval(x - a.x))
                .sum()
        })
        .collect();
    Ok(TraitField::raw(*grid, values, FieldRole::Rate))
}

/// Small deterministic generator for spot checks; not statistical quality.
pub(crate) struct SplitMix64(pub u64);

impl SplitMix64 {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
