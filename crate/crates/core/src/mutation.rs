//! Mutation kernels and the operators built from them.
//!
//! A kernel `K` is compactly supported on `[-s, s]` with `∫ z K(z) dz = 0`.
//! It is stored as a fixed 32-node Gauss–Legendre rule: nodes `z_j` and
//! combined coefficients `c_j = w_j K(z_j)`, so every integral against `K`
//! becomes a finite sum. After construction the nodes are shifted so that the
//! discrete first moment vanishes; `H(p) >= 0` and exact annihilation of
//! affine profiles both rely on that.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{interpolate_clamped, FieldRole, Grid, TraitField};

/// Exponents beyond this magnitude are treated as a hard overflow.
pub const MAX_EXPONENT: f64 = 700.0;

/// Number of Gauss–Legendre nodes used for every kernel.
pub const QUADRATURE_NODES: usize = 32;

/// Closed-form kernel shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MutationFamily {
    /// No mutations: `M = 0`, `H = 0`.
    None,
    /// `K = mass / (2 radius)` on `[-radius, radius]`.
    Uniform { radius: f64, mass: f64 },
    /// Smooth bump `exp(-1 / (1 - (z/radius)^2))`, normalized to `mass`.
    Bump { radius: f64, mass: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationKernel {
    family: MutationFamily,
    support_radius: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    coeffs: Vec<f64>,
    moment0: f64,
    moment1: f64,
    moment2: f64,
}

impl MutationKernel {
    pub fn new(family: MutationFamily) -> Result<Self> {
        let (radius, mass, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match family {
            MutationFamily::None => {
                return Ok(MutationKernel {
                    family,
                    support_radius: 0.0,
                    nodes: Vec::new(),
                    weights: Vec::new(),
                    coeffs: Vec::new(),
                    moment0: 0.0,
                    moment1: 0.0,
                    moment2: 0.0,
                })
            }
            MutationFamily::Uniform { radius, mass } => {
                (radius, mass, Box::new(move |_| mass / (2.0 * radius)))
            }
            MutationFamily::Bump { radius, mass } => (
                radius,
                mass,
                Box::new(move |z: f64| {
                    let t = z / radius;
                    if t.abs() >= 1.0 {
                        0.0
                    } else {
                        (-1.0 / (1.0 - t * t)).exp()
                    }
                }),
            ),
        };
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "radius must be positive, got {radius}"
            )));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "mass must be positive, got {mass}"
            )));
        }

        let (unit_nodes, unit_weights) = gauss_legendre(QUADRATURE_NODES);
        let nodes: Vec<f64> = unit_nodes.iter().map(|t| t * radius).collect();
        let weights: Vec<f64> = unit_weights.iter().map(|w| w * radius).collect();
        let mut coeffs: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(z, w)| w * density(*z))
            .collect();
        if let MutationFamily::Bump { .. } = family {
            let total: f64 = coeffs.iter().sum();
            coeffs.iter_mut().for_each(|c| *c *= mass / total);
        }
        if coeffs.iter().any(|&c| c < 0.0 || !c.is_finite()) {
            return Err(Error::InvalidKernel(
                "kernel values must be finite and nonnegative".into(),
            ));
        }

        let moment0: f64 = coeffs.iter().sum();
        let raw_first: f64 = coeffs.iter().zip(&nodes).map(|(c, z)| c * z).sum();
        let shift = raw_first / moment0;
        let nodes: Vec<f64> = nodes.iter().map(|z| z - shift).collect();
        let moment1: f64 = coeffs.iter().zip(&nodes).map(|(c, z)| c * z).sum();
        let moment2: f64 = coeffs.iter().zip(&nodes).map(|(c, z)| c * z * z).sum();
        if moment1.abs() > 1e-12 {
            return Err(Error::InvalidKernel(format!(
                "first moment {moment1:e} not centered"
            )));
        }

        Ok(MutationKernel {
            family,
            support_radius: radius + shift.abs(),
            nodes,
            weights,
            coeffs,
            moment0,
            moment1,
            moment2,
        })
    }

    pub fn none() -> Self {
        MutationKernel::new(MutationFamily::None).expect("the empty kernel is always valid")
    }

    pub fn uniform(radius: f64, mass: f64) -> Result<Self> {
        MutationKernel::new(MutationFamily::Uniform { radius, mass })
    }

    pub fn family(&self) -> MutationFamily {
        self.family
    }

    pub fn is_none(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_j K(z_j)` per node.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn moment0(&self) -> f64 {
        self.moment0
    }

    pub fn moment1(&self) -> f64 {
        self.moment1
    }

    pub fn moment2(&self) -> f64 {
        self.moment2
    }

    fn check_exponent(&self, p: f64, x: f64) -> Result<()> {
        let e = p.abs() * self.support_radius;
        if e > MAX_EXPONENT || !e.is_finite() {
            Err(Error::ExponentOverflow { x, exponent: e })
        } else {
            Ok(())
        }
    }

    /// `H(p) = ∫ K(z) (e^{pz} - 1) dz`.
    pub fn hamiltonian(&self, p: f64) -> Result<f64> {
        self.check_exponent(p, f64::NAN)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&self.nodes)
            .map(|(c, z)| c * (p * z).exp_m1())
            .sum())
    }

    /// `H'(p) = ∫ z K(z) e^{pz} dz`.
    pub fn hamiltonian_derivative(&self, p: f64) -> Result<f64> {
        self.check_exponent(p, f64::NAN)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&self.nodes)
            .map(|(c, z)| c * z * (p * z).exp())
            .sum())
    }

    /// `max |H'|` over `[-p_max, p_max]`. `H'` is increasing, so the extremes
    /// sit at the endpoints.
    pub fn max_hamiltonian_slope(&self, p_max: f64) -> Result<f64> {
        Ok(self
            .hamiltonian_derivative(p_max)?
            .abs()
            .max(self.hamiltonian_derivative(-p_max)?.abs()))
    }

    fn stencil(&self, grid: &Grid, eps: f64) -> Result<Vec<(f64, f64)>> {
        if !(eps > 0.0) {
            return Err(Error::NonPositiveEpsilon(eps));
        }
        let h = grid.spacing();
        Ok(self
            .nodes
            .iter()
            .zip(&self.coeffs)
            .map(|(z, c)| (eps * z / h, *c))
            .collect())
    }

    /// `M_ε(f)(x) = (1/ε) ∫ K(z) (f(x + εz) - f(x)) dz`.
    pub fn mutation_apply(&self, f: &TraitField, eps: f64) -> Result<TraitField> {
        let stencil = self.stencil(f.grid(), eps)?;
        let v = f.values();
        let out = (0..v.len())
            .map(|i| {
                let acc: f64 = stencil
                    .iter()
                    .map(|(s, c)| c * (interpolate_clamped(v, i as f64 + s) - v[i]))
                    .sum();
                acc / eps
            })
            .collect();
        Ok(TraitField::raw(*f.grid(), out, f.role()))
    }

    /// `H_ε(φ)(x) = ∫ K(z) (exp((φ(x + εz) - φ(x)) / ε) - 1) dz`.
    pub fn heps_apply(&self, phi: &TraitField, eps: f64) -> Result<TraitField> {
        let stencil = self.stencil(phi.grid(), eps)?;
        let grid = phi.grid();
        let v = phi.values();
        let mut out = Vec::with_capacity(v.len());
        for i in 0..v.len() {
            let mut acc = 0.0;
            for (s, c) in &stencil {
                let e = (interpolate_clamped(v, i as f64 + s) - v[i]) / eps;
                if e > MAX_EXPONENT || e.is_nan() {
                    return Err(Error::ExponentOverflow {
                        x: grid.point(i),
                        exponent: e,
                    });
                }
                acc += c * e.exp_m1();
            }
            out.push(acc);
        }
        Ok(TraitField::raw(*grid, out, FieldRole::Rate))
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
