//! Evolutionarily stable measures on an admissible set `Ω`.
//!
//! `μ = Σ α_i δ_{x_i}` is an ESS on `Ω` when `supp μ ⊆ Ω`, `r - I⋆μ <= 0` on
//! `Ω` and `r - I⋆μ = 0` on `supp μ`. On grid points this is the linear
//! complementarity problem
//!
//! ```text
//! α >= 0,   w = Gα - r >= 0,   α · w = 0,   G_ik = I(x_i - x_k),
//! ```
//!
//! which is the optimality system of `min ½ αᵀGα - rᵀα` over `α >= 0`, so a
//! positive definite `G` makes the solution unique.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::competition::{convolve_measure, CompetitionKernel, Positivity, SplitMix64};
use crate::error::{Error, Result};
use crate::grid::{SetMask, TraitField};
use crate::measure::{Atom, DiscreteMeasure};

/// Largest admissible set handed to the active-set solver.
pub const ACTIVE_SET_BUDGET: usize = 2000;

fn gram(kernel: &CompetitionKernel, points: &[f64], idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
        kernel.eval(points[idx[a]] - points[idx[b]])
    })
}

/// Solves `G_PP s = r_P` by Cholesky; a vanishing pivot means `G` is singular
/// on `P`.
fn solve_on(
    kernel: &CompetitionKernel,
    points: &[f64],
    r: &[f64],
    idx: &[usize],
) -> Result<Vec<f64>> {
    let g = gram(kernel, points, idx);
    let diag_max = g.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let chol = g
        .cholesky()
        .ok_or(Error::SingularGram { size: idx.len() })?;
    let l = chol.l_dirty();
    if (0..idx.len()).any(|i| l[(i, i)] * l[(i, i)] <= 1e-13 * diag_max) {
        return Err(Error::SingularGram { size: idx.len() });
    }
    let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| r[i]));
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Result of the complementarity solve on explicit points.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSetSolution {
    /// Masses per input point, zero off the active set.
    pub alpha: Vec<f64>,
    /// Active indices in increasing order.
    pub active: Vec<usize>,
    pub iterations: usize,
}

/// Primal active-set method: repeatedly activates the point of largest
/// fitness `r - Gα` (ties to the leftmost) and backtracks along the segment
/// to the unconstrained solution on the active set whenever a mass would turn
/// nonpositive. `warm` seeds the active set.
pub fn solve_complementarity(
    kernel: &CompetitionKernel,
    points: &[f64],
    r: &[f64],
    warm: &[usize],
) -> Result<ActiveSetSolution> {
    let n = points.len();
    assert_eq!(r.len(), n, "one rate per point");
    if n > ACTIVE_SET_BUDGET {
        return Err(Error::Budget {
            points: n,
            budget: ACTIVE_SET_BUDGET,
        });
    }
    let scale = 1.0 + r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 1e-13 * scale;
    let mut active: Vec<usize> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();

    let mut seed: Vec<usize> = warm.iter().copied().filter(|&i| i < n).collect();
    seed.sort_unstable();
    seed.dedup();
    if !seed.is_empty() {
        if let Ok(s) = solve_on(kernel, points, r, &seed) {
            if s.iter().all(|&v| v > 0.0) {
                active = seed;
                alpha = s;
            }
        }
    }

    let max_outer = 4 * n + 50;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_outer {
            return Err(Error::EssFailure {
                t: f64::NAN,
                detail: format!("active-set iteration limit {max_outer} reached"),
            });
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if active.contains(&i) {
                continue;
            }
            let fit = r[i]
                - active
                    .iter()
                    .zip(&alpha)
                    .map(|(&k, a)| a * kernel.eval(points[i] - points[k]))
                    .sum::<f64>();
            if fit > tol && best.map_or(true, |(_, b)| fit > b) {
                best = Some((i, fit));
            }
        }
        let Some((j, _)) = best else { break };
        active.push(j);
        alpha.push(0.0);
        loop {
            let s = solve_on(kernel, points, r, &active)?;
            if s.iter().all(|&v| v > 0.0) {
                alpha = s;
                break;
            }
            let mut theta = f64::INFINITY;
            let mut blocking = 0;
            for (k, (a, v)) in alpha.iter().zip(&s).enumerate() {
                if *v <= 0.0 {
                    let step = a / (a - v);
                    if step < theta {
                        theta = step;
                        blocking = k;
                    }
                }
            }
            if theta == 0.0 && blocking == active.len() - 1 {
                // the entering point cannot carry mass: optimal up to rounding
                active.pop();
                alpha.pop();
                return Ok(finish(n, active, alpha, iterations));
            }
            for (a, v) in alpha.iter_mut().zip(&s) {
                *a += theta * (v - *a);
            }
            alpha[blocking] = 0.0;
            let floor = 1e-15 * scale;
            let keep: Vec<bool> = alpha.iter().map(|a| *a > floor).collect();
            active = active
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(i, _)| *i)
                .collect();
            alpha = alpha
                .iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(a, _)| *a)
                .collect();
            if active.is_empty() {
                break;
            }
        }
    }
    Ok(finish(n, active, alpha, iterations))
}

fn finish(n: usize, active: Vec<usize>, alpha: Vec<f64>, iterations: usize) -> ActiveSetSolution {
    let mut full = vec![0.0; n];
    for (&i, &a) in active.iter().zip(&alpha) {
        full[i] = a;
    }
    let mut active = active;
    active.sort_unstable();
    ActiveSetSolution {
        alpha: full,
        active,
        iterations,
    }
}

fn admissible(omega: &SetMask, r: &TraitField) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    omega.grid().check_same(r.grid())?;
    let idx = omega.indices();
    let points = idx.iter().map(|&i| omega.grid().point(i)).collect();
    let rates = idx.iter().map(|&i| r.values()[i]).collect();
    Ok((idx, points, rates))
}

/// ESS on the grid points of `Ω` by the active-set method.
pub fn ess_active_set(
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
) -> Result<DiscreteMeasure> {
    ActiveSetSolver::new().solve(omega, r, kernel)
}

/// Active-set solver that warm-starts from the previous active locations.
#[derive(Debug, Clone, Default)]
pub struct ActiveSetSolver {
    previous: Vec<f64>,
}

impl ActiveSetSolver {
    pub fn new() -> Self {
        ActiveSetSolver::default()
    }

    pub fn solve(
        &mut self,
        omega: &SetMask,
        r: &TraitField,
        kernel: &CompetitionKernel,
    ) -> Result<DiscreteMeasure> {
        let (_, points, rates) = admissible(omega, r)?;
        let h = omega.grid().spacing();
        let warm: Vec<usize> = self
            .previous
            .iter()
            .filter_map(|&x| points.iter().position(|&p| (p - x).abs() < 0.5 * h))
            .collect();
        let sol = solve_complementarity(kernel, &points, &rates, &warm)?;
        self.previous = sol.active.iter().map(|&i| points[i]).collect();
        Ok(DiscreteMeasure::new(
            sol.active
                .iter()
                .map(|&i| Atom {
                    x: points[i],
                    mass: sol.alpha[i],
                })
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicatorParams {
    pub max_iters: usize,
    /// Stop once `max |(r - I⋆m) m| < tol` and `max (r - I⋆m) < tol_ineq`.
    pub tol: f64,
    pub tol_ineq: f64,
    /// Annealing stages `weight_k = initial_weight 2^{-k}` before the final
    /// stage without mutation.
    pub stages: usize,
    pub initial_weight: f64,
    pub stage_iters: usize,
    /// Grid masses at most `atom_rel_tol · total` are dropped.
    pub atom_rel_tol: f64,
    /// In the final stage, every `polish_every` iterations the masses above
    /// `polish_rel · max m` are moved to the minimizer of the Lyapunov
    /// function on their face and the rest reset to a tiny floor. 0 disables.
    pub polish_every: usize,
    pub polish_rel: f64,
}

impl Default for ReplicatorParams {
    fn default() -> Self {
        ReplicatorParams {
            max_iters: 200_000,
            tol: 1e-10,
            tol_ineq: 1e-9,
            stages: 10,
            initial_weight: 1e-2,
            stage_iters: 2_000,
            atom_rel_tol: 1e-8,
            polish_every: 500,
            polish_rel: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorOutcome {
    /// Pruned grid masses.
    pub grid_measure: DiscreteMeasure,
    /// Contiguous grid clusters collapsed to their centroids.
    pub atoms: DiscreteMeasure,
    pub iterations: usize,
    /// `max |(r - I⋆m) m|` at exit.
    pub residual: f64,
    pub converged: bool,
}

/// ESS on `Ω` as the long-time limit of the replicator flow
/// `m' = (r - I⋆m) m` plus an annealed neighbour-mixing term, started from
/// uniform mass on `Ω`.
pub fn ess_replicator(
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
    params: &ReplicatorParams,
) -> Result<ReplicatorOutcome> {
    let n = omega.count();
    ess_replicator_from(omega, r, kernel, params, &vec![1.0; n])
}

/// As [`ess_replicator`] from the given positive weights on `Ω`'s points,
/// rescaled to a natural total mass.
pub fn ess_replicator_from(
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
    params: &ReplicatorParams,
    init: &[f64],
) -> Result<ReplicatorOutcome> {
    let (idx, points, rates) = admissible(omega, r)?;
    let n = idx.len();
    assert_eq!(init.len(), n, "one initial weight per admissible point");
    let r_max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let i0 = kernel.eval(0.0);
    if n == 0 || r_max <= 0.0 {
        return Ok(ReplicatorOutcome {
            grid_measure: DiscreteMeasure::empty(),
            atoms: DiscreteMeasure::empty(),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    if init.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::hypothesis(
            "ess",
            "replicator initial weights must be positive",
        ));
    }
    // Toeplitz table over grid-index differences.
    let n_grid = omega.grid().len();
    let h = omega.grid().spacing();
    let table: Vec<f64> = (0..n_grid).map(|m| kernel.eval(m as f64 * h)).collect();
    let table_neg: Vec<f64> = (0..n_grid).map(|m| kernel.eval(-(m as f64) * h)).collect();
    let g = |a: usize, b: usize| {
        if idx[a] >= idx[b] {
            table[idx[a] - idx[b]]
        } else {
            table_neg[idx[b] - idx[a]]
        }
    };
    let i_sup = kernel.sup_norm(omega.grid().width());
    let r_sup = rates.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let target = r_max / i0;
    let w_total: f64 = init.iter().sum();
    let mut m: Vec<f64> = init.iter().map(|w| w / w_total * target).collect();
    let neighbours: Vec<(Option<usize>, Option<usize>)> = (0..n)
        .map(|a| {
            let left = (a > 0 && idx[a - 1] + 1 == idx[a]).then(|| a - 1);
            let right = (a + 1 < n && idx[a + 1] == idx[a] + 1).then(|| a + 1);
            (left, right)
        })
        .collect();
    let mut fitness = vec![0.0; n];
    let compute_fitness = |m: &[f64], fitness: &mut [f64]| {
        for a in 0..n {
            let mut acc = 0.0;
            for (b, mb) in m.iter().enumerate() {
                acc += g(a, b) * mb;
            }
            fitness[a] = rates[a] - acc;
        }
    };

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for stage in 0..=params.stages {
        let weight = if stage < params.stages {
            params.initial_weight * 0.5_f64.powi(stage as i32)
        } else {
            0.0
        };
        let budget = if stage < params.stages {
            params.stage_iters
        } else {
            params.max_iters
        };
        for _ in 0..budget {
            if iterations >= params.max_iters {
                break;
            }
            iterations += 1;
            compute_fitness(&m, &mut fitness);
            let total: f64 = m.iter().sum();
            if weight == 0.0 {
                residual = fitness
                    .iter()
                    .zip(&m)
                    .fold(0.0_f64, |acc, (f, x)| acc.max((f * x).abs()));
                let worst = fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if residual < params.tol && worst < params.tol_ineq {
                    converged = true;
                    break;
                }
            }
            if weight == 0.0 && params.polish_every > 0 && iterations % params.polish_every == 0 {
                polish(
                    &mut m,
                    &fitness,
                    &rates,
                    &g,
                    params.polish_rel,
                    1e-14 * target,
                );
                continue;
            }
            let dt = 1.0 / (i_sup * total + r_sup);
            for (x, f) in m.iter_mut().zip(&fitness) {
                *x *= (dt * f).exp();
            }
            if weight > 0.0 {
                let old = m.clone();
                for (a, (l, rgt)) in neighbours.iter().enumerate() {
                    let mut flow = 0.0;
                    if let Some(l) = l {
                        flow += old[*l] - old[a];
                    }
                    if let Some(rr) = rgt {
                        flow += old[*rr] - old[a];
                    }
                    m[a] += dt * weight * flow;
                }
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        compute_fitness(&m, &mut fitness);
        residual = fitness
            .iter()
            .zip(&m)
            .fold(0.0_f64, |acc, (f, x)| acc.max((f * x).abs()));
    }
    let total: f64 = m.iter().sum();
    let floor = params.atom_rel_tol * total.max(target);
    let grid_measure = DiscreteMeasure::new(
        points
            .iter()
            .zip(&m)
            .filter(|(_, &x)| x > floor)
            .map(|(&x, &mass)| Atom { x, mass })
            .collect(),
    );
    let atoms = grid_measure.collapse_clusters(1.5 * h);
    Ok(ReplicatorOutcome {
        grid_measure,
        atoms,
        iterations,
        residual,
        converged,
    })
}

/// `V(m) = ½ mᵀGm - rᵀm` decreases along the replicator flow.
fn lyapunov(m: &[f64], rates: &[f64], g: &impl Fn(usize, usize) -> f64) -> f64 {
    let n = m.len();
    let mut v = 0.0;
    for a in 0..n {
        let mut acc = 0.0;
        for (b, mb) in m.iter().enumerate() {
            acc += g(a, b) * mb;
        }
        v += m[a] * (0.5 * acc - rates[a]);
    }
    v
}

fn regular_cholesky(gram: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let k = gram.nrows();
    let diag_max = (0..k).map(|i| gram[(i, i)]).fold(0.0, f64::max);
    let chol = gram.cholesky()?;
    let l = chol.l_dirty();
    (0..k)
        .all(|i| l[(i, i)] * l[(i, i)] > 1e-13 * diag_max)
        .then_some(chol)
}

/// Face-restricted Newton steps on `V`, blocked at the positivity boundary.
/// The face is built greedily from the heaviest points above
/// `rel · max m`, then the lighter points of positive fitness, skipping any that make the Gram matrix numerically
/// singular. Points off the face with non-positive fitness are reset to
/// `floor`. The result is kept only when `V` does not increase.
fn polish(
    m: &mut [f64],
    fitness: &[f64],
    rates: &[f64],
    g: &impl Fn(usize, usize) -> f64,
    rel: f64,
    floor: f64,
) {
    let n = m.len();
    let peak = m.iter().copied().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).filter(|&a| m[a] > rel * peak).collect();
    order.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
    let mut growing: Vec<usize> = (0..n)
        .filter(|&a| m[a] <= rel * peak && fitness[a] > 0.0)
        .collect();
    growing.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]));
    order.extend(growing);
    let mut face: Vec<usize> = Vec::new();
    for a in order {
        face.push(a);
        let k = face.len();
        if regular_cholesky(DMatrix::from_fn(k, k, |i, j| g(face[i], face[j]))).is_none() {
            face.pop();
        }
    }
    let mut on_face = vec![false; n];
    for &a in &face {
        on_face[a] = true;
    }
    let mut trial = m.to_vec();
    for a in 0..n {
        if !on_face[a] && fitness[a] <= 0.0 {
            trial[a] = floor;
        }
    }
    loop {
        let face: Vec<usize> = (0..n).filter(|&a| on_face[a]).collect();
        let k = face.len();
        if k == 0 {
            break;
        }
        let rhs = DVector::from_fn(k, |i, _| {
            let a = face[i];
            let outside: f64 = (0..n)
                .filter(|&b| !on_face[b])
                .map(|b| g(a, b) * trial[b])
                .sum();
            rates[a] - outside
        });
        let Some(chol) = regular_cholesky(DMatrix::from_fn(k, k, |i, j| g(face[i], face[j])))
        else {
            return;
        };
        let y = chol.solve(&rhs);
        let mut theta = 1.0;
        let mut blocking = None;
        for (i, &a) in face.iter().enumerate() {
            if y[i] <= 0.0 {
                let t = trial[a] / (trial[a] - y[i]);
                if t < theta {
                    theta = t;
                    blocking = Some(a);
                }
            }
        }
        for (i, &a) in face.iter().enumerate() {
            trial[a] += theta * (y[i] - trial[a]);
        }
        match blocking {
            Some(a) => {
                trial[a] = floor;
                on_face[a] = false;
            }
            None => break,
        }
    }
    if lyapunov(&trial, rates, g) <= lyapunov(m, rates, g) {
        m.copy_from_slice(&trial);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssTolerances {
    pub tol_eq: f64,
    pub tol_ineq: f64,
}

impl Default for EssTolerances {
    fn default() -> Self {
        EssTolerances {
            tol_eq: 1e-8,
            tol_ineq: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssCertificate {
    /// `max` over atoms of `|r - I⋆μ|`.
    pub residual_support: f64,
    /// `max` over `Ω` of `(r - I⋆μ)_+`.
    pub residual_domain: f64,
    /// Smallest eigenvalue of `[I(x_i - x_k)]` over the atoms.
    pub quadratic_gap: f64,
    pub pass: bool,
}

/// Checks the ESS conditions; off-grid atoms are evaluated exactly, the
/// domain condition on `Ω`'s grid points.
pub fn ess_verify(
    mu: &DiscreteMeasure,
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
    tols: &EssTolerances,
) -> EssCertificate {
    let grid = *omega.grid();
    let env = |x: f64| {
        mu.atoms()
            .iter()
            .map(|a| a.mass * kernel.eval(x - a.x))
            .sum::<f64>()
    };
    let residual_support = mu
        .atoms()
        .iter()
        .map(|a| (r.interpolate(a.x) - env(a.x)).abs())
        .fold(0.0, f64::max);
    let residual_domain = omega
        .indices()
        .into_iter()
        .map(|i| (r.values()[i] - env(grid.point(i))).max(0.0))
        .fold(0.0, f64::max);
    let quadratic_gap = if mu.is_empty() {
        f64::INFINITY
    } else {
        let locs = mu.locations();
        let g = DMatrix::from_fn(locs.len(), locs.len(), |a, b| {
            kernel.eval(locs[a] - locs[b])
        });
        SymmetricEigen::new(g)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    };
    let pass =
        residual_support <= tols.tol_eq && residual_domain <= tols.tol_ineq && quadratic_gap > 0.0;
    EssCertificate {
        residual_support,
        residual_domain,
        quadratic_gap,
        pass,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Collapsed atoms of each run.
    pub runs: Vec<DiscreteMeasure>,
    /// Largest pairwise matched-atom total variation.
    pub max_tv: f64,
    /// Largest pairwise `sup |I⋆μ_a - I⋆μ_b|` on the grid.
    pub max_environment_gap: f64,
    /// The kernel is only semidefinite, so the environment is compared.
    pub compares_environment: bool,
    pub match_tol: f64,
    pub pass: bool,
}

/// Replicator runs from `n_inits` seeded random positive initializations.
/// Atoms within `match_tol` are paired; `pass` requires the pairwise TV (or
/// the environment gap, for semidefinite kernels) to be at most `tv_tol`.
pub fn ess_uniqueness_probe(
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
    params: &ReplicatorParams,
    n_inits: usize,
    seeds: &[u64],
    tv_tol: f64,
) -> Result<UniquenessReport> {
    assert!(n_inits >= 2, "the probe needs at least two initializations");
    let n = omega.count();
    let inits: Vec<Vec<f64>> = (0..n_inits)
        .map(|k| {
            let seed = seeds.get(k).copied().unwrap_or(0x5EED_0000 + k as u64);
            let mut rng = SplitMix64(seed);
            (0..n).map(|_| 0.05 + rng.next_f64()).collect()
        })
        .collect();
    let outcomes: Vec<Result<ReplicatorOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = inits
            .iter()
            .map(|init| s.spawn(move || ess_replicator_from(omega, r, kernel, params, init)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicator thread panicked"))
            .collect()
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let h = omega.grid().spacing();
    let match_tol = 2.0 * h;
    let envs = outcomes
        .iter()
        .map(|o| convolve_measure(kernel, &o.grid_measure, omega.grid()))
        .collect::<Result<Vec<_>>>()?;
    let mut max_tv: f64 = 0.0;
    let mut max_env: f64 = 0.0;
    for a in 0..outcomes.len() {
        for b in a + 1..outcomes.len() {
            max_tv = max_tv.max(
                outcomes[a]
                    .atoms
                    .matched_tv_distance(&outcomes[b].atoms, match_tol),
            );
            max_env = max_env.max(envs[a].sup_distance(&envs[b])?);
        }
    }
    let compares_environment = kernel.positivity() == Positivity::SemiDefinite;
    let pass = if compares_environment {
        max_env <= tv_tol
    } else {
        max_tv <= tv_tol
    };
    Ok(UniquenessReport {
        runs: outcomes.into_iter().map(|o| o.atoms).collect(),
        max_tv,
        max_environment_gap: max_env,
        compares_environment,
        match_tol,
        pass,
    })
}

/// For each `ν`, the length of `{x ∈ Ω : |r - I⋆μ| <= ν}`, a proxy for how
/// many near-roots the fitness has on `Ω`.
pub fn near_root_measure(
    mu: &DiscreteMeasure,
    omega: &SetMask,
    r: &TraitField,
    kernel: &CompetitionKernel,
    nus: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let env = convolve_measure(kernel, mu, omega.grid())?;
    let h = omega.grid().spacing();
    let gaps: Vec<f64> = omega
        .indices()
        .into_iter()
        .map(|i| (r.values()[i] - env.values()[i]).abs())
        .collect();
    Ok(nus
        .iter()
        .map(|&nu| (nu, h * gaps.iter().filter(|&&g| g <= nu).count() as f64))
        .collect())
}
