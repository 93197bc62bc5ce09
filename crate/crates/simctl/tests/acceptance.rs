//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use selmut::{
    convolve_measure, ess_active_set, ess_replicator, ess_uniqueness_probe, max_zero_set_speed,
    numerical_hamiltonian, numerical_hamiltonian_flux, CompetitionKernel, ConvolutionPlan,
    FieldRole, Flux, Grid, LimitTrajectory, MutationKernel, RateProfile, ReplicatorParams, SetMask,
    TraitField,
};
use simctl::commands::{
    compare_report, limit_report, simulate_compare, simulate_eps, simulate_limit, simulate_sweep,
    sweep_report,
};
use simctl::config::Config;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn preset(name: &str) -> Config {
    Config::load(Path::new(&format!("preset:{name}"))).expect("preset loads")
}

/// `shared` is time already spent on work this criterion reuses.
fn criterion(
    id: u32,
    name: &str,
    budget: Duration,
    shared: Duration,
    f: impl FnOnce() -> Outcome,
) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed() + shared;
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "{} [{id:>2}] {name}: {}; {:.2} s of {} s{}",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " (over budget)" }
    );
    pass
}

fn hamiltonian_closed_form() -> Outcome {
    let k = MutationKernel::uniform(1.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let p = -5.0 + 10.0 * (i as f64 + 0.5) / 100.0;
        let h = k.hamiltonian(p).unwrap();
        worst = worst.max((h - (p.sinh() / p - 1.0)).abs());
    }
    let at_zero = k.hamiltonian(0.0).unwrap();
    let lowest = (0..=20_000)
        .map(|i| k.hamiltonian(-20.0 + 40.0 * i as f64 / 20_000.0).unwrap())
        .fold(f64::INFINITY, f64::min);
    outcome(
        worst <= 1e-10 && at_zero == 0.0 && lowest >= -1e-10,
        format!("max |H - (sinh p/p - 1)| = {worst:.1e}, H(0) = {at_zero}, min H = {lowest:.1e}"),
    )
}

fn convolution_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(8..=256);
        let g = Grid::new(rng.gen_range(-3.0..-1.0), rng.gen_range(1.0..3.0), n).unwrap();
        let kernel =
            CompetitionKernel::gaussian(rng.gen_range(0.5..2.0), rng.gen_range(0.1..1.5)).unwrap();
        let u = TraitField::new(
            g,
            (0..n).map(|_| rng.gen_range(0.0..2.0)).collect(),
            FieldRole::Density,
        )
        .unwrap();
        let fast = ConvolutionPlan::new(kernel.clone(), g).apply(&u).unwrap();
        let h = g.spacing();
        for i in 0..n {
            let direct: f64 = (0..n)
                .map(|k| kernel.eval(g.point(i) - g.point(k)) * u.values()[k] * h)
                .sum();
            worst =
                worst.max((fast.values()[i] - direct).abs() / direct.abs().max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        worst <= 1e-12,
        format!("max relative gap {worst:.1e} over 50 fields"),
    )
}

fn logistic_mass() -> Outcome {
    let config = preset("logistic");
    let eps = 0.02;
    let run = simulate_eps(&config, eps, 0).expect("logistic runs");
    let traj = &run.trajectory;
    if !traj.completed() {
        return outcome(false, "run aborted");
    }
    let r = 0.5;
    let m0 = traj.samples[0].record.mass;
    let oracle = |t: f64| {
        let e = (r * t / eps).exp();
        r * m0 * e / (r + m0 * (e - 1.0))
    };
    let tracking = traj
        .samples
        .iter()
        .map(|s| (s.record.mass - oracle(s.state.t)).abs())
        .fold(0.0, f64::max);
    let at_10eps = traj
        .samples
        .iter()
        .find(|s| s.state.t >= 10.0 * eps - 1e-12)
        .map(|s| (s.record.mass - r).abs())
        .unwrap_or(f64::INFINITY);
    let n = config.grid.n;
    outcome(
        tracking <= 1e-3 && at_10eps <= 1e-3 && n == 512,
        format!("|M(10ε) - r| = {at_10eps:.1e}, max |M - ODE| = {tracking:.1e}, n = {n}"),
    )
}

/// Every support set is tried; the one whose solution is positive on the
/// support and satisfies the inequality off it is returned.
fn enumeration_oracle(kernel: &CompetitionKernel, points: &[f64], r: &[f64]) -> Option<Vec<f64>> {
    let n = points.len();
    for mask in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sol: Vec<f64> = if idx.is_empty() {
            Vec::new()
        } else {
            let g = DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
                kernel.eval(points[idx[a]] - points[idx[b]])
            });
            let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| r[i]));
            match g.lu().solve(&rhs) {
                Some(s) => s.iter().copied().collect(),
                None => continue,
            }
        };
        if sol.iter().any(|&a| a <= 0.0) {
            continue;
        }
        let mut alpha = vec![0.0; n];
        for (&i, &a) in idx.iter().zip(&sol) {
            alpha[i] = a;
        }
        let feasible = (0..n).all(|i| {
            (0..n)
                .map(|k| kernel.eval(points[i] - points[k]) * alpha[k])
                .sum::<f64>()
                >= r[i] - 1e-10
        });
        if feasible {
            return Some(alpha);
        }
    }
    None
}

fn ess_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = Grid::symmetric(3.0, 121).unwrap();

    let mut worst_enum: f64 = 0.0;
    for _ in 0..200 {
        let count = rng.gen_range(1..=12);
        let mut idx: Vec<usize> = Vec::new();
        while idx.len() < count {
            let i = rng.gen_range(0..g.len());
            if !idx.contains(&i) {
                idx.push(i);
            }
        }
        idx.sort_unstable();
        let omega = SetMask::from_indices(g, &idx);
        let r = TraitField::new(
            g,
            (0..g.len()).map(|_| rng.gen_range(-0.5..1.0)).collect(),
            FieldRole::Rate,
        )
        .unwrap();
        let kernel = CompetitionKernel::gaussian(1.0, rng.gen_range(0.2..1.0)).unwrap();
        let points: Vec<f64> = idx.iter().map(|&i| g.point(i)).collect();
        let rates: Vec<f64> = idx.iter().map(|&i| r.values()[i]).collect();
        let Some(oracle) = enumeration_oracle(&kernel, &points, &rates) else {
            return outcome(false, "enumeration oracle found no solution");
        };
        let mu = ess_active_set(&omega, &r, &kernel).unwrap();
        for (x, a) in points.iter().zip(&oracle) {
            let got = mu
                .atoms()
                .iter()
                .filter(|at| (at.x - x).abs() < 1e-12)
                .map(|at| at.mass)
                .sum::<f64>();
            worst_enum = worst_enum.max((got - a).abs());
        }
    }

    let mut worst_total: f64 = 0.0;
    for _ in 0..20 {
        let r = TraitField::new(
            g,
            (0..g.len()).map(|_| rng.gen_range(-0.5..1.0)).collect(),
            FieldRole::Rate,
        )
        .unwrap();
        let omega = SetMask::interval(g, -1.0, 1.0);
        let max_r = omega
            .indices()
            .iter()
            .map(|&i| r.values()[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mu = ess_active_set(&omega, &r, &CompetitionKernel::constant(1.0).unwrap()).unwrap();
        worst_total = worst_total.max((mu.total() - max_r.max(0.0)).abs());
    }

    let landscapes = [
        (
            RateProfile::Quadratic {
                peak: 1.0,
                center: 0.1,
                curvature: 0.5,
            },
            0.3,
        ),
        (
            RateProfile::Quadratic {
                peak: 0.8,
                center: -0.2,
                curvature: 1.0,
            },
            0.6,
        ),
        (
            RateProfile::Quadratic {
                peak: 0.5,
                center: 0.0,
                curvature: 0.2,
            },
            0.25,
        ),
        (
            RateProfile::Quadratic {
                peak: 1.2,
                center: 0.3,
                curvature: 2.0,
            },
            1.0,
        ),
        (
            RateProfile::Quadratic {
                peak: 0.6,
                center: 0.0,
                curvature: 0.5,
            },
            0.4,
        ),
    ];
    let bg = Grid::symmetric(2.0, 81).unwrap();
    let mut worst_rep: f64 = 0.0;
    for (profile, width) in landscapes {
        let r = profile.sample(&bg).unwrap();
        let kernel = CompetitionKernel::gaussian(1.0, width).unwrap();
        let omega = SetMask::interval(bg, -1.5, 1.5);
        let exact = ess_active_set(&omega, &r, &kernel).unwrap();
        let rep = ess_replicator(&omega, &r, &kernel, &ReplicatorParams::default()).unwrap();
        let a = convolve_measure(&kernel, &exact, &bg).unwrap();
        let b = convolve_measure(&kernel, &rep.grid_measure, &bg).unwrap();
        worst_rep = worst_rep.max(a.sup_distance(&b).unwrap());
    }
    outcome(
        worst_enum <= 1e-8 && worst_total <= 1e-6 && worst_rep <= 1e-4,
        format!("vs enumeration {worst_enum:.1e}, |total - max r| {worst_total:.1e}, replicator I⋆μ gap {worst_rep:.1e}"),
    )
}

fn ess_uniqueness() -> Outcome {
    let g = Grid::symmetric(2.0, 81).unwrap();
    let kernel = CompetitionKernel::gaussian(1.0, 0.3).unwrap();
    let r = RateProfile::Quadratic {
        peak: 1.0,
        center: 0.1,
        curvature: 0.5,
    }
    .sample(&g)
    .unwrap();
    let omega = SetMask::interval(g, -1.5, 1.5);
    let seeds: Vec<u64> = (0..8).map(|k| 1000 + k).collect();
    let rep = ess_uniqueness_probe(
        &omega,
        &r,
        &kernel,
        &ReplicatorParams::default(),
        8,
        &seeds,
        1e-3,
    )
    .unwrap();
    outcome(
        !rep.compares_environment && rep.max_tv <= 1e-3 && rep.runs.len() == 8,
        format!(
            "max pairwise matched-atom TV {:.1e} over {} runs",
            rep.max_tv,
            rep.runs.len()
        ),
    )
}

fn speed_line(traj: &LimitTrajectory) -> (bool, String) {
    let v = traj.speed_bound;
    let s = max_zero_set_speed(traj);
    (traj.completed() && s <= 1.1 * v, format!("{s:.3}/{v:.3}"))
}

fn main() -> ExitCode {
    let mut all = true;
    all &= criterion(
        1,
        "hamiltonian closed form",
        Duration::from_secs(1),
        Duration::ZERO,
        hamiltonian_closed_form,
    );
    all &= criterion(
        2,
        "convolution oracle",
        Duration::from_secs(5),
        Duration::ZERO,
        convolution_oracle,
    );
    all &= criterion(
        3,
        "logistic mass",
        Duration::from_secs(10),
        Duration::ZERO,
        logistic_mass,
    );
    all &= criterion(
        4,
        "ESS correctness",
        Duration::from_secs(60),
        Duration::ZERO,
        ess_correctness,
    );
    all &= criterion(
        5,
        "ESS uniqueness",
        Duration::from_secs(60),
        Duration::ZERO,
        ess_uniqueness,
    );

    let sweep_start = Instant::now();
    let config = preset("sweep-benchmark");
    let eps = config.sweep.eps.clone();
    let sweep = simulate_sweep(&config, &eps, 0)
        .and_then(|runs| sweep_report(&config, &runs).map(|rep| (runs, rep)));
    let sweep_time = sweep_start.elapsed();
    let (runs, report) = match sweep {
        Ok(x) => x,
        Err(e) => {
            println!("FAIL [ 6] a priori bounds: sweep failed: {e}");
            println!("FAIL [ 7] entropy dissipation: sweep failed");
            println!("FAIL [ 9] limit coupling: sweep failed");
            return ExitCode::FAILURE;
        }
    };
    all &= criterion(
        6,
        "a priori bounds",
        Duration::from_secs(600),
        sweep_time,
        || {
            let failing: Vec<String> = report
                .bounds
                .iter()
                .flat_map(|b| {
                    b.checks
                        .iter()
                        .filter(|c| !c.pass)
                        .map(move |c| format!("{} at ε = {}", c.name, b.eps))
                })
                .collect();
            let checks: usize = report.bounds.iter().map(|b| b.checks.len()).sum();
            let n = config.grid.n;
            outcome(
                failing.is_empty() && checks == 6 * eps.len() && n == 512,
                if failing.is_empty() {
                    format!(
                        "{checks} checks over ε = {eps:?}, constants frozen at ε = {}, n = {n}",
                        eps[0]
                    )
                } else {
                    format!("failing: {}", failing.join(", "))
                },
            )
        },
    );
    all &= criterion(
        7,
        "entropy dissipation",
        Duration::from_secs(600),
        sweep_time,
        || {
            let d: Vec<String> = report
                .dissipation
                .iter()
                .map(|(e, v)| format!("{e}: {v:.4}"))
                .collect();
            outcome(
                report.dissipation_ratio <= 3.0,
                format!("ratio {:.3} ({})", report.dissipation_ratio, d.join(", ")),
            )
        },
    );
    all &= criterion(
        9,
        "limit coupling",
        Duration::from_secs(900),
        sweep_time,
        || {
            let d: Vec<String> = report
                .comparison
                .rows
                .iter()
                .map(|r| format!("{}: {:.3e}", r.eps, r.sup_environment))
                .collect();
            outcome(
                report.comparison.environment_monotone && runs.limit.completed(),
                format!("sup_t |I⋆u - I⋆μ| ({})", d.join(", ")),
            )
        },
    );

    all &= criterion(
        8,
        "ghost-population correction",
        Duration::from_secs(300),
        Duration::ZERO,
        || {
            let config = preset("ghost");
            let rep = simulate_compare(&config, config.forward.eps, 0)
                .and_then(|runs| compare_report(&config, &runs));
            let Ok(rep) = rep else {
                return outcome(false, "compare failed");
            };
            let run = |label: &str| {
                rep.ghost
                    .runs
                    .iter()
                    .find(|r| r.label == label)
                    .expect("run present")
            };
            let off = run("off");
            let ramp = run("distance_ramp");
            let off_peak = off
                .series
                .iter()
                .filter(|(t, _)| *t >= rep.ghost.t_switch)
                .map(|p| p.1)
                .fold(0.0, f64::max);
            let ramp_below = ramp
                .series
                .iter()
                .all(|&(_, m)| m < ramp.extinction_threshold);
            outcome(
                off_peak > rep.ghost.reemergence_level && ramp_below,
                format!(
                    "off peaks at {off_peak:.3} after the switch, ramp max {:.1e} < {:.3}",
                    ramp.max_mass, ramp.extinction_threshold
                ),
            )
        },
    );

    all &= criterion(
        10,
        "finite propagation speed",
        Duration::from_secs(300),
        Duration::ZERO,
        || {
            let mut ok = true;
            let mut parts = Vec::new();
            for name in ["equilibrium", "disruptive"] {
                let traj = simulate_limit(&preset(name), 0).expect("limit runs");
                let (pass, line) = speed_line(&traj);
                ok &= pass;
                parts.push(format!("{name} {line}"));
                if name == "disruptive" {
                    let v = traj.speed_bound;
                    let speeds: Vec<Option<f64>> =
                        traj.events.iter().map(|e| e.separation_speed).collect();
                    let one =
                        matches!(speeds.as_slice(), [Some(s)] if s.is_finite() && s.abs() <= v);
                    ok &= one && limit_report(&traj).branching_events == 1;
                    parts.push(format!(
                        "branching events {} with separation speed {:?}",
                        speeds.len(),
                        speeds
                    ));
                }
            }
            let (pass, line) = speed_line(&runs.limit);
            ok &= pass;
            parts.push(format!("sweep-benchmark {line}"));
            outcome(ok, format!("zero-set speed / V: {}", parts.join(", ")))
        },
    );

    all &= criterion(
        11,
        "monotone scheme",
        Duration::from_secs(30),
        Duration::ZERO,
        monotone_scheme,
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn monotone_scheme() -> Outcome {
    let k = MutationKernel::uniform(1.0, 1.0).unwrap();
    let p_max = 2.0;
    let a = k.max_hamiltonian_slope(p_max).unwrap();
    let g = Grid::symmetric(1.0, 101).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (flux, dt) in [
        (None, g.spacing() / a),
        (Some(Flux::Godunov), 0.5 * g.spacing() / a),
    ] {
        let step = |w: &[f64], i: usize| {
            let phi = TraitField::new(g, w.to_vec(), FieldRole::Potential).unwrap();
            let nh = match flux {
                None => numerical_hamiltonian(&phi, &k, p_max),
                Some(f) => numerical_hamiltonian_flux(&phi, &k, p_max, f),
            };
            w[i] + dt * nh.unwrap().values()[i]
        };
        for _ in 0..1000 {
            let mut x = 0.0;
            let v: Vec<f64> = (0..g.len())
                .map(|_| {
                    x += rng.gen_range(-1.9..1.9) * g.spacing();
                    x
                })
                .collect();
            let i = rng.gen_range(1..g.len() - 1);
            let base = step(&v, i);
            for j in [i - 1, i, i + 1] {
                for delta in [1e-6, -1e-6] {
                    let mut w = v.clone();
                    w[j] += delta;
                    let change = (step(&w, i) - base) * delta.signum();
                    if change < -1e-15 {
                        violations += 1;
                        worst = worst.max(-change);
                    }
                }
            }
        }
    }

    let order = |flux: Option<Flux>| {
        let k = MutationKernel::uniform(0.5, 1.0).unwrap();
        let run = |n: usize| {
            let g = Grid::symmetric(1.0, n).unwrap();
            let a = k.max_hamiltonian_slope(p_max).unwrap();
            let steps = (0.1 / (0.5 * g.spacing() / a)).ceil() as usize;
            let dt = 0.1 / steps as f64;
            let mut phi =
                TraitField::from_fn(g, FieldRole::Potential, |x| 0.5 * (3.0 * x).sin()).unwrap();
            for _ in 0..steps {
                let nh = match flux {
                    None => numerical_hamiltonian(&phi, &k, p_max),
                    Some(f) => numerical_hamiltonian_flux(&phi, &k, p_max, f),
                }
                .unwrap();
                let v = phi
                    .values()
                    .iter()
                    .zip(nh.values())
                    .map(|(p, h)| p + dt * h)
                    .collect();
                phi = TraitField::new(g, v, FieldRole::Potential).unwrap();
            }
            phi
        };
        let (c, m, f) = (run(101), run(201), run(401));
        let err = |a: &TraitField, b: &TraitField| {
            (0..a.values().len())
                .filter(|&i| a.grid().point(i).abs() <= 0.5)
                .map(|i| (a.values()[i] - b.values()[2 * i]).abs())
                .fold(0.0, f64::max)
        };
        (err(&c, &m) / err(&m, &f)).log2()
    };
    let (lf, godunov) = (order(None), order(Some(Flux::Godunov)));
    let first_order = |q: f64| (0.8..1.3).contains(&q);
    outcome(
        violations == 0 && first_order(lf) && first_order(godunov),
        format!(
            "{violations} monotonicity violations (worst {worst:.1e}) over 1000 points x 6 perturbations per flux, observed order {lf:.2} (Lax-Friedrichs), {godunov:.2} (Godunov)"
        ),
    )
}
