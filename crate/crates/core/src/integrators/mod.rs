//! Semi-explicit, monolithic and reduced BDF-k time stepping.

mod step;
mod study;

pub use step::{StepOutput, Stepper, INNER_RTOL, OUTER_RTOL};
pub use study::{
    convergence_study, observed_orders, reference_trajectory, ConvergenceReport, ReferencePolicy, StudyConfig,
};

use crate::numerics::{dot, SparseSymmetric};
use crate::problems::EllipticParabolicSystem;
use crate::stencils::{MAX_BDF_ORDER, MAX_DELAY};
use crate::{Error, Result};

/// A `(u, p)` pair.
pub type State = (Vec<f64>, Vec<f64>);

/// How the states before the first full step are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Startup {
    /// Exact solution at the startup times.
    Exact,
    /// `p^{−ℓ} = p⁰`, `u^{−ℓ} = u⁰` for all negative indices.
    ConstantHistory,
    /// Caller-supplied states for indices `0, 1, …` (oldest first).
    Given(Vec<State>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    SemiExplicit,
    Monolithic,
    Reduced,
}

impl SchemeKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchemeKind::SemiExplicit => "semi",
            SchemeKind::Monolithic => "mono",
            SchemeKind::Reduced => "reduced",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub k: usize,
    pub delta: usize,
    pub tau: f64,
    pub t_final: f64,
    pub startup: Startup,
}

impl SchemeConfig {
    pub fn new(k: usize, delta: usize, tau: f64, t_final: f64, startup: Startup) -> Result<Self> {
        let cfg = Self {
            k,
            delta,
            tau,
            t_final,
            startup,
        };
        cfg.steps()?;
        Ok(cfg)
    }

    /// Number of steps `N = T/τ`; fails unless it is an integer to 1e-12.
    pub fn steps(&self) -> Result<usize> {
        if !(1..=MAX_BDF_ORDER).contains(&self.k) {
            return Err(Error::UnsupportedOrder {
                order: self.k,
                min: 1,
                max: MAX_BDF_ORDER,
            });
        }
        if !(1..=MAX_DELAY).contains(&self.delta) {
            return Err(Error::UnsupportedOrder {
                order: self.delta,
                min: 1,
                max: MAX_DELAY,
            });
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) || !(self.t_final >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need tau > 0 and T >= 0, got tau={} T={}",
                self.tau, self.t_final
            )));
        }
        let n = (self.t_final / self.tau).round();
        if (n * self.tau - self.t_final).abs() > 1e-12 * self.t_final.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "T={} is not an integer multiple of tau={}",
                self.t_final, self.tau
            )));
        }
        Ok(n as usize)
    }

    /// Past states a step of `scheme` reads.
    pub fn lookback(&self, scheme: SchemeKind) -> usize {
        match scheme {
            SchemeKind::SemiExplicit => self.k.max(self.delta),
            SchemeKind::Monolithic => self.k,
            SchemeKind::Reduced => self.k + self.delta,
        }
    }
}

/// Write-once record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Linear iterations per step (0 for startup states).
    pub iterations: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial state")
    }

    pub fn final_state(&self) -> State {
        (self.u[self.len() - 1].clone(), self.p[self.len() - 1].clone())
    }

    /// State at the sample closest to `t`, if within `1e-9` of it.
    pub fn state_at(&self, t: f64) -> Option<State> {
        let i = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        ((self.times[i] - t).abs() <= 1e-9).then(|| (self.u[i].clone(), self.p[i].clone()))
    }
}

/// Runs `scheme` from the configured startup to `T`.
pub fn integrate(problem: &EllipticParabolicSystem, cfg: &SchemeConfig, scheme: SchemeKind) -> Result<Trajectory> {
    let n_steps = cfg.steps()?;
    let stepper = Stepper::new(problem, cfg)?;
    let lookback = cfg.lookback(scheme);
    let time = |n: usize| n as f64 * cfg.tau;

    let mut traj = Trajectory {
        times: Vec::with_capacity(n_steps + 1),
        u: Vec::with_capacity(n_steps + 1),
        p: Vec::with_capacity(n_steps + 1),
        iterations: Vec::with_capacity(n_steps + 1),
    };
    let push = |traj: &mut Trajectory, n: usize, u: Vec<f64>, p: Vec<f64>, it: usize| {
        traj.times.push(time(n));
        traj.u.push(u);
        traj.p.push(p);
        traj.iterations.push(it);
    };

    let first = match &cfg.startup {
        Startup::ConstantHistory => {
            push(&mut traj, 0, problem.u0.clone(), problem.p0.clone(), 0);
            1
        }
        Startup::Exact => {
            let exact = problem.exact.as_ref().ok_or(Error::MissingExact)?;
            let count = lookback.min(n_steps + 1);
            for n in 0..count {
                push(&mut traj, n, (exact.u)(time(n)), (exact.p)(time(n)), 0);
            }
            count
        }
        Startup::Given(states) => {
            if states.len() < lookback.min(n_steps + 1) {
                return Err(Error::InvalidArgument(format!(
                    "{} startup states given, scheme needs {lookback}",
                    states.len()
                )));
            }
            let count = states.len().min(n_steps + 1);
            for (n, (u, p)) in states[..count].iter().enumerate() {
                if u.len() != problem.dim_u() || p.len() != problem.dim_p() {
                    return Err(Error::Shape(format!("startup state {n} has wrong dimensions")));
                }
                push(&mut traj, n, u.clone(), p.clone(), 0);
            }
            count
        }
    };

    let mut u_past: Vec<Vec<f64>> = Vec::with_capacity(lookback);
    let mut p_past: Vec<Vec<f64>> = Vec::with_capacity(lookback);
    for n in first..=n_steps {
        u_past.clear();
        p_past.clear();
        for l in 1..=lookback {
            // Negative indices only occur under constant history.
            let idx = n.saturating_sub(l);
            u_past.push(traj.u[idx].clone());
            p_past.push(traj.p[idx].clone());
        }
        let t = time(n);
        let out = match scheme {
            SchemeKind::SemiExplicit => stepper.semi_explicit(t, &u_past, &p_past),
            SchemeKind::Monolithic => stepper.monolithic(t, &u_past, &p_past),
            SchemeKind::Reduced => stepper.reduced(t, &p_past),
        }
        .map_err(|e| Error::Run {
            k: cfg.k,
            delta: cfg.delta,
            tau: cfg.tau,
            source: Box::new(e),
        })?;
        push(&mut traj, n, out.u, out.p, out.iterations);
    }
    Ok(traj)
}

/// One semi-explicit step with windows given newest-first.
pub fn semi_explicit_step(
    problem: &EllipticParabolicSystem,
    cfg: &SchemeConfig,
    t: f64,
    u_past: &[Vec<f64>],
    p_past: &[Vec<f64>],
) -> Result<StepOutput> {
    Stepper::new(problem, cfg)?.semi_explicit(t, u_past, p_past)
}

/// One monolithic step with windows given newest-first.
pub fn monolithic_step(
    problem: &EllipticParabolicSystem,
    cfg: &SchemeConfig,
    t: f64,
    u_past: &[Vec<f64>],
    p_past: &[Vec<f64>],
) -> Result<StepOutput> {
    Stepper::new(problem, cfg)?.monolithic(t, u_past, p_past)
}

/// One reduced p-only step with `k + δ` past pressures, newest-first.
pub fn reduced_p_step(
    problem: &EllipticParabolicSystem,
    cfg: &SchemeConfig,
    t: f64,
    p_past: &[Vec<f64>],
) -> Result<Vec<f64>> {
    Ok(Stepper::new(problem, cfg)?.reduced(t, p_past)?.p)
}

/// Startup states `0..p_history.len()` (oldest first) whose displacements
/// satisfy the delayed elastic equation `A u^j = f^j + Dᵀ D_δ p^j` for
/// `j ≥ δ`; earlier displacements solve it with `p^j` itself.
pub fn delay_consistent_history(
    problem: &EllipticParabolicSystem,
    tau: f64,
    delta: usize,
    p_history: &[Vec<f64>],
) -> Result<Vec<State>> {
    let stencil = crate::stencils::DelayStencil::new(delta)?;
    p_history
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let t = j as f64 * tau;
            let driver = if j >= delta {
                let past: Vec<&Vec<f64>> = (1..=delta).map(|l| &p_history[j - l]).collect();
                stencil.apply(&past)?
            } else {
                p.clone()
            };
            Ok((problem.consistent_u(t, &driver)?, p.clone()))
        })
        .collect()
}

/// Monolithic implicit Euler with `substeps` sub-steps per `tau`, Richardson
/// extrapolated against `2·substeps`; returns states at `0, τ, …, (count−1)τ`.
pub fn fine_startup(problem: &EllipticParabolicSystem, tau: f64, count: usize, substeps: usize) -> Result<Vec<State>> {
    if substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be positive".into()));
    }
    let run = |m: usize| -> Result<Vec<State>> {
        let h = tau / m as f64;
        let cfg = SchemeConfig::new(1, 1, h, 0.0, Startup::ConstantHistory)?;
        let stepper = Stepper::new(problem, &cfg)?;
        let mut states = vec![(problem.u0.clone(), problem.p0.clone())];
        let (mut u, mut p) = states[0].clone();
        for n in 1..(count.max(1) - 1) * m + 1 {
            let out = stepper.monolithic(n as f64 * h, &[u], &[p])?;
            u = out.u;
            p = out.p;
            if n % m == 0 {
                states.push((u.clone(), p.clone()));
            }
        }
        Ok(states)
    };
    let coarse = run(substeps)?;
    let fine = run(2 * substeps)?;
    Ok(coarse
        .iter()
        .zip(&fine)
        .enumerate()
        .map(|(j, (c, f))| {
            if j == 0 {
                c.clone()
            } else {
                let ex = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 2.0 * y - x).collect::<Vec<_>>();
                (ex(&c.0, &f.0), ex(&c.1, &f.1))
            }
        })
        .collect())
}

/// Reference for error measurement.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Exact,
    Trajectory(&'a Trajectory),
}

fn energy(m: &SparseSymmetric, e: &[f64]) -> f64 {
    dot(e, &m.mul_vec(e)).max(0.0).sqrt()
}

/// `(‖e_u‖_A, ‖e_p‖_C)` at the final time of `traj`.
pub fn error_norms(traj: &Trajectory, problem: &EllipticParabolicSystem, reference: Reference<'_>) -> Result<(f64, f64)> {
    let t = traj.final_time();
    let (u_ref, p_ref) = match reference {
        Reference::Exact => {
            let ex = problem.exact.as_ref().ok_or(Error::MissingExact)?;
            ((ex.u)(t), (ex.p)(t))
        }
        Reference::Trajectory(r) => r.state_at(t).ok_or_else(|| {
            Error::InvalidArgument(format!("reference trajectory has no state at t={t}"))
        })?,
    };
    let (u, p) = traj.final_state();
    if u.len() != u_ref.len() || p.len() != p_ref.len() || u.len() != problem.dim_u() || p.len() != problem.dim_p() {
        return Err(Error::Shape("trajectory and reference dimensions differ".into()));
    }
    let eu: Vec<f64> = u.iter().zip(&u_ref).map(|(a, b)| a - b).collect();
    let ep: Vec<f64> = p.iter().zip(&p_ref).map(|(a, b)| a - b).collect();
    Ok((energy(&problem.a, &eu), energy(&problem.c, &ep)))
}
