use rayon::prelude::*;

use super::{error_norms, fine_startup, integrate, Reference, SchemeConfig, SchemeKind, Startup, Trajectory};
use crate::csv::{fmt_f64, fmt_opt, Table};
use crate::problems::EllipticParabolicSystem;
use crate::{Error, Result};

/// What the errors of a study are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferencePolicy {
    /// The problem's exact solution; runs use the configured startup.
    Exact,
    /// A monolithic BDF-`k` run at `min(τ)/refine`, started from Richardson
    /// extrapolated implicit Euler with `startup_substeps` sub-steps. Study
    /// runs take their startup states from this reference.
    Monolithic {
        k: usize,
        refine: usize,
        startup_substeps: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    /// `(k, δ)` pairs.
    pub pairs: Vec<(usize, usize)>,
    /// Step sizes, halving.
    pub taus: Vec<f64>,
    pub t_final: f64,
    pub schemes: Vec<SchemeKind>,
    pub reference: ReferencePolicy,
    /// Startup of every run under [`ReferencePolicy::Exact`].
    pub startup: Startup,
}

/// Final-time errors and observed orders for one (scheme, k, δ).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scheme: SchemeKind,
    pub k: usize,
    pub delta: usize,
    pub taus: Vec<f64>,
    pub err_u: Vec<f64>,
    pub err_p: Vec<f64>,
    /// `None` for the first row or when an error vanishes.
    pub order_u: Vec<Option<f64>>,
    pub order_p: Vec<Option<f64>>,
}

impl ConvergenceReport {
    pub fn label(&self) -> String {
        format!("{}_k{}_d{}", self.scheme.label(), self.k, self.delta)
    }

    pub fn file_name(&self) -> String {
        format!("converge_{}.csv", self.label())
    }

    /// Header `tau,err_u,err_p,order_u,order_p`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["tau", "err_u", "err_p", "order_u", "order_p"]);
        for i in 0..self.taus.len() {
            t.push(vec![
                fmt_f64(self.taus[i]),
                fmt_f64(self.err_u[i]),
                fmt_f64(self.err_p[i]),
                fmt_opt(self.order_u[i]),
                fmt_opt(self.order_p[i]),
            ]);
        }
        t
    }

    /// Orders over the last `count` halvings.
    pub fn tail_orders_p(&self, count: usize) -> Vec<f64> {
        let valid: Vec<f64> = self.order_p.iter().flatten().copied().collect();
        valid[valid.len().saturating_sub(count)..].to_vec()
    }
}

/// `log(e_j/e_{j+1}) / log(τ_j/τ_{j+1})`, first entry `None`.
pub fn observed_orders(taus: &[f64], errs: &[f64]) -> Vec<Option<f64>> {
    let mut out = vec![None];
    for j in 1..errs.len() {
        let (e0, e1) = (errs[j - 1], errs[j]);
        let order = (e0 / e1).ln() / (taus[j - 1] / taus[j]).ln();
        out.push((e0 > 0.0 && e1 > 0.0 && order.is_finite()).then_some(order));
    }
    out
}

fn check(cfg: &StudyConfig) -> Result<()> {
    if cfg.taus.is_empty() || cfg.pairs.is_empty() || cfg.schemes.is_empty() {
        return Err(Error::InvalidArgument("study needs step sizes, (k, delta) pairs and schemes".into()));
    }
    for w in cfg.taus.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("step sizes must halve, got {} then {}", w[0], w[1])));
        }
    }
    Ok(())
}

/// Builds the reference trajectory of `policy` (`None` for exact references).
pub fn reference_trajectory(
    problem: &EllipticParabolicSystem,
    policy: ReferencePolicy,
    tau_min: f64,
    t_final: f64,
) -> Result<Option<Trajectory>> {
    match policy {
        ReferencePolicy::Exact => Ok(None),
        ReferencePolicy::Monolithic {
            k,
            refine,
            startup_substeps,
        } => {
            let tau = tau_min / refine as f64;
            let startup = fine_startup(problem, tau, k, startup_substeps)?;
            let cfg = SchemeConfig::new(k, k, tau, t_final, Startup::Given(startup))?;
            integrate(problem, &cfg, SchemeKind::Monolithic).map(Some)
        }
    }
}

/// Runs every (scheme, k, δ, τ) combination and reports errors at `T`.
/// Runs are independent and evaluated in parallel.
pub fn convergence_study(problem: &EllipticParabolicSystem, cfg: &StudyConfig) -> Result<Vec<ConvergenceReport>> {
    check(cfg)?;
    let tau_min = cfg.taus.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = reference_trajectory(problem, cfg.reference, tau_min, cfg.t_final)?;

    let jobs: Vec<(SchemeKind, usize, usize, f64)> = cfg
        .schemes
        .iter()
        .flat_map(|&s| cfg.pairs.iter().flat_map(move |&(k, d)| cfg.taus.iter().map(move |&t| (s, k, d, t))))
        .collect();
    let errors: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(scheme, k, delta, tau)| {
            let startup = match &reference {
                None => cfg.startup.clone(),
                Some(r) => {
                    let probe = SchemeConfig::new(k, delta, tau, cfg.t_final, Startup::ConstantHistory)?;
                    let count = probe.lookback(scheme);
                    let states = (0..count)
                        .map(|j| {
                            r.state_at(j as f64 * tau).ok_or_else(|| {
                                Error::InvalidArgument(format!("reference misses t={}", j as f64 * tau))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Startup::Given(states)
                }
            };
            let run_cfg = SchemeConfig::new(k, delta, tau, cfg.t_final, startup)?;
            let traj = integrate(problem, &run_cfg, scheme)?;
            let reference = match &reference {
                None => Reference::Exact,
                Some(r) => Reference::Trajectory(r),
            };
            error_norms(&traj, problem, reference).map_err(|e| Error::Run {
                k,
                delta,
                tau,
                source: Box::new(e),
            })
        })
        .collect();

    let mut reports = Vec::new();
    let mut it = jobs.iter().zip(errors);
    for &scheme in &cfg.schemes {
        for &(k, delta) in &cfg.pairs {
            let mut err_u = Vec::new();
            let mut err_p = Vec::new();
            for _ in &cfg.taus {
                let (_, res) = it.next().expect("one result per job");
                let (eu, ep) = res?;
                err_u.push(eu);
                err_p.push(ep);
            }
            reports.push(ConvergenceReport {
                scheme,
                k,
                delta,
                taus: cfg.taus.clone(),
                order_u: observed_orders(&cfg.taus, &err_u),
                order_p: observed_orders(&cfg.taus, &err_p),
                err_u,
                err_p,
            });
        }
    }
    Ok(reports)
}
