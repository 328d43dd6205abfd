use std::path::Path;

use anyhow::Context;
use bdfd::csv::{fmt_f64, Table};
use bdfd::gstability::{
    critical_threshold_f64, default_eta, eigs_table, gammas_table, identity_battery, mu_grid, scan_points,
    solve_gamma,
};
use bdfd::integrators::{convergence_study, ConvergenceReport, ReferencePolicy, SchemeKind, Startup, StudyConfig};
use bdfd::numerics::dot;
use bdfd::problems::{dde_demo, estimate_coupling, growth_exponent, EllipticParabolicSystem};

use crate::args::{ConvergeArgs, CouplingArgs, DdeArgs, GstabilityArgs, ProblemKind, SchemeChoice};
use crate::{config, usage, EXIT_DIVERGED, EXIT_NUMERICAL, EXIT_OK};

const GRID_MARGIN: f64 = 1e-3;
const IDENTITY_SEQUENCES: usize = 100;
const IDENTITY_LENGTH: usize = 10;
const MAX_REPORTED_FAILURES: usize = 5;
const DIVERGENCE_FACTOR: f64 = 1e3;
const COUPLING_TOL: f64 = 1e-10;
const BIOT_REFERENCE: ReferencePolicy = ReferencePolicy::Monolithic {
    k: 3,
    refine: 8,
    startup_substeps: 8,
};

fn write(table: &Table, dir: &Path, name: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    table.write(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn gstability(args: &GstabilityArgs, seed: u64) -> anyhow::Result<u8> {
    let k = args.k as usize;
    let eta = match args.eta {
        Some(e) => e,
        None => default_eta(k)?,
    };
    if let Err(e @ bdfd::Error::InvalidArgument(_)) = solve_gamma(k, 0.0, eta) {
        return Err(e.into());
    }
    let grid = mu_grid(k, args.grid, GRID_MARGIN)?;
    let points = scan_points(k, eta, &grid)?;
    write(&eigs_table(k, &grid, &points), &args.out, &format!("g_eigs_k{k}.csv"))?;
    write(&gammas_table(k, &grid, &points), &args.out, &format!("gammas_k{k}.csv"))?;

    println!("k={k} eta={eta} threshold={}", critical_threshold_f64(k)?);
    let certs: Vec<_> = points.iter().filter_map(|p| p.as_ref().ok()).collect();
    if let (Some(lo), Some(hi)) = (
        certs.iter().map(|c| c.min_eig).reduce(f64::min),
        certs.iter().map(|c| c.max_eig).reduce(f64::max),
    ) {
        let residual = certs.iter().map(|c| c.gamma_residual).fold(0.0, f64::max);
        let mut identity: f64 = 0.0;
        for c in &certs {
            identity = identity.max(identity_battery(c, IDENTITY_SEQUENCES, IDENTITY_LENGTH, seed)?);
        }
        println!("min eigenvalue {lo:.6e}, max eigenvalue {hi:.6e}");
        println!("max gamma residual {residual:.3e}, max identity residual {identity:.3e} (seed {seed})");
    }
    let failures: Vec<_> = points.iter().filter_map(|p| p.as_ref().err()).collect();
    for f in failures.iter().take(MAX_REPORTED_FAILURES) {
        eprintln!("failed: {f}");
    }
    if failures.len() > MAX_REPORTED_FAILURES {
        eprintln!("... {} more failed grid points", failures.len() - MAX_REPORTED_FAILURES);
    }
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_NUMERICAL })
}

fn initial_norm(problem: &EllipticParabolicSystem) -> f64 {
    let au = problem.a.mul_vec(&problem.u0);
    let cp = problem.c.mul_vec(&problem.p0);
    (dot(&problem.u0, &au) + dot(&problem.p0, &cp)).sqrt()
}

fn print_report(r: &ConvergenceReport) {
    println!("{} (k={}, delta={})", r.scheme.label(), r.k, r.delta);
    println!("  {:>12} {:>12} {:>12} {:>8} {:>8}", "tau", "err_u", "err_p", "order_u", "order_p");
    let fmt = |o: Option<f64>| o.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
    for i in 0..r.taus.len() {
        println!(
            "  {:>12.6e} {:>12.4e} {:>12.4e} {:>8} {:>8}",
            r.taus[i],
            r.err_u[i],
            r.err_p[i],
            fmt(r.order_u[i]),
            fmt(r.order_p[i])
        );
    }
}

pub fn converge(args: &ConvergeArgs) -> anyhow::Result<u8> {
    let (problem, t_final, reference, default_taus, startup_note) = match args.problem {
        ProblemKind::Spectral => {
            let cfg = config::spectral(args.config.as_deref())?;
            (
                cfg.build()?,
                cfg.t_final,
                ReferencePolicy::Exact,
                "0.078125:5",
                "exact solution",
            )
        }
        ProblemKind::Biot => {
            let cfg = config::biot(args.config.as_deref())?;
            (
                cfg.build(args.mesh)?,
                cfg.t_final,
                BIOT_REFERENCE,
                "0.625:4",
                "reference trajectory (monolithic BDF-3 at tau_min/8)",
            )
        }
    };
    let taus = config::parse_taus(args.taus.as_deref().unwrap_or(default_taus))?;
    let schemes = match args.scheme {
        SchemeChoice::Semi => vec![SchemeKind::SemiExplicit],
        SchemeChoice::Mono => vec![SchemeKind::Monolithic],
        SchemeChoice::Both => vec![SchemeKind::SemiExplicit, SchemeKind::Monolithic],
    };
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for &k in &args.k {
        let pair = (k as usize, args.delta.unwrap_or(k) as usize);
        if pairs.contains(&pair) {
            return Err(usage(format!("--k lists order {k} twice")));
        }
        pairs.push(pair);
    }
    let study = StudyConfig {
        pairs,
        taus,
        t_final,
        schemes,
        reference,
        startup: Startup::Exact,
    };
    let reports = convergence_study(&problem, &study)?;

    let limit = DIVERGENCE_FACTOR * initial_norm(&problem);
    let mut diverged = false;
    println!("problem {}, T={t_final}, startup from {startup_note}", problem.label);
    for r in &reports {
        write(&r.to_table(), &args.out, &r.file_name())?;
        print_report(r);
        if r.err_u.iter().chain(&r.err_p).any(|e| !(e.is_finite() && *e <= limit)) {
            eprintln!("{} diverged (error above {limit:.3e})", r.label());
            diverged = true;
        }
    }
    Ok(if diverged { EXIT_DIVERGED } else { EXIT_OK })
}

pub fn dde_demo_cmd(args: &DdeArgs) -> anyhow::Result<u8> {
    if args.n_list.is_empty() {
        return Err(usage("--n-list must not be empty"));
    }
    let results = args
        .n_list
        .iter()
        .map(|&n| dde_demo(n, args.y0, args.inner_steps))
        .collect::<bdfd::Result<Vec<_>>>()?;

    let mut growth = Table::new(["n", "s0", "s1", "s2", "s3"]);
    for r in &results {
        let mut row = vec![r.n.to_string()];
        row.extend(r.sup_norms.iter().map(|&s| fmt_f64(s)));
        growth.push(row);
    }
    write(&growth, &args.out, "dde_growth.csv")?;

    // Trajectories on a common grid of spacing 0.01 over [−1, 3].
    let mut header = vec!["t".to_string()];
    header.extend(results.iter().map(|r| format!("y_n{}", r.n)));
    let mut solution = Table::new(header);
    for i in 0..=400 {
        let t = -1.0 + i as f64 / 100.0;
        let mut row = vec![fmt_f64(t)];
        row.extend(results.iter().map(|r| fmt_f64(r.y_at(t).unwrap_or(f64::NAN))));
        solution.push(row);
    }
    write(&solution, &args.out, "dde_solution.csv")?;

    let ns: Vec<f64> = results.iter().map(|r| r.n as f64).collect();
    let s3: Vec<f64> = results.iter().map(|r| r.sup_norms[3]).collect();
    match growth_exponent(&ns, &s3) {
        Some(e) => println!("growth exponent of s3 in n: {e:.4}"),
        None => println!("growth exponent of s3 in n: NA"),
    }
    Ok(EXIT_OK)
}

pub fn coupling(args: &CouplingArgs) -> anyhow::Result<u8> {
    let problem = match args.problem {
        ProblemKind::Spectral => {
            let mut cfg = config::spectral(args.config.as_deref())?;
            if let Some(mu) = &args.mu {
                cfg.mu = mu.clone();
                cfg.b = None;
            }
            cfg.build()?
        }
        ProblemKind::Biot => {
            let cfg = config::biot(args.config.as_deref())?;
            println!("continuum bound alpha^2 M/(2mu+lambda) = {:.6}", cfg.params.coupling_bound());
            cfg.build(args.mesh)?
        }
    };
    let mu_max = estimate_coupling(&problem, COUPLING_TOL)?;
    println!("mu_max = {}", fmt_f64(mu_max));
    let mut certified = Vec::new();
    for k in 1..=3 {
        let th = critical_threshold_f64(k)?;
        let ok = mu_max <= th;
        println!("k={k}: threshold {th:.6} {}", if ok { "certified" } else { "not certified" });
        if ok {
            certified.push(k.to_string());
        }
    }
    if certified.is_empty() {
        eprintln!("warning: coupling {mu_max:.6} exceeds every threshold; no order is certified");
        println!("certified orders: none");
    } else {
        println!("certified orders: {}", certified.join(","));
    }
    Ok(EXIT_OK)
}
