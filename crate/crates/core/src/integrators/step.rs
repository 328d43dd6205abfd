use super::SchemeConfig;
use crate::error::SubStep;
use crate::numerics::{pcg, LinearOperator, SparseSymmetric};
use crate::problems::EllipticParabolicSystem;
use crate::stencils::{BdfScheme, DelayStencil};
use crate::{Error, Result};

/// Relative tolerance of the outer (flow and Schur) solves.
pub const OUTER_RTOL: f64 = 1e-12;
/// Relative tolerance of elastic solves nested inside the Schur operator.
pub const INNER_RTOL: f64 = 1e-13;

/// New states produced by one step plus the linear iterations spent.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub iterations: usize,
}

fn budget(n: usize) -> usize {
    20 * n + 200
}

/// Per-(problem, k, δ, τ) data reused across steps.
pub struct Stepper<'a> {
    problem: &'a EllipticParabolicSystem,
    tau: f64,
    bdf: BdfScheme,
    delay: DelayStencil,
    xi: Vec<f64>,
    /// `ξ_0/τ·C + B`
    flow: SparseSymmetric,
}

impl<'a> Stepper<'a> {
    pub fn new(problem: &'a EllipticParabolicSystem, cfg: &SchemeConfig) -> Result<Self> {
        problem.validate()?;
        let bdf = BdfScheme::new(cfg.k)?;
        let delay = DelayStencil::new(cfg.delta)?;
        let xi = bdf.coefficients_f64();
        let flow = SparseSymmetric::linear_combination(xi[0] / cfg.tau, &problem.c, 1.0, &problem.b)?;
        Ok(Self {
            problem,
            tau: cfg.tau,
            bdf,
            delay,
            xi,
            flow,
        })
    }

    pub fn k(&self) -> usize {
        self.bdf.order()
    }

    pub fn delta(&self) -> usize {
        self.delay.delta()
    }

    fn check_window(&self, name: &str, window: &[Vec<f64>], need: usize, dim: usize) -> Result<()> {
        if window.len() < need {
            return Err(Error::Shape(format!(
                "{name} window needs {need} past states, got {}",
                window.len()
            )));
        }
        if let Some(v) = window[..need].iter().find(|v| v.len() != dim) {
            return Err(Error::Shape(format!(
                "{name} state has length {}, expected {dim}",
                v.len()
            )));
        }
        Ok(())
    }

    /// `−(1/τ) Σ_{ℓ≥1} ξ_ℓ C p^{n−ℓ}` added to `rhs`.
    fn add_flow_history(&self, rhs: &mut [f64], p_past: &[Vec<f64>]) -> Result<()> {
        let hist = self.bdf.history_sum(&p_past[..self.k()])?;
        for (r, v) in rhs.iter_mut().zip(self.problem.c.mul_vec(&hist)) {
            *r -= v / self.tau;
        }
        Ok(())
    }

    fn solve_flow(&self, rhs: &[f64], guess: &[f64]) -> Result<(Vec<f64>, usize)> {
        let out = pcg(&self.flow, rhs, Some(guess), OUTER_RTOL, budget(rhs.len()))
            .map_err(|e| e.in_stage(SubStep::Flow))?;
        Ok((out.x, out.iterations))
    }

    fn solve_elastic(&self, rhs: &[f64], guess: Option<&[f64]>, rtol: f64, stage: SubStep) -> Result<(Vec<f64>, usize)> {
        let out = pcg(&self.problem.a, rhs, guess, rtol, budget(rhs.len())).map_err(|e| e.in_stage(stage))?;
        Ok((out.x, out.iterations))
    }

    /// Decoupled step: elastic solve with the extrapolated pressure, then the
    /// flow solve with the new displacement.
    ///
    /// `u_past = [u^{n−1}, …]` (≥ k entries), `p_past = [p^{n−1}, …]`
    /// (≥ max(k, δ) entries), both newest-first.
    pub fn semi_explicit(&self, t: f64, u_past: &[Vec<f64>], p_past: &[Vec<f64>]) -> Result<StepOutput> {
        let (k, delta) = (self.k(), self.delta());
        let pr = self.problem;
        self.check_window("u", u_past, k, pr.dim_u())?;
        self.check_window("p", p_past, k.max(delta), pr.dim_p())?;

        let extrapolated = self.delay.apply(&p_past[..delta])?;
        let mut rhs_u = (pr.f)(t);
        for (r, v) in rhs_u.iter_mut().zip(pr.d.mul_transpose_vec(&extrapolated)) {
            *r += v;
        }
        let (u, it_u) = self.solve_elastic(&rhs_u, Some(&u_past[0]), OUTER_RTOL, SubStep::Elastic)?;

        let mut window = Vec::with_capacity(k + 1);
        window.push(u.clone());
        window.extend(u_past[..k].iter().cloned());
        let du = self.bdf.apply(&window, self.tau)?;
        let mut rhs_p = (pr.g)(t);
        for (r, v) in rhs_p.iter_mut().zip(pr.d.mul_vec(&du)) {
            *r -= v;
        }
        self.add_flow_history(&mut rhs_p, p_past)?;
        let (p, it_p) = self.solve_flow(&rhs_p, &p_past[0])?;
        Ok(StepOutput {
            u,
            p,
            iterations: it_u + it_p,
        })
    }

    /// Fully coupled step via the Schur complement on p,
    /// `((ξ_0/τ)(C + D A⁻¹ Dᵀ) + B) p^n = g^n − (1/τ)Σ_{ℓ≥1} ξ_ℓ (D u^{n−ℓ} + C p^{n−ℓ}) − (ξ_0/τ) D A⁻¹ f^n`,
    /// followed by `u^n = A⁻¹(f^n + Dᵀ p^n)`.
    pub fn monolithic(&self, t: f64, u_past: &[Vec<f64>], p_past: &[Vec<f64>]) -> Result<StepOutput> {
        let k = self.k();
        let pr = self.problem;
        self.check_window("u", u_past, k, pr.dim_u())?;
        self.check_window("p", p_past, k, pr.dim_p())?;
        let scale = self.xi[0] / self.tau;

        let f = (pr.f)(t);
        let (a_inv_f, mut iterations) = self.solve_elastic(&f, Some(&u_past[0]), INNER_RTOL, SubStep::Coupling)?;
        let u_hist = self.bdf.history_sum(&u_past[..k])?;
        let mut rhs = (pr.g)(t);
        for ((r, du), df) in rhs.iter_mut().zip(pr.d.mul_vec(&u_hist)).zip(pr.d.mul_vec(&a_inv_f)) {
            *r -= du / self.tau + scale * df;
        }
        self.add_flow_history(&mut rhs, p_past)?;

        let schur = Schur {
            stepper: self,
            scale,
            inner_iterations: std::cell::Cell::new(0),
        };
        let guess = extrapolate_guess(p_past, k);
        let out = pcg(&schur, &rhs, Some(&guess), OUTER_RTOL, budget(rhs.len()))
            .map_err(|e| match e {
                Error::StepSolve { .. } => e,
                other => other.in_stage(SubStep::Schur),
            })?;
        iterations += out.iterations + schur.inner_iterations.get();
        let p = out.x;

        let mut rhs_u = f;
        for (r, v) in rhs_u.iter_mut().zip(pr.d.mul_transpose_vec(&p)) {
            *r += v;
        }
        let (u, it_u) = self.solve_elastic(&rhs_u, Some(&a_inv_f), OUTER_RTOL, SubStep::Elastic)?;
        Ok(StepOutput {
            u,
            p,
            iterations: iterations + it_u,
        })
    }

    /// p-only step `C ∂p^n + M D_δ(∂p^n) + B p^n = g^n − D A⁻¹ ḟ^n`, where
    /// `D_δ(∂p^n)` only involves past values. `p_past` needs k + δ entries.
    /// The returned `u` is the displacement consistent with the new pressure,
    /// `A⁻¹(f^n + Dᵀ D_δ p^n)`.
    pub fn reduced(&self, t: f64, p_past: &[Vec<f64>]) -> Result<StepOutput> {
        let (k, delta) = (self.k(), self.delta());
        let pr = self.problem;
        let f_dot = pr
            .f_dot
            .as_ref()
            .ok_or_else(|| Error::UnsupportedProblem(format!("{} has no load derivative", pr.label)))?;
        self.check_window("p", p_past, k + delta, pr.dim_p())?;

        // ∂p^{n−m} for m = 1..δ; each needs p^{n−m}..p^{n−m−k}.
        let diffs: Vec<Vec<f64>> = (1..=delta)
            .map(|m| self.bdf.apply(&p_past[m - 1..m + k], self.tau))
            .collect::<Result<_>>()?;
        let delayed = self.delay.apply(&diffs)?;
        let (m_delayed, it_m) = self.coupling(&delayed)?;
        let (a_inv_fdot, it_f) = self.solve_elastic(&f_dot(t), None, INNER_RTOL, SubStep::Coupling)?;

        let mut rhs = (pr.g)(t);
        for ((r, a), b) in rhs.iter_mut().zip(pr.d.mul_vec(&a_inv_fdot)).zip(&m_delayed) {
            *r -= a + b;
        }
        self.add_flow_history(&mut rhs, p_past)?;
        let (p, it_p) = self.solve_flow(&rhs, &p_past[0])?;

        let extrapolated = self.delay.apply(&p_past[..delta])?;
        let mut rhs_u = (pr.f)(t);
        for (r, v) in rhs_u.iter_mut().zip(pr.d.mul_transpose_vec(&extrapolated)) {
            *r += v;
        }
        let (u, it_u) = self.solve_elastic(&rhs_u, None, OUTER_RTOL, SubStep::Elastic)?;
        Ok(StepOutput {
            u,
            p,
            iterations: it_m + it_f + it_p + it_u,
        })
    }

    /// `D A⁻¹ Dᵀ x`.
    fn coupling(&self, x: &[f64]) -> Result<(Vec<f64>, usize)> {
        let pr = self.problem;
        let rhs = pr.d.mul_transpose_vec(x);
        let (w, it) = self.solve_elastic(&rhs, None, INNER_RTOL, SubStep::Coupling)?;
        Ok((pr.d.mul_vec(&w), it))
    }
}

/// Linear extrapolation of the pressure history as an initial guess.
fn extrapolate_guess(p_past: &[Vec<f64>], available: usize) -> Vec<f64> {
    if available >= 2 {
        p_past[0].iter().zip(&p_past[1]).map(|(a, b)| 2.0 * a - b).collect()
    } else {
        p_past[0].clone()
    }
}

/// `x ↦ scale·(C x + D A⁻¹ Dᵀ x) + B x`, applied matrix-free.
struct Schur<'s, 'a> {
    stepper: &'s Stepper<'a>,
    scale: f64,
    inner_iterations: std::cell::Cell<usize>,
}

impl LinearOperator for Schur<'_, '_> {
    fn dim(&self) -> usize {
        self.stepper.problem.dim_p()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (mx, it) = self.stepper.coupling(x)?;
        self.inner_iterations.set(self.inner_iterations.get() + it);
        let mut y = self.stepper.flow.mul_vec(x);
        for (yi, mi) in y.iter_mut().zip(mx) {
            *yi += self.scale * mi;
        }
        Ok(y)
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.stepper.flow.diag())
    }
}
