//! Concrete elliptic-parabolic systems and the advanced-type DDE example.

mod biot;
mod dde;
mod spectral;

use std::fmt;
use std::sync::Arc;

pub use biot::{build_biot_problem, BiotParameters, BIOT_AMPLITUDE, BIOT_RATE};
pub use dde::{dde_demo, growth_exponent, DdeDemoResult};
pub use spectral::{build_spectral_problem, Profile};

use crate::numerics::{cg_solve, generalized_power_iteration, norm2, SparseRect, SparseSymmetric};
use crate::{Error, Result};

/// Solve tolerance used for inner SPD solves.
pub const SOLVE_RTOL: f64 = 1e-12;

/// A vector-valued function of time.
pub type TimeFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Exact (or nodally interpolated) solution evaluators.
#[derive(Clone)]
pub struct ExactSolution {
    pub u: TimeFn,
    pub p: TimeFn,
}

/// `A u − Dᵀ p = f`, `D u̇ + C ṗ + B p = g` with SPD `A`, `B`, `C`.
#[derive(Clone)]
pub struct EllipticParabolicSystem {
    pub label: String,
    pub a: SparseSymmetric,
    pub b: SparseSymmetric,
    pub c: SparseSymmetric,
    /// Coupling, `dim_p x dim_u`.
    pub d: SparseRect,
    pub f: TimeFn,
    pub g: TimeFn,
    /// Time derivative of `f`, needed by the reduced p-only scheme.
    pub f_dot: Option<TimeFn>,
    pub u0: Vec<f64>,
    pub p0: Vec<f64>,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for EllipticParabolicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticParabolicSystem")
            .field("label", &self.label)
            .field("dim_u", &self.dim_u())
            .field("dim_p", &self.dim_p())
            .field("has_exact", &self.exact.is_some())
            .field("has_f_dot", &self.f_dot.is_some())
            .finish()
    }
}

impl EllipticParabolicSystem {
    pub fn dim_u(&self) -> usize {
        self.a.dim()
    }

    pub fn dim_p(&self) -> usize {
        self.c.dim()
    }

    /// Checks operator shapes and initial data lengths.
    pub fn validate(&self) -> Result<()> {
        let (nu, np) = (self.dim_u(), self.dim_p());
        if self.b.dim() != np || self.d.rows() != np || self.d.cols() != nu {
            return Err(Error::Shape(format!(
                "operators inconsistent: A {nu}x{nu}, C {np}x{np}, B {0}x{0}, D {1}x{2}",
                self.b.dim(),
                self.d.rows(),
                self.d.cols()
            )));
        }
        if self.u0.len() != nu || self.p0.len() != np {
            return Err(Error::Shape(format!(
                "initial data lengths ({}, {}) do not match ({nu}, {np})",
                self.u0.len(),
                self.p0.len()
            )));
        }
        Ok(())
    }

    /// `‖A u0 − Dᵀ p0 − f(0)‖`, which should vanish for consistent data.
    pub fn initial_consistency_residual(&self) -> f64 {
        let au = self.a.mul_vec(&self.u0);
        let dp = self.d.mul_transpose_vec(&self.p0);
        let f0 = (self.f)(0.0);
        let r: Vec<f64> = au.iter().zip(&dp).zip(&f0).map(|((a, d), f)| a - d - f).collect();
        norm2(&r)
    }

    /// `M x = D A⁻¹ Dᵀ x`.
    pub fn coupling_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.d.mul_transpose_vec(x);
        let w = cg_solve(&self.a, &rhs, SOLVE_RTOL, 20 * self.dim_u() + 100)?;
        Ok(self.d.mul_vec(&w))
    }

    /// `u = A⁻¹(f(t) + Dᵀ p)`, the displacement consistent with `p` at `t`.
    pub fn consistent_u(&self, t: f64, p: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = (self.f)(t);
        for (r, v) in rhs.iter_mut().zip(self.d.mul_transpose_vec(p)) {
            *r += v;
        }
        cg_solve(&self.a, &rhs, SOLVE_RTOL, 20 * self.dim_u() + 100)
    }
}

/// Largest generalized eigenvalue of `M φ = μ C φ` with `M = D A⁻¹ Dᵀ`.
pub fn estimate_coupling(problem: &EllipticParabolicSystem, tol: f64) -> Result<f64> {
    problem.validate()?;
    let out = generalized_power_iteration(|x| problem.coupling_apply(x), &problem.c, tol, 100_000)?;
    Ok(out.mu_max)
}
