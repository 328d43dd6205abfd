use super::sparse::{axpy, dot, norm2, SparseSymmetric};
use crate::{Error, Result};

pub const DEFAULT_RTOL: f64 = 1e-12;

/// A symmetric operator applied matrix-free.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Diagonal used for Jacobi preconditioning; `None` means no preconditioner.
    fn diagonal(&self) -> Option<Vec<f64>> {
        None
    }
}

impl LinearOperator for SparseSymmetric {
    fn dim(&self) -> usize {
        SparseSymmetric::dim(self)
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mul_vec(x))
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        Some(self.diag())
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual `‖b − Ax‖ / ‖b‖`.
    pub residual: f64,
}

/// Solves `A x = b` for SPD `A` to `‖Ax − b‖ ≤ rtol·‖b‖`.
pub fn cg_solve(a: &SparseSymmetric, b: &[f64], rtol: f64, max_iter: usize) -> Result<Vec<f64>> {
    pcg(a, b, None, rtol, max_iter).map(|o| o.x)
}

/// Jacobi-preconditioned CG with an optional initial guess.
///
/// The recursive residual is checked against the true residual before
/// returning; on disagreement the iteration restarts from the current iterate.
pub fn pcg<Op: LinearOperator + ?Sized>(
    a: &Op,
    b: &[f64],
    x0: Option<&[f64]>,
    rtol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::Shape(format!(
            "right-hand side has length {}, operator has dimension {n}",
            b.len()
        )));
    }
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::InvalidArgument(format!("rtol must lie in (0, 1), got {rtol}")));
    }
    let inv_diag = match a.diagonal() {
        Some(d) => {
            if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "operator diagonal entry {i} is {} (not positive)",
                    d[i]
                )));
            }
            Some(d.iter().map(|v| 1.0 / v).collect::<Vec<_>>())
        }
        None => None,
    };
    let precond = |r: &[f64]| -> Vec<f64> {
        match &inv_diag {
            Some(w) => r.iter().zip(w).map(|(ri, wi)| ri * wi).collect(),
            None => r.to_vec(),
        }
    };

    let b_norm = norm2(b);
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => {
            return Err(Error::Shape(format!(
                "initial guess has length {}, operator has dimension {n}",
                x0.len()
            )))
        }
        None => vec![0.0; n],
    };
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = rtol * b_norm;

    let true_residual = |x: &[f64]| -> Result<Vec<f64>> {
        let ax = a.apply(x)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    };

    let mut iterations = 0;
    let mut restarts = 0;
    loop {
        let mut r = true_residual(&x)?;
        let mut r_norm = norm2(&r);
        if r_norm <= target {
            return Ok(CgOutcome {
                x,
                iterations,
                residual: r_norm / b_norm,
            });
        }
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while r_norm > target {
            if iterations >= max_iter {
                let r_true = norm2(&true_residual(&x)?);
                return Err(Error::NonConvergence {
                    iterations,
                    residual: r_true / b_norm,
                });
            }
            iterations += 1;
            let ap = a.apply(&p)?;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Breakdown { iteration: iterations });
            }
            let alpha = rz / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            r_norm = norm2(&r);
            z = precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
        }
        let r_true = norm2(&true_residual(&x)?);
        if r_true <= target {
            return Ok(CgOutcome {
                x,
                iterations,
                residual: r_true / b_norm,
            });
        }
        restarts += 1;
        if restarts > 5 {
            return Err(Error::NonConvergence {
                iterations,
                residual: r_true / b_norm,
            });
        }
    }
}
