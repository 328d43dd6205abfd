use std::sync::Arc;

use super::{EllipticParabolicSystem, ExactSolution};
use crate::numerics::{SparseRect, SparseSymmetric};
use crate::{Error, Result};

/// Load on the elliptic equation, `f_i(t) = LOAD_OFFSET + LOAD_SLOPE·t`.
/// It is affine in time so that the BDF difference of `f` equals `ḟ` exactly.
const LOAD_OFFSET: f64 = 0.5;
const LOAD_SLOPE: f64 = 0.1;

/// Scalar time profile of the manufactured pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `e^{−rate·t}`
    Exponential { rate: f64 },
    /// `cos(ω t)`
    Cosine { omega: f64 },
    /// `1`
    Constant,
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Profile::Exponential { rate } => (-rate * t).exp(),
            Profile::Cosine { omega } => (omega * t).cos(),
            Profile::Constant => 1.0,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Profile::Exponential { rate } => -rate * (-rate * t).exp(),
            Profile::Cosine { omega } => -omega * (omega * t).sin(),
            Profile::Constant => 0.0,
        }
    }
}

fn amplitude(i: usize) -> f64 {
    1.0 / (1.0 + i as f64)
}

/// Diagonal system with `A = C = I`, `D = diag(√μ_i)`, `B = diag(b_i)`, so
/// that `M = diag(μ_i)`. The exact pressure is `p_i(t) = profile(t)/(1+i)`,
/// `u = f + Dᵀp`, and `g` is chosen so that the pair solves the system.
pub fn build_spectral_problem(
    mu_values: &[f64],
    b_values: &[f64],
    profile: Profile,
) -> Result<EllipticParabolicSystem> {
    let n = mu_values.len();
    if n == 0 || b_values.len() != n {
        return Err(Error::Shape(format!(
            "need equally many (>0) mu and b values, got {n} and {}",
            b_values.len()
        )));
    }
    if let Some(m) = mu_values.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument(format!("mu values must be >= 0, got {m}")));
    }
    if let Some(b) = b_values.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::InvalidArgument(format!("b values must be > 0, got {b}")));
    }
    let sqrt_mu: Vec<f64> = mu_values.iter().map(|m| m.sqrt()).collect();
    let b_diag = b_values.to_vec();

    let p_exact = move |t: f64| -> Vec<f64> { (0..n).map(|i| amplitude(i) * profile.value(t)).collect() };
    let load = move |t: f64| vec![LOAD_OFFSET + LOAD_SLOPE * t; n];
    let u_exact = {
        let s = sqrt_mu.clone();
        move |t: f64| -> Vec<f64> {
            let p = p_exact(t);
            load(t).iter().zip(&s).zip(&p).map(|((f, s), p)| f + s * p).collect()
        }
    };
    let g = {
        let s = sqrt_mu.clone();
        let b = b_diag.clone();
        move |t: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let p = amplitude(i) * profile.value(t);
                    let pd = amplitude(i) * profile.derivative(t);
                    let ud = LOAD_SLOPE + s[i] * pd;
                    s[i] * ud + pd + b[i] * p
                })
                .collect()
        }
    };

    Ok(EllipticParabolicSystem {
        label: "spectral".into(),
        a: SparseSymmetric::identity(n),
        b: SparseSymmetric::diagonal(&b_diag),
        c: SparseSymmetric::identity(n),
        d: SparseRect::diagonal(&sqrt_mu),
        f: Arc::new(load),
        g: Arc::new(g),
        f_dot: Some(Arc::new(move |_| vec![LOAD_SLOPE; n])),
        u0: u_exact(0.0),
        p0: p_exact(0.0),
        exact: Some(ExactSolution {
            u: Arc::new(u_exact),
            p: Arc::new(p_exact),
        }),
    })
}
