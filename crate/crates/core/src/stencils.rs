//! Exact coefficient tables for the BDF-k operator and the δ-delay
//! extrapolation stencil.
//!
//! Sequences are always passed newest-first: `values[0]` is `y^n`,
//! `values[1]` is `y^{n-1}`, and so on.

use num_rational::Ratio;
use num_traits::ToPrimitive;

use crate::{Error, Result};

pub type Rational = Ratio<i64>;

pub const MAX_BDF_ORDER: usize = 3;
pub const MAX_DELAY: usize = 4;

/// BDF-k operator `∂y^n = (1/τ) Σ_ℓ ξ_{k,ℓ} y^{n-ℓ}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BdfScheme {
    order: usize,
    xi: Vec<Rational>,
}

impl BdfScheme {
    pub fn new(order: usize) -> Result<Self> {
        let r = |n, d| Rational::new(n, d);
        let xi = match order {
            1 => vec![r(1, 1), r(-1, 1)],
            2 => vec![r(3, 2), r(-2, 1), r(1, 2)],
            3 => vec![r(11, 6), r(-3, 1), r(3, 2), r(-1, 3)],
            _ => {
                return Err(Error::UnsupportedOrder {
                    order,
                    min: 1,
                    max: MAX_BDF_ORDER,
                })
            }
        };
        Ok(Self { order, xi })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// ξ_{k,0..k} as exact rationals.
    pub fn coefficients(&self) -> &[Rational] {
        &self.xi
    }

    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.xi.iter().map(to_f64).collect()
    }

    /// ξ_{k,0}, the weight of the newest value.
    pub fn leading(&self) -> f64 {
        to_f64(&self.xi[0])
    }

    /// `(1/τ) Σ_ℓ ξ_{k,ℓ} values[ℓ]` for `k+1` newest-first state vectors.
    pub fn apply<V: AsRef<[f64]>>(&self, values: &[V], tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {tau}"
            )));
        }
        let mut out = combine(&self.coefficients_f64(), values, "BDF")?;
        out.iter_mut().for_each(|v| *v /= tau);
        Ok(out)
    }

    /// `Σ_{ℓ≥1} ξ_{k,ℓ} values[ℓ-1]`: the history part of `τ∂y^n`, with
    /// `values` starting at `y^{n-1}`.
    pub(crate) fn history_sum<V: AsRef<[f64]>>(&self, past: &[V]) -> Result<Vec<f64>> {
        combine(&self.coefficients_f64()[1..], past, "BDF history")
    }
}

/// Delay extrapolation `D_δ(p^n) = Σ_{ℓ=1}^{δ} c_{δ,ℓ} p^{n-ℓ}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayStencil {
    delta: usize,
    c: Vec<i64>,
}

impl DelayStencil {
    pub fn new(delta: usize) -> Result<Self> {
        if delta < 1 {
            return Err(Error::InvalidArgument(
                "delay count must be at least 1".into(),
            ));
        }
        if delta > MAX_DELAY {
            return Err(Error::UnsupportedOrder {
                order: delta,
                min: 1,
                max: MAX_DELAY,
            });
        }
        // c_{δ,ℓ} = (-1)^{ℓ-1} binom(δ, ℓ)
        let mut c = Vec::with_capacity(delta);
        let mut binom = 1i64;
        for l in 1..=delta as i64 {
            binom = binom * (delta as i64 - l + 1) / l;
            c.push(if l % 2 == 1 { binom } else { -binom });
        }
        Ok(Self { delta, c })
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn coefficients(&self) -> &[i64] {
        &self.c
    }

    pub fn coefficients_f64(&self) -> Vec<f64> {
        self.c.iter().map(|&c| c as f64).collect()
    }

    /// `Σ_ℓ c_{δ,ℓ} history[ℓ-1]` for `history = [p^{n-1}, …, p^{n-δ}]`.
    pub fn apply<V: AsRef<[f64]>>(&self, history: &[V]) -> Result<Vec<f64>> {
        combine(&self.coefficients_f64(), history, "delay")
    }
}

pub fn bdf_coefficients(k: usize) -> Result<BdfScheme> {
    BdfScheme::new(k)
}

pub fn delay_coefficients(delta: usize) -> Result<DelayStencil> {
    DelayStencil::new(delta)
}

pub fn apply_bdf<V: AsRef<[f64]>>(scheme: &BdfScheme, values: &[V], tau: f64) -> Result<Vec<f64>> {
    scheme.apply(values, tau)
}

pub fn apply_delay<V: AsRef<[f64]>>(stencil: &DelayStencil, history: &[V]) -> Result<Vec<f64>> {
    stencil.apply(history)
}

fn to_f64(r: &Rational) -> f64 {
    r.to_f64().expect("small rational")
}

fn combine<V: AsRef<[f64]>>(weights: &[f64], values: &[V], what: &str) -> Result<Vec<f64>> {
    if values.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{what} stencil needs {} values, got {}",
            weights.len(),
            values.len()
        )));
    }
    let dim = values[0].as_ref().len();
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(values) {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(Error::Shape(format!(
                "{what} stencil values have dimensions {dim} and {}",
                v.len()
            )));
        }
        out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
    }
    Ok(out)
}
