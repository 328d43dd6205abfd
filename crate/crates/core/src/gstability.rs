//! G-stability certificates for the semi-explicit BDF-k schemes with δ = k.
//!
//! For a scalar sequence `y` the summation identity reads
//!
//! ```text
//! (τ∂y^n + μ·D_δ(τ∂y^n)) · (y^n − η y^{n−1})
//!     = |Y^n|²_G − |Y^{n−1}|²_G + (Σ_i γ_i y^{n−i})²
//! ```
//!
//! with `Y^n = (y^n, …, y^{n−2k+1})`. Matching coefficients gives a bilinear
//! system for the multipliers `γ_0..γ_{2k}` and an explicit `G` in terms of `γ`.

use std::str::FromStr;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::csv::{fmt_f64, Table};
use crate::numerics::DenseSymmetric;
use crate::stencils::{BdfScheme, DelayStencil, Rational};
use crate::{Error, Result};

/// Continuation step in μ for the numerically solved branches.
pub const CONTINUATION_STEP: f64 = 1e-3;
/// Largest admissible γ residual for a certificate.
pub const GAMMA_TOLERANCE: f64 = 1e-10;

const NEWTON_MAX_ITER: usize = 60;
const IDENTITY_SEQUENCES: usize = 100;
const IDENTITY_LENGTH: usize = 10;
const IDENTITY_SEED: u64 = 0x6273_7461_6269_6c65;

/// Reduced BDF-3 factor at μ = 0, η = 0.12, refined by Newton before use.
const K3_SEED_ETA: f64 = 0.12;
const K3_SEED: [f64; 4] = [-0.29909084, 0.80901582, -1.06716925, 0.5572443];

fn check_order(k: usize) -> Result<()> {
    if (1..=3).contains(&k) {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder {
            order: k,
            min: 1,
            max: 3,
        })
    }
}

/// Largest coupling strength covered by the certificate of order `k`.
pub fn critical_threshold(k: usize) -> Result<Rational> {
    check_order(k)?;
    Ok(Rational::new(1, [1, 3, 7][k - 1]))
}

pub fn critical_threshold_f64(k: usize) -> Result<f64> {
    let r = critical_threshold(k)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

/// Multiplier η used by default: 0 for k = 1, 2 and 0.12 for k = 3.
pub fn default_eta(k: usize) -> Result<f64> {
    check_order(k)?;
    Ok(if k == 3 { 0.12 } else { 0.0 })
}

fn check_parameters(k: usize, mu: f64, eta: f64) -> Result<()> {
    check_order(k)?;
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!("mu must be finite and >= 0, got {mu}")));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("eta must lie in [0, 1), got {eta}")));
    }
    let threshold = critical_threshold_f64(k)?;
    // (γ_1 + γ_3 + …)² = c_k (1+η)(1 − μ/threshold) must be non-negative.
    if (1.0 + eta) * (1.0 - mu / threshold) < 0.0 {
        return Err(Error::NoRealSolution { k, mu, threshold });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Transcribed coefficient tables
// ---------------------------------------------------------------------------

/// Coefficients of `base + μ·Mμ + η·Mη + ημ·Mημ`.
#[derive(Debug, Clone)]
struct Affine<T> {
    base: T,
    mu: T,
    eta: T,
    eta_mu: T,
}

type RatMatrix = Vec<Vec<Rational>>;

struct Tables {
    g: Affine<RatMatrix>,
    /// Right-hand side of the γ equation for lag d (index d), as
    /// `[const, μ, η, ημ]`.
    lags: Vec<[Rational; 4]>,
}

fn parse_matrix(rows: &[&[&str]]) -> RatMatrix {
    rows.iter()
        .map(|r| r.iter().map(|s| Rational::from_str(s).expect("valid rational literal")).collect())
        .collect()
}

fn parse_lags(rows: &[[&str; 4]]) -> Vec<[Rational; 4]> {
    rows.iter()
        .map(|r| r.map(|s| Rational::from_str(s).expect("valid rational literal")))
        .collect()
}

fn build_tables(k: usize) -> Tables {
    match k {
        1 => Tables {
            g: Affine {
                base: parse_matrix(&[&["1", "-1/2"], &["-1/2", "1"]]),
                mu: parse_matrix(&[&["0", "1/2"], &["1/2", "0"]]),
                eta: parse_matrix(&[&["0", "-1/2"], &["-1/2", "1"]]),
                eta_mu: parse_matrix(&[&["0", "0"], &["0", "-1"]]),
            },
            lags: parse_lags(&[
                ["1", "0", "1", "-1"],
                ["-1", "1", "-1", "1"],
                ["0", "-1", "0", "0"],
            ]),
        },
        2 => Tables {
            g: Affine {
                base: parse_matrix(&[
                    &["3/2", "-1", "1/4", "0"],
                    &["-1", "3/2", "-1", "1/4"],
                    &["1/4", "-1", "3/2", "-1"],
                    &["0", "1/4", "-1", "3/2"],
                ]),
                mu: parse_matrix(&[
                    &["0", "3/2", "-11/4", "3/2"],
                    &["3/2", "0", "3/2", "-11/4"],
                    &["-11/4", "3/2", "0", "3/2"],
                    &["3/2", "-11/4", "3/2", "0"],
                ]),
                eta: parse_matrix(&[
                    &["0", "-3/4", "0", "0"],
                    &["-3/4", "2", "-1", "0"],
                    &["0", "-1", "2", "-1"],
                    &["0", "0", "-1", "2"],
                ]),
                eta_mu: parse_matrix(&[
                    &["0", "0", "0", "0"],
                    &["0", "-3", "11/4", "-3/2"],
                    &["0", "11/4", "-3", "11/4"],
                    &["0", "-3/2", "11/4", "-3"],
                ]),
            },
            lags: parse_lags(&[
                ["3/2", "0", "2", "-3"],
                ["-2", "3", "-2", "11/2"],
                ["1/2", "-11/2", "0", "-3"],
                ["0", "3", "0", "1/2"],
                ["0", "-1/2", "0", "0"],
            ]),
        },
        3 => Tables {
            g: Affine {
                base: parse_matrix(&[
                    &["11/6", "-3/2", "3/4", "-1/6", "0", "0"],
                    &["-3/2", "11/6", "-3/2", "3/4", "-1/6", "0"],
                    &["3/4", "-3/2", "11/6", "-3/2", "3/4", "-1/6"],
                    &["-1/6", "3/4", "-3/2", "11/6", "-3/2", "3/4"],
                    &["0", "-1/6", "3/4", "-3/2", "11/6", "-3/2"],
                    &["0", "0", "-1/6", "3/4", "-3/2", "11/6"],
                ]),
                mu: parse_matrix(&[
                    &["0", "11/4", "-29/4", "23/3", "-17/4", "5/4"],
                    &["11/4", "0", "11/4", "-29/4", "23/3", "-17/4"],
                    &["-29/4", "11/4", "0", "11/4", "-29/4", "23/3"],
                    &["23/3", "-29/4", "11/4", "0", "11/4", "-29/4"],
                    &["-17/4", "23/3", "-29/4", "11/4", "0", "11/4"],
                    &["5/4", "-17/4", "23/3", "-29/4", "11/4", "0"],
                ]),
                eta: parse_matrix(&[
                    &["0", "-11/12", "0", "0", "0", "0"],
                    &["-11/12", "3", "-5/3", "1/6", "0", "0"],
                    &["0", "-5/3", "3", "-5/3", "1/6", "0"],
                    &["0", "1/6", "-5/3", "3", "-5/3", "1/6"],
                    &["0", "0", "1/6", "-5/3", "3", "-5/3"],
                    &["0", "0", "0", "1/6", "-5/3", "3"],
                ]),
                eta_mu: parse_matrix(&[
                    &["0", "0", "0", "0", "0", "0"],
                    &["0", "-11/2", "29/4", "-23/3", "17/4", "-5/4"],
                    &["0", "29/4", "-11/2", "29/4", "-23/3", "17/4"],
                    &["0", "-23/3", "29/4", "-11/2", "29/4", "-23/3"],
                    &["0", "17/4", "-23/3", "29/4", "-11/2", "29/4"],
                    &["0", "-5/4", "17/4", "-23/3", "29/4", "-11/2"],
                ]),
            },
            lags: parse_lags(&[
                ["11/6", "0", "3", "-11/2"],
                ["-3", "11/2", "-10/3", "29/2"],
                ["3/2", "-29/2", "1/3", "-46/3"],
                ["-1/3", "46/3", "0", "17/2"],
                ["0", "-17/2", "0", "-5/2"],
                ["0", "5/2", "0", "1/3"],
                ["0", "-1/3", "0", "0"],
            ]),
        },
        _ => unreachable!("order checked by caller"),
    }
}

fn tables(k: usize) -> &'static Tables {
    static CELLS: [OnceLock<Tables>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[k - 1].get_or_init(|| build_tables(k))
}

fn rat(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Right-hand sides of the γ equations, indexed by lag `d = 0..=2k`.
fn lag_rhs(k: usize, mu: f64, eta: f64) -> Vec<f64> {
    tables(k)
        .lags
        .iter()
        .map(|[c, m, e, em]| rat(c) + mu * rat(m) + eta * rat(e) + eta * mu * rat(em))
        .collect()
}

/// Lag-d autocorrelation `2^{[d>0]} Σ_i γ_i γ_{i+d}`.
fn autocorrelation(gamma: &[f64], d: usize) -> f64 {
    let s: f64 = (0..gamma.len().saturating_sub(d)).map(|i| gamma[i] * gamma[i + d]).sum();
    if d == 0 {
        s
    } else {
        2.0 * s
    }
}

fn check_gamma_len(k: usize, gamma: &[f64]) -> Result<()> {
    if gamma.len() != 2 * k + 1 {
        return Err(Error::Shape(format!(
            "gamma for k={k} must have length {}, got {}",
            2 * k + 1,
            gamma.len()
        )));
    }
    Ok(())
}

/// Max-norm residual of the defining γ system of order `k`.
pub fn gamma_system_residual(k: usize, mu: f64, eta: f64, gamma: &[f64]) -> Result<f64> {
    check_order(k)?;
    check_gamma_len(k, gamma)?;
    Ok(lag_rhs(k, mu, eta)
        .iter()
        .enumerate()
        .map(|(d, r)| (autocorrelation(gamma, d) - r).abs())
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// γ solvers
// ---------------------------------------------------------------------------

/// Closed-form multipliers for k = 1.
pub fn gamma_k1(mu: f64, eta: f64) -> Result<Vec<f64>> {
    check_parameters(1, mu, eta)?;
    let g1 = (0.5 * (1.0 + eta) * (1.0 - mu)).sqrt();
    let root = (0.5 * mu + 0.125 * (1.0 + eta) * (1.0 - mu)).sqrt();
    Ok(vec![-0.5 * g1 + root, g1, -0.5 * g1 - root])
}

/// Closed-form multipliers for k = 2 (η = 0). Returns `(γ, η)`.
pub fn gamma_k2(mu: f64) -> Result<(Vec<f64>, f64)> {
    check_parameters(2, mu, 0.0)?;
    let a = (1.0 - 3.0 * mu).max(0.0).sqrt();
    let b = (5.0 * mu + 1.0).sqrt();
    let theta = -0.25 * (b + a);
    let r = (mu + theta * theta).sqrt();
    let q = (3.0 * mu - a * theta) / (2.0 * r);
    let gamma = vec![
        0.5 * theta + 0.5 * r,
        0.5 * a - q,
        -0.75 * a + 0.25 * b,
        0.5 * a + q,
        0.5 * theta - 0.5 * r,
    ];
    Ok((gamma, 0.0))
}

/// Multipliers for k = 3 by Newton continuation in μ.
pub fn solve_gamma_k3(mu: f64, eta: f64) -> Result<Vec<f64>> {
    continue_branch(3, mu, eta)
}

/// Multipliers on the certified branch of order `k`.
///
/// k = 1 and k = 2 use closed forms; k = 2 is available for η = 0 only,
/// because its Jacobian is rank deficient along the solution set and a
/// numerical branch would not be unique. k = 3 is followed numerically.
pub fn solve_gamma(k: usize, mu: f64, eta: f64) -> Result<Vec<f64>> {
    check_parameters(k, mu, eta)?;
    match k {
        1 => gamma_k1(mu, eta),
        2 if eta == 0.0 => gamma_k2(mu).map(|(g, _)| g),
        2 => Err(Error::InvalidArgument(format!(
            "the k=2 certificate is defined for eta = 0 only, got {eta}"
        ))),
        _ => continue_branch(k, mu, eta),
    }
}

/// Reduced (μ = 0) BDF factor of length k+1, embedded at the trailing end.
fn reduced_start(k: usize, eta: f64) -> Result<Vec<f64>> {
    let (seed_eta, seed) = match k {
        3 => (K3_SEED_ETA, K3_SEED.to_vec()),
        _ => unreachable!("k=1 and k=2 have closed forms"),
    };
    let lags = |e: f64| lag_rhs(k, 0.0, e)[..=k].to_vec();
    let mut g = newton(&lags(seed_eta), seed).map_err(|_| Error::SolverFailure {
        mu: 0.0,
        iterations: NEWTON_MAX_ITER,
        residual: f64::NAN,
    })?;
    let steps = ((eta - seed_eta).abs() / 0.01).ceil() as usize;
    for i in 1..=steps {
        let e = seed_eta + (eta - seed_eta) * i as f64 / steps as f64;
        g = newton(&lags(e), g).map_err(|(iterations, residual)| Error::SolverFailure {
            mu: 0.0,
            iterations,
            residual,
        })?;
    }
    let mut full = vec![0.0; k];
    full.extend(g);
    Ok(full)
}

fn continue_branch(k: usize, mu: f64, eta: f64) -> Result<Vec<f64>> {
    check_parameters(k, mu, eta)?;
    let mut gamma = reduced_start(k, eta)?;
    let mut current = 0.0;
    let mut prev_jump: f64 = 0.0;
    let mut step = CONTINUATION_STEP;
    while current < mu {
        let next = (current + step).min(mu);
        let dmu = next - current;
        // The μ = 0 point can have a singular Jacobian; nudge the first guess.
        let guess = if current == 0.0 {
            gamma.iter().map(|g| g + 1e-6).collect()
        } else {
            gamma.clone()
        };
        let attempt = newton(&lag_rhs(k, next, eta), guess);
        let accepted = match attempt {
            Ok(candidate) => {
                let jump = candidate
                    .iter()
                    .zip(&gamma)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if jump <= 10.0 * prev_jump.max(dmu) {
                    prev_jump = jump;
                    Some(candidate)
                } else {
                    None
                }
            }
            Err(_) => None,
        };
        match accepted {
            Some(candidate) => {
                gamma = candidate;
                current = next;
                step = (2.0 * step).min(CONTINUATION_STEP);
            }
            None => {
                step *= 0.5;
                if step < 1e-9 {
                    let residual = gamma_system_residual(k, next, eta, &gamma)?;
                    return Err(Error::SolverFailure {
                        mu: next,
                        iterations: NEWTON_MAX_ITER,
                        residual,
                    });
                }
            }
        }
    }
    let residual = gamma_system_residual(k, mu, eta, &gamma)?;
    if residual > GAMMA_TOLERANCE {
        return Err(Error::SolverFailure {
            mu,
            iterations: NEWTON_MAX_ITER,
            residual,
        });
    }
    Ok(gamma)
}

/// Residual of the Newton system: lag equations 1..=s plus `Σγ = 0` in
/// place of lag 0 (the sum of all lag equations is `(Σγ)²`, which makes the
/// raw Jacobian singular at every solution).
fn newton_residual(rhs: &[f64], g: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = (0..rhs.len()).map(|d| autocorrelation(g, d) - rhs[d]).collect();
    r[0] = g.iter().sum();
    r
}

fn newton_jacobian(g: &[f64]) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut j = vec![vec![0.0; n]; n];
    j[0] = vec![1.0; n];
    for d in 1..n {
        for (c, entry) in j[d].iter_mut().enumerate() {
            let up = if c + d < n { g[c + d] } else { 0.0 };
            let down = if c >= d { g[c - d] } else { 0.0 };
            *entry = 2.0 * (up + down);
        }
    }
    j
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the γ system; `Err((iterations, residual))` on failure.
fn newton(rhs: &[f64], mut g: Vec<f64>) -> std::result::Result<Vec<f64>, (usize, f64)> {
    debug_assert_eq!(rhs.len(), g.len());
    let raw = |g: &[f64]| -> f64 {
        (0..rhs.len())
            .map(|d| (autocorrelation(g, d) - rhs[d]).abs())
            .fold(0.0, f64::max)
    };
    let mut r = newton_residual(rhs, &g);
    let mut norm = max_abs(&r);
    for it in 0..NEWTON_MAX_ITER {
        if norm <= 1e-15 {
            break;
        }
        let dx = match solve_dense(newton_jacobian(&g), r.iter().map(|v| -v).collect()) {
            Some(dx) => dx,
            None => return Err((it, raw(&g))),
        };
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = g.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            let tr = newton_residual(rhs, &trial);
            let tn = max_abs(&tr);
            if tn < norm {
                g = trial;
                r = tr;
                norm = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let residual = raw(&g);
    if residual <= 1e-12 && g.iter().all(|v| v.is_finite()) {
        Ok(g)
    } else {
        Err((NEWTON_MAX_ITER, residual))
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(p, c);
        b.swap(p, c);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

// ---------------------------------------------------------------------------
// G matrix and summation identity
// ---------------------------------------------------------------------------

/// `G = base + μ·Mμ + η·Mη + ημ·Mημ − L Lᵀ` with `L` the lower-triangular
/// Toeplitz matrix of `γ_0..γ_{2k−1}`.
pub fn assemble_g(k: usize, mu: f64, eta: f64, gamma: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_order(k)?;
    check_gamma_len(k, gamma)?;
    let t = &tables(k).g;
    let n = 2 * k;
    let l = |i: usize, j: usize| if i >= j { gamma[i - j] } else { 0.0 };
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let affine = rat(&t.base[i][j])
                        + mu * rat(&t.mu[i][j])
                        + eta * rat(&t.eta[i][j])
                        + eta * mu * rat(&t.eta_mu[i][j]);
                    let llt: f64 = (0..n).map(|m| l(i, m) * l(j, m)).sum();
                    affine - llt
                })
                .collect()
        })
        .collect())
}

/// A verified instance of the summation identity.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub k: usize,
    pub delta: usize,
    pub mu: f64,
    pub eta: f64,
    pub gamma: Vec<f64>,
    pub g_matrix: Vec<Vec<f64>>,
    pub gamma_residual: f64,
    /// Largest `|LHS − RHS| / max|y|²` over a seeded random battery.
    pub identity_residual: f64,
    /// Eigenvalues of G in ascending order.
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
}

impl StabilityCertificate {
    /// Solves for γ, assembles G and checks the identity on
    /// 100 standard-normal sequences of length 10.
    pub fn build(k: usize, mu: f64, eta: f64) -> Result<Self> {
        let gamma = solve_gamma(k, mu, eta)?;
        Self::from_gamma(k, mu, eta, gamma)
    }

    /// Certificate for externally supplied multipliers.
    pub fn from_gamma(k: usize, mu: f64, eta: f64, gamma: Vec<f64>) -> Result<Self> {
        let g_matrix = assemble_g(k, mu, eta, &gamma)?;
        let gamma_residual = gamma_system_residual(k, mu, eta, &gamma)?;
        let eigenvalues = DenseSymmetric::from_rows(&g_matrix)?.eigen().0;
        let mut cert = Self {
            k,
            delta: k,
            mu,
            eta,
            gamma,
            g_matrix,
            gamma_residual,
            identity_residual: f64::NAN,
            min_eig: eigenvalues[0],
            max_eig: eigenvalues[eigenvalues.len() - 1],
            eigenvalues,
        };
        cert.identity_residual = identity_battery(&cert, IDENTITY_SEQUENCES, IDENTITY_LENGTH, IDENTITY_SEED)?;
        Ok(cert)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eig > 0.0
    }
}

/// Max over admissible windows of `|LHS − RHS|` for a scalar sequence given
/// newest-first (`sequence[0] = y^n`). Requires at least `2k+1` values.
pub fn verify_summation_identity(cert: &StabilityCertificate, sequence: &[f64]) -> Result<f64> {
    let k = cert.k;
    let s = 2 * k;
    if sequence.len() < s + 1 {
        return Err(Error::InvalidArgument(format!(
            "sequence for k={k} needs at least {} values, got {}",
            s + 1,
            sequence.len()
        )));
    }
    check_gamma_len(k, &cert.gamma)?;
    let bdf = BdfScheme::new(k)?;
    let delay = DelayStencil::new(cert.delta)?;
    let g = &cert.g_matrix;
    let g_norm = |w: &[f64]| -> f64 {
        (0..s)
            .map(|i| (0..s).map(|j| w[i] * g[i][j] * w[j]).sum::<f64>())
            .sum()
    };
    let scalar = |v: f64| [v];
    let mut worst: f64 = 0.0;
    for o in 0..=sequence.len() - (s + 1) {
        let w = &sequence[o..o + s + 1];
        // τ∂y at y^{n−m}, m = 0..δ, with τ = 1.
        let diffs: Vec<[f64; 1]> = (0..=cert.delta)
            .map(|m| {
                let vals: Vec<[f64; 1]> = w[m..m + k + 1].iter().copied().map(scalar).collect();
                bdf.apply(&vals, 1.0).map(|v| [v[0]])
            })
            .collect::<Result<_>>()?;
        let delayed = delay.apply(&diffs[1..])?[0];
        let lhs = (diffs[0][0] + cert.mu * delayed) * (w[0] - cert.eta * w[1]);
        let square: f64 = cert.gamma.iter().zip(w).map(|(a, b)| a * b).sum();
        let rhs = g_norm(&w[..s]) - g_norm(&w[1..]) + square * square;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Largest relative identity residual over `count` standard-normal sequences.
pub fn identity_battery(cert: &StabilityCertificate, count: usize, length: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let seq: Vec<f64> = (0..length).map(|_| StandardNormal.sample(&mut rng)).collect();
        let scale = seq.iter().fold(0.0f64, |m, v| m.max(v * v));
        let r = verify_summation_identity(cert, &seq)?;
        worst = worst.max(r / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Eigenvalues of the k = 1 G matrix at η = 0 from their closed form.
pub fn eigenvalues_k1_closed_form(mu: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidArgument(format!("mu must lie in [0, 1], got {mu}")));
    }
    let a = (1.0 - mu).sqrt() * (3.0 * mu + 1.0).sqrt();
    let b = ((3.0 + mu) * (1.0 - mu) + 2.0 * (1.0 - mu) * a).sqrt();
    Ok((0.25 * a - 0.25 * b + 0.5, 0.25 * a + 0.25 * b + 0.5))
}

// ---------------------------------------------------------------------------
// Spectrum scans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan {
    pub k: usize,
    pub eta: f64,
    pub mu_grid: Vec<f64>,
    /// Sorted eigenvalues of G per grid point.
    pub eigenvalues: Vec<Vec<f64>>,
    /// γ residual per grid point.
    pub residuals: Vec<f64>,
    pub gammas: Vec<Vec<f64>>,
}

/// `points` equispaced values on `[0, threshold(k) − margin]`.
pub fn mu_grid(k: usize, points: usize, margin: f64) -> Result<Vec<f64>> {
    let top = critical_threshold_f64(k)? - margin;
    if points < 2 || !(top > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points below the threshold (points={points}, margin={margin})"
        )));
    }
    Ok((0..points).map(|i| top * i as f64 / (points - 1) as f64).collect())
}

fn check_grid(k: usize, grid: &[f64]) -> Result<()> {
    let threshold = critical_threshold_f64(k)?;
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("mu grid must be strictly increasing".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&m| !(0.0..=threshold).contains(&m)) {
        return Err(Error::InvalidArgument(format!(
            "mu={bad} outside [0, {threshold}] for k={k}"
        )));
    }
    Ok(())
}

/// Certificates at every grid point, evaluated in parallel; failures are kept
/// per point and tagged with their μ.
pub fn scan_points(k: usize, eta: f64, grid: &[f64]) -> Result<Vec<Result<StabilityCertificate>>> {
    check_order(k)?;
    check_grid(k, grid)?;
    Ok(grid
        .par_iter()
        .map(|&mu| {
            StabilityCertificate::build(k, mu, eta).map_err(|e| Error::AtGridPoint {
                mu,
                source: Box::new(e),
            })
        })
        .collect())
}

/// Eigenvalues of G(μ) across `grid`; fails on the first failing point.
pub fn scan_spectrum(k: usize, eta: f64, grid: &[f64]) -> Result<SpectrumScan> {
    let certs = scan_points(k, eta, grid)?.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SpectrumScan {
        k,
        eta,
        mu_grid: grid.to_vec(),
        eigenvalues: certs.iter().map(|c| c.eigenvalues.clone()).collect(),
        residuals: certs.iter().map(|c| c.gamma_residual).collect(),
        gammas: certs.into_iter().map(|c| c.gamma).collect(),
    })
}

/// Header `mu,lambda_1..lambda_{2k},residual,gamma_0..gamma_{2k}`; failed
/// points produce `NA` cells.
pub fn eigs_table(k: usize, grid: &[f64], points: &[Result<StabilityCertificate>]) -> Table {
    let mut header = vec!["mu".to_string()];
    header.extend((1..=2 * k).map(|i| format!("lambda_{i}")));
    header.push("residual".into());
    header.extend((0..=2 * k).map(|i| format!("gamma_{i}")));
    let mut table = Table::new(header);
    for (&mu, point) in grid.iter().zip(points) {
        let mut row = vec![fmt_f64(mu)];
        match point {
            Ok(c) => {
                row.extend(c.eigenvalues.iter().map(|&v| fmt_f64(v)));
                row.push(fmt_f64(c.gamma_residual));
                row.extend(c.gamma.iter().map(|&v| fmt_f64(v)));
            }
            Err(_) => row.extend(std::iter::repeat_n("NA".to_string(), 4 * k + 2)),
        }
        table.push(row);
    }
    table
}

/// Header `mu,residual,gamma_0..gamma_{2k}`.
pub fn gammas_table(k: usize, grid: &[f64], points: &[Result<StabilityCertificate>]) -> Table {
    let mut header = vec!["mu".to_string(), "residual".to_string()];
    header.extend((0..=2 * k).map(|i| format!("gamma_{i}")));
    let mut table = Table::new(header);
    for (&mu, point) in grid.iter().zip(points) {
        let mut row = vec![fmt_f64(mu)];
        match point {
            Ok(c) => {
                row.push(fmt_f64(c.gamma_residual));
                row.extend(c.gamma.iter().map(|&v| fmt_f64(v)));
            }
            Err(_) => row.extend(std::iter::repeat_n("NA".to_string(), 2 * k + 2)),
        }
        table.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Coefficients `a` (BDF + μ·delayed BDF) and `b` (1, −η) of the scalar
    /// left-hand side, newest-first, length 2k+1.
    fn lhs_vectors(k: usize, mu: f64, eta: f64) -> (Vec<f64>, Vec<f64>) {
        let xi = BdfScheme::new(k).unwrap().coefficients_f64();
        let c = DelayStencil::new(k).unwrap().coefficients_f64();
        let mut a = vec![0.0; 2 * k + 1];
        for (l, x) in xi.iter().enumerate() {
            a[l] += x;
            for (m, cm) in c.iter().enumerate() {
                a[l + m + 1] += mu * cm * x;
            }
        }
        let mut b = vec![0.0; 2 * k + 1];
        b[0] = 1.0;
        b[1] = -eta;
        (a, b)
    }

    /// Independent derivation of G's affine part and the γ right-hand sides
    /// from the symmetric form `Q = (abᵀ + baᵀ)/2` of the left-hand side.
    fn derived(k: usize, mu: f64, eta: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let (a, b) = lhs_vectors(k, mu, eta);
        let n = 2 * k + 1;
        let q: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (a[i] * b[j] + b[i] * a[j])).collect())
            .collect();
        let base = (0..n - 1)
            .map(|i| {
                (0..n - 1)
                    .map(|j| (0..=i.min(j)).map(|m| q[i - m][j - m]).sum())
                    .collect()
            })
            .collect();
        let lags = (0..n)
            .map(|d| {
                let s: f64 = (0..n - d).map(|i| q[i][i + d]).sum();
                if d == 0 {
                    s
                } else {
                    2.0 * s
                }
            })
            .collect();
        (base, lags)
    }

    #[test]
    fn thresholds() {
        assert_eq!(critical_threshold(1).unwrap(), Rational::new(1, 1));
        assert_eq!(critical_threshold(2).unwrap(), Rational::new(1, 3));
        assert_eq!(critical_threshold(3).unwrap(), Rational::new(1, 7));
        assert!(matches!(critical_threshold(4), Err(Error::UnsupportedOrder { .. })));
    }

    #[test]
    fn transcribed_tables_match_derivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..=3 {
            for _ in 0..5 {
                let mu: f64 = rng.random_range(0.0..0.2);
                let eta: f64 = rng.random_range(0.0..0.9);
                let (base, lags) = derived(k, mu, eta);
                let zero = vec![0.0; 2 * k + 1];
                let g = assemble_g(k, mu, eta, &zero).unwrap();
                for i in 0..2 * k {
                    for j in 0..2 * k {
                        assert!(close(g[i][j], base[i][j], 1e-13), "k={k} G[{i}][{j}]");
                    }
                }
                for (d, (x, y)) in lag_rhs(k, mu, eta).iter().zip(&lags).enumerate() {
                    assert!(close(*x, *y, 1e-13), "k={k} lag {d}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn k1_examples() {
        let g = gamma_k1(0.0, 0.0).unwrap();
        assert!(close(g[0], 0.0, 1e-15) && close(g[1], S2, 1e-15) && close(g[2], -S2, 1e-15));
        let g = gamma_k1(1.0, 0.0).unwrap();
        assert!(close(g[0], S2, 1e-15) && close(g[1], 0.0, 1e-15) && close(g[2], -S2, 1e-15));
        assert!(matches!(gamma_k1(1.01, 0.0), Err(Error::NoRealSolution { .. })));
        for mu in [0.0, 0.3, 0.77, 1.0] {
            for eta in [0.0, 0.4] {
                let g = gamma_k1(mu, eta).unwrap();
                assert!(gamma_system_residual(1, mu, eta, &g).unwrap() <= 1e-14);
            }
        }
    }

    #[test]
    fn k2_examples() {
        let (g, eta) = gamma_k2(0.0).unwrap();
        assert_eq!(eta, 0.0);
        for (x, y) in g.iter().zip([0.0, 0.0, -0.5, 1.0, -0.5]) {
            assert!(close(*x, y, 1e-15));
        }
        let (g, _) = gamma_k2(1.0 / 3.0).unwrap();
        assert!(close(g[1] + g[3], 0.0, 1e-12));
        assert!(close(g[2], (8.0f64 / 3.0).sqrt() / 4.0, 1e-12));
        assert!(gamma_system_residual(2, 1.0 / 3.0, 0.0, &g).unwrap() <= 1e-12);
        assert!(matches!(gamma_k2(0.4), Err(Error::NoRealSolution { .. })));
    }

    #[test]
    fn k2_requires_eta_zero() {
        assert!(matches!(solve_gamma(2, 0.1, 0.2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn k3_examples() {
        // Leading reduced solution (γ_4 = γ_5 = γ_6 = 0) solves the μ = 0 system.
        let reduced = newton(&lag_rhs(3, 0.0, 0.12)[..4], K3_SEED.to_vec()).unwrap();
        let mut leading = reduced.clone();
        leading.extend([0.0; 3]);
        assert!(gamma_system_residual(3, 0.0, 0.12, &leading).unwrap() <= 1e-12);

        let g = solve_gamma_k3(0.1, 0.12).unwrap();
        assert!(gamma_system_residual(3, 0.1, 0.12, &g).unwrap() <= 1e-10);
        let odd = g[1] + g[3] + g[5];
        assert!(close(odd * odd, 5.0 / 3.0 * 1.12 * 0.3, 1e-9));
        assert!(matches!(solve_gamma_k3(0.15, 0.12), Err(Error::NoRealSolution { .. })));
    }

    #[test]
    fn k3_other_eta_via_continuation() {
        let g = solve_gamma_k3(0.1, 0.3).unwrap();
        assert!(gamma_system_residual(3, 0.1, 0.3, &g).unwrap() <= 1e-10);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(solve_gamma(2, -0.1, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(solve_gamma(2, 0.1, 1.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(assemble_g(2, 0.0, 0.0, &[0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn assemble_k1_example() {
        let g = assemble_g(1, 0.0, 0.0, &[0.0, S2, -S2]).unwrap();
        let expected = [[1.0, -0.5], [-0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(g[i][j], expected[i][j], 1e-15));
            }
        }
    }

    #[test]
    fn assemble_k2_positive_at_zero() {
        let cert = StabilityCertificate::build(2, 0.0, 0.0).unwrap();
        assert!(cert.min_eig > 0.0);
    }

    #[test]
    fn identity_hand_example() {
        let cert = StabilityCertificate::from_gamma(1, 0.0, 0.0, vec![0.0, S2, -S2]).unwrap();
        let r = verify_summation_identity(&cert, &[1.0, 2.0, -1.0]).unwrap();
        assert!(r < 1e-14, "{r}");
        assert!(verify_summation_identity(&cert, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn identity_constant_sequence() {
        for k in 1..=3 {
            let cert = StabilityCertificate::build(k, 0.05, default_eta(k).unwrap()).unwrap();
            let r = verify_summation_identity(&cert, &[3.0; 10]).unwrap();
            assert!(r < 1e-12, "k={k}: {r}");
        }
    }

    #[test]
    fn identity_random_battery_k2() {
        let cert = StabilityCertificate::build(2, 0.2, 0.0).unwrap();
        let r = identity_battery(&cert, 1000, 10, 42).unwrap();
        assert!(r <= 1e-12, "{r}");
    }

    #[test]
    fn closed_form_eigenvalues() {
        let (l1, l2) = eigenvalues_k1_closed_form(0.0).unwrap();
        let s5 = 5f64.sqrt();
        assert!(close(l1, (3.0 - s5) / 4.0, 1e-14) && close(l2, (3.0 + s5) / 4.0, 1e-14));
        let (l1, l2) = eigenvalues_k1_closed_form(1.0).unwrap();
        assert!(close(l1, 0.5, 1e-15) && close(l2, 0.5, 1e-15));
        assert!(eigenvalues_k1_closed_form(0.5).unwrap().0 > 0.0);
        assert!(eigenvalues_k1_closed_form(1.5).is_err());
    }

    #[test]
    fn eigen_oracle_k1() {
        let grid: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
        let scan = scan_spectrum(1, 0.0, &grid).unwrap();
        for (mu, e) in grid.iter().zip(&scan.eigenvalues) {
            let (l1, l2) = eigenvalues_k1_closed_form(*mu).unwrap();
            assert!(close(e[0], l1, 1e-10) && close(e[1], l2, 1e-10), "mu={mu}");
        }
    }

    #[test]
    fn scan_examples() {
        let scan = scan_spectrum(1, 0.0, &[0.0, 1.0]).unwrap();
        assert!(close(scan.eigenvalues[0][0], 0.190983005625, 1e-11));
        assert!(close(scan.eigenvalues[1][0], 0.5, 1e-12));
        assert!(scan_spectrum(2, 0.0, &[0.1, 0.05]).is_err());
        assert!(scan_spectrum(2, 0.0, &[0.5]).is_err());

        let grid = mu_grid(3, 30, 1e-4).unwrap();
        let scan = scan_spectrum(3, 0.12, &grid).unwrap();
        assert!(scan.eigenvalues.iter().all(|e| e[0] > 0.0));
        assert!(scan.residuals.iter().all(|&r| r <= 5e-10));
    }

    #[test]
    fn structural_identities_on_grid() {
        for k in 1..=3 {
            let eta = default_eta(k).unwrap();
            let grid = mu_grid(k, 40, 1e-3).unwrap();
            let scan = scan_spectrum(k, eta, &grid).unwrap();
            for (mu, g) in grid.iter().zip(&scan.gammas) {
                assert!(g.iter().sum::<f64>().abs() <= 1e-12);
                if k == 2 {
                    let s = g[1] + g[3];
                    assert!(close(s * s, (1.0 + eta) * (1.0 - 3.0 * mu), 1e-12));
                }
                if k == 3 {
                    let s = g[1] + g[3] + g[5];
                    assert!(close(s * s, 5.0 / 3.0 * (1.0 + eta) * (1.0 - 7.0 * mu), 1e-9));
                }
            }
        }
    }

    #[test]
    fn csv_tables_flag_failures() {
        let grid = [0.0, 0.5];
        let points = vec![
            StabilityCertificate::build(1, 0.0, 0.0),
            Err(Error::InvalidArgument("x".into())),
        ];
        let t = eigs_table(1, &grid, &points).render();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "mu,lambda_1,lambda_2,residual,gamma_0,gamma_1,gamma_2");
        assert!(lines[2].ends_with("NA,NA,NA,NA,NA,NA"));
        let t = gammas_table(1, &grid, &points).render();
        assert!(t.starts_with("mu,residual,gamma_0,gamma_1,gamma_2\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn certificates_satisfy_identity(k in 1usize..=3, frac in 0.0f64..0.99) {
            let mu = frac * critical_threshold_f64(k).unwrap();
            let cert = StabilityCertificate::build(k, mu, default_eta(k).unwrap()).unwrap();
            prop_assert!(cert.gamma_residual <= 1e-10);
            prop_assert!(cert.identity_residual <= 1e-10);
            prop_assert!(cert.min_eig > 0.0);
            let g = &cert.g_matrix;
            for i in 0..2 * k {
                for j in 0..2 * k {
                    prop_assert!((g[i][j] - g[j][i]).abs() <= 1e-14);
                }
            }
        }
    }
}
