use super::cg::{pcg, DEFAULT_RTOL};
use super::sparse::{dot, SparseSymmetric};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PowerOutcome {
    /// Largest generalized eigenvalue estimate.
    pub mu_max: f64,
    pub iterations: usize,
    /// Rayleigh quotient `xᵀMx / xᵀCx` after each iteration.
    pub rayleigh: Vec<f64>,
}

/// Largest eigenvalue of the pencil `M φ = μ C φ` for `M` non-negative and
/// self-adjoint, by power iteration on `C⁻¹M` normalized in the C-norm.
///
/// Stops when successive Rayleigh quotients agree to `tol` relative.
pub fn generalized_power_iteration<F>(
    m_apply: F,
    c: &SparseSymmetric,
    tol: f64,
    max_iter: usize,
) -> Result<PowerOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = c.dim();
    if n == 0 {
        return Err(Error::Shape("empty pencil".into()));
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * (i as f64).sin()).collect();
    normalize(&mut x, c);
    let mut rayleigh = Vec::new();
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        let mx = m_apply(&x)?;
        if mx.len() != n {
            return Err(Error::Shape(format!(
                "operator returned length {}, expected {n}",
                mx.len()
            )));
        }
        let q = dot(&x, &mx);
        rayleigh.push(q);
        if q <= 0.0 && it == 1 && mx.iter().all(|v| *v == 0.0) {
            return Ok(PowerOutcome {
                mu_max: 0.0,
                iterations: it,
                rayleigh,
            });
        }
        if (q - prev).abs() <= tol * q.abs() {
            return Ok(PowerOutcome {
                mu_max: q,
                iterations: it,
                rayleigh,
            });
        }
        prev = q;
        let y = pcg(c, &mx, Some(&x), DEFAULT_RTOL, 10 * n + 100)?.x;
        x = y;
        if normalize(&mut x, c) == 0.0 {
            return Ok(PowerOutcome {
                mu_max: 0.0,
                iterations: it,
                rayleigh,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: if rayleigh.len() >= 2 {
            let q = rayleigh[rayleigh.len() - 1];
            (q - rayleigh[rayleigh.len() - 2]).abs() / q.abs().max(f64::MIN_POSITIVE)
        } else {
            f64::NAN
        },
    })
}

fn normalize(x: &mut [f64], c: &SparseSymmetric) -> f64 {
    let norm = c.quad_form(x).max(0.0).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{cg_solve, DenseSymmetric, SparseRect};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coupling_operator<'a>(
        a: &'a SparseSymmetric,
        d: &'a SparseRect,
    ) -> impl Fn(&[f64]) -> Result<Vec<f64>> + 'a {
        move |x| {
            let w = cg_solve(a, &d.mul_transpose_vec(x), 1e-13, 1000)?;
            Ok(d.mul_vec(&w))
        }
    }

    #[test]
    fn diagonal_case() {
        let n = 4;
        let a = SparseSymmetric::identity(n);
        let c = SparseSymmetric::identity(n);
        let d = SparseRect::diagonal(&[0.3, -0.7, 0.5, 0.1]);
        let out = generalized_power_iteration(coupling_operator(&a, &d), &c, 1e-12, 10_000).unwrap();
        assert!((out.mu_max - 0.49).abs() < 1e-9, "{}", out.mu_max);
    }

    #[test]
    fn zero_coupling() {
        let a = SparseSymmetric::identity(3);
        let d = SparseRect::zeros(3, 3);
        let out = generalized_power_iteration(coupling_operator(&a, &d), &a, 1e-10, 100).unwrap();
        assert_eq!(out.mu_max, 0.0);
    }

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let r: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n).map(|k| r[i][k] * r[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    }

    fn to_sparse(m: &[Vec<f64>]) -> SparseSymmetric {
        let n = m.len();
        let t: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, m[i][j]))
            .collect();
        SparseSymmetric::from_triplets(n, &t).unwrap()
    }

    fn cholesky(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    l[i][j] = (m[i][i] - s).sqrt();
                } else {
                    l[i][j] = (m[i][j] - s) / l[j][j];
                }
            }
        }
        l
    }

    fn lower_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        for i in 0..b.len() {
            let s: f64 = (0..i).map(|k| l[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / l[i][i];
        }
        x
    }

    #[test]
    fn random_pencil_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5;
        let a_d = random_spd(n, &mut rng);
        let c_d = random_spd(n, &mut rng);
        let d_rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = to_sparse(&a_d);
        let c = to_sparse(&c_d);
        let trip: Vec<_> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, d_rows[i][j]))
            .collect();
        let d = SparseRect::from_triplets(n, n, &trip).unwrap();

        let m_dense: Vec<Vec<f64>> = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                coupling_operator(&a, &d)(&e).unwrap()
            })
            .collect();
        // Symmetrized pencil L⁻¹ M L⁻ᵀ with C = L Lᵀ.
        let l = cholesky(&c_d);
        let cols: Vec<Vec<f64>> = (0..n).map(|j| lower_solve(&l, &m_dense[j])).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| lower_solve(&l, &(0..n).map(|j| cols[j][i]).collect::<Vec<_>>()))
            .collect();
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (rows[i][j] + rows[j][i])).collect())
            .collect();
        let exact = *DenseSymmetric::from_rows(&sym).unwrap().eigen().0.last().unwrap();

        let tol = 1e-12;
        let out = generalized_power_iteration(coupling_operator(&a, &d), &c, tol, 100_000).unwrap();
        assert!((out.mu_max - exact).abs() <= 1e-6 * exact, "{} vs {exact}", out.mu_max);
        assert!(out
            .rayleigh
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()));
    }
}
