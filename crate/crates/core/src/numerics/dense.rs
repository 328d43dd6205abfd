use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Small dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymmetric {
    /// Fails on ragged rows or if `|a_ij − a_ji| > 1e-12·max(1, max|a|)`.
    /// The stored matrix is the exact symmetrization `(A + Aᵀ)/2`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Shape(format!(
                "expected a square {n}x{n} matrix, found a row of length {}",
                r.len()
            )));
        }
        let scale = rows
            .iter()
            .flatten()
            .fold(1.0f64, |m, v| m.max(v.abs()));
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite entry at ({i}, {j})")));
                }
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                data[i * n + j] = 0.5 * (a + b);
            }
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(|c| c.to_vec()).collect()
    }

    /// Eigenvalues (ascending) and matching orthonormal eigenvectors (columns
    /// of the returned row-major matrix), by cyclic Jacobi rotations.
    pub fn eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut a = self.data.clone();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let stop = 1e-14 * fro.max(1.0);
        for _ in 0..MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum::<f64>()
                .sqrt();
            if off < stop {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
        let values = order.iter().map(|&i| a[i * n + i]).collect();
        let vectors = (0..n)
            .map(|r| order.iter().map(|&c| v[r * n + c]).collect())
            .collect();
        (values, vectors)
    }
}

/// Sorted eigenvalues of a small dense symmetric matrix.
pub fn jacobi_eigs(m: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(DenseSymmetric::from_rows(m)?.eigen().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn diagonal_inputs() {
        assert_eq!(jacobi_eigs(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap(), vec![1.0, 2.0]);
        let e = jacobi_eigs(&[
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ])
        .unwrap();
        assert_eq!(e, vec![-1.0, 0.0, 5.0]);
    }

    #[test]
    fn two_by_two_oracle() {
        let e = jacobi_eigs(&[vec![1.0, -0.5], vec![-0.5, 0.5]]).unwrap();
        let s5 = 5f64.sqrt();
        assert!((e[0] - (3.0 - s5) / 4.0).abs() < 1e-12);
        assert!((e[1] - (3.0 + s5) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_rejected() {
        assert!(jacobi_eigs(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
        assert!(matches!(jacobi_eigs(&[vec![1.0, 2.0]]), Err(Error::Shape(_))));
    }

    #[test]
    fn eigenvectors_reconstruct() {
        let rows = vec![
            vec![4.0, 1.0, -2.0],
            vec![1.0, 3.0, 0.5],
            vec![-2.0, 0.5, 1.0],
        ];
        let (vals, vecs) = DenseSymmetric::from_rows(&rows).unwrap().eigen();
        for i in 0..3 {
            for j in 0..3 {
                let r: f64 = (0..3).map(|k| vecs[i][k] * vals[k] * vecs[j][k]).sum();
                assert!((r - rows[i][j]).abs() < 1e-12);
            }
        }
    }

    fn det(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        let mut a: Vec<Vec<f64>> = m.to_vec();
        let mut d = 1.0;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            if a[p][c] == 0.0 {
                return 0.0;
            }
            if p != c {
                a.swap(p, c);
                d = -d;
            }
            d *= a[c][c];
            for r in c + 1..n {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
        d
    }

    proptest! {
        #[test]
        fn trace_and_determinant_preserved(n in 1usize..7, entries in proptest::collection::vec(-2.0f64..2.0, 36)) {
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    rows[i][j] = entries[i * 6 + j];
                    rows[j][i] = entries[i * 6 + j];
                }
            }
            let e = jacobi_eigs(&rows).unwrap();
            prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
            let tr: f64 = (0..n).map(|i| rows[i][i]).sum();
            prop_assert!((e.iter().sum::<f64>() - tr).abs() < 1e-10);
            prop_assert!((e.iter().product::<f64>() - det(&rows)).abs() < 1e-10);
        }
    }
}
