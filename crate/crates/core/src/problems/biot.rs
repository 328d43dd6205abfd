use std::f64::consts::PI;
use std::sync::Arc;

use serde::Deserialize;

use super::{EllipticParabolicSystem, ExactSolution, SOLVE_RTOL};
use crate::numerics::{cg_solve, SparseRect, SparseSymmetric};
use crate::{Error, Result};

pub const BIOT_AMPLITUDE: f64 = 10.0;
pub const BIOT_RATE: f64 = 5.0 / 21.0;

/// Material parameters of the quasi-static Biot model.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct BiotParameters {
    pub lambda: f64,
    pub mu: f64,
    pub kappa_over_nu: f64,
    #[serde(rename = "M")]
    pub m_biot: f64,
    pub alpha: f64,
}

impl BiotParameters {
    /// λ = 0.5, μ = 0.125, κ/ν = 0.05, M = 0.27, α = 0.5.
    pub fn reference() -> Self {
        Self {
            lambda: 0.5,
            mu: 0.125,
            kappa_over_nu: 0.05,
            m_biot: 0.27,
            alpha: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("kappa_over_nu", self.kappa_over_nu),
            ("M", self.m_biot),
            ("alpha", self.alpha),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Upper bound `α² M / (2μ + λ)` for the continuum coupling strength.
    pub fn coupling_bound(&self) -> f64 {
        self.alpha * self.alpha * self.m_biot / (2.0 * self.mu + self.lambda)
    }
}

/// Uniform mesh of `(0,1)²` with `n x n` cells, each split along the
/// `(0,0)-(1,1)` diagonal, nodes numbered row-major.
struct Mesh {
    n: usize,
}

struct Triangle {
    nodes: [usize; 3],
    coords: [[f64; 2]; 3],
    area: f64,
    /// Gradients of the three barycentric basis functions.
    grads: [[f64; 2]; 3],
}

impl Mesh {
    fn node(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    fn coords(&self, node: usize) -> [f64; 2] {
        let h = 1.0 / self.n as f64;
        [(node % (self.n + 1)) as f64 * h, (node / (self.n + 1)) as f64 * h]
    }

    fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = (node % (self.n + 1), node / (self.n + 1));
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    fn triangles(&self) -> Vec<Triangle> {
        let mut out = Vec::with_capacity(2 * self.n * self.n);
        for j in 0..self.n {
            for i in 0..self.n {
                let v00 = self.node(i, j);
                let v10 = self.node(i + 1, j);
                let v11 = self.node(i + 1, j + 1);
                let v01 = self.node(i, j + 1);
                out.push(self.triangle([v00, v10, v11]));
                out.push(self.triangle([v00, v11, v01]));
            }
        }
        out
    }

    fn triangle(&self, nodes: [usize; 3]) -> Triangle {
        let coords = nodes.map(|v| self.coords(v));
        let [x0, x1, x2] = coords;
        let det = (x1[0] - x0[0]) * (x2[1] - x0[1]) - (x2[0] - x0[0]) * (x1[1] - x0[1]);
        let grads = [
            [(x1[1] - x2[1]) / det, (x2[0] - x1[0]) / det],
            [(x2[1] - x0[1]) / det, (x0[0] - x2[0]) / det],
            [(x0[1] - x1[1]) / det, (x1[0] - x0[0]) / det],
        ];
        Triangle {
            nodes,
            coords,
            area: 0.5 * det.abs(),
            grads,
        }
    }
}

impl Triangle {
    /// Mid-edge quadrature points with the basis values there; weights are area/3.
    fn quadrature(&self) -> [([f64; 2], [f64; 3]); 3] {
        let mid = |a: usize, b: usize| {
            [
                0.5 * (self.coords[a][0] + self.coords[b][0]),
                0.5 * (self.coords[a][1] + self.coords[b][1]),
            ]
        };
        [
            (mid(0, 1), [0.5, 0.5, 0.0]),
            (mid(1, 2), [0.0, 0.5, 0.5]),
            (mid(2, 0), [0.5, 0.0, 0.5]),
        ]
    }
}

fn displacement_shape(x: f64, y: f64) -> [f64; 2] {
    [(PI * x).cos() * (PI * y).sin(), (PI * x).sin() * (PI * y).cos()]
}

fn pressure_shape(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// Row/column index of a node among interior (`Ok`) or boundary (`Err`) nodes.
fn split_index(mesh: &Mesh) -> Vec<std::result::Result<usize, usize>> {
    let (mut ni, mut nb) = (0, 0);
    (0..mesh.node_count())
        .map(|v| {
            if mesh.is_boundary(v) {
                nb += 1;
                Err(nb - 1)
            } else {
                ni += 1;
                Ok(ni - 1)
            }
        })
        .collect()
}

/// P1/P1 discretization of the Biot system on `(0,1)²` with mesh size
/// `1/n_mesh` and the manufactured solution
/// `u = −A e^{−rt} [cos πx sin πy, sin πx cos πy]`, `p = A e^{−rt} sin πx sin πy`.
///
/// Unknowns are interior nodal values (displacement components interleaved).
/// The displacement is nonzero on the boundary, so its boundary values are
/// moved into the loads.
pub fn build_biot_problem(
    n_mesh: usize,
    params: &BiotParameters,
    amplitude: f64,
    rate: f64,
) -> Result<EllipticParabolicSystem> {
    params.validate()?;
    if n_mesh < 4 || !n_mesh.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "mesh parameter must be a power of two >= 4, got {n_mesh}"
        )));
    }
    let mesh = Mesh { n: n_mesh };
    let index = split_index(&mesh);
    let n_int = (n_mesh - 1) * (n_mesh - 1);
    let n_bnd = mesh.node_count() - n_int;
    let (nu, np) = (2 * n_int, n_int);
    let BiotParameters {
        lambda,
        mu,
        kappa_over_nu,
        m_biot,
        alpha,
    } = *params;

    let mut a_ii = Vec::new();
    let mut a_ib = Vec::new();
    let mut b_t = Vec::new();
    let mut c_t = Vec::new();
    let mut d_ii = Vec::new();
    let mut d_ib = Vec::new();
    let mut f_hat = vec![0.0; nu];
    let mut g_hat = vec![0.0; np];

    // Spatial parts of the strong-form forcing (time factor e^{−rt} removed).
    let f_coef = amplitude * (-2.0 * PI * PI * (2.0 * mu + lambda) + alpha * PI);
    let g_coef = amplitude * (-2.0 * PI * alpha * rate - rate / m_biot + 2.0 * PI * PI * kappa_over_nu);

    for tri in mesh.triangles() {
        let area = tri.area;
        for la in 0..3 {
            let ga = tri.grads[la];
            let row = index[tri.nodes[la]];
            for lb in 0..3 {
                let gb = tri.grads[lb];
                let col = index[tri.nodes[lb]];
                let dot = ga[0] * gb[0] + ga[1] * gb[1];
                if let Ok(ri) = row {
                    // Displacement block: entry for test (la, r), trial (lb, s).
                    for r in 0..2 {
                        for s in 0..2 {
                            let delta = if r == s { dot } else { 0.0 };
                            let v = area * (mu * delta + mu * gb[r] * ga[s] + lambda * ga[r] * gb[s]);
                            match col {
                                Ok(ci) => a_ii.push((2 * ri + r, 2 * ci + s, v)),
                                Err(cb) => a_ib.push((2 * ri + r, 2 * cb + s, v)),
                            }
                        }
                    }
                    if let Ok(ci) = col {
                        b_t.push((ri, ci, area * kappa_over_nu * dot));
                        let mass = if la == lb { area / 6.0 } else { area / 12.0 };
                        c_t.push((ri, ci, mass / m_biot));
                    }
                    // Coupling: pressure test function la, displacement trial (lb, s).
                    for s in 0..2 {
                        let v = alpha * gb[s] * area / 3.0;
                        match col {
                            Ok(ci) => d_ii.push((ri, 2 * ci + s, v)),
                            Err(cb) => d_ib.push((ri, 2 * cb + s, v)),
                        }
                    }
                }
            }
        }
        for (x, phi) in tri.quadrature() {
            let w = area / 3.0;
            let us = displacement_shape(x[0], x[1]);
            let ps = pressure_shape(x[0], x[1]);
            for l in 0..3 {
                if let Ok(ri) = index[tri.nodes[l]] {
                    f_hat[2 * ri] += w * f_coef * us[0] * phi[l];
                    f_hat[2 * ri + 1] += w * f_coef * us[1] * phi[l];
                    g_hat[ri] += w * g_coef * ps * phi[l];
                }
            }
        }
    }

    let a = SparseSymmetric::from_triplets(nu, &a_ii)?;
    let b = SparseSymmetric::from_triplets(np, &b_t)?;
    let c = SparseSymmetric::from_triplets(np, &c_t)?;
    let d = SparseRect::from_triplets(np, nu, &d_ii)?;
    let a_ib = SparseRect::from_triplets(nu, 2 * n_bnd, &a_ib)?;
    let d_ib = SparseRect::from_triplets(np, 2 * n_bnd, &d_ib)?;

    let mut u_shape_int = vec![0.0; nu];
    let mut u_shape_bnd = vec![0.0; 2 * n_bnd];
    let mut p_shape_int = vec![0.0; np];
    for (v, idx) in index.iter().enumerate() {
        let [x, y] = mesh.coords(v);
        let us = displacement_shape(x, y);
        match *idx {
            Ok(i) => {
                u_shape_int[2 * i] = us[0];
                u_shape_int[2 * i + 1] = us[1];
                p_shape_int[i] = pressure_shape(x, y);
            }
            Err(bi) => {
                u_shape_bnd[2 * bi] = us[0];
                u_shape_bnd[2 * bi + 1] = us[1];
            }
        }
    }
    // Boundary displacement u_B(t) = −A e^{−rt} U_B, u̇_B = rA e^{−rt} U_B.
    let lift_f = a_ib.mul_vec(&u_shape_bnd);
    let lift_g = d_ib.mul_vec(&u_shape_bnd);
    let f_vec: Vec<f64> = f_hat.iter().zip(&lift_f).map(|(f, l)| f + amplitude * l).collect();
    let g_vec: Vec<f64> = g_hat.iter().zip(&lift_g).map(|(g, l)| g - rate * amplitude * l).collect();

    let scaled = |v: Vec<f64>, factor: f64| -> Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync> {
        Arc::new(move |t: f64| {
            let s = factor * (-rate * t).exp();
            v.iter().map(|x| s * x).collect()
        })
    };

    let p0: Vec<f64> = p_shape_int.iter().map(|v| amplitude * v).collect();
    let mut rhs0 = f_vec.clone();
    for (r, v) in rhs0.iter_mut().zip(d.mul_transpose_vec(&p0)) {
        *r += v;
    }
    let u0 = cg_solve(&a, &rhs0, SOLVE_RTOL, 20 * nu + 100)?;

    Ok(EllipticParabolicSystem {
        label: "biot".into(),
        a,
        b,
        c,
        d,
        f: scaled(f_vec.clone(), 1.0),
        g: scaled(g_vec, 1.0),
        f_dot: Some(scaled(f_vec, -rate)),
        u0,
        p0,
        exact: Some(ExactSolution {
            u: scaled(u_shape_int, -amplitude),
            p: scaled(p_shape_int, amplitude),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(n: usize) -> EllipticParabolicSystem {
        build_biot_problem(n, &BiotParameters::reference(), BIOT_AMPLITUDE, BIOT_RATE).unwrap()
    }

    #[test]
    fn parameters_from_json_keys() {
        let p: BiotParameters =
            serde_json::from_str(r#"{"lambda":0.5,"mu":0.125,"kappa_over_nu":0.05,"M":0.27,"alpha":0.5}"#)
                .unwrap();
        assert_eq!(p, BiotParameters::reference());
        assert!((p.coupling_bound() - 0.09).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_biot_problem(2, &BiotParameters::reference(), 10.0, BIOT_RATE).is_err());
        assert!(build_biot_problem(12, &BiotParameters::reference(), 10.0, BIOT_RATE).is_err());
        let mut bad = BiotParameters::reference();
        bad.alpha = 0.0;
        assert!(build_biot_problem(8, &bad, 10.0, BIOT_RATE).is_err());
    }

    #[test]
    fn exact_values_at_center() {
        let p = problem(4);
        // Node (2,2) is the center; interior index (1,1) of a 3x3 interior grid.
        let center = 4;
        let ex = p.exact.clone().unwrap();
        assert!(((ex.p)(0.0)[center] - 10.0).abs() < 1e-12);
        let u = (ex.u)(0.0);
        assert!(u[2 * center].abs() < 1e-12 && u[2 * center + 1].abs() < 1e-12);
    }

    #[test]
    fn operators_symmetric_positive() {
        let p = problem(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [&p.a, &p.b, &p.c] {
            for i in 0..m.dim() {
                for (j, v) in m.row(i) {
                    assert!((v - m.get(j, i)).abs() <= 1e-13 * v.abs().max(1.0));
                }
            }
            for _ in 0..20 {
                let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                assert!(m.quad_form(&x) > 0.0);
            }
        }
        assert!(p.initial_consistency_residual() < 1e-9);
    }

    #[test]
    fn patch_test_linear_fields() {
        // u = (x, y) and constant p = 2(μ+λ)/α give σ(u) − αpI = 0, so the
        // discrete elastic residual must vanish at every interior node.
        let params = BiotParameters::reference();
        let n = 8;
        let mesh = Mesh { n };
        let index = split_index(&mesh);
        let n_int = (n - 1) * (n - 1);
        let mut u_all = vec![0.0; 2 * mesh.node_count()];
        let p_const = (2.0 * params.mu + 2.0 * params.lambda) / params.alpha;
        for v in 0..mesh.node_count() {
            let [x, y] = mesh.coords(v);
            u_all[2 * v] = x;
            u_all[2 * v + 1] = y;
        }
        let mut residual = vec![0.0; 2 * n_int];
        for tri in mesh.triangles() {
            for la in 0..3 {
                let Ok(ri) = index[tri.nodes[la]] else { continue };
                let ga = tri.grads[la];
                for lb in 0..3 {
                    let gb = tri.grads[lb];
                    let dotg = ga[0] * gb[0] + ga[1] * gb[1];
                    for r in 0..2 {
                        for s in 0..2 {
                            let delta = if r == s { dotg } else { 0.0 };
                            let v = tri.area
                                * (params.mu * delta + params.mu * gb[r] * ga[s] + params.lambda * ga[r] * gb[s]);
                            residual[2 * ri + r] += v * u_all[2 * tri.nodes[lb] + s];
                        }
                    }
                }
                // − d(v, p) with constant p: α ∂_r φ_a · area · p.
                for r in 0..2 {
                    residual[2 * ri + r] -= params.alpha * ga[r] * tri.area * p_const;
                }
            }
        }
        assert!(residual.iter().all(|r| r.abs() < 1e-10), "{residual:?}");
    }

    fn consistency_residual(n: usize) -> f64 {
        let p = problem(n);
        let ex = p.exact.clone().unwrap();
        let t = 0.3;
        let h = 1e-5;
        let u = |t| (ex.u)(t);
        let pp = |t| (ex.p)(t);
        let ud: Vec<f64> = u(t + h).iter().zip(u(t - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let pd: Vec<f64> = pp(t + h).iter().zip(pp(t - h)).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let r: Vec<f64> = p
            .d
            .mul_vec(&ud)
            .iter()
            .zip(p.c.mul_vec(&pd))
            .zip(p.b.mul_vec(&pp(t)))
            .zip((p.g)(t))
            .map(|(((a, b), c), g)| a + b + c - g)
            .collect();
        // Dual C-norm: √(rᵀ C⁻¹ r).
        let w = cg_solve(&p.c, &r, 1e-12, 10_000).unwrap();
        dot(&r, &w).sqrt()
    }

    #[test]
    fn flow_consistency_converges() {
        let r8 = consistency_residual(8);
        let r16 = consistency_residual(16);
        let r32 = consistency_residual(32);
        let o1 = (r8 / r16).log2();
        let o2 = (r16 / r32).log2();
        assert!(o1 > 1.5 && o2 > 1.5, "orders {o1} {o2} ({r8} {r16} {r32})");
    }
}
