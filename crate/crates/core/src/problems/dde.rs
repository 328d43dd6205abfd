use std::f64::consts::PI;

use crate::{Error, Result};

/// Method-of-steps solution of `ẏ = z`, `z + y = z(t−1) + ż(t−1)` on `[−1, 3]`
/// with history `y = y0 + sin(nπt)/n` on `[−1, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdeDemoResult {
    pub n: u32,
    pub y0: f64,
    /// Uniform grid on `[−1, 3]`.
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    /// `sup |y|` on `[−1,0]`, `[0,1]`, `[1,2]`, `[2,3]`.
    pub sup_norms: [f64; 4],
}

impl DdeDemoResult {
    /// Linear interpolation of the trajectory at `t ∈ [−1, 3]`.
    pub fn y_at(&self, t: f64) -> Option<f64> {
        if !(-1.0..=3.0).contains(&t) {
            return None;
        }
        let steps = self.times.len() - 1;
        let x = (t + 1.0) / 4.0 * steps as f64;
        let m = (x.floor() as usize).min(steps - 1);
        let w = x - m as f64;
        Some((1.0 - w) * self.y[m] + w * self.y[m + 1])
    }
}

/// Cubic Lagrange interpolation of grid values `v` (spacing `d`, origin 0)
/// at offset `s = m + 1/2` grid units, using the four nearest nodes.
fn interpolate_half(v: &[f64], m: usize) -> f64 {
    let last = v.len() - 1;
    let start = m.saturating_sub(1).min(last - 3);
    let x = m as f64 + 0.5 - start as f64;
    let mut acc = 0.0;
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if j != i {
                w *= (x - j as f64) / (i as f64 - j as f64);
            }
        }
        acc += w * v[start + i];
    }
    acc
}

/// Second-order finite-difference derivative on a uniform grid.
fn derivative(v: &[f64], d: f64) -> Vec<f64> {
    let n = v.len() - 1;
    let mut out = vec![0.0; n + 1];
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * d);
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * d);
    for m in 1..n {
        out[m] = (v[m + 1] - v[m - 1]) / (2.0 * d);
    }
    out
}

pub fn dde_demo(n: u32, y0: f64, inner_steps: usize) -> Result<DdeDemoResult> {
    if n < 1 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if inner_steps < 1000 {
        return Err(Error::InvalidArgument(format!(
            "inner_steps must be >= 1000, got {inner_steps}"
        )));
    }
    if !y0.is_finite() {
        return Err(Error::InvalidArgument(format!("y0 must be finite, got {y0}")));
    }
    let steps = inner_steps;
    let d = 1.0 / steps as f64;
    let w = n as f64 * PI;
    let nf = n as f64;

    let mut times = Vec::with_capacity(4 * steps + 1);
    let mut y = Vec::with_capacity(4 * steps + 1);
    for m in 0..=steps {
        let t = -1.0 + m as f64 * d;
        times.push(t);
        y.push(y0 + (w * t).sin() / nf);
    }
    let hist_z = |t: f64| PI * (w * t).cos();
    let hist_zdot = |t: f64| -nf * PI * PI * (w * t).sin();

    // Delayed forcing h = z(t−1) + ż(t−1) at the grid nodes of the current interval.
    let mut h_nodes: Vec<f64> = (0..=steps)
        .map(|m| {
            let s = -1.0 + m as f64 * d;
            hist_z(s) + hist_zdot(s)
        })
        .collect();
    let mut y_start = y0;

    for j in 0..3 {
        let t0 = j as f64;
        let h_half: Vec<f64> = (0..steps)
            .map(|m| {
                if j == 0 {
                    let s = -1.0 + (m as f64 + 0.5) * d;
                    hist_z(s) + hist_zdot(s)
                } else {
                    interpolate_half(&h_nodes, m)
                }
            })
            .collect();
        let mut ys = Vec::with_capacity(steps + 1);
        ys.push(y_start);
        let mut yc = y_start;
        for m in 0..steps {
            let (h0, hm, h1) = (h_nodes[m], h_half[m], h_nodes[m + 1]);
            let k1 = -yc + h0;
            let k2 = -(yc + 0.5 * d * k1) + hm;
            let k3 = -(yc + 0.5 * d * k2) + hm;
            let k4 = -(yc + d * k3) + h1;
            yc += d / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            ys.push(yc);
        }
        for (m, v) in ys.iter().enumerate().skip(1) {
            times.push(t0 + m as f64 * d);
            y.push(*v);
        }
        y_start = yc;
        let z: Vec<f64> = ys.iter().zip(&h_nodes).map(|(yv, h)| -yv + h).collect();
        let zdot = derivative(&z, d);
        h_nodes = z.iter().zip(&zdot).map(|(a, b)| a + b).collect();
    }

    let mut sup_norms = [0.0; 4];
    for (j, s) in sup_norms.iter_mut().enumerate() {
        *s = y[j * steps..=(j + 1) * steps]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
    }
    Ok(DdeDemoResult {
        n,
        y0,
        times,
        y,
        sup_norms,
    })
}

/// Least-squares slope of `log s` against `log n`; `None` with fewer than two
/// distinct `n` or non-positive data.
pub fn growth_exponent(ns: &[f64], values: &[f64]) -> Option<f64> {
    if ns.len() != values.len() || ns.len() < 2 {
        return None;
    }
    if ns.iter().chain(values).any(|v| !(*v > 0.0)) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_is_prescribed() {
        for n in [1, 2, 5] {
            let r = dde_demo(n, 0.0, 1000).unwrap();
            assert!((r.sup_norms[0] - 1.0 / n as f64).abs() < 1e-5);
            for t in [-1.0, -0.75, -0.5, -0.3] {
                let exact = (n as f64 * PI * t).sin() / n as f64;
                assert!((r.y_at(t).unwrap() - exact).abs() < 1e-5);
            }
        }
        let r = dde_demo(2, 0.0, 1000).unwrap();
        assert!(r.y_at(-0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn first_interval_matches_variation_of_constants() {
        // On [0,1]: y' = −y + h with h(t) = π cos(nπ(t−1)) − nπ² sin(nπ(t−1)).
        let n = 3u32;
        let r = dde_demo(n, 0.5, 2000).unwrap();
        let w = n as f64 * PI;
        // Reference by fine RK4 of the same scalar ODE.
        let h = |t: f64| PI * (w * (t - 1.0)).cos() - n as f64 * PI * PI * (w * (t - 1.0)).sin();
        let mut yv = 0.5;
        let steps = 200_000;
        let dt = 1.0 / steps as f64;
        for m in 0..steps {
            let t = m as f64 * dt;
            let k1 = -yv + h(t);
            let k2 = -(yv + 0.5 * dt * k1) + h(t + 0.5 * dt);
            let k3 = -(yv + 0.5 * dt * k2) + h(t + 0.5 * dt);
            let k4 = -(yv + dt * k3) + h(t + dt);
            yv += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!((r.y_at(1.0).unwrap() - yv).abs() < 1e-8);
    }

    #[test]
    fn trajectory_is_continuous() {
        let steps = 1000;
        let r = dde_demo(4, 0.2, steps).unwrap();
        assert_eq!(r.times.len(), 4 * steps + 1);
        assert!((r.times[4 * steps] - 3.0).abs() < 1e-12);
        for j in 1..4 {
            let m = j * steps;
            let left = 2.0 * r.y[m - 1] - r.y[m - 2];
            let right = 2.0 * r.y[m + 1] - r.y[m + 2];
            let scale = r.sup_norms[j.min(3)].max(1.0);
            assert!((left - r.y[m]).abs() < 1e-3 * scale && (right - r.y[m]).abs() < 1e-3 * scale);
        }
    }

    #[test]
    fn growth_is_superlinear() {
        let ns = [4u32, 8, 16, 32];
        let s3: Vec<f64> = ns.iter().map(|&n| dde_demo(n, 0.0, 4000).unwrap().sup_norms[3]).collect();
        assert!(s3.windows(2).all(|w| w[1] >= w[0]));
        let nf: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let e = growth_exponent(&nf, &s3).unwrap();
        assert!(e >= 1.5, "exponent {e}, s3 {s3:?}");
    }

    #[test]
    fn exponent_edge_cases() {
        assert_eq!(growth_exponent(&[4.0], &[1.0]), None);
        assert!((growth_exponent(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(dde_demo(0, 0.0, 1000).is_err());
        assert!(dde_demo(1, 0.0, 10).is_err());
    }
}
