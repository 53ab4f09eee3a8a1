//! Quadrature rules shared across the crate: Gauss–Legendre on intervals,
//! product rules on spheres and balls, and small vector helpers for points
//! in 1–3 dimensions.

use std::f64::consts::PI;

/// Dot product of two points (slices of equal length).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

/// Volume of the unit ball in dimension d.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Surface measure of the unit sphere in dimension d (so A_d = d * V_d).
pub fn unit_sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| (mid + half * xi, half * wi))
        .collect()
}

/// A quadrature rule on the unit sphere S^{d-1}. Weights sum to A_d.
///
/// d = 1 uses the two endpoints, d = 2 the trapezoid rule on the circle,
/// d = 3 a Gauss–Legendre × uniform-azimuth product rule. All three are
/// antipodally symmetric, which several operators rely on.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    /// Unit direction per node, padded to 3 components.
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn new(dim: usize, resolution: usize) -> Self {
        match dim {
            1 => SphereRule {
                dim,
                nodes: vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let m = resolution.max(4);
                let m = if m % 2 == 0 { m } else { m + 1 }; // keep antipodal symmetry
                let w = 2.0 * PI / m as f64;
                let (nodes, weights) = (0..m)
                    .map(|k| {
                        let th = 2.0 * PI * (k as f64 + 0.5) / m as f64;
                        ([th.cos(), th.sin(), 0.0], w)
                    })
                    .unzip();
                SphereRule { dim, nodes, weights }
            }
            3 => {
                // resolution ~ total node budget; split between polar GL and azimuth.
                let npolar = ((resolution as f64 / 2.0).sqrt().ceil() as usize).max(4);
                let naz = (2 * npolar).max(4);
                let (ct, wt) = gauss_legendre(npolar);
                let mut nodes = Vec::with_capacity(npolar * naz);
                let mut weights = Vec::with_capacity(npolar * naz);
                let waz = 2.0 * PI / naz as f64;
                for (c, w) in ct.iter().zip(&wt) {
                    let s = (1.0 - c * c).sqrt();
                    for k in 0..naz {
                        let ph = 2.0 * PI * (k as f64 + 0.5) / naz as f64;
                        nodes.push([s * ph.cos(), s * ph.sin(), *c]);
                        weights.push(w * waz);
                    }
                }
                SphereRule { dim, nodes, weights }
            }
            _ => panic!("unsupported dimension {dim}"),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Product quadrature over the ball B(0, radius): radial Gauss–Legendre
/// (with the r^{d-1} Jacobian folded into the weights) times a sphere rule.
/// Weights sum to V_d radius^d. Antipodally symmetric.
pub struct BallRule {
    pub dim: usize,
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl BallRule {
    pub fn new(dim: usize, radius: f64, n_radial: usize, sphere_resolution: usize) -> Self {
        let sphere = SphereRule::new(dim, sphere_resolution);
        let radial = gauss_legendre_on(0.0, radius, n_radial);
        let mut nodes = Vec::with_capacity(radial.len() * sphere.len());
        let mut weights = Vec::with_capacity(radial.len() * sphere.len());
        for &(r, wr) in &radial {
            let jac = wr * r.powi(dim as i32 - 1);
            for (om, ws) in sphere.nodes.iter().zip(&sphere.weights) {
                nodes.push([r * om[0], r * om[1], r * om[2]]);
                weights.push(jac * ws);
            }
        }
        BallRule { dim, nodes, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let rule = gauss_legendre_on(0.0, 2.0, 8);
        // int_0^2 x^7 dx = 32
        let s: f64 = rule.iter().map(|&(x, w)| w * x.powi(7)).sum();
        assert_relative_eq!(s, 32.0, max_relative = 1e-13);
    }

    #[test]
    fn sphere_rules_normalize() {
        for d in 1..=3 {
            let rule = SphereRule::new(d, 128);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, unit_sphere_area(d), max_relative = 1e-12);
            // antipodal symmetry: sum of nodes is zero
            for c in 0..3 {
                let s: f64 = rule
                    .nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(n, w)| n[c] * w)
                    .sum();
                assert!(s.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn ball_rule_volume_and_moment() {
        for d in 1..=3 {
            let rule = BallRule::new(d, 0.5, 24, 64);
            let vol: f64 = rule.weights.iter().sum();
            assert_relative_eq!(
                vol,
                unit_ball_volume(d) * 0.5f64.powi(d as i32),
                max_relative = 1e-12
            );
            // int_B |x|^2 dx = A_d eps^{d+2}/(d+2)
            let m2: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(x, w)| w * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]))
                .sum();
            let exact = unit_sphere_area(d) * 0.5f64.powi(d as i32 + 2) / (d as f64 + 2.0);
            assert_relative_eq!(m2, exact, max_relative = 1e-12);
        }
    }
}
