//! Gauss-Legendre quadrature on `[-1, 1]` and product rules on the sphere.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

/// Nodes (ascending) and weights of the `n`-point Gauss-Legendre rule, exact
/// for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d.is_finite() { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Product rule for the uniform probability measure on the sphere:
/// Gauss-Legendre in `cos(polar)` times equal weights in azimuth. Integrates
/// polynomials in the coordinates of total degree below
/// `min(2 * n_polar, n_azimuth)` exactly.
pub fn sphere_rule(n_polar: usize, n_azimuth: usize) -> Result<Vec<(SpherePoint, f64)>> {
    if n_polar == 0 || n_azimuth == 0 {
        return Err(Error::invalid("sphere rule needs at least one node per axis"));
    }
    let (nodes, weights) = gauss_legendre(n_polar);
    let mut out = Vec::with_capacity(n_polar * n_azimuth);
    for (z, w) in nodes.iter().zip(&weights) {
        let polar = z.clamp(-1.0, 1.0).acos();
        for j in 0..n_azimuth {
            let phi = 2.0 * PI * j as f64 / n_azimuth as f64;
            out.push((SpherePoint::from_angles(polar, phi)?, w / (2.0 * n_azimuth as f64)));
        }
    }
    Ok(out)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_sorted() {
        for n in [1usize, 2, 5, 64, 512] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(6);
        for k in 0..=11 {
            let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn sphere_rule_integrates_low_degree_monomials() {
        let rule = sphere_rule(8, 16).unwrap();
        assert!((rule.iter().map(|r| r.1).sum::<f64>() - 1.0).abs() < 1e-14);
        let mean = |f: &dyn Fn([f64; 3]) -> f64| rule.iter().map(|(x, w)| w * f(x.unit_vector())).sum::<f64>();
        // E[x^2] = 1/3, E[x^2 y^2] = 1/15, E[z^4] = 1/5 under the uniform measure
        assert!((mean(&|v| v[0] * v[0]) - 1.0 / 3.0).abs() < 1e-14);
        assert!((mean(&|v| v[0] * v[0] * v[1] * v[1]) - 1.0 / 15.0).abs() < 1e-14);
        assert!((mean(&|v| v[2].powi(4)) - 0.2).abs() < 1e-14);
        assert!(mean(&|v| v[0] * v[1] * v[2]).abs() < 1e-15);
        assert!(sphere_rule(0, 4).is_err());
    }

    #[test]
    fn three_point_rule() {
        let (x, w) = gauss_legendre(3);
        assert!((x[2] - (0.6f64).sqrt()).abs() < 1e-15);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
        assert!((w[0] - 5.0 / 9.0).abs() < 1e-15);
    }
}
