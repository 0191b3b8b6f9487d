//! Legendre polynomials, associated Legendre functions and complex
//! spherical harmonics.
//!
//! Associated functions carry the Condon-Shortley phase `(-1)^m`. Spherical
//! harmonics are orthonormal on the sphere, so the addition theorem reads
//! `P_n(x1 . x2) = 4 pi / (2n + 1) * sum_m Y_nm(x1) conj(Y_nm(x2))`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

const DOMAIN_SLACK: f64 = 1e-12;

fn check_argument(t: f64) -> Result<f64> {
    if t.is_nan() || t.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::invalid(format!(
            "Legendre argument {t} outside [-1, 1]"
        )));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Degree-`n` Legendre polynomial via Bonnet's recurrence.
pub fn legendre_p(n: usize, t: f64) -> Result<f64> {
    Ok(legendre_p_unchecked(n, check_argument(t)?))
}

/// [`legendre_p`] without the domain check, for inner loops.
#[inline]
pub fn legendre_p_unchecked(n: usize, t: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => t,
        _ => {
            let (mut p0, mut p1) = (1.0, t);
            for k in 1..n {
                let kf = k as f64;
                let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Writes `P_0(t), ..., P_{out.len()-1}(t)` into `out`.
pub fn legendre_all(t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = t;
    }
    for k in 1..out.len().saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0) * t * out[k] - kf * out[k - 1]) / (kf + 1.0);
    }
}

/// Precomputed Bonnet coefficients for repeated high-degree evaluation.
///
/// Uses `P_{k+1} = t P_k + c_k (t P_k - P_{k-1})` with `c_k = k / (k + 1)`,
/// which avoids a division per step.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    ratio: Vec<f64>,
}

impl LegendreTable {
    pub fn new(max_degree: usize) -> Self {
        let ratio = (0..max_degree.max(1))
            .map(|k| k as f64 / (k as f64 + 1.0))
            .collect();
        LegendreTable { ratio }
    }

    pub fn max_degree(&self) -> usize {
        self.ratio.len()
    }

    /// `P_n(t)`; `n` must not exceed [`LegendreTable::max_degree`].
    #[inline]
    pub fn eval(&self, n: usize, t: f64) -> f64 {
        match n {
            0 => 1.0,
            1 => t,
            _ => {
                let (mut p0, mut p1) = (1.0, t);
                for &c in &self.ratio[1..n] {
                    let tp = t * p1;
                    let p2 = tp + c * (tp - p0);
                    p0 = p1;
                    p1 = p2;
                }
                p1
            }
        }
    }
}

/// Associated Legendre function `P_n^m(t)` with Condon-Shortley phase,
/// `0 <= m <= n`.
pub fn legendre_p_assoc(n: usize, m: usize, t: f64) -> Result<f64> {
    if m > n {
        return Err(Error::invalid(format!("order {m} exceeds degree {n}")));
    }
    let t = check_argument(t)?;
    let mut row = vec![0.0; n + 1];
    assoc_column(m, t, &mut row);
    Ok(row[n])
}

/// Fills `out[n] = P_n^m(t)` for `n = m..out.len()`; entries below `m` are 0.
pub fn assoc_column(m: usize, t: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if m >= out.len() {
        return;
    }
    let s = (1.0 - t * t).max(0.0).sqrt();
    // P_m^m = (-1)^m (2m - 1)!! s^m
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    out[m] = pmm;
    if m + 1 < out.len() {
        out[m + 1] = t * (2 * m + 1) as f64 * pmm;
    }
    for n in (m + 2)..out.len() {
        let nf = n as f64;
        let mf = m as f64;
        out[n] = ((2.0 * nf - 1.0) * t * out[n - 1] - (nf + mf - 1.0) * out[n - 2]) / (nf - mf);
    }
}

/// Degree/order pair of a spherical harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    degree: usize,
    order: i64,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return Err(Error::invalid(format!(
                "harmonic order {order} exceeds degree {degree}"
            )));
        }
        Ok(HarmonicIndex { degree, order })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> i64 {
        self.order
    }
}

/// Orthonormal associated Legendre values `Q_n^m(t)`, `n = m..out.len()`,
/// such that `Y_nm = Q_n^m(cos polar) e^{i m azimuth}`. Computed with the
/// normalised recurrence, so no factorials appear.
pub fn normalized_assoc_column(m: usize, t: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if m >= out.len() {
        return;
    }
    let s = (1.0 - t * t).max(0.0).sqrt();
    let mut qmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        qmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    out[m] = qmm;
    if m + 1 < out.len() {
        out[m + 1] = (2.0 * m as f64 + 3.0).sqrt() * t * qmm;
    }
    let mf = m as f64;
    for n in (m + 2)..out.len() {
        let nf = n as f64;
        let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
        let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
        out[n] = a * (t * out[n - 1] - b * out[n - 2]);
    }
}

/// Orthonormal complex spherical harmonic `Y_nm(x)`.
pub fn spherical_harmonic(idx: HarmonicIndex, x: &SpherePoint) -> Complex64 {
    let m = idx.order.unsigned_abs() as usize;
    let mut col = vec![0.0; idx.degree + 1];
    normalized_assoc_column(m, x.cos_polar(), &mut col);
    let y = Complex64::from_polar(col[idx.degree], m as f64 * x.azimuth());
    if idx.order < 0 {
        // Y_{n,-m} = (-1)^m conj(Y_{n,m})
        let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
        y.conj() * sign
    } else {
        y
    }
}

/// `|P_n(x1 . x2) - 4 pi/(2n+1) sum_m Y_nm(x1) conj(Y_nm(x2))|`.
pub fn addition_theorem_residual(n: usize, x1: &SpherePoint, x2: &SpherePoint) -> f64 {
    let order = n as i64;
    let sum: Complex64 = (-order..=order)
        .map(|m| {
            let idx = HarmonicIndex { degree: n, order: m };
            spherical_harmonic(idx, x1) * spherical_harmonic(idx, x2).conj()
        })
        .sum();
    let bridge = 4.0 * PI / (2 * n + 1) as f64;
    let lhs = legendre_p_unchecked(n, x1.dot(x2).clamp(-1.0, 1.0));
    (lhs - bridge * sum).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use proptest::prelude::*;

    fn closed_form(n: usize, t: f64) -> f64 {
        match n {
            0 => 1.0,
            1 => t,
            2 => 0.5 * (3.0 * t * t - 1.0),
            3 => 0.5 * (5.0 * t.powi(3) - 3.0 * t),
            4 => (35.0 * t.powi(4) - 30.0 * t * t + 3.0) / 8.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(legendre_p(0, 0.3).unwrap(), 1.0);
        assert!((legendre_p(5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((legendre_p(2, 0.5).unwrap() + 0.125).abs() < 1e-15);
        assert!(legendre_p(3, 1.0 + 1e-13).is_ok());
        assert!(legendre_p(3, 1.0 + 1e-9).is_err());
        assert!(legendre_p(3, f64::NAN).is_err());
    }

    #[test]
    fn parity_at_minus_one() {
        for n in 0..=50 {
            let expected = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((legendre_p(n, -1.0).unwrap() - expected).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn bounded_by_one() {
        let table = LegendreTable::new(200);
        for i in 0..=400 {
            let t = -1.0 + 2.0 * i as f64 / 400.0;
            for n in 0..=200 {
                assert!(table.eval(n, t).abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn table_and_all_agree_with_recurrence() {
        let table = LegendreTable::new(300);
        let mut all = vec![0.0; 301];
        for &t in &[-0.97, -0.2, 0.0, 0.41, 0.999] {
            legendre_all(t, &mut all);
            for n in [0usize, 1, 2, 17, 150, 300] {
                let r = legendre_p_unchecked(n, t);
                assert!((table.eval(n, t) - r).abs() < 1e-13);
                assert!((all[n] - r).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn assoc_examples() {
        for &t in &[-0.8, 0.0, 0.35] {
            assert!((legendre_p_assoc(1, 0, t).unwrap() - t).abs() < 1e-15);
        }
        assert!((legendre_p_assoc(1, 1, 0.0).unwrap() + 1.0).abs() < 1e-15);
        assert!((legendre_p_assoc(2, 2, 0.0).unwrap() - 3.0).abs() < 1e-15);
        assert!(legendre_p_assoc(2, 3, 0.0).is_err());
        let t: f64 = 0.3;
        let s = (1.0 - t * t).sqrt();
        assert!((legendre_p_assoc(2, 1, t).unwrap() + 3.0 * t * s).abs() < 1e-14);
        assert!((legendre_p_assoc(3, 3, t).unwrap() + 15.0 * s.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn harmonic_constant_term() {
        let x = SpherePoint::from_angles(0.4, 5.0).unwrap();
        let y = spherical_harmonic(HarmonicIndex::new(0, 0).unwrap(), &x);
        assert!((y.re - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        assert_eq!(y.im, 0.0);
    }

    #[test]
    fn harmonic_matches_closed_form() {
        // Y_21 = -sqrt(15 / 8 pi) sin cos e^{i azimuth}
        let x = SpherePoint::from_angles(0.9, 1.7).unwrap();
        let y = spherical_harmonic(HarmonicIndex::new(2, 1).unwrap(), &x);
        let amp = -(15.0 / (8.0 * PI)).sqrt() * x.polar().sin() * x.polar().cos();
        assert!((y - Complex64::from_polar(amp, x.azimuth())).norm() < 1e-14);
    }

    #[test]
    fn harmonic_unit_norm_by_quadrature() {
        let (nodes, weights) = gauss_legendre(24);
        let n_az = 48;
        let idx = HarmonicIndex::new(2, 1).unwrap();
        let mut total = 0.0;
        for (&u, &w) in nodes.iter().zip(&weights) {
            for j in 0..n_az {
                let a = 2.0 * PI * j as f64 / n_az as f64;
                let x = SpherePoint::from_angles(u.acos(), a).unwrap();
                total += w * (2.0 * PI / n_az as f64) * spherical_harmonic(idx, &x).norm_sqr();
            }
        }
        assert!((total - 1.0).abs() < 1e-8);
    }

    #[test]
    fn addition_theorem_trivial_cases() {
        let x = SpherePoint::from_angles(1.0, 2.0).unwrap();
        let y = SpherePoint::from_angles(2.5, 0.3).unwrap();
        assert!(addition_theorem_residual(0, &x, &y) < 1e-14);
        let np = SpherePoint::NORTH_POLE;
        assert!(addition_theorem_residual(1, &np, &np) < 1e-14);
    }

    fn point() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..=1.0, 0.0f64..std::f64::consts::TAU)
            .prop_map(|(z, a)| SpherePoint::from_angles(z.acos(), a).unwrap())
    }

    proptest! {
        #[test]
        fn recurrence_matches_closed_forms(t in -1.0f64..=1.0) {
            for n in 0..=4 {
                prop_assert!((legendre_p_unchecked(n, t) - closed_form(n, t)).abs() < 1e-13);
            }
        }

        #[test]
        fn conjugation_symmetry(x in point(), n in 0usize..12, m in 0i64..12) {
            prop_assume!(m as usize <= n);
            let pos = spherical_harmonic(HarmonicIndex::new(n, m).unwrap(), &x);
            let neg = spherical_harmonic(HarmonicIndex::new(n, -m).unwrap(), &x);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((neg - pos.conj() * sign).norm() < 1e-13);
        }

        #[test]
        fn addition_theorem_holds(x in point(), y in point(), n in 0usize..=20) {
            prop_assert!(addition_theorem_residual(n, &x, &y) < 1e-10);
        }
    }
}
