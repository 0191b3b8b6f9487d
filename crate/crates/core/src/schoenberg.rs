//! Covariance models on the sphere built from Schoenberg sequences.
//!
//! An isotropic covariance is `K(d) = sum_n b_n P_n(cos d)` with nonnegative
//! summable `b_n`. Letting the coefficients depend on location gives the
//! anisotropic family
//!
//! ```text
//! C(x1, x2) = sum_n sqrt(b_n(x1) b_n(x2)) P_n(x1 . x2)
//! ```
//!
//! which stays positive semidefinite for any nonnegative `b_n(x)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::legendre::legendre_all;
use crate::quadrature::gauss_legendre;
use crate::sphere::{geodesic_distance, SpherePoint};

/// Relative tail mass targeted by the default truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;
/// Hard cap on the default series truncation. Rough fields (small smoothness)
/// decay slowly and usually hit this cap.
pub const TRUNCATION_CAP: usize = 10_000;

/// Scalar function on the sphere, shared across threads.
pub type PointFn = Arc<dyn Fn(&SpherePoint) -> f64 + Send + Sync>;

/// Location-dependent Schoenberg coefficients `b_n(x)`, truncated at
/// [`AdaptiveSequence::truncation`].
///
/// Implementations must return nonnegative, finite values. Only
/// `coefficient` and `truncation` are required; the batch methods exist so
/// implementations can hoist per-point work out of inner loops.
pub trait AdaptiveSequence: Send + Sync {
    fn truncation(&self) -> usize;

    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64;

    /// `b_0(x), ..., b_N(x)`.
    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..=self.truncation()).map(|n| self.coefficient(n, x)));
    }

    /// `out[i] = b_{degrees[i]}(x)`; degrees beyond the truncation give 0.
    fn coefficients_for(&self, degrees: &[usize], x: &SpherePoint, out: &mut [f64]) {
        let cap = self.truncation();
        for (o, &n) in out.iter_mut().zip(degrees) {
            *o = if n > cap { 0.0 } else { self.coefficient(n, x) };
        }
    }

    /// `sum_{n <= N} b_n(x)`, the variance at `x`.
    fn total_mass(&self, x: &SpherePoint) -> f64 {
        (0..=self.truncation())
            .rev()
            .map(|n| self.coefficient(n, x))
            .sum()
    }

    /// Whether `b_n(x)` can be positive for some `x`. Used to check that an
    /// importance distribution covers the sequence.
    fn may_be_nonzero(&self, degree: usize) -> bool {
        degree <= self.truncation()
    }
}

impl<S: AdaptiveSequence + ?Sized> AdaptiveSequence for Arc<S> {
    fn truncation(&self) -> usize {
        (**self).truncation()
    }
    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64 {
        (**self).coefficient(degree, x)
    }
    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        (**self).coefficients_at(x, out)
    }
    fn coefficients_for(&self, degrees: &[usize], x: &SpherePoint, out: &mut [f64]) {
        (**self).coefficients_for(degrees, x, out)
    }
    fn total_mass(&self, x: &SpherePoint) -> f64 {
        (**self).total_mass(x)
    }
    fn may_be_nonzero(&self, degree: usize) -> bool {
        (**self).may_be_nonzero(degree)
    }
}

impl<S: AdaptiveSequence + ?Sized> AdaptiveSequence for &S {
    fn truncation(&self) -> usize {
        (**self).truncation()
    }
    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64 {
        (**self).coefficient(degree, x)
    }
    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        (**self).coefficients_at(x, out)
    }
    fn coefficients_for(&self, degrees: &[usize], x: &SpherePoint, out: &mut [f64]) {
        (**self).coefficients_for(degrees, x, out)
    }
    fn total_mass(&self, x: &SpherePoint) -> f64 {
        (**self).total_mass(x)
    }
    fn may_be_nonzero(&self, degree: usize) -> bool {
        (**self).may_be_nonzero(degree)
    }
}

/// Isotropic Schoenberg sequence `b_0..=b_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchoenbergSequence {
    coeffs: Vec<f64>,
    mass: f64,
}

impl SchoenbergSequence {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("Schoenberg sequence needs at least b_0"));
        }
        if let Some((n, b)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b >= 0.0))
        {
            return Err(Error::invalid(format!(
                "Schoenberg coefficient b_{n} = {b} is not a finite nonnegative number"
            )));
        }
        let mass = coeffs.iter().rev().sum();
        Ok(SchoenbergSequence { coeffs, mass })
    }

    /// `b_n = (tau^2 + n^2)^(-nu - 1/2)` for `n <= truncation`.
    pub fn legendre_matern(tau_sq: f64, nu: f64, truncation: usize) -> Result<Self> {
        check_matern(tau_sq, nu)?;
        Self::new(
            (0..=truncation)
                .map(|n| legendre_matern_b(n, tau_sq, nu))
                .collect(),
        )
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn get(&self, n: usize) -> f64 {
        self.coeffs.get(n).copied().unwrap_or(0.0)
    }

    /// `sum_n b_n`, which is also `K(0)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Copy with every coefficient multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.coeffs.iter().map(|b| b * factor).collect())
    }

    /// Copy with `b_0` set to zero (zero-mean single waves).
    pub fn without_degree_zero(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] = 0.0;
        let mass = coeffs.iter().rev().sum();
        SchoenbergSequence { coeffs, mass }
    }
}

impl AdaptiveSequence for SchoenbergSequence {
    fn truncation(&self) -> usize {
        self.coeffs.len() - 1
    }
    fn coefficient(&self, degree: usize, _x: &SpherePoint) -> f64 {
        self.get(degree)
    }
    fn coefficients_at(&self, _x: &SpherePoint, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&self.coeffs);
    }
    fn total_mass(&self, _x: &SpherePoint) -> f64 {
        self.mass
    }
    fn may_be_nonzero(&self, degree: usize) -> bool {
        self.get(degree) > 0.0
    }
}

fn check_matern(tau_sq: f64, nu: f64) -> Result<()> {
    if !(tau_sq.is_finite() && tau_sq > 0.0) {
        return Err(Error::invalid(format!("tau^2 must be positive, got {tau_sq}")));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::invalid(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

/// Legendre-Matern coefficient `(tau^2 + n^2)^(-nu - 1/2)`.
#[inline]
pub fn legendre_matern_b(n: usize, tau_sq: f64, nu: f64) -> f64 {
    let nf = n as f64;
    (tau_sq + nf * nf).powf(-nu - 0.5)
}

/// Smoothness of a Legendre-Matern model, constant or location dependent.
#[derive(Clone)]
pub enum Smoothness {
    Constant(f64),
    Varying(PointFn),
}

impl Smoothness {
    pub fn at(&self, x: &SpherePoint) -> f64 {
        match self {
            Smoothness::Constant(nu) => *nu,
            Smoothness::Varying(f) => f(x),
        }
    }
}

impl std::fmt::Debug for Smoothness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Smoothness::Constant(nu) => write!(f, "Constant({nu})"),
            Smoothness::Varying(_) => f.write_str("Varying(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LegendreMaternParams {
    pub tau_sq: f64,
    pub nu: Smoothness,
}

impl LegendreMaternParams {
    pub fn isotropic(tau_sq: f64, nu: f64) -> Result<Self> {
        check_matern(tau_sq, nu)?;
        Ok(LegendreMaternParams {
            tau_sq,
            nu: Smoothness::Constant(nu),
        })
    }

    pub fn adaptive(tau_sq: f64, nu: PointFn) -> Result<Self> {
        check_matern(tau_sq, 1.0)?;
        Ok(LegendreMaternParams {
            tau_sq,
            nu: Smoothness::Varying(nu),
        })
    }

    /// `b_n`, or `b_n(x)` for a varying smoothness; the latter needs `x`.
    pub fn coefficient(&self, n: usize, x: Option<&SpherePoint>) -> Result<f64> {
        let nu = match (&self.nu, x) {
            (Smoothness::Constant(nu), _) => *nu,
            (Smoothness::Varying(f), Some(x)) => f(x),
            (Smoothness::Varying(_), None) => {
                return Err(Error::invalid(
                    "adaptive Legendre-Matern coefficient needs a location",
                ))
            }
        };
        check_matern(self.tau_sq, nu)?;
        Ok(legendre_matern_b(n, self.tau_sq, nu))
    }
}

/// Smallest `N <= cap` whose relative tail `sum_{k > N} b_k / sum_k b_k`
/// drops below `rel_tol`, with sums extended to `10 * cap` terms.
pub fn adaptive_truncation(coeff: impl Fn(usize) -> f64, rel_tol: f64, cap: usize) -> usize {
    truncation_with_tail(coeff, |_| 0.0, rel_tol, cap)
}

fn truncation_with_tail(
    coeff: impl Fn(usize) -> f64,
    tail_beyond: impl Fn(usize) -> f64,
    rel_tol: f64,
    cap: usize,
) -> usize {
    let extension = cap.saturating_mul(10).max(1);
    let terms: Vec<f64> = (0..=extension).map(&coeff).collect();
    // tails[n] = sum_{k >= n} b_k, accumulated from the small end
    let mut tails = vec![0.0; terms.len() + 1];
    tails[terms.len()] = tail_beyond(extension);
    for n in (0..terms.len()).rev() {
        tails[n] = tails[n + 1] + terms[n];
    }
    let total = tails[0];
    if total <= 0.0 {
        return 0;
    }
    (0..cap)
        .find(|&n| tails[n + 1] / total < rel_tol)
        .unwrap_or(cap)
}

/// Default truncation for Legendre-Matern with smallest smoothness `nu_min`
/// (slowest decay), including the asymptotic tail `n^(-2 nu) / (2 nu)`
/// beyond the extended sum.
pub fn legendre_matern_truncation(tau_sq: f64, nu_min: f64) -> Result<usize> {
    check_matern(tau_sq, nu_min)?;
    Ok(truncation_with_tail(
        |n| legendre_matern_b(n, tau_sq, nu_min),
        |n| (n as f64 + 0.5).powf(-2.0 * nu_min) / (2.0 * nu_min),
        DEFAULT_TAIL_TOLERANCE,
        TRUNCATION_CAP,
    ))
}

/// Adaptive Legendre-Matern sequence `b_n(x) = (tau^2 + n^2)^(-nu(x) - 1/2)`.
///
/// Variances `sum_n b_n(x)` depend on `x` only through `nu(x)` and are
/// memoised per distinct smoothness value.
pub struct AdaptiveLegendreMatern {
    tau_sq: f64,
    nu: Smoothness,
    truncation: usize,
    drop_degree_zero: bool,
    mass_cache: RwLock<HashMap<u64, f64>>,
}

impl AdaptiveLegendreMatern {
    pub fn new(params: LegendreMaternParams, truncation: usize) -> Result<Self> {
        check_matern(params.tau_sq, 1.0)?;
        if let Smoothness::Constant(nu) = params.nu {
            check_matern(params.tau_sq, nu)?;
        }
        Ok(AdaptiveLegendreMatern {
            tau_sq: params.tau_sq,
            nu: params.nu,
            truncation,
            drop_degree_zero: false,
            mass_cache: RwLock::new(HashMap::new()),
        })
    }

    /// Forces `b_0(x) = 0`, as done for the particle presets.
    pub fn without_degree_zero(mut self) -> Self {
        self.drop_degree_zero = true;
        self.mass_cache = RwLock::new(HashMap::new());
        self
    }

    pub fn tau_sq(&self) -> f64 {
        self.tau_sq
    }

    pub fn smoothness(&self) -> &Smoothness {
        &self.nu
    }

    pub fn nu_at(&self, x: &SpherePoint) -> f64 {
        self.nu.at(x)
    }

    fn first_degree(&self) -> usize {
        usize::from(self.drop_degree_zero)
    }

    fn mass_for_nu(&self, nu: f64) -> f64 {
        let key = nu.to_bits();
        if let Some(m) = self.mass_cache.read().expect("mass cache poisoned").get(&key) {
            return *m;
        }
        let mass = (self.first_degree()..=self.truncation)
            .rev()
            .map(|n| legendre_matern_b(n, self.tau_sq, nu))
            .sum();
        self.mass_cache
            .write()
            .expect("mass cache poisoned")
            .insert(key, mass);
        mass
    }
}

impl AdaptiveSequence for AdaptiveLegendreMatern {
    fn truncation(&self) -> usize {
        self.truncation
    }

    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64 {
        if degree > self.truncation || degree < self.first_degree() {
            return 0.0;
        }
        legendre_matern_b(degree, self.tau_sq, self.nu.at(x))
    }

    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        let nu = self.nu.at(x);
        out.clear();
        out.extend((0..=self.truncation).map(|n| {
            if n < self.first_degree() {
                0.0
            } else {
                legendre_matern_b(n, self.tau_sq, nu)
            }
        }));
    }

    fn coefficients_for(&self, degrees: &[usize], x: &SpherePoint, out: &mut [f64]) {
        let nu = self.nu.at(x);
        for (o, &n) in out.iter_mut().zip(degrees) {
            *o = if n > self.truncation || n < self.first_degree() {
                0.0
            } else {
                legendre_matern_b(n, self.tau_sq, nu)
            };
        }
    }

    fn total_mass(&self, x: &SpherePoint) -> f64 {
        self.mass_for_nu(self.nu.at(x))
    }

    fn may_be_nonzero(&self, degree: usize) -> bool {
        degree >= self.first_degree() && degree <= self.truncation
    }
}

/// `b'_n(x) = b_n(x) * target / sum_k b_k(x)`, giving constant variance
/// `target` at every point.
pub struct Rescaled<S> {
    inner: S,
    target: f64,
}

pub fn rescale_to_variance<S: AdaptiveSequence>(seq: S, target_var: f64) -> Result<Rescaled<S>> {
    if !(target_var.is_finite() && target_var > 0.0) {
        return Err(Error::invalid(format!(
            "target variance must be positive, got {target_var}"
        )));
    }
    Ok(Rescaled {
        inner: seq,
        target: target_var,
    })
}

impl<S: AdaptiveSequence> Rescaled<S> {
    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// `target / sum_k b_k(x)`; fails where the sequence has no mass.
    pub fn scale_at(&self, x: &SpherePoint) -> Result<f64> {
        let mass = self.inner.total_mass(x);
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::invalid(format!(
                "cannot rescale: total mass {mass} at polar {:.6}, azimuth {:.6}",
                x.polar(),
                x.azimuth()
            )));
        }
        Ok(self.target / mass)
    }

    /// Checks that every point can be rescaled.
    pub fn validate(&self, points: &[SpherePoint]) -> Result<()> {
        points.iter().try_for_each(|x| self.scale_at(x).map(|_| ()))
    }

    fn scale_or_zero(&self, x: &SpherePoint) -> f64 {
        self.scale_at(x).unwrap_or(0.0)
    }
}

impl<S: AdaptiveSequence> AdaptiveSequence for Rescaled<S> {
    fn truncation(&self) -> usize {
        self.inner.truncation()
    }

    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64 {
        self.inner.coefficient(degree, x) * self.scale_or_zero(x)
    }

    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        self.inner.coefficients_at(x, out);
        let s = self.scale_or_zero(x);
        out.iter_mut().for_each(|b| *b *= s);
    }

    fn coefficients_for(&self, degrees: &[usize], x: &SpherePoint, out: &mut [f64]) {
        self.inner.coefficients_for(degrees, x, out);
        let s = self.scale_or_zero(x);
        out.iter_mut().for_each(|b| *b *= s);
    }

    fn total_mass(&self, x: &SpherePoint) -> f64 {
        if self.scale_at(x).is_ok() {
            self.target
        } else {
            0.0
        }
    }

    fn may_be_nonzero(&self, degree: usize) -> bool {
        self.inner.may_be_nonzero(degree)
    }
}

fn check_angle(d: f64) -> Result<()> {
    if !(0.0..=PI).contains(&d) {
        return Err(Error::invalid(format!("distance {d} outside [0, pi]")));
    }
    Ok(())
}

/// Truncated isotropic covariance `K(d) = sum_n b_n P_n(cos d)`.
pub fn covariance_isotropic(seq: &SchoenbergSequence, d: f64) -> Result<f64> {
    check_angle(d)?;
    Ok(series_at(seq.coefficients(), d.cos()))
}

/// `sum_n b_n P_n(t)` by forward recurrence.
pub(crate) fn series_at(b: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    let (mut p0, mut p1) = (1.0, t);
    for (n, &bn) in b.iter().enumerate() {
        let p = match n {
            0 => 1.0,
            1 => t,
            _ => {
                let kf = (n - 1) as f64;
                let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        sum += bn * p;
    }
    sum
}

/// `sum_n sqrt(b_n(x1) b_n(x2)) P_n(t)` from precomputed coefficient rows.
fn coupled_series(b1: &[f64], b2: &[f64], t: f64) -> f64 {
    let mut sum = 0.0;
    let (mut p0, mut p1) = (1.0, t);
    for (n, (&u, &v)) in b1.iter().zip(b2).enumerate() {
        let p = match n {
            0 => 1.0,
            1 => t,
            _ => {
                let kf = (n - 1) as f64;
                let p2 = ((2.0 * kf + 1.0) * t * p1 - kf * p0) / (kf + 1.0);
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        sum += (u * v).sqrt() * p;
    }
    sum
}

/// Truncated anisotropic covariance with geometric-mean coupling.
pub fn covariance_adaptive<S: AdaptiveSequence + ?Sized>(
    seq: &S,
    x1: &SpherePoint,
    x2: &SpherePoint,
) -> f64 {
    let mut b1 = Vec::new();
    let mut b2 = Vec::new();
    seq.coefficients_at(x1, &mut b1);
    seq.coefficients_at(x2, &mut b2);
    coupled_series(&b1, &b2, x1.dot(x2).clamp(-1.0, 1.0))
}

/// Covariance matrix over `points`, row-major, evaluating each point's
/// coefficients once.
pub fn gram_matrix<S: AdaptiveSequence + ?Sized>(seq: &S, points: &[SpherePoint]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|x| {
            let mut b = Vec::new();
            seq.coefficients_at(x, &mut b);
            b
        })
        .collect();
    let k = points.len();
    let mut gram = vec![0.0; k * k];
    for i in 0..k {
        for j in i..k {
            let c = coupled_series(&rows[i], &rows[j], points[i].dot(&points[j]).clamp(-1.0, 1.0));
            gram[i * k + j] = c;
            gram[j * k + i] = c;
        }
    }
    gram
}

/// Default Gauss-Legendre node count for inverting degree `n`.
pub fn default_inversion_nodes(n: usize) -> usize {
    (2 * n + 2).max(128)
}

/// `b_n = (2n+1)/2 * int_0^pi P_n(cos s) sin(s) K(s) ds` by Gauss-Legendre
/// quadrature in `u = cos s`.
pub fn invert_covariance(k: impl Fn(f64) -> f64, n: usize, quadrature_nodes: usize) -> Result<f64> {
    Ok(invert_coefficients(k, n, quadrature_nodes)?[n])
}

/// All coefficients `b_0..=b_max_degree` from a single set of evaluations.
pub fn invert_coefficients(
    k: impl Fn(f64) -> f64,
    max_degree: usize,
    quadrature_nodes: usize,
) -> Result<Vec<f64>> {
    if quadrature_nodes < 2 * max_degree + 2 {
        return Err(Error::invalid(format!(
            "{quadrature_nodes} quadrature nodes cannot resolve degree {max_degree}; need at least {}",
            2 * max_degree + 2
        )));
    }
    let (nodes, weights) = gauss_legendre(quadrature_nodes);
    let mut out = vec![0.0; max_degree + 1];
    let mut p = vec![0.0; max_degree + 1];
    for (&u, &w) in nodes.iter().zip(&weights) {
        let kv = k(u.clamp(-1.0, 1.0).acos());
        legendre_all(u, &mut p);
        for (o, pn) in out.iter_mut().zip(&p) {
            *o += w * pn * kv;
        }
    }
    for (n, b) in out.iter_mut().enumerate() {
        *b *= (2 * n + 1) as f64 / 2.0;
        if *b < -1e-8 {
            log::warn!(
                "inverted coefficient b_{n} = {b:e} is negative: covariance not positive semidefinite or under-resolved"
            );
        }
    }
    Ok(out)
}

/// `sum_{k=n}^{N} b_k`.
pub fn tail_sum(seq: &SchoenbergSequence, n: usize) -> Result<f64> {
    let b = seq.coefficients();
    if n >= b.len() {
        return Err(Error::invalid(format!(
            "tail start {n} beyond truncation {}",
            b.len() - 1
        )));
    }
    Ok(b[n..].iter().rev().sum())
}

/// One weighted isotropic component `lambda(x) Z_j(x)` of a kernel mixture.
#[derive(Clone)]
pub struct KernelComponent {
    pub kernel: PointFn,
    pub sequence: SchoenbergSequence,
}

/// `Z(x) = sum_j lambda_j(x) Z_j(x)` with independent isotropic `Z_j`.
#[derive(Clone)]
pub struct KernelMixture {
    components: Vec<KernelComponent>,
}

impl KernelMixture {
    pub fn new(components: Vec<KernelComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("kernel mixture needs at least one component"));
        }
        Ok(KernelMixture { components })
    }

    pub fn components(&self) -> &[KernelComponent] {
        &self.components
    }
}

/// `C(x1, x2) = sum_j lambda_j(x1) lambda_j(x2) K_j(d(x1, x2))`.
pub fn kernel_mixture_covariance(mix: &KernelMixture, x1: &SpherePoint, x2: &SpherePoint) -> f64 {
    let d = geodesic_distance(x1, x2);
    mix.components
        .iter()
        .map(|c| {
            (c.kernel)(x1)
                * (c.kernel)(x2)
                * covariance_isotropic(&c.sequence, d).expect("geodesic distance lies in [0, pi]")
        })
        .sum()
}

/// Adaptive sequence `b_n(x) = lambda(x)^2 p_n` of one mixture component.
#[derive(Clone)]
pub struct KernelSequence {
    kernel: PointFn,
    sequence: SchoenbergSequence,
}

impl AdaptiveSequence for KernelSequence {
    fn truncation(&self) -> usize {
        self.sequence.truncation()
    }
    fn coefficient(&self, degree: usize, x: &SpherePoint) -> f64 {
        let l = (self.kernel)(x);
        l * l * self.sequence.get(degree)
    }
    fn coefficients_at(&self, x: &SpherePoint, out: &mut Vec<f64>) {
        let l = (self.kernel)(x);
        out.clear();
        out.extend(self.sequence.coefficients().iter().map(|p| l * l * p));
    }
    fn total_mass(&self, x: &SpherePoint) -> f64 {
        let l = (self.kernel)(x);
        l * l * self.sequence.mass()
    }
    fn may_be_nonzero(&self, degree: usize) -> bool {
        self.sequence.get(degree) > 0.0
    }
}

/// One adaptive sequence per component; their covariances sum to the
/// mixture covariance.
pub fn kernel_to_adaptive(mix: &KernelMixture) -> Vec<KernelSequence> {
    mix.components
        .iter()
        .map(|c| KernelSequence {
            kernel: Arc::clone(&c.kernel),
            sequence: c.sequence.clone(),
        })
        .collect()
}

/// `(d, K(d))` on `n_points` equally spaced distances over `[0, pi]`.
pub fn covariance_curve(seq: &SchoenbergSequence, n_points: usize) -> Result<Vec<(f64, f64)>> {
    if n_points < 2 {
        return Err(Error::invalid("a covariance curve needs at least 2 points"));
    }
    (0..n_points)
        .map(|i| {
            let d = PI * i as f64 / (n_points - 1) as f64;
            covariance_isotropic(seq, d).map(|k| (d, k))
        })
        .collect()
}

/// Two-column text with header `distance_rad,value`.
pub fn write_covariance_curve<W: Write>(mut w: W, curve: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "distance_rad,value")?;
    for (d, k) in curve {
        writeln!(w, "{d:.17e},{k:.17e}")?;
    }
    Ok(())
}

/// Reads the format written by [`write_covariance_curve`]. Distances must be
/// strictly increasing within `[0, pi]`.
pub fn read_covariance_curve<R: std::io::Read>(r: R, source_name: &str) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let parse_err = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["distance_rad", "value"] {
        return Err(parse_err(1, "expected header distance_rad,value".into()));
    }
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, rec) in reader.deserialize::<(f64, f64)>().enumerate() {
        let line = i + 2;
        let (d, k) = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if !(0.0..=PI + 1e-12).contains(&d) || !k.is_finite() {
            return Err(parse_err(line, format!("bad row ({d}, {k})")));
        }
        if out.last().is_some_and(|&(prev, _)| d <= prev) {
            return Err(parse_err(line, "distances must be strictly increasing".into()));
        }
        out.push((d.min(PI), k));
    }
    if out.len() < 2 {
        return Err(parse_err(0, "a covariance curve needs at least 2 rows".into()));
    }
    Ok(out)
}

/// Piecewise-linear interpolation of a sampled curve, constant beyond its
/// ends.
pub fn interpolate_curve(curve: &[(f64, f64)], d: f64) -> f64 {
    let k = curve.partition_point(|&(x, _)| x <= d);
    if k == 0 {
        return curve[0].1;
    }
    if k == curve.len() {
        return curve[k - 1].1;
    }
    let ((x0, y0), (x1, y1)) = (curve[k - 1], curve[k]);
    y0 + (y1 - y0) * (d - x0) / (x1 - x0)
}
