//! Smoothness, fractal index and Hausdorff dimension, the particle scenario
//! presets, and empirical variogram tools for checking simulated roughness.
//!
//! For a Legendre-Matern field the fractal index is `alpha = 2 nu` when
//! `nu <= 1` and `alpha = 2` beyond, and a Gaussian radial function with
//! fractal index `alpha` bounds a particle of Hausdorff dimension
//! `3 - alpha / 2`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schoenberg::{AdaptiveLegendreMatern, LegendreMaternParams, PointFn};
use crate::field::SphericalField;
use crate::sphere::{geodesic_distance, SphereGrid, SpherePoint};

pub fn nu_to_alpha(nu: f64) -> Result<f64> {
    if !(nu.is_finite() && nu > 0.0) {
        return Err(Error::invalid(format!("smoothness must be positive, got {nu}")));
    }
    Ok((2.0 * nu).min(2.0))
}

pub fn alpha_to_hausdorff(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(3.0 - alpha / 2.0)
}

pub fn hausdorff_to_alpha(eta0: f64) -> Result<f64> {
    check_hausdorff(eta0)?;
    Ok(2.0 * (3.0 - eta0))
}

/// `nu = 3 - eta0`, the smoothness whose fractal index `2 nu` gives `eta0`.
pub fn hausdorff_to_nu(eta0: f64) -> Result<f64> {
    check_hausdorff(eta0)?;
    Ok(3.0 - eta0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid(format!("fractal index {alpha} outside (0, 2]")));
    }
    Ok(())
}

fn check_hausdorff(eta0: f64) -> Result<()> {
    if !(2.0..3.0).contains(&eta0) {
        return Err(Error::invalid(format!("Hausdorff dimension {eta0} outside [2, 3)")));
    }
    Ok(())
}

/// Fractal index, possibly varying over the sphere, with an optional
/// small-lag constant `c0` from `K(0) - K(d) ~ c0 d^alpha`.
#[derive(Clone)]
pub enum FractalProfile {
    Constant { alpha: f64, c0: Option<f64> },
    Varying(PointFn),
}

impl FractalProfile {
    pub fn constant(alpha: f64, c0: Option<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if let Some(c) = c0 {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("c0 must be positive, got {c}")));
            }
        }
        Ok(FractalProfile::Constant { alpha, c0 })
    }

    /// Profile implied by a smoothness function.
    pub fn from_smoothness(nu: PointFn) -> Self {
        FractalProfile::Varying(Arc::new(move |x| (2.0 * nu(x)).min(2.0)))
    }

    pub fn alpha_at(&self, x: &SpherePoint) -> f64 {
        match self {
            FractalProfile::Constant { alpha, .. } => *alpha,
            FractalProfile::Varying(f) => f(x),
        }
    }

    pub fn hausdorff_at(&self, x: &SpherePoint) -> f64 {
        3.0 - self.alpha_at(x) / 2.0
    }
}

/// Smoothness layouts for simulated particles.
#[derive(Clone)]
pub enum Scenario {
    /// `nu = 0.6 + 0.3 / (1 + exp(-10 (polar - pi/2)))`: rough in the north,
    /// smooth in the south.
    A,
    /// `nu = 0.6 + 0.3 exp(-20 (polar - pi/2)^2)`: rough at the poles,
    /// smooth at the equator.
    B,
    Custom(PointFn),
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Scenario({})", self.name())
    }
}

impl Scenario {
    pub fn nu(&self, x: &SpherePoint) -> f64 {
        let offset = x.polar() - PI / 2.0;
        match self {
            Scenario::A => 0.6 + 0.3 / (1.0 + (-10.0 * offset).exp()),
            Scenario::B => 0.6 + 0.3 * (-20.0 * offset * offset).exp(),
            Scenario::Custom(f) => f(x),
        }
    }

    pub fn nu_fn(&self) -> PointFn {
        let s = self.clone();
        Arc::new(move |x| s.nu(x))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::A => "A",
            Scenario::B => "B",
            Scenario::Custom(_) => "custom",
        }
    }

    /// Adaptive Legendre-Matern sequence with this smoothness layout.
    pub fn sequence(&self, tau_sq: f64, truncation: usize) -> Result<AdaptiveLegendreMatern> {
        AdaptiveLegendreMatern::new(LegendreMaternParams::adaptive(tau_sq, self.nu_fn())?, truncation)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Scenario::A),
            "B" | "b" => Ok(Scenario::B),
            other => Err(Error::invalid(format!("unknown scenario {other:?}, expected A or B"))),
        }
    }
}

pub fn scenario_nu(s: &Scenario, x: &SpherePoint) -> f64 {
    s.nu(x)
}

/// One nonempty variogram bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Mean separation of the pairs in the bin.
    pub mean_lag: f64,
    pub gamma: f64,
    pub pairs: usize,
}

impl VariogramBin {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Clone)]
struct Accumulator {
    sq: Vec<f64>,
    lag: Vec<f64>,
    count: Vec<usize>,
}

impl Accumulator {
    fn new(bins: usize) -> Self {
        Accumulator {
            sq: vec![0.0; bins],
            lag: vec![0.0; bins],
            count: vec![0; bins],
        }
    }

    fn add(&mut self, edges: &[f64], d: f64, diff: f64) {
        if d < edges[0] || d >= edges[edges.len() - 1] {
            return;
        }
        let k = edges.partition_point(|e| *e <= d) - 1;
        self.sq[k] += 0.5 * diff * diff;
        self.lag[k] += d;
        self.count[k] += 1;
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        for k in 0..self.sq.len() {
            self.sq[k] += other.sq[k];
            self.lag[k] += other.lag[k];
            self.count[k] += other.count[k];
        }
        self
    }

    fn finish(&self, edges: &[f64]) -> Vec<VariogramBin> {
        (0..self.sq.len())
            .filter(|&k| self.count[k] > 0)
            .map(|k| VariogramBin {
                lo: edges[k],
                hi: edges[k + 1],
                mean_lag: self.lag[k] / self.count[k] as f64,
                gamma: self.sq[k] / self.count[k] as f64,
                pairs: self.count[k],
            })
            .collect()
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2
        || edges[0] <= 0.0
        || edges[edges.len() - 1] > PI + 1e-12
        || !edges.windows(2).all(|w| w[0] < w[1])
    {
        return Err(Error::invalid(
            "variogram bin edges must be increasing within (0, pi]",
        ));
    }
    Ok(())
}

/// `n_bins + 1` logarithmically spaced edges over `[lo, hi]`.
pub fn log_spaced_edges(lo: f64, hi: f64, n_bins: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n_bins == 0 {
        return Err(Error::invalid(format!("bad log bins [{lo}, {hi}] x {n_bins}")));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..=n_bins)
        .map(|i| (a + (b - a) * i as f64 / n_bins as f64).exp())
        .collect())
}

/// Binned semivariogram: mean of `(Z(x_i) - Z(x_j))^2 / 2` over pairs whose
/// geodesic distance falls in `[edges[k], edges[k+1])`. Bins without pairs
/// are omitted.
pub fn empirical_variogram(
    values: &[f64],
    positions: &[SpherePoint],
    edges: &[f64],
) -> Result<Vec<VariogramBin>> {
    let labels = vec![0usize; values.len()];
    Ok(windowed_variogram(values, positions, &labels, edges)?
        .pop()
        .unwrap_or_default())
}

/// Variograms restricted to pairs sharing a window label; entry `w` of the
/// result belongs to label `w`.
pub fn windowed_variogram(
    values: &[f64],
    positions: &[SpherePoint],
    labels: &[usize],
    edges: &[f64],
) -> Result<Vec<Vec<VariogramBin>>> {
    if values.len() != positions.len() || values.len() != labels.len() {
        return Err(Error::invalid("values, positions and labels differ in length"));
    }
    if values.len() < 2 {
        return Err(Error::invalid("a variogram needs at least two samples"));
    }
    check_edges(edges)?;
    let n_windows = labels.iter().max().map_or(0, |m| m + 1);
    let max_lag = edges[edges.len() - 1];

    // Pairs further apart in polar angle than the last edge cannot land in a
    // bin, so scan neighbours in polar order only.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| positions[a].polar().total_cmp(&positions[b].polar()));

    let chunk = 64;
    let partials: Vec<Vec<Accumulator>> = order
        .par_chunks(chunk)
        .enumerate()
        .map(|(c, idxs)| {
            let mut acc = vec![Accumulator::new(edges.len() - 1); n_windows];
            for (offset, &i) in idxs.iter().enumerate() {
                let start = c * chunk + offset + 1;
                let pi = positions[i].polar();
                for &j in &order[start..] {
                    if positions[j].polar() - pi > max_lag {
                        break;
                    }
                    if labels[i] != labels[j] {
                        continue;
                    }
                    let d = geodesic_distance(&positions[i], &positions[j]);
                    acc[labels[i]].add(edges, d, values[i] - values[j]);
                }
            }
            acc
        })
        .collect();

    let mut total = vec![Accumulator::new(edges.len() - 1); n_windows];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.clone().merge(p);
        }
    }
    Ok(total.iter().map(|a| a.finish(edges)).collect())
}

/// Window labels from equal-width polar bands (band 0 at the north pole).
pub fn latitude_band_labels(positions: &[SpherePoint], n_bands: usize) -> Vec<usize> {
    positions
        .iter()
        .map(|x| ((x.polar() / PI * n_bands as f64) as usize).min(n_bands.saturating_sub(1)))
        .collect()
}

/// Variogram of an equally spaced transect at integer lags (in samples).
/// A circular transect wraps around, as for a full great circle.
pub fn transect_variogram(
    values: &[f64],
    spacing: f64,
    lags: &[usize],
    circular: bool,
) -> Vec<VariogramBin> {
    let n = values.len();
    lags.iter()
        .filter(|&&k| k > 0 && k < n)
        .map(|&k| {
            let pairs = if circular { n } else { n - k };
            let sq: f64 = (0..pairs)
                .map(|i| {
                    let diff = values[(i + k) % n] - values[i];
                    diff * diff
                })
                .sum();
            let lag = k as f64 * spacing;
            VariogramBin {
                lo: lag,
                hi: lag,
                mean_lag: lag,
                gamma: 0.5 * sq / pairs as f64,
                pairs,
            }
        })
        .collect()
}

/// Up to `count` distinct sample lags, log-spaced between `lo` and `hi`
/// (radians) and rounded to whole multiples of `spacing`.
pub fn integer_lags(spacing: f64, lo: f64, hi: f64, count: usize) -> Vec<usize> {
    let (a, b) = (lo / spacing, hi / spacing);
    let mut lags: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (a * (b / a).powf(t)).round() as usize
        })
        .filter(|&k| k > 0)
        .collect();
    lags.dedup();
    lags
}

/// Great circles through the poles read off a regular grid with an even
/// number of azimuths: column `j` north to south, then column `j + n/2`
/// back up. Consecutive samples, including across the poles, are
/// `pi / n_polar` apart. Returns `None` for any other grid.
pub fn meridian_circles(field: &SphericalField) -> Option<(Vec<Vec<f64>>, f64)> {
    let grid = field.grid();
    let (np, na) = (grid.n_polar(), grid.n_azimuth());
    if na % 2 != 0 || SphereGrid::regular(np, na).ok().as_ref() != Some(grid) {
        return None;
    }
    let v = field.values();
    let circles = (0..na / 2)
        .map(|j| {
            let down = (0..np).map(|i| v[grid.index(i, j)]);
            let up = (0..np).rev().map(|i| v[grid.index(i, j + na / 2)]);
            down.chain(up).collect()
        })
        .collect();
    Some((circles, PI / np as f64))
}

/// Pooled variogram of several equally spaced closed transects.
pub fn circles_variogram(circles: &[Vec<f64>], spacing: f64, lags: &[usize]) -> Vec<VariogramBin> {
    let mut total: Vec<VariogramBin> = Vec::new();
    for c in circles {
        let v = transect_variogram(c, spacing, lags, true);
        if total.is_empty() {
            total = v;
            continue;
        }
        for (t, b) in total.iter_mut().zip(v) {
            let n = t.pairs + b.pairs;
            t.gamma = (t.gamma * t.pairs as f64 + b.gamma * b.pairs as f64) / n as f64;
            t.pairs = n;
        }
    }
    total
}

/// Result of a log-log fit `gamma = c0 * d^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractalFit {
    pub alpha: f64,
    pub c0: f64,
    pub points: usize,
}

impl FractalFit {
    /// Hausdorff dimension implied by the fitted index, `3 - alpha / 2`.
    pub fn hausdorff(&self) -> f64 {
        3.0 - self.alpha / 2.0
    }
}

/// Least-squares slope of `ln gamma` against `ln lag` over bins whose mean
/// lag lies in `[fit_min, fit_max]`.
pub fn estimate_fractal_index(
    variogram: &[VariogramBin],
    fit_min: f64,
    fit_max: f64,
) -> Result<FractalFit> {
    let pts: Vec<(f64, f64)> = variogram
        .iter()
        .filter(|b| b.mean_lag >= fit_min && b.mean_lag <= fit_max && b.gamma > 0.0)
        .map(|b| (b.mean_lag.ln(), b.gamma.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 positive variogram points in [{fit_min}, {fit_max}], found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 1e-300 {
        return Err(Error::invalid("degenerate fit: all lags coincide"));
    }
    let alpha = sxy / sxx;
    Ok(FractalFit {
        alpha,
        c0: (my - alpha * mx).exp(),
        points: pts.len(),
    })
}

/// Smallest lag worth fitting on a grid of the given spacing: the second
/// resolvable lag.
pub fn default_fit_min(spacing: f64) -> f64 {
    2.0 * spacing
}

pub const DEFAULT_FIT_MAX: f64 = 0.1;
