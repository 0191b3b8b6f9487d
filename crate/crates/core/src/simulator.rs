//! Turning-bands simulation with random Legendre waves.
//!
//! One copy draws a degree `kappa` from an importance distribution `a` and a
//! uniform direction `w`, and evaluates
//!
//! ```text
//! Z(x) = sqrt(b_kappa(x) (2 kappa + 1) / a_kappa) P_kappa(w . x)
//! ```
//!
//! which has mean `sqrt(a_0 b_0(x))` and the adaptive covariance of `b`.
//! Ensembles average `L` independent copies after removing that mean.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::SphericalField;
use crate::legendre::{legendre_p_unchecked, LegendreTable};
use crate::schoenberg::{rescale_to_variance, AdaptiveSequence, PointFn};
use crate::sphere::{dot, sample_uniform, RngStream, SphereGrid, SpherePoint};

pub const DEFAULT_COPIES: usize = 300;
pub const DEFAULT_NB_FAILURES: u32 = 1;
pub const DEFAULT_NB_SUCCESS: f64 = 0.1;

const POINT_CHUNK: usize = 64;

fn check_nb(r: u32, p: f64) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("negative binomial needs r >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("success probability {p} outside (0, 1)")));
    }
    Ok(())
}

/// `ln C(n + r - 1, n)`.
fn ln_binomial(n: usize, r: u32) -> f64 {
    (1..=n)
        .map(|k| ((k as f64 + r as f64 - 1.0) / k as f64).ln())
        .sum()
}

/// `a_n = C(n + r - 1, n) p^r (1 - p)^n`, the number of failures before the
/// `r`-th success. `r = 1` is the geometric distribution.
pub fn negative_binomial_pmf(n: usize, r: u32, p: f64) -> Result<f64> {
    check_nb(r, p)?;
    Ok((ln_binomial(n, r) + r as f64 * p.ln() + n as f64 * (1.0 - p).ln()).exp())
}

/// Probability mass sequence for the wave degree, supported on
/// `0..=support_cap`.
///
/// Log-masses are kept alongside the masses: far tails of light-tailed
/// distributions underflow in `f64` but still belong to the support.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceDistribution {
    pmf: Vec<f64>,
    ln_pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl ImportanceDistribution {
    /// Normalizes nonnegative weights `w_0..=w_cap`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("importance weights must be finite and nonnegative"));
        }
        let ln: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::from_ln_weights(ln)
    }

    fn from_ln_weights(ln_w: Vec<f64>) -> Result<Self> {
        let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::invalid("importance weights have no positive mass"));
        }
        let total: f64 = ln_w.iter().rev().map(|l| (l - top).exp()).sum();
        let ln_norm = top + total.ln();
        let ln_pmf: Vec<f64> = ln_w.iter().map(|l| l - ln_norm).collect();
        let pmf: Vec<f64> = ln_pmf.iter().map(|l| l.exp()).collect();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = pmf
            .iter()
            .map(|a| {
                acc += a;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(ImportanceDistribution { pmf, ln_pmf, cdf })
    }

    /// Negative binomial truncated to `0..=cap` and renormalized.
    pub fn negative_binomial(r: u32, p: f64, cap: usize) -> Result<Self> {
        check_nb(r, p)?;
        let (ln_p, ln_q, rf) = (p.ln(), (1.0 - p).ln(), r as f64);
        let mut ln_c = 0.0;
        let ln_w = (0..=cap)
            .map(|n| {
                if n > 0 {
                    ln_c += ((n as f64 + rf - 1.0) / n as f64).ln();
                }
                ln_c + rf * ln_p + n as f64 * ln_q
            })
            .collect();
        Self::from_ln_weights(ln_w)
    }

    /// `a_n` proportional to `(n + 1)^(-exponent)` on `0..=cap`.
    pub fn power_law(exponent: f64, cap: usize) -> Result<Self> {
        if !(exponent.is_finite() && exponent >= 0.0) {
            return Err(Error::invalid(format!("power-law exponent {exponent} must be >= 0")));
        }
        Self::from_ln_weights((0..=cap).map(|n| -exponent * ((n + 1) as f64).ln()).collect())
    }

    pub fn pmf(&self, n: usize) -> f64 {
        self.pmf.get(n).copied().unwrap_or(0.0)
    }

    pub fn ln_pmf(&self, n: usize) -> f64 {
        self.ln_pmf.get(n).copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn support_cap(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, a)| n as f64 * a).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.support_cap())
    }
}

pub fn sample_kappa<R: Rng + ?Sized>(dist: &ImportanceDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Fails unless `a_n > 0` wherever `b_n` can be positive.
pub fn check_support<S: AdaptiveSequence + ?Sized>(
    seq: &S,
    dist: &ImportanceDistribution,
) -> Result<()> {
    for n in 0..=seq.truncation() {
        if seq.may_be_nonzero(n) && dist.ln_pmf(n) == f64::NEG_INFINITY {
            return Err(Error::Contract(format!(
                "importance distribution gives degree {n} zero mass (support cap {}) but the \
                 sequence is truncated at {}",
                dist.support_cap(),
                seq.truncation()
            )));
        }
    }
    Ok(())
}

/// One random Legendre wave: degree, direction and the importance factor
/// `sqrt((2 kappa + 1) / a_kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreWave {
    pub degree: usize,
    pub direction: SpherePoint,
    pub gain: f64,
}

impl LegendreWave {
    pub fn draw<R: Rng + ?Sized>(dist: &ImportanceDistribution, rng: &mut R) -> Self {
        let degree = dist.sample(rng);
        let direction = sample_uniform(rng);
        Self::new(degree, direction, dist)
    }

    pub fn new(degree: usize, direction: SpherePoint, dist: &ImportanceDistribution) -> Self {
        let gain = (0.5 * ((2 * degree + 1) as f64).ln() - 0.5 * dist.ln_pmf(degree)).exp();
        LegendreWave {
            degree,
            direction,
            gain,
        }
    }

    /// This wave's value `Z(x)` under `seq`.
    pub fn eval_at<S: AdaptiveSequence + ?Sized>(&self, seq: &S, x: &SpherePoint) -> f64 {
        let mut b = [0.0];
        seq.coefficients_for(&[self.degree], x, &mut b);
        let t = self.direction.dot(x).clamp(-1.0, 1.0);
        self.value(b[0], legendre_p_unchecked(self.degree, t))
    }

    /// `Z(x)` given `b_kappa(x)`.
    #[inline]
    fn value(&self, b: f64, legendre: f64) -> f64 {
        if b == 0.0 {
            0.0
        } else {
            b.sqrt() * self.gain * legendre
        }
    }
}

/// One copy `Z(x)` on every grid point. The stream supplies the degree and
/// then the direction.
pub fn single_copy<S: AdaptiveSequence + ?Sized>(
    seq: &S,
    dist: &ImportanceDistribution,
    stream: RngStream,
    grid: &SphereGrid,
) -> Result<SphericalField> {
    check_support(seq, dist)?;
    let wave = LegendreWave::draw(dist, &mut stream.rng());
    let table = LegendreTable::new(wave.degree);
    let u = wave.direction.unit_vector();
    let degrees = [wave.degree];
    let values = grid
        .points()
        .par_chunks(POINT_CHUNK)
        .flat_map_iter(|chunk| {
            let mut b = [0.0];
            chunk
                .iter()
                .map(|x| {
                    seq.coefficients_for(&degrees, x, &mut b);
                    let t = dot(&u, &x.unit_vector()).clamp(-1.0, 1.0);
                    wave.value(b[0], table.eval(wave.degree, t))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    SphericalField::new(grid.clone(), values)
}

#[derive(Clone)]
pub struct SimulationConfig {
    copies: usize,
    master_seed: u64,
    mean: Option<PointFn>,
    target_variance: Option<f64>,
}

impl std::fmt::Debug for SimulationConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulationConfig")
            .field("copies", &self.copies)
            .field("master_seed", &self.master_seed)
            .field("mean", &self.mean.as_ref().map(|_| "<fn>"))
            .field("target_variance", &self.target_variance)
            .finish()
    }
}

impl SimulationConfig {
    pub fn new(copies: usize, master_seed: u64) -> Result<Self> {
        if copies == 0 {
            return Err(Error::invalid("copy count L must be at least 1"));
        }
        Ok(SimulationConfig {
            copies,
            master_seed,
            mean: None,
            target_variance: None,
        })
    }

    pub fn with_mean(mut self, mean: PointFn) -> Self {
        self.mean = Some(mean);
        self
    }

    pub fn with_constant_mean(self, mean: f64) -> Self {
        self.with_mean(Arc::new(move |_| mean))
    }

    /// Zero is allowed and removes the fluctuation entirely.
    pub fn with_target_variance(mut self, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(format!(
                "target variance must be nonnegative, got {variance}"
            )));
        }
        self.target_variance = Some(variance);
        Ok(self)
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn target_variance(&self) -> Option<f64> {
        self.target_variance
    }

    pub fn mean_at(&self, x: &SpherePoint) -> f64 {
        self.mean.as_ref().map_or(0.0, |m| m(x))
    }
}

/// The `L` waves of one ensemble draw. Waves depend only on the importance
/// distribution and the seed, so one realization can be evaluated for any
/// sequence at any set of points.
#[derive(Debug, Clone)]
pub struct Realization {
    waves: Vec<LegendreWave>,
    ln_a0: f64,
    table: LegendreTable,
}

impl Realization {
    /// Copy `l` (1-based) draws from stream `(master_seed, l)`.
    pub fn draw(copies: usize, master_seed: u64, dist: &ImportanceDistribution) -> Result<Self> {
        if copies == 0 {
            return Err(Error::invalid("copy count L must be at least 1"));
        }
        let waves = (1..=copies as u64)
            .map(|l| LegendreWave::draw(dist, &mut RngStream::new(master_seed, l).rng()))
            .collect();
        Ok(Self::from_waves(waves, dist))
    }

    pub fn from_waves(waves: Vec<LegendreWave>, dist: &ImportanceDistribution) -> Self {
        let top = waves.iter().map(|w| w.degree).max().unwrap_or(0);
        Realization {
            waves,
            ln_a0: dist.ln_pmf(0),
            table: LegendreTable::new(top),
        }
    }

    pub fn waves(&self) -> &[LegendreWave] {
        &self.waves
    }

    /// `L^(-1/2) sum_l (Z_l(x) - sqrt(a_0 b_0(x)))` at each point.
    pub fn fluctuation<S: AdaptiveSequence + ?Sized>(&self, seq: &S, points: &[SpherePoint]) -> Vec<f64> {
        let degrees: Vec<usize> = self.waves.iter().map(|w| w.degree).collect();
        let dirs: Vec<[f64; 3]> = self.waves.iter().map(|w| w.direction.unit_vector()).collect();
        let norm = (self.waves.len() as f64).sqrt().recip();
        let a0 = self.ln_a0.exp();
        points
            .par_chunks(POINT_CHUNK)
            .flat_map_iter(|chunk| {
                let mut b = vec![0.0; degrees.len()];
                let mut z = vec![0.0; degrees.len()];
                let mut b0 = [0.0];
                chunk
                    .iter()
                    .map(|x| {
                        seq.coefficients_for(&degrees, x, &mut b);
                        seq.coefficients_for(&[0], x, &mut b0);
                        let centre = (a0 * b0[0]).sqrt();
                        let xu = x.unit_vector();
                        for (k, wave) in self.waves.iter().enumerate() {
                            let t = dot(&dirs[k], &xu).clamp(-1.0, 1.0);
                            let p = if b[k] == 0.0 { 0.0 } else { self.table.eval(wave.degree, t) };
                            z[k] = wave.value(b[k], p) - centre;
                        }
                        pairwise_sum(&z) * norm
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }
}

/// Tree summation; the split points depend only on the length, so the
/// result is reproducible.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (l, r) = v.split_at(v.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// `mean(x) + L^(-1/2) sum_l (Z_l(x) - sqrt(a_0 b_0(x)))` at arbitrary points.
/// With a target variance the sequence is first rescaled to it.
pub fn simulate_at<S: AdaptiveSequence + ?Sized>(
    config: &SimulationConfig,
    seq: &S,
    dist: &ImportanceDistribution,
    points: &[SpherePoint],
) -> Result<Vec<f64>> {
    check_support(seq, dist)?;
    let real = Realization::draw(config.copies, config.master_seed, dist)?;
    let fluct = match config.target_variance {
        Some(0.0) => vec![0.0; points.len()],
        Some(v) => {
            let scaled = rescale_to_variance(seq, v)?;
            scaled.validate(points)?;
            real.fluctuation(&scaled, points)
        }
        None => real.fluctuation(seq, points),
    };
    Ok(points
        .iter()
        .zip(fluct)
        .map(|(x, f)| config.mean_at(x) + f)
        .collect())
}

pub fn simulate_ensemble<S: AdaptiveSequence + ?Sized>(
    config: &SimulationConfig,
    seq: &S,
    dist: &ImportanceDistribution,
    grid: &SphereGrid,
) -> Result<SphericalField> {
    let values = simulate_at(config, seq, dist, grid.points())?;
    SphericalField::new(grid.clone(), values)
}
