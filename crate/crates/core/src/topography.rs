//! Synthetic planetary topography: a large-scale mean fitted to an
//! elevation grid by spherical-harmonic regression, plus a multifractal
//! fluctuation whose roughness differs between land and sea.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::SphericalField;
use crate::fractal::hausdorff_to_nu;
use crate::legendre::assoc_column;
use crate::schoenberg::{
    legendre_matern_truncation, rescale_to_variance, AdaptiveLegendreMatern, AdaptiveSequence,
    LegendreMaternParams,
};
use crate::simulator::{
    check_support, simulate_ensemble, ImportanceDistribution, Realization, SimulationConfig,
    DEFAULT_NB_FAILURES, DEFAULT_NB_SUCCESS,
};
use crate::sphere::{SphereGrid, SpherePoint};

pub const LAND_HAUSDORFF: f64 = 2.46;
pub const SEA_HAUSDORFF: f64 = 2.68;
pub const EARTH_TAU_SQ: f64 = 0.1;
/// Standard deviation of the simulated fluctuation, in meters.
pub const EARTH_STD_M: f64 = 2640.0;
pub const EARTH_MEAN_DEGREE: usize = 60;
pub const EARTH_GRID_STEP_DEG: f64 = 1.0;

pub const ELEVATION_HEADER: [&str; 4] = ["lon_deg", "lat_deg", "elev_m", "land"];

/// Elevations on a rectangular longitude/latitude grid, stored lat-major
/// (latitude rows, longitude columns), both axes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    lons: Vec<f64>,
    lats: Vec<f64>,
    elevations: Vec<f64>,
    land: Vec<bool>,
}

impl ElevationGrid {
    /// `land` defaults to `elevation >= 0`.
    pub fn new(
        lons: Vec<f64>,
        lats: Vec<f64>,
        elevations: Vec<f64>,
        land: Option<Vec<bool>>,
    ) -> Result<Self> {
        let increasing = |v: &[f64]| v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1]);
        if lons.is_empty() || lats.is_empty() || !increasing(&lons) || !increasing(&lats) {
            return Err(Error::invalid("longitude and latitude axes must be nonempty and strictly increasing"));
        }
        if lons[0] < -180.0 || lons[lons.len() - 1] >= 180.0 {
            return Err(Error::invalid("longitudes must lie in [-180, 180)"));
        }
        if lats[0] < -90.0 || lats[lats.len() - 1] > 90.0 {
            return Err(Error::invalid("latitudes must lie in [-90, 90]"));
        }
        let n = lons.len() * lats.len();
        if elevations.len() != n {
            return Err(Error::invalid(format!(
                "{} elevations for a {} x {} grid",
                elevations.len(),
                lats.len(),
                lons.len()
            )));
        }
        if let Some(i) = elevations.iter().position(|e| !e.is_finite()) {
            return Err(Error::invalid(format!("non-finite elevation at index {i}")));
        }
        let land = match land {
            Some(m) if m.len() == n => m,
            Some(m) => {
                return Err(Error::invalid(format!("{} mask entries for {n} cells", m.len())))
            }
            None => elevations.iter().map(|&e| e >= 0.0).collect(),
        };
        Ok(ElevationGrid {
            lons,
            lats,
            elevations,
            land,
        })
    }

    pub fn lons(&self) -> &[f64] {
        &self.lons
    }

    pub fn lats(&self) -> &[f64] {
        &self.lats
    }

    pub fn elevations(&self) -> &[f64] {
        &self.elevations
    }

    pub fn land(&self) -> &[bool] {
        &self.land
    }

    pub fn len(&self) -> usize {
        self.elevations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elevations.is_empty()
    }

    pub fn elevation(&self, lat_index: usize, lon_index: usize) -> f64 {
        self.elevations[lat_index * self.lons.len() + lon_index]
    }

    /// Cell centres in storage order.
    pub fn points(&self) -> Vec<SpherePoint> {
        self.lats
            .iter()
            .flat_map(|&lat| {
                self.lons
                    .iter()
                    .map(move |&lon| SpherePoint::from_lat_lon_deg(lat, lon).expect("validated axes"))
            })
            .collect()
    }

    /// The same nodes as a [`SphereGrid`]: polar rows run north to south and
    /// azimuths from 0 eastward, so the storage order differs.
    pub fn sphere_grid(&self) -> Result<SphereGrid> {
        let polar = self.lats.iter().rev().map(|lat| (90.0 - lat).to_radians()).collect();
        let azimuth = self.lon_order().iter().map(|&j| azimuth_of(self.lons[j])).collect();
        SphereGrid::from_axes(polar, azimuth)
    }

    /// Longitude indices sorted by azimuth in `[0, 2 pi)`.
    fn lon_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.lons.len()).collect();
        order.sort_by(|&a, &b| azimuth_of(self.lons[a]).total_cmp(&azimuth_of(self.lons[b])));
        order
    }

    /// Reorders values from [`ElevationGrid::sphere_grid`] order into
    /// storage order.
    pub fn values_from_field(&self, field: &SphericalField) -> Result<Vec<f64>> {
        if field.values().len() != self.len() {
            return Err(Error::invalid("field does not match the elevation grid"));
        }
        let order = self.lon_order();
        let (n_lat, n_lon) = (self.lats.len(), self.lons.len());
        let mut out = vec![0.0; self.len()];
        for r in 0..n_lat {
            for (c, &j) in order.iter().enumerate() {
                out[(n_lat - 1 - r) * n_lon + j] = field.values()[r * n_lon + c];
            }
        }
        Ok(out)
    }

    /// Grid with the same axes and mask but new elevations.
    pub fn with_elevations(&self, elevations: Vec<f64>) -> Result<Self> {
        ElevationGrid::new(self.lons.clone(), self.lats.clone(), elevations, Some(self.land.clone()))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", ELEVATION_HEADER.join(","))?;
        for (i, &lat) in self.lats.iter().enumerate() {
            for (j, &lon) in self.lons.iter().enumerate() {
                let k = i * self.lons.len() + j;
                writeln!(w, "{lon},{lat},{},{}", self.elevations[k], u8::from(self.land[k]))?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Mask lookup at the nearest cell centre.
    pub fn land_mask(&self) -> LandMask {
        LandMask {
            lats: self.lats.clone(),
            lons: self.lons.clone(),
            land: self.land.clone(),
        }
    }
}

fn azimuth_of(lon_deg: f64) -> f64 {
    let a = lon_deg.to_radians();
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Parses `lon_deg,lat_deg,elev_m[,land]` rows covering a full rectangular
/// grid in any order.
pub fn ingest_grid<R: Read>(source: R, source_name: &str) -> Result<ElevationGrid> {
    let err = |line: u64, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_mask = match names.as_slice() {
        ["lon_deg", "lat_deg", "elev_m"] => false,
        ["lon_deg", "lat_deg", "elev_m", "land"] => true,
        _ => {
            return Err(err(
                1,
                format!("expected header lon_deg,lat_deg,elev_m[,land], found {}", names.join(",")),
            ))
        }
    };
    let mut cells: HashMap<(u64, u64), (f64, Option<bool>, u64)> = HashMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(err(line, format!("expected {} fields, found {}", names.len(), rec.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let v: f64 = rec[k]
                .parse()
                .map_err(|e| err(line, format!("bad {} {:?}: {e}", names[k], &rec[k])))?;
            if v.is_nan() || v.is_infinite() {
                return Err(err(line, format!("{} is not finite", names[k])));
            }
            Ok(v)
        };
        let (lon, lat, elev) = (num(0)?, num(1)?, num(2)?);
        let mask = if has_mask {
            Some(match &rec[3] {
                "1" | "true" | "TRUE" | "True" => true,
                "0" | "false" | "FALSE" | "False" => false,
                other => return Err(err(line, format!("bad land flag {other:?}"))),
            })
        } else {
            None
        };
        let key = (lon.to_bits(), lat.to_bits());
        if let Some(prev) = cells.insert(key, (elev, mask, line)) {
            return Err(err(
                line,
                format!("duplicate cell lon={lon}, lat={lat} (first seen on line {})", prev.2),
            ));
        }
    }
    if cells.is_empty() {
        return Err(err(2, "no data rows".into()));
    }
    let axis = |pick: fn(&(u64, u64)) -> u64| {
        let mut v: Vec<f64> = cells.keys().map(|k| f64::from_bits(pick(k))).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let lons = axis(|k| k.0);
    let lats = axis(|k| k.1);
    let mut elevations = Vec::with_capacity(lons.len() * lats.len());
    let mut land = Vec::with_capacity(lons.len() * lats.len());
    for &lat in &lats {
        for &lon in &lons {
            let (e, m, _) = cells.get(&(lon.to_bits(), lat.to_bits())).ok_or_else(|| Error::Parse {
                source_name: source_name.to_string(),
                line: 0,
                message: format!("missing cell lon={lon}, lat={lat}"),
            })?;
            elevations.push(*e);
            land.push(m.unwrap_or(*e >= 0.0));
        }
    }
    ElevationGrid::new(lons, lats, elevations, Some(land))
}

/// Nearest-cell land/sea lookup for arbitrary points.
#[derive(Debug, Clone)]
pub struct LandMask {
    lats: Vec<f64>,
    lons: Vec<f64>,
    land: Vec<bool>,
}

impl LandMask {
    pub fn is_land(&self, x: &SpherePoint) -> bool {
        let i = nearest(&self.lats, x.latitude_deg(), None);
        let j = nearest(&self.lons, x.longitude_deg(), Some(360.0));
        self.land[i * self.lons.len() + j]
    }
}

fn nearest(axis: &[f64], v: f64, period: Option<f64>) -> usize {
    let dist = |a: f64| {
        let d = (a - v).abs();
        match period {
            Some(p) => d.min(p - d % p),
            None => d,
        }
    };
    (0..axis.len())
        .min_by(|&a, &b| dist(axis[a]).total_cmp(&dist(axis[b])))
        .unwrap_or(0)
}

/// `nu = 3 - eta0` with the land and sea Hausdorff dimensions.
pub fn dichotomous_nu(land: bool) -> f64 {
    let eta = if land { LAND_HAUSDORFF } else { SEA_HAUSDORFF };
    hausdorff_to_nu(eta).expect("constant dimensions are valid")
}

/// Linear combination of `P_n^m(sin lat) cos(m lon)` and
/// `P_n^m(sin lat) sin(m lon)` for `0 <= m <= n <= n_max`, using the
/// associated Legendre functions of [`crate::legendre`].
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicRegressionModel {
    n_max: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

fn tri(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Argument of the associated Legendre functions: `sin(latitude)`, which is
/// `cos(polar)`.
pub fn regressor_argument(x: &SpherePoint) -> f64 {
    x.cos_polar()
}

impl HarmonicRegressionModel {
    pub fn zeros(n_max: usize) -> Self {
        let k = tri(n_max, n_max) + 1;
        HarmonicRegressionModel {
            n_max,
            cos: vec![0.0; k],
            sin: vec![0.0; k],
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn cos_coefficient(&self, n: usize, m: usize) -> f64 {
        self.cos[tri(n, m)]
    }

    pub fn sin_coefficient(&self, n: usize, m: usize) -> f64 {
        self.sin[tri(n, m)]
    }

    pub fn set(&mut self, n: usize, m: usize, cos: f64, sin: f64) -> Result<()> {
        if m > n || n > self.n_max {
            return Err(Error::invalid(format!("no coefficient ({n}, {m}) below degree {}", self.n_max)));
        }
        if m == 0 && sin != 0.0 {
            return Err(Error::invalid("the order-0 sine coefficient is fixed at 0"));
        }
        self.cos[tri(n, m)] = cos;
        self.sin[tri(n, m)] = sin;
        Ok(())
    }

    /// Free parameters, `(n_max + 1)^2` of them, ordered by degree, then
    /// order, cosine before sine.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity((self.n_max + 1).pow(2));
        for n in 0..=self.n_max {
            for m in 0..=n {
                out.push(self.cos[tri(n, m)]);
                if m > 0 {
                    out.push(self.sin[tri(n, m)]);
                }
            }
        }
        out
    }

    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.n_max != other.n_max {
            return Err(Error::invalid("models have different degree limits"));
        }
        Ok(HarmonicRegressionModel {
            n_max: self.n_max,
            cos: self.cos.iter().zip(&other.cos).map(|(a, b)| a + b).collect(),
            sin: self.sin.iter().zip(&other.sin).map(|(a, b)| a + b).collect(),
        })
    }
}

pub fn evaluate_mean(model: &HarmonicRegressionModel, x: &SpherePoint) -> f64 {
    let t = regressor_argument(x);
    let lon = x.azimuth();
    let mut col = vec![0.0; model.n_max + 1];
    let mut total = 0.0;
    for m in 0..=model.n_max {
        assoc_column(m, t, &mut col);
        let (s, c) = (m as f64 * lon).sin_cos();
        for (n, p) in col.iter().enumerate().skip(m) {
            total += p * (model.cos[tri(n, m)] * c + model.sin[tri(n, m)] * s);
        }
    }
    total
}

/// Regressor row for one point, in [`HarmonicRegressionModel::parameters`]
/// order.
pub fn regressor_row(n_max: usize, x: &SpherePoint) -> Vec<f64> {
    let t = regressor_argument(x);
    let cols: Vec<Vec<f64>> = (0..=n_max)
        .map(|m| {
            let mut c = vec![0.0; n_max + 1];
            assoc_column(m, t, &mut c);
            c
        })
        .collect();
    let mut row = Vec::with_capacity((n_max + 1).pow(2));
    for n in 0..=n_max {
        for m in 0..=n {
            let (s, c) = (m as f64 * x.azimuth()).sin_cos();
            row.push(cols[m][n] * c);
            if m > 0 {
                row.push(cols[m][n] * s);
            }
        }
    }
    row
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    /// Weight rows by the cosine of latitude.
    pub area_weighted: bool,
    /// Always use the dense factorization, even on uniform longitude grids.
    pub force_dense: bool,
}

/// Least-squares fit of the harmonic mean up to degree `n_max`.
pub fn fit_mean(grid: &ElevationGrid, n_max: usize) -> Result<HarmonicRegressionModel> {
    fit_mean_with(grid, n_max, FitOptions::default())
}

/// Householder QR with column equilibration. On a uniform full-circle
/// longitude grid with more than `2 n_max` columns the trigonometric columns
/// are discretely orthogonal, and the problem splits into one small
/// latitude fit per order and phase.
pub fn fit_mean_with(
    grid: &ElevationGrid,
    n_max: usize,
    options: FitOptions,
) -> Result<HarmonicRegressionModel> {
    let k = (n_max + 1).pow(2);
    if grid.len() < k {
        return Err(Error::RankDeficient {
            columns: k,
            rank: grid.len(),
            hint: format!(
                "{} observations cannot determine {k} coefficients; lower the degree or refine the grid",
                grid.len()
            ),
        });
    }
    let weights: Vec<f64> = grid
        .lats
        .iter()
        .map(|lat| {
            if options.area_weighted {
                lat.to_radians().cos().max(0.0).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    if !options.force_dense && uniform_longitudes(&grid.lons) && grid.lons.len() > 2 * n_max {
        fit_separable(grid, n_max, &weights)
    } else {
        fit_dense(grid, n_max, &weights)
    }
}

fn uniform_longitudes(lons: &[f64]) -> bool {
    let step = 360.0 / lons.len() as f64;
    lons.iter()
        .enumerate()
        .all(|(j, &l)| (l - (lons[0] + j as f64 * step)).abs() < 1e-9)
}

/// Solves `min |A c - b|` for a tall `A` by QR after scaling columns to unit
/// norm.
fn least_squares(mut a: DMatrix<f64>, b: DVector<f64>, context: &str) -> Result<Vec<f64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::RankDeficient {
            columns: cols,
            rank: rows,
            hint: format!("{context}: {rows} rows for {cols} columns; grid too coarse for this degree"),
        });
    }
    let scale: Vec<f64> = (0..cols).map(|j| a.column(j).norm()).collect();
    for (j, &s) in scale.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(j).scale_mut(s.recip());
        }
    }
    let qr = a.qr();
    let r = qr.r();
    let top = (0..cols).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let rank = (0..cols).filter(|&j| r[(j, j)].abs() > 1e-10 * top).count();
    if rank < cols || scale.contains(&0.0) {
        return Err(Error::RankDeficient {
            columns: cols,
            rank,
            hint: format!("{context}: grid too coarse for this degree"),
        });
    }
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    let mut x = vec![0.0; cols];
    for i in (0..cols).rev() {
        let mut acc = qtb[i];
        for j in i + 1..cols {
            acc -= r[(i, j)] * x[j];
        }
        x[i] = acc / r[(i, i)];
    }
    Ok(x.iter().zip(&scale).map(|(v, s)| v / s).collect())
}

fn fit_dense(grid: &ElevationGrid, n_max: usize, weights: &[f64]) -> Result<HarmonicRegressionModel> {
    let points = grid.points();
    let k = (n_max + 1).pow(2);
    let n_lon = grid.lons.len();
    let mut a = DMatrix::<f64>::zeros(points.len(), k);
    let mut b = DVector::<f64>::zeros(points.len());
    for (i, x) in points.iter().enumerate() {
        let w = weights[i / n_lon];
        for (j, v) in regressor_row(n_max, x).into_iter().enumerate() {
            a[(i, j)] = w * v;
        }
        b[i] = w * grid.elevations[i];
    }
    let params = least_squares(a, b, "harmonic regression")?;
    let mut model = HarmonicRegressionModel::zeros(n_max);
    let mut it = params.into_iter();
    for n in 0..=n_max {
        for m in 0..=n {
            model.cos[tri(n, m)] = it.next().expect("parameter count");
            if m > 0 {
                model.sin[tri(n, m)] = it.next().expect("parameter count");
            }
        }
    }
    Ok(model)
}

fn fit_separable(grid: &ElevationGrid, n_max: usize, weights: &[f64]) -> Result<HarmonicRegressionModel> {
    let n_lat = grid.lats.len();
    let n_lon = grid.lons.len();
    let lon_rad: Vec<f64> = grid.lons.iter().map(|l| l.to_radians()).collect();
    let ts: Vec<f64> = grid.lats.iter().map(|l| l.to_radians().sin()).collect();
    let mut model = HarmonicRegressionModel::zeros(n_max);
    let mut col = vec![0.0; n_max + 1];
    for m in 0..=n_max {
        let norm = if m == 0 { n_lon as f64 } else { n_lon as f64 / 2.0 };
        let width = n_max - m + 1;
        let mut a = DMatrix::<f64>::zeros(n_lat, width);
        for (i, &t) in ts.iter().enumerate() {
            assoc_column(m, t, &mut col);
            for n in m..=n_max {
                a[(i, n - m)] = weights[i] * col[n];
            }
        }
        let project = |f: fn(f64) -> f64| {
            DVector::from_iterator(
                n_lat,
                (0..n_lat).map(|i| {
                    let row = &grid.elevations[i * n_lon..(i + 1) * n_lon];
                    let s: f64 = row
                        .iter()
                        .zip(&lon_rad)
                        .map(|(y, l)| y * f(m as f64 * l))
                        .sum();
                    weights[i] * s / norm
                }),
            )
        };
        let context = format!("order {m}");
        let c = least_squares(a.clone(), project(f64::cos), &context)?;
        for (d, v) in c.into_iter().enumerate() {
            model.cos[tri(m + d, m)] = v;
        }
        if m > 0 {
            let s = least_squares(a, project(f64::sin), &context)?;
            for (d, v) in s.into_iter().enumerate() {
                model.sin[tri(m + d, m)] = v;
            }
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthSettings {
    pub n_max_mean: usize,
    pub tau_sq: f64,
    pub hausdorff_land: f64,
    pub hausdorff_sea: f64,
    /// Series truncation; by default chosen for the rougher of the two
    /// smoothness values.
    pub truncation: Option<usize>,
}

impl Default for EarthSettings {
    fn default() -> Self {
        EarthSettings {
            n_max_mean: EARTH_MEAN_DEGREE,
            tau_sq: EARTH_TAU_SQ,
            hausdorff_land: LAND_HAUSDORFF,
            hausdorff_sea: SEA_HAUSDORFF,
            truncation: None,
        }
    }
}

/// Fitted mean plus the land/sea adaptive Legendre-Matern sequence, with
/// degree 0 removed because the mean already carries the global level.
pub struct EarthModel {
    grid: ElevationGrid,
    mean: Arc<HarmonicRegressionModel>,
    sequence: AdaptiveLegendreMatern,
}

impl EarthModel {
    pub fn new(grid: &ElevationGrid, settings: &EarthSettings) -> Result<Self> {
        let nu_land = hausdorff_to_nu(settings.hausdorff_land)?;
        let nu_sea = hausdorff_to_nu(settings.hausdorff_sea)?;
        let mean = fit_mean(grid, settings.n_max_mean)?;
        let mask = grid.land_mask();
        let nu = Arc::new(move |x: &SpherePoint| if mask.is_land(x) { nu_land } else { nu_sea });
        let truncation = match settings.truncation {
            Some(n) => n,
            None => legendre_matern_truncation(settings.tau_sq, nu_land.min(nu_sea))?,
        };
        let sequence = AdaptiveLegendreMatern::new(
            LegendreMaternParams::adaptive(settings.tau_sq, nu)?,
            truncation,
        )?
        .without_degree_zero();
        Ok(EarthModel {
            grid: grid.clone(),
            mean: Arc::new(mean),
            sequence,
        })
    }

    pub fn grid(&self) -> &ElevationGrid {
        &self.grid
    }

    pub fn mean_model(&self) -> &HarmonicRegressionModel {
        &self.mean
    }

    pub fn sequence(&self) -> &AdaptiveLegendreMatern {
        &self.sequence
    }

    pub fn mean_at(&self, x: &SpherePoint) -> f64 {
        evaluate_mean(&self.mean, x)
    }

    /// Default importance distribution: the negative binomial preset capped
    /// at the series truncation.
    pub fn default_importance(&self) -> Result<ImportanceDistribution> {
        ImportanceDistribution::negative_binomial(
            DEFAULT_NB_FAILURES,
            DEFAULT_NB_SUCCESS,
            self.sequence.truncation(),
        )
    }

    /// Mean plus fluctuation on the grid's nodes, in [`ElevationGrid::sphere_grid`]
    /// order. The fluctuation variance defaults to `EARTH_STD_M^2`.
    pub fn simulate(&self, config: &SimulationConfig, dist: &ImportanceDistribution) -> Result<SphericalField> {
        let mean = self.mean.clone();
        let mut cfg = config.clone().with_mean(Arc::new(move |x| evaluate_mean(&mean, x)));
        if cfg.target_variance().is_none() {
            cfg = cfg.with_target_variance(EARTH_STD_M * EARTH_STD_M)?;
        }
        simulate_ensemble(&cfg, &self.sequence, dist, &self.grid.sphere_grid()?)
    }

    /// Fluctuation of a given realization at arbitrary points, rescaled to
    /// `variance`.
    pub fn fluctuation(
        &self,
        realization: &Realization,
        dist: &ImportanceDistribution,
        variance: f64,
        points: &[SpherePoint],
    ) -> Result<Vec<f64>> {
        check_support(&self.sequence, dist)?;
        let scaled = rescale_to_variance(&self.sequence, variance)?;
        scaled.validate(points)?;
        Ok(realization.fluctuation(&scaled, points))
    }
}

/// The Earth pipeline with its presets: mean of degree `n_max_mean`,
/// `tau^2 = 0.1`, fluctuation standard deviation 2640 m unless the config
/// sets a target variance.
pub fn simulate_earth(
    grid: &ElevationGrid,
    config: &SimulationConfig,
    n_max_mean: usize,
) -> Result<SphericalField> {
    let settings = EarthSettings {
        n_max_mean,
        ..Default::default()
    };
    let model = EarthModel::new(grid, &settings)?;
    let dist = model.default_importance()?;
    model.simulate(config, &dist)
}

/// Smooth synthetic elevations on a `step_deg` grid with one continent
/// spanning longitudes `[-150, -30)`. Used as a fixture.
pub fn synthetic_grid(step_deg: f64) -> Result<ElevationGrid> {
    if !(step_deg > 0.0 && (180.0 / step_deg).fract() == 0.0) {
        return Err(Error::invalid(format!("step {step_deg} must divide 180")));
    }
    let n_lon = (360.0 / step_deg) as usize;
    let n_lat = (180.0 / step_deg) as usize;
    let lons: Vec<f64> = (0..n_lon).map(|j| -180.0 + j as f64 * step_deg).collect();
    let lats: Vec<f64> = (0..n_lat).map(|i| -90.0 + (i as f64 + 0.5) * step_deg).collect();
    let mut elev = Vec::with_capacity(n_lon * n_lat);
    for &lat in &lats {
        for &lon in &lons {
            let (phi, lam) = (lat.to_radians(), lon.to_radians());
            let e = if (-150.0..-30.0).contains(&lon) {
                700.0 + 900.0 * phi.cos().powi(2) + 250.0 * (2.0 * lam).sin()
            } else {
                -3900.0 + 600.0 * phi.cos() - 300.0 * (3.0 * lam).cos() * phi.cos()
            };
            elev.push(e);
        }
    }
    ElevationGrid::new(lons, lats, elev, None)
}
