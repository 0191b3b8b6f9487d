//! Points, grids and random-number streams on the unit sphere.
//!
//! Angles follow the usual physics convention: the polar angle is measured
//! from the north pole `(0, 0, 1)` and lies in `[0, pi]`, the azimuth is
//! measured from the positive x axis towards the positive y axis and lies in
//! `[0, 2 pi)`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A location on the unit sphere, kept in both angular and Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    unit: [f64; 3],
    polar: f64,
    azimuth: f64,
}

impl SpherePoint {
    pub const NORTH_POLE: SpherePoint = SpherePoint {
        unit: [0.0, 0.0, 1.0],
        polar: 0.0,
        azimuth: 0.0,
    };

    pub const SOUTH_POLE: SpherePoint = SpherePoint {
        unit: [0.0, 0.0, -1.0],
        polar: PI,
        azimuth: 0.0,
    };

    /// Builds a point from polar angle in `[0, pi]` and any azimuth, which is
    /// wrapped into `[0, 2 pi)`.
    pub fn from_angles(polar: f64, azimuth: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&polar) || !azimuth.is_finite() {
            return Err(Error::invalid(format!(
                "polar angle {polar} outside [0, pi] or non-finite azimuth {azimuth}"
            )));
        }
        Ok(Self::from_angles_unchecked(polar, azimuth))
    }

    pub(crate) fn from_angles_unchecked(polar: f64, azimuth: f64) -> Self {
        let azimuth = wrap_azimuth(azimuth);
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        SpherePoint {
            unit: [sp * ca, sp * sa, cp],
            polar,
            azimuth,
        }
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid(format!(
                "cannot project {v:?} onto the sphere"
            )));
        }
        let unit = [v[0] / norm, v[1] / norm, v[2] / norm];
        let polar = unit[2].clamp(-1.0, 1.0).acos();
        let azimuth = wrap_azimuth(unit[1].atan2(unit[0]));
        // Recompute the vector from the angles so both forms agree exactly.
        Ok(Self::from_angles_unchecked(polar, azimuth))
    }

    /// Latitude/longitude in degrees, as used by elevation grids.
    pub fn from_lat_lon_deg(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !lon.is_finite() {
            return Err(Error::invalid(format!(
                "latitude {lat} outside [-90, 90] or non-finite longitude {lon}"
            )));
        }
        Ok(Self::from_angles_unchecked(
            (90.0 - lat).to_radians().clamp(0.0, PI),
            lon.to_radians(),
        ))
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        self.unit
    }

    pub fn polar(&self) -> f64 {
        self.polar
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    /// `cos(polar)`, which equals `sin(latitude)`.
    pub fn cos_polar(&self) -> f64 {
        self.unit[2]
    }

    pub fn latitude_deg(&self) -> f64 {
        90.0 - self.polar.to_degrees()
    }

    /// Longitude in `[-180, 180)`.
    pub fn longitude_deg(&self) -> f64 {
        let lon = self.azimuth.to_degrees();
        if lon >= 180.0 {
            lon - 360.0
        } else {
            lon
        }
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot(&self.unit, &other.unit)
    }

    pub fn antipode(&self) -> SpherePoint {
        SpherePoint::from_angles_unchecked(PI - self.polar, self.azimuth + PI)
    }
}

fn wrap_azimuth(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

#[inline]
pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Great-circle angle between two points, in `[0, pi]`.
pub fn geodesic_distance(x1: &SpherePoint, x2: &SpherePoint) -> f64 {
    x1.dot(x2).clamp(-1.0, 1.0).acos()
}

/// Draws a point uniformly with respect to surface measure.
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> SpherePoint {
    // cos(polar) ~ U(-1, 1) and azimuth ~ U(0, 2 pi) is exact for the sphere.
    let z: f64 = rng.random_range(-1.0..=1.0);
    let azimuth: f64 = rng.random_range(0.0..TAU);
    SpherePoint::from_angles_unchecked(z.acos(), azimuth)
}

/// Structured polar-by-azimuth grid stored row-major (polar rows outermost).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    polar_axis: Vec<f64>,
    azimuth_axis: Vec<f64>,
    points: Vec<SpherePoint>,
}

impl SphereGrid {
    /// Cell-centred polar rows `(i + 1/2) pi / n_polar` and azimuth columns
    /// `2 pi j / n_azimuth`.
    pub fn regular(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar < 2 || n_azimuth < 1 {
            return Err(Error::invalid(format!(
                "grid needs n_polar >= 2 and n_azimuth >= 1, got {n_polar} x {n_azimuth}"
            )));
        }
        let polar = (0..n_polar)
            .map(|i| (i as f64 + 0.5) * PI / n_polar as f64)
            .collect();
        let azimuth = (0..n_azimuth)
            .map(|j| TAU * j as f64 / n_azimuth as f64)
            .collect();
        Self::from_axes(polar, azimuth)
    }

    /// Grid from explicit axes. Both must be strictly increasing, polar
    /// values within `[0, pi]` and azimuths within `[0, 2 pi)`.
    pub fn from_axes(polar_axis: Vec<f64>, azimuth_axis: Vec<f64>) -> Result<Self> {
        if polar_axis.is_empty() || azimuth_axis.is_empty() {
            return Err(Error::invalid("grid axes must be nonempty"));
        }
        if !strictly_increasing(&polar_axis) || !strictly_increasing(&azimuth_axis) {
            return Err(Error::invalid("grid axes must be strictly increasing"));
        }
        if polar_axis[0] < 0.0 || polar_axis[polar_axis.len() - 1] > PI {
            return Err(Error::invalid("polar axis must lie in [0, pi]"));
        }
        if azimuth_axis[0] < 0.0 || azimuth_axis[azimuth_axis.len() - 1] >= TAU {
            return Err(Error::invalid("azimuth axis must lie in [0, 2 pi)"));
        }
        let points = polar_axis
            .iter()
            .flat_map(|&p| {
                azimuth_axis
                    .iter()
                    .map(move |&a| SpherePoint::from_angles_unchecked(p, a))
            })
            .collect();
        Ok(SphereGrid {
            polar_axis,
            azimuth_axis,
            points,
        })
    }

    pub fn n_polar(&self) -> usize {
        self.polar_axis.len()
    }

    pub fn n_azimuth(&self) -> usize {
        self.azimuth_axis.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn polar_axis(&self) -> &[f64] {
        &self.polar_axis
    }

    pub fn azimuth_axis(&self) -> &[f64] {
        &self.azimuth_axis
    }

    pub fn points(&self) -> &[SpherePoint] {
        &self.points
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.azimuth_axis.len() + col
    }
}

/// Convenience wrapper for [`SphereGrid::regular`].
pub fn make_grid(n_polar: usize, n_azimuth: usize) -> Result<SphereGrid> {
    SphereGrid::regular(n_polar, n_azimuth)
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Counter-style random substream: `(master_seed, stream_index)` fully
/// determines the sequence of draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        RngStream {
            master_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: [f64; 3]) -> f64 {
        dot(&v, &v).sqrt()
    }

    #[test]
    fn distance_special_cases() {
        let x = SpherePoint::from_angles(1.1, 2.3).unwrap();
        assert_eq!(geodesic_distance(&x, &x), 0.0);
        assert!((geodesic_distance(&x, &x.antipode()) - PI).abs() < 1e-7);
        let e1 = SpherePoint::from_vector([1.0, 0.0, 0.0]).unwrap();
        let e2 = SpherePoint::from_vector([0.0, 1.0, 0.0]).unwrap();
        assert!((geodesic_distance(&e1, &e2) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn antipode_distance_is_pi_exactly_for_poles() {
        let d = geodesic_distance(&SpherePoint::NORTH_POLE, &SpherePoint::SOUTH_POLE);
        assert_eq!(d, PI);
    }

    #[test]
    fn small_grid_layout() {
        let g = make_grid(2, 4).unwrap();
        assert_eq!(g.len(), 8);
        assert!((g.polar_axis()[0] - PI / 4.0).abs() < 1e-15);
        assert!((g.polar_axis()[1] - 3.0 * PI / 4.0).abs() < 1e-15);
        assert!((g.points()[g.index(1, 2)].azimuth() - PI).abs() < 1e-15);
        for p in g.points() {
            assert!((norm(p.unit_vector()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_degenerate_counts() {
        assert!(make_grid(0, 4).is_err());
        assert!(make_grid(1, 4).is_err());
        assert!(make_grid(3, 0).is_err());
    }

    #[test]
    fn grid_reduced_scale_counts() {
        // Same call shape as the 2000 x 1000 preset, a hundred times smaller.
        let g = make_grid(200, 100).unwrap();
        assert_eq!(g.len(), 20_000);
        assert_eq!(g.n_polar() * g.n_azimuth(), g.len());
    }

    #[test]
    fn uniform_sampling_moments() {
        let mut rng = RngStream::new(11, 0).rng();
        let n = 1_000_000;
        let mut mean = [0.0; 3];
        let mut north = 0usize;
        for _ in 0..n {
            let p = sample_uniform(&mut rng);
            let v = p.unit_vector();
            assert!((norm(v) - 1.0).abs() < 1e-12);
            for k in 0..3 {
                mean[k] += v[k];
            }
            if p.cos_polar() > 0.0 {
                north += 1;
            }
        }
        for m in mean {
            assert!((m / n as f64).abs() < 0.005);
        }
        assert!((north as f64 / n as f64 - 0.5).abs() < 0.002);
    }

    #[test]
    fn streams_reproduce_and_differ() {
        let draw = |s: RngStream| {
            let mut rng = s.rng();
            (0..8).map(|_| sample_uniform(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(RngStream::new(5, 3)), draw(RngStream::new(5, 3)));
        assert_ne!(draw(RngStream::new(5, 3)), draw(RngStream::new(5, 4)));
        assert_ne!(draw(RngStream::new(5, 3)), draw(RngStream::new(6, 3)));
    }

    #[test]
    fn lat_lon_round_trip() {
        let p = SpherePoint::from_lat_lon_deg(-30.0, -75.0).unwrap();
        assert!((p.latitude_deg() + 30.0).abs() < 1e-12);
        assert!((p.longitude_deg() + 75.0).abs() < 1e-12);
        assert!((p.cos_polar() - (-30f64).to_radians().sin()).abs() < 1e-15);
    }

    fn point() -> impl Strategy<Value = SpherePoint> {
        (-1.0f64..=1.0, 0.0f64..TAU)
            .prop_map(|(z, a)| SpherePoint::from_angles(z.acos(), a).unwrap())
    }

    proptest! {
        #[test]
        fn point_invariants(p in point()) {
            let v = p.unit_vector();
            prop_assert!((norm(v) - 1.0).abs() < 1e-12);
            let (sp, cp) = p.polar().sin_cos();
            prop_assert!((v[0] - sp * p.azimuth().cos()).abs() < 1e-12);
            prop_assert!((v[1] - sp * p.azimuth().sin()).abs() < 1e-12);
            prop_assert!((v[2] - cp).abs() < 1e-12);
            let q = SpherePoint::from_vector([3.0 * v[0], 3.0 * v[1], 3.0 * v[2]]).unwrap();
            prop_assert!(geodesic_distance(&p, &q) < 1e-7);
        }

        #[test]
        fn triangle_inequality(a in point(), b in point(), c in point()) {
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-10);
            prop_assert_eq!(ab, geodesic_distance(&b, &a));
        }
    }
}
