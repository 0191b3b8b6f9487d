//! Simulation of anisotropic Gaussian random fields on the unit sphere.
//!
//! Covariances are expanded in Legendre polynomials with location-dependent
//! (adaptive) Schoenberg coefficients, realisations are drawn as averages of
//! random Legendre waves, and the resulting radial functions are turned into
//! star-shaped particle meshes or synthetic planetary topography.

pub mod error;
pub mod field;
pub mod fractal;
pub mod legendre;
pub mod particle;
pub mod quadrature;
pub mod schoenberg;
pub mod simulator;
pub mod sphere;
pub mod topography;

pub use error::{Error, Result};
pub use sphere::{geodesic_distance, make_grid, sample_uniform, RngStream, SphereGrid, SpherePoint};
pub use field::SphericalField;
pub use fractal::{estimate_fractal_index, FractalFit, Scenario};
pub use legendre::{legendre_p, LegendreTable};
pub use particle::{build_mesh, clamp_radial, MeshFormat, ParticleMesh, RadialField};
pub use schoenberg::{
    AdaptiveLegendreMatern, AdaptiveSequence, KernelMixture, LegendreMaternParams, PointFn,
    SchoenbergSequence,
};
pub use simulator::{simulate_ensemble, ImportanceDistribution, Realization, SimulationConfig};
pub use topography::{simulate_earth, EarthModel, EarthSettings, ElevationGrid, HarmonicRegressionModel};
