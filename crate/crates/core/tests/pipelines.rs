use std::fs::File;
use std::path::Path;

use spherefield::particle::{build_mesh, clamp_radial, default_clamp, export_mesh, parse_ply};
use spherefield::schoenberg::legendre_matern_truncation;
use spherefield::topography::{ingest_grid, synthetic_grid, EarthModel, EarthSettings};
use spherefield::{
    simulate_earth, simulate_ensemble, ImportanceDistribution, MeshFormat, Scenario, SimulationConfig,
    SphereGrid,
};

fn fixture_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/earth_10deg.csv")
}

#[test]
fn bundled_fixture_matches_its_generator() {
    let bundled = ingest_grid(File::open(fixture_path()).unwrap(), "earth_10deg.csv").unwrap();
    let generated = synthetic_grid(10.0).unwrap();
    assert_eq!(bundled, generated);
    let mut text = Vec::new();
    generated.write_csv(&mut text).unwrap();
    assert_eq!(text, std::fs::read(fixture_path()).unwrap());
}

#[test]
fn earth_output_is_mean_plus_centred_fluctuation() {
    let grid = synthetic_grid(10.0).unwrap();
    let model = EarthModel::new(&grid, &EarthSettings { n_max_mean: 8, ..Default::default() }).unwrap();
    let pts = grid.points();
    let runs = 40;
    let mut averages = Vec::new();
    for r in 0..runs {
        let cfg = SimulationConfig::new(100, 900 + r).unwrap();
        let field = simulate_earth(&grid, &cfg, 8).unwrap();
        let sim = grid.values_from_field(&field).unwrap();
        let avg = sim.iter().zip(&pts).map(|(z, x)| z - model.mean_at(x)).sum::<f64>() / pts.len() as f64;
        averages.push(avg);
    }
    let n = runs as f64;
    let m = averages.iter().sum::<f64>() / n;
    let se = (averages.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!(m.abs() <= 3.0 * se, "grid average {m} with SE {se}");
}

#[test]
fn particle_from_scenario_preset() {
    let n_max = legendre_matern_truncation(0.1, 0.6).unwrap();
    let seq = Scenario::B.sequence(0.1, n_max).unwrap().without_degree_zero();
    let dist = ImportanceDistribution::negative_binomial(1, 0.1, n_max).unwrap();
    let grid = SphereGrid::regular(40, 80).unwrap();
    let cfg = SimulationConfig::new(300, 4)
        .unwrap()
        .with_constant_mean(100.0)
        .with_target_variance(10.0)
        .unwrap();
    let field = simulate_ensemble(&cfg, &seq, &dist, &grid).unwrap();
    let c = default_clamp(&field).unwrap();
    assert!((c - 0.1).abs() < 0.01);
    let radial = clamp_radial(field, c).unwrap();
    let mesh = build_mesh(&radial).unwrap();
    assert!(mesh.is_closed());
    for (x, v) in grid.points().iter().zip(&mesh.vertices) {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let u = x.unit_vector();
        for k in 0..3 {
            assert!((v[k] / r - u[k]).abs() < 1e-12);
        }
    }
    let mut ply = Vec::new();
    export_mesh(&mesh, MeshFormat::Ply, &mut ply).unwrap();
    let back = parse_ply(ply.as_slice(), "mesh").unwrap();
    assert_eq!(back.triangles, mesh.triangles);
    for (a, b) in back.vertices.iter().zip(&mesh.vertices) {
        for k in 0..3 {
            assert_eq!(a[k], b[k]);
        }
    }
}
