use std::error::Error as StdError;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use log::info;

use spherefield::field::SphericalField;
use spherefield::fractal::{
    circles_variogram, default_fit_min, empirical_variogram, estimate_fractal_index, integer_lags,
    log_spaced_edges, meridian_circles, Scenario, DEFAULT_FIT_MAX,
};
use spherefield::particle::{build_mesh, clamp_radial, default_clamp, export_mesh, MeshFormat};
use spherefield::schoenberg::{
    covariance_curve, default_inversion_nodes, interpolate_curve, invert_coefficients,
    legendre_matern_truncation, read_covariance_curve, write_covariance_curve, AdaptiveLegendreMatern,
    AdaptiveSequence, LegendreMaternParams, SchoenbergSequence,
};
use spherefield::simulator::{
    simulate_ensemble, ImportanceDistribution, SimulationConfig, DEFAULT_COPIES,
};
use spherefield::topography::{
    ingest_grid, EarthModel, EarthSettings, EARTH_MEAN_DEGREE, EARTH_STD_M, EARTH_TAU_SQ,
    LAND_HAUSDORFF, SEA_HAUSDORFF,
};
use spherefield::{Error, SphereGrid};

type Outcome = Result<(), Box<dyn StdError>>;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate an isotropic Legendre-Matern covariance K(d) on [0, pi].
    Covariance(CovarianceArgs),
    /// Recover Schoenberg coefficients b_n from a covariance.
    Invert(InvertArgs),
    /// Simulate a field on a regular polar/azimuth grid.
    SimulateField(FieldArgs),
    /// Simulate a star-shaped particle and write its surface mesh.
    SimulateParticle(ParticleArgs),
    /// Simulate topography from an elevation grid: harmonic mean plus a
    /// land/sea multifractal fluctuation.
    SimulateEarth(EarthArgs),
    /// Estimate the fractal index and Hausdorff dimension of a field.
    EstimateFractal(EstimateArgs),
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Covariance(a) => covariance(a),
        Command::Invert(a) => invert(a),
        Command::SimulateField(a) => simulate_field(a),
        Command::SimulateParticle(a) => simulate_particle(a),
        Command::SimulateEarth(a) => simulate_earth(a),
        Command::EstimateFractal(a) => estimate_fractal(a),
    }
}

/// Degree distribution of the random waves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Importance {
    NegativeBinomial { r: u32, p: f64 },
    PowerLaw { exponent: f64 },
}

impl Importance {
    fn build(self, cap: usize) -> spherefield::Result<ImportanceDistribution> {
        match self {
            Importance::NegativeBinomial { r, p } => ImportanceDistribution::negative_binomial(r, p, cap),
            Importance::PowerLaw { exponent } => ImportanceDistribution::power_law(exponent, cap),
        }
    }
}

fn parse_importance(s: &str) -> Result<Importance, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        ["nbinom", r, p] => Ok(Importance::NegativeBinomial {
            r: r.parse().map_err(|e| format!("{r:?}: {e}"))?,
            p: num(p)?,
        }),
        ["geometric", p] => Ok(Importance::NegativeBinomial { r: 1, p: num(p)? }),
        ["power", q] => Ok(Importance::PowerLaw { exponent: num(q)? }),
        _ => Err("expected nbinom:R:P, geometric:P or power:Q".into()),
    }
}

const DEFAULT_IMPORTANCE: &str = "nbinom:1:0.1";

#[derive(Debug, Args)]
pub struct SimulationArgs {
    /// Number of averaged wave copies L.
    #[arg(long = "l", default_value_t = DEFAULT_COPIES)]
    copies: usize,

    /// Master seed; copy l uses substream (seed, l).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Series truncation N_max [default: chosen from the smoothness so the
    /// tail holds under 1e-6 of the variance, capped at 10000].
    #[arg(long)]
    n_max: Option<usize>,

    /// Wave-degree distribution, capped at N_max: nbinom:R:P, geometric:P or
    /// power:Q (mass proportional to (n+1)^-Q).
    #[arg(long, default_value = DEFAULT_IMPORTANCE, value_parser = parse_importance)]
    importance: Importance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    A,
    B,
}

impl ScenarioArg {
    fn scenario(self) -> Scenario {
        match self {
            ScenarioArg::A => Scenario::A,
            ScenarioArg::B => Scenario::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldFormat {
    Csv,
    Bin,
}

fn field_format(explicit: Option<FieldFormat>, path: Option<&Path>) -> FieldFormat {
    explicit.unwrap_or_else(|| match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("bin") => FieldFormat::Bin,
        _ => FieldFormat::Csv,
    })
}

fn is_stdio(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p.as_os_str() == "-")
}

fn create(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    match path {
        Some(p) if !is_stdio(Some(p)) => {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, Error> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Writes through `write`, attaching the path to any I/O failure.
fn write_out(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> spherefield::Result<()>,
) -> Result<(), Error> {
    let mut w = create(path)?;
    let name = path.unwrap_or(Path::new("<stdout>"));
    write(&mut w).map_err(|e| match e {
        Error::Stream(io) => Error::io(name, io),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(name, e))
}

fn write_field(field: &SphericalField, path: Option<&Path>, format: Option<FieldFormat>) -> Result<(), Error> {
    match field_format(format, path) {
        FieldFormat::Csv => write_out(path, |w| field.write_text(w)),
        FieldFormat::Bin => write_out(path, |w| field.write_binary(w)),
    }
}

fn read_field(path: &Path, format: Option<FieldFormat>) -> Result<SphericalField, Error> {
    let name = path.display().to_string();
    match field_format(format, Some(path)) {
        FieldFormat::Csv => SphericalField::read_text(open(path)?, &name),
        FieldFormat::Bin => SphericalField::read_binary(open(path)?, &name),
    }
}

#[derive(Debug, Args)]
pub struct CovarianceArgs {
    /// Legendre-Matern scale parameter tau^2.
    #[arg(long, default_value_t = 0.1)]
    tau_sq: f64,

    /// Smoothness nu.
    #[arg(long, default_value_t = 0.6)]
    nu: f64,

    /// Series truncation [default: tail below 1e-6 of the variance, capped at 10000].
    #[arg(long)]
    n_max: Option<usize>,

    /// Number of equally spaced distances on [0, pi].
    #[arg(long, default_value_t = 1001)]
    points: usize,

    /// Output CSV (`distance_rad,value`); `-` or absent for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn lm_truncation(n_max: Option<usize>, tau_sq: f64, nu_min: f64) -> spherefield::Result<usize> {
    match n_max {
        Some(n) => Ok(n),
        None => legendre_matern_truncation(tau_sq, nu_min),
    }
}

fn covariance(a: CovarianceArgs) -> Outcome {
    let n = lm_truncation(a.n_max, a.tau_sq, a.nu)?;
    let seq = SchoenbergSequence::legendre_matern(a.tau_sq, a.nu, n)?;
    let curve = covariance_curve(&seq, a.points)?;
    info!("N_max = {n}, K(0) = {:.12}, mass = {:.12}", curve[0].1, seq.mass());
    write_out(a.out.as_deref(), |w| write_covariance_curve(w, &curve))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Covariance curve CSV (`distance_rad,value`), linearly interpolated.
    /// Without it the Legendre-Matern model given by --tau-sq and --nu is
    /// inverted.
    #[arg(long = "in")]
    input: Option<PathBuf>,

    #[arg(long, default_value_t = 0.1)]
    tau_sq: f64,

    #[arg(long, default_value_t = 0.6)]
    nu: f64,

    /// Truncation of the model series when no curve is given.
    #[arg(long)]
    n_max: Option<usize>,

    /// Highest degree to recover.
    #[arg(long, default_value_t = 30)]
    max_degree: usize,

    /// Gauss-Legendre nodes [default: max(2 * max-degree + 2, 128), raised
    /// for a model so that its truncated series integrates exactly].
    #[arg(long)]
    nodes: Option<usize>,

    /// Output CSV (`degree,coefficient`); `-` or absent for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invert(a: InvertArgs) -> Outcome {
    let nodes = |exact_degree: usize| {
        a.nodes.unwrap_or_else(|| default_inversion_nodes(a.max_degree).max(exact_degree / 2 + 1))
    };
    let coeffs = match &a.input {
        Some(path) => {
            let curve = read_covariance_curve(open(path)?, &path.display().to_string())?;
            invert_coefficients(|d| interpolate_curve(&curve, d), a.max_degree, nodes(0))?
        }
        None => {
            // Enough nodes to integrate the truncated series exactly.
            let n = lm_truncation(a.n_max, a.tau_sq, a.nu)?;
            let seq = SchoenbergSequence::legendre_matern(a.tau_sq, a.nu, n)?;
            invert_coefficients(
                |d| spherefield::schoenberg::covariance_isotropic(&seq, d).unwrap_or(f64::NAN),
                a.max_degree,
                nodes(n + a.max_degree),
            )?
        }
    };
    write_out(a.out.as_deref(), |w| {
        writeln!(w, "degree,coefficient")?;
        for (n, b) in coeffs.iter().enumerate() {
            writeln!(w, "{n},{b:.17e}")?;
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long, default_value_t = 0.1)]
    tau_sq: f64,

    /// Constant smoothness nu [default: 0.6 unless --scenario is given].
    #[arg(long, conflicts_with = "scenario")]
    nu: Option<f64>,

    /// Location-dependent smoothness preset instead of a constant nu.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioArg>,

    #[command(flatten)]
    sim: SimulationArgs,

    #[arg(long, default_value_t = 200)]
    n_polar: usize,

    #[arg(long, default_value_t = 400)]
    n_azimuth: usize,

    /// Constant mean of the field.
    #[arg(long, default_value_t = 0.0)]
    mean: f64,

    /// Rescale to this pointwise variance [default: keep the model's].
    #[arg(long)]
    variance: Option<f64>,

    /// Exclude the constant (degree 0) term from the model.
    #[arg(long)]
    drop_degree_zero: bool,

    /// Output file; `-` or absent for stdout.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format [default: from the extension, `.bin` is binary].
    #[arg(long, value_enum)]
    format: Option<FieldFormat>,
}

fn simulation_config(sim: &SimulationArgs, mean: f64, variance: Option<f64>) -> spherefield::Result<SimulationConfig> {
    let cfg = SimulationConfig::new(sim.copies, sim.seed)?.with_constant_mean(mean);
    match variance {
        Some(v) => cfg.with_target_variance(v),
        None => Ok(cfg),
    }
}

fn simulate_field(a: FieldArgs) -> Outcome {
    let (params, nu_min) = match a.scenario {
        Some(s) => (LegendreMaternParams::adaptive(a.tau_sq, s.scenario().nu_fn())?, 0.6),
        None => {
            let nu = a.nu.unwrap_or(0.6);
            (LegendreMaternParams::isotropic(a.tau_sq, nu)?, nu)
        }
    };
    let n = lm_truncation(a.sim.n_max, a.tau_sq, nu_min)?;
    let mut seq = AdaptiveLegendreMatern::new(params, n)?;
    if a.drop_degree_zero {
        seq = seq.without_degree_zero();
    }
    let dist = a.sim.importance.build(n)?;
    let grid = SphereGrid::regular(a.n_polar, a.n_azimuth)?;
    let cfg = simulation_config(&a.sim, a.mean, a.variance)?;
    info!("N_max = {n}, L = {}, {} grid points", a.sim.copies, grid.len());
    let field = simulate_ensemble(&cfg, &seq, &dist, &grid)?;
    write_field(&field, a.out.as_deref(), a.format)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct ParticleArgs {
    /// Smoothness layout.
    #[arg(long, value_enum, default_value = "a")]
    scenario: ScenarioArg,

    #[arg(long, default_value_t = 0.1)]
    tau_sq: f64,

    #[command(flatten)]
    sim: SimulationArgs,

    #[arg(long, default_value_t = 2000)]
    n_polar: usize,

    #[arg(long, default_value_t = 1000)]
    n_azimuth: usize,

    /// Mean radius.
    #[arg(long, default_value_t = 100.0)]
    mean: f64,

    /// Pointwise variance of the radius.
    #[arg(long, default_value_t = 10.0)]
    variance: f64,

    /// Smallest allowed radius [default: 1e-3 times the mean radius].
    #[arg(long)]
    clamp: Option<f64>,

    /// Mesh file; `.ply` (default) or `.csv` vertices.
    #[arg(long)]
    out: PathBuf,

    /// Mesh format [default: from the extension].
    #[arg(long)]
    format: Option<MeshFormat>,

    /// Also write the radial field here.
    #[arg(long)]
    field_out: Option<PathBuf>,
}

fn simulate_particle(a: ParticleArgs) -> Outcome {
    let n = lm_truncation(a.sim.n_max, a.tau_sq, 0.6)?;
    let seq = a.scenario.scenario().sequence(a.tau_sq, n)?.without_degree_zero();
    let dist = a.sim.importance.build(n)?;
    let grid = SphereGrid::regular(a.n_polar, a.n_azimuth)?;
    let cfg = simulation_config(&a.sim, a.mean, Some(a.variance))?;
    info!("scenario {:?}, N_max = {n}, L = {}, {} grid points", a.scenario, a.sim.copies, grid.len());
    let field = simulate_ensemble(&cfg, &seq, &dist, &grid)?;
    if let Some(p) = &a.field_out {
        write_field(&field, Some(p), None)?;
    }
    let c = match a.clamp {
        Some(c) => c,
        None => default_clamp(&field)?,
    };
    let mesh = build_mesh(&clamp_radial(field, c)?)?;
    let format = a
        .format
        .or_else(|| MeshFormat::from_extension(&a.out))
        .unwrap_or(MeshFormat::Ply);
    write_out(Some(&a.out), |w| export_mesh(&mesh, format, w))?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EarthArgs {
    /// Elevation grid CSV (`lon_deg,lat_deg,elev_m[,land]`).
    #[arg(long = "in")]
    input: PathBuf,

    /// Degree of the harmonic mean.
    #[arg(long, default_value_t = EARTH_MEAN_DEGREE)]
    n_max_mean: usize,

    #[arg(long, default_value_t = EARTH_TAU_SQ)]
    tau_sq: f64,

    /// Hausdorff dimension of the land surface.
    #[arg(long, default_value_t = LAND_HAUSDORFF)]
    hausdorff_land: f64,

    /// Hausdorff dimension of the sea floor.
    #[arg(long, default_value_t = SEA_HAUSDORFF)]
    hausdorff_sea: f64,

    /// Standard deviation of the fluctuation, in meters.
    #[arg(long, default_value_t = EARTH_STD_M)]
    std: f64,

    #[command(flatten)]
    sim: SimulationArgs,

    /// Simulated elevations, same schema and grid as the input.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write the fitted mean on the input grid.
    #[arg(long)]
    mean_out: Option<PathBuf>,
}

fn simulate_earth(a: EarthArgs) -> Outcome {
    let grid = ingest_grid(open(&a.input)?, &a.input.display().to_string())?;
    let settings = EarthSettings {
        n_max_mean: a.n_max_mean,
        tau_sq: a.tau_sq,
        hausdorff_land: a.hausdorff_land,
        hausdorff_sea: a.hausdorff_sea,
        truncation: a.sim.n_max,
    };
    let model = EarthModel::new(&grid, &settings)?;
    let n = model.sequence().truncation();
    let dist = a.sim.importance.build(n)?;
    info!("{} x {} grid, mean degree {}, N_max = {n}", grid.lats().len(), grid.lons().len(), a.n_max_mean);
    if !(a.std.is_finite() && a.std >= 0.0) {
        return Err(format!("standard deviation must be nonnegative, got {}", a.std).into());
    }
    let cfg = SimulationConfig::new(a.sim.copies, a.sim.seed)?.with_target_variance(a.std * a.std)?;
    let field = model.simulate(&cfg, &dist)?;
    let out = grid.with_elevations(grid.values_from_field(&field)?)?;
    write_out(a.out.as_deref(), |w| out.write_csv(w))?;
    if let Some(p) = &a.mean_out {
        let mean = grid.with_elevations(grid.points().iter().map(|x| model.mean_at(x)).collect())?;
        write_out(Some(p), |w| mean.write_csv(w))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Field file written by simulate-field. On a regular grid with an even
    /// number of azimuths the variogram is taken along pole-to-pole great
    /// circles; otherwise over all pairs of points.
    #[arg(long = "in")]
    input: PathBuf,

    #[arg(long, value_enum)]
    format: Option<FieldFormat>,

    /// Smallest lag in the fit, radians [default: twice the polar spacing].
    #[arg(long)]
    fit_min: Option<f64>,

    /// Largest lag in the fit, radians.
    #[arg(long, default_value_t = DEFAULT_FIT_MAX)]
    fit_max: f64,

    /// Lags (regular grids) or logarithmic lag bins (other grids) across
    /// the fit range.
    #[arg(long, default_value_t = 20)]
    bins: usize,

    /// Also write the binned variogram (`lag_rad,gamma,pairs`).
    #[arg(long)]
    variogram_out: Option<PathBuf>,
}

fn estimate_fractal(a: EstimateArgs) -> Outcome {
    let field = read_field(&a.input, a.format)?;
    let grid = field.grid();
    let spacing = std::f64::consts::PI / grid.n_polar() as f64;
    let fit_min = a.fit_min.unwrap_or_else(|| default_fit_min(spacing));
    let vg = match meridian_circles(&field) {
        Some((circles, step)) => {
            info!("pooling {} pole-to-pole circles", circles.len());
            let lags = integer_lags(step, fit_min, a.fit_max, a.bins);
            circles_variogram(&circles, step, &lags)
        }
        None => {
            info!("irregular grid: pairwise variogram over all points");
            let edges = log_spaced_edges(fit_min, a.fit_max, a.bins)?;
            empirical_variogram(field.values(), grid.points(), &edges)?
        }
    };
    let fit = estimate_fractal_index(&vg, fit_min * (1.0 - 1e-9), a.fit_max * (1.0 + 1e-9))?;
    if let Some(p) = &a.variogram_out {
        write_out(Some(p), |w| {
            writeln!(w, "lag_rad,gamma,pairs")?;
            for b in &vg {
                writeln!(w, "{:.17e},{:.17e},{}", b.mean_lag, b.gamma, b.pairs)?;
            }
            Ok(())
        })?;
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "alpha_hat = {:.6}", fit.alpha)?;
    writeln!(out, "hausdorff_hat = {:.6}", fit.hausdorff())?;
    writeln!(out, "fit_range = [{fit_min:.6}, {:.6}]", a.fit_max)?;
    writeln!(out, "bins_used = {}", fit.points)?;
    Ok(())
}
