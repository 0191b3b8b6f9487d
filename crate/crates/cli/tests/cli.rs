use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spherefield::particle::parse_ply;
use spherefield::schoenberg::{legendre_matern_b, legendre_matern_truncation, SchoenbergSequence};
use spherefield::topography::ingest_grid;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spherefield"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/earth_10deg.csv")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn report_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["simulate-field", "--help"]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &[],
        &["no-such-command"],
        &["covariance", "--bogus"],
        &["covariance", "--nu", "abc"],
        &["simulate-field", "--importance", "poisson:3"],
        &["simulate-field", "--scenario", "c"],
        &["simulate-field", "--scenario", "a", "--nu", "0.7"],
        &["simulate-earth"],
        &["covariance", "--threads", "0"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn runtime_errors_exit_one_with_context() {
    let out = run(&["estimate-fractal", "--in", "/no/such/field.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/field.csv"));

    let out = run(&["covariance", "--nu=-0.5"]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["simulate-field", "--l", "0", "--n-polar", "4", "--n-azimuth", "4"]);
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "lon_deg,lat_deg,elev_m\n0,0,1\n0,0,2\n").unwrap();
    let out = run(&["simulate-earth", "--in", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv"));
}

#[test]
fn covariance_at_zero_is_the_mass() {
    let out = ok(&["covariance", "--tau-sq", "0.1", "--nu", "0.6", "--points", "11"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("distance_rad,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0].0, 0.0);
    assert!((rows[10].0 - std::f64::consts::PI).abs() < 1e-15);
    let n = legendre_matern_truncation(0.1, 0.6).unwrap();
    let mass = SchoenbergSequence::legendre_matern(0.1, 0.6, n).unwrap().mass();
    assert!((rows[0].1 - mass).abs() <= 1e-12 * mass);
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn invert_recovers_model_and_curve() {
    let out = ok(&["invert", "--tau-sq", "0.1", "--nu", "0.6", "--max-degree", "30"]);
    let coeffs: Vec<f64> = stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(coeffs.len(), 31);
    for (n, b) in coeffs.iter().enumerate() {
        let exact = legendre_matern_b(n, 0.1, 0.6);
        assert!((b - exact).abs() <= 1e-6 * exact, "n={n}: {b} vs {exact}");
    }

    // Through a tabulated curve, limited by linear interpolation.
    let dir = tempfile::tempdir().unwrap();
    let curve = p(dir.path(), "k.csv");
    ok(&["covariance", "--points", "20001", "--out", &curve]);
    let out = ok(&["invert", "--in", &curve, "--max-degree", "5"]);
    for (n, line) in stdout(&out).lines().skip(1).enumerate() {
        let b: f64 = line.split_once(',').unwrap().1.parse().unwrap();
        let exact = legendre_matern_b(n, 0.1, 0.6);
        assert!((b - exact).abs() <= 1e-3 * exact, "n={n}: {b} vs {exact}");
    }
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# curve settings\npoints = 3\nnu = 0.9\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = stdout(&ok(&["--config", cfg, "covariance"]));
    assert_eq!(from_file.lines().count(), 4);
    let direct = stdout(&ok(&["covariance", "--points", "3", "--nu", "0.9"]));
    assert_eq!(from_file, direct);

    let overridden = stdout(&ok(&["covariance", "--config", cfg, "--points", "5"]));
    assert_eq!(overridden.lines().count(), 6);
    let direct = stdout(&ok(&["covariance", "--points", "5", "--nu", "0.9"]));
    assert_eq!(overridden, direct);

    // Global flags before the subcommand still beat the file.
    let threads = dir.path().join("threads.conf");
    fs::write(&threads, "threads = 0\n").unwrap();
    ok(&["--threads", "1", "--config", threads.to_str().unwrap(), "covariance", "--points", "2"]);
    let out = run(&["--config", threads.to_str().unwrap(), "covariance", "--points", "2"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.conf");
    fs::write(&bad, "frobnicate = 1\n").unwrap();
    let out = run(&["--config", bad.to_str().unwrap(), "covariance"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("frobnicate"));

    let switch = dir.path().join("switch.conf");
    fs::write(&switch, "drop-degree-zero = maybe\n").unwrap();
    let out = run(&["--config", switch.to_str().unwrap(), "simulate-field"]);
    assert_eq!(out.status.code(), Some(2));
}

fn field_args<'a>(out: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "simulate-field", "--scenario", "a", "--n-polar", "24", "--n-azimuth", "48", "--l", "40",
        "--seed", seed, "--out", out,
    ]
}

#[test]
fn same_seed_same_bytes_for_every_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let grid = fixture();
    let grid = grid.to_str().unwrap();
    let runs: Vec<(Vec<String>, Vec<String>)> = vec![
        (
            field_args(&p(d, "f1.bin"), "9").iter().map(|s| s.to_string()).collect(),
            vec![p(d, "f1.bin")],
        ),
        (
            [
                "simulate-particle", "--n-polar", "20", "--n-azimuth", "30", "--l", "40", "--seed", "9",
                "--out", &p(d, "m1.ply"), "--field-out", &p(d, "r1.csv"),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            vec![p(d, "m1.ply"), p(d, "r1.csv")],
        ),
        (
            [
                "simulate-earth", "--in", grid, "--n-max-mean", "6", "--l", "40", "--seed", "9",
                "--out", &p(d, "e1.csv"),
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            vec![p(d, "e1.csv")],
        ),
        (
            ["covariance", "--points", "50", "--out", &p(d, "k1.csv")].iter().map(|s| s.to_string()).collect(),
            vec![p(d, "k1.csv")],
        ),
        (
            ["invert", "--out", &p(d, "b1.csv")].iter().map(|s| s.to_string()).collect(),
            vec![p(d, "b1.csv")],
        ),
    ];
    for (args, files) in runs {
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&argv);
        let first: Vec<Vec<u8>> = files.iter().map(|f| fs::read(f).unwrap()).collect();
        // Second run on one worker thread must not change a byte.
        let mut again = vec!["--threads", "1"];
        again.extend(&argv);
        ok(&again);
        for (f, bytes) in files.iter().zip(&first) {
            assert!(!bytes.is_empty(), "{f}");
            assert_eq!(&fs::read(f).unwrap(), bytes, "{f} changed between runs");
        }
    }

    let f1 = p(d, "f1.bin");
    let f2 = p(d, "f2.bin");
    ok(&field_args(&f2, "10"));
    assert_ne!(fs::read(&f1).unwrap(), fs::read(&f2).unwrap());
    let est = stdout(&ok(&["estimate-fractal", "--in", &f1, "--fit-min", "0.2", "--fit-max", "1.5"]));
    let est2 = stdout(&ok(&["estimate-fractal", "--in", &f1, "--fit-min", "0.2", "--fit-max", "1.5"]));
    assert_eq!(est, est2);
}

#[test]
fn text_and_binary_fields_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, bin) = (p(dir.path(), "f.csv"), p(dir.path(), "f.bin"));
    ok(&field_args(&csv, "4"));
    ok(&field_args(&bin, "4"));
    assert!(fs::read_to_string(&csv).unwrap().starts_with("polar_rad,azimuth_rad,value\n"));
    let est = |f: &str| stdout(&ok(&["estimate-fractal", "--in", f, "--fit-min", "0.2", "--fit-max", "1.5"]));
    let a = est(&csv);
    let b = est(&bin);
    assert_eq!(a, b);

    // Stdout output matches the file.
    let mut argv = field_args("-", "4");
    argv.push("--format");
    argv.push("csv");
    let out = ok(&argv);
    assert_eq!(out.stdout, fs::read(&csv).unwrap());
}

#[test]
fn particle_mesh_is_closed_and_star_shaped() {
    let dir = tempfile::tempdir().unwrap();
    let ply = p(dir.path(), "m.ply");
    let vcsv = p(dir.path(), "m.csv");
    let common = ["simulate-particle", "--n-polar", "30", "--n-azimuth", "40", "--l", "60", "--seed", "2"];
    ok(&[&common[..], &["--out", &ply]].concat());
    ok(&[&common[..], &["--out", &vcsv]].concat());

    let mesh = parse_ply(fs::read_to_string(&ply).unwrap().as_bytes(), "m.ply").unwrap();
    assert_eq!(mesh.vertices.len(), 30 * 40 + 2);
    assert_eq!(mesh.triangles.len(), 2 * 30 * 40 - 2 * 40 + 2 * 40);
    assert!(mesh.is_closed());
    assert!(mesh.signed_volume() > 0.0);
    let (v, e, f) = mesh.counts();
    assert_eq!(v as i64 - e as i64 + f as i64, 2);
    for x in &mesh.vertices {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        assert!(r >= 0.1 - 1e-12, "radius {r} below the default clamp");
    }

    let text = fs::read_to_string(&vcsv).unwrap();
    assert!(text.starts_with("x,y,z\n"));
    assert_eq!(text.lines().count(), 1 + mesh.vertices.len());
}

#[test]
fn earth_output_keeps_the_input_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (out, mean) = (p(dir.path(), "e.csv"), p(dir.path(), "m.csv"));
    let input = fixture();
    ok(&[
        "simulate-earth", "--in", input.to_str().unwrap(), "--n-max-mean", "8", "--l", "50", "--out", &out,
        "--mean-out", &mean,
    ]);
    let src = ingest_grid(fs::File::open(&input).unwrap(), "in").unwrap();
    let sim = ingest_grid(fs::File::open(&out).unwrap(), "out").unwrap();
    let fit = ingest_grid(fs::File::open(&mean).unwrap(), "mean").unwrap();
    for g in [&sim, &fit] {
        assert_eq!(g.lons(), src.lons());
        assert_eq!(g.lats(), src.lats());
        assert_eq!(g.land(), src.land());
    }
    let resid: Vec<f64> = sim.elevations().iter().zip(fit.elevations()).map(|(a, b)| a - b).collect();
    let n = resid.len() as f64;
    let m = resid.iter().sum::<f64>() / n;
    let sd = (resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / n).sqrt();
    assert!(sd > 500.0 && sd < 8000.0, "fluctuation sd {sd}");
}

#[test]
fn fractal_estimate_tracks_smoothness() {
    let dir = tempfile::tempdir().unwrap();
    let mut alpha = Vec::new();
    for nu in ["0.6", "0.9"] {
        let f = p(dir.path(), &format!("f{nu}.bin"));
        ok(&[
            "simulate-field", "--nu", nu, "--n-polar", "512", "--n-azimuth", "8", "--l", "300",
            "--importance", "power:1.5", "--seed", "11", "--out", &f,
        ]);
        let vg = p(dir.path(), &format!("v{nu}.csv"));
        let report = stdout(&ok(&["estimate-fractal", "--in", &f, "--variogram-out", &vg]));
        let a = report_value(&report, "alpha_hat");
        let h = report_value(&report, "hausdorff_hat");
        assert!((h - (3.0 - a / 2.0)).abs() < 1e-5);
        assert!(report_value(&report, "bins_used") >= 5.0);
        assert!(fs::read_to_string(&vg).unwrap().starts_with("lag_rad,gamma,pairs\n"));
        alpha.push(a);
    }
    assert!((0.95..=1.45).contains(&alpha[0]), "nu 0.6 gave alpha {}", alpha[0]);
    assert!(alpha[1] > alpha[0] + 0.15, "alpha {alpha:?}");
}
