use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use tempfile::TempDir;

use stirap::commands::{
    cmd_area, cmd_noise_validate, cmd_run, cmd_spectrum, cmd_sweep, load_spec, CommandOptions, MANIFEST_NAME,
};
use stirap::config::{parse_spec, parse_spec_with_warnings, render_spec, CdSelection, ExperimentSpec};
use stirap::output::{fmt_float, CsvTable};
use stirap::pulses::PulseFamily;
use stirap::Error;

fn opts(dir: &Path) -> CommandOptions {
    CommandOptions { out_dir: dir.to_path_buf(), plots: true }
}

fn read_table(path: &Path) -> CsvTable {
    CsvTable::parse(&fs::read_to_string(path).unwrap()).unwrap()
}

fn spec(text: &str) -> ExperimentSpec {
    parse_spec(text).unwrap()
}

fn data_bytes(files: &[PathBuf]) -> BTreeMap<String, Vec<u8>> {
    files
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
        .collect()
}

#[test]
fn superadiabatic_trajectories_barely_feel_the_loss() {
    let dir = TempDir::new().unwrap();
    let mut curves = Vec::new();
    for gamma in [0.0, 1.0, 4.0, 10.0] {
        let s = spec(&format!("family = gaussian\nomega0 = 5\ntau_over_T = 3/4\ngamma = {gamma}\n"));
        let out = dir.path().join(format!("g{gamma}"));
        let (bundle, _) = cmd_run(&s, &opts(&out)).unwrap();
        let t = read_table(&bundle.data_files[0]);
        assert_eq!(t.header, ["t", "p1", "p2", "p3", "P"]);
        curves.push(t.column("p3").unwrap());
    }
    for c in &curves[1..] {
        let gap = c.iter().zip(&curves[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap <= 0.05, "max gap {gap}");
    }
}

#[test]
fn lossless_run_conserves_population_in_csv() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = sincos\nomega0 = 10\n");
    let (bundle, result) = cmd_run(&s, &opts(dir.path())).unwrap();
    let t = read_table(&bundle.data_files[0]);
    let total = t.column("P").unwrap();
    assert!((total.last().unwrap() - 1.0).abs() <= 1e-6);
    let p3 = t.column("p3").unwrap();
    // 12 significant digits: relative round-off of at most half a unit in the last place.
    assert!((p3.last().unwrap() - result.fidelity).abs() <= 5e-12 * result.fidelity.abs());
    assert!(bundle.plots.iter().all(|p| p.exists()));
    assert!(bundle.manifest.ends_with(MANIFEST_NAME));
}

#[test]
fn stirap_intermediate_level_oscillation_period() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = gaussian\nomega0 = 60\ntau_over_T = 0.5\ncd = false\n");
    let (bundle, _) = cmd_run(&s, &opts(dir.path())).unwrap();
    let t = read_table(&bundle.data_files[0]);
    let (times, p2) = (t.column("t").unwrap(), t.column("p2").unwrap());

    // Zero crossings of p2 - mean over the pulse-overlap region.
    let idx: Vec<usize> = (0..times.len()).filter(|&k| times[k].abs() <= 1.0).collect();
    let mean = idx.iter().map(|&k| p2[k]).sum::<f64>() / idx.len() as f64;
    let crossings: Vec<f64> = idx
        .windows(2)
        .filter(|w| (p2[w[0]] - mean).signum() != (p2[w[1]] - mean).signum())
        .map(|w| times[w[0]])
        .collect();
    assert!(crossings.len() >= 8);
    let spacing = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
    let period = 2.0 * spacing;
    assert!((period - 0.2).abs() <= 0.02, "period {period}");
}

#[test]
fn trajectory_stride_thins_rows() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = sincos\ntrajectory_stride = 100\n");
    let (bundle, _) = cmd_run(&s, &opts(dir.path())).unwrap();
    let t = read_table(&bundle.data_files[0]);
    let times = t.column("t").unwrap();
    assert_eq!(times[0], 0.0);
    assert_eq!(*times.last().unwrap(), 1.0);
    assert!(times.len() < 20);
}

const SMALL_SWEEP: &str = "family = gaussian
omega0_max = 10
omega0_points = 3
n_runs = 4
gammas = 0, 4
tau_cs = 0.08
delays = 1/2, 3/4
sweep_cd = both
";

#[test]
fn sweep_files_and_columns() {
    let dir = TempDir::new().unwrap();
    let s = spec(SMALL_SWEEP);
    let (bundle, results) = cmd_sweep(&s, &opts(dir.path())).unwrap();
    assert_eq!(bundle.data_files.len(), 8);
    assert_eq!(results.len(), 2);
    let name = dir.path().join("sweep_gaussian_sa_tau0.75_gamma4.csv");
    assert!(bundle.data_files.contains(&name));
    assert!(dir.path().join("sweep_gaussian_stirap_tau0.5_gamma0.csv").exists());
    let t = read_table(&name);
    assert_eq!(
        t.header,
        [
            "omega0", "mean_F_off", "ci_low_off", "ci_high_off", "mean_P_off", "mean_F_tc0.08", "ci_low_tc0.08",
            "ci_high_tc0.08", "mean_P_tc0.08"
        ]
    );
    assert_eq!(t.column("omega0").unwrap(), [0.0, 5.0, 10.0]);
    let clean = t.column("mean_F_off").unwrap();
    assert_eq!(clean, t.column("ci_low_off").unwrap());
    assert_eq!(clean, t.column("ci_high_off").unwrap());
}

#[test]
fn default_grid_panel_count() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = gaussian\nomega0_max = 1\nomega0_points = 1\nn_runs = 1\nsweep_cd = on\n");
    let (bundle, results) = cmd_sweep(&s, &opts(dir.path())).unwrap();
    // Four delays times four dissipation rates, each with four columns.
    assert_eq!(bundle.data_files.len(), 16);
    assert!(results[0].1.iter().all(|p| p.columns.len() == 4));

    let s = spec("family = sincos\nomega0_max = 1\nomega0_points = 1\nn_runs = 1\nsweep_cd = on\n");
    let (bundle, _) = cmd_sweep(&s, &opts(&dir.path().join("sc"))).unwrap();
    assert_eq!(bundle.data_files.len(), 4);
}

#[test]
fn sweep_reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let s = spec(SMALL_SWEEP);
    let (first, _) = cmd_sweep(&s, &opts(a.path())).unwrap();
    let (second, _) = cmd_sweep(&s, &opts(b.path())).unwrap();
    assert_eq!(data_bytes(&first.data_files), data_bytes(&second.data_files));
}

#[test]
fn single_run_interval_is_the_sample() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = sincos\nomega0_max = 4\nomega0_points = 3\nn_runs = 1\ngammas = 0\ntau_cs = 0.08\nsweep_cd = on\n");
    let (bundle, _) = cmd_sweep(&s, &opts(dir.path())).unwrap();
    let t = read_table(&bundle.data_files[0]);
    let mean = t.column("mean_F_tc0.08").unwrap();
    assert_eq!(mean, t.column("ci_low_tc0.08").unwrap());
    assert_eq!(mean, t.column("ci_high_tc0.08").unwrap());
}

#[test]
fn manifests_reproduce_their_data() {
    let root = TempDir::new().unwrap();
    let runs: Vec<(&str, String)> = vec![
        ("run", "family = gaussian\nomega0 = 20\ngamma = 1\ntau_c = 0.08\nseed = 7\n".into()),
        ("sweep", SMALL_SWEEP.into()),
        ("noise", "family = sincos\ntau_c = 0.08\nnoise_samples = 20000\nnoise_iterations = 2\n".into()),
        ("spectrum", "family = gaussian\nomega_points = 51\n".into()),
        ("area", "family = gaussian\n".into()),
    ];
    for (kind, text) in runs {
        let s = spec(&text);
        let first_dir = root.path().join(format!("{kind}-a"));
        let bundle = dispatch(kind, &s, &first_dir);

        let mut again = load_spec(&bundle.manifest).unwrap();
        assert_eq!(again.out_dir, first_dir.display().to_string());
        let second_dir = root.path().join(format!("{kind}-b"));
        again.out_dir = second_dir.display().to_string();
        let rerun = dispatch(kind, &again, &second_dir);
        assert_eq!(data_bytes(&bundle.data_files), data_bytes(&rerun.data_files), "{kind}");
    }
}

fn dispatch(kind: &str, s: &ExperimentSpec, dir: &Path) -> stirap::output::OutputBundle {
    let o = CommandOptions { out_dir: dir.to_path_buf(), plots: false };
    match kind {
        "run" => cmd_run(s, &o).unwrap().0,
        "sweep" => cmd_sweep(s, &o).unwrap().0,
        "noise" => cmd_noise_validate(s, &o).unwrap().0,
        "spectrum" => cmd_spectrum(s, &o).unwrap(),
        "area" => cmd_area(s, &o).unwrap().0,
        _ => unreachable!(),
    }
}

#[test]
fn noise_validation_outputs() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = sincos\ntau_c = 0.08\nnoise_samples = 200000\nnoise_iterations = 2\n");
    let (bundle, checks) = cmd_noise_validate(&s, &opts(dir.path())).unwrap();
    assert_eq!(checks.len(), 2);
    for c in &checks {
        assert!(c.ks_statistic < c.ks_critical);
        assert!(c.mean.abs() <= 0.25);
    }
    let acf = read_table(&dir.path().join("noise_autocorrelation.csv"));
    assert_eq!(acf.header, ["lag", "empirical_R", "analytic_R"]);
    for (lag, r) in acf.column("lag").unwrap().iter().zip(acf.column("analytic_R").unwrap()) {
        assert!((r - 25.0 * (-lag / 0.08).exp()).abs() <= 1e-9);
    }
    assert_eq!(*acf.column("lag").unwrap().last().unwrap(), 0.4);
    let hist = read_table(&dir.path().join("noise_histogram.csv"));
    assert_eq!(hist.header, ["bin_center", "density"]);
    assert_eq!(hist.rows.len(), 100);
    assert!(bundle.data_files.len() == 3 && bundle.plots.len() == 2);
}

#[test]
fn silent_noise_histogram_is_a_spike_at_zero() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = sincos\nsigma = 0\ntau_c = 0.08\nnoise_samples = 1000\nnoise_iterations = 1\nhist_bins = 11\n");
    cmd_noise_validate(&s, &opts(dir.path())).unwrap();
    let hist = read_table(&dir.path().join("noise_histogram.csv"));
    let density = hist.column("density").unwrap();
    let centers = hist.column("bin_center").unwrap();
    let peak = density.iter().position(|&d| d > 0.0).unwrap();
    assert!(centers[peak].abs() < 1e-12);
    assert_eq!(density.iter().filter(|&&d| d > 0.0).count(), 1);
}

#[test]
fn spectrum_columns() {
    let dir = TempDir::new().unwrap();
    let s = spec("family = gaussian\n");
    cmd_spectrum(&s, &opts(dir.path())).unwrap();
    let noise = read_table(&dir.path().join("spectrum_noise.csv"));
    let cd = read_table(&dir.path().join("spectrum_cd.csv"));
    assert_eq!(noise.header.len() - 1 + cd.header.len() - 1, 7);
    for tc in [0.008, 0.08, 0.8] {
        let col = noise.column(&format!("S_tc{tc}")).unwrap();
        assert!((col[0] - 2.0 * 25.0 * tc).abs() <= 1e-12);
    }
    for h in &cd.header[1..] {
        assert!((cd.column(h).unwrap()[0] - std::f64::consts::PI).abs() <= 5e-12 * std::f64::consts::PI);
    }
    assert_eq!(cd.header[2], "Fd_tau0.3333");
}

#[test]
fn area_report() {
    let dir = TempDir::new().unwrap();
    let (_, a) = cmd_area(&spec("family = gaussian\nomega0 = 5\ntau_over_T = 0.75\n"), &opts(dir.path())).unwrap();
    assert!((a.pump - 8.8558).abs() <= 1e-3);
    assert!((a.counterdiabatic - 3.1411).abs() <= 1e-4);
    assert_eq!(a.window, (-3.0, 3.0));
    let t = read_table(&dir.path().join("area.csv"));
    assert!((t.column("pump").unwrap()[0] - a.pump).abs() <= 5e-12 * a.pump);

    let (_, b) = cmd_area(&spec("family = sincos\n"), &opts(dir.path())).unwrap();
    assert!((b.counterdiabatic - std::f64::consts::PI).abs() <= 1e-12);
}

#[test]
fn parse_errors_are_reported_with_lines() {
    match parse_spec("family = gaussian\nomega0 = fast\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_spec("omega0 = 1\n"), Err(Error::Parse { .. })));
    assert!(parse_spec("family = gaussian\ngamma = -1\n").is_err());
    assert!(parse_spec("family = gaussian\nbogus = 1\n").is_err());
    let (_, warnings) = parse_spec_with_warnings("family = sincos\ntau_over_T = 0.9\n").unwrap();
    assert_eq!(warnings.len(), 1);
}

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

prop_compose! {
    fn any_spec()(
        gaussian in any::<bool>(),
        omega0 in finite(0.0, 100.0),
        tau in finite(1e-3, 2.0),
        cd in any::<bool>(),
        gamma in finite(0.0, 20.0),
        sigma in finite(0.0, 20.0),
        tau_c in proptest::option::of(finite(1e-4, 2.0)),
        n_runs in 1usize..5000,
        seed in any::<u64>(),
        dt in proptest::option::of(finite(1e-6, 1e-2)),
        dir in "[a-z][a-z0-9_/]{0,12}",
        stride in 1usize..100,
        omega0_points in 1usize..200,
        sweep_cd in 0u8..3,
        gammas in proptest::collection::vec(finite(0.0, 20.0), 1..5),
        tau_cs in proptest::collection::vec(finite(1e-4, 2.0), 0..4),
        delays in proptest::collection::vec(finite(1e-3, 2.0), 1..5),
        samples in 2usize..10_000_000,
        bins in 1usize..1000,
        omega_points in 2usize..1000,
    ) -> ExperimentSpec {
        let mut s = ExperimentSpec::defaults(if gaussian { PulseFamily::Gaussian } else { PulseFamily::SinCos });
        s.omega0 = omega0;
        s.tau_over_t = tau;
        s.cd = cd;
        s.gamma = gamma;
        s.sigma = sigma;
        s.tau_c = tau_c;
        s.n_runs = n_runs;
        s.seed = seed;
        s.dt = dt;
        s.out_dir = dir;
        s.trajectory_stride = stride;
        s.omega0_points = omega0_points;
        s.sweep_cd = [CdSelection::Off, CdSelection::On, CdSelection::Both][sweep_cd as usize];
        s.gammas = gammas;
        s.tau_cs = tau_cs;
        s.delays = delays;
        s.noise_samples = samples;
        s.hist_bins = bins;
        s.omega_points = omega_points;
        s
    }
}

proptest! {
    #[test]
    fn render_then_parse_is_identity(s in any_spec()) {
        prop_assert_eq!(parse_spec(&render_spec(&s)).unwrap(), s);
    }

    #[test]
    fn csv_numbers_round_trip(x in -1e6..1e6f64) {
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-12 * x.abs());
    }
}

fn binary() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stirap"));
    c.env_remove("STIRAP_OUT_DIR");
    c
}

#[test]
fn binary_runs_and_reports() {
    let dir = TempDir::new().unwrap();
    let out = binary()
        .args(["area", "--set", "family=gaussian", "--no-plots", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("pump   8.855"));
    assert!(dir.path().join("area.csv").exists());

    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "family = sincos\nomega0 = 4\n").unwrap();
    let out = binary()
        .args(["run", "--no-plots", "--config"])
        .arg(&cfg)
        .args(["--set", "omega0=0", "--out"])
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("fidelity 1.0000000000"));
}

#[test]
fn binary_exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| binary().args(args).arg("--out").arg(dir.path()).output().unwrap().status.code();
    assert_eq!(code(&["run", "--set", "family=gaussian", "--set", "omega0=oops"]), Some(2));
    assert_eq!(code(&["run", "--config", "/nonexistent/spec.txt"]), Some(4));
    assert_eq!(
        code(&["run", "--set", "family=gaussian", "--set", "omega0=60", "--set", "dt=0.2", "--no-plots"]),
        Some(3)
    );
}
