//! Experiment drivers behind the CLI subcommands. Each writes its data files,
//! optional SVG quicklooks and a `manifest.txt` that re-runs it.

use std::path::{Path, PathBuf};

use crate::config::{render_spec, ExperimentSpec};
use crate::ensemble::{run_seed, sweep_matrix, EnsembleConfig, Panel, SweepResult};
use crate::error::Result;
use crate::integrator::{simulate_run, RunConfig, RunResult, SimGrid};
use crate::noise::{
    analytic_autocorrelation, analytic_spectrum, ar1_effective_samples, generate_series, histogram,
    ks_critical_1pct, ks_statistic_normal, sample_stats, OUParams, StepPolicy,
};
use crate::output::{line_plot_svg, write_text, CsvTable, OutputBundle, Series};
use crate::pulses::{cd_fourier_analytic, protocol_area, PulseChannel, PulseFamily, ProtocolConfig, DEFAULT_AREA_DT};
use crate::seed::derive_seed;

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Correlation time used by `noise-validate` when the spec has noise off.
pub const DEFAULT_VALIDATION_TAU_C: f64 = 0.08;

#[derive(Clone, Debug)]
pub struct CommandOptions {
    pub out_dir: PathBuf,
    pub plots: bool,
}

impl CommandOptions {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        CommandOptions {
            out_dir: PathBuf::from(&spec.out_dir),
            plots: true,
        }
    }
}

/// Compact decimal tag for file and column names.
fn tag(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

struct BundleWriter<'a> {
    opts: &'a CommandOptions,
    bundle: OutputBundle,
}

impl<'a> BundleWriter<'a> {
    fn new(opts: &'a CommandOptions) -> Self {
        BundleWriter {
            opts,
            bundle: OutputBundle {
                dir: opts.out_dir.clone(),
                ..Default::default()
            },
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.opts.out_dir.join(name)
    }

    fn table(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let p = self.path(name);
        table.write(&p)?;
        self.bundle.data_files.push(p);
        Ok(())
    }

    fn plot(&mut self, name: &str, svg: impl FnOnce() -> String) -> Result<()> {
        if self.opts.plots {
            let p = self.path(name);
            write_text(&p, &svg())?;
            self.bundle.plots.push(p);
        }
        Ok(())
    }

    fn finish(mut self, command: &str, spec: &ExperimentSpec) -> Result<OutputBundle> {
        let mut resolved = spec.clone();
        resolved.out_dir = self.opts.out_dir.display().to_string();
        let text = format!(
            "# stirap {}\n# command: {command}\n{}",
            env!("CARGO_PKG_VERSION"),
            render_spec(&resolved)
        );
        let p = self.path(MANIFEST_NAME);
        write_text(&p, &text)?;
        self.bundle.manifest = p;
        Ok(self.bundle)
    }
}

pub fn protocol_of(spec: &ExperimentSpec) -> ProtocolConfig {
    match spec.family {
        PulseFamily::Gaussian => ProtocolConfig::gaussian(spec.omega0, spec.tau_over_t, spec.cd),
        PulseFamily::SinCos => ProtocolConfig::sincos(spec.omega0, spec.cd),
    }
}

fn noise_of(spec: &ExperimentSpec) -> OUParams {
    OUParams {
        sigma: spec.sigma,
        tau_c: spec.tau_c.unwrap_or(1.0),
    }
}

pub fn run_config_of(spec: &ExperimentSpec) -> RunConfig {
    RunConfig {
        protocol: protocol_of(spec),
        gamma: spec.gamma,
        noise: noise_of(spec),
        noise_enabled: spec.tau_c.is_some(),
        seed: run_seed(spec.seed, 0),
        record_trajectory: true,
    }
}

fn grid_of(spec: &ExperimentSpec, run: &RunConfig) -> Result<SimGrid> {
    match spec.dt {
        Some(dt) => {
            let (a, b) = run.protocol.window();
            SimGrid::new(a, b, dt)
        }
        None => SimGrid::for_run(run),
    }
}

fn common_meta(table: &mut CsvTable, spec: &ExperimentSpec) {
    table.meta("family", spec.family);
    if spec.family == PulseFamily::Gaussian {
        table.meta("tau_over_T", format!("{:?}", spec.tau_over_t));
    }
    table.meta("sigma", format!("{:?}", spec.sigma));
    table.meta("seed", spec.seed);
    table.meta("T", format!("{:?}", spec.time_scale));
}

/// Single trajectory with its full population time series.
pub fn cmd_run(spec: &ExperimentSpec, opts: &CommandOptions) -> Result<(OutputBundle, RunResult)> {
    let run = run_config_of(spec);
    let grid = grid_of(spec, &run)?;
    let result = simulate_run(&run, &grid)?;
    let tr = result.trajectory.as_ref().expect("trajectory recorded");

    let mut table = CsvTable::new(["t", "p1", "p2", "p3", "P"]);
    common_meta(&mut table, spec);
    table
        .meta("omega0", format!("{:?}", spec.omega0))
        .meta("cd", spec.cd)
        .meta("gamma", format!("{:?}", spec.gamma))
        .meta("tau_c", spec.tau_c.map_or("off".into(), |t| format!("{t:?}")))
        .meta("dt", format!("{:?}", grid.dt))
        .meta("n_steps", grid.n_steps);
    let stride = spec.trajectory_stride;
    for k in (0..tr.len()).filter(|k| k % stride == 0 || *k + 1 == tr.len()) {
        table.push(vec![tr.times[k], tr.p1[k], tr.p2[k], tr.p3[k], tr.total[k]]);
    }

    let mut w = BundleWriter::new(opts);
    w.table("trajectory.csv", &table)?;
    w.plot("trajectory.svg", || {
        let series = [
            Series { label: "p1".into(), x: &tr.times, y: &tr.p1 },
            Series { label: "p2".into(), x: &tr.times, y: &tr.p2 },
            Series { label: "p3".into(), x: &tr.times, y: &tr.p3 },
            Series { label: "P".into(), x: &tr.times, y: &tr.total },
        ];
        line_plot_svg("populations", "t [T]", "population", &series)
    })?;
    let bundle = w.finish("run", spec)?;
    Ok((bundle, result))
}

fn column_label(col: &SweepResult) -> String {
    match col.meta.tau_c {
        None => "off".into(),
        Some(tc) => format!("tc{}", tag(tc)),
    }
}

/// File stem of one sweep panel.
pub fn panel_name(family: PulseFamily, cd: bool, panel: &Panel) -> String {
    let kind = if cd { "sa" } else { "stirap" };
    match panel.tau {
        Some(tau) => format!("sweep_{family}_{kind}_tau{}_gamma{}", tag(tau), tag(panel.gamma)),
        None => format!("sweep_{family}_{kind}_gamma{}", tag(panel.gamma)),
    }
}

/// CSV for one panel: `omega0` followed by a column group per τc.
pub fn panel_table(spec: &ExperimentSpec, cd: bool, panel: &Panel) -> CsvTable {
    let mut header = vec!["omega0".to_string()];
    for col in &panel.columns {
        let lab = column_label(col);
        for q in ["mean_F", "ci_low", "ci_high", "mean_P"] {
            header.push(format!("{q}_{lab}"));
        }
    }
    let mut table = CsvTable::new(header);
    table.meta("family", spec.family).meta("cd", cd);
    if let Some(tau) = panel.tau {
        table.meta("tau_over_T", format!("{tau:?}"));
    }
    table
        .meta("gamma", format!("{:?}", panel.gamma))
        .meta("sigma", format!("{:?}", spec.sigma))
        .meta(
            "tau_cs",
            panel
                .columns
                .iter()
                .map(column_label)
                .collect::<Vec<_>>()
                .join(" "),
        )
        .meta("n_runs", spec.n_runs)
        .meta("seed", spec.seed)
        .meta("dt", spec.dt.map_or("auto".into(), |d| format!("{d:?}")))
        .meta("T", format!("{:?}", spec.time_scale));

    let n_points = panel.columns.first().map_or(0, |c| c.omega0.len());
    for k in 0..n_points {
        let mut row = vec![panel.columns[0].omega0[k]];
        for col in &panel.columns {
            let p = &col.points[k];
            row.extend([p.mean_fidelity, p.ci_low, p.ci_high, p.mean_total_population]);
        }
        table.push(row);
    }
    table
}

/// Fidelity-versus-amplitude sweeps over the (Γ, τc, delay) grid, for each
/// selected counterdiabatic mode.
pub fn cmd_sweep(spec: &ExperimentSpec, opts: &CommandOptions) -> Result<(OutputBundle, Vec<(bool, Vec<Panel>)>)> {
    let omega0_values = spec.omega0_values();
    let mut w = BundleWriter::new(opts);
    let mut all = Vec::new();
    for cd in spec.sweep_cd.modes() {
        let mut s = spec.clone();
        s.cd = cd;
        let run = run_config_of(&s);
        let base = EnsembleConfig {
            n_runs: spec.n_runs,
            master_seed: spec.seed,
            run,
            grid: match spec.dt {
                Some(_) => Some(grid_of(spec, &run)?),
                None => None,
            },
        };
        let panels = sweep_matrix(&base, &omega0_values, &spec.gammas, &spec.tau_cs, &spec.delays)?;
        for panel in &panels {
            let name = panel_name(spec.family, cd, panel);
            let table = panel_table(spec, cd, panel);
            w.table(&format!("{name}.csv"), &table)?;
            w.plot(&format!("{name}.svg"), || {
                let ys: Vec<Vec<f64>> = panel
                    .columns
                    .iter()
                    .map(|c| c.points.iter().map(|p| p.mean_fidelity).collect())
                    .collect();
                let series: Vec<Series> = panel
                    .columns
                    .iter()
                    .zip(&ys)
                    .map(|(c, y)| Series {
                        label: format!("tau_c {}", column_label(c)),
                        x: &c.omega0,
                        y,
                    })
                    .collect();
                line_plot_svg(&name, "Omega0 [1/T]", "fidelity", &series)
            })?;
        }
        all.push((cd, panels));
    }
    let bundle = w.finish("sweep", spec)?;
    Ok((bundle, all))
}

/// Per-iteration noise statistics reported by `noise-validate`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCheck {
    pub mean: f64,
    pub variance: f64,
    /// Autocovariance at the lag closest to τc.
    pub r_at_tau_c: f64,
    pub ks_statistic: f64,
    /// 1% critical value at the AR(1) effective sample size.
    pub ks_critical: f64,
}

pub fn noise_validation_params(spec: &ExperimentSpec) -> Result<(OUParams, f64)> {
    let params = OUParams::new(spec.sigma, spec.tau_c.unwrap_or(DEFAULT_VALIDATION_TAU_C))?;
    let dt = spec.dt.unwrap_or(params.max_step());
    Ok((params, dt))
}

/// Histogram and autocorrelation of generated OU series, averaged over
/// `noise_iterations` independent series.
pub fn cmd_noise_validate(spec: &ExperimentSpec, opts: &CommandOptions) -> Result<(OutputBundle, Vec<NoiseCheck>)> {
    let (params, dt) = noise_validation_params(spec)?;
    let n = spec.noise_samples;
    let max_lag = (spec.max_lag_tau_c * params.tau_c / dt).round() as usize;
    let lag_tc = (params.tau_c / dt).round() as usize;
    let half_range = if params.sigma > 0.0 { 5.0 * params.sigma } else { 0.5 };
    let rho = params.decay(dt);

    let mut density = vec![0.0; spec.hist_bins];
    let mut centers = Vec::new();
    let mut acf = vec![0.0; max_lag.min(n - 1) + 1];
    let mut lags = Vec::new();
    let mut checks = Vec::new();
    for it in 0..spec.noise_iterations {
        let series = generate_series(&params, n - 1, dt, derive_seed(spec.seed, &[it as u64]), StepPolicy::Warn)?;
        let hist = histogram(&series, spec.hist_bins, -half_range, half_range);
        centers = hist.iter().map(|(c, _)| *c).collect();
        for (d, (_, v)) in density.iter_mut().zip(&hist) {
            *d += v / spec.noise_iterations as f64;
        }
        let stats = sample_stats(&series, dt, max_lag.max(lag_tc))?;
        for (a, v) in acf.iter_mut().zip(&stats.autocorrelation) {
            *a += v / spec.noise_iterations as f64;
        }
        lags = stats.lags.clone();
        checks.push(NoiseCheck {
            mean: stats.mean,
            variance: stats.variance,
            r_at_tau_c: stats.autocorrelation.get(lag_tc).copied().unwrap_or(f64::NAN),
            ks_statistic: ks_statistic_normal(&series, params.sigma),
            ks_critical: ks_critical_1pct(ar1_effective_samples(series.len(), rho)),
        });
    }
    lags.truncate(acf.len());

    let mut hist_table = CsvTable::new(["bin_center", "density"]);
    common_meta(&mut hist_table, spec);
    hist_table
        .meta("tau_c", format!("{:?}", params.tau_c))
        .meta("dt", format!("{dt:?}"))
        .meta("samples", n)
        .meta("iterations", spec.noise_iterations);
    for (c, d) in centers.iter().zip(&density) {
        hist_table.push(vec![*c, *d]);
    }

    let mut acf_table = CsvTable::new(["lag", "empirical_R", "analytic_R"]);
    acf_table
        .meta("sigma", format!("{:?}", params.sigma))
        .meta("tau_c", format!("{:?}", params.tau_c))
        .meta("dt", format!("{dt:?}"))
        .meta("samples", n)
        .meta("iterations", spec.noise_iterations)
        .meta("seed", spec.seed);
    for (lag, r) in lags.iter().zip(&acf) {
        acf_table.push(vec![*lag, *r, analytic_autocorrelation(*lag, &params)]);
    }

    let mut summary = CsvTable::new(["iteration", "mean", "variance", "R_tau_c", "ks_statistic", "ks_critical_1pct"]);
    for (i, c) in checks.iter().enumerate() {
        summary.push(vec![i as f64, c.mean, c.variance, c.r_at_tau_c, c.ks_statistic, c.ks_critical]);
    }

    let mut w = BundleWriter::new(opts);
    w.table("noise_histogram.csv", &hist_table)?;
    w.table("noise_autocorrelation.csv", &acf_table)?;
    w.table("noise_summary.csv", &summary)?;
    w.plot("noise_histogram.svg", || {
        let sigma = params.sigma.max(f64::MIN_POSITIVE);
        let gauss: Vec<f64> = centers
            .iter()
            .map(|x| (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
            .collect();
        line_plot_svg(
            "noise histogram",
            "epsilon [1/T]",
            "density",
            &[
                Series { label: "empirical".into(), x: &centers, y: &density },
                Series { label: "gaussian".into(), x: &centers, y: &gauss },
            ],
        )
    })?;
    w.plot("noise_autocorrelation.svg", || {
        let analytic: Vec<f64> = lags.iter().map(|l| analytic_autocorrelation(*l, &params)).collect();
        line_plot_svg(
            "noise autocorrelation",
            "lag [T]",
            "R",
            &[
                Series { label: "empirical".into(), x: &lags, y: &acf },
                Series { label: "analytic".into(), x: &lags, y: &analytic },
            ],
        )
    })?;
    let bundle = w.finish("noise-validate", spec)?;
    Ok((bundle, checks))
}

/// Lorentzian noise spectra per τc and sech-pulse Fourier transforms per delay.
pub fn cmd_spectrum(spec: &ExperimentSpec, opts: &CommandOptions) -> Result<OutputBundle> {
    let omegas = crate::noise::frequency_grid(spec.omega_max, spec.omega_points);

    let mut noise_header = vec!["omega".to_string()];
    noise_header.extend(spec.tau_cs.iter().map(|tc| format!("S_tc{}", tag(*tc))));
    let mut noise_table = CsvTable::new(noise_header);
    noise_table.meta("sigma", format!("{:?}", spec.sigma));
    let params: Vec<OUParams> = spec
        .tau_cs
        .iter()
        .map(|&tc| OUParams::new(spec.sigma, tc))
        .collect::<Result<_>>()?;
    for &w in &omegas {
        let mut row = vec![w];
        row.extend(params.iter().map(|p| analytic_spectrum(w, p)));
        noise_table.push(row);
    }

    let mut cd_header = vec!["omega".to_string()];
    cd_header.extend(spec.delays.iter().map(|d| format!("Fd_tau{}", tag(*d))));
    let mut cd_table = CsvTable::new(cd_header);
    cd_table.meta("T", format!("{:?}", spec.time_scale));
    for &w in &omegas {
        let mut row = vec![w];
        row.extend(spec.delays.iter().map(|&tau| cd_fourier_analytic(w, tau, 1.0)));
        cd_table.push(row);
    }

    let mut w = BundleWriter::new(opts);
    w.table("spectrum_noise.csv", &noise_table)?;
    w.table("spectrum_cd.csv", &cd_table)?;
    let columns = |t: &CsvTable| -> Vec<(String, Vec<f64>)> {
        t.header[1..].iter().map(|h| (h.clone(), t.column(h).unwrap())).collect()
    };
    let noise_cols = columns(&noise_table);
    let cd_cols = columns(&cd_table);
    w.plot("spectrum.svg", || {
        let series: Vec<Series> = noise_cols
            .iter()
            .chain(&cd_cols)
            .map(|(h, y)| Series { label: h.clone(), x: &omegas, y })
            .collect();
        line_plot_svg("spectra", "omega [1/T]", "S, F_d", &series)
    })?;
    w.finish("spectrum", spec)
}

/// Pulse areas over the simulation window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaReport {
    pub pump: f64,
    pub stokes: f64,
    pub counterdiabatic: f64,
    pub window: (f64, f64),
}

pub fn compute_areas(spec: &ExperimentSpec) -> Result<AreaReport> {
    let cfg = protocol_of(spec);
    let dt = spec.dt.unwrap_or(DEFAULT_AREA_DT);
    Ok(AreaReport {
        pump: protocol_area(&cfg, PulseChannel::Pump, dt)?,
        stokes: protocol_area(&cfg, PulseChannel::Stokes, dt)?,
        counterdiabatic: protocol_area(&cfg, PulseChannel::Counterdiabatic, dt)?,
        window: cfg.window(),
    })
}

pub fn cmd_area(spec: &ExperimentSpec, opts: &CommandOptions) -> Result<(OutputBundle, AreaReport)> {
    let report = compute_areas(spec)?;
    let mut table = CsvTable::new(["t_start", "t_end", "pump", "stokes", "cd"]);
    common_meta(&mut table, spec);
    table.meta("omega0", format!("{:?}", spec.omega0));
    table.push(vec![report.window.0, report.window.1, report.pump, report.stokes, report.counterdiabatic]);
    let mut w = BundleWriter::new(opts);
    w.table("area.csv", &table)?;
    let bundle = w.finish("area", spec)?;
    Ok((bundle, report))
}

/// Read a manifest or configuration file.
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
    crate::config::parse_spec(&text)
}
