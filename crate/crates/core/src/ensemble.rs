//! Monte Carlo ensembles over stochastic runs and parameter sweeps.
//!
//! Runs execute on the ambient rayon pool. Every run derives its seed from
//! `(master_seed, run_index)` and results are reduced in run-index order once
//! all workers finish, so the output does not depend on the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::{simulate_run, RunConfig, RunResult, SimGrid};
use crate::noise::OUParams;
use crate::pulses::{ProtocolConfig, PulseFamily};
use crate::seed::derive_seed;

pub const DEFAULT_RUNS: usize = 200;

/// Lower and upper quantiles of the reported 98% interval.
pub const INTERVAL_QUANTILES: (f64, f64) = (0.01, 0.99);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub master_seed: u64,
    /// Template; its `seed` field is overwritten per run.
    pub run: RunConfig,
    /// `None` picks the default grid for each parameter point.
    pub grid: Option<SimGrid>,
}

impl EnsembleConfig {
    pub fn new(run: RunConfig, n_runs: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            n_runs,
            master_seed,
            run,
            grid: None,
        }
    }

    pub fn grid(&self) -> Result<SimGrid> {
        match self.grid {
            Some(g) => Ok(g),
            None => SimGrid::for_run(&self.run),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub mean_fidelity: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_total_population: f64,
    /// Per-run fidelities in run-index order.
    pub samples: Vec<f64>,
}

/// Neumaier-compensated sum, accumulated in slice order.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Linearly interpolated order statistic at rank `q·(n-1)`.
pub fn empirical_quantile(samples: &[f64], q: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level must lie in [0, 1], got {q}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

fn summarize(runs: &[RunResult]) -> Result<EnsembleResult> {
    let samples: Vec<f64> = runs.iter().map(|r| r.fidelity).collect();
    let totals: Vec<f64> = runs.iter().map(|r| r.total_population).collect();
    let n = samples.len() as f64;
    Ok(EnsembleResult {
        mean_fidelity: compensated_sum(&samples) / n,
        ci_low: empirical_quantile(&samples, INTERVAL_QUANTILES.0)?,
        ci_high: empirical_quantile(&samples, INTERVAL_QUANTILES.1)?,
        mean_total_population: compensated_sum(&totals) / n,
        samples,
    })
}

/// Seed of run `index` within an ensemble.
pub fn run_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, &[index as u64])
}

pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleResult> {
    if cfg.n_runs == 0 {
        return Err(Error::domain("ensemble needs at least one run"));
    }
    cfg.run.validate()?;
    let grid = cfg.grid()?;

    if !cfg.run.noise_enabled {
        // Deterministic dynamics: every run would be identical.
        let mut run = cfg.run;
        run.seed = run_seed(cfg.master_seed, 0);
        run.record_trajectory = false;
        let r = simulate_run(&run, &grid)?;
        return summarize(&vec![r; cfg.n_runs]);
    }

    let outcomes: Vec<Result<RunResult>> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|i| {
            let mut run = cfg.run;
            run.seed = run_seed(cfg.master_seed, i);
            run.record_trajectory = false;
            simulate_run(&run, &grid)
        })
        .collect();

    let mut runs = Vec::with_capacity(cfg.n_runs);
    let mut failed = Vec::new();
    let mut first = None;
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => runs.push(r),
            Err(e) => {
                failed.push(i);
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        return Err(Error::EnsembleDiverged {
            failed,
            first: Box::new(first),
        });
    }
    summarize(&runs)
}

/// Run `f` on a dedicated pool with `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    pool.install(f)
}

/// Parameters held fixed along a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepMeta {
    pub family: PulseFamily,
    pub cd_enabled: bool,
    pub gamma: f64,
    /// `None` for the noise-free column.
    pub tau_c: Option<f64>,
    pub sigma: f64,
    pub tau: f64,
    pub width: f64,
    pub n_runs: usize,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub omega0: Vec<f64>,
    pub points: Vec<EnsembleResult>,
    pub meta: SweepMeta,
}

fn meta_of(base: &EnsembleConfig) -> SweepMeta {
    let p = &base.run.protocol;
    SweepMeta {
        family: p.family,
        cd_enabled: p.cd_enabled,
        gamma: base.run.gamma,
        tau_c: base.run.noise_enabled.then_some(base.run.noise.tau_c),
        sigma: base.run.noise.sigma,
        tau: p.tau,
        width: p.width,
        n_runs: base.n_runs,
        master_seed: base.master_seed,
    }
}

/// One ensemble per peak amplitude. Point `k` uses master seed
/// `derive_seed(base.master_seed, [k])`.
pub fn sweep_amplitude(base: &EnsembleConfig, omega0_values: &[f64]) -> Result<SweepResult> {
    if omega0_values.is_empty() {
        return Err(Error::domain("amplitude sweep needs at least one value"));
    }
    if let Some(bad) = omega0_values.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::domain(format!("omega0 values must be >= 0, got {bad}")));
    }
    let points = omega0_values
        .par_iter()
        .enumerate()
        .map(|(k, &w)| {
            let mut cfg = *base;
            cfg.run.protocol.omega0 = w;
            cfg.master_seed = derive_seed(base.master_seed, &[k as u64]);
            run_ensemble(&cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        omega0: omega0_values.to_vec(),
        points,
        meta: meta_of(base),
    })
}

/// `n` points uniform on `[0, max]`.
pub fn amplitude_grid(max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect(),
    }
}

/// All sweeps sharing one (Γ, delay) pair: the noise-free column first, then
/// one column per correlation time.
#[derive(Clone, Debug, PartialEq)]
pub struct Panel {
    pub gamma: f64,
    /// Half-delay τ; `None` for the sin-cos family.
    pub tau: Option<f64>,
    pub columns: Vec<SweepResult>,
}

/// Cartesian product over dissipation rates, correlation times and delays.
/// Each panel holds a noise-free column followed by one column per entry of
/// `tau_cs`. For the sin-cos family `delays` is ignored. All sweeps reuse
/// `base.master_seed`, so a one-point product reproduces [`sweep_amplitude`].
pub fn sweep_matrix(
    base: &EnsembleConfig,
    omega0_values: &[f64],
    gammas: &[f64],
    tau_cs: &[f64],
    delays: &[f64],
) -> Result<Vec<Panel>> {
    if gammas.is_empty() {
        return Err(Error::domain("sweep matrix needs at least one gamma"));
    }
    let delay_axis: Vec<Option<f64>> = match base.run.protocol.family {
        PulseFamily::SinCos => vec![None],
        PulseFamily::Gaussian => {
            if delays.is_empty() {
                return Err(Error::domain("gaussian sweep matrix needs at least one delay"));
            }
            delays.iter().map(|&d| Some(d)).collect()
        }
    };
    let mut column_noise: Vec<Option<f64>> = vec![None];
    column_noise.extend(tau_cs.iter().map(|&t| Some(t)));

    let mut panels = Vec::with_capacity(delay_axis.len() * gammas.len());
    for &tau in &delay_axis {
        for &gamma in gammas {
            let mut columns = Vec::with_capacity(column_noise.len());
            for &tau_c in &column_noise {
                let mut cfg = *base;
                cfg.run.gamma = gamma;
                if let Some(tau) = tau {
                    cfg.run.protocol.tau = tau;
                }
                match tau_c {
                    Some(tc) => {
                        cfg.run.noise = OUParams { sigma: base.run.noise.sigma, tau_c: tc };
                        cfg.run.noise_enabled = true;
                    }
                    None => cfg.run.noise_enabled = false,
                }
                columns.push(sweep_amplitude(&cfg, omega0_values)?);
            }
            panels.push(Panel { gamma, tau, columns });
        }
    }
    Ok(panels)
}

/// Convenience constructor for a protocol-level ensemble template.
pub fn ensemble_for(
    protocol: ProtocolConfig,
    gamma: f64,
    noise: Option<OUParams>,
    n_runs: usize,
    master_seed: u64,
) -> EnsembleConfig {
    let run = match noise {
        Some(n) => RunConfig::noisy(protocol, gamma, n, 0),
        None => RunConfig::noiseless(protocol, gamma),
    };
    EnsembleConfig::new(run, n_runs, master_seed)
}
