//! Exponentially correlated (Ornstein-Uhlenbeck) level-energy noise.
//!
//! The process is advanced with the exact discrete update
//!
//! ```text
//! E  = exp(-Δt/τc)
//! ε' = ε·E + h,   h ~ N(0, σ²(1 - E²))
//! ```
//!
//! which leaves N(0, σ²) invariant for any Δt. Gaussian variates come from
//! the cosine branch of Box-Muller, one normal per pair of uniforms. Uniforms
//! are drawn from (0, 1]; a zero would put `log(0)` into the radius.
//!
//! Stationary statistics: `⟨ε(t)ε(t+s)⟩ = σ²·exp(-|s|/τc)` and
//! `S(ω) = 2σ²τc / (1 + (ωτc)²)`.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, NoiseRng};

/// Noise standard deviation (1/T) and correlation time (T).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OUParams {
    pub sigma: f64,
    pub tau_c: f64,
}

impl OUParams {
    pub fn new(sigma: f64, tau_c: f64) -> Result<Self> {
        let p = OUParams { sigma, tau_c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::domain(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.tau_c > 0.0) {
            return Err(Error::domain(format!("tau_c must be > 0, got {}", self.tau_c)));
        }
        Ok(())
    }

    /// `exp(-dt/τc)`.
    pub fn decay(&self, dt: f64) -> f64 {
        (-dt / self.tau_c).exp()
    }

    /// Largest step allowed by the τc/10 rule.
    pub fn max_step(&self) -> f64 {
        self.tau_c / 10.0
    }
}

/// What to do when a step violates `dt <= τc/10`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepPolicy {
    #[default]
    Warn,
    Strict,
}

impl StepPolicy {
    pub fn check(self, params: &OUParams, dt: f64) -> Result<()> {
        let limit = params.max_step();
        if dt > limit * (1.0 + 1e-12) {
            match self {
                StepPolicy::Warn => {
                    log::warn!("noise step dt = {dt} exceeds tau_c/10 = {limit}");
                }
                StepPolicy::Strict => return Err(Error::StepTooLarge { dt, limit }),
            }
        }
        Ok(())
    }
}

/// Uniform variate on (0, 1].
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // `random` covers [0, 1) on a 2^-53 lattice; the reflection never hits 0.
    1.0 - rng.random::<f64>()
}

/// Cosine-branch Box-Muller draw from N(0, variance).
pub fn box_muller_cos<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    let radius = uniform_open(rng);
    let angle = uniform_open(rng);
    (-2.0 * variance * radius.ln()).sqrt() * (TAU * angle).cos()
}

/// Current value of one noise channel plus its step decay factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OUState {
    pub eps: f64,
    pub decay: f64,
}

/// Draw the stationary initial value and precompute `E = exp(-dt/τc)`.
pub fn ou_seed_initial<R: Rng + ?Sized>(params: &OUParams, dt: f64, rng: &mut R) -> OUState {
    OUState {
        eps: box_muller_cos(params.sigma * params.sigma, rng),
        decay: params.decay(dt),
    }
}

/// One exact update step.
pub fn ou_advance<R: Rng + ?Sized>(state: OUState, params: &OUParams, rng: &mut R) -> OUState {
    let e = state.decay;
    let h = box_muller_cos(params.sigma * params.sigma * (1.0 - e * e), rng);
    OUState {
        eps: state.eps * e + h,
        decay: e,
    }
}

/// One OU channel bundled with the stream that drives it.
#[derive(Clone, Debug)]
pub struct OUChannel {
    pub state: OUState,
    params: OUParams,
    rng: NoiseRng,
}

impl OUChannel {
    pub fn new(params: OUParams, dt: f64, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let state = ou_seed_initial(&params, dt, &mut rng);
        OUChannel { state, params, rng }
    }

    pub fn value(&self) -> f64 {
        self.state.eps
    }

    pub fn advance(&mut self) -> f64 {
        self.state = ou_advance(self.state, &self.params, &mut self.rng);
        self.state.eps
    }
}

/// Three mutually independent channels, one per level. Channel `i` is seeded
/// with `derive_seed(run_seed, [i])`.
#[derive(Clone, Debug)]
pub struct NoiseTriple {
    channels: [OUChannel; 3],
}

impl NoiseTriple {
    pub fn new(params: OUParams, dt: f64, run_seed: u64) -> Self {
        NoiseTriple {
            channels: std::array::from_fn(|i| {
                OUChannel::new(params, dt, derive_seed(run_seed, &[i as u64]))
            }),
        }
    }

    pub fn values(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.channels[i].value())
    }

    pub fn advance(&mut self) -> [f64; 3] {
        std::array::from_fn(|i| self.channels[i].advance())
    }
}

/// Deterministic series of `n_steps + 1` values: the initial draw followed by
/// `n_steps` exact updates.
pub fn generate_series(
    params: &OUParams,
    n_steps: usize,
    dt: f64,
    seed: u64,
    policy: StepPolicy,
) -> Result<Vec<f64>> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be > 0, got {dt}")));
    }
    policy.check(params, dt)?;
    let mut channel = OUChannel::new(*params, dt, seed);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(channel.value());
    for _ in 0..n_steps {
        out.push(channel.advance());
    }
    Ok(out)
}

/// Lorentzian power spectral density `2σ²τc / (1 + (ωτc)²)`.
pub fn analytic_spectrum(omega: f64, params: &OUParams) -> f64 {
    let x = omega * params.tau_c;
    2.0 * params.sigma * params.sigma * params.tau_c / (1.0 + x * x)
}

/// `σ²·exp(-|lag|/τc)`.
pub fn analytic_autocorrelation(lag: f64, params: &OUParams) -> f64 {
    params.sigma * params.sigma * (-lag.abs() / params.tau_c).exp()
}

/// Summary statistics of a sampled series.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    /// Unbiased (n - 1) sample variance.
    pub variance: f64,
    /// Lag times `k·dt`, `k = 0..=max_lag`.
    pub lags: Vec<f64>,
    /// Biased autocovariance estimate `(1/n) Σ (x_i - m)(x_{i+k} - m)`.
    pub autocorrelation: Vec<f64>,
}

pub fn sample_stats(series: &[f64], dt: f64, max_lag: usize) -> Result<SampleStats> {
    let n = series.len();
    if n < 2 {
        return Err(Error::domain("sample_stats needs at least two samples"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let ss: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    let max_lag = max_lag.min(n - 1);
    let autocorrelation = (0..=max_lag)
        .map(|k| {
            series[..n - k]
                .iter()
                .zip(&series[k..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
        })
        .collect();
    Ok(SampleStats {
        mean,
        variance: ss / (n - 1) as f64,
        lags: (0..=max_lag).map(|k| k as f64 * dt).collect(),
        autocorrelation,
    })
}

/// Normalized histogram over `[lo, hi)` with `bins` equal bins. Returns
/// `(bin_center, density)` pairs; values outside the range are counted in
/// the normalization but not binned.
pub fn histogram(series: &[f64], bins: usize, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let bins = bins.max(1);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in series {
        if x >= lo && x < hi {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    let norm = series.len().max(1) as f64 * width;
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (lo + (k as f64 + 0.5) * width, c as f64 / norm))
        .collect()
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and
/// N(0, σ²). With σ = 0 the reference is a point mass at zero.
pub fn ks_statistic_normal(samples: &[f64], sigma: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let normal = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("sigma > 0"));
    let cdf = |x: f64| match &normal {
        Some(d) => d.cdf(x),
        None => {
            if x >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n_effective: f64) -> f64 {
    1.6276 / n_effective.sqrt()
}

/// Effective number of independent samples in an AR(1) series of length `n`
/// with lag-one correlation `rho`.
pub fn ar1_effective_samples(n: usize, rho: f64) -> f64 {
    n as f64 * (1.0 - rho) / (1.0 + rho)
}

/// Angular-frequency grid helper: `n` points uniformly on `[0, max]`.
pub fn frequency_grid(max: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n).map(|k| max * k as f64 / (n - 1) as f64).collect()
}

/// `(1/2π)·∫S(ω)dω` over `[-limit, limit]` by the trapezoid rule, for
/// checking the total noise power.
pub fn integrated_power(params: &OUParams, limit: f64, n: usize) -> f64 {
    let h = 2.0 * limit / n as f64;
    let mut acc = 0.5 * (analytic_spectrum(-limit, params) + analytic_spectrum(limit, params));
    for k in 1..n {
        acc += analytic_spectrum(-limit + k as f64 * h, params);
    }
    acc * h / (2.0 * PI)
}
