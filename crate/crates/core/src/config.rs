//! Line-oriented `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Numbers accept a plain decimal
//! form or a fraction `a/b`; lists are comma-separated. Every key except
//! `family` has a default, and unknown keys are rejected.

use std::fmt::Write as _;

use crate::ensemble::{amplitude_grid, DEFAULT_RUNS};
use crate::error::{Error, Result};
use crate::pulses::PulseFamily;

/// Master seed used when a configuration does not name one.
pub const DEFAULT_SEED: u64 = 2020;

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "STIRAP_OUT_DIR";

/// Which counterdiabatic settings an amplitude sweep covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdSelection {
    Off,
    On,
    Both,
}

impl CdSelection {
    pub fn modes(self) -> Vec<bool> {
        match self {
            CdSelection::Off => vec![false],
            CdSelection::On => vec![true],
            CdSelection::Both => vec![false, true],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            CdSelection::Off => "false",
            CdSelection::On => "true",
            CdSelection::Both => "both",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub family: PulseFamily,
    pub omega0: f64,
    /// Half-delay τ/T (gaussian only).
    pub tau_over_t: f64,
    pub cd: bool,
    pub gamma: f64,
    pub sigma: f64,
    /// `None` disables noise.
    pub tau_c: Option<f64>,
    pub n_runs: usize,
    pub seed: u64,
    /// `None` selects the default step rule.
    pub dt: Option<f64>,
    pub out_dir: String,
    /// Pulse width in physical units, used for axis labels only.
    pub time_scale: f64,
    pub trajectory_stride: usize,

    pub omega0_max: f64,
    pub omega0_points: usize,
    pub sweep_cd: CdSelection,
    pub gammas: Vec<f64>,
    pub tau_cs: Vec<f64>,
    pub delays: Vec<f64>,

    pub noise_samples: usize,
    pub noise_iterations: usize,
    pub hist_bins: usize,
    pub max_lag_tau_c: f64,

    pub omega_max: f64,
    pub omega_points: usize,
}

impl ExperimentSpec {
    /// All defaults for the given family.
    pub fn defaults(family: PulseFamily) -> Self {
        ExperimentSpec {
            family,
            omega0: 5.0,
            tau_over_t: 0.75,
            cd: true,
            gamma: 0.0,
            sigma: 5.0,
            tau_c: None,
            n_runs: DEFAULT_RUNS,
            seed: DEFAULT_SEED,
            dt: None,
            out_dir: std::env::var(OUT_DIR_ENV).unwrap_or_else(|_| "out".to_string()),
            time_scale: 1.0,
            trajectory_stride: 1,
            omega0_max: 60.0,
            omega0_points: 61,
            sweep_cd: CdSelection::Both,
            gammas: vec![0.0, 1.0, 4.0, 10.0],
            tau_cs: vec![0.008, 0.08, 0.8],
            delays: vec![0.25, 1.0 / 3.0, 0.5, 0.75],
            noise_samples: 1_000_000,
            noise_iterations: 10,
            hist_bins: 100,
            max_lag_tau_c: 5.0,
            omega_max: 100.0,
            omega_points: 401,
        }
    }

    pub fn omega0_values(&self) -> Vec<f64> {
        amplitude_grid(self.omega0_max, self.omega0_points)
    }
}

fn parse_number(raw: &str) -> std::result::Result<f64, String> {
    let s = raw.trim();
    let value = if let Some((num, den)) = s.split_once('/') {
        let n: f64 = num.trim().parse().map_err(|_| format!("cannot parse '{s}' as a number"))?;
        let d: f64 = den.trim().parse().map_err(|_| format!("cannot parse '{s}' as a number"))?;
        n / d
    } else {
        s.parse::<f64>().map_err(|_| format!("cannot parse '{s}' as a number"))?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{s}' is not a finite number"))
    }
}

fn parse_list(raw: &str) -> std::result::Result<Vec<f64>, String> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_number).collect()
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected a boolean, got '{other}'")),
    }
}

fn parse_count(raw: &str) -> std::result::Result<usize, String> {
    raw.trim()
        .replace('_', "")
        .parse::<usize>()
        .or_else(|_| {
            // Allow 1e6-style counts.
            let v = parse_number(raw)?;
            if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
                Ok(v as usize)
            } else {
                Err(format!("expected a nonnegative integer, got '{}'", raw.trim()))
            }
        })
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Parse and validate a configuration document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let (spec, warnings) = parse_spec_with_warnings(text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(spec)
}

/// Like [`parse_spec`], returning non-fatal warnings instead of logging them.
pub fn parse_spec_with_warnings(text: &str) -> Result<(ExperimentSpec, Vec<String>)> {
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.split_once('#') {
            Some((before, _)) => before,
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected 'key = value', got '{line}'"),
        })?;
        let key = key.trim().to_string();
        if let Some((prev, _, _)) = entries.iter().find(|(_, k, _)| *k == key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key '{key}' (first set on line {prev})"),
            });
        }
        entries.push((line_no, key, value.trim().to_string()));
    }

    let family_entry = entries.iter().find(|(_, k, _)| k == "family");
    let family = match family_entry {
        Some((line, _, v)) => v.parse::<PulseFamily>().map_err(|e| Error::Parse {
            line: *line,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Parse {
                line: 0,
                message: "missing required key 'family'".into(),
            })
        }
    };

    let mut spec = ExperimentSpec::defaults(family);
    let mut warnings = Vec::new();
    for (line, key, value) in &entries {
        apply(&mut spec, key, value, &mut warnings).map_err(|message| Error::Parse {
            line: *line,
            message,
        })?;
    }
    Ok((spec, warnings))
}

fn apply(
    spec: &mut ExperimentSpec,
    key: &str,
    value: &str,
    warnings: &mut Vec<String>,
) -> std::result::Result<(), String> {
    let nonneg = |v: f64, name: &str| require(v >= 0.0, || format!("{name} must be >= 0, got {v}"));
    let positive = |v: f64, name: &str| require(v > 0.0, || format!("{name} must be > 0, got {v}"));
    match key {
        "family" => {}
        "omega0" => {
            let v = parse_number(value)?;
            nonneg(v, key)?;
            spec.omega0 = v;
        }
        "tau_over_T" => {
            let v = parse_number(value)?;
            positive(v, key)?;
            if spec.family == PulseFamily::SinCos {
                warnings.push("tau_over_T is ignored for the sincos family".into());
            }
            spec.tau_over_t = v;
        }
        "cd" => spec.cd = parse_bool(value)?,
        "gamma" => {
            let v = parse_number(value)?;
            nonneg(v, key)?;
            spec.gamma = v;
        }
        "sigma" => {
            let v = parse_number(value)?;
            nonneg(v, key)?;
            spec.sigma = v;
        }
        "tau_c" => {
            spec.tau_c = if value.eq_ignore_ascii_case("off") || value.eq_ignore_ascii_case("none") {
                None
            } else {
                let v = parse_number(value)?;
                positive(v, key)?;
                Some(v)
            };
        }
        "n_runs" => {
            let v = parse_count(value)?;
            require(v >= 1, || "n_runs must be >= 1".into())?;
            spec.n_runs = v;
        }
        "seed" => {
            spec.seed = value
                .parse::<u64>()
                .map_err(|_| format!("seed must be an unsigned 64-bit integer, got '{value}'"))?;
        }
        "dt" => {
            spec.dt = if value.eq_ignore_ascii_case("auto") {
                None
            } else {
                let v = parse_number(value)?;
                positive(v, key)?;
                Some(v)
            };
        }
        "out_dir" => {
            require(!value.is_empty(), || "out_dir must not be empty".into())?;
            spec.out_dir = value.to_string();
        }
        "T" => {
            let v = parse_number(value)?;
            positive(v, key)?;
            spec.time_scale = v;
        }
        "trajectory_stride" => {
            let v = parse_count(value)?;
            require(v >= 1, || "trajectory_stride must be >= 1".into())?;
            spec.trajectory_stride = v;
        }
        "omega0_max" => {
            let v = parse_number(value)?;
            nonneg(v, key)?;
            spec.omega0_max = v;
        }
        "omega0_points" => {
            let v = parse_count(value)?;
            require(v >= 1, || "omega0_points must be >= 1".into())?;
            spec.omega0_points = v;
        }
        "sweep_cd" => {
            spec.sweep_cd = match value.to_ascii_lowercase().as_str() {
                "both" => CdSelection::Both,
                other => {
                    if parse_bool(other)? {
                        CdSelection::On
                    } else {
                        CdSelection::Off
                    }
                }
            };
        }
        "gammas" => {
            let v = parse_list(value)?;
            require(!v.is_empty(), || "gammas must not be empty".into())?;
            for g in &v {
                nonneg(*g, key)?;
            }
            spec.gammas = v;
        }
        "tau_cs" => {
            let v = parse_list(value)?;
            for t in &v {
                positive(*t, key)?;
            }
            spec.tau_cs = v;
        }
        "delays" => {
            let v = parse_list(value)?;
            require(!v.is_empty(), || "delays must not be empty".into())?;
            for d in &v {
                positive(*d, key)?;
            }
            if spec.family == PulseFamily::SinCos {
                warnings.push("delays are ignored for the sincos family".into());
            }
            spec.delays = v;
        }
        "noise_samples" => {
            let v = parse_count(value)?;
            require(v >= 2, || "noise_samples must be >= 2".into())?;
            spec.noise_samples = v;
        }
        "noise_iterations" => {
            let v = parse_count(value)?;
            require(v >= 1, || "noise_iterations must be >= 1".into())?;
            spec.noise_iterations = v;
        }
        "hist_bins" => {
            let v = parse_count(value)?;
            require(v >= 1, || "hist_bins must be >= 1".into())?;
            spec.hist_bins = v;
        }
        "max_lag_tau_c" => {
            let v = parse_number(value)?;
            nonneg(v, key)?;
            spec.max_lag_tau_c = v;
        }
        "omega_max" => {
            let v = parse_number(value)?;
            positive(v, key)?;
            spec.omega_max = v;
        }
        "omega_points" => {
            let v = parse_count(value)?;
            require(v >= 2, || "omega_points must be >= 2".into())?;
            spec.omega_points = v;
        }
        other => return Err(format!("unknown key '{other}'")),
    }
    Ok(())
}

fn render_list(values: &[f64]) -> String {
    if values.is_empty() {
        "none".to_string()
    } else {
        values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ")
    }
}

/// Render a spec so that `parse_spec(render_spec(s)) == s`. Floats use the
/// shortest round-trip representation.
pub fn render_spec(spec: &ExperimentSpec) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("family", spec.family.to_string());
    kv("omega0", format!("{:?}", spec.omega0));
    kv("tau_over_T", format!("{:?}", spec.tau_over_t));
    kv("cd", spec.cd.to_string());
    kv("gamma", format!("{:?}", spec.gamma));
    kv("sigma", format!("{:?}", spec.sigma));
    kv(
        "tau_c",
        spec.tau_c.map_or_else(|| "off".to_string(), |t| format!("{t:?}")),
    );
    kv("n_runs", spec.n_runs.to_string());
    kv("seed", spec.seed.to_string());
    kv("dt", spec.dt.map_or_else(|| "auto".to_string(), |d| format!("{d:?}")));
    kv("out_dir", spec.out_dir.clone());
    kv("T", format!("{:?}", spec.time_scale));
    kv("trajectory_stride", spec.trajectory_stride.to_string());
    kv("omega0_max", format!("{:?}", spec.omega0_max));
    kv("omega0_points", spec.omega0_points.to_string());
    kv("sweep_cd", spec.sweep_cd.as_str().to_string());
    kv("gammas", render_list(&spec.gammas));
    kv("tau_cs", render_list(&spec.tau_cs));
    kv("delays", render_list(&spec.delays));
    kv("noise_samples", spec.noise_samples.to_string());
    kv("noise_iterations", spec.noise_iterations.to_string());
    kv("hist_bins", spec.hist_bins.to_string());
    kv("max_lag_tau_c", format!("{:?}", spec.max_lag_tau_c));
    kv("omega_max", format!("{:?}", spec.omega_max));
    kv("omega_points", spec.omega_points.to_string());
    out
}
