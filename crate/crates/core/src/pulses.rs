//! Gaussian and sin-cos pulse families with their counterdiabatic drives.
//!
//! Rates are in units of 1/T and times in units of T, where T is the
//! configured `width`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Half-width of the Gaussian simulation window, in units of the pulse width.
pub const GAUSSIAN_WINDOW_HALF_WIDTHS: f64 = 3.0;

/// Default quadrature step for [`pulse_area`], in units of T.
pub const DEFAULT_AREA_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PulseFamily {
    Gaussian,
    SinCos,
}

impl fmt::Display for PulseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PulseFamily::Gaussian => "gaussian",
            PulseFamily::SinCos => "sincos",
        })
    }
}

impl FromStr for PulseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "gauss" => Ok(PulseFamily::Gaussian),
            "sincos" | "sin-cos" | "sin_cos" => Ok(PulseFamily::SinCos),
            other => Err(Error::domain(format!(
                "unknown pulse family '{other}' (expected gaussian or sincos)"
            ))),
        }
    }
}

/// Pulse protocol: family, peak amplitude, half-delay, width and whether the
/// counterdiabatic field is applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub family: PulseFamily,
    pub omega0: f64,
    /// Half the pump/Stokes delay. Ignored by the sin-cos family.
    pub tau: f64,
    pub width: f64,
    pub cd_enabled: bool,
}

impl ProtocolConfig {
    pub fn gaussian(omega0: f64, tau: f64, cd_enabled: bool) -> Self {
        ProtocolConfig {
            family: PulseFamily::Gaussian,
            omega0,
            tau,
            width: 1.0,
            cd_enabled,
        }
    }

    pub fn sincos(omega0: f64, cd_enabled: bool) -> Self {
        ProtocolConfig {
            family: PulseFamily::SinCos,
            omega0,
            tau: 0.0,
            width: 1.0,
            cd_enabled,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0 >= 0.0) || !self.omega0.is_finite() {
            return Err(Error::domain(format!("omega0 must be >= 0, got {}", self.omega0)));
        }
        if !(self.width > 0.0) || !self.width.is_finite() {
            return Err(Error::domain(format!("width must be > 0, got {}", self.width)));
        }
        if self.family == PulseFamily::Gaussian && !(self.tau > 0.0) {
            return Err(Error::domain(format!(
                "gaussian protocol requires tau > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    /// Simulation window `[t_start, t_end]`.
    pub fn window(&self) -> (f64, f64) {
        match self.family {
            PulseFamily::Gaussian => {
                let half = GAUSSIAN_WINDOW_HALF_WIDTHS * self.width;
                (-half, half)
            }
            PulseFamily::SinCos => (0.0, self.width),
        }
    }

    /// Pulse values at `t`. `omega_d` is the counterdiabatic profile regardless
    /// of `cd_enabled`.
    pub fn sample(&self, t: f64) -> Result<PulseSample> {
        match self.family {
            PulseFamily::Gaussian => Ok(sample_gaussian(t, self)),
            PulseFamily::SinCos => sample_sincos(t, self),
        }
    }

    /// Peak value of the counterdiabatic profile.
    pub fn peak_omega_d(&self) -> f64 {
        match self.family {
            PulseFamily::Gaussian => 4.0 * self.tau / (self.width * self.width),
            PulseFamily::SinCos => PI / self.width,
        }
    }

    pub fn theta(&self, t: f64) -> f64 {
        match self.family {
            PulseFamily::Gaussian => theta_gaussian(t, self.tau, self.width),
            PulseFamily::SinCos => theta_sincos(t, self.width),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseSample {
    pub omega_p: f64,
    pub omega_s: f64,
    pub omega_d: f64,
}

pub fn sech(x: f64) -> f64 {
    // cosh overflows near |x| = 710; exp(-|x|) keeps the tail finite.
    let a = x.abs();
    if a > 20.0 {
        2.0 * (-a).exp()
    } else {
        1.0 / a.cosh()
    }
}

/// Gudermannian function, the antiderivative of sech.
pub fn gudermannian(x: f64) -> f64 {
    2.0 * (x / 2.0).tanh().atan()
}

pub fn sample_gaussian(t: f64, cfg: &ProtocolConfig) -> PulseSample {
    let w = cfg.width;
    let tau = cfg.tau;
    let rate = 4.0 * tau / (w * w);
    PulseSample {
        omega_p: cfg.omega0 * (-((t - tau) / w).powi(2)).exp(),
        omega_s: cfg.omega0 * (-((t + tau) / w).powi(2)).exp(),
        omega_d: rate * sech(rate * t),
    }
}

/// Evaluations within this distance outside `[0, T]` are clamped to the
/// window edge; grid arithmetic lands a few ulps past `T`.
const SINCOS_EDGE_SLACK: f64 = 1e-9;

pub fn sample_sincos(t: f64, cfg: &ProtocolConfig) -> Result<PulseSample> {
    let w = cfg.width;
    if t < -SINCOS_EDGE_SLACK * w || t > w * (1.0 + SINCOS_EDGE_SLACK) {
        return Err(Error::domain(format!(
            "sin-cos pulses are defined on [0, {w}], got t = {t}"
        )));
    }
    let t = t.clamp(0.0, w);
    let (s, c) = (PI * t / (2.0 * w)).sin_cos();
    Ok(PulseSample {
        omega_p: cfg.omega0 * s,
        omega_s: cfg.omega0 * c,
        omega_d: PI / w,
    })
}

/// Mixing angle of the Gaussian pair, `arctan(exp(4τt/T²))`.
pub fn theta_gaussian(t: f64, tau: f64, width: f64) -> f64 {
    (4.0 * tau * t / (width * width)).exp().atan()
}

pub fn theta_sincos(t: f64, width: f64) -> f64 {
    FRAC_PI_2 * t / width
}

/// Composite Simpson integral of `pulse` over `[t_start, t_end]` with step
/// close to `dt` (rounded so the interval count is even).
pub fn pulse_area<F>(pulse: F, window: (f64, f64), dt: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (a, b) = window;
    if !(dt > 0.0) {
        return Err(Error::domain(format!("pulse_area needs dt > 0, got {dt}")));
    }
    if !(b > a) {
        return Err(Error::domain(format!("pulse_area needs t_end > t_start, got [{a}, {b}]")));
    }
    let mut n = ((b - a) / dt).round().max(2.0) as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..n {
        let v = pulse(a + k as f64 * h);
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    Ok(h / 3.0 * (pulse(a) + pulse(b) + 4.0 * odd + 2.0 * even))
}

/// Fourier transform of the Gaussian protocol's sech counterdiabatic pulse,
/// `π·sech(πT²ω / 8τ)`.
pub fn cd_fourier_analytic(omega: f64, tau: f64, width: f64) -> f64 {
    PI * sech(PI * width * width * omega / (8.0 * tau))
}

/// Which pulse of a protocol to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseChannel {
    Pump,
    Stokes,
    Counterdiabatic,
}

/// Area of one channel of `cfg` over its simulation window.
pub fn protocol_area(cfg: &ProtocolConfig, channel: PulseChannel, dt: f64) -> Result<f64> {
    cfg.validate()?;
    let pick = |t: f64| {
        let s = cfg.sample(t).expect("window sample");
        match channel {
            PulseChannel::Pump => s.omega_p,
            PulseChannel::Stokes => s.omega_s,
            PulseChannel::Counterdiabatic => s.omega_d,
        }
    };
    pulse_area(pick, cfg.window(), dt)
}
