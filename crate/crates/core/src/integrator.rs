//! Fixed-step RK4 propagation of `dψ/dt = -(i/2)·M(t)·ψ`.
//!
//! `M(t)` combines the pump/Stokes block with its `-iΓ` loss, the optional
//! counterdiabatic coupling and the diagonal OU noise. Pulses are evaluated
//! analytically at each RK4 stage; the noise is refreshed once per step and
//! held fixed across the four stages.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{build_hcd, build_heps, h0_unchecked, HamiltonianMatrix, ThreeLevelState};
use crate::noise::{NoiseTriple, OUParams, StepPolicy};
use crate::pulses::ProtocolConfig;

/// Abort threshold for the total population.
pub const DIVERGENCE_LIMIT: f64 = 1.0 + 1e-6;

/// Upper bound on the step from dynamics alone, in units of T.
pub const MAX_DT: f64 = 1e-3;

/// Steps per fastest Rabi period.
pub const STEPS_PER_RABI_PERIOD: f64 = 40.0;

/// Uniform time grid over `[t_start, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl SimGrid {
    /// Grid with `round(span/dt_target)` steps; the actual `dt` is adjusted so
    /// the last step lands on `t_end`.
    pub fn new(t_start: f64, t_end: f64, dt_target: f64) -> Result<Self> {
        if !(t_end > t_start) {
            return Err(Error::domain(format!("empty window [{t_start}, {t_end}]")));
        }
        if !(dt_target > 0.0) {
            return Err(Error::domain(format!("dt must be > 0, got {dt_target}")));
        }
        let span = t_end - t_start;
        let n_steps = ((span / dt_target).round() as usize).max(1);
        Ok(SimGrid {
            t_start,
            t_end,
            dt: span / n_steps as f64,
            n_steps,
        })
    }

    /// Grid over the protocol window with the default step rule.
    pub fn for_run(cfg: &RunConfig) -> Result<Self> {
        let (a, b) = cfg.protocol.window();
        SimGrid::new(a, b, default_dt(cfg))
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t_start + k as f64 * self.dt
        }
    }

    /// Same window with the step halved.
    pub fn refined(&self) -> Self {
        SimGrid {
            dt: self.dt / 2.0,
            n_steps: self.n_steps * 2,
            ..*self
        }
    }
}

/// `min(τc/10, 2π/(40·Ω_max), T/1000)` where `Ω_max = sqrt(Ω0² + max Ωd²)`;
/// the τc term only applies with noise on.
pub fn default_dt(cfg: &RunConfig) -> f64 {
    let p = &cfg.protocol;
    let omega_d = if p.cd_enabled { p.peak_omega_d() } else { 0.0 };
    let omega_max = p.omega0.hypot(omega_d);
    let mut dt = MAX_DT * p.width;
    if omega_max > 0.0 {
        dt = dt.min(TAU / (STEPS_PER_RABI_PERIOD * omega_max));
    }
    if cfg.noise_enabled {
        dt = dt.min(cfg.noise.max_step());
    }
    dt
}

/// Everything needed to reproduce one stochastic trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub protocol: ProtocolConfig,
    pub gamma: f64,
    pub noise: OUParams,
    pub noise_enabled: bool,
    pub seed: u64,
    pub record_trajectory: bool,
}

impl RunConfig {
    pub fn noiseless(protocol: ProtocolConfig, gamma: f64) -> Self {
        RunConfig {
            protocol,
            gamma,
            noise: OUParams { sigma: 0.0, tau_c: 1.0 },
            noise_enabled: false,
            seed: 0,
            record_trajectory: false,
        }
    }

    pub fn noisy(protocol: ProtocolConfig, gamma: f64, noise: OUParams, seed: u64) -> Self {
        RunConfig {
            protocol,
            gamma,
            noise,
            noise_enabled: true,
            seed,
            record_trajectory: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.protocol.validate()?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::domain(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if self.noise_enabled {
            self.noise.validate()?;
        }
        Ok(())
    }

    /// Full matrix at time `t` for the given noise values.
    pub fn hamiltonian(&self, t: f64, eps: [f64; 3]) -> Result<HamiltonianMatrix> {
        let s = self.protocol.sample(t)?;
        let mut m = h0_unchecked(s.omega_p, s.omega_s, self.gamma);
        if self.protocol.cd_enabled {
            m += build_hcd(s.omega_d);
        }
        if eps != [0.0; 3] {
            m += build_heps(eps[0], eps[1], eps[2]);
        }
        Ok(m)
    }
}

/// Source of per-step level-energy noise.
pub trait NoiseSource {
    /// Values to use for the next step.
    fn next_step(&mut self) -> [f64; 3];
}

/// No noise at all.
#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl NoiseSource for Silent {
    fn next_step(&mut self) -> [f64; 3] {
        [0.0; 3]
    }
}

impl NoiseSource for NoiseTriple {
    fn next_step(&mut self) -> [f64; 3] {
        self.advance()
    }
}

/// Adds a constant to every channel of an inner source.
#[derive(Clone, Debug)]
pub struct Shifted<S> {
    pub inner: S,
    pub offset: f64,
}

impl<S: NoiseSource> NoiseSource for Shifted<S> {
    fn next_step(&mut self) -> [f64; 3] {
        self.inner.next_step().map(|e| e + self.offset)
    }
}

/// Time series of populations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub p3: Vec<f64>,
    pub total: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(n: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(n),
            p1: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            p3: Vec::with_capacity(n),
            total: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, t: f64, state: &ThreeLevelState) {
        let p = state.populations();
        self.times.push(t);
        self.p1.push(p.p1);
        self.p2.push(p.p2);
        self.p3.push(p.p3);
        self.total.push(p.total);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    /// Final population of |3⟩.
    pub fidelity: f64,
    /// Final total population.
    pub total_population: f64,
    pub trajectory: Option<Trajectory>,
}

/// `-(i/2)·M·ψ`.
#[inline]
pub fn rhs(_t: f64, state: &ThreeLevelState, m: &HamiltonianMatrix) -> ThreeLevelState {
    let mut v = m.apply(state);
    let k = C64::new(0.0, -0.5);
    for c in v.0.iter_mut() {
        *c *= k;
    }
    v
}

/// Classical fourth-order Runge-Kutta step. `hamiltonian_at` is called at
/// `t`, `t + dt/2` (once, shared by the two midpoint stages) and `t + dt`.
pub fn rk4_step<F>(t: f64, state: &ThreeLevelState, dt: f64, mut hamiltonian_at: F) -> ThreeLevelState
where
    F: FnMut(f64) -> HamiltonianMatrix,
{
    let m0 = hamiltonian_at(t);
    let m_half = hamiltonian_at(t + 0.5 * dt);
    let m1 = hamiltonian_at(t + dt);
    rk4_step_with(t, state, dt, &m0, &m_half, &m1)
}

#[inline]
fn rk4_step_with(
    t: f64,
    state: &ThreeLevelState,
    dt: f64,
    m0: &HamiltonianMatrix,
    m_half: &HamiltonianMatrix,
    m1: &HamiltonianMatrix,
) -> ThreeLevelState {
    let k1 = rhs(t, state, m0);
    let k2 = rhs(t + 0.5 * dt, &state.axpy(0.5 * dt, &k1), m_half);
    let k3 = rhs(t + 0.5 * dt, &state.axpy(0.5 * dt, &k2), m_half);
    let k4 = rhs(t + dt, &state.axpy(dt, &k3), m1);
    let mut out = *state;
    for i in 0..3 {
        out.0[i] += (k1.0[i] + 2.0 * (k2.0[i] + k3.0[i]) + k4.0[i]) * (dt / 6.0);
    }
    out
}

/// Propagate from |1⟩ over `grid`, calling `observe(k, t_k, ψ_k)` at every
/// grid point including the initial one. Returns the final state.
pub fn propagate<N, O>(
    cfg: &RunConfig,
    grid: &SimGrid,
    noise: &mut N,
    mut observe: O,
) -> Result<ThreeLevelState>
where
    N: NoiseSource + ?Sized,
    O: FnMut(usize, f64, &ThreeLevelState),
{
    cfg.validate()?;
    let mut psi = ThreeLevelState::GROUND;
    observe(0, grid.t_start, &psi);

    // Pulse-only part at the left edge; reused from the previous step's
    // right edge.
    let mut base_left = cfg.hamiltonian(grid.time(0), [0.0; 3])?;
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let t_next = grid.time(k + 1);
        let dt = t_next - t;
        let eps = noise.next_step();
        let noise_m = build_heps(eps[0], eps[1], eps[2]);

        let base_half = cfg.hamiltonian(t + 0.5 * dt, [0.0; 3])?;
        let base_right = cfg.hamiltonian(t_next, [0.0; 3])?;
        psi = rk4_step_with(
            t,
            &psi,
            dt,
            &(base_left + noise_m),
            &(base_half + noise_m),
            &(base_right + noise_m),
        );
        base_left = base_right;

        if !psi.is_finite() {
            return Err(Error::Diverged {
                step: k + 1,
                time: t_next,
                reason: "non-finite amplitude".into(),
            });
        }
        let total = psi.populations().total;
        if total > DIVERGENCE_LIMIT {
            return Err(Error::Diverged {
                step: k + 1,
                time: t_next,
                reason: format!(
                    "total population {total:.9} exceeds 1; reduce dt (currently {dt:.3e})"
                ),
            });
        }
        observe(k + 1, t_next, &psi);
    }
    Ok(psi)
}

/// Run one trajectory with noise channels seeded from `cfg.seed`.
pub fn simulate_run(cfg: &RunConfig, grid: &SimGrid) -> Result<RunResult> {
    if cfg.noise_enabled {
        cfg.noise.validate()?;
        StepPolicy::Warn.check(&cfg.noise, grid.dt)?;
        let mut noise = NoiseTriple::new(cfg.noise, grid.dt, cfg.seed);
        simulate_with_noise(cfg, grid, &mut noise)
    } else {
        simulate_with_noise(cfg, grid, &mut Silent)
    }
}

/// Run one trajectory with an explicit noise source.
pub fn simulate_with_noise<N: NoiseSource + ?Sized>(
    cfg: &RunConfig,
    grid: &SimGrid,
    noise: &mut N,
) -> Result<RunResult> {
    let mut trajectory = cfg
        .record_trajectory
        .then(|| Trajectory::with_capacity(grid.n_steps + 1));
    let psi = propagate(cfg, grid, noise, |_, t, state| {
        if let Some(tr) = trajectory.as_mut() {
            tr.push(t, state);
        }
    })?;
    let p = psi.populations();
    Ok(RunResult {
        fidelity: p.p3,
        total_population: p.total,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_h0;

    #[test]
    fn rhs_of_zero_matrix_vanishes() {
        let psi = ThreeLevelState::new(C64::new(0.3, 0.1), C64::new(-0.2, 0.5), C64::new(0.0, 1.0));
        let d = rhs(0.0, &psi, &HamiltonianMatrix::zero());
        assert_eq!(d, ThreeLevelState::zero());
    }

    #[test]
    fn rhs_pure_loss() {
        let gamma = 0.8;
        let m = build_h0(0.0, 0.0, gamma).unwrap();
        let psi = ThreeLevelState::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let d = rhs(0.0, &psi, &m);
        assert_eq!(d.0[1], C64::new(-gamma / 2.0, 0.0));
        assert_eq!(d.0[0], C64::new(0.0, 0.0));
    }

    #[test]
    fn rk4_zero_matrix_is_identity() {
        let psi = ThreeLevelState::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0));
        let out = rk4_step(0.0, &psi, 0.1, |_| HamiltonianMatrix::zero());
        assert_eq!(out, psi);
    }

    #[test]
    fn rk4_single_decay_step() {
        let gamma = 1.0;
        let dt = 0.01;
        let psi = ThreeLevelState::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let m = build_h0(0.0, 0.0, gamma).unwrap();
        let out = rk4_step(0.0, &psi, dt, |_| m);
        assert!((out.0[1].norm_sqr() - (-gamma * dt).exp()).abs() <= 1e-10);
    }

    #[test]
    fn grid_lands_on_end() {
        let g = SimGrid::new(-3.0, 3.0, 1e-3).unwrap();
        assert_eq!(g.n_steps, 6000);
        assert_eq!(g.time(g.n_steps), 3.0);
        assert!(SimGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(SimGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn default_dt_rules() {
        let sa = ProtocolConfig::gaussian(60.0, 0.5, true);
        let mut cfg = RunConfig::noiseless(sa, 0.0);
        assert_eq!(default_dt(&cfg), 1e-3);
        cfg.noise = OUParams { sigma: 5.0, tau_c: 0.008 };
        cfg.noise_enabled = true;
        assert!((default_dt(&cfg) - 8e-4).abs() < 1e-15);
        let fast = RunConfig::noiseless(ProtocolConfig::sincos(200.0, false), 0.0);
        assert!((default_dt(&fast) - TAU / 8000.0).abs() < 1e-15);
    }

    #[test]
    fn no_couplings_means_no_transfer() {
        let cfg = RunConfig::noiseless(ProtocolConfig::sincos(0.0, false), 3.0);
        let grid = SimGrid::for_run(&cfg).unwrap();
        let r = simulate_run(&cfg, &grid).unwrap();
        assert_eq!(r.fidelity, 0.0);
        assert_eq!(r.total_population, 1.0);
    }

    #[test]
    fn bare_cd_pulse_is_a_pi_pulse() {
        let cfg = RunConfig::noiseless(ProtocolConfig::sincos(0.0, true), 0.0);
        let grid = SimGrid::for_run(&cfg).unwrap();
        let r = simulate_run(&cfg, &grid).unwrap();
        assert!((r.fidelity - 1.0).abs() < 1e-10, "fidelity {}", r.fidelity);
    }

    #[test]
    fn trajectory_recording() {
        let mut cfg = RunConfig::noiseless(ProtocolConfig::sincos(2.0, true), 1.0);
        cfg.record_trajectory = true;
        let grid = SimGrid::new(0.0, 1.0, 0.01).unwrap();
        let r = simulate_run(&cfg, &grid).unwrap();
        let tr = r.trajectory.unwrap();
        assert_eq!(tr.len(), 101);
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(tr.times[100], 1.0);
        for k in 0..tr.len() {
            assert!((tr.total[k] - (tr.p1[k] + tr.p2[k] + tr.p3[k])).abs() < 1e-15);
        }
        assert_eq!(*tr.p3.last().unwrap(), r.fidelity);
    }

    #[test]
    fn divergence_is_reported() {
        struct Blowup;
        impl NoiseSource for Blowup {
            fn next_step(&mut self) -> [f64; 3] {
                [f64::NAN; 3]
            }
        }
        let cfg = RunConfig::noiseless(ProtocolConfig::sincos(1.0, true), 0.0);
        let grid = SimGrid::new(0.0, 1.0, 0.01).unwrap();
        let err = simulate_with_noise(&cfg, &grid, &mut Blowup).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 1, .. }));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn oversized_step_is_caught_by_norm_guard() {
        let cfg = RunConfig::noiseless(ProtocolConfig::sincos(400.0, false), 0.0);
        let grid = SimGrid::new(0.0, 1.0, 0.05).unwrap();
        assert!(matches!(simulate_run(&cfg, &grid), Err(Error::Diverged { .. })));
    }
}
