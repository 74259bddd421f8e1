//! Three-level Λ system: Hamiltonian blocks, adiabatic eigensystem and
//! population observables.
//!
//! Units: ħ = 1 and the pulse width T = 1. Every matrix here is the
//! dimensionless `M` with the physical Hamiltonian `H = (ħ/2)·M`, so the
//! Schrödinger equation reads `dψ/dt = -(i/2)·M·ψ`.

use std::ops::{Add, AddAssign, Index, Mul};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Complex amplitudes of levels |1⟩, |2⟩, |3⟩.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeLevelState(pub [C64; 3]);

impl ThreeLevelState {
    /// The initial state of every run, |1⟩.
    pub const GROUND: ThreeLevelState = ThreeLevelState([
        C64 { re: 1.0, im: 0.0 },
        ZERO,
        ZERO,
    ]);

    pub fn new(c1: C64, c2: C64, c3: C64) -> Self {
        ThreeLevelState([c1, c2, c3])
    }

    pub fn zero() -> Self {
        ThreeLevelState([ZERO; 3])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `self + k·other`.
    pub fn axpy(&self, k: f64, other: &ThreeLevelState) -> ThreeLevelState {
        let mut out = *self;
        for (o, x) in out.0.iter_mut().zip(other.0.iter()) {
            *o += x * k;
        }
        out
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &ThreeLevelState) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn populations(&self) -> Populations {
        populations(self)
    }
}

impl Index<usize> for ThreeLevelState {
    type Output = C64;

    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

/// Level populations and their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Populations {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub total: f64,
}

pub fn populations(state: &ThreeLevelState) -> Populations {
    let [p1, p2, p3] = state.0.map(|c| c.norm_sqr());
    Populations {
        p1,
        p2,
        p3,
        total: p1 + p2 + p3,
    }
}

/// Dense 3×3 complex matrix `M` (physical Hamiltonian is `(ħ/2)·M`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianMatrix(pub [[C64; 3]; 3]);

impl HamiltonianMatrix {
    pub fn zero() -> Self {
        HamiltonianMatrix([[ZERO; 3]; 3])
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[row][col]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn apply(&self, v: &ThreeLevelState) -> ThreeLevelState {
        let m = &self.0;
        let x = &v.0;
        ThreeLevelState([
            m[0][0] * x[0] + m[0][1] * x[1] + m[0][2] * x[2],
            m[1][0] * x[0] + m[1][1] * x[1] + m[1][2] * x[2],
            m[2][0] * x[0] + m[2][1] * x[1] + m[2][2] * x[2],
        ])
    }
}

impl Add for HamiltonianMatrix {
    type Output = HamiltonianMatrix;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for HamiltonianMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for (row, rrow) in self.0.iter_mut().zip(rhs.0.iter()) {
            for (a, b) in row.iter_mut().zip(rrow.iter()) {
                *a += b;
            }
        }
    }
}

impl Mul<f64> for HamiltonianMatrix {
    type Output = HamiltonianMatrix;

    fn mul(mut self, k: f64) -> Self {
        for row in self.0.iter_mut() {
            for a in row.iter_mut() {
                *a *= k;
            }
        }
        self
    }
}

/// Reference STIRAP matrix with pump on |1⟩–|2⟩, Stokes on |2⟩–|3⟩ and
/// loss `-i·gamma` on the intermediate level.
pub fn build_h0(omega_p: f64, omega_s: f64, gamma: f64) -> Result<HamiltonianMatrix> {
    if omega_p < 0.0 || omega_s < 0.0 || gamma < 0.0 {
        return Err(Error::domain(format!(
            "build_h0 requires nonnegative inputs, got omega_p={omega_p}, omega_s={omega_s}, gamma={gamma}"
        )));
    }
    Ok(h0_unchecked(omega_p, omega_s, gamma))
}

#[inline]
pub(crate) fn h0_unchecked(omega_p: f64, omega_s: f64, gamma: f64) -> HamiltonianMatrix {
    let p = C64::new(omega_p, 0.0);
    let s = C64::new(omega_s, 0.0);
    HamiltonianMatrix([
        [ZERO, p, ZERO],
        [p, C64::new(0.0, -gamma), s],
        [ZERO, s, ZERO],
    ])
}

/// Counterdiabatic coupling between |1⟩ and |3⟩.
pub fn build_hcd(omega_d: f64) -> HamiltonianMatrix {
    let mut m = HamiltonianMatrix::zero();
    m.0[0][2] = C64::new(0.0, omega_d);
    m.0[2][0] = C64::new(0.0, -omega_d);
    m
}

/// Diagonal level-energy fluctuations.
pub fn build_heps(eps1: f64, eps2: f64, eps3: f64) -> HamiltonianMatrix {
    let mut m = HamiltonianMatrix::zero();
    m.0[0][0] = C64::new(eps1, 0.0);
    m.0[1][1] = C64::new(eps2, 0.0);
    m.0[2][2] = C64::new(eps3, 0.0);
    m
}

/// Rms amplitude and mixing angle of a pump/Stokes pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngleFrame {
    pub omega: f64,
    pub theta: f64,
}

impl AngleFrame {
    pub fn from_pulses(omega_p: f64, omega_s: f64) -> Result<Self> {
        Ok(AngleFrame {
            omega: omega_p.hypot(omega_s),
            theta: mixing_angle(omega_p, omega_s)?,
        })
    }
}

/// `tan θ = Ωp/Ωs`, evaluated with `atan2` so that Ωs → 0 is regular.
pub fn mixing_angle(omega_p: f64, omega_s: f64) -> Result<f64> {
    if omega_p == 0.0 && omega_s == 0.0 {
        return Err(Error::domain("mixing angle undefined when both pulses vanish"));
    }
    Ok(omega_p.atan2(omega_s))
}

/// Instantaneous eigenvectors and eigenvalues of the Γ = 0 reference
/// Hamiltonian, energies in units of ħ/T.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSystem {
    pub phi0: [f64; 3],
    pub phi_plus: [f64; 3],
    pub phi_minus: [f64; 3],
    pub e0: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

impl EigenSystem {
    pub fn vectors(&self) -> [[f64; 3]; 3] {
        [self.phi0, self.phi_plus, self.phi_minus]
    }

    /// Dark state as a complex state vector.
    pub fn dark_state(&self) -> ThreeLevelState {
        ThreeLevelState(self.phi0.map(|x| C64::new(x, 0.0)))
    }
}

pub fn eigensystem(theta: f64, omega: f64) -> EigenSystem {
    let (s, c) = theta.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    EigenSystem {
        phi0: [c, 0.0, -s],
        phi_plus: [s * r, r, c * r],
        phi_minus: [s * r, -r, c * r],
        e0: 0.0,
        e_plus: omega / 2.0,
        e_minus: -omega / 2.0,
    }
}

/// Counterdiabatic matrix assembled from the general transitionless-driving
/// construction `H_cd = iħ Σ_n |∂ₜφₙ⟩⟨φₙ|` using central finite differences of
/// the eigenvectors. The eigenvectors are real, so ⟨φₙ|∂ₜφₙ⟩ vanishes and
/// only the first term survives; it is still evaluated for completeness.
///
/// Independent of [`build_hcd`]; intended as a cross-check.
pub fn numeric_hcd_oracle<F>(theta_of_t: F, t: f64, dt_fd: f64) -> HamiltonianMatrix
where
    F: Fn(f64) -> f64,
{
    let here = eigensystem(theta_of_t(t), 0.0).vectors();
    let ahead = eigensystem(theta_of_t(t + dt_fd), 0.0).vectors();
    let behind = eigensystem(theta_of_t(t - dt_fd), 0.0).vectors();

    let mut h = [[0.0f64; 3]; 3];
    for n in 0..3 {
        let dphi: [f64; 3] =
            std::array::from_fn(|k| (ahead[n][k] - behind[n][k]) / (2.0 * dt_fd));
        let berry: f64 = (0..3).map(|k| here[n][k] * dphi[k]).sum();
        for i in 0..3 {
            for j in 0..3 {
                h[i][j] += dphi[i] * here[n][j] - berry * here[n][i] * here[n][j];
            }
        }
    }

    // H_cd = iħ·h and M = 2H/ħ.
    let mut m = HamiltonianMatrix::zero();
    for i in 0..3 {
        for j in 0..3 {
            m.0[i][j] = C64::new(0.0, 2.0 * h[i][j]);
        }
    }
    m
}
