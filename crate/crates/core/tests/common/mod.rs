//! Helpers shared by the integration test targets.

use num_complex::Complex64 as C64;

use stirap::model::{HamiltonianMatrix, ThreeLevelState};

type Mat = [[C64; 3]; 3];

fn matmul(a: &Mat, b: &Mat) -> Mat {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

/// `exp(A)` by scaling and squaring around a long Taylor series.
pub fn expm(a: &Mat) -> Mat {
    let norm: f64 = a.iter().flatten().map(|z| z.norm()).sum();
    let squarings = norm.log2().ceil().max(0.0) as i32 + 4;
    let scale = 0.5f64.powi(squarings);
    let a: Mat = a.map(|row| row.map(|z| z * scale));
    let mut result: Mat = std::array::from_fn(|i| std::array::from_fn(|j| C64::new((i == j) as u8 as f64, 0.0)));
    let mut term = result;
    for n in 1..30 {
        term = matmul(&term, &a).map(|row| row.map(|z| z / n as f64));
        for i in 0..3 {
            for j in 0..3 {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

pub fn exact_evolution(m: &HamiltonianMatrix, psi: &ThreeLevelState, t: f64) -> ThreeLevelState {
    let a: Mat = m.0.map(|row| row.map(|z| z * C64::new(0.0, -0.5 * t)));
    let u = expm(&a);
    ThreeLevelState(std::array::from_fn(|i| (0..3).map(|k| u[i][k] * psi.0[k]).sum()))
}

