//! Classical Carleman finite section: the upper-Hessenberg state matrix
//! over monomial coordinates, its drift vector, and the closed-form
//! Kuramoto specialization.

use std::fmt::Write as _;

use thiserror::Error;

use crate::fourier_field::MaclaurinCoeffs;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("insufficient Maclaurin order: need M >= {need}, got {got}")]
    InsufficientOrder { need: usize, got: usize },
    #[error("unnormalized coupling: |ktilde| must be 1, got {0}")]
    UnnormalizedCoupling(f64),
    #[error("section order must be at least 1")]
    BadOrder,
}

/// Finite-section affine system `x' = A x + a` of size `N` over the
/// monomial lift `[x, x^2, .., x^N]`. Rows and columns are documented
/// 1-based to match the entry rule `A[n][n'] = n c_{n'-n+1}`; storage is
/// 0-based row-major.
#[derive(Debug, Clone)]
pub struct ClassicalSystem {
    pub n: usize,
    pub a_mat: Vec<f64>,
    pub drift: Vec<f64>,
    pub x0_lift: Vec<f64>,
}

impl ClassicalSystem {
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.a_mat[row * self.n + col]
    }

    /// `out = A v + a`
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for row in 0..self.n {
            let mut acc = self.drift[row];
            let base = row * self.n;
            for col in 0..self.n {
                acc += self.a_mat[base + col] * v[col];
            }
            out[row] = acc;
        }
    }

    /// CSV triplet dump: `row,col,value`, 1-based, nonzeros only.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for row in 0..self.n {
            for col in 0..self.n {
                let v = self.entry(row, col);
                if v != 0.0 {
                    writeln!(out, "{},{},{}", row + 1, col + 1, v).unwrap();
                }
            }
        }
        out
    }
}

fn lifted_initial(x0: f64, n: usize) -> Vec<f64> {
    let mut lift = Vec::with_capacity(n);
    let mut p = 1.0;
    for _ in 0..n {
        p *= x0;
        lift.push(p);
    }
    lift
}

/// Builds the section of order `n` from Maclaurin coefficients; requires
/// the expansion order to cover every referenced coefficient (`M >= N`).
pub fn build_classical(
    c: &MaclaurinCoeffs,
    x0: f64,
    n: usize,
) -> Result<ClassicalSystem, ClassicalError> {
    if n < 1 {
        return Err(ClassicalError::BadOrder);
    }
    if c.order() < n {
        return Err(ClassicalError::InsufficientOrder {
            need: n,
            got: c.order(),
        });
    }
    let mut a_mat = vec![0.0; n * n];
    for row in 1..=n {
        for col in 1..=n {
            // entry n c_{n'-n+1}, zero below the first subdiagonal
            if col + 1 >= row {
                let idx = col + 1 - row;
                a_mat[(row - 1) * n + (col - 1)] = row as f64 * c.c[idx];
            }
        }
    }
    let mut drift = vec![0.0; n];
    drift[0] = c.c[0];
    Ok(ClassicalSystem {
        n,
        a_mat,
        drift,
        x0_lift: lifted_initial(x0, n),
    })
}

/// Closed-form section for the reduced Kuramoto field
/// `omega1 + ktilde sin(2 theta)`: band entries
/// `ktilde n 2^{n'-n+1} (-1)^{(n'-n)/2} / (n'-n+1)!` on even
/// superdiagonals, subdiagonal `omega1 n`, drift `[omega1, 0, ..]`.
pub fn build_classical_kuramoto(
    omega1: f64,
    ktilde: f64,
    n: usize,
    x0: f64,
) -> Result<ClassicalSystem, ClassicalError> {
    if n < 1 {
        return Err(ClassicalError::BadOrder);
    }
    if (ktilde.abs() - 1.0).abs() > 1e-12 {
        return Err(ClassicalError::UnnormalizedCoupling(ktilde));
    }
    let mut a_mat = vec![0.0; n * n];
    for row in 1..=n {
        for col in 1..=n {
            let v = if col + 1 == row {
                omega1 * row as f64
            } else if col >= row && (col - row) % 2 == 0 && col - row <= n - 1 {
                let gap = (col - row) as i32;
                let sign = if (gap / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let mut factorial = 1.0;
                for i in 2..=(gap + 1) {
                    factorial *= i as f64;
                }
                ktilde * row as f64 * 2f64.powi(gap + 1) * sign / factorial
            } else {
                0.0
            };
            a_mat[(row - 1) * n + (col - 1)] = v;
        }
    }
    let mut drift = vec![0.0; n];
    drift[0] = omega1;
    Ok(ClassicalSystem {
        n,
        a_mat,
        drift,
        x0_lift: lifted_initial(x0, n),
    })
}
