//! Time integration: an embedded Dormand-Prince 5(4) kernel with cubic
//! Hermite dense output, reused for the nonlinear reference systems and
//! for assembled linear sections (real affine and complex homogeneous),
//! plus a scaling-and-squaring matrix exponential for small sections.

use num_complex::Complex64;
use thiserror::Error;

use crate::carleman_classical::ClassicalSystem;
use crate::carleman_fourier::LiftedSystem;
use crate::fourier_field::{FieldError, FourierField1D, QuasiPeriodicField};

/// Saturation value for divergent classical trajectories.
pub const DIVERGENCE_CLIP: f64 = 1e12;

/// Maximum dense dimension accepted by the matrix-exponential method.
pub const EXPM_DIM_CAP: usize = 2_000;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("tolerance {0} outside [1e-14, 1e-6]")]
    BadTolerance(f64),
    #[error("step size underflow at t={t}")]
    StepUnderflow { t: f64 },
    #[error("time grid must be strictly increasing from 0 with t_end > 0")]
    BadGrid,
    #[error("matrix exponential limited to dim <= {cap}, got {dim}")]
    ExpmTooLarge { dim: usize, cap: usize },
    #[error("matrix exponential requires a uniform grid")]
    ExpmNonUniformGrid,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Sample times, `t0 = 0` through `t_end`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    samples: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t_end: f64, num_samples: usize) -> Result<Self, IntegrateError> {
        if !(t_end > 0.0) || num_samples < 2 {
            return Err(IntegrateError::BadGrid);
        }
        let samples = (0..num_samples)
            .map(|i| t_end * i as f64 / (num_samples - 1) as f64)
            .collect();
        Ok(Self { samples })
    }

    pub fn from_samples(samples: Vec<f64>) -> Result<Self, IntegrateError> {
        if samples.first() != Some(&0.0)
            || samples.windows(2).any(|w| w[1] <= w[0])
            || samples.len() < 2
        {
            return Err(IntegrateError::BadGrid);
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn t_end(&self) -> f64 {
        *self.samples.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn uniform_step(&self) -> Option<f64> {
        let h = self.samples[1] - self.samples[0];
        let ok = self
            .samples
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0));
        ok.then_some(h)
    }
}

/// Step statistics and provenance recorded alongside every trajectory.
#[derive(Debug, Clone)]
pub struct IntegrationMeta {
    pub method: String,
    pub tol: f64,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub diverged: bool,
}

/// Per-sample states over a time grid; real for reference trajectories,
/// complex for lifted sections.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub grid: TimeGrid,
    pub states: Vec<Vec<S>>,
    pub meta: IntegrationMeta,
}

impl Trajectory<f64> {
    /// CSV dump `t,comp0,comp1,..`.
    pub fn dump_csv(&self) -> String {
        use std::fmt::Write as _;
        let dim = self.states[0].len();
        let mut out = String::from("t");
        for i in 0..dim {
            write!(out, ",comp{i}").unwrap();
        }
        out.push('\n');
        for (t, state) in self.grid.samples().iter().zip(&self.states) {
            write!(out, "{t}").unwrap();
            for v in state {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

impl Trajectory<Complex64> {
    /// CSV dump `t,comp0_re,comp0_im,..`.
    pub fn dump_csv(&self) -> String {
        use std::fmt::Write as _;
        let dim = self.states[0].len();
        let mut out = String::from("t");
        for i in 0..dim {
            write!(out, ",comp{i}_re,comp{i}_im").unwrap();
        }
        out.push('\n');
        for (t, state) in self.grid.samples().iter().zip(&self.states) {
            write!(out, "{t}").unwrap();
            for v in state {
                write!(out, ",{},{}", v.re, v.im).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct StepOutcome {
    states: Vec<Vec<f64>>,
    accepted: usize,
    rejected: usize,
    /// Index of the first grid sample NOT filled (== grid len when complete).
    filled: usize,
    stopped_at: Option<f64>,
}

/// Adaptive DOPRI5 over a flat `f64` state; steps are clamped to land
/// exactly on grid samples so sampled values carry the full 5th-order
/// accuracy. When `ceiling` is set, integration stops once the sup-norm
/// exceeds it.
fn dopri5<F: FnMut(f64, &[f64], &mut [f64])>(
    mut rhs: F,
    y0: &[f64],
    grid: &TimeGrid,
    tol: f64,
    ceiling: Option<f64>,
) -> Result<StepOutcome, IntegrateError> {
    let dim = y0.len();
    let t_end = grid.t_end();
    let mut t = 0.0;
    let mut y = y0.to_vec();
    let mut f_now = vec![0.0; dim];
    rhs(t, &y, &mut f_now);

    let mut states: Vec<Vec<f64>> = Vec::with_capacity(grid.len());
    states.push(y.clone());
    let mut next_sample = 1;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    let mut h = (tol.powf(0.25) * t_end).min(t_end / 10.0).max(1e-10);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let h_min_floor = 1e-14;

    while next_sample < grid.len() {
        let target = grid.samples()[next_sample];
        let h_step = h.min(target - t);
        if h_step < h_min_floor * t.abs().max(1.0) {
            return Ok(StepOutcome {
                states,
                accepted,
                rejected,
                filled: next_sample,
                stopped_at: Some(t),
            });
        }
        k[0].copy_from_slice(&f_now);
        for stage in 1..7 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h_step * acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            rhs(t + C[stage] * h_step, &y_stage, &mut tail[0]);
        }
        let mut err_norm = 0.0f64;
        for i in 0..dim {
            let mut sum5 = 0.0;
            let mut sum4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                sum5 += B5[j] * kj[i];
                sum4 += B4[j] * kj[i];
            }
            y_new[i] = y[i] + h_step * sum5;
            let scale = tol + tol * y[i].abs().max(y_new[i].abs());
            let e = h_step * (sum5 - sum4) / scale;
            err_norm += e * e;
        }
        err_norm = (err_norm / dim as f64).sqrt();

        if err_norm <= 1.0 {
            // FSAL: k[6] = f(t+h, y_new)
            let hit_target = h_step >= target - t - 1e-14 * target.max(1.0);
            t = if hit_target { target } else { t + h_step };
            y.copy_from_slice(&y_new);
            f_now.copy_from_slice(&k[6]);
            if hit_target {
                states.push(y.clone());
                next_sample += 1;
            }
            accepted += 1;
            if let Some(cap) = ceiling {
                if y.iter().any(|v| v.abs() > cap) {
                    return Ok(StepOutcome {
                        states,
                        accepted,
                        rejected,
                        filled: next_sample,
                        stopped_at: Some(t),
                    });
                }
            }
            let factor = if err_norm > 0.0 {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            } else {
                5.0
            };
            h = h_step * factor;
        } else {
            rejected += 1;
            h = h_step * (0.9 * err_norm.powf(-0.2)).clamp(0.2, 0.9);
        }
    }
    Ok(StepOutcome {
        states,
        accepted,
        rejected,
        filled: next_sample,
        stopped_at: None,
    })
}

fn check_tol(tol: f64) -> Result<(), IntegrateError> {
    if !(1e-14..=1e-6).contains(&tol) {
        return Err(IntegrateError::BadTolerance(tol));
    }
    Ok(())
}

/// Reference integration of the 1-D nonlinear system `x' = g(x)`.
pub fn integrate_reference_1d(
    field: &FourierField1D,
    x0: f64,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<f64>, IntegrateError> {
    check_tol(tol)?;
    // reality checked once up front; the hot loop evaluates directly
    field.eval(x0)?;
    let outcome = dopri5(
        |_, y, dy| dy[0] = field.eval(y[0]).expect("field checked real"),
        &[x0],
        grid,
        tol,
        None,
    )?;
    finish_reference(outcome, grid, tol)
}

/// Reference integration of the quasi-periodic system `x' = g(x)`.
pub fn integrate_reference_multi(
    field: &QuasiPeriodicField,
    x0: &[f64],
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<f64>, IntegrateError> {
    check_tol(tol)?;
    field.eval(x0)?;
    let outcome = dopri5(
        |_, y, dy| {
            let g = field.eval(y).expect("dimension checked");
            dy.copy_from_slice(&g);
        },
        x0,
        grid,
        tol,
        None,
    )?;
    finish_reference(outcome, grid, tol)
}

fn finish_reference(
    outcome: StepOutcome,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<f64>, IntegrateError> {
    if let Some(t) = outcome.stopped_at {
        return Err(IntegrateError::StepUnderflow { t });
    }
    debug_assert_eq!(outcome.filled, grid.len());
    Ok(Trajectory {
        grid: grid.clone(),
        states: outcome.states,
        meta: IntegrationMeta {
            method: "dopri5".into(),
            tol,
            steps_accepted: outcome.accepted,
            steps_rejected: outcome.rejected,
            diverged: false,
        },
    })
}

/// Classical finite-section integration `x' = A x + a`. Blow-up is
/// reported as a clipped trajectory with the divergence flag set.
pub fn integrate_classical(
    system: &ClassicalSystem,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<f64>, IntegrateError> {
    check_tol(tol)?;
    let outcome = dopri5(
        |_, y, dy| system.apply(y, dy),
        &system.x0_lift,
        grid,
        tol,
        Some(DIVERGENCE_CLIP),
    )?;
    let diverged = outcome.stopped_at.is_some();
    let mut states = outcome.states;
    if diverged {
        let last = states.last().cloned().unwrap_or_else(|| system.x0_lift.clone());
        let clipped: Vec<f64> = last
            .iter()
            .map(|v| v.clamp(-DIVERGENCE_CLIP, DIVERGENCE_CLIP))
            .collect();
        while states.len() < grid.len() {
            states.push(clipped.clone());
        }
        for state in &mut states {
            for v in state.iter_mut() {
                *v = v.clamp(-DIVERGENCE_CLIP, DIVERGENCE_CLIP);
            }
        }
    }
    Ok(Trajectory {
        grid: grid.clone(),
        states,
        meta: IntegrationMeta {
            method: "dopri5".into(),
            tol,
            steps_accepted: outcome.accepted,
            steps_rejected: outcome.rejected,
            diverged,
        },
    })
}

/// Solver selection for assembled linear sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    RkAdaptive,
    Expm,
}

/// Integrates the homogeneous lifted system `z' = B z`, `z(0) = z0`.
pub fn integrate_linear(
    system: &LiftedSystem,
    grid: &TimeGrid,
    tol: f64,
    method: LinearMethod,
) -> Result<Trajectory<Complex64>, IntegrateError> {
    check_tol(tol)?;
    match method {
        LinearMethod::RkAdaptive => integrate_linear_rk(system, grid, tol),
        LinearMethod::Expm => integrate_linear_expm(system, grid, tol),
    }
}

fn integrate_linear_rk(
    system: &LiftedSystem,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<Complex64>, IntegrateError> {
    let dim = system.dim;
    let mut y0 = vec![0.0; 2 * dim];
    for (i, z) in system.z0.iter().enumerate() {
        y0[2 * i] = z.re;
        y0[2 * i + 1] = z.im;
    }
    let mut zbuf = vec![Complex64::default(); dim];
    let mut wbuf = vec![Complex64::default(); dim];
    let outcome = dopri5(
        |_, y, dy| {
            for i in 0..dim {
                zbuf[i] = Complex64::new(y[2 * i], y[2 * i + 1]);
            }
            system.apply(&zbuf, &mut wbuf);
            for i in 0..dim {
                dy[2 * i] = wbuf[i].re;
                dy[2 * i + 1] = wbuf[i].im;
            }
        },
        &y0,
        grid,
        tol,
        None,
    )?;
    if let Some(t) = outcome.stopped_at {
        return Err(IntegrateError::StepUnderflow { t });
    }
    let states = outcome
        .states
        .iter()
        .map(|flat| {
            (0..dim)
                .map(|i| Complex64::new(flat[2 * i], flat[2 * i + 1]))
                .collect()
        })
        .collect();
    Ok(Trajectory {
        grid: grid.clone(),
        states,
        meta: IntegrationMeta {
            method: "rk-adaptive".into(),
            tol,
            steps_accepted: outcome.accepted,
            steps_rejected: outcome.rejected,
            diverged: false,
        },
    })
}

fn integrate_linear_expm(
    system: &LiftedSystem,
    grid: &TimeGrid,
    tol: f64,
) -> Result<Trajectory<Complex64>, IntegrateError> {
    let dim = system.dim;
    if dim > EXPM_DIM_CAP {
        return Err(IntegrateError::ExpmTooLarge {
            dim,
            cap: EXPM_DIM_CAP,
        });
    }
    let h = grid
        .uniform_step()
        .ok_or(IntegrateError::ExpmNonUniformGrid)?;
    let mut scaled = system.to_dense();
    for v in &mut scaled {
        *v *= Complex64::new(h, 0.0);
    }
    let propagator = expm(&scaled, dim);
    let mut states = Vec::with_capacity(grid.len());
    states.push(system.z0.clone());
    let mut z = system.z0.clone();
    let mut next = vec![Complex64::default(); dim];
    for _ in 1..grid.len() {
        mat_vec(&propagator, &z, &mut next, dim);
        std::mem::swap(&mut z, &mut next);
        states.push(z.clone());
    }
    Ok(Trajectory {
        grid: grid.clone(),
        states,
        meta: IntegrationMeta {
            method: "expm".into(),
            tol,
            steps_accepted: grid.len() - 1,
            steps_rejected: 0,
            diverged: false,
        },
    })
}

fn mat_vec(m: &[Complex64], v: &[Complex64], out: &mut [Complex64], dim: usize) {
    for row in 0..dim {
        let mut acc = Complex64::default();
        let base = row * dim;
        for col in 0..dim {
            acc += m[base + col] * v[col];
        }
        out[row] = acc;
    }
}

fn mat_mul(a: &[Complex64], b: &[Complex64], dim: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); dim * dim];
    for row in 0..dim {
        for inner in 0..dim {
            let aik = a[row * dim + inner];
            if aik == Complex64::default() {
                continue;
            }
            let b_base = inner * dim;
            let o_base = row * dim;
            for col in 0..dim {
                out[o_base + col] += aik * b[b_base + col];
            }
        }
    }
    out
}

fn inf_norm(m: &[Complex64], dim: usize) -> f64 {
    (0..dim)
        .map(|row| (0..dim).map(|col| m[row * dim + col].norm()).sum())
        .fold(0.0, f64::max)
}

/// `e^M` by scaling and squaring with a Taylor kernel on the scaled
/// matrix (`norm <= 0.5` after scaling, terms summed to machine level).
pub fn expm(m: &[Complex64], dim: usize) -> Vec<Complex64> {
    let norm = inf_norm(m, dim);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scale = 2f64.powi(-(squarings as i32));
    let scaled: Vec<Complex64> = m.iter().map(|&v| v * scale).collect();

    let mut result = vec![Complex64::default(); dim * dim];
    for i in 0..dim {
        result[i * dim + i] = Complex64::new(1.0, 0.0);
    }
    let mut term = result.clone();
    for order in 1..=40u32 {
        term = mat_mul(&term, &scaled, dim);
        let inv = 1.0 / order as f64;
        for v in &mut term {
            *v *= inv;
        }
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
        if inf_norm(&term, dim) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result, dim);
    }
    result
}
