//! Convergence-bound machinery and error metrics: the geometric horizon
//! T0 and section threshold N0, the finite-section error bound, clipped
//! running-sup log metrics, continuous phase extraction, the proof-chain
//! inequality check, and sweep-grid error surfaces.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use thiserror::Error;

use crate::carleman_classical::{build_classical_kuramoto, ClassicalError};
use crate::carleman_fourier::{extend_state, lift_1d, LiftError, MultiIndexTable};
use crate::integrate::{
    integrate_classical, integrate_linear, integrate_reference_1d, IntegrateError, LinearMethod,
    TimeGrid, Trajectory,
};
use crate::kuramoto::{self, KuramotoError};

/// Clip floor of the log error metrics.
pub const METRIC_FLOOR: f64 = 1e-5;
/// Clip cap of the log error metrics.
pub const METRIC_CAP: f64 = 10.0;

const PHASE_MODULUS_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("horizon exceeds T_0; condition unsatisfiable")]
    HorizonExceedsT0,
    #[error("trajectories sampled on different grids")]
    GridMismatch,
    #[error("phase undefined: sample modulus below {PHASE_MODULUS_FLOOR}")]
    PhaseUndefined,
    #[error("grid too coarse for unwrapping")]
    GridTooCoarse,
    #[error("axes must be nonempty and sorted, with the time axis starting at 0")]
    BadAxes,
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
    #[error(transparent)]
    Kuramoto(#[from] KuramotoError),
}

/// Envelope constants feeding the convergence bounds. `dfactor` is 1 for
/// the single-frequency case and `2^d` for the quasi-periodic case, so
/// the effective coupling constant in the bounds is `2 * dfactor * D`.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub d: f64,
    pub r: f64,
    pub dfactor: f64,
}

impl BoundParams {
    pub fn one_d(d: f64, r: f64) -> Self {
        Self { d, r, dfactor: 1.0 }
    }

    pub fn multi(d: f64, r: f64, state_dim: usize) -> Self {
        Self {
            d,
            r,
            dfactor: 2f64.powi(state_dim as i32),
        }
    }

    fn coupling(&self) -> f64 {
        2.0 * self.dfactor * self.d
    }
}

/// Horizon below which the theorem bound is geometric in `N`:
/// `(1/(2 dfactor D)) (1/sqrt(r) - 1)^2`.
pub fn t0_bound(p: &BoundParams) -> f64 {
    (1.0 / p.r.sqrt() - 1.0).powi(2) / p.coupling()
}

/// Finite-section error bound
/// `sqrt(c t)/(1-r) (1 + sqrt(c t))^{2N} r^N`, `c = 2 dfactor D`.
pub fn theorem_bound(p: &BoundParams, t: f64, n: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let root = (p.coupling() * t).sqrt();
    root / (1.0 - p.r) * (1.0 + root).powi(2 * n as i32) * p.r.powi(n as i32)
}

/// Smallest `N0 >= 1` with `theorem_bound(tstar, N0) <= 1/2`.
pub fn n0_search(p: &BoundParams, tstar: f64) -> Result<usize, AnalysisError> {
    if tstar >= t0_bound(p) {
        return Err(AnalysisError::HorizonExceedsT0);
    }
    let mut n = 1;
    while theorem_bound(p, tstar, n) > 0.5 {
        n += 1;
        debug_assert!(n < 10_000, "geometric bound must eventually drop below 1/2");
    }
    Ok(n)
}

/// Per-sample primary-block error: max over the grade-1 components `j`
/// of `|z_{j;1,N}(t) - e^{i x_ext_j(t)}|` where `x_ext` extends the
/// reference state.
pub fn error_primary(
    lifted: &Trajectory<Complex64>,
    reference: &Trajectory<f64>,
    table: &MultiIndexTable,
    taus: &[f64],
) -> Result<Vec<f64>, AnalysisError> {
    if lifted.grid != reference.grid {
        return Err(AnalysisError::GridMismatch);
    }
    let grade1 = table.grade_size(1);
    let mut out = Vec::with_capacity(lifted.states.len());
    for (z, x) in lifted.states.iter().zip(&reference.states) {
        let x_ext = extend_state(x, taus);
        let err = (0..grade1)
            .map(|j| (z[j] - Complex64::from_polar(1.0, x_ext[j])).norm())
            .fold(0.0, f64::max);
        out.push(err);
    }
    Ok(out)
}

/// Running-sup clipped log metric: `sup_{s<=t} log10(min(cap, max(err(s),
/// floor)))`.
pub fn clip_metric(err: &[f64], floor: f64, cap: f64) -> Vec<f64> {
    let mut sup = f64::MIN;
    err.iter()
        .map(|&e| {
            sup = sup.max(cap.min(e.max(floor)).log10());
            sup
        })
        .collect()
}

/// Continuous phase along a complex sample series: anchored at `phase0`,
/// advanced by principal-argument increments of consecutive ratios.
pub fn extract_phase(series: &[Complex64], phase0: f64) -> Result<Vec<f64>, AnalysisError> {
    let mut out = Vec::with_capacity(series.len());
    let mut phase = phase0;
    out.push(phase);
    for pair in series.windows(2) {
        if pair[0].norm() < PHASE_MODULUS_FLOOR || pair[1].norm() < PHASE_MODULUS_FLOOR {
            return Err(AnalysisError::PhaseUndefined);
        }
        let increment = (pair[1] / pair[0]).arg();
        if increment.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(AnalysisError::GridTooCoarse);
        }
        phase += increment;
        out.push(phase);
    }
    if series.is_empty() {
        out.clear();
    }
    Ok(out)
}

fn big_binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut acc = BigUint::from(1u32);
    for i in 0..k.min(n - k) {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Proof-chain inequality: returns
/// `((1/N) sum_m C(N,m-1) C(N,m) t^m, sqrt(t) (1 + sqrt(t))^{2N})`;
/// the contract is `lhs <= rhs`.
pub fn proof_chain_check(n: usize, t: f64) -> (f64, f64) {
    assert!((1..=60).contains(&n), "exact binomials limited to N <= 60");
    let mut lhs = 0.0;
    let mut t_pow = 1.0;
    for m in 1..=n {
        t_pow *= t;
        let coeff = big_binomial(n, m - 1) * big_binomial(n, m);
        lhs += coeff.to_f64().expect("binomial product fits f64 range") * t_pow;
    }
    lhs /= n as f64;
    let rhs = t.sqrt() * (1.0 + t.sqrt()).powi(2 * n as i32);
    (lhs, rhs)
}

/// Which linearization a sweep measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    Classical,
    CarlemanFourier,
}

impl ErrorMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorMetric::Classical => "classical",
            ErrorMetric::CarlemanFourier => "carleman-fourier",
        }
    }
}

/// Sweep request over the reduced Kuramoto model.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub omega1: f64,
    pub ktilde: f64,
    pub metric: ErrorMetric,
    pub n: usize,
    pub theta0_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    pub tol: f64,
    pub floor: f64,
    pub cap: f64,
}

/// Clipped log-error surface over (initial condition, time).
#[derive(Debug, Clone)]
pub struct ErrorSurface {
    pub theta0_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    /// Row-major: `values[i][j]` at `(theta0_axis[i], t_axis[j])`.
    pub values: Vec<Vec<f64>>,
    pub metric: ErrorMetric,
    pub n: usize,
    pub omega1: f64,
    /// Rows whose integration failed and were saturated at the cap.
    pub failed_rows: Vec<usize>,
}

impl ErrorSurface {
    /// CSV dump `theta0,t,value`, row-major over theta0 then t.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("theta0,t,value\n");
        for (theta0, row) in self.theta0_axis.iter().zip(&self.values) {
            for (t, v) in self.t_axis.iter().zip(row) {
                writeln!(out, "{theta0},{t},{v}").unwrap();
            }
        }
        out
    }
}

fn sweep_row(cfg: &SweepConfig, theta0: f64) -> Result<Vec<f64>, AnalysisError> {
    let grid = TimeGrid::from_samples(cfg.t_axis.clone())?;
    let field = kuramoto::reduced_field(cfg.omega1, cfg.ktilde)?;
    let reference = integrate_reference_1d(&field, theta0, &grid, cfg.tol)?;
    let err = match cfg.metric {
        ErrorMetric::Classical => {
            let sys = build_classical_kuramoto(cfg.omega1, cfg.ktilde, cfg.n, theta0)?;
            let traj = integrate_classical(&sys, &grid, cfg.tol.max(1e-12))?;
            traj.states
                .iter()
                .zip(&reference.states)
                .map(|(lifted, exact)| (lifted[0] - exact[0]).abs())
                .collect::<Vec<f64>>()
        }
        ErrorMetric::CarlemanFourier => {
            let sys = lift_1d(&field, theta0, cfg.n)?;
            let traj = integrate_linear(&sys, &grid, cfg.tol, LinearMethod::RkAdaptive)?;
            error_primary(&traj, &reference, &sys.table, &[1.0])?
        }
    };
    Ok(clip_metric(&err, cfg.floor, cfg.cap))
}

/// Computes the error surface, one integration pair per initial phase.
/// Row failures are recorded and saturated at the cap rather than
/// aborting the sweep.
pub fn sweep_error_surface(cfg: &SweepConfig) -> Result<ErrorSurface, AnalysisError> {
    if cfg.theta0_axis.is_empty()
        || cfg.t_axis.is_empty()
        || cfg.theta0_axis.windows(2).any(|w| w[1] <= w[0])
        || cfg.t_axis.windows(2).any(|w| w[1] <= w[0])
        || cfg.t_axis[0] != 0.0
    {
        return Err(AnalysisError::BadAxes);
    }
    let rows: Vec<(Vec<f64>, bool)> = cfg
        .theta0_axis
        .par_iter()
        .map(|&theta0| match sweep_row(cfg, theta0) {
            Ok(row) => (row, false),
            Err(_) => (vec![cfg.cap.log10(); cfg.t_axis.len()], true),
        })
        .collect();
    let failed_rows = rows
        .iter()
        .enumerate()
        .filter_map(|(i, (_, failed))| failed.then_some(i))
        .collect();
    Ok(ErrorSurface {
        theta0_axis: cfg.theta0_axis.clone(),
        t_axis: cfg.t_axis.clone(),
        values: rows.into_iter().map(|(row, _)| row).collect(),
        metric: cfg.metric,
        n: cfg.n,
        omega1: cfg.omega1,
        failed_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t0_examples() {
        let p = BoundParams::one_d(2.0, 0.25);
        assert!((t0_bound(&p) - 0.25).abs() < 1e-15);

        let p = BoundParams::one_d(2.0, 0.5);
        let expect = (2f64.sqrt() - 1.0).powi(2) / 4.0;
        assert!((t0_bound(&p) - expect).abs() < 1e-15);

        let p = BoundParams::multi(2.0, 0.25, 1);
        assert!((t0_bound(&p) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn theorem_bound_examples() {
        let p = BoundParams::one_d(2.0, 0.5);
        assert_eq!(theorem_bound(&p, 0.0, 5), 0.0);

        // direct evaluation oracle: sqrt(0.16)/0.5 * 1.4^20 * 2^-10
        let oracle = 0.16f64.sqrt() / 0.5 * 1.4f64.powi(20) * 0.5f64.powi(10);
        assert!((theorem_bound(&p, 0.04, 10) - oracle).abs() < 1e-12 * oracle);

        // monotone in t below T0, decreasing in N
        let t0 = t0_bound(&p);
        let mut last = 0.0;
        for i in 1..=20 {
            let t = t0 * i as f64 / 21.0;
            let b = theorem_bound(&p, t, 6);
            assert!(b > last);
            last = b;
        }
        for n in 1..20 {
            assert!(theorem_bound(&p, t0 * 0.9, n + 1) < theorem_bound(&p, t0 * 0.9, n));
        }
    }

    #[test]
    fn n0_examples() {
        let p = BoundParams::one_d(2.0, 0.25);
        assert_eq!(n0_search(&p, 0.1).unwrap(), 2);
        assert_eq!(n0_search(&p, 1e-9).unwrap(), 1);
        assert!(matches!(
            n0_search(&p, t0_bound(&p)),
            Err(AnalysisError::HorizonExceedsT0)
        ));
    }

    #[test]
    fn clip_metric_examples() {
        let v = clip_metric(&[1e-7, 1e-7], 1e-5, 10.0);
        assert_eq!(v, vec![-5.0, -5.0]);

        let v = clip_metric(&[1e-3, 20.0, 1e-6], 1e-5, 10.0);
        assert_eq!(v[1], 1.0);
        assert_eq!(v[2], 1.0);

        let v = clip_metric(&[1e-3, 1e-4], 1e-5, 10.0);
        assert_eq!(v, vec![-3.0, -3.0]);

        // monotone nondecreasing, range [-5, 1]
        let v = clip_metric(&[0.5, 1e-9, 3.0, 40.0], 1e-5, 10.0);
        for w in v.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(v.iter().all(|&x| (-5.0..=1.0).contains(&x)));
    }

    #[test]
    fn extract_phase_examples() {
        let omega = 3.0;
        let series: Vec<Complex64> = (0..200)
            .map(|i| Complex64::from_polar(1.0, omega * i as f64 * 0.01))
            .collect();
        let phase = extract_phase(&series, 0.0).unwrap();
        for (i, p) in phase.iter().enumerate() {
            assert!((p - omega * i as f64 * 0.01).abs() < 1e-12);
        }

        let constant = vec![Complex64::from_polar(1.0, 0.7); 10];
        let phase = extract_phase(&constant, 0.7).unwrap();
        assert!(phase.iter().all(|&p| (p - 0.7).abs() < 1e-15));

        // winding past pi works through the ratio increments
        let series: Vec<Complex64> = (0..100)
            .map(|i| Complex64::from_polar(1.0, 0.2 * i as f64))
            .collect();
        let phase = extract_phase(&series, 0.0).unwrap();
        assert!((phase[99] - 19.8).abs() < 1e-11);

        let tiny = vec![Complex64::new(1e-13, 0.0), Complex64::new(1.0, 0.0)];
        assert!(matches!(
            extract_phase(&tiny, 0.0),
            Err(AnalysisError::PhaseUndefined)
        ));

        let coarse = vec![
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, 3.0),
        ];
        assert!(matches!(
            extract_phase(&coarse, 0.0),
            Err(AnalysisError::GridTooCoarse)
        ));
    }

    #[test]
    fn proof_chain_examples() {
        let (lhs, rhs) = proof_chain_check(1, 0.3);
        assert!((lhs - 0.3).abs() < 1e-15);
        assert!(rhs >= lhs);

        let (lhs, rhs) = proof_chain_check(3, 1.0);
        assert!((lhs - 5.0).abs() < 1e-13);
        assert!((rhs - 64.0).abs() < 1e-12);

        let (lhs, rhs) = proof_chain_check(17, 0.0);
        assert_eq!(lhs, 0.0);
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn proof_chain_grid() {
        let mut ts: Vec<f64> = (0..=20).map(|k| 2f64.powi(-k)).collect();
        ts.extend([1.0, 2.0, 5.0]);
        for n in 1..=60 {
            for &t in &ts {
                let (lhs, rhs) = proof_chain_check(n, t);
                assert!(
                    lhs <= rhs * (1.0 + 1e-12),
                    "N={n} t={t}: lhs={lhs} rhs={rhs}"
                );
            }
        }
    }

    #[test]
    fn bound_params_independent_of_initial_condition() {
        // API-level property: T0 and N0 take only envelope data
        let p = BoundParams::one_d(2.0, 0.5);
        let t0 = t0_bound(&p);
        let n0 = n0_search(&p, t0 * 0.7).unwrap();
        assert!(t0 > 0.0 && n0 >= 1);
    }

    #[test]
    fn single_cell_sweep() {
        let cfg = SweepConfig {
            omega1: 0.0,
            ktilde: 1.0,
            metric: ErrorMetric::CarlemanFourier,
            n: 4,
            theta0_axis: vec![0.4],
            t_axis: vec![0.0, 0.05],
            tol: 1e-10,
            floor: METRIC_FLOOR,
            cap: METRIC_CAP,
        };
        let surface = sweep_error_surface(&cfg).unwrap();
        assert_eq!(surface.values.len(), 1);
        assert_eq!(surface.values[0].len(), 2);
        assert!(surface.failed_rows.is_empty());
        let csv = surface.dump_csv();
        assert!(csv.starts_with("theta0,t,value\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn sweep_monotone_along_t() {
        let cfg = SweepConfig {
            omega1: 1.0,
            ktilde: 1.0,
            metric: ErrorMetric::Classical,
            n: 6,
            theta0_axis: vec![-1.0, 0.0, 1.0],
            t_axis: (0..17).map(|i| 0.5 * i as f64 / 16.0).collect(),
            tol: 1e-10,
            floor: METRIC_FLOOR,
            cap: METRIC_CAP,
        };
        let surface = sweep_error_surface(&cfg).unwrap();
        for row in &surface.values {
            for w in row.windows(2) {
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn conjugate_error_components_coincide() {
        // real 1-D field: the two grade-1 errors are equal at every sample
        let field = kuramoto::reduced_field(1.0, 1.0).unwrap();
        let sys = crate::carleman_fourier::lift_1d(&field, 0.9, 6).unwrap();
        let grid = TimeGrid::uniform(0.3, 31).unwrap();
        let reference = integrate_reference_1d(&field, 0.9, &grid, 1e-12).unwrap();
        let traj = integrate_linear(&sys, &grid, 1e-12, LinearMethod::RkAdaptive).unwrap();
        for (z, x) in traj.states.iter().zip(&reference.states) {
            let plus = (z[0] - Complex64::from_polar(1.0, x[0])).norm();
            let minus = (z[1] - Complex64::from_polar(1.0, -x[0])).norm();
            assert!((plus - minus).abs() < 1e-12);
        }
    }
}
