//! Kuramoto model constructors: the full coupled-oscillator field, its
//! normalization, the two-oscillator reduction to a single periodic
//! field, and equilibrium predictions for the reduced phase.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fourier_field::{FieldError, FourierField1D, QuasiPeriodicField};

/// Default envelope rate used by the reduced-field constructor.
pub const DEFAULT_ENVELOPE_RATE: f64 = 0.5;

#[derive(Debug, Error)]
pub enum KuramotoError {
    #[error("coupling K must be nonzero")]
    ZeroCoupling,
    #[error("unnormalized coupling: |ktilde| must be 1, got {0}")]
    UnnormalizedCoupling(f64),
    #[error("model requires d >= 2, got {0}")]
    TooFewOscillators(usize),
    #[error("omegas/theta0 length must equal d")]
    LengthMismatch,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `theta_p' = omega_p + (K/d) sum_q sin(theta_q - theta_p)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KuramotoModel {
    pub d: usize,
    pub omegas: Vec<f64>,
    #[serde(rename = "K")]
    pub coupling: f64,
    pub theta0: Vec<f64>,
}

impl KuramotoModel {
    pub fn validate(&self) -> Result<(), KuramotoError> {
        if self.d < 2 {
            return Err(KuramotoError::TooFewOscillators(self.d));
        }
        if self.coupling == 0.0 {
            return Err(KuramotoError::ZeroCoupling);
        }
        if self.omegas.len() != self.d || self.theta0.len() != self.d {
            return Err(KuramotoError::LengthMismatch);
        }
        Ok(())
    }
}

/// Kuramoto model in normalized coordinates: phase and frequency sums
/// vanish and `|K| = d`. `time_scale` maps normalized time back to the
/// original model (`t_orig = time_scale * t`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedKuramoto {
    pub d: usize,
    pub omegas: Vec<f64>,
    #[serde(rename = "K")]
    pub coupling: f64,
    pub theta0: Vec<f64>,
    pub ktilde: f64,
    pub time_scale: f64,
}

/// Shifts phases and frequencies to zero sums and rescales the coupling
/// to `|K| = d`.
pub fn normalize(model: &KuramotoModel) -> Result<NormalizedKuramoto, KuramotoError> {
    model.validate()?;
    let d = model.d as f64;
    let theta_mean = model.theta0.iter().sum::<f64>() / d;
    let omega_sum: f64 = model.omegas.iter().sum();
    let k_abs = model.coupling.abs();
    let theta0: Vec<f64> = model.theta0.iter().map(|&t| t - theta_mean).collect();
    let omegas: Vec<f64> = model
        .omegas
        .iter()
        .map(|&w| (d * w - omega_sum) / k_abs)
        .collect();
    let coupling = model.coupling.signum() * d;
    Ok(NormalizedKuramoto {
        d: model.d,
        omegas,
        coupling,
        theta0,
        ktilde: -coupling / d,
        time_scale: d / k_abs,
    })
}

/// Reduced two-oscillator field `omega1 + ktilde sin(2 theta)` as
/// Fourier data `{0: omega1, 2: -i ktilde/2, -2: i ktilde/2}`, with the
/// envelope fitted at the default rate.
pub fn reduced_field(omega1: f64, ktilde: f64) -> Result<FourierField1D, KuramotoError> {
    if (ktilde.abs() - 1.0).abs() > 1e-12 {
        return Err(KuramotoError::UnnormalizedCoupling(ktilde));
    }
    let mut coeffs = BTreeMap::new();
    coeffs.insert(0, Complex64::new(omega1, 0.0));
    coeffs.insert(2, Complex64::new(0.0, -ktilde / 2.0));
    coeffs.insert(-2, Complex64::new(0.0, ktilde / 2.0));
    let (field, _) = FourierField1D::with_fitted_envelope(coeffs, DEFAULT_ENVELOPE_RATE)?;
    Ok(field)
}

/// Long-run behavior of the reduced phase.
#[derive(Debug, Clone, PartialEq)]
pub enum Equilibria {
    /// Representatives of the two mod-pi families, in `(-pi, pi/2]`.
    Convergent([f64; 2]),
    Divergent,
}

/// Equilibria of `theta' = omega1 + ktilde sin(2 theta)`: representatives
/// `{-(ktilde/2) asin(omega1), (ktilde/2) asin(omega1) - pi/2}` when
/// `|omega1| <= 1`, divergent otherwise.
pub fn equilibria(omega1: f64, ktilde: f64) -> Result<Equilibria, KuramotoError> {
    if (ktilde.abs() - 1.0).abs() > 1e-12 {
        return Err(KuramotoError::UnnormalizedCoupling(ktilde));
    }
    if omega1.abs() > 1.0 {
        return Ok(Equilibria::Divergent);
    }
    let half_asin = omega1.asin() / 2.0;
    Ok(Equilibria::Convergent([
        -ktilde * half_asin,
        ktilde * half_asin - std::f64::consts::FRAC_PI_2,
    ]))
}

/// Full Kuramoto right-hand side as a quasi-periodic field with a single
/// fundamental frequency `tau_1 = 1`: constants `omega_p` at `alpha = 0`
/// and coupling coefficients `+-K/(2 i d)` at `alpha = +-(e_q - e_p)`.
pub fn full_rhs(model: &NormalizedKuramoto) -> Result<QuasiPeriodicField, KuramotoError> {
    if model.d < 2 {
        return Err(KuramotoError::TooFewOscillators(model.d));
    }
    let d = model.d;
    let mut coeffs: BTreeMap<(usize, Vec<i32>), Complex64> = BTreeMap::new();
    for p in 1..=d {
        let zero = vec![0i32; d];
        *coeffs.entry((p, zero)).or_default() += Complex64::new(model.omegas[p - 1], 0.0);
        for q in 1..=d {
            if q == p {
                continue;
            }
            // K/(2id) at e_q - e_p, conjugate at the mirror
            let amp = Complex64::new(0.0, -model.coupling / (2.0 * d as f64));
            let mut alpha = vec![0i32; d];
            alpha[q - 1] = 1;
            alpha[p - 1] = -1;
            *coeffs.entry((p, alpha.clone())).or_default() += amp;
            let mirror: Vec<i32> = alpha.iter().map(|&a| -a).collect();
            *coeffs.entry((p, mirror)).or_default() += amp.conj();
        }
    }
    let (field, _) = QuasiPeriodicField::with_fitted_envelope(
        d,
        1,
        vec![1.0],
        coeffs,
        DEFAULT_ENVELOPE_RATE,
    )?;
    Ok(field)
}

/// Parses a model file JSON `{"d":..,"omegas":[..],"K":..,"theta0":[..]}`.
pub fn parse_model_json(text: &str) -> Result<KuramotoModel, KuramotoError> {
    let model: KuramotoModel =
        serde_json::from_str(text).map_err(|e| KuramotoError::Field(FieldError::Parse(e.to_string())))?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    const NORMALIZATION_TOL: f64 = 1e-12;

    #[test]
    fn normalize_example() {
        let model = KuramotoModel {
            d: 2,
            omegas: vec![1.0, -0.2],
            coupling: 2.0,
            theta0: vec![0.5, 0.1],
        };
        let norm = normalize(&model).unwrap();
        assert!((norm.theta0[0] - 0.2).abs() < 1e-15);
        assert!((norm.theta0[1] + 0.2).abs() < 1e-15);
        assert!((norm.omegas[0] - 0.6).abs() < 1e-15);
        assert!((norm.omegas[1] + 0.6).abs() < 1e-15);
        assert_eq!(norm.coupling, 2.0);
        assert_eq!(norm.ktilde, -1.0);
        assert_eq!(norm.time_scale, 1.0);
        assert!(norm.theta0.iter().sum::<f64>().abs() < NORMALIZATION_TOL);
        assert!(norm.omegas.iter().sum::<f64>().abs() < NORMALIZATION_TOL);
    }

    #[test]
    fn normalize_idempotent() {
        let model = KuramotoModel {
            d: 3,
            omegas: vec![0.4, -0.1, 0.7],
            coupling: -5.0,
            theta0: vec![1.0, 0.3, -0.6],
        };
        let once = normalize(&model).unwrap();
        let again = normalize(&KuramotoModel {
            d: once.d,
            omegas: once.omegas.clone(),
            coupling: once.coupling,
            theta0: once.theta0.clone(),
        })
        .unwrap();
        for (a, b) in once.omegas.iter().zip(&again.omegas) {
            assert!((a - b).abs() < 1e-13);
        }
        for (a, b) in once.theta0.iter().zip(&again.theta0) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(once.coupling, again.coupling);
    }

    #[test]
    fn reduced_field_coefficients() {
        let f = reduced_field(1.0, 1.0).unwrap();
        assert_eq!(f.coeff(0), Complex64::new(1.0, 0.0));
        assert_eq!(f.coeff(2), Complex64::new(0.0, -0.5));
        assert_eq!(f.coeff(-2), Complex64::new(0.0, 0.5));
        assert_eq!(f.envelope().d, 2.0);

        let f = reduced_field(0.0, 1.0).unwrap();
        assert!((f.eval(FRAC_PI_4).unwrap() - 1.0).abs() < 1e-14);

        assert!(matches!(
            reduced_field(1.0, 0.3),
            Err(KuramotoError::UnnormalizedCoupling(_))
        ));
    }

    #[test]
    fn equilibria_examples() {
        match equilibria(1.0, 1.0).unwrap() {
            Equilibria::Convergent([a, b]) => {
                assert!((a + FRAC_PI_4).abs() < 1e-15);
                assert!((b + FRAC_PI_4).abs() < 1e-15);
            }
            _ => panic!(),
        }
        match equilibria(0.0, 1.0).unwrap() {
            Equilibria::Convergent([a, b]) => {
                assert_eq!(a, 0.0);
                assert!((b + FRAC_PI_2).abs() < 1e-15);
            }
            _ => panic!(),
        }
        assert_eq!(equilibria(1.5, 1.0).unwrap(), Equilibria::Divergent);
    }

    #[test]
    fn full_rhs_examples() {
        let norm = normalize(&KuramotoModel {
            d: 2,
            omegas: vec![0.5, -0.5],
            coupling: -2.0,
            theta0: vec![0.3, -0.3],
        })
        .unwrap();
        let field = full_rhs(&norm).unwrap();
        let at_zero = field.eval(&[0.0, 0.0]).unwrap();
        assert!((at_zero[0] - norm.omegas[0]).abs() < 1e-14);
        assert!((at_zero[1] - norm.omegas[1]).abs() < 1e-14);

        let at_quarter = field.eval(&[0.0, FRAC_PI_2]).unwrap();
        assert!((at_quarter[0] - (norm.omegas[0] + norm.coupling / 2.0)).abs() < 1e-13);
    }

    #[test]
    fn long_run_behavior() {
        use crate::integrate::{integrate_reference_1d, TimeGrid};
        let grid = TimeGrid::uniform(50.0, 501).unwrap();
        // |omega1| <= 1: settles onto the equilibria set mod pi
        let field = reduced_field(0.4, 1.0).unwrap();
        let traj = integrate_reference_1d(&field, 0.9, &grid, 1e-10).unwrap();
        let theta_end = traj.states.last().unwrap()[0];
        let Equilibria::Convergent(reps) = equilibria(0.4, 1.0).unwrap() else {
            panic!()
        };
        let dist = reps
            .iter()
            .map(|rep| {
                let delta = (theta_end - rep).rem_euclid(PI);
                delta.min(PI - delta)
            })
            .fold(f64::MAX, f64::min);
        assert!(dist < 1e-3, "dist {dist}");

        // |omega1| > 1: unbounded phase
        let field = reduced_field(1.5, 1.0).unwrap();
        let traj = integrate_reference_1d(&field, 0.0, &grid, 1e-10).unwrap();
        assert!((traj.states.last().unwrap()[0] - traj.states[0][0]).abs() > PI);
    }

    #[test]
    fn model_json_roundtrip() {
        let text = r#"{"d":2,"omegas":[1.0,-1.0],"K":2.0,"theta0":[0.4,-0.4]}"#;
        let model = parse_model_json(text).unwrap();
        assert_eq!(model.d, 2);
        assert_eq!(model.coupling, 2.0);
        assert!(parse_model_json(r#"{"d":2,"omegas":[0.0,0.0],"K":0.0,"theta0":[0.0,0.0]}"#).is_err());
    }
}
