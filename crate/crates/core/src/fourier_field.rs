//! Fourier-side representation of periodic and quasi-periodic vector
//! fields: finitely supported coefficient maps, exponential-decay
//! envelopes, pointwise evaluation, Maclaurin conversion and the
//! nonnegative-frequency extension used by the Carleman-Fourier lift.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Deserialize;
use thiserror::Error;

/// Tolerance for conjugate-symmetry (reality) checks on coefficients.
const REALITY_TOL: f64 = 1e-12;
/// Tolerance on the imaginary residue of Maclaurin coefficients.
const MACLAURIN_IM_TOL: f64 = 1e-10;
/// Relative slack applied to envelope and Maclaurin bound checks.
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("field not real-valued")]
    NotRealValued,
    #[error("coefficient at n={0} is not finite")]
    NonFiniteCoefficient(i32),
    #[error("envelope rate r={0} outside (0, 1)")]
    BadEnvelopeRate(f64),
    #[error("envelope violated at n={n}: |g_n|={magnitude} > D r^|n|={bound}")]
    EnvelopeViolated { n: i32, magnitude: f64, bound: f64 },
    #[error("decay condition violated at grade {k}: sum={sum} > bound={bound}")]
    MultiEnvelopeViolated { k: usize, sum: f64, bound: f64 },
    #[error("state vector has length {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("fundamental frequencies must be distinct and positive")]
    BadFrequencies,
    #[error("component index p={0} outside 1..=d")]
    BadComponent(usize),
    #[error("Maclaurin order must be at least 1")]
    BadMaclaurinOrder,
    #[error("Maclaurin bound violated at m={m}: |c_m|={magnitude} > {bound}")]
    MaclaurinBoundViolated { m: usize, magnitude: f64, bound: f64 },
    #[error("field file: {0}")]
    Parse(String),
}

/// Exponential decay certificate `|g_n| <= D r^|n|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEnvelope {
    pub d: f64,
    pub r: f64,
}

impl DecayEnvelope {
    pub fn new(d: f64, r: f64) -> Result<Self, FieldError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FieldError::BadEnvelopeRate(r));
        }
        Ok(Self { d, r })
    }
}

/// One-dimensional periodic field `g(x) = sum_n g_n e^{inx}` with finite
/// support, stored as a map from integer frequency to coefficient.
#[derive(Debug, Clone)]
pub struct FourierField1D {
    coeffs: BTreeMap<i32, Complex64>,
    envelope: DecayEnvelope,
    real_valued: bool,
}

fn is_conjugate_symmetric(coeffs: &BTreeMap<i32, Complex64>) -> bool {
    coeffs.iter().all(|(&n, &g)| {
        let mirror = coeffs.get(&-n).copied().unwrap_or_default();
        (mirror - g.conj()).norm() <= REALITY_TOL * g.norm().max(1.0)
    })
}

impl FourierField1D {
    /// Builds a real-valued field; rejects non-conjugate-symmetric data
    /// and coefficients violating the supplied envelope.
    pub fn new(
        coeffs: BTreeMap<i32, Complex64>,
        envelope: DecayEnvelope,
    ) -> Result<Self, FieldError> {
        for (&n, &g) in &coeffs {
            if !g.re.is_finite() || !g.im.is_finite() {
                return Err(FieldError::NonFiniteCoefficient(n));
            }
        }
        if !is_conjugate_symmetric(&coeffs) {
            return Err(FieldError::NotRealValued);
        }
        for (&n, &g) in &coeffs {
            let bound = envelope.d * envelope.r.powi(n.abs());
            if g.norm() > bound * (1.0 + BOUND_SLACK) {
                return Err(FieldError::EnvelopeViolated {
                    n,
                    magnitude: g.norm(),
                    bound,
                });
            }
        }
        Ok(Self {
            coeffs,
            envelope,
            real_valued: true,
        })
    }

    /// Builds a field with the minimal envelope for the given rate `r`.
    /// The boolean reports whether the coefficient map was empty, in
    /// which case `D = 0`.
    pub fn with_fitted_envelope(
        coeffs: BTreeMap<i32, Complex64>,
        r: f64,
    ) -> Result<(Self, bool), FieldError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FieldError::BadEnvelopeRate(r));
        }
        let d = fit_envelope_1d(&coeffs, r);
        let empty = coeffs.is_empty();
        let field = Self::new(coeffs, DecayEnvelope { d, r })?;
        Ok((field, empty))
    }

    /// Escape hatch for constructing a non-real field; evaluation and
    /// Maclaurin conversion reject it.
    pub fn new_complex_unchecked(
        coeffs: BTreeMap<i32, Complex64>,
        envelope: DecayEnvelope,
    ) -> Self {
        let real_valued = is_conjugate_symmetric(&coeffs);
        Self {
            coeffs,
            envelope,
            real_valued,
        }
    }

    pub fn coeffs(&self) -> &BTreeMap<i32, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, n: i32) -> Complex64 {
        self.coeffs.get(&n).copied().unwrap_or_default()
    }

    pub fn envelope(&self) -> DecayEnvelope {
        self.envelope
    }

    pub fn is_real_valued(&self) -> bool {
        self.real_valued
    }

    /// Refits the envelope at a different rate, keeping the coefficients.
    pub fn refit_envelope(&self, r: f64) -> Result<Self, FieldError> {
        let (field, _) = Self::with_fitted_envelope(self.coeffs.clone(), r)?;
        Ok(field)
    }

    /// Evaluates `g(x) = sum_n g_n e^{inx}` over the stored support.
    pub fn eval(&self, x: f64) -> Result<f64, FieldError> {
        if !self.real_valued {
            return Err(FieldError::NotRealValued);
        }
        let mut acc = Complex64::default();
        for (&n, &g) in &self.coeffs {
            acc += g * Complex64::from_polar(1.0, n as f64 * x);
        }
        debug_assert!(acc.im.abs() < 1e-12 * acc.re.abs().max(1.0));
        Ok(acc.re)
    }

    /// Minimal `D` such that `|g_n| <= D r^|n|` holds for the stored
    /// support, paired with an emptiness flag.
    pub fn fit_envelope(&self, r: f64) -> Result<(f64, bool), FieldError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FieldError::BadEnvelopeRate(r));
        }
        Ok((fit_envelope_1d(&self.coeffs, r), self.coeffs.is_empty()))
    }

    /// Maclaurin coefficients `c_m = (1/m!) sum_n (in)^m g_n` for
    /// `m = 0..=order`, exact over the finite support.
    pub fn maclaurin(&self, order: usize) -> Result<MaclaurinCoeffs, FieldError> {
        if order < 1 {
            return Err(FieldError::BadMaclaurinOrder);
        }
        let mut c = Vec::with_capacity(order + 1);
        let mut factorial = 1.0f64;
        for m in 0..=order {
            if m > 0 {
                factorial *= m as f64;
            }
            let mut acc = Complex64::default();
            for (&n, &g) in &self.coeffs {
                let inm = Complex64::new(0.0, n as f64).powu(m as u32);
                acc += inm * g;
            }
            acc /= factorial;
            if acc.im.abs() > MACLAURIN_IM_TOL * acc.re.abs().max(1.0) {
                return Err(FieldError::NotRealValued);
            }
            c.push(acc.re);
        }
        MaclaurinCoeffs::checked(c, self.envelope)
    }

    /// Lifts into a quasi-periodic field with `d = 1`, `L = 1`, `tau = 1`.
    pub fn as_quasi_periodic(&self) -> Result<QuasiPeriodicField, FieldError> {
        let coeffs = self
            .coeffs
            .iter()
            .map(|(&n, &g)| ((1usize, vec![n]), g))
            .collect();
        QuasiPeriodicField::new(1, 1, vec![1.0], coeffs, self.envelope)
    }
}

fn fit_envelope_1d(coeffs: &BTreeMap<i32, Complex64>, r: f64) -> f64 {
    coeffs
        .iter()
        .map(|(&n, &g)| g.norm() * r.powi(-n.abs()))
        .fold(0.0, f64::max)
}

/// Truncated Maclaurin expansion of a periodic field, with the bound on
/// the discarded coefficient mass at unit radius.
#[derive(Debug, Clone)]
pub struct MaclaurinCoeffs {
    pub c: Vec<f64>,
    pub truncation_tail: f64,
}

impl MaclaurinCoeffs {
    fn checked(c: Vec<f64>, envelope: DecayEnvelope) -> Result<Self, FieldError> {
        let DecayEnvelope { d, r } = envelope;
        let log_inv_r = (1.0 / r).ln();
        let c0_bound = d * (1.0 + r) / (1.0 - r);
        if c[0].abs() > c0_bound * (1.0 + BOUND_SLACK) {
            return Err(FieldError::MaclaurinBoundViolated {
                m: 0,
                magnitude: c[0].abs(),
                bound: c0_bound,
            });
        }
        for (m, &cm) in c.iter().enumerate().skip(1) {
            let bound = 2.0 * d / r * log_inv_r.powi(-(m as i32) - 1);
            if cm.abs() > bound * (1.0 + BOUND_SLACK) {
                return Err(FieldError::MaclaurinBoundViolated {
                    m,
                    magnitude: cm.abs(),
                    bound,
                });
            }
        }
        let order = c.len() - 1;
        let truncation_tail = if log_inv_r > 1.0 {
            2.0 * d / r * log_inv_r.powi(-(order as i32) - 2) / (1.0 - 1.0 / log_inv_r)
        } else {
            f64::INFINITY
        };
        Ok(Self {
            c,
            truncation_tail,
        })
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    /// Evaluates the truncated polynomial at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &cm| acc * x + cm)
    }
}

/// Coefficient key of a quasi-periodic field: component index `p`
/// (1-based) and the `L` frequency multi-indices concatenated into a
/// single `L*d` vector.
pub type MultiCoeffKey = (usize, Vec<i32>);

/// `d`-dimensional field with `L` fundamental frequencies,
/// `g_p(x) = sum g_{p; a_1..a_L} e^{i (tau_1 a_1 + .. + tau_L a_L)^T x}`.
#[derive(Debug, Clone)]
pub struct QuasiPeriodicField {
    d: usize,
    num_freqs: usize,
    taus: Vec<f64>,
    coeffs: BTreeMap<MultiCoeffKey, Complex64>,
    envelope: DecayEnvelope,
}

impl QuasiPeriodicField {
    pub fn new(
        d: usize,
        num_freqs: usize,
        taus: Vec<f64>,
        coeffs: BTreeMap<MultiCoeffKey, Complex64>,
        envelope: DecayEnvelope,
    ) -> Result<Self, FieldError> {
        if taus.len() != num_freqs
            || taus.iter().any(|&t| !(t > 0.0))
            || (1..taus.len()).any(|i| taus[..i].contains(&taus[i]))
        {
            return Err(FieldError::BadFrequencies);
        }
        for ((p, alphas), &g) in &coeffs {
            if *p < 1 || *p > d {
                return Err(FieldError::BadComponent(*p));
            }
            if alphas.len() != num_freqs * d {
                return Err(FieldError::DimensionMismatch {
                    got: alphas.len(),
                    expected: num_freqs * d,
                });
            }
            let mirror: Vec<i32> = alphas.iter().map(|&a| -a).collect();
            let paired = coeffs.get(&(*p, mirror)).copied().unwrap_or_default();
            if (paired - g.conj()).norm() > REALITY_TOL * g.norm().max(1.0) {
                return Err(FieldError::NotRealValued);
            }
        }
        let field = Self {
            d,
            num_freqs,
            taus,
            coeffs,
            envelope,
        };
        for (k, sum) in field.grade_sums() {
            let bound = field.grade_bound(envelope, k);
            if sum > bound * (1.0 + BOUND_SLACK) {
                return Err(FieldError::MultiEnvelopeViolated { k, sum, bound });
            }
        }
        Ok(field)
    }

    /// Builds with the minimal envelope for the given rate.
    pub fn with_fitted_envelope(
        d: usize,
        num_freqs: usize,
        taus: Vec<f64>,
        coeffs: BTreeMap<MultiCoeffKey, Complex64>,
        r: f64,
    ) -> Result<(Self, bool), FieldError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FieldError::BadEnvelopeRate(r));
        }
        let empty = coeffs.is_empty();
        let probe = Self::new(d, num_freqs, taus, coeffs, DecayEnvelope { d: f64::MAX, r })?;
        let (fitted, _) = probe.fit_envelope(r)?;
        let mut field = probe;
        field.envelope = DecayEnvelope { d: fitted, r };
        Ok((field, empty))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn coeffs(&self) -> &BTreeMap<MultiCoeffKey, Complex64> {
        &self.coeffs
    }

    pub fn envelope(&self) -> DecayEnvelope {
        self.envelope
    }

    /// Per-grade coefficient sums `sup_p sum_{|a_1|+..+|a_L|=k} |g|`.
    fn grade_sums(&self) -> BTreeMap<usize, f64> {
        let mut per_pk: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for ((p, alphas), g) in &self.coeffs {
            let k: usize = alphas.iter().map(|&a| a.unsigned_abs() as usize).sum();
            *per_pk.entry((*p, k)).or_default() += g.norm();
        }
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for ((_, k), s) in per_pk {
            let entry = sums.entry(k).or_default();
            *entry = entry.max(s);
        }
        sums
    }

    fn grade_bound(&self, envelope: DecayEnvelope, k: usize) -> f64 {
        let tau_sum: f64 = self.taus.iter().sum();
        2f64.powi(self.d as i32) * envelope.d / tau_sum * envelope.r.powi(k as i32)
    }

    /// Minimal `D` satisfying the per-grade decay condition at rate `r`.
    pub fn fit_envelope(&self, r: f64) -> Result<(f64, bool), FieldError> {
        if !(r > 0.0 && r < 1.0) {
            return Err(FieldError::BadEnvelopeRate(r));
        }
        let tau_sum: f64 = self.taus.iter().sum();
        let scale = tau_sum / 2f64.powi(self.d as i32);
        let d = self
            .grade_sums()
            .iter()
            .map(|(&k, &s)| s * scale * r.powi(-(k as i32)))
            .fold(0.0, f64::max);
        Ok((d, self.coeffs.is_empty()))
    }

    /// Evaluates all components at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        if x.len() != self.d {
            return Err(FieldError::DimensionMismatch {
                got: x.len(),
                expected: self.d,
            });
        }
        let mut acc = vec![Complex64::default(); self.d];
        for ((p, alphas), &g) in &self.coeffs {
            let mut phase = 0.0;
            for l in 0..self.num_freqs {
                for j in 0..self.d {
                    phase += self.taus[l] * alphas[l * self.d + j] as f64 * x[j];
                }
            }
            acc[*p - 1] += g * Complex64::from_polar(1.0, phase);
        }
        Ok(acc
            .into_iter()
            .map(|z| {
                debug_assert!(z.im.abs() < 1e-12 * z.re.abs().max(1.0));
                z.re
            })
            .collect())
    }

    /// Rewrites the field over the extended state
    /// `[tau_1 x, .., tau_L x, -tau_1 x, .., -tau_L x]`, producing only
    /// nonnegative frequency multi-indices.
    pub fn extend(&self) -> ExtendedField {
        let d = self.d;
        let nf = self.num_freqs;
        let m = 2 * d * nf;
        let mut fcoeffs: BTreeMap<(usize, Vec<u32>), Complex64> = BTreeMap::new();
        for ((p, alphas), &g) in &self.coeffs {
            let mut gamma = vec![0u32; m];
            for (i, &a) in alphas.iter().enumerate() {
                if a >= 0 {
                    gamma[i] = a as u32;
                } else {
                    gamma[nf * d + i] = (-a) as u32;
                }
            }
            for sign_idx in 0..2usize {
                for l in 1..=nf {
                    let j = sign_idx * nf * d + (l - 1) * d + p;
                    let value = if sign_idx == 0 { 1.0 } else { -1.0 } * self.taus[l - 1] * g;
                    *fcoeffs.entry((j, gamma.clone())).or_default() += value;
                }
            }
        }
        ExtendedField { m, fcoeffs }
    }
}

/// Field over the extended state, with nonnegative frequency vectors
/// `gamma` in `Z_+^m`, `m = 2dL`.
#[derive(Debug, Clone)]
pub struct ExtendedField {
    m: usize,
    fcoeffs: BTreeMap<(usize, Vec<u32>), Complex64>,
}

impl ExtendedField {
    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn coeffs(&self) -> &BTreeMap<(usize, Vec<u32>), Complex64> {
        &self.fcoeffs
    }

    pub fn coeff(&self, j: usize, gamma: &[u32]) -> Complex64 {
        self.fcoeffs
            .get(&(j, gamma.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Evaluates component `j` at an extended state (test oracle for the
    /// extension identity).
    pub fn eval_component(&self, j: usize, x_ext: &[f64]) -> Complex64 {
        let mut acc = Complex64::default();
        for ((jj, gamma), &v) in &self.fcoeffs {
            if *jj != j {
                continue;
            }
            let phase: f64 = gamma
                .iter()
                .zip(x_ext)
                .map(|(&g, &x)| g as f64 * x)
                .sum();
            acc += v * Complex64::from_polar(1.0, phase);
        }
        acc
    }
}

#[derive(Deserialize)]
struct FieldFileEnvelope {
    #[serde(rename = "D")]
    d: Option<f64>,
    r: f64,
}

#[derive(Deserialize)]
struct FieldFileCoeff {
    p: Option<usize>,
    alphas: Option<Vec<Vec<i32>>>,
    n: Option<i32>,
    re: f64,
    im: f64,
}

#[derive(Deserialize)]
struct FieldFile {
    d: Option<usize>,
    #[serde(rename = "L")]
    num_freqs: Option<usize>,
    taus: Option<Vec<f64>>,
    coeffs: Vec<FieldFileCoeff>,
    envelope: FieldFileEnvelope,
}

/// A field ingested from JSON: either the 1-D shorthand or the general
/// quasi-periodic form.
#[derive(Debug, Clone)]
pub enum Field {
    OneD(FourierField1D),
    Multi(QuasiPeriodicField),
}

/// Parses a field ingestion file. Entries with an `n` key use the 1-D
/// shorthand; otherwise `p`/`alphas` are required.
pub fn parse_field_json(text: &str) -> Result<Field, FieldError> {
    let file: FieldFile =
        serde_json::from_str(text).map_err(|e| FieldError::Parse(e.to_string()))?;
    let shorthand = file.coeffs.iter().all(|c| c.n.is_some());
    if shorthand && file.d.unwrap_or(1) == 1 && file.num_freqs.unwrap_or(1) == 1 {
        let mut coeffs = BTreeMap::new();
        for c in &file.coeffs {
            coeffs.insert(c.n.unwrap(), Complex64::new(c.re, c.im));
        }
        let field = match file.envelope.d {
            Some(d) => FourierField1D::new(coeffs, DecayEnvelope::new(d, file.envelope.r)?)?,
            None => FourierField1D::with_fitted_envelope(coeffs, file.envelope.r)?.0,
        };
        return Ok(Field::OneD(field));
    }
    let d = file
        .d
        .ok_or_else(|| FieldError::Parse("missing \"d\"".into()))?;
    let num_freqs = file
        .num_freqs
        .ok_or_else(|| FieldError::Parse("missing \"L\"".into()))?;
    let taus = file
        .taus
        .ok_or_else(|| FieldError::Parse("missing \"taus\"".into()))?;
    let mut coeffs = BTreeMap::new();
    for c in &file.coeffs {
        let p = c
            .p
            .ok_or_else(|| FieldError::Parse("coefficient missing \"p\"".into()))?;
        let alphas = c
            .alphas
            .as_ref()
            .ok_or_else(|| FieldError::Parse("coefficient missing \"alphas\"".into()))?;
        if alphas.len() != num_freqs || alphas.iter().any(|a| a.len() != d) {
            return Err(FieldError::Parse("alphas shape must be L x d".into()));
        }
        let flat: Vec<i32> = alphas.iter().flatten().copied().collect();
        coeffs.insert((p, flat), Complex64::new(c.re, c.im));
    }
    let field = match file.envelope.d {
        Some(env_d) => QuasiPeriodicField::new(
            d,
            num_freqs,
            taus,
            coeffs,
            DecayEnvelope::new(env_d, file.envelope.r)?,
        )?,
        None => {
            QuasiPeriodicField::with_fitted_envelope(d, num_freqs, taus, coeffs, file.envelope.r)?.0
        }
    };
    Ok(Field::Multi(field))
}
