//! Carleman-Fourier lift: graded multi-index enumeration, sparse
//! block-upper-triangular block construction for single-frequency and
//! quasi-periodic fields, lifted initial states, and assembly into an
//! integrable operator.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::fourier_field::{ExtendedField, FourierField1D};

/// Default cap on the total number of lifted state components.
pub const DEFAULT_STATE_CAP: usize = 200_000;

const DIAGONAL_IMAG_TOL: f64 = 1e-12;
const UNIT_MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("state dimension cap exceeded: {dim} > {cap}")]
    StateCapExceeded { dim: usize, cap: usize },
    #[error("ambient dimension must be at least 2, got {0}")]
    BadAmbientDim(usize),
    #[error("section order must be at least 1")]
    BadOrder,
    #[error("field not real-valued")]
    NotRealValued,
    #[error("table ambient dimension {table} does not match field {field}")]
    AmbientMismatch { table: usize, field: usize },
    #[error("section order {n} exceeds table grade bound {k}")]
    OrderExceedsTable { n: usize, k: usize },
    #[error("extended state length {got}, expected {expected}")]
    StateLengthMismatch { got: usize, expected: usize },
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}

/// Graded enumeration of nonnegative integer multi-indices in `Z_+^m`,
/// grades `1..=k_max`, each grade ordered lexicographically descending.
/// For `m = 2` grade `k` is `[(k,0), (k-1,1), .., (0,k)]`.
#[derive(Debug, Clone)]
pub struct MultiIndexTable {
    m: usize,
    k_max: usize,
    grades: Vec<Vec<Vec<u32>>>,
    index: HashMap<Vec<u32>, (usize, usize)>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn grade_vectors(m: usize, k: usize) -> Vec<Vec<u32>> {
    // recursion emits descending-lex order directly
    let mut out = Vec::with_capacity(binomial(k + m - 1, m - 1));
    let mut prefix = vec![0u32; m];
    fn rec(prefix: &mut Vec<u32>, pos: usize, rem: u32, m: usize, out: &mut Vec<Vec<u32>>) {
        if pos == m - 1 {
            prefix[pos] = rem;
            out.push(prefix.clone());
            return;
        }
        for v in (0..=rem).rev() {
            prefix[pos] = v;
            rec(prefix, pos + 1, rem - v, m, out);
        }
    }
    rec(&mut prefix, 0, k as u32, m, &mut out);
    out
}

impl MultiIndexTable {
    pub fn new(m: usize, k_max: usize) -> Result<Self, LiftError> {
        Self::with_cap(m, k_max, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(m: usize, k_max: usize, cap: usize) -> Result<Self, LiftError> {
        if m < 2 {
            return Err(LiftError::BadAmbientDim(m));
        }
        if k_max < 1 {
            return Err(LiftError::BadOrder);
        }
        let total: usize = (1..=k_max).map(|k| binomial(k + m - 1, m - 1)).sum();
        if total > cap {
            return Err(LiftError::StateCapExceeded { dim: total, cap });
        }
        let mut grades = Vec::with_capacity(k_max);
        let mut index = HashMap::with_capacity(total);
        for k in 1..=k_max {
            let vecs = grade_vectors(m, k);
            for (pos, gamma) in vecs.iter().enumerate() {
                index.insert(gamma.clone(), (k, pos));
            }
            grades.push(vecs);
        }
        Ok(Self {
            m,
            k_max,
            grades,
            index,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn max_grade(&self) -> usize {
        self.k_max
    }

    /// Multi-indices of grade `k` (1-based), in storage order.
    pub fn grade(&self, k: usize) -> &[Vec<u32>] {
        &self.grades[k - 1]
    }

    pub fn grade_size(&self, k: usize) -> usize {
        self.grades[k - 1].len()
    }

    /// Total lifted dimension for section order `n`.
    pub fn section_dim(&self, n: usize) -> usize {
        (1..=n).map(|k| self.grade_size(k)).sum()
    }

    /// Position of `gamma` within its grade.
    pub fn lookup(&self, gamma: &[u32]) -> Option<(usize, usize)> {
        self.index.get(gamma).copied()
    }

    /// Layout dump (CSV): `grade,position,gamma_1,..,gamma_m`.
    pub fn dump_csv(&self, n: usize) -> String {
        let mut out = String::from("grade,position,");
        out.push_str(
            &(1..=self.m)
                .map(|i| format!("gamma_{i}"))
                .collect::<Vec<_>>()
                .join(","),
        );
        out.push('\n');
        for k in 1..=n.min(self.k_max) {
            for (pos, gamma) in self.grade(k).iter().enumerate() {
                let comps = gamma
                    .iter()
                    .map(|g| g.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                writeln!(out, "{k},{pos},{comps}").unwrap();
            }
        }
        out
    }
}

/// Sparse blocks of the lifted operator, keyed by 1-based `(k, l)` with
/// `k <= l`; each block holds coordinate triplets in-block.
#[derive(Debug, Clone, Default)]
pub struct BlockMatrix {
    pub n: usize,
    pub blocks: BTreeMap<(usize, usize), Vec<(usize, usize, Complex64)>>,
}

impl BlockMatrix {
    pub fn block(&self, k: usize, l: usize) -> Option<&Vec<(usize, usize, Complex64)>> {
        self.blocks.get(&(k, l))
    }

    /// Entry lookup summing duplicate triplets.
    pub fn entry(&self, k: usize, l: usize, row: usize, col: usize) -> Complex64 {
        self.blocks
            .get(&(k, l))
            .map(|trips| {
                trips
                    .iter()
                    .filter(|&&(r, c, _)| r == row && c == col)
                    .map(|&(_, _, v)| v)
                    .sum()
            })
            .unwrap_or_default()
    }
}

/// Blocks of the single-frequency (m = 2) lift: for each stored
/// frequency `s = l - k >= 0`, block `(k, k+s)` has row `p` entries
/// `i(k-2p) g_s` at column `p` and `i(k-2p) g_{-s}` at column `s+p`.
pub fn build_blocks_1d(field: &FourierField1D, n: usize) -> Result<BlockMatrix, LiftError> {
    if n < 1 {
        return Err(LiftError::BadOrder);
    }
    if !field.is_real_valued() {
        return Err(LiftError::NotRealValued);
    }
    let mut offsets: Vec<u32> = field
        .coeffs()
        .keys()
        .map(|&freq| freq.unsigned_abs())
        .collect();
    offsets.sort_unstable();
    offsets.dedup();
    let mut blocks: BTreeMap<(usize, usize), Vec<(usize, usize, Complex64)>> = BTreeMap::new();
    for &s in &offsets {
        let s = s as usize;
        let g_pos = field.coeff(s as i32);
        let g_neg = field.coeff(-(s as i32));
        for k in 1..=n {
            let l = k + s;
            if l > n {
                break;
            }
            let mut trips = Vec::with_capacity(2 * (k + 1));
            for p in 0..=k {
                let scale = Complex64::new(0.0, (k as f64) - 2.0 * p as f64);
                if s == 0 {
                    if g_pos != Complex64::default() {
                        trips.push((p, p, scale * g_pos));
                    }
                } else {
                    if g_pos != Complex64::default() {
                        trips.push((p, p, scale * g_pos));
                    }
                    if g_neg != Complex64::default() {
                        trips.push((p, s + p, scale * g_neg));
                    }
                }
            }
            if !trips.is_empty() {
                blocks.insert((k, l), trips);
            }
        }
    }
    Ok(BlockMatrix { n, blocks })
}

/// Blocks of the multi-frequency lift: entry of `F_{k,l}` at row `gamma`
/// (grade `k`), column `delta` (grade `l`) is
/// `i sum_j gamma_j f_{j; delta - gamma}`.
pub fn build_blocks_multi(
    ext: &ExtendedField,
    table: &MultiIndexTable,
    n: usize,
) -> Result<BlockMatrix, LiftError> {
    if n < 1 {
        return Err(LiftError::BadOrder);
    }
    if ext.ambient_dim() != table.ambient_dim() {
        return Err(LiftError::AmbientMismatch {
            table: table.ambient_dim(),
            field: ext.ambient_dim(),
        });
    }
    if n > table.max_grade() {
        return Err(LiftError::OrderExceedsTable {
            n,
            k: table.max_grade(),
        });
    }
    let m = table.ambient_dim();
    let mut entries: BTreeMap<(usize, usize), BTreeMap<(usize, usize), Complex64>> =
        BTreeMap::new();
    for k in 1..=n {
        for (row, gamma) in table.grade(k).iter().enumerate() {
            for ((j, offset), &value) in ext.coeffs() {
                if gamma[*j - 1] == 0 {
                    continue;
                }
                let jump: usize = offset.iter().map(|&o| o as usize).sum();
                let l = k + jump;
                if l > n {
                    continue;
                }
                let delta: Vec<u32> = (0..m).map(|q| gamma[q] + offset[q]).collect();
                let (grade, col) = table
                    .lookup(&delta)
                    .expect("delta stays within the enumerated grades");
                debug_assert_eq!(grade, l);
                let weight = Complex64::new(0.0, gamma[*j - 1] as f64) * value;
                *entries
                    .entry((k, l))
                    .or_default()
                    .entry((row, col))
                    .or_default() += weight;
            }
        }
    }
    let blocks = entries
        .into_iter()
        .filter_map(|((k, l), cells)| {
            let trips: Vec<_> = cells
                .into_iter()
                .filter(|&(_, v)| v != Complex64::default())
                .map(|((r, c), v)| (r, c, v))
                .collect();
            (!trips.is_empty()).then_some(((k, l), trips))
        })
        .collect();
    Ok(BlockMatrix { n, blocks })
}

/// Extended state `[tau_1 x^T, .., tau_L x^T, -tau_1 x^T, .., -tau_L x^T]`.
pub fn extend_state(x0: &[f64], taus: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * taus.len() * x0.len());
    for &tau in taus {
        out.extend(x0.iter().map(|&x| tau * x));
    }
    for &tau in taus {
        out.extend(x0.iter().map(|&x| -tau * x));
    }
    out
}

/// Lifted initial state: component at `(grade k, gamma)` is
/// `e^{i gamma^T x_ext}`.
pub fn initial_lifted(
    x0_ext: &[f64],
    table: &MultiIndexTable,
    n: usize,
) -> Result<Vec<Complex64>, LiftError> {
    if x0_ext.len() != table.ambient_dim() {
        return Err(LiftError::StateLengthMismatch {
            got: x0_ext.len(),
            expected: table.ambient_dim(),
        });
    }
    if n > table.max_grade() {
        return Err(LiftError::OrderExceedsTable {
            n,
            k: table.max_grade(),
        });
    }
    let mut z0 = Vec::with_capacity(table.section_dim(n));
    for k in 1..=n {
        for gamma in table.grade(k) {
            let phase: f64 = gamma
                .iter()
                .zip(x0_ext)
                .map(|(&g, &x)| g as f64 * x)
                .sum();
            z0.push(Complex64::from_polar(1.0, phase));
        }
    }
    Ok(z0)
}

/// Assembled finite-section operator with block layout metadata and the
/// lifted initial state.
#[derive(Debug, Clone)]
pub struct LiftedSystem {
    pub n: usize,
    pub table: MultiIndexTable,
    pub dim: usize,
    pub blocks: BlockMatrix,
    /// Global row/column offset of each grade block, `offsets[k-1]`.
    pub offsets: Vec<usize>,
    pub z0: Vec<Complex64>,
}

/// Validates the lift invariants and records block offsets.
pub fn assemble(
    blocks: BlockMatrix,
    table: MultiIndexTable,
    z0: Vec<Complex64>,
) -> Result<LiftedSystem, LiftError> {
    let n = blocks.n;
    if n > table.max_grade() {
        return Err(LiftError::OrderExceedsTable {
            n,
            k: table.max_grade(),
        });
    }
    let mut offsets = Vec::with_capacity(n);
    let mut dim = 0usize;
    for k in 1..=n {
        offsets.push(dim);
        dim += table.grade_size(k);
    }
    if z0.len() != dim {
        return Err(LiftError::StateLengthMismatch {
            got: z0.len(),
            expected: dim,
        });
    }
    for (&(k, l), trips) in &blocks.blocks {
        if l < k {
            return Err(LiftError::InvariantViolated(format!(
                "strictly-lower block ({k},{l}) present"
            )));
        }
        if k > n || l > n {
            return Err(LiftError::InvariantViolated(format!(
                "block ({k},{l}) outside section order {n}"
            )));
        }
        let (rows, cols) = (table.grade_size(k), table.grade_size(l));
        for &(row, col, v) in trips {
            if row >= rows || col >= cols {
                return Err(LiftError::InvariantViolated(format!(
                    "triplet ({row},{col}) outside block ({k},{l}) shape {rows}x{cols}"
                )));
            }
            if k == l && (row != col || v.re.abs() > DIAGONAL_IMAG_TOL) {
                return Err(LiftError::InvariantViolated(format!(
                    "diagonal block ({k},{k}) entry ({row},{col}) not purely imaginary diagonal"
                )));
            }
        }
    }
    for (i, z) in z0.iter().enumerate() {
        if (z.norm() - 1.0).abs() > UNIT_MODULUS_TOL {
            return Err(LiftError::InvariantViolated(format!(
                "initial state component {i} has modulus {}",
                z.norm()
            )));
        }
    }
    Ok(LiftedSystem {
        n,
        table,
        dim,
        blocks,
        offsets,
        z0,
    })
}

impl LiftedSystem {
    /// `out = B z` over the assembled sparse blocks.
    pub fn apply(&self, z: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::default());
        for (&(k, l), trips) in &self.blocks.blocks {
            let (row_off, col_off) = (self.offsets[k - 1], self.offsets[l - 1]);
            for &(row, col, v) in trips {
                out[row_off + row] += v * z[col_off + col];
            }
        }
    }

    /// Dense row-major copy of the operator (for matrix-exponential
    /// integration of small sections).
    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut dense = vec![Complex64::default(); self.dim * self.dim];
        for (&(k, l), trips) in &self.blocks.blocks {
            let (row_off, col_off) = (self.offsets[k - 1], self.offsets[l - 1]);
            for &(row, col, v) in trips {
                dense[(row_off + row) * self.dim + (col_off + col)] += v;
            }
        }
        dense
    }

    /// Range of global indices covered by grade `k`.
    pub fn grade_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.offsets[k - 1];
        start..start + self.table.grade_size(k)
    }

    /// Block dump (CSV): `k,l,row,col,re,im` with 0-based in-block
    /// indices.
    pub fn dump_csv(&self) -> String {
        let mut out = String::from("k,l,row,col,re,im\n");
        for (&(k, l), trips) in &self.blocks.blocks {
            for &(row, col, v) in trips {
                writeln!(out, "{k},{l},{row},{col},{},{}", v.re, v.im).unwrap();
            }
        }
        out
    }
}

/// Convenience path for 1-D fields: build blocks, lift the initial
/// state through `extend_state([x0], [1])`, and assemble.
pub fn lift_1d(field: &FourierField1D, x0: f64, n: usize) -> Result<LiftedSystem, LiftError> {
    let blocks = build_blocks_1d(field, n)?;
    let table = MultiIndexTable::new(2, n)?;
    let z0 = initial_lifted(&extend_state(&[x0], &[1.0]), &table, n)?;
    assemble(blocks, table, z0)
}
