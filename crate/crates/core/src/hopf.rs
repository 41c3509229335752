//! Finite Hessian blocks of the Hopf map `SU(2) → CP¹`.
//!
//! The second variation operator restricted to `V^(n) ⊗ p`, with
//! `p = span{ϑ1, ϑ2}`, is a `2(n+1)`-square matrix. Vectors are ordered
//! weight-major: index `2k + i` is `v_k ⊗ ϑ_{i+1}`, which is also the basis
//! `{e1⊗ϑ1, e1⊗ϑ2, e2⊗ϑ1, e2⊗ϑ2}` used for the `n = 1` Ward operator.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenError, CLUSTER_TOL};
use crate::scalar::RepScalar;
use crate::su2::{self, build_irrep, casimir_eigenvalue, CMatrix, Irrep, Su2Error};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HopfError {
    #[error(transparent)]
    Rep(#[from] Su2Error),
    #[error("eigen-solver failure: {0}")]
    Eigen(#[from] EigenError),
    #[error("Ward coupling must be non-negative, got {0}")]
    NegativeCoupling(f64),
    #[error("bracket [{lo}, {hi}] does not straddle the stability threshold (min eigenvalues {min_lo:e}, {min_hi:e})")]
    BracketInvalid { lo: f64, hi: f64, min_lo: f64, min_hi: f64 },
    #[error("bisection tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    #[serde(rename = "L_phi")]
    LPhi,
    #[serde(rename = "A_block")]
    ABlock,
    #[serde(rename = "Ward")]
    Ward,
}

impl BlockKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockKind::LPhi => "L_phi",
            BlockKind::ABlock => "A_block",
            BlockKind::Ward => "Ward",
        }
    }
}

/// An operator on `V^(n) ⊗ p` together with the inner product it is
/// self-adjoint for.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBlock<T: RepScalar> {
    pub n: usize,
    pub kind: BlockKind,
    /// Ward coupling; present only for [`BlockKind::Ward`].
    pub alpha: Option<f64>,
    pub matrix: CMatrix<T>,
    /// `gram ⊗ Id₂` in the weight-major ordering.
    pub inner: CMatrix<T>,
}

impl<T: RepScalar> HessianBlock<T> {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |G·M - M^H·G|` relative to `|G|·|M|`.
    pub fn self_adjoint_residual(&self) -> f64 {
        let lhs = &self.inner * &self.matrix;
        let rhs = su2::conj_transpose(&self.matrix) * &self.inner;
        let scale = su2::max_abs(&self.inner) * su2::max_abs(&self.matrix);
        let r = su2::max_abs(&(lhs - rhs));
        if scale == 0.0 {
            r
        } else {
            r / scale
        }
    }
}

/// Assembles the weight-major matrix of a 2×2 operator matrix whose entries
/// act on `V^(n)`.
fn interleave<T: RepScalar>(blocks: [[&CMatrix<T>; 2]; 2]) -> CMatrix<T> {
    let d = blocks[0][0].nrows();
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = CMatrix::from_element(2 * d, 2 * d, zero);
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            for r in 0..d {
                for c in 0..d {
                    out[(2 * r + i, 2 * c + j)] = b[(r, c)].clone();
                }
            }
        }
    }
    out
}

fn tensor_inner<T: RepScalar>(irrep: &Irrep<T>) -> CMatrix<T> {
    let id = CMatrix::<T>::identity(2, 2);
    irrep.gram().kronecker(&id)
}

fn scalar_identity<T: RepScalar>(size: usize, s: T) -> CMatrix<T> {
    CMatrix::<T>::identity(size, size) * Complex::new(s, T::zero())
}

fn a_matrix<T: RepScalar>(irrep: &Irrep<T>) -> CMatrix<T> {
    let (t1, t2) = (irrep.t1(), irrep.t2());
    let b11 = t2 * t2;
    let b12 = -(t2 * t1);
    let b21 = -(t1 * t2);
    let b22 = t1 * t1;
    interleave([[&b11, &b12], [&b21, &b22]])
}

/// `A^(n) = [[T2², -T2 T1], [-T1 T2, T1²]]`.
pub fn a_block<T: RepScalar>(n: usize) -> Result<HessianBlock<T>, HopfError> {
    let irrep = build_irrep::<T>(n)?;
    Ok(HessianBlock {
        n,
        kind: BlockKind::ABlock,
        alpha: None,
        matrix: a_matrix(&irrep),
        inner: tensor_inner(&irrep),
    })
}

/// `L_φ = ¼(n² + 2n)·Id + A^(n)` on `V^(n) ⊗ p`.
pub fn hessian_block<T: RepScalar>(n: usize) -> Result<HessianBlock<T>, HopfError> {
    let irrep = build_irrep::<T>(n)?;
    let size = 2 * (n + 1);
    let matrix = scalar_identity(size, casimir_eigenvalue::<T>(n)) + a_matrix(&irrep);
    Ok(HessianBlock {
        n,
        kind: BlockKind::LPhi,
        alpha: None,
        matrix,
        inner: tensor_inner(&irrep),
    })
}

/// Ward operator `D + αL_φ` on `V^(1) ⊗ p`, assembled from the
/// representation matrices:
/// `¾(1+α)·Id + [[αT2², -2T3 - αT2T1], [2T3 - αT1T2, αT1²]]`.
pub fn ward_block<T: RepScalar>(alpha: T) -> Result<HessianBlock<T>, HopfError> {
    let a = alpha.to_f64_lossy();
    if alpha.is_negative() {
        return Err(HopfError::NegativeCoupling(a));
    }
    let irrep = build_irrep::<T>(1)?;
    let (t1, t2, t3) = (irrep.t1(), irrep.t2(), irrep.t3());
    let ca = Complex::new(alpha.clone(), T::zero());
    let two = Complex::new(T::from_int(2), T::zero());
    let b11 = (t2 * t2) * ca.clone();
    let b12 = -(t3 * two.clone()) - (t2 * t1) * ca.clone();
    let b21 = t3 * two - (t1 * t2) * ca.clone();
    let b22 = (t1 * t1) * ca;
    let shift = T::ratio(3, 4) * (T::one() + alpha);
    let matrix = scalar_identity(4, shift) + interleave([[&b11, &b12], [&b21, &b22]]);
    Ok(HessianBlock {
        n: 1,
        kind: BlockKind::Ward,
        alpha: Some(a),
        matrix,
        inner: tensor_inner(&irrep),
    })
}

/// The constant 4×4 form of the Ward operator with entries `-α/4` and
/// `∓i(1+α/4)`, repeated identically in both `e_k` blocks, plus
/// `¾(1+α)·Id`.
pub fn ward_literal<T: RepScalar>(alpha: T) -> CMatrix<T> {
    let q = T::ratio(1, 4);
    let diag = Complex::new(-(alpha.clone() * q.clone()), T::zero());
    let off = T::one() + alpha.clone() * q;
    let upper = Complex::new(T::zero(), -off.clone());
    let lower = Complex::new(T::zero(), off);
    let zero = Complex::new(T::zero(), T::zero());
    let mut m = CMatrix::from_element(4, 4, zero);
    for b in [0, 2] {
        m[(b, b)] = diag.clone();
        m[(b + 1, b + 1)] = diag.clone();
        m[(b, b + 1)] = upper.clone();
        m[(b + 1, b)] = lower.clone();
    }
    let shift = T::ratio(3, 4) * (T::one() + alpha);
    m + scalar_identity(4, shift)
}

/// Comparison of the operator-built and literal Ward matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WardConsistency {
    pub alpha: f64,
    /// Entrywise gap on the `e1 ⊗ p` diagonal block.
    pub e1_block_gap: f64,
    /// Entrywise gap on the `e2 ⊗ p` diagonal block.
    pub e2_block_gap: f64,
    /// Gap between the `e2` block of the operator form and the complex
    /// conjugate of the literal `e2` block.
    pub e2_block_conjugate_gap: f64,
    /// Entrywise gap on the off-diagonal (`e1`/`e2` coupling) blocks.
    pub coupling_gap: f64,
    /// Sorted-eigenvalue gap between the two forms.
    pub spectral_gap: f64,
}

/// Builds the Ward operator both ways and compares them block by block.
///
/// The operator form couples `T3 = diag(i/2, -i/2)`, so its `e2` block is
/// the complex conjugate of its `e1` block; the literal form repeats the
/// `e1` block. Both blocks are Hermitian with the same eigenvalues, so the
/// two forms agree spectrally while the `e2` blocks differ entrywise by
/// `2(1 + α/4)` in the off-diagonal slots.
pub fn ward_consistency(alpha: f64) -> Result<WardConsistency, HopfError> {
    let op = ward_block(alpha)?.matrix;
    let lit = ward_literal(alpha);
    let block = |m: &DMatrix<Complex64>, r: usize, c: usize| m.view((r, c), (2, 2)).into_owned();
    let gap = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| su2::max_abs(&(a - b));
    let spec_op = linalg::hermitian_eigenvalues(&op)?;
    let spec_lit = linalg::hermitian_eigenvalues(&lit)?;
    Ok(WardConsistency {
        alpha,
        e1_block_gap: gap(&block(&op, 0, 0), &block(&lit, 0, 0)),
        e2_block_gap: gap(&block(&op, 2, 2), &block(&lit, 2, 2)),
        e2_block_conjugate_gap: gap(&block(&op, 2, 2), &block(&lit, 2, 2).map(|z| z.conj())),
        coupling_gap: gap(&block(&op, 0, 2), &block(&lit, 0, 2)).max(gap(&block(&op, 2, 0), &block(&lit, 2, 0))),
        spectral_gap: linalg::max_sorted_deviation(&spec_op, &spec_lit),
    })
}

/// Closed-form spectrum of a block, sorted ascending.
pub fn predicted_spectrum(kind: BlockKind, n: usize, alpha: Option<f64>) -> Vec<f64> {
    let nf = n as f64;
    let mut out: Vec<f64> = match kind {
        BlockKind::LPhi => (0..=n)
            .map(|k| 0.25 * (nf - 2.0 * k as f64).powi(2))
            .chain(std::iter::repeat_n(0.25 * (nf * nf + 2.0 * nf), n + 1))
            .collect(),
        BlockKind::ABlock => (0..=n)
            .map(|k| a_block_eigenvalue(n, k))
            .chain(std::iter::repeat_n(0.0, n + 1))
            .collect(),
        BlockKind::Ward => {
            let a = alpha.unwrap_or(0.0);
            vec![
                (a - 1.0) / 4.0,
                (a - 1.0) / 4.0,
                (3.0 * a + 7.0) / 4.0,
                (3.0 * a + 7.0) / 4.0,
            ]
        }
    };
    out.sort_by(f64::total_cmp);
    out
}

/// `λ_k = -½(2kn - 2k² + n)`.
pub fn a_block_eigenvalue(n: usize, k: usize) -> f64 {
    let (n, k) = (n as f64, k as f64);
    -0.5 * (2.0 * k * n - 2.0 * k * k + n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub n: usize,
    pub kind: BlockKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub eigenvalues: Vec<f64>,
    pub predicted: Vec<f64>,
    pub max_abs_deviation: f64,
}

/// One CSV row per eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub n: usize,
    pub kind: &'static str,
    pub alpha: Option<f64>,
    pub index: usize,
    pub computed: f64,
    pub predicted: f64,
}

impl SpectrumReport {
    pub fn rows(&self) -> Vec<SpectrumRow> {
        self.eigenvalues
            .iter()
            .zip(&self.predicted)
            .enumerate()
            .map(|(index, (&computed, &predicted))| SpectrumRow {
                n: self.n,
                kind: self.kind.as_str(),
                alpha: self.alpha,
                index,
                computed,
                predicted,
            })
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }
}

/// Spectrum of a block in its Gram inner product, computed as the Hermitian
/// matrix `S M S⁻¹` with `S = (gram ⊗ Id₂)^{1/2}` (diagonal).
pub fn block_spectrum(block: &HessianBlock<f64>) -> Result<SpectrumReport, HopfError> {
    let s: Vec<f64> = (0..block.size()).map(|i| block.inner[(i, i)].re.sqrt()).collect();
    let sym = DMatrix::from_fn(block.size(), block.size(), |r, c| block.matrix[(r, c)] * (s[r] / s[c]));
    let eigenvalues = linalg::hermitian_eigenvalues(&sym)?;
    let predicted = predicted_spectrum(block.kind, block.n, block.alpha);
    let max_abs_deviation = linalg::max_sorted_deviation(&eigenvalues, &predicted);
    Ok(SpectrumReport {
        n: block.n,
        kind: block.kind,
        alpha: block.alpha,
        eigenvalues,
        predicted,
        max_abs_deviation,
    })
}

/// Smallest eigenvalue of the Ward operator at coupling `alpha`.
pub fn ward_min_eigenvalue(alpha: f64) -> Result<f64, HopfError> {
    Ok(block_spectrum(&ward_block(alpha)?)?.min_eigenvalue())
}

/// Locates the coupling where the Ward operator's smallest eigenvalue
/// crosses zero, by bisection.
pub fn stability_threshold(alpha_lo: f64, alpha_hi: f64, tol: f64) -> Result<f64, HopfError> {
    if !(tol > 0.0) {
        return Err(HopfError::BadTolerance(tol));
    }
    let min_lo = ward_min_eigenvalue(alpha_lo)?;
    let min_hi = ward_min_eigenvalue(alpha_hi)?;
    if !(min_lo < 0.0 && min_hi > 0.0) {
        return Err(HopfError::BracketInvalid {
            lo: alpha_lo,
            hi: alpha_hi,
            min_lo,
            min_hi,
        });
    }
    let (mut lo, mut hi) = (alpha_lo, alpha_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let m = ward_min_eigenvalue(mid)?;
        if m < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenvalue multiplicities of `L_φ` on `span{π_kl} ⊗ p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplicityReport {
    pub n: usize,
    /// `(eigenvalue, multiplicity)` sorted by eigenvalue.
    pub multiplicities: Vec<(f64, usize)>,
    pub total: usize,
    /// `2(n+1)²`.
    pub expected_total: usize,
}

/// Each block eigenvector yields `n + 1` eigenfunctions, one per
/// matrix-element index `l`, so block multiplicities scale by `n + 1`.
pub fn l2_block_multiplicities(n: usize) -> Result<MultiplicityReport, HopfError> {
    let report = block_spectrum(&hessian_block::<f64>(n)?)?;
    let multiplicities: Vec<(f64, usize)> = linalg::cluster(&report.eigenvalues, CLUSTER_TOL)
        .into_iter()
        .map(|(v, m)| (v, m * (n + 1)))
        .collect();
    let total = multiplicities.iter().map(|x| x.1).sum();
    Ok(MultiplicityReport {
        n,
        multiplicities,
        total,
        expected_total: 2 * (n + 1) * (n + 1),
    })
}
