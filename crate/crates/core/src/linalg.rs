//! Eigen-solvers and spectrum comparison utilities.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sprs::CsMat;
use thiserror::Error;

use crate::su2::max_abs;

/// Clustering tolerance for multiplicity counting and set comparison.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("eigen-decomposition residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("matrix is not self-adjoint (asymmetry {asymmetry:e})")]
    NotSelfAdjoint { asymmetry: f64 },
    #[error("subspace iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Sorted eigenvalues of a Hermitian matrix, with a residual check on the
/// returned decomposition.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>, EigenError> {
    let asym = max_abs(&(m - m.adjoint()));
    let scale = 1.0 + max_abs(m);
    if asym > 1e-9 * scale {
        return Err(EigenError::NotSelfAdjoint { asymmetry: asym });
    }
    let h = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(h.clone());
    let vals = DMatrix::from_diagonal(&eig.eigenvalues.map(Complex64::from));
    let residual = max_abs(&(&h * &eig.eigenvectors - &eig.eigenvectors * vals));
    let limit = 1e-10 * scale;
    if !(residual <= limit) {
        return Err(EigenError::Residual { residual, limit });
    }
    let mut out: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Sorted eigenvalues of a real symmetric matrix.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>, EigenError> {
    let asym = (m - m.transpose()).amax();
    let scale = 1.0 + m.amax();
    if asym > 1e-9 * scale {
        return Err(EigenError::NotSelfAdjoint { asymmetry: asym });
    }
    let s = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s.clone());
    let residual = (&s * &eig.eigenvectors - &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues)).amax();
    let limit = 1e-9 * scale;
    if !(residual <= limit) {
        return Err(EigenError::Residual { residual, limit });
    }
    let mut out: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Groups sorted values into `(center, multiplicity)` clusters. Consecutive
/// values closer than `tol` join the same cluster.
pub fn cluster(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((sum, count, last)) if (v - *last).abs() <= tol => {
                *sum += v;
                *count += 1;
                *last = v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(s, c, _)| (s / c as f64, c)).collect()
}

/// Maximum deviation between two equally long lists after sorting both.
/// Returns `f64::INFINITY` on length mismatch.
pub fn max_sorted_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Set comparison of two spectra: both are clustered with `tol`, and the
/// result is the largest distance from any cluster in one list to the
/// nearest cluster of the other.
pub fn set_gap(a: &[f64], b: &[f64], tol: f64) -> f64 {
    let sorted = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        cluster(&v, tol).into_iter().map(|(c, _)| c).collect::<Vec<_>>()
    };
    let ca = sorted(a);
    let cb = sorted(b);
    if ca.is_empty() || cb.is_empty() {
        return if ca.len() == cb.len() { 0.0 } else { f64::INFINITY };
    }
    let one_way = |from: &[f64], to: &[f64]| {
        from.iter()
            .map(|x| {
                let i = to.partition_point(|y| y < x);
                let mut best = f64::INFINITY;
                if i < to.len() {
                    best = best.min((to[i] - x).abs());
                }
                if i > 0 {
                    best = best.min((x - to[i - 1]).abs());
                }
                best
            })
            .fold(0.0, f64::max)
    };
    one_way(&ca, &cb).max(one_way(&cb, &ca))
}

/// Largest distance from a cluster of `sub` to the nearest cluster of
/// `sup`, i.e. how far `sub ⊆ sup` is from holding as sets.
pub fn inclusion_gap(sub: &[f64], sup: &[f64], tol: f64) -> f64 {
    let mut s = sup.to_vec();
    s.sort_by(f64::total_cmp);
    let centers: Vec<f64> = cluster(&s, tol).into_iter().map(|(c, _)| c).collect();
    sub.iter()
        .map(|x| {
            let i = centers.partition_point(|y| y < x);
            let mut best = f64::INFINITY;
            if i < centers.len() {
                best = best.min((centers[i] - x).abs());
            }
            if i > 0 {
                best = best.min((x - centers[i - 1]).abs());
            }
            best
        })
        .fold(0.0, f64::max)
}

/// Gershgorin upper bound on the spectrum of a symmetric sparse matrix.
fn gershgorin_upper(a: &CsMat<f64>) -> f64 {
    a.outer_iterator()
        .enumerate()
        .map(|(i, row)| {
            let mut diag = 0.0;
            let mut off = 0.0;
            for (j, &v) in row.iter() {
                if i == j {
                    diag += v;
                } else {
                    off += v.abs();
                }
            }
            diag + off
        })
        .fold(0.0, f64::max)
}

fn spmm(a: &CsMat<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            for c in 0..x.ncols() {
                out[(i, c)] += v * x[(j, c)];
            }
        }
    }
    out
}

fn orthonormalize(x: &mut DMatrix<f64>) {
    let qr = x.clone().qr();
    *x = qr.q();
}

/// Lowest `count` eigenvalues of a sparse symmetric matrix by
/// Chebyshev-filtered subspace iteration. Degenerate clusters are resolved
/// because a whole block of vectors is iterated.
pub fn lowest_eigenvalues_sparse(a: &CsMat<f64>, count: usize, tol: f64, seed: u64) -> Result<Vec<f64>, EigenError> {
    let n = a.rows();
    let count = count.min(n);
    let block = (count + count / 2 + 8).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(n, block, |_, _| rng.random::<f64>() - 0.5);
    orthonormalize(&mut x);

    let upper = gershgorin_upper(a) * 1.01 + 1e-12;
    let degree = 12;
    let max_sweeps = 400;
    let mut residual = f64::INFINITY;
    let mut lower_cut;

    let rayleigh_ritz = |x: &DMatrix<f64>| {
        let ax = spmm(a, x);
        let h = x.transpose() * &ax;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
            eig.eigenvectors[(r, order[c])]
        });
        (vals, x * &vecs, ax * vecs)
    };

    let (mut vals, mut xr, mut axr) = rayleigh_ritz(&x);
    lower_cut = *vals.last().unwrap_or(&upper);
    for sweep in 0..max_sweeps {
        residual = (0..count)
            .map(|c| {
                let r: DVector<f64> = axr.column(c) - xr.column(c) * vals[c];
                r.norm() / (1.0 + vals[c].abs())
            })
            .fold(0.0, f64::max);
        if residual <= tol {
            return Ok(vals[..count].to_vec());
        }
        // Chebyshev filter damping [lower_cut, upper], amplifying below it.
        let e = (upper - lower_cut) / 2.0;
        let c = (upper + lower_cut) / 2.0;
        if e <= 0.0 {
            break;
        }
        let mut y_prev = xr.clone();
        let mut y = (spmm(a, &xr) - &xr * c) / e;
        for _ in 1..degree {
            let y_next = (spmm(a, &y) - &y * c) * (2.0 / e) - &y_prev;
            y_prev = y;
            y = y_next;
        }
        orthonormalize(&mut y);
        let rr = rayleigh_ritz(&y);
        vals = rr.0;
        xr = rr.1;
        axr = rr.2;
        lower_cut = *vals.last().unwrap_or(&upper);
        if sweep + 1 == max_sweeps {
            break;
        }
    }
    Err(EigenError::NoConvergence {
        iterations: max_sweeps,
        residual,
    })
}
