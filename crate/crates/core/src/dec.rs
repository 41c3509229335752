//! Discrete exterior calculus on structured periodic grids.
//!
//! Forms are stored by their coordinate components at grid vertices. The
//! exterior derivative uses antisymmetric central differences along each
//! axis; because those commute on a periodic grid, `d ∘ d` vanishes
//! identically. The Hodge star is the pointwise algebraic star of the
//! vertex metric.
//!
//! Curved meshes (`SU2Euler`, `SphereProduct`) are charts with a doubled
//! polar range so every axis is periodic. The chart covers the manifold a
//! fixed number of times (`sheets`); integrals divide by it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use sprs::{CsMat, TriMat};
use thiserror::Error;

use crate::linalg::{self, EigenError};

/// Problems up to this many unknowns use a dense eigen-solver.
pub const DENSE_LIMIT: usize = 4000;
/// Largest operator `laplacian_spectrum` will attempt.
pub const FEASIBILITY_CAP: usize = 20000;

const SUM_CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecError {
    #[error("grid size {size} on axis {axis} is below the minimum of 4")]
    GridTooSmall { axis: usize, size: usize },
    #[error("unsupported dimension {0}")]
    BadDimension(usize),
    #[error("period on axis {axis} must be positive, got {period}")]
    BadPeriod { axis: usize, period: f64 },
    #[error("conformal factor must be positive and finite (vertex {vertex}: {value})")]
    BadConformal { vertex: usize, value: f64 },
    #[error(
        "polar axis {axis} of size {size} puts vertices on a coordinate pole (size must be a multiple of {multiple})"
    )]
    PoleOnGrid { axis: usize, size: usize, multiple: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cannot apply d to a {0}-form in dimension {0}")]
    DegreeOverflow(usize),
    #[error("cannot apply the codifferential to a 0-form")]
    DegreeUnderflow,
    #[error("degree {degree} exceeds mesh dimension {dim}")]
    DegreeOutOfRange { degree: usize, dim: usize },
    #[error("cochain does not live on this mesh")]
    MeshMismatch,
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("{0}-forms are required here")]
    WrongDegree(usize),
    #[error("operator with {unknowns} unknowns exceeds the cap of {cap}")]
    TooLarge { unknowns: usize, cap: usize },
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Central difference stencils. Both are antisymmetric, so summation by
/// parts holds exactly on periodic grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Stencil {
    Central2,
    #[default]
    Central4,
}

impl Stencil {
    /// Weights `w_k` in `D f(x) = Σ_k w_k (f(x + kh) - f(x - kh)) / h`.
    pub fn weights(&self) -> &'static [f64] {
        match self {
            Stencil::Central2 => &[0.5],
            Stencil::Central4 => &[2.0 / 3.0, -1.0 / 12.0],
        }
    }

    /// `D e^{ijθ} = i·symbol(θ)/h · e^{ijθ}`.
    pub fn symbol(&self, theta: f64) -> f64 {
        self.weights()
            .iter()
            .enumerate()
            .map(|(k, w)| 2.0 * w * ((k + 1) as f64 * theta).sin())
            .sum()
    }

    pub fn order(&self) -> u32 {
        match self {
            Stencil::Central2 => 2,
            Stencil::Central4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MeshKind {
    FlatTorus,
    /// `SU(2)` via `g = e^{aϑ3} e^{bϑ2} e^{cϑ3}`, coordinates `(a, b, c)`.
    SU2Euler,
    /// `S² × S²` with coordinates `(φ1, θ1, φ2, θ2)`.
    SphereProduct,
}

/// Metric data at one vertex, derived from a coframe `E` with
/// `θ^i = Σ_μ E[i][μ] dx^μ`. Unused dimensions are padded with the identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub coframe: Matrix4<f64>,
    pub metric: Matrix4<f64>,
    pub inverse_metric: Matrix4<f64>,
    /// `det E`, signed relative to the chart orientation.
    pub density: f64,
}

impl PointGeometry {
    fn from_coframe(e: Matrix4<f64>) -> Self {
        let inv = e
            .try_inverse()
            .expect("coframe is invertible away from the offset poles");
        PointGeometry {
            coframe: e,
            metric: e.transpose() * e,
            inverse_metric: inv * inv.transpose(),
            density: e.determinant(),
        }
    }

    /// Frame vectors `e_i = Σ_μ F[μ][i] ∂_μ`, dual to the coframe.
    pub fn frame(&self) -> Matrix4<f64> {
        self.coframe.try_inverse().expect("coframe is invertible")
    }
}

/// A periodic grid with a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: MeshKind,
    dim: usize,
    sizes: [usize; 4],
    strides: [usize; 4],
    spacing: [f64; 4],
    offset: [f64; 4],
    sheets: f64,
    /// Exact cell average of the `|sin|` polar factors over their midpoint values.
    polar: f64,
    stencil: Stencil,
    conformal: Option<Vec<f64>>,
}

impl Mesh {
    fn build(
        kind: MeshKind,
        sizes: &[usize],
        spacing: &[f64],
        offset: &[f64],
        sheets: f64,
        polar_axes: &[usize],
    ) -> Result<Self, DecError> {
        let dim = sizes.len();
        if !(2..=4).contains(&dim) {
            return Err(DecError::BadDimension(dim));
        }
        let mut s = [1usize; 4];
        let mut h = [1.0; 4];
        let mut o = [0.0; 4];
        for axis in 0..dim {
            if sizes[axis] < 4 {
                return Err(DecError::GridTooSmall {
                    axis,
                    size: sizes[axis],
                });
            }
            s[axis] = sizes[axis];
            h[axis] = spacing[axis];
            o[axis] = offset[axis];
        }
        let mut strides = [0usize; 4];
        let mut acc = 1;
        for axis in 0..4 {
            strides[axis] = acc;
            acc *= s[axis];
        }
        Ok(Mesh {
            kind,
            dim,
            sizes: s,
            strides,
            spacing: h,
            offset: o,
            sheets,
            polar: polar_axes.iter().map(|&a| (0.5 * h[a]).sin() / (0.5 * h[a])).product(),
            stencil: Stencil::default(),
            conformal: None,
        })
    }

    /// Flat torus `Π [0, period_μ)` with the Euclidean metric.
    pub fn flat_torus(sizes: &[usize], periods: &[f64]) -> Result<Self, DecError> {
        if periods.len() != sizes.len() {
            return Err(DecError::LengthMismatch {
                expected: sizes.len(),
                got: periods.len(),
            });
        }
        for (axis, &period) in periods.iter().enumerate() {
            if !(period > 0.0 && period.is_finite()) {
                return Err(DecError::BadPeriod { axis, period });
            }
        }
        let spacing: Vec<f64> = periods.iter().zip(sizes).map(|(p, &n)| p / n as f64).collect();
        Self::build(MeshKind::FlatTorus, sizes, &spacing, &[0.0; 4], 1.0, &[])
    }

    /// Unit flat torus of the given dimension and uniform resolution.
    pub fn unit_torus(dim: usize, n: usize) -> Result<Self, DecError> {
        Self::flat_torus(&vec![n; dim], &vec![1.0; dim])
    }

    /// Euler-angle chart of `SU(2)` on `[0, 4π)³`. The polar angle `b` is
    /// offset by half a step so no vertex sits on `sin b = 0`; the chart
    /// covers the group eight times.
    pub fn su2_euler(sizes: [usize; 3]) -> Result<Self, DecError> {
        if !sizes[1].is_multiple_of(4) {
            return Err(DecError::PoleOnGrid {
                axis: 1,
                size: sizes[1],
                multiple: 4,
            });
        }
        let h: Vec<f64> = sizes.iter().map(|&n| 4.0 * PI / n as f64).collect();
        Self::build(MeshKind::SU2Euler, &sizes, &h, &[0.0, 0.5 * h[1], 0.0], 8.0, &[1])
    }

    /// Chart of `S² × S²` with axes `(φ1, θ1, φ2, θ2)`, each on `[0, 2π)`.
    /// The polar angles run over a doubled range offset by half a step; the
    /// chart covers the product four times.
    pub fn sphere_product(sizes: [usize; 4]) -> Result<Self, DecError> {
        for axis in [1, 3] {
            if !sizes[axis].is_multiple_of(2) {
                return Err(DecError::PoleOnGrid {
                    axis,
                    size: sizes[axis],
                    multiple: 2,
                });
            }
        }
        let h: Vec<f64> = sizes.iter().map(|&n| 2.0 * PI / n as f64).collect();
        Self::build(
            MeshKind::SphereProduct,
            &sizes,
            &h,
            &[0.0, 0.5 * h[1], 0.0, 0.5 * h[3]],
            4.0,
            &[1, 3],
        )
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    /// Replaces the metric `g` by `λ²g` with one positive `λ` per vertex.
    pub fn with_conformal(mut self, lambda: Vec<f64>) -> Result<Self, DecError> {
        if lambda.len() != self.n_vertices() {
            return Err(DecError::LengthMismatch {
                expected: self.n_vertices(),
                got: lambda.len(),
            });
        }
        if let Some((vertex, &value)) = lambda.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(DecError::BadConformal { vertex, value });
        }
        self.conformal = Some(lambda);
        Ok(self)
    }

    pub fn without_conformal(mut self) -> Self {
        self.conformal = None;
        self
    }

    pub fn kind(&self) -> MeshKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes[..self.dim]
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing[..self.dim]
    }

    pub fn h_max(&self) -> f64 {
        self.spacing().iter().copied().fold(0.0, f64::max)
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn sheets(&self) -> f64 {
        self.sheets
    }

    pub fn conformal(&self) -> Option<&[f64]> {
        self.conformal.as_deref()
    }

    pub fn n_vertices(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Coordinate cell volume `Π h_μ`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Quadrature weight per unit `|det E|`: `Π h · κ / sheets`, where `κ`
    /// replaces each polar `|sin|` factor by its exact cell average. The
    /// polar kinks lie on cell faces, so cell volumes are exact.
    pub fn weight(&self) -> f64 {
        self.cell_volume() * self.polar / self.sheets
    }

    pub fn grid_index(&self, v: usize, axis: usize) -> usize {
        (v / self.strides[axis]) % self.sizes[axis]
    }

    pub fn coords(&self, v: usize) -> [f64; 4] {
        let mut x = [0.0; 4];
        for (axis, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.offset[axis] + self.grid_index(v, axis) as f64 * self.spacing[axis];
        }
        x
    }

    /// Vertex reached by moving `k` steps along `axis`, periodically.
    #[inline]
    pub fn shift(&self, v: usize, axis: usize, k: isize) -> usize {
        let n = self.sizes[axis] as isize;
        let i = self.grid_index(v, axis) as isize;
        let j = (i + k).rem_euclid(n);
        (v as isize + (j - i) * self.strides[axis] as isize) as usize
    }

    /// Coframe at a vertex, before any conformal factor.
    fn base_coframe(&self, x: &[f64; 4]) -> Matrix4<f64> {
        match self.kind {
            MeshKind::FlatTorus => Matrix4::identity(),
            MeshKind::SU2Euler => {
                let (b, c) = (x[1], x[2]);
                let (sb, cb) = b.sin_cos();
                let (sc, cc) = c.sin_cos();
                Matrix4::new(
                    sb * cc,
                    -sc,
                    0.0,
                    0.0, //
                    sb * sc,
                    cc,
                    0.0,
                    0.0, //
                    cb,
                    0.0,
                    1.0,
                    0.0, //
                    0.0,
                    0.0,
                    0.0,
                    1.0,
                )
            }
            MeshKind::SphereProduct => {
                Matrix4::from_diagonal(&nalgebra::Vector4::new(x[1].sin(), 1.0, x[3].sin(), 1.0))
            }
        }
    }

    pub fn geometry(&self, v: usize) -> PointGeometry {
        let mut e = self.base_coframe(&self.coords(v));
        if let Some(lambda) = &self.conformal {
            let l = lambda[v];
            for i in 0..self.dim {
                for j in 0..self.dim {
                    e[(i, j)] *= l;
                }
            }
        }
        PointGeometry::from_coframe(e)
    }

    /// Integration weight of a vertex: `|det E|` times [`Mesh::weight`].
    pub fn vol(&self, v: usize) -> f64 {
        self.geometry(v).density.abs() * self.weight()
    }

    /// Total volume of the underlying manifold.
    pub fn total_volume(&self) -> f64 {
        ordered_sum(self.n_vertices(), |v| self.vol(v))
    }

    /// Stencil derivative along `axis` of component `comp` of an array
    /// with `stride` values per vertex.
    #[inline]
    pub fn partial(&self, values: &[f64], stride: usize, comp: usize, axis: usize, v: usize) -> f64 {
        let mut acc = 0.0;
        for (k, w) in self.stencil.weights().iter().enumerate() {
            let k = k as isize + 1;
            let fwd = self.shift(v, axis, k);
            let bwd = self.shift(v, axis, -k);
            acc += w * (values[fwd * stride + comp] - values[bwd * stride + comp]);
        }
        acc / self.spacing[axis]
    }

    /// Frame derivative `e_i f = Σ_μ F[μ][i] ∂_μ f` of a scalar field.
    pub fn frame_derivative(&self, f: &[f64], i: usize) -> Vec<f64> {
        (0..self.n_vertices())
            .into_par_iter()
            .map(|v| {
                let frame = self.geometry(v).frame();
                (0..self.dim)
                    .map(|mu| frame[(mu, i)] * self.partial(f, 1, 0, mu, v))
                    .sum()
            })
            .collect()
    }

    /// Samples a scalar function of the coordinates.
    pub fn sample(&self, f: impl Fn(&[f64; 4]) -> f64 + Sync) -> Vec<f64> {
        (0..self.n_vertices())
            .into_par_iter()
            .map(|v| f(&self.coords(v)))
            .collect()
    }

    fn check(&self, a: &Cochain) -> Result<(), DecError> {
        if a.dim != self.dim || a.n_vertices != self.n_vertices() {
            return Err(DecError::MeshMismatch);
        }
        Ok(())
    }

    pub fn zero_cochain(&self, degree: usize) -> Result<Cochain, DecError> {
        Cochain::zeros(self.dim, degree, self.n_vertices())
    }

    /// Builds a cochain by evaluating its components at every vertex. The
    /// closure fills one slice of length `C(m, p)` in [`components`] order.
    pub fn cochain_from_fn(
        &self,
        degree: usize,
        f: impl Fn(&[f64; 4], &mut [f64]) + Sync,
    ) -> Result<Cochain, DecError> {
        let mut c = self.zero_cochain(degree)?;
        let nc = c.n_components();
        if nc > 0 {
            c.values
                .par_chunks_mut(nc)
                .enumerate()
                .for_each(|(v, out)| f(&self.coords(v), out));
        }
        Ok(c)
    }

    pub fn exterior_d(&self, a: &Cochain) -> Result<Cochain, DecError> {
        self.check(a)?;
        let (m, p) = (self.dim, a.degree);
        if p >= m {
            return Err(DecError::DegreeOverflow(p));
        }
        let src = components(m, p);
        let dst = components(m, p + 1);
        // For each target multi-index J: (axis, source component, sign).
        let table: Vec<Vec<(usize, usize, f64)>> = dst
            .iter()
            .map(|&j| {
                indices(j)
                    .iter()
                    .enumerate()
                    .map(|(r, &axis)| {
                        let rest = j & !(1 << axis);
                        let c = src.iter().position(|&s| s == rest).expect("subset present");
                        (axis, c, if r % 2 == 0 { 1.0 } else { -1.0 })
                    })
                    .collect()
            })
            .collect();
        let mut out = self.zero_cochain(p + 1)?;
        let (ns, nd) = (src.len(), dst.len());
        out.values.par_chunks_mut(nd).enumerate().for_each(|(v, o)| {
            for (slot, terms) in o.iter_mut().zip(&table) {
                *slot = terms
                    .iter()
                    .map(|&(axis, c, s)| s * self.partial(&a.values, ns, c, axis, v))
                    .sum();
            }
        });
        Ok(out)
    }

    /// Pointwise Hodge star using the signed chart density, so the result
    /// is smooth across the doubled polar ranges.
    pub fn hodge_star(&self, a: &Cochain) -> Result<Cochain, DecError> {
        self.check(a)?;
        let (m, p) = (self.dim, a.degree);
        let src = components(m, p);
        let dst = components(m, m - p);
        let full: u8 = (1 << m) - 1;
        // (★a)_J = ρ·ε(J^c, J)·a^{J^c}
        let plan: Vec<(usize, f64)> = dst
            .iter()
            .map(|&j| {
                let jc = full & !j;
                let c = src.iter().position(|&s| s == jc).expect("complement present");
                (c, permutation_sign(&[indices(jc), indices(j)].concat()))
            })
            .collect();
        let mut out = self.zero_cochain(m - p)?;
        let (ns, nd) = (src.len(), dst.len());
        out.values.par_chunks_mut(nd).enumerate().for_each(|(v, o)| {
            let geo = self.geometry(v);
            let raised = raise(&geo.inverse_metric, &src, &a.values[v * ns..(v + 1) * ns]);
            for (slot, &(c, sign)) in o.iter_mut().zip(&plan) {
                *slot = geo.density * sign * raised[c];
            }
        });
        Ok(out)
    }

    /// `δ = (-1)^{m + mp + 1} ★ d ★` on `p`-forms.
    pub fn codifferential(&self, a: &Cochain) -> Result<Cochain, DecError> {
        self.check(a)?;
        if a.degree == 0 {
            return Err(DecError::DegreeUnderflow);
        }
        let (m, p) = (self.dim, a.degree);
        let mut out = self.hodge_star(&self.exterior_d(&self.hodge_star(a)?)?)?;
        if (m + m * p + 1) % 2 == 1 {
            out.scale(-1.0);
        }
        Ok(out)
    }

    /// Pointwise `⟨a, b⟩_g` at vertex `v`.
    pub fn pointwise_inner(&self, v: usize, a: &Cochain, b: &Cochain) -> f64 {
        let comps = components(self.dim, a.degree);
        let nc = comps.len();
        let geo = self.geometry(v);
        let raised = raise(&geo.inverse_metric, &comps, &a.values[v * nc..(v + 1) * nc]);
        raised
            .iter()
            .zip(&b.values[v * nc..(v + 1) * nc])
            .map(|(x, y)| x * y)
            .sum()
    }

    /// `Σ_v ⟨a, b⟩_g · vol_v`.
    pub fn l2_inner(&self, a: &Cochain, b: &Cochain) -> Result<f64, DecError> {
        self.check(a)?;
        self.check(b)?;
        if a.degree != b.degree {
            return Err(DecError::DegreeMismatch(a.degree, b.degree));
        }
        Ok(ordered_sum(self.n_vertices(), |v| {
            let geo = self.geometry(v);
            let comps = components(self.dim, a.degree);
            let nc = comps.len();
            let raised = raise(&geo.inverse_metric, &comps, &a.values[v * nc..(v + 1) * nc]);
            let ip: f64 = raised
                .iter()
                .zip(&b.values[v * nc..(v + 1) * nc])
                .map(|(x, y)| x * y)
                .sum();
            ip * geo.density.abs()
        }) * self.weight())
    }

    pub fn l2_norm(&self, a: &Cochain) -> Result<f64, DecError> {
        Ok(self.l2_inner(a, a)?.max(0.0).sqrt())
    }

    /// Index-raising of a 1-form: `X^μ = g^{μν} a_ν`.
    pub fn sharp(&self, a: &Cochain) -> Result<VectorField, DecError> {
        self.check(a)?;
        if a.degree != 1 {
            return Err(DecError::WrongDegree(1));
        }
        let m = self.dim;
        let mut out = VectorField::zeros(m, self.n_vertices());
        out.values.par_chunks_mut(m).enumerate().for_each(|(v, o)| {
            let gi = self.geometry(v).inverse_metric;
            for (mu, slot) in o.iter_mut().enumerate() {
                *slot = (0..m).map(|nu| gi[(mu, nu)] * a.values[v * m + nu]).sum();
            }
        });
        Ok(out)
    }

    /// Index-lowering of a vector field: `a_ν = g_{νμ} X^μ`.
    pub fn flat(&self, x: &VectorField) -> Result<Cochain, DecError> {
        if x.dim != self.dim || x.values.len() != self.dim * self.n_vertices() {
            return Err(DecError::MeshMismatch);
        }
        let m = self.dim;
        let mut out = self.zero_cochain(1)?;
        out.values.par_chunks_mut(m).enumerate().for_each(|(v, o)| {
            let g = self.geometry(v).metric;
            for (nu, slot) in o.iter_mut().enumerate() {
                *slot = (0..m).map(|mu| g[(nu, mu)] * x.values[v * m + mu]).sum();
            }
        });
        Ok(out)
    }

    /// `d` on `p`-cochains as a sparse matrix.
    pub fn d_matrix(&self, p: usize) -> Result<CsMat<f64>, DecError> {
        let m = self.dim;
        if p >= m {
            return Err(DecError::DegreeOverflow(p));
        }
        let src = components(m, p);
        let dst = components(m, p + 1);
        let nv = self.n_vertices();
        let mut t = TriMat::new((nv * dst.len(), nv * src.len()));
        for v in 0..nv {
            for (jd, &j) in dst.iter().enumerate() {
                for (r, &axis) in indices(j).iter().enumerate() {
                    let rest = j & !(1 << axis);
                    let c = src.iter().position(|&s| s == rest).expect("subset present");
                    let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                    for (k, w) in self.stencil.weights().iter().enumerate() {
                        let k = k as isize + 1;
                        let coef = sign * w / self.spacing[axis];
                        t.add_triplet(v * dst.len() + jd, self.shift(v, axis, k) * src.len() + c, coef);
                        t.add_triplet(v * dst.len() + jd, self.shift(v, axis, -k) * src.len() + c, -coef);
                    }
                }
            }
        }
        Ok(t.to_csr())
    }

    /// Per-vertex blocks of the `L²` mass matrix on `p`-cochains.
    fn mass_blocks(&self, p: usize) -> Vec<DMatrix<f64>> {
        let comps = components(self.dim, p);
        (0..self.n_vertices())
            .map(|v| {
                let geo = self.geometry(v);
                let w = geo.density.abs() * self.weight();
                DMatrix::from_fn(comps.len(), comps.len(), |i, k| {
                    induced_metric_entry(&geo.inverse_metric, comps[i], comps[k]) * w
                })
            })
            .collect()
    }

    /// Spectra of the form Laplacian and its two halves.
    ///
    /// `Δ_p`, `δd` and `dδ` act on `p`-cochains; `δd` on `(p-1)`-cochains
    /// and `dδ` on `(p+1)`-cochains are reported as well since they carry
    /// the same nonzero eigenvalues as `dδ` and `δd` on `p`-cochains. `δ`
    /// is the `L²` adjoint of `d`. Lists are sorted and truncated to the
    /// lowest `count` values.
    pub fn laplacian_spectrum(&self, p: usize, count: usize, seed: u64) -> Result<LaplacianSpectra, DecError> {
        let m = self.dim;
        if p > m {
            return Err(DecError::DegreeOutOfRange { degree: p, dim: m });
        }
        let nv = self.n_vertices();
        let size = |q: usize| nv * binomial(m, q);
        let largest = (p.saturating_sub(1)..=(p + 1).min(m)).map(size).max().unwrap_or(0);
        if largest > FEASIBILITY_CAP {
            return Err(DecError::TooLarge {
                unknowns: largest,
                cap: FEASIBILITY_CAP,
            });
        }
        let half: Vec<(CsMat<f64>, CsMat<f64>)> = (0..=m)
            .map(|q| {
                let blocks = self.mass_blocks(q);
                (
                    block_diag(&blocks, |b| matrix_power(b, 0.5)),
                    block_diag(&blocks, |b| matrix_power(b, -0.5)),
                )
            })
            .collect();
        let mass: Vec<CsMat<f64>> = (0..=m)
            .map(|q| block_diag(&self.mass_blocks(q), |b| b.clone()))
            .collect();
        let mass_inv: Vec<CsMat<f64>> = (0..=m)
            .map(|q| block_diag(&self.mass_blocks(q), |b| matrix_power(b, -1.0)))
            .collect();
        let d: Vec<CsMat<f64>> = (0..m).map(|q| self.d_matrix(q)).collect::<Result<_, _>>()?;

        // M^{-1/2} dᵀ M d M^{-1/2} on q-cochains.
        let delta_d_op = |q: usize| -> Option<CsMat<f64>> {
            (q < m).then(|| {
                let k = &(&d[q].transpose_view().to_csr() * &mass[q + 1]) * &d[q];
                &(&half[q].1 * &k) * &half[q].1
            })
        };
        // M^{1/2} d M^{-1} dᵀ M^{1/2} on q-cochains.
        let d_delta_op = |q: usize| -> Option<CsMat<f64>> {
            (q > 0).then(|| {
                let k = &(&d[q - 1] * &mass_inv[q - 1]) * &d[q - 1].transpose_view().to_csr();
                &(&half[q].0 * &k) * &half[q].0
            })
        };
        let zero = CsMat::zero((size(p), size(p)));
        let dd = delta_d_op(p);
        let ddl = d_delta_op(p);
        let lap = dd.as_ref().unwrap_or(&zero) + ddl.as_ref().unwrap_or(&zero);
        let spec = |a: &CsMat<f64>| spectrum_of(a, count, seed);
        Ok(LaplacianSpectra {
            degree: p,
            unknowns: size(p),
            laplacian: spec(&lap)?,
            delta_d: spec(dd.as_ref().unwrap_or(&zero))?,
            d_delta: spec(ddl.as_ref().unwrap_or(&zero))?,
            delta_d_lower: if p > 0 {
                delta_d_op(p - 1).map(|a| spec(&a)).transpose()?
            } else {
                None
            },
            d_delta_upper: if p < m {
                d_delta_op(p + 1).map(|a| spec(&a)).transpose()?
            } else {
                None
            },
        })
    }

    /// Eigenvalues of the scalar Laplacian `δd` on a flat torus, from the
    /// Fourier symbol of the stencil.
    pub fn flat_scalar_symbols(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n_vertices())
            .map(|v| {
                (0..self.dim)
                    .map(|axis| {
                        let n = self.sizes[axis] as f64;
                        let theta = 2.0 * PI * self.grid_index(v, axis) as f64 / n;
                        (self.stencil.symbol(theta) / self.spacing[axis]).powi(2)
                    })
                    .sum::<f64>()
            })
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }
}

fn spectrum_of(a: &CsMat<f64>, count: usize, seed: u64) -> Result<Vec<f64>, DecError> {
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut vals = if n <= DENSE_LIMIT || count >= n {
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j).copied().unwrap_or(0.0));
        linalg::symmetric_eigenvalues(&dense)?
    } else {
        linalg::lowest_eigenvalues_sparse(a, count, 1e-10, seed)?
    };
    vals.truncate(count.min(n));
    Ok(vals)
}

fn block_diag(blocks: &[DMatrix<f64>], f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> CsMat<f64> {
    let b = blocks.first().map_or(0, |x| x.nrows());
    let n = blocks.len() * b;
    let mut t = TriMat::new((n, n));
    for (v, blk) in blocks.iter().enumerate() {
        let m = f(blk);
        for i in 0..b {
            for j in 0..b {
                if m[(i, j)] != 0.0 {
                    t.add_triplet(v * b + i, v * b + j, m[(i, j)]);
                }
            }
        }
    }
    t.to_csr()
}

/// `B^s` for a symmetric positive-definite block.
fn matrix_power(b: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    if b.nrows() == 1 {
        return DMatrix::from_element(1, 1, b[(0, 0)].powf(s));
    }
    let eig = SymmetricEigen::new(b.clone());
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.powf(s)));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianSpectra {
    pub degree: usize,
    pub unknowns: usize,
    pub laplacian: Vec<f64>,
    pub delta_d: Vec<f64>,
    pub d_delta: Vec<f64>,
    /// `δd` on `(p-1)`-cochains.
    pub delta_d_lower: Option<Vec<f64>>,
    /// `dδ` on `(p+1)`-cochains.
    pub d_delta_upper: Option<Vec<f64>>,
}

/// Differential form components at every vertex, indexed by increasing
/// multi-indices (see [`components`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cochain {
    dim: usize,
    degree: usize,
    n_vertices: usize,
    values: Vec<f64>,
}

impl Cochain {
    pub fn zeros(dim: usize, degree: usize, n_vertices: usize) -> Result<Self, DecError> {
        if degree > dim {
            return Err(DecError::DegreeOutOfRange { degree, dim });
        }
        Ok(Cochain {
            dim,
            degree,
            n_vertices,
            values: vec![0.0; n_vertices * binomial(dim, degree)],
        })
    }

    pub fn from_values(dim: usize, degree: usize, n_vertices: usize, values: Vec<f64>) -> Result<Self, DecError> {
        let mut c = Self::zeros(dim, degree, 0)?;
        let expected = n_vertices * binomial(dim, degree);
        if values.len() != expected {
            return Err(DecError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        c.n_vertices = n_vertices;
        c.values = values;
        Ok(c)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        binomial(self.dim, self.degree)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, v: usize) -> &[f64] {
        let nc = self.n_components();
        &self.values[v * nc..(v + 1) * nc]
    }

    /// Component with the given increasing index list at vertex `v`.
    pub fn component(&self, v: usize, idx: &[usize]) -> f64 {
        let mask = idx.iter().fold(0u8, |acc, &i| acc | (1 << i));
        let c = components(self.dim, self.degree)
            .iter()
            .position(|&s| s == mask)
            .expect("index list matches the degree");
        self.at(v)[c]
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|x| *x *= s);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn same_shape(&self, other: &Cochain) -> Result<(), DecError> {
        if self.dim != other.dim || self.n_vertices != other.n_vertices {
            return Err(DecError::MeshMismatch);
        }
        if self.degree != other.degree {
            return Err(DecError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    pub fn add(&self, other: &Cochain) -> Result<Cochain, DecError> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Cochain) -> Result<Cochain, DecError> {
        self.combine(other, -1.0)
    }

    /// `self + s·other`.
    pub fn combine(&self, other: &Cochain, s: f64) -> Result<Cochain, DecError> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(x, y)| *x += s * y);
        Ok(out)
    }
}

/// Vector field in coordinate components, `dim` values per vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorField {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(dim: usize, n_vertices: usize) -> Self {
        VectorField {
            dim,
            values: vec![0.0; dim * n_vertices],
        }
    }

    pub fn at(&self, v: usize) -> &[f64] {
        &self.values[v * self.dim..(v + 1) * self.dim]
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Increasing `p`-subsets of `{0..m}` as bit masks, in lexicographic order.
pub fn components(m: usize, p: usize) -> Vec<u8> {
    let mut out: Vec<u8> = (0u8..(1 << m)).filter(|s| s.count_ones() as usize == p).collect();
    out.sort_by_key(|&s| indices(s));
    out
}

pub fn indices(mask: u8) -> Vec<usize> {
    (0..8).filter(|i| mask & (1 << i) != 0).collect()
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `det(g^{-1}[I, K])`, the metric induced on `p`-forms.
fn induced_metric_entry(gi: &Matrix4<f64>, i: u8, k: u8) -> f64 {
    let ri = indices(i);
    let rk = indices(k);
    let p = ri.len();
    match p {
        0 => 1.0,
        1 => gi[(ri[0], rk[0])],
        2 => gi[(ri[0], rk[0])] * gi[(ri[1], rk[1])] - gi[(ri[0], rk[1])] * gi[(ri[1], rk[0])],
        _ => DMatrix::from_fn(p, p, |a, b| gi[(ri[a], rk[b])]).determinant(),
    }
}

fn raise(gi: &Matrix4<f64>, comps: &[u8], a: &[f64]) -> Vec<f64> {
    comps
        .iter()
        .map(|&i| {
            comps
                .iter()
                .zip(a)
                .map(|(&k, ak)| induced_metric_entry(gi, i, k) * ak)
                .sum()
        })
        .collect()
}

/// Sum of `f(0..n)` in fixed-size chunks, combined in index order so the
/// result does not depend on the thread count.
pub fn ordered_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = n.div_ceil(SUM_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| (c * SUM_CHUNK..((c + 1) * SUM_CHUNK).min(n)).map(&f).sum())
        .collect();
    partial.iter().sum()
}
