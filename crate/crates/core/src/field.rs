//! Grid-sampled maps into Kähler targets and the energy `E(φ) = ½‖φ*ω‖²`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dec::{ordered_sum, Cochain, DecError, Mesh, MeshKind, VectorField};
use crate::hopf::a_block_eigenvalue;
use crate::su2::{self, build_irrep, euler_zyz, Su2Error};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Dec(#[from] DecError),
    #[error(transparent)]
    Rep(#[from] Su2Error),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sphere value at vertex {vertex} has norm {norm}")]
    NotUnit { vertex: usize, norm: f64 },
    #[error("variation is not tangent at vertex {vertex} (normal part {normal:e})")]
    NotTangent { vertex: usize, normal: f64 },
    #[error("step {0} outside [1e-7, 1e-2]")]
    BadEpsilon(f64),
    #[error("map is not critical: residual {residual:e} above threshold {threshold:e}")]
    NotCritical { residual: f64, threshold: f64 },
    #[error("operation needs a {expected}-dimensional domain, mesh has dimension {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("operation needs a {0:?} mesh")]
    WrongMesh(MeshKind),
    #[error("gradient flow stalled: step size fell below 1e-12 at step {step}")]
    Stall { step: usize },
    #[error("flow parameters invalid: steps {steps}, dt {dt}")]
    BadFlowParameters { steps: usize, dt: f64 },
    #[error("linear map moves {step} per stencil reach on axis {axis}; the grid must keep this below 1/2")]
    Unresolved { axis: usize, step: f64 },
    #[error("index out of range: k = {k}, l = {l}, n = {n}")]
    BadIndex { n: usize, k: usize, l: usize },
}

/// Target manifolds. Spheres are unit spheres in `R³` with `J_p u = p × u`;
/// tori have unit periods and `ω = dx₁∧dx₂ (+ dx₃∧dx₄)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Target {
    SphereS2,
    FlatTorus2,
    FlatTorus4,
    ProductS2S2,
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest number of ambient coordinates of any target.
pub const MAX_STRIDE: usize = 6;

impl Target {
    /// Ambient coordinates per point.
    pub fn stride(&self) -> usize {
        match self {
            Target::SphereS2 => 3,
            Target::FlatTorus2 => 2,
            Target::FlatTorus4 => 4,
            Target::ProductS2S2 => 6,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Target::FlatTorus2 | Target::FlatTorus4)
    }

    /// `ω_p(u, v)`.
    pub fn kahler(&self, p: &[f64], u: &[f64], v: &[f64]) -> f64 {
        match self {
            Target::SphereS2 => dot(p, &cross(u, v)),
            Target::FlatTorus2 => u[0] * v[1] - u[1] * v[0],
            Target::FlatTorus4 => u[0] * v[1] - u[1] * v[0] + u[2] * v[3] - u[3] * v[2],
            Target::ProductS2S2 => dot(&p[..3], &cross(&u[..3], &v[..3])) + dot(&p[3..], &cross(&u[3..], &v[3..])),
        }
    }

    /// `J_p u`.
    pub fn complex_structure(&self, p: &[f64], u: &[f64], out: &mut [f64]) {
        match self {
            Target::SphereS2 => out[..3].copy_from_slice(&cross(p, u)),
            Target::FlatTorus2 | Target::FlatTorus4 => {
                for pair in 0..self.stride() / 2 {
                    out[2 * pair] = -u[2 * pair + 1];
                    out[2 * pair + 1] = u[2 * pair];
                }
            }
            Target::ProductS2S2 => {
                out[..3].copy_from_slice(&cross(&p[..3], &u[..3]));
                out[3..6].copy_from_slice(&cross(&p[3..], &u[3..]));
            }
        }
    }

    /// Orthogonal projection onto `T_p N`.
    pub fn project(&self, p: &[f64], u: &mut [f64]) {
        match self {
            Target::SphereS2 => sphere_project(p, u),
            Target::ProductS2S2 => {
                sphere_project(&p[..3], &mut u[..3]);
                sphere_project(&p[3..], &mut u[3..]);
            }
            _ => {}
        }
    }

    /// Exponential map `exp_p(u)`, written into `p`.
    pub fn exp(&self, p: &mut [f64], u: &[f64]) {
        match self {
            Target::SphereS2 => sphere_exp(p, u),
            Target::ProductS2S2 => {
                sphere_exp(&mut p[..3], &u[..3]);
                sphere_exp(&mut p[3..], &u[3..]);
            }
            _ => {
                for (x, du) in p.iter_mut().zip(u) {
                    *x = (*x + du).rem_euclid(1.0);
                }
            }
        }
    }

    /// Normal component of `u` at `p` (zero for tori).
    fn normal_part(&self, p: &[f64], u: &[f64]) -> f64 {
        match self {
            Target::SphereS2 => dot(p, u).abs(),
            Target::ProductS2S2 => dot(&p[..3], &u[..3]).abs().max(dot(&p[3..], &u[3..]).abs()),
            _ => 0.0,
        }
    }
}

fn sphere_project(p: &[f64], u: &mut [f64]) {
    let c = dot(p, u);
    u.iter_mut().zip(p).for_each(|(x, pi)| *x -= c * pi);
}

fn sphere_exp(p: &mut [f64], u: &[f64]) {
    let t = dot(u, u).sqrt();
    if t == 0.0 {
        return;
    }
    let (s, c) = t.sin_cos();
    for i in 0..3 {
        p[i] = c * p[i] + s * u[i] / t;
    }
    let n = dot(p, p).sqrt();
    p.iter_mut().for_each(|x| *x /= n);
}

/// Tangent vectors along a map, `stride` ambient components per vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationField {
    pub stride: usize,
    pub values: Vec<f64>,
}

impl VariationField {
    pub fn zeros(stride: usize, n_vertices: usize) -> Self {
        VariationField {
            stride,
            values: vec![0.0; stride * n_vertices],
        }
    }

    pub fn at(&self, v: usize) -> &[f64] {
        &self.values[v * self.stride..(v + 1) * self.stride]
    }

    pub fn scaled(&self, s: f64) -> Self {
        VariationField {
            stride: self.stride,
            values: self.values.iter().map(|x| x * s).collect(),
        }
    }
}

/// A map `φ: M → N` sampled at the vertices of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMap {
    mesh: Arc<Mesh>,
    target: Target,
    values: Vec<f64>,
}

/// Tolerance for unit-norm and tangency checks.
const UNIT_TOL: f64 = 1e-12;

impl DiscreteMap {
    /// Wraps sampled values, validating sphere norms and reducing torus
    /// angles to `[0, 1)`.
    pub fn new(mesh: Arc<Mesh>, target: Target, mut values: Vec<f64>) -> Result<Self, FieldError> {
        let s = target.stride();
        let expected = s * mesh.n_vertices();
        if values.len() != expected {
            return Err(FieldError::LengthMismatch {
                expected,
                got: values.len(),
            });
        }
        match target {
            Target::SphereS2 | Target::ProductS2S2 => {
                for (vertex, chunk) in values.chunks(3).enumerate() {
                    let norm = dot(chunk, chunk).sqrt();
                    if (norm - 1.0).abs() > UNIT_TOL {
                        return Err(FieldError::NotUnit {
                            vertex: vertex * 3 / s,
                            norm,
                        });
                    }
                }
            }
            _ => values.iter_mut().for_each(|x| *x = x.rem_euclid(1.0)),
        }
        Ok(DiscreteMap { mesh, target, values })
    }

    /// Samples `f` at every vertex; sphere values are normalized.
    pub fn from_fn(
        mesh: Arc<Mesh>,
        target: Target,
        f: impl Fn(&[f64; 4], &mut [f64]) + Sync,
    ) -> Result<Self, FieldError> {
        let s = target.stride();
        let mut values = vec![0.0; s * mesh.n_vertices()];
        values.par_chunks_mut(s).enumerate().for_each(|(v, out)| {
            f(&mesh.coords(v), out);
            if !target.is_torus() {
                for sphere in out.chunks_mut(3) {
                    let n = dot(sphere, sphere).sqrt();
                    sphere.iter_mut().for_each(|x| *x /= n);
                }
            }
        });
        Self::new(mesh, target, values)
    }

    /// Identity of a unit flat torus of dimension 2 or 4.
    pub fn torus_identity(mesh: Arc<Mesh>) -> Result<Self, FieldError> {
        let m = mesh.dim();
        let rows: Vec<Vec<i64>> = (0..m).map(|i| (0..m).map(|j| i64::from(i == j)).collect()).collect();
        Self::torus_linear(mesh, &rows)
    }

    /// Linear map `x ↦ Lx` between unit tori; `L` has 2 or 4 integer rows
    /// and one column per domain dimension.
    pub fn torus_linear(mesh: Arc<Mesh>, rows: &[Vec<i64>]) -> Result<Self, FieldError> {
        let target = match rows.len() {
            2 => Target::FlatTorus2,
            4 => Target::FlatTorus4,
            n => return Err(FieldError::WrongDimension { expected: 2, got: n }),
        };
        Self::require_flat(&mesh)?;
        let m = mesh.dim();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(FieldError::LengthMismatch {
                expected: m,
                got: r.len(),
            });
        }
        let reach = mesh.stencil().weights().len() as f64;
        for (axis, h) in mesh.spacing().iter().enumerate() {
            let step = rows.iter().map(|r| r[axis].abs() as f64).fold(0.0, f64::max) * reach * h;
            if step >= 0.5 {
                return Err(FieldError::Unresolved { axis, step });
            }
        }
        let rows = rows.to_vec();
        Self::from_fn(mesh, target, move |x, out| {
            for (o, r) in out.iter_mut().zip(&rows) {
                *o = r.iter().zip(x).map(|(&l, xi)| l as f64 * xi).sum();
            }
        })
    }

    fn require_flat(mesh: &Mesh) -> Result<(), FieldError> {
        if mesh.kind() != MeshKind::FlatTorus {
            return Err(FieldError::WrongMesh(MeshKind::FlatTorus));
        }
        Ok(())
    }

    /// Hopf map `g ↦ Ad(g)ϑ3` on an Euler-angle mesh.
    pub fn hopf(mesh: Arc<Mesh>) -> Result<Self, FieldError> {
        if mesh.kind() != MeshKind::SU2Euler {
            return Err(FieldError::WrongMesh(MeshKind::SU2Euler));
        }
        Self::from_fn(mesh, Target::SphereS2, |x, out| {
            let (sa, ca) = x[0].sin_cos();
            let (sb, cb) = x[1].sin_cos();
            out.copy_from_slice(&[-sb * ca, sb * sa, cb]);
        })
    }

    /// Projection of `S² × S²` onto its first factor.
    pub fn sphere_projection(mesh: Arc<Mesh>) -> Result<Self, FieldError> {
        if mesh.kind() != MeshKind::SphereProduct {
            return Err(FieldError::WrongMesh(MeshKind::SphereProduct));
        }
        Self::from_fn(mesh, Target::SphereS2, |x, out| {
            let (sp, cp) = x[0].sin_cos();
            let (st, ct) = x[1].sin_cos();
            out.copy_from_slice(&[st * cp, st * sp, ct]);
        })
    }

    /// A random smooth map from a flat unit torus built from low Fourier
    /// modes. Torus targets get a random integer linear part with entries
    /// in `[-1, 1]`, so grids of size 8 or more resolve it.
    pub fn random_smooth(mesh: Arc<Mesh>, target: Target, seed: u64) -> Result<Self, FieldError> {
        Self::require_flat(&mesh)?;
        let m = mesh.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = target.stride();
        let modes = 3;
        // (component, wave vector, cos amplitude, sin amplitude)
        let mut terms: Vec<(usize, Vec<f64>, f64, f64)> = Vec::new();
        for comp in 0..s {
            for _ in 0..modes {
                let k = axis_wave_vector(&mut rng, m);
                let amp = if target.is_torus() { 0.04 } else { 0.25 };
                terms.push((
                    comp,
                    k,
                    amp * (rng.random::<f64>() - 0.5),
                    amp * (rng.random::<f64>() - 0.5),
                ));
            }
        }
        let linear: Vec<Vec<f64>> = (0..s)
            .map(|_| (0..m).map(|_| rng.random_range(-1i32..=1) as f64).collect())
            .collect();
        let base: Vec<f64> = (0..s).map(|_| rng.random::<f64>() - 0.5).collect();
        let torus = target.is_torus();
        let eval = move |x: &[f64; 4], out: &mut [f64]| {
            for (c, o) in out.iter_mut().enumerate() {
                *o = if torus {
                    linear[c].iter().zip(x).map(|(l, xi)| l * xi).sum()
                } else {
                    base[c]
                };
            }
            for (c, k, a, b) in &terms {
                let phase = 2.0 * PI * k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>();
                out[*c] += a * phase.cos() + b * phase.sin();
            }
        };
        // Keep sphere fields away from the origin before normalizing.
        if !torus {
            let shift: Vec<f64> = (0..s).map(|_| rng.random::<f64>() - 0.5).collect();
            let eval = move |x: &[f64; 4], out: &mut [f64]| {
                eval(x, out);
                for (chunk, sh) in out.chunks_mut(3).zip(shift.chunks(3)) {
                    let n = dot(sh, sh).sqrt().max(1e-3);
                    chunk.iter_mut().zip(sh).for_each(|(o, d)| *o += 1.5 * d / n);
                }
            };
            return Self::from_fn(mesh, target, eval);
        }
        Self::from_fn(mesh, target, eval)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, v: usize) -> &[f64] {
        let s = self.target.stride();
        &self.values[v * s..(v + 1) * s]
    }

    /// Same map on a different mesh with the same grid (e.g. a conformally
    /// rescaled metric).
    pub fn on_mesh(&self, mesh: Arc<Mesh>) -> Result<Self, FieldError> {
        if mesh.n_vertices() != self.mesh.n_vertices() || mesh.dim() != self.mesh.dim() {
            return Err(DecError::MeshMismatch.into());
        }
        Ok(DiscreteMap {
            mesh,
            target: self.target,
            values: self.values.clone(),
        })
    }

    /// Stencil derivative `D_μφ` at a vertex; torus values are unwrapped to
    /// the nearest lift of each neighbor.
    pub fn derivative(&self, v: usize, axis: usize) -> [f64; MAX_STRIDE] {
        let s = self.target.stride();
        let mesh = &self.mesh;
        let mut out = [0.0; MAX_STRIDE];
        let center = self.at(v);
        for (k, w) in mesh.stencil().weights().iter().enumerate() {
            let k = k as isize + 1;
            let fwd = self.at(mesh.shift(v, axis, k));
            let bwd = self.at(mesh.shift(v, axis, -k));
            for c in 0..s {
                let (mut df, mut db) = (fwd[c] - center[c], bwd[c] - center[c]);
                if self.target.is_torus() {
                    df -= df.round();
                    db -= db.round();
                }
                out[c] += w * (df - db);
            }
        }
        let h = mesh.spacing()[axis];
        out.iter_mut().for_each(|x| *x /= h);
        out
    }

    /// `φ*ω` with components `ω(D_μφ, D_νφ)`.
    pub fn pullback(&self) -> Result<Cochain, FieldError> {
        let m = self.mesh.dim();
        let pairs = pairs(m);
        let mut out = self.mesh.zero_cochain(2)?;
        let nc = pairs.len();
        out.values_mut().par_chunks_mut(nc).enumerate().for_each(|(v, o)| {
            let d: Vec<[f64; MAX_STRIDE]> = (0..m).map(|axis| self.derivative(v, axis)).collect();
            let p = self.at(v);
            for (slot, &(mu, nu)) in o.iter_mut().zip(&pairs) {
                *slot = self.target.kahler(p, &d[mu], &d[nu]);
            }
        });
        Ok(out)
    }

    pub fn energy(&self) -> Result<f64, FieldError> {
        let p = self.pullback()?;
        Ok(0.5 * self.mesh.l2_inner(&p, &p)?)
    }

    /// Moves every point along the geodesic in direction `t·X`.
    pub fn perturbed(&self, x: &VariationField, t: f64) -> Result<Self, FieldError> {
        self.check_variation(x)?;
        let s = self.target.stride();
        let mut values = self.values.clone();
        values.par_chunks_mut(s).zip(x.values.par_chunks(s)).for_each(|(p, u)| {
            let u: Vec<f64> = u.iter().map(|c| c * t).collect();
            self.target.exp(p, &u);
        });
        Ok(DiscreteMap {
            mesh: self.mesh.clone(),
            target: self.target,
            values,
        })
    }

    pub fn check_variation(&self, x: &VariationField) -> Result<(), FieldError> {
        let s = self.target.stride();
        let expected = s * self.mesh.n_vertices();
        if x.stride != s || x.values.len() != expected {
            return Err(FieldError::LengthMismatch {
                expected,
                got: x.values.len(),
            });
        }
        for v in 0..self.mesh.n_vertices() {
            let u = x.at(v);
            let normal = self.target.normal_part(self.at(v), u);
            if normal > 1e-10 * (1.0 + dot(u, u).sqrt()) {
                return Err(FieldError::NotTangent { vertex: v, normal });
            }
        }
        Ok(())
    }

    /// Random smooth tangent field built from low Fourier modes, projected
    /// onto the tangent spaces.
    pub fn random_variation(&self, seed: u64) -> VariationField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = self.target.stride();
        let m = self.mesh.dim();
        let terms: Vec<(usize, Vec<f64>, f64, f64)> = (0..s * 2)
            .map(|i| {
                let k: Vec<f64> = (0..m).map(|_| rng.random_range(-1i32..=1) as f64).collect();
                (i % s, k, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            })
            .collect();
        let mut out = VariationField::zeros(s, self.mesh.n_vertices());
        let periods: Vec<f64> = self
            .mesh
            .sizes()
            .iter()
            .zip(self.mesh.spacing())
            .map(|(&n, h)| n as f64 * h)
            .collect();
        out.values.par_chunks_mut(s).enumerate().for_each(|(v, o)| {
            let x = self.mesh.coords(v);
            for (c, k, a, b) in &terms {
                let phase: f64 = 2.0
                    * PI
                    * k.iter()
                        .zip(&x)
                        .zip(&periods)
                        .map(|((ki, xi), p)| ki * xi / p)
                        .sum::<f64>();
                o[*c] += a * phase.cos() + b * phase.sin();
            }
            self.target.project(self.at(v), o);
        });
        out
    }

    /// Random variation with a component along the energy gradient,
    /// `G + ½·(‖G‖/‖R‖)·R` for a random tangent field `R`. Its first
    /// variation is bounded away from zero whenever the map is not critical.
    pub fn test_variation(&self, seed: u64) -> Result<VariationField, FieldError> {
        let g = self.el_residual()?.gradient;
        let r = self.random_variation(seed);
        let norm = |f: &VariationField| {
            ordered_sum(self.mesh.n_vertices(), |v| dot(f.at(v), f.at(v)) * self.mesh.vol(v)).sqrt()
        };
        let (ng, nr) = (norm(&g), norm(&r));
        let s = if nr > 0.0 { 0.5 * ng / nr } else { 0.0 };
        let mut out = g;
        out.values.iter_mut().zip(&r.values).for_each(|(a, b)| *a += s * b);
        Ok(out)
    }

    /// `Z_φ = ♯δφ*ω` and the pushed-forward field `dφ(Z_φ)`.
    pub fn el_residual(&self) -> Result<Residual, FieldError> {
        let p = self.pullback()?;
        let z = self.mesh.sharp(&self.mesh.codifferential(&p)?)?;
        let s = self.target.stride();
        let m = self.mesh.dim();
        let mut dphi_z = VariationField::zeros(s, self.mesh.n_vertices());
        dphi_z.values.par_chunks_mut(s).enumerate().for_each(|(v, o)| {
            for axis in 0..m {
                let d = self.derivative(v, axis);
                let zc = z.values[v * m + axis];
                o.iter_mut().zip(&d).for_each(|(x, di)| *x += zc * di);
            }
            self.target.project(self.at(v), o);
        });
        let mut gradient = VariationField::zeros(s, self.mesh.n_vertices());
        gradient.values.par_chunks_mut(s).enumerate().for_each(|(v, o)| {
            self.target.complex_structure(self.at(v), dphi_z.at(v), o);
            o.iter_mut().for_each(|x| *x = -*x);
        });
        let norm = ordered_sum(self.mesh.n_vertices(), |v| {
            let u = dphi_z.at(v);
            dot(u, u) * self.mesh.vol(v)
        })
        .sqrt();
        Ok(Residual {
            z,
            dphi_z,
            gradient,
            norm,
        })
    }

    /// `Σ_v ω(X, dφ(Z_φ))·vol_v`.
    fn first_variation_formula(&self, x: &VariationField, res: &Residual) -> f64 {
        ordered_sum(self.mesh.n_vertices(), |v| {
            self.target.kahler(self.at(v), x.at(v), res.dphi_z.at(v)) * self.mesh.vol(v)
        })
    }

    /// Central finite difference of `E` along `exp(±εX)` against the first
    /// variation formula.
    pub fn first_variation_check(&self, x: &VariationField, eps: f64) -> Result<FirstVariation, FieldError> {
        if !(1e-7..=1e-2).contains(&eps) {
            return Err(FieldError::BadEpsilon(eps));
        }
        self.check_variation(x)?;
        let ep = self.perturbed(x, eps)?.energy()?;
        let em = self.perturbed(x, -eps)?.energy()?;
        let fd = (ep - em) / (2.0 * eps);
        let formula = self.first_variation_formula(x, &self.el_residual()?);
        Ok(FirstVariation {
            fd_derivative: fd,
            formula_value: formula,
            abs_gap: (fd - formula).abs(),
        })
    }

    /// `H(Y, Y) = Σ ω(Y, ∇_Z Y)·vol + ‖d(φ*ι_Y ω)‖²` at a critical map.
    pub fn hessian_quadratic(&self, y: &VariationField, threshold: f64) -> Result<HessianValue, FieldError> {
        self.check_variation(y)?;
        let res = self.el_residual()?;
        if res.norm > threshold {
            return Err(FieldError::NotCritical {
                residual: res.norm,
                threshold,
            });
        }
        let m = self.mesh.dim();
        let s = self.target.stride();
        let mesh = &self.mesh;

        let flow_term = ordered_sum(mesh.n_vertices(), |v| {
            let mut cov = [0.0; MAX_STRIDE];
            for axis in 0..m {
                let zc = res.z.values[v * m + axis];
                for (c, slot) in cov.iter_mut().enumerate().take(s) {
                    *slot += zc * mesh.partial(&y.values, s, c, axis, v);
                }
            }
            self.target.project(self.at(v), &mut cov[..s]);
            self.target.kahler(self.at(v), y.at(v), &cov[..s]) * mesh.vol(v)
        });

        let mut theta = mesh.zero_cochain(1)?;
        theta.values_mut().par_chunks_mut(m).enumerate().for_each(|(v, o)| {
            for (axis, slot) in o.iter_mut().enumerate() {
                *slot = self.target.kahler(self.at(v), y.at(v), &self.derivative(v, axis));
            }
        });
        let dtheta = mesh.exterior_d(&theta)?;
        let norm_term = mesh.l2_inner(&dtheta, &dtheta)?;
        Ok(HessianValue {
            flow_term,
            norm_term,
            total: flow_term + norm_term,
        })
    }

    /// `(E(exp tY) - 2E + E(exp -tY)) / t²`.
    pub fn hessian_fd(&self, y: &VariationField, t: f64) -> Result<f64, FieldError> {
        let e0 = self.energy()?;
        let ep = self.perturbed(y, t)?.energy()?;
        let em = self.perturbed(y, -t)?.energy()?;
        Ok((ep - 2.0 * e0 + em) / (t * t))
    }

    /// Energy under `g` and under `λ²g`.
    pub fn conformal_invariance_check(&self, lambda: Vec<f64>) -> Result<ConformalCheck, FieldError> {
        if self.mesh.dim() != 4 {
            return Err(FieldError::WrongDimension {
                expected: 4,
                got: self.mesh.dim(),
            });
        }
        let scaled_mesh = Arc::new(self.mesh.as_ref().clone().with_conformal(lambda)?);
        let e_g = self.energy()?;
        let e_s = self.on_mesh(scaled_mesh)?.energy()?;
        let gap = (e_g - e_s).abs();
        Ok(ConformalCheck {
            energy_g: e_g,
            energy_scaled: e_s,
            abs_gap: gap,
            rel_gap: if e_g != 0.0 { gap / e_g.abs() } else { gap },
        })
    }

    /// `E ≥ (∫φ*ω)² / (2 Vol)` on a surface.
    pub fn bound_2d(&self) -> Result<BoundReport, FieldError> {
        if self.mesh.dim() != 2 {
            return Err(FieldError::WrongDimension {
                expected: 2,
                got: self.mesh.dim(),
            });
        }
        let p = self.pullback()?;
        let mesh = &self.mesh;
        let integral = ordered_sum(mesh.n_vertices(), |v| p.at(v)[0]) * mesh.weight();
        let energy = 0.5 * mesh.l2_inner(&p, &p)?;
        let bound = integral * integral / (2.0 * mesh.total_volume());
        Ok(BoundReport {
            energy,
            bound,
            gap: energy - bound,
            side: None,
        })
    }

    /// `E ≥ ½|∫φ*ω ∧ φ*ω|` on a 4-manifold.
    pub fn bound_4d(&self) -> Result<BoundReport, FieldError> {
        if self.mesh.dim() != 4 {
            return Err(FieldError::WrongDimension {
                expected: 4,
                got: self.mesh.dim(),
            });
        }
        let p = self.pullback()?;
        let mesh = &self.mesh;
        // (a∧a)_{0123} = 2(a01 a23 - a02 a13 + a03 a12)
        let wedge = ordered_sum(mesh.n_vertices(), |v| {
            let a = p.at(v);
            2.0 * (a[0] * a[5] - a[1] * a[4] + a[2] * a[3])
        }) * mesh.weight();
        let energy = 0.5 * mesh.l2_inner(&p, &p)?;
        let bound = 0.5 * wedge.abs();
        let (plus, minus) = selfdual_split(mesh, &p)?;
        let np = mesh.l2_inner(&plus, &plus)?;
        let nm = mesh.l2_inner(&minus, &minus)?;
        let scale = 1e-10 * (np + nm).max(1e-300);
        let side = if nm <= scale {
            Side::SelfDual
        } else if np <= scale {
            Side::AntiSelfDual
        } else {
            Side::Neither
        };
        Ok(BoundReport {
            energy,
            bound,
            gap: energy - bound,
            side: Some(side),
        })
    }

    /// Descent along `-∇E` with backtracking. Sphere values are renormalized
    /// by the exponential map after every step.
    pub fn gradient_flow(&self, steps: usize, dt: f64, threshold: f64) -> Result<FlowResult, FieldError> {
        if steps == 0 || !(dt > 0.0) {
            return Err(FieldError::BadFlowParameters { steps, dt });
        }
        let mut map = self.clone();
        let mut energy = map.energy()?;
        let mut res = map.el_residual()?;
        let mut dt = dt;
        let mut records = vec![FlowRecord {
            step: 0,
            energy,
            residual_norm: res.norm,
            dt,
        }];
        for step in 1..=steps {
            if res.norm < threshold {
                break;
            }
            loop {
                let trial = map.perturbed(&res.gradient, -dt)?;
                let e = trial.energy()?;
                if e <= energy {
                    map = trial;
                    energy = e;
                    break;
                }
                dt *= 0.5;
                if dt < 1e-12 {
                    return Err(FieldError::Stall { step });
                }
            }
            res = map.el_residual()?;
            records.push(FlowRecord {
                step,
                energy,
                residual_norm: res.norm,
                dt,
            });
        }
        Ok(FlowResult { records, map })
    }
}

/// Unit wave vector along a random axis.
fn axis_wave_vector(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let axis = rng.random_range(0..m);
    (0..m).map(|i| if i == axis { 1.0 } else { 0.0 }).collect()
}

fn pairs(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for mu in 0..m {
        for nu in mu + 1..m {
            out.push((mu, nu));
        }
    }
    out
}

/// Residual threshold `10·h²` with `h` the largest grid spacing.
pub fn criticality_threshold(mesh: &Mesh) -> f64 {
    10.0 * mesh.h_max().powi(2)
}

/// Splits a 2-form on a 4-manifold into `★`-eigenparts.
pub fn selfdual_split(mesh: &Mesh, a: &Cochain) -> Result<(Cochain, Cochain), FieldError> {
    if mesh.dim() != 4 {
        return Err(FieldError::WrongDimension {
            expected: 4,
            got: mesh.dim(),
        });
    }
    if a.degree() != 2 {
        return Err(DecError::WrongDegree(2).into());
    }
    let star = mesh.hodge_star(a)?;
    let mut plus = a.add(&star)?;
    plus.scale(0.5);
    let minus = a.sub(&plus)?;
    Ok((plus, minus))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub z: VectorField,
    pub dphi_z: VariationField,
    /// `L²` gradient of the energy, `-J dφ(Z_φ)`.
    pub gradient: VariationField,
    /// `‖dφ(Z_φ)‖_{L²}`.
    pub norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstVariation {
    pub fd_derivative: f64,
    pub formula_value: f64,
    pub abs_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HessianValue {
    pub flow_term: f64,
    pub norm_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalCheck {
    pub energy_g: f64,
    pub energy_scaled: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    #[serde(rename = "self-dual")]
    SelfDual,
    #[serde(rename = "anti-self-dual")]
    AntiSelfDual,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub energy: f64,
    pub bound: f64,
    pub gap: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub side: Option<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowRecord {
    pub step: usize,
    pub energy: f64,
    pub residual_norm: f64,
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct FlowResult {
    pub records: Vec<FlowRecord>,
    pub map: DiscreteMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeterWeylReport {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub estimate: f64,
    pub predicted: f64,
    pub abs_err: f64,
}

/// Rayleigh quotient of the lattice operator
/// `[[-ϑ1²-ϑ3², -ϑ3-ϑ1ϑ2], [ϑ3-ϑ2ϑ1, -ϑ2²-ϑ3²]]` on the section built from
/// the matrix element `π_kl`.
pub fn peter_weyl_check(mesh: &Mesh, n: usize, k: usize, l: usize) -> Result<PeterWeylReport, FieldError> {
    if mesh.kind() != MeshKind::SU2Euler {
        return Err(FieldError::WrongMesh(MeshKind::SU2Euler));
    }
    if k > n || l > n {
        return Err(FieldError::BadIndex { n, k, l });
    }
    let irrep = build_irrep::<f64>(n)?;
    let pi: Vec<Complex64> = (0..mesh.n_vertices())
        .into_par_iter()
        .map(|v| {
            let x = mesh.coords(v);
            let rho = su2::symmetric_power(n, &euler_zyz(x[0], x[1], x[2]));
            rho[(l, k)] * irrep.gram()[(l, l)]
        })
        .collect();
    let lambda = a_block_eigenvalue(n, k);
    let scale = if lambda != 0.0 { 1.0 / lambda } else { 1.0 };

    let parts = |f: &[Complex64]| -> (Vec<f64>, Vec<f64>) {
        (f.iter().map(|z| z.re).collect(), f.iter().map(|z| z.im).collect())
    };
    let join = |re: Vec<f64>, im: Vec<f64>| -> Vec<Complex64> {
        re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
    };
    let th = |f: &[Complex64], i: usize| -> Vec<Complex64> {
        let (re, im) = parts(f);
        join(mesh.frame_derivative(&re, i), mesh.frame_derivative(&im, i))
    };
    let f1: Vec<Complex64> = th(&pi, 1).into_iter().map(|z| z * scale).collect();
    let f2: Vec<Complex64> = th(&pi, 0).into_iter().map(|z| -z * scale).collect();

    let t11 = th(&th(&f1, 0), 0);
    let t33_1 = th(&th(&f1, 2), 2);
    let t3_2 = th(&f2, 2);
    let t12_2 = th(&th(&f2, 1), 0);
    let t3_1 = th(&f1, 2);
    let t21_1 = th(&th(&f1, 0), 1);
    let t22 = th(&th(&f2, 1), 1);
    let t33_2 = th(&th(&f2, 2), 2);

    let (mut num, mut den) = (0.0, 0.0);
    for v in 0..mesh.n_vertices() {
        let l1 = -t11[v] - t33_1[v] - t3_2[v] - t12_2[v];
        let l2 = t3_1[v] - t21_1[v] - t22[v] - t33_2[v];
        let w = mesh.vol(v);
        num += (f1[v].conj() * l1 + f2[v].conj() * l2).re * w;
        den += (f1[v].norm_sqr() + f2[v].norm_sqr()) * w;
    }
    let estimate = num / den;
    let predicted = 0.25 * (n as f64 - 2.0 * k as f64).powi(2);
    Ok(PeterWeylReport {
        n,
        k,
        l,
        estimate,
        predicted,
        abs_err: (estimate - predicted).abs(),
    })
}

/// Values of `π_kl` at every vertex of an Euler-angle mesh.
fn matrix_element_field(mesh: &Mesh, n: usize, k: usize, l: usize) -> Result<Vec<Complex64>, FieldError> {
    if mesh.kind() != MeshKind::SU2Euler {
        return Err(FieldError::WrongMesh(MeshKind::SU2Euler));
    }
    if k > n || l > n {
        return Err(FieldError::BadIndex { n, k, l });
    }
    let irrep = build_irrep::<f64>(n)?;
    Ok((0..mesh.n_vertices())
        .into_par_iter()
        .map(|v| {
            let x = mesh.coords(v);
            let rho = su2::symmetric_power(n, &euler_zyz(x[0], x[1], x[2]));
            rho[(l, k)] * irrep.gram()[(l, l)]
        })
        .collect())
}

/// Real variation field `Y = dφ(f1 ϑ1 + f2 ϑ2)` along the Hopf map with
/// `f1 = ϑ2 Re π_kl`, `f2 = -ϑ1 Re π_kl`.
pub fn hopf_variation(map: &DiscreteMap, n: usize, k: usize, l: usize) -> Result<VariationField, FieldError> {
    let mesh = map.mesh().clone();
    let pi: Vec<f64> = matrix_element_field(&mesh, n, k, l)?.iter().map(|z| z.re).collect();
    let f1 = mesh.frame_derivative(&pi, 1);
    let f2: Vec<f64> = mesh.frame_derivative(&pi, 0).into_iter().map(|x| -x).collect();
    let mut y = VariationField::zeros(3, mesh.n_vertices());
    y.values.par_chunks_mut(3).enumerate().for_each(|(v, o)| {
        let frame = mesh.geometry(v).frame();
        let d: Vec<[f64; MAX_STRIDE]> = (0..3).map(|axis| map.derivative(v, axis)).collect();
        for (i, f) in [(0, f1[v]), (1, f2[v])] {
            for mu in 0..3 {
                for c in 0..3 {
                    o[c] += f * frame[(mu, i)] * d[mu][c];
                }
            }
        }
        map.target.project(map.at(v), o);
    });
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus(dim: usize, n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_torus(dim, n).unwrap())
    }

    #[test]
    fn target_structures_are_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for t in [
            Target::SphereS2,
            Target::FlatTorus2,
            Target::FlatTorus4,
            Target::ProductS2S2,
        ] {
            let s = t.stride();
            let mut p: Vec<f64> = (0..s).map(|_| rng.random::<f64>() - 0.5).collect();
            if !t.is_torus() {
                for c in p.chunks_mut(3) {
                    let n = dot(c, c).sqrt();
                    c.iter_mut().for_each(|x| *x /= n);
                }
            }
            let mut u: Vec<f64> = (0..s).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut w: Vec<f64> = (0..s).map(|_| rng.random::<f64>() - 0.5).collect();
            t.project(&p, &mut u);
            t.project(&p, &mut w);
            let mut ju = vec![0.0; s];
            t.complex_structure(&p, &u, &mut ju);
            // ω(u, w) = h(Ju, w)
            assert!((t.kahler(&p, &u, &w) - dot(&ju, &w)).abs() < 1e-14);
            let mut jju = vec![0.0; s];
            t.complex_structure(&p, &ju, &mut jju);
            for (a, b) in jju.iter().zip(&u) {
                assert!((a + b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn validation() {
        let m = torus(2, 4);
        assert!(matches!(
            DiscreteMap::new(m.clone(), Target::SphereS2, vec![1.0; 48]),
            Err(FieldError::NotUnit { .. })
        ));
        assert!(matches!(
            DiscreteMap::new(m.clone(), Target::FlatTorus2, vec![0.0; 3]),
            Err(FieldError::LengthMismatch { .. })
        ));
        let t = DiscreteMap::new(m.clone(), Target::FlatTorus2, vec![1.25; 32]).unwrap();
        assert_eq!(t.at(0), &[0.25, 0.25]);
        assert!(matches!(
            DiscreteMap::hopf(m),
            Err(FieldError::WrongMesh(MeshKind::SU2Euler))
        ));
    }

    #[test]
    fn pullback_examples() {
        let m = torus(2, 16);
        let id = DiscreteMap::torus_identity(m.clone()).unwrap();
        let p = id.pullback().unwrap();
        assert!(p.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let l = DiscreteMap::torus_linear(m.clone(), &[vec![2, 0], vec![0, 1]]).unwrap();
        assert!(l.pullback().unwrap().values().iter().all(|&x| (x - 2.0).abs() < 1e-12));
        let c = DiscreteMap::from_fn(m, Target::SphereS2, |_, o| o.copy_from_slice(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(c.pullback().unwrap().max_abs(), 0.0);
        assert_eq!(c.energy().unwrap(), 0.0);
    }

    #[test]
    fn energy_examples() {
        let m = torus(2, 16);
        assert!((DiscreteMap::torus_identity(m.clone()).unwrap().energy().unwrap() - 0.5).abs() < 1e-12);
        let l = DiscreteMap::torus_linear(m, &[vec![2, 0], vec![0, 1]]).unwrap();
        assert!((l.energy().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pullback_of_linear_map_is_closed() {
        let m = torus(4, 8);
        let f = DiscreteMap::torus_linear(
            m.clone(),
            &[vec![1, 1, 0, 0], vec![0, 1, 0, 1], vec![1, 0, 1, 0], vec![0, 0, 0, 1]],
        )
        .unwrap();
        let dp = m.exterior_d(&f.pullback().unwrap()).unwrap();
        assert!(dp.max_abs() <= 1e-10);
    }

    #[test]
    fn identity_is_critical() {
        let id = DiscreteMap::torus_identity(torus(2, 16)).unwrap();
        let r = id.el_residual().unwrap();
        assert_eq!(r.norm, 0.0);
        let x = id.random_variation(3);
        let fv = id.first_variation_check(&x, 1e-4).unwrap();
        assert_eq!(fv.formula_value, 0.0);
        assert!(fv.fd_derivative.abs() <= 1e-10);
    }

    #[test]
    fn first_variation_zero_field() {
        let f = DiscreteMap::random_smooth(torus(2, 16), Target::SphereS2, 4).unwrap();
        let x = VariationField::zeros(3, 256);
        let fv = f.first_variation_check(&x, 1e-3).unwrap();
        assert_eq!(fv.fd_derivative, 0.0);
        assert_eq!(fv.formula_value, 0.0);
        assert!(matches!(
            f.first_variation_check(&x, 1.0),
            Err(FieldError::BadEpsilon(_))
        ));
        let mut bad = x.clone();
        bad.values[0..3].copy_from_slice(f.at(0));
        assert!(matches!(
            f.first_variation_check(&bad, 1e-3),
            Err(FieldError::NotTangent { vertex: 0, .. })
        ));
    }

    #[test]
    fn first_variation_matches_finite_differences() {
        let m = torus(2, 32);
        for seed in 0..6 {
            let target = if seed % 2 == 0 {
                Target::SphereS2
            } else {
                Target::FlatTorus2
            };
            let f = DiscreteMap::random_smooth(m.clone(), target, seed).unwrap();
            assert!(f.el_residual().unwrap().norm > 1e-3);
            let x = f.test_variation(100 + seed).unwrap();
            let fv = f.first_variation_check(&x, 1e-4).unwrap();
            let rel = fv.abs_gap / (fv.fd_derivative.abs() + 1e-12);
            assert!(rel <= 1e-3, "seed {seed}: {fv:?}");
        }
    }

    #[test]
    fn hessian_of_identity() {
        let id = DiscreteMap::torus_identity(torus(2, 16)).unwrap();
        let thr = criticality_threshold(id.mesh());
        let y = id.random_variation(9);
        let h = id.hessian_quadratic(&y, thr).unwrap();
        assert_eq!(h.flow_term, 0.0);
        assert!(h.total >= 0.0);
        let fd = id.hessian_fd(&y, 1e-3).unwrap();
        assert!((fd - h.total).abs() <= 1e-3 * h.total, "{fd} vs {h:?}");

        // Divergence-free fields have closed ι_Yω.
        let mut sym = VariationField::zeros(2, 256);
        sym.values.chunks_mut(2).enumerate().for_each(|(v, o)| {
            let x = id.mesh().coords(v);
            o[0] = (2.0 * PI * x[1]).sin();
            o[1] = (2.0 * PI * x[0]).cos() + 0.3;
        });
        assert!(id.hessian_quadratic(&sym, thr).unwrap().total.abs() <= 1e-10);

        let f = DiscreteMap::random_smooth(torus(2, 16), Target::SphereS2, 1).unwrap();
        let y = f.random_variation(2);
        assert!(matches!(
            f.hessian_quadratic(&y, 1e-6),
            Err(FieldError::NotCritical { .. })
        ));
    }

    #[test]
    fn bounds_examples() {
        let m = torus(2, 16);
        let b = DiscreteMap::torus_identity(m.clone()).unwrap().bound_2d().unwrap();
        assert!((b.energy - 0.5).abs() < 1e-12 && b.gap.abs() <= 1e-12);
        let b = DiscreteMap::torus_linear(m.clone(), &[vec![2, 0], vec![0, 1]])
            .unwrap()
            .bound_2d()
            .unwrap();
        assert!((b.bound - 2.0).abs() < 1e-12 && b.gap.abs() <= 1e-12);
        let bump = DiscreteMap::from_fn(m, Target::FlatTorus2, |x, o| {
            o[0] = x[0] + 0.1 * (2.0 * PI * x[0]).sin() / (2.0 * PI);
            o[1] = x[1];
        })
        .unwrap();
        assert!(bump.bound_2d().unwrap().gap > 1e-4);

        let m4 = torus(4, 8);
        let b = DiscreteMap::torus_identity(m4.clone()).unwrap().bound_4d().unwrap();
        assert!((b.energy - 1.0).abs() < 1e-12 && b.gap.abs() <= 1e-10);
        assert_eq!(b.side, Some(Side::SelfDual));
        let diag = |d: [i64; 4]| {
            (0..4)
                .map(|i| (0..4).map(|j| if i == j { d[i] } else { 0 }).collect())
                .collect::<Vec<Vec<i64>>>()
        };
        // Steps of 2·2/8 would sit on the lifting cut, so use a finer grid.
        let b = DiscreteMap::torus_linear(torus(4, 16), &diag([2, 2, 2, 2]))
            .unwrap()
            .bound_4d()
            .unwrap();
        assert!(b.gap.abs() <= 1e-10 && (b.energy - 16.0).abs() < 1e-10);
        // 4 dx1∧dx2 + dx3∧dx4 has both ★-parts: E = 8.5 and the bound is 4.
        let b = DiscreteMap::torus_linear(torus(4, 16), &diag([2, 2, 1, 1]))
            .unwrap()
            .bound_4d()
            .unwrap();
        assert!(matches!(
            DiscreteMap::torus_linear(m4.clone(), &diag([2, 2, 1, 1])),
            Err(FieldError::Unresolved { axis: 0, .. })
        ));
        assert!((b.energy - 8.5).abs() < 1e-10 && (b.bound - 4.0).abs() < 1e-10);
        assert_eq!(b.side, Some(Side::Neither));
        let proj = DiscreteMap::torus_linear(m4, &diag([1, 1, 0, 0]))
            .unwrap()
            .bound_4d()
            .unwrap();
        assert!(proj.bound.abs() < 1e-12 && (proj.gap - proj.energy).abs() < 1e-12 && proj.energy > 0.0);
        // Orientation-reversing identity gives the anti-self-dual case.
        let anti = DiscreteMap::torus_linear(torus(4, 8), &diag([1, 1, 1, -1]))
            .unwrap()
            .bound_4d()
            .unwrap();
        assert_eq!(anti.side, Some(Side::AntiSelfDual));
    }

    #[test]
    fn selfdual_split_examples() {
        let m = Mesh::unit_torus(4, 4).unwrap();
        let w = m
            .cochain_from_fn(2, |_, o| {
                o[0] = 1.0;
                o[5] = 1.0;
            })
            .unwrap();
        let (p, n) = selfdual_split(&m, &w).unwrap();
        assert_eq!(n.max_abs(), 0.0);
        assert_eq!(p, w);
        let w = m
            .cochain_from_fn(2, |_, o| {
                o[0] = 1.0;
                o[5] = -1.0;
            })
            .unwrap();
        assert_eq!(selfdual_split(&m, &w).unwrap().0.max_abs(), 0.0);
    }

    #[test]
    fn conformal_invariance() {
        let m = torus(4, 6);
        let f = DiscreteMap::torus_linear(m.clone(), &[vec![1, 0, 0, 0], vec![0, 1, 0, 0]]).unwrap();
        let lambda = m.sample(|x| 1.0 + 0.5 * (2.0 * PI * x[0]).sin());
        let c = f.conformal_invariance_check(lambda).unwrap();
        assert!(c.rel_gap <= 1e-12);
        let ones = vec![1.0; m.n_vertices()];
        assert_eq!(f.conformal_invariance_check(ones).unwrap().abs_gap, 0.0);
        let flat = DiscreteMap::torus_identity(torus(2, 8)).unwrap();
        assert!(matches!(
            flat.conformal_invariance_check(vec![1.0; 64]),
            Err(FieldError::WrongDimension { .. })
        ));
    }

    #[test]
    fn flow_examples() {
        let id = DiscreteMap::torus_identity(torus(2, 16)).unwrap();
        let r = id.gradient_flow(5, 0.01, 1e-12).unwrap();
        assert_eq!(r.records.len(), 1);
        assert_eq!(r.records[0].energy, 0.5);

        let bump = DiscreteMap::from_fn(torus(2, 16), Target::FlatTorus2, |x, o| {
            o[0] = x[0] + 0.05 * (2.0 * PI * x[0]).sin();
            o[1] = x[1];
        })
        .unwrap();
        let r = bump.gradient_flow(20, 0.01, 1e-12).unwrap();
        for w in r.records.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        let last = r.records.last().unwrap().energy;
        assert!(last < r.records[0].energy && last > 0.5 - 1e-12);
        assert!(matches!(
            bump.gradient_flow(0, 0.1, 0.0),
            Err(FieldError::BadFlowParameters { .. })
        ));
    }

    #[test]
    fn random_sphere_maps_stay_on_the_sphere_under_flow() {
        let f = DiscreteMap::random_smooth(torus(2, 12), Target::SphereS2, 8).unwrap();
        let r = f.gradient_flow(10, 0.01, 0.0).unwrap();
        for w in r.records.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        for v in 0..144 {
            let p = r.map.at(v);
            assert!((dot(p, p).sqrt() - 1.0).abs() <= 1e-12);
        }
    }
}
