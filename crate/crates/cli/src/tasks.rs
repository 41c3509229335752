//! One runner per subcommand. Parameter defaults reproduce the acceptance
//! battery.

use std::f64::consts::{LN_2, PI};
use std::sync::Arc;

use fh_core::dec::{Mesh, DENSE_LIMIT};
use fh_core::field::{criticality_threshold, DiscreteMap, Target};
use fh_core::hopf::{self, BlockKind};
use fh_core::linalg::{self, CLUSTER_TOL};
use fh_core::ode::{self, Branch};
use serde_json::{json, Map, Value};

use crate::config::{check_grid, check_positive, check_range, Params};
use crate::error::CliError;
use crate::output::{derive_seed, to_json, Assertion, Table, TaskOutcome};

/// Largest mesh any command will allocate.
pub const MAX_VERTICES: usize = 1 << 24;
/// Residual norms at or below this are treated as exact zeros.
pub const ROUNDOFF_FLOOR: f64 = 1e-12;
/// Smallest accepted observed convergence order of the residual.
pub const MIN_ORDER: f64 = 1.9;

/// Settings shared by every task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Context {
    pub seed: u64,
    pub tolerance_scale: f64,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            seed: 0,
            tolerance_scale: 1.0,
        }
    }
}

impl Context {
    pub fn tol(&self, x: f64) -> f64 {
        x * self.tolerance_scale
    }

    pub fn seed_for(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }
}

fn guard(sizes: &[usize]) -> Result<(), CliError> {
    let n = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    match n {
        Some(n) if n <= MAX_VERTICES => Ok(()),
        _ => Err(CliError::ResourceCap(format!(
            "mesh {sizes:?} exceeds {MAX_VERTICES} vertices"
        ))),
    }
}

fn torus(dim: usize, n: usize) -> Result<Arc<Mesh>, CliError> {
    guard(&vec![n; dim])?;
    Ok(Arc::new(Mesh::unit_torus(dim, n)?))
}

fn su2_mesh(n: usize) -> Result<Arc<Mesh>, CliError> {
    guard(&[n; 3])?;
    Ok(Arc::new(Mesh::su2_euler([n, n, n])?))
}

fn product_mesh(n: usize) -> Result<Arc<Mesh>, CliError> {
    let sizes = [n, n / 2, n, n / 2];
    guard(&sizes)?;
    Ok(Arc::new(Mesh::sphere_product(sizes)?))
}

fn diag(d: &[i64]) -> Vec<Vec<i64>> {
    (0..d.len())
        .map(|i| (0..d.len()).map(|j| if i == j { d[i] } else { 0 }).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTask {
    pub n_min: usize,
    pub n_max: usize,
    pub kind: BlockKind,
}

impl Default for SpectrumTask {
    fn default() -> Self {
        SpectrumTask {
            n_min: 0,
            n_max: 20,
            kind: BlockKind::LPhi,
        }
    }
}

impl SpectrumTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let kind = match p.str("kind", "L_phi")?.to_ascii_lowercase().replace('-', "_").as_str() {
            "l_phi" => BlockKind::LPhi,
            "a_block" => BlockKind::ABlock,
            other => {
                return Err(CliError::Config(format!(
                    "kind must be L_phi or A_block, got {other:?}"
                )))
            }
        };
        let t = SpectrumTask {
            n_min: p.usize("n_min", d.n_min)?,
            n_max: p.usize("n_max", d.n_max)?,
            kind,
        };
        if t.n_min > t.n_max {
            return Err(CliError::Config(format!("n range [{}, {}] is empty", t.n_min, t.n_max)));
        }
        Ok(t)
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut table = Table::new("spectrum", vec!["n", "index", "computed", "predicted"]);
        let mut reports = Vec::new();
        for n in self.n_min..=self.n_max {
            let block = match self.kind {
                BlockKind::ABlock => hopf::a_block::<f64>(n)?,
                _ => hopf::hessian_block::<f64>(n)?,
            };
            let r = hopf::block_spectrum(&block)?;
            out.assertions.push(Assertion::le(
                format!("n={n}: max deviation"),
                r.max_abs_deviation,
                ctx.tol(1e-10),
            ));
            if self.kind == BlockKind::LPhi {
                out.assertions.push(Assertion::ge(
                    format!("n={n}: min eigenvalue"),
                    r.min_eigenvalue(),
                    -ctx.tol(1e-12),
                ));
            }
            for row in r.rows() {
                table.push(vec![n as f64, row.index as f64, row.computed, row.predicted]);
            }
            reports.push(r);
        }
        out.results = to_json(&reports)?;
        out.tables.push(table);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WardTask {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points: usize,
}

impl Default for WardTask {
    fn default() -> Self {
        WardTask {
            alpha_min: 0.0,
            alpha_max: 3.0,
            points: 13,
        }
    }
}

impl WardTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let t = WardTask {
            alpha_min: p.f64("alpha_min", d.alpha_min)?,
            alpha_max: p.f64("alpha_max", d.alpha_max)?,
            points: p.usize("points", d.points)?,
        };
        check_range("alpha", t.alpha_min, t.alpha_max)?;
        if t.points < 2 {
            return Err(CliError::Config(format!("points must be at least 2, got {}", t.points)));
        }
        Ok(t)
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut table = Table::new("ward", vec!["alpha", "min_eigenvalue"]);
        let mut grid = Vec::new();
        let mut consistency = Vec::new();
        let mut worst: f64 = 0.0;
        for i in 0..self.points {
            let alpha = self.alpha_min + (self.alpha_max - self.alpha_min) * i as f64 / (self.points - 1) as f64;
            let r = hopf::block_spectrum(&hopf::ward_block(alpha)?)?;
            let c = hopf::ward_consistency(alpha)?;
            worst = worst.max(r.max_abs_deviation);
            out.assertions.push(Assertion::le(
                format!("alpha={alpha}: spectral gap of literal form"),
                c.spectral_gap,
                ctx.tol(1e-12),
            ));
            table.push(vec![alpha, r.min_eigenvalue()]);
            grid.push(r);
            consistency.push(c);
        }
        out.assertions.insert(
            0,
            Assertion::le("max deviation from {(3a+7)/4, (a-1)/4}", worst, ctx.tol(1e-12)),
        );
        out.results = json!({ "grid": to_json(&grid)?, "consistency": to_json(&consistency)? });
        out.tables.push(table);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTask {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl Default for ThresholdTask {
    fn default() -> Self {
        ThresholdTask {
            lo: 0.0,
            hi: 2.0,
            tol: 1e-6,
        }
    }
}

impl ThresholdTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let t = ThresholdTask {
            lo: p.f64("lo", d.lo)?,
            hi: p.f64("hi", d.hi)?,
            tol: check_positive("tol", p.f64("tol", d.tol)?)?,
        };
        check_range("alpha", t.lo, t.hi)?;
        Ok(t)
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let alpha_star = hopf::stability_threshold(self.lo, self.hi, self.tol)?;
        Ok(TaskOutcome {
            results: json!({ "alpha_star": alpha_star, "tol": self.tol }),
            assertions: vec![Assertion::le(
                "|alpha_star - 1|",
                (alpha_star - 1.0).abs(),
                ctx.tol(self.tol),
            )],
            tables: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapChoice {
    IdentityT2,
    LinearT2,
    Hopf,
    Product,
}

impl MapChoice {
    pub const ALL: [MapChoice; 4] = [
        MapChoice::IdentityT2,
        MapChoice::LinearT2,
        MapChoice::Hopf,
        MapChoice::Product,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MapChoice::IdentityT2 => "identity_t2",
            MapChoice::LinearT2 => "linear_t2",
            MapChoice::Hopf => "hopf",
            MapChoice::Product => "product",
        }
    }

    fn parse_list(s: &str) -> Result<Vec<Self>, CliError> {
        if s == "all" {
            return Ok(Self::ALL.to_vec());
        }
        s.split(',')
            .map(|x| {
                Self::ALL.into_iter().find(|m| m.name() == x.trim()).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown map {x:?}; use all or a list of identity_t2, linear_t2, hopf, product"
                    ))
                })
            })
            .collect()
    }
}

/// Mesh resolutions for the four named maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapSizes {
    pub torus: usize,
    pub hopf: usize,
    /// Azimuthal size; polar axes get half of it.
    pub product: usize,
}

impl MapSizes {
    fn from_params(p: &Params, d: MapSizes) -> Result<Self, CliError> {
        let s = MapSizes {
            torus: check_grid("torus_size", p.usize("torus_size", d.torus)?)?,
            hopf: check_grid("hopf_size", p.usize("hopf_size", d.hopf)?)?,
            product: check_grid("product_size", p.usize("product_size", d.product)?)?,
        };
        if !s.product.is_multiple_of(4) {
            return Err(CliError::Config(format!(
                "product_size must be a multiple of 4, got {}",
                s.product
            )));
        }
        Ok(s)
    }

    fn build(&self, map: MapChoice, scale: usize) -> Result<DiscreteMap, CliError> {
        Ok(match map {
            MapChoice::IdentityT2 => DiscreteMap::torus_identity(torus(2, self.torus * scale)?)?,
            MapChoice::LinearT2 => DiscreteMap::torus_linear(torus(2, self.torus * scale)?, &diag(&[2, 1]))?,
            MapChoice::Hopf => DiscreteMap::hopf(su2_mesh(self.hopf * scale)?)?,
            MapChoice::Product => DiscreteMap::sphere_projection(product_mesh(self.product * scale)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTask {
    pub maps: Vec<MapChoice>,
    pub sizes: MapSizes,
}

impl Default for EnergyTask {
    fn default() -> Self {
        EnergyTask {
            maps: MapChoice::ALL.to_vec(),
            sizes: MapSizes {
                torus: 16,
                hopf: 48,
                product: 32,
            },
        }
    }
}

impl EnergyTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        Ok(EnergyTask {
            maps: MapChoice::parse_list(p.str("map", "all")?)?,
            sizes: MapSizes::from_params(p, d.sizes)?,
        })
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut results = Map::new();
        for &m in &self.maps {
            let f = self.sizes.build(m, 1)?;
            let energy = f.energy()?;
            let (target, label, rel) = match m {
                MapChoice::IdentityT2 => (0.5, "1/2", false),
                MapChoice::LinearT2 => (2.0, "2", false),
                MapChoice::Hopf | MapChoice::Product => (8.0 * PI * PI, "8 pi^2", true),
            };
            let abs_err = (energy - target).abs();
            let rel_err = abs_err / target;
            if rel {
                out.assertions.push(Assertion::le(
                    format!("{}: relative error", m.name()),
                    rel_err,
                    ctx.tol(5e-3),
                ));
            } else {
                out.assertions.push(Assertion::le(
                    format!("{}: absolute error", m.name()),
                    abs_err,
                    ctx.tol(1e-12),
                ));
            }
            results.insert(
                m.name().into(),
                json!({
                    "energy": energy,
                    "target": label,
                    "target_value": target,
                    "abs_err": abs_err,
                    "rel_err": rel_err,
                    "mesh": f.mesh().sizes(),
                }),
            );
        }
        out.results = Value::Object(results);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTask {
    pub maps: Vec<MapChoice>,
    /// Coarse resolutions; the fine grid doubles every axis.
    pub sizes: MapSizes,
}

impl Default for ResidualTask {
    fn default() -> Self {
        ResidualTask {
            maps: MapChoice::ALL.to_vec(),
            sizes: MapSizes {
                torus: 16,
                hopf: 24,
                product: 16,
            },
        }
    }
}

impl ResidualTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        Ok(ResidualTask {
            maps: MapChoice::parse_list(p.str("map", "all")?)?,
            sizes: MapSizes::from_params(p, d.sizes)?,
        })
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut results = Map::new();
        for &m in &self.maps {
            let mut table = Table::new(format!("residual_{}", m.name()), vec!["h", "residual_norm"]);
            let mut norms = Vec::new();
            let mut hs = Vec::new();
            for scale in [1, 2] {
                let f = self.sizes.build(m, scale)?;
                let r = f.el_residual()?;
                hs.push(f.mesh().h_max());
                norms.push((r.norm, criticality_threshold(f.mesh())));
                table.push(vec![f.mesh().h_max(), r.norm]);
            }
            let (coarse, _) = norms[0];
            let (fine, threshold) = norms[1];
            let order = (coarse / fine).log2();
            out.assertions.push(Assertion::le(
                format!("{}: fine residual <= 10 h^2", m.name()),
                fine,
                ctx.tol(threshold),
            ));
            if fine <= ROUNDOFF_FLOOR {
                out.assertions.push(Assertion::le(
                    format!("{}: fine residual at round-off floor", m.name()),
                    fine,
                    ROUNDOFF_FLOOR,
                ));
            } else {
                out.assertions
                    .push(Assertion::ge(format!("{}: observed order", m.name()), order, MIN_ORDER));
            }
            results.insert(
                m.name().into(),
                json!({
                    "h": hs,
                    "residual_norm": [coarse, fine],
                    "threshold": threshold,
                    "observed_order": if order.is_finite() { json!(order) } else { Value::Null },
                }),
            );
            out.tables.push(table);
        }
        out.results = Value::Object(results);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTask {
    pub maps_2d: usize,
    pub maps_4d: usize,
    pub size_2d: usize,
    pub size_4d: usize,
}

impl Default for BoundsTask {
    fn default() -> Self {
        BoundsTask {
            maps_2d: 100,
            maps_4d: 50,
            size_2d: 12,
            size_4d: 4,
        }
    }
}

impl BoundsTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        Ok(BoundsTask {
            maps_2d: p.usize("maps_2d", d.maps_2d)?,
            maps_4d: p.usize("maps_4d", d.maps_4d)?,
            size_2d: check_grid("size_2d", p.usize("size_2d", d.size_2d)?)?,
            size_4d: check_grid("size_4d", p.usize("size_4d", d.size_4d)?)?,
        })
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let tol = ctx.tol(1e-10);
        let m2 = torus(2, self.size_2d)?;
        let m4 = torus(4, self.size_4d)?;
        let mut t2 = Table::new("bounds_2d", vec!["energy", "bound"]);
        let mut t4 = Table::new("bounds_4d", vec!["energy", "bound"]);
        let mut min2 = f64::INFINITY;
        for i in 0..self.maps_2d {
            let target = if i % 2 == 0 {
                Target::SphereS2
            } else {
                Target::FlatTorus2
            };
            let b =
                DiscreteMap::random_smooth(m2.clone(), target, ctx.seed_for(&format!("bounds-2d-{i}")))?.bound_2d()?;
            min2 = min2.min(b.gap);
            t2.push(vec![b.energy, b.bound]);
        }
        let mut min4 = f64::INFINITY;
        for i in 0..self.maps_4d {
            let target = if i % 2 == 0 {
                Target::FlatTorus4
            } else {
                Target::ProductS2S2
            };
            let b =
                DiscreteMap::random_smooth(m4.clone(), target, ctx.seed_for(&format!("bounds-4d-{i}")))?.bound_4d()?;
            min4 = min4.min(b.gap);
            t4.push(vec![b.energy, b.bound]);
        }
        if self.maps_2d > 0 {
            out.assertions
                .push(Assertion::ge("random 2d maps: min gap", min2, -tol));
        }
        if self.maps_4d > 0 {
            out.assertions
                .push(Assertion::ge("random 4d maps: min gap", min4, -tol));
        }

        // Fixed grids: the linear maps need at least 8 cells per period on every axis.
        let eq_2d = torus(2, 16)?;
        let equality = [
            ("identity_t2", DiscreteMap::torus_identity(eq_2d.clone())?.bound_2d()?),
            (
                "linear_t2",
                DiscreteMap::torus_linear(eq_2d, &diag(&[2, 1]))?.bound_2d()?,
            ),
            ("identity_t4", DiscreteMap::torus_identity(torus(4, 8)?)?.bound_4d()?),
        ];
        let mut eq = Map::new();
        for (name, b) in equality {
            out.assertions
                .push(Assertion::le(format!("{name}: |gap|"), b.gap.abs(), tol));
            eq.insert(name.into(), to_json(&b)?);
        }
        out.results = json!({
            "random_2d": { "count": self.maps_2d, "min_gap": finite_or_null(min2) },
            "random_4d": { "count": self.maps_4d, "min_gap": finite_or_null(min4) },
            "equality": eq,
        });
        out.tables.push(t2);
        out.tables.push(t4);
        Ok(out)
    }
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianTask {
    /// `(dim, size)` cases.
    pub cases: Vec<(usize, usize)>,
    pub degree: usize,
}

impl Default for LaplacianTask {
    fn default() -> Self {
        LaplacianTask {
            cases: vec![(2, 8), (4, 4)],
            degree: 2,
        }
    }
}

impl LaplacianTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let degree = p.usize("degree", d.degree)?;
        let cases = match p.usize("dim", 0)? {
            0 => {
                if p.values().contains_key("size") {
                    return Err(CliError::Config("size needs an explicit dim".into()));
                }
                d.cases
            }
            dim @ 2..=4 => vec![(dim, check_grid("size", p.usize("size", if dim == 2 { 8 } else { 4 })?)?)],
            dim => return Err(CliError::Config(format!("dim must be 2, 3 or 4, got {dim}"))),
        };
        if let Some(&(dim, _)) = cases.iter().find(|(dim, _)| degree > *dim) {
            return Err(CliError::Config(format!("degree {degree} exceeds dimension {dim}")));
        }
        Ok(LaplacianTask { cases, degree })
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut results = Map::new();
        let p = self.degree;
        for &(dim, size) in &self.cases {
            let mesh = torus(dim, size)?;
            let nv = mesh.n_vertices();
            let largest = (p.saturating_sub(1)..=(p + 1).min(dim))
                .map(|q| nv * fh_core::dec::binomial(dim, q))
                .max()
                .unwrap_or(0);
            if largest > DENSE_LIMIT {
                return Err(CliError::ResourceCap(format!(
                    "set comparison needs full spectra; {largest} unknowns exceed the dense limit {DENSE_LIMIT}"
                )));
            }
            let s = mesh.laplacian_spectrum(p, usize::MAX, ctx.seed_for(&format!("laplacian-{dim}")))?;
            let union: Vec<f64> = s.delta_d.iter().chain(&s.d_delta).copied().collect();
            let gap = linalg::set_gap(&s.laplacian, &union, CLUSTER_TOL);
            let label = format!("T{dim} {size}^{dim}");
            out.assertions.push(Assertion::le(
                format!("{label}: spec Lap = spec dd* u spec d*d"),
                gap,
                ctx.tol(1e-9),
            ));
            let mut entry = json!({
                "unknowns": s.unknowns,
                "union_gap": gap,
                "distinct_eigenvalues": linalg::cluster(&s.laplacian, CLUSTER_TOL).len(),
            });
            if let Some(lower) = &s.delta_d_lower {
                let g = linalg::set_gap(&s.laplacian, lower, CLUSTER_TOL);
                entry["lower_delta_d_gap"] = json!(g);
                if p == 2 && (dim == 2 || dim == 4) {
                    out.assertions.push(Assertion::le(
                        format!("{label}: spec Lap = spec of delta d on 1-forms"),
                        g,
                        ctx.tol(1e-9),
                    ));
                }
            }
            let mut table = Table::new(format!("laplacian_{dim}d"), vec!["index", "eigenvalue"]);
            for (i, &e) in s.laplacian.iter().enumerate() {
                table.push(vec![i as f64, e]);
            }
            out.tables.push(table);
            results.insert(format!("T{dim}"), entry);
        }
        out.results = Value::Object(results);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTask {
    pub glued: bool,
    pub integrate: bool,
    pub t_small: f64,
    pub t_large: f64,
    pub points: usize,
    pub h: f64,
    pub t_end: f64,
}

impl Default for OdeTask {
    fn default() -> Self {
        OdeTask {
            glued: true,
            integrate: true,
            t_small: 1e-6,
            t_large: 30.0,
            points: 100_000,
            h: 1e-3,
            t_end: 10.0,
        }
    }
}

impl OdeTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let mut glued = p.bool("glued", false)?;
        let mut integrate = p.bool("integrate", false)?;
        if !glued && !integrate {
            glued = true;
            integrate = true;
        }
        let t = OdeTask {
            glued,
            integrate,
            t_small: check_positive("t_small", p.f64("t_small", d.t_small)?)?,
            t_large: p.f64("t_large", d.t_large)?,
            points: p.usize("points", d.points)?,
            h: check_positive("h", p.f64("h", d.h)?)?,
            t_end: p.f64("t_end", d.t_end)?,
        };
        check_range("t", t.t_small, t.t_large)?;
        check_range("integration", LN_2, t.t_end)?;
        if t.points < 3 {
            return Err(CliError::Config(format!("points must be at least 3, got {}", t.points)));
        }
        Ok(t)
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mut out = TaskOutcome::default();
        let mut results = Map::new();
        if self.glued {
            let energy = ode::glued_energy(self.t_small, self.t_large, self.points)?;
            let abs_err = (energy - PI * PI).abs();
            out.assertions
                .push(Assertion::le("glued energy: |E - pi^2|", abs_err, ctx.tol(1e-3)));
            results.insert("energy".into(), json!(energy));
            results.insert("target".into(), json!("pi^2"));
            results.insert("abs_err".into(), json!(abs_err));
        }
        if self.integrate {
            let p = ode::integrate_el(1.0, -1.0, LN_2, self.t_end, self.h)?;
            let mut max_err: f64 = 0.0;
            let mut table = Table::new("ode", vec!["t", "alpha"]);
            for (&t, &a) in p.t_grid().iter().zip(p.alpha()) {
                max_err = max_err.max((a - ode::exact_profile(t, Branch::Plus)?.0).abs());
                table.push(vec![t, a]);
            }
            let drift = p.h_drift();
            out.assertions.push(Assertion::le(
                "integrator: max |alpha - alpha_+|",
                max_err,
                ctx.tol(1e-8),
            ));
            out.assertions
                .push(Assertion::le("integrator: H drift", drift, ctx.tol(1e-10)));
            results.insert(
                "integration".into(),
                json!({
                    "t0": LN_2,
                    "t_end": self.t_end,
                    "h": self.h,
                    "steps": p.len() - 1,
                    "max_abs_err": max_err,
                    "h_drift": drift,
                }),
            );
            out.tables.push(table);
        }
        out.results = Value::Object(results);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTask {
    pub target: Target,
    pub size: usize,
    pub steps: usize,
    pub dt: f64,
}

impl Default for FlowTask {
    fn default() -> Self {
        FlowTask {
            target: Target::SphereS2,
            size: 16,
            steps: 50,
            dt: 0.01,
        }
    }
}

impl FlowTask {
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let d = Self::default();
        let target = match p.str("target", "s2")? {
            "s2" => Target::SphereS2,
            "t2" => Target::FlatTorus2,
            other => return Err(CliError::Config(format!("target must be s2 or t2, got {other:?}"))),
        };
        let steps = p.usize("steps", d.steps)?;
        if steps == 0 {
            return Err(CliError::Config("steps must be positive".into()));
        }
        Ok(FlowTask {
            target,
            size: check_grid("size", p.usize("size", d.size)?)?,
            steps,
            dt: check_positive("dt", p.f64("dt", d.dt)?)?,
        })
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        let mesh = torus(2, self.size)?;
        let start = DiscreteMap::random_smooth(mesh.clone(), self.target, ctx.seed_for("flow"))?;
        let r = start.gradient_flow(self.steps, self.dt, criticality_threshold(&mesh))?;
        let mut table = Table::new("flow", vec!["step", "energy"]);
        for rec in &r.records {
            table.push(vec![rec.step as f64, rec.energy]);
        }
        let monotone = r.records.windows(2).all(|w| w[1].energy <= w[0].energy);
        let first = r.records.first().map(|x| x.energy).unwrap_or(f64::NAN);
        let last = r.records.last().map(|x| x.energy).unwrap_or(f64::NAN);
        Ok(TaskOutcome {
            results: json!({ "records": to_json(&r.records)?, "initial_energy": first, "final_energy": last }),
            assertions: vec![Assertion::holds("energy is non-increasing along the flow", monotone)],
            tables: vec![table],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;
    use std::collections::BTreeMap;

    fn params(cmd: Command, kv: &[(&str, toml::Value)]) -> Params {
        Params::new(
            cmd,
            kv.iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect::<BTreeMap<_, _>>(),
        )
        .unwrap()
    }

    #[test]
    fn defaults_match_acceptance_settings() {
        let empty = Params::default();
        assert_eq!(SpectrumTask::from_params(&empty).unwrap(), SpectrumTask::default());
        assert_eq!(EnergyTask::from_params(&empty).unwrap().sizes.hopf, 48);
        assert_eq!(OdeTask::from_params(&empty).unwrap(), OdeTask::default());
        let glued = OdeTask::from_params(&params(Command::Ode, &[("glued", toml::Value::Boolean(true))])).unwrap();
        assert!(glued.glued && !glued.integrate);
    }

    #[test]
    fn validation_errors_are_config_errors() {
        let bad = params(Command::Threshold, &[("tol", toml::Value::Float(-1.0))]);
        assert!(matches!(ThresholdTask::from_params(&bad), Err(CliError::Config(_))));
        let bad = params(
            Command::Ward,
            &[
                ("alpha_min", toml::Value::Float(3.0)),
                ("alpha_max", toml::Value::Float(1.0)),
            ],
        );
        assert!(matches!(WardTask::from_params(&bad), Err(CliError::Config(_))));
        let bad = params(Command::Energy, &[("torus_size", toml::Value::Integer(3))]);
        assert!(matches!(EnergyTask::from_params(&bad), Err(CliError::Config(_))));
        let bad = params(Command::Energy, &[("map", toml::Value::String("disc".into()))]);
        assert!(matches!(EnergyTask::from_params(&bad), Err(CliError::Config(_))));
        let bad = params(
            Command::Laplacian,
            &[("dim", toml::Value::Integer(2)), ("degree", toml::Value::Integer(3))],
        );
        assert!(matches!(LaplacianTask::from_params(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn resource_caps() {
        assert!(matches!(guard(&[1 << 13, 1 << 13]), Err(CliError::ResourceCap(_))));
        assert!(matches!(guard(&[usize::MAX, 2]), Err(CliError::ResourceCap(_))));
        let t = LaplacianTask {
            cases: vec![(4, 8)],
            degree: 2,
        };
        assert!(matches!(t.run(&Context::default()), Err(CliError::ResourceCap(_))));
    }

    #[test]
    fn threshold_and_ward() {
        let ctx = Context::default();
        let t = ThresholdTask::default().run(&ctx).unwrap();
        assert!(t.passed());
        assert!((t.results["alpha_star"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
        let w = WardTask::default().run(&ctx).unwrap();
        assert!(w.passed());
        assert_eq!(w.tables[0].rows.len(), 13);
    }

    #[test]
    fn tolerance_scale_can_force_failures() {
        let ctx = Context {
            seed: 0,
            tolerance_scale: 1e-30,
        };
        let s = SpectrumTask {
            n_min: 3,
            n_max: 4,
            kind: BlockKind::LPhi,
        }
        .run(&ctx)
        .unwrap();
        assert!(!s.passed());
        assert!(s.failed().iter().any(|n| n.contains("max deviation")));
    }

    #[test]
    fn flow_is_monotone() {
        let f = FlowTask {
            steps: 5,
            size: 8,
            ..Default::default()
        }
        .run(&Context::default())
        .unwrap();
        assert!(f.passed());
        assert_eq!(f.tables[0].rows.len(), f.results["records"].as_array().unwrap().len());
    }
}
