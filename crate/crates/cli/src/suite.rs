//! The ten-criterion acceptance battery.

use std::f64::consts::PI;
use std::sync::Arc;

use fh_core::dec::Mesh;
use fh_core::field::{self, criticality_threshold, DiscreteMap, Target, VariationField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Params;
use crate::error::CliError;
use crate::output::{to_json, Assertion, TaskOutcome};
use crate::tasks::{
    BoundsTask, Context, EnergyTask, LaplacianTask, OdeTask, ResidualTask, SpectrumTask, ThresholdTask, WardTask,
};

pub const CRITERIA: [(usize, &str); 10] = [
    (1, "Hopf Hessian spectrum"),
    (2, "Ward threshold"),
    (3, "glued-solution energy"),
    (4, "energy values"),
    (5, "criticality residuals"),
    (6, "conformal invariance"),
    (7, "energy bounds"),
    (8, "Laplacian spectra"),
    (9, "first and second variation"),
    (10, "Peter-Weyl cross-check"),
];

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub outcome: TaskOutcome,
    pub error: Option<String>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.outcome.passed()
    }

    /// One human-readable status line.
    pub fn line(&self) -> String {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => e.clone(),
            None => {
                let failed = self.outcome.failed();
                if failed.is_empty() {
                    format!("{} checks", self.outcome.assertions.len())
                } else {
                    format!("failed: {}", failed.join("; "))
                }
            }
        };
        format!("criterion {:>2} {:<28} {status}  ({detail})", self.id, self.title)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTask {
    pub criteria: Vec<usize>,
}

impl Default for SuiteTask {
    fn default() -> Self {
        SuiteTask {
            criteria: (1..=10).collect(),
        }
    }
}

impl SuiteTask {
    /// `criteria` is `all` or a comma list of ids and ranges such as `1,4-6`.
    pub fn from_params(p: &Params) -> Result<Self, CliError> {
        let spec = p.str("criteria", "all")?;
        if spec == "all" {
            return Ok(Self::default());
        }
        let bad = || CliError::Config(format!("criteria must be all or a list such as 1,4-6, got {spec:?}"));
        let mut ids = Vec::new();
        for part in spec.split(',') {
            let part = part.trim();
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (
                    a.trim().parse().map_err(|_| bad())?,
                    b.trim().parse().map_err(|_| bad())?,
                ),
                None => {
                    let x: usize = part.parse().map_err(|_| bad())?;
                    (x, x)
                }
            };
            if lo < 1 || hi > 10 || lo > hi {
                return Err(bad());
            }
            ids.extend(lo..=hi);
        }
        ids.sort_unstable();
        ids.dedup();
        Ok(SuiteTask { criteria: ids })
    }

    /// Runs the selected criteria in parallel; reports come back in id order.
    pub fn reports(&self, ctx: &Context) -> Vec<CriterionReport> {
        self.criteria.par_iter().map(|&id| run_criterion(id, ctx)).collect()
    }

    pub fn run(&self, ctx: &Context) -> Result<TaskOutcome, CliError> {
        Ok(merge(&self.reports(ctx)))
    }
}

pub fn run_criterion(id: usize, ctx: &Context) -> CriterionReport {
    let title = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let result = match id {
        1 => SpectrumTask::default().run(ctx),
        2 => ward_threshold(ctx),
        3 => OdeTask::default().run(ctx),
        4 => EnergyTask::default().run(ctx),
        5 => ResidualTask::default().run(ctx),
        6 => conformal(ctx),
        7 => BoundsTask::default().run(ctx),
        8 => LaplacianTask::default().run(ctx),
        9 => variations(ctx),
        10 => peter_weyl(ctx),
        _ => Err(CliError::Config(format!("no criterion {id}"))),
    };
    match result {
        Ok(outcome) => CriterionReport {
            id,
            title,
            outcome,
            error: None,
        },
        Err(e) => CriterionReport {
            id,
            title,
            outcome: TaskOutcome::default(),
            error: Some(e.to_string()),
        },
    }
}

/// Folds criterion reports into one outcome with prefixed names.
pub fn merge(reports: &[CriterionReport]) -> TaskOutcome {
    let mut out = TaskOutcome::default();
    let mut entries = Vec::new();
    for r in reports {
        let prefix = format!("criterion {}", r.id);
        if let Some(e) = &r.error {
            out.assertions.push(Assertion::holds(format!("{prefix}: {e}"), false));
        }
        out.assertions.extend(r.outcome.assertions.iter().map(|a| {
            let mut a = a.clone();
            a.name = format!("{prefix}: {}", a.name);
            a
        }));
        out.tables.extend(r.outcome.tables.iter().map(|t| {
            let mut t = t.clone();
            t.name = format!("c{}_{}", r.id, t.name);
            t
        }));
        entries.push(json!({
            "id": r.id,
            "title": r.title,
            "passed": r.passed(),
            "error": r.error,
            "results": r.outcome.results,
        }));
    }
    out.results = json!({ "criteria": entries });
    out
}

fn ward_threshold(ctx: &Context) -> Result<TaskOutcome, CliError> {
    let mut out = WardTask::default().run(ctx)?;
    let t = ThresholdTask::default().run(ctx)?;
    out.assertions.extend(t.assertions);
    out.results = json!({ "ward": out.results, "threshold": t.results });
    Ok(out)
}

fn conformal(ctx: &Context) -> Result<TaskOutcome, CliError> {
    let mesh = Arc::new(Mesh::unit_torus(4, 6)?);
    let mut checks = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let seed = ctx.seed_for(&format!("conformal-{i}"));
        let target = if i % 2 == 0 {
            Target::FlatTorus4
        } else {
            Target::ProductS2S2
        };
        let f = DiscreteMap::random_smooth(mesh.clone(), target, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lambda: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.random_range(0.2..5.0)).collect();
        let c = f.conformal_invariance_check(lambda)?;
        worst = worst.max(c.rel_gap);
        checks.push(c);
    }
    Ok(TaskOutcome {
        results: json!({ "checks": to_json(&checks)?, "max_rel_gap": worst }),
        assertions: vec![Assertion::le(
            "max relative gap over 10 conformal factors",
            worst,
            ctx.tol(1e-12),
        )],
        tables: Vec::new(),
    })
}

/// Random field `(f(x₁), g(x₀)) + c` built from a few Fourier modes. Its
/// discrete divergence vanishes identically, so `ι_Y ω` is closed.
fn symplectic_field(map: &DiscreteMap, rng: &mut ChaCha8Rng) -> VariationField {
    let mesh = map.mesh();
    let coeff: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = VariationField::zeros(2, mesh.n_vertices());
    y.values.chunks_mut(2).enumerate().for_each(|(v, o)| {
        let x = mesh.coords(v);
        let wave = |c: &[f64], s: f64| {
            c[0] + (1..=2)
                .map(|k| c[2 * k - 1] * (2.0 * PI * k as f64 * s).sin() + c[2 * k] * (2.0 * PI * k as f64 * s).cos())
                .sum::<f64>()
        };
        o[0] = wave(&coeff[..5], x[1]);
        o[1] = wave(&coeff[5..], x[0]);
    });
    y
}

fn variations(ctx: &Context) -> Result<TaskOutcome, CliError> {
    let mut out = TaskOutcome::default();
    let tol = ctx.tol(1e-3);

    let m32 = Arc::new(Mesh::unit_torus(2, 32)?);
    let first: Vec<f64> = (0..50)
        .into_par_iter()
        .map(|i| -> Result<f64, CliError> {
            let target = if i % 2 == 0 {
                Target::SphereS2
            } else {
                Target::FlatTorus2
            };
            let f = DiscreteMap::random_smooth(m32.clone(), target, ctx.seed_for(&format!("first-variation-map-{i}")))?;
            let x = f.test_variation(ctx.seed_for(&format!("first-variation-field-{i}")))?;
            let fv = f.first_variation_check(&x, 1e-4)?;
            Ok(fv.abs_gap / fv.fd_derivative.abs().max(1e-12))
        })
        .collect::<Result<_, _>>()?;
    let worst_first = first.iter().copied().fold(0.0, f64::max);
    out.assertions.push(Assertion::le(
        "first variation: max relative error over 50 cases",
        worst_first,
        tol,
    ));

    let id = DiscreteMap::torus_identity(Arc::new(Mesh::unit_torus(2, 16)?))?;
    let thr = criticality_threshold(id.mesh());
    // Draws that land in the kernel have no relative scale; the kernel
    // check below covers them.
    let mut second = Vec::new();
    let mut skipped = 0;
    let mut draw = 0;
    while second.len() < 5 && draw < 50 {
        let y = id.random_variation(ctx.seed_for(&format!("hessian-{draw}")));
        draw += 1;
        let h = id.hessian_quadratic(&y, thr)?;
        if h.total <= 1e-8 {
            skipped += 1;
            continue;
        }
        let fd = id.hessian_fd(&y, 1e-3)?;
        let i = second.len();
        second.push(json!({ "formula": h.total, "fd": fd }));
        out.assertions.push(Assertion::le(
            format!("identity hessian case {i}: relative error"),
            (fd - h.total).abs() / h.total,
            tol,
        ));
    }
    out.assertions.push(Assertion::holds(
        "five identity hessian cases outside the kernel",
        second.len() == 5,
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed_for("kernel"));
    let mut kernel = Vec::new();
    for i in 0..5 {
        let h = id.hessian_quadratic(&symplectic_field(&id, &mut rng), thr)?;
        kernel.push(h.total);
        out.assertions.push(Assertion::le(
            format!("symplectic variation {i}: |H(Y, Y)|"),
            h.total.abs(),
            ctx.tol(1e-10),
        ));
    }

    out.results = json!({
        "first_variation_rel_err": first,
        "max_first_variation_rel_err": worst_first,
        "identity_hessian": second,
        "kernel_draws_skipped": skipped,
        "symplectic_hessian": kernel,
    });
    Ok(out)
}

fn peter_weyl(ctx: &Context) -> Result<TaskOutcome, CliError> {
    let mesh = Mesh::su2_euler([48, 48, 48])?;
    let mut out = TaskOutcome::default();
    let mut reports = Vec::new();
    for (n, k, l) in [(1, 0, 0), (2, 1, 0), (3, 0, 2)] {
        let r = field::peter_weyl_check(&mesh, n, k, l)?;
        // A predicted zero has no relative scale; use the smallest nonzero
        // eigenvalue, 1/4, instead.
        let limit = ctx.tol(0.01 * r.predicted.max(0.25));
        out.assertions.push(Assertion::le(
            format!("(n, k) = ({n}, {k}): |quotient - (n-2k)^2/4|"),
            r.abs_err,
            limit,
        ));
        reports.push(r);
    }
    out.results = Value::Array(reports.iter().map(to_json).collect::<Result<_, _>>()?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn criteria_lists() {
        let p = |s: &str| {
            Params::new(
                Command::Suite,
                [("criteria".to_string(), toml::Value::String(s.into()))].into(),
            )
            .unwrap()
        };
        assert_eq!(SuiteTask::from_params(&p("all")).unwrap().criteria.len(), 10);
        assert_eq!(SuiteTask::from_params(&p("3, 1-2,2")).unwrap().criteria, vec![1, 2, 3]);
        for bad in ["0", "11", "4-2", "x"] {
            assert!(matches!(SuiteTask::from_params(&p(bad)), Err(CliError::Config(_))));
        }
    }

    #[test]
    fn symplectic_fields_are_in_the_kernel() {
        let id = DiscreteMap::torus_identity(Arc::new(Mesh::unit_torus(2, 8).unwrap())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = id
            .hessian_quadratic(&symplectic_field(&id, &mut rng), criticality_threshold(id.mesh()))
            .unwrap();
        assert!(h.total.abs() <= 1e-10);
    }

    #[test]
    fn merged_names_carry_the_criterion() {
        let r = run_criterion(2, &Context::default());
        assert!(r.passed(), "{}", r.line());
        let m = merge(&[r]);
        assert!(m.assertions.iter().all(|a| a.name.starts_with("criterion 2: ")));
        assert_eq!(m.results["criteria"][0]["id"], 2);
    }
}
