use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fh_cli::config::{Command, ExperimentConfig, Overrides};
use fh_cli::{run, write_error};

#[derive(Debug, Parser)]
#[command(
    name = "fh-verify",
    version,
    about = "Numerical checks for the strong-coupling Faddeev-Hopf energy"
)]
struct Cli {
    /// Flat TOML file of parameters; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies every tolerance.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Hessian block spectra of the Hopf map.
    Spectrum {
        #[arg(long)]
        n_min: Option<i64>,
        #[arg(long)]
        n_max: Option<i64>,
        /// L_phi or A_block.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Ward block spectra over a coupling grid.
    Ward {
        #[arg(long)]
        alpha_min: Option<f64>,
        #[arg(long)]
        alpha_max: Option<f64>,
        #[arg(long)]
        points: Option<i64>,
    },
    /// Bisection for the Ward stability threshold.
    Threshold {
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Energies of the reference maps.
    Energy {
        #[command(flatten)]
        maps: MapArgs,
    },
    /// Euler-Lagrange residuals under one grid refinement.
    Residual {
        #[command(flatten)]
        maps: MapArgs,
    },
    /// Topological lower bounds on random maps.
    Bounds {
        #[arg(long)]
        maps_2d: Option<i64>,
        #[arg(long)]
        maps_4d: Option<i64>,
        #[arg(long)]
        size_2d: Option<i64>,
        #[arg(long)]
        size_4d: Option<i64>,
    },
    /// Hodge Laplacian spectra on flat tori.
    Laplacian {
        #[arg(long)]
        dim: Option<i64>,
        #[arg(long)]
        size: Option<i64>,
        #[arg(long)]
        degree: Option<i64>,
    },
    /// Symmetry-reduced profile equation.
    Ode {
        /// Energy of the glued solution.
        #[arg(long)]
        glued: bool,
        /// Integrator against the closed-form profile.
        #[arg(long)]
        integrate: bool,
        #[arg(long)]
        t_small: Option<f64>,
        #[arg(long)]
        t_large: Option<f64>,
        #[arg(long)]
        points: Option<i64>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Energy gradient flow from a random map.
    Flow {
        /// s2 or t2.
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        size: Option<i64>,
        #[arg(long)]
        steps: Option<i64>,
        #[arg(long)]
        dt: Option<f64>,
    },
    /// The full acceptance battery.
    Suite {
        /// `all` or a list such as `1,4-6`.
        #[arg(long)]
        criteria: Option<String>,
    },
}

#[derive(Debug, clap::Args)]
struct MapArgs {
    /// all, or a comma list of identity_t2, linear_t2, hopf, product.
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    torus_size: Option<i64>,
    #[arg(long)]
    hopf_size: Option<i64>,
    #[arg(long)]
    product_size: Option<i64>,
}

#[derive(Default)]
struct Builder(BTreeMap<String, toml::Value>);

impl Builder {
    fn put(mut self, key: &str, value: Option<impl Into<toml::Value>>) -> Self {
        if let Some(v) = value {
            self.0.insert(key.into(), v.into());
        }
        self
    }

    fn flag(self, key: &str, on: bool) -> Self {
        self.put(key, on.then_some(true))
    }

    fn maps(self, m: MapArgs) -> Self {
        self.put("map", m.map)
            .put("torus_size", m.torus_size)
            .put("hopf_size", m.hopf_size)
            .put("product_size", m.product_size)
    }
}

fn split(cmd: Cmd) -> (Command, BTreeMap<String, toml::Value>) {
    let b = Builder::default();
    let (c, b) = match cmd {
        Cmd::Spectrum { n_min, n_max, kind } => (
            Command::Spectrum,
            b.put("n_min", n_min).put("n_max", n_max).put("kind", kind),
        ),
        Cmd::Ward {
            alpha_min,
            alpha_max,
            points,
        } => (
            Command::Ward,
            b.put("alpha_min", alpha_min)
                .put("alpha_max", alpha_max)
                .put("points", points),
        ),
        Cmd::Threshold { lo, hi, tol } => (Command::Threshold, b.put("lo", lo).put("hi", hi).put("tol", tol)),
        Cmd::Energy { maps } => (Command::Energy, b.maps(maps)),
        Cmd::Residual { maps } => (Command::Residual, b.maps(maps)),
        Cmd::Bounds {
            maps_2d,
            maps_4d,
            size_2d,
            size_4d,
        } => (
            Command::Bounds,
            b.put("maps_2d", maps_2d)
                .put("maps_4d", maps_4d)
                .put("size_2d", size_2d)
                .put("size_4d", size_4d),
        ),
        Cmd::Laplacian { dim, size, degree } => (
            Command::Laplacian,
            b.put("dim", dim).put("size", size).put("degree", degree),
        ),
        Cmd::Ode {
            glued,
            integrate,
            t_small,
            t_large,
            points,
            h,
            t_end,
        } => (
            Command::Ode,
            b.flag("glued", glued)
                .flag("integrate", integrate)
                .put("t_small", t_small)
                .put("t_large", t_large)
                .put("points", points)
                .put("h", h)
                .put("t_end", t_end),
        ),
        Cmd::Flow {
            target,
            size,
            steps,
            dt,
        } => (
            Command::Flow,
            b.put("target", target)
                .put("size", size)
                .put("steps", steps)
                .put("dt", dt),
        ),
        Cmd::Suite { criteria } => (Command::Suite, b.put("criteria", criteria)),
    };
    (c, b.0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, params) = match cli.command {
        Some(cmd) => {
            let (c, p) = split(cmd);
            (Some(c), p)
        }
        None => (None, BTreeMap::new()),
    };
    let out = cli.out.clone();
    let flags = Overrides {
        command,
        seed: cli.seed,
        tolerance_scale: cli.tolerance_scale,
        threads: cli.threads,
        out: cli.out,
        params,
    };
    let result = ExperimentConfig::resolve(cli.config.as_deref(), flags).and_then(|cfg| {
        let r = run(&cfg);
        if let Err(e) = &r {
            let _ = write_error(&cfg.out, Some(cfg.command), e);
        }
        r
    });
    match result {
        Ok(report) => {
            for line in &report.log {
                println!("{line}");
            }
            ExitCode::from(report.exit_code as u8)
        }
        Err(e) => {
            eprintln!("fh-verify: {e}");
            if let (Some(dir), true) = (out, matches!(e, fh_cli::error::CliError::Config(_))) {
                let _ = write_error(&dir, command, &e);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
