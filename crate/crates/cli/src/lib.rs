//! The `bgeo` command-line front end.

pub mod commands;
pub mod complex;
pub mod config;
pub mod error;
pub mod output;
pub mod suites;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::output::OutputFormat;

#[derive(Debug, Parser)]
#[command(name = "bgeo", version, about = "Bergman kernel geometry: evaluation, verification and data emission")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum)]
    pub output: Option<OutputFormat>,
    /// Seed for randomized sampling (default 7).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Geodesic integrator absolute and relative tolerance.
    #[arg(long, global = true, value_name = "TOL")]
    pub ode_tol: Option<f64>,
    /// Newton tolerance for the holomorphic exponential.
    #[arg(long, global = true, value_name = "TOL")]
    pub newton_tol: Option<f64>,
    /// Base finite-difference step.
    #[arg(long, global = true, value_name = "H")]
    pub fd_step: Option<f64>,
    /// Distance to a lattice point below which ℘ is refused.
    #[arg(long, global = true, value_name = "EPS")]
    pub pole_guard: Option<f64>,
    /// Relative floor on |K| below which log-derivatives are refused.
    #[arg(long, global = true, value_name = "EPS")]
    pub kernel_floor: Option<f64>,
    /// Differentiate the kernel by finite differences instead of closed forms.
    #[arg(long = "fd", global = true)]
    pub finite_differences: bool,
}

/// A domain descriptor in JSON, e.g. `{"type":"annulus","r":0.1}`.
#[derive(Debug, Clone, Args)]
pub struct DomainArg {
    #[arg(long, value_name = "JSON")]
    pub domain: Option<String>,
}

/// Grid emission shared by kernel, metric and rep.
#[derive(Debug, Clone, Args)]
pub struct EmitArgs {
    /// Write a CSV grid over the first coordinate to this path.
    #[arg(long, value_name = "PATH")]
    pub emit: Option<PathBuf>,
    /// Grid points per axis on [-1,1]².
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    Series,
    Weierstrass,
    Gram,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Weierstrass functions of the annulus lattice.
    Elliptic {
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true, value_name = "COMPLEX")]
        u: Option<String>,
    },
    /// Kernel value K(z, w̄).
    Kernel {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        z: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        wbar: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<KernelMode>,
        #[arg(long)]
        degree_cap: Option<usize>,
        #[arg(long)]
        quad_resolution: Option<usize>,
        #[command(flatten)]
        emit: EmitArgs,
    },
    /// Metric G(z, w̄).
    Metric {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        z: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        wbar: Option<String>,
        #[command(flatten)]
        emit: EmitArgs,
    },
    /// Christoffel symbols at (z, p̄).
    Christoffel {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        z: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
    },
    /// Representative coordinates rep_p(z).
    Rep {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        z: Option<String>,
        #[arg(long)]
        normalized: bool,
        #[command(flatten)]
        emit: EmitArgs,
    },
    /// Holomorphic exponential exph_p(ζ).
    Exph {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        zeta: Option<String>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        #[arg(long)]
        normalized: bool,
    },
    /// Geodesic of the connection at p.
    Geodesic {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        /// Start point (default p).
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        q0: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        v0: Option<String>,
        #[arg(long, alias = "tmax")]
        t_max: Option<f64>,
        /// Write the trace as CSV to this path.
        #[arg(long, value_name = "PATH")]
        emit: Option<PathBuf>,
    },
    /// Grid-graph upper bound on the intrinsic distance.
    Distance {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        x: Option<String>,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        y: Option<String>,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        chart_radius: Option<f64>,
    },
    /// Grid scan for the zero varieties at p.
    Zeros {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Real kernel zeros λ₁, λ₂ of the annulus.
    AnnulusRoots {
        #[arg(long)]
        r: Option<f64>,
    },
    /// Search A_r × D for points of Ẑ₁ outside Z₀.
    ProductGap {
        /// Comma-separated radii (default 0.01,0.02,0.05).
        #[arg(long, value_delimiter = ',')]
        r: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        p: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Sampled injectivity probe of rep_p.
    PoleProbe {
        #[command(flatten)]
        domain: DomainArg,
        #[arg(long, allow_hyphen_values = true, value_name = "CVEC")]
        p: Option<String>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Run verification suites.
    Verify {
        /// Comma-separated suite names or "all".
        #[arg(long)]
        suite: Option<String>,
        /// Restrict domain-sweeping suites to this domain.
        #[command(flatten)]
        domain: DomainArg,
        /// Restrict annulus checks to this inner radius.
        #[arg(long)]
        r: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Z0,
    Z1,
    Zhat1,
}
