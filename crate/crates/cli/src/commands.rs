//! Subcommand handlers. Every option resolves as flag, then config key of the
//! same name (dashes as underscores), then default.

use std::path::Path;

use bgeo_core::connection::{integrate_geodesic, intrinsic_distance, Terminal, DEFAULT_CHART_RADIUS};
use bgeo_core::elliptic::{self, make_lattice_with_guard};
use bgeo_core::kernels::{
    build_gram_kernel, gram_kernel_eval, kernel_eval, AnnulusRepr, DomainDescriptor, KernelModel, PolarizedPoint,
};
use bgeo_core::linalg::{c, CVec};
use bgeo_core::metric::{christoffel_at, metric_at};
use bgeo_core::representative::{exph_with, ExphMethod, RepCoordinates};
use bgeo_core::zeros::{annulus_roots, pole_probe, product_gap_search, variety_locus, VarietyKind};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use crate::complex::parse_cvec;
use crate::config::{parse_domain, ConfigFile, ToleranceFlags, Tolerances, DEFAULT_SEED};
use crate::error::{CliError, CliResult};
use crate::output::{cj, complex_columns, mj, push_complex, vj, OutputFormat, Report, Table};
use crate::suites::{parse_suites, run_verify_suite, SuiteContext};
use crate::{Cli, Command, DomainArg, EmitArgs, Kind, KernelMode, Method};

const DEFAULT_GRID: usize = 101;
const DEFAULT_PRODUCT_GAP_RADII: [f64; 3] = [0.01, 0.02, 0.05];

pub struct Ctx {
    pub cfg: ConfigFile,
    pub tol: Tolerances,
    pub seed: u64,
    pub output: OutputFormat,
}

impl Ctx {
    pub fn new(cli: &Cli) -> CliResult<Self> {
        let g = &cli.global;
        let cfg = ConfigFile::load(g.config.as_deref())?;
        let flags = ToleranceFlags {
            ode_tol: g.ode_tol,
            newton_tol: g.newton_tol,
            fd_step: g.fd_step,
            pole_guard: g.pole_guard,
            kernel_floor: g.kernel_floor,
            finite_differences: g.finite_differences,
        };
        let tol = Tolerances::resolve(&flags, &cfg)?;
        let seed = match g.seed {
            Some(s) => s,
            None => cfg.get("seed")?.unwrap_or(DEFAULT_SEED),
        };
        let output = match g.output {
            Some(o) => o,
            None => cfg.get("output")?.unwrap_or_default(),
        };
        Ok(Ctx { cfg, tol, seed, output })
    }

    fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.cfg.get(key),
        }
    }

    fn pick_or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    fn cvec(&self, flag: &Option<String>, key: &str) -> CliResult<Option<CVec>> {
        let v = match flag {
            Some(s) => Some(parse_cvec(s).map_err(|e| CliError::Usage(format!("--{}: {e}", key.replace('_', "-"))))?),
            None => self.cfg.cvec(key)?,
        };
        Ok(v.map(|v| CVec::from_vec(v)))
    }

    fn need_cvec(&self, flag: &Option<String>, key: &str, n: usize) -> CliResult<CVec> {
        let v = self
            .cvec(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing --{}", key.replace('_', "-"))))?;
        if v.len() != n {
            return Err(CliError::Usage(format!("--{key} has {} components, the domain needs {n}", v.len())));
        }
        Ok(v)
    }

    fn domain(&self, arg: &DomainArg) -> CliResult<DomainDescriptor> {
        self.domain_opt(arg)?.ok_or_else(|| CliError::Usage("missing --domain".into()))
    }

    fn domain_opt(&self, arg: &DomainArg) -> CliResult<Option<DomainDescriptor>> {
        match &arg.domain {
            Some(s) => parse_domain(s).map(Some).map_err(CliError::Usage),
            None => {
                let d = self.cfg.domain("domain")?;
                if let Some(d) = &d {
                    d.validate()?;
                }
                Ok(d)
            }
        }
    }

    fn model(&self, d: &DomainDescriptor) -> CliResult<KernelModel> {
        self.tol.model(d)
    }

    fn header(&self, command: &str) -> Value {
        json!({"command": command, "seed": self.seed, "tolerances": self.tol})
    }
}

fn inside(d: &DomainDescriptor, v: &CVec, what: &str) -> CliResult<()> {
    if d.contains(v.as_slice()) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} is not in {}", d.name())))
    }
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Value::Object(a), Value::Object(b)) = (&mut a, b) {
        a.extend(b);
    }
    a
}

pub fn run(cli: &Cli) -> CliResult<(Report, OutputFormat)> {
    let ctx = Ctx::new(cli)?;
    let report = match &cli.command {
        Command::Elliptic { r, u } => elliptic_cmd(&ctx, *r, u)?,
        Command::Kernel { domain, z, wbar, mode, degree_cap, quad_resolution, emit } => {
            kernel_cmd(&ctx, domain, z, wbar, *mode, *degree_cap, *quad_resolution, emit)?
        }
        Command::Metric { domain, z, wbar, emit } => metric_cmd(&ctx, domain, z, wbar, emit)?,
        Command::Christoffel { domain, z, p } => christoffel_cmd(&ctx, domain, z, p)?,
        Command::Rep { domain, p, z, normalized, emit } => rep_cmd(&ctx, domain, p, z, *normalized, emit)?,
        Command::Exph { domain, p, zeta, method, normalized } => exph_cmd(&ctx, domain, p, zeta, *method, *normalized)?,
        Command::Geodesic { domain, p, q0, v0, t_max, emit } => {
            geodesic_cmd(&ctx, domain, p, q0, v0, *t_max, emit.as_deref())?
        }
        Command::Distance { domain, p, x, y, resolution, chart_radius } => {
            distance_cmd(&ctx, domain, p, x, y, *resolution, *chart_radius)?
        }
        Command::Zeros { domain, p, kind, grid } => zeros_cmd(&ctx, domain, p, *kind, *grid)?,
        Command::AnnulusRoots { r } => annulus_roots_cmd(&ctx, *r)?,
        Command::ProductGap { r, p, grid } => product_gap_cmd(&ctx, r.clone(), *p, *grid)?,
        Command::PoleProbe { domain, p, grid } => pole_probe_cmd(&ctx, domain, p, *grid)?,
        Command::Verify { suite, domain, r } => verify_cmd(&ctx, suite.clone(), domain, *r)?,
    };
    Ok((report, ctx.output))
}

fn elliptic_cmd(ctx: &Ctx, r: Option<f64>, u: &Option<String>) -> CliResult<Report> {
    let r: f64 = ctx.pick(r, "r")?.ok_or_else(|| CliError::Usage("missing --r".into()))?;
    let u = ctx.need_cvec(u, "u", 1)?[0];
    let lat = make_lattice_with_guard(r, ctx.tol.pole_guard)?;
    let v = elliptic::evaluate(&lat, u)?;
    let json = merge(
        ctx.header("elliptic"),
        json!({
            "r": r,
            "u": cj(u),
            "wp": cj(v.wp),
            "wp_prime": cj(v.wp_prime),
            "zeta": cj(v.zeta),
            "eta1": cj(lat.eta1),
            "legendre_residual": lat.legendre_residual(),
            "lattice": {
                "omega1": lat.omega1,
                "omega2": cj(lat.omega2),
                "eta2": cj(lat.eta2),
                "nome_q": lat.nome_q,
                "g2": cj(lat.g2),
                "g3": cj(lat.g3),
            },
        }),
    );
    let mut header = vec!["r".to_string()];
    for stem in ["u", "wp", "wp_prime", "zeta", "eta1"] {
        header.extend(complex_columns(stem, 1));
    }
    header.push("legendre_residual".into());
    let mut t = Table::new(header);
    let mut row = vec![r];
    push_complex(&mut row, &[u, v.wp, v.wp_prime, v.zeta, lat.eta1]);
    row.push(lat.legendre_residual());
    t.rows.push(row);
    Ok(Report::ok(json).with_table(t))
}

/// Row-major grid on `[-1,1]²` over the first coordinate, other coordinates
/// held at `base`. Cells outside the domain yield `None`.
fn grid_cells<F>(d: &DomainDescriptor, base: &CVec, grid: usize, f: F) -> CliResult<Vec<(f64, f64, Option<Vec<f64>>)>>
where
    F: Fn(&CVec) -> Option<Vec<f64>> + Sync,
{
    if grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let coord = |i: usize| -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
    Ok((0..grid * grid)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (coord(k % grid), coord(k / grid));
            let mut z = base.clone();
            z[0] = c(x, y);
            let v = if d.contains(z.as_slice()) { f(&z) } else { None };
            (x, y, v)
        })
        .collect())
}

fn emit_grid<F>(
    ctx: &Ctx,
    d: &DomainDescriptor,
    base: &CVec,
    emit: &EmitArgs,
    columns: Vec<String>,
    f: F,
) -> CliResult<Option<Value>>
where
    F: Fn(&CVec) -> Option<Vec<f64>> + Sync,
{
    let Some(path) = &emit.emit else { return Ok(None) };
    let grid = ctx.pick_or(emit.grid, "grid", DEFAULT_GRID)?;
    let width = columns.len();
    let cells = grid_cells(d, base, grid, f)?;
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend(columns);
    let mut t = Table::new(header);
    let mut inside = 0;
    for (x, y, v) in cells {
        let mut row = vec![x, y];
        match v {
            Some(v) => {
                inside += 1;
                row.extend(v);
            }
            None => row.extend(std::iter::repeat_n(f64::NAN, width)),
        }
        t.rows.push(row);
    }
    t.write_to(path)?;
    Ok(Some(json!({"path": path.display().to_string(), "grid": grid, "rows": t.rows.len(), "inside": inside})))
}

fn base_point(ctx: &Ctx, flag: &Option<String>, key: &str, d: &DomainDescriptor) -> CliResult<CVec> {
    match ctx.cvec(flag, key)? {
        Some(v) if v.len() == d.dim() => Ok(v),
        Some(v) => Err(CliError::Usage(format!("--{key} has {} components, the domain needs {}", v.len(), d.dim()))),
        None => Ok(d.reference_point()),
    }
}

#[allow(clippy::too_many_arguments)]
fn kernel_cmd(
    ctx: &Ctx,
    domain: &DomainArg,
    z: &Option<String>,
    wbar: &Option<String>,
    mode: Option<KernelMode>,
    degree_cap: Option<usize>,
    quad: Option<usize>,
    emit: &EmitArgs,
) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let mode = ctx.pick_or(mode, "mode", KernelMode::Weierstrass)?;
    let wbar = ctx.need_cvec(wbar, "wbar", n)?;
    let mut model = ctx.model(&d)?;
    if mode == KernelMode::Series {
        model = model.with_annulus_repr(AnnulusRepr::Laurent);
    }
    let gram = match mode {
        KernelMode::Gram => {
            let cap = ctx.pick_or(degree_cap, "degree_cap", 30)?;
            let quad = ctx.pick_or(quad, "quad_resolution", 40)?;
            Some(build_gram_kernel(&d, cap, quad)?)
        }
        _ => None,
    };
    let eval = |z: &CVec| -> CliResult<Complex64> {
        let pt = PolarizedPoint::new(z.clone(), wbar.clone());
        Ok(match &gram {
            Some(gk) => gram_kernel_eval(gk, &pt)?,
            None => kernel_eval(&model, &pt)?,
        })
    };
    let mut json = merge(ctx.header("kernel"), json!({"domain": d, "wbar": vj(&wbar), "mode": format!("{mode:?}").to_lowercase()}));
    let mut table = None;
    if let Some(zv) = ctx.cvec(z, "z")? {
        if zv.len() != n {
            return Err(CliError::Usage(format!("--z has {} components, the domain needs {n}", zv.len())));
        }
        let k = eval(&zv)?;
        json = merge(json, json!({"z": vj(&zv), "value": cj(k), "modulus": k.norm()}));
        let mut header = complex_columns("z", n);
        header.extend(complex_columns("k", 1));
        let mut t = Table::new(header);
        let mut row = Vec::new();
        push_complex(&mut row, zv.as_slice());
        push_complex(&mut row, &[k]);
        t.rows.push(row);
        table = Some(t);
    } else if emit.emit.is_none() {
        return Err(CliError::Usage("missing --z (or --emit for a grid)".into()));
    }
    let base = base_point(ctx, z, "z", &d)?;
    let cols = vec!["k_re".into(), "k_im".into(), "k_abs".into()];
    if let Some(e) = emit_grid(ctx, &d, &base, emit, cols, |z| eval(z).ok().map(|k| vec![k.re, k.im, k.norm()]))? {
        json = merge(json, json!({"emitted": e}));
    }
    let mut rep = Report::ok(json);
    rep.table = table;
    Ok(rep)
}

fn metric_cmd(ctx: &Ctx, domain: &DomainArg, z: &Option<String>, wbar: &Option<String>, emit: &EmitArgs) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let wbar = ctx.need_cvec(wbar, "wbar", n)?;
    let model = ctx.model(&d)?;
    let mut json = merge(ctx.header("metric"), json!({"domain": d, "wbar": vj(&wbar)}));
    let mut table = None;
    if let Some(zv) = ctx.cvec(z, "z")? {
        if zv.len() != n {
            return Err(CliError::Usage(format!("--z has {} components, the domain needs {n}", zv.len())));
        }
        let m = metric_at(&model, &PolarizedPoint::new(zv.clone(), wbar.clone()))?;
        let pd = m.is_positive_definite();
        json = merge(json, json!({"z": vj(&zv), "g": mj(&m.g), "det": cj(m.det_g), "positive_definite": pd}));
        let mut header = Vec::new();
        for j in 0..n {
            for k in 0..n {
                header.extend(complex_columns(&format!("g{}{}", j + 1, k + 1), 1));
            }
        }
        header.extend(complex_columns("det", 1));
        let mut t = Table::new(header);
        let mut row = Vec::new();
        for j in 0..n {
            for k in 0..n {
                push_complex(&mut row, &[m.g[(j, k)]]);
            }
        }
        push_complex(&mut row, &[m.det_g]);
        t.rows.push(row);
        table = Some(t);
    } else if emit.emit.is_none() {
        return Err(CliError::Usage("missing --z (or --emit for a grid)".into()));
    }
    let base = base_point(ctx, z, "z", &d)?;
    let cols = vec!["det_re".into(), "det_im".into()];
    let f = |z: &CVec| {
        metric_at(&model, &PolarizedPoint::new(z.clone(), wbar.clone())).ok().map(|m| vec![m.det_g.re, m.det_g.im])
    };
    if let Some(e) = emit_grid(ctx, &d, &base, emit, cols, f)? {
        json = merge(json, json!({"emitted": e}));
    }
    let mut rep = Report::ok(json);
    rep.table = table;
    Ok(rep)
}

fn christoffel_cmd(ctx: &Ctx, domain: &DomainArg, z: &Option<String>, p: &Option<String>) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let z = ctx.need_cvec(z, "z", n)?;
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let model = ctx.model(&d)?;
    let g = christoffel_at(&model, &PolarizedPoint::frozen(&z, &p))?;
    let mut t = Table::new(vec!["j".into(), "k".into(), "l".into(), "gamma_re".into(), "gamma_im".into()]);
    let mut gamma = Vec::new();
    for j in 0..n {
        let mut gj = Vec::new();
        for k in 0..n {
            let mut gk = Vec::new();
            for l in 0..n {
                let v = g.get(j, k, l);
                gk.push(cj(v));
                t.rows.push(vec![(j + 1) as f64, (k + 1) as f64, (l + 1) as f64, v.re, v.im]);
            }
            gj.push(Value::Array(gk));
        }
        gamma.push(Value::Array(gj));
    }
    let json = merge(
        ctx.header("christoffel"),
        json!({"domain": d, "z": vj(&z), "p": vj(&p), "gamma": gamma, "max_asymmetry": g.max_asymmetry()}),
    );
    Ok(Report::ok(json).with_table(t))
}

fn rep_cmd(
    ctx: &Ctx,
    domain: &DomainArg,
    p: &Option<String>,
    z: &Option<String>,
    normalized: bool,
    emit: &EmitArgs,
) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let normalized = normalized || ctx.cfg.get::<bool>("normalized")?.unwrap_or(false);
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let model = ctx.model(&d)?;
    let rc = RepCoordinates::new(&model, &p, normalized)?;
    let mut json = merge(ctx.header("rep"), json!({"domain": d, "p": vj(&p), "normalized": normalized}));
    let mut table = None;
    if let Some(zv) = ctx.cvec(z, "z")? {
        if zv.len() != n {
            return Err(CliError::Usage(format!("--z has {} components, the domain needs {n}", zv.len())));
        }
        inside(&d, &zv, "z")?;
        let zeta = rc.eval(&zv)?;
        json = merge(json, json!({"z": vj(&zv), "value": vj(&zeta)}));
        let mut header = complex_columns("z", n);
        header.extend(complex_columns("zeta", n));
        let mut t = Table::new(header);
        let mut row = Vec::new();
        push_complex(&mut row, zv.as_slice());
        push_complex(&mut row, zeta.as_slice());
        t.rows.push(row);
        table = Some(t);
    } else if emit.emit.is_none() {
        return Err(CliError::Usage("missing --z (or --emit for a grid)".into()));
    }
    let base = base_point(ctx, z, "z", &d)?;
    let f = |z: &CVec| {
        rc.eval(z).ok().map(|zeta| {
            let mut row = Vec::new();
            push_complex(&mut row, zeta.as_slice());
            row
        })
    };
    if let Some(e) = emit_grid(ctx, &d, &base, emit, complex_columns("zeta", n), f)? {
        json = merge(json, json!({"emitted": e}));
    }
    let mut rep = Report::ok(json);
    rep.table = table;
    Ok(rep)
}

fn exph_cmd(
    ctx: &Ctx,
    domain: &DomainArg,
    p: &Option<String>,
    zeta: &Option<String>,
    method: Option<Method>,
    normalized: bool,
) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let normalized = normalized || ctx.cfg.get::<bool>("normalized")?.unwrap_or(false);
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let zeta = ctx.need_cvec(zeta, "zeta", n)?;
    let method = match ctx.pick_or(method, "method", Method::Newton)? {
        Method::Newton => ExphMethod::Newton,
        Method::Ode => ExphMethod::Ode,
    };
    let model = ctx.model(&d)?;
    let ex = exph_with(&model, &p, &zeta, method, normalized, ctx.tol.newton_tol)?;
    let json = merge(
        ctx.header("exph"),
        json!({
            "domain": d,
            "p": vj(&p),
            "zeta": vj(&zeta),
            "method": method,
            "normalized": normalized,
            "value": vj(&ex.z),
            "converged": ex.converged,
            "residual": ex.residual,
            "iterations": ex.iterations,
        }),
    );
    let mut header = complex_columns("zeta", n);
    header.extend(complex_columns("z", n));
    header.extend(["residual".to_string(), "iterations".to_string(), "converged".to_string()]);
    let mut t = Table::new(header);
    let mut row = Vec::new();
    push_complex(&mut row, zeta.as_slice());
    push_complex(&mut row, ex.z.as_slice());
    row.extend([ex.residual, ex.iterations as f64, ex.converged as u8 as f64]);
    t.rows.push(row);
    let mut rep = Report::ok(json).with_table(t);
    rep.passed = ex.converged;
    Ok(rep)
}

fn geodesic_cmd(
    ctx: &Ctx,
    domain: &DomainArg,
    p: &Option<String>,
    q0: &Option<String>,
    v0: &Option<String>,
    t_max: Option<f64>,
    emit: Option<&Path>,
) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let q0 = match ctx.cvec(q0, "q0")? {
        Some(q) if q.len() == n => q,
        Some(q) => return Err(CliError::Usage(format!("--q0 has {} components, the domain needs {n}", q.len()))),
        None => p.clone(),
    };
    inside(&d, &q0, "q0")?;
    let v0 = ctx.need_cvec(v0, "v0", n)?;
    let t_max = ctx.pick_or(t_max, "t_max", 1.0)?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Usage(format!("--t-max must be positive, got {t_max}")));
    }
    let model = ctx.model(&d)?;
    let tr = integrate_geodesic(&model, &p, &q0, &v0, t_max, &ctx.tol.geodesic_options())?;
    let mut header = vec!["t".to_string()];
    header.extend(complex_columns("z", n));
    header.extend(complex_columns("v", n));
    let mut t = Table::new(header);
    for s in &tr.samples {
        let mut row = vec![s.t];
        push_complex(&mut row, s.z.as_slice());
        push_complex(&mut row, s.v.as_slice());
        t.rows.push(row);
    }
    let last = tr.last();
    let mut json = merge(
        ctx.header("geodesic"),
        json!({
            "domain": d,
            "p": vj(&p),
            "q0": vj(&q0),
            "v0": vj(&v0),
            "t_max": t_max,
            "terminal": tr.terminal,
            "completed": tr.terminal == Terminal::Completed,
            "steps": tr.samples.len() - 1,
            "max_error_estimate": tr.max_error_estimate,
            "final": {"t": last.t, "z": vj(&last.z), "v": vj(&last.v)},
        }),
    );
    if let Some(path) = emit {
        t.write_to(path)?;
        json = merge(json, json!({"emitted": {"path": path.display().to_string(), "rows": t.rows.len()}}));
    }
    Ok(Report::ok(json).with_table(t))
}

fn distance_cmd(
    ctx: &Ctx,
    domain: &DomainArg,
    p: &Option<String>,
    x: &Option<String>,
    y: &Option<String>,
    resolution: Option<usize>,
    chart_radius: Option<f64>,
) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let x = ctx.need_cvec(x, "x", n)?;
    let y = ctx.need_cvec(y, "y", n)?;
    inside(&d, &x, "x")?;
    inside(&d, &y, "y")?;
    let resolution = ctx.pick_or(resolution, "resolution", 17)?;
    let radius = ctx.pick_or(chart_radius, "chart_radius", DEFAULT_CHART_RADIUS)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Usage(format!("--chart-radius must be positive, got {radius}")));
    }
    let model = ctx.model(&d)?;
    let res = intrinsic_distance(&model, &p, &x, &y, resolution, radius)?;
    let json = merge(
        ctx.header("distance"),
        merge(json!({"domain": d, "p": vj(&p), "x": vj(&x), "y": vj(&y)}), serde_json::to_value(&res).unwrap_or_default()),
    );
    let mut t = Table::new(vec!["distance".into(), "delta".into(), "nodes".into(), "edges".into()]);
    t.rows.push(vec![res.distance, res.delta, res.nodes as f64, res.edges as f64]);
    Ok(Report::ok(json).with_table(t))
}

fn zeros_cmd(ctx: &Ctx, domain: &DomainArg, p: &Option<String>, kind: Option<Kind>, grid: Option<usize>) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let kind = match ctx.pick_or(kind, "kind", Kind::Z0)? {
        Kind::Z0 => VarietyKind::Z0,
        Kind::Z1 => VarietyKind::Z1,
        Kind::Zhat1 => VarietyKind::Zhat1,
    };
    let grid = ctx.pick_or(grid, "grid", if n == 1 { 120 } else { 10 })?;
    if grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let model = ctx.model(&d)?;
    let probe = variety_locus(&model, &p, kind, grid)?;
    let mut header = complex_columns("z", n);
    header.push("defining_value".into());
    let mut t = Table::new(header);
    for (z, v) in probe.hits.iter().zip(&probe.defining_values) {
        let mut row = Vec::new();
        push_complex(&mut row, z.as_slice());
        row.push(*v);
        t.rows.push(row);
    }
    let json = merge(
        ctx.header("zeros"),
        json!({
            "domain": d,
            "p": vj(&p),
            "kind": kind,
            "grid": grid,
            "count": probe.hits.len(),
            "hits": probe.hits.iter().map(vj).collect::<Vec<_>>(),
            "defining_values": probe.defining_values,
            "scale": probe.scale,
        }),
    );
    Ok(Report::ok(json).with_table(t))
}

fn annulus_roots_cmd(ctx: &Ctx, r: Option<f64>) -> CliResult<Report> {
    let r: f64 = ctx.pick(r, "r")?.ok_or_else(|| CliError::Usage("missing --r".into()))?;
    DomainDescriptor::Annulus { r }.validate()?;
    let ar = annulus_roots(r)?;
    let json = merge(ctx.header("annulus-roots"), serde_json::to_value(&ar).unwrap_or_default());
    let mut t = Table::new(
        ["r", "lambda1", "lambda2", "residual1", "residual2", "h_minus_1", "h_minus_r", "h_minus_r2"]
            .map(String::from)
            .to_vec(),
    );
    let [a, b, cc] = ar.sign_values;
    t.rows.push(vec![r, ar.lambda1, ar.lambda2, ar.residuals[0], ar.residuals[1], a, b, cc]);
    Ok(Report::ok(json).with_table(t))
}

fn product_gap_cmd(ctx: &Ctx, r: Option<Vec<f64>>, p: Option<f64>, grid: Option<usize>) -> CliResult<Report> {
    let radii = match r {
        Some(r) => r,
        None => match ctx.cfg.get::<Value>("r")? {
            None => DEFAULT_PRODUCT_GAP_RADII.to_vec(),
            Some(Value::Number(x)) => vec![x.as_f64().unwrap_or(f64::NAN)],
            Some(v) => serde_json::from_value(v).map_err(|e| CliError::Usage(format!("config key \"r\": {e}")))?,
        },
    };
    let p = ctx.pick_or(p, "p", 0.5)?;
    let grid = ctx.pick_or(grid, "grid", 120)?;
    let mut reports = Vec::new();
    let mut t = Table::new(["r", "z_re", "z_im", "metric_modulus", "kernel_ratio"].map(String::from).to_vec());
    for &r in &radii {
        DomainDescriptor::Annulus { r }.validate()?;
        let rep = product_gap_search(r, p, grid)?;
        for w in &rep.witnesses {
            t.rows.push(vec![r, w.z.re, w.z.im, w.metric_modulus, w.kernel_ratio]);
        }
        reports.push(json!({
            "r": r,
            "found": rep.found,
            "witnesses": rep.witnesses.iter().map(|w| json!({
                "z": cj(w.z),
                "metric_modulus": w.metric_modulus,
                "kernel_ratio": w.kernel_ratio,
            })).collect::<Vec<_>>(),
        }));
    }
    let json = merge(ctx.header("product-gap"), json!({"p": p, "grid": grid, "searches": reports}));
    Ok(Report::ok(json).with_table(t))
}

fn pole_probe_cmd(ctx: &Ctx, domain: &DomainArg, p: &Option<String>, grid: Option<usize>) -> CliResult<Report> {
    let d = ctx.domain(domain)?;
    let n = d.dim();
    let p = ctx.need_cvec(p, "p", n)?;
    inside(&d, &p, "p")?;
    let grid = ctx.pick_or(grid, "grid", if n == 1 { 60 } else { 8 })?;
    if grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let model = ctx.model(&d)?;
    let rep = pole_probe(&model, &p, grid)?;
    let mut header = complex_columns("z1_", n);
    header.extend(complex_columns("z2_", n));
    header.push("zeta_gap".into());
    let mut t = Table::new(header);
    for cp in &rep.collisions {
        let mut row = Vec::new();
        push_complex(&mut row, cp.z1.as_slice());
        push_complex(&mut row, cp.z2.as_slice());
        row.push(cp.zeta_gap);
        t.rows.push(row);
    }
    let json = merge(
        ctx.header("pole-probe"),
        json!({
            "domain": d,
            "p": vj(&p),
            "grid": grid,
            "injective_on_sample": rep.injective_on_sample,
            "sampled": rep.sampled,
            "resolution": rep.resolution,
            "summary": rep.summary,
            "collisions": rep.collisions.iter().map(|cp| json!({
                "z1": vj(&cp.z1),
                "z2": vj(&cp.z2),
                "zeta_gap": cp.zeta_gap,
            })).collect::<Vec<_>>(),
        }),
    );
    Ok(Report::ok(json).with_table(t))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn verify_cmd(ctx: &Ctx, suite: Option<String>, domain: &DomainArg, r: Option<f64>) -> CliResult<Report> {
    let suites = parse_suites(&ctx.pick_or(suite, "suite", "all".to_string())?)?;
    let sctx = SuiteContext { seed: ctx.seed, domain: ctx.domain_opt(domain)?, r: ctx.pick(r, "r")?, tol: ctx.tol };
    let report = run_verify_suite(&sctx, &suites)?;
    let mut csv = String::from("suite,name,measured,threshold,comparison,passed\n");
    for c in &report.checks {
        csv.push_str(&format!(
            "{},{},{:.16e},{:.16e},{},{}\n",
            csv_field(&c.suite),
            csv_field(&c.name),
            c.measured,
            c.threshold,
            serde_json::to_value(c.comparison).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            c.passed
        ));
    }
    let passed = report.passed;
    let json = merge(
        json!({"command": "verify"}),
        serde_json::to_value(&report).map_err(|e| CliError::Failure(e.to_string()))?,
    );
    let mut rep = Report::ok(json);
    rep.csv_text = Some(csv);
    rep.passed = passed;
    Ok(rep)
}
