//! Dispatch of each command to the library.

use crate::config::{Command, ConfigError, RunConfig};
use crate::output::{num, text, Table};
use besselkit::boundary::{
    boundary_basis, scattering_length, wronskian_at_zero, BoundaryFunctional, RealizationKind, ScatteringLength,
};
use besselkit::jost::{find_jost_zeros, jost, resolvent_apply, JostMethod, PerturbedGreen, Rect};
use besselkit::model::Potential;
use besselkit::solutions::{
    build_p0, build_p_diamond, build_q, build_q0ln, build_u, build_u0n, build_u_bowtie, build_un, build_v, build_w,
    wronskian_constancy, Problem, SolverConfig,
};
use besselkit::specfun::{cal_i_with_deriv, cal_k_with_deriv, cpow};
use besselkit::volterra::GridFunction;
use besselkit::{Error, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Failure of a run.
#[derive(Debug)]
pub enum RunError {
    /// Invalid configuration.
    Config(ConfigError),
    /// Library failure.
    Lib(Error),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Lib(e)
    }
}

type Run<T> = std::result::Result<T, RunError>;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn problem(cfg: &RunConfig, k: C64) -> Run<Problem> {
    Ok(Problem::new(k, cfg.potential.clone(), cfg.solver)?)
}

fn first_k(cfg: &RunConfig) -> C64 {
    cfg.ks[0]
}

/// Runs `cfg.command` and returns its table.
pub fn run(cfg: &RunConfig) -> Run<Table> {
    let mut table = match cfg.command {
        Command::Solve => solve(cfg)?,
        Command::Jost => jost_sweep(cfg)?,
        Command::Spectrum => spectrum(cfg)?,
        Command::Green => green(cfg)?,
        Command::Resolvent => resolvent(cfg)?,
        Command::Boundary => boundary(cfg)?,
        Command::Scatlen => scatlen(cfg)?,
        Command::Selftest => selftest()?,
    };
    let mut meta = vec![
        ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("grid_n".to_string(), cfg.solver.n.to_string()),
    ];
    meta.extend(cfg.raw.pairs().filter(|(k, _)| k.as_str() != "grid_n").map(|(k, v)| (k.clone(), v.clone())));
    meta.append(&mut table.meta);
    table.meta = meta;
    Ok(table)
}

fn grid_rows(table: &mut Table, f: &GridFunction) -> Run<()> {
    for i in 0..f.len() {
        let (v, d) = f.at(i)?;
        table.push(vec![num(f.grid.x[i]), num(v.re), num(v.im), num(d.re), num(d.im)]);
    }
    Ok(())
}

const GRID_COLUMNS: [&str; 5] = ["x", "re", "im", "re_deriv", "im_deriv"];

fn solve(cfg: &RunConfig) -> Run<Table> {
    let pb = problem(cfg, first_k(cfg))?;
    let m = cfg.m;
    let a = cfg.raw.f64_opt("a")?;
    let n = cfg.raw.usize_or("n", 1)?;
    let kind = cfg.raw.get("kind").unwrap_or("u").to_ascii_lowercase();
    let mut table = Table::new(&GRID_COLUMNS);
    let bundle = match kind.as_str() {
        "u" => build_u(&pb, m)?,
        "p0" => build_p0(&pb)?,
        "w" => build_w(&pb, m)?,
        "v" => build_v(&pb, m)?,
        "q" => build_q(&pb, m)?,
        "q0ln" => build_q0ln(&pb)?,
        "ubowtie" => build_u_bowtie(&pb, m, a)?,
        "pdiamond" => build_p_diamond(&pb, a)?,
        "un" => build_un(&pb, n, m)?,
        "u0n" => {
            grid_rows(&mut table, &build_u0n(&pb, n, m)?)?;
            return Ok(table);
        }
        other => return Err(ConfigError(format!("unknown solution kind `{other}`")).into()),
    };
    grid_rows(&mut table, &bundle.data)?;
    table.meta("neumann_terms", bundle.report.terms_used);
    table.meta("neumann_converged", bundle.report.converged);
    for note in &bundle.notes {
        table.meta("note", note);
    }
    for check in &bundle.checks {
        table.meta(format!("check.{}", check.name), format!("{:e} (required {:e}, passed {})", check.value, check.required, check.passed));
    }
    Ok(table)
}

fn jost_method(cfg: &RunConfig) -> Run<JostMethod> {
    Ok(match cfg.raw.get("method").unwrap_or("match").to_ascii_lowercase().as_str() {
        "match" | "wronskian" => JostMethod::WronskianMatch,
        "overlap" => JostMethod::OverlapFormula,
        "zero" | "zero_energy" => JostMethod::ZeroEnergy,
        other => return Err(ConfigError(format!("unknown jost method `{other}`")).into()),
    })
}

fn jost_sweep(cfg: &RunConfig) -> Run<Table> {
    let method = jost_method(cfg)?;
    let results: Vec<Run<_>> = cfg
        .ks
        .par_iter()
        .map(|&k| {
            let pb = problem(cfg, k)?;
            let method = if pb.k.is_zero && method != JostMethod::ZeroEnergy { JostMethod::ZeroEnergy } else { method };
            Ok((k, jost(&pb, cfg.m, method)?))
        })
        .collect();
    let mut table = Table::new(&["k_re", "k_im", "jost_re", "jost_im", "jost_abs", "cross_check_dev"]);
    for r in results {
        let (k, j) = r?;
        table.push(vec![
            num(k.re),
            num(k.im),
            num(j.value.re),
            num(j.value.im),
            num(j.value.norm()),
            j.cross_check_dev.map_or(serde_json::Value::Null, num),
        ]);
    }
    Ok(table)
}

fn spectrum(cfg: &RunConfig) -> Run<Table> {
    let rect = Rect {
        re_min: cfg.raw.f64_or("re_min", 0.05)?,
        re_max: cfg.raw.f64_or("re_max", 5.0)?,
        im_min: cfg.raw.f64_or("im_min", -1.0)?,
        im_max: cfg.raw.f64_or("im_max", 1.0)?,
    };
    if !(rect.re_min > 0.0 && rect.re_max > rect.re_min && rect.im_max > rect.im_min) {
        return Err(ConfigError("spectrum rectangle needs 0 < re_min < re_max and im_min < im_max".into()).into());
    }
    let zeros = find_jost_zeros(&cfg.potential, cfg.m, rect, cfg.solver)?;
    let mut table = Table::new(&["re_k", "im_k", "eigenvalue_re", "eigenvalue_im", "multiplicity", "jost_abs"]);
    for z in zeros {
        let e = z.eigenvalue();
        table.push(vec![num(z.k.re), num(z.k.im), num(e.re), num(e.im), z.multiplicity.into(), num(z.jost_abs)]);
    }
    Ok(table)
}

fn green_realization(cfg: &RunConfig) -> Run<besselkit::jost::Realization> {
    cfg.realization()?
        .green_realization()
        .ok_or_else(|| ConfigError("minimal and maximal realizations have no Green kernel".into()).into())
}

fn green(cfg: &RunConfig) -> Run<Table> {
    let pb = problem(cfg, first_k(cfg))?;
    let g = PerturbedGreen::new(&pb, green_realization(cfg)?)?;
    let xs = cfg.raw.f64_list("x")?.unwrap_or_else(|| vec![0.5, 1.0, 2.0]);
    let ys = cfg.raw.f64_list("y")?.unwrap_or_else(|| xs.clone());
    let mut table = Table::new(&["x", "y", "re", "im"]);
    for &x in &xs {
        for &y in &ys {
            let v = g.eval(x, y)?;
            table.push(vec![num(x), num(y), num(v.re), num(v.im)]);
        }
    }
    Ok(table)
}

fn resolvent(cfg: &RunConfig) -> Run<Table> {
    let pb = problem(cfg, first_k(cfg))?;
    let center = cfg.raw.f64_or("g_center", 1.5)?;
    let width = cfg.raw.f64_or("g_width", 0.5)?;
    if !(width > 0.0) {
        return Err(ConfigError("`g_width` must be positive".into()).into());
    }
    let s = 1.0 / (2.0 * width * width);
    let g = GridFunction::from_fn(pb.grid().clone(), pb.k.k, 0, |x| {
        let e = (-s * (x - center) * (x - center)).exp();
        Ok((c(x * x * e, 0.0), c((2.0 * x - 2.0 * s * x * x * (x - center)) * e, 0.0)))
    })?;
    let (f, residual) = resolvent_apply(&pb, green_realization(cfg)?, &g)?;
    let mut table = Table::new(&GRID_COLUMNS);
    grid_rows(&mut table, &f)?;
    table.meta("residual", format!("{residual:e}"));
    Ok(table)
}

fn boundary(cfg: &RunConfig) -> Run<Table> {
    let pb = problem(cfg, c(0.0, 0.0))?;
    let basis = boundary_basis(cfg.m, &pb)?;
    let mut table = Table::new(&["case", "m_re", "m_im", "first", "second"]);
    table.push(vec![
        text(basis.case.to_string()),
        num(basis.m.re),
        num(basis.m.im),
        text(basis.first.label.clone()),
        text(basis.second.label.clone()),
    ]);
    Ok(table)
}

fn scatlen(cfg: &RunConfig) -> Run<Table> {
    let pb = problem(cfg, c(0.0, 0.0))?;
    let mut table = Table::new(&["a_re", "a_im", "infinite"]);
    match scattering_length(cfg.realization()?, &pb)? {
        ScatteringLength::Finite(a) => table.push(vec![num(a.re), num(a.im), false.into()]),
        ScatteringLength::Infinite => table.push(vec![serde_json::Value::Null, serde_json::Value::Null, true.into()]),
    }
    Ok(table)
}

struct Check {
    name: &'static str,
    error: f64,
    tol: f64,
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Identity suite; every entry is a closed-form identity with its tolerance.
fn identity_checks() -> besselkit::Result<Vec<Check>> {
    let mut out = Vec::new();
    let ms = [c(0.0, 0.0), c(0.3, 0.2), c(0.5, 0.0), c(1.7, -0.4)];
    let zs = [c(0.2, 0.0), c(1.0, 1.0), c(4.0, -2.0), c(35.0, 3.0)];
    let (mut wki, mut wii, mut sym, mut half) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &m in &ms {
        for &z in &zs {
            let (i, id) = cal_i_with_deriv(m, z)?;
            let (k, kd) = cal_k_with_deriv(m, z)?;
            wki = wki.max(((k * id - kd * i) - 1.0).norm());
            sym = sym.max(rel(besselkit::specfun::cal_k(-m, z)?, k));
            if z.norm() < 5.0 && m.norm() > 0.0 {
                let (j, jd) = cal_i_with_deriv(-m, z)?;
                wii = wii.max(((i * jd - id * j) + (PI * m).sin()).norm());
            }
        }
    }
    for &z in &zs[..3] {
        half = half.max(rel(besselkit::specfun::cal_k(c(0.5, 0.0), z)?, (-z).exp()));
        half = half.max(rel(besselkit::specfun::cal_i(c(0.5, 0.0), z)?, z.sinh()));
    }
    out.push(Check { name: "wronskian(K_m, I_m) = 1", error: wki, tol: 1e-9 });
    out.push(Check { name: "wronskian(I_m, I_-m) = -sin(pi m)", error: wii, tol: 1e-9 });
    out.push(Check { name: "K_m = K_-m", error: sym, tol: 1e-9 });
    out.push(Check { name: "K_1/2 = exp(-z), I_1/2 = sinh z", error: half, tol: 1e-9 });

    let zero = Problem::new(c(0.0, 0.0), Potential::zero(), SolverConfig::default())?;
    let m = c(0.3, 0.0);
    let power = |p: C64| {
        GridFunction::from_fn(zero.grid().clone(), c(0.0, 0.0), 0, move |x| {
            let v = cpow(c(x, 0.0), p);
            Ok((v, p * v / x))
        })
    };
    let w = wronskian_at_zero(&BoundaryFunctional::power(0.5 - m), &power(0.5 + m)?)?;
    out.push(Check { name: "wronskian(x^(1/2-m), x^(1/2+m); 0) = 2m", error: rel(w.value, 2.0 * m), tol: 1e-8 });

    let free = Problem::new(c(1.0, 0.5), Potential::zero(), SolverConfig::default())?;
    let j = jost(&free, c(0.5, 0.0), JostMethod::WronskianMatch)?;
    out.push(Check { name: "jost function of Q = 0 is 1", error: (j.value - 1.0).norm(), tol: 1e-8 });

    let well = Potential::square_well(-4.0, 0.0, 1.0)?;
    let pb = Problem::new(c(1.0, 0.0), well.clone(), SolverConfig::default())?;
    let (mean, dev) = wronskian_constancy(&build_u(&pb, c(0.5, 0.0))?.data, &build_v(&pb, c(0.5, 0.0))?.data)?;
    out.push(Check { name: "wronskian(u, v) is constant", error: dev / mean.norm(), tol: 1e-6 });
    let j = jost(&pb, c(0.5, 0.0), JostMethod::WronskianMatch)?;
    out.push(Check {
        name: "jost by matching = jost by overlap",
        error: j.cross_check_dev.unwrap_or(f64::INFINITY) / j.value.norm(),
        tol: 1e-6,
    });

    let pz = Problem::new(c(0.0, 0.0), Potential::square_well(-1.0, 0.0, 1.0)?, SolverConfig::default())?;
    let exact = 1.0 - 1f64.tan();
    let a = match scattering_length(RealizationKind::Hm(c(0.5, 0.0)), &pz)? {
        ScatteringLength::Finite(a) => (a - exact).norm(),
        ScatteringLength::Infinite => f64::INFINITY,
    };
    out.push(Check { name: "scattering length of the unit well", error: a, tol: 1e-5 });
    Ok(out)
}

/// Number of failed rows of a `selftest` table.
pub fn selftest_failures(table: &Table) -> usize {
    table.rows.iter().filter(|r| r.last() != Some(&serde_json::Value::Bool(true))).count()
}

fn selftest() -> Run<Table> {
    let checks = identity_checks()?;
    let mut table = Table::new(&["check", "error", "tolerance", "passed"]);
    let mut failed = 0;
    for ch in &checks {
        let ok = ch.error <= ch.tol;
        failed += usize::from(!ok);
        table.push(vec![text(ch.name), num(ch.error), num(ch.tol), ok.into()]);
    }
    table.meta("failed", failed);
    Ok(table)
}
