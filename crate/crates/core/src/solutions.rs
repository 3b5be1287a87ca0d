//! Distinguished solutions of `(L_{m²} + k²) f = 0` and Wronskian utilities.
//!
//! All builders work on a shared [`Problem`], so solutions built from the
//! same problem live on the same grid and can be combined.

use crate::error::{Error, Result};
use crate::model::{class_integral, ClassSide, Potential, SpectralPoint};
use crate::specfun::{c, cpow, gamma, rgamma, C64, DELTA_INT};
use crate::unperturbed::{eval_solution_gauged, w0_factor, SolutionKind, M_ZERO_TOL};
use crate::volterra::{
    choose_a, neumann_solve, Discretization, GreenOperator, GridFunction, NeumannReport, NormWeight, PairKind,
    RadialGrid, DEFAULT_N, DEFAULT_TOL,
};
use std::io::Write;
use std::sync::Arc;

/// Largest `|k|` for which logarithmic compressed solutions are built.
pub const K0_DIAMOND: f64 = 10.0;
/// Default contraction target for compressed operators.
pub const DEFAULT_A_TARGET: f64 = 0.5;

/// Grid and solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Node count.
    pub n: usize,
    /// Smallest node (default `10⁻⁶`).
    pub x_min: Option<f64>,
    /// Largest node (default from `k`).
    pub x_max: Option<f64>,
    /// Neumann stopping tolerance.
    pub tol: f64,
    /// Contraction target used to choose compression points.
    pub a_target: f64,
    /// Run the Neumann series for the report; otherwise Volterra solves only march.
    pub neumann_report: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { n: DEFAULT_N, x_min: None, x_max: None, tol: DEFAULT_TOL, a_target: DEFAULT_A_TARGET, neumann_report: true }
    }
}

/// A spectral point, a potential and their discretization.
#[derive(Debug, Clone)]
pub struct Problem {
    /// Spectral parameter.
    pub k: SpectralPoint,
    /// Sampled potential on the grid.
    pub disc: Arc<Discretization>,
    /// Settings.
    pub cfg: SolverConfig,
}

impl Problem {
    /// Builds the grid for `k` and `pot`.
    pub fn new(k: C64, pot: Potential, cfg: SolverConfig) -> Result<Self> {
        let k = SpectralPoint::new(k)?;
        let grid = Arc::new(RadialGrid::for_problem(k, &pot, cfg.n, cfg.x_min, cfg.x_max)?);
        Ok(Self { k, disc: Arc::new(Discretization::new(grid, pot)), cfg })
    }

    /// Same grid and potential at another spectral point.
    pub fn with_k(&self, k: C64) -> Result<Self> {
        Ok(Self { k: SpectralPoint::new(k)?, disc: self.disc.clone(), cfg: self.cfg })
    }

    /// The grid.
    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.disc.grid
    }

    /// The potential.
    pub fn pot(&self) -> &Potential {
        &self.disc.pot
    }

    fn unperturbed(&self, kind: SolutionKind, m: C64, sigma: i8) -> Result<GridFunction> {
        GridFunction::unperturbed(self.grid().clone(), kind, m, self.k, sigma)
    }
}

/// Which solution a bundle holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionTag {
    /// `u_m(·, k)`, regular at zero.
    U { m: C64, k: C64 },
    /// `p_0(·, k)`.
    P0 { k: C64 },
    /// Jost solution `w_m(·, k)`.
    W { m: C64, k: C64 },
    /// `v_m(·, k) = √(π/2k)(k/2)^m w_m`.
    V { m: C64, k: C64 },
    /// Zero-energy solution `q_{-m}` with `q_{-m} ~ x^{½-m}` at infinity.
    Qzero { m: C64 },
    /// Zero-energy logarithmic solution `q_{0,ln} ~ x^{½} ln x`.
    Q0Ln,
    /// Compressed solution `u_{-m}^{⋈(a)}`.
    UBowtie { m: C64, a: f64, k: C64 },
    /// Compressed logarithmic solution `p_0^{◇(a)}`.
    PDiamond { a: f64, k: C64 },
    /// Partial sum `u_{-m}^{0[n]}`.
    U0N { n: usize, m: C64, k: C64 },
    /// Corrected solution `u_{-m}^{[n]}`.
    UN { n: usize, m: C64, k: C64 },
}

/// An a-posteriori asymptotic check.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCheck {
    /// What was checked.
    pub name: &'static str,
    /// Measured slope or ratio.
    pub value: f64,
    /// Required bound.
    pub required: f64,
    /// Outcome.
    pub passed: bool,
}

/// A solution with its provenance.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    /// Which solution.
    pub tag: SolutionTag,
    /// Values on the grid.
    pub data: GridFunction,
    /// Neumann report of the defining solve.
    pub report: NeumannReport,
    /// Normalization and construction notes.
    pub notes: Vec<String>,
    /// A-posteriori checks.
    pub checks: Vec<AsymptoticCheck>,
}

impl SolutionBundle {
    /// Writes `x,re(f),im(f),re(f'),im(f')` rows.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write_csv(&self.data, out)
    }
}

/// Writes a grid function as `x,re(f),im(f),re(f'),im(f')` rows (no header).
pub fn write_csv<W: Write>(f: &GridFunction, out: &mut W) -> Result<()> {
    for i in 0..f.len() {
        let (v, d) = f.at(i)?;
        writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", f.grid.x[i], v.re, v.im, d.re, d.im)
            .map_err(|e| Error::Domain(format!("write failed: {e}")))?;
    }
    Ok(())
}

fn trivial_report(f: &GridFunction) -> NeumannReport {
    let norm = f.vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    NeumannReport {
        terms_used: 1,
        last_term_norm: norm,
        term_norms: vec![norm],
        majorant: vec![norm],
        majorant_bound: 0.0,
        majorant_constant: 0.0,
        majorant_integral: 0.0,
        converged: true,
        marched: false,
    }
}

/// Volterra solve honouring `neumann_report`.
fn volterra_solve(pb: &Problem, op: &GreenOperator, f0: &GridFunction, weight: NormWeight) -> Result<(GridFunction, NeumannReport)> {
    if pb.cfg.neumann_report {
        return neumann_solve(op, f0, pb.cfg.tol, pb.k, weight, None);
    }
    let f = op.march(f0)?;
    let mut report = trivial_report(f0);
    report.terms_used = 0;
    report.marched = true;
    Ok((f, report))
}

fn require_class(pot: &Potential, side: ClassSide, eps: f64, log_power: f64, what: &str) -> Result<()> {
    if class_integral(pot, side, eps, log_power).finite().is_none() {
        let end = match side {
            ClassSide::Zero => "zero",
            ClassSide::Infinity => "infinity",
        };
        return Err(Error::ClassViolation(format!(
            "{what}: Q is not integrable at {end} with exponent {eps} and log power {log_power}"
        )));
    }
    Ok(())
}

/// Least-squares slope of `ln|f - f⁰|` against `ln x` over the smallest two decades.
///
/// Nodes where the difference is at roundoff level are skipped; `None` when
/// fewer than five nodes remain.
pub fn small_x_slope(f: &GridFunction, f0: &GridFunction) -> Option<f64> {
    let x = &f.grid.x;
    let hi = x[0] * 100.0;
    let pts: Vec<(f64, f64)> = (0..f.len())
        .take_while(|&i| x[i] <= hi)
        .filter_map(|i| {
            let d = (f.vals[i] - f0.vals[i]).norm();
            (d > 1e-12 * f0.vals[i].norm() && d > 0.0).then(|| (x[i].ln(), d.ln()))
        })
        .collect();
    if pts.len() < 5 {
        return None;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + (p.0 - mx) * (p.1 - my), b + (p.0 - mx).powi(2)));
    Some(num / den)
}

fn slope_check(name: &'static str, f: &GridFunction, f0: &GridFunction, exponent: f64) -> AsymptoticCheck {
    match small_x_slope(f, f0) {
        Some(s) => AsymptoticCheck { name, value: s, required: exponent - 0.1, passed: s > exponent - 0.1 },
        None => AsymptoticCheck { name, value: f64::INFINITY, required: exponent - 0.1, passed: true },
    }
}

/// Relative size of `f - f⁰` (gauged) at the right end of the grid.
fn outer_check(name: &'static str, f: &GridFunction, f0: &GridFunction) -> AsymptoticCheck {
    let scale = f0.vals.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    let last = f.len() - 1;
    let d = (f.vals[last] - f0.vals[last]).norm() / scale;
    AsymptoticCheck { name, value: d, required: 1e-6, passed: d <= 1e-6 }
}

fn is_zero_m(m: C64) -> bool {
    m.norm() < M_ZERO_TOL
}

fn zero_check(pot: &Potential) -> bool {
    pot.is_zero()
}

/// `u_m = (1 + G⁰_→Q)⁻¹ u⁰_m`.
pub fn build_u(pb: &Problem, m: C64) -> Result<SolutionBundle> {
    if is_zero_m(m) {
        require_class(pb.pot(), ClassSide::Zero, 0.0, 1.0, "u_0")?;
    } else {
        require_class(pb.pot(), ClassSide::Zero, 2.0 * (-m.re).max(0.0), 0.0, "u_m")?;
    }
    let f0 = pb.unperturbed(SolutionKind::U0, m, 1)?;
    let tag = SolutionTag::U { m, k: pb.k.k };
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let op = GreenOperator::forward(pb.disc.clone(), m, pb.k, 0)?;
    let (f, report) = volterra_solve(pb, &op, &f0, NormWeight { p: 0.5 + m.re, q: 0.0 })?;
    let check = slope_check("u_m - u0_m at zero", &f, &f0, 0.5 + m.re + 2.0 * (-m.re).max(0.0));
    Ok(SolutionBundle { tag, data: f, report, notes: vec![], checks: vec![check] })
}

fn bundle(tag: SolutionTag, data: GridFunction, report: NeumannReport) -> SolutionBundle {
    SolutionBundle { tag, data, report, notes: vec![], checks: vec![] }
}

/// `p_0 = (1 + G⁰_→Q)⁻¹ p⁰_0`.
pub fn build_p0(pb: &Problem) -> Result<SolutionBundle> {
    require_class(pb.pot(), ClassSide::Zero, 0.0, 2.0, "p_0")?;
    let m = c(0.0, 0.0);
    let f0 = pb.unperturbed(SolutionKind::P0, m, 1)?;
    let tag = SolutionTag::P0 { k: pb.k.k };
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let op = GreenOperator::forward(pb.disc.clone(), m, pb.k, 0)?;
    let (f, report) = volterra_solve(pb, &op, &f0, NormWeight { p: 0.5, q: 1.0 })?;
    let check = slope_check("p_0 - p0_0 at zero", &f, &f0, 0.5);
    Ok(SolutionBundle { tag, data: f, report, notes: vec![], checks: vec![check] })
}

/// Jost solution `w_m = (1 + G⁰_←Q)⁻¹ w⁰_m`; depends on `m` only through `±m`.
pub fn build_w(pb: &Problem, m: C64) -> Result<SolutionBundle> {
    if pb.k.is_zero {
        return Err(Error::Domain("the Jost solution needs k ≠ 0".into()));
    }
    require_class(pb.pot(), ClassSide::Infinity, 0.0, 0.0, "w_m")?;
    let mm = if m.re < 0.0 || (m.re == 0.0 && m.im < 0.0) { -m } else { m };
    let f0 = pb.unperturbed(SolutionKind::W0, mm, -1)?;
    let tag = SolutionTag::W { m, k: pb.k.k };
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let op = GreenOperator::backward(pb.disc.clone(), mm, pb.k)?;
    let q = if is_zero_m(mm) { 1.0 } else { 0.0 };
    let (f, report) = volterra_solve(pb, &op, &f0, NormWeight { p: 0.5 - mm.re, q })?;
    let check = outer_check("w_m - w0_m at infinity", &f, &f0);
    Ok(SolutionBundle { tag, data: f, report, notes: vec![], checks: vec![check] })
}

/// `v_m = √(π/2k)(k/2)^m w_m`.
pub fn build_v(pb: &Problem, m: C64) -> Result<SolutionBundle> {
    let w = build_w(pb, m)?;
    let s = 1.0 / w0_factor(m, pb.k.k);
    Ok(SolutionBundle {
        tag: SolutionTag::V { m, k: pb.k.k },
        data: w.data.scaled(s),
        report: w.report,
        notes: vec!["v_m = w_m / (√(2k/π)(2/k)^m)".into()],
        checks: w.checks,
    })
}

fn zero_energy(pb: &Problem) -> Result<Problem> {
    if pb.k.is_zero {
        Ok(pb.clone())
    } else {
        pb.with_k(c(0.0, 0.0))
    }
}

/// Zero-energy solution `q_{-m} = (1 + G⁰_←Q)⁻¹ x^{½-m}` (at `k = 0`).
pub fn build_q(pb: &Problem, m: C64) -> Result<SolutionBundle> {
    let pb = zero_energy(pb)?;
    if is_zero_m(m) {
        require_class(pb.pot(), ClassSide::Infinity, 1.0, 1.0, "q_0")?;
    } else {
        require_class(pb.pot(), ClassSide::Infinity, 1.0 + 2.0 * m.re.max(0.0), 0.0, "q_-m")?;
    }
    let f0 = GridFunction::from_fn(pb.grid().clone(), c(0.0, 0.0), 0, |x| {
        let p = cpow(c(x, 0.0), 0.5 - m);
        Ok((p, (0.5 - m) / x * p))
    })?;
    let tag = SolutionTag::Qzero { m };
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let op = GreenOperator::backward(pb.disc.clone(), m, pb.k)?;
    let (f, report) = volterra_solve(&pb, &op, &f0, NormWeight { p: 0.5 - m.re, q: 0.0 })?;
    let check = outer_check("q_-m - x^(1/2-m) at infinity", &f, &f0);
    Ok(SolutionBundle { tag, data: f, report, notes: vec![], checks: vec![check] })
}

/// Zero-energy logarithmic solution `q_{0,ln} = (1 + G⁰_←Q)⁻¹ x^{½} ln x`.
pub fn build_q0ln(pb: &Problem) -> Result<SolutionBundle> {
    let pb = zero_energy(pb)?;
    require_class(pb.pot(), ClassSide::Infinity, 1.0, 2.0, "q_0,ln")?;
    let m = c(0.0, 0.0);
    let f0 = pb.unperturbed(SolutionKind::P0, m, 0)?;
    let tag = SolutionTag::Q0Ln;
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let op = GreenOperator::backward(pb.disc.clone(), m, pb.k)?;
    let (f, report) = volterra_solve(&pb, &op, &f0, NormWeight { p: 0.5, q: 1.0 })?;
    let check = outer_check("q_0,ln - x^(1/2) ln x at infinity", &f, &f0);
    Ok(SolutionBundle { tag, data: f, report, notes: vec![], checks: vec![check] })
}

/// Continues `f`, a solution for order `m`, beyond node `ia`.
///
/// The seed is the unperturbed solution with the same Cauchy data at `x_a`;
/// the forward Volterra equation is then marched from `x_a`.
pub fn extend_forward(pb: &Problem, m: C64, f: &GridFunction, ia: usize) -> Result<GridFunction> {
    let n = pb.grid().len();
    if ia >= n - 1 {
        return Ok(f.clone());
    }
    let op = GreenOperator::forward(pb.disc.clone(), m, pb.k, ia)?;
    let f = f.regauged(op.gauge)?;
    let (av, ad) = (&op.a.0, &op.a.1);
    let (bv, bd) = (&op.b.0, &op.b.1);
    let xa = pb.grid().x[ia];
    // f = A a + B b with 𝒲(b, a) = 1.
    let big_a = bv[ia] * f.ders[ia] - bd[ia] * f.vals[ia];
    let b_scaled = f.vals[ia] * ad[ia] - f.ders[ia] * av[ia];
    let kk = op.k;
    let mut seed = GridFunction::zeros(pb.grid().clone(), kk, op.gauge);
    for i in ia..n {
        // b in the gauge of a: b̂·e^{-2k(x - x_a)} after absorbing e^{2k x_a} into B.
        let e = if op.gauge == 0 { c(1.0, 0.0) } else { (-2.0 * kk * (pb.grid().x[i] - xa)).exp() };
        seed.vals[i] = big_a * av[i] + b_scaled * bv[i] * e;
        seed.ders[i] = big_a * ad[i] + b_scaled * bd[i] * e;
    }
    let g = op.march(&seed)?;
    let mut out = f.clone();
    for i in ia + 1..n {
        out.vals[i] = g.vals[i];
        out.ders[i] = g.ders[i];
    }
    Ok(out)
}

fn require_bowtie_order(m: C64) -> Result<()> {
    if m.re < 0.0 {
        return Err(Error::Domain("compressed solutions need Re m ≥ 0".into()));
    }
    if m.norm() <= DELTA_INT {
        return Err(Error::Domain("compressed solution u_-m needs |m| > δ_int; use p_0^◇ at m = 0".into()));
    }
    Ok(())
}

fn compression_end(pb: &Problem, op: &GreenOperator, weight: NormWeight, a: Option<f64>) -> Result<(usize, Vec<String>)> {
    let mut notes = vec![];
    let end = match a {
        Some(a) => {
            let i = pb.grid().nearest(a);
            if (pb.grid().x[i] - a).abs() > 1e-12 * a {
                notes.push(format!("a = {a} snapped to grid node {}", pb.grid().x[i]));
            }
            i
        }
        None => {
            let i = choose_a(op, pb.k, weight, 0.0, pb.cfg.a_target)?;
            notes.push(format!("a = {} chosen for contraction target {}", pb.grid().x[i], pb.cfg.a_target));
            i
        }
    };
    Ok((end, notes))
}

/// `u_{-m}^{⋈(a)} = (1 + G⁰^{(a)}_⋈ Q)⁻¹ u⁰_{-m}`, continued beyond `a` as a solution.
pub fn build_u_bowtie(pb: &Problem, m: C64, a: Option<f64>) -> Result<SolutionBundle> {
    require_bowtie_order(m)?;
    require_class(pb.pot(), ClassSide::Zero, 0.0, 0.0, "u_-m bowtie")?;
    let f0 = pb.unperturbed(SolutionKind::U0, -m, 1)?;
    let n = pb.grid().len();
    let weight = NormWeight { p: 0.5 - m.re, q: 0.0 };
    if zero_check(pb.pot()) {
        let a = a.unwrap_or(pb.grid().x_max());
        return Ok(bundle(SolutionTag::UBowtie { m, a, k: pb.k.k }, f0.clone(), trivial_report(&f0)));
    }
    let full = GreenOperator::two_sided(pb.disc.clone(), m, pb.k, PairKind::Standard, n - 1)?;
    let (end, notes) = compression_end(pb, &full, weight, a)?;
    let op = GreenOperator::two_sided(pb.disc.clone(), m, pb.k, PairKind::Standard, end)?;
    let (f, report) = neumann_solve(&op, &f0, pb.cfg.tol, pb.k, weight, None)?;
    let f = extend_forward(pb, m, &f, end)?;
    let mut checks = vec![];
    if 2.0 * m.re > 0.0 {
        checks.push(slope_check("u_-m bowtie - u0_-m at zero", &f, &f0, 0.5 - m.re));
    }
    Ok(SolutionBundle { tag: SolutionTag::UBowtie { m, a: pb.grid().x[end], k: pb.k.k }, data: f, report, notes, checks })
}

/// `p_0^{◇(a)} = (1 + G⁰^{(a)}_◇ Q)⁻¹ p⁰_0`, continued beyond `a` as a solution.
pub fn build_p_diamond(pb: &Problem, a: Option<f64>) -> Result<SolutionBundle> {
    if pb.k.k.norm() > K0_DIAMOND {
        return Err(Error::MethodUnavailable(format!("p_0 diamond needs |k| ≤ {K0_DIAMOND}")));
    }
    require_class(pb.pot(), ClassSide::Zero, 0.0, 1.0, "p_0 diamond")?;
    let m = c(0.0, 0.0);
    let f0 = pb.unperturbed(SolutionKind::P0, m, 1)?;
    let n = pb.grid().len();
    let weight = NormWeight { p: 0.5, q: 1.0 };
    if zero_check(pb.pot()) {
        let a = a.unwrap_or(pb.grid().x_max());
        return Ok(bundle(SolutionTag::PDiamond { a, k: pb.k.k }, f0.clone(), trivial_report(&f0)));
    }
    let full_end = if pb.k.is_zero {
        n - 1
    } else {
        // Keep 2 Re k·a within the exponent range of the rank-one term.
        let cap = 300.0 / pb.k.k.re.max(1e-300);
        pb.grid().x.partition_point(|&x| x <= cap).saturating_sub(1).min(n - 1)
    };
    let full = GreenOperator::two_sided(pb.disc.clone(), m, pb.k, PairKind::Diamond, full_end)?;
    let (end, notes) = compression_end(pb, &full, weight, a)?;
    let op = GreenOperator::two_sided(pb.disc.clone(), m, pb.k, PairKind::Diamond, end)?;
    let (f, report) = neumann_solve(&op, &f0, pb.cfg.tol, pb.k, weight, None)?;
    let f = extend_forward(pb, m, &f, end)?;
    let check = slope_check("p_0 diamond - p0_0 at zero", &f, &f0, 0.5);
    Ok(SolutionBundle { tag: SolutionTag::PDiamond { a: pb.grid().x[end], k: pb.k.k }, data: f, report, notes, checks: vec![check] })
}

fn unit_bowtie(pb: &Problem, m: C64) -> Result<(GreenOperator, usize)> {
    let i1 = pb.grid().nearest(1.0);
    Ok((GreenOperator::two_sided(pb.disc.clone(), m, pb.k, PairKind::Standard, i1)?, i1))
}

/// Partial sum `u_{-m}^{0[n]} = Σ_{j≤n} (-G⁰^{(1)}_⋈ Q)^j u⁰_{-m}`.
///
/// At `k = 0` this is the standard value.
pub fn build_u0n(pb: &Problem, n: usize, m: C64) -> Result<GridFunction> {
    require_bowtie_order(m)?;
    require_class(pb.pot(), ClassSide::Zero, 0.0, 0.0, "u_-m^0[n]")?;
    let f0 = pb.unperturbed(SolutionKind::U0, -m, 1)?;
    if zero_check(pb.pot()) || n == 0 {
        return Ok(f0);
    }
    let (op, _) = unit_bowtie(pb, m)?;
    let mut sum = f0.clone();
    let mut term = f0;
    for _ in 0..n {
        term = op.apply(&term)?.scaled(c(-1.0, 0.0));
        sum = sum.add_scaled(&term, c(1.0, 0.0))?;
    }
    Ok(sum)
}

/// `u_{-m}^{[n]} = u_{-m}^{0[n]} + (-1)^{n+1}(1 + G⁰_→Q)⁻¹ G⁰_→Q (G⁰^{(1)}_⋈ Q)^n u⁰_{-m}`,
/// continued beyond `x = 1` as a solution.
pub fn build_un(pb: &Problem, n: usize, m: C64) -> Result<SolutionBundle> {
    require_bowtie_order(m)?;
    let eps = 2.0 * m.re / (n as f64 + 1.0);
    require_class(pb.pot(), ClassSide::Zero, eps, 0.0, "u_-m^[n]")?;
    let tag = SolutionTag::UN { n, m, k: pb.k.k };
    let f0 = pb.unperturbed(SolutionKind::U0, -m, 1)?;
    if zero_check(pb.pot()) {
        return Ok(bundle(tag, f0.clone(), trivial_report(&f0)));
    }
    let s_n = build_u0n(pb, n, m)?;
    let (bow, i1) = unit_bowtie(pb, m)?;
    let mut t = f0.clone();
    for _ in 0..n {
        t = bow.apply(&t)?;
    }
    let fwd = GreenOperator::forward(pb.disc.clone(), m, pb.k, 0)?;
    let ft = fwd.apply(&t)?;
    let (r, report) = volterra_solve(pb, &fwd, &ft, NormWeight { p: 0.5 + m.re, q: 0.0 })?;
    let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
    let u = s_n.add_scaled(&r, c(sign, 0.0))?;
    let u = extend_forward(pb, m, &u, i1)?;
    let check = slope_check("u_-m^[n] - u_-m^0[n] at zero", &u, &s_n, 0.5 + m.re);
    Ok(SolutionBundle {
        tag,
        data: u,
        report,
        notes: vec!["continued beyond x = 1 by the forward equation".into()],
        checks: vec![check],
    })
}

/// Relative discrete residual `‖(L_{m²} + k²)f - g‖₂ / ‖|f''| + |Vf| + |g|‖₂` over interior
/// nodes, `V = (m²-¼)/x² + Q + k²`.
///
/// The reference is the size of the terms, not of `g`: near zero `f''` and `Vf` are not
/// square integrable on their own and cancel. `f''` is the derivative of the stored `f'`
/// by five-point Lagrange stencils that stay inside one grid segment. Without `g` the
/// norm of `f''` is the reference.
pub fn equation_residual(pb: &Problem, m: C64, f: &GridFunction, g: Option<&GridFunction>) -> Result<f64> {
    same_grid(f, &GridFunction::zeros(pb.grid().clone(), pb.k.k, 0))?;
    let xs = &f.grid.x;
    let k2 = pb.k.k * pb.k.k;
    let (mut num, mut den) = (0.0, 0.0);
    for &(s0, s1) in &f.grid.segments {
        if s1 < s0 + 4 {
            continue;
        }
        for i in s0 + 2..=s1 - 2 {
            let x0 = xs[i];
            let mut d2 = c(0.0, 0.0);
            for j in i - 2..=i + 2 {
                let mut w = 0.0;
                for l in i - 2..=i + 2 {
                    if l == j {
                        continue;
                    }
                    let mut prod = 1.0 / (xs[j] - xs[l]);
                    for r in i - 2..=i + 2 {
                        if r != j && r != l {
                            prod *= (x0 - xs[r]) / (xs[j] - xs[r]);
                        }
                    }
                    w += prod;
                }
                d2 += w * f.at(j)?.1;
            }
            let (fv, _) = f.at(i)?;
            let q = pb.pot().eval(x0)?;
            let rhs = match g {
                Some(g) => g.at(i)?.0,
                None => c(0.0, 0.0),
            };
            let vf = ((m * m - 0.25) / (x0 * x0) + q + k2) * fv;
            let r = -d2 + vf - rhs;
            let dx = 0.5 * (xs[i + 1] - xs[i - 1]);
            num += r.norm_sqr() * dx;
            den += if g.is_some() { (d2.norm() + vf.norm() + rhs.norm()).powi(2) } else { d2.norm_sqr() } * dx;
        }
    }
    if !(den > 0.0) {
        return Err(Error::Domain("residual reference norm vanishes".into()));
    }
    Ok((num / den).sqrt())
}

fn same_grid(f: &GridFunction, g: &GridFunction) -> Result<()> {
    if Arc::ptr_eq(&f.grid, &g.grid) || f.grid.x == g.grid.x {
        Ok(())
    } else {
        Err(Error::Domain("solutions live on different grids".into()))
    }
}

/// `𝒲(f, g) = f g' - f' g` at the node nearest `x`.
pub fn wronskian_of(f: &GridFunction, g: &GridFunction, x: f64) -> Result<C64> {
    same_grid(f, g)?;
    f.wronskian_at(g, f.grid.nearest(x))
}

/// Mean and largest deviation of `𝒲(f, g)` over the middle half of the grid.
pub fn wronskian_constancy(f: &GridFunction, g: &GridFunction) -> Result<(C64, f64)> {
    same_grid(f, g)?;
    let n = f.len();
    let vals: Vec<C64> = (n / 4..3 * n / 4).map(|i| f.wronskian_at(g, i)).collect::<Result<_>>()?;
    let mean = vals.iter().sum::<C64>() / vals.len() as f64;
    let dev = vals.iter().map(|v| (v - mean).norm()).fold(0.0, f64::max);
    Ok((mean, dev))
}

/// Coefficients `(c1, c2)` with `f = c1·basis1 + c2·basis2`, from Wronskians at the node nearest `x`.
pub fn extract_coefficient_at(f: &GridFunction, b1: &GridFunction, b2: &GridFunction, x: f64) -> Result<(C64, C64)> {
    let w12 = wronskian_of(b1, b2, x)?;
    let wf2 = wronskian_of(f, b2, x)?;
    let w1f = wronskian_of(b1, f, x)?;
    let i = f.grid.nearest(x);
    let scale = |g: &GridFunction| {
        let (v, d) = g.at(i).unwrap_or((c(0.0, 0.0), c(0.0, 0.0)));
        v.norm() + d.norm() * f.grid.x[i]
    };
    let s = scale(b1) * scale(b2) / f.grid.x[i];
    if !(w12.norm() > 1e-13 * s) {
        return Err(Error::DegenerateBasis);
    }
    Ok((wf2 / w12, w1f / w12))
}

/// [`extract_coefficient_at`] at `x = 1`.
pub fn extract_coefficient(f: &GridFunction, b1: &GridFunction, b2: &GridFunction) -> Result<(C64, C64)> {
    extract_coefficient_at(f, b1, b2, 1.0)
}

/// `½Γ(m)`: the limit factor with `v_m(·, k) → ½Γ(m) q_{-m}` as `k → 0`.
pub fn v_to_q_factor(m: C64) -> Result<C64> {
    Ok(0.5 * gamma(m)?)
}

/// `u⁰_{-m}(x, 0) = x^{½-m}/Γ(1-m)` used as a reference normalisation.
pub fn u0_neg_at_zero_energy(m: C64, x: f64) -> C64 {
    cpow(c(x, 0.0), 0.5 - m) * rgamma(1.0 - m)
}

/// Evaluates an unperturbed solution at a single point (convenience for callers).
pub fn unperturbed_value(kind: SolutionKind, m: C64, k: SpectralPoint, x: f64) -> Result<(C64, C64)> {
    eval_solution_gauged(kind, m, k, x, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn prob(k: C64, pot: Potential, n: usize) -> Problem {
        Problem::new(k, pot, SolverConfig { n, ..Default::default() }).unwrap()
    }

    /// Relative residual of the radial equation at the node nearest `x`,
    /// with `f''` from a five-point Lagrange derivative of the stored `f'`.
    pub(crate) fn residual(f: &GridFunction, m: C64, k: C64, pot: &Potential, x: f64) -> f64 {
        let i = f.grid.nearest(x);
        let xs = &f.grid.x;
        let x0 = xs[i];
        let mut d2 = c(0.0, 0.0);
        for j in i - 2..=i + 2 {
            // Derivative at x0 of the Lagrange basis polynomial for node j.
            let mut w = 0.0;
            for l in i - 2..=i + 2 {
                if l == j {
                    continue;
                }
                let mut prod = 1.0 / (xs[j] - xs[l]);
                for r in i - 2..=i + 2 {
                    if r != j && r != l {
                        prod *= (x0 - xs[r]) / (xs[j] - xs[r]);
                    }
                }
                w += prod;
            }
            d2 += w * f.at(j).unwrap().1;
        }
        let (f0, _) = f.at(i).unwrap();
        let r = -d2 + ((m * m - 0.25) / (x0 * x0) + pot.eval(x0).unwrap() + k * k) * f0;
        r.norm() / (f0.norm() / (x0 * x0)).max(1e-300)
    }

    #[test]
    fn zero_potential_gives_unperturbed() {
        let pb = prob(c(1.0, 0.3), Potential::zero(), 256);
        let m = c(0.3, 0.1);
        let u = build_u(&pb, m).unwrap();
        let u0 = GridFunction::unperturbed(pb.grid().clone(), SolutionKind::U0, m, pb.k, 1).unwrap();
        assert_eq!(u.data, u0);
        let w = build_w(&pb, m).unwrap();
        assert_eq!(w.report.terms_used, 1);
        let q = build_q(&pb, m).unwrap();
        let x = pb.grid().x[100];
        let (v, _) = q.data.at(100).unwrap();
        assert!((v - cpow(c(x, 0.0), 0.5 - m)).norm() < 1e-15 * v.norm());
    }

    #[test]
    fn solutions_satisfy_the_equation() {
        let pot = Potential::square_well(3.0, 0.0, 1.0).unwrap();
        let k = c(0.8, 0.4);
        let m = c(0.35, 0.0);
        let pb = prob(k, pot.clone(), 2048);
        for b in [build_u(&pb, m).unwrap(), build_w(&pb, m).unwrap(), build_u_bowtie(&pb, m, None).unwrap()] {
            for x in [0.3, 0.7, 1.5, 3.0] {
                let r = residual(&b.data, m, k, &pot, x);
                assert!(r < 1e-6, "{:?} x={x} r={r}", b.tag);
            }
        }
    }

    #[test]
    fn wronskians_are_constant() {
        let pot = Potential::square_well(-2.0, 0.0, 1.5).unwrap();
        let k = c(1.2, -0.5);
        let m = c(0.6, 0.2);
        let pb = prob(k, pot, 2048);
        let u = build_u(&pb, m).unwrap();
        let v = build_v(&pb, m).unwrap();
        let (mean, dev) = wronskian_constancy(&v.data, &u.data).unwrap();
        assert!(dev <= 1e-7 * mean.norm(), "{mean} {dev}");
        assert_eq!(wronskian_of(&u.data, &u.data, 0.5).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn jost_solution_is_even_in_m() {
        let pot = Potential::exp_decay(1.0, 1.0).unwrap();
        let pb = prob(c(1.0, 0.0), pot, 1024);
        let m = c(0.4, 0.3);
        let a = build_w(&pb, m).unwrap();
        let b = build_w(&pb, -m).unwrap();
        for i in (0..a.data.len()).step_by(37) {
            assert!((a.data.vals[i] - b.data.vals[i]).norm() <= 1e-12 * a.data.vals[i].norm());
        }
    }

    #[test]
    fn unperturbed_wronskian_of_pm_m() {
        let pb = prob(c(1.0, 0.0), Potential::zero(), 256);
        let m = c(0.3, 0.0);
        let a = build_u(&pb, m).unwrap();
        let b = build_u(&pb, -m).unwrap();
        let w = wronskian_of(&a.data, &b.data, 0.5).unwrap();
        assert!((w + 2.0 * (PI * m).sin() / PI).norm() < 1e-12);
    }

    #[test]
    fn extract_recovers_combination() {
        let pot = Potential::square_well(1.0, 0.0, 1.0).unwrap();
        let pb = prob(c(0.5, 0.0), pot, 1024);
        let m = c(0.3, 0.0);
        let u = build_u(&pb, m).unwrap().data;
        let w = build_w(&pb, m).unwrap().data;
        assert_eq!(extract_coefficient(&u, &u, &w).unwrap(), (c(1.0, 0.0), c(0.0, 0.0)));
        let f = u.scaled(c(2.0, 1.0)).add_scaled(&w, c(-0.5, 0.0)).unwrap();
        let (c1, c2) = extract_coefficient(&f, &u, &w).unwrap();
        assert!((c1 - c(2.0, 1.0)).norm() < 1e-10 && (c2 + 0.5).norm() < 1e-10);
        assert!(matches!(extract_coefficient(&f, &u, &u), Err(Error::DegenerateBasis)));
    }

    #[test]
    fn un_with_n_zero_is_u_minus_m() {
        let pot = Potential::square_well(2.0, 0.0, 2.0).unwrap();
        let pb = prob(c(0.7, 0.0), pot, 2048);
        let m = c(0.3, 0.0);
        let a = build_un(&pb, 0, m).unwrap();
        let b = build_u(&pb, -m).unwrap();
        for i in (0..a.data.len()).step_by(17) {
            let d = (a.data.vals[i] - b.data.vals[i]).norm();
            assert!(d <= 1e-8 * (1.0 + b.data.vals[i].norm()), "x={} d={d}", pb.grid().x[i]);
        }
    }

    #[test]
    fn un_wronskian_with_u() {
        let pot = Potential::coulomb(1.0, 1.0).unwrap();
        let pb = prob(c(0.5, 0.2), pot, 2048);
        let m = c(0.7, 0.0);
        for n in [1, 2] {
            let un = build_un(&pb, n, m).unwrap();
            let u = build_u(&pb, m).unwrap();
            let (mean, dev) = wronskian_constancy(&un.data, &u.data).unwrap();
            let expect = 2.0 * (PI * m).sin() / PI;
            assert!((mean - expect).norm() < 1e-7, "n={n}: {mean} vs {expect}");
            assert!(dev < 1e-7, "n={n}: dev {dev}");
        }
    }

    #[test]
    fn class_violation_is_reported() {
        let pot = Potential::new(crate::model::PotentialKind::PowerLaw { c: c(1.0, 0.0), alpha: -2.5, xc: 1.0 }).unwrap();
        let pb = prob(c(1.0, 0.0), pot, 256);
        assert!(matches!(build_u(&pb, c(0.5, 0.0)), Err(Error::ClassViolation(_))));
    }

    #[test]
    fn diamond_exists_at_zero_energy() {
        let pot = Potential::square_well(1.0, 0.0, 1.0).unwrap();
        let pb = prob(c(0.0, 0.0), pot.clone(), 2048);
        let p = build_p_diamond(&pb, None).unwrap();
        for x in [0.2, 0.9, 2.0] {
            let r = residual(&p.data, c(0.0, 0.0), c(0.0, 0.0), &pot, x);
            assert!(r < 1e-6, "x={x} r={r}");
        }
        assert!(p.checks.iter().all(|c| c.passed));
    }
}
