//! Jost function, its zeros in `Re k > 0`, and perturbed Green kernels.
//!
//! The Jost function is `𝒲_m(k) = 𝒲(v_m(·,k), u_m(·,k))`. Its zeros `k` in
//! the right half-plane give the eigenvalues `-k²` of the realization with
//! pure boundary conditions.

use crate::error::{Error, Result};
use crate::model::{class_integral, ClassSide, Potential};
use crate::solutions::{
    build_p0, build_q, build_u, build_un, build_v, equation_residual, Problem, SolverConfig,
};
use crate::specfun::{c, gamma, C64};
use crate::unperturbed::{SolutionKind, M_ZERO_TOL};
use crate::volterra::{cumulative_integral, integrate_with_potential, GridFunction};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Number of nodes averaged when matching Wronskians.
pub const MATCH_NODES: usize = 5;
/// Initial number of contour samples.
pub const CONTOUR_SAMPLES: usize = 512;
/// Largest number of contour samples before giving up.
pub const MAX_CONTOUR_SAMPLES: usize = 16384;
/// Required `|𝒲|` at an accepted zero.
pub const ZERO_TOL: f64 = 1e-8;

/// How the Jost function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JostMethod {
    /// `𝒲(v_m, u_m; x)` averaged near the geometric mean of the grid.
    WronskianMatch,
    /// `1 + ∫ u⁰_m Q v_m`.
    OverlapFormula,
    /// `½Γ(m) 𝒲(q_{-m}, u_m(·,0))` at `k = 0`.
    ZeroEnergy,
}

/// A Jost function value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostResult {
    /// `𝒲_m(k)`.
    pub value: C64,
    /// Method that produced `value`.
    pub method: JostMethod,
    /// Matching point for Wronskian methods.
    pub matching_x: Option<f64>,
    /// Value from the other method when it is admissible.
    pub cross_check: Option<C64>,
    /// `|value - cross_check|`.
    pub cross_check_dev: Option<f64>,
}

/// Mean of `𝒲(f, g; x_i)` over [`MATCH_NODES`] nodes around the geometric mean of the grid.
pub fn matched_wronskian(f: &GridFunction, g: &GridFunction) -> Result<(C64, f64)> {
    let grid = &f.grid;
    let n = grid.len();
    let half = MATCH_NODES / 2;
    let i = grid.nearest((grid.x_min() * grid.x_max()).sqrt()).clamp(half, n - 1 - half);
    let mut sum = c(0.0, 0.0);
    for j in i - half..=i + half {
        sum += f.wronskian_at(g, j)?;
    }
    Ok((sum / MATCH_NODES as f64, grid.x[i]))
}

fn overlap_class(pot: &Potential, m: C64) -> Result<()> {
    let (eps, log_power) = if m.norm() < M_ZERO_TOL { (0.0, 1.0) } else { (2.0 * (-m.re).max(0.0), 0.0) };
    if class_integral(pot, ClassSide::Zero, eps, log_power).finite().is_none() {
        return Err(Error::ClassViolation(format!(
            "overlap formula needs the class at zero with eps = {eps}, log power {log_power}"
        )));
    }
    Ok(())
}

fn overlap_value(pb: &Problem, m: C64, v: &GridFunction) -> Result<C64> {
    let u0 = GridFunction::unperturbed(pb.grid().clone(), SolutionKind::U0, m, pb.k, 1)?;
    let v = v.regauged(-1)?;
    Ok(1.0 + integrate_with_potential(&pb.disc, &u0, &v)?)
}

/// Evaluates `𝒲_m(k)` with `method`; for `k ≠ 0` the other `k ≠ 0` method is the cross-check.
pub fn jost(pb: &Problem, m: C64, method: JostMethod) -> Result<JostResult> {
    match method {
        JostMethod::ZeroEnergy => {
            if !(m.re > 0.0) {
                return Err(Error::MethodUnavailable("the zero-energy formula needs Re m > 0".into()));
            }
            let pz = if pb.k.is_zero { pb.clone() } else { pb.with_k(c(0.0, 0.0))? };
            let q = build_q(&pz, m)?;
            let u = build_u(&pz, m)?;
            let (w, x) = matched_wronskian(&q.data, &u.data)?;
            Ok(JostResult {
                value: 0.5 * gamma(m)? * w,
                method,
                matching_x: Some(x),
                cross_check: None,
                cross_check_dev: None,
            })
        }
        JostMethod::WronskianMatch | JostMethod::OverlapFormula => {
            if pb.k.is_zero {
                return Err(Error::MethodUnavailable("Wronskian and overlap methods need k ≠ 0".into()));
            }
            let v = build_v(pb, m)?;
            let matched = build_u(pb, m).and_then(|u| matched_wronskian(&v.data, &u.data));
            let overlap = overlap_class(pb.pot(), m).and_then(|_| overlap_value(pb, m, &v.data));
            let (value, matching_x, other) = match method {
                JostMethod::WronskianMatch => {
                    let (w, x) = matched?;
                    (w, Some(x), overlap.ok())
                }
                _ => (overlap?, None, matched.ok().map(|(w, _)| w)),
            };
            Ok(JostResult {
                value,
                method,
                matching_x,
                cross_check: other,
                cross_check_dev: other.map(|o| (o - value).norm()),
            })
        }
    }
}

/// `𝒲_m(k)` by Wronskian matching only; the fast path of the zero search.
pub fn jost_value(pb: &Problem, m: C64) -> Result<C64> {
    if pb.k.is_zero {
        return Err(Error::MethodUnavailable("Wronskian matching needs k ≠ 0".into()));
    }
    let v = build_v(pb, m)?;
    let u = build_u(pb, m)?;
    Ok(matched_wronskian(&v.data, &u.data)?.0)
}

/// Axis-parallel rectangle in the `k`-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    /// Smallest `Re k`.
    pub re_min: f64,
    /// Largest `Re k`.
    pub re_max: f64,
    /// Smallest `Im k`.
    pub im_min: f64,
    /// Largest `Im k`.
    pub im_max: f64,
}

impl Rect {
    fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    fn contains(&self, k: C64, slack: f64) -> bool {
        k.re >= self.re_min - slack && k.re <= self.re_max + slack && k.im >= self.im_min - slack && k.im <= self.im_max + slack
    }

    /// Boundary points in counter-clockwise order, about `n` in total, first point not repeated.
    fn boundary(&self, n: usize) -> Vec<C64> {
        let per = 2.0 * (self.width() + self.height());
        let counts = [self.width(), self.height(), self.width(), self.height()]
            .map(|l| ((n as f64 * l / per).round() as usize).max(8));
        let corners = [
            c(self.re_min, self.im_min),
            c(self.re_max, self.im_min),
            c(self.re_max, self.im_max),
            c(self.re_min, self.im_max),
        ];
        let mut pts = Vec::new();
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            for j in 0..counts[e] {
                pts.push(a + (b - a) * (j as f64 / counts[e] as f64));
            }
        }
        pts
    }

    fn split(&self, fx: f64, fy: f64) -> [Rect; 4] {
        let xm = self.re_min + fx * self.width();
        let ym = self.im_min + fy * self.height();
        [
            Rect { re_min: self.re_min, re_max: xm, im_min: self.im_min, im_max: ym },
            Rect { re_min: xm, re_max: self.re_max, im_min: self.im_min, im_max: ym },
            Rect { re_min: self.re_min, re_max: xm, im_min: ym, im_max: self.im_max },
            Rect { re_min: xm, re_max: self.re_max, im_min: ym, im_max: self.im_max },
        ]
    }

    fn grown(&self, d: f64) -> Rect {
        Rect { re_min: self.re_min - d, re_max: self.re_max + d, im_min: self.im_min - d, im_max: self.im_max + d }
    }
}

/// A zero of the Jost function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JostZero {
    /// Location in `Re k > 0`.
    pub k: C64,
    /// Multiplicity from the winding number.
    pub multiplicity: usize,
    /// `|𝒲_m(k)|` after refinement.
    pub jost_abs: f64,
}

impl JostZero {
    /// Eigenvalue `-k²` of the realization with pure boundary conditions.
    pub fn eigenvalue(&self) -> C64 {
        -self.k * self.k
    }
}

/// Winding number and power sums of the enclosed zeros.
struct Winding {
    count: i64,
    /// `s_p = Σ z_j^p` for `p = 1..`, counted with multiplicity.
    sums: Vec<C64>,
}

/// Largest zero count resolved from contour moments before subdividing.
const MAX_MOMENT_ZEROS: i64 = 4;

/// Roots of the monic polynomial with power sums `sums` (Newton identities, then Aberth iteration).
fn roots_from_power_sums(sums: &[C64]) -> Vec<C64> {
    let n = sums.len();
    let mut e = vec![c(1.0, 0.0)];
    for j in 1..=n {
        let mut acc = c(0.0, 0.0);
        for i in 1..=j {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[j - i] * sums[i - 1];
        }
        e.push(acc / j as f64);
    }
    // p(z) = Σ (-1)^j e_j z^{n-j}.
    let coef: Vec<C64> = (0..=n).map(|j| if j % 2 == 0 { e[j] } else { -e[j] }).collect();
    let eval = |z: C64| {
        let (mut p, mut d) = (c(0.0, 0.0), c(0.0, 0.0));
        for a in &coef {
            d = d * z + p;
            p = p * z + a;
        }
        (p, d)
    };
    let centre = sums[0] / n as f64;
    let radius = sums.iter().map(|s| s.norm()).fold(1e-3, f64::max).powf(1.0 / n as f64);
    let mut z: Vec<C64> = (0..n)
        .map(|j| centre + radius * C64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.25) / n as f64))
        .collect();
    for _ in 0..200 {
        let mut moved = 0.0f64;
        for j in 0..n {
            let (p, d) = eval(z[j]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / d;
            let rep: C64 = (0..n).filter(|&l| l != j).map(|l| 1.0 / (z[j] - z[l])).sum();
            let w = ratio / (1.0 - ratio * rep);
            z[j] -= w;
            moved = moved.max(w.norm());
        }
        if moved < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    z
}

struct Searcher<'a> {
    base: &'a Problem,
    m: C64,
    density: f64,
}

impl Searcher<'_> {
    fn eval(&self, k: C64) -> Result<C64> {
        jost_value(&self.base.with_k(k)?, self.m)
    }

    fn sample(&self, pts: &[C64]) -> Result<Vec<C64>> {
        pts.par_iter().map(|&k| self.eval(k)).collect()
    }

    /// Argument principle, doubling the samples until the winding is an integer within 0.01
    /// and no phase step exceeds a quarter turn.
    fn winding(&self, rect: &Rect) -> Result<Winding> {
        let perimeter = 2.0 * (rect.width() + rect.height());
        let mut n = ((self.density * perimeter).ceil() as usize).clamp(64, CONTOUR_SAMPLES);
        let mut previous: Option<i64> = None;
        while n <= MAX_CONTOUR_SAMPLES {
            let pts = rect.boundary(n);
            let vals = self.sample(&pts)?;
            let scale = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if vals.iter().any(|v| v.norm() <= ZERO_TOL * scale.max(1.0)) {
                return Err(Error::ContourThroughZero);
            }
            let mut total = 0.0;
            let mut max_step = 0.0f64;
            let mut moments = vec![c(0.0, 0.0); MAX_MOMENT_ZEROS as usize];
            for j in 0..pts.len() {
                let jn = (j + 1) % pts.len();
                let dlog = (vals[jn] / vals[j]).ln();
                total += dlog.im;
                max_step = max_step.max(dlog.im.abs());
                let mid = 0.5 * (pts[j] + pts[jn]);
                let mut zp = c(1.0, 0.0);
                for mo in moments.iter_mut() {
                    zp *= mid;
                    *mo += zp * dlog;
                }
            }
            let w = total / (2.0 * PI);
            let r = w.round();
            let integral = (w - r).abs() < 0.01;
            if integral && (max_step < 0.25 * PI || (max_step < 0.5 * PI && previous == Some(r as i64))) {
                let count = r as i64;
                let p = count.clamp(0, MAX_MOMENT_ZEROS) as usize;
                let sums = moments[..p].iter().map(|mo| mo / c(0.0, 2.0 * PI)).collect();
                return Ok(Winding { count, sums });
            }
            previous = if integral { Some(r as i64) } else { None };
            n *= 2;
        }
        Err(Error::ContourThroughZero)
    }

    fn newton(&self, k0: C64, multiplicity: usize) -> Result<(C64, f64)> {
        let mut k = k0;
        let mut w = self.eval(k)?;
        for _ in 0..60 {
            let h = 1e-6 * k.norm().max(1.0);
            let d = (self.eval(k + h)? - self.eval(k - h)?) / (2.0 * h);
            if d.norm() == 0.0 {
                break;
            }
            let step = multiplicity as f64 * w / d;
            k -= step;
            w = self.eval(k)?;
            if step.norm() <= 1e-14 * k.norm().max(1.0) || w.norm() <= 1e-15 {
                break;
            }
        }
        Ok((k, w.norm()))
    }

    /// Simple zeros seeded by the roots of the moment polynomial; `None` if any seed fails.
    fn from_moments(&self, rect: &Rect, wind: &Winding) -> Result<Option<Vec<JostZero>>> {
        let size = rect.width().max(rect.height());
        let mut out: Vec<JostZero> = Vec::new();
        for guess in roots_from_power_sums(&wind.sums) {
            let (k, w) = self.newton(guess, 1)?;
            let distinct = out.iter().all(|z| (z.k - k).norm() > 1e-7 * k.norm().max(1.0));
            if !rect.contains(k, 1e-9 * size.max(1.0)) || w > ZERO_TOL || !distinct {
                return Ok(None);
            }
            out.push(JostZero { k, multiplicity: 1, jost_abs: w });
        }
        Ok(Some(out))
    }

    fn locate(&self, rect: Rect, wind: Winding, depth: usize) -> Result<Vec<JostZero>> {
        if wind.count <= 0 {
            return Ok(vec![]);
        }
        if wind.count <= MAX_MOMENT_ZEROS {
            if let Some(z) = self.from_moments(&rect, &wind)? {
                return Ok(z);
            }
        }
        let size = rect.width().max(rect.height());
        if depth >= 14 || size < 1e-7 {
            // A cluster this tight is one multiple zero.
            let mult = wind.count as usize;
            let (k, w) = self.newton(wind.sums[0] / wind.count as f64, mult)?;
            if !rect.contains(k, 1e-6 * size.max(1.0)) || w > ZERO_TOL {
                return Err(Error::CountMismatch { winding: wind.count, found: 0 });
            }
            return Ok(vec![JostZero { k, multiplicity: mult, jost_abs: w }]);
        }
        for &(fx, fy) in &[(0.4731, 0.4617), (0.5389, 0.5523), (0.4123, 0.5871)] {
            let parts = rect.split(fx, fy);
            let winds: Vec<Result<Winding>> = parts.iter().map(|r| self.winding(r)).collect();
            if winds.iter().any(|w| matches!(w, Err(Error::ContourThroughZero))) {
                continue;
            }
            let winds: Vec<Winding> = winds.into_iter().collect::<Result<_>>()?;
            if winds.iter().map(|w| w.count).sum::<i64>() != wind.count {
                continue;
            }
            let mut out = Vec::new();
            for (r, w) in parts.into_iter().zip(winds) {
                out.extend(self.locate(r, w, depth + 1)?);
            }
            return Ok(out);
        }
        Err(Error::ContourThroughZero)
    }
}

/// Zeros of `𝒲_m` inside `rect` (strictly inside `Re k > 0`), with multiplicities.
///
/// All evaluations share one grid, built for `k = re_min`.
pub fn find_jost_zeros(pot: &Potential, m: C64, rect: Rect, cfg: SolverConfig) -> Result<Vec<JostZero>> {
    if !(rect.re_min > 0.0 && rect.re_max > rect.re_min && rect.im_max > rect.im_min) {
        return Err(Error::Domain("region must be a non-empty rectangle inside Re k > 0".into()));
    }
    let cfg = SolverConfig { neumann_report: false, ..cfg };
    let base = Problem::new(c(rect.re_min, 0.0), pot.clone(), cfg)?;
    let density = CONTOUR_SAMPLES as f64 / (2.0 * (rect.width() + rect.height()));
    let searcher = Searcher { base: &base, m, density };
    let mut region = rect;
    let mut wind = None;
    for attempt in 0..4 {
        match searcher.winding(&region) {
            Ok(w) => {
                wind = Some(w);
                break;
            }
            Err(Error::ContourThroughZero) => {
                let d = 1e-3 * rect.width().min(rect.height()) * (attempt as f64 + 1.0);
                region = rect.grown(if attempt % 2 == 0 { -d } else { d });
                region.re_min = region.re_min.max(0.5 * rect.re_min);
            }
            Err(e) => return Err(e),
        }
    }
    let wind = wind.ok_or(Error::ContourThroughZero)?;
    let count = wind.count;
    let mut zeros = searcher.locate(region, wind, 0)?;
    zeros.sort_by(|a, b| a.k.re.total_cmp(&b.k.re).then(a.k.im.total_cmp(&b.k.im)));
    let found: usize = zeros.iter().map(|z| z.multiplicity).sum();
    if found as i64 != count {
        return Err(Error::CountMismatch { winding: count, found });
    }
    Ok(zeros)
}

/// Boundary condition at zero selecting a perturbed Green kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Realization {
    /// `h = u_m`.
    Pure(C64),
    /// `h = u_m + κ Γ(1-m)/Γ(1+m) u_{-m}`; `None` means `κ = ∞`, i.e. `h = u_{-m}`.
    MixedKappa(C64, Option<C64>),
    /// `m = 0`, `h = ν u_0 + p_0`; `None` means `ν = ∞`, i.e. `h = u_0`.
    MixedNu(Option<C64>),
    /// `h = u_m + κ Γ(1-m)/Γ(1+m) u^{[n]}_{-m}`; `None` means `h = u^{[n]}_{-m}`.
    MixedN(usize, C64, Option<C64>),
}

impl Realization {
    /// Order of the operator.
    pub fn order(&self) -> C64 {
        match *self {
            Realization::Pure(m) | Realization::MixedKappa(m, _) | Realization::MixedN(_, m, _) => m,
            Realization::MixedNu(_) => c(0.0, 0.0),
        }
    }
}

/// A realization together with the spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbedKernelSpec {
    /// Boundary condition.
    pub realization: Realization,
    /// Spectral parameter.
    pub k: C64,
}

/// `G(x, y) = v(x_>) h(x_<) / 𝒲(v, h)` on a problem grid.
#[derive(Debug, Clone)]
pub struct PerturbedGreen {
    /// Kernel parameters.
    pub spec: PerturbedKernelSpec,
    /// Jost-type solution, gauge `-1`.
    pub v: GridFunction,
    /// Solution obeying the boundary condition at zero, gauge `+1`.
    pub h: GridFunction,
    /// `𝒲(v, h)`.
    pub denom: C64,
}

fn kappa_factor(m: C64) -> Result<C64> {
    Ok(gamma(1.0 - m)? / gamma(1.0 + m)?)
}

pub(crate) fn boundary_solution(pb: &Problem, realization: Realization) -> Result<GridFunction> {
    let h = match realization {
        Realization::Pure(m) => build_u(pb, m)?.data,
        Realization::MixedKappa(m, kappa) => {
            if m.norm() < M_ZERO_TOL {
                return Err(Error::Domain("the κ condition needs m ≠ 0".into()));
            }
            // (m, κ) and (-m, 1/κ) describe the same condition.
            let (m, kappa) = if m.re < 0.0 {
                let inv = match kappa {
                    None => Some(c(0.0, 0.0)),
                    Some(z) if z.norm() == 0.0 => None,
                    Some(z) => Some(1.0 / z),
                };
                (-m, inv)
            } else {
                (m, kappa)
            };
            match kappa {
                Some(z) if z.norm() == 0.0 => build_u(pb, m)?.data,
                None => build_u(pb, -m)?.data,
                Some(z) => {
                    let up = build_u(pb, m)?.data;
                    let un = build_u(pb, -m)?.data;
                    up.add_scaled(&un, z * kappa_factor(m)?)?
                }
            }
        }
        Realization::MixedNu(nu) => {
            let u0 = build_u(pb, c(0.0, 0.0))?.data;
            match nu {
                None => u0,
                Some(nu) => build_p0(pb)?.data.add_scaled(&u0, nu)?,
            }
        }
        Realization::MixedN(n, m, kappa) => {
            if !(m.re >= 0.0) {
                return Err(Error::Domain("the [n] condition needs Re m ≥ 0".into()));
            }
            let un = build_un(pb, n, m)?.data;
            match kappa {
                None => un,
                Some(z) => build_u(pb, m)?.data.add_scaled(&un, z * kappa_factor(m)?)?,
            }
        }
    };
    h.regauged(1)
}

fn hermite(f: &GridFunction, x: f64) -> Result<C64> {
    let xs = &f.grid.x;
    let n = xs.len();
    if !(x >= xs[0] && x <= xs[n - 1]) {
        return Err(Error::Domain(format!("x = {x} lies outside the grid")));
    }
    let i = match xs.binary_search_by(|p| p.total_cmp(&x)) {
        Ok(i) => return Ok(f.vals[i]),
        Err(i) => i - 1,
    };
    let s = -(f.gauge as f64) * f.k;
    let (x0, x1) = (xs[i], xs[i + 1]);
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (y0, y1) = (f.vals[i], f.vals[i + 1]);
    let (d0, d1) = (f.ders[i] + s * y0, f.ders[i + 1] + s * y1);
    let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
    let h10 = t * (1.0 - t) * (1.0 - t);
    let h01 = t * t * (3.0 - 2.0 * t);
    let h11 = t * t * (t - 1.0);
    Ok(h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1)
}

impl PerturbedGreen {
    /// Builds `v` and `h` on the problem grid; `ResolventPole` when `𝒲(v, h)` vanishes.
    pub fn new(pb: &Problem, realization: Realization) -> Result<Self> {
        if pb.k.is_zero {
            return Err(Error::Domain("perturbed Green kernels are built for k ≠ 0".into()));
        }
        let m = realization.order();
        let v = build_v(pb, m)?.data.regauged(-1)?;
        let h = boundary_solution(pb, realization)?;
        let (denom, x) = matched_wronskian(&v, &h)?;
        let i = pb.grid().nearest(x);
        let size = |f: &GridFunction| f.vals[i].norm() + f.ders[i].norm() * x;
        if !(denom.norm() > ZERO_TOL * size(&v) * size(&h) / x) {
            return Err(Error::ResolventPole(denom.norm()));
        }
        Ok(Self { spec: PerturbedKernelSpec { realization, k: pb.k.k }, v, h, denom })
    }

    /// `G(x, y)` by cubic Hermite interpolation of the gauged factors.
    pub fn eval(&self, x: f64, y: f64) -> Result<C64> {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let e = (-self.spec.k * (hi - lo)).exp();
        Ok(hermite(&self.v, hi)? * hermite(&self.h, lo)? * e / self.denom)
    }

    /// `f = ∫ G(·, y) g(y) dy` and `f'`, returned in gauge `0`.
    pub fn apply(&self, g: &GridFunction) -> Result<GridFunction> {
        let g = g.regauged(0)?;
        let grid = self.v.grid.clone();
        let n = grid.len();
        let k = self.spec.k;
        let hg: Vec<C64> = (0..n).map(|i| self.h.vals[i] * g.vals[i]).collect();
        let vg: Vec<C64> = (0..n).map(|i| self.v.vals[i] * g.vals[i]).collect();
        let jp = cumulative_integral(&grid, &hg, &hg, k, true);
        let jm = cumulative_integral(&grid, &vg, &vg, k, false);
        let mut out = GridFunction::zeros(grid, k, 0);
        for i in 0..n {
            out.vals[i] = (self.v.vals[i] * jp[i] + self.h.vals[i] * jm[i]) / self.denom;
            out.ders[i] = (self.v.ders[i] * jp[i] + self.h.ders[i] * jm[i]) / self.denom;
        }
        Ok(out)
    }
}

/// `G(x, y)` of the perturbed kernel for `realization` at `pb.k`.
pub fn eval_perturbed_kernel(pb: &Problem, realization: Realization, x: f64, y: f64) -> Result<C64> {
    PerturbedGreen::new(pb, realization)?.eval(x, y)
}

/// Resolvent applied to `g`, with the relative residual of `(L + k²) f = g`
/// (see [`equation_residual`]).
pub fn resolvent_apply(pb: &Problem, realization: Realization, g: &GridFunction) -> Result<(GridFunction, f64)> {
    let green = PerturbedGreen::new(pb, realization)?;
    let f = green.apply(g)?;
    let g0 = g.regauged(0)?;
    if g0.vals.iter().all(|v| v.norm() == 0.0) {
        return Ok((f, 0.0));
    }
    let res = equation_residual(pb, realization.order(), &f, Some(&g0))?;
    Ok((f, res))
}
