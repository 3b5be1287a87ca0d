//! Wronskian-at-zero boundary functionals, boundary bases, realizations and
//! the scattering length.
//!
//! A boundary functional is `f ↦ 𝒲(r, f; 0)` for a reference function `r`.
//! Realizations are fixed by linear conditions on such functionals.

use crate::error::{Error, Result};
use crate::jost::{boundary_solution, Realization};
use crate::model::{class_integral, ClassSide, Potential};
use crate::solutions::{
    build_p0, build_p_diamond, build_q, build_q0ln, build_u, build_u0n, build_u_bowtie, Problem, SolutionTag,
};
use crate::specfun::{c, cpow, gamma, C64};
use crate::unperturbed::M_ZERO_TOL;
use crate::volterra::GridFunction;
use std::fmt;

/// Number of nodes in the extrapolation table.
pub const TABLE_NODES: usize = 8;
/// Ratio between consecutive extrapolation nodes.
pub const TABLE_RATIO: f64 = 2.0;
/// Highest polynomial order of the extrapolation.
pub const TABLE_ORDER: usize = 3;
/// Relative boundary-condition tolerance.
pub const TOL_BC_REL: f64 = 1e-6;
/// Largest `n` tried for the partial-sum basis `u^{0[n]}_{-m}`.
pub const MAX_BASIS_N: usize = 8;
/// `ε` probing membership in some class with `ε > 0`.
pub const EPS_PROBE: f64 = 1e-3;

/// Reference function of a boundary functional.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    /// `x^p`.
    Power(C64),
    /// `x^{½} ln x`.
    LogPower,
    /// A solution sampled on a grid.
    Solution(GridFunction),
}

/// `f ↦ 𝒲(reference, f; 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunctional {
    /// Reference function.
    pub reference: Reference,
    /// Human-readable name, including any compression point.
    pub label: String,
}

impl BoundaryFunctional {
    /// `𝒲(x^p, ·; 0)`.
    pub fn power(p: C64) -> Self {
        Self { reference: Reference::Power(p), label: format!("x^({p})") }
    }

    /// `𝒲(x^{½} ln x, ·; 0)`.
    pub fn log_power() -> Self {
        Self { reference: Reference::LogPower, label: "x^(1/2) ln x".into() }
    }

    /// `𝒲(r, ·; 0)` for a sampled solution `r`.
    pub fn solution(r: GridFunction, label: impl Into<String>) -> Self {
        Self { reference: Reference::Solution(r), label: label.into() }
    }

    fn at(&self, f: &GridFunction, i: usize) -> Result<(C64, C64)> {
        let x = f.grid.x[i];
        match &self.reference {
            Reference::Power(p) => {
                let v = cpow(c(x, 0.0), *p);
                Ok((v, *p * v / x))
            }
            Reference::LogPower => {
                let (s, l) = (x.sqrt(), x.ln());
                Ok((c(s * l, 0.0), c((0.5 * l + 1.0) / s, 0.0)))
            }
            Reference::Solution(r) => {
                if !(std::sync::Arc::ptr_eq(&r.grid, &f.grid) || r.grid.x == f.grid.x) {
                    return Err(Error::Domain("reference and function live on different grids".into()));
                }
                r.at(i)
            }
        }
    }

    /// `𝒲(reference, f; x_i)`.
    pub fn wronskian_at(&self, f: &GridFunction, i: usize) -> Result<C64> {
        let (r, dr) = self.at(f, i)?;
        let (g, dg) = f.at(i)?;
        Ok(r * dg - dr * g)
    }
}

/// Extrapolated `𝒲(r, f; 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroLimit {
    /// Extrapolated value.
    pub value: C64,
    /// Spread of the highest-order column of the table.
    pub error: f64,
}

/// Nodes `x_min·2^j`, `j < TABLE_NODES`, snapped to the grid.
fn table_nodes(f: &GridFunction) -> Vec<usize> {
    let x0 = f.grid.x_min();
    let mut out: Vec<usize> = Vec::with_capacity(TABLE_NODES);
    for j in 0..TABLE_NODES {
        let i = f.grid.nearest(x0 * TABLE_RATIO.powi(j as i32));
        if out.last().is_none_or(|&l| i > l) {
            out.push(i);
        }
    }
    out
}

/// `𝒲(φ, f; 0)` by Neville extrapolation to `x = 0` on geometrically spaced small nodes.
pub fn wronskian_at_zero(phi: &BoundaryFunctional, f: &GridFunction) -> Result<ZeroLimit> {
    let idx = table_nodes(f);
    if idx.len() < TABLE_ORDER + 2 {
        return Err(Error::Domain("grid too short for the extrapolation table".into()));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| f.grid.x[i]).collect();
    let ws: Vec<C64> = idx.iter().map(|&i| phi.wronskian_at(f, i)).collect::<Result<_>>()?;
    if ws.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
        return Err(Error::NoConvergence("non-finite Wronskian near zero".into()));
    }
    let (first, last) = (ws[0].norm(), ws[ws.len() - 1].norm());
    // Growth towards zero means the limit does not exist.
    let growing = ws.windows(2).all(|p| p[0].norm() > p[1].norm());
    if growing && first > 10.0 * last.max(1e-300) && (ws[0] - ws[1]).norm() > 1e-3 * first {
        return Err(Error::NoConvergence(format!("Wronskian grows towards zero ({first:.3e} vs {last:.3e})")));
    }
    let n = ws.len();
    let mut col = ws.clone();
    let mut prev = col.clone();
    for l in 1..=TABLE_ORDER {
        prev = col.clone();
        col = (0..n - l).map(|j| (xs[j + l] * prev[j] - xs[j] * prev[j + 1]) / (xs[j + l] - xs[j])).collect();
    }
    let value = col[0];
    let spread = col.iter().map(|v| (v - value).norm()).fold(0.0, f64::max);
    let error = spread.max((value - prev[0]).norm());
    Ok(ZeroLimit { value, error })
}

/// Row of the boundary-basis case table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisCase {
    /// `0 < Re m < 1`, `Q` only in the `ε = 0` class: compressed solution and `x^{½+m}`.
    CompressedPair,
    /// `0 < Re m < 1`, `Re m ≤ (n+1)ε/2`: partial sum `u^{0[n]}_{-m}` and `x^{½+m}`.
    PartialSum(usize),
    /// `0 < Re m ≤ ε/2`: `x^{½-m}` and `x^{½+m}`.
    PowerPair,
    /// `Re m = 0`, `m ≠ 0`: `x^{½-m}` and `x^{½+m}`.
    Imaginary,
    /// `m = 0`, logarithmic class with power 1: `p_0^{◇(a)}` and `u_0(·,0)`.
    ZeroCompressed,
    /// `m = 0`, logarithmic class with power 2: `p_0` and `x^{½}`.
    ZeroLog,
    /// `m = 0`, some `ε > 0`: `x^{½} ln x` and `x^{½}`.
    ZeroPower,
}

impl fmt::Display for BasisCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisCase::CompressedPair => write!(f, "(i)(a)"),
            BasisCase::PartialSum(n) => write!(f, "(i)(b) n={n}"),
            BasisCase::PowerPair => write!(f, "(i)(c)"),
            BasisCase::Imaginary => write!(f, "(ii)"),
            BasisCase::ZeroCompressed => write!(f, "(iii)(a)"),
            BasisCase::ZeroLog => write!(f, "(iii)(b)"),
            BasisCase::ZeroPower => write!(f, "(iii)(c)"),
        }
    }
}

/// Two functionals spanning the boundary space.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBasis {
    /// Selected row.
    pub case: BasisCase,
    /// Functional against the non-principal reference.
    pub first: BoundaryFunctional,
    /// Functional against the principal reference.
    pub second: BoundaryFunctional,
    /// Order actually used (`Re m ≥ 0`).
    pub m: C64,
}

fn in_class(pot: &Potential, eps: f64, log_power: f64) -> bool {
    class_integral(pot, ClassSide::Zero, eps, log_power).finite().is_some()
}

fn zero_energy(pb: &Problem) -> Result<Problem> {
    if pb.k.is_zero {
        Ok(pb.clone())
    } else {
        pb.with_k(c(0.0, 0.0))
    }
}

/// Normalises `m` to `Re m ≥ 0`; the boundary space depends on `m²` only.
fn normalised(m: C64) -> C64 {
    if m.re < 0.0 || (m.re == 0.0 && m.im < 0.0) {
        -m
    } else {
        m
    }
}

fn no_class(what: &str) -> Error {
    Error::ClassViolation(format!("{what}: Q is not locally integrable with weight x near zero"))
}

/// Basis of the boundary space for the strongest class the potential satisfies.
///
/// Solution references are zero-energy solutions on the grid of `pb`.
pub fn boundary_basis(m: C64, pb: &Problem) -> Result<BoundaryBasis> {
    if m.re.abs() >= 1.0 {
        return Err(Error::TrivialBoundarySpace);
    }
    let m = normalised(m);
    let pot = pb.pot();
    let half = c(0.5, 0.0);
    let pair = |case| BoundaryBasis {
        case,
        first: BoundaryFunctional::power(half - m),
        second: BoundaryFunctional::power(half + m),
        m,
    };
    if m.norm() < M_ZERO_TOL {
        if in_class(pot, EPS_PROBE, 0.0) {
            return Ok(BoundaryBasis {
                case: BasisCase::ZeroPower,
                first: BoundaryFunctional::log_power(),
                second: BoundaryFunctional::power(half),
                m,
            });
        }
        let pz = zero_energy(pb)?;
        if in_class(pot, 0.0, 2.0) {
            let p0 = build_p0(&pz)?.data;
            return Ok(BoundaryBasis {
                case: BasisCase::ZeroLog,
                first: BoundaryFunctional::solution(p0, "p_0(.,0)"),
                second: BoundaryFunctional::power(half),
                m,
            });
        }
        if in_class(pot, 0.0, 1.0) {
            let pd = build_p_diamond(&pz, None)?;
            let a = match pd.tag {
                SolutionTag::PDiamond { a, .. } => a,
                _ => f64::NAN,
            };
            let u0 = build_u(&pz, m)?.data;
            return Ok(BoundaryBasis {
                case: BasisCase::ZeroCompressed,
                first: BoundaryFunctional::solution(pd.data, format!("p_0^diamond(a={a:.6e})(.,0)")),
                second: BoundaryFunctional::solution(u0, "u_0(.,0)"),
                m,
            });
        }
        return Err(no_class("m = 0 boundary basis"));
    }
    if m.re == 0.0 {
        if in_class(pot, 0.0, 0.0) {
            return Ok(pair(BasisCase::Imaginary));
        }
        return Err(no_class("imaginary-order boundary basis"));
    }
    if in_class(pot, 2.0 * m.re, 0.0) {
        return Ok(pair(BasisCase::PowerPair));
    }
    let pz = zero_energy(pb)?;
    for n in 1..=MAX_BASIS_N {
        if in_class(pot, 2.0 * m.re / (n as f64 + 1.0), 0.0) {
            let u = build_u0n(&pz, n, m)?;
            return Ok(BoundaryBasis {
                case: BasisCase::PartialSum(n),
                first: BoundaryFunctional::solution(u, format!("u_-m^0[{n}](.,0)")),
                second: BoundaryFunctional::power(half + m),
                m,
            });
        }
    }
    if in_class(pot, 0.0, 0.0) {
        let ub = build_u_bowtie(&pz, m, None)?;
        let a = match ub.tag {
            SolutionTag::UBowtie { a, .. } => a,
            _ => f64::NAN,
        };
        return Ok(BoundaryBasis {
            case: BasisCase::CompressedPair,
            first: BoundaryFunctional::solution(ub.data, format!("u_-m^bowtie(a={a:.6e})(.,0)")),
            second: BoundaryFunctional::power(half + m),
            m,
        });
    }
    Err(no_class("boundary basis"))
}

/// `[[𝒲(b_i, f_j; 0)]]` for the two basis functionals and two test functions.
pub fn basis_matrix(basis: &BoundaryBasis, f1: &GridFunction, f2: &GridFunction) -> Result<[[C64; 2]; 2]> {
    let w = |b: &BoundaryFunctional, f: &GridFunction| wronskian_at_zero(b, f).map(|z| z.value);
    Ok([[w(&basis.first, f1)?, w(&basis.first, f2)?], [w(&basis.second, f1)?, w(&basis.second, f2)?]])
}

/// Closed realization of the perturbed Bessel operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RealizationKind {
    /// Pure boundary condition `𝒲(x^{½+m}, f; 0) = 0`.
    Hm(C64),
    /// `f ~ x^{½+m} + κ x^{½-m}`; `None` means `κ = ∞`.
    HmKappa(C64, Option<C64>),
    /// `m = 0`, `f ~ ν x^{½} + x^{½} ln x`; `None` means `ν = ∞`.
    H0Nu(Option<C64>),
    /// `f ~ x^{½+m} + κ Γ(1-m) u^{0[n]}_{-m}`; `None` means `κ = ∞`.
    HmN(usize, C64, Option<C64>),
    /// Minimal realization: both basis functionals vanish.
    Min(C64),
    /// Maximal realization: no condition.
    Max(C64),
}

impl RealizationKind {
    /// Order of the operator.
    pub fn order(&self) -> C64 {
        match *self {
            RealizationKind::Hm(m)
            | RealizationKind::HmKappa(m, _)
            | RealizationKind::HmN(_, m, _)
            | RealizationKind::Min(m)
            | RealizationKind::Max(m) => m,
            RealizationKind::H0Nu(_) => c(0.0, 0.0),
        }
    }

    /// Matching boundary condition of the perturbed Green kernels, if any.
    pub fn green_realization(&self) -> Option<Realization> {
        match *self {
            RealizationKind::Hm(m) => Some(Realization::Pure(m)),
            RealizationKind::HmKappa(m, kappa) => Some(Realization::MixedKappa(m, kappa)),
            RealizationKind::H0Nu(nu) => Some(Realization::MixedNu(nu)),
            RealizationKind::HmN(n, m, kappa) => Some(Realization::MixedN(n, m, kappa)),
            RealizationKind::Min(_) | RealizationKind::Max(_) => None,
        }
    }
}

/// A linear combination of boundary functionals required to vanish.
pub type Condition = Vec<(C64, BoundaryFunctional)>;

/// A realization with its defining conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationSpec {
    /// Which realization.
    pub kind: RealizationKind,
    /// Conditions at zero; all must vanish.
    pub conditions: Vec<Condition>,
}

impl RealizationSpec {
    /// Builds the conditions; solution references live on the grid of `pb`.
    pub fn new(kind: RealizationKind, pb: &Problem) -> Result<Self> {
        let one = c(1.0, 0.0);
        let half = c(0.5, 0.0);
        let p = BoundaryFunctional::power;
        let check_order = |m: C64| {
            if m.re.abs() >= 1.0 {
                Err(Error::TrivialBoundarySpace)
            } else {
                Ok(())
            }
        };
        let conditions = match kind {
            RealizationKind::Hm(m) => {
                if !(m.re > -1.0) {
                    return Err(Error::Domain("the pure realization needs Re m > -1".into()));
                }
                vec![vec![(one, p(half + m))]]
            }
            RealizationKind::HmKappa(m, kappa) => {
                check_order(m)?;
                if m.norm() < M_ZERO_TOL {
                    return Err(Error::Domain("the κ condition needs m ≠ 0".into()));
                }
                match kappa {
                    None => vec![vec![(one, p(half - m))]],
                    Some(z) => vec![vec![(z, p(half - m)), (one, p(half + m))]],
                }
            }
            RealizationKind::H0Nu(nu) => match nu {
                None => vec![vec![(one, p(half))]],
                Some(z) => vec![vec![(z, p(half)), (one, BoundaryFunctional::log_power())]],
            },
            RealizationKind::HmN(n, m, kappa) => {
                check_order(m)?;
                if !(m.re > 0.0) {
                    return Err(Error::Domain("the [n] realization needs Re m > 0".into()));
                }
                let pz = zero_energy(pb)?;
                let r = BoundaryFunctional::solution(build_u0n(&pz, n, m)?, format!("u_-m^0[{n}](.,0)"));
                match kappa {
                    None => vec![vec![(one, r)]],
                    Some(z) => vec![vec![(z * gamma(1.0 - m)?, r), (one, p(half + m))]],
                }
            }
            RealizationKind::Min(m) => {
                let b = boundary_basis(m, pb)?;
                vec![vec![(one, b.first)], vec![(one, b.second)]]
            }
            RealizationKind::Max(m) => {
                check_order(m)?;
                vec![]
            }
        };
        Ok(Self { kind, conditions })
    }
}

/// Outcome of [`domain_test`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainTest {
    /// Whether every condition holds within tolerance.
    pub in_domain: bool,
    /// Value of the condition farthest from zero.
    pub functional_value: C64,
    /// Its extrapolation error.
    pub error_estimate: f64,
    /// `TOL_BC_REL` times the size of `f` near zero.
    pub tol_bc: f64,
}

/// Size of `f` near zero: the larger of its two coefficients on `x^{½±m}` (or `x^{½}`, `x^{½} ln x`).
fn boundary_scale(m: C64, f: &GridFunction) -> Result<f64> {
    let m = normalised(m);
    let i = table_nodes(f)[0];
    let half = c(0.5, 0.0);
    if m.norm() < M_ZERO_TOL {
        let a = BoundaryFunctional::power(half).wronskian_at(f, i)?;
        let b = BoundaryFunctional::log_power().wronskian_at(f, i)?;
        return Ok(a.norm().max(b.norm()));
    }
    let a = BoundaryFunctional::power(half - m).wronskian_at(f, i)?;
    let b = BoundaryFunctional::power(half + m).wronskian_at(f, i)?;
    Ok(a.norm().max(b.norm()) / (2.0 * m).norm())
}

/// Checks the realization's boundary conditions on `f`.
pub fn domain_test(spec: &RealizationSpec, f: &GridFunction) -> Result<DomainTest> {
    let tol_bc = TOL_BC_REL * boundary_scale(spec.kind.order(), f)?;
    let mut worst = DomainTest { in_domain: true, functional_value: c(0.0, 0.0), error_estimate: 0.0, tol_bc };
    let mut worst_excess = f64::NEG_INFINITY;
    for cond in &spec.conditions {
        let (mut value, mut error) = (c(0.0, 0.0), 0.0);
        for (coef, phi) in cond {
            let z = wronskian_at_zero(phi, f)?;
            value += coef * z.value;
            error += coef.norm() * z.error;
        }
        let bound = tol_bc.max(3.0 * error);
        let excess = value.norm() / bound.max(1e-300);
        if excess > worst_excess {
            worst_excess = excess;
            worst.functional_value = value;
            worst.error_estimate = error;
        }
        if value.norm() > bound {
            worst.in_domain = false;
        }
    }
    Ok(worst)
}

/// Scattering length of a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScatteringLength {
    /// Finite value.
    Finite(C64),
    /// The zero-energy solution has no `q_m` component.
    Infinite,
}

/// Nodes averaged for the large-`x` decomposition.
const DECOMP_NODES: usize = 5;

fn averaged_wronskian(f: &GridFunction, g: &GridFunction, x: f64) -> Result<C64> {
    let n = f.len();
    let half = DECOMP_NODES / 2;
    let i = f.grid.nearest(x).clamp(half, n - 1 - half);
    let mut s = c(0.0, 0.0);
    for j in i - half..=i + half {
        s += f.wronskian_at(g, j)?;
    }
    Ok(s / DECOMP_NODES as f64)
}

/// `a` from `g = α q_m + β q_{-m}`: `a = -β/α` for `m ≠ 0`, and `a = e^{-β/α}` for
/// `g = α q_{0,ln} + β q_0` at `m = 0`.
///
/// `g` is the zero-energy solution obeying the realization's condition at zero.
pub fn scattering_length(kind: RealizationKind, pb: &Problem) -> Result<ScatteringLength> {
    let realization = kind
        .green_realization()
        .ok_or_else(|| Error::MethodUnavailable("minimal and maximal realizations have no scattering length".into()))?;
    let pz = if pb.k.is_zero { pb.clone() } else { Problem::new(c(0.0, 0.0), pb.pot().clone(), pb.cfg)? };
    let m = kind.order();
    let g = boundary_solution(&pz, realization)?;
    let x_star = pz.pot().support_radius().map_or(5.0, |r| (2.0 * r).max(5.0));
    let (alpha, beta) = if m.norm() < M_ZERO_TOL {
        let q0 = build_q(&pz, m)?.data;
        let qln = build_q0ln(&pz)?.data;
        // 𝒲(q_0, q_{0,ln}) = 1.
        (averaged_wronskian(&q0, &g, x_star)?, -averaged_wronskian(&qln, &g, x_star)?)
    } else {
        let qp = build_q(&pz, -m)?.data;
        let qm = build_q(&pz, m)?.data;
        // 𝒲(q_{-m}, q_m) = 2m.
        let two_m = 2.0 * m;
        (averaged_wronskian(&qm, &g, x_star)? / two_m, -averaged_wronskian(&qp, &g, x_star)? / two_m)
    };
    let size = alpha.norm() + beta.norm();
    if !(size > 0.0) || !size.is_finite() {
        return Err(Error::DegenerateDecomposition);
    }
    if alpha.norm() <= 1e-10 * size {
        return Ok(ScatteringLength::Infinite);
    }
    let ratio = -beta / alpha;
    Ok(ScatteringLength::Finite(if m.norm() < M_ZERO_TOL { ratio.exp() } else { ratio }))
}
