//! Closed-form solutions and Green kernels of `L⁰_{m²} + k²`.
//!
//! With `c = ln(k/2) + γ`:
//! * `u⁰_m = x^{½+m} F_m(k²x²/4) = √(2/(πk)) (2/k)^m 𝓘_m(kx)`,
//! * `v⁰_m = √(π/(2k)) (k/2)^m 𝓚_m(kx)`, `w⁰_m = 𝓚_m(kx)`,
//! * `p⁰_0 = -v⁰_0 - c·u⁰_0`.
//!
//! Values can be returned in a gauge `σ ∈ {-1, 0, 1}`: the pair
//! `e^{-σkx}(f, f')` is produced without forming `e^{±kx}` separately.

use crate::error::{Error, Result};
use crate::model::SpectralPoint;
use crate::specfun::{
    big_f, c, cal_i_scaled, cal_k_scaled, cpow, gamma, rgamma, C64, EULER_GAMMA, SERIES_RADIUS,
};
use std::f64::consts::PI;

/// `|m|` below which the order counts as zero.
pub const M_ZERO_TOL: f64 = 1e-14;

/// One of the unperturbed solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionKind {
    /// `u⁰_m`, regular at zero.
    U0,
    /// `v⁰_m`, decaying at infinity.
    V0,
    /// `w⁰_m = 𝓚_m(kx)`.
    W0,
    /// `p⁰_0`, logarithmic at zero (`m = 0` only).
    P0,
}

/// `ln(k/2) + γ`.
pub fn log_constant(k: C64) -> C64 {
    (0.5 * k).ln() + EULER_GAMMA
}

fn gauge_factor(k: C64, x: f64, sigma: i8) -> C64 {
    (-(sigma as f64) * k * x).exp()
}

fn guarded_exp(e: C64) -> Result<C64> {
    if e.re > 700.0 {
        return Err(Error::Overflow(format!("exp({:.3e}) exceeds range", e.re)));
    }
    Ok(e.exp())
}

/// `e^{-σkx}(u⁰_m, u⁰_m')`.
fn u0_gauged(m: C64, k: C64, x: f64, sigma: i8) -> Result<(C64, C64)> {
    let kx = k * x;
    if kx.norm() <= SERIES_RADIUS {
        let w = 0.25 * kx * kx;
        let p = cpow(c(x, 0.0), m + 0.5);
        let f0 = big_f(m, w)?;
        let f1 = big_f(m + 1.0, w)?;
        let val = p * f0;
        let der = (m + 0.5) / x * val + p * (0.5 * k * kx) * f1;
        let g = gauge_factor(k, x, sigma);
        return Ok((val * g, der * g));
    }
    let pre = (2.0 / (PI * k)).sqrt() * cpow(2.0 / k, m);
    let (i0, i1) = cal_i_scaled(m, kx)?;
    let g = guarded_exp((1.0 - sigma as f64) * kx)?;
    Ok((pre * i0 * g, pre * k * i1 * g))
}

/// `e^{-σkx}(v⁰_m, v⁰_m')`.
fn v0_gauged(m: C64, k: SpectralPoint, x: f64, sigma: i8) -> Result<(C64, C64)> {
    if k.is_zero {
        if m.re < 0.0 || m.norm() < M_ZERO_TOL {
            return Err(Error::Domain("v0 at k = 0 requires Re m >= 0 and m != 0".into()));
        }
        let val = 0.5 * gamma(m)? * cpow(c(x, 0.0), 0.5 - m);
        return Ok((val, (0.5 - m) / x * val));
    }
    let k = k.k;
    let kx = k * x;
    let pre = (PI / (2.0 * k)).sqrt() * cpow(0.5 * k, m);
    let (k0, k1) = cal_k_scaled(m, kx)?;
    let g = guarded_exp(-(1.0 + sigma as f64) * kx)?;
    Ok((pre * k0 * g, pre * k * k1 * g))
}

/// `e^{-σkx}(f, f')` for one of the unperturbed solutions.
pub fn eval_solution_gauged(
    kind: SolutionKind,
    m: C64,
    k: SpectralPoint,
    x: f64,
    sigma: i8,
) -> Result<(C64, C64)> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    match kind {
        SolutionKind::U0 => u0_gauged(m, k.k, x, sigma),
        SolutionKind::V0 => v0_gauged(m, k, x, sigma),
        SolutionKind::W0 => {
            if k.is_zero {
                return Err(Error::Domain("w0 is undefined at k = 0".into()));
            }
            let (v, d) = v0_gauged(m, k, x, sigma)?;
            let s = w0_factor(m, k.k);
            Ok((s * v, s * d))
        }
        SolutionKind::P0 => {
            if m.norm() >= M_ZERO_TOL {
                return Err(Error::Domain("p0 requires m = 0".into()));
            }
            if k.is_zero {
                let val = x.sqrt() * x.ln();
                let der = (0.5 * x.ln() + 1.0) / x.sqrt();
                return Ok((c(val, 0.0), c(der, 0.0)));
            }
            let zero = C64::new(0.0, 0.0);
            let (v, vd) = v0_gauged(zero, k, x, sigma)?;
            let (u, ud) = u0_gauged(zero, k.k, x, sigma)?;
            let cc = log_constant(k.k);
            Ok((-v - cc * u, -vd - cc * ud))
        }
    }
}

/// `(f(x), f'(x))` for one of the unperturbed solutions.
pub fn eval_solution(kind: SolutionKind, m: C64, k: SpectralPoint, x: f64) -> Result<(C64, C64)> {
    eval_solution_gauged(kind, m, k, x, 0)
}

/// `√(2k/π)(2/k)^m`, the factor with `w⁰_m = factor·v⁰_m`.
pub fn w0_factor(m: C64, k: C64) -> C64 {
    (2.0 * k / PI).sqrt() * cpow(2.0 / k, m)
}

/// Pairs with a closed-form Wronskian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WronskianPair {
    /// `𝒲(v⁰_m, u⁰_m)`.
    V0U0,
    /// `𝒲(u⁰_m, u⁰_{-m})`.
    U0U0NegM,
    /// `𝒲(u⁰_0, p⁰_0)`.
    U0P0,
}

/// Closed-form Wronskian `𝒲(f, g) = f g' - f' g` of an unperturbed pair.
pub fn exact_wronskian(pair: WronskianPair, m: C64) -> C64 {
    match pair {
        WronskianPair::V0U0 | WronskianPair::U0P0 => c(1.0, 0.0),
        WronskianPair::U0U0NegM => -2.0 * (PI * m).sin() / PI,
    }
}

/// Identifies a Green kernel of `L⁰_{m²} + k²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    /// Canonical bisolution `v⁰(x)u⁰(y) - u⁰(x)v⁰(y)`.
    Bisolution,
    /// `θ(x-y)·bisolution`.
    Forward,
    /// `-θ(y-x)·bisolution`.
    Backward,
    /// Two-sided kernel with pure boundary conditions.
    Bowtie,
    /// Logarithmic near zero (`m = 0`).
    Diamond,
    /// Logarithmic near infinity (`m = 0`).
    Triangledown,
    /// Mixed boundary condition `κ` at zero (`None` means `κ = ∞`).
    MixedKappa(Option<C64>),
    /// Mixed logarithmic boundary condition `ν` at zero, `m = 0` (`None` means `ν = ∞`).
    MixedNu(Option<C64>),
}

/// A Green kernel with its parameters and optional compression to `]0, a]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    /// Kernel kind.
    pub kind: KernelKind,
    /// Order.
    pub m: C64,
    /// Spectral parameter.
    pub k: SpectralPoint,
    /// Compression point `a`.
    pub compressed_to: Option<f64>,
}

impl KernelSpec {
    /// Validates the parameter combination.
    pub fn new(kind: KernelKind, m: C64, k: SpectralPoint, compressed_to: Option<f64>) -> Result<Self> {
        let m_zero = m.norm() < M_ZERO_TOL;
        match kind {
            KernelKind::Diamond | KernelKind::Triangledown | KernelKind::MixedNu(_) if !m_zero => {
                return Err(Error::Domain("logarithmic kernels require m = 0".into()))
            }
            KernelKind::Bowtie if k.is_zero && m_zero => {
                return Err(Error::Domain("the two-sided kernel at k = 0 requires m != 0".into()))
            }
            KernelKind::MixedKappa(_) if k.is_zero && m_zero => {
                return Err(Error::Domain("mixed kernel at k = 0 requires m != 0".into()))
            }
            KernelKind::MixedKappa(_) if k.is_zero && m.re == 0.0 => {
                return Err(Error::Domain("mixed kernel at k = 0 requires Re m != 0".into()))
            }
            _ => {}
        }
        if let Some(a) = compressed_to {
            if !(a > 0.0) {
                return Err(Error::Domain("compression point must be positive".into()));
            }
        }
        Ok(Self { kind, m, k, compressed_to })
    }
}

/// Boundary-condition data of a mixed kernel: `G = v(x_>) h(x_<) / D` with
/// `h = α u⁰_{m'} + β u⁰_{-m'}` and `Re m' ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedData {
    /// Order with non-negative real part.
    pub m: C64,
    /// Coefficient of `u⁰_{m'}`.
    pub alpha: C64,
    /// Coefficient of `u⁰_{-m'}`.
    pub beta: C64,
    /// Denominator.
    pub denom: C64,
}

/// Reduces `G⁰_{m,κ}` to the form `v⁰_{m'}(x_>) h(x_<) / D`.
pub fn mixed_kappa_data(m: C64, kappa: Option<C64>, k: SpectralPoint) -> Result<MixedData> {
    // (m, κ) and (-m, 1/κ) give the same kernel.
    let (m, kappa) = if m.re < 0.0 {
        let inv = match kappa {
            None => Some(C64::new(0.0, 0.0)),
            Some(z) if z.norm() == 0.0 => None,
            Some(z) => Some(1.0 / z),
        };
        (-m, inv)
    } else {
        (m, kappa)
    };
    let one = c(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    if m.norm() < M_ZERO_TOL {
        return Ok(MixedData { m, alpha: one, beta: zero, denom: one });
    }
    let scale = if k.is_zero { zero } else { cpow(0.5 * k.k, 2.0 * m) };
    let data = match kappa {
        Some(z) if z.norm() == 0.0 => MixedData { m, alpha: one, beta: zero, denom: one },
        Some(z) => MixedData {
            m,
            alpha: rgamma(-m),
            beta: -z * rgamma(m),
            denom: rgamma(-m) - z * rgamma(m) * scale,
        },
        None => {
            if k.is_zero {
                return Err(Error::Domain("κ = ∞ at k = 0 needs the pure kernel of -m".into()));
            }
            MixedData { m, alpha: zero, beta: one, denom: scale }
        }
    };
    if data.denom.norm() <= 1e-300 || data.denom.norm() < 1e-14 * (data.alpha.norm() + data.beta.norm()) {
        return Err(Error::MixedDenominatorZero);
    }
    Ok(data)
}

/// Evaluates the kernel at `(x, y)`.
pub fn eval_kernel(spec: &KernelSpec, x: f64, y: f64) -> Result<C64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::Domain("kernel arguments must be positive".into()));
    }
    if let Some(a) = spec.compressed_to {
        if x > a || y > a {
            return Ok(C64::new(0.0, 0.0));
        }
    }
    let (m, k) = (spec.m, spec.k);
    let zero = C64::new(0.0, 0.0);
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    // v(hi)·u(lo) with the exponentials combined into e^{-k(hi-lo)}.
    let decaying_product = |vk: SolutionKind, vm: C64, uk: SolutionKind, um: C64| -> Result<C64> {
        let (v, _) = eval_solution_gauged(vk, vm, k, hi, -1)?;
        let (u, _) = eval_solution_gauged(uk, um, k, lo, 1)?;
        Ok(v * u * (-k.k * (hi - lo)).exp())
    };
    match spec.kind {
        KernelKind::Bisolution | KernelKind::Forward | KernelKind::Backward => {
            let b = bisolution(m, k, x, y)?;
            Ok(match spec.kind {
                KernelKind::Forward if x < y => zero,
                KernelKind::Backward if x >= y => zero,
                KernelKind::Backward => -b,
                _ => b,
            })
        }
        KernelKind::Bowtie => {
            if k.is_zero {
                let p = |t: f64, e: C64| cpow(c(t, 0.0), e);
                Ok(p(hi, 0.5 - m) * p(lo, 0.5 + m) / (2.0 * m))
            } else {
                decaying_product(SolutionKind::V0, m, SolutionKind::U0, m)
            }
        }
        KernelKind::Diamond => {
            // -p⁰(x_>) u⁰(x_<).
            let (p, _) = eval_solution_gauged(SolutionKind::P0, zero, k, hi, 1)?;
            let (u, _) = eval_solution_gauged(SolutionKind::U0, zero, k, lo, 1)?;
            Ok(-p * u * (k.k * (hi + lo)).exp())
        }
        KernelKind::Triangledown => {
            // u⁰(x_>) p⁰(x_<).
            let (u, _) = eval_solution(SolutionKind::U0, zero, k, hi)?;
            let (p, _) = eval_solution(SolutionKind::P0, zero, k, lo)?;
            Ok(u * p)
        }
        KernelKind::MixedKappa(kappa) => {
            let d = mixed_kappa_data(m, kappa, k)?;
            let (u1, _) = eval_solution_gauged(SolutionKind::U0, d.m, k, lo, 1)?;
            let (u2, _) = eval_solution_gauged(SolutionKind::U0, -d.m, k, lo, 1)?;
            let h = d.alpha * u1 + d.beta * u2;
            if k.is_zero {
                let (v, _) = eval_solution(SolutionKind::V0, d.m, k, hi)?;
                return Ok(v * h / d.denom);
            }
            let (v, _) = eval_solution_gauged(SolutionKind::V0, d.m, k, hi, -1)?;
            Ok(v * h * (-k.k * (hi - lo)).exp() / d.denom)
        }
        KernelKind::MixedNu(nu) => {
            let (u, _) = eval_solution(SolutionKind::U0, zero, k, lo)?;
            let (p, _) = eval_solution(SolutionKind::P0, zero, k, lo)?;
            let Some(nu) = nu else {
                return eval_kernel(&KernelSpec { kind: KernelKind::Bowtie, ..*spec }, x, y);
            };
            let h = nu * u + p;
            if k.is_zero {
                let (u_hi, _) = eval_solution(SolutionKind::U0, zero, k, hi)?;
                return Ok(h * u_hi);
            }
            let den = nu - log_constant(k.k);
            if den.norm() < 1e-14 * (1.0 + nu.norm()) {
                return Err(Error::MixedDenominatorZero);
            }
            let (v, _) = eval_solution(SolutionKind::V0, zero, k, hi)?;
            Ok(h * v / den)
        }
    }
}

fn bisolution(m: C64, k: SpectralPoint, x: f64, y: f64) -> Result<C64> {
    if k.is_zero {
        if m.norm() < M_ZERO_TOL {
            return Ok(c((x * y).sqrt() * (y.ln() - x.ln()), 0.0));
        }
        let p = |t: f64, e: C64| cpow(c(t, 0.0), e);
        return Ok((p(x, 0.5 - m) * p(y, 0.5 + m) - p(x, 0.5 + m) * p(y, 0.5 - m)) / (2.0 * m));
    }
    let (vx, _) = eval_solution_gauged(SolutionKind::V0, m, k, x, -1)?;
    let (ux, _) = eval_solution_gauged(SolutionKind::U0, m, k, x, 1)?;
    let (vy, _) = eval_solution_gauged(SolutionKind::V0, m, k, y, -1)?;
    let (uy, _) = eval_solution_gauged(SolutionKind::U0, m, k, y, 1)?;
    let d = k.k * (x - y);
    Ok(vx * uy * guarded_exp(-d)? - ux * vy * guarded_exp(d)?)
}

/// `(∂_m u⁰_m, ∂_m v⁰_m)` at `m = 0`: `(p⁰_0 + γu⁰_0, ln(k/2) v⁰_0)`, `k ≠ 0`.
pub fn order_derivatives_at_zero(k: SpectralPoint, x: f64) -> Result<(C64, C64)> {
    if k.is_zero {
        return Err(Error::Domain("order derivatives need k != 0".into()));
    }
    let zero = C64::new(0.0, 0.0);
    let (u, _) = eval_solution(SolutionKind::U0, zero, k, x)?;
    let (v, _) = eval_solution(SolutionKind::V0, zero, k, x)?;
    let (p, _) = eval_solution(SolutionKind::P0, zero, k, x)?;
    Ok((p + EULER_GAMMA * u, (0.5 * k.k).ln() * v))
}
