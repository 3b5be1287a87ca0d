//! Potentials, integrability classes and the `k`-dependent weights.

use crate::error::{Error, Result};
use crate::specfun::{c, C64};

/// `|k|` below which the spectral parameter counts as zero.
pub const DELTA_K0: f64 = 1e-12;

/// Shape of the perturbation `Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `Q = 0`.
    Zero,
    /// `Q = -β/x` on `]0, x_c]`.
    CoulombCutoff { beta: C64, xc: f64 },
    /// `Q = c·x^α` on `]0, x_c]`.
    PowerLaw { c: C64, alpha: f64, xc: f64 },
    /// `Q = V₀` on `[x₀, x₁]`.
    SquareWell { v0: C64, x0: f64, x1: f64 },
    /// `Q = c·e^{-λx}`.
    ExpDecay { c: C64, lambda: f64 },
    /// Linear interpolation in `(ln x, Q)`, constant below the first node and
    /// zero beyond the last.
    Tabulated { nodes: Vec<f64>, values: Vec<C64> },
}

/// Which one-sided limit to take at a jump of `Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from below.
    Left,
    /// Limit from above.
    Right,
}

/// A perturbation together with its declared exponents.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    /// Shape.
    pub kind: PotentialKind,
    /// `α₀` with `|Q(x)| ≲ x^{α₀}` near zero.
    pub sing_exponent: f64,
    /// `d` with `|Q(x)| ≲ x^{-d}` at infinity (`+∞` for compact or exponential decay).
    pub decay_exponent: f64,
}

impl Potential {
    /// Builds a potential with the exponents implied by its shape.
    pub fn new(kind: PotentialKind) -> Result<Self> {
        let sing = match &kind {
            PotentialKind::CoulombCutoff { .. } => -1.0,
            PotentialKind::PowerLaw { alpha, .. } => *alpha,
            _ => 0.0,
        };
        Self::with_exponents(kind, sing, f64::INFINITY)
    }

    /// Builds a potential with caller-declared exponents.
    pub fn with_exponents(kind: PotentialKind, sing_exponent: f64, decay_exponent: f64) -> Result<Self> {
        validate(&kind)?;
        Ok(Self { kind, sing_exponent, decay_exponent })
    }

    /// `Q = 0`.
    pub fn zero() -> Self {
        Self { kind: PotentialKind::Zero, sing_exponent: 0.0, decay_exponent: f64::INFINITY }
    }

    /// `Q = -β/x` on `]0, x_c]`.
    pub fn coulomb(beta: f64, xc: f64) -> Result<Self> {
        Self::new(PotentialKind::CoulombCutoff { beta: c(beta, 0.0), xc })
    }

    /// `Q = V₀` on `[x₀, x₁]`.
    pub fn square_well(v0: f64, x0: f64, x1: f64) -> Result<Self> {
        Self::new(PotentialKind::SquareWell { v0: c(v0, 0.0), x0, x1 })
    }

    /// `Q = c·e^{-λx}`.
    pub fn exp_decay(amp: f64, lambda: f64) -> Result<Self> {
        Self::new(PotentialKind::ExpDecay { c: c(amp, 0.0), lambda })
    }

    /// `Q(x)`.
    pub fn eval(&self, x: f64) -> Result<C64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("Q requires x > 0, got {x}")));
        }
        Ok(self.eval_side(x, Side::Left))
    }

    /// One-sided value of `Q` at `x > 0` (equal to `Q(x)` away from jumps).
    pub fn eval_side(&self, x: f64, side: Side) -> C64 {
        let zero = C64::new(0.0, 0.0);
        let inside = |a: f64, b: f64| match side {
            Side::Left => x > a && x <= b,
            Side::Right => x >= a && x < b,
        };
        match &self.kind {
            PotentialKind::Zero => zero,
            PotentialKind::CoulombCutoff { beta, xc } => {
                if inside(0.0, *xc) {
                    -*beta / x
                } else {
                    zero
                }
            }
            PotentialKind::PowerLaw { c: a, alpha, xc } => {
                if inside(0.0, *xc) {
                    *a * x.powf(*alpha)
                } else {
                    zero
                }
            }
            PotentialKind::SquareWell { v0, x0, x1 } => {
                let hit = match side {
                    Side::Left => x > *x0 && x <= *x1,
                    Side::Right => x >= *x0 && x < *x1,
                };
                if hit || (*x0 == 0.0 && x <= *x1 && x > 0.0 && side == Side::Left) {
                    *v0
                } else {
                    zero
                }
            }
            PotentialKind::ExpDecay { c: a, lambda } => *a * (-lambda * x).exp(),
            PotentialKind::Tabulated { nodes, values } => interpolate(nodes, values, x, side),
        }
    }

    /// Points in `]0, ∞[` where `Q` may jump, sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::ExpDecay { .. } => vec![],
            PotentialKind::CoulombCutoff { xc, .. } | PotentialKind::PowerLaw { xc, .. } => vec![*xc],
            PotentialKind::SquareWell { x0, x1, .. } => {
                if *x0 > 0.0 {
                    vec![*x0, *x1]
                } else {
                    vec![*x1]
                }
            }
            PotentialKind::Tabulated { nodes, .. } => vec![*nodes.last().expect("validated")],
        }
    }

    /// Right end of the support of `Q`, `None` when unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::ExpDecay { .. } => None,
            PotentialKind::CoulombCutoff { xc, .. } | PotentialKind::PowerLaw { xc, .. } => Some(*xc),
            PotentialKind::SquareWell { x1, .. } => Some(*x1),
            PotentialKind::Tabulated { nodes, .. } => nodes.last().copied(),
        }
    }

    /// Whether `Q` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            PotentialKind::Zero => true,
            PotentialKind::CoulombCutoff { beta, .. } => beta.norm() == 0.0,
            PotentialKind::PowerLaw { c: a, .. } | PotentialKind::ExpDecay { c: a, .. } => a.norm() == 0.0,
            PotentialKind::SquareWell { v0, x0, x1 } => v0.norm() == 0.0 || x1 <= x0,
            PotentialKind::Tabulated { values, .. } => values.iter().all(|v| v.norm() == 0.0),
        }
    }

    /// Parses the tabulated format: `x re im` per line, `#` comments.
    pub fn parse_tabulated(text: &str, sing_exponent: f64, decay_exponent: f64) -> Result<Self> {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if nums.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected `x re im`", lineno + 1)));
            }
            nodes.push(nums[0]);
            values.push(c(nums[1], nums[2]));
        }
        Self::with_exponents(PotentialKind::Tabulated { nodes, values }, sing_exponent, decay_exponent)
            .map_err(|e| match e {
                Error::Domain(s) => Error::Parse(s),
                other => other,
            })
    }
}

impl Potential {
    /// Writes a tabulated potential in the format read by [`Potential::parse_tabulated`].
    ///
    /// Values use the shortest representation that parses back to the same `f64`.
    pub fn tabulated_text(&self) -> Result<String> {
        let PotentialKind::Tabulated { nodes, values } = &self.kind else {
            return Err(Error::Domain("only tabulated potentials can be exported".into()));
        };
        let mut out = String::from("# x re(Q) im(Q)\n");
        for (x, v) in nodes.iter().zip(values) {
            out.push_str(&format!("{x:?} {:?} {:?}\n", v.re, v.im));
        }
        Ok(out)
    }

    /// Samples this potential at `nodes` into a tabulated potential with the same exponents.
    pub fn tabulate(&self, nodes: &[f64]) -> Result<Self> {
        let values = nodes.iter().map(|&x| self.eval(x)).collect::<Result<Vec<_>>>()?;
        Self::with_exponents(
            PotentialKind::Tabulated { nodes: nodes.to_vec(), values },
            self.sing_exponent,
            self.decay_exponent,
        )
    }
}

fn validate(kind: &PotentialKind) -> Result<()> {
    let bad = |s: &str| Err(Error::Domain(s.to_string()));
    match kind {
        PotentialKind::CoulombCutoff { xc, .. } | PotentialKind::PowerLaw { xc, .. } if !(*xc > 0.0) => {
            bad("cutoff x_c must be positive")
        }
        PotentialKind::SquareWell { x0, x1, .. } if !(*x0 >= 0.0 && x1 > x0) => bad("square well needs 0 <= x0 < x1"),
        PotentialKind::ExpDecay { lambda, .. } if !(*lambda > 0.0) => bad("decay rate must be positive"),
        PotentialKind::Tabulated { nodes, values } => {
            if nodes.is_empty() || nodes.len() != values.len() {
                return bad("tabulated potential needs matching non-empty nodes and values");
            }
            if nodes[0] <= 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
                return bad("tabulated nodes must be positive and strictly increasing");
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn interpolate(nodes: &[f64], values: &[C64], x: f64, side: Side) -> C64 {
    let last = *nodes.last().expect("validated");
    if x > last || (x == last && side == Side::Right) {
        return C64::new(0.0, 0.0);
    }
    if x <= nodes[0] {
        return values[0];
    }
    let j = nodes.partition_point(|&n| n < x);
    let (a, b) = (nodes[j - 1], nodes[j]);
    let t = (x.ln() - a.ln()) / (b.ln() - a.ln());
    values[j - 1] * (1.0 - t) + values[j] * t
}

/// Which end of the half-line an integrability class controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassSide {
    /// `∫₀¹ x^{1-ε}(1 + |ln x|^β)|Q| dx`, log factor dropped for `β = 0`.
    Zero,
    /// `∫₁^∞ x^{ε}(1 + (ln x)^β)|Q| dx`, log factor dropped for `β = 0`.
    Infinity,
}

/// Value of a class integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassValue {
    /// Finite value.
    Finite(f64),
    /// The integral diverges.
    Divergent,
}

impl ClassValue {
    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ClassValue::Finite(v) => Some(v),
            ClassValue::Divergent => None,
        }
    }
}

/// Weighted integrability integral of `|Q|` at one end of the half-line.
pub fn class_integral(pot: &Potential, side: ClassSide, eps: f64, log_power: f64) -> ClassValue {
    if pot.is_zero() {
        return ClassValue::Finite(0.0);
    }
    match side {
        ClassSide::Zero => {
            // Near zero the integrand behaves like x^{1-ε+α₀}.
            let rate = 2.0 - eps + pot.sing_exponent;
            if rate <= 0.0 {
                return ClassValue::Divergent;
            }
            if log_power == 0.0 {
                if let Some(v) = power_closed_form(pot, eps) {
                    return ClassValue::Finite(v);
                }
            }
            // t = -ln x maps ]0,1] to [0,∞[.
            let f = |t: f64| {
                let x = (-t).exp();
                let w = if log_power == 0.0 { 1.0 } else { 1.0 + t.powf(log_power) };
                (-(2.0 - eps) * t).exp() * w * pot.eval_side(x, Side::Left).norm()
            };
            let breaks: Vec<f64> = pot.breakpoints().iter().filter(|&&b| b < 1.0).map(|b| -b.ln()).collect();
            let panel = (40.0 + log_power.max(0.0) * 5.0) / rate;
            // Beyond TAIL_T, |Q| x^{2-ε} would leave the f64 range: continue
            // |Q(x_T)| x_T^{-α₀} x^{α₀} in log form.
            let head = integrate_segments(&f, 0.0, TAIL_T, &breaks);
            let x_t = (-TAIL_T).exp();
            let amp = pot.eval_side(x_t, Side::Left).norm() * (-pot.sing_exponent * x_t.ln()).exp();
            let tail = |t: f64| {
                let w = if log_power == 0.0 { 1.0 } else { 1.0 + t.powf(log_power) };
                amp * (-rate * t).exp() * w
            };
            match integrate_to_infinity(tail, TAIL_T, &[], panel) {
                ClassValue::Finite(v) if head.is_finite() => ClassValue::Finite(head + v),
                _ => ClassValue::Divergent,
            }
        }
        ClassSide::Infinity => {
            if pot.decay_exponent.is_finite() && pot.support_radius().is_none() && eps + 1.0 >= pot.decay_exponent {
                return ClassValue::Divergent;
            }
            let f = |s: f64| {
                let x = s.exp();
                let w = if log_power == 0.0 { 1.0 } else { 1.0 + s.powf(log_power) };
                ((1.0 + eps) * s).exp() * w * pot.eval_side(x, Side::Right).norm()
            };
            let breaks: Vec<f64> = pot.breakpoints().iter().filter(|&&b| b > 1.0).map(|b| b.ln()).collect();
            match pot.support_radius() {
                Some(r) if r <= 1.0 => ClassValue::Finite(0.0),
                Some(r) => ClassValue::Finite(integrate_segments(&f, 0.0, r.ln(), &breaks)),
                None => integrate_to_infinity(f, 0.0, &breaks, 4.0),
            }
        }
    }
}

/// `∫₀¹ x^{1-ε}|Q| dx` in closed form for pure power-law shapes.
fn power_closed_form(pot: &Potential, eps: f64) -> Option<f64> {
    let (amp, alpha, xc) = match &pot.kind {
        PotentialKind::CoulombCutoff { beta, xc } => (beta.norm(), -1.0, *xc),
        PotentialKind::PowerLaw { c: a, alpha, xc } => (a.norm(), *alpha, *xc),
        PotentialKind::SquareWell { v0, x0, x1 } => {
            let (a, b) = (x0.min(1.0), x1.min(1.0));
            let s = 2.0 - eps;
            return Some(v0.norm() * (b.powf(s) - a.powf(s)) / s);
        }
        _ => return None,
    };
    let s = 2.0 - eps + alpha;
    Some(amp * xc.min(1.0).powf(s) / s)
}

/// Largest `t = -ln x` integrated directly near zero.
const TAIL_T: f64 = 300.0;

fn integrate_to_infinity(f: impl Fn(f64) -> f64, start: f64, breaks: &[f64], panel: f64) -> ClassValue {
    let mut total = 0.0;
    let mut a = start;
    let mut width = panel.max(1e-3);
    for _ in 0..60 {
        let b = a + width;
        let inner: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
        let piece = integrate_segments(&f, a, b, &inner);
        total += piece;
        if !total.is_finite() {
            return ClassValue::Divergent;
        }
        if piece.abs() <= 1e-12 * total.abs() || total == 0.0 && b > start + 200.0 {
            return ClassValue::Finite(total);
        }
        a = b;
        width *= 2.0;
    }
    ClassValue::Divergent
}

fn integrate_segments(f: &impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    pts.push(b);
    pts.windows(2).map(|w| adaptive_gauss(f, w[0], w[1], 0)).sum()
}

// 10-point Gauss–Legendre nodes and weights on [-1, 1] (positive half).
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss10(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..5 {
        s += GL_W[i] * (f(mid - half * GL_X[i]) + f(mid + half * GL_X[i]));
    }
    s * half
}

fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, depth: u32) -> f64 {
    let whole = gauss10(f, a, b);
    let m = 0.5 * (a + b);
    let halves = gauss10(f, a, m) + gauss10(f, m, b);
    if depth >= 30 || !halves.is_finite() || (whole - halves).abs() <= 1e-12 * halves.abs().max(1e-300) {
        halves
    } else {
        adaptive_gauss(f, a, m, depth + 1) + adaptive_gauss(f, m, b, depth + 1)
    }
}

/// Complex spectral parameter with `Re k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    /// The parameter (eigenvalue `-k²`).
    pub k: C64,
    /// `|k| < DELTA_K0`.
    pub is_zero: bool,
}

impl SpectralPoint {
    /// Clamps `Re k ∈ [-1e-14, 0[` to zero and rejects anything further left.
    pub fn new(k: C64) -> Result<Self> {
        if !(k.re.is_finite() && k.im.is_finite()) {
            return Err(Error::Domain("k must be finite".into()));
        }
        if k.re < -1e-14 {
            return Err(Error::Domain(format!("Re k must be >= 0, got {k}")));
        }
        let k = c(k.re.max(0.0), k.im);
        Ok(Self { k, is_zero: k.norm() < DELTA_K0 })
    }
}

/// The weights `μ_k`, `λ_k`, `η_{±k}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTriple {
    k: SpectralPoint,
}

/// Weights attached to a spectral point.
pub fn weights(k: SpectralPoint) -> WeightTriple {
    WeightTriple { k }
}

impl WeightTriple {
    /// `μ_k(x) = min(|k|⁻¹, x)`.
    pub fn mu(&self, x: f64) -> f64 {
        if self.k.is_zero {
            x
        } else {
            x.min(1.0 / self.k.k.norm())
        }
    }

    /// `λ_k(x) = 1 - ln(|k| μ_k(x))`.
    pub fn lambda(&self, x: f64) -> Result<f64> {
        if self.k.is_zero {
            return Err(Error::WeightUndefined);
        }
        Ok(1.0 - (self.k.k.norm() * self.mu(x)).ln())
    }

    /// `η_{+k}(x) = e^{Re k·x}`.
    pub fn eta_plus(&self, x: f64) -> f64 {
        (self.k.k.re * x).exp()
    }

    /// `η_{-k}(x) = e^{-Re k·x}`.
    pub fn eta_minus(&self, x: f64) -> f64 {
        (-self.k.k.re * x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_integral_with_log_weight_near_zero() {
        // ∫₀¹ x^{s-1}(1 + |ln x|^β) dx = 1/s + Γ(β+1)/s^{β+1}, s = 2 - ε + α.
        for (alpha, eps, beta) in [(-1.8, 0.0, 0.3), (-1.99, 0.0, 1.0), (-1.0, 0.5, 2.0), (-0.5, 0.2, 0.7)] {
            let pot = Potential::new(PotentialKind::PowerLaw { c: c(1.0, 0.0), alpha, xc: 1.0 }).unwrap();
            let s: f64 = 2.0 - eps + alpha;
            let g = crate::specfun::gamma(c(beta + 1.0, 0.0)).unwrap().re;
            let exact = 1.0 / s + g / s.powf(beta + 1.0);
            let got = class_integral(&pot, ClassSide::Zero, eps, beta).finite().unwrap();
            assert!((got - exact).abs() < 1e-9 * exact, "α = {alpha}: {got} vs {exact}");
        }
    }

    #[test]
    fn tabulated_round_trip() {
        let p = Potential::exp_decay(1.3, 0.7).unwrap().tabulate(&[0.01, 0.1 + 1e-17, 0.37, 2.0, 5.5]).unwrap();
        let text = p.tabulated_text().unwrap();
        let q = Potential::parse_tabulated(&text, p.sing_exponent, p.decay_exponent).unwrap();
        assert_eq!(p, q);
        assert!(Potential::zero().tabulated_text().is_err());
    }

    #[test]
    fn eval_examples() {
        let q = Potential::coulomb(2.0, 1.0).unwrap();
        assert_eq!(q.eval(0.5).unwrap(), c(-4.0, 0.0));
        assert_eq!(q.eval(1.0).unwrap(), c(-2.0, 0.0));
        assert_eq!(q.eval_side(1.0, Side::Right), C64::new(0.0, 0.0));
        assert_eq!(Potential::zero().eval(3.0).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(Potential::square_well(4.0, 0.0, 1.0).unwrap().eval(2.0).unwrap(), C64::new(0.0, 0.0));
        assert_eq!(Potential::square_well(4.0, 0.0, 1.0).unwrap().eval(0.3).unwrap(), c(4.0, 0.0));
        assert!(matches!(q.eval(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn class_integral_examples() {
        let q = Potential::coulomb(1.0, 1.0).unwrap();
        let v = class_integral(&q, ClassSide::Zero, 0.5, 0.0).finite().unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(class_integral(&Potential::zero(), ClassSide::Zero, 0.5, 0.0), ClassValue::Finite(0.0));
        assert_eq!(class_integral(&q, ClassSide::Zero, 1.0, 0.0), ClassValue::Divergent);
    }

    #[test]
    fn class_integral_numeric_matches_closed_form() {
        let q = Potential::with_exponents(
            PotentialKind::Tabulated { nodes: vec![1e-3, 0.5, 2.0], values: vec![c(1.0, 0.0); 3] },
            0.0,
            f64::INFINITY,
        )
        .unwrap();
        // |Q| = 1 on ]0,1]: ∫₀¹ x^{1-ε} dx = 1/(2-ε).
        let v = class_integral(&q, ClassSide::Zero, 0.5, 0.0).finite().unwrap();
        assert!((v - 1.0 / 1.5).abs() < 1e-9, "{v}");
        // ∫₀¹ x^{0.5}(1 + |ln x|) dx = 2/3 + 4/9.
        let v = class_integral(&q, ClassSide::Zero, 0.5, 1.0).finite().unwrap();
        assert!((v - (2.0 / 3.0 + 4.0 / 9.0)).abs() < 1e-9, "{v}");
    }

    #[test]
    fn class_integral_at_infinity() {
        let q = Potential::exp_decay(1.0, 1.0).unwrap();
        // ∫₁^∞ x e^{-x} dx = 2/e.
        let v = class_integral(&q, ClassSide::Infinity, 1.0, 0.0).finite().unwrap();
        assert!((v - 2.0 / std::f64::consts::E).abs() < 1e-9, "{v}");
        let sw = Potential::square_well(1.0, 0.0, 3.0).unwrap();
        let v = class_integral(&sw, ClassSide::Infinity, 2.0, 3.0).finite().unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn weights_examples() {
        let w0 = weights(SpectralPoint::new(C64::new(0.0, 0.0)).unwrap());
        assert_eq!(w0.mu(0.7), 0.7);
        assert_eq!(w0.lambda(0.7), Err(Error::WeightUndefined));
        let w2 = weights(SpectralPoint::new(c(0.0, 2.0)).unwrap());
        assert_eq!(w2.mu(3.0), 0.5);
        assert_eq!(w2.lambda(3.0).unwrap(), 1.0);
        let w1 = weights(SpectralPoint::new(c(1.0, 0.0)).unwrap());
        assert!((w1.lambda((-1.0f64).exp()).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_point_clamps() {
        let k = SpectralPoint::new(c(-1e-15, 1.0)).unwrap();
        assert_eq!(k.k.re, 0.0);
        assert!(SpectralPoint::new(c(-1e-3, 0.0)).is_err());
    }

    #[test]
    fn tabulated_parse_and_interpolate() {
        let text = "# comment\n1 0 0\n4 2 -2 # tail\n";
        let q = Potential::parse_tabulated(text, 0.0, f64::INFINITY).unwrap();
        // Midpoint in ln x between 1 and 4 is 2.
        let v = q.eval(2.0).unwrap();
        assert!((v - c(1.0, -1.0)).norm() < 1e-14);
        assert_eq!(q.eval(5.0).unwrap(), C64::new(0.0, 0.0));
        assert!(matches!(Potential::parse_tabulated("2 0 0\n1 0 0\n", 0.0, 1.0), Err(Error::Parse(_))));
        assert!(matches!(Potential::parse_tabulated("1 0\n", 0.0, 1.0), Err(Error::Parse(_))));
    }
}
