//! Independent oracles: direct ODE integration of
//! `-f'' + ((m²-¼)/x² + Q + k²) f = 0`, Frobenius seeds at zero, large-argument
//! seeds at infinity and a Stirling-series Γ. No library numerics are used.

#![allow(dead_code)]

use besselkit::C64;

/// Oracle-side description of a test potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleQ {
    /// `Q = v` on `[0, x1]`.
    Well { v: f64, x1: f64 },
    /// `Q = amp·e^{-λx}`.
    Exp { amp: f64, lambda: f64 },
    /// `Q = -β/x` on `]0, xc]`.
    Coulomb { beta: f64, xc: f64 },
}

impl OracleQ {
    /// `Q(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            OracleQ::Well { v, x1 } => {
                if x <= x1 {
                    v
                } else {
                    0.0
                }
            }
            OracleQ::Exp { amp, lambda } => amp * (-lambda * x).exp(),
            OracleQ::Coulomb { beta, xc } => {
                if x <= xc {
                    -beta / x
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where `Q` jumps.
    pub fn breaks(&self) -> Vec<f64> {
        match *self {
            OracleQ::Well { x1, .. } => vec![x1],
            OracleQ::Exp { .. } => vec![],
            OracleQ::Coulomb { xc, .. } => vec![xc],
        }
    }

    /// `q_i` with `Q(x) = Σ q_i x^{i-1}` below the first jump.
    pub fn series(&self, n: usize) -> Vec<f64> {
        let mut q = vec![0.0; n];
        match *self {
            OracleQ::Well { v, .. } => q[1] = v,
            OracleQ::Exp { amp, lambda } => {
                let mut t = amp;
                for (i, qi) in q.iter_mut().enumerate().skip(1) {
                    *qi = t;
                    t *= -lambda / i as f64;
                }
            }
            OracleQ::Coulomb { beta, .. } => q[0] = -beta,
        }
        q
    }
}

/// `Γ(x)` for real `x > 0`: upward shift to `x ≥ 15` and the Stirling series.
pub fn gamma_real(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 1.0;
    let mut y = x;
    while y < 15.0 {
        shift *= y;
        y += 1.0;
    }
    // ln Γ(y) = (y-½)ln y - y + ½ln 2π + Σ B_{2j}/(2j(2j-1)y^{2j-1}).
    let b = [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];
    let mut s = 0.0;
    for (j, bj) in b.iter().enumerate() {
        let p = 2 * (j + 1);
        s += bj / ((p * (p - 1)) as f64 * y.powi(p as i32 - 1));
    }
    let lg = (y - 0.5) * y.ln() - y + 0.5 * (2.0 * std::f64::consts::PI).ln() + s;
    lg.exp() / shift
}

const SERIES_TERMS: usize = 90;

fn xpow(x: f64, s: C64) -> C64 {
    (s * x.ln()).exp()
}

/// `(f, f')` of the solution `x^{½+m} Σ a_n xⁿ` with `a_0` given.
pub fn frobenius_regular(q: &OracleQ, m: C64, k: C64, a0: C64, x: f64) -> (C64, C64) {
    let qs = q.series(SERIES_TERMS);
    let a = regular_coeffs(&qs, m, k, a0);
    let s = m + 0.5;
    let (mut f, mut d) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for (n, an) in a.iter().enumerate() {
        let p = xpow(x, s + n as f64);
        f += an * p;
        d += an * (s + n as f64) * p / x;
    }
    (f, d)
}

fn regular_coeffs(qs: &[f64], m: C64, k: C64, a0: C64) -> Vec<C64> {
    let mut a = vec![C64::new(0.0, 0.0); SERIES_TERMS];
    a[0] = a0;
    for n in 1..SERIES_TERMS {
        let mut r: C64 = (0..n).map(|i| qs[i] * a[n - 1 - i]).sum();
        if n >= 2 {
            r += k * k * a[n - 2];
        }
        a[n] = r / (n as f64 * (2.0 * m + n as f64));
    }
    a
}

/// `(f, f')` of `ln x·U + B` at `m = 0`, `U = x^{½}(1 + …)`, `B = x^{½}(0 + b_1 x + …)`.
pub fn frobenius_log(q: &OracleQ, k: C64, x: f64) -> (C64, C64) {
    let qs = q.series(SERIES_TERMS);
    let zero = C64::new(0.0, 0.0);
    let a = regular_coeffs(&qs, zero, k, C64::new(1.0, 0.0));
    let mut b = vec![zero; SERIES_TERMS];
    for n in 1..SERIES_TERMS {
        let mut r: C64 = (0..n).map(|i| qs[i] * b[n - 1 - i]).sum();
        if n >= 2 {
            r += k * k * b[n - 2];
        }
        b[n] = (r - 2.0 * n as f64 * a[n]) / (n * n) as f64;
    }
    let (mut u, mut ud, mut bb, mut bd) = (zero, zero, zero, zero);
    for n in 0..SERIES_TERMS {
        let p = x.powf(n as f64 + 0.5);
        let e = n as f64 + 0.5;
        u += a[n] * p;
        ud += a[n] * e * p / x;
        bb += b[n] * p;
        bd += b[n] * e * p / x;
    }
    let l = x.ln();
    (l * u + bb, u / x + l * ud + bd)
}

/// `(𝓚_m(z), 𝓚_m'(z))` from the large-argument expansion, truncated at its smallest term.
pub fn cal_k_large(m: C64, z: C64) -> (C64, C64) {
    assert!(z.norm() > 20.0);
    let mu = 4.0 * m * m;
    let (mut s, mut sd) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let mut t = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for j in 1..200 {
        let next = t * (mu - ((2 * j - 1) * (2 * j - 1)) as f64) / (j as f64 * 8.0 * z);
        if next.norm() >= last || next.norm() < 1e-18 * s.norm() {
            break;
        }
        last = next.norm();
        t = next;
        s += t;
        sd += -(j as f64) * t / z;
    }
    let e = (-z).exp();
    (e * s, e * (sd - s))
}

/// Classical RK4 in `t = ln x` from `xa` to `xb`, stepping exactly onto the jumps of `Q`.
pub fn integrate(q: &OracleQ, m: C64, k: C64, mut y: [C64; 2], xa: f64, xb: f64, h: f64) -> [C64; 2] {
    let (m2, k2) = (m * m, k * k);
    let mut stops: Vec<f64> = q.breaks().into_iter().filter(|&b| (b - xa) * (b - xb) < 0.0).collect();
    stops.sort_by(|a, b| if xb > xa { a.total_cmp(b) } else { b.total_cmp(a) });
    stops.push(xb);
    let mut x0 = xa;
    for x1 in stops {
        let (t0, t1) = (x0.ln(), x1.ln());
        let n = ((t1 - t0).abs() / h).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / n as f64;
        // Q is sampled inside the open segment so jumps are taken from the correct side.
        let (lo, hi) = (x0.min(x1) * (1.0 + 1e-12), x0.max(x1) * (1.0 - 1e-12));
        let at = |x: f64, y: [C64; 2]| rhs(q, m2, k2, x, x.clamp(lo, hi), y);
        for i in 0..n {
            let t = t0 + i as f64 * dt;
            let (xa, xm, xb) = (t.exp(), (t + 0.5 * dt).exp(), (t + dt).exp());
            let k1 = at(xa, y);
            let k2v = at(xm, add(y, k1, 0.5 * dt));
            let k3 = at(xm, add(y, k2v, 0.5 * dt));
            let k4 = at(xb, add(y, k3, dt));
            for c in 0..2 {
                y[c] += dt / 6.0 * (k1[c] + 2.0 * k2v[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        x0 = x1;
    }
    y
}

/// Right-hand side in `t = ln x` for `y = (f, f')`, with `Q` sampled at `xq`.
fn rhs(q: &OracleQ, m2: C64, k2: C64, x: f64, xq: f64, y: [C64; 2]) -> [C64; 2] {
    let v = (m2 - 0.25) / (x * x) + q.eval(xq) + k2;
    [x * y[1], x * v * y[0]]
}

fn add(y: [C64; 2], d: [C64; 2], s: f64) -> [C64; 2] {
    [y[0] + s * d[0], y[1] + s * d[1]]
}

/// Values of the solution through `(x_seed, y_seed)` at the sorted nodes `xs`, marching away from the seed.
pub fn solution_at(q: &OracleQ, m: C64, k: C64, seed: (f64, [C64; 2]), xs: &[f64], h: f64) -> Vec<[C64; 2]> {
    let (x_seed, mut y) = seed;
    let forward = xs.first().map_or(true, |&x| x >= x_seed);
    let order: Vec<usize> = if forward { (0..xs.len()).collect() } else { (0..xs.len()).rev().collect() };
    let mut out = vec![[C64::new(0.0, 0.0); 2]; xs.len()];
    let mut x0 = x_seed;
    for i in order {
        y = integrate(q, m, k, y, x0, xs[i], h);
        x0 = xs[i];
        out[i] = y;
    }
    out
}

#[test]
fn gamma_oracle_values() {
    assert!((gamma_real(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    assert!((gamma_real(5.0) - 24.0).abs() < 1e-12);
    assert!((gamma_real(1.3) - 0.897_470_696_306_277_2).abs() < 1e-14);
}

#[test]
fn oracle_reproduces_free_solutions() {
    // m = ½, Q = 0, a_0 = 1: the regular solution is sinh(kx)/k.
    let q = OracleQ::Well { v: 0.0, x1: 1.0 };
    let m = C64::new(0.5, 0.0);
    let k = C64::new(1.3, 0.4);
    let a0 = C64::new(1.0, 0.0);
    let seed = frobenius_regular(&q, m, k, a0, 0.01);
    let ys = solution_at(&q, m, k, (0.01, [seed.0, seed.1]), &[0.5, 2.0], 2.5e-4);
    for (y, x) in ys.iter().zip([0.5, 2.0]) {
        let exact = (k * x).sinh() / k;
        assert!((y[0] - exact).norm() < 1e-10 * exact.norm(), "{} vs {exact}", y[0]);
    }
    let (w, wd) = cal_k_large(m, k * 40.0);
    let e = (-k * 40.0).exp();
    assert!((w - e).norm() < 1e-14 * e.norm() && (wd + e).norm() < 1e-14 * e.norm());
}
