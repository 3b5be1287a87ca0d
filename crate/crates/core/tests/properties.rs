//! Property tests for invariants of the special functions, kernels, potentials,
//! boundary functionals and Jost solutions.

use besselkit::boundary::{wronskian_at_zero, BoundaryFunctional};
use besselkit::model::{class_integral, ClassSide, ClassValue, Potential, SpectralPoint};
use besselkit::solutions::{build_w, Problem, SolverConfig};
use besselkit::specfun::{c, cal_i_with_deriv, cal_k, cal_k_with_deriv, cpow};
use besselkit::unperturbed::{eval_kernel, eval_solution, KernelKind, KernelSpec, SolutionKind};
use besselkit::volterra::GridFunction;
use besselkit::C64;
use proptest::prelude::*;

fn complex_z(r_lo: f64, r_hi: f64) -> impl Strategy<Value = C64> {
    (r_lo.ln()..r_hi.ln(), -1.5f64..1.5).prop_map(|(lr, a)| C64::from_polar(lr.exp(), a))
}

fn order(re: std::ops::Range<f64>) -> impl Strategy<Value = C64> {
    (re, -1.0f64..1.0).prop_map(|(a, b)| c(a, b))
}

/// `|a - b|` relative to `scale`, floored at one.
fn rel(a: C64, b: C64, scale: f64) -> f64 {
    (a - b).norm() / scale.max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn k_i_wronskian_is_one(m in order(-2.5..2.5), z in complex_z(0.1, 30.0)) {
        let (i, id) = cal_i_with_deriv(m, z).unwrap();
        let (k, kd) = cal_k_with_deriv(m, z).unwrap();
        let scale = (k * id).norm() + (kd * i).norm();
        prop_assert!(rel(k * id - kd * i, c(1.0, 0.0), scale) < 1e-11);
    }

    #[test]
    fn k_is_even_in_the_order(m in order(-3.0..3.0), z in complex_z(0.05, 40.0)) {
        let a = cal_k(m, z).unwrap();
        let b = cal_k(-m, z).unwrap();
        prop_assert!((a - b).norm() <= 1e-11 * a.norm().max(1e-300));
    }

    #[test]
    fn bowtie_kernel_is_symmetric(
        m in order(0.05..1.8),
        k in complex_z(0.1, 3.0),
        x in 0.05f64..5.0,
        y in 0.05f64..5.0,
    ) {
        let k = SpectralPoint::new(k).unwrap();
        let spec = KernelSpec::new(KernelKind::Bowtie, m, k, None).unwrap();
        let a = eval_kernel(&spec, x, y).unwrap();
        let b = eval_kernel(&spec, y, x).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1e-300));
    }

    #[test]
    fn connection_identity(
        m in order(-0.9..2.0),
        k in complex_z(0.1, 3.0),
        x in 0.05f64..5.0,
        y in 0.05f64..5.0,
    ) {
        let k = SpectralPoint::new(k).unwrap();
        let ker = |kind| eval_kernel(&KernelSpec::new(kind, m, k, None).unwrap(), x, y).unwrap();
        let sol = |kind, t| eval_solution(kind, m, k, t).unwrap().0;
        let bow = ker(KernelKind::Bowtie);
        let fwd = ker(KernelKind::Forward);
        let uv = sol(SolutionKind::U0, x) * sol(SolutionKind::V0, y);
        let scale = bow.norm().max(fwd.norm()).max(uv.norm());
        prop_assert!((bow - uv - fwd).norm() <= 1e-10 * scale);
    }

    #[test]
    fn class_integral_is_monotone_in_eps(
        alpha in -1.8f64..-0.2,
        e1 in 0.0f64..0.9,
        de in 0.0f64..0.5,
        beta in 0.0f64..2.0,
    ) {
        let e1 = e1.min(1.9 + alpha);
        let e2 = e1 + de;
        let pot = Potential::new(besselkit::model::PotentialKind::PowerLaw { c: c(1.0, 0.0), alpha, xc: 1.0 }).unwrap();
        let v1 = class_integral(&pot, ClassSide::Zero, e1, beta);
        let v2 = class_integral(&pot, ClassSide::Zero, e2, beta);
        match (v1, v2) {
            (ClassValue::Finite(a), ClassValue::Finite(b)) => prop_assert!(b >= a * (1.0 - 1e-10)),
            (ClassValue::Finite(_), ClassValue::Divergent) | (ClassValue::Divergent, ClassValue::Divergent) => {}
            (ClassValue::Divergent, ClassValue::Finite(_)) => prop_assert!(false, "divergent below, finite above"),
        }
    }

    #[test]
    fn tabulated_text_round_trips(values in proptest::collection::vec(-50.0f64..50.0, 2..40), start in 1e-4f64..1e-1) {
        let nodes: Vec<f64> = (0..values.len()).map(|j| start * 1.3f64.powi(j as i32)).collect();
        let kind = besselkit::model::PotentialKind::Tabulated {
            nodes,
            values: values.iter().map(|&v| c(v, 0.5 * v)).collect(),
        };
        let pot = Potential::new(kind).unwrap();
        let text = pot.tabulated_text().unwrap();
        let back = Potential::parse_tabulated(&text, pot.sing_exponent, pot.decay_exponent).unwrap();
        prop_assert_eq!(back, pot);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_wronskian_at_zero_is_2m(re in 0.05f64..0.9, im in -0.8f64..0.8) {
        let m = c(re, im);
        let pb = Problem::new(c(0.0, 0.0), Potential::zero(), SolverConfig { n: 512, ..SolverConfig::default() }).unwrap();
        let p = 0.5 + m;
        let f = GridFunction::from_fn(pb.grid().clone(), c(0.0, 0.0), 0, move |x| {
            let v = cpow(c(x, 0.0), p);
            Ok((v, p * v / x))
        })
        .unwrap();
        let z = wronskian_at_zero(&BoundaryFunctional::power(0.5 - m), &f).unwrap();
        prop_assert!((z.value - 2.0 * m).norm() < 1e-8, "{} vs {}", z.value, 2.0 * m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn jost_solution_is_even_in_m(re in 0.05f64..1.4, im in -0.5f64..0.5, k in complex_z(0.5, 3.0)) {
        let m = c(re, im);
        let pot = Potential::exp_decay(-2.0, 1.0).unwrap();
        let pb = Problem::new(k, pot, SolverConfig { n: 512, ..SolverConfig::default() }).unwrap();
        let a = build_w(&pb, m).unwrap().data;
        let b = build_w(&pb, -m).unwrap().data;
        for i in (0..a.len()).step_by(17) {
            let (va, vb) = (a.at(i).unwrap().0, b.at(i).unwrap().0);
            prop_assert!((va - vb).norm() <= 1e-10 * va.norm().max(1e-300), "x = {}: {va} vs {vb}", a.grid.x[i]);
        }
    }
}
