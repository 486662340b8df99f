//! Checks against independent references: exact rational constants,
//! closed-form elliptic solutions, finite differences of the energy along
//! the exact linear flow, and refinement studies.

use smartbeam::acceptance::{exact, random_specs};
use smartbeam::control::{self, close_loop, FeedbackLaw, LawKind};
use smartbeam::linalg::{self, Cholesky, Matrix};
use smartbeam::materials::{derive_mm, derive_rn, CompositeSpec};
use smartbeam::models::{assemble, DiscreteSystem, ModelKind};
use smartbeam::operators::{EllipticSolver, Grid};
use smartbeam::simulate::{self, Integrator};
use smartbeam::spectral::resonance::random_state;

fn unit_spec() -> CompositeSpec {
    CompositeSpec {
        length: 1.0,
        h: [1.0; 3],
        rho: [1.0; 3],
        alpha: [1.0; 3],
        g2: 1.0,
        gamma: 0.5,
        beta: 1.0,
        mu: 1.0,
        shear_damping: 0.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn mm_constants_match_rational_arithmetic() {
    let mut specs = random_specs(50, 5);
    specs.push(CompositeSpec::default());
    specs.push(unit_spec());
    for spec in specs {
        let mm = derive_mm(&spec).unwrap();
        let ex = exact::mm_constants(&spec).unwrap().to_f64();
        let got = [mm.a, mm.b1, mm.b2, mm.b3, mm.b4, mm.c, mm.tilde_a, mm.tilde_b, mm.tilde_c];
        for (g, (name, w)) in got.iter().zip(ex.iter()) {
            assert!(rel(*g, *w) < 1e-12, "{name}: {g} vs {w}");
        }
    }
}

#[test]
fn rn_mass_matches_rational_sum() {
    for spec in random_specs(20, 9) {
        assert!(rel(derive_rn(&spec).unwrap().m, exact::mass_per_length(&spec)) < 1e-15);
    }
}

/// phi'' = xi (phi - x) with phi(0) = 0 and phi'(L) = 0.
fn pxi_of_identity(xi: f64, l: f64, x: f64) -> f64 {
    let k = xi.sqrt();
    x / xi - (k * x).sinh() / (xi * k * (k * l).cosh())
}

#[test]
fn elliptic_solve_converges_at_second_order() {
    let (xi, l) = (3.0, 2.0);
    let err = |n: usize| {
        let g = Grid::new(l, n).unwrap();
        let s = EllipticSolver::new(&g, xi).unwrap();
        let phi = s.apply_pxi(&g.nodes).unwrap();
        g.nodes.iter().zip(&phi).map(|(x, p)| (p - pxi_of_identity(xi, l, *x)).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(16), err(32));
    assert!(e1 < 1e-2, "{e1}");
    assert!(e1 / e2 > 3.5, "ratio {}", e1 / e2);
}

/// `exp(tA) x0 - x0` by Taylor series, `A = G^{-1} S`.
fn flow_increment(a: &Matrix, x0: &[f64], t: f64) -> Vec<f64> {
    let mut term = x0.to_vec();
    let mut sum = vec![0.0; x0.len()];
    for k in 1..200 {
        term = linalg::matvec(a, &term).iter().map(|v| v * t / k as f64).collect();
        for (s, v) in sum.iter_mut().zip(&term) {
            *s += v;
        }
        if linalg::norm(&term) < 1e-18 * linalg::norm(x0) {
            break;
        }
    }
    sum
}

fn flow_matrix(sys: &DiscreteSystem) -> Matrix {
    let chol = Cholesky::new(&sys.gram(), "Gram").unwrap();
    chol.solve_mat(&sys.generator())
}

/// Eighth-order central difference of the energy along the exact flow.
fn energy_rate_fd(sys: &DiscreteSystem, x0: &[f64]) -> f64 {
    let a = flow_matrix(sys);
    let scale = linalg::frobenius(&a);
    let h = 0.02 / scale;
    let g = sys.gram();
    let de = |t: f64| {
        let d = flow_increment(&a, x0, t);
        let two_x: Vec<f64> = x0.iter().zip(&d).map(|(x, di)| 2.0 * x + di).collect();
        0.5 * linalg::dot(&d, &linalg::matvec(&g, &two_x))
    };
    let w = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    (1..=4).map(|k| w[k - 1] * (de(k as f64 * h) - de(-(k as f64) * h))).sum::<f64>() / h
}

#[test]
fn reduced_static_law_energy_rate_matches_finite_difference() {
    let spec = unit_spec();
    let open = assemble(ModelKind::RnStatic, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
    let law = FeedbackLaw::new(LawKind::RnStaticReduced, vec![0.7, 1.3, 2.0]).unwrap();
    let sys = close_loop(&open, &law).unwrap();
    for seed in 0..3 {
        let x = random_state(sys.dim(), seed);
        let fd = energy_rate_fd(&sys, &x);
        let v = &x[sys.n_pos()..];
        let boundary: f64 = sys.active.iter().map(|c| c.gain * linalg::dot(&c.output, v).powi(2)).sum();
        assert!(rel(fd, -boundary) < 1e-10, "fd {fd} vs {}", -boundary);
        assert!(rel(control::energy_rate(&sys, &x), -boundary) < 1e-12);
    }
}

/// |E(T) - E(0) + trapezoid of the dissipation| over [0, T].
fn balance_defect(sys: &DiscreteSystem, x0: &[f64], t_end: f64, dt: f64) -> f64 {
    let integ = Integrator::new(sys, dt).unwrap();
    let steps = simulate::step_count(t_end, dt).unwrap();
    let mut x = x0.to_vec();
    let e0 = sys.energy(&x).unwrap().total;
    let mut dissipated = 0.0;
    let mut rate = control::energy_rate(sys, &x);
    for _ in 0..steps {
        x = integ.step(&x).unwrap();
        let next = control::energy_rate(sys, &x);
        dissipated -= 0.5 * dt * (rate + next);
        rate = next;
    }
    (sys.energy(&x).unwrap().total - e0 + dissipated).abs() / e0
}

#[test]
fn energy_balance_defect_is_second_order_in_dt() {
    let spec = unit_spec();
    let open = assemble(ModelKind::RnDynamic, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
    let sys = close_loop(&open, &FeedbackLaw::unit(LawKind::RnDynamic)).unwrap();
    let (_, modes) = open.modes().unwrap();
    let n = open.n_pos();
    let mut x0 = vec![0.0; 2 * n];
    for k in 0..3 {
        for i in 0..n {
            x0[i] += modes[(i, k)];
        }
    }
    let (d1, d2) = (balance_defect(&sys, &x0, 1.0, 1e-2), balance_defect(&sys, &x0, 1.0, 5e-3));
    assert!(d1 > 0.0 && d1 / d2 >= 3.5, "defects {d1} {d2}");
}

#[test]
fn midpoint_balance_is_exact() {
    let spec = unit_spec();
    let open = assemble(ModelKind::RnDynamic, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
    let sys = close_loop(&open, &FeedbackLaw::unit(LawKind::RnDynamic)).unwrap();
    let dt = 1e-2;
    let integ = Integrator::new(&sys, dt).unwrap();
    let x0 = random_state(sys.dim(), 3);
    let x1 = integ.step(&x0).unwrap();
    let xm: Vec<f64> = x0.iter().zip(&x1).map(|(a, b)| 0.5 * (a + b)).collect();
    let (e0, e1) = (sys.energy(&x0).unwrap().total, sys.energy(&x1).unwrap().total);
    let predicted = dt * control::energy_rate(&sys, &xm);
    assert!((e1 - e0 - predicted).abs() < 1e-12 * e0, "{} vs {predicted}", e1 - e0);
}

#[test]
fn lowest_frequencies_converge_under_refinement() {
    let spec = CompositeSpec::default();
    for kind in ModelKind::ALL {
        let f = |n: usize| assemble(kind, &spec, &Grid::new(spec.length, n).unwrap()).unwrap().modes().unwrap().0;
        let (a, b) = (f(64), f(128));
        for k in 0..3 {
            assert!(rel(a[k], b[k]) < 1e-2, "{} mode {k}: {} vs {}", kind.name(), a[k], b[k]);
        }
    }
}

#[test]
fn spectral_abscissa_predicts_energy_decay() {
    let spec = CompositeSpec::default();
    let sys = close_loop(
        &assemble(ModelKind::RnStatic, &spec, &Grid::new(spec.length, 16).unwrap()).unwrap(),
        &FeedbackLaw::unit(LawKind::RnStaticReduced),
    )
    .unwrap();
    let (rate, re, _) = smartbeam::acceptance::dominant_mode_decay(&sys).unwrap();
    assert!((1.6..=2.4).contains(&(rate / re.abs())), "rate {rate}, abscissa {re}");
}
