//! Invariants over randomly drawn beams, gains and states.

use proptest::prelude::*;
use smartbeam::cli::output::fmt_f64;
use smartbeam::control::{self, close_loop, FeedbackLaw, LawKind};
use smartbeam::linalg;
use smartbeam::materials::{derive_mm, CompositeSpec};
use smartbeam::models::{assemble, ModelKind};
use smartbeam::operators::{EllipticSolver, Grid};
use smartbeam::simulate::Integrator;
use smartbeam::spectral::resonance::random_state;

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (0.0f64..1.0).prop_map(move |t| (lo.ln() + t * (hi.ln() - lo.ln())).exp())
}

prop_compose! {
    fn beam()(
        h in [log_range(1e-3, 2e-2), log_range(1e-4, 1e-2), log_range(1e-4, 1e-2)],
        rho in [log_range(1e3, 1e4), log_range(1e2, 2e3), log_range(1e3, 1e4)],
        alpha in [log_range(1e10, 2e11), log_range(1e5, 1e8), log_range(1e10, 1e11)],
        g2 in log_range(1e4, 1e7),
        gamma in log_range(1e-1, 1e2),
        beta in log_range(1e7, 1e9),
        mu in log_range(1e-6, 1e-4),
    ) -> CompositeSpec {
        CompositeSpec { length: 1.0, h, rho, alpha, g2, gamma, beta, mu, shear_damping: 0.0 }
    }
}

fn model() -> impl Strategy<Value = ModelKind> {
    prop::sample::select(ModelKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn open_loop_generator_is_skew(spec in beam(), kind in model()) {
        let sys = assemble(kind, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
        prop_assert!(sys.skew_defect() < 1e-12);
    }

    #[test]
    fn energy_splits_into_nonnegative_parts(spec in beam(), kind in model(), seed in 0u64..1000) {
        let sys = assemble(kind, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
        let x = random_state(sys.dim(), seed);
        let e = sys.energy(&x).unwrap();
        prop_assert!(e.kinetic >= 0.0 && e.potential > 0.0);
        prop_assert!((e.total - e.kinetic - e.potential).abs() <= 1e-12 * e.total);
        let g = 0.5 * linalg::quad(&sys.gram(), &x);
        prop_assert!((g - e.total).abs() <= 1e-12 * e.total);
    }

    #[test]
    fn collocated_feedback_dissipates(
        spec in beam(),
        gains in prop::collection::vec(0.0f64..10.0, 4),
        seed in 0u64..1000,
    ) {
        for (kind, law) in [
            (ModelKind::RnDynamic, LawKind::RnDynamic),
            (ModelKind::Full, LawKind::RnDynamic),
            (ModelKind::RnStatic, LawKind::RnStaticReduced),
            (ModelKind::MmDynamic, LawKind::MmDynamic),
            (ModelKind::MmStatic, LawKind::MmStaticCollocated),
        ] {
            let open = assemble(kind, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
            let k = law.channels().len();
            let sys = close_loop(&open, &FeedbackLaw::new(law, gains[..k].to_vec()).unwrap()).unwrap();
            let x = random_state(sys.dim(), seed);
            let rate = control::energy_rate(&sys, &x);
            let e = sys.energy(&x).unwrap().total;
            prop_assert!(rate <= 1e-12 * e, "{}: rate {rate}", kind.name());
            prop_assert!((rate + control::feedback_power(&sys, &x)).abs() <= 1e-10 * (rate.abs() + e * 1e-12));
        }
    }

    #[test]
    fn midpoint_step_never_gains_energy(spec in beam(), gain in 0.0f64..5.0, seed in 0u64..1000) {
        let open = assemble(ModelKind::RnDynamic, &spec, &Grid::new(1.0, 8).unwrap()).unwrap();
        let sys = close_loop(&open, &FeedbackLaw::new(LawKind::RnDynamic, vec![gain; 4]).unwrap()).unwrap();
        let dt = 1e-3 / spec.max_wave_speed();
        let integ = Integrator::new(&sys, dt).unwrap();
        let mut x = random_state(sys.dim(), seed);
        let mut e = sys.energy(&x).unwrap().total;
        for _ in 0..20 {
            x = integ.step(&x).unwrap();
            let next = sys.energy(&x).unwrap().total;
            prop_assert!(next <= e * (1.0 + 1e-12));
            e = next;
        }
    }

    #[test]
    fn nonlocal_operator_is_nonpositive(spec in beam(), seed in 0u64..1000) {
        let g = Grid::new(1.0, 16).unwrap();
        let s = EllipticSolver::new(&g, derive_mm(&spec).unwrap().xi).unwrap();
        let mut v = random_state(g.n + 1, seed);
        v[0] = 0.0;
        let jv = s.apply_j(&v).unwrap();
        prop_assert!(linalg::quad(&s.j_gram(), &v) <= 0.0);
        let alt = s.apply_j_second_derivative(&v).unwrap();
        let diff: Vec<f64> = jv.iter().zip(&alt).map(|(a, b)| a - b).collect();
        prop_assert!(linalg::norm(&diff) <= 1e-10 * linalg::norm(&jv));
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}
