use num_complex::Complex64;
use proptest::prelude::*;

use thermoformal::config::ExperimentConfig;
use thermoformal::decomposition::{decompose_bits, is_bad, is_good};
use thermoformal::equilibrium::build_transfer_operator;
use thermoformal::solenoid::SolenoidPoint;
use thermoformal::system::{System, SystemConfig};
use thermoformal::thermo::{epsilon_alpha, Potential};
use thermoformal::torus::TorusPoint;

fn pitchfork() -> System {
    System::build(SystemConfig::pitchfork_preset()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decomposition_is_maximal(bits in prop::collection::vec(any::<bool>(), 0..40), alpha in 0.05f64..0.95) {
        let s = decompose_bits(&bits, alpha);
        prop_assert!(is_good(&bits[..s], alpha));
        prop_assert!(s == bits.len() || is_bad(&bits[s..], alpha));
        for t in s + 1..=bits.len() {
            prop_assert!(!is_good(&bits[..t], alpha));
        }
    }

    #[test]
    fn good_words_concatenate(
        a in prop::collection::vec(any::<bool>(), 0..25),
        b in prop::collection::vec(any::<bool>(), 0..25),
        alpha in 0.05f64..0.95,
    ) {
        if is_good(&a, alpha) && is_good(&b, alpha) {
            let ab: Vec<bool> = a.iter().chain(&b).copied().collect();
            prop_assert!(is_good(&ab, alpha));
        }
    }

    #[test]
    fn epsilon_alpha_shrinks_with_alpha(lo in 0.55f64..0.9, step in 0.001f64..0.09) {
        let hi = (lo + step).min(0.999);
        let (e_lo, e_hi) = (epsilon_alpha(lo, 2, 1).unwrap(), epsilon_alpha(hi, 2, 1).unwrap());
        prop_assert!(e_hi <= e_lo + 1e-12);
        prop_assert!(e_lo >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_branches_are_right_inverses(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let s = pitchfork();
        let g = s.base();
        let p = TorusPoint::new(&[x, y]);
        let pre = g.inverse_branches(&p).unwrap();
        prop_assert_eq!(pre.len(), g.deg());
        for q in &pre {
            prop_assert!(g.eval(q).dist(&p) < 1e-10);
        }
    }

    #[test]
    fn fibers_contract_at_lambda_s(x in 0.0f64..1.0, y in 0.0f64..1.0, r in 0.0f64..0.3, t in 0.0f64..std::f64::consts::TAU) {
        let s = pitchfork();
        let b = TorusPoint::new(&[x, y]);
        let p = SolenoidPoint::new(b, &[Complex64::new(0.0, 0.0), Complex64::new(0.1, 0.0)]);
        let q = SolenoidPoint::new(b, &[Complex64::from_polar(r, t), Complex64::new(0.1, 0.0)]);
        let (fp, fq) = (s.f.eval(&p), s.f.eval(&q));
        let before = (p.fiber()[0] - q.fiber()[0]).norm();
        let after = (fp.fiber()[0] - fq.fiber()[0]).norm();
        prop_assert!((after - s.f.lambda_s() * before).abs() < 1e-12);
    }

    #[test]
    fn torus_distance_is_a_metric(a in prop::array::uniform2(-3.0f64..3.0), b in prop::array::uniform2(-3.0f64..3.0), c in prop::array::uniform2(-3.0f64..3.0)) {
        let (a, b, c) = (TorusPoint::new(&a), TorusPoint::new(&b), TorusPoint::new(&c));
        prop_assert!((a.dist(&b) - b.dist(&a)).abs() < 1e-15);
        prop_assert!(a.dist(&c) <= a.dist(&b) + b.dist(&c) + 1e-12);
        prop_assert!(a.dist(&b) <= 0.5f64.hypot(0.5) + 1e-12);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), alpha in 0.5f64..0.87, n_cells in 16usize..5000) {
        let mut c = ExperimentConfig::pitchfork_preset();
        c.run.seed = seed;
        c.system.alpha = alpha;
        c.budgets.n_cells = n_cells;
        let text = c.to_ini();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(back.to_ini(), text);
        prop_assert_eq!(back, c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pressure_shifts_with_constants(c in -3.0f64..3.0, amp in 0.0f64..0.5) {
        let s = pitchfork();
        let phi = Potential::holder_test(amp, 0.0);
        let a = build_transfer_operator(&s.f, &phi, 64, 1, 3).unwrap();
        let b = build_transfer_operator(&s.f, &phi.clone().shifted(c), 64, 1, 3).unwrap();
        prop_assert!((b.pressure() - a.pressure() - c).abs() < 1e-10);
    }

    #[test]
    fn pressure_is_monotone_in_potential(c in 0.01f64..1.0) {
        let s = pitchfork();
        let phi = Potential::geometric();
        let a = build_transfer_operator(&s.f, &phi, 64, 1, 3).unwrap();
        let b = build_transfer_operator(&s.f, &phi.clone().scaled(1.0 + c), 64, 1, 3).unwrap();
        // phi_geo < 0, so scaling it up lowers the pressure.
        prop_assert!(b.pressure() < a.pressure());
    }
}
