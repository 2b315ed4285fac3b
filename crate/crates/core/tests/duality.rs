use num_complex::Complex64;
use proptest::prelude::*;
use relay_duality::hermitian::ComplexMatrix;
use relay_duality::rates::UplinkPoint;
use relay_duality::uplink::{fixed_point_solve, SolverSettings};
use relay_duality::verify::*;
use relay_duality::{generate_rayleigh, Case, NetworkInstance, Order, RateTargets, StrategyConfig};

fn analytic() -> NetworkInstance {
    NetworkInstance::scalar(Complex64::new(1.0, 0.0), 1.0, 2.0).unwrap()
}

#[test]
fn analytic_instance_has_zero_gap_and_matching_duals() {
    let inst = analytic();
    let targets = RateTargets::symmetric(1, 1.0).unwrap();
    for case in Case::ALL {
        let rep = verify_duality(
            &inst,
            &targets,
            &StrategyConfig::natural(case, &inst),
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(rep.feasibility, Feasibility::BothFeasible);
        assert!(rep.pass, "{case}: {:?}", rep.checks);
        assert!((rep.ul_sum_power.unwrap() - 2.0).abs() <= 1e-10);
        if !case.joint_compression() {
            assert!(rep.rel_gap.unwrap() <= 1e-10);
            assert!(rep.beta_resid.unwrap() <= 1e-8 && rep.q_resid.unwrap() <= 1e-8);
            assert!(
                rep.ul_rate_resid.unwrap() <= 1e-10 && rep.ul_fronthaul_resid.unwrap() <= 1e-10
            );
        }
    }
}

#[test]
fn reference_sweep_point_passes_every_case() {
    let inst = generate_rayleigh(3, 3, 7);
    let targets = RateTargets::symmetric(3, 0.5).unwrap();
    for case in Case::ALL {
        let rep = verify_duality(
            &inst,
            &targets,
            &StrategyConfig::natural(case, &inst),
            &Tolerances::default(),
        )
        .unwrap();
        assert!(
            rep.pass && rep.feasibility == Feasibility::BothFeasible,
            "{case}: {:?}",
            rep.checks
        );
        let json = rep.to_json();
        assert!(json.contains("\"rel_gap\""));
    }
}

#[test]
fn infeasible_uplink_means_infeasible_downlink() {
    let inst = generate_rayleigh(3, 3, 7);
    let targets = RateTargets::symmetric(3, 6.0).unwrap();
    for case in Case::ALL {
        let rep = verify_duality(
            &inst,
            &targets,
            &StrategyConfig::natural(case, &inst),
            &Tolerances::default(),
        )
        .unwrap();
        assert_eq!(rep.feasibility, Feasibility::BothInfeasible, "{case}");
        assert!(rep.pass);
    }
}

#[test]
fn zero_targets_are_trivially_tight() {
    let inst = generate_rayleigh(2, 2, 5);
    let targets = RateTargets::symmetric(2, 0.0).unwrap();
    for case in Case::ALL {
        let ul = fixed_point_solve(
            &inst,
            &targets,
            &StrategyConfig::natural(case, &inst),
            &SolverSettings::default(),
            None,
        )
        .unwrap();
        assert_eq!(ul.sum_power, 0.0);
        let t = check_tightness(&ul, &targets, inst.caps());
        assert!(
            t.max_rate() == 0.0 && t.max_fronthaul() <= 1e-12,
            "{case}: {t:?}"
        );
    }
}

#[test]
fn interference_property_examples() {
    let inst = generate_rayleigh(3, 3, 1);
    let targets = RateTargets::symmetric(3, 1.0).unwrap();
    for case in [Case::I, Case::III] {
        let r = check_interference_properties(
            &inst,
            &targets,
            &StrategyConfig::natural(case, &inst),
            100,
            11,
        )
        .unwrap();
        assert_eq!(r.trials, 100);
    }
}

#[test]
fn chain_rule_examples() {
    let c = |x: f64| Complex64::new(x, 0.0);
    let single = NetworkInstance::scalar(c(1.0), 1.0, 2.0).unwrap();
    let pt = UplinkPoint {
        p: vec![2.0],
        q: vec![1.0],
        w: ComplexMatrix::from_fn(1, 1, |_, _| c(1.0)),
    };
    assert!(check_wz_chain_rule(&single, &pt, &Order::identity(1)).unwrap() <= 1e-15);

    let h = ComplexMatrix::from_fn(2, 1, |_, _| c(1.0));
    let two = NetworkInstance::new(h, 1.0, vec![2.0, 2.0]).unwrap();
    let w = ComplexMatrix::from_fn(2, 1, |_, _| c(std::f64::consts::FRAC_1_SQRT_2));
    let pt = UplinkPoint {
        p: vec![2.0],
        q: vec![1.0, 1.0],
        w,
    };
    assert!(check_wz_chain_rule(&two, &pt, &Order::identity(2)).unwrap() <= 1e-12);
    let rates = relay_duality::rates::uplink_fronthaul_rates(
        &two,
        &pt,
        relay_duality::rates::UplinkCompression::WynerZiv,
        &Order::identity(2),
    )
    .unwrap();
    assert!((rates.iter().sum::<f64>() - 12f64.log2()).abs() <= 1e-12);
}

#[test]
fn compression_and_decoding_dominance() {
    for seed in 1..=10u64 {
        let inst = generate_rayleigh(3, 3, seed);
        for rate in [0.5, 1.0, 1.5] {
            let targets = RateTargets::symmetric(3, rate).unwrap();
            let power = |case: Case| {
                let cfg = StrategyConfig::natural(case, &inst);
                match fixed_point_solve(&inst, &targets, &cfg, &SolverSettings::default(), None) {
                    Ok(s) if s.converged => s.sum_power,
                    _ => f64::INFINITY,
                }
            };
            let [p1, p2, p3, p4] = Case::ALL.map(power);
            let le = |a: f64, b: f64| a <= b + 1e-6 || b.is_infinite();
            assert!(
                le(p3, p1) && le(p4, p2) && le(p2, p1) && le(p4, p3),
                "seed {seed} R={rate}: {p1} {p2} {p3} {p4}"
            );
        }
    }
}

#[test]
fn fixed_beamformer_verdicts_agree_off_the_boundary() {
    let settings = SolverSettings::default();
    let barrier = relay_duality::barrier::BarrierSettings::default();
    for seed in 1..=5u64 {
        let inst = generate_rayleigh(2, 2, seed);
        let w = inst.channel().normalized_columns();
        for case in [Case::I, Case::III] {
            let cfg = StrategyConfig::natural(case, &inst);
            let b = symmetric_boundary(&inst, &cfg, &w, &settings, 1e-6).unwrap();
            for f in [0.5, 0.9, 0.98, 1.02, 1.1, 1.5] {
                let t = RateTargets::symmetric(2, b * f).unwrap();
                let (ul, dl) =
                    fixed_beamformer_verdicts(&inst, &t, &cfg, &w, &settings, &barrier).unwrap();
                assert_eq!(ul, f < 1.0, "seed {seed} {case} factor {f}");
                assert_eq!(ul, dl, "seed {seed} {case} factor {f}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_case_three_solutions_are_tight(seed in any::<u64>(), rate in 0.2..1.2f64) {
        let inst = generate_rayleigh(3, 3, seed);
        let targets = RateTargets::symmetric(3, rate).unwrap();
        let rep = verify_duality(&inst, &targets, &StrategyConfig::natural(Case::III, &inst), &Tolerances::default()).unwrap();
        prop_assert!(rep.feasibility.agrees());
        if rep.feasibility == Feasibility::BothFeasible {
            for v in [rep.ul_rate_resid, rep.ul_fronthaul_resid, rep.dl_rate_resid, rep.dl_fronthaul_resid] {
                prop_assert!(v.unwrap() <= 1e-6);
            }
            if !rep.near_boundary {
                prop_assert!(rep.pass, "{:?}", rep.checks);
            }
        }
    }
}
