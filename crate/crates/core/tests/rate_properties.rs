use num_complex::Complex64;
use proptest::prelude::*;
use relay_duality::hermitian::{ComplexMatrix, HermitianMatrix};
use relay_duality::rates::*;
use relay_duality::verify::check_wz_chain_rule;
use relay_duality::{generate_rayleigh, NetworkInstance, Order};

#[derive(Debug, Clone)]
struct Sample {
    instance: NetworkInstance,
    p: Vec<f64>,
    q: Vec<f64>,
    w: ComplexMatrix,
    order_seed: Vec<usize>,
}

fn sample(max_m: usize, max_k: usize) -> impl Strategy<Value = Sample> {
    (1..=max_m, 1..=max_k, any::<u64>()).prop_flat_map(|(m, k, seed)| {
        (
            prop::collection::vec(-2.0..1.0f64, k),
            prop::collection::vec(-1.5..1.0f64, m),
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), m * k),
            Just((0..m).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(move |(lp, lq, wv, order_seed)| {
                let w = ComplexMatrix::from_row_major(
                    m,
                    k,
                    wv.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
                )
                .unwrap()
                .normalized_columns();
                Sample {
                    instance: generate_rayleigh(m, k, seed),
                    p: lp.into_iter().map(|x| 10f64.powf(x)).collect(),
                    q: lq.into_iter().map(|x| 10f64.powf(x)).collect(),
                    w,
                    order_seed,
                }
            })
    })
}

fn uplink(s: &Sample) -> UplinkPoint {
    UplinkPoint {
        p: s.p.clone(),
        q: s.q.clone(),
        w: s.w.clone(),
    }
}

fn downlink(s: &Sample) -> DownlinkPoint {
    let m = s.instance.num_relays();
    // Diagonally dominant, so positive definite with nonzero cross terms.
    let q_cov = HermitianMatrix::from_fn(m, |i, j| {
        if i == j {
            Complex64::new(s.q[i] + 0.1, 0.0)
        } else {
            Complex64::new(0.05 * (s.q[i] * s.q[j]).sqrt() / m as f64, 0.02)
        }
    });
    DownlinkPoint {
        p: s.p.clone(),
        q_cov,
        v: s.w.clone(),
    }
}

fn order(s: &Sample) -> Order {
    Order::new(s.order_seed.clone()).unwrap()
}

fn user_order(s: &Sample) -> Order {
    Order::identity(s.instance.num_users()).reversed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn wyner_ziv_chain_rule(s in sample(6, 4)) {
        let r = check_wz_chain_rule(&s.instance, &uplink(&s), &order(&s)).unwrap();
        prop_assert!(r <= 1e-9, "residual {r}");
    }

    #[test]
    fn wyner_ziv_sum_is_order_invariant(s in sample(5, 3)) {
        let pt = uplink(&s);
        let total = |rho: &Order| -> f64 {
            uplink_fronthaul_rates(&s.instance, &pt, UplinkCompression::WynerZiv, rho).unwrap().iter().sum()
        };
        let reference = total(&Order::identity(s.instance.num_relays()));
        prop_assert!((total(&order(&s)) - reference).abs() <= 1e-9);
        if s.instance.num_relays() <= 3 {
            for rho in Order::all(s.instance.num_relays()) {
                prop_assert!((total(&rho) - reference).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn uplink_rates_nonincreasing_in_q(s in sample(4, 4), relay in 0usize..4, bump in 0.01..5.0f64) {
        let m = relay % s.instance.num_relays();
        let tau = user_order(&s);
        let base = uplink(&s);
        let mut more = base.clone();
        more.q[m] += bump;
        for mode in [UplinkDecoding::Tin, UplinkDecoding::Sic] {
            let r0 = uplink_user_rates(&s.instance, &base, mode, &tau);
            let r1 = uplink_user_rates(&s.instance, &more, mode, &tau);
            for (a, b) in r0.iter().zip(&r1) {
                prop_assert!(*b <= a + 1e-12);
            }
        }
        for mode in [UplinkCompression::Independent, UplinkCompression::WynerZiv] {
            let f0 = uplink_fronthaul_rates(&s.instance, &base, mode, &order(&s)).unwrap();
            let mut p1 = base.clone();
            p1.p[0] += bump;
            let f1 = uplink_fronthaul_rates(&s.instance, &p1, mode, &order(&s)).unwrap();
            for (a, b) in f0.iter().zip(&f1) {
                prop_assert!(*b >= a - 1e-12);
            }
        }
    }

    #[test]
    fn downlink_rates_nonincreasing_in_q(s in sample(4, 4), relay in 0usize..4, bump in 0.01..5.0f64) {
        let m = relay % s.instance.num_relays();
        let tau = user_order(&s);
        let base = downlink(&s);
        let mut more = base.clone();
        let mut d = vec![0.0; s.instance.num_relays()];
        d[m] = bump;
        more.q_cov.add_diagonal(&d);
        for mode in [DownlinkEncoding::Linear, DownlinkEncoding::Dpc] {
            let r0 = downlink_user_rates(&s.instance, &base, mode, &tau);
            let r1 = downlink_user_rates(&s.instance, &more, mode, &tau);
            for (a, b) in r0.iter().zip(&r1) {
                prop_assert!(*b <= a + 1e-12);
            }
        }
        for mode in [DownlinkCompression::Independent, DownlinkCompression::Multivariate] {
            let f0 = downlink_fronthaul_rates(&s.instance, &base, mode, &order(&s)).unwrap();
            let mut p1 = base.clone();
            p1.p[0] += bump;
            let f1 = downlink_fronthaul_rates(&s.instance, &p1, mode, &order(&s)).unwrap();
            for (a, b) in f0.iter().zip(&f1) {
                prop_assert!(*b >= a - 1e-12);
            }
        }
    }

    #[test]
    fn sic_dominates_tin(s in sample(4, 5)) {
        let pt = uplink(&s);
        let tau = Order::new({
            let k = s.instance.num_users();
            (0..k).map(|i| (i + s.order_seed[0]) % k).collect()
        }).unwrap();
        let tin = uplink_user_rates(&s.instance, &pt, UplinkDecoding::Tin, &tau);
        let sic = uplink_user_rates(&s.instance, &pt, UplinkDecoding::Sic, &tau);
        for (t, c) in tin.iter().zip(&sic) {
            prop_assert!(*c >= t - 1e-12);
        }
    }

    #[test]
    fn vanishing_quantization_noise_recovers_unquantized_rates(s in sample(4, 4)) {
        let tau = user_order(&s);
        let mut pt = uplink(&s);
        let q0 = pt.q.clone();
        pt.q = vec![0.0; q0.len()];
        let limit = uplink_user_rates(&s.instance, &pt, UplinkDecoding::Tin, &tau);
        let mut prev = vec![f64::NEG_INFINITY; limit.len()];
        for scale in [1.0, 1e-1, 1e-2, 1e-4, 1e-8] {
            pt.q = q0.iter().map(|q| q * scale).collect();
            let r = uplink_user_rates(&s.instance, &pt, UplinkDecoding::Tin, &tau);
            for ((r, p), l) in r.iter().zip(&prev).zip(&limit) {
                prop_assert!(*r >= p - 1e-12);
                prop_assert!(*r <= l + 1e-12);
            }
            prev = r;
        }
        for (r, l) in prev.iter().zip(&limit) {
            prop_assert!((r - l).abs() <= 1e-6 * l.max(1.0));
        }
    }
}
