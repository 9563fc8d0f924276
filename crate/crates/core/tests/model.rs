use noma_sec::model::{
    link_metrics, max_secret_rate, round_decoding_order, sample_channels, sinr_vector, total_energy,
};
use noma_sec::{Allocation, PairMatrix, SystemConfig};
use proptest::prelude::*;

fn order_from(unit: &[f64], k: usize) -> PairMatrix<f64> {
    let mut it = unit.iter();
    PairMatrix::from_fn(k, |a, b| if a == b { 0.0 } else { *it.next().unwrap() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sinr_is_monotone_in_own_and_interfering_power(
        seed in 0u64..500,
        power in prop::collection::vec(1e-3f64..1.0, 3),
        beta in prop::collection::vec(0.0f64..1.0, 6),
        k in 0usize..3,
        l in 0usize..3,
    ) {
        let cfg = SystemConfig::standard(3, 1e5);
        let ch = sample_channels(&cfg, seed).unwrap();
        let order = order_from(&beta, 3);
        let base = sinr_vector(&power, &order, &ch).unwrap();
        let h = 1e-4;
        let mut up = power.clone();
        up[k] += h;
        let own = sinr_vector(&up, &order, &ch).unwrap();
        prop_assert!(own[k] >= base[k]);
        if l != k {
            let mut up = power.clone();
            up[l] += h;
            let other = sinr_vector(&up, &order, &ch).unwrap();
            prop_assert!(other[k] <= base[k]);
        }
    }

    #[test]
    fn energy_is_midpoint_convex(
        a in prop::collection::vec((0.0f64..4e5, 0.0f64..1.0), 3),
        b in prop::collection::vec((0.0f64..4e5, 0.0f64..1.0), 3),
    ) {
        let cfg = SystemConfig::standard(3, 4e5);
        let alloc = |pts: &[(f64, f64)]| {
            let mut x = Allocation::all_local(&cfg);
            for (i, &(l, p)) in pts.iter().enumerate() {
                x.local_bits[i] = l;
                x.power[i] = p;
            }
            x
        };
        let mid: Vec<(f64, f64)> = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (0.5 * (x.0 + y.0), 0.5 * (x.1 + y.1)))
            .collect();
        let (ea, eb) = (total_energy(&alloc(&a), &cfg).total, total_energy(&alloc(&b), &cfg).total);
        let em = total_energy(&alloc(&mid), &cfg).total;
        prop_assert!(em <= 0.5 * (ea + eb) + 1e-15);
    }

    #[test]
    fn max_secret_rate_round_trips_to_epsilon(
        seed in 0u64..500,
        power in prop::collection::vec(1e-3f64..1.0, 3),
        eps in 0.01f64..0.5,
    ) {
        let cfg = SystemConfig::standard(3, 1e5).with_epsilon(eps);
        let ch = sample_channels(&cfg, seed).unwrap();
        let mut alloc = Allocation::all_local(&cfg);
        alloc.power = power;
        alloc.order = round_decoding_order(&alloc.power, &ch);
        let sinr = sinr_vector(&alloc.power, &alloc.order, &ch).unwrap();
        for k in 0..3 {
            alloc.rate_secret[k] = max_secret_rate(&alloc.power, &alloc.order, &ch, &cfg, k).unwrap();
            alloc.rate_codeword[k] = sinr[k].ln_1p() / std::f64::consts::LN_2;
        }
        let m = link_metrics(&alloc, &ch, &cfg).unwrap();
        for k in 0..3 {
            if alloc.rate_secret[k] > 0.0 {
                prop_assert!((m.outage[k] - eps).abs() <= 1e-9, "user {k}: {}", m.outage[k]);
            }
        }
    }
}
