use noma_sec::benchmarks::{single_user_split, SecureLink};
use noma_sec::model::{
    link_metrics, max_secret_rate, round_decoding_order, sample_channels, secrecy_threshold,
    secret_rate_from_sinr, sinr_vector,
};
use noma_sec::oracle::{brute_force_grid, monte_carlo_sop, GridSpec};
use noma_sec::{Allocation, ChannelRealization, SystemConfig};

fn instance(k: usize, bits: f64, seed: u64) -> (SystemConfig, ChannelRealization) {
    let cfg = SystemConfig::standard(k, bits);
    let ch = sample_channels(&cfg, seed).unwrap();
    (ch.relabel_config(&cfg), ch)
}

#[test]
fn single_user_grid_agrees_with_nested_search() {
    for seed in 0..4 {
        let (cfg, ch) = instance(1, 2e5, seed);
        let grid = GridSpec::default();
        let g = brute_force_grid(&cfg, &ch, &grid).unwrap();
        let link = SecureLink::new(&cfg, &ch, 0);
        let (_, p_star, e_star) = single_user_split(&cfg, link, 0, cfg.deadline);
        assert!(g.energy >= e_star * (1.0 - 1e-9), "seed {seed}");
        // energy of the grid cell just above the continuous optimum
        let powers = grid.powers();
        let p_hi = powers.iter().copied().find(|&p| p >= p_star).unwrap();
        let t = secrecy_threshold(&cfg, ch.eve_rate_param[0]);
        let r = secret_rate_from_sinr(ch.tau[0] * p_hi, p_hi, t, cfg.noise_eve);
        let l = (cfg.users[0].task_bits - cfg.bits_per_rate() * r).max(0.0);
        let e_hi =
            noma_sec::model::local_energy(&cfg.users[0], l, cfg.deadline) + p_hi * cfg.deadline;
        assert!(
            g.energy <= e_hi * (1.0 + 1e-12),
            "seed {seed}: {} vs {e_hi}",
            g.energy
        );
    }
}

#[test]
fn best_order_matches_per_order_minima() {
    for seed in 0..4 {
        let (cfg, ch) = instance(2, 3e5, seed);
        let g = brute_force_grid(&cfg, &ch, &GridSpec::default()).unwrap();
        let (a, b) = (&g.per_order[0], &g.per_order[1]);
        let expected = if a.1 <= b.1 { &a.0 } else { &b.0 };
        assert_eq!(&g.sequence, expected);
        assert_eq!(g.energy, a.1.min(b.1));
    }
}

#[test]
fn refining_a_nested_grid_never_hurts() {
    let (cfg, ch) = instance(2, 2e5, 11);
    let mut last = f64::INFINITY;
    // 2n − 1 points on the same log-spaced bounds contain the n-point grid.
    for points in [9, 17, 33, 65] {
        let grid = GridSpec {
            points,
            ..GridSpec::default()
        };
        let e = brute_force_grid(&cfg, &ch, &grid).unwrap().energy;
        assert!(e <= last, "{points}: {e} > {last}");
        last = e;
    }
}

#[test]
fn grid_runs_are_deterministic() {
    let (cfg, ch) = instance(3, 2e5, 5);
    let grid = GridSpec {
        points: 24,
        ..GridSpec::default()
    };
    let a = brute_force_grid(&cfg, &ch, &grid).unwrap();
    let b = brute_force_grid(&cfg, &ch, &grid).unwrap();
    assert_eq!(a, b);
}

#[test]
fn monte_carlo_matches_outage_target() {
    let n = 1_000_000;
    let (cfg, ch) = instance(3, 1e5, 21);
    let mut alloc = Allocation::all_local(&cfg);
    alloc.power = vec![0.2, 0.1, 0.3];
    alloc.order = round_decoding_order(&alloc.power, &ch);
    let sinr = sinr_vector(&alloc.power, &alloc.order, &ch).unwrap();
    for k in 0..3 {
        alloc.rate_secret[k] = max_secret_rate(&alloc.power, &alloc.order, &ch, &cfg, k).unwrap();
        alloc.rate_codeword[k] = sinr[k].ln_1p() / std::f64::consts::LN_2;
    }
    let m = link_metrics(&alloc, &ch, &cfg).unwrap();
    let mc = monte_carlo_sop(&alloc, &ch, &cfg, n, 3).unwrap();
    for k in 0..3 {
        assert!(alloc.rate_secret[k] > 0.0);
        let p = m.outage[k];
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (mc[k].estimate - p).abs() <= 3.0 * se,
            "user {k}: {} vs {p} (se {se})",
            mc[k].estimate
        );
    }
}

#[test]
fn too_few_samples_are_refused() {
    let (cfg, ch) = instance(2, 1e5, 0);
    let alloc = Allocation::all_local(&cfg);
    assert!(monte_carlo_sop(&alloc, &ch, &cfg, 999, 0).is_err());
}
