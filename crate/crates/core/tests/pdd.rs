use noma_sec::model::{
    decoding_sequence, feasibility_check, round_decoding_order, sample_channels,
};
use noma_sec::oracle::convex_argmin;
use noma_sec::pdd::{
    inner_loop, mu_scalar, outer_update, solve, OuterStep, PddConfig, PddState, SolveStatusFinal,
};
use noma_sec::transform::{init_point, Variant};
use noma_sec::{ChannelRealization, SystemConfig};
use proptest::prelude::*;

fn instance(k: usize, bits: f64, seed: u64) -> (SystemConfig, ChannelRealization) {
    let cfg = SystemConfig::standard(k, bits);
    let ch = sample_channels(&cfg, seed).unwrap();
    (ch.relabel_config(&cfg), ch)
}

/// The two penalty terms that involve `μ`, up to the common factor.
fn mu_terms(beta: f64, rho: f64, l1: f64, l2: f64) -> impl Fn(f64) -> f64 {
    move |mu| (beta - mu + rho * l1).powi(2) + (beta * (1.0 - mu) + rho * l2).powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mu_update_minimizes_its_penalty_terms(
        beta in 0.0f64..1.0,
        rho in 1e-3f64..10.0,
        l1 in -0.2f64..0.2,
        l2 in -0.2f64..0.2,
    ) {
        let closed = mu_scalar(beta, rho, l1, l2);
        let numeric = convex_argmin(mu_terms(beta, rho, l1, l2), -10.0, 10.0);
        prop_assert!((closed - numeric).abs() <= 1e-8, "{closed} vs {numeric}");
    }

    #[test]
    fn outer_branches_are_exclusive(
        g in prop::collection::vec(-1.0f64..1.0, 15),
        outer in 0usize..8,
        scale in 1e-4f64..1.0,
    ) {
        let mut state = PddState::new(3, &PddConfig::default());
        state.outer = outer;
        let g: Vec<f64> = g.iter().map(|v| v * scale).collect();
        let before = state.clone();
        let eta = state.eta();
        match outer_update(&mut state, &g) {
            OuterStep::DualUpdate => {
                prop_assert!(g.iter().all(|v| v.abs() <= eta));
                prop_assert_eq!(state.al.rho, before.al.rho);
            }
            OuterStep::PenaltyDecrease => {
                prop_assert!(state.al.rho < before.al.rho);
                prop_assert_eq!(&state.al.lambda1, &before.al.lambda1);
                prop_assert_eq!(&state.al.lambda2, &before.al.lambda2);
                prop_assert_eq!(&state.al.lambda3, &before.al.lambda3);
            }
        }
        prop_assert_eq!(state.outer, outer + 1);
    }

    #[test]
    fn rounded_order_passes_the_order_checks(
        seed in 0u64..500,
        power in prop::collection::vec(0.0f64..1.0, 4),
    ) {
        let (cfg, ch) = instance(4, 0.0, seed);
        let mut alloc = noma_sec::Allocation::all_local(&cfg);
        alloc.power = power;
        alloc.order = round_decoding_order(&alloc.power, &ch);
        prop_assert!(decoding_sequence(&alloc.order).is_some());
        let report = feasibility_check(&alloc, &ch, &cfg, 1e-9).unwrap();
        prop_assert!(!report.has(noma_sec::model::Constraint::DecodingOrder));
        prop_assert!(!report.has(noma_sec::model::Constraint::OrderComplement));
    }
}

#[test]
fn mu_example() {
    let mu = mu_scalar(0.5, 10.0, 0.01, 0.02);
    assert!((mu - 0.76).abs() < 1e-12);
    let f = mu_terms(0.5, 10.0, 0.01, 0.02);
    let h = 1e-6;
    let slope = (f(mu + h) - f(mu - h)) / (2.0 * h);
    assert!(slope.abs() <= 1e-8);
}

#[test]
fn first_inner_pass_never_increases_the_objective() {
    let (cfg, ch) = instance(3, 4e5, 0);
    let pdd = PddConfig::default();
    let mut state = PddState::new(3, &pdd);
    let start = init_point(&cfg, &ch, Variant::PROPOSED).unwrap();
    inner_loop(&mut state, start, &cfg, &ch, Variant::PROPOSED, &pdd).unwrap();
    let objs: Vec<f64> = state.trace.iter().map(|t| t.objective).collect();
    assert!(objs.len() >= 2);
    for w in objs.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "{objs:?}");
    }
}

#[test]
fn infinite_inner_tolerance_takes_one_step() {
    let (cfg, ch) = instance(3, 4e5, 1);
    let pdd = PddConfig {
        delta_inner: f64::INFINITY,
        ..PddConfig::default()
    };
    let mut state = PddState::new(3, &pdd);
    let start = init_point(&cfg, &ch, Variant::PROPOSED).unwrap();
    inner_loop(&mut state, start, &cfg, &ch, Variant::PROPOSED, &pdd).unwrap();
    assert_eq!(state.inner, 1);
}

#[test]
fn converged_fixed_point_exits_after_one_step() {
    let (cfg, ch) = instance(3, 3e5, 2);
    let pdd = PddConfig::default();
    let mut state = PddState::new(3, &pdd);
    let start = init_point(&cfg, &ch, Variant::FIXED_SIC).unwrap();
    let settled = inner_loop(&mut state, start, &cfg, &ch, Variant::FIXED_SIC, &pdd).unwrap();
    let mut again = PddState::new(3, &pdd);
    inner_loop(&mut again, settled, &cfg, &ch, Variant::FIXED_SIC, &pdd).unwrap();
    assert_eq!(again.inner, 1);
}

#[test]
fn zero_tasks_cost_nothing() {
    let (cfg, ch) = instance(3, 0.0, 3);
    let r = solve(&cfg, &ch, &PddConfig::default()).unwrap();
    assert_eq!(r.status, SolveStatusFinal::Converged);
    assert_eq!(r.energy.total, 0.0);
}

#[test]
fn converged_solutions_are_feasible_total_orders() {
    let pdd = PddConfig::default();
    for seed in 0..6 {
        let (cfg, ch) = instance(3, 4e5, seed);
        let r = solve(&cfg, &ch, &pdd).unwrap();
        assert_eq!(r.status, SolveStatusFinal::Converged, "seed {seed}");
        assert!(r.final_violation <= pdd.delta_outer);
        assert!(decoding_sequence(&r.alloc.order).is_some());
        let report = feasibility_check(&r.alloc, &ch, &cfg, pdd.feasibility_tol).unwrap();
        assert!(report.is_clean(), "seed {seed}: {report:?}");
        // dual updates only happen below the threshold that allowed them
        for rec in &r.state.outer_trace {
            if rec.step == OuterStep::DualUpdate {
                assert!(rec.violation <= rec.eta);
            }
        }
        // the penalty never grows
        for w in r.state.trace.windows(2) {
            assert!(w[1].rho <= w[0].rho);
        }
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    let (cfg, ch) = instance(3, 5e5, 7);
    let pdd = PddConfig::default();
    let a = solve(&cfg, &ch, &pdd).unwrap();
    let b = solve(&cfg, &ch, &pdd).unwrap();
    assert_eq!(a.state.trace, b.state.trace);
    assert_eq!(a.alloc, b.alloc);
}

#[test]
fn single_user_matches_fixed_order() {
    let (cfg, ch) = instance(1, 4e5, 4);
    let pdd = PddConfig::default();
    let p = solve(&cfg, &ch, &pdd).unwrap();
    let f = noma_sec::benchmarks::solve_fixed_sic(&cfg, &ch, &pdd).unwrap();
    assert!((p.energy.total - f.energy.total).abs() <= 1e-9 * f.energy.total);
}
