use noma_sec::model::sample_channels;
use noma_sec::subsolver::{
    kkt_residual, solve, AffineExpr, ConstraintRow, Curvature, Program, SolveStatus, SolverOptions,
    WarmStart,
};
use noma_sec::transform::{init_point, linearize, AlMultipliers, Variant};
use noma_sec::SystemConfig;
use proptest::prelude::*;

const BANDWIDTH: f64 = 10e6;
const DEADLINE: f64 = 0.1;
const CYCLES: f64 = 1e3;
const CAPACITANCE: f64 = 1e-28;

/// One user offloading `bits` over a link of normalized gain `tau`.
/// Variables: local bits in units of `B·T`, power, rate.
struct SingleUser {
    bits: f64,
    tau: f64,
    p_max: f64,
}

impl SingleUser {
    fn unit(&self) -> f64 {
        BANDWIDTH * DEADLINE
    }

    fn energy(&self, l_bits: f64, p: f64) -> f64 {
        CAPACITANCE * (CYCLES * l_bits).powi(3) / (DEADLINE * DEADLINE) + p * DEADLINE
    }

    fn program(&self) -> Program {
        let unit = self.unit();
        let task = self.bits / unit;
        let mut prog = Program::new(3);
        let c = CYCLES * unit;
        prog.objective
            .cubics
            .push((0, CAPACITANCE * c * c * c / (DEADLINE * DEADLINE)));
        prog.objective.linear = AffineExpr::new(vec![(1, DEADLINE)], 0.0);
        let row = |terms, constant| ConstraintRow::affine(AffineExpr::new(terms, constant));
        // L − l ≤ B·T·R
        prog.constraints.push(row(vec![(0, -1.0), (2, -1.0)], task));
        // R ≤ log2(1 + τ p)
        prog.constraints.push(ConstraintRow {
            affine: AffineExpr::new(vec![(2, 1.0)], 0.0),
            curvature: Curvature::NegLog2OnePlus {
                var: 1,
                scale: self.tau,
            },
        });
        prog.constraints.push(row(vec![(0, -1.0)], 0.0));
        prog.constraints.push(row(vec![(0, 1.0)], -task));
        prog.constraints.push(row(vec![(1, -1.0)], 0.0));
        prog.constraints.push(row(vec![(1, 1.0)], -self.p_max));
        prog
    }

    fn start(&self) -> Vec<f64> {
        vec![0.5 * self.bits / self.unit(), 0.5 * self.p_max, 0.0]
    }

    /// Best feasible point of an `n × n` grid over `[0, L] × [0, p_max]`.
    fn grid(&self, n: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..n {
            let l = self.bits * i as f64 / (n - 1) as f64;
            for j in 0..n {
                let p = self.p_max * j as f64 / (n - 1) as f64;
                let offloaded = self.unit() * (self.tau * p).ln_1p() / std::f64::consts::LN_2;
                if offloaded >= self.bits - l {
                    best = best.min(self.energy(l, p));
                }
            }
        }
        best
    }
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn single_user_matches_dense_grid() {
    for (bits, tau) in [(1e5, 1.0), (1e5, 0.3), (2e5, 2.0)] {
        // The full-offload power bounds the useful range.
        let full = ((bits / (BANDWIDTH * DEADLINE)).exp2() - 1.0) / tau;
        let su = SingleUser {
            bits,
            tau,
            p_max: 1.2 * full,
        };
        let sol = solve(&su.program(), &WarmStart::primal(su.start()), &opts());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.kkt <= 1e-8);
        let grid = su.grid(400);
        assert!(
            sol.objective <= grid * (1.0 + 1e-9),
            "{} vs {grid}",
            sol.objective
        );
        assert!(grid <= sol.objective * 1.01, "{} vs {grid}", sol.objective);
    }
}

#[test]
fn never_above_any_feasible_grid_point() {
    let su = SingleUser {
        bits: 1e5,
        tau: 1.0,
        p_max: 0.1,
    };
    let prog = su.program();
    let sol = solve(&prog, &WarmStart::primal(su.start()), &opts());
    for i in 0..50 {
        for j in 0..50 {
            let l = su.bits / su.unit() * i as f64 / 49.0;
            let p = su.p_max * j as f64 / 49.0;
            let r = (su.tau * p).ln_1p() / std::f64::consts::LN_2;
            let x = [l, p, r];
            if prog.constraint_values(&x).iter().all(|&g| g <= 0.0) {
                assert!(sol.objective <= prog.objective.value(&x) + 1e-8);
            }
        }
    }
}

#[test]
fn row_scaling_does_not_move_the_argmin() {
    let su = SingleUser {
        bits: 1e5,
        tau: 0.7,
        p_max: 0.3,
    };
    let prog = su.program();
    let base = solve(&prog, &WarmStart::primal(su.start()), &opts());
    for row in 0..prog.constraints.len() {
        let mut scaled = prog.clone();
        let r = &mut scaled.constraints[row];
        if r.curvature != Curvature::Affine {
            continue;
        }
        r.affine = r.affine.scaled(1e3);
        let sol = solve(&scaled, &WarmStart::primal(su.start()), &opts());
        assert_eq!(sol.status, SolveStatus::Optimal);
        for (a, b) in sol.x.iter().zip(&base.x) {
            assert!(
                (a - b).abs() <= 1e-6 * (1.0 + b.abs()),
                "row {row}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn converged_subproblems_meet_the_kkt_target() {
    let cfg = SystemConfig::standard(3, 4e5);
    for seed in 0..5 {
        let ch = sample_channels(&cfg, seed).unwrap();
        let cfg = ch.relabel_config(&cfg);
        let start = init_point(&cfg, &ch, Variant::PROPOSED).unwrap();
        let sub = linearize(
            &start,
            &cfg,
            &ch,
            Variant::PROPOSED,
            &AlMultipliers::new(3, 10.0),
        )
        .unwrap();
        let sol = sub.solve(&WarmStart::primal(sub.anchor.clone()), &opts());
        assert_eq!(sol.status, SolveStatus::Optimal, "seed {seed}");
        assert!(kkt_residual(&sub.program, &sol.x, &sol.multipliers) <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn objective_gradient_matches_central_differences(
        seed in 0u64..200,
        lambda in -0.5f64..0.5,
        shift in prop::collection::vec(0.5f64..1.5, 40),
    ) {
        let cfg = SystemConfig::standard(3, 4e5);
        let ch = sample_channels(&cfg, seed).unwrap();
        let cfg = ch.relabel_config(&cfg);
        let start = init_point(&cfg, &ch, Variant::PROPOSED).unwrap();
        let mut al = AlMultipliers::new(3, 0.5);
        for (a, b) in al.lambda1.clone().off_diagonal() {
            al.lambda1[(a, b)] = lambda;
            al.lambda2[(a, b)] = lambda;
            al.lambda3[(a, b)] = lambda;
        }
        let sub = linearize(&start, &cfg, &ch, Variant::PROPOSED, &al).unwrap();
        let x: Vec<f64> = sub
            .anchor
            .iter()
            .zip(shift.iter().cycle())
            .map(|(&a, &s)| a * s + 0.01 * s)
            .collect();
        let grad = sub.program.objective.gradient(&x);
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut up = x.clone();
            let mut down = x.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (sub.objective(&up) - sub.objective(&down)) / (2.0 * h);
            let scale = grad[i].abs().max(1e-6);
            prop_assert!((fd - grad[i]).abs() <= 1e-5 * scale, "var {i}: {fd} vs {}", grad[i]);
        }
    }
}
