//! Measured checks shared by `validate`, `convergence` and the acceptance
//! suite. Each check reports its measurement next to its threshold.

use std::fmt;
use std::time::{Duration, Instant};

use noma_sec::benchmarks::{run_scheme, Scheme};
use noma_sec::model::{
    feasibility_check, link_metrics, max_secret_rate, round_decoding_order, sample_channels,
    sinr_vector,
};
use noma_sec::oracle::{brute_force_grid, monte_carlo_sop, GridResult};
use noma_sec::pdd::{solve, SolveResult};
use noma_sec::{Allocation, ChannelRealization, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few samples for the statistical test to mean anything.
    LowPower,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::LowPower => "LOW-POWER",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured <= threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            verdict: if measured <= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            measured,
            threshold,
            detail,
        }
    }

    pub fn at_least(
        name: impl Into<String>,
        measured: f64,
        threshold: f64,
        detail: String,
    ) -> Self {
        Self {
            verdict: if measured >= threshold {
                Verdict::Pass
            } else {
                Verdict::Fail
            },
            ..Self::at_most(name, measured, threshold, detail)
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<9} {:<40} measured {:.4e} threshold {:.4e}  {}",
            self.verdict.to_string(),
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

pub fn instance(
    cfg: &ExperimentConfig,
    users: usize,
    task_bits: f64,
    seed: u64,
) -> noma_sec::Result<(SystemConfig, ChannelRealization)> {
    let sys = cfg.system_config_for(users, task_bits);
    let ch = sample_channels(&sys, seed)?;
    Ok((ch.relabel_config(&sys), ch))
}

pub struct ConvergenceRun {
    pub task_bits: f64,
    pub result: SolveResult,
    pub wall: Duration,
}

pub fn convergence_runs(cfg: &ExperimentConfig) -> noma_sec::Result<Vec<ConvergenceRun>> {
    let pdd = cfg.pdd_config();
    cfg.convergence
        .task_bits
        .iter()
        .map(|&bits| {
            let (sys, ch) = instance(cfg, cfg.system.users, bits, cfg.convergence.seed)?;
            let start = Instant::now();
            let result = solve(&sys, &ch, &pdd)?;
            Ok(ConvergenceRun {
                task_bits: bits,
                result,
                wall: start.elapsed(),
            })
        })
        .collect()
}

/// `(max − min) / |last|` over the final `window` entries.
pub fn relative_span(values: &[f64], window: usize) -> f64 {
    let tail = &values[values.len().saturating_sub(window)..];
    let (lo, hi) = tail
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    match tail.last() {
        Some(&last) if last != 0.0 => (hi - lo) / last.abs(),
        Some(_) => hi - lo,
        None => 0.0,
    }
}

pub const SATURATION_WINDOW: usize = 10;
pub const SATURATION_SPAN: f64 = 1e-3;
pub const WALL_LIMIT_S: f64 = 300.0;

pub fn convergence_checks(cfg: &ExperimentConfig, runs: &[ConvergenceRun]) -> Vec<Check> {
    let mut out = Vec::new();
    for run in runs {
        let r = &run.result;
        let tag = format!("L={:.0e}", run.task_bits);
        out.push(Check::at_most(
            format!("convergence {tag} final violation"),
            r.final_violation,
            cfg.pdd.delta_outer,
            format!("{} iterations, status {:?}", r.state.trace.len(), r.status),
        ));
        let rises = r
            .state
            .trace
            .windows(2)
            .filter(|w| w[1].rho > w[0].rho)
            .count();
        let rho_last = r.state.trace.last().map_or(f64::NAN, |t| t.rho);
        out.push(Check::at_most(
            format!("convergence {tag} rho increases"),
            rises as f64,
            0.0,
            format!("final rho {rho_last:.3e}"),
        ));
        let objective: Vec<f64> = r.state.trace.iter().map(|t| t.objective).collect();
        out.push(Check::at_most(
            format!("convergence {tag} saturation"),
            relative_span(&objective, SATURATION_WINDOW),
            SATURATION_SPAN,
            format!(
                "relative span of the last {SATURATION_WINDOW} of {} objective values",
                objective.len()
            ),
        ));
        out.push(Check::at_most(
            format!("convergence {tag} wall time (s)"),
            run.wall.as_secs_f64(),
            WALL_LIMIT_S,
            String::new(),
        ));
    }
    out
}

/// A random allocation that meets every constraint: random powers, the
/// order their received powers imply, a secret rate whose outage is drawn
/// log-uniformly from `[ε/100, ε]`, and local bits covering the
/// rest of the task. Users whose link is weaker than the eavesdropper's
/// cannot carry secret bits at any power and stay at rate zero; `None` when
/// no user of the realization can.
pub fn random_feasible_allocation(
    cfg: &ExperimentConfig,
    seed: u64,
) -> noma_sec::Result<Option<(SystemConfig, ChannelRealization, Allocation)>> {
    let bits = cfg.oracle.benchmark_task_bits;
    let (sys, ch) = instance(cfg, cfg.system.users, bits, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let mut alloc = Allocation::all_local(&sys);
        alloc.power = (0..sys.num_users())
            .map(|_| rng.random_range(1e-3..1.0))
            .collect();
        alloc.order = round_decoding_order(&alloc.power, &ch);
        let sinr = sinr_vector(&alloc.power, &alloc.order, &ch)?;
        for k in 0..sys.num_users() {
            let target = sys.epsilon * 10f64.powf(-rng.random_range(0.0..=2.0));
            let at_target = sys.clone().with_epsilon(target);
            alloc.rate_secret[k] = max_secret_rate(&alloc.power, &alloc.order, &ch, &at_target, k)?;
            alloc.rate_codeword[k] = sinr[k].ln_1p() / std::f64::consts::LN_2;
            alloc.local_bits[k] = (bits - sys.bits_per_rate() * alloc.rate_secret[k]).max(0.0);
        }
        let positive = alloc.rate_secret.iter().any(|&r| r > 0.0);
        if positive && feasibility_check(&alloc, &ch, &sys, 1e-9)?.is_clean() {
            return Ok(Some((sys, ch, alloc)));
        }
    }
    Ok(None)
}

pub type Sample = (u64, SystemConfig, ChannelRealization, Allocation);

/// The first `n` seeds, in order, that yield a feasible allocation.
pub fn random_feasible_allocations(
    cfg: &ExperimentConfig,
    n: usize,
) -> noma_sec::Result<Vec<Sample>> {
    let mut out = Vec::with_capacity(n);
    let mut seed = 0;
    while out.len() < n {
        if let Some((sys, ch, alloc)) = random_feasible_allocation(cfg, seed)? {
            out.push((seed, sys, ch, alloc));
        }
        seed += 1;
    }
    Ok(out)
}

/// Two-sided level of a 3σ normal test.
pub const THREE_SIGMA_LEVEL: f64 = 2.699_796_063_260_2e-3;

/// Expected hit count below which the normal approximation is not trusted.
pub const NORMAL_MIN_HITS: f64 = 10.0;

/// Monte-Carlo outage estimates against the closed form, per user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McComparison {
    /// Largest `|estimate − p| / se` over users with at least
    /// [`NORMAL_MIN_HITS`] expected hits, `se` the binomial standard error
    /// under the closed-form `p`.
    pub max_z: f64,
    /// Smallest exact two-sided Poisson tail probability of the observed
    /// hit count over the remaining (rare-event) users; 1 if none.
    pub min_tail: f64,
    pub rare_users: usize,
}

/// Two-sided tail probability of observing `k` under Poisson(`lambda`).
pub fn poisson_two_sided(k: u64, lambda: f64) -> f64 {
    let mut term = (-lambda).exp();
    let mut below = 0.0;
    for i in 0..k {
        below += term;
        term *= lambda / (i + 1) as f64;
    }
    // below = P(X < k), term = P(X = k)
    let lower = below + term;
    let upper = 1.0 - below;
    (2.0 * lower.min(upper)).min(1.0)
}

pub fn mc_compare(
    alloc: &Allocation,
    ch: &ChannelRealization,
    sys: &SystemConfig,
    samples: usize,
    seed: u64,
) -> noma_sec::Result<McComparison> {
    let closed = link_metrics(alloc, ch, sys)?.outage;
    let mc = monte_carlo_sop(alloc, ch, sys, samples, seed)?;
    let n = samples as f64;
    let mut out = McComparison {
        max_z: 0.0,
        min_tail: 1.0,
        rare_users: 0,
    };
    for ((&p, est), &rate) in closed.iter().zip(&mc).zip(&alloc.rate_secret) {
        if rate <= 0.0 || p <= 0.0 || p >= 1.0 {
            continue;
        }
        if n * p.min(1.0 - p) >= NORMAL_MIN_HITS {
            let se = (p * (1.0 - p) / n).sqrt();
            out.max_z = out.max_z.max((est.estimate - p).abs() / se);
        } else {
            // count the rarer outcome
            let (hits, lambda) = if p <= 0.5 {
                (est.estimate * n, n * p)
            } else {
                ((1.0 - est.estimate) * n, n * (1.0 - p))
            };
            out.min_tail = out
                .min_tail
                .min(poisson_two_sided(hits.round() as u64, lambda));
            out.rare_users += 1;
        }
    }
    Ok(out)
}

pub fn mc_checks(cfg: &ExperimentConfig) -> noma_sec::Result<Vec<Check>> {
    let o = &cfg.oracle;
    let cmp: Vec<McComparison> = random_feasible_allocations(cfg, o.mc_allocations)?
        .par_iter()
        .map(|(seed, sys, ch, alloc)| mc_compare(alloc, ch, sys, o.mc_samples, 1_000 + seed))
        .collect::<noma_sec::Result<_>>()?;
    let rare: usize = cmp.iter().map(|c| c.rare_users).sum();
    let detail = format!(
        "{} allocations, {} samples each",
        o.mc_allocations, o.mc_samples
    );
    let mut checks = vec![
        Check::at_most(
            "outage Monte-Carlo vs closed form (|z|)",
            cmp.iter().map(|c| c.max_z).fold(0.0, f64::max),
            o.mc_sigmas,
            detail.clone(),
        ),
        Check::at_least(
            "outage Monte-Carlo rare events (tail p)",
            cmp.iter().map(|c| c.min_tail).fold(1.0, f64::min),
            THREE_SIGMA_LEVEL,
            format!("{detail}, {rare} users below {NORMAL_MIN_HITS} expected hits"),
        ),
    ];
    if o.mc_samples < o.mc_power_threshold {
        for c in &mut checks {
            c.verdict = Verdict::LowPower;
            c.detail += &format!(", below the {} sample threshold", o.mc_power_threshold);
        }
    }
    Ok(checks)
}

/// Largest `|P_so − ε|` when every user transmits at its maximum secret rate.
pub fn round_trip_check(cfg: &ExperimentConfig) -> noma_sec::Result<Check> {
    let mut worst: f64 = 0.0;
    for (_, sys, ch, mut alloc) in random_feasible_allocations(cfg, cfg.oracle.mc_allocations)? {
        for k in 0..sys.num_users() {
            alloc.rate_secret[k] = max_secret_rate(&alloc.power, &alloc.order, &ch, &sys, k)?;
        }
        for p in link_metrics(&alloc, &ch, &sys)?.outage {
            worst = worst.max((p - sys.epsilon).abs());
        }
    }
    Ok(Check::at_most(
        "max secret rate round trip |P_so - eps|",
        worst,
        1e-9,
        format!("{} allocations", cfg.oracle.mc_allocations),
    ))
}

pub struct GridCase {
    pub seed: u64,
    pub task_bits: f64,
    pub grid: GridResult,
    pub grid_wall: Duration,
    pub pdd: SolveResult,
}

impl GridCase {
    pub fn ratio(&self) -> f64 {
        self.pdd.energy.total / self.grid.energy
    }
}

pub fn grid_cases(cfg: &ExperimentConfig, seeds: &[u64]) -> noma_sec::Result<Vec<GridCase>> {
    let o = &cfg.oracle;
    let spec = cfg.grid();
    let pdd = cfg.pdd_config();
    let cells: Vec<(u64, f64)> = seeds
        .iter()
        .flat_map(|&s| o.grid_task_bits.iter().map(move |&b| (s, b)))
        .collect();
    cells
        .into_par_iter()
        .map(|(seed, bits)| {
            let (sys, ch) = instance(cfg, o.grid_users, bits, seed)?;
            let start = Instant::now();
            let grid = brute_force_grid(&sys, &ch, &spec)?;
            let grid_wall = start.elapsed();
            let pdd = solve(&sys, &ch, &pdd)?;
            Ok(GridCase {
                seed,
                task_bits: bits,
                grid,
                grid_wall,
                pdd,
            })
        })
        .collect()
}

pub fn grid_checks(cfg: &ExperimentConfig, cases: &[GridCase]) -> Vec<Check> {
    let (worst, at) = cases
        .iter()
        .map(|c| (c.ratio(), (c.seed, c.task_bits)))
        .fold(
            (f64::NEG_INFINITY, (0, 0.0)),
            |a, b| if b.0 > a.0 { b } else { a },
        );
    let slowest = cases
        .iter()
        .map(|c| c.grid_wall.as_secs_f64())
        .fold(0.0, f64::max);
    let all_converged = cases.iter().all(|c| c.pdd.converged());
    vec![
        Check::at_most(
            "grid optimality proxy (E_pdd / E_grid)",
            worst,
            1.0 + cfg.oracle.grid_slack,
            format!(
                "{} instances, worst at seed {} L={:.0e}, all converged: {all_converged}",
                cases.len(),
                at.0,
                at.1
            ),
        ),
        Check::at_most(
            "grid oracle wall time per instance (s)",
            slowest,
            30.0,
            format!("{} points per user, every order", cfg.oracle.grid_points),
        ),
    ]
}

pub struct SchemeEnergies {
    pub seed: u64,
    pub energy: Vec<(Scheme, f64)>,
}

impl SchemeEnergies {
    pub fn get(&self, scheme: Scheme) -> f64 {
        self.energy
            .iter()
            .find(|(s, _)| *s == scheme)
            .map_or(f64::NAN, |(_, e)| *e)
    }
}

pub fn benchmark_energies(cfg: &ExperimentConfig) -> noma_sec::Result<Vec<SchemeEnergies>> {
    let pdd = cfg.pdd_config();
    let bits = cfg.oracle.benchmark_task_bits;
    (0..cfg.oracle.benchmark_seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let (sys, ch) = instance(cfg, cfg.system.users, bits, seed)?;
            let energy = Scheme::ALL
                .iter()
                .map(|&s| Ok((s, run_scheme(s, &sys, &ch, &pdd)?.energy.total)))
                .collect::<noma_sec::Result<_>>()?;
            Ok(SchemeEnergies { seed, energy })
        })
        .collect()
}

pub fn ordering_checks(cfg: &ExperimentConfig, rows: &[SchemeEnergies]) -> Vec<Check> {
    let o = &cfg.oracle;
    let slack = 1.0 + o.benchmark_slack;
    let frac = |pred: &dyn Fn(&SchemeEnergies) -> bool| {
        rows.iter().filter(|r| pred(r)).count() as f64 / rows.len() as f64
    };
    let detail = format!("{} seeds at L={:.0e}", rows.len(), o.benchmark_task_bits);
    vec![
        Check::at_least(
            "ordering E(no-eve) <= E(proposed)",
            frac(&|r| r.get(Scheme::NoEve) <= r.get(Scheme::Proposed)),
            o.benchmark_fraction,
            detail.clone(),
        ),
        Check::at_least(
            "ordering E(proposed) <= 1.02 E(fixed-sic)",
            frac(&|r| r.get(Scheme::Proposed) <= slack * r.get(Scheme::FixedSic)),
            o.benchmark_fraction,
            detail.clone(),
        ),
        Check::at_least(
            "ordering E(proposed) <= 1.02 E(oma)",
            frac(&|r| r.get(Scheme::Proposed) <= slack * r.get(Scheme::SecureOma)),
            o.benchmark_fraction,
            detail,
        ),
    ]
}

/// Two users where the weaker one carries most of the load, so decoding it
/// last (interference-free) beats the descending-gain order.
pub fn order_witness(
    cfg: &ExperimentConfig,
) -> noma_sec::Result<(SystemConfig, ChannelRealization)> {
    let mut sys = cfg.system_config_for(2, 0.0);
    sys.users[0].task_bits = 2e4;
    sys.users[1].task_bits = 6e5;
    let ch = ChannelRealization::from_tau(vec![1.0, 0.9], vec![1e10, 1e10])?;
    Ok((sys, ch))
}

pub fn witness_check(cfg: &ExperimentConfig) -> noma_sec::Result<Check> {
    let (sys, ch) = order_witness(cfg)?;
    let pdd = cfg.pdd_config();
    let p = run_scheme(Scheme::Proposed, &sys, &ch, &pdd)?;
    let f = run_scheme(Scheme::FixedSic, &sys, &ch, &pdd)?;
    let ok = p.converged() && f.converged() && p.feasibility.is_clean();
    let ratio = if ok {
        p.energy.total / f.energy.total
    } else {
        f64::INFINITY
    };
    let mut check = Check::at_most(
        "optimized order vs descending gain",
        ratio,
        1.0,
        format!(
            "E(proposed) {:.4e} J, E(fixed-sic) {:.4e} J",
            p.energy.total, f.energy.total
        ),
    );
    // strict improvement
    if ratio >= 1.0 {
        check.verdict = Verdict::Fail;
    }
    Ok(check)
}

pub fn limit_check(cfg: &ExperimentConfig) -> noma_sec::Result<Check> {
    let o = &cfg.oracle;
    let pdd = cfg.pdd_config();
    let gaps: Vec<f64> = (0..o.benchmark_seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let (sys, ch) = instance(cfg, cfg.system.users, o.benchmark_task_bits, seed)?;
            let sys = sys.with_epsilon(o.limit_epsilon);
            let p = run_scheme(Scheme::Proposed, &sys, &ch, &pdd)?.energy.total;
            let n = run_scheme(Scheme::NoEve, &sys, &ch, &pdd)?.energy.total;
            Ok(((p - n) / n).abs())
        })
        .collect::<noma_sec::Result<_>>()?;
    Ok(Check::at_most(
        format!("eps={} secure vs no-eve gap", o.limit_epsilon),
        gaps.iter().copied().fold(0.0, f64::max),
        o.limit_gap,
        format!("{} seeds", gaps.len()),
    ))
}

/// Largest drop in proposed-scheme energy between consecutive task sizes.
pub fn monotonicity_check(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    sweep: &[f64],
) -> noma_sec::Result<Check> {
    let pdd = cfg.pdd_config();
    let drops: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| {
            let energies: Vec<f64> = sweep
                .iter()
                .map(|&bits| {
                    let (sys, ch) = instance(cfg, cfg.system.users, bits, seed)?;
                    Ok(solve(&sys, &ch, &pdd)?.energy.total)
                })
                .collect::<noma_sec::Result<_>>()?;
            Ok(energies.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max))
        })
        .collect::<noma_sec::Result<_>>()?;
    Ok(Check::at_most(
        "monotone energy in task size (max drop, J)",
        drops.iter().copied().fold(0.0, f64::max),
        1e-9,
        format!("{} seeds x {} task sizes", seeds.len(), sweep.len()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_tail_matches_hand_values() {
        // P(X >= 1) = 1 − e^{−λ}
        let lambda: f64 = 0.05;
        let expected = 2.0 * (1.0 - (-lambda).exp());
        assert!((poisson_two_sided(1, lambda) - expected).abs() < 1e-15);
        assert_eq!(poisson_two_sided(0, lambda), 1.0);
        // far in the upper tail
        assert!(poisson_two_sided(20, 2.0) < 1e-10);
    }

    #[test]
    fn span_uses_only_the_window() {
        let v = [10.0, 5.0, 2.0, 2.0, 2.001];
        assert!((relative_span(&v, 3) - 0.001 / 2.001).abs() < 1e-15);
        assert_eq!(relative_span(&[], 10), 0.0);
    }

    #[test]
    fn verdicts_follow_thresholds() {
        assert_eq!(
            Check::at_most("a", 1.0, 1.0, String::new()).verdict,
            Verdict::Pass
        );
        assert_eq!(
            Check::at_most("a", 1.1, 1.0, String::new()).verdict,
            Verdict::Fail
        );
        assert_eq!(
            Check::at_least("a", 0.8, 0.9, String::new()).verdict,
            Verdict::Fail
        );
    }

    #[test]
    fn random_allocations_are_feasible() {
        let cfg = ExperimentConfig::default();
        for (_, sys, ch, alloc) in random_feasible_allocations(&cfg, 5).unwrap() {
            assert!(feasibility_check(&alloc, &ch, &sys, 1e-9)
                .unwrap()
                .is_clean());
            let outage = link_metrics(&alloc, &ch, &sys).unwrap().outage;
            assert!(outage.iter().all(|&p| p <= sys.epsilon * (1.0 + 1e-9)));
        }
    }
}
