//! Penalty dual decomposition: an inner successive-convex-approximation
//! loop around [`crate::subsolver`], and an outer loop that either updates
//! the multipliers or shrinks the penalty depending on how far the relaxed
//! decoding order is from binary.

use crate::error::{Error, Result};
use crate::model::{
    decoding_sequence, feasibility_check_with, round_decoding_order, secrecy_threshold,
    secret_rate_from_sinr, sinr_vector, total_energy, CheckOptions,
};
use crate::pair::{lower_pairs, PairMatrix};
use crate::subsolver::{SolveStatus, SolverOptions, SubproblemSolution, WarmStart};
use crate::transform::{
    al_penalty, init_point, linearize, tight_aux, violation_vector, AlMultipliers,
    ConvexSubproblem, Iterate, Variant,
};
use crate::{Allocation, ChannelRealization, EnergyBreakdown, FeasibilityReport, SystemConfig};

/// Knobs of the double loop.
#[derive(Debug, Clone, PartialEq)]
pub struct PddConfig {
    pub rho0: f64,
    /// Penalty decrease factor `c`.
    pub decrease: f64,
    /// Base of the violation schedule `η_j = base^j`.
    pub eta_base: f64,
    /// Outer stop: `‖g‖∞ ≤ delta_outer`.
    pub delta_outer: f64,
    /// Inner stop: relative objective change `≤ delta_inner`.
    pub delta_inner: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub rho_floor: f64,
    /// Relative tolerance of the final feasibility check.
    pub feasibility_tol: f64,
    /// Anchor floor used when a subproblem solve fails once.
    pub retry_floor: f64,
    /// Re-derive rates and local bits at every solved `(p, β)` so each inner
    /// iterate is feasible for the original constraints, and backtrack
    /// toward the anchor while the objective would increase. Without it
    /// the raw subproblem solutions are taken as the next anchors.
    pub feasible_steps: bool,
    pub subsolver: SolverOptions,
}

impl Default for PddConfig {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            decrease: 0.6,
            eta_base: 0.3,
            delta_outer: 1e-4,
            delta_inner: 1e-4,
            inner_max: 50,
            outer_max: 100,
            rho_floor: 1e-8,
            feasibility_tol: 1e-6,
            retry_floor: 1e-6,
            feasible_steps: true,
            subsolver: SolverOptions::default(),
        }
    }
}

impl PddConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| {
            Err(Error::InvalidConfig {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad("rho0", "must be positive and finite");
        }
        if !(self.decrease > 0.0 && self.decrease < 1.0) {
            return bad("decrease", "must lie in (0, 1)");
        }
        if !(self.eta_base > 0.0 && self.eta_base < 1.0) {
            return bad("eta_base", "must lie in (0, 1)");
        }
        if !(self.delta_outer > 0.0) {
            return bad("delta_outer", "must be positive");
        }
        if self.delta_inner.is_nan() || self.delta_inner < 0.0 {
            return bad("delta_inner", "must be nonnegative");
        }
        if self.inner_max == 0 {
            return bad("inner_max", "must be at least 1");
        }
        if self.outer_max == 0 {
            return bad("outer_max", "must be at least 1");
        }
        if !(self.rho_floor > 0.0 && self.rho_floor <= self.rho0) {
            return bad("rho_floor", "must lie in (0, rho0]");
        }
        Ok(())
    }
}

/// One inner iteration as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// Running count of subproblem solves.
    pub iteration: usize,
    pub outer: usize,
    pub inner: usize,
    /// Augmented-Lagrangian objective (energy plus penalties).
    pub objective: f64,
    pub energy: f64,
    /// `‖g‖∞` at the iterate.
    pub violation: f64,
    pub rho: f64,
    pub kkt: f64,
    pub status: SolveStatus,
    /// Fraction of the way from the anchor to the subproblem solution.
    pub step: f64,
}

/// Which branch an outer step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterStep {
    DualUpdate,
    PenaltyDecrease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub outer: usize,
    pub violation: f64,
    pub eta: f64,
    pub rho_before: f64,
    pub step: OuterStep,
}

/// Penalty, multipliers, counters and traces of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct PddState {
    pub al: AlMultipliers,
    /// Outer index `j`.
    pub outer: usize,
    /// Inner iterations taken in the current outer pass.
    pub inner: usize,
    pub decrease: f64,
    pub eta_base: f64,
    pub rho_floor: f64,
    pub trace: Vec<TracePoint>,
    pub outer_trace: Vec<OuterRecord>,
}

impl PddState {
    pub fn new(users: usize, cfg: &PddConfig) -> Self {
        Self {
            al: AlMultipliers::new(users, cfg.rho0),
            outer: 0,
            inner: 0,
            decrease: cfg.decrease,
            eta_base: cfg.eta_base,
            rho_floor: cfg.rho_floor,
            trace: Vec::new(),
            outer_trace: Vec::new(),
        }
    }

    /// Violation tolerance `η_j` of the current outer index.
    pub fn eta(&self) -> f64 {
        self.eta_base.powi(self.outer as i32)
    }

    pub fn rho(&self) -> f64 {
        self.al.rho
    }
}

/// Minimizer over `μ` of the two penalty terms coupling `β` and `μ`.
pub fn mu_scalar(beta: f64, rho: f64, lambda1: f64, lambda2: f64) -> f64 {
    (beta + beta * beta + rho * lambda1 + rho * lambda2 * beta) / (1.0 + beta * beta)
}

/// Elementwise closed-form `μ` update.
pub fn mu_update(
    beta: &PairMatrix<f64>,
    rho: f64,
    lambda1: &PairMatrix<f64>,
    lambda2: &PairMatrix<f64>,
) -> PairMatrix<f64> {
    let mut mu = PairMatrix::zeros(beta.dim());
    for (k, l) in beta.off_diagonal() {
        mu[(k, l)] = mu_scalar(beta[(k, l)], rho, lambda1[(k, l)], lambda2[(k, l)]);
    }
    mu
}

/// Dual update when `‖g‖∞ ≤ η_j`, penalty decrease otherwise. `g` is laid
/// out as [`violation_vector`] returns it.
pub fn outer_update(state: &mut PddState, g: &[f64]) -> OuterStep {
    let k = state.al.lambda1.dim();
    let pairs = k * k.saturating_sub(1);
    assert_eq!(g.len(), 2 * pairs + pairs / 2, "residual length");
    let norm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let eta = state.eta();
    let rho = state.al.rho;
    let step = if norm <= eta {
        let mut it = g.iter();
        for (a, b) in state.al.lambda1.off_diagonal() {
            state.al.lambda1[(a, b)] += it.next().unwrap() / rho;
        }
        for (a, b) in state.al.lambda2.off_diagonal() {
            state.al.lambda2[(a, b)] += it.next().unwrap() / rho;
        }
        for (a, b) in lower_pairs(k) {
            state.al.lambda3[(a, b)] += it.next().unwrap() / rho;
        }
        OuterStep::DualUpdate
    } else {
        state.al.rho = (rho * state.decrease).max(state.rho_floor);
        OuterStep::PenaltyDecrease
    };
    state.outer_trace.push(OuterRecord {
        outer: state.outer,
        violation: norm,
        eta,
        rho_before: rho,
        step,
    });
    state.outer += 1;
    step
}

/// Value of the augmented-Lagrangian objective at an iterate.
pub fn al_objective(it: &Iterate, cfg: &SystemConfig, variant: Variant, al: &AlMultipliers) -> f64 {
    let energy = total_energy(&it.alloc, cfg).total;
    if variant.optimize_order {
        energy + al_penalty(&it.alloc.order, &it.aux.mu, al)
    } else {
        energy
    }
}

fn lift(it: &Iterate, floor: f64) -> Iterate {
    let mut out = it.clone();
    for p in out.alloc.power.iter_mut() {
        *p = p.max(floor);
    }
    for w in out.aux.w.iter_mut() {
        *w = w.max(floor);
    }
    out
}

/// Iterate with rates, local bits and auxiliaries re-derived from `(p, β)`.
fn restore(
    it: &Iterate,
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
) -> Result<Iterate> {
    let alloc = rederive_rates(&it.alloc, ch, cfg, variant)?;
    let mut aux = tight_aux(&alloc, ch)?;
    aux.mu = it.aux.mu.clone();
    Ok(Iterate { alloc, aux })
}

const MAX_BACKTRACKS: usize = 30;

/// Largest step `2^-m` from `anchor` toward `candidate` (in `p` and `β`)
/// whose restored iterate does not raise the objective. Falls back to the
/// anchor itself.
fn feasible_step(
    anchor: &Iterate,
    candidate: &Iterate,
    before: f64,
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
    al: &AlMultipliers,
) -> Result<(Iterate, f64)> {
    let slack = 1e-12 * before.abs();
    let mut t = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let mut trial = candidate.clone();
        for (p, (&a, &c)) in trial
            .alloc
            .power
            .iter_mut()
            .zip(anchor.alloc.power.iter().zip(&candidate.alloc.power))
        {
            *p = (a + t * (c - a)).max(0.0);
        }
        if variant.optimize_order {
            for (k, l) in anchor.alloc.order.off_diagonal() {
                let (a, c) = (anchor.alloc.order[(k, l)], candidate.alloc.order[(k, l)]);
                trial.alloc.order[(k, l)] = (a + t * (c - a)).clamp(0.0, 1.0);
            }
        }
        let trial = restore(&trial, cfg, ch, variant)?;
        if al_objective(&trial, cfg, variant, al) <= before + slack {
            return Ok((trial, t));
        }
        t *= 0.5;
    }
    Ok((anchor.clone(), 0.0))
}

/// Runs `μ`-update plus subproblem solve until the relative change of the
/// objective is at most `delta_inner` or `inner_max` is exceeded. At least
/// one solve always happens.
pub fn inner_loop(
    state: &mut PddState,
    anchor: Iterate,
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
    pdd: &PddConfig,
) -> Result<Iterate> {
    let mut current = anchor;
    let mut multipliers: Option<Vec<f64>> = None;
    state.inner = 0;
    loop {
        if variant.optimize_order {
            current.aux.mu = mu_update(
                &current.alloc.order,
                state.al.rho,
                &state.al.lambda1,
                &state.al.lambda2,
            );
        }
        let before = al_objective(&current, cfg, variant, &state.al);

        let mut sub = linearize(&current, cfg, ch, variant, &state.al)?;
        let mut sol = sub.solve(
            &WarmStart {
                x: sub.anchor.clone(),
                multipliers: multipliers.take(),
            },
            &pdd.subsolver,
        );
        // A stalled solve that still sits strictly inside the subproblem is a
        // usable descent candidate; the step safeguard below rejects it if not.
        let usable = |sub: &ConvexSubproblem, sol: &SubproblemSolution| {
            sol.is_optimal()
                || (sol.status != SolveStatus::Infeasible
                    && sub.program.is_strictly_feasible(&sol.x))
        };
        if !usable(&sub, &sol) {
            let lifted = lift(&current, pdd.retry_floor);
            sub = linearize(&lifted, cfg, ch, variant, &state.al)?;
            sol = sub.solve(&WarmStart::primal(sub.anchor.clone()), &pdd.subsolver);
            if !usable(&sub, &sol) {
                return Err(Error::Subsolver(format!(
                    "subproblem {:?} at outer {} inner {} (kkt {:.3e})",
                    sol.status, state.outer, state.inner, sol.kkt
                )));
            }
        }
        let candidate = sub.layout.unpack(&sol.x, &current);
        let (next, step) = if pdd.feasible_steps {
            feasible_step(&current, &candidate, before, cfg, ch, variant, &state.al)?
        } else {
            (candidate, 1.0)
        };
        current = next;
        multipliers = Some(sol.multipliers.clone());
        state.inner += 1;

        let after = al_objective(&current, cfg, variant, &state.al);
        let (_, violation) = violation_vector(&current.alloc.order, &current.aux.mu);
        state.trace.push(TracePoint {
            iteration: state.trace.len() + 1,
            outer: state.outer,
            inner: state.inner,
            objective: after,
            energy: total_energy(&current.alloc, cfg).total,
            violation: if variant.optimize_order {
                violation
            } else {
                0.0
            },
            rho: state.al.rho,
            kkt: sol.kkt,
            status: sol.status,
            step,
        });
        let change = (after - before).abs() / before.abs().max(f64::MIN_POSITIVE);
        if change <= pdd.delta_inner || state.inner >= pdd.inner_max {
            return Ok(current);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatusFinal {
    Converged,
    IterationCap,
    InfeasibleFinal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub variant: Variant,
    pub alloc: Allocation,
    pub aux: crate::transform::AuxPoint,
    pub energy: EnergyBreakdown,
    /// Energy of the unrepaired iterate minus the delivered energy.
    pub repair_delta: f64,
    pub state: PddState,
    /// `‖g‖∞` at exit, before rounding.
    pub final_violation: f64,
    pub feasibility: FeasibilityReport,
    pub status: SolveStatusFinal,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatusFinal::Converged
    }
}

/// Feasibility options matching what a variant promises.
pub fn check_options(cfg: &SystemConfig, variant: Variant) -> CheckOptions<f64> {
    CheckOptions {
        airtime: cfg.deadline,
        secrecy: variant.secrecy,
        decoding_order: true,
    }
}

/// Binary order closest to the relaxed `β`. Pairs whose received powers tie
/// within `tol` keep the relaxed preference, since the optimum often sits
/// exactly on such a tie; otherwise the received powers decide.
pub fn round_order(
    order: &PairMatrix<f64>,
    power: &[f64],
    ch: &ChannelRealization,
    tol: f64,
) -> PairMatrix<f64> {
    let by_power = round_decoding_order(power, ch);
    let k = ch.num_users();
    let rounded = PairMatrix::from_fn(k, |a, b| {
        if a == b {
            return 0.0;
        }
        let (ra, rb) = (ch.tau[a] * power[a], ch.tau[b] * power[b]);
        if (ra - rb).abs() <= tol * ra.max(rb) {
            let (ab, ba) = (order[(a, b)], order[(b, a)]);
            if ab > ba || (ab == ba && a < b) {
                1.0
            } else {
                0.0
            }
        } else {
            by_power[(a, b)]
        }
    });
    // Several mutual ties could close a cycle; the power order never does.
    if decoding_sequence(&rounded).is_some() {
        rounded
    } else {
        by_power
    }
}

/// Rounds the order (when the variant optimizes it) and re-derives rates
/// and local bits at the delivered powers.
pub fn repair(
    alloc: &Allocation,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    variant: Variant,
    tol: f64,
) -> Result<Allocation> {
    let mut out = alloc.clone();
    if variant.optimize_order {
        out.order = round_order(&alloc.order, &alloc.power, ch, tol);
    }
    let mut out = rederive_rates(&out, ch, cfg, variant)?;
    if variant.optimize_order {
        // silenced users may have changed the received-power ranking
        let order = round_order(&out.order, &out.power, ch, tol);
        if order != out.order {
            out.order = order;
            out = rederive_rates(&out, ch, cfg, variant)?;
        }
    }
    Ok(out)
}

/// Rates and local bits implied by `(p, β)`: the secret rate is the largest
/// one meeting the outage target, the codeword rate is the decoding
/// capacity, and whatever cannot be offloaded is computed locally.
pub fn rederive_rates(
    alloc: &Allocation,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    variant: Variant,
) -> Result<Allocation> {
    let mut out = alloc.clone();
    if variant.secrecy {
        // A user that cannot keep any secret rate only leaks; silencing it
        // also lowers everyone else's interference, so repeat until stable.
        loop {
            let sinr = sinr_vector(&out.power, &out.order, ch)?;
            let mut changed = false;
            for k in 0..ch.num_users() {
                let t = secrecy_threshold(cfg, ch.eve_rate_param[k]);
                if out.power[k] > 0.0
                    && secret_rate_from_sinr(sinr[k], out.power[k], t, cfg.noise_eve) <= 0.0
                {
                    out.power[k] = 0.0;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    let sinr = sinr_vector(&out.power, &out.order, ch)?;
    let unit = cfg.bits_per_rate();
    for k in 0..ch.num_users() {
        let capacity = sinr[k].ln_1p() / std::f64::consts::LN_2;
        let secret = if variant.secrecy {
            let t = secrecy_threshold(cfg, ch.eve_rate_param[k]);
            secret_rate_from_sinr(sinr[k], out.power[k], t, cfg.noise_eve)
        } else {
            capacity
        };
        let big_l = cfg.users[k].task_bits;
        out.rate_codeword[k] = capacity;
        out.rate_secret[k] = secret;
        out.local_bits[k] = (big_l - unit * secret).clamp(0.0, big_l);
    }
    Ok(out)
}

/// Full double loop for the proposed scheme.
pub fn solve(cfg: &SystemConfig, ch: &ChannelRealization, pdd: &PddConfig) -> Result<SolveResult> {
    solve_variant(cfg, ch, Variant::PROPOSED, pdd)
}

/// Full double loop for any variant of the reformulation.
pub fn solve_variant(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
    pdd: &PddConfig,
) -> Result<SolveResult> {
    pdd.validate()?;
    ch.validate()?;
    let k = ch.num_users();
    let mut state = PddState::new(k, pdd);
    let mut current = init_point(cfg, ch, variant)?;

    let nothing_to_do = cfg.users.iter().all(|u| u.task_bits == 0.0);
    let mut status = SolveStatusFinal::IterationCap;
    let mut violation = 0.0;
    if nothing_to_do {
        status = SolveStatusFinal::Converged;
    } else {
        while state.outer < pdd.outer_max {
            current = inner_loop(&mut state, current, cfg, ch, variant, pdd)?;
            if !variant.optimize_order {
                status = SolveStatusFinal::Converged;
                break;
            }
            let (g, norm) = violation_vector(&current.alloc.order, &current.aux.mu);
            violation = norm;
            let at_floor = state.al.rho <= state.rho_floor;
            let step = outer_update(&mut state, &g);
            if norm <= pdd.delta_outer {
                status = SolveStatusFinal::Converged;
                break;
            }
            if at_floor && step == OuterStep::PenaltyDecrease {
                break;
            }
        }
    }

    let before = total_energy(&current.alloc, cfg).total;
    let alloc = repair(&current.alloc, ch, cfg, variant, pdd.feasibility_tol)?;
    let energy = total_energy(&alloc, cfg);
    let feasibility = feasibility_check_with(
        &alloc,
        ch,
        cfg,
        pdd.feasibility_tol,
        &check_options(cfg, variant),
    )?;
    if decoding_sequence(&alloc.order).is_none() || !feasibility.is_clean() {
        status = SolveStatusFinal::InfeasibleFinal;
    }
    let aux = tight_aux(&alloc, ch)?;
    Ok(SolveResult {
        variant,
        alloc,
        aux,
        repair_delta: before - energy.total,
        energy,
        state,
        final_violation: violation,
        feasibility,
        status,
    })
}
