//! Physical system model: channel sampling, SINR under a decoding order,
//! energy accounting and the closed-form secrecy outage probability.
//!
//! Everything here is a pure function of its inputs and generic over the
//! floating-point type. Per-user arrays produced by [`sample_channels`] are
//! indexed in *sorted* order (descending normalized channel gain); a
//! configuration used together with a realization must be in the same order,
//! see [`ChannelRealization::relabel_config`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{check_len, Error, Result};
use crate::pair::PairMatrix;
use crate::scalar::Scalar;

/// Converts a power in dBm to watts.
pub fn dbm_to_watts<T: Scalar>(dbm: T) -> T {
    T::lit(10.0).powf((dbm - T::lit(30.0)) / T::lit(10.0))
}

/// Task and hardware constants of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserParams<T> {
    /// Task size `L_k` in bits.
    pub task_bits: T,
    /// CPU cycles per bit `C_k`.
    pub cycles_per_bit: T,
    /// Effective switched capacitance `ς_k` (J·s²/cycle³).
    pub capacitance: T,
    /// Distance to the base station in meters.
    pub dist_bs: T,
    /// Distance to the eavesdropper in meters.
    pub dist_eve: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    /// Bandwidth `B` in Hz.
    pub bandwidth: T,
    /// Frame duration / deadline `T` in seconds.
    pub deadline: T,
    /// Path-loss exponent.
    pub path_loss_exp: T,
    /// Noise power at the base station, watts.
    pub noise_bs: T,
    /// Noise power at the eavesdropper, watts.
    pub noise_eve: T,
    /// Maximum tolerable secrecy outage probability, in (0, 1).
    pub epsilon: T,
    pub users: Vec<UserParams<T>>,
}

impl<T: Scalar> SystemConfig<T> {
    /// Reference scenario: 10 MHz, 100 ms, α = 5, −50 dBm noise at both
    /// receivers, 10³ cycles/bit, ς = 10⁻²⁸, Eve at 100 m, ε = 0.1, and every
    /// user 40 m from the base station with a task of `task_bits`.
    pub fn standard(users: usize, task_bits: T) -> Self {
        let user = UserParams {
            task_bits,
            cycles_per_bit: T::lit(1e3),
            capacitance: T::lit(1e-28),
            dist_bs: T::lit(40.0),
            dist_eve: T::lit(100.0),
        };
        Self {
            bandwidth: T::lit(10e6),
            deadline: T::lit(0.1),
            path_loss_exp: T::lit(5.0),
            noise_bs: dbm_to_watts(T::lit(-50.0)),
            noise_eve: dbm_to_watts(T::lit(-50.0)),
            epsilon: T::lit(0.1),
            users: vec![user; users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Same configuration with every task size set to `task_bits`.
    pub fn with_task_bits(mut self, task_bits: T) -> Self {
        for u in &mut self.users {
            u.task_bits = task_bits;
        }
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Bits deliverable per unit of rate (bits/s/Hz) over the whole frame.
    pub fn bits_per_rate(&self) -> T {
        self.bandwidth * self.deadline
    }

    pub fn validate(&self) -> Result<()> {
        fn positive<T: Scalar>(field: &'static str, v: T) -> Result<()> {
            if v.is_finite() && v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field,
                    reason: format!("must be finite and strictly positive, got {v}"),
                })
            }
        }
        if self.users.is_empty() {
            return Err(Error::InvalidConfig {
                field: "users",
                reason: "at least one user is required".into(),
            });
        }
        positive("bandwidth", self.bandwidth)?;
        positive("deadline", self.deadline)?;
        positive("path_loss_exp", self.path_loss_exp)?;
        positive("noise_bs", self.noise_bs)?;
        positive("noise_eve", self.noise_eve)?;
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return Err(Error::InvalidConfig {
                field: "epsilon",
                reason: format!("must lie in (0, 1), got {}", self.epsilon),
            });
        }
        for u in &self.users {
            // Zero-size tasks are allowed: the user simply has nothing to do.
            if !(u.task_bits.is_finite() && u.task_bits >= T::zero()) {
                return Err(Error::InvalidConfig {
                    field: "task_bits",
                    reason: format!("must be finite and nonnegative, got {}", u.task_bits),
                });
            }
            positive("cycles_per_bit", u.cycles_per_bit)?;
            positive("capacitance", u.capacitance)?;
            positive("dist_bs", u.dist_bs)?;
            positive("dist_eve", u.dist_eve)?;
        }
        Ok(())
    }
}

/// One block-fading realization, users sorted by descending `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    /// Squared small-scale fading magnitude `|g_k|²`.
    pub g2: Vec<T>,
    /// Normalized gain `d_k^{-α}|g_k|²/σ_b²`, strictly descending.
    pub tau: Vec<T>,
    /// Rate parameter `d_{e,k}^α` of the exponential law of `|h_{e,k}|²`.
    pub eve_rate_param: Vec<T>,
    /// `labels[k]` is the index of sorted user `k` in the original config.
    pub labels: Vec<usize>,
}

impl<T: Scalar> ChannelRealization<T> {
    /// Builds a realization from fading draws given in configuration order.
    ///
    /// Fails if two users end up with identical `tau` (callers redraw).
    pub fn from_gains(cfg: &SystemConfig<T>, g2: Vec<T>) -> Result<Self> {
        check_len("fading gains", cfg.num_users(), g2.len())?;
        let raw_tau: Vec<T> = cfg
            .users
            .iter()
            .zip(&g2)
            .map(|(u, &g)| g / (u.dist_bs.powf(cfg.path_loss_exp) * cfg.noise_bs))
            .collect();
        let mut labels: Vec<usize> = (0..g2.len()).collect();
        labels.sort_by(|&a, &b| {
            raw_tau[b]
                .partial_cmp(&raw_tau[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let ch = Self {
            g2: labels.iter().map(|&i| g2[i]).collect(),
            tau: labels.iter().map(|&i| raw_tau[i]).collect(),
            eve_rate_param: labels
                .iter()
                .map(|&i| cfg.users[i].dist_eve.powf(cfg.path_loss_exp))
                .collect(),
            labels,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Realization with explicit normalized gains (already sorted) and Eve
    /// rate parameters. `g2` is left at NaN because it is not recoverable.
    pub fn from_tau(tau: Vec<T>, eve_rate_param: Vec<T>) -> Result<Self> {
        check_len("eve rate parameters", tau.len(), eve_rate_param.len())?;
        let n = tau.len();
        let ch = Self {
            g2: vec![T::nan(); n],
            tau,
            eve_rate_param,
            labels: (0..n).collect(),
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn num_users(&self) -> usize {
        self.tau.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau.iter().any(|&t| !(t.is_finite() && t > T::zero())) {
            return Err(Error::InvalidChannel(
                "tau must be finite and positive".into(),
            ));
        }
        if self
            .eve_rate_param
            .iter()
            .any(|&t| !(t.is_finite() && t > T::zero()))
        {
            return Err(Error::InvalidChannel(
                "eve rate parameters must be finite and positive".into(),
            ));
        }
        if self.tau.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidChannel(
                "tau must be strictly descending".into(),
            ));
        }
        Ok(())
    }

    /// Permutes per-user parameters of `cfg` into this realization's order.
    pub fn relabel_config(&self, cfg: &SystemConfig<T>) -> SystemConfig<T> {
        let mut out = cfg.clone();
        out.users = self.labels.iter().map(|&i| cfg.users[i].clone()).collect();
        out
    }
}

/// Draws i.i.d. unit-mean exponential `|g_k|²` and sorts users by `tau`.
pub fn sample_channels<T: Scalar>(
    cfg: &SystemConfig<T>,
    seed: u64,
) -> Result<ChannelRealization<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g2: Vec<T> = (0..cfg.num_users())
            .map(|_| {
                let x: f64 = Exp1.sample(&mut rng);
                T::lit(x)
            })
            .collect();
        match ChannelRealization::from_gains(cfg, g2) {
            Ok(ch) => return Ok(ch),
            // ties or an exact zero draw: redraw
            Err(Error::InvalidChannel(_)) => continue,
            Err(e) => return Err(e),
        }
    }
}

/// `gamma_k = tau_k p_k / (Σ_{l≠k} beta_{k,l} tau_l p_l + 1)`.
pub fn sinr_vector<T: Scalar>(
    power: &[T],
    order: &PairMatrix<T>,
    ch: &ChannelRealization<T>,
) -> Result<Vec<T>> {
    let k = ch.num_users();
    check_len("power vector", k, power.len())?;
    check_len("decoding-order matrix", k, order.dim())?;
    Ok((0..k)
        .map(|i| ch.tau[i] * power[i] / (interference(power, order, ch, i) + T::one()))
        .collect())
}

/// Normalized interference `Σ_{l≠k} beta_{k,l} tau_l p_l` seen by user `k`.
pub fn interference<T: Scalar>(
    power: &[T],
    order: &PairMatrix<T>,
    ch: &ChannelRealization<T>,
    k: usize,
) -> T {
    (0..ch.num_users())
        .filter(|&l| l != k)
        .fold(T::zero(), |acc, l| {
            acc + order[(k, l)] * ch.tau[l] * power[l]
        })
}

/// Decision variables of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    /// Bits computed locally, `l_k`.
    pub local_bits: Vec<T>,
    /// Transmit power in watts.
    pub power: Vec<T>,
    /// Codeword rate `R_t` in bits/s/Hz.
    pub rate_codeword: Vec<T>,
    /// Confidential rate `R_s` in bits/s/Hz.
    pub rate_secret: Vec<T>,
    /// `order[(k, l)] = 1` when user `k` is decoded before user `l`.
    pub order: PairMatrix<T>,
}

impl<T: Scalar> Allocation<T> {
    /// Everything computed locally, nothing transmitted.
    pub fn all_local(cfg: &SystemConfig<T>) -> Self {
        let k = cfg.num_users();
        Self {
            local_bits: cfg.users.iter().map(|u| u.task_bits).collect(),
            power: vec![T::zero(); k],
            rate_codeword: vec![T::zero(); k],
            rate_secret: vec![T::zero(); k],
            order: PairMatrix::zeros(k),
        }
    }

    pub fn num_users(&self) -> usize {
        self.power.len()
    }

    fn check_dims(&self, k: usize) -> Result<()> {
        check_len("local bits", k, self.local_bits.len())?;
        check_len("power", k, self.power.len())?;
        check_len("codeword rate", k, self.rate_codeword.len())?;
        check_len("secret rate", k, self.rate_secret.len())?;
        check_len("decoding-order matrix", k, self.order.dim())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMetrics<T> {
    pub sinr: Vec<T>,
    /// `log2(1 + sinr)`.
    pub rate_bs: Vec<T>,
    /// Eve's SINR at the mean eavesdropper gain `d_{e,k}^{-α}`.
    pub sinr_eve: Vec<T>,
    pub rate_eve: Vec<T>,
    /// `R_t - R_s`.
    pub redundancy: Vec<T>,
    /// Outage threshold on `|h_{e,k}|²`.
    pub threshold: Vec<T>,
    pub outage: Vec<T>,
}

/// Outage threshold `((1 + gamma)/2^{R_s} - 1) σ_e² / p`, with the codeword
/// rate at the decodable limit.
pub fn outage_threshold<T: Scalar>(sinr: T, rate_secret: T, power: T, noise_eve: T) -> T {
    if power <= T::zero() {
        return T::infinity();
    }
    let delta = T::lit(2.0).powf(rate_secret);
    ((T::one() + sinr) / delta - T::one()) * noise_eve / power
}

/// `exp(-theta d_e^α)`, clamped to 1 when the threshold is negative and 0
/// when nothing is transmitted.
pub fn outage_probability<T: Scalar>(threshold: T, eve_rate_param: T, power: T) -> T {
    if power <= T::zero() {
        return T::zero();
    }
    if threshold <= T::zero() {
        return T::one();
    }
    (-threshold * eve_rate_param).exp()
}

pub fn link_metrics<T: Scalar>(
    alloc: &Allocation<T>,
    ch: &ChannelRealization<T>,
    cfg: &SystemConfig<T>,
) -> Result<LinkMetrics<T>> {
    let k = ch.num_users();
    alloc.check_dims(k)?;
    check_len("config users", k, cfg.num_users())?;
    let sinr = sinr_vector(&alloc.power, &alloc.order, ch)?;
    let rate_bs: Vec<T> = sinr.iter().map(|&g| (T::one() + g).log2()).collect();
    let sinr_eve: Vec<T> = (0..k)
        .map(|i| alloc.power[i] / (ch.eve_rate_param[i] * cfg.noise_eve))
        .collect();
    let rate_eve = sinr_eve.iter().map(|&g| (T::one() + g).log2()).collect();
    let redundancy = (0..k)
        .map(|i| alloc.rate_codeword[i] - alloc.rate_secret[i])
        .collect();
    let threshold: Vec<T> = (0..k)
        .map(|i| outage_threshold(sinr[i], alloc.rate_secret[i], alloc.power[i], cfg.noise_eve))
        .collect();
    let outage = (0..k)
        .map(|i| outage_probability(threshold[i], ch.eve_rate_param[i], alloc.power[i]))
        .collect();
    Ok(LinkMetrics {
        sinr,
        rate_bs,
        sinr_eve,
        rate_eve,
        redundancy,
        threshold,
        outage,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub local: Vec<T>,
    pub offload: Vec<T>,
    /// Equal per-cycle CPU frequency `C_k l_k / T` in Hz.
    pub cpu_freq: Vec<T>,
    pub total: T,
}

/// Local energy `ς C³ l³ / T²` of a single user.
pub fn local_energy<T: Scalar>(user: &UserParams<T>, local_bits: T, deadline: T) -> T {
    let cycles = user.cycles_per_bit * local_bits;
    user.capacitance * cycles * cycles * cycles / (deadline * deadline)
}

/// Sum energy with offloading lasting the whole frame.
pub fn total_energy<T: Scalar>(alloc: &Allocation<T>, cfg: &SystemConfig<T>) -> EnergyBreakdown<T> {
    energy_with_airtime(alloc, cfg, cfg.deadline)
}

/// Sum energy with offloading lasting `airtime` seconds (T/K under TDMA).
/// Local computing always spans the full deadline.
pub fn energy_with_airtime<T: Scalar>(
    alloc: &Allocation<T>,
    cfg: &SystemConfig<T>,
    airtime: T,
) -> EnergyBreakdown<T> {
    let local: Vec<T> = cfg
        .users
        .iter()
        .zip(&alloc.local_bits)
        .map(|(u, &l)| local_energy(u, l, cfg.deadline))
        .collect();
    let offload: Vec<T> = alloc.power.iter().map(|&p| p * airtime).collect();
    let cpu_freq = cfg
        .users
        .iter()
        .zip(&alloc.local_bits)
        .map(|(u, &l)| u.cycles_per_bit * l / cfg.deadline)
        .collect();
    let total = local
        .iter()
        .chain(offload.iter())
        .fold(T::zero(), |acc, &e| acc + e);
    EnergyBreakdown {
        local,
        offload,
        cpu_freq,
        total,
    }
}

/// `-ln(ε)/d_{e,k}^α`: the smallest `|h_e|²` threshold meeting the outage target.
pub fn secrecy_threshold<T: Scalar>(cfg: &SystemConfig<T>, eve_rate_param: T) -> T {
    -cfg.epsilon.ln() / eve_rate_param
}

/// Largest `R_s` with outage at most ε given the SINR `sinr` at power `power`.
pub fn secret_rate_from_sinr<T: Scalar>(sinr: T, power: T, threshold: T, noise_eve: T) -> T {
    if power <= T::zero() {
        return T::zero();
    }
    let rate = ((T::one() + sinr) / (T::one() + threshold * power / noise_eve)).log2();
    rate.max(T::zero())
}

/// Largest confidential rate of user `k` satisfying the outage constraint.
pub fn max_secret_rate<T: Scalar>(
    power: &[T],
    order: &PairMatrix<T>,
    ch: &ChannelRealization<T>,
    cfg: &SystemConfig<T>,
    k: usize,
) -> Result<T> {
    check_len("config users", ch.num_users(), cfg.num_users())?;
    if k >= ch.num_users() {
        return Err(Error::DimensionMismatch {
            what: "user index",
            expected: ch.num_users(),
            found: k,
        });
    }
    let sinr = sinr_vector(power, order, ch)?;
    let t = secrecy_threshold(cfg, ch.eve_rate_param[k]);
    Ok(secret_rate_from_sinr(sinr[k], power[k], t, cfg.noise_eve))
}

/// Constraint families of the original problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// `B T R_s ≥ L − l` (with the scheme's airtime in place of `T`).
    OffloadRate,
    /// `R_t ≤ log2(1 + gamma)`.
    DecodeRate,
    /// `R_t ≥ R_s`.
    Redundancy,
    /// `P_so ≤ ε`.
    SecrecyOutage,
    PowerNonnegative,
    LocalBitsLower,
    LocalBitsUpper,
    /// Decoding order consistent with received powers `tau p`.
    DecodingOrder,
    /// `beta_{k,l} + beta_{l,k} = 1`.
    OrderComplement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation<T> {
    pub constraint: Constraint,
    pub user: usize,
    pub other: Option<usize>,
    /// Normalized signed residual; positive means violated.
    pub amount: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport<T> {
    pub tolerance: T,
    pub entries: Vec<Violation<T>>,
}

impl<T: Scalar> FeasibilityReport<T> {
    /// Largest residual over all constraints (−∞ for an empty report).
    pub fn worst(&self) -> T {
        self.entries
            .iter()
            .fold(T::neg_infinity(), |acc, v| acc.max(v.amount))
    }

    pub fn violations(&self) -> impl Iterator<Item = &Violation<T>> {
        self.entries
            .iter()
            .filter(|v| !(v.amount <= self.tolerance))
    }

    pub fn is_clean(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn has(&self, constraint: Constraint) -> bool {
        self.violations().any(|v| v.constraint == constraint)
    }
}

/// Which constraint families apply, and the offloading airtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions<T> {
    pub airtime: T,
    pub secrecy: bool,
    pub decoding_order: bool,
}

impl<T: Scalar> CheckOptions<T> {
    pub fn noma(cfg: &SystemConfig<T>) -> Self {
        Self {
            airtime: cfg.deadline,
            secrecy: true,
            decoding_order: true,
        }
    }
}

/// Evaluates every constraint of the original problem (NOMA, secrecy on).
pub fn feasibility_check<T: Scalar>(
    alloc: &Allocation<T>,
    ch: &ChannelRealization<T>,
    cfg: &SystemConfig<T>,
    tol: T,
) -> Result<FeasibilityReport<T>> {
    feasibility_check_with(alloc, ch, cfg, tol, &CheckOptions::noma(cfg))
}

pub fn feasibility_check_with<T: Scalar>(
    alloc: &Allocation<T>,
    ch: &ChannelRealization<T>,
    cfg: &SystemConfig<T>,
    tol: T,
    opts: &CheckOptions<T>,
) -> Result<FeasibilityReport<T>> {
    let k = ch.num_users();
    let metrics = link_metrics(alloc, ch, cfg)?;
    let one = T::one();
    let mut entries = Vec::new();
    let mut push = |constraint, user, other, amount| {
        entries.push(Violation {
            constraint,
            user,
            other,
            amount,
        })
    };
    for i in 0..k {
        let big_l = cfg.users[i].task_bits;
        let bit_scale = big_l.max(one);
        let offloaded = cfg.bandwidth * opts.airtime * alloc.rate_secret[i];
        push(
            Constraint::OffloadRate,
            i,
            None,
            (big_l - alloc.local_bits[i] - offloaded) / bit_scale,
        );
        push(
            Constraint::DecodeRate,
            i,
            None,
            (alloc.rate_codeword[i] - metrics.rate_bs[i]) / metrics.rate_bs[i].max(one),
        );
        push(
            Constraint::Redundancy,
            i,
            None,
            (alloc.rate_secret[i] - alloc.rate_codeword[i]) / alloc.rate_codeword[i].abs().max(one),
        );
        if opts.secrecy {
            push(
                Constraint::SecrecyOutage,
                i,
                None,
                (metrics.outage[i] - cfg.epsilon) / cfg.epsilon,
            );
        }
        push(Constraint::PowerNonnegative, i, None, -alloc.power[i]);
        push(
            Constraint::LocalBitsLower,
            i,
            None,
            -alloc.local_bits[i] / bit_scale,
        );
        push(
            Constraint::LocalBitsUpper,
            i,
            None,
            (alloc.local_bits[i] - big_l) / bit_scale,
        );
    }
    if opts.decoding_order {
        for a in 0..k {
            for b in 0..k {
                if a == b {
                    continue;
                }
                let beta = alloc.order[(a, b)];
                let ra = ch.tau[a] * alloc.power[a];
                let rb = ch.tau[b] * alloc.power[b];
                let scale = ra.max(rb);
                let amount = if scale <= T::zero() || (ra - rb).abs() <= tol * scale {
                    // equal received powers: either order is admissible
                    beta.abs().min((one - beta).abs())
                } else if ra > rb {
                    (one - beta).abs()
                } else {
                    beta.abs()
                };
                push(Constraint::DecodingOrder, a, Some(b), amount);
                if b < a {
                    push(
                        Constraint::OrderComplement,
                        a,
                        Some(b),
                        (beta + alloc.order[(b, a)] - one).abs(),
                    );
                }
            }
        }
    }
    Ok(FeasibilityReport {
        tolerance: tol,
        entries,
    })
}

/// Binary decoding order from received powers: `beta_{k,l} = 1` iff
/// `tau_k p_k > tau_l p_l`, ties going to the lower index.
pub fn round_decoding_order<T: Scalar>(power: &[T], ch: &ChannelRealization<T>) -> PairMatrix<T> {
    let k = ch.num_users();
    PairMatrix::from_fn(k, |a, b| {
        if a == b {
            return T::zero();
        }
        let ra = ch.tau[a] * power[a];
        let rb = ch.tau[b] * power[b];
        if ra > rb || (ra == rb && a < b) {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Decoding order that decodes users in the given sequence.
pub fn order_from_sequence<T: Scalar>(sequence: &[usize]) -> PairMatrix<T> {
    let k = sequence.len();
    let mut position = vec![0; k];
    for (pos, &user) in sequence.iter().enumerate() {
        position[user] = pos;
    }
    PairMatrix::from_fn(k, |a, b| {
        if a != b && position[a] < position[b] {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Descending-gain order: user `k` decoded before every `l > k`.
pub fn descending_gain_order<T: Scalar>(k: usize) -> PairMatrix<T> {
    order_from_sequence(&(0..k).collect::<Vec<_>>())
}

/// Sequence of users in decoding order if `order` is a strict total order.
pub fn decoding_sequence<T: Scalar>(order: &PairMatrix<T>) -> Option<Vec<usize>> {
    let k = order.dim();
    // Kahn's algorithm on the "decoded before" tournament.
    let half = T::lit(0.5);
    let mut indegree: Vec<usize> = (0..k)
        .map(|b| (0..k).filter(|&a| a != b && order[(a, b)] > half).count())
        .collect();
    let mut done = vec![false; k];
    let mut seq = Vec::with_capacity(k);
    for _ in 0..k {
        let next = (0..k).find(|&u| !done[u] && indegree[u] == 0)?;
        done[next] = true;
        seq.push(next);
        for b in 0..k {
            if b != next && order[(next, b)] > half {
                indegree[b] -= 1;
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            if a != b && (order[(a, b)] > half) == (order[(b, a)] > half) {
                return None;
            }
        }
    }
    Some(seq)
}
