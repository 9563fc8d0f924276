//! Comparison schemes: equal-slot TDMA with secrecy, NOMA with the decoding
//! order frozen to descending channel gain, and NOMA without an
//! eavesdropper.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{
    energy_with_airtime, feasibility_check_with, local_energy, secrecy_threshold, CheckOptions,
};
use crate::pair::PairMatrix;
use crate::pdd::{solve_variant, PddConfig, SolveResult, SolveStatusFinal};
use crate::transform::Variant;
use crate::{Allocation, ChannelRealization, EnergyBreakdown, FeasibilityReport, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Proposed,
    SecureOma,
    FixedSic,
    NoEve,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Proposed,
        Scheme::SecureOma,
        Scheme::FixedSic,
        Scheme::NoEve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::SecureOma => "secure-oma",
            Scheme::FixedSic => "fixed-sic",
            Scheme::NoEve => "no-eve",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig {
                field: "schemes",
                reason: format!(
                    "unknown scheme {s:?}, expected one of proposed, secure-oma, fixed-sic, no-eve"
                ),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    pub scheme: Scheme,
    pub alloc: Allocation,
    pub energy: EnergyBreakdown,
    /// Against the scheme's own constraint set.
    pub feasibility: FeasibilityReport,
    pub status: SolveStatusFinal,
    /// Full solver output for the schemes driven by the double loop.
    pub pdd: Option<SolveResult>,
}

impl BenchmarkResult {
    fn from_pdd(scheme: Scheme, r: SolveResult) -> Self {
        Self {
            scheme,
            alloc: r.alloc.clone(),
            energy: r.energy.clone(),
            feasibility: r.feasibility.clone(),
            status: r.status,
            pdd: Some(r),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatusFinal::Converged
    }
}

/// Dispatches one scheme.
pub fn run_scheme(
    scheme: Scheme,
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    pdd: &PddConfig,
) -> Result<BenchmarkResult> {
    match scheme {
        Scheme::Proposed => Ok(BenchmarkResult::from_pdd(
            scheme,
            solve_variant(cfg, ch, Variant::PROPOSED, pdd)?,
        )),
        Scheme::SecureOma => solve_oma(cfg, ch, pdd.feasibility_tol),
        Scheme::FixedSic => solve_fixed_sic(cfg, ch, pdd),
        Scheme::NoEve => solve_no_eve(cfg, ch, pdd),
    }
}

pub fn solve_fixed_sic(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    pdd: &PddConfig,
) -> Result<BenchmarkResult> {
    let r = solve_variant(cfg, ch, Variant::FIXED_SIC, pdd)?;
    Ok(BenchmarkResult::from_pdd(Scheme::FixedSic, r))
}

pub fn solve_no_eve(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    pdd: &PddConfig,
) -> Result<BenchmarkResult> {
    let r = solve_variant(cfg, ch, Variant::NO_EVE, pdd)?;
    Ok(BenchmarkResult::from_pdd(Scheme::NoEve, r))
}

/// Single-user secure link: `(1 + τp)/(1 + s p)` with `s` the secrecy
/// slope. The rate tends to `log2(τ/s)` as power grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecureLink {
    pub tau: f64,
    pub slope: f64,
}

impl SecureLink {
    pub fn new(cfg: &SystemConfig, ch: &ChannelRealization, k: usize) -> Self {
        Self {
            tau: ch.tau[k],
            slope: secrecy_threshold(cfg, ch.eve_rate_param[k]) / cfg.noise_eve,
        }
    }

    pub fn rate(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        ((1.0 + self.tau * p) / (1.0 + self.slope * p))
            .log2()
            .max(0.0)
    }

    /// Supremum of the achievable secret rate (zero when Eve's slope wins).
    pub fn rate_limit(&self) -> f64 {
        (self.tau / self.slope).log2().max(0.0)
    }

    /// Smallest power reaching `rate`, `None` if unreachable.
    pub fn min_power(&self, rate: f64) -> Option<f64> {
        if rate <= 0.0 {
            return Some(0.0);
        }
        let target = rate.exp2();
        let denom = self.tau - self.slope * target;
        (denom > 0.0).then(|| (target - 1.0) / denom)
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a) > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (d, fd), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold(
            (x, fx),
            |best, cand| if cand.1 < best.1 { cand } else { best },
        )
}

/// Minimum energy of one user transmitting alone for `airtime` seconds,
/// over the local split. Returns `(local_bits, power, energy)`.
pub fn single_user_split(
    cfg: &SystemConfig,
    link: SecureLink,
    k: usize,
    airtime: f64,
) -> (f64, f64, f64) {
    let user = &cfg.users[k];
    let big_l = user.task_bits;
    let unit = cfg.bandwidth * airtime;
    let all_local = (big_l, 0.0, local_energy(user, big_l, cfg.deadline));
    if big_l <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let limit = link.rate_limit();
    if limit <= 0.0 {
        return all_local;
    }
    let energy = |l: f64| -> f64 {
        match link.min_power((big_l - l) / unit) {
            Some(p) => local_energy(user, l, cfg.deadline) + p * airtime,
            None => f64::INFINITY,
        }
    };
    let l_min = (big_l - unit * limit).max(0.0);
    // The power blows up as l approaches l_min; start just inside.
    let lo = if l_min > 0.0 {
        l_min + 1e-9 * big_l
    } else {
        0.0
    };
    let (l, e) = golden_section(energy, lo, big_l, 1e-12 * big_l.max(1.0));
    if e >= all_local.2 {
        return all_local;
    }
    let p = link.min_power((big_l - l) / unit).unwrap_or(0.0);
    (l, p, e)
}

/// Equal-slot TDMA with the same eavesdropper model. Each user's problem is
/// independent; users that cannot reach any positive secret rate compute
/// everything locally.
pub fn solve_oma(cfg: &SystemConfig, ch: &ChannelRealization, tol: f64) -> Result<BenchmarkResult> {
    cfg.validate()?;
    ch.validate()?;
    let k = ch.num_users();
    let airtime = cfg.deadline / k as f64;
    let mut alloc = Allocation::all_local(cfg);
    alloc.order = PairMatrix::zeros(k);
    for i in 0..k {
        let link = SecureLink::new(cfg, ch, i);
        let (l, p, _) = single_user_split(cfg, link, i, airtime);
        alloc.local_bits[i] = l;
        alloc.power[i] = p;
        let capacity = (ch.tau[i] * p).ln_1p() / std::f64::consts::LN_2;
        alloc.rate_codeword[i] = capacity;
        alloc.rate_secret[i] = link.rate(p).min(capacity);
    }
    let opts = CheckOptions {
        airtime,
        secrecy: true,
        decoding_order: false,
    };
    let feasibility = feasibility_check_with(&alloc, ch, cfg, tol, &opts)?;
    let status = if feasibility.is_clean() {
        SolveStatusFinal::Converged
    } else {
        SolveStatusFinal::InfeasibleFinal
    };
    Ok(BenchmarkResult {
        scheme: Scheme::SecureOma,
        energy: energy_with_airtime(&alloc, cfg, airtime),
        alloc,
        feasibility,
        status,
        pdd: None,
    })
}
