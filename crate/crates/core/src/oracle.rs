//! Ground truth for the optimizer: exhaustive search over decoding orders
//! and a power grid, and Monte Carlo estimation of the secrecy outage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::model::{
    local_energy, order_from_sequence, secrecy_threshold, secret_rate_from_sinr, sinr_vector,
};
use crate::{Allocation, ChannelRealization, SystemConfig};

/// Log-spaced per-user power grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
    /// Largest user count for which all orders are enumerated.
    pub max_users: usize,
    pub max_evaluations: u128,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            p_min: 1e-6,
            p_max: 1.0,
            points: 60,
            max_users: 4,
            max_evaluations: 100_000_000,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 grid points, got {}",
                self.points
            )));
        }
        if !(self.p_min > 0.0 && self.p_max > self.p_min && self.p_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "power bounds must satisfy 0 < p_min < p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn powers(&self) -> Vec<f64> {
        let span = (self.p_max / self.p_min).ln();
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.p_max
                } else {
                    self.p_min * (span * i as f64 / last).exp()
                }
            })
            .collect()
    }
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..k).collect();
    let mut out = vec![current.clone()];
    // next_permutation
    loop {
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub energy: f64,
    pub alloc: Allocation,
    /// Decoding sequence of the best point.
    pub sequence: Vec<usize>,
    /// Per-user grid indices of the best point.
    pub indices: Vec<usize>,
    /// Best energy found under each enumerated order (`inf` if no grid
    /// point is consistent with it).
    pub per_order: Vec<(Vec<usize>, f64)>,
    pub evaluations: u128,
}

/// Whether received powers `τp` decode in `sequence` (strongest first, ties
/// to the lower index).
fn consistent(received: &[f64], sequence: &[usize]) -> bool {
    sequence.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        received[a] > received[b] || (received[a] == received[b] && a < b)
    })
}

/// Energy at one grid point under one order, `None` when the order is not
/// consistent with the received powers.
fn grid_energy(
    power: &[f64],
    sequence: &[usize],
    cfg: &SystemConfig,
    ch: &ChannelRealization,
) -> Option<(f64, Allocation)> {
    let received: Vec<f64> = power.iter().zip(&ch.tau).map(|(p, t)| p * t).collect();
    if !consistent(&received, sequence) {
        return None;
    }
    let order = order_from_sequence::<f64>(sequence);
    let sinr = sinr_vector(power, &order, ch).ok()?;
    let unit = cfg.bits_per_rate();
    let k = power.len();
    let mut alloc = Allocation {
        local_bits: vec![0.0; k],
        power: power.to_vec(),
        rate_codeword: vec![0.0; k],
        rate_secret: vec![0.0; k],
        order,
    };
    let mut energy = 0.0;
    for i in 0..k {
        let t = secrecy_threshold(cfg, ch.eve_rate_param[i]);
        let rs = secret_rate_from_sinr(sinr[i], power[i], t, cfg.noise_eve);
        let big_l = cfg.users[i].task_bits;
        let l = (big_l - unit * rs).max(0.0);
        alloc.rate_codeword[i] = sinr[i].ln_1p() / std::f64::consts::LN_2;
        alloc.rate_secret[i] = rs;
        alloc.local_bits[i] = l;
        energy += local_energy(&cfg.users[i], l, cfg.deadline) + power[i] * cfg.deadline;
    }
    Some((energy, alloc))
}

/// Exhaustive minimum over decoding orders and the power grid, with the
/// codeword rate at capacity and the secret rate at its outage-limited
/// maximum. Ties resolve to the lexicographically smallest (order, grid
/// index), independent of thread scheduling.
pub fn brute_force_grid(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    grid: &GridSpec,
) -> Result<GridResult> {
    grid.validate()?;
    ch.validate()?;
    let k = ch.num_users();
    check_len("config users", k, cfg.num_users())?;
    if k > grid.max_users {
        return Err(Error::TooManyUsersForGrid {
            users: k,
            max: grid.max_users,
        });
    }
    let orders = permutations(k);
    let cells = (grid.points as u128)
        .checked_pow(k as u32)
        .unwrap_or(u128::MAX);
    let evaluations = cells.saturating_mul(orders.len() as u128);
    if evaluations > grid.max_evaluations {
        return Err(Error::GridTooLarge {
            evaluations,
            limit: grid.max_evaluations,
        });
    }
    let powers = grid.powers();
    let n = grid.points;
    let cells = cells as usize;
    let decode = |mut idx: usize| -> Vec<usize> {
        let mut digits = vec![0; k];
        for d in digits.iter_mut().rev() {
            *d = idx % n;
            idx /= n;
        }
        digits
    };

    // (energy, order index, cell index)
    type Best = (f64, usize, usize);
    let better = |a: Best, b: Best| -> Best {
        match a.0.partial_cmp(&b.0) {
            Some(std::cmp::Ordering::Less) => a,
            Some(std::cmp::Ordering::Greater) => b,
            _ if (a.1, a.2) <= (b.1, b.2) => a,
            _ => b,
        }
    };
    let per_order: Vec<Best> = orders
        .iter()
        .enumerate()
        .map(|(oi, seq)| {
            (0..cells)
                .into_par_iter()
                .map(|cell| {
                    let p: Vec<f64> = decode(cell).iter().map(|&i| powers[i]).collect();
                    grid_energy(&p, seq, cfg, ch)
                        .map(|(e, _)| (e, oi, cell))
                        .unwrap_or((f64::INFINITY, oi, cell))
                })
                .reduce(|| (f64::INFINITY, usize::MAX, usize::MAX), better)
        })
        .collect();
    let best = per_order
        .iter()
        .copied()
        .fold((f64::INFINITY, usize::MAX, usize::MAX), better);
    if !best.0.is_finite() {
        return Err(Error::InvalidGrid(
            "no grid point is consistent with any decoding order".into(),
        ));
    }
    let indices = decode(best.2);
    let p: Vec<f64> = indices.iter().map(|&i| powers[i]).collect();
    let (energy, alloc) = grid_energy(&p, &orders[best.1], cfg, ch).expect("best point is valid");
    Ok(GridResult {
        energy,
        alloc,
        sequence: orders[best.1].clone(),
        indices,
        per_order: orders
            .iter()
            .cloned()
            .zip(per_order.iter().map(|b| b.0))
            .collect(),
        evaluations,
    })
}

/// Outage frequency and its binomial standard error for one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub const MIN_MC_SAMPLES: usize = 1000;

/// Monte Carlo estimate of each user's secrecy outage: draws Eve's fading,
/// and counts events where Eve's capacity reaches the redundancy
/// `log2(1 + γ) − R_s`. Each user draws from its own stream of a ChaCha
/// generator seeded with `seed`. A silent user never leaks.
pub fn monte_carlo_sop(
    alloc: &Allocation,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::InvalidConfig {
            field: "mc_samples",
            reason: format!("need at least {MIN_MC_SAMPLES} samples, got {n}"),
        });
    }
    let k = ch.num_users();
    check_len("config users", k, cfg.num_users())?;
    let sinr = sinr_vector(&alloc.power, &alloc.order, ch)?;
    check_len("secret rate", k, alloc.rate_secret.len())?;
    Ok((0..k)
        .into_par_iter()
        .map(|i| {
            let p = alloc.power[i];
            if p <= 0.0 {
                return McEstimate {
                    estimate: 0.0,
                    std_error: 0.0,
                    samples: n,
                };
            }
            let redundancy = sinr[i].ln_1p() / std::f64::consts::LN_2 - alloc.rate_secret[i];
            let snr_scale = p / (ch.eve_rate_param[i] * cfg.noise_eve);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let hits = (0..n)
                .filter(|_| {
                    let g: f64 = Exp1.sample(&mut rng);
                    redundancy <= (g * snr_scale).ln_1p() / std::f64::consts::LN_2
                })
                .count();
            let est = hits as f64 / n as f64;
            McEstimate {
                estimate: est,
                std_error: (est * (1.0 - est) / n as f64).sqrt(),
                samples: n,
            }
        })
        .collect())
}

/// Minimizer of a convex function on `[lo, hi]` by bisection on the sign of
/// a central difference. Unlike comparison-based searches this resolves the
/// argmin well below the square root of machine precision.
pub fn convex_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let h = 1e-7 * (hi - lo);
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m + h) > f(m - h) {
            b = m;
        } else {
            a = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_channels;

    #[test]
    fn permutation_counts() {
        assert_eq!(permutations(1), vec![vec![0]]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(3)[1], vec![0, 2, 1]);
        assert_eq!(permutations(4).len(), 24);
    }

    #[test]
    fn grid_endpoints() {
        let g = GridSpec::default().powers();
        assert_eq!(g.len(), 60);
        assert!((g[0] - 1e-6).abs() < 1e-18);
        assert_eq!(g[59], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn oversized_grid_is_refused() {
        let cfg = SystemConfig::standard(4, 1e5);
        let ch = sample_channels(&cfg, 0).unwrap();
        let spec = GridSpec {
            points: 1000,
            ..GridSpec::default()
        };
        match brute_force_grid(&cfg, &ch, &spec) {
            Err(Error::GridTooLarge { evaluations, .. }) => {
                assert_eq!(evaluations, 24 * 10u128.pow(12))
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        let five = SystemConfig::standard(5, 1e5);
        let ch5 = sample_channels(&five, 0).unwrap();
        assert!(matches!(
            brute_force_grid(&five, &ch5, &GridSpec::default()),
            Err(Error::TooManyUsersForGrid { .. })
        ));
    }

    #[test]
    fn zero_tasks_pick_smallest_power() {
        let cfg = SystemConfig::standard(2, 0.0);
        let ch = sample_channels(&cfg, 3).unwrap();
        let r = brute_force_grid(&cfg, &ch, &GridSpec::default()).unwrap();
        assert_eq!(r.indices, vec![0, 0]);
        assert!((r.energy - 2.0 * 1e-6 * cfg.deadline).abs() < 1e-18);
    }

    #[test]
    fn silent_user_never_leaks() {
        let cfg = SystemConfig::standard(1, 1e5);
        let ch = sample_channels(&cfg, 0).unwrap();
        let alloc = Allocation::all_local(&cfg);
        let est = monte_carlo_sop(&alloc, &ch, &cfg, 1000, 0).unwrap();
        assert_eq!(est[0].estimate, 0.0);
        assert!(monte_carlo_sop(&alloc, &ch, &cfg, 999, 0).is_err());
    }

    #[test]
    fn zero_redundancy_always_leaks() {
        let cfg = SystemConfig::standard(1, 1e5);
        let ch = sample_channels(&cfg, 0).unwrap();
        let mut alloc = Allocation::all_local(&cfg);
        alloc.power[0] = 0.1;
        alloc.rate_secret[0] = (ch.tau[0] * 0.1f64).ln_1p() / std::f64::consts::LN_2;
        let est = monte_carlo_sop(&alloc, &ch, &cfg, 10_000, 1).unwrap();
        assert!(est[0].estimate > 0.999);
    }
}
