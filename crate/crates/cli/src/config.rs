//! Experiment configuration: a TOML file with one table per concern. Every
//! key has a default, so an empty file reproduces the reference scenario.

use std::path::{Path, PathBuf};

use noma_sec::benchmarks::Scheme;
use noma_sec::model::dbm_to_watts;
use noma_sec::oracle::GridSpec;
use noma_sec::pdd::PddConfig;
use noma_sec::{SystemConfig, UserParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// TOML syntax or type error; the message carries line and column.
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    /// Semantically invalid value.
    #[error("field `{field}`: {reason}")]
    Field { field: String, reason: String },
}

fn field(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub users: usize,
    pub bandwidth_hz: f64,
    pub deadline_s: f64,
    pub path_loss_exponent: f64,
    pub noise_bs_dbm: f64,
    pub noise_eve_dbm: f64,
    pub cycles_per_bit: f64,
    pub capacitance: f64,
    pub dist_bs_m: f64,
    pub dist_eve_m: f64,
    pub epsilon: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        Self {
            users: 3,
            bandwidth_hz: 10e6,
            deadline_s: 0.1,
            path_loss_exponent: 5.0,
            noise_bs_dbm: -50.0,
            noise_eve_dbm: -50.0,
            cycles_per_bit: 1e3,
            capacitance: 1e-28,
            dist_bs_m: 40.0,
            dist_eve_m: 100.0,
            epsilon: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub task_bits_start: f64,
    pub task_bits_stop: f64,
    pub task_bits_count: usize,
    pub seeds: Vec<u64>,
    pub schemes: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            task_bits_start: 1e5,
            task_bits_stop: 6e5,
            task_bits_count: 6,
            seeds: (0..5).collect(),
            schemes: Scheme::ALL.iter().map(|s| s.as_str().to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    pub task_bits: Vec<f64>,
    pub seed: u64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            task_bits: vec![4e5, 5e5],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PddSection {
    pub rho0: f64,
    pub decrease: f64,
    pub eta_base: f64,
    pub delta_outer: f64,
    pub delta_inner: f64,
    pub inner_max: usize,
    pub outer_max: usize,
}

impl Default for PddSection {
    fn default() -> Self {
        let d = PddConfig::default();
        Self {
            rho0: d.rho0,
            decrease: d.decrease,
            eta_base: d.eta_base,
            delta_outer: d.delta_outer,
            delta_inner: d.delta_inner,
            inner_max: d.inner_max,
            outer_max: d.outer_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub mc_samples: usize,
    /// Below this sample count the Monte-Carlo check is reported as
    /// low-power instead of pass/fail.
    pub mc_power_threshold: usize,
    pub mc_allocations: usize,
    pub mc_sigmas: f64,
    pub grid_points: usize,
    pub grid_p_min: f64,
    pub grid_p_max: f64,
    pub grid_users: usize,
    pub grid_seeds: Vec<u64>,
    pub grid_task_bits: Vec<f64>,
    pub grid_slack: f64,
    pub benchmark_seeds: usize,
    pub benchmark_task_bits: f64,
    pub benchmark_slack: f64,
    pub benchmark_fraction: f64,
    pub limit_epsilon: f64,
    pub limit_gap: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            mc_samples: 1_000_000,
            mc_power_threshold: 100_000,
            mc_allocations: 50,
            mc_sigmas: 3.0,
            grid_points: g.points,
            grid_p_min: g.p_min,
            grid_p_max: g.p_max,
            grid_users: 2,
            grid_seeds: (0..10).collect(),
            grid_task_bits: vec![1e5, 2e5, 4e5],
            grid_slack: 0.02,
            benchmark_seeds: 20,
            benchmark_task_bits: 4e5,
            benchmark_slack: 0.02,
            benchmark_fraction: 0.9,
            limit_epsilon: 0.999,
            limit_gap: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSection,
    pub sweep: SweepSection,
    pub convergence: ConvergenceSection,
    pub pdd: PddSection,
    pub oracle: OracleSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let cfg: Self = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = &self.sweep;
        if s.schemes.is_empty() {
            return Err(field("sweep.schemes", "must list at least one scheme"));
        }
        self.schemes()?;
        if s.seeds.is_empty() {
            return Err(field("sweep.seeds", "must list at least one seed"));
        }
        if s.task_bits_count == 0 {
            return Err(field("sweep.task_bits_count", "must be at least 1"));
        }
        if !(s.task_bits_start >= 0.0 && s.task_bits_stop >= s.task_bits_start) {
            return Err(field(
                "sweep.task_bits_start",
                format!(
                    "need 0 <= start <= stop, got {} and {}",
                    s.task_bits_start, s.task_bits_stop
                ),
            ));
        }
        if self.convergence.task_bits.is_empty() {
            return Err(field(
                "convergence.task_bits",
                "must list at least one task size",
            ));
        }
        let o = &self.oracle;
        if o.grid_seeds.is_empty() {
            return Err(field("oracle.grid_seeds", "must list at least one seed"));
        }
        if o.grid_task_bits.is_empty() {
            return Err(field(
                "oracle.grid_task_bits",
                "must list at least one task size",
            ));
        }
        if o.mc_allocations == 0 {
            return Err(field("oracle.mc_allocations", "must be at least 1"));
        }
        if o.benchmark_seeds == 0 {
            return Err(field("oracle.benchmark_seeds", "must be at least 1"));
        }
        if !(o.benchmark_fraction > 0.0 && o.benchmark_fraction <= 1.0) {
            return Err(field("oracle.benchmark_fraction", "must lie in (0, 1]"));
        }
        if !(o.limit_epsilon > 0.0 && o.limit_epsilon < 1.0) {
            return Err(field("oracle.limit_epsilon", "must lie in (0, 1)"));
        }
        self.grid()
            .validate()
            .map_err(|e| field("oracle.grid_points", e.to_string()))?;
        self.system_config(0.0)
            .validate()
            .map_err(|e| core_field("system", e))?;
        self.pdd_config()
            .validate()
            .map_err(|e| core_field("pdd", e))?;
        Ok(())
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, ConfigError> {
        self.sweep
            .schemes
            .iter()
            .map(|s| s.parse().map_err(|e| core_field("sweep", e)))
            .collect()
    }

    /// Evenly spaced task sizes from start to stop inclusive.
    pub fn task_sweep(&self) -> Vec<f64> {
        let s = &self.sweep;
        if s.task_bits_count == 1 {
            return vec![s.task_bits_start];
        }
        let step = (s.task_bits_stop - s.task_bits_start) / (s.task_bits_count - 1) as f64;
        (0..s.task_bits_count)
            .map(|i| s.task_bits_start + step * i as f64)
            .collect()
    }

    /// Homogeneous users with the given task size.
    pub fn system_config(&self, task_bits: f64) -> SystemConfig {
        self.system_config_for(self.system.users, task_bits)
    }

    pub fn system_config_for(&self, users: usize, task_bits: f64) -> SystemConfig {
        let s = &self.system;
        let user = UserParams {
            task_bits,
            cycles_per_bit: s.cycles_per_bit,
            capacitance: s.capacitance,
            dist_bs: s.dist_bs_m,
            dist_eve: s.dist_eve_m,
        };
        SystemConfig {
            bandwidth: s.bandwidth_hz,
            deadline: s.deadline_s,
            path_loss_exp: s.path_loss_exponent,
            noise_bs: dbm_to_watts(s.noise_bs_dbm),
            noise_eve: dbm_to_watts(s.noise_eve_dbm),
            epsilon: s.epsilon,
            users: vec![user; users],
        }
    }

    pub fn pdd_config(&self) -> PddConfig {
        let p = &self.pdd;
        PddConfig {
            rho0: p.rho0,
            decrease: p.decrease,
            eta_base: p.eta_base,
            delta_outer: p.delta_outer,
            delta_inner: p.delta_inner,
            inner_max: p.inner_max,
            outer_max: p.outer_max,
            ..PddConfig::default()
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            p_min: self.oracle.grid_p_min,
            p_max: self.oracle.grid_p_max,
            points: self.oracle.grid_points,
            ..GridSpec::default()
        }
    }
}

fn core_field(section: &str, e: noma_sec::Error) -> ConfigError {
    match e {
        noma_sec::Error::InvalidConfig { field: f, reason } => {
            field(&format!("{section}.{f}"), reason)
        }
        other => field(section, other.to_string()),
    }
}

/// Parses `--seeds`: either a half-open range `a..b` or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|e| format!("bad range end: {e}"))?;
        (a..b).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(|e| format!("bad seed {t:?}: {e}")))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("seed list is empty".into());
    }
    Ok(seeds)
}
