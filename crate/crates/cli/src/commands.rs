//! The four subcommands. Each writes `<name>.csv` and `<name>.manifest.toml`
//! into the output directory and returns the process exit code.

use std::time::Instant;

use noma_sec::benchmarks::{run_scheme, BenchmarkResult, Scheme};
use noma_sec::model::decoding_sequence;
use noma_sec::pdd::SolveStatusFinal;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{self, instance, Check, Verdict};
use crate::config::ExperimentConfig;
use crate::table::{ints, num, nums, Table};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Serialize)]
struct CellTime {
    label: String,
    wall_s: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    exit_code: u8,
    wall_s: f64,
    config: &'a ExperimentConfig,
    cells: Vec<CellTime>,
}

fn finish(
    name: &str,
    cfg: &ExperimentConfig,
    table: &Table,
    started: Instant,
    cells: Vec<CellTime>,
    exit_code: u8,
) -> u8 {
    let dir = &cfg.output.dir;
    let written = std::fs::create_dir_all(dir)
        .and_then(|_| table.write(&dir.join(format!("{name}.csv"))))
        .and_then(|_| {
            let manifest = Manifest {
                command: name,
                version: env!("CARGO_PKG_VERSION"),
                exit_code,
                wall_s: started.elapsed().as_secs_f64(),
                config: cfg,
                cells,
            };
            let text = toml::to_string(&manifest).expect("manifest serializes");
            std::fs::write(dir.join(format!("{name}.manifest.toml")), text)
        });
    match written {
        Ok(()) => exit_code,
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", dir.display());
            EXIT_FAILURE
        }
    }
}

fn status_str(s: SolveStatusFinal) -> &'static str {
    match s {
        SolveStatusFinal::Converged => "converged",
        SolveStatusFinal::IterationCap => "iteration-cap",
        SolveStatusFinal::InfeasibleFinal => "infeasible",
    }
}

fn sequence(r: &BenchmarkResult) -> String {
    decoding_sequence(&r.alloc.order).map_or_else(String::new, |s| ints(&s))
}

pub const RUN_HEADER: &[&str] = &[
    "seed",
    "task_bits",
    "scheme",
    "status",
    "energy_j",
    "local_energy_j",
    "offload_energy_j",
    "iterations",
    "final_violation",
    "worst_violation",
    "local_bits",
    "power_w",
    "rate_secret",
    "decoding_sequence",
    "error",
];

fn run_row(
    seed: u64,
    bits: f64,
    scheme: Scheme,
    r: &noma_sec::Result<BenchmarkResult>,
) -> Vec<String> {
    let mut row = vec![seed.to_string(), num(bits), scheme.to_string()];
    match r {
        Ok(r) => {
            let status = if r.feasibility.is_clean() {
                status_str(r.status)
            } else {
                "infeasible"
            };
            let (iterations, violation) =
                r.pdd.as_ref().map_or((String::new(), String::new()), |p| {
                    (p.state.trace.len().to_string(), num(p.final_violation))
                });
            row.extend([
                status.to_string(),
                num(r.energy.total),
                num(r.energy.local.iter().sum()),
                num(r.energy.offload.iter().sum()),
                iterations,
                violation,
                num(r.feasibility.worst()),
                nums(&r.alloc.local_bits),
                nums(&r.alloc.power),
                nums(&r.alloc.rate_secret),
                sequence(r),
                String::new(),
            ]);
        }
        Err(e) => {
            row.push("error".into());
            row.extend(std::iter::repeat_n(String::new(), 10));
            row.push(e.to_string());
        }
    }
    row
}

/// One row per (seed, task size, scheme), cells solved in parallel.
pub fn run(cfg: &ExperimentConfig) -> u8 {
    let started = Instant::now();
    let schemes = cfg.schemes().expect("validated");
    let pdd = cfg.pdd_config();
    let mut cells = Vec::new();
    for &seed in &cfg.sweep.seeds {
        for bits in cfg.task_sweep() {
            for &scheme in &schemes {
                cells.push((seed, bits, scheme));
            }
        }
    }
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(seed, bits, scheme)| {
            let t = Instant::now();
            let r = instance(cfg, cfg.system.users, bits, seed)
                .and_then(|(sys, ch)| run_scheme(scheme, &sys, &ch, &pdd));
            (r, t.elapsed())
        })
        .collect();
    let mut table = Table::new(RUN_HEADER);
    let mut times = Vec::new();
    let mut failures = 0;
    for (&(seed, bits, scheme), (r, wall)) in cells.iter().zip(&results) {
        let ok = matches!(r, Ok(r) if r.converged() && r.feasibility.is_clean());
        if !ok {
            failures += 1;
        }
        table.push(run_row(seed, bits, scheme, r));
        times.push(CellTime {
            label: format!("seed={seed} task_bits={bits} scheme={scheme}"),
            wall_s: wall.as_secs_f64(),
        });
    }
    println!(
        "run: {} cells, {failures} not converged or infeasible",
        cells.len()
    );
    let code = if failures == 0 { EXIT_OK } else { EXIT_FAILURE };
    finish("run", cfg, &table, started, times, code)
}

pub const CONVERGENCE_HEADER: &[&str] = &[
    "task_bits",
    "iteration",
    "outer",
    "inner",
    "objective",
    "energy_j",
    "violation",
    "rho",
    "kkt",
    "step",
];

/// Per-iteration traces for each configured task size.
pub fn convergence(cfg: &ExperimentConfig) -> u8 {
    let started = Instant::now();
    let mut table = Table::new(CONVERGENCE_HEADER);
    let runs = match checks::convergence_runs(cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return finish(
                "convergence",
                cfg,
                &table,
                started,
                Vec::new(),
                EXIT_FAILURE,
            );
        }
    };
    let mut times = Vec::new();
    for run in &runs {
        for t in &run.result.state.trace {
            table.push(vec![
                num(run.task_bits),
                t.iteration.to_string(),
                t.outer.to_string(),
                t.inner.to_string(),
                num(t.objective),
                num(t.energy),
                num(t.violation),
                num(t.rho),
                num(t.kkt),
                num(t.step),
            ]);
        }
        times.push(CellTime {
            label: format!("task_bits={}", run.task_bits),
            wall_s: run.wall.as_secs_f64(),
        });
    }
    for check in checks::convergence_checks(cfg, &runs) {
        println!("{check}");
    }
    let code = if runs.iter().all(|r| r.result.converged()) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    };
    finish("convergence", cfg, &table, started, times, code)
}

pub const ORACLE_HEADER: &[&str] = &[
    "seed",
    "task_bits",
    "grid_energy_j",
    "grid_sequence",
    "grid_evaluations",
    "pdd_energy_j",
    "pdd_sequence",
    "pdd_status",
    "ratio",
    "mc_max_abs_z",
    "mc_min_tail_p",
];

/// Brute-force grid against the solver on small instances, plus a
/// Monte-Carlo outage check of each solver output.
pub fn oracle(cfg: &ExperimentConfig) -> u8 {
    let started = Instant::now();
    let mut table = Table::new(ORACLE_HEADER);
    let cases = match checks::grid_cases(cfg, &cfg.oracle.grid_seeds) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return finish("oracle", cfg, &table, started, Vec::new(), EXIT_FAILURE);
        }
    };
    let z: Vec<noma_sec::Result<checks::McComparison>> = cases
        .par_iter()
        .map(|c| {
            let (sys, ch) = instance(cfg, cfg.oracle.grid_users, c.task_bits, c.seed)?;
            checks::mc_compare(&c.pdd.alloc, &ch, &sys, cfg.oracle.mc_samples, c.seed)
        })
        .collect();
    let mut times = Vec::new();
    let mut code = EXIT_OK;
    for (c, z) in cases.iter().zip(z) {
        let (z, tail) = match z {
            Ok(m) => (num(m.max_z), num(m.min_tail)),
            Err(e) => {
                eprintln!("error: seed {} L={}: {e}", c.seed, c.task_bits);
                code = EXIT_FAILURE;
                (String::new(), String::new())
            }
        };
        if !c.pdd.converged() {
            code = EXIT_FAILURE;
        }
        table.push(vec![
            c.seed.to_string(),
            num(c.task_bits),
            num(c.grid.energy),
            ints(&c.grid.sequence),
            c.grid.evaluations.to_string(),
            num(c.pdd.energy.total),
            decoding_sequence(&c.pdd.alloc.order).map_or_else(String::new, |s| ints(&s)),
            status_str(c.pdd.status).to_string(),
            num(c.ratio()),
            z,
            tail,
        ]);
        times.push(CellTime {
            label: format!("grid seed={} task_bits={}", c.seed, c.task_bits),
            wall_s: c.grid_wall.as_secs_f64(),
        });
    }
    for check in checks::grid_checks(cfg, &cases) {
        println!("{check}");
    }
    finish("oracle", cfg, &table, started, times, code)
}

pub const VALIDATE_HEADER: &[&str] = &["check", "verdict", "measured", "threshold", "detail"];

/// Every check `validate` runs, in report order.
pub fn validation_checks(cfg: &ExperimentConfig) -> noma_sec::Result<Vec<Check>> {
    let mut out = checks::mc_checks(cfg)?;
    out.push(checks::round_trip_check(cfg)?);
    let cases = checks::grid_cases(cfg, &cfg.oracle.grid_seeds)?;
    out.extend(checks::grid_checks(cfg, &cases));
    let energies = checks::benchmark_energies(cfg)?;
    out.extend(checks::ordering_checks(cfg, &energies));
    out.push(checks::witness_check(cfg)?);
    out.push(checks::limit_check(cfg)?);
    Ok(out)
}

/// Runs the oracle suite and reports each check with its margin.
pub fn validate(cfg: &ExperimentConfig) -> u8 {
    let started = Instant::now();
    let mut table = Table::new(VALIDATE_HEADER);
    let checks = match validation_checks(cfg) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return finish("validate", cfg, &table, started, Vec::new(), EXIT_FAILURE);
        }
    };
    for c in &checks {
        println!("{c}");
        table.push(vec![
            c.name.clone(),
            c.verdict.to_string(),
            num(c.measured),
            num(c.threshold),
            c.detail.clone(),
        ]);
    }
    let failed = checks.iter().filter(|c| c.verdict == Verdict::Fail).count();
    println!("validate: {} checks, {failed} failed", checks.len());
    let code = if failed == 0 { EXIT_OK } else { EXIT_FAILURE };
    finish("validate", cfg, &table, started, Vec::new(), code)
}
