//! Dense primal-dual interior-point solver for the small smooth convex
//! programs emitted by [`crate::transform`].
//!
//! Programs have the form
//!
//! ```text
//! minimize   c·x + c0 + Σ a_j max(x_j, 0)³ + Σ w_q (r_q·x + s_q)²
//! subject to h_i(x) + e_i·x + f_i ≤ 0
//! ```
//!
//! where each `h_i` is either absent, `-log2(1 + x_v)` or `2^{x_v}`. All
//! constraint curvature is convex, so any KKT point is a global minimizer.

use nalgebra::{DMatrix, DVector};

const LN2: f64 = std::f64::consts::LN_2;

/// Sparse affine expression `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn constant(constant: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant,
        }
    }

    pub fn term(mut self, var: usize, coef: f64) -> Self {
        self.terms.push((var, coef));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(v, c)| (v, c * factor)).collect(),
            constant: self.constant * factor,
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|&(v, _)| v).max()
    }
}

/// Convex nonlinear part of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curvature {
    Affine,
    /// `-log2(1 + scale·x[var])`, `scale > 0`
    NegLog2OnePlus {
        var: usize,
        scale: f64,
    },
    /// `2^{x[var]}`
    Exp2 {
        var: usize,
    },
}

/// `curvature(x) + affine(x) ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub affine: AffineExpr,
    pub curvature: Curvature,
}

impl ConstraintRow {
    pub fn affine(affine: AffineExpr) -> Self {
        Self {
            affine,
            curvature: Curvature::Affine,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let base = self.affine.eval(x);
        match self.curvature {
            Curvature::Affine => base,
            Curvature::NegLog2OnePlus { var, scale } => {
                let arg = scale * x[var];
                if arg <= -1.0 {
                    f64::INFINITY
                } else {
                    base - arg.ln_1p() / LN2
                }
            }
            Curvature::Exp2 { var } => base + x[var].exp2(),
        }
    }

    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        out.extend_from_slice(&self.affine.terms);
        match self.curvature {
            Curvature::Affine => {}
            Curvature::NegLog2OnePlus { var, scale } => {
                out.push((var, -scale / ((1.0 + scale * x[var]) * LN2)))
            }
            Curvature::Exp2 { var } => out.push((var, LN2 * x[var].exp2())),
        }
    }

    fn add_hessian(&self, x: &[f64], weight: f64, hess: &mut DMatrix<f64>) {
        match self.curvature {
            Curvature::Affine => {}
            Curvature::NegLog2OnePlus { var, scale } => {
                let d = 1.0 + scale * x[var];
                hess[(var, var)] += weight * scale * scale / (d * d * LN2);
            }
            Curvature::Exp2 { var } => hess[(var, var)] += weight * LN2 * LN2 * x[var].exp2(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        let curve = match self.curvature {
            Curvature::Affine => None,
            Curvature::NegLog2OnePlus { var, .. } | Curvature::Exp2 { var } => Some(var),
        };
        self.affine.max_var().max(curve)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Objective {
    pub linear: AffineExpr,
    /// `coef · max(x[var], 0)³`, `coef ≥ 0`.
    pub cubics: Vec<(usize, f64)>,
    /// `weight · (expr)²`, `weight ≥ 0`.
    pub squares: Vec<(f64, AffineExpr)>,
}

impl Objective {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut f = self.linear.eval(x);
        for &(v, c) in &self.cubics {
            let xv = x[v].max(0.0);
            f += c * xv * xv * xv;
        }
        for (w, e) in &self.squares {
            let r = e.eval(x);
            f += w * r * r;
        }
        f
    }

    fn add_derivatives(&self, x: &[f64], grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        for &(v, c) in &self.linear.terms {
            grad[v] += c;
        }
        for &(v, c) in &self.cubics {
            let xv = x[v].max(0.0);
            grad[v] += 3.0 * c * xv * xv;
            hess[(v, v)] += 6.0 * c * xv;
        }
        for (w, e) in &self.squares {
            let r = e.eval(x);
            for &(a, ca) in &e.terms {
                grad[a] += 2.0 * w * r * ca;
                for &(b, cb) in &e.terms {
                    hess[(a, b)] += 2.0 * w * ca * cb;
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = DVector::zeros(x.len());
        self.add_gradient(x, &mut g);
        g.iter().copied().collect()
    }
}

/// A smooth convex program with inequality constraints only.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub num_vars: usize,
    pub objective: Objective,
    pub constraints: Vec<ConstraintRow>,
}

impl Program {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            ..Default::default()
        }
    }

    /// Every row and term references an existing variable.
    pub fn is_well_formed(&self) -> bool {
        let n = self.num_vars;
        let ok = |v: Option<usize>| v.is_none_or(|v| v < n);
        ok(self.objective.linear.max_var())
            && self
                .objective
                .cubics
                .iter()
                .all(|&(v, c)| v < n && c >= 0.0)
            && self
                .objective
                .squares
                .iter()
                .all(|(w, e)| *w >= 0.0 && ok(e.max_var()))
            && self.constraints.iter().all(|c| ok(c.max_var()))
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    /// `∇f + Σ z_i ∇g_i`.
    fn lagrangian_gradient(
        &self,
        x: &[f64],
        z: &[f64],
        scratch: &mut Vec<(usize, f64)>,
    ) -> DVector<f64> {
        let n = self.num_vars;
        let mut grad = DVector::zeros(n);
        self.objective.add_gradient(x, &mut grad);
        for (row, &zi) in self.constraints.iter().zip(z) {
            row.gradient(x, scratch);
            for &(v, c) in scratch.iter() {
                grad[v] += zi * c;
            }
        }
        grad
    }
}

impl Objective {
    fn add_gradient(&self, x: &[f64], grad: &mut DVector<f64>) {
        for &(v, c) in &self.linear.terms {
            grad[v] += c;
        }
        for &(v, c) in &self.cubics {
            let xv = x[v].max(0.0);
            grad[v] += 3.0 * c * xv * xv;
        }
        for (w, e) in &self.squares {
            let r = e.eval(x);
            for &(a, ca) in &e.terms {
                grad[a] += 2.0 * w * r * ca;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// KKT residual target.
    pub tol: f64,
    /// Newton-step cap (phase I included).
    pub max_iter: usize,
    /// Target duality-gap reduction per step.
    pub barrier_decrease: f64,
    /// Sufficient-decrease fraction of the residual backtracking.
    pub ls_alpha: f64,
    /// Backtracking shrink factor.
    pub ls_beta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            barrier_decrease: 0.2,
            ls_alpha: 0.01,
            ls_beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericallyDegenerate,
    /// Phase I could not find a strictly feasible point.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    /// One multiplier per constraint row.
    pub multipliers: Vec<f64>,
    pub objective: f64,
    pub kkt: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl SubproblemSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Starting point; multipliers are optional.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub multipliers: Option<Vec<f64>>,
}

impl WarmStart {
    pub fn primal(x: Vec<f64>) -> Self {
        Self {
            x,
            multipliers: None,
        }
    }
}

/// Max of stationarity (∞-norm), primal violation, complementary slackness
/// and dual infeasibility.
pub fn kkt_residual(prog: &Program, x: &[f64], z: &[f64]) -> f64 {
    let mut scratch = Vec::new();
    let grad = prog.lagrangian_gradient(x, z, &mut scratch);
    let stationarity = grad.amax();
    let mut worst = stationarity;
    for (row, &zi) in prog.constraints.iter().zip(z) {
        let g = row.value(x);
        worst = worst
            .max(g.max(0.0))
            .max((zi * g).abs())
            .max((-zi).max(0.0));
    }
    if worst.is_nan() {
        f64::INFINITY
    } else {
        worst
    }
}

/// Solves `prog` from `warm`; runs phase I first when the start is not
/// strictly feasible.
pub fn solve(prog: &Program, warm: &WarmStart, opts: &SolverOptions) -> SubproblemSolution {
    debug_assert!(prog.is_well_formed());
    let n = prog.num_vars;
    let mut x = warm.x.clone();
    x.resize(n, 0.0);
    let mut iterations = 0;

    if !prog.is_strictly_feasible(&x) {
        match phase_one(prog, &x, opts) {
            PhaseOne::Found {
                x: x1,
                iterations: it,
            } => {
                x = x1;
                iterations += it;
            }
            PhaseOne::Failed {
                x: x1,
                iterations: it,
                status,
            } => {
                let z = vec![0.0; prog.constraints.len()];
                return SubproblemSolution {
                    objective: prog.objective.value(&x1),
                    kkt: kkt_residual(prog, &x1, &z),
                    x: x1,
                    multipliers: z,
                    iterations: iterations + it,
                    status,
                };
            }
        }
    }

    let z = match &warm.multipliers {
        Some(z)
            if z.len() == prog.constraints.len()
                && z.iter().all(|&v| v > 0.0)
                && iterations == 0 =>
        {
            z.clone()
        }
        _ => initial_multipliers(prog, &x),
    };
    let out = primal_dual(
        prog,
        x,
        z,
        opts,
        opts.max_iter.saturating_sub(iterations),
        |_| false,
    );
    SubproblemSolution {
        objective: prog.objective.value(&out.x),
        kkt: kkt_residual(prog, &out.x, &out.z),
        x: out.x,
        multipliers: out.z,
        iterations: iterations + out.iterations,
        status: out.status,
    }
}

fn initial_multipliers(prog: &Program, x: &[f64]) -> Vec<f64> {
    let scale = prog
        .objective
        .gradient(x)
        .iter()
        .fold(1e-2_f64, |a, g| a.max(g.abs()));
    let m = prog.constraints.len().max(1) as f64;
    prog.constraints
        .iter()
        .map(|c| (scale / m) / (-c.value(x)).max(1e-12))
        .map(|z| z.clamp(1e-8, 1e8))
        .collect()
}

enum PhaseOne {
    Found {
        x: Vec<f64>,
        iterations: usize,
    },
    Failed {
        x: Vec<f64>,
        iterations: usize,
        status: SolveStatus,
    },
}

/// Minimizes `s` subject to `g_i(x) ≤ s`, stopping at the first strictly
/// feasible iterate of the original program.
fn phase_one(prog: &Program, x0: &[f64], opts: &SolverOptions) -> PhaseOne {
    let n = prog.num_vars;
    let s_var = n;
    let mut x: Vec<f64> = x0.to_vec();
    // Pull points back into the domain of the log terms.
    for c in &prog.constraints {
        if let Curvature::NegLog2OnePlus { var, scale } = c.curvature {
            if !(scale * x[var] > -1.0 + 1e-9) {
                x[var] = 0.0;
            }
        }
    }
    let worst = prog
        .constraints
        .iter()
        .map(|c| c.value(&x))
        .fold(f64::NEG_INFINITY, f64::max);
    if !worst.is_finite() {
        return PhaseOne::Failed {
            x,
            iterations: 0,
            status: SolveStatus::NumericallyDegenerate,
        };
    }
    let mut lifted = Program::new(n + 1);
    lifted.objective.linear = AffineExpr::constant(0.0).term(s_var, 1.0);
    for c in &prog.constraints {
        let mut row = c.clone();
        row.affine.terms.push((s_var, -1.0));
        lifted.constraints.push(row);
    }
    // Keeps the auxiliary problem bounded; stopping happens at s < 0 anyway.
    let floor = worst.abs().max(1.0);
    lifted.constraints.push(ConstraintRow::affine(
        AffineExpr::constant(-floor).term(s_var, -1.0),
    ));

    x.push(worst + 1.0);
    let z = initial_multipliers(&lifted, &x);
    let out = primal_dual(&lifted, x, z, opts, opts.max_iter, |x| x[s_var] < 0.0);
    let mut x = out.x;
    let s = x.pop().unwrap_or(f64::INFINITY);
    if s < 0.0 && prog.is_strictly_feasible(&x) {
        PhaseOne::Found {
            x,
            iterations: out.iterations,
        }
    } else {
        let status = match out.status {
            SolveStatus::Optimal => SolveStatus::Infeasible,
            other => other,
        };
        PhaseOne::Failed {
            x,
            iterations: out.iterations,
            status,
        }
    }
}

struct PdOutput {
    x: Vec<f64>,
    z: Vec<f64>,
    iterations: usize,
    status: SolveStatus,
}

fn residual_norm(
    prog: &Program,
    x: &[f64],
    z: &[f64],
    inv_t: f64,
    scratch: &mut Vec<(usize, f64)>,
) -> f64 {
    let r_dual = prog.lagrangian_gradient(x, z, scratch);
    let mut sq = r_dual.norm_squared();
    for (row, &zi) in prog.constraints.iter().zip(z) {
        let rc = -zi * row.value(x) - inv_t;
        sq += rc * rc;
    }
    sq.sqrt()
}

fn primal_dual(
    prog: &Program,
    mut x: Vec<f64>,
    mut z: Vec<f64>,
    opts: &SolverOptions,
    max_iter: usize,
    mut early_stop: impl FnMut(&[f64]) -> bool,
) -> PdOutput {
    let n = prog.num_vars;
    let m = prog.constraints.len();
    let mut scratch = Vec::new();
    let mut g: Vec<f64> = prog.constraint_values(&x);
    let mut iterations = 0;

    let finish = |x, z, iterations, status| PdOutput {
        x,
        z,
        iterations,
        status,
    };

    loop {
        if kkt_residual(prog, &x, &z) <= opts.tol {
            return finish(x, z, iterations, SolveStatus::Optimal);
        }
        if iterations >= max_iter {
            return finish(x, z, iterations, SolveStatus::MaxIterations);
        }

        let gap: f64 = -g.iter().zip(&z).map(|(gi, zi)| gi * zi).sum::<f64>();
        let inv_t = if m > 0 {
            (opts.barrier_decrease * gap / m as f64).max(0.0)
        } else {
            0.0
        };

        // Reduced Newton system for the perturbed KKT conditions.
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        prog.objective.add_derivatives(&x, &mut grad, &mut hess);
        let mut rhs = -grad.clone();
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        for (i, row) in prog.constraints.iter().enumerate() {
            row.add_hessian(&x, z[i], &mut hess);
            row.gradient(&x, &mut scratch);
            let slack = -g[i];
            let d = z[i] / slack;
            for &(a, ca) in scratch.iter() {
                rhs[a] -= inv_t * ca / slack;
                for &(b, cb) in scratch.iter() {
                    hess[(a, b)] += d * ca * cb;
                }
            }
            rows.push(scratch.clone());
        }
        let Some(dx) = solve_spd(hess, rhs) else {
            return finish(x, z, iterations, SolveStatus::NumericallyDegenerate);
        };
        let dz: Vec<f64> = (0..m)
            .map(|i| {
                let slack = -g[i];
                let a_dx: f64 = rows[i].iter().map(|&(v, c)| c * dx[v]).sum();
                -z[i] + inv_t / slack + z[i] / slack * a_dx
            })
            .collect();

        let mut step = 1.0_f64;
        for i in 0..m {
            if dz[i] < 0.0 {
                step = step.min(-0.99 * z[i] / dz[i]);
            }
        }
        let base = residual_norm(prog, &x, &z, inv_t, &mut scratch);
        let mut accepted = false;
        let mut x_new = vec![0.0; n];
        let mut z_new = vec![0.0; m];
        while step > 1e-16 {
            for j in 0..n {
                x_new[j] = x[j] + step * dx[j];
            }
            if prog.is_strictly_feasible(&x_new) {
                for i in 0..m {
                    z_new[i] = z[i] + step * dz[i];
                }
                let r = residual_norm(prog, &x_new, &z_new, inv_t, &mut scratch);
                if r <= (1.0 - opts.ls_alpha * step) * base {
                    accepted = true;
                    break;
                }
            }
            step *= opts.ls_beta;
        }
        iterations += 1;
        if !accepted {
            return finish(x, z, iterations, SolveStatus::NumericallyDegenerate);
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut z, &mut z_new);
        g = prog.constraint_values(&x);
        if early_stop(&x) {
            return finish(x, z, iterations, SolveStatus::Optimal);
        }
    }
}

/// Cholesky with escalating diagonal regularization.
fn solve_spd(hess: DMatrix<f64>, rhs: DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1e-300);
    if !scale.is_finite() || rhs.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut h = hess.clone();
        if reg > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += reg;
            }
        }
        if let Some(ch) = h.cholesky() {
            let dx = ch.solve(&rhs);
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        reg = if reg == 0.0 {
            scale * 1e-14
        } else {
            reg * 100.0
        };
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    /// minimize x² subject to x ≥ 1.
    fn toy() -> Program {
        let mut p = Program::new(1);
        p.objective
            .squares
            .push((1.0, AffineExpr::new(vec![(0, 1.0)], 0.0)));
        p.constraints
            .push(ConstraintRow::affine(AffineExpr::new(vec![(0, -1.0)], 1.0)));
        p
    }

    #[test]
    fn active_bound_toy() {
        let prog = toy();
        let sol = solve(
            &prog,
            &WarmStart::primal(vec![3.0]),
            &SolverOptions::default(),
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!((sol.objective - 1.0).abs() < 1e-7);
        assert!(sol.kkt <= 1e-8);
    }

    #[test]
    fn toy_from_infeasible_start_runs_phase_one() {
        let prog = toy();
        let sol = solve(
            &prog,
            &WarmStart::primal(vec![-5.0]),
            &SolverOptions::default(),
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn kkt_at_analytic_optimum() {
        // x* = 1 with multiplier z* = 2 (2x - z = 0).
        assert!(kkt_residual(&toy(), &[1.0], &[2.0]) <= 1e-8);
    }

    #[test]
    fn kkt_with_zero_multipliers_is_gradient_norm() {
        let prog = toy();
        let r = kkt_residual(&prog, &[2.5], &[0.0]);
        assert!((r - 5.0).abs() < 1e-12);
    }

    #[test]
    fn kkt_shrinks_with_perturbation() {
        let prog = toy();
        let mut last = f64::INFINITY;
        for e in [1e-3, 1e-4, 1e-5, 1e-6] {
            let r = kkt_residual(&prog, &[1.0 + e], &[2.0]);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn infeasible_program_is_reported() {
        // x ≤ -1 and x ≥ 1
        let mut p = Program::new(1);
        p.objective.linear = AffineExpr::new(vec![(0, 1.0)], 0.0);
        p.constraints
            .push(ConstraintRow::affine(AffineExpr::new(vec![(0, 1.0)], 1.0)));
        p.constraints
            .push(ConstraintRow::affine(AffineExpr::new(vec![(0, -1.0)], 1.0)));
        let sol = solve(&p, &WarmStart::primal(vec![0.0]), &SolverOptions::default());
        assert_ne!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn log_and_exp_rows() {
        // maximize r subject to r ≤ log2(1 + b), b ≤ 3  → r = 2
        let mut p = Program::new(2);
        p.objective.linear = AffineExpr::new(vec![(0, -1.0)], 0.0);
        p.constraints.push(ConstraintRow {
            affine: AffineExpr::new(vec![(0, 1.0)], 0.0),
            curvature: Curvature::NegLog2OnePlus { var: 1, scale: 1.0 },
        });
        p.constraints
            .push(ConstraintRow::affine(AffineExpr::new(vec![(1, 1.0)], -3.0)));
        let sol = solve(
            &p,
            &WarmStart::primal(vec![0.0, 1.0]),
            &SolverOptions::default(),
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 2.0).abs() < 1e-7, "{:?}", sol);

        // minimize d subject to 2^r ≤ d, r ≥ 1.5 → d = 2^1.5
        let mut p = Program::new(2);
        p.objective.linear = AffineExpr::new(vec![(1, 1.0)], 0.0);
        p.constraints.push(ConstraintRow {
            affine: AffineExpr::new(vec![(1, -1.0)], 0.0),
            curvature: Curvature::Exp2 { var: 0 },
        });
        p.constraints
            .push(ConstraintRow::affine(AffineExpr::new(vec![(0, -1.0)], 1.5)));
        let sol = solve(
            &p,
            &WarmStart::primal(vec![0.0, 0.0]),
            &SolverOptions::default(),
        );
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[1] - 2f64.powf(1.5)).abs() < 1e-7);
    }

    #[test]
    fn warm_start_at_optimum_is_immediate() {
        let prog = toy();
        let opts = SolverOptions::default();
        let sol = solve(&prog, &WarmStart::primal(vec![3.0]), &opts);
        let again = solve(
            &prog,
            &WarmStart {
                x: sol.x.clone(),
                multipliers: Some(sol.multipliers.clone()),
            },
            &opts,
        );
        assert!(again.iterations <= 2);
        assert_eq!(again.status, SolveStatus::Optimal);
    }
}
