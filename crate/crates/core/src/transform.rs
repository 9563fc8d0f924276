//! Reformulation of the offloading problem into a sequence of convex
//! programs.
//!
//! The SINR and secrecy constraints are split with auxiliary variables into
//! bilinear inequalities (`b·π ≤ τp`, `π·δ_s ≤ u`, `φ·w ≤ π + τp − u`,
//! `p·u ≤ w`, plus the order-weighted interference and ordering products).
//! [`linearize`] replaces each product with its first-order Taylor expansion
//! at an anchor point and adds the augmented-Lagrangian penalties that tie
//! the relaxed decoding order `β` to its binary copy `μ`.
//!
//! The Taylor surrogate of a bilinear form is exact at the anchor but is not
//! an upper bound away from it, so subproblem solutions are not guaranteed
//! feasible for the original problem until the iteration settles. Callers
//! verify the final point with [`crate::model::feasibility_check`].

use crate::error::{check_len, Error, Result};
use crate::model::{
    descending_gain_order, interference, local_energy, max_secret_rate, secrecy_threshold,
    sinr_vector,
};
use crate::pair::{lower_pairs, PairMatrix};
use crate::subsolver::{
    self, AffineExpr, ConstraintRow, Curvature, Program, SolverOptions, SubproblemSolution,
    WarmStart,
};
use crate::{Allocation, ChannelRealization, SystemConfig};

/// Anchors of power and `w` are lifted to this value before expansion.
pub const ANCHOR_FLOOR: f64 = 1e-9;

/// Which parts of the problem a scheme keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    /// Secrecy-outage constraint and its auxiliary chain.
    pub secrecy: bool,
    /// Decoding order optimized (relaxed `β` with penalties) or frozen to
    /// descending channel gain.
    pub optimize_order: bool,
}

impl Variant {
    pub const PROPOSED: Self = Self {
        secrecy: true,
        optimize_order: true,
    };
    pub const FIXED_SIC: Self = Self {
        secrecy: true,
        optimize_order: false,
    };
    pub const NO_EVE: Self = Self {
        secrecy: false,
        optimize_order: true,
    };
}

/// Auxiliary variables of the reformulation at one iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPoint {
    /// Lower bound `b_k` on the SINR.
    pub sinr_lb: Vec<f64>,
    /// Upper bound `π_k` on interference plus one.
    pub interference_ub: Vec<f64>,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    /// `δ_s = 2^{R_s}` (a variable of the subproblem, upper-bounding the power).
    pub delta_s: Vec<f64>,
    /// Binary copy `μ` of the decoding order.
    pub mu: PairMatrix<f64>,
}

/// Primal point of the reformulated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub alloc: Allocation,
    pub aux: AuxPoint,
}

/// Augmented-Lagrangian penalty parameter and multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct AlMultipliers {
    pub rho: f64,
    /// Multipliers of `β = μ`.
    pub lambda1: PairMatrix<f64>,
    /// Multipliers of `β(1 − μ) = 0`.
    pub lambda2: PairMatrix<f64>,
    /// Multipliers of `β_{k,l} + β_{l,k} = 1`, stored at `(k, l)` with `l < k`.
    pub lambda3: PairMatrix<f64>,
}

impl AlMultipliers {
    pub fn new(k: usize, rho: f64) -> Self {
        Self {
            rho,
            lambda1: PairMatrix::zeros(k),
            lambda2: PairMatrix::zeros(k),
            lambda3: PairMatrix::zeros(k),
        }
    }
}

/// Role of a variable in the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Local bits, stored in units of `B·T` bits.
    LocalBits,
    Power,
    RateCodeword,
    RateSecret,
    SinrLb,
    InterferenceUb,
    DeltaSecret,
    Phi,
    U,
    W,
    /// `β_{k,l}`; the user field is `k`.
    Order(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub user: usize,
}

const BASE_KINDS: [VarKind; 6] = [
    VarKind::LocalBits,
    VarKind::Power,
    VarKind::RateCodeword,
    VarKind::RateSecret,
    VarKind::SinrLb,
    VarKind::InterferenceUb,
];
const SECRECY_KINDS: [VarKind; 4] = [VarKind::DeltaSecret, VarKind::Phi, VarKind::U, VarKind::W];

/// Index map between catalog positions and typed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub users: usize,
    pub variant: Variant,
    per_user: usize,
    order_index: PairMatrix<usize>,
    catalog: Vec<Var>,
    /// Bits per unit of the local-bits variable (`B·T`).
    pub bits_unit: f64,
}

impl Layout {
    pub fn new(users: usize, variant: Variant, bits_unit: f64) -> Self {
        let per_user = BASE_KINDS.len()
            + if variant.secrecy {
                SECRECY_KINDS.len()
            } else {
                0
            };
        let mut catalog = Vec::new();
        for user in 0..users {
            for &kind in BASE_KINDS.iter() {
                catalog.push(Var { kind, user });
            }
            if variant.secrecy {
                for &kind in SECRECY_KINDS.iter() {
                    catalog.push(Var { kind, user });
                }
            }
        }
        let mut order_index = PairMatrix::from_fn(users, |_, _| usize::MAX);
        if variant.optimize_order {
            for (k, l) in order_index.clone().off_diagonal() {
                order_index[(k, l)] = catalog.len();
                catalog.push(Var {
                    kind: VarKind::Order(l),
                    user: k,
                });
            }
        }
        Self {
            users,
            variant,
            per_user,
            order_index,
            catalog,
            bits_unit,
        }
    }

    pub fn len(&self) -> usize {
        self.catalog.len()
    }

    pub fn is_empty(&self) -> bool {
        self.catalog.is_empty()
    }

    pub fn catalog(&self) -> &[Var] {
        &self.catalog
    }

    /// Position of `kind` for `user`, if the variant carries it.
    pub fn index(&self, user: usize, kind: VarKind) -> Option<usize> {
        if user >= self.users {
            return None;
        }
        let base = user * self.per_user;
        let slot = match kind {
            VarKind::LocalBits => 0,
            VarKind::Power => 1,
            VarKind::RateCodeword => 2,
            VarKind::RateSecret => 3,
            VarKind::SinrLb => 4,
            VarKind::InterferenceUb => 5,
            VarKind::DeltaSecret | VarKind::Phi | VarKind::U | VarKind::W
                if !self.variant.secrecy =>
            {
                return None
            }
            VarKind::DeltaSecret => 6,
            VarKind::Phi => 7,
            VarKind::U => 8,
            VarKind::W => 9,
            VarKind::Order(l) => {
                let i = *self.order_index_checked(user, l)?;
                return (i != usize::MAX).then_some(i);
            }
        };
        Some(base + slot)
    }

    fn order_index_checked(&self, k: usize, l: usize) -> Option<&usize> {
        (k != l && l < self.users).then(|| &self.order_index[(k, l)])
    }

    fn at(&self, user: usize, kind: VarKind) -> usize {
        self.index(user, kind)
            .unwrap_or_else(|| panic!("variable {kind:?} of user {user} not in layout"))
    }

    /// Flattens an iterate into catalog coordinates.
    pub fn pack(&self, it: &Iterate) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        let (a, aux) = (&it.alloc, &it.aux);
        for k in 0..self.users {
            x[self.at(k, VarKind::LocalBits)] = a.local_bits[k] / self.bits_unit;
            x[self.at(k, VarKind::Power)] = a.power[k];
            x[self.at(k, VarKind::RateCodeword)] = a.rate_codeword[k];
            x[self.at(k, VarKind::RateSecret)] = a.rate_secret[k];
            x[self.at(k, VarKind::SinrLb)] = aux.sinr_lb[k];
            x[self.at(k, VarKind::InterferenceUb)] = aux.interference_ub[k];
            if self.variant.secrecy {
                x[self.at(k, VarKind::DeltaSecret)] = aux.delta_s[k];
                x[self.at(k, VarKind::Phi)] = aux.phi[k];
                x[self.at(k, VarKind::U)] = aux.u[k];
                x[self.at(k, VarKind::W)] = aux.w[k];
            }
        }
        if self.variant.optimize_order {
            for (k, l) in a.order.off_diagonal() {
                x[self.order_index[(k, l)]] = a.order[(k, l)];
            }
        }
        x
    }

    /// Rebuilds an iterate from catalog coordinates. Quantities the layout
    /// does not carry (frozen order, `μ`, secrecy auxiliaries of schemes
    /// without Eve) are taken from `template`.
    pub fn unpack(&self, x: &[f64], template: &Iterate) -> Iterate {
        let mut it = template.clone();
        for k in 0..self.users {
            it.alloc.local_bits[k] = x[self.at(k, VarKind::LocalBits)] * self.bits_unit;
            it.alloc.power[k] = x[self.at(k, VarKind::Power)];
            it.alloc.rate_codeword[k] = x[self.at(k, VarKind::RateCodeword)];
            it.alloc.rate_secret[k] = x[self.at(k, VarKind::RateSecret)];
            it.aux.sinr_lb[k] = x[self.at(k, VarKind::SinrLb)];
            it.aux.interference_ub[k] = x[self.at(k, VarKind::InterferenceUb)];
            if self.variant.secrecy {
                it.aux.delta_s[k] = x[self.at(k, VarKind::DeltaSecret)];
                it.aux.phi[k] = x[self.at(k, VarKind::Phi)];
                it.aux.u[k] = x[self.at(k, VarKind::U)];
                it.aux.w[k] = x[self.at(k, VarKind::W)];
            }
        }
        if self.variant.optimize_order {
            for (k, l) in self.order_index.off_diagonal() {
                it.alloc.order[(k, l)] = x[self.order_index[(k, l)]];
            }
        }
        it
    }
}

/// Which constraint a subproblem row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowTag {
    /// `L − l ≤ B·T·R_s`.
    OffloadRate(usize),
    /// `R_s ≤ R_t`.
    Redundancy(usize),
    /// `R_t ≤ log2(1 + b)`.
    DecodeRate(usize),
    /// `2^{R_s} ≤ δ_s`.
    SecretLevel(usize),
    /// Linearized `b·π ≤ τ p`.
    SinrProduct(usize),
    /// Linearized (or exact, with a frozen order) `1 + Σ β τ p ≤ π`.
    Interference(usize),
    /// Linearized `π·δ_s ≤ u`.
    SecretProduct(usize),
    /// Linearized `φ·w ≤ π + τ p − u`.
    PhiProduct(usize),
    /// Linearized `p·u ≤ w`.
    PowerProduct(usize),
    /// Linearized (or exact, with a frozen order) `β_{k,l} τ_l p_l ≤ τ_k p_k`.
    OrderProduct(usize, usize),
    /// `φ ≥ −ln ε / (σ_e² d_e^α)`.
    SecrecyFloor(usize),
    Lower(Var),
    Upper(Var),
}

/// One convex subproblem: the program, the meaning of each row, and the
/// anchor it was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSubproblem {
    pub layout: Layout,
    pub program: Program,
    pub tags: Vec<RowTag>,
    /// Anchor in catalog coordinates (before flooring).
    pub anchor: Vec<f64>,
}

impl ConvexSubproblem {
    pub fn row(&self, tag: RowTag) -> Option<&ConstraintRow> {
        self.tags
            .iter()
            .position(|&t| t == tag)
            .map(|i| &self.program.constraints[i])
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.program.objective.value(x)
    }

    pub fn solve(&self, warm: &WarmStart, opts: &SolverOptions) -> SubproblemSolution {
        subsolver::solve(&self.program, warm, opts)
    }
}

/// Floor on the secrecy auxiliary `φ` implied by the outage target.
pub fn phi_floor(cfg: &SystemConfig, eve_rate_param: f64) -> f64 {
    secrecy_threshold(cfg, eve_rate_param) / cfg.noise_eve
}

/// Upper bound on any sensible transmit power: spending more than the
/// all-local energy on the air cannot beat computing everything locally.
fn power_cap(cfg: &SystemConfig, anchor: &Allocation) -> f64 {
    let all_local: f64 = cfg
        .users
        .iter()
        .map(|u| local_energy(u, u.task_bits, cfg.deadline))
        .sum();
    let widest = anchor.power.iter().copied().fold(0.0, f64::max);
    (2.0 * all_local / cfg.deadline).max(1.5 * widest).max(1e-6)
}

/// Builds the convex subproblem around `anchor`.
pub fn linearize(
    anchor: &Iterate,
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
    al: &AlMultipliers,
) -> Result<ConvexSubproblem> {
    let k_users = ch.num_users();
    check_len("config users", k_users, cfg.num_users())?;
    check_len("anchor power", k_users, anchor.alloc.power.len())?;
    if !(al.rho > 0.0) {
        return Err(Error::InvalidConfig {
            field: "rho",
            reason: format!("penalty must be positive, got {}", al.rho),
        });
    }
    let layout = Layout::new(k_users, variant, cfg.bits_per_rate());
    let raw_anchor = layout.pack(anchor);
    if raw_anchor.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig {
            field: "anchor",
            reason: "anchor contains non-finite values".into(),
        });
    }
    let at = |k: usize, kind: VarKind| layout.at(k, kind);
    let a = &anchor.alloc;
    let aux = &anchor.aux;
    let tau = &ch.tau;
    let p0: Vec<f64> = a.power.iter().map(|&p| p.max(ANCHOR_FLOOR)).collect();

    let mut prog = Program::new(layout.len());
    let mut tags = Vec::new();
    let mut push = |tag: RowTag, row: ConstraintRow| {
        tags.push(tag);
        prog.constraints.push(row);
    };

    let p_cap = power_cap(cfg, a);
    for k in 0..k_users {
        let var = |kind| Var { kind, user: k };
        let (l, p, rt, rs, b, pi) = (
            at(k, VarKind::LocalBits),
            at(k, VarKind::Power),
            at(k, VarKind::RateCodeword),
            at(k, VarKind::RateSecret),
            at(k, VarKind::SinrLb),
            at(k, VarKind::InterferenceUb),
        );
        let task = cfg.users[k].task_bits / layout.bits_unit;
        let b_cap = tau[k] * p_cap;
        // At least 2 so a lone user (π ≡ 1) still has an interior.
        let pi_cap = 1.0
            + ((0..k_users)
                .filter(|&j| j != k)
                .map(|j| tau[j])
                .sum::<f64>()
                * p_cap)
                .max(1.0);

        push(
            RowTag::OffloadRate(k),
            ConstraintRow::affine(AffineExpr::new(vec![(l, -1.0), (rs, -1.0)], task)),
        );
        push(
            RowTag::Redundancy(k),
            ConstraintRow::affine(AffineExpr::new(vec![(rs, 1.0), (rt, -1.0)], 0.0)),
        );
        push(
            RowTag::DecodeRate(k),
            ConstraintRow {
                affine: AffineExpr::new(vec![(rt, 1.0)], 0.0),
                curvature: Curvature::NegLog2OnePlus { var: b, scale: 1.0 },
            },
        );

        // b·π ≤ τ p
        let (b0, pi0) = (aux.sinr_lb[k], aux.interference_ub[k]);
        push(
            RowTag::SinrProduct(k),
            ConstraintRow::affine(AffineExpr::new(
                vec![(b, pi0), (pi, b0), (p, -tau[k])],
                -b0 * pi0,
            )),
        );

        // 1 + Σ_l β_{k,l} τ_l p_l ≤ π
        let mut row = AffineExpr::new(vec![(pi, -1.0)], 1.0);
        for j in (0..k_users).filter(|&j| j != k) {
            let pj = at(j, VarKind::Power);
            if variant.optimize_order {
                let beta = at(k, VarKind::Order(j));
                let beta0 = a.order[(k, j)];
                row.terms.push((pj, tau[j] * beta0));
                row.terms.push((beta, tau[j] * p0[j]));
                row.constant -= tau[j] * beta0 * p0[j];
            } else if a.order[(k, j)] != 0.0 {
                row.terms.push((pj, tau[j] * a.order[(k, j)]));
            }
        }
        push(RowTag::Interference(k), ConstraintRow::affine(row));

        if variant.secrecy {
            let (ds, phi, u, w) = (
                at(k, VarKind::DeltaSecret),
                at(k, VarKind::Phi),
                at(k, VarKind::U),
                at(k, VarKind::W),
            );
            let ds0 = aux.delta_s[k];
            let phi_min = phi_floor(cfg, ch.eve_rate_param[k]);
            // A silent user has φ = 0 at its tight anchor, which would make
            // the φ·w expansion vacuous; φ is bounded below by φ_min anyway.
            let phi0 = aux.phi[k].max(phi_min);
            let u0 = aux.u[k];
            let w0 = aux.w[k].max(ANCHOR_FLOOR);
            let ds_cap = 1.0 + b_cap;
            let u_cap = pi_cap * ds_cap;

            push(
                RowTag::SecretLevel(k),
                ConstraintRow {
                    affine: AffineExpr::new(vec![(ds, -1.0)], 0.0),
                    curvature: Curvature::Exp2 { var: rs },
                },
            );
            // π·δ_s ≤ u
            push(
                RowTag::SecretProduct(k),
                ConstraintRow::affine(AffineExpr::new(
                    vec![(pi, ds0), (ds, pi0), (u, -1.0)],
                    -pi0 * ds0,
                )),
            );
            // φ·w ≤ π + τ p − u
            push(
                RowTag::PhiProduct(k),
                ConstraintRow::affine(AffineExpr::new(
                    vec![(w, phi0), (phi, w0), (pi, -1.0), (p, -tau[k]), (u, 1.0)],
                    -phi0 * w0,
                )),
            );
            // p·u ≤ w
            push(
                RowTag::PowerProduct(k),
                ConstraintRow::affine(AffineExpr::new(
                    vec![(u, p0[k]), (p, u0), (w, -1.0)],
                    -p0[k] * u0,
                )),
            );
            push(
                RowTag::SecrecyFloor(k),
                ConstraintRow::affine(AffineExpr::new(vec![(phi, -1.0)], phi_min)),
            );
            let phi_cap = 2.0 * phi0.max(phi_min) + 1.0;
            push(RowTag::Upper(var(VarKind::DeltaSecret)), upper(ds, ds_cap));
            push(RowTag::Upper(var(VarKind::Phi)), upper(phi, phi_cap));
            push(RowTag::Lower(var(VarKind::U)), lower(u, 0.0));
            push(RowTag::Upper(var(VarKind::U)), upper(u, u_cap));
            push(RowTag::Lower(var(VarKind::W)), lower(w, 0.0));
            push(RowTag::Upper(var(VarKind::W)), upper(w, p_cap * u_cap));
        }

        // The boxes on l and R_s are twice as wide as the physical ones. A
        // user that cannot reach a positive secret rate is only feasible at
        // l = L, R_s = 0, p = 0, where the secrecy chain has no interior;
        // the widened boxes restore one. Points outside the physical boxes
        // cost more energy than the corner and are never optimal.
        let l_cap = 2.0 * task.max(1.0 / layout.bits_unit);
        push(RowTag::Lower(var(VarKind::LocalBits)), lower(l, 0.0));
        push(RowTag::Upper(var(VarKind::LocalBits)), upper(l, l_cap));
        push(RowTag::Lower(var(VarKind::Power)), lower(p, 0.0));
        push(RowTag::Upper(var(VarKind::Power)), upper(p, p_cap));
        push(RowTag::Lower(var(VarKind::RateSecret)), lower(rs, -l_cap));
        push(RowTag::Lower(var(VarKind::SinrLb)), lower(b, 0.0));
        push(RowTag::Upper(var(VarKind::SinrLb)), upper(b, b_cap));
        push(RowTag::Lower(var(VarKind::InterferenceUb)), lower(pi, 1.0));
        push(
            RowTag::Upper(var(VarKind::InterferenceUb)),
            upper(pi, pi_cap),
        );
    }

    // Decoding order consistency, scaled by τ_l: β_{k,l} τ_l p_l ≤ τ_k p_k.
    for (k, j) in a.order.off_diagonal() {
        let (pk, pj) = (at(k, VarKind::Power), at(j, VarKind::Power));
        if variant.optimize_order {
            let beta = at(k, VarKind::Order(j));
            let beta0 = a.order[(k, j)];
            push(
                RowTag::OrderProduct(k, j),
                ConstraintRow::affine(AffineExpr::new(
                    vec![(beta, tau[j] * p0[j]), (pj, tau[j] * beta0), (pk, -tau[k])],
                    -tau[j] * beta0 * p0[j],
                )),
            );
            let v = Var {
                kind: VarKind::Order(j),
                user: k,
            };
            push(RowTag::Lower(v), lower(beta, 0.0));
            push(RowTag::Upper(v), upper(beta, 1.0));
        } else if a.order[(k, j)] != 0.0 {
            push(
                RowTag::OrderProduct(k, j),
                ConstraintRow::affine(AffineExpr::new(
                    vec![(pj, tau[j] * a.order[(k, j)]), (pk, -tau[k])],
                    0.0,
                )),
            );
        }
    }

    // Objective: sum energy plus the augmented-Lagrangian penalties.
    for k in 0..k_users {
        let u = &cfg.users[k];
        let c = u.cycles_per_bit * layout.bits_unit;
        let coef = u.capacitance * c * c * c / (cfg.deadline * cfg.deadline);
        prog.objective
            .cubics
            .push((at(k, VarKind::LocalBits), coef));
        prog.objective
            .linear
            .terms
            .push((at(k, VarKind::Power), cfg.deadline));
    }
    if variant.optimize_order {
        prog.objective.squares = penalty_terms(&layout, &aux.mu, al);
    }

    Ok(ConvexSubproblem {
        layout,
        program: prog,
        tags,
        anchor: raw_anchor,
    })
}

fn lower(var: usize, bound: f64) -> ConstraintRow {
    ConstraintRow::affine(AffineExpr::new(vec![(var, -1.0)], bound))
}

fn upper(var: usize, bound: f64) -> ConstraintRow {
    ConstraintRow::affine(AffineExpr::new(vec![(var, 1.0)], -bound))
}

/// The three penalty families, each `1/(2ρ)·(residual + ρλ)²`.
fn penalty_terms(
    layout: &Layout,
    mu: &PairMatrix<f64>,
    al: &AlMultipliers,
) -> Vec<(f64, AffineExpr)> {
    let weight = 0.5 / al.rho;
    let rho = al.rho;
    let beta = |k, l| layout.at(k, VarKind::Order(l));
    let mut out = Vec::new();
    for (k, l) in mu.off_diagonal() {
        out.push((
            weight,
            AffineExpr::new(
                vec![(beta(k, l), 1.0)],
                -mu[(k, l)] + rho * al.lambda1[(k, l)],
            ),
        ));
    }
    for (k, l) in mu.off_diagonal() {
        out.push((
            weight,
            AffineExpr::new(
                vec![(beta(k, l), 1.0 - mu[(k, l)])],
                rho * al.lambda2[(k, l)],
            ),
        ));
    }
    for (k, l) in lower_pairs(layout.users) {
        out.push((
            weight,
            AffineExpr::new(
                vec![(beta(k, l), 1.0), (beta(l, k), 1.0)],
                -1.0 + rho * al.lambda3[(k, l)],
            ),
        ));
    }
    out
}

/// Augmented-Lagrangian penalty value at `(β, μ)`.
pub fn al_penalty(order: &PairMatrix<f64>, mu: &PairMatrix<f64>, al: &AlMultipliers) -> f64 {
    let rho = al.rho;
    let sq = |v: f64| v * v;
    let mut total = 0.0;
    for (k, l) in order.off_diagonal() {
        let b = order[(k, l)];
        let m = mu[(k, l)];
        total += sq(b - m + rho * al.lambda1[(k, l)]);
        total += sq(b * (1.0 - m) + rho * al.lambda2[(k, l)]);
    }
    for (k, l) in lower_pairs(order.dim()) {
        total += sq(order[(k, l)] + order[(l, k)] - 1.0 + rho * al.lambda3[(k, l)]);
    }
    total * 0.5 / rho
}

/// Equality-constraint residuals, blockwise: `β − μ` and `β(1 − μ)` over
/// ordered pairs, then `β_{k,l} + β_{l,k} − 1` over pairs `l < k`. Returns
/// the vector and its ∞-norm.
pub fn violation_vector(order: &PairMatrix<f64>, mu: &PairMatrix<f64>) -> (Vec<f64>, f64) {
    let mut g = Vec::new();
    for (k, l) in order.off_diagonal() {
        g.push(order[(k, l)] - mu[(k, l)]);
    }
    for (k, l) in order.off_diagonal() {
        g.push(order[(k, l)] * (1.0 - mu[(k, l)]));
    }
    for (k, l) in lower_pairs(order.dim()) {
        g.push(order[(k, l)] + order[(l, k)] - 1.0);
    }
    let norm = g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    (g, norm)
}

/// Auxiliary variables set tight at an allocation.
pub fn tight_aux(alloc: &Allocation, ch: &ChannelRealization) -> Result<AuxPoint> {
    let k = ch.num_users();
    let sinr = sinr_vector(&alloc.power, &alloc.order, ch)?;
    let mut aux = AuxPoint {
        sinr_lb: sinr,
        interference_ub: vec![0.0; k],
        phi: vec![0.0; k],
        u: vec![0.0; k],
        w: vec![0.0; k],
        delta_s: vec![0.0; k],
        mu: alloc.order.clone(),
    };
    for i in 0..k {
        let p = alloc.power[i];
        let pi = 1.0 + interference(&alloc.power, &alloc.order, ch, i);
        let ds = alloc.rate_secret[i].exp2();
        let u = pi * ds;
        let w = p * u;
        aux.interference_ub[i] = pi;
        aux.delta_s[i] = ds;
        aux.u[i] = u;
        aux.w[i] = w;
        aux.phi[i] = if w > 0.0 {
            (pi + ch.tau[i] * p - u) / w
        } else {
            0.0
        };
    }
    Ok(aux)
}

/// Smallest power meeting `rate` for user `k` given everyone else, by
/// bisection on the secrecy-constrained rate. `None` when no finite power
/// reaches it.
fn min_power_for_rate(
    power: &mut [f64],
    order: &PairMatrix<f64>,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    k: usize,
    rate: f64,
) -> Result<Option<f64>> {
    const POWER_LIMIT: f64 = 1e6;
    let eval = |p: f64, power: &mut [f64]| -> Result<f64> {
        power[k] = p;
        max_secret_rate(power, order, ch, cfg, k)
    };
    let mut lo = 0.0;
    let mut hi = 1e-6;
    while eval(hi, power)? < rate {
        lo = hi;
        hi *= 2.0;
        if hi > POWER_LIMIT {
            return Ok(None);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid, power)? >= rate {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    power[k] = hi;
    Ok(Some(hi))
}

/// Deterministic feasible starting point.
///
/// Half of every task is computed locally and users are decoded in
/// descending channel gain. Powers are the smallest meeting the
/// secrecy-constrained offloading rate, computed in reverse decoding order
/// (each user only sees interference from users decoded after it), then
/// raised where needed so received powers follow the order. Users that
/// cannot reach their rate at any power compute everything locally and stay
/// silent: a positive power with nothing to hide would still count as an
/// outage.
pub fn init_point(
    cfg: &SystemConfig,
    ch: &ChannelRealization,
    variant: Variant,
) -> Result<Iterate> {
    cfg.validate()?;
    let k = ch.num_users();
    check_len("config users", k, cfg.num_users())?;
    let cfg_eff = if variant.secrecy {
        cfg.clone()
    } else {
        // ε → 1 removes the secrecy penalty from the rate.
        let mut c = cfg.clone();
        c.epsilon = 1.0 - f64::EPSILON;
        c
    };
    let unit = cfg.bits_per_rate();
    let mut local: Vec<f64> = cfg.users.iter().map(|u| 0.5 * u.task_bits).collect();
    let order = descending_gain_order::<f64>(k);
    let mut power = vec![0.0; k];
    // Last-decoded users see no interference, so go backwards.
    for user in (0..k).rev() {
        let need = (cfg.users[user].task_bits - local[user]) / unit;
        let p = if need <= 0.0 {
            Some(0.0)
        } else {
            min_power_for_rate(&mut power, &order, ch, &cfg_eff, user, need)?
        };
        power[user] = match p {
            Some(p) => p,
            None => {
                local[user] = cfg.users[user].task_bits;
                0.0
            }
        };
        // A user decoded earlier must be received at least as strongly.
        if power[user] > 0.0 {
            let floor = (user + 1..k)
                .map(|j| ch.tau[j] * power[j] / ch.tau[user])
                .fold(0.0, f64::max);
            power[user] = power[user].max(floor);
        }
    }

    let sinr = sinr_vector(&power, &order, ch)?;
    let rate_secret: Vec<f64> = (0..k)
        .map(|i| ((cfg.users[i].task_bits - local[i]) / unit).max(0.0))
        .collect();
    let alloc = Allocation {
        local_bits: local,
        power,
        rate_codeword: sinr
            .iter()
            .map(|g| g.ln_1p() / std::f64::consts::LN_2)
            .collect(),
        rate_secret,
        order,
    };
    let aux = tight_aux(&alloc, ch)?;
    Ok(Iterate { alloc, aux })
}
