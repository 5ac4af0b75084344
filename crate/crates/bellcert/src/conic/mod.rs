//! Conic solving: lowering hypothesis sets to cone programs, feasibility
//! and membership checks, linear-form optimization, and the
//! Kullback-Leibler projection used by the prediction-based-ratio
//! protocol.

pub mod backend;

pub use backend::ClarabelBackend;

use crate::functionals::BellFunctional;
use crate::hypothesis::{AffExpr, HypothesisSet, PsdBlock};
use crate::scenario::{Behavior, SettingsDistribution};

/// Cells with effective weight below this threshold are excluded from the
/// KL objective (the `0 ln 0 = 0` convention).
const KL_WEIGHT_CUT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Optimal,
    /// Reduced-accuracy solution; treated as usable.
    AlmostOptimal,
    Infeasible,
    /// Anything else: max iterations, numerical error, unboundedness.
    Failed(String),
}

impl SolveStatus {
    pub fn is_usable(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::AlmostOptimal)
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Primal objective value of the lowered minimization problem.
    pub objective: f64,
    pub x: Vec<f64>,
}

/// A cone program `min c'x` over the intersection of affine equalities,
/// nonnegativity rows, exponential cones and PSD blocks.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub zero: Vec<AffExpr>,
    pub nonneg: Vec<AffExpr>,
    /// Each triple `(u, v, w)` requires `v exp(u/v) <= w`.
    pub exp: Vec<[AffExpr; 3]>,
    pub psd: Vec<PsdBlock>,
}

/// A conic solver backend. Implementations must be stateless per solve so
/// problems can be dispatched concurrently.
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, p: &ConicProblem) -> ConicSolution;
}

/// Selects a backend by name (`BELLCERT_BACKEND` in the CLI); only
/// "clarabel" is currently implemented.
pub fn backend_by_name(name: &str) -> Option<Box<dyn ConicBackend>> {
    match name {
        "clarabel" => Some(Box::new(ClarabelBackend::default())),
        _ => None,
    }
}

fn base_problem(h: &HypothesisSet) -> ConicProblem {
    ConicProblem {
        n_vars: h.n_vars,
        objective: vec![0.0; h.n_vars],
        zero: h.eq.clone(),
        nonneg: h.nonneg.clone(),
        exp: Vec::new(),
        psd: h.psd.clone(),
    }
}

fn pin_behavior(prob: &mut ConicProblem, h: &HypothesisSet, p: &Behavior) {
    assert_eq!(h.scenario, p.scenario, "behavior scenario mismatch");
    for (expr, &target) in h.behavior.iter().zip(&p.table) {
        let mut e = expr.clone();
        e.constant -= target;
        prob.zero.push(e);
    }
}

/// Whether the behavior lies in the hypothesis set. `Err` carries the
/// solver failure message when neither feasibility nor infeasibility was
/// established.
pub fn membership(
    h: &HypothesisSet,
    p: &Behavior,
    be: &dyn ConicBackend,
) -> Result<bool, String> {
    let mut prob = base_problem(h);
    pin_behavior(&mut prob, h, p);
    match be.solve(&prob).status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => Ok(true),
        SolveStatus::Infeasible => Ok(false),
        SolveStatus::Failed(m) => Err(m),
    }
}

/// Maximizes a Bell functional over the set. On success `objective` holds
/// the maximum value.
pub fn maximize_functional(
    f: &BellFunctional,
    h: &HypothesisSet,
    be: &dyn ConicBackend,
) -> ConicSolution {
    assert_eq!(f.scenario, h.scenario, "functional scenario mismatch");
    let mut prob = base_problem(h);
    let mut value = AffExpr::default();
    for (cell, &beta) in f.coefficients.iter().enumerate() {
        if beta != 0.0 {
            value.add_scaled(&h.behavior[cell], beta);
        }
    }
    value.compress();
    for &(i, c) in &value.terms {
        prob.objective[i] -= c;
    }
    let mut sol = be.solve(&prob);
    sol.objective = -sol.objective + value.constant;
    sol
}

/// Minimizes a named scalar of the set, optionally with the behavior
/// pinned to observed correlations. On success `objective` holds the
/// minimum.
pub fn minimize_scalar(
    h: &HypothesisSet,
    name: &str,
    pin: Option<&Behavior>,
    be: &dyn ConicBackend,
) -> ConicSolution {
    let expr = h
        .scalars
        .get(name)
        .unwrap_or_else(|| panic!("hypothesis set has no scalar {name:?}"));
    let mut prob = base_problem(h);
    if let Some(p) = pin {
        pin_behavior(&mut prob, h, p);
    }
    for &(i, c) in &expr.terms {
        prob.objective[i] += c;
    }
    let mut sol = be.solve(&prob);
    sol.objective += expr.constant;
    sol
}

/// Result of projecting observed frequencies onto a hypothesis set in
/// Kullback-Leibler divergence.
#[derive(Debug, Clone)]
pub struct KlProjection {
    /// `min_{P in S} D_KL(f || P)` in bits (clamped at zero).
    pub dkl_bits: f64,
    /// The projection `P*` (meaningful only when `status.is_usable()`).
    pub p_star: Behavior,
    pub status: SolveStatus,
}

/// Projects frequencies `f` onto the set in the KL divergence
/// `sum_s w(s) sum_o f(o|s) log2 (f(o|s) / P(o|s))`.
///
/// Lowering: maximize `sum c_i t_i` with `(t_i, 1, P_i)` in the
/// exponential cone, so `t_i <= ln P_i` and the optimum recovers
/// `sum c_i ln P*_i`.
pub fn kl_project(
    freq: &Behavior,
    weights: &SettingsDistribution,
    h: &HypothesisSet,
    be: &dyn ConicBackend,
) -> KlProjection {
    assert_eq!(freq.scenario, h.scenario, "frequency scenario mismatch");
    let sc = &h.scenario;
    let no = sc.n_outcome_combos();

    let mut cells = Vec::new();
    for si in 0..sc.n_setting_combos() {
        for oi in 0..no {
            let c = weights.weights[si] * freq.table[si * no + oi];
            if c > KL_WEIGHT_CUT {
                cells.push((si * no + oi, c));
            }
        }
    }

    let mut prob = base_problem(h);
    prob.objective.reserve(cells.len());
    for (k, &(cell, c)) in cells.iter().enumerate() {
        let t = h.n_vars + k;
        prob.objective.push(-c);
        prob.exp
            .push([AffExpr::var(t), AffExpr::constant(1.0), h.behavior[cell].clone()]);
    }
    prob.n_vars = h.n_vars + cells.len();

    let sol = be.solve(&prob);
    let obj_f: f64 = cells
        .iter()
        .map(|&(cell, c)| c * freq.table[cell].ln())
        .sum();
    // D (nats) = sum c ln f - max sum c ln P = sum c ln f + min objective.
    let dkl_bits = ((obj_f + sol.objective) / std::f64::consts::LN_2).max(0.0);

    let table = h.behavior.iter().map(|e| e.eval(&sol.x)).collect();
    KlProjection {
        dkl_bits,
        p_star: Behavior {
            scenario: sc.clone(),
            table,
        },
        status: sol.status,
    }
}
