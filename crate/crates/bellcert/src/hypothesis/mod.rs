//! Conic descriptions of composite-hypothesis correlation sets: the local
//! polytope, moment-matrix outer approximations of the quantum set, and
//! property-capped variants (negativity, biseparability, swap fidelity,
//! Bell value).

pub mod moment;
pub mod words;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_4, SQRT_2};

use thiserror::Error;

use crate::functionals::BellFunctional;
use crate::scenario::{enumerate_deterministic_vertices, Scenario, ScenarioError};

use self::moment::{Cell, MomentStructure};
use self::words::{Gen, Word};

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("negativity set requires a bipartite scenario")]
    NotBipartite,
    #[error("biseparable set requires a tripartite scenario")]
    NotTripartite,
    #[error("fidelity set requires the 2-setting 2-outcome bipartite scenario")]
    NotChsh,
    #[error("only the maximally entangled target (theta = pi/4) is supported")]
    UnsupportedTarget,
    #[error("cap {0} outside the meaningful range [{1}, {2}]")]
    BadCap(f64, f64, f64),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// A real affine expression `constant + sum coeff * x[var]`.
#[derive(Debug, Clone, Default)]
pub struct AffExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, c: f64) -> Self {
        Self {
            terms: vec![(i, c)],
            constant: 0.0,
        }
    }

    pub fn push(&mut self, i: usize, c: f64) {
        self.terms.push((i, c));
    }

    pub fn add_scaled(&mut self, other: &AffExpr, s: f64) {
        self.constant += s * other.constant;
        for &(i, c) in &other.terms {
            self.terms.push((i, s * c));
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.constant *= s;
        for t in out.terms.iter_mut() {
            t.1 *= s;
        }
        out
    }

    /// Merges duplicate variables and drops vanishing coefficients.
    pub fn compress(&mut self) {
        self.terms.sort_by_key(|&(i, _)| i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|&(_, c)| c != 0.0);
        self.terms = out;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|&(_, c)| c == 0.0)
    }
}

/// A dense symmetric matrix of affine expressions, required PSD.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub dim: usize,
    /// Row-major entries, length `dim * dim`.
    pub entries: Vec<AffExpr>,
}

/// Variable ids for the moments of one operator (state or decomposition
/// component), one real variable per canonical moment.
///
/// Moments are taken real without loss of generality: conjugating a
/// quantum realization preserves its behavior and every constraint used
/// here, so by convexity the imaginary parts can be averaged away. This
/// halves the PSD block dimension relative to the complex embedding.
#[derive(Debug, Clone)]
struct MomentVars {
    re: Vec<usize>,
}

impl MomentVars {
    fn alloc(st: &MomentStructure, next: &mut usize) -> Self {
        let re = (*next..*next + st.n_moments()).collect();
        *next += st.n_moments();
        Self { re }
    }
}

/// Declarative conic description of a composite hypothesis's correlation
/// set.
#[derive(Debug, Clone)]
pub struct HypothesisSet {
    pub tag: String,
    pub scenario: Scenario,
    pub n_vars: usize,
    /// Matrix-valued affine expressions required PSD (real symmetric;
    /// complex Hermitian blocks arrive pre-embedded).
    pub psd: Vec<PsdBlock>,
    /// Affine expressions required to vanish.
    pub eq: Vec<AffExpr>,
    /// Affine expressions required nonnegative.
    pub nonneg: Vec<AffExpr>,
    /// Extraction map: one expression per behavior-table entry.
    pub behavior: Vec<AffExpr>,
    /// Named linear forms of interest (e.g. "negativity", "fidelity").
    pub scalars: BTreeMap<String, AffExpr>,
}

impl HypothesisSet {
    /// Diagnostic text dump for CLI inspection.
    pub fn explain(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("hypothesis set: {}\n", self.tag));
        s.push_str(&format!(
            "scenario: {} parties, {} settings combos, {} outcome combos\n",
            self.scenario.parties(),
            self.scenario.n_setting_combos(),
            self.scenario.n_outcome_combos()
        ));
        s.push_str(&format!("variables: {}\n", self.n_vars));
        s.push_str(&format!(
            "psd blocks: {} (dims: {})\n",
            self.psd.len(),
            self.psd
                .iter()
                .map(|b| b.dim.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        s.push_str(&format!(
            "equalities: {}, inequalities: {}\n",
            self.eq.len(),
            self.nonneg.len()
        ));
        if !self.scalars.is_empty() {
            s.push_str(&format!(
                "tracked scalars: {}\n",
                self.scalars.keys().cloned().collect::<Vec<_>>().join(", ")
            ));
        }
        s
    }
}

/// The (real symmetric) moment matrix of a linear combination of
/// operators, optionally partially transposed on the masked parties.
fn moment_matrix_block(
    st: &MomentStructure,
    combo: &[(f64, &MomentVars)],
    pt_mask: Option<&[bool]>,
) -> PsdBlock {
    let d = st.dim;
    let mut entries = vec![AffExpr::default(); d * d];
    for r in 0..d {
        for c in 0..d {
            let (rr, cc) = match pt_mask {
                Some(m) => st.pt_cell(r, c, m),
                None => (r, c),
            };
            if let Cell::Ref { id, .. } = st.cell(rr, cc) {
                let e = &mut entries[r * d + c];
                for &(w, vars) in combo {
                    e.push(vars.re[id], w);
                }
            }
        }
    }
    PsdBlock { dim: d, entries }
}

/// Collins-Gisin expansion of the projector `P(o|s)` for one party with
/// `d` outcomes: the last outcome is `identity - sum of the others`.
fn cg_expansion(s: usize, o: usize, d: usize) -> Vec<(Word, f64)> {
    if o + 1 < d {
        vec![(
            vec![Gen {
                setting: s as u8,
                outcome: o as u8,
            }],
            1.0,
        )]
    } else {
        let mut out = vec![(Word::new(), 1.0)];
        for k in 0..d - 1 {
            out.push((
                vec![Gen {
                    setting: s as u8,
                    outcome: k as u8,
                }],
                -1.0,
            ));
        }
        out
    }
}

/// Behavior-extraction expressions for a linear combination of operators:
/// each table entry as an affine form over moment variables.
fn behavior_exprs(st: &MomentStructure, combo: &[(f64, &MomentVars)]) -> Vec<AffExpr> {
    let sc = &st.scenario;
    let no = sc.n_outcome_combos();
    let mut out = vec![AffExpr::default(); sc.table_len()];
    for si in 0..sc.n_setting_combos() {
        let s = sc.settings_tuple(si);
        for oi in 0..no {
            let o = sc.outcomes_tuple(oi);
            let per_party: Vec<Vec<(Word, f64)>> = (0..sc.parties())
                .map(|p| cg_expansion(s[p], o[p], sc.outcomes_per_party()[p]))
                .collect();
            let expr = &mut out[si * no + oi];
            let mut stack = vec![(0usize, Vec::<Word>::new(), 1.0f64)];
            while let Some((p, key, sign)) = stack.pop() {
                if p == per_party.len() {
                    let (id, _) = st
                        .moment_of(&key)
                        .expect("behavior moments exist at every level");
                    assert!(st.moments[id].real);
                    for &(w, vars) in combo {
                        expr.push(vars.re[id], sign * w);
                    }
                    continue;
                }
                for (word, c) in &per_party[p] {
                    let mut k = key.clone();
                    k.push(word.clone());
                    stack.push((p + 1, k, sign * c));
                }
            }
            expr.compress();
        }
    }
    out
}

struct QuantumCore {
    st: MomentStructure,
    rho: MomentVars,
    set: HypothesisSet,
}

fn quantum_core(sc: &Scenario, level: usize, tag: String) -> QuantumCore {
    assert!((1..=3).contains(&level), "hierarchy level must be 1..=3");
    let st = MomentStructure::new(sc, level);
    let mut n_vars = 0;
    let rho = MomentVars::alloc(&st, &mut n_vars);
    let combo = [(1.0, &rho)];
    let mut trace = AffExpr::constant(-1.0);
    trace.push(rho.re[st.identity_id()], 1.0);
    let set = HypothesisSet {
        tag,
        scenario: sc.clone(),
        n_vars,
        psd: vec![moment_matrix_block(&st, &combo, None)],
        eq: vec![trace],
        nonneg: Vec::new(),
        behavior: behavior_exprs(&st, &combo),
        scalars: BTreeMap::new(),
    };
    QuantumCore { st, rho, set }
}

/// The level-`level` moment-matrix outer approximation of the quantum set.
pub fn build_quantum_set(sc: &Scenario, level: usize) -> HypothesisSet {
    quantum_core(sc, level, format!("quantum-set level {level}")).set
}

/// Real moment assignment of an explicit strategy, in the variable
/// layout shared by [`build_quantum_set`], [`build_fidelity_capped`],
/// and [`build_bell_capped`] (quantum) at the same scenario and level:
/// entry `i` is `Re tr(rho W_i)` for canonical moment word `W_i`.
/// Evaluating a set's scalar or behavior expressions at this vector
/// gives their value on the strategy itself.
pub fn strategy_assignment(
    strat: &crate::quantum::QuantumStrategy,
    sc: &Scenario,
    level: usize,
) -> Vec<f64> {
    let st = MomentStructure::new(sc, level);
    let word_op = |p: usize, w: &Word| -> crate::quantum::CMat {
        let d = strat.dims[p];
        let mut m = crate::quantum::CMat::identity(d, d);
        for g in w {
            m = &m * &strat.povms[p][g.setting as usize][g.outcome as usize];
        }
        m
    };
    st.moments
        .iter()
        .map(|info| {
            let mut op = word_op(0, &info.key[0]);
            for p in 1..info.key.len() {
                op = op.kronecker(&word_op(p, &info.key[p]));
            }
            (&strat.state * op).trace().re
        })
        .collect()
}

/// The local polytope: mixtures of deterministic vertices.
pub fn build_lhv(sc: &Scenario) -> Result<HypothesisSet, HypothesisError> {
    let vertices = enumerate_deterministic_vertices(sc)?;
    let n_vars = vertices.len();
    let mut norm = AffExpr::constant(-1.0);
    let mut nonneg = Vec::with_capacity(n_vars);
    for q in 0..n_vars {
        norm.push(q, 1.0);
        nonneg.push(AffExpr::var(q));
    }
    let behavior = (0..sc.table_len())
        .map(|cell| {
            let mut e = AffExpr::default();
            for (q, v) in vertices.iter().enumerate() {
                if v.table[cell] != 0.0 {
                    e.push(q, v.table[cell]);
                }
            }
            e
        })
        .collect();
    Ok(HypothesisSet {
        tag: "local hidden variables".into(),
        scenario: sc.clone(),
        n_vars,
        psd: Vec::new(),
        eq: vec![norm],
        nonneg,
        behavior,
        scalars: BTreeMap::new(),
    })
}

/// The set of behaviors compatible with negativity at most `cap`
/// (`None` leaves the trace of the negative part unconstrained so the
/// scalar can be optimized).
pub fn build_negativity_capped(
    sc: &Scenario,
    level: usize,
    cap: Option<f64>,
) -> Result<HypothesisSet, HypothesisError> {
    if sc.parties() != 2 {
        return Err(HypothesisError::NotBipartite);
    }
    build_negativity_capped_st(&MomentStructure::new(sc, level), cap)
}

/// Same as [`build_negativity_capped`] over an explicit moment structure,
/// allowing intermediate hierarchy levels via custom word bases.
pub fn build_negativity_capped_st(
    st: &MomentStructure,
    cap: Option<f64>,
) -> Result<HypothesisSet, HypothesisError> {
    let sc = &st.scenario;
    let level = st.level;
    if sc.parties() != 2 {
        return Err(HypothesisError::NotBipartite);
    }
    if let Some(n0) = cap {
        if n0 < 0.0 {
            return Err(HypothesisError::BadCap(n0, 0.0, f64::INFINITY));
        }
    }
    let mut n_vars = 0;
    let sp = MomentVars::alloc(&st, &mut n_vars);
    let sm = MomentVars::alloc(&st, &mut n_vars);
    let rho = [(1.0, &sp), (-1.0, &sm)];
    let mask = [true, false];

    let id1 = st.identity_id();
    let mut trace = AffExpr::constant(-1.0);
    trace.push(sp.re[id1], 1.0);
    trace.push(sm.re[id1], -1.0);

    let neg = AffExpr::var(sm.re[id1]);
    let mut nonneg = vec![neg.clone()];
    if let Some(n0) = cap {
        let mut capc = AffExpr::constant(n0);
        capc.push(sm.re[id1], -1.0);
        nonneg.push(capc);
    }

    let mut scalars = BTreeMap::new();
    scalars.insert("negativity".to_string(), neg);

    Ok(HypothesisSet {
        tag: match cap {
            Some(n0) => format!("negativity <= {n0} (level {level})"),
            None => format!("negativity decomposition (level {level})"),
        },
        scenario: sc.clone(),
        n_vars,
        psd: vec![
            moment_matrix_block(&st, &rho, None),
            moment_matrix_block(&st, &[(1.0, &sp)], Some(&mask)),
            moment_matrix_block(&st, &[(1.0, &sm)], Some(&mask)),
        ],
        eq: vec![trace],
        nonneg,
        behavior: behavior_exprs(&st, &rho),
        scalars,
    })
}

/// The biseparable relaxation for three parties: a three-component
/// decomposition with a partial-transpose PSD block per bipartition.
pub fn build_biseparable(sc: &Scenario, level: usize) -> Result<HypothesisSet, HypothesisError> {
    if sc.parties() != 3 {
        return Err(HypothesisError::NotTripartite);
    }
    let st = MomentStructure::new(sc, level);
    let mut n_vars = 0;
    let comps: Vec<MomentVars> = (0..3).map(|_| MomentVars::alloc(&st, &mut n_vars)).collect();
    let rho: Vec<(f64, &MomentVars)> = comps.iter().map(|c| (1.0, c)).collect();

    let id1 = st.identity_id();
    let mut trace = AffExpr::constant(-1.0);
    let mut psd = Vec::new();
    for (p, comp) in comps.iter().enumerate() {
        trace.push(comp.re[id1], 1.0);
        let mut mask = [false; 3];
        mask[p] = true;
        psd.push(moment_matrix_block(&st, &[(1.0, comp)], None));
        psd.push(moment_matrix_block(&st, &[(1.0, comp)], Some(&mask)));
    }

    Ok(HypothesisSet {
        tag: format!("biseparable (level {level})"),
        scenario: sc.clone(),
        n_vars,
        psd,
        eq: vec![trace],
        nonneg: Vec::new(),
        behavior: behavior_exprs(&st, &rho),
        scalars: BTreeMap::new(),
    })
}

/// Operator polynomial for one party: reduced words with real weights.
type OpPoly = HashMap<Word, f64>;

fn poly_from(terms: &[(Word, f64)]) -> OpPoly {
    let mut p = OpPoly::new();
    for (w, c) in terms {
        *p.entry(w.clone()).or_insert(0.0) += c;
    }
    p
}

fn poly_mul(a: &OpPoly, b: &OpPoly) -> OpPoly {
    let mut out = OpPoly::new();
    for (wa, ca) in a {
        for (wb, cb) in b {
            if let Some(w) = words::multiply(wa, wb) {
                *out.entry(w).or_insert(0.0) += ca * cb;
            }
        }
    }
    out
}

fn poly_lin(terms: &[(&OpPoly, f64)]) -> OpPoly {
    let mut out = OpPoly::new();
    for (p, s) in terms {
        for (w, c) in *p {
            *out.entry(w.clone()).or_insert(0.0) += s * c;
        }
    }
    out
}

/// The swap-fidelity linear form `<psi_MES| rho_SWAP |psi_MES>` over the
/// moment variables: per party the extraction Kraus operators are
/// `K_0 = (1+Z)/2` and `K_1 = X (1-Z)/2` with `Z_A = A_0`, `X_A = A_1`,
/// `Z_B = (B_0+B_1)/sqrt(2)`, `X_B = (B_0-B_1)/sqrt(2)`, and
/// `F = 1/2 sum_{k,i} <(K_k^dag K_i) (x) (K_k^dag K_i)>`.
fn swap_fidelity_expr(st: &MomentStructure, rho: &MomentVars) -> AffExpr {
    let proj = |s: u8| {
        vec![Gen {
            setting: s,
            outcome: 0,
        }]
    };
    let one = poly_from(&[(Word::new(), 1.0)]);
    // Dichotomic observables as polynomials: O_s = 2 P(0|s) - 1.
    let obs = |s: u8| poly_from(&[(proj(s), 2.0), (Word::new(), -1.0)]);
    let kraus = |z: &OpPoly, x: &OpPoly| {
        let k0 = poly_lin(&[(&one, 0.5), (z, 0.5)]);
        let k1 = poly_mul(x, &poly_lin(&[(&one, 0.5), (z, -0.5)]));
        [k0, k1]
    };
    let ka = kraus(&obs(0), &obs(1));
    let (b0, b1) = (obs(0), obs(1));
    let zb = poly_lin(&[(&b0, 1.0 / SQRT_2), (&b1, 1.0 / SQRT_2)]);
    let xb = poly_lin(&[(&b0, 1.0 / SQRT_2), (&b1, -1.0 / SQRT_2)]);
    let kb = kraus(&zb, &xb);

    let mut expr = AffExpr::default();
    let mut im_acc: HashMap<usize, f64> = HashMap::new();
    for k in 0..2 {
        for i in 0..2 {
            let ma = poly_mul(&poly_adjoint(&ka[k]), &ka[i]);
            let mb = poly_mul(&poly_adjoint(&kb[k]), &kb[i]);
            for (wa, ca) in &ma {
                for (wb, cb) in &mb {
                    let coeff = 0.5 * ca * cb;
                    let key = vec![wa.clone(), wb.clone()];
                    let (id, conj) = st
                        .moment_of(&key)
                        .expect("swap-fidelity moments exist at level >= 2");
                    expr.push(rho.re[id], coeff);
                    if !st.moments[id].real {
                        *im_acc.entry(id).or_insert(0.0) += if conj { -coeff } else { coeff };
                    }
                }
            }
        }
    }
    // The total operator is Hermitian, so the imaginary parts must cancel.
    let max_im = im_acc.values().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(
        max_im < 1e-9,
        "imaginary parts of the swap-fidelity form failed to cancel: {max_im}"
    );
    expr.compress();
    expr
}

fn poly_adjoint(p: &OpPoly) -> OpPoly {
    p.iter().map(|(w, &c)| (words::adjoint(w), c)).collect()
}

/// The quantum set intersected with a swap-fidelity cap towards the
/// maximally entangled two-qubit target (`theta = pi/4` only).
pub fn build_fidelity_capped(
    sc: &Scenario,
    level: usize,
    theta: f64,
    cap: Option<f64>,
) -> Result<HypothesisSet, HypothesisError> {
    if sc != &Scenario::chsh() {
        return Err(HypothesisError::NotChsh);
    }
    if (theta - FRAC_PI_4).abs() > 1e-12 {
        return Err(HypothesisError::UnsupportedTarget);
    }
    assert!(level >= 2, "swap fidelity needs hierarchy level >= 2");
    if let Some(f0) = cap {
        if !(0.0..=1.0).contains(&f0) {
            return Err(HypothesisError::BadCap(f0, 0.0, 1.0));
        }
    }
    let mut core = quantum_core(
        sc,
        level,
        match cap {
            Some(f0) => format!("swap fidelity <= {f0} (level {level})"),
            None => format!("swap fidelity tracking (level {level})"),
        },
    );
    let fid = swap_fidelity_expr(&core.st, &core.rho);
    if let Some(f0) = cap {
        let mut capc = fid.scaled(-1.0);
        capc.constant += f0;
        core.set.nonneg.push(capc);
    }
    core.set.scalars.insert("fidelity".to_string(), fid);
    Ok(core.set)
}

/// The set of behaviors with functional value at most `cap`, intersected
/// with either the level-`level` quantum relaxation or the nonsignaling
/// polytope.
pub fn build_bell_capped(
    f: &BellFunctional,
    cap: f64,
    quantum: bool,
    level: usize,
) -> HypothesisSet {
    let sc = &f.scenario;
    let (mut set, value) = if quantum {
        let core = quantum_core(
            sc,
            level,
            format!("{} <= {cap} (quantum, level {level})", f.name),
        );
        let mut value = AffExpr::default();
        for (cell, &beta) in f.coefficients.iter().enumerate() {
            if beta != 0.0 {
                value.add_scaled(&core.set.behavior[cell], beta);
            }
        }
        value.compress();
        (core.set, value)
    } else {
        // Nonsignaling polytope: the table entries are the variables.
        let n_vars = sc.table_len();
        let no = sc.n_outcome_combos();
        let mut eq = Vec::new();
        for si in 0..sc.n_setting_combos() {
            let mut norm = AffExpr::constant(-1.0);
            for oi in 0..no {
                norm.push(si * no + oi, 1.0);
            }
            eq.push(norm);
        }
        // Marginal of party q must not depend on party q's setting.
        for q in 0..sc.parties() {
            for si in 0..sc.n_setting_combos() {
                let s = sc.settings_tuple(si);
                if s[q] == 0 {
                    continue;
                }
                let mut s0 = s.clone();
                s0[q] = 0;
                for oi in 0..no {
                    let o = sc.outcomes_tuple(oi);
                    if o[q] != 0 {
                        continue;
                    }
                    let mut e = AffExpr::default();
                    let mut oo = o.clone();
                    for k in 0..sc.outcomes_per_party()[q] {
                        oo[q] = k;
                        e.push(sc.flat_index(&s, &oo), 1.0);
                        e.push(sc.flat_index(&s0, &oo), -1.0);
                    }
                    eq.push(e);
                }
            }
        }
        let nonneg = (0..n_vars).map(AffExpr::var).collect();
        let behavior = (0..n_vars).map(AffExpr::var).collect();
        let mut value = AffExpr::default();
        for (cell, &beta) in f.coefficients.iter().enumerate() {
            if beta != 0.0 {
                value.push(cell, beta);
            }
        }
        let set = HypothesisSet {
            tag: format!("{} <= {cap} (nonsignaling)", f.name),
            scenario: sc.clone(),
            n_vars,
            psd: Vec::new(),
            eq,
            nonneg,
            behavior,
            scalars: BTreeMap::new(),
        };
        (set, value)
    };
    let mut capc = value.scaled(-1.0);
    capc.constant += cap;
    set.nonneg.push(capc);
    set.scalars.insert("bell".to_string(), value);
    set
}
