//! End-to-end acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test --test acceptance`. Criteria run sequentially;
//! the process exits nonzero if any fail.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::time::Instant;

use bellcert::conic::{
    kl_project, maximize_functional, membership, minimize_scalar, ClarabelBackend, SolveStatus,
};
use bellcert::functionals::{evaluate, extrema, make_chsh, make_cglmp3, make_mermin};
use bellcert::hypothesis::moment::MomentStructure;
use bellcert::hypothesis::words::{enumerate_words, Gen};
use bellcert::hypothesis::{
    build_biseparable, build_fidelity_capped, build_lhv,
    build_negativity_capped, build_negativity_capped_st, build_quantum_set, strategy_assignment,
    HypothesisSet,
};
use bellcert::protocols::{
    kaniewski_fidelity, martingale_gain, martingale_pvalue, martingale_run, pbr_gain, pbr_run,
    threshold_scan, PbrVariant, KANIEWSKI_BETA_STAR,
};
use bellcert::quantum::{
    born_behavior, cglmp_optimal_zeta, cglmp_strategy, chsh_strategy, ghz_strategy,
    negativity_exact, product_00_strategy, CMat, QuantumStrategy,
};
use bellcert::scenario::{
    enumerate_deterministic_vertices, Behavior, Scenario, SettingsDistribution, TrialRecord,
};
use bellcert::trials::sample_trials;

use num_complex::Complex64;

const SQRT8: f64 = 2.0 * SQRT_2;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: &str) -> Outcome {
    if ok {
        Ok(detail.to_string())
    } else {
        Err(detail.to_string())
    }
}

fn near(x: f64, y: f64, tol: f64) -> bool {
    (x - y).abs() <= tol
}

fn solved_max(
    f: &bellcert::functionals::BellFunctional,
    h: &HypothesisSet,
    be: &ClarabelBackend,
) -> Result<f64, String> {
    let sol = maximize_functional(f, h, be);
    match sol.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => Ok(sol.objective),
        s => Err(format!("solve over {} failed: {s:?}", h.tag)),
    }
}

// ---------------------------------------------------------------------------
// 1. analytic bounds

fn criterion_1(be: &ClarabelBackend) -> Outcome {
    let chsh = make_chsh();
    let sc2 = Scenario::chsh();
    let lhv = solved_max(&chsh, &build_lhv(&sc2).map_err(|e| e.to_string())?, be)?;
    let q1 = solved_max(&chsh, &build_quantum_set(&sc2, 1), be)?;

    let mermin = make_mermin();
    let sc3 = Scenario::tripartite();
    let m_lhv = solved_max(&mermin, &build_lhv(&sc3).map_err(|e| e.to_string())?, be)?;
    let m_bisep = solved_max(
        &mermin,
        &build_biseparable(&sc3, 1).map_err(|e| e.to_string())?,
        be,
    )?;
    let m_q = solved_max(&mermin, &build_quantum_set(&sc3, 1), be)?;

    check(
        near(lhv, 2.0, 1e-6)
            && near(q1, SQRT8, 1e-6)
            && near(m_lhv, 2.0, 1e-6)
            && near(m_bisep, SQRT8, 1e-5)
            && near(m_q, 4.0, 1e-5),
        &format!(
            "CHSH lhv={lhv:.8} q1={q1:.8}; Mermin lhv={m_lhv:.8} bisep={m_bisep:.8} q={m_q:.8}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. GHZ/Mermin gain rates

fn criterion_2(be: &ClarabelBackend) -> Outcome {
    let mermin = make_mermin();
    let strat = ghz_strategy();
    let p = born_behavior(&strat).map_err(|e| e.to_string())?;
    let w = SettingsDistribution::mermin_support();
    let i_q = evaluate(&mermin, &p).map_err(|e| e.to_string())?;
    let b = extrema(&mermin);

    let g_sep = martingale_gain(i_q, 2.0, b).map_err(|e| e.to_string())?;
    let g_bisep = martingale_gain(i_q, SQRT8, b).map_err(|e| e.to_string())?;

    let sc3 = Scenario::tripartite();
    let lhv = build_lhv(&sc3).map_err(|e| e.to_string())?;
    let bisep = build_biseparable(&sc3, 1).map_err(|e| e.to_string())?;
    let gp_sep = pbr_gain(&p, &lhv, &w, be).map_err(|e| e.to_string())?;
    let gp_bisep = pbr_gain(&p, &bisep, &w, be).map_err(|e| e.to_string())?;

    let target_sep = (4.0f64 / 3.0).log2();
    check(
        near(g_sep, 0.415037, 1e-6)
            && near(g_sep, target_sep, 1e-9)
            && near(g_bisep, 0.228447, 1e-6)
            && near(gp_sep, g_sep, 1e-4)
            && near(gp_bisep, g_bisep, 1e-3),
        &format!(
            "mart sep={g_sep:.7} bisep={g_bisep:.7}; pbr sep={gp_sep:.7} bisep={gp_bisep:.7}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. KL projection vs brute-force vertex-mixture oracle

/// Minimizes `sum_c w_c P_c log2(P_c / Q(q)_c)` over mixtures `q` of the
/// deterministic vertices by mirror descent on the simplex, with a
/// Frank-Wolfe duality gap as the convergence certificate.
fn kl_oracle(p: &Behavior, w: &SettingsDistribution, vertices: &[Behavior]) -> f64 {
    let sc = &p.scenario;
    let no = sc.n_outcome_combos();
    let cells: Vec<(usize, f64)> = (0..sc.table_len())
        .filter_map(|cell| {
            let c = w.weights[cell / no] * p.table[cell];
            (c > 1e-14).then_some((cell, c))
        })
        .collect();

    let nv = vertices.len();
    let mut q = vec![1.0 / nv as f64; nv];
    let mix = |q: &[f64], cell: usize| -> f64 {
        vertices
            .iter()
            .zip(q)
            .map(|(v, &qi)| qi * v.table[cell])
            .sum()
    };
    // Objective in nats; converted to bits at the end.
    let objective = |q: &[f64]| -> f64 {
        cells
            .iter()
            .map(|&(cell, c)| c * (c / w.weights[cell / no] / mix(q, cell)).ln())
            .sum()
    };

    let eta = 0.5;
    for _ in 0..200_000 {
        // grad_v = -sum_c w_c P_c V_v(c) / Q(c)
        let mut grad = vec![0.0; nv];
        for &(cell, c) in &cells {
            let qc = mix(&q, cell);
            for (g, v) in grad.iter_mut().zip(vertices) {
                *g -= c * v.table[cell] / qc;
            }
        }
        // Frank-Wolfe gap: max_v <grad, q - e_v>.
        let inner: f64 = grad.iter().zip(&q).map(|(g, qi)| g * qi).sum();
        let gmin = grad.iter().cloned().fold(f64::INFINITY, f64::min);
        if inner - gmin < 1e-9 {
            break;
        }
        let mut z = 0.0;
        for (qi, g) in q.iter_mut().zip(&grad) {
            *qi *= (-eta * (g - inner)).exp();
            z += *qi;
        }
        for qi in &mut q {
            *qi /= z;
        }
    }
    objective(&q) / std::f64::consts::LN_2
}

fn criterion_3(be: &ClarabelBackend) -> Outcome {
    let sc = Scenario::chsh();
    let p = born_behavior(&chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(sc.clone());
    let lhv = build_lhv(&sc).map_err(|e| e.to_string())?;
    let proj = kl_project(&p, &w, &lhv, be);
    if !proj.status.is_usable() {
        return Err(format!("kl_project failed: {:?}", proj.status));
    }
    let vertices = enumerate_deterministic_vertices(&sc).map_err(|e| e.to_string())?;
    if vertices.len() != 16 {
        return Err(format!("expected 16 vertices, got {}", vertices.len()));
    }
    let oracle = kl_oracle(&p, &w, &vertices);
    check(
        near(proj.dkl_bits, oracle, 1e-5),
        &format!("kl_project={:.8} oracle={oracle:.8}", proj.dkl_bits),
    )
}

// ---------------------------------------------------------------------------
// 4. negativity SDP tightness

fn criterion_4(be: &ClarabelBackend) -> Outcome {
    let sc = Scenario::chsh();
    let chsh = make_chsh();
    let p = born_behavior(&chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;

    let neg2 = build_negativity_capped(&sc, 2, None).map_err(|e| e.to_string())?;
    let sol = minimize_scalar(&neg2, "negativity", Some(&p), be);
    let min_neg = match sol.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => sol.objective,
        s => return Err(format!("negativity solve failed: {s:?}")),
    };
    if !near(min_neg, 0.5, 1e-4) {
        return Err(format!("min negativity at level 2 = {min_neg:.6}, want 0.5"));
    }

    // The closed form B_H(N0) = 2 + 4 N0 (sqrt2 - 1) against the level-3
    // relaxation at tight solver tolerances.
    let hi = ClarabelBackend::high_accuracy();
    let mut worst = 0.0f64;
    for k in 0..=5 {
        let n0 = k as f64 / 10.0;
        let capped = build_negativity_capped(&sc, 3, Some(n0)).map_err(|e| e.to_string())?;
        let b_h = solved_max(&chsh, &capped, &hi)?;
        let closed = 2.0 + 4.0 * n0 * (SQRT_2 - 1.0);
        worst = worst.max((b_h - closed).abs());
    }
    check(
        worst <= 5e-4,
        &format!("min_neg(l2)={min_neg:.6}; max |B_H - closed form| over N0 grid = {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 5. finite-data negativity certification curve

fn criterion_5() -> Outcome {
    let chsh = make_chsh();
    let p = born_behavior(&chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(Scenario::chsh());
    let grid: Vec<f64> = (0..=50).map(|k| k as f64 / 100.0).collect();

    let mut sum_final = 0.0;
    let mut sum_mid = 0.0;
    let seeds = 10;
    for seed in 0..seeds {
        let trials = sample_trials(&p, &w, 20_000, seed).map_err(|e| e.to_string())?;
        let scan = threshold_scan(&grid, 0.99, |n0| {
            martingale_run(&trials, &chsh, 2.0 + 4.0 * n0 * (SQRT_2 - 1.0), 500)
        })
        .map_err(|e| e.to_string())?;
        sum_final += scan.certified.unwrap_or(0.0);
        let mid = scan
            .curve
            .iter()
            .find(|(n, _)| *n == 5_000)
            .and_then(|(_, v)| *v)
            .unwrap_or(0.0);
        sum_mid += mid;
    }
    let mean_final = sum_final / seeds as f64;
    let mean_mid = sum_mid / seeds as f64;
    check(
        mean_final >= 0.43 && mean_mid >= 0.38,
        &format!("mean certified N0: {mean_final:.4} at 2e4 trials, {mean_mid:.4} at 5e3"),
    )
}

// ---------------------------------------------------------------------------
// 6. CGLMP dimension witness

/// Moment structure for the CGLMP scenario between levels 1 and 2: the
/// level-1 words plus the products of a setting-0 with a setting-1
/// Collins-Gisin projector. Level 2 proper is out of reach of the
/// solver; this basis already pushes the N0 = 1/2 Bell bound below the
/// two-qubit maximum.
fn cglmp_intermediate_structure() -> MomentStructure {
    let g = |s: u8, o: u8| Gen {
        setting: s,
        outcome: o,
    };
    let mut basis = enumerate_words(2, 3, 1);
    for a in 0..2u8 {
        for b in 0..2u8 {
            basis.push(vec![g(0, a), g(1, b)]);
        }
    }
    MomentStructure::with_bases(&Scenario::cglmp3(), vec![basis.clone(), basis], 1)
}

fn criterion_6(be: &ClarabelBackend) -> Outcome {
    let cglmp = make_cglmp3();
    let zeta = cglmp_optimal_zeta();
    let strat = cglmp_strategy(zeta, None).map_err(|e| e.to_string())?;
    let p = born_behavior(&strat).map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(Scenario::cglmp3());

    let born = evaluate(&cglmp, &p).map_err(|e| e.to_string())?;
    if !near(born, 2.91485, 1e-4) {
        return Err(format!("Born CGLMP value {born:.6}, want 2.91485"));
    }
    let neg = negativity_exact(&strat.state, &[3, 3], &[true, false]).map_err(|e| e.to_string())?;
    if !near(neg, 0.98358, 1e-5) {
        return Err(format!("exact negativity {neg:.6}, want 0.98358"));
    }

    // One Bell bound for the N0 = 1/2 null, reused across seeds.
    let st = cglmp_intermediate_structure();
    let capped = build_negativity_capped_st(&st, Some(0.5)).map_err(|e| e.to_string())?;
    let b_h = solved_max(&cglmp, &capped, be)?;
    if b_h >= born {
        return Err(format!(
            "qutrit bound under N0=1/2 is {b_h:.6}, not below the Born value {born:.6}"
        ));
    }

    let seeds = 10;
    let mut sum_first = 0.0;
    for seed in 0..seeds {
        let trials = sample_trials(&p, &w, 8_000, seed).map_err(|e| e.to_string())?;
        // The martingale bound holds at every trial, so checkpoint per
        // trial for an unquantized first-rejection time.
        let scan = threshold_scan(&[0.5], 0.99, |_| martingale_run(&trials, &cglmp, b_h, 1))
            .map_err(|e| e.to_string())?;
        match scan.first_rejection[0] {
            Some(n) => sum_first += n as f64,
            None => return Err(format!("seed {seed}: N0=1/2 never rejected in 8000 trials")),
        }
    }
    let mean_first = sum_first / seeds as f64;
    check(
        mean_first <= 3000.0,
        &format!("B_H(1/2)={b_h:.6}; mean first rejection {mean_first:.0} trials"),
    )
}

// ---------------------------------------------------------------------------
// 7. GHZ finite data, martingale

/// Trials cycling over the Mermin support with the outcome the GHZ state
/// yields with certainty: every trial scores the algebraic maximum.
fn ghz_deterministic_trials(n: usize) -> Vec<TrialRecord> {
    let mermin = make_mermin();
    let sc = Scenario::tripartite();
    let support: Vec<Vec<usize>> = (0..sc.n_setting_combos())
        .map(|si| sc.settings_tuple(si))
        .filter(|s| (s.iter().sum::<usize>()) % 2 == 1)
        .collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let settings = support[k % support.len()].clone();
        let best = (0..sc.n_outcome_combos())
            .map(|oi| TrialRecord {
                settings: settings.clone(),
                outcomes: sc.outcomes_tuple(oi),
            })
            .max_by(|a, b| {
                mermin
                    .trial_value(a)
                    .unwrap()
                    .total_cmp(&mermin.trial_value(b).unwrap())
            })
            .unwrap();
        out.push(best);
    }
    out
}

fn criterion_7() -> Outcome {
    let mermin = make_mermin();
    let trials = ghz_deterministic_trials(1000);
    let b = extrema(&mermin);

    let slope = |b_h: f64| -> Result<f64, String> {
        let tr = martingale_run(&trials, &mermin, b_h, 500).map_err(|e| e.to_string())?;
        let last = tr.checkpoints.last().unwrap();
        Ok(last.minus_log2_p / last.n as f64)
    };
    let s_sep = slope(2.0)?;
    let s_bisep = slope(SQRT8)?;
    let g_sep = martingale_gain(4.0, 2.0, b).map_err(|e| e.to_string())?;
    let g_bisep = martingale_gain(4.0, SQRT8, b).map_err(|e| e.to_string())?;

    // Exactly 2^(-100 * 0.228447...) = 1.3275e-7.
    let p100 = martingale_pvalue(4.0, SQRT8, b, 100).map_err(|e| e.to_string())?;
    check(
        (s_sep - g_sep).abs() < 1e-12
            && (s_bisep - g_bisep).abs() < 1e-12
            && near(s_sep, 0.415037, 1e-6)
            && near(s_bisep, 0.228447, 1e-6)
            && p100 <= 1.33e-7
            && p100 <= 1e-6,
        &format!("slopes {s_sep:.7}/{s_bisep:.7}; p after 100 trials = {p100:.3e}"),
    )
}

// ---------------------------------------------------------------------------
// 8. PBR finite-data slope on GHZ data

fn criterion_8(be: &ClarabelBackend) -> Outcome {
    let strat = ghz_strategy();
    let p = born_behavior(&strat).map_err(|e| e.to_string())?;
    let w = SettingsDistribution::mermin_support();
    let sc3 = Scenario::tripartite();
    let lhv = build_lhv(&sc3).map_err(|e| e.to_string())?;
    let quantum = build_quantum_set(&sc3, 1);

    let trials = sample_trials(&p, &w, 100_000, 8).map_err(|e| e.to_string())?;
    let trace = pbr_run(
        &trials,
        &lhv,
        &w,
        500,
        PbrVariant::Full { quantum: &quantum },
        be,
    )
    .map_err(|e| e.to_string())?;
    if let Some(t) = &trace.truncated {
        return Err(format!("pbr trace truncated: {t}"));
    }

    // Least-squares slope of -log2 p against N over the stated window.
    let pts: Vec<(f64, f64)> = trace
        .checkpoints
        .iter()
        .filter(|c| (1_000..=100_000).contains(&c.n))
        .map(|c| (c.n as f64, c.minus_log2_p))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();

    check(
        (slope - 0.414958).abs() / 0.414958 <= 0.01,
        &format!("fitted pbr slope {slope:.6} vs 0.414958"),
    )
}

// ---------------------------------------------------------------------------
// 9. Kaniewski fidelity mapping and CHSH-value scan

fn criterion_9() -> Outcome {
    let f_star = kaniewski_fidelity(KANIEWSKI_BETA_STAR).map_err(|e| e.to_string())?;
    let f_mid = kaniewski_fidelity(2.5).map_err(|e| e.to_string())?;
    let f_max = kaniewski_fidelity(SQRT8).map_err(|e| e.to_string())?;
    if !(near(f_star, 0.5, 1e-4) && near(f_mid, 0.7728, 1e-4) && near(f_max, 1.0, 1e-4)) {
        return Err(format!("kaniewski map {f_star:.5}/{f_mid:.5}/{f_max:.5}"));
    }

    let chsh = make_chsh();
    let p = born_behavior(&chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(Scenario::chsh());
    let grid: Vec<f64> = (0..=50)
        .map(|k| 2.0 + k as f64 * (SQRT8 - 2.0) / 50.0)
        .collect();

    let seeds = 10;
    let mut sum = 0.0;
    for seed in 0..seeds {
        let trials = sample_trials(&p, &w, 100_000, seed).map_err(|e| e.to_string())?;
        let scan = threshold_scan(&grid, 0.99, |s0| martingale_run(&trials, &chsh, s0, 500))
            .map_err(|e| e.to_string())?;
        sum += scan.certified.unwrap_or(2.0);
    }
    let mean = sum / seeds as f64;
    check(
        mean >= 2.70,
        &format!("kaniewski {f_star:.5}/{f_mid:.5}/{f_max:.5}; mean certified S = {mean:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 10. SWAP fidelity

/// Swap fidelity of an explicit two-qubit strategy straight from the
/// extraction-map definition, independent of the moment expansion.
fn swap_fidelity_brute(strat: &QuantumStrategy) -> f64 {
    let one = CMat::identity(2, 2);
    let obs = |p: usize, s: usize| -> CMat { &strat.povms[p][s][0] * Complex64::from(2.0) - &one };
    let kraus = |z: &CMat, x: &CMat| -> [CMat; 2] {
        let k0 = (&one + z) * Complex64::from(0.5);
        let k1 = x * ((&one - z) * Complex64::from(0.5));
        [k0, k1]
    };
    let ka = kraus(&obs(0, 0), &obs(0, 1));
    let inv_s2 = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    let zb = (obs(1, 0) + obs(1, 1)) * inv_s2;
    let xb = (obs(1, 0) - obs(1, 1)) * inv_s2;
    let kb = kraus(&zb, &xb);

    let mut f = Complex64::new(0.0, 0.0);
    for k in 0..2 {
        for i in 0..2 {
            let ma = ka[k].adjoint() * &ka[i];
            let mb = kb[k].adjoint() * &kb[i];
            f += (&strat.state * ma.kronecker(&mb)).trace();
        }
    }
    0.5 * f.re
}

fn criterion_10(be: &ClarabelBackend) -> Outcome {
    let sc = Scenario::chsh();
    let tracking = build_fidelity_capped(&sc, 2, FRAC_PI_4, None).map_err(|e| e.to_string())?;
    let fid_expr = &tracking.scalars["fidelity"];

    let ideal = chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?;
    let x_ideal = strategy_assignment(&ideal, &sc, 2);
    let f_ideal = fid_expr.eval(&x_ideal);
    let product = product_00_strategy();
    let x_prod = strategy_assignment(&product, &sc, 2);
    let f_prod = fid_expr.eval(&x_prod);
    if !(near(f_ideal, 1.0, 1e-6)
        && near(f_prod, 0.5, 1e-6)
        && near(f_ideal, swap_fidelity_brute(&ideal), 1e-9)
        && near(f_prod, swap_fidelity_brute(&product), 1e-9))
    {
        return Err(format!("fidelity form: ideal={f_ideal:.8} product={f_prod:.8}"));
    }

    // Rejecting "fidelity <= 1/2" on ideal CHSH data.
    let p = born_behavior(&ideal).map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(sc.clone());
    let capped = build_fidelity_capped(&sc, 2, FRAC_PI_4, Some(0.5)).map_err(|e| e.to_string())?;
    let quantum = build_quantum_set(&sc, 2);
    let trials = sample_trials(&p, &w, 10_000, 10).map_err(|e| e.to_string())?;
    let trace = pbr_run(
        &trials,
        &capped,
        &w,
        500,
        PbrVariant::Full { quantum: &quantum },
        be,
    )
    .map_err(|e| e.to_string())?;
    let rejected_at = trace
        .checkpoints
        .iter()
        .find(|c| c.p_bound <= 0.01)
        .map(|c| c.n);
    check(
        rejected_at.is_some(),
        &format!(
            "forms ideal={f_ideal:.7} product={f_prod:.7}; F<=1/2 rejected at {rejected_at:?} trials"
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. property suites

fn visibility_mix(p: &Behavior, v: f64) -> Behavior {
    let u = Behavior::uniform(p.scenario.clone());
    let table = p
        .table
        .iter()
        .zip(&u.table)
        .map(|(a, b)| v * a + (1.0 - v) * b)
        .collect();
    Behavior::new(p.scenario.clone(), table).unwrap()
}

fn criterion_11(be: &ClarabelBackend) -> Outcome {
    // (a) p-bound monotonicity in the average and in N.
    let b = (-4.0, 4.0);
    let b_h = 2.0;
    let mut prev = 1.0;
    for k in 0..=40 {
        let i = 1.0 + k as f64 * 0.07;
        let p = martingale_pvalue(i, b_h, b, 200).map_err(|e| e.to_string())?;
        if p > prev + 1e-15 {
            return Err(format!("p not monotone in the average at {i}"));
        }
        prev = p;
    }
    let mut prev = 1.0;
    for n in [1usize, 10, 100, 1000, 10000] {
        let p = martingale_pvalue(2.8, b_h, b, n).map_err(|e| e.to_string())?;
        if p > prev + 1e-15 {
            return Err(format!("p not monotone in N at {n}"));
        }
        prev = p;
    }

    // (b) D_KL >= 0 with equality exactly on members.
    let sc = Scenario::chsh();
    let ideal = born_behavior(&chsh_strategy(FRAC_PI_4).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let w = SettingsDistribution::uniform(sc.clone());
    let lhv = build_lhv(&sc).map_err(|e| e.to_string())?;
    for v in [0.0, 0.3, 0.6, 0.65, 0.75, 0.9, 1.0] {
        let p = visibility_mix(&ideal, v);
        let inside = membership(&lhv, &p, be).map_err(|e| e.to_string())?;
        let proj = kl_project(&p, &w, &lhv, be);
        if !proj.status.is_usable() {
            return Err(format!("kl_project failed at v={v}: {:?}", proj.status));
        }
        if proj.dkl_bits < -1e-12 {
            return Err(format!("negative divergence at v={v}"));
        }
        let zero = proj.dkl_bits <= 1e-7;
        if inside != zero {
            return Err(format!(
                "membership/divergence mismatch at v={v}: inside={inside}, dkl={:.2e}",
                proj.dkl_bits
            ));
        }
    }

    // (c) hierarchy and hypothesis-set nesting on a panel of 20 behaviors.
    // Generic interior/exterior points; exact boundary points (pure
    // strategies at v=1) would make feasibility ill-posed.
    let mut panel = Vec::new();
    for (i, &theta_deg) in [15.0f64, 25.0, 35.0, 45.0].iter().enumerate() {
        for (j, &v) in [0.4, 0.6, 0.75, 0.85, 0.95].iter().enumerate() {
            let p = born_behavior(&chsh_strategy(theta_deg.to_radians()).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            panel.push((i * 5 + j, visibility_mix(&p, v)));
        }
    }
    let q: Vec<HypothesisSet> = (1..=3).map(|l| build_quantum_set(&sc, l)).collect();
    let neg_tight = build_negativity_capped(&sc, 2, Some(0.1)).map_err(|e| e.to_string())?;
    let neg_loose = build_negativity_capped(&sc, 2, Some(0.3)).map_err(|e| e.to_string())?;
    // Feasibility of a pinned behavior exactly on a set's boundary (the
    // Tsirelson point in every Q_l) can defeat the solver; such checks
    // are inconclusive, not violations. Cap how many may be skipped.
    let hi = ClarabelBackend::high_accuracy();
    let query = |h: &HypothesisSet, p: &Behavior| {
        membership(h, p, be)
            .or_else(|_| membership(h, p, &hi))
            .ok()
    };
    // Clarabel's infeasibility certificates are weak on the capped
    // negativity SDPs; when membership is inconclusive, fall back to
    // comparing the pinned minimum negativity against the cap.
    let neg_free = build_negativity_capped(&sc, 2, None).map_err(|e| e.to_string())?;
    let neg_member = |capped: &HypothesisSet, cap: f64, p: &Behavior| -> Option<bool> {
        if let Some(m) = query(capped, p) {
            return Some(m);
        }
        let sol = minimize_scalar(&neg_free, "negativity", Some(p), be);
        match sol.status {
            SolveStatus::Optimal | SolveStatus::AlmostOptimal => {
                ((sol.objective - cap).abs() > 1e-4).then(|| sol.objective <= cap)
            }
            _ => None,
        }
    };
    let mut skipped = 0usize;
    for (id, p) in &panel {
        let in_q: Vec<Option<bool>> = q.iter().map(|h| query(h, p)).collect();
        let in_lhv = query(&lhv, p);
        let in_tight = neg_member(&neg_tight, 0.1, p);
        let in_loose = neg_member(&neg_loose, 0.3, p);
        if in_q.iter().any(Option::is_none)
            || in_lhv.is_none()
            || in_tight.is_none()
            || in_loose.is_none()
        {
            skipped += 1;
            continue;
        }
        let in_q: Vec<bool> = in_q.into_iter().flatten().collect();
        if (in_q[2] && !in_q[1]) || (in_q[1] && !in_q[0]) {
            return Err(format!("hierarchy nesting violated on behavior {id}: {in_q:?}"));
        }
        if in_lhv == Some(true) && !in_q[2] {
            return Err(format!("LHV not inside Q_3 on behavior {id}"));
        }
        if in_tight == Some(true) && in_loose == Some(false) {
            return Err(format!("negativity caps not nested on behavior {id}"));
        }
    }
    if skipped > 5 {
        return Err(format!("{skipped} of 20 nesting checks inconclusive"));
    }

    // (d) the PBR rate dominates the martingale rate across the theta sweep.
    let chsh = make_chsh();
    let b2 = extrema(&chsh);
    for k in 1..=9 {
        let theta = (k as f64 * 5.0).to_radians();
        let p = born_behavior(&chsh_strategy(theta).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let i_q = evaluate(&chsh, &p).map_err(|e| e.to_string())?;
        let g_mart = martingale_gain(i_q, 2.0, b2).map_err(|e| e.to_string())?;
        let g_pbr = pbr_gain(&p, &lhv, &w, be).map_err(|e| e.to_string())?;
        if g_pbr < g_mart - 1e-7 {
            return Err(format!(
                "pbr gain below martingale at theta={k}x5deg: {g_pbr:.7} < {g_mart:.7}"
            ));
        }
    }
    Ok(format!(
        "monotonicity, divergence/membership, nesting (20 behaviors, {skipped} inconclusive), rate ordering"
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    // Optional criterion numbers as arguments restrict the run,
    // e.g. `cargo test --test acceptance -- 6 11`.
    let only: Vec<usize> = std::env::args()
        .filter_map(|a| a.parse().ok())
        .collect();
    let be = ClarabelBackend::default();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("analytic Bell bounds", Box::new(|| criterion_1(&be))),
        ("GHZ gain rates", Box::new(|| criterion_2(&be))),
        ("KL oracle equivalence", Box::new(|| criterion_3(&be))),
        ("negativity SDP tightness", Box::new(|| criterion_4(&be))),
        ("finite-data negativity curve", Box::new(criterion_5)),
        ("CGLMP dimension witness", Box::new(|| criterion_6(&be))),
        ("GHZ martingale traces", Box::new(criterion_7)),
        ("PBR slope on GHZ data", Box::new(|| criterion_8(&be))),
        ("Kaniewski fidelity scan", Box::new(criterion_9)),
        ("SWAP fidelity", Box::new(|| criterion_10(&be))),
        ("property suites", Box::new(|| criterion_11(&be))),
    ];

    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let dt = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] criterion {:2}: {name} ({dt:.1}s) - {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("[FAIL] criterion {:2}: {name} ({dt:.1}s) - {detail}", k + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
