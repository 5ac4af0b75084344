//! Subcommand implementations.

use std::f64::consts::SQRT_2;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use bellcert::conic::{maximize_functional, ConicBackend, SolveStatus};
use bellcert::functionals::{evaluate, extrema, BellFunctional};
use bellcert::hypothesis::{
    build_bell_capped, build_biseparable, build_fidelity_capped, build_lhv,
    build_negativity_capped, build_quantum_set, HypothesisSet,
};
use bellcert::protocols::{
    kaniewski_fidelity, martingale_gain, martingale_run, pbr_gain, pbr_run, threshold_scan,
    PbrVariant, ProtocolError,
};
use bellcert::scenario::{Scenario, SettingsDistribution};
use bellcert::trials::{
    export_trials_csv, read_trials, sample_trials, write_trials, TrialFile, TrialHeader,
};

use crate::config::{self, override_from_config};
use crate::output::{scan_failures, write_json, write_trace_csv, ScanSummary};
use crate::select::{
    self, default_level, parse_grid, solver_backend, FunctionalKind, HypothesisKind, ProtocolKind,
    StrategyKind, VariantKind,
};

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
pub struct SimulateArgs {
    /// Quantum strategy to sample from.
    #[arg(long, value_enum)]
    pub strategy: StrategyKind,
    /// State angle in degrees (chsh strategy).
    #[arg(long, default_value_t = 45.0)]
    pub theta: f64,
    /// Two-qutrit state parameter, a number or "auto" (cglmp3 strategy).
    #[arg(long, default_value = "auto")]
    pub zeta: String,
    /// Number of trials.
    #[arg(long, short)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output path (JSON-Lines).
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also export the trials as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// JSON config file; its values override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    strategy: Option<StrategyKind>,
    theta: Option<f64>,
    zeta: Option<String>,
    n: Option<usize>,
    seed: Option<u64>,
}

pub fn simulate(mut args: SimulateArgs) -> Result<()> {
    if let Some(path) = &args.config {
        let cfg: SimulateConfig = config::load(path)?;
        override_from_config!(args, cfg, strategy, theta, zeta, n, seed);
    }
    let p = select::strategy_behavior(args.strategy, args.theta, &args.zeta)?;
    let w = select::settings_distribution(args.strategy);
    let records = sample_trials(&p, &w, args.n, args.seed)?;
    let file = TrialFile {
        header: TrialHeader {
            settings: p.scenario.settings_per_party().to_vec(),
            outcomes: p.scenario.outcomes_per_party().to_vec(),
            settings_dist: w.weights.clone(),
            seed: Some(args.seed),
            source: Some(format!("{:?}", args.strategy).to_lowercase()),
        },
        records,
    };
    write_trials(&args.out, &file)?;
    if let Some(csv_path) = &args.csv {
        export_trials_csv(csv_path, &file)?;
    }
    println!("wrote {} trials to {}", file.records.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// shared hypothesis plumbing

/// Builds the null hypothesis set for a scan threshold.
fn hypothesis_set(
    kind: HypothesisKind,
    f: &BellFunctional,
    sc: &Scenario,
    threshold: Option<f64>,
    level: usize,
) -> Result<HypothesisSet> {
    Ok(match kind {
        HypothesisKind::Lhv => build_lhv(sc)?,
        HypothesisKind::Negativity => build_negativity_capped(sc, level, threshold)?,
        HypothesisKind::Biseparable => build_biseparable(sc, level)?,
        HypothesisKind::ChshValue => {
            let cap = threshold.context("--hypothesis chsh-value needs a threshold")?;
            build_bell_capped(f, cap, true, level)
        }
        HypothesisKind::Fidelity => {
            build_fidelity_capped(sc, level.max(2), std::f64::consts::FRAC_PI_4, threshold)?
        }
    })
}

/// The martingale null bound `B_H`: the maximum of `f` over the null set.
/// Uses closed forms where available, otherwise one conic solve.
fn martingale_bh(
    kind: HypothesisKind,
    fk: FunctionalKind,
    f: &BellFunctional,
    sc: &Scenario,
    threshold: Option<f64>,
    level: usize,
    be: &dyn ConicBackend,
) -> Result<f64> {
    match kind {
        HypothesisKind::Lhv => f
            .local_bound
            .context("functional has no known local bound"),
        HypothesisKind::ChshValue => {
            threshold.context("--hypothesis chsh-value needs a threshold")
        }
        HypothesisKind::Fidelity => bail!(
            "the martingale protocol has no fidelity bound; certify chsh-value \
             with --post kaniewski instead"
        ),
        HypothesisKind::Negativity if matches!(fk, FunctionalKind::Chsh) => {
            let n0 = threshold.context("--hypothesis negativity needs a threshold")?;
            Ok(2.0 + 4.0 * n0 * (SQRT_2 - 1.0))
        }
        HypothesisKind::Negativity | HypothesisKind::Biseparable => {
            let set = hypothesis_set(kind, f, sc, threshold, level)?;
            let sol = maximize_functional(f, &set, be);
            match sol.status {
                SolveStatus::Optimal | SolveStatus::AlmostOptimal => Ok(sol.objective),
                s => bail!("bound solve for {} failed: {s:?}", set.tag),
            }
        }
    }
}

/// Default scan grid per hypothesis kind.
fn default_grid(kind: HypothesisKind) -> Result<Vec<f64>> {
    Ok(match kind {
        HypothesisKind::Negativity => parse_grid("0:0.01:0.5")?,
        HypothesisKind::ChshValue => {
            let step = 2.0 * (SQRT_2 - 1.0) / 50.0;
            (0..=50).map(|k| 2.0 + k as f64 * step).collect()
        }
        HypothesisKind::Fidelity => parse_grid("0.5:0.01:1")?,
        // Non-parametric nulls: a single dummy threshold.
        HypothesisKind::Lhv | HypothesisKind::Biseparable => vec![0.0],
    })
}

fn parametric(kind: HypothesisKind) -> bool {
    !matches!(kind, HypothesisKind::Lhv | HypothesisKind::Biseparable)
}

// ---------------------------------------------------------------------------
// certify

#[derive(Args)]
pub struct CertifyArgs {
    /// Trial file (JSON-Lines, as written by `simulate`).
    #[arg(long, short)]
    pub input: PathBuf,
    /// Null hypothesis family to scan.
    #[arg(long, value_enum)]
    pub hypothesis: HypothesisKind,
    /// Bell functional (martingale scoring and chsh-value caps).
    #[arg(long, value_enum, default_value_t = FunctionalKind::Chsh)]
    pub functional: FunctionalKind,
    /// Tilt parameter for the tilted CHSH functional.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = ProtocolKind::Martingale)]
    pub protocol: ProtocolKind,
    /// PBR regularization variant.
    #[arg(long, value_enum, default_value_t = VariantKind::Full)]
    pub variant: VariantKind,
    /// Confidence level for rejection (`p <= 1 - gamma`).
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    /// Checkpoint block size.
    #[arg(long = "n-blk", default_value_t = 500)]
    pub n_blk: usize,
    /// Relaxation level (defaults per hypothesis and scenario).
    #[arg(long)]
    pub level: Option<usize>,
    /// Threshold grid, `start:step:end` or comma-separated.
    #[arg(long)]
    pub grid: Option<String>,
    /// Post-processing of the certified value ("kaniewski": chsh-value
    /// to singlet-extraction fidelity).
    #[arg(long)]
    pub post: Option<String>,
    /// Reference strategy for the ideal PBR variant.
    #[arg(long, value_enum)]
    pub ref_strategy: Option<StrategyKind>,
    #[arg(long, default_value_t = 45.0)]
    pub ref_theta: f64,
    #[arg(long, default_value = "auto")]
    pub ref_zeta: String,
    /// Prefix for the trace CSV and JSON summary outputs.
    #[arg(long, default_value = "bellcert-run")]
    pub out_prefix: String,
    /// JSON config file; its values override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyConfig {
    hypothesis: Option<HypothesisKind>,
    functional: Option<FunctionalKind>,
    alpha: Option<f64>,
    protocol: Option<ProtocolKind>,
    variant: Option<VariantKind>,
    gamma: Option<f64>,
    n_blk: Option<usize>,
    level: Option<usize>,
    grid: Option<String>,
    post: Option<String>,
    out_prefix: Option<String>,
}

pub fn certify(mut args: CertifyArgs) -> Result<()> {
    if let Some(path) = &args.config {
        let cfg: CertifyConfig = config::load(path)?;
        override_from_config!(
            args, cfg, hypothesis, functional, alpha, protocol, variant, gamma, n_blk, out_prefix
        );
        args.level = cfg.level.or(args.level);
        args.grid = cfg.grid.or(args.grid);
        args.post = cfg.post.or(args.post);
    }

    let file = read_trials(&args.input)?;
    let sc = file.scenario()?;
    let w = SettingsDistribution::new(sc.clone(), file.header.settings_dist.clone())?;
    let f = select::functional(args.functional, args.alpha)?;
    if f.scenario != sc {
        bail!(
            "functional {:?} does not match the {}-party trial scenario",
            args.functional,
            sc.settings_per_party().len()
        );
    }
    let level = args.level.unwrap_or_else(|| default_level(args.hypothesis, &sc));
    let grid = match &args.grid {
        Some(s) => parse_grid(s)?,
        None => default_grid(args.hypothesis)?,
    };
    let be = solver_backend()?;
    let kind = args.hypothesis;
    let trials = &file.records;

    let scan = match args.protocol {
        ProtocolKind::Martingale => threshold_scan(&grid, args.gamma, |th| {
            let th = parametric(kind).then_some(th);
            let b_h = martingale_bh(kind, args.functional, &f, &sc, th, level, be.as_ref())
                .map_err(|e| ProtocolError::Solver(format!("{e:#}")))?;
            martingale_run(trials, &f, b_h, args.n_blk)
        })?,
        ProtocolKind::Pbr => {
            let quantum = build_quantum_set(&sc, level);
            let reference = match (args.variant, args.ref_strategy) {
                (VariantKind::Ideal, Some(s)) => {
                    Some(select::strategy_behavior(s, args.ref_theta, &args.ref_zeta)?)
                }
                (VariantKind::Ideal, None) => {
                    bail!("--variant ideal needs --ref-strategy")
                }
                _ => None,
            };
            threshold_scan(&grid, args.gamma, |th| {
                let th = parametric(kind).then_some(th);
                let set = hypothesis_set(kind, &f, &sc, th, level)
                    .map_err(|e| ProtocolError::Solver(format!("{e:#}")))?;
                let variant = match args.variant {
                    VariantKind::Full => PbrVariant::Full { quantum: &quantum },
                    VariantKind::Simplified => PbrVariant::Simplified,
                    VariantKind::Ideal => PbrVariant::Ideal {
                        reference: reference.as_ref().expect("checked above"),
                    },
                };
                pbr_run(trials, &set, &w, args.n_blk, variant, be.as_ref())
            })?
        }
    };

    let failures = scan_failures(&scan);
    let post = match (args.post.as_deref(), kind) {
        (Some("kaniewski"), HypothesisKind::ChshValue) => {
            let fid = scan
                .certified
                .map(kaniewski_fidelity)
                .transpose()?;
            Some(serde_json::json!({ "kaniewski_fidelity": fid }))
        }
        (Some("kaniewski"), _) => bail!("--post kaniewski applies to --hypothesis chsh-value"),
        (Some(other), _) => bail!("unknown post-processing {other:?}"),
        (None, _) => None,
    };

    let trace_path = PathBuf::from(format!("{}.trace.csv", args.out_prefix));
    let summary_path = PathBuf::from(format!("{}.json", args.out_prefix));
    write_trace_csv(&trace_path, &scan.traces)?;
    write_json(
        &summary_path,
        &ScanSummary {
            command: "certify",
            gamma: scan.gamma,
            grid: &scan.grid,
            certified: scan.certified,
            first_rejection: &scan.first_rejection,
            n_blk: args.n_blk,
            level: Some(level),
            seed: file.header.seed,
            backend: &std::env::var("BELLCERT_BACKEND").unwrap_or_else(|_| "clarabel".into()),
            solver_failures: failures.clone(),
            post: post.clone(),
        },
    )?;

    if parametric(kind) {
        match scan.certified {
            Some(v) => println!("certified threshold: {v}"),
            None => println!("no threshold rejected"),
        }
    } else {
        match scan.first_rejection[0] {
            Some(n) => println!("null rejected after {n} trials"),
            None => println!("null not rejected"),
        }
    }
    if let Some(p) = &post {
        println!("post: {p}");
    }
    println!("trace: {}", trace_path.display());
    println!("summary: {}", summary_path.display());
    if !failures.is_empty() {
        bail!("{} solver failure(s) truncated the scan", failures.len());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gain

#[derive(Args)]
pub struct GainArgs {
    /// Strategy generating the true behavior.
    #[arg(long, value_enum)]
    pub strategy: StrategyKind,
    /// State angle in degrees, or a sweep `start:step:end` in degrees.
    #[arg(long, default_value = "45")]
    pub theta: String,
    #[arg(long, default_value = "auto")]
    pub zeta: String,
    #[arg(long, value_enum)]
    pub hypothesis: HypothesisKind,
    #[arg(long, value_enum, default_value_t = FunctionalKind::Chsh)]
    pub functional: FunctionalKind,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Null threshold (N0, S0, or F0), where the hypothesis takes one.
    #[arg(long, visible_aliases = ["n0", "s0", "f0"])]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub level: Option<usize>,
    /// Write the table as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gain(args: GainArgs) -> Result<()> {
    let thetas: Vec<f64> = if args.theta.contains(':') {
        parse_grid(&args.theta)?
    } else {
        vec![args.theta.parse().context("--theta must be degrees or start:step:end")?]
    };
    let f = select::functional(args.functional, args.alpha)?;
    let sc = f.scenario.clone();
    let level = args.level.unwrap_or_else(|| default_level(args.hypothesis, &sc));
    let be = solver_backend()?;
    let w = select::settings_distribution(args.strategy);
    let set = hypothesis_set(args.hypothesis, &f, &sc, args.threshold, level)?;

    let b_h = martingale_bh(
        args.hypothesis,
        args.functional,
        &f,
        &sc,
        args.threshold,
        level,
        be.as_ref(),
    )?;
    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    for &theta in &thetas {
        let p = select::strategy_behavior(args.strategy, theta, &args.zeta)?;
        if p.scenario != sc {
            bail!("strategy scenario does not match the functional");
        }
        let i_q = evaluate(&f, &p)?;
        let g_mart = martingale_gain(i_q, b_h, extrema(&f))?;
        let g_pbr = pbr_gain(&p, &set, &w, be.as_ref())?;
        rows.push((theta, i_q, g_mart, g_pbr));
    }

    println!("{:>10} {:>12} {:>12} {:>12}", "theta_deg", "bell_value", "g_mart", "g_pbr");
    for (theta, i_q, g_mart, g_pbr) in &rows {
        println!("{theta:>10.4} {i_q:>12.6} {g_mart:>12.6} {g_pbr:>12.6}");
    }
    if let Some(path) = &args.out {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["theta_deg", "bell_value", "g_mart", "g_pbr"])?;
        for (theta, i_q, g_mart, g_pbr) in &rows {
            wtr.write_record([
                theta.to_string(),
                i_q.to_string(),
                g_mart.to_string(),
                g_pbr.to_string(),
            ])?;
        }
        wtr.flush()?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bound

#[derive(Args)]
pub struct BoundArgs {
    #[arg(long, value_enum)]
    pub hypothesis: HypothesisKind,
    #[arg(long, value_enum, default_value_t = FunctionalKind::Chsh)]
    pub functional: FunctionalKind,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Null threshold (N0, S0, or F0), where the hypothesis takes one.
    #[arg(long, visible_aliases = ["n0", "s0", "f0"])]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub level: Option<usize>,
}

pub fn bound(args: BoundArgs) -> Result<()> {
    let f = select::functional(args.functional, args.alpha)?;
    let sc = f.scenario.clone();
    let level = args.level.unwrap_or_else(|| default_level(args.hypothesis, &sc));
    let set = hypothesis_set(args.hypothesis, &f, &sc, args.threshold, level)?;
    let sol = maximize_functional(&f, &set, solver_backend()?.as_ref());
    match sol.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => {
            println!("max {} over {} = {:.9}", f.name, set.tag, sol.objective);
            println!("status: {:?}", sol.status);
            Ok(())
        }
        s => bail!("solve failed: {s:?}"),
    }
}

// ---------------------------------------------------------------------------
// explain

#[derive(Args)]
pub struct ExplainArgs {
    #[arg(long, value_enum)]
    pub hypothesis: HypothesisKind,
    /// Scenario: chsh, cglmp3, or tripartite.
    #[arg(long, default_value = "chsh")]
    pub scenario: String,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub level: Option<usize>,
}

pub fn explain(args: ExplainArgs) -> Result<()> {
    let sc = match args.scenario.as_str() {
        "chsh" => Scenario::chsh(),
        "cglmp3" => Scenario::cglmp3(),
        "tripartite" => Scenario::tripartite(),
        other => bail!("unknown scenario {other:?}"),
    };
    let f = select::functional(
        match args.scenario.as_str() {
            "cglmp3" => FunctionalKind::Cglmp3,
            "tripartite" => FunctionalKind::Mermin,
            _ => FunctionalKind::Chsh,
        },
        0.0,
    )?;
    let level = args.level.unwrap_or_else(|| default_level(args.hypothesis, &sc));
    let set = hypothesis_set(args.hypothesis, &f, &sc, args.threshold, level)?;
    println!("{}", set.explain());
    Ok(())
}
