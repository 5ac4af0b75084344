//! Hypothesis-testing protocols: the martingale-based test, the
//! prediction-based-ratio (PBR) test and its simplified/ideal variants,
//! asymptotic confidence-gain rates, threshold scans, and the Kaniewski
//! Bell-state fidelity bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{kl_project, ConicBackend};
use crate::functionals::{extrema, BellFunctional, FunctionalError};
use crate::hypothesis::HypothesisSet;
use crate::scenario::{
    frequency_from_trials, mix_with_uniform, Behavior, ScenarioError, SettingsDistribution,
    TrialRecord,
};

/// Ratio denominators below this are treated as solver noise and capped.
const RATIO_DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bound ordering violated: need b- < B_H < b+ (b-={bm}, B_H={bh}, b+={bp})")]
    BadBounds { bm: f64, bh: f64, bp: f64 },
    #[error("CHSH value {0} outside [2, 2*sqrt(2)]")]
    BellValueOutOfRange(f64),
    #[error("block size must be at least 1")]
    BadBlockSize,
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("empty threshold grid")]
    EmptyGrid,
    #[error("no trials supplied")]
    NoTrials,
    #[error("conic solver failed: {0}")]
    Solver(String),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// One checkpoint of a protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Trials consumed so far.
    pub n: usize,
    /// p-value upper bound in (0, 1] (may underflow to the smallest
    /// positive float for very strong data; `minus_log2_p` stays exact).
    pub p_bound: f64,
    pub minus_log2_p: f64,
}

/// Ordered p-value-bound checkpoints of one protocol run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PValueTrace {
    pub protocol: String,
    pub hypothesis: String,
    pub threshold: Option<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Set when a solver failure truncated the run; the checkpoints up to
    /// that point remain valid.
    pub truncated: Option<String>,
}

impl PValueTrace {
    fn push(&mut self, n: usize, minus_log2_p: f64) {
        let m = minus_log2_p.max(0.0);
        let p = (-m * std::f64::consts::LN_2).exp().max(f64::MIN_POSITIVE);
        self.checkpoints.push(Checkpoint {
            n,
            p_bound: p.min(1.0),
            minus_log2_p: m,
        });
    }

    /// The p-bound at the last checkpoint not beyond `n` trials.
    pub fn p_at(&self, n: usize) -> Option<&Checkpoint> {
        self.checkpoints.iter().rev().find(|c| c.n <= n)
    }
}

fn check_bounds(bh: f64, b: (f64, f64)) -> Result<(), ProtocolError> {
    let (bm, bp) = b;
    if !(bm < bh && bh < bp) {
        return Err(ProtocolError::BadBounds { bm, bh, bp });
    }
    Ok(())
}

/// Per-trial confidence gain `-log2` of the bracketed factor in the
/// martingale bound, evaluated at average value `i`. Zero when `i <= bh`;
/// the `i = b+` boundary takes the continuous limit.
fn martingale_rate(i: f64, bh: f64, b: (f64, f64)) -> f64 {
    let (bm, bp) = b;
    let i = i.min(bp);
    if i <= bh {
        return 0.0;
    }
    let span = bp - bm;
    let e_hi = (bp - i) / span;
    let e_lo = (i - bm) / span;
    let mut log2f = e_lo * ((bh - bm) / (i - bm)).log2();
    if e_hi > 0.0 {
        log2f += e_hi * ((bp - bh) / (bp - i)).log2();
    }
    -log2f
}

/// Martingale p-value upper bound for observed average `i_hat` of a
/// functional with per-trial extrema `b = (b-, b+)` against the null
/// `value <= b_h`, after `n` trials. Returns 1 when `i_hat <= b_h`.
pub fn martingale_pvalue(
    i_hat: f64,
    b_h: f64,
    b: (f64, f64),
    n: usize,
) -> Result<f64, ProtocolError> {
    Ok(2f64
        .powf(-martingale_minus_log2_pvalue(i_hat, b_h, b, n)?)
        .max(f64::MIN_POSITIVE))
}

/// `-log2` of [`martingale_pvalue`] (exact even when the p-bound
/// underflows).
pub fn martingale_minus_log2_pvalue(
    i_hat: f64,
    b_h: f64,
    b: (f64, f64),
    n: usize,
) -> Result<f64, ProtocolError> {
    check_bounds(b_h, b)?;
    Ok(n as f64 * martingale_rate(i_hat, b_h, b))
}

/// Asymptotic confidence-gain rate of the martingale protocol in
/// bits/trial for data averaging to `i_q` against the null `<= b_h`.
pub fn martingale_gain(i_q: f64, b_h: f64, b: (f64, f64)) -> Result<f64, ProtocolError> {
    check_bounds(b_h, b)?;
    Ok(martingale_rate(i_q, b_h, b))
}

/// Runs the martingale protocol over the trials in order, emitting a
/// checkpoint after every `n_blk` trials (and after the final partial
/// block) with the average recomputed over the whole prefix.
pub fn martingale_run(
    trials: &[TrialRecord],
    f: &BellFunctional,
    b_h: f64,
    n_blk: usize,
) -> Result<PValueTrace, ProtocolError> {
    if trials.is_empty() {
        return Err(ProtocolError::NoTrials);
    }
    if n_blk == 0 {
        return Err(ProtocolError::BadBlockSize);
    }
    let b = extrema(f);
    check_bounds(b_h, b)?;

    let mut trace = PValueTrace {
        protocol: "martingale".into(),
        hypothesis: f.name.clone(),
        threshold: Some(b_h),
        checkpoints: Vec::new(),
        truncated: None,
    };
    let mut sum = 0.0;
    for (k, t) in trials.iter().enumerate() {
        sum += f.trial_value(t)?;
        let n = k + 1;
        if n % n_blk == 0 || n == trials.len() {
            trace.push(n, n as f64 * martingale_rate(sum / n as f64, b_h, b));
        }
    }
    Ok(trace)
}

/// Which prediction-based-ratio variant to run.
pub enum PbrVariant<'a> {
    /// Frequencies are mixed with uniform and regularized by a KL
    /// projection onto the given outer approximation of the quantum set
    /// before projecting onto the null.
    Full { quantum: &'a HypothesisSet },
    /// Skips the regularization step; the mixed frequencies are projected
    /// onto the null directly.
    Simplified,
    /// Builds a single ratio from the reference behavior before consuming
    /// any data.
    Ideal { reference: &'a Behavior },
}

impl PbrVariant<'_> {
    fn tag(&self) -> &'static str {
        match self {
            PbrVariant::Full { .. } => "pbr",
            PbrVariant::Simplified => "pbr-simplified",
            PbrVariant::Ideal { .. } => "pbr-ideal",
        }
    }
}

/// Per-trial log2 ratio table: numerator distribution over the null's KL
/// projection of it, entrywise.
fn log2_ratio_table(
    numerator: &Behavior,
    h: &HypothesisSet,
    w: &SettingsDistribution,
    be: &dyn ConicBackend,
) -> Result<Vec<f64>, String> {
    let proj = kl_project(numerator, w, h, be);
    if !proj.status.is_usable() {
        return Err(format!("KL projection onto {}: {:?}", h.tag, proj.status));
    }
    Ok(numerator
        .table
        .iter()
        .zip(&proj.p_star.table)
        .map(|(&f, &p)| (f / p.max(RATIO_DENOM_FLOOR)).log2())
        .collect())
}

/// Runs the prediction-based-ratio protocol (Fig. 2 schedule): block `k`
/// is scored with a ratio estimated from all preceding trials, the test
/// statistic accumulates in the log domain, and a checkpoint is emitted
/// after every block. A solver failure truncates the trace (never
/// over-certifies) and is recorded in `truncated`.
pub fn pbr_run(
    trials: &[TrialRecord],
    h: &HypothesisSet,
    w: &SettingsDistribution,
    n_blk: usize,
    variant: PbrVariant<'_>,
    be: &dyn ConicBackend,
) -> Result<PValueTrace, ProtocolError> {
    if trials.is_empty() {
        return Err(ProtocolError::NoTrials);
    }
    if n_blk == 0 {
        return Err(ProtocolError::BadBlockSize);
    }
    let sc = &h.scenario;
    let no = sc.n_outcome_combos();
    let mut trace = PValueTrace {
        protocol: variant.tag().into(),
        hypothesis: h.tag.clone(),
        threshold: None,
        checkpoints: Vec::new(),
        truncated: None,
    };

    let fixed_ratio = match &variant {
        PbrVariant::Ideal { reference } => match log2_ratio_table(reference, h, w, be) {
            Ok(r) => Some(r),
            Err(m) => return Err(ProtocolError::Solver(m)),
        },
        _ => None,
    };

    let mut log2_t = 0.0;
    let mut start = 0;
    while start < trials.len() {
        let end = (start + n_blk).min(trials.len());
        let ratio = match &fixed_ratio {
            Some(r) => r.clone(),
            None if start == 0 => vec![0.0; sc.table_len()],
            None => {
                let freq = frequency_from_trials(&trials[..start], sc)?;
                let mixed = mix_with_uniform(&freq, start as u64).as_behavior();
                let numerator = match &variant {
                    PbrVariant::Full { quantum } => {
                        let reg = kl_project(&mixed, w, quantum, be);
                        if !reg.status.is_usable() {
                            trace.truncated = Some(format!(
                                "regularization onto {}: {:?}",
                                quantum.tag, reg.status
                            ));
                            return Ok(trace);
                        }
                        reg.p_star
                    }
                    _ => mixed,
                };
                match log2_ratio_table(&numerator, h, w, be) {
                    Ok(r) => r,
                    Err(m) => {
                        trace.truncated = Some(m);
                        return Ok(trace);
                    }
                }
            }
        };
        for t in &trials[start..end] {
            if !sc.valid_trial(t) {
                return Err(ProtocolError::Scenario(ScenarioError::BadTrial));
            }
            let cell = sc.settings_index(&t.settings) * no + sc.outcomes_index(&t.outcomes);
            log2_t += ratio[cell];
        }
        trace.push(end, log2_t);
        start = end;
    }
    Ok(trace)
}

/// Asymptotic confidence-gain rate of the PBR protocol in bits/trial:
/// the KL divergence of the true behavior from the null set.
pub fn pbr_gain(
    p_q: &Behavior,
    h: &HypothesisSet,
    w: &SettingsDistribution,
    be: &dyn ConicBackend,
) -> Result<f64, ProtocolError> {
    let proj = kl_project(p_q, w, h, be);
    if !proj.status.is_usable() {
        return Err(ProtocolError::Solver(format!(
            "KL projection onto {}: {:?}",
            h.tag, proj.status
        )));
    }
    Ok(proj.dkl_bits)
}

/// Outcome of a threshold scan: which nulls were rejected at confidence
/// `gamma`, and when.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdScan {
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub traces: Vec<PValueTrace>,
    /// Per grid entry, the first checkpoint (trials consumed) at which
    /// the null was rejected, if ever.
    pub first_rejection: Vec<Option<usize>>,
    /// Per checkpoint of the first trace, the largest rejected threshold
    /// at that point (the certified-value curve).
    pub curve: Vec<(usize, Option<f64>)>,
    /// Largest threshold rejected at the final checkpoint.
    pub certified: Option<f64>,
}

/// Runs one protocol instance per grid threshold (via `run`) and reports
/// the largest threshold whose null is rejected at `p <= 1 - gamma`.
/// Thresholds whose run fails or truncates before a checkpoint count as
/// not rejected there.
pub fn threshold_scan<F>(grid: &[f64], gamma: f64, run: F) -> Result<ThresholdScan, ProtocolError>
where
    F: Fn(f64) -> Result<PValueTrace, ProtocolError>,
{
    if grid.is_empty() {
        return Err(ProtocolError::EmptyGrid);
    }
    if !(0.0 < gamma && gamma < 1.0) {
        return Err(ProtocolError::BadConfidence(gamma));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ProtocolError::EmptyGrid);
    }
    let alpha = 1.0 - gamma;

    let mut traces = Vec::with_capacity(grid.len());
    let mut first_rejection = Vec::with_capacity(grid.len());
    for &th in grid {
        match run(th) {
            Ok(tr) => {
                first_rejection
                    .push(tr.checkpoints.iter().find(|c| c.p_bound <= alpha).map(|c| c.n));
                traces.push(tr);
            }
            Err(ProtocolError::Solver(m)) => {
                // Conservative: an unsolved null is never rejected.
                first_rejection.push(None);
                traces.push(PValueTrace {
                    protocol: "scan".into(),
                    hypothesis: format!("threshold {th}"),
                    threshold: Some(th),
                    checkpoints: Vec::new(),
                    truncated: Some(m),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let checkpoints: Vec<usize> = traces
        .iter()
        .map(|t| t.checkpoints.iter().map(|c| c.n).collect::<Vec<_>>())
        .max_by_key(|v| v.len())
        .unwrap_or_default();
    let rejected_at = |n: usize| {
        grid.iter()
            .zip(&traces)
            .filter(|(_, tr)| tr.p_at(n).is_some_and(|c| c.p_bound <= alpha))
            .map(|(&th, _)| th)
            .fold(None, |acc: Option<f64>, th| Some(acc.map_or(th, |a| a.max(th))))
    };
    let curve: Vec<(usize, Option<f64>)> =
        checkpoints.iter().map(|&n| (n, rejected_at(n))).collect();
    let certified = curve.last().and_then(|&(_, c)| c);

    Ok(ThresholdScan {
        gamma,
        grid: grid.to_vec(),
        traces,
        first_rejection,
        curve,
        certified,
    })
}

/// Threshold CHSH value at which the Bell-state fidelity bound becomes
/// trivial: `(16 + 14 sqrt(2)) / 17`.
pub const KANIEWSKI_BETA_STAR: f64 = (16.0 + 14.0 * std::f64::consts::SQRT_2) / 17.0;

/// Lower bound on the singlet fidelity certified by a CHSH value `s`.
pub fn kaniewski_fidelity(s: f64) -> Result<f64, ProtocolError> {
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;
    if !(2.0 - 1e-9..=tsirelson + 1e-9).contains(&s) {
        return Err(ProtocolError::BellValueOutOfRange(s));
    }
    let f = 0.5 + (s - KANIEWSKI_BETA_STAR) / (2.0 * (tsirelson - KANIEWSKI_BETA_STAR));
    Ok(f.max(0.5).min(1.0))
}
