//! Bell scenarios, behaviors, relative frequencies and the local polytope.
//!
//! A behavior is the full conditional probability table `P(outcomes|settings)`
//! of an n-party Bell experiment. Settings tuples and outcome tuples are
//! ordered party-major; the canonical flat index is row-major over
//! `(settings, outcomes)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance for the nonsignaling check.
pub const NONSIGNALING_TOL: f64 = 1e-9;

/// Guard on deterministic-vertex enumeration.
const VERTEX_GUARD: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario must have 2 or 3 parties, got {0}")]
    BadPartyCount(usize),
    #[error("all setting/outcome counts must be >= 1")]
    EmptyCounts,
    #[error("behavior table has {got} entries, scenario needs {want}")]
    MalformedBehavior { got: usize, want: usize },
    #[error("vertex enumeration would produce {0} vertices (guard 10^6)")]
    TooManyVertices(usize),
    #[error("empty trial sequence")]
    EmptyData,
    #[error("trial indices out of range for scenario")]
    BadTrial,
    #[error("scenario mismatch")]
    ScenarioMismatch,
    #[error("weights must be nonnegative and sum to 1")]
    BadWeights,
}

/// An n-party Bell scenario: number of settings per party and number of
/// outcomes per setting for each party (uniform per party).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    settings: Vec<usize>,
    outcomes: Vec<usize>,
}

impl Scenario {
    pub fn new(settings: Vec<usize>, outcomes: Vec<usize>) -> Result<Self, ScenarioError> {
        if settings.len() != outcomes.len() || !(2..=3).contains(&settings.len()) {
            return Err(ScenarioError::BadPartyCount(settings.len()));
        }
        if settings.iter().chain(outcomes.iter()).any(|&c| c == 0) {
            return Err(ScenarioError::EmptyCounts);
        }
        Ok(Self { settings, outcomes })
    }

    /// The 2-setting 2-outcome bipartite (CHSH) scenario.
    pub fn chsh() -> Self {
        Self::new(vec![2, 2], vec![2, 2]).unwrap()
    }

    /// The 2-setting 3-outcome bipartite (CGLMP3) scenario.
    pub fn cglmp3() -> Self {
        Self::new(vec![2, 2], vec![3, 3]).unwrap()
    }

    /// The 2-setting 2-outcome tripartite (Mermin/GHZ) scenario.
    pub fn tripartite() -> Self {
        Self::new(vec![2, 2, 2], vec![2, 2, 2]).unwrap()
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings_per_party(&self) -> &[usize] {
        &self.settings
    }

    pub fn outcomes_per_party(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn n_setting_combos(&self) -> usize {
        self.settings.iter().product()
    }

    pub fn n_outcome_combos(&self) -> usize {
        self.outcomes.iter().product()
    }

    pub fn table_len(&self) -> usize {
        self.n_setting_combos() * self.n_outcome_combos()
    }

    pub fn settings_index(&self, s: &[usize]) -> usize {
        pack(s, &self.settings)
    }

    pub fn outcomes_index(&self, o: &[usize]) -> usize {
        pack(o, &self.outcomes)
    }

    pub fn settings_tuple(&self, idx: usize) -> Vec<usize> {
        unpack(idx, &self.settings)
    }

    pub fn outcomes_tuple(&self, idx: usize) -> Vec<usize> {
        unpack(idx, &self.outcomes)
    }

    /// Canonical flat index of `(settings, outcomes)` in a behavior table.
    pub fn flat_index(&self, s: &[usize], o: &[usize]) -> usize {
        self.settings_index(s) * self.n_outcome_combos() + self.outcomes_index(o)
    }

    pub fn valid_trial(&self, t: &TrialRecord) -> bool {
        t.settings.len() == self.parties()
            && t.outcomes.len() == self.parties()
            && t.settings.iter().zip(&self.settings).all(|(&v, &n)| v < n)
            && t.outcomes.iter().zip(&self.outcomes).all(|(&v, &n)| v < n)
    }
}

fn pack(tuple: &[usize], radices: &[usize]) -> usize {
    tuple
        .iter()
        .zip(radices)
        .fold(0, |acc, (&v, &r)| acc * r + v)
}

fn unpack(mut idx: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (slot, &r) in out.iter_mut().rev().zip(radices.iter().rev()) {
        *slot = idx % r;
        idx /= r;
    }
    out
}

/// A full conditional probability table `P(outcomes|settings)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub scenario: Scenario,
    /// Flat table, `settings_index * n_outcome_combos + outcomes_index`.
    pub table: Vec<f64>,
}

impl Behavior {
    pub fn new(scenario: Scenario, table: Vec<f64>) -> Result<Self, ScenarioError> {
        if table.len() != scenario.table_len() {
            return Err(ScenarioError::MalformedBehavior {
                got: table.len(),
                want: scenario.table_len(),
            });
        }
        Ok(Self { scenario, table })
    }

    /// Uniformly random outcomes for every setting.
    pub fn uniform(scenario: Scenario) -> Self {
        let p = 1.0 / scenario.n_outcome_combos() as f64;
        let table = vec![p; scenario.table_len()];
        Self { scenario, table }
    }

    pub fn prob(&self, s: &[usize], o: &[usize]) -> f64 {
        self.table[self.scenario.flat_index(s, o)]
    }

    /// Convex mixture `(1-w)*self + w*other`.
    pub fn mix(&self, other: &Behavior, w: f64) -> Behavior {
        assert_eq!(self.scenario, other.scenario);
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect();
        Behavior {
            scenario: self.scenario.clone(),
            table,
        }
    }
}

/// Distribution over joint measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsDistribution {
    pub scenario: Scenario,
    /// One weight per settings combo, indexed by `settings_index`.
    pub weights: Vec<f64>,
}

impl SettingsDistribution {
    pub fn new(scenario: Scenario, weights: Vec<f64>) -> Result<Self, ScenarioError> {
        if weights.len() != scenario.n_setting_combos()
            || weights.iter().any(|&w| w < 0.0)
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12
        {
            return Err(ScenarioError::BadWeights);
        }
        Ok(Self { scenario, weights })
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let n = scenario.n_setting_combos();
        let weights = vec![1.0 / n as f64; n];
        Self { scenario, weights }
    }

    /// Uniform over the four Mermin settings combos `mod(x+y+z,2)=1`.
    pub fn mermin_support() -> Self {
        let scenario = Scenario::tripartite();
        let mut weights = vec![0.0; scenario.n_setting_combos()];
        for (idx, w) in weights.iter_mut().enumerate() {
            let t = scenario.settings_tuple(idx);
            if (t.iter().sum::<usize>()) % 2 == 1 {
                *w = 0.25;
            }
        }
        Self { scenario, weights }
    }

    pub fn weight(&self, s: &[usize]) -> f64 {
        self.weights[self.scenario.settings_index(s)]
    }
}

/// One Bell-test trial: the realized settings and outcomes tuples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
}

/// Relative frequencies estimated from trial data.
///
/// Settings combos with zero trials store an explicitly undefined conditional
/// block (`defined = false`) rather than zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub scenario: Scenario,
    pub table: Vec<f64>,
    /// Trial count per settings combo.
    pub counts: Vec<u64>,
    /// Whether the conditional block for each settings combo is defined.
    pub defined: Vec<bool>,
}

impl FrequencyTable {
    /// Total number of trials behind this table.
    pub fn total_trials(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_behavior(&self) -> Behavior {
        Behavior {
            scenario: self.scenario.clone(),
            table: self.table.clone(),
        }
    }
}

/// Flags reported by [`validate_behavior`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationReport {
    pub normalized: bool,
    pub nonnegative: bool,
    pub nonsignaling: bool,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.normalized && self.nonnegative && self.nonsignaling
    }
}

/// Checks normalization, nonnegativity and the nonsignaling marginal
/// identities of a behavior at absolute tolerance `tol`.
pub fn validate_behavior(p: &Behavior, tol: f64) -> ValidationReport {
    let sc = &p.scenario;
    let no = sc.n_outcome_combos();
    let nonnegative = p.table.iter().all(|&v| v >= -tol);
    let normalized = (0..sc.n_setting_combos()).all(|si| {
        let sum: f64 = p.table[si * no..(si + 1) * no].iter().sum();
        (sum - 1.0).abs() <= tol.max(1e-12)
    });

    // Marginal over party `q`'s outcome must not depend on party `q`'s setting,
    // for every fixed context of the remaining parties.
    let mut nonsignaling = true;
    'outer: for q in 0..sc.parties() {
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
                let marg = |st: &[usize]| -> f64 {
                    let mut acc = 0.0;
                    let mut oo = o.clone();
                    for k in 0..sc.outcomes_per_party()[q] {
                        oo[q] = k;
                        acc += p.prob(st, &oo);
                    }
                    acc
                };
                if (marg(&s) - marg(&s0)).abs() > tol {
                    nonsignaling = false;
                    break 'outer;
                }
            }
        }
    }

    ValidationReport {
        normalized,
        nonnegative,
        nonsignaling,
    }
}

/// All local deterministic behaviors of the scenario: one per choice of a
/// deterministic response function per party.
pub fn enumerate_deterministic_vertices(sc: &Scenario) -> Result<Vec<Behavior>, ScenarioError> {
    let per_party: Vec<usize> = sc
        .settings_per_party()
        .iter()
        .zip(sc.outcomes_per_party())
        .map(|(&m, &d)| d.pow(m as u32))
        .collect();
    let total: usize = per_party.iter().product();
    if total > VERTEX_GUARD {
        return Err(ScenarioError::TooManyVertices(total));
    }

    let mut vertices = Vec::with_capacity(total);
    for mut code in 0..total {
        // Decode a response function f_p: setting -> outcome for each party.
        let mut fns: Vec<Vec<usize>> = Vec::with_capacity(sc.parties());
        for p in 0..sc.parties() {
            let m = sc.settings_per_party()[p];
            let d = sc.outcomes_per_party()[p];
            let mut f = vec![0; m];
            let mut c = code % per_party[p];
            code /= per_party[p];
            for slot in f.iter_mut() {
                *slot = c % d;
                c /= d;
            }
            fns.push(f);
        }
        let mut table = vec![0.0; sc.table_len()];
        for si in 0..sc.n_setting_combos() {
            let s = sc.settings_tuple(si);
            let o: Vec<usize> = (0..sc.parties()).map(|p| fns[p][s[p]]).collect();
            table[si * sc.n_outcome_combos() + sc.outcomes_index(&o)] = 1.0;
        }
        vertices.push(Behavior {
            scenario: sc.clone(),
            table,
        });
    }
    Ok(vertices)
}

/// Relative frequencies `f(o|s) = N(o,s)/N(s)` from raw trials.
pub fn frequency_from_trials(
    trials: &[TrialRecord],
    sc: &Scenario,
) -> Result<FrequencyTable, ScenarioError> {
    if trials.is_empty() {
        return Err(ScenarioError::EmptyData);
    }
    let ns = sc.n_setting_combos();
    let no = sc.n_outcome_combos();
    let mut counts = vec![0u64; ns];
    let mut joint = vec![0u64; ns * no];
    for t in trials {
        if !sc.valid_trial(t) {
            return Err(ScenarioError::BadTrial);
        }
        let si = sc.settings_index(&t.settings);
        counts[si] += 1;
        joint[si * no + sc.outcomes_index(&t.outcomes)] += 1;
    }
    let mut table = vec![0.0; ns * no];
    let mut defined = vec![false; ns];
    for si in 0..ns {
        if counts[si] > 0 {
            defined[si] = true;
            for oi in 0..no {
                table[si * no + oi] = joint[si * no + oi] as f64 / counts[si] as f64;
            }
        }
    }
    Ok(FrequencyTable {
        scenario: sc.clone(),
        table,
        counts,
        defined,
    })
}

/// Mixes a frequency table with the uniform distribution:
/// `f' = (N_est*f + P_uniform)/(N_est + 1)` per conditional block.
///
/// Undefined blocks (zero-count settings) become the uniform distribution.
/// `n_est = 0` returns the pure uniform distribution.
pub fn mix_with_uniform(f: &FrequencyTable, n_est: u64) -> FrequencyTable {
    let sc = &f.scenario;
    let no = sc.n_outcome_combos();
    let u = 1.0 / no as f64;
    let w = n_est as f64 / (n_est as f64 + 1.0);
    let mut table = vec![0.0; f.table.len()];
    for si in 0..sc.n_setting_combos() {
        for oi in 0..no {
            let idx = si * no + oi;
            table[idx] = if f.defined[si] {
                w * f.table[idx] + (1.0 - w) * u
            } else {
                u
            };
        }
    }
    FrequencyTable {
        scenario: sc.clone(),
        table,
        counts: f.counts.clone(),
        defined: vec![true; sc.n_setting_combos()],
    }
}
