//! Bell functionals: coefficient tables, settings distributions, known
//! bounds, expectation values and empirical trial averages.

use thiserror::Error;

use crate::scenario::{Behavior, Scenario, SettingsDistribution, TrialRecord};

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("behavior scenario does not match functional scenario")]
    ScenarioMismatch,
    #[error("trial settings outside the support of the settings distribution")]
    UndefinedTrialValue,
    #[error("empty trial sequence")]
    EmptyData,
    #[error("tilt parameter must be >= 0, got {0}")]
    BadTilt(f64),
}

/// A Bell functional `sum beta(o,s) P(o|s)` together with its settings
/// distribution and known bounds.
#[derive(Debug, Clone)]
pub struct BellFunctional {
    pub scenario: Scenario,
    /// Flat coefficient table, same indexing as a behavior table.
    pub coefficients: Vec<f64>,
    pub settings_dist: SettingsDistribution,
    pub local_bound: Option<f64>,
    pub quantum_bound: Option<f64>,
    pub name: String,
}

impl BellFunctional {
    /// Per-trial value `I(v) = beta / P_settings` for a trial.
    pub fn trial_value(&self, t: &TrialRecord) -> Result<f64, FunctionalError> {
        if !self.scenario.valid_trial(t) {
            return Err(FunctionalError::ScenarioMismatch);
        }
        let w = self.settings_dist.weight(&t.settings);
        if w <= 0.0 {
            return Err(FunctionalError::UndefinedTrialValue);
        }
        Ok(self.coefficients[self.scenario.flat_index(&t.settings, &t.outcomes)] / w)
    }
}

/// The CHSH functional: `beta = (-1)^(xy+a+b)`, uniform settings, `B_L = 2`,
/// `B_Q = 2 sqrt(2)`.
pub fn make_chsh() -> BellFunctional {
    let sc = Scenario::chsh();
    let mut coefficients = vec![0.0; sc.table_len()];
    for si in 0..sc.n_setting_combos() {
        let s = sc.settings_tuple(si);
        for oi in 0..sc.n_outcome_combos() {
            let o = sc.outcomes_tuple(oi);
            let sign = if (s[0] * s[1] + o[0] + o[1]) % 2 == 0 { 1.0 } else { -1.0 };
            coefficients[si * sc.n_outcome_combos() + oi] = sign;
        }
    }
    BellFunctional {
        settings_dist: SettingsDistribution::uniform(sc.clone()),
        scenario: sc,
        coefficients,
        local_bound: Some(2.0),
        quantum_bound: Some(2.0 * 2f64.sqrt()),
        name: "chsh".into(),
    }
}

/// The tilted CHSH family: CHSH plus `alpha * sum_ab (-1)^a P(ab|x=0,y=0)`,
/// `B_L = 2 + alpha`, `B_Q = sqrt(8 + 2 alpha^2)`.
///
/// The marginal term is implemented on the `y = 0` branch; on nonsignaling
/// behaviors the value is independent of that choice.
pub fn make_tilted_chsh(alpha: f64) -> Result<BellFunctional, FunctionalError> {
    if alpha < 0.0 {
        return Err(FunctionalError::BadTilt(alpha));
    }
    let mut f = make_chsh();
    let sc = f.scenario.clone();
    for oi in 0..sc.n_outcome_combos() {
        let o = sc.outcomes_tuple(oi);
        let sign = if o[0] % 2 == 0 { 1.0 } else { -1.0 };
        f.coefficients[sc.flat_index(&[0, 0], &o.clone())] += alpha * sign;
        let _ = oi;
    }
    f.local_bound = Some(2.0 + alpha);
    f.quantum_bound = Some((8.0 + 2.0 * alpha * alpha).sqrt());
    f.name = format!("tilted:{alpha}");
    Ok(f)
}

fn delta(f: i64, d: i64) -> f64 {
    if f.rem_euclid(d) == 0 { 1.0 } else { 0.0 }
}

/// The 3-outcome CGLMP functional, `B_L = 2`.
pub fn make_cglmp3() -> BellFunctional {
    let sc = Scenario::cglmp3();
    let mut coefficients = vec![0.0; sc.table_len()];
    for si in 0..sc.n_setting_combos() {
        let s = sc.settings_tuple(si);
        let (x, y) = (s[0] as i64, s[1] as i64);
        for oi in 0..sc.n_outcome_combos() {
            let o = sc.outcomes_tuple(oi);
            let (a, b) = (o[0] as i64, o[1] as i64);
            let sign = if (x * (y - 1)).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let gate = delta(x, 2) * delta(y - 1, 2);
            let beta = sign * (delta(a - b, 3) - (1.0 - gate) * delta(b - a - 1, 3))
                - gate * delta(b - a + 1, 3);
            coefficients[si * sc.n_outcome_combos() + oi] = beta;
        }
    }
    BellFunctional {
        settings_dist: SettingsDistribution::uniform(sc.clone()),
        scenario: sc,
        coefficients,
        local_bound: Some(2.0),
        quantum_bound: Some(1.0 + (11f64 / 3.0).sqrt()),
        name: "cglmp3".into(),
    }
}

/// The tripartite Mermin functional, supported on `mod(x+y+z,2)=1` with
/// weight 1/4 each; `B_L = 2`, 2-producible bound `2 sqrt(2)`, `B_Q = 4`.
pub fn make_mermin() -> BellFunctional {
    let sc = Scenario::tripartite();
    let mut coefficients = vec![0.0; sc.table_len()];
    for si in 0..sc.n_setting_combos() {
        let s = sc.settings_tuple(si);
        if (s[0] + s[1] + s[2]) % 2 != 1 {
            continue;
        }
        for oi in 0..sc.n_outcome_combos() {
            let o = sc.outcomes_tuple(oi);
            let e = s[0] * s[1] * s[2] + o[0] + o[1] + o[2];
            coefficients[si * sc.n_outcome_combos() + oi] = if e % 2 == 0 { 1.0 } else { -1.0 };
        }
    }
    BellFunctional {
        settings_dist: SettingsDistribution::mermin_support(),
        scenario: sc,
        coefficients,
        local_bound: Some(2.0),
        quantum_bound: Some(4.0),
        name: "mermin".into(),
    }
}

/// Mermin's 2-producible (biseparable) bound.
pub const MERMIN_2PRODUCIBLE_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// `sum beta(o,s) P(o|s)` on a behavior.
pub fn evaluate(f: &BellFunctional, p: &Behavior) -> Result<f64, FunctionalError> {
    if f.scenario != p.scenario {
        return Err(FunctionalError::ScenarioMismatch);
    }
    Ok(f.coefficients.iter().zip(&p.table).map(|(b, p)| b * p).sum())
}

/// Empirical average of `I(v)` over raw trials.
pub fn empirical_average(
    f: &BellFunctional,
    trials: &[TrialRecord],
) -> Result<f64, FunctionalError> {
    if trials.is_empty() {
        return Err(FunctionalError::EmptyData);
    }
    let mut acc = 0.0;
    for t in trials {
        acc += f.trial_value(t)?;
    }
    Ok(acc / trials.len() as f64)
}

/// Per-trial extrema `(b-, b+)` of `I(v) = beta / P_settings` over the
/// support of the settings distribution.
pub fn extrema(f: &BellFunctional) -> (f64, f64) {
    let sc = &f.scenario;
    let no = sc.n_outcome_combos();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for si in 0..sc.n_setting_combos() {
        let w = f.settings_dist.weights[si];
        if w <= 0.0 {
            continue;
        }
        for oi in 0..no {
            let v = f.coefficients[si * no + oi] / w;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}
