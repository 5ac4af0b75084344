//! Trial simulation and on-disk trial data: seeded sampling from a
//! behavior, JSON-Lines read/write, and CSV export.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Behavior, Scenario, ScenarioError, SettingsDistribution, TrialRecord};

#[derive(Debug, Error)]
pub enum TrialIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("missing header line")]
    MissingHeader,
    #[error("line {0}: record does not fit the header scenario")]
    BadRecord(usize),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Header of a trial file: the scenario, the settings distribution the
/// trials were drawn under, and generator metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialHeader {
    pub settings: Vec<usize>,
    pub outcomes: Vec<usize>,
    pub settings_dist: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
}

/// A trial file: header plus records in experimental order.
#[derive(Debug, Clone)]
pub struct TrialFile {
    pub header: TrialHeader,
    pub records: Vec<TrialRecord>,
}

impl TrialFile {
    pub fn scenario(&self) -> Result<Scenario, ScenarioError> {
        Scenario::new(self.header.settings.clone(), self.header.outcomes.clone())
    }
}

/// Wire form of one trial: party labels `x,y[,z]` for settings and
/// `a,b[,c]` for outcomes.
#[derive(Debug, Serialize, Deserialize)]
struct WireTrial {
    x: usize,
    y: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    z: Option<usize>,
    a: usize,
    b: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    c: Option<usize>,
}

impl WireTrial {
    fn from_record(t: &TrialRecord) -> Self {
        Self {
            x: t.settings[0],
            y: t.settings[1],
            z: t.settings.get(2).copied(),
            a: t.outcomes[0],
            b: t.outcomes[1],
            c: t.outcomes.get(2).copied(),
        }
    }

    fn into_record(self) -> TrialRecord {
        let mut settings = vec![self.x, self.y];
        let mut outcomes = vec![self.a, self.b];
        if let (Some(z), Some(c)) = (self.z, self.c) {
            settings.push(z);
            outcomes.push(c);
        }
        TrialRecord { settings, outcomes }
    }
}

/// RNG for run `run` of a seeded experiment: runs use streams
/// `seed + run` so multi-run scans are reproducible and independent.
pub fn run_rng(seed: u64, run: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed.wrapping_add(run))
}

/// Draws `n` i.i.d. trials: settings from `w`, outcomes from
/// `P(.|settings)`. Deterministic for a given seed.
pub fn sample_trials(
    p: &Behavior,
    w: &SettingsDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>, ScenarioError> {
    sample_trials_with(p, w, n, &mut run_rng(seed, 0))
}

/// As [`sample_trials`] with an explicit generator (for multi-run
/// experiments sharing a stream-split rule).
pub fn sample_trials_with(
    p: &Behavior,
    w: &SettingsDistribution,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<TrialRecord>, ScenarioError> {
    if p.scenario != w.scenario {
        return Err(ScenarioError::ScenarioMismatch);
    }
    let sc = &p.scenario;
    let no = sc.n_outcome_combos();
    let setting_dist =
        WeightedIndex::new(&w.weights).map_err(|_| ScenarioError::BadWeights)?;
    // One outcome sampler per setting combo with nonzero weight.
    let outcome_dists: Vec<Option<WeightedIndex<f64>>> = (0..sc.n_setting_combos())
        .map(|si| {
            if w.weights[si] <= 0.0 {
                return Ok(None);
            }
            let block = &p.table[si * no..(si + 1) * no];
            WeightedIndex::new(block)
                .map(Some)
                .map_err(|_| ScenarioError::BadWeights)
        })
        .collect::<Result<_, _>>()?;

    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let si = setting_dist.sample(rng);
        let oi = outcome_dists[si]
            .as_ref()
            .expect("sampled setting has nonzero weight")
            .sample(rng);
        out.push(TrialRecord {
            settings: sc.settings_tuple(si),
            outcomes: sc.outcomes_tuple(oi),
        });
    }
    Ok(out)
}

/// Writes a trial file as JSON-Lines: one header object, then one object
/// per trial in order.
pub fn write_trials(path: &Path, file: &TrialFile) -> Result<(), TrialIoError> {
    let f = std::fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(f);
    serde_json::to_writer(&mut out, &file.header).map_err(|e| TrialIoError::Parse {
        line: 1,
        source: e,
    })?;
    out.write_all(b"\n")?;
    for t in &file.records {
        serde_json::to_writer(&mut out, &WireTrial::from_record(t)).map_err(|e| {
            TrialIoError::Parse { line: 0, source: e }
        })?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a JSON-Lines trial file, validating every record against the
/// header scenario.
pub fn read_trials(path: &Path) -> Result<TrialFile, TrialIoError> {
    let f = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(f).lines();
    let header_line = lines.next().ok_or(TrialIoError::MissingHeader)??;
    let header: TrialHeader =
        serde_json::from_str(&header_line).map_err(|e| TrialIoError::Parse {
            line: 1,
            source: e,
        })?;
    let sc = Scenario::new(header.settings.clone(), header.outcomes.clone())?;

    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let wire: WireTrial = serde_json::from_str(&line).map_err(|e| TrialIoError::Parse {
            line: lineno,
            source: e,
        })?;
        let rec = wire.into_record();
        if !sc.valid_trial(&rec) || rec.settings.len() != sc.parties() {
            return Err(TrialIoError::BadRecord(lineno));
        }
        records.push(rec);
    }
    Ok(TrialFile { header, records })
}

/// Exports trials as CSV with columns `x,y,a,b` (plus `z,c` tripartite).
pub fn export_trials_csv(path: &Path, file: &TrialFile) -> Result<(), TrialIoError> {
    let parties = file.header.settings.len();
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    if parties == 3 {
        w.write_record(["x", "y", "z", "a", "b", "c"]).map_err(csv_io)?;
    } else {
        w.write_record(["x", "y", "a", "b"]).map_err(csv_io)?;
    }
    for t in &file.records {
        let row: Vec<String> = t
            .settings
            .iter()
            .chain(t.outcomes.iter())
            .map(|v| v.to_string())
            .collect();
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> TrialIoError {
    TrialIoError::Io(std::io::Error::new(std::io::ErrorKind::Other, e))
}
