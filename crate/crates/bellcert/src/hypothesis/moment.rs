//! Moment-matrix structure of the local-level relaxation hierarchy.
//!
//! The basis is the tensor product of per-party word bases of length at
//! most `level`. Cell `(r, c)` of the moment matrix carries the moment
//! `tr(rho (A_r)^dag A_c)`, i.e. the tuple of per-party reduced words
//! `adjoint(r_p) * c_p`. Cells whose word product vanishes are identically
//! zero; the remaining cells are identified up to adjoints, so each
//! canonical moment appears either directly or conjugated.

use std::collections::HashMap;

use crate::scenario::Scenario;

use super::words::{adjoint, enumerate_words, multiply, Word};

/// One word per party; the label of a moment.
pub type MomentKey = Vec<Word>;

/// Content of one cell of the moment matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    /// The operator product vanishes.
    Zero,
    /// The moment with the given canonical id, possibly conjugated.
    Ref { id: usize, conj: bool },
}

#[derive(Debug, Clone)]
pub struct MomentInfo {
    pub key: MomentKey,
    /// Whether the moment is self-adjoint (hence real).
    pub real: bool,
}

/// The symbolic moment matrix of one scenario at one hierarchy level.
#[derive(Debug, Clone)]
pub struct MomentStructure {
    pub scenario: Scenario,
    pub level: usize,
    /// Per-party word bases.
    pub bases: Vec<Vec<Word>>,
    /// Side length of the moment matrix (product of basis sizes).
    pub dim: usize,
    cells: Vec<Cell>,
    pub moments: Vec<MomentInfo>,
    index: HashMap<MomentKey, usize>,
}

impl MomentStructure {
    pub fn new(scenario: &Scenario, level: usize) -> Self {
        assert!(level >= 1, "hierarchy level must be at least 1");
        let bases: Vec<Vec<Word>> = scenario
            .settings_per_party()
            .iter()
            .zip(scenario.outcomes_per_party())
            .map(|(&m, &d)| enumerate_words(m, d, level))
            .collect();
        Self::with_bases(scenario, bases, level)
    }

    /// Builds the structure over explicit per-party word bases (used for
    /// intermediate hierarchy levels). The first word of each basis must
    /// be the identity and all level-1 words must be present so every
    /// behavior entry appears in the matrix.
    pub fn with_bases(scenario: &Scenario, bases: Vec<Vec<Word>>, level: usize) -> Self {
        for (p, basis) in bases.iter().enumerate() {
            let lvl1 = enumerate_words(
                scenario.settings_per_party()[p],
                scenario.outcomes_per_party()[p],
                1,
            );
            assert!(
                lvl1.iter().all(|w| basis.contains(w)),
                "party {p} basis must contain identity and all single projectors"
            );
        }
        let dim: usize = bases.iter().map(|b| b.len()).product();
        let radices: Vec<usize> = bases.iter().map(|b| b.len()).collect();

        let mut cells = vec![Cell::Zero; dim * dim];
        let mut moments: Vec<MomentInfo> = Vec::new();
        let mut index: HashMap<MomentKey, usize> = HashMap::new();

        for r in 0..dim {
            let ri = unpack(r, &radices);
            for c in 0..dim {
                let ci = unpack(c, &radices);
                let mut key: MomentKey = Vec::with_capacity(bases.len());
                let mut zero = false;
                for (p, basis) in bases.iter().enumerate() {
                    match multiply(&adjoint(&basis[ri[p]]), &basis[ci[p]]) {
                        Some(w) => key.push(w),
                        None => {
                            zero = true;
                            break;
                        }
                    }
                }
                if zero {
                    continue;
                }
                let (canon, conj) = canonicalize(key);
                let id = *index.entry(canon.clone()).or_insert_with(|| {
                    let real = canon.iter().all(|w| *w == adjoint(w));
                    moments.push(MomentInfo { key: canon, real });
                    moments.len() - 1
                });
                cells[r * dim + c] = Cell::Ref { id, conj };
            }
        }

        Self {
            scenario: scenario.clone(),
            level,
            bases,
            dim,
            cells,
            moments,
            index,
        }
    }

    pub fn n_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn cell(&self, r: usize, c: usize) -> Cell {
        self.cells[r * self.dim + c]
    }

    /// Looks up a moment by key, canonicalizing first.
    pub fn moment_of(&self, key: &MomentKey) -> Option<(usize, bool)> {
        let (canon, conj) = canonicalize(key.clone());
        self.index.get(&canon).map(|&id| (id, conj))
    }

    /// Id of the identity moment (all parties the empty word).
    pub fn identity_id(&self) -> usize {
        self.index[&vec![Word::new(); self.scenario.parties()]]
    }

    /// Maps cell `(r, c)` under the partial transpose of the parties
    /// selected by `mask`: their row and column words swap.
    pub fn pt_cell(&self, r: usize, c: usize, mask: &[bool]) -> (usize, usize) {
        let radices: Vec<usize> = self.bases.iter().map(|b| b.len()).collect();
        let mut ri = unpack(r, &radices);
        let mut ci = unpack(c, &radices);
        for (p, &swap) in mask.iter().enumerate() {
            if swap {
                std::mem::swap(&mut ri[p], &mut ci[p]);
            }
        }
        (pack(&ri, &radices), pack(&ci, &radices))
    }
}

/// Canonical representative of a moment key: the lexicographic minimum of
/// the key and its adjoint. The flag says whether the cell holds the
/// conjugate of the canonical moment.
fn canonicalize(key: MomentKey) -> (MomentKey, bool) {
    let adj: MomentKey = key.iter().map(adjoint).collect();
    if adj < key {
        (adj, true)
    } else {
        (key, false)
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
