//! Reduced words over per-party Collins-Gisin projector generators.
//!
//! Each party contributes one generator `P(o|s)` per setting `s` and per
//! outcome `o` except the last. Words reduce under idempotence
//! (`P P = P`) and same-setting orthogonality (`P(o|s) P(o'|s) = 0` for
//! `o != o'`); the empty word is the identity.

/// A single Collins-Gisin projector generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gen {
    pub setting: u8,
    pub outcome: u8,
}

/// A reduced product of generators for one party; empty means identity.
pub type Word = Vec<Gen>;

/// Multiplies two reduced words. `None` means the product is the zero
/// operator.
pub fn multiply(a: &Word, b: &Word) -> Option<Word> {
    let mut out = a.clone();
    for &g in b {
        match out.last() {
            Some(&last) if last == g => {}
            Some(&last) if last.setting == g.setting => return None,
            _ => out.push(g),
        }
    }
    Some(out)
}

/// Adjoint of a word: the projectors are Hermitian, so reverse the order.
pub fn adjoint(w: &Word) -> Word {
    w.iter().rev().copied().collect()
}

/// All reduced words of length at most `level` for a party with the given
/// setting and outcome counts, ordered by length then lexicographically.
pub fn enumerate_words(settings: usize, outcomes: usize, level: usize) -> Vec<Word> {
    let gens: Vec<Gen> = (0..settings)
        .flat_map(|s| {
            (0..outcomes.saturating_sub(1)).map(move |o| Gen {
                setting: s as u8,
                outcome: o as u8,
            })
        })
        .collect();
    let mut words: Vec<Word> = vec![Vec::new()];
    let mut frontier: Vec<Word> = vec![Vec::new()];
    for _ in 0..level {
        let mut next = Vec::new();
        for w in &frontier {
            for &g in &gens {
                if let Some(p) = multiply(w, &vec![g]) {
                    if p.len() == w.len() + 1 {
                        next.push(p);
                    }
                }
            }
        }
        next.sort();
        next.dedup();
        words.extend(next.iter().cloned());
        frontier = next;
    }
    words
}
