//! Percent identity between amino-acid or nucleotide sequences.
//!
//! Identity comes from a global (Needleman-Wunsch) alignment with linear gap
//! costs: matches over aligned columns, gaps included in the column count.

use rayon::prelude::*;
use thiserror::Error;
use txf_chem::fingerprint::select_top_k;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SequenceKind {
    AminoAcid,
    Nucleotide,
}

const AMINO_ACIDS: &[u8] = b"ACDEFGHIKLMNPQRSTVWYBZUOX";
const NUCLEOTIDES: &[u8] = b"ACGTUN";

impl SequenceKind {
    fn alphabet(self) -> &'static [u8] {
        match self {
            SequenceKind::AminoAcid => AMINO_ACIDS,
            SequenceKind::Nucleotide => NUCLEOTIDES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SequenceError {
    #[error("empty sequence")]
    Empty,
    #[error("residue {residue:?} at position {position} is not valid for {kind:?}")]
    InvalidResidue {
        residue: char,
        position: usize,
        kind: SequenceKind,
    },
    #[error("cannot compare {0:?} with {1:?}")]
    KindMismatch(SequenceKind, SequenceKind),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BioSequence {
    residues: Vec<u8>,
    kind: SequenceKind,
}

impl BioSequence {
    /// Uppercases and drops whitespace (wrapped sequences are common in exports).
    pub fn new(text: &str, kind: SequenceKind) -> Result<Self, SequenceError> {
        let alphabet = kind.alphabet();
        let mut residues = Vec::with_capacity(text.len());
        for (position, ch) in text.chars().enumerate() {
            if ch.is_whitespace() {
                continue;
            }
            let up = ch.to_ascii_uppercase();
            if !up.is_ascii() || !alphabet.contains(&(up as u8)) {
                return Err(SequenceError::InvalidResidue {
                    residue: ch,
                    position,
                    kind,
                });
            }
            residues.push(up as u8);
        }
        if residues.is_empty() {
            return Err(SequenceError::Empty);
        }
        Ok(BioSequence { residues, kind })
    }

    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentScores {
    pub matched: i32,
    pub mismatch: i32,
    pub gap: i32,
}

impl Default for AlignmentScores {
    fn default() -> Self {
        AlignmentScores {
            matched: 1,
            mismatch: -1,
            gap: -2,
        }
    }
}

/// Column counts of one global alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Alignment {
    pub matches: usize,
    pub mismatches: usize,
    pub gaps: usize,
}

impl Alignment {
    pub fn length(&self) -> usize {
        self.matches + self.mismatches + self.gaps
    }

    pub fn score(&self, scores: AlignmentScores) -> i64 {
        self.matches as i64 * scores.matched as i64
            + self.mismatches as i64 * scores.mismatch as i64
            + self.gaps as i64 * scores.gap as i64
    }

    pub fn identity(&self) -> f64 {
        100.0 * self.matches as f64 / self.length() as f64
    }
}

/// One optimal global alignment.
///
/// Equal-scoring alignments are ranked by more matches, then by shorter
/// length. Swapping `a` and `b` maps alignments onto each other with the same
/// three values, so the reported counts do not depend on argument order.
pub fn global_alignment(a: &[u8], b: &[u8], scores: AlignmentScores) -> Alignment {
    let key = |x: &Alignment| (x.score(scores), x.matches, std::cmp::Reverse(x.length()));
    let gap = |x: Alignment| Alignment {
        gaps: x.gaps + 1,
        ..x
    };
    let mut prev: Vec<Alignment> = (0..=b.len())
        .map(|j| Alignment {
            gaps: j,
            ..Default::default()
        })
        .collect();
    let mut row = prev.clone();
    for i in 1..=a.len() {
        row[0] = Alignment {
            gaps: i,
            ..Default::default()
        };
        for j in 1..=b.len() {
            let d = prev[j - 1];
            let diag = if a[i - 1] == b[j - 1] {
                Alignment {
                    matches: d.matches + 1,
                    ..d
                }
            } else {
                Alignment {
                    mismatches: d.mismatches + 1,
                    ..d
                }
            };
            let best = [diag, gap(prev[j]), gap(row[j - 1])]
                .into_iter()
                .max_by_key(key)
                .unwrap();
            row[j] = best;
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// Percent identity in [0, 100] under the default scores.
pub fn percent_identity(a: &BioSequence, b: &BioSequence) -> Result<f64, SequenceError> {
    percent_identity_with(a, b, AlignmentScores::default())
}

pub fn percent_identity_with(
    a: &BioSequence,
    b: &BioSequence,
    scores: AlignmentScores,
) -> Result<f64, SequenceError> {
    if a.kind != b.kind {
        return Err(SequenceError::KindMismatch(a.kind, b.kind));
    }
    if a.residues == b.residues {
        return Ok(100.0);
    }
    Ok(global_alignment(&a.residues, &b.residues, scores).identity())
}

/// Mean identity across paired roles (e.g. peptide and MHC pseudo-sequence).
pub fn mean_identity(a: &[BioSequence], b: &[BioSequence]) -> Result<f64, SequenceError> {
    assert_eq!(a.len(), b.len(), "role count differs");
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += percent_identity(x, y)?;
    }
    Ok(total / a.len() as f64)
}

/// The `k` pool entries most identical to `query`, descending; ties by
/// ascending index.
pub fn top_k_identity(
    query: &BioSequence,
    pool: &[BioSequence],
    k: usize,
) -> Result<Vec<(usize, f64)>, SequenceError> {
    let scored = pool
        .par_iter()
        .enumerate()
        .map(|(i, s)| percent_identity(query, s).map(|v| (i, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_top_k(scored, k))
}

/// Multi-role variant of [`top_k_identity`]: each pool entry is scored by the
/// mean identity over its roles.
pub fn top_k_mean_identity(
    query: &[BioSequence],
    pool: &[Vec<BioSequence>],
    k: usize,
) -> Result<Vec<(usize, f64)>, SequenceError> {
    let scored = pool
        .par_iter()
        .enumerate()
        .map(|(i, s)| mean_identity(query, s).map(|v| (i, v)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(select_top_k(scored, k))
}
