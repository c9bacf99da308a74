use crate::bioseq::{top_k_mean_identity, BioSequence, SequenceKind};
use crate::corpus::{DataRecord, FeatureType, TaskManifest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;
use txf_chem::fingerprint::select_top_k;
use txf_chem::{
    morgan_fingerprint, parse_smiles, top_k_tanimoto, Fingerprint, FingerprintPool, DEFAULT_NBITS,
    DEFAULT_RADIUS,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShotError {
    #[error("shot pool is empty")]
    EmptyPool,
}

/// `n` distinct draws from `candidates` in draw order (all of them when
/// `n` exceeds the pool).
pub fn sample_shots<R: Rng + ?Sized>(candidates: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    let amount = n.min(candidates.len());
    rand::seq::index::sample(rng, candidates.len(), amount)
        .into_iter()
        .map(|i| candidates[i])
        .collect()
}

/// Seeded random shots from `pool`, never the query record itself.
pub fn select_shots_random(
    query: &DataRecord,
    pool: &[&DataRecord],
    n: usize,
    seed: u64,
) -> Result<Vec<String>, ShotError> {
    let candidates: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].id != query.id).collect();
    if candidates.is_empty() {
        return Err(ShotError::EmptyPool);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_shots(&candidates, n, &mut rng)
        .into_iter()
        .map(|i| pool[i].id.clone())
        .collect())
}

enum Backend {
    Tanimoto {
        role: String,
        pool: FingerprintPool,
    },
    Identity {
        roles: Vec<(String, SequenceKind)>,
        // entries with an unreadable sequence score 0 against everything
        pool: Vec<Option<Vec<BioSequence>>>,
    },
}

/// Nearest-neighbour index over a shot pool, keyed by the manifest's first
/// role that supports a similarity: molecules by Tanimoto on Morgan bits,
/// sequences by mean percent identity over all sequence roles.
pub struct KnnIndex {
    ids: Vec<String>,
    backend: Backend,
}

fn fingerprint_of(smiles: Option<&str>) -> Fingerprint {
    smiles
        .and_then(|s| parse_smiles(s).ok())
        .map(|m| morgan_fingerprint(&m, DEFAULT_RADIUS, DEFAULT_NBITS))
        .unwrap_or_else(|| Fingerprint::empty(DEFAULT_NBITS))
}

fn sequence_kind(ft: FeatureType) -> Option<SequenceKind> {
    match ft {
        FeatureType::AminoAcid => Some(SequenceKind::AminoAcid),
        FeatureType::Nucleotide => Some(SequenceKind::Nucleotide),
        _ => None,
    }
}

fn sequences_of(record: &DataRecord, roles: &[(String, SequenceKind)]) -> Option<Vec<BioSequence>> {
    roles
        .iter()
        .map(|(r, k)| BioSequence::new(record.feature(r)?, *k).ok())
        .collect()
}

impl KnnIndex {
    /// `None` when no role supports a similarity.
    pub fn build(manifest: &TaskManifest, pool: &[&DataRecord]) -> Option<KnnIndex> {
        let first = manifest
            .roles
            .iter()
            .find(|r| r.feature_type != FeatureType::Text)?;
        let ids = pool.iter().map(|r| r.id.clone()).collect();
        let backend = if first.feature_type == FeatureType::Smiles {
            let fps: Vec<Fingerprint> = pool
                .par_iter()
                .map(|r| fingerprint_of(r.feature(&first.name)))
                .collect();
            let mut fp_pool = FingerprintPool::new(DEFAULT_NBITS, DEFAULT_RADIUS);
            for fp in &fps {
                fp_pool.push(fp).expect("uniform width");
            }
            Backend::Tanimoto {
                role: first.name.clone(),
                pool: fp_pool,
            }
        } else {
            let roles: Vec<(String, SequenceKind)> = manifest
                .roles
                .iter()
                .filter_map(|r| sequence_kind(r.feature_type).map(|k| (r.name.clone(), k)))
                .collect();
            let seqs = pool.par_iter().map(|r| sequences_of(r, &roles)).collect();
            Backend::Identity { roles, pool: seqs }
        };
        Some(KnnIndex { ids, backend })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Up to `n` nearest pool positions with similarity, descending, ties by
    /// ascending position; entries sharing the query's id are skipped.
    pub fn nearest(&self, query: &DataRecord, n: usize) -> Vec<(usize, f64)> {
        let dupes = self.ids.iter().filter(|id| **id == query.id).count();
        let want = n + dupes;
        let hits = match &self.backend {
            Backend::Tanimoto { role, pool } => {
                if pool.is_empty() {
                    Vec::new()
                } else {
                    top_k_tanimoto(&fingerprint_of(query.feature(role)), pool, want).expect("uniform width")
                }
            }
            Backend::Identity { roles, pool } => match sequences_of(query, roles) {
                Some(q) => {
                    let valid: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].is_some()).collect();
                    let seqs: Vec<Vec<BioSequence>> =
                        valid.iter().map(|&i| pool[i].clone().unwrap()).collect();
                    let found = top_k_mean_identity(&q, &seqs, seqs.len()).unwrap_or_default();
                    let mut scored = vec![0.0; pool.len()];
                    for (j, s) in found {
                        scored[valid[j]] = s;
                    }
                    select_top_k(scored.into_iter().enumerate().collect(), want)
                }
                None => (0..pool.len().min(want)).map(|i| (i, 0.0)).collect(),
            },
        };
        hits.into_iter()
            .filter(|&(i, _)| self.ids[i] != query.id)
            .take(n)
            .collect()
    }

    pub fn id(&self, position: usize) -> &str {
        &self.ids[position]
    }
}

/// KNN shot ids, most similar first.
pub fn select_shots_knn(query: &DataRecord, index: &KnnIndex, n: usize) -> Vec<String> {
    index
        .nearest(query, n)
        .into_iter()
        .map(|(i, _)| index.ids[i].clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Split};
    use std::collections::BTreeMap;

    fn rec(id: &str, role: &str, value: &str) -> DataRecord {
        DataRecord {
            id: id.into(),
            features: BTreeMap::from([(role.to_string(), value.to_string())]),
            label: Label::Binary(true),
            subtask: None,
            time: None,
            split: Some(Split::Train),
        }
    }

    fn manifest(ft: &str) -> TaskManifest {
        TaskManifest::parse(&format!("task = t\nrole.x = {ft} X\n")).unwrap()
    }

    #[test]
    fn random_shots_clamp_and_repeat() {
        let pool: Vec<DataRecord> = (0..4).map(|i| rec(&i.to_string(), "x", "C")).collect();
        let refs: Vec<&DataRecord> = pool.iter().collect();
        let q = &pool[0];
        let a = select_shots_random(q, &refs, 10, 1).unwrap();
        assert_eq!(a.len(), 3);
        assert!(!a.contains(&"0".to_string()));
        assert_eq!(a, select_shots_random(q, &refs, 10, 1).unwrap());
        assert_eq!(
            select_shots_random(q, &refs[..1], 2, 1),
            Err(ShotError::EmptyPool)
        );
    }

    #[test]
    fn knn_on_molecules_finds_duplicate_first() {
        let pool = vec![
            rec("a", "x", "CCCCCC"),
            rec("b", "x", "c1ccccc1O"),
            rec("c", "x", "c1ccccc1N"),
            rec("d", "x", "c1ccccc1O"),
        ];
        let refs: Vec<&DataRecord> = pool.iter().collect();
        let index = KnnIndex::build(&manifest("smiles"), &refs).unwrap();
        let q = rec("q", "x", "Oc1ccccc1");
        assert_eq!(select_shots_knn(&q, &index, 2), vec!["b", "d"]);
        // the query's own record is never its shot
        assert_eq!(select_shots_knn(&pool[1], &index, 1), vec!["d"]);
    }

    #[test]
    fn knn_on_sequences() {
        let pool = vec![
            rec("a", "x", "MKVLAA"),
            rec("b", "x", "WWWWWW"),
            rec("c", "x", "MKVLAC"),
        ];
        let refs: Vec<&DataRecord> = pool.iter().collect();
        let index = KnnIndex::build(&manifest("amino_acid"), &refs).unwrap();
        let q = rec("q", "x", "MKVLAC");
        assert_eq!(index.nearest(&q, 3)[0], (2, 100.0));
        assert_eq!(select_shots_knn(&q, &index, 2), vec!["c", "a"]);
    }

    #[test]
    fn text_only_tasks_have_no_index() {
        assert!(KnnIndex::build(&manifest("text"), &[]).is_none());
    }
}
