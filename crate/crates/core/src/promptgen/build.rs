use super::render::{
    estimate_tokens, fit_length_budget, render_prompt, shot_source_splits, PromptRecord, RenderError,
};
use super::shots::{sample_shots, KnnIndex};
use crate::corpus::{DataRecord, Split, TaskManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotPolicy {
    Zero,
    Random(usize),
    Knn(usize),
}

impl FromStr for ShotPolicy {
    type Err = String;

    /// `0`, `random<k>` or `knn<k>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let count = |rest: &str| {
            rest.parse::<usize>()
                .ok()
                .filter(|&k| k > 0)
                .ok_or_else(|| format!("bad shot count in {s:?}"))
        };
        if s == "0" {
            Ok(ShotPolicy::Zero)
        } else if let Some(rest) = s.strip_prefix("random") {
            Ok(ShotPolicy::Random(count(rest)?))
        } else if let Some(rest) = s.strip_prefix("knn") {
            Ok(ShotPolicy::Knn(count(rest)?))
        } else {
            Err(format!("shot policy {s:?} is not 0, random<k> or knn<k>"))
        }
    }
}

impl fmt::Display for ShotPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShotPolicy::Zero => write!(f, "0"),
            ShotPolicy::Random(k) => write!(f, "random{k}"),
            ShotPolicy::Knn(k) => write!(f, "knn{k}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuiltPrompts {
    /// In record order.
    pub prompts: Vec<PromptRecord>,
    pub warnings: Vec<String>,
}

/// Prompts for every record with a split. Shots come from the splits that
/// precede the record's own (train for train and valid, train and valid for
/// test).
pub fn build_task_prompts(
    manifest: &TaskManifest,
    records: &[DataRecord],
    policy: ShotPolicy,
    seed: u64,
    budget: usize,
) -> Result<BuiltPrompts, RenderError> {
    let mut warnings = Vec::new();
    let pool_of = |s: Split| -> Vec<usize> {
        let allowed = shot_source_splits(Some(s));
        (0..records.len())
            .filter(|&i| records[i].split.is_some_and(|x| allowed.contains(&x)))
            .collect()
    };
    let train_pool = pool_of(Split::Train);
    let test_pool = pool_of(Split::Test);
    let pool_for = |s: Split| if s == Split::Test { &test_pool } else { &train_pool };

    let mut shots: Vec<Vec<usize>> = vec![Vec::new(); records.len()];
    let mut policy = policy;
    if let ShotPolicy::Knn(k) = policy {
        let refs = |pool: &[usize]| pool.iter().map(|&i| &records[i]).collect::<Vec<_>>();
        match (
            KnnIndex::build(manifest, &refs(&train_pool)),
            KnnIndex::build(manifest, &refs(&test_pool)),
        ) {
            (Some(train_index), Some(test_index)) => {
                shots = records
                    .par_iter()
                    .map(|r| match r.split {
                        None => Vec::new(),
                        Some(s) => {
                            let (index, pool) = if s == Split::Test {
                                (&test_index, &test_pool)
                            } else {
                                (&train_index, &train_pool)
                            };
                            index.nearest(r, k).into_iter().map(|(p, _)| pool[p]).collect()
                        }
                    })
                    .collect();
            }
            _ => {
                warnings.push(format!(
                    "{}: no molecule or sequence role, using random shots",
                    manifest.task
                ));
                policy = ShotPolicy::Random(k);
            }
        }
    }
    if let ShotPolicy::Random(k) = policy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, r) in records.iter().enumerate() {
            if let Some(s) = r.split {
                let candidates: Vec<usize> = pool_for(s)
                    .iter()
                    .copied()
                    .filter(|&j| records[j].id != r.id)
                    .collect();
                shots[i] = sample_shots(&candidates, k, &mut rng);
            }
        }
    }

    let prompts = records
        .par_iter()
        .zip(shots.par_iter())
        .filter(|(r, _)| r.split.is_some())
        .map(|(r, s)| {
            let shot_refs: Vec<&DataRecord> = s.iter().map(|&j| &records[j]).collect();
            render_prompt(r, manifest, &shot_refs).map(|p| fit_length_budget(p, budget, estimate_tokens))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BuiltPrompts { prompts, warnings })
}
