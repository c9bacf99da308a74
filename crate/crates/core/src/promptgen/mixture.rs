use super::render::{estimate_tokens, fit_length_budget, render_prompt, PromptRecord, RenderError};
use super::shots::sample_shots;
use crate::corpus::{DataRecord, TaskManifest};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::ops::RangeInclusive;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub zero_shot_fraction: f64,
    pub shot_range: RangeInclusive<usize>,
    pub input_budget: usize,
    pub output_budget: usize,
    pub seed: u64,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            zero_shot_fraction: 0.7,
            shot_range: 1..=10,
            input_budget: 2048,
            output_budget: 512,
            seed: 1,
        }
    }
}

/// One task's manifest and its train records.
pub struct TaskCorpus<'a> {
    pub manifest: &'a TaskManifest,
    pub train: &'a [DataRecord],
}

#[derive(Debug, Clone)]
pub struct MixtureSample {
    pub prompt: PromptRecord,
    /// Shots drawn before the length budget was applied.
    pub drawn_shots: usize,
}

/// Training mixture: tasks drawn in proportion to their train size, records
/// uniformly within a task, and random same-task shots for the few-shot part.
pub fn build_mixture(
    tasks: &[TaskCorpus<'_>],
    spec: &MixtureSpec,
    count: usize,
) -> Result<Vec<MixtureSample>, RenderError> {
    assert!(!tasks.is_empty(), "mixture needs at least one task");
    assert!((0.0..=1.0).contains(&spec.zero_shot_fraction));
    assert!(!spec.shot_range.is_empty());
    let weights: Vec<usize> = tasks.iter().map(|t| t.train.len()).collect();
    let pick_task = WeightedIndex::new(&weights).expect("some task has train records");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let task = &tasks[pick_task.sample(&mut rng)];
        let q = rng.gen_range(0..task.train.len());
        let drawn = if rng.gen_bool(1.0 - spec.zero_shot_fraction) {
            rng.gen_range(spec.shot_range.clone())
        } else {
            0
        };
        let shots = if drawn == 0 {
            Vec::new()
        } else {
            let candidates: Vec<usize> = (0..task.train.len())
                .filter(|&j| task.train[j].id != task.train[q].id)
                .collect();
            sample_shots(&candidates, drawn, &mut rng)
        };
        let refs: Vec<&DataRecord> = shots.iter().map(|&j| &task.train[j]).collect();
        let prompt = render_prompt(&task.train[q], task.manifest, &refs)?;
        out.push(MixtureSample {
            prompt: fit_length_budget(prompt, spec.input_budget, estimate_tokens),
            drawn_shots: drawn,
        });
    }
    Ok(out)
}
