//! Prompt rendering, regression binning, shot selection and the training mixture.

pub mod binning;
pub mod build;
pub mod mixture;
pub mod render;
pub mod shots;

pub use binning::{bin_label, render_bin, unbin_label, BinError, BinningSpec};
pub use build::{build_task_prompts, BuiltPrompts, ShotPolicy};
pub use mixture::{build_mixture, MixtureSample, MixtureSpec, TaskCorpus};
pub use render::{
    estimate_tokens, fit_length_budget, read_jsonl, render_prompt, render_target, shot_source_splits,
    write_jsonl, PromptRecord, RenderError, TokenEstimator,
};
pub use shots::{sample_shots, select_shots_knn, select_shots_random, KnnIndex, ShotError};
