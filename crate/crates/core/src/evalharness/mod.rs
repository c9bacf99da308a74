//! Model client contract, answer parsing, metrics and per-task evaluation.

pub mod answers;
pub mod client;
pub mod harness;
pub mod metrics;

pub use answers::{parse_binary_answer, parse_regression_answer, BinaryAnswer, RegressionAnswer};
pub use client::{
    ConstantStub, GenerationRequest, GenerationResponse, HttpClient, LookupStub, ModelClient, TransportError,
};
pub use harness::{
    compute_metric, evaluate_task, summarize, write_rows_csv, EvalConfig, EvalError, EvalResult, ExampleRow,
    RetryPolicy,
};
