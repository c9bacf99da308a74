mod common;

use common::{manifest, record, BINARY_SMILES, GENERATION};
use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;
use txf_core::analysis::filtered_eval;
use txf_core::corpus::{assign_splits, DataRecord, Label, Split, SplitMethod, SplitSpec, TaskManifest};
use txf_core::evalharness::{
    evaluate_task, ConstantStub, EvalConfig, GenerationRequest, GenerationResponse, LookupStub, ModelClient,
    RetryPolicy, TransportError,
};
use txf_core::promptgen::{build_task_prompts, PromptRecord, ShotPolicy};

fn split(mut records: Vec<DataRecord>, m: &TaskManifest) -> Vec<DataRecord> {
    assign_splits(&mut records, m, &SplitSpec::new(SplitMethod::Random)).unwrap();
    records
}

fn test_prompts(m: &TaskManifest, records: &[DataRecord]) -> Vec<PromptRecord> {
    build_task_prompts(m, records, ShotPolicy::Zero, 1, 2048)
        .unwrap()
        .prompts
        .into_iter()
        .filter(|p| p.split == Some(Split::Test))
        .collect()
}

/// Alcohols are active and alkylbenzenes inactive, so structure predicts the label.
fn separable_binary(n: usize) -> Vec<DataRecord> {
    (0..n)
        .map(|i| {
            let k = i / 2 + 1;
            let (smiles, active) = if i % 2 == 0 {
                (format!("{}O", "C".repeat(k)), true)
            } else {
                (format!("c1ccccc1{}", "C".repeat(k)), false)
            };
            record(&format!("r{i}"), &[("drug", &smiles)], Label::Binary(active))
        })
        .collect()
}

fn generation(n: usize) -> Vec<DataRecord> {
    (0..n)
        .map(|i| {
            let chain = "C".repeat(i + 1);
            record(
                &format!("g{i}"),
                &[("product", &format!("{chain}C(=O)OC"))],
                Label::Text(format!("{chain}C(=O)O.CO")),
            )
        })
        .collect()
}

#[test]
fn echo_stub_scores_perfect_set_accuracy() {
    let m = manifest(GENERATION);
    let records = split(generation(50), &m);
    let prompts = test_prompts(&m, &records);
    assert_eq!(prompts.len(), 5);
    let r = evaluate_task(&m, &prompts, &LookupStub::echo(&prompts), &EvalConfig::default()).unwrap();
    assert_eq!(r.value, Some(1.0));
    assert_eq!(r.invalid, 0);
}

#[test]
fn majority_stub_is_at_chance_on_a_balanced_task() {
    let m = manifest(BINARY_SMILES);
    let records = split(separable_binary(100), &m);
    let prompts = test_prompts(&m, &records);
    let stub = ConstantStub::majority(records.iter().map(|r| match r.label {
        Label::Binary(true) => "(B)",
        _ => "(A)",
    }));
    assert_eq!(stub.answer, "(B)");
    let r = evaluate_task(&m, &prompts, &stub, &EvalConfig::default()).unwrap();
    assert_eq!(r.value, Some(0.5));
}

#[test]
fn nearest_neighbour_stub_beats_majority_on_separable_data() {
    let m = manifest(BINARY_SMILES);
    let records = split(separable_binary(100), &m);
    let prompts = test_prompts(&m, &records);
    let train: Vec<&DataRecord> = records.iter().filter(|r| r.split == Some(Split::Train)).collect();
    let knn = LookupStub::nearest_neighbour(&m, &prompts, &records, &train).unwrap();
    let nn = evaluate_task(&m, &prompts, &knn, &EvalConfig::default()).unwrap();
    let majority = evaluate_task(
        &m,
        &prompts,
        &ConstantStub { answer: "(B)".into() },
        &EvalConfig::default(),
    )
    .unwrap();
    assert!(
        nn.value.unwrap() > majority.value.unwrap(),
        "{:?} vs {:?}",
        nn.value,
        majority.value
    );
    assert_eq!(nn.value, Some(1.0));
}

#[test]
fn results_do_not_depend_on_concurrency() {
    let m = manifest(BINARY_SMILES);
    let records = split(separable_binary(200), &m);
    let prompts = test_prompts(&m, &records);
    let train: Vec<&DataRecord> = records.iter().filter(|r| r.split == Some(Split::Train)).collect();
    let knn = LookupStub::nearest_neighbour(&m, &prompts, &records, &train).unwrap();
    let runs: Vec<String> = [1, 2, 7, 32]
        .into_iter()
        .map(|c| {
            let cfg = EvalConfig {
                concurrency: c,
                ..Default::default()
            };
            serde_json::to_string(&evaluate_task(&m, &prompts, &knn, &cfg).unwrap()).unwrap()
        })
        .collect();
    assert!(runs.windows(2).all(|w| w[0] == w[1]));
}

struct Failing {
    calls: AtomicUsize,
    error: TransportError,
}

impl ModelClient for Failing {
    fn generate(&self, _: &GenerationRequest) -> Result<GenerationResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Err(self.error.clone())
    }
}

#[test]
fn failed_requests_are_retried_then_kept_as_invalid_rows() {
    let m = manifest(BINARY_SMILES);
    let records = split(separable_binary(40), &m);
    let prompts = test_prompts(&m, &records);
    let cfg = EvalConfig {
        retry: RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        },
        ..Default::default()
    };
    let flaky = Failing {
        calls: AtomicUsize::new(0),
        error: TransportError::Status(503),
    };
    let r = evaluate_task(&m, &prompts, &flaky, &cfg).unwrap();
    assert_eq!(flaky.calls.load(Ordering::SeqCst), 3 * prompts.len());
    assert_eq!(r.n, prompts.len());
    assert_eq!(r.transport_failures, prompts.len());
    assert_eq!(r.invalid, prompts.len());

    let refused = Failing {
        calls: AtomicUsize::new(0),
        error: TransportError::Status(400),
    };
    evaluate_task(&m, &prompts, &refused, &cfg).unwrap();
    assert_eq!(refused.calls.load(Ordering::SeqCst), prompts.len());
}

#[test]
fn filtering_recomputes_over_unflagged_rows() {
    let m = manifest(BINARY_SMILES);
    let records = split(separable_binary(100), &m);
    let prompts = test_prompts(&m, &records);
    let mut m_acc = m.clone();
    m_acc.metric = Some(txf_core::corpus::MetricId::Accuracy);
    let r = evaluate_task(
        &m_acc,
        &prompts,
        &ConstantStub { answer: "(B)".into() },
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(filtered_eval(&r, &HashSet::new()), r);

    // the constant answer is wrong exactly on the negatives; dropping them leaves only hits
    let wrong: HashSet<String> = r
        .rows
        .iter()
        .filter(|row| row.prediction != row.target)
        .map(|row| row.id.clone())
        .collect();
    let f = filtered_eval(&r, &wrong);
    assert!(f.value.unwrap() > r.value.unwrap());
    assert_eq!(f.value, Some(1.0));

    let auroc = evaluate_task(
        &m,
        &prompts,
        &ConstantStub { answer: "(B)".into() },
        &EvalConfig::default(),
    )
    .unwrap();
    assert_eq!(filtered_eval(&auroc, &wrong).value, None);
    let all: HashSet<String> = auroc.rows.iter().map(|row| row.id.clone()).collect();
    let empty = filtered_eval(&auroc, &all);
    assert_eq!((empty.n, empty.value), (0, None));
}
