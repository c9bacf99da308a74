#![allow(dead_code)]

use std::collections::BTreeMap;
use txf_core::corpus::{DataRecord, Label, Split, TaskManifest};

pub fn record(id: &str, features: &[(&str, &str)], label: Label) -> DataRecord {
    DataRecord {
        id: id.to_string(),
        features: features
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect::<BTreeMap<_, _>>(),
        label,
        subtask: None,
        time: None,
        split: None,
    }
}

pub fn with_split(mut r: DataRecord, s: Split) -> DataRecord {
    r.split = Some(s);
    r
}

pub fn manifest(text: &str) -> TaskManifest {
    TaskManifest::parse(text).expect("test manifest parses")
}

pub const BINARY_SMILES: &str = "\
task = synthetic_binary
kind = binary
label = Y
role.drug = smiles Drug
line.drug = Drug SMILES: {drug}
instruction = Answer the following question about drug properties.
context = Synthetic task.
question = Given a drug SMILES string, predict whether it
option.negative = is inactive
option.positive = is active
split = random
metric = auroc
";

pub const GENERATION: &str = "\
task = synthetic_generation
kind = generation
label = Y
role.product = smiles Product
line.product = Product SMILES: {product}
instruction = Answer the following question about reactions.
context = Synthetic task.
question = Given a product SMILES string, predict the reactant SMILES string.
split = random
metric = set_accuracy
";
