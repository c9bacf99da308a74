use super::manifest::{FeatureType, LabelRange, SplitMethod, TaskManifest};
use super::table::{DataRecord, Split};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::Write;
use thiserror::Error;
use txf_chem::{parse_smiles, scaffold_key};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub method: SplitMethod,
    /// train, valid, test
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(method: SplitMethod) -> Self {
        SplitSpec {
            method,
            fractions: [0.8, 0.1, 0.1],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplitError {
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    Fractions([f64; 3]),
    #[error("{0:?} split needs {1}")]
    Unsupported(SplitMethod, &'static str),
    #[error("record {0:?} lacks a value needed by the split")]
    MissingValue(String),
}

/// Record counts per split for `n` records: train and valid rounded, test takes the rest.
pub fn split_sizes(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let train = ((fractions[0] * n as f64).round() as usize).min(n);
    let valid = ((fractions[1] * n as f64).round() as usize).min(n - train);
    [train, valid, n - train - valid]
}

pub fn assign_splits(
    records: &mut [DataRecord],
    manifest: &TaskManifest,
    spec: &SplitSpec,
) -> Result<(), SplitError> {
    let f = spec.fractions;
    if f.iter().any(|&x| !(x > 0.0)) || ((f[0] + f[1] + f[2]) - 1.0).abs() > 1e-9 {
        return Err(SplitError::Fractions(f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.method {
        SplitMethod::Random => {
            let mut order: Vec<usize> = (0..records.len()).collect();
            order.shuffle(&mut rng);
            cut(records, &order, f);
        }
        SplitMethod::Temporal => {
            if manifest.time_column.is_none() {
                return Err(SplitError::Unsupported(spec.method, "split.time"));
            }
            let mut times = Vec::with_capacity(records.len());
            for r in records.iter() {
                times.push(
                    r.time
                        .clone()
                        .ok_or_else(|| SplitError::MissingValue(r.id.clone()))?,
                );
            }
            let numeric: Option<Vec<f64>> = times.iter().map(|t| t.parse().ok()).collect();
            let mut order: Vec<usize> = (0..records.len()).collect();
            match numeric {
                Some(v) => order.sort_by(|&a, &b| v[a].total_cmp(&v[b])),
                None => order.sort_by(|&a, &b| times[a].cmp(&times[b])),
            }
            cut(records, &order, f);
        }
        SplitMethod::Scaffold => {
            let role = manifest
                .roles
                .iter()
                .find(|r| r.feature_type == FeatureType::Smiles)
                .ok_or(SplitError::Unsupported(spec.method, "a smiles role"))?;
            let keys = group_keys(records, |r| {
                let smiles = r.feature(&role.name)?;
                Some(match parse_smiles(smiles) {
                    Ok(mol) => scaffold_key(&mol),
                    // unparseable molecules form singleton groups
                    Err(_) => format!("!{smiles}"),
                })
            })?;
            let mut groups = groups_in_first_seen_order(&keys);
            // largest first; the sort is stable so equal sizes keep first-seen order
            groups.sort_by(|a, b| b.len().cmp(&a.len()));
            fill(records, &groups, f);
        }
        SplitMethod::ColdStart => {
            let role = manifest
                .cold_start_role
                .as_ref()
                .ok_or(SplitError::Unsupported(spec.method, "split.key"))?;
            let keys = group_keys(records, |r| r.feature(role).map(str::to_string))?;
            let mut groups = groups_in_first_seen_order(&keys);
            groups.shuffle(&mut rng);
            fill(records, &groups, f);
        }
        SplitMethod::Combination => {
            let (a, b) = manifest
                .combination_roles
                .as_ref()
                .ok_or(SplitError::Unsupported(spec.method, "split.roles"))?;
            let keys = group_keys(records, |r| {
                let (x, y) = (r.feature(a)?, r.feature(b)?);
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                Some(format!("{lo}\u{1f}{hi}"))
            })?;
            let mut groups = groups_in_first_seen_order(&keys);
            groups.shuffle(&mut rng);
            fill(records, &groups, f);
        }
    }
    Ok(())
}

fn group_keys(
    records: &[DataRecord],
    key: impl Fn(&DataRecord) -> Option<String>,
) -> Result<Vec<String>, SplitError> {
    records
        .iter()
        .map(|r| key(r).ok_or_else(|| SplitError::MissingValue(r.id.clone())))
        .collect()
}

fn groups_in_first_seen_order(keys: &[String]) -> Vec<Vec<usize>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        let g = *index.entry(k).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

fn cut(records: &mut [DataRecord], order: &[usize], f: [f64; 3]) {
    let [train, valid, _] = split_sizes(order.len(), f);
    for (pos, &i) in order.iter().enumerate() {
        records[i].split = Some(if pos < train {
            Split::Train
        } else if pos < train + valid {
            Split::Valid
        } else {
            Split::Test
        });
    }
}

/// Whole groups go to train until it reaches its target, then to valid, then
/// to test.
fn fill(records: &mut [DataRecord], groups: &[Vec<usize>], f: [f64; 3]) {
    let [train, valid, _] = split_sizes(records.len(), f);
    let (mut n_train, mut n_valid) = (0, 0);
    for g in groups {
        let split = if n_train < train {
            n_train += g.len();
            Split::Train
        } else if n_valid < valid {
            n_valid += g.len();
            Split::Valid
        } else {
            Split::Test
        };
        for &i in g {
            records[i].split = Some(split);
        }
    }
}

/// Min and max of the train labels. `None` when there are no train labels or
/// they are all equal.
pub fn fit_label_range(records: &[DataRecord]) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in records.iter().filter(|r| r.split == Some(Split::Train)) {
        if let Some(v) = r.label.as_number() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo < hi).then_some((lo, hi))
}

/// Replaces a `fit` label range with the train-split range.
pub fn resolve_label_range(manifest: &mut TaskManifest, records: &[DataRecord]) -> bool {
    if manifest.label_range == Some(LabelRange::FitOnTrain) {
        match fit_label_range(records) {
            Some((min, max)) => manifest.label_range = Some(LabelRange::Fixed { min, max }),
            None => return false,
        }
    }
    true
}

/// Two-column TSV: record id and split.
pub fn write_split_audit(records: &[DataRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "record_id\tsplit")?;
    for r in records {
        let s = r.split.map_or("none", Split::as_str);
        writeln!(out, "{}\t{}", r.id, s)?;
    }
    Ok(())
}
