mod common;

use common::{manifest, record, BINARY_SMILES};
use std::collections::{HashMap, HashSet};
use txf_core::corpus::{assign_splits, split_sizes, DataRecord, Label, Split, SplitMethod, SplitSpec};
use txf_core::promptgen::{build_mixture, build_task_prompts, MixtureSpec, ShotPolicy, TaskCorpus};
use txf_testkit::{chi_square_uniform, within_three_sigma};

fn molecules(n: usize, prefix: &str) -> Vec<DataRecord> {
    (0..n)
        .map(|i| {
            let smiles = format!("{}O", "C".repeat(i % 40 + 1));
            record(
                &format!("{prefix}{i}"),
                &[("drug", &smiles)],
                Label::Binary(i % 3 == 0),
            )
        })
        .collect()
}

#[test]
fn mixture_statistics() {
    let m_big = manifest(&BINARY_SMILES.replace("synthetic_binary", "big"));
    let m_small = manifest(&BINARY_SMILES.replace("synthetic_binary", "small"));
    let big = molecules(900, "b");
    let small = molecules(100, "s");
    let tasks = [
        TaskCorpus {
            manifest: &m_big,
            train: &big,
        },
        TaskCorpus {
            manifest: &m_small,
            train: &small,
        },
    ];
    let n = 100_000u64;
    let samples = build_mixture(&tasks, &MixtureSpec::default(), n as usize).unwrap();
    let big_draws = samples.iter().filter(|s| s.prompt.task == "big").count() as u64;
    assert!(within_three_sigma(big_draws, n, 0.9), "{big_draws}");
    let few = samples.iter().filter(|s| s.drawn_shots > 0).count() as u64;
    assert!(within_three_sigma(few, n, 0.3), "{few}");
    let mut counts = [0u64; 10];
    for s in samples.iter().filter(|s| s.drawn_shots > 0) {
        counts[s.drawn_shots - 1] += 1;
    }
    let (_, p) = chi_square_uniform(&counts);
    assert!(p > 0.01, "{counts:?}");
    for s in &samples {
        assert!(!s.prompt.shots.contains(&s.prompt.id));
        assert!(s.prompt.shots.iter().all(|id| id.starts_with(&s.prompt.id[..1])));
    }
    let again = build_mixture(&tasks, &MixtureSpec::default(), 2000).unwrap();
    let prompts =
        |v: &[txf_core::promptgen::MixtureSample]| v.iter().map(|s| s.prompt.clone()).collect::<Vec<_>>();
    assert_eq!(prompts(&again), prompts(&samples[..2000]));
}

fn split_of(records: &[DataRecord]) -> HashMap<&str, Split> {
    records
        .iter()
        .map(|r| (r.id.as_str(), r.split.unwrap()))
        .collect()
}

#[test]
fn scaffold_groups_never_straddle_splits() {
    let m = manifest(&BINARY_SMILES.replace("split = random", "split = scaffold"));
    let rings = [
        "c1ccccc1",
        "C1CCCCC1",
        "c1ccncc1",
        "C1CCOC1",
        "c1ccc2ccccc2c1",
        "C1CC1",
        "c1ccsc1",
    ];
    let mut records: Vec<DataRecord> = (0..300)
        .map(|i| {
            let smiles = format!(
                "{}{}",
                "C".repeat(i % 5 + 1),
                rings[(i * 7 + i / 11) % rings.len()]
            );
            record(&i.to_string(), &[("drug", &smiles)], Label::Binary(i % 2 == 0))
        })
        .collect();
    records.extend((300..320).map(|i| record(&i.to_string(), &[("drug", "CCO")], Label::Binary(true))));
    assert_eq!(records.len(), 320);
    assign_splits(&mut records, &m, &SplitSpec::new(SplitMethod::Scaffold)).unwrap();
    let mut seen: HashMap<String, Split> = HashMap::new();
    let mut group_size: HashMap<String, usize> = HashMap::new();
    for r in &records {
        let key = txf_chem::scaffold_key(&txf_chem::parse_smiles(r.feature("drug").unwrap()).unwrap());
        *group_size.entry(key.clone()).or_default() += 1;
        assert_eq!(*seen.entry(key).or_insert(r.split.unwrap()), r.split.unwrap());
    }
    let largest = *group_size.values().max().unwrap();
    let sizes = split_sizes(records.len(), [0.8, 0.1, 0.1]);
    let got = Split::ALL.map(|s| records.iter().filter(|r| r.split == Some(s)).count());
    assert!(
        (got[0] as i64 - sizes[0] as i64).unsigned_abs() as usize <= largest,
        "{got:?}"
    );
}

#[test]
fn cold_start_and_combination_keys_stay_in_one_split() {
    let text = "\
task = dti
kind = binary
label = Y
role.drug = smiles Drug
role.target = amino_acid Target
line.drug = Drug SMILES: {drug}
line.target = Target amino acid sequence: {target}
instruction = i
context = c
question = q
option.negative = no
option.positive = yes
metric = auroc
";
    let targets = [
        "MKV", "MKVL", "AAAW", "GGHW", "PPLK", "MMMM", "KKLA", "WWYY", "ACDE", "FGHI", "LMNP", "QRST",
    ];
    let drugs = ["CCO", "CCN", "c1ccccc1", "CC(=O)O", "OCCO", "CCCl"];
    let mut base = Vec::new();
    for (i, t) in targets.iter().enumerate() {
        for (j, d) in drugs.iter().enumerate() {
            base.push(record(
                &format!("{i}-{j}"),
                &[("drug", d), ("target", t)],
                Label::Binary((i + j) % 2 == 0),
            ));
        }
    }
    let cold = manifest(&format!("{text}split = cold_start\nsplit.key = target\n"));
    let mut a = base.clone();
    assign_splits(&mut a, &cold, &SplitSpec::new(SplitMethod::ColdStart)).unwrap();
    let mut by_target: HashMap<&str, HashSet<Split>> = HashMap::new();
    for r in &a {
        by_target
            .entry(r.feature("target").unwrap())
            .or_default()
            .insert(r.split.unwrap());
    }
    assert!(by_target.values().all(|s| s.len() == 1));
    let train_targets: HashSet<&str> = a
        .iter()
        .filter(|r| r.split == Some(Split::Train))
        .map(|r| r.feature("target").unwrap())
        .collect();
    assert!(a
        .iter()
        .filter(|r| r.split == Some(Split::Test))
        .all(|r| !train_targets.contains(r.feature("target").unwrap())));

    let combo = manifest(&format!("{text}split = combination\nsplit.roles = drug target\n"));
    let mut b = base.clone();
    b.extend(base.iter().take(10).map(|r| {
        let mut dup = r.clone();
        dup.id = format!("{}-dup", r.id);
        dup
    }));
    assign_splits(&mut b, &combo, &SplitSpec::new(SplitMethod::Combination)).unwrap();
    let s = split_of(&b);
    for r in b.iter().filter(|r| r.id.ends_with("-dup")) {
        assert_eq!(s[r.id.as_str()], s[r.id.trim_end_matches("-dup")]);
    }
}

#[test]
fn temporal_split_orders_by_time() {
    let m = manifest(&BINARY_SMILES.replace("split = random", "split = temporal\nsplit.time = Year"));
    let mut records: Vec<DataRecord> = (0..50)
        .map(|i| {
            let mut r = record(&i.to_string(), &[("drug", "CCO")], Label::Binary(i % 2 == 0));
            r.time = Some(format!("{}", 2000 + (i * 37) % 50));
            r
        })
        .collect();
    assign_splits(&mut records, &m, &SplitSpec::new(SplitMethod::Temporal)).unwrap();
    let year = |s: Split| {
        records
            .iter()
            .filter(|r| r.split == Some(s))
            .map(|r| r.time.as_ref().unwrap().parse::<i32>().unwrap())
            .collect::<Vec<_>>()
    };
    assert!(year(Split::Train).iter().max() < year(Split::Valid).iter().min());
    assert!(year(Split::Valid).iter().max() < year(Split::Test).iter().min());
    assert_eq!(
        [
            year(Split::Train).len(),
            year(Split::Valid).len(),
            year(Split::Test).len()
        ],
        [40, 5, 5]
    );
}

#[test]
fn knn_shots_come_only_from_earlier_splits() {
    let m = manifest(BINARY_SMILES);
    let mut records = molecules(200, "m");
    assign_splits(&mut records, &m, &SplitSpec::new(SplitMethod::Random)).unwrap();
    let s = split_of(&records);
    let built = build_task_prompts(&m, &records, ShotPolicy::Knn(5), 1, 100_000).unwrap();
    assert!(built.warnings.is_empty());
    let mut test_uses_valid = false;
    for p in &built.prompts {
        assert_eq!(p.shots.len(), 5);
        assert!(!p.shots.contains(&p.id));
        for shot in &p.shots {
            match p.split.unwrap() {
                Split::Train | Split::Valid => assert_eq!(s[shot.as_str()], Split::Train),
                Split::Test => {
                    assert_ne!(s[shot.as_str()], Split::Test);
                    test_uses_valid |= s[shot.as_str()] == Split::Valid;
                }
            }
        }
    }
    assert!(test_uses_valid);
}
