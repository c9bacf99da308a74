//! Acceptance checks: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines come out in order and unbuffered.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};
use txf_chem::{morgan_fingerprint, top_k_tanimoto, Fingerprint, FingerprintPool};
use txf_cli::{
    cmd_build, cmd_compare, cmd_evaluate, cmd_scoreboard, load_manifests, prepare_task, BuildOptions,
    CompareInput, EvaluateOptions, ModelChoice, StubKind,
};
use txf_core::analysis::{contamination_scan_str, signed_rank_test, FeatureSet, ScoreboardOptions};
use txf_core::corpus::{load_table, DataRecord, Split, TaskManifest};
use txf_core::evalharness::metrics::auroc;
use txf_core::evalharness::EvalResult;
use txf_core::promptgen::{
    bin_label, build_mixture, read_jsonl, render_prompt, unbin_label, BinningSpec, MixtureSpec, ShotPolicy,
    TaskCorpus,
};
use txf_testkit::{
    auroc_pairwise, chi_square_uniform, contains_naive, molecule_corpus, random_permutation, random_string,
    signed_rank_p_enumerated, top_k_tanimoto_naive, within_three_sigma, write_synthetic_workspace,
};

type Outcome = Result<String, String>;

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn sota_tables() -> Vec<PathBuf> {
    vec![
        repo("fixtures/sota_binary.csv"),
        repo("fixtures/sota_regression_generation.csv"),
    ]
}

fn scoreboard_counts() -> Outcome {
    let r = cmd_scoreboard(&sota_tables(), None, ScoreboardOptions::default()).map_err(fail)?;
    let c = &r.counts;
    let detail = format!(
        "exceed {} (want 22), near {} (want 21), near-or-above {} (want 43)",
        c.exceed, c.near, r.near_or_above
    );
    ensure(c.exceed == 22 && c.near == 21 && r.near_or_above == 43, detail)
}

fn feature_type_medians() -> Outcome {
    let r = cmd_scoreboard(&sota_tables(), None, ScoreboardOptions::default()).map_err(fail)?;
    let text = fs::read_to_string(repo("fixtures/feature_type_medians.csv")).map_err(fail)?;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let (ft, v) = line.rsplit_once(',').ok_or("bad medians row")?;
        let want: f64 = v.parse().map_err(fail)?;
        let got = *r
            .median_relative_difference
            .get(ft)
            .ok_or_else(|| format!("no median for {ft}"))?;
        worst = worst.max((got - want).abs());
        checked += 1;
    }
    ensure(
        checked == 6 && worst <= 0.005,
        format!("{checked} feature types, max |error| {worst:.4} (tolerance 0.005)"),
    )
}

fn comparison(file: &str, a: &str, b: &str, wins: usize, p: f64) -> Outcome {
    let r = cmd_compare(&CompareInput::Table {
        path: repo(file),
        a: a.into(),
        b: b.into(),
    })
    .map_err(fail)?;
    let ratio = r.p_value / p;
    ensure(
        r.wins_a == wins && (0.1..=10.0).contains(&ratio),
        format!(
            "wins {}/{} (want {wins}), p {:.3e} (want within 10x of {p:.2e})",
            r.wins_a, r.n_pairs, r.p_value
        ),
    )
}

fn auroc_vs_pairwise() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..200 {
        let n = rng.gen_range(2..=1000);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..25) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        let (x, y) = (auroc(&scores, &labels), auroc_pairwise(&scores, &labels));
        let same = match (x, y) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (x, y) => x == y,
        };
        if !same {
            return Err(format!("instance {i}: {x:?} vs {y:?}"));
        }
    }
    Ok("AUROC equals pairwise count on 200 instances".into())
}

fn wilcoxon_vs_enumeration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-5i32..=5) as f64 / 5.0).collect();
        let (_, _, p, _) = signed_rank_test(&d);
        let want = signed_rank_p_enumerated(&d);
        if (p - want).abs() > 1e-12 {
            return Err(format!("{d:?}: {p} vs {want}"));
        }
    }
    Ok("exact p equals sign enumeration for n <= 12".into())
}

fn bin_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let min = rng.gen_range(-1000.0..1000.0);
        let max = min + rng.gen_range(1e-3..2000.0);
        let spec = BinningSpec::new(min, max, 1000).map_err(fail)?;
        let y = rng.gen_range(min..=max);
        let (bin, _) = bin_label(y, &spec).map_err(fail)?;
        let back = unbin_label(bin as i64, &spec).map_err(fail)?;
        if (back - y).abs() > (max - min) / 2000.0 * (1.0 + 1e-9) {
            return Err(format!("{y} in [{min}, {max}] came back as {back}"));
        }
    }
    Ok("10^4 round trips within half a bin".into())
}

fn fingerprint_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mols = molecule_corpus();
    for (smiles, mol) in &mols {
        let fp = morgan_fingerprint(mol, 2, 2048);
        for _ in 0..100 {
            let p = random_permutation(mol.atom_count(), &mut rng);
            if morgan_fingerprint(&mol.permuted(&p), 2, 2048) != fp {
                return Err(format!("{smiles} changes under renumbering"));
            }
        }
    }
    ensure(
        mols.len() == 50,
        format!("{} molecules x 100 renumberings", mols.len()),
    )
}

fn contamination_vs_naive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for case in 0..100 {
        let corpus = random_string(b"ACGT", 5000, &mut rng);
        let records: Vec<FeatureSet> = (0..50)
            .map(|i| {
                let features = (0..rng.gen_range(1..4))
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            let at = rng.gen_range(0..corpus.len() - 16);
                            corpus[at..at + rng.gen_range(1..16)].to_string()
                        } else {
                            random_string(b"ACGT", rng.gen_range(6..14), &mut rng)
                        }
                    })
                    .collect();
                FeatureSet {
                    id: i.to_string(),
                    features,
                }
            })
            .collect();
        let report = contamination_scan_str(&records, &corpus);
        for (r, f) in records.iter().zip(&report.flags) {
            if f.flagged != r.features.iter().any(|x| contains_naive(&corpus, x)) {
                return Err(format!("case {case}, record {}", r.id));
            }
        }
    }
    Ok("flags equal naive substring search on 100 sets".into())
}

fn top_k_vs_naive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mols = molecule_corpus();
    let mut pool = FingerprintPool::new(2048, 2);
    let mut fps = Vec::new();
    for _ in 0..10_000 {
        let fp = if rng.gen_bool(0.5) {
            morgan_fingerprint(&mols[rng.gen_range(0..mols.len())].1, 2, 2048)
        } else {
            let k = rng.gen_range(0..40);
            Fingerprint::from_bits(2048, (0..k).map(|_| rng.gen_range(0..2048)).collect::<Vec<_>>())
        };
        pool.push(&fp).map_err(fail)?;
        fps.push(fp);
    }
    for trial in 0..20 {
        let q = &fps[rng.gen_range(0..fps.len())];
        let k = [1, 10, 100, 10_000][trial % 4];
        if top_k_tanimoto(q, &pool, k).map_err(fail)? != top_k_tanimoto_naive(q, &fps, k) {
            return Err(format!("trial {trial}, k {k}"));
        }
    }
    Ok("top-k equals full sort on a 10^4 pool".into())
}

fn properties() -> Outcome {
    let checks: [(&str, fn() -> Outcome); 6] = [
        ("auroc", auroc_vs_pairwise),
        ("wilcoxon", wilcoxon_vs_enumeration),
        ("binning", bin_round_trip),
        ("fingerprint", fingerprint_invariance),
        ("contamination", contamination_vs_naive),
        ("top-k", top_k_vs_naive),
    ];
    let mut parts = Vec::new();
    for (name, check) in checks {
        check().map_err(|e| format!("{name}: {e}"))?;
        parts.push(name);
    }
    Ok(format!("{} agree with their oracles", parts.join(", ")))
}

const ZERO_SHOT_GOLDEN: [&str; 8] = [
    "bbb_martins",
    "mhc1_iedb",
    "mirtarbase",
    "phase1",
    "caco2_wang",
    "gdsc1",
    "bindingdb_kd",
    "uspto",
];

fn golden_prompts() -> Outcome {
    let golden = repo("fixtures/golden");
    let out = tempfile::tempdir().map_err(fail)?;
    cmd_build(&BuildOptions {
        manifests: golden.clone(),
        data: golden.clone(),
        out: out.path().to_path_buf(),
        seed: 1,
        shots: ShotPolicy::Zero,
        budget: 1 << 20,
        tasks: ZERO_SHOT_GOLDEN.iter().map(|s| s.to_string()).collect(),
        mixture: None,
    })
    .map_err(fail)?;
    let mut mismatched = Vec::new();
    for task in ZERO_SHOT_GOLDEN {
        let mut prompts = Vec::new();
        for split in ["train", "valid", "test"] {
            let text =
                fs::read_to_string(out.path().join(task).join(format!("{split}.jsonl"))).map_err(fail)?;
            prompts.extend(read_jsonl(&text).map_err(fail)?);
        }
        let expected = fs::read_to_string(golden.join(format!("{task}.txt"))).map_err(fail)?;
        if prompts.len() != 1 || format!("{} {}", prompts[0].prompt, prompts[0].target) != expected {
            mismatched.push(task);
        }
    }
    let name = "bbb_martins_10shot";
    let manifest =
        TaskManifest::parse(&fs::read_to_string(golden.join(format!("{name}.manifest"))).map_err(fail)?)
            .map_err(fail)?;
    let table = load_table(
        &golden.join(manifest.data.as_deref().unwrap_or_default()),
        &manifest,
    )
    .map_err(fail)?;
    let (query, shots) = table.records.split_last().ok_or("empty table")?;
    let shots: Vec<&DataRecord> = shots.iter().collect();
    let p = render_prompt(query, &manifest, &shots).map_err(fail)?;
    let expected = fs::read_to_string(golden.join(format!("{name}.txt"))).map_err(fail)?;
    if format!("{} {}", p.prompt, p.target) != expected {
        mismatched.push(name);
    }
    ensure(
        mismatched.is_empty(),
        format!("9 golden prompts, mismatched: {mismatched:?}"),
    )
}

fn evaluate(
    root: &Path,
    out: &str,
    task: &str,
    stub: StubKind,
    concurrency: usize,
) -> Result<EvalResult, String> {
    let out = root.join(out);
    cmd_evaluate(&EvaluateOptions {
        manifests: root.join("manifests"),
        data: root.join("data"),
        out: out.clone(),
        seed: 1,
        shots: ShotPolicy::Zero,
        budget: 2048,
        tasks: vec![task.into()],
        model: ModelChoice::Stub(stub),
        concurrency,
        timeout: Duration::from_secs(5),
    })
    .map_err(fail)?;
    let text = fs::read_to_string(out.join(task).join("report.json")).map_err(fail)?;
    serde_json::from_str(&text).map_err(fail)
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let root = dir.path();
    write_synthetic_workspace(root, 100, 50);
    let echo_gen = evaluate(root, "echo", "synthetic_generation", StubKind::Echo, 4)?.value;
    let echo_bin = evaluate(root, "echo", "synthetic_binary", StubKind::Echo, 4)?.value;
    let majority = evaluate(root, "majority", "synthetic_binary", StubKind::Majority, 4)?.value;
    evaluate(root, "c1", "synthetic_binary", StubKind::Knn, 1)?;
    evaluate(root, "c8", "synthetic_binary", StubKind::Knn, 8)?;
    let report = |d: &str| fs::read(root.join(d).join("synthetic_binary/report.json")).unwrap_or_default();
    let same = report("c1") == report("c8");
    ensure(
        echo_gen == Some(1.0) && echo_bin == Some(1.0) && majority == Some(0.5) && same,
        format!(
            "echo set accuracy {echo_gen:?}, echo AUROC {echo_bin:?}, majority AUROC {majority:?}, \
             concurrency 1 and 8 identical: {same}"
        ),
    )
}

fn mixture_statistics() -> Outcome {
    let dir = tempfile::tempdir().map_err(fail)?;
    let root = dir.path();
    write_synthetic_workspace(root, 600, 300);
    let manifests = load_manifests(&root.join("manifests"), &[]).map_err(fail)?;
    let prepared = manifests
        .iter()
        .map(|m| prepare_task(m, &root.join("data"), 1))
        .collect::<Result<Vec<_>, _>>()
        .map_err(fail)?;
    let trains: Vec<Vec<DataRecord>> = prepared
        .iter()
        .map(|t| {
            t.records
                .iter()
                .filter(|r| r.split == Some(Split::Train))
                .cloned()
                .collect()
        })
        .collect();
    let corpora: Vec<TaskCorpus> = prepared
        .iter()
        .zip(&trains)
        .map(|(t, train)| TaskCorpus {
            manifest: &t.manifest,
            train,
        })
        .collect();
    let n = 100_000u64;
    let samples = build_mixture(&corpora, &MixtureSpec::default(), n as usize).map_err(fail)?;
    let zero = samples.iter().filter(|s| s.drawn_shots == 0).count() as u64;
    let mut counts = [0u64; 10];
    for s in samples.iter().filter(|s| s.drawn_shots > 0) {
        counts[s.drawn_shots - 1] += 1;
    }
    let (stat, p) = chi_square_uniform(&counts);
    ensure(
        samples.len() as u64 == n && within_three_sigma(zero, n, 0.7) && p > 0.01,
        format!(
            "zero-shot fraction {:.4} (0.7 +/- 3 sigma), shot counts chi-square {stat:.2}, p {p:.3} (alpha 0.01)",
            zero as f64 / n as f64
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("1 scoreboard counts", Duration::from_secs(1), scoreboard_counts),
        (
            "2 feature-type medians",
            Duration::from_secs(1),
            feature_type_medians,
        ),
        ("3 model-size comparison", Duration::from_secs(1), || {
            comparison("fixtures/model_sizes.csv", "model_m", "model_s", 57, 1.65e-7)
        }),
        ("4 context comparison", Duration::from_secs(1), || {
            comparison(
                "fixtures/context_ablation.csv",
                "with_context",
                "no_context",
                49,
                4.9e-6,
            )
        }),
        ("5 oracle properties", Duration::from_secs(60), properties),
        ("6 golden prompts", Duration::from_secs(60), golden_prompts),
        ("7 stub pipeline", Duration::from_secs(60), end_to_end),
        (
            "8 mixture statistics",
            Duration::from_secs(120),
            mixture_statistics,
        ),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= limit => (true, d),
            Ok(d) => (false, format!("{d}; took longer than {limit:?}")),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {detail} [{:.2}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
