//! Slow, obviously-correct reference implementations used as test oracles,
//! plus random input generators. Nothing here is meant for production use.

use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use txf_chem::{parse_smiles, tanimoto, Fingerprint, Molecule};

pub const MOLECULES: &str = include_str!("../../chem/tests/data/molecules.smi");

pub fn molecule_corpus() -> Vec<(String, Molecule)> {
    MOLECULES
        .lines()
        .filter_map(|l| l.split_whitespace().next())
        .map(|s| (s.to_string(), parse_smiles(s).expect("corpus parses")))
        .collect()
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn random_string(alphabet: &[u8], len: usize, rng: &mut impl Rng) -> String {
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect()
}

/// Every global alignment of `a` and `b`, as (score, identity) under
/// match/mismatch/gap scores. Exponential; keep inputs short.
pub fn all_alignments(a: &[u8], b: &[u8], scores: (i64, i64, i64)) -> Vec<(i64, f64)> {
    fn walk(a: &[u8], b: &[u8], s: (i64, i64, i64), acc: (i64, usize, usize), out: &mut Vec<(i64, f64)>) {
        let (score, matches, len) = acc;
        if a.is_empty() && b.is_empty() {
            let id = if len == 0 {
                100.0
            } else {
                100.0 * matches as f64 / len as f64
            };
            out.push((score, id));
            return;
        }
        if let (Some(x), Some(y)) = (a.first(), b.first()) {
            let hit = x == y;
            let delta = if hit { s.0 } else { s.1 };
            walk(
                &a[1..],
                &b[1..],
                s,
                (score + delta, matches + hit as usize, len + 1),
                out,
            );
        }
        if !a.is_empty() {
            walk(&a[1..], b, s, (score + s.2, matches, len + 1), out);
        }
        if !b.is_empty() {
            walk(a, &b[1..], s, (score + s.2, matches, len + 1), out);
        }
    }
    let mut out = Vec::new();
    walk(a, b, scores, (0, 0, 0), &mut out);
    out
}

/// (wins + ties / 2) / (P N) over every positive-negative pair.
pub fn auroc_pairwise(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut num, mut pairs) = (0.0, 0usize);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                num += 1.0;
            } else if scores[i] == scores[j] {
                num += 0.5;
            }
        }
    }
    (pairs > 0).then(|| num / pairs as f64)
}

/// Step-wise area under the precision-recall curve: walk the ranking one
/// example at a time (descending score, input order among ties) and add
/// precision times the recall gained at each step, recounting from scratch.
pub fn auprc_steps(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap());
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    for k in 1..=order.len() {
        let tp = order[..k].iter().filter(|&&i| labels[i]).count();
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / k as f64;
        area += precision * (recall - prev_recall);
        prev_recall = recall;
    }
    Some(area)
}

/// 1-based ranks, ties sharing the mean of their positions, by counting.
pub fn ranks_by_counting(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_textbook(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Two-sided signed-rank p by enumerating all 2^n sign patterns of the
/// nonzero differences: P(min(W+, W-) <= observed).
pub fn signed_rank_p_enumerated(differences: &[f64]) -> f64 {
    let d: Vec<f64> = differences.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let ranks = ranks_by_counting(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, &x)| x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let observed = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let wp: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if wp.min(total - wp) <= observed + 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

pub fn contains_naive(haystack: &str, needle: &str) -> bool {
    let (h, n) = (haystack.as_bytes(), needle.as_bytes());
    !n.is_empty() && h.len() >= n.len() && (0..=h.len() - n.len()).any(|i| &h[i..i + n.len()] == n)
}

/// Full sort of Tanimoto similarities, descending, ties by ascending index.
pub fn top_k_tanimoto_naive(query: &Fingerprint, pool: &[Fingerprint], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = pool
        .iter()
        .enumerate()
        .map(|(i, fp)| (i, tanimoto(query, fp).unwrap()))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    all.truncate(k);
    all
}

/// Pearson chi-square statistic of observed counts against equal expectation,
/// and its upper-tail p-value.
pub fn chi_square_uniform(counts: &[u64]) -> (f64, f64) {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    (stat, 1.0 - dist.cdf(stat))
}

/// |observed fraction - p| <= 3 sigma of a binomial proportion over `n` draws.
pub fn within_three_sigma(hits: u64, n: u64, p: f64) -> bool {
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    ((hits as f64 / n as f64) - p).abs() <= 3.0 * sigma
}

pub const SYNTHETIC_BINARY_MANIFEST: &str = "\
task = synthetic_binary
kind = binary
data = synthetic_binary.tsv
id = id
label = Y
role.drug = smiles Drug
line.drug = Drug SMILES: {drug}
instruction = Answer the following question about drug properties.
context = Alcohols are active in this synthetic assay; alkylbenzenes are not.
question = Given a drug SMILES string, predict whether it
option.negative = is inactive
option.positive = is active
split = random
metric = auroc
";

pub const SYNTHETIC_GENERATION_MANIFEST: &str = "\
task = synthetic_generation
kind = generation
data = synthetic_generation.tsv
id = id
label = Reactants
role.product = smiles Product
line.product = Product SMILES: {product}
instruction = Answer the following question about reactions.
context = Esters in this synthetic set come from an acid and methanol.
question = Given a product SMILES string, predict the reactant SMILES string.
split = random
metric = set_accuracy
";

/// Writes `manifests/` and `data/` under `root` with a balanced binary task
/// of `binary_rows` rows (alcohols active, alkylbenzenes inactive) and a
/// generation task of `generation_rows` ester hydrolyses.
pub fn write_synthetic_workspace(root: &std::path::Path, binary_rows: usize, generation_rows: usize) {
    let manifests = root.join("manifests");
    let data = root.join("data");
    std::fs::create_dir_all(&manifests).unwrap();
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(
        manifests.join("synthetic_binary.manifest"),
        SYNTHETIC_BINARY_MANIFEST,
    )
    .unwrap();
    std::fs::write(
        manifests.join("synthetic_generation.manifest"),
        SYNTHETIC_GENERATION_MANIFEST,
    )
    .unwrap();
    let mut binary = String::from("id\tDrug\tY\n");
    for i in 0..binary_rows {
        let k = i / 2 + 1;
        let (smiles, y) = if i % 2 == 0 {
            (format!("{}O", "C".repeat(k)), 1)
        } else {
            (format!("c1ccccc1{}", "C".repeat(k)), 0)
        };
        binary.push_str(&format!("b{i}\t{smiles}\t{y}\n"));
    }
    std::fs::write(data.join("synthetic_binary.tsv"), binary).unwrap();
    let mut generation = String::from("id\tProduct\tReactants\n");
    for i in 0..generation_rows {
        let chain = "C".repeat(i + 1);
        generation.push_str(&format!("g{i}\t{chain}C(=O)OC\t{chain}C(=O)O.CO\n"));
    }
    std::fs::write(data.join("synthetic_generation.tsv"), generation).unwrap();
}
