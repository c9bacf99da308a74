//! Exact-substring overlap between task inputs and a pretraining corpus.

use crate::evalharness::{summarize, EvalResult};
use aho_corasick::AhoCorasick;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::io::{self, Read};

/// Features longer than this are truncated before matching.
pub const MAX_PATTERN_CHARS: usize = 512;

/// How much corpus is read per block and how finely a block is split for
/// parallel matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanChunking {
    pub block_bytes: usize,
    pub shard_bytes: usize,
}

impl Default for ScanChunking {
    fn default() -> Self {
        ScanChunking {
            block_bytes: 64 << 20,
            shard_bytes: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub id: String,
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordFlag {
    pub id: String,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub flags: Vec<RecordFlag>,
    pub flagged: usize,
    pub total: usize,
    pub percent_overlap: f64,
}

impl ContaminationReport {
    pub fn flagged_ids(&self) -> HashSet<String> {
        self.flags
            .iter()
            .filter(|f| f.flagged)
            .map(|f| f.id.clone())
            .collect()
    }
}

pub fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

struct Patterns {
    texts: Vec<String>,
    // pattern index -> records that contain it
    owners: Vec<Vec<usize>>,
}

fn collect_patterns(records: &[FeatureSet]) -> Patterns {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut texts = Vec::new();
    let mut owners: Vec<Vec<usize>> = Vec::new();
    for (ri, rec) in records.iter().enumerate() {
        for f in &rec.features {
            let p = truncate_chars(f, MAX_PATTERN_CHARS);
            if p.is_empty() {
                continue;
            }
            let pi = *index.entry(p).or_insert_with(|| {
                texts.push(p.to_string());
                owners.push(Vec::new());
                texts.len() - 1
            });
            if owners[pi].last() != Some(&ri) {
                owners[pi].push(ri);
            }
        }
    }
    Patterns { texts, owners }
}

fn scan_block(ac: &AhoCorasick, block: &[u8], overlap: usize, shard: usize, hit: &mut [bool]) {
    let starts: Vec<usize> = (0..block.len().max(1)).step_by(shard).collect();
    let found: Vec<Vec<usize>> = starts
        .par_iter()
        .map(|&s| {
            let end = (s + shard + overlap).min(block.len());
            ac.find_overlapping_iter(&block[s..end])
                .map(|m| m.pattern().as_usize())
                .collect()
        })
        .collect();
    for p in found.into_iter().flatten() {
        hit[p] = true;
    }
}

/// Flags every record with at least one feature occurring verbatim in the
/// corpus. The corpus is streamed in blocks that overlap by one byte less
/// than the longest pattern, so no occurrence is split.
pub fn contamination_scan(records: &[FeatureSet], corpus: impl Read) -> io::Result<ContaminationReport> {
    contamination_scan_chunked(records, corpus, ScanChunking::default())
}

pub fn contamination_scan_chunked(
    records: &[FeatureSet],
    mut corpus: impl Read,
    chunking: ScanChunking,
) -> io::Result<ContaminationReport> {
    let (block_bytes, shard) = (chunking.block_bytes.max(1), chunking.shard_bytes.max(1));
    let patterns = collect_patterns(records);
    let mut hit = vec![false; patterns.texts.len()];
    if !patterns.texts.is_empty() {
        let ac = AhoCorasick::new(&patterns.texts).map_err(io::Error::other)?;
        let overlap = patterns.texts.iter().map(String::len).max().unwrap_or(1) - 1;
        let mut buf: Vec<u8> = Vec::with_capacity(block_bytes + overlap);
        loop {
            let carried = buf.len();
            buf.resize(carried + block_bytes, 0);
            let mut filled = carried;
            while filled < buf.len() {
                let n = corpus.read(&mut buf[filled..])?;
                if n == 0 {
                    break;
                }
                filled += n;
            }
            buf.truncate(filled);
            let done = filled < carried + block_bytes;
            if filled > carried || carried == 0 {
                scan_block(&ac, &buf, overlap, shard, &mut hit);
            }
            if done {
                break;
            }
            let keep = overlap.min(buf.len());
            buf.drain(..buf.len() - keep);
        }
    }
    let mut flagged = vec![false; records.len()];
    for (pi, owners) in patterns.owners.iter().enumerate() {
        if hit[pi] {
            for &ri in owners {
                flagged[ri] = true;
            }
        }
    }
    let n_flagged = flagged.iter().filter(|&&f| f).count();
    Ok(ContaminationReport {
        flags: records
            .iter()
            .zip(&flagged)
            .map(|(r, &f)| RecordFlag {
                id: r.id.clone(),
                flagged: f,
            })
            .collect(),
        flagged: n_flagged,
        total: records.len(),
        percent_overlap: if records.is_empty() {
            0.0
        } else {
            100.0 * n_flagged as f64 / records.len() as f64
        },
    })
}

pub fn contamination_scan_str(records: &[FeatureSet], corpus: &str) -> ContaminationReport {
    contamination_scan(records, corpus.as_bytes()).expect("in-memory read")
}

/// Recomputes a result over the rows whose ids are not flagged.
pub fn filtered_eval(result: &EvalResult, flagged: &HashSet<String>) -> EvalResult {
    let rows = result
        .rows
        .iter()
        .filter(|r| !flagged.contains(&r.id))
        .cloned()
        .collect();
    summarize(
        &result.task,
        result.kind,
        result.metric,
        result.lower_is_better,
        rows,
    )
}
