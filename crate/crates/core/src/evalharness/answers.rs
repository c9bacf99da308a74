use crate::promptgen::{unbin_label, BinningSpec};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryAnswer {
    /// `Some(true)` for (B), `Some(false)` for (A), `None` when unparseable.
    pub class: Option<bool>,
    pub score: f64,
}

impl BinaryAnswer {
    pub fn valid(&self) -> bool {
        self.class.is_some()
    }
}

/// The first `(A)` or `(B)` decides the class. The ranking score is the
/// model's score for `(B)` when it sent one, otherwise the hard class as
/// 1.0/0.0; unparseable text scores 0.5.
pub fn parse_binary_answer(completion: &str, option_scores: Option<&BTreeMap<String, f64>>) -> BinaryAnswer {
    let a = completion.find("(A)");
    let b = completion.find("(B)");
    let class = match (a, b) {
        (Some(x), Some(y)) => Some(y < x),
        (Some(_), None) => Some(false),
        (None, Some(_)) => Some(true),
        (None, None) => None,
    };
    let model_score = option_scores.and_then(|m| m.get("(B)").or_else(|| m.get("B")).copied());
    let score = match (class, model_score) {
        (None, _) => 0.5,
        (Some(_), Some(s)) => s,
        (Some(c), None) => {
            if c {
                1.0
            } else {
                0.0
            }
        }
    };
    BinaryAnswer { class, score }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionAnswer {
    pub bin: u32,
    pub value: f64,
    pub valid: bool,
}

/// First integer in the completion, clamped to the bin range and mapped back
/// to label units. Unparseable text predicts the middle bin.
pub fn parse_regression_answer(completion: &str, spec: &BinningSpec) -> RegressionAnswer {
    let bytes = completion.as_bytes();
    let parsed = bytes.iter().position(u8::is_ascii_digit).map(|start| {
        let end = bytes[start..]
            .iter()
            .position(|b| !b.is_ascii_digit())
            .map_or(bytes.len(), |e| start + e);
        let negative = start > 0 && bytes[start - 1] == b'-';
        let magnitude = completion[start..end].parse::<u64>().unwrap_or(u64::MAX);
        if negative {
            0
        } else {
            magnitude.min(spec.levels as u64) as u32
        }
    });
    let (bin, valid) = match parsed {
        Some(b) => (b, true),
        None => (spec.midpoint_bin(), false),
    };
    RegressionAnswer {
        bin,
        value: unbin_label(bin as i64, spec).expect("bin within range"),
        valid,
    }
}
