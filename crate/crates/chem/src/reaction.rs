//! Reactant-set comparison for retrosynthesis answers.

use crate::canon::write_canonical;
use crate::smiles::{parse_reaction_side, SmilesError};
use std::collections::BTreeSet;

/// Canonical, map-free members of a dot-separated molecule list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactantSet {
    members: BTreeSet<String>,
}

impl ReactantSet {
    pub fn parse(text: &str) -> Result<ReactantSet, SmilesError> {
        let members = parse_reaction_side(text.trim())?
            .iter()
            .map(|m| write_canonical(&m.strip_atom_maps()))
            .collect();
        Ok(ReactantSet { members })
    }

    pub fn members(&self) -> &BTreeSet<String> {
        &self.members
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetMatch {
    pub score: u8,
    pub invalid_prediction: bool,
    pub invalid_truth: bool,
}

/// 1 when both sides parse to the same reactant set, else 0. Unparseable
/// predictions score 0 and are flagged rather than raised.
pub fn reactant_set_equal(predicted: &str, truth: &str) -> SetMatch {
    let pred = ReactantSet::parse(predicted);
    let gold = ReactantSet::parse(truth);
    let score = match (&pred, &gold) {
        (Ok(p), Ok(g)) => u8::from(p == g),
        _ => 0,
    };
    SetMatch {
        score,
        invalid_prediction: pred.is_err(),
        invalid_truth: gold.is_err(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_invariant() {
        assert_eq!(reactant_set_equal("CCO.CC", "CC.CCO").score, 1);
    }

    #[test]
    fn missing_member() {
        assert_eq!(reactant_set_equal("CCO", "CCO.CC").score, 0);
    }

    #[test]
    fn maps_are_ignored() {
        assert_eq!(reactant_set_equal("CO", "[CH3:1][OH:2]").score, 1);
        assert_eq!(reactant_set_equal(" OC ", "[CH3:1][OH:2]").score, 1);
    }

    #[test]
    fn duplicates_collapse() {
        assert_eq!(reactant_set_equal("CC.CC.O", "O.CC").score, 1);
    }

    #[test]
    fn invalid_prediction_scores_zero() {
        let m = reactant_set_equal("C(C", "CC");
        assert_eq!(m.score, 0);
        assert!(m.invalid_prediction);
        assert!(!m.invalid_truth);
        assert!(reactant_set_equal("", "CC").invalid_prediction);
    }
}
