//! Cheminformatics kernel: SMILES in and out, circular fingerprints,
//! Tanimoto nearest neighbors, Murcko scaffolds and reactant-set matching.

pub mod canon;
pub mod element;
pub mod fingerprint;
pub mod molecule;
pub mod reaction;
pub mod scaffold;
pub mod smiles;

pub use canon::{canonical_ranks, write_canonical};
pub use element::Element;
pub use fingerprint::{
    morgan_environment_ids, morgan_fingerprint, tanimoto, top_k_tanimoto, Fingerprint, FingerprintError,
    FingerprintPool, DEFAULT_NBITS, DEFAULT_RADIUS,
};
pub use molecule::{Atom, Bond, BondOrder, BondStereo, Chirality, Molecule, NeighborRef};
pub use reaction::{reactant_set_equal, ReactantSet, SetMatch};
pub use scaffold::{murcko_scaffold, scaffold_key};
pub use smiles::{parse_reaction_side, parse_smiles, SmilesError, SmilesErrorKind};

/// Parse then serialize canonically.
pub fn canonicalize(smiles: &str) -> Result<String, SmilesError> {
    parse_smiles(smiles).map(|m| write_canonical(&m))
}
