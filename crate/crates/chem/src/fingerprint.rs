//! Hashed circular (Morgan / ECFP-style) fingerprints and Tanimoto search.
//!
//! Atom invariants are element, formal charge, heavy degree, total hydrogens
//! and the aromatic flag. Each iteration folds the sorted `(bond order,
//! neighbor identifier)` pairs into the atom's identifier. An environment is
//! kept only if its bond set has not been seen before (earlier radius or a
//! lower identifier at the same radius), so a molecule smaller than the
//! radius stops contributing new bits. Stereo markers are ignored.
//!
//! Persisted pools use a 16-byte little-endian header followed by packed
//! 64-bit words:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `TXFP`               |
//! | 4      | 2    | format version (1)         |
//! | 6      | 2    | radius                     |
//! | 8      | 4    | nbits                      |
//! | 12     | 4    | number of fingerprints     |
//! | 16     | ...  | `ceil(nbits/64)` u64 words per fingerprint |

use crate::molecule::Molecule;
use rayon::prelude::*;
use std::io::{Read, Write};
use thiserror::Error;

pub const DEFAULT_RADIUS: u32 = 2;
pub const DEFAULT_NBITS: usize = 2048;

const MAGIC: &[u8; 4] = b"TXFP";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("fingerprint widths differ: {0} vs {1}")]
    WidthMismatch(usize, usize),
    #[error("bad fingerprint file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// SplitMix64 finalizer; the only hash used for environment identifiers.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn combine(seed: u64, value: u64) -> u64 {
    mix64(seed.rotate_left(5) ^ mix64(value))
}

fn words_for(nbits: usize) -> usize {
    nbits.div_ceil(64)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    nbits: usize,
    words: Vec<u64>,
    popcount: u32,
}

impl Fingerprint {
    pub fn empty(nbits: usize) -> Fingerprint {
        assert!(nbits > 0, "fingerprint width must be positive");
        Fingerprint {
            nbits,
            words: vec![0; words_for(nbits)],
            popcount: 0,
        }
    }

    pub fn from_bits(nbits: usize, bits: impl IntoIterator<Item = usize>) -> Fingerprint {
        let mut fp = Fingerprint::empty(nbits);
        for b in bits {
            assert!(b < nbits, "bit {b} out of range");
            fp.words[b / 64] |= 1u64 << (b % 64);
        }
        fp.popcount = fp.words.iter().map(|w| w.count_ones()).sum();
        fp
    }

    fn from_words(nbits: usize, words: Vec<u64>) -> Fingerprint {
        let popcount = words.iter().map(|w| w.count_ones()).sum();
        Fingerprint {
            nbits,
            words,
            popcount,
        }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn popcount(&self) -> u32 {
        self.popcount
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn contains(&self, bit: usize) -> bool {
        bit < self.nbits && self.words[bit / 64] & (1u64 << (bit % 64)) != 0
    }

    pub fn set_bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.contains(b))
    }
}

fn atom_invariant(mol: &Molecule, i: usize) -> u64 {
    let a = &mol.atoms()[i];
    let mut h = mix64(a.element.atomic_number() as u64);
    h = combine(h, a.charge as i64 as u64);
    h = combine(h, mol.degree(i) as u64);
    h = combine(h, a.hydrogens as u64);
    combine(h, a.aromatic as u64)
}

/// Distinct environment identifiers up to `radius`, before folding.
pub fn morgan_environment_ids(mol: &Molecule, radius: u32) -> Vec<u64> {
    let mut out = Vec::new();
    let n = mol.atom_count();
    let bond_words = mol.bond_count().div_ceil(64).max(1);

    let mut ids: Vec<u64> = (0..n).map(|i| atom_invariant(mol, i)).collect();
    let mut envs: Vec<Vec<u64>> = vec![vec![0; bond_words]; n];
    let mut seen_envs: std::collections::HashSet<Vec<u64>> = Default::default();
    out.extend_from_slice(&ids);

    for layer in 1..=radius {
        let mut next_ids = Vec::with_capacity(n);
        let mut next_envs = Vec::with_capacity(n);
        for i in 0..n {
            let mut shell: Vec<(u8, u64)> = mol
                .neighbors(i)
                .iter()
                .map(|&(nb, bi)| (mol.bonds()[bi].order.code(), ids[nb]))
                .collect();
            shell.sort_unstable();
            let mut h = combine(layer as u64, ids[i]);
            for (order, id) in shell {
                h = combine(combine(h, order as u64), id);
            }
            let mut env = envs[i].clone();
            for &(nb, bi) in mol.neighbors(i) {
                env[bi / 64] |= 1u64 << (bi % 64);
                for (w, x) in env.iter_mut().zip(&envs[nb]) {
                    *w |= x;
                }
            }
            next_ids.push(h);
            next_envs.push(env);
        }
        let mut candidates: Vec<(&Vec<u64>, u64)> = next_envs.iter().zip(next_ids.iter().copied()).collect();
        candidates.sort();
        for (env, id) in candidates {
            if env.iter().all(|&w| w == 0) || seen_envs.contains(env) {
                continue;
            }
            seen_envs.insert(env.clone());
            out.push(id);
        }
        ids = next_ids;
        envs = next_envs;
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Morgan fingerprint folded to `nbits`.
pub fn morgan_fingerprint(mol: &Molecule, radius: u32, nbits: usize) -> Fingerprint {
    Fingerprint::from_bits(
        nbits,
        morgan_environment_ids(mol, radius)
            .into_iter()
            .map(|id| (id % nbits as u64) as usize),
    )
}

/// `|A ∩ B| / |A ∪ B|`, 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, FingerprintError> {
    if a.nbits != b.nbits {
        return Err(FingerprintError::WidthMismatch(a.nbits, b.nbits));
    }
    Ok(tanimoto_words(&a.words, a.popcount, &b.words, b.popcount))
}

fn tanimoto_words(a: &[u64], pa: u32, b: &[u64], pb: u32) -> f64 {
    let common: u32 = a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum();
    let union = pa + pb - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

/// Order by similarity descending, then index ascending.
pub fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best `(index, score)` pairs under [`rank_order`].
pub fn select_top_k(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_by(rank_order);
    scored
}

/// Fingerprints of equal width packed contiguously for scanning.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintPool {
    nbits: usize,
    radius: u32,
    words: Vec<u64>,
    popcounts: Vec<u32>,
}

impl FingerprintPool {
    pub fn new(nbits: usize, radius: u32) -> FingerprintPool {
        assert!(nbits > 0, "fingerprint width must be positive");
        FingerprintPool {
            nbits,
            radius,
            words: Vec::new(),
            popcounts: Vec::new(),
        }
    }

    pub fn from_molecules(mols: &[Molecule], radius: u32, nbits: usize) -> FingerprintPool {
        let fps: Vec<Fingerprint> = mols
            .par_iter()
            .map(|m| morgan_fingerprint(m, radius, nbits))
            .collect();
        let mut pool = FingerprintPool::new(nbits, radius);
        for fp in &fps {
            pool.push(fp).expect("uniform width");
        }
        pool
    }

    pub fn push(&mut self, fp: &Fingerprint) -> Result<usize, FingerprintError> {
        if fp.nbits != self.nbits {
            return Err(FingerprintError::WidthMismatch(self.nbits, fp.nbits));
        }
        self.words.extend_from_slice(&fp.words);
        self.popcounts.push(fp.popcount);
        Ok(self.popcounts.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.popcounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.popcounts.is_empty()
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    fn row(&self, i: usize) -> &[u64] {
        let w = words_for(self.nbits);
        &self.words[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize) -> Fingerprint {
        Fingerprint::from_words(self.nbits, self.row(i).to_vec())
    }

    /// Similarity of `query` against every pool entry, in pool order.
    pub fn similarities(&self, query: &Fingerprint) -> Result<Vec<f64>, FingerprintError> {
        if query.nbits != self.nbits {
            return Err(FingerprintError::WidthMismatch(query.nbits, self.nbits));
        }
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| tanimoto_words(&query.words, query.popcount, self.row(i), self.popcounts[i]))
            .collect())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), FingerprintError> {
        let count = u32::try_from(self.len())
            .map_err(|_| FingerprintError::Format("too many fingerprints".into()))?;
        let nbits =
            u32::try_from(self.nbits).map_err(|_| FingerprintError::Format("width too large".into()))?;
        let radius =
            u16::try_from(self.radius).map_err(|_| FingerprintError::Format("radius too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&radius.to_le_bytes())?;
        w.write_all(&nbits.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for word in &self.words {
            w.write_all(&word.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<FingerprintPool, FingerprintError> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(FingerprintError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != FORMAT_VERSION {
            return Err(FingerprintError::Format(format!("unsupported version {version}")));
        }
        let radius = u16::from_le_bytes([header[6], header[7]]) as u32;
        let nbits = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        if nbits == 0 {
            return Err(FingerprintError::Format("zero width".into()));
        }
        let mut pool = FingerprintPool::new(nbits, radius);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            let mut words = Vec::with_capacity(words_for(nbits));
            for _ in 0..words_for(nbits) {
                r.read_exact(&mut buf)?;
                words.push(u64::from_le_bytes(buf));
            }
            if !nbits.is_multiple_of(64) && words.last().unwrap() >> (nbits % 64) != 0 {
                return Err(FingerprintError::Format("bits set past width".into()));
            }
            pool.push(&Fingerprint::from_words(nbits, words))?;
        }
        Ok(pool)
    }
}

/// The `k` most similar pool entries, similarity descending, ties by index.
pub fn top_k_tanimoto(
    query: &Fingerprint,
    pool: &FingerprintPool,
    k: usize,
) -> Result<Vec<(usize, f64)>, FingerprintError> {
    let sims = pool.similarities(query)?;
    Ok(select_top_k(sims.into_iter().enumerate().collect(), k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smiles::parse_smiles;

    fn fp(s: &str, radius: u32) -> Fingerprint {
        morgan_fingerprint(&parse_smiles(s).unwrap(), radius, DEFAULT_NBITS)
    }

    #[test]
    fn single_carbon_radius_zero() {
        assert_eq!(fp("C", 0).popcount(), 1);
    }

    #[test]
    fn spelling_independent() {
        assert_eq!(fp("OCC", 2), fp("CCO", 2));
        assert_eq!(fp("c1ccccc1O", 2), fp("Oc1ccccc1", 2));
        assert_eq!(fp("C(C)(C)O", 2), fp("CC(O)C", 2));
    }

    #[test]
    fn stereo_ignored() {
        assert_eq!(fp("F/C=C/F", 2), fp("F/C=C\\F", 2));
        assert_eq!(fp("N[C@@H](C)C(=O)O", 2), fp("N[C@H](C)C(=O)O", 2));
    }

    #[test]
    fn tanimoto_small_cases() {
        let a = Fingerprint::from_bits(64, [1, 2]);
        let b = Fingerprint::from_bits(64, [1, 2, 3, 4]);
        let c = Fingerprint::from_bits(64, [10, 11]);
        let e = Fingerprint::empty(64);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&b, &b).unwrap(), 1.0);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        assert_eq!(tanimoto(&e, &e).unwrap(), 1.0);
        assert!(matches!(
            tanimoto(&a, &Fingerprint::empty(128)),
            Err(FingerprintError::WidthMismatch(64, 128))
        ));
    }

    #[test]
    fn top_k_clamps_and_breaks_ties() {
        let mut pool = FingerprintPool::new(64, 2);
        for bits in [[1, 2], [3, 4], [1, 2], [1, 5]] {
            pool.push(&Fingerprint::from_bits(64, bits)).unwrap();
        }
        let q = Fingerprint::from_bits(64, [1, 2]);
        let hits = top_k_tanimoto(&q, &pool, 10).unwrap();
        assert_eq!(hits.len(), 4);
        assert_eq!(hits[0], (0, 1.0));
        assert_eq!(hits[1], (2, 1.0));
        assert_eq!(hits[3].0, 1);
        assert_eq!(top_k_tanimoto(&q, &pool, 1).unwrap(), vec![(0, 1.0)]);
        assert!(top_k_tanimoto(&q, &pool, 0).unwrap().is_empty());
    }

    #[test]
    fn pool_persistence_round_trip() {
        let mols: Vec<Molecule> = ["CCO", "c1ccccc1", "CC(=O)O"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let pool = FingerprintPool::from_molecules(&mols, 2, 2048);
        let mut buf = Vec::new();
        pool.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 256);
        assert_eq!(&buf[..4], b"TXFP");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2048);
        let back = FingerprintPool::read_from(&buf[..]).unwrap();
        assert_eq!(back, pool);

        buf[0] = b'X';
        assert!(FingerprintPool::read_from(&buf[..]).is_err());
    }

    #[test]
    fn odd_width_rejects_stray_bits() {
        let mut pool = FingerprintPool::new(10, 1);
        pool.push(&Fingerprint::from_bits(10, [9])).unwrap();
        let mut buf = Vec::new();
        pool.write_to(&mut buf).unwrap();
        assert_eq!(FingerprintPool::read_from(&buf[..]).unwrap(), pool);
        buf[16 + 1] = 0xff;
        assert!(FingerprintPool::read_from(&buf[..]).is_err());
    }
}
