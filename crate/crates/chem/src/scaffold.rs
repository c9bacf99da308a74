//! Bemis–Murcko frameworks: ring systems plus the linkers joining them.

use crate::canon::write_canonical;
use crate::molecule::Molecule;

/// Repeatedly strip non-ring atoms of degree ≤ 1. `None` for acyclic input.
pub fn murcko_scaffold(mol: &Molecule) -> Option<Molecule> {
    let ring = mol.ring_atoms();
    if !ring.iter().any(|&r| r) {
        return None;
    }
    let n = mol.atom_count();
    let mut alive = vec![true; n];
    let mut degree: Vec<usize> = (0..n).map(|i| mol.degree(i)).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&i| !ring[i] && degree[i] <= 1).collect();
    while let Some(i) = queue.pop() {
        if !alive[i] {
            continue;
        }
        alive[i] = false;
        for &(nb, _) in mol.neighbors(i) {
            if alive[nb] {
                degree[nb] -= 1;
                if !ring[nb] && degree[nb] <= 1 {
                    queue.push(nb);
                }
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    mol.induced_subgraph(&keep)
}

/// Canonical scaffold string used as a grouping key; empty for acyclic molecules.
pub fn scaffold_key(mol: &Molecule) -> String {
    murcko_scaffold(mol)
        .map(|s| write_canonical(&s))
        .unwrap_or_default()
}
