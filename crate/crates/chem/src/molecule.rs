use crate::element::Element;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the valence sum; aromatic bonds count as one and the
    /// aromatic atom flag adds the remaining electron.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Directional single-bond marker (`/` or `\`), stated for the `a -> b` direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondStereo {
    Up,
    Down,
}

impl BondStereo {
    pub fn flipped(self) -> BondStereo {
        match self {
            BondStereo::Up => BondStereo::Down,
            BondStereo::Down => BondStereo::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }

    /// Stereo marker as seen when walking the bond from `from`.
    pub fn stereo_from(&self, from: usize) -> Option<BondStereo> {
        self.stereo.map(|s| if from == self.a { s } else { s.flipped() })
    }
}

/// One entry in the neighbor order a tetrahedral marker refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeighborRef {
    Atom(usize),
    ImplicitH,
}

/// Tetrahedral configuration: looking from the first neighbor, the rest are
/// anticlockwise (`@`) or clockwise (`@@`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chirality {
    pub clockwise: bool,
    pub order: Vec<NeighborRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub isotope: Option<u16>,
    pub aromatic: bool,
    /// Total attached hydrogens (explicit for bracket atoms, derived otherwise).
    pub hydrogens: u8,
    pub map: Option<u32>,
    pub chirality: Option<Chirality>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            isotope: None,
            aromatic: false,
            hydrogens: 0,
            map: None,
            chirality: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoleculeError {
    #[error("molecule has no atoms")]
    Empty,
    #[error("bond {0} references atom out of range")]
    AtomOutOfRange(usize),
    #[error("bond {0} joins an atom to itself")]
    SelfBond(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
}

/// Hydrogens implied by the default valence model for an organic-subset atom.
pub fn implicit_hydrogens(element: Element, aromatic: bool, bond_valence: u8) -> u8 {
    let valences = element.default_valences();
    let Some(&lowest) = valences.first() else {
        return 0;
    };
    if aromatic {
        return lowest.saturating_sub(bond_valence + 1);
    }
    valences
        .iter()
        .find(|&&v| v >= bond_valence)
        .map(|&v| v - bond_valence)
        .unwrap_or(0)
}

/// An attributed molecular graph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Molecule {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, MoleculeError> {
        if atoms.is_empty() {
            return Err(MoleculeError::Empty);
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() {
                return Err(MoleculeError::AtomOutOfRange(i));
            }
            if bond.a == bond.b {
                return Err(MoleculeError::SelfBond(i));
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(MoleculeError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        Ok(Molecule {
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// `(neighbor atom, bond index)` pairs.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Sum of bond valences around an atom.
    pub fn bond_valence(&self, atom: usize) -> u8 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, bi)| self.bonds[bi].order.valence())
            .sum()
    }

    /// Whether the atom's hydrogen count is what the default valence model implies.
    pub fn hydrogens_are_implicit(&self, atom: usize) -> bool {
        let a = &self.atoms[atom];
        a.hydrogens == implicit_hydrogens(a.element, a.aromatic, self.bond_valence(atom))
    }

    pub fn has_atom_maps(&self) -> bool {
        self.atoms.iter().any(|a| a.map.is_some())
    }

    /// Same graph with every atom map cleared.
    pub fn strip_atom_maps(&self) -> Molecule {
        let mut out = self.clone();
        for atom in &mut out.atoms {
            atom.map = None;
        }
        out
    }

    /// Relabel atoms so that old atom `i` becomes new atom `perm[i]`.
    /// Bond list order follows the new labels.
    pub fn permuted(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len(), "permutation length");
        let mut atoms = vec![None; self.atoms.len()];
        for (old, atom) in self.atoms.iter().enumerate() {
            let mut atom = atom.clone();
            if let Some(ch) = &mut atom.chirality {
                for r in &mut ch.order {
                    if let NeighborRef::Atom(i) = r {
                        *i = perm[*i];
                    }
                }
            }
            atoms[perm[old]] = Some(atom);
        }
        let mut bonds: Vec<Bond> = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                ..b.clone()
            })
            .collect();
        bonds.sort_by_key(|b| (b.a.min(b.b), b.a.max(b.b)));
        Molecule::new(atoms.into_iter().map(Option::unwrap).collect(), bonds)
            .expect("permutation preserves validity")
    }

    /// Connected components as lists of atom indices, each sorted ascending,
    /// ordered by their smallest atom index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.atoms.len()];
        let mut out = Vec::new();
        for start in 0..self.atoms.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                for &(n, _) in &self.adjacency[comp[i]] {
                    if !seen[n] {
                        seen[n] = true;
                        comp.push(n);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Bonds that lie on at least one cycle.
    pub fn ring_bonds(&self) -> Vec<bool> {
        // Bridge finding with an explicit stack (Tarjan low-link).
        let n = self.atoms.len();
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut in_ring = vec![true; self.bonds.len()];
        let mut timer = 0;
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            // (atom, parent bond, next neighbor position)
            let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            while let Some(&mut (u, parent_bond, ref mut pos)) = stack.last_mut() {
                if *pos < self.adjacency[u].len() {
                    let (v, bi) = self.adjacency[u][*pos];
                    *pos += 1;
                    if bi == parent_bond {
                        continue;
                    }
                    if disc[v] == usize::MAX {
                        disc[v] = timer;
                        low[v] = timer;
                        timer += 1;
                        stack.push((v, bi, 0));
                    } else {
                        low[u] = low[u].min(disc[v]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[u]);
                        if low[u] > disc[p] {
                            in_ring[parent_bond] = false;
                        }
                    }
                }
            }
        }
        in_ring
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring_bonds = self.ring_bonds();
        let mut out = vec![false; self.atoms.len()];
        for (bond, &ring) in self.bonds.iter().zip(&ring_bonds) {
            if ring {
                out[bond.a] = true;
                out[bond.b] = true;
            }
        }
        out
    }

    /// Induced subgraph on `keep` (ascending atom indices). Atoms that lose
    /// neighbors gain the lost bond valence as hydrogens and drop any
    /// tetrahedral marker.
    pub fn induced_subgraph(&self, keep: &[usize]) -> Option<Molecule> {
        if keep.is_empty() {
            return None;
        }
        let mut remap = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut atoms: Vec<Atom> = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        for (new, &old) in keep.iter().enumerate() {
            let lost: u8 = self.adjacency[old]
                .iter()
                .filter(|&&(n, _)| remap[n] == usize::MAX)
                .map(|&(_, bi)| self.bonds[bi].order.valence())
                .sum();
            if lost > 0 {
                let atom = &mut atoms[new];
                atom.hydrogens = atom.hydrogens.saturating_add(lost);
                atom.chirality = None;
            } else if let Some(ch) = &mut atoms[new].chirality {
                for r in &mut ch.order {
                    if let NeighborRef::Atom(i) = r {
                        *i = remap[*i];
                    }
                }
            }
        }
        let bonds = self
            .bonds
            .iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                ..b.clone()
            })
            .collect();
        Molecule::new(atoms, bonds).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carbon() -> Atom {
        Atom::new(Element::CARBON)
    }

    fn single(a: usize, b: usize) -> Bond {
        Bond {
            a,
            b,
            order: BondOrder::Single,
            stereo: None,
        }
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert_eq!(Molecule::new(vec![], vec![]), Err(MoleculeError::Empty));
        assert_eq!(
            Molecule::new(vec![carbon()], vec![single(0, 1)]),
            Err(MoleculeError::AtomOutOfRange(0))
        );
        assert_eq!(
            Molecule::new(vec![carbon()], vec![single(0, 0)]),
            Err(MoleculeError::SelfBond(0))
        );
        assert_eq!(
            Molecule::new(vec![carbon(), carbon()], vec![single(0, 1), single(1, 0)]),
            Err(MoleculeError::DuplicateBond(1, 0))
        );
    }

    #[test]
    fn implicit_h_model() {
        let c = Element::CARBON;
        let n = Element::from_symbol("N").unwrap();
        let s = Element::from_symbol("S").unwrap();
        assert_eq!(implicit_hydrogens(c, false, 1), 3);
        assert_eq!(implicit_hydrogens(c, true, 2), 1);
        assert_eq!(implicit_hydrogens(c, true, 3), 0);
        assert_eq!(implicit_hydrogens(n, false, 4), 1);
        assert_eq!(implicit_hydrogens(s, true, 2), 0);
        assert_eq!(implicit_hydrogens(s, false, 3), 1);
        assert_eq!(implicit_hydrogens(Element::WILDCARD, false, 1), 0);
    }

    #[test]
    fn ring_bonds_of_a_tadpole() {
        // triangle 0-1-2 with tail 2-3
        let m = Molecule::new(
            vec![carbon(), carbon(), carbon(), carbon()],
            vec![single(0, 1), single(1, 2), single(2, 0), single(2, 3)],
        )
        .unwrap();
        assert_eq!(m.ring_bonds(), vec![true, true, true, false]);
        assert_eq!(m.ring_atoms(), vec![true, true, true, false]);
    }
}
