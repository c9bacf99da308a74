//! Canonical atom ranking and SMILES serialization.
//!
//! Ranks start from per-atom invariants and are refined by neighborhood until
//! stable; remaining ties (symmetry-equivalent atoms) are broken one at a time
//! by promoting the lowest-indexed member of the first tied class and refining
//! again. The writer walks each component depth-first from its lowest-ranked
//! atom, visiting neighbors in rank order.

use crate::molecule::{BondOrder, BondStereo, Molecule, NeighborRef};
use std::fmt::Write;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct AtomInvariant {
    degree: usize,
    atomic_number: u8,
    isotope: u16,
    charge: i8,
    aromatic: bool,
    hydrogens: u8,
    map: u32,
    chiral: bool,
}

fn initial_invariants(mol: &Molecule) -> Vec<AtomInvariant> {
    mol.atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| AtomInvariant {
            degree: mol.degree(i),
            atomic_number: a.element.atomic_number(),
            isotope: a.isotope.unwrap_or(0),
            charge: a.charge,
            aromatic: a.aromatic,
            hydrogens: a.hydrogens,
            map: a.map.unwrap_or(0),
            chiral: a.chirality.is_some(),
        })
        .collect()
}

/// Dense ranks (0-based) of `keys`, equal keys sharing a rank.
fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        ranks[idx[w]] = r;
    }
    ranks
}

fn class_count(ranks: &[usize]) -> usize {
    ranks.iter().max().map_or(0, |m| m + 1)
}

fn refine(mol: &Molecule, mut ranks: Vec<usize>) -> Vec<usize> {
    let mut classes = class_count(&ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8, bool)>)> = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(usize, u8, bool)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(n, bi)| {
                        let b = &mol.bonds()[bi];
                        (ranks[n], b.order.code(), b.stereo.is_some())
                    })
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        let next = dense_ranks(&keys);
        let next_classes = class_count(&next);
        ranks = next;
        if next_classes == classes {
            return ranks;
        }
        classes = next_classes;
    }
}

/// Canonical rank per atom; a permutation of `0..atom_count`.
pub fn canonical_ranks(mol: &Molecule) -> Vec<usize> {
    let n = mol.atom_count();
    let mut ranks = refine(mol, dense_ranks(&initial_invariants(mol)));
    while class_count(&ranks) < n {
        // first tied class, lowest atom index inside it
        let mut sizes = vec![0usize; n];
        for &r in &ranks {
            sizes[r] += 1;
        }
        let tied = (0..n).find(|&r| sizes[r] > 1).unwrap();
        let pick = (0..n).find(|&i| ranks[i] == tied).unwrap();
        let doubled: Vec<usize> = ranks
            .iter()
            .enumerate()
            .map(|(i, &r)| if i == pick { 2 * r } else { 2 * r + 1 })
            .collect();
        ranks = refine(mol, dense_ranks(&doubled));
    }
    ranks
}

struct Writer<'m> {
    mol: &'m Molecule,
    ranks: Vec<usize>,
    visited: Vec<bool>,
    parent: Vec<Option<usize>>,
    /// Ring-closure bonds opened at each atom: (partner, bond index).
    ring_opens: Vec<Vec<(usize, usize)>>,
    /// Ring-closure bonds closed at each atom.
    ring_closes: Vec<Vec<(usize, usize)>>,
    /// Tree children in visiting order: (child, bond index).
    children: Vec<Vec<(usize, usize)>>,
    digit_of_bond: std::collections::HashMap<usize, u32>,
    free_digits: std::collections::BTreeSet<u32>,
    /// Atom each bond is written from (usize::MAX until planned).
    written_from: Vec<usize>,
    preorder: Vec<usize>,
    visits: usize,
    /// Directional marker per bond, relative to its written direction.
    markers: Vec<Option<BondStereo>>,
    out: String,
}

impl<'m> Writer<'m> {
    fn sorted_neighbors(&self, atom: usize) -> Vec<(usize, usize)> {
        let mut n = self.mol.neighbors(atom).to_vec();
        n.sort_by_key(|&(a, _)| self.ranks[a]);
        n
    }

    /// First pass: spanning tree and ring-closure classification.
    fn plan(&mut self, root: usize) {
        let mut tree_bond = vec![usize::MAX; self.mol.atom_count()];
        // explicit stack emulating recursive DFS with neighbors in rank order
        self.visited[root] = true;
        self.preorder[root] = self.visit_count();
        let mut iters: Vec<(usize, Vec<(usize, usize)>, usize)> =
            vec![(root, self.sorted_neighbors(root), 0)];
        while let Some((u, nbrs, pos)) = iters.last_mut() {
            let u = *u;
            if *pos == nbrs.len() {
                iters.pop();
                continue;
            }
            let (v, bi) = nbrs[*pos];
            *pos += 1;
            if tree_bond[u] == bi {
                continue;
            }
            if !self.visited[v] {
                self.visited[v] = true;
                self.preorder[v] = self.visit_count();
                self.parent[v] = Some(u);
                tree_bond[v] = bi;
                self.written_from[bi] = u;
                self.children[u].push((v, bi));
                let nv = self.sorted_neighbors(v);
                iters.push((v, nv, 0));
            } else if !self.ring_opens[v].iter().any(|&(_, b)| b == bi)
                && !self.ring_opens[u].iter().any(|&(_, b)| b == bi)
            {
                // back edge: v was reached first, so it opens the ring
                self.ring_opens[v].push((u, bi));
                self.written_from[bi] = v;
                self.ring_closes[u].push((v, bi));
            }
        }
    }

    fn visit_count(&mut self) -> usize {
        self.visits += 1;
        self.visits - 1
    }

    /// Directional markers only carry meaning relative to each other within a
    /// system of stereo double bonds. Keep those relations and flip each
    /// system so that its first written marker is '/'.
    fn assign_markers(&mut self) {
        let bonds = self.mol.bonds();
        let marked = |bi: usize| bonds[bi].order == BondOrder::Single && bonds[bi].stereo.is_some();
        let mut group: Vec<usize> = (0..bonds.len()).collect();
        fn find(g: &mut [usize], mut x: usize) -> usize {
            while g[x] != x {
                g[x] = g[g[x]];
                x = g[x];
            }
            x
        }
        for (di, d) in bonds.iter().enumerate() {
            if d.order != BondOrder::Double {
                continue;
            }
            let around: Vec<usize> = [d.a, d.b]
                .iter()
                .flat_map(|&end| self.mol.neighbors(end).iter().map(|&(_, bi)| bi))
                .filter(|&bi| bi != di && marked(bi))
                .collect();
            for w in around.windows(2) {
                let (x, y) = (find(&mut group, w[0]), find(&mut group, w[1]));
                group[x] = y;
            }
        }
        let mut order: Vec<usize> = (0..bonds.len()).filter(|&bi| marked(bi)).collect();
        order.sort_by_key(|&bi| {
            let from = self.written_from[bi];
            (self.preorder[from], self.preorder[bonds[bi].other(from)])
        });
        let mut flip: std::collections::HashMap<usize, bool> = Default::default();
        for bi in order {
            let from = self.written_from[bi];
            let stored = bonds[bi].stereo_from(from).expect("marked bond");
            let root = find(&mut group, bi);
            let f = *flip.entry(root).or_insert(stored == BondStereo::Down);
            self.markers[bi] = Some(if f { stored.flipped() } else { stored });
        }
    }

    fn bond_symbol(&self, bi: usize, from: usize) -> &'static str {
        let bond = &self.mol.bonds()[bi];
        let atoms = self.mol.atoms();
        let both_aromatic = atoms[bond.a].aromatic && atoms[bond.b].aromatic;
        match bond.order {
            BondOrder::Single => match self.markers[bi].map(|m| {
                if from == self.written_from[bi] {
                    m
                } else {
                    m.flipped()
                }
            }) {
                Some(BondStereo::Up) => "/",
                Some(BondStereo::Down) => "\\",
                None if both_aromatic => "-",
                None => "",
            },
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        }
    }

    fn write_digit(&mut self, d: u32) {
        if d < 10 {
            let _ = write!(self.out, "{d}");
        } else {
            let _ = write!(self.out, "%{d:02}");
        }
    }

    fn write_atom(&mut self, atom: usize, written_order: &[NeighborRef]) {
        let a = &self.mol.atoms()[atom];
        let chirality = a.chirality.as_ref().map(|ch| {
            let same = permutation_parity(&ch.order, written_order);
            match same {
                Some(true) => ch.clockwise,
                Some(false) => !ch.clockwise,
                None => ch.clockwise,
            }
        });
        let plain = a.element.is_organic_subset()
            && a.charge == 0
            && a.isotope.is_none()
            && a.map.is_none()
            && chirality.is_none()
            && self.mol.hydrogens_are_implicit(atom);
        let symbol = if a.aromatic {
            a.element.symbol().to_ascii_lowercase()
        } else {
            a.element.symbol().to_string()
        };
        if plain {
            self.out.push_str(&symbol);
            return;
        }
        self.out.push('[');
        if let Some(iso) = a.isotope {
            let _ = write!(self.out, "{iso}");
        }
        self.out.push_str(&symbol);
        match chirality {
            Some(true) => self.out.push_str("@@"),
            Some(false) => self.out.push('@'),
            None => {}
        }
        match a.hydrogens {
            0 => {}
            1 => self.out.push('H'),
            h => {
                let _ = write!(self.out, "H{h}");
            }
        }
        match a.charge {
            0 => {}
            1 => self.out.push('+'),
            -1 => self.out.push('-'),
            c if c > 0 => {
                let _ = write!(self.out, "+{c}");
            }
            c => {
                let _ = write!(self.out, "-{}", -c);
            }
        }
        if let Some(m) = a.map {
            let _ = write!(self.out, ":{m}");
        }
        self.out.push(']');
    }

    fn emit(&mut self, root: usize) {
        // (atom, bond from parent, child position); entering an atom writes
        // it, leaving a non-last child closes its parenthesis.
        enum Step {
            Enter(usize, Option<usize>),
            Open,
            Close,
        }
        let mut steps = vec![Step::Enter(root, None)];
        while let Some(step) = steps.pop() {
            let (atom, via) = match step {
                Step::Open => {
                    self.out.push('(');
                    continue;
                }
                Step::Close => {
                    self.out.push(')');
                    continue;
                }
                Step::Enter(a, v) => (a, v),
            };
            let mut order = Vec::new();
            if let Some(p) = self.parent[atom] {
                order.push(NeighborRef::Atom(p));
            }
            let a = &self.mol.atoms()[atom];
            if a.chirality.is_some() && a.hydrogens > 0 {
                order.push(NeighborRef::ImplicitH);
            }
            let mut closes = self.ring_closes[atom].clone();
            closes.sort_by_key(|&(_, bi)| self.digit_of_bond[&bi]);
            let mut opens = self.ring_opens[atom].clone();
            opens.sort_by_key(|&(p, _)| self.ranks[p]);
            for &(p, _) in closes.iter().chain(opens.iter()) {
                order.push(NeighborRef::Atom(p));
            }
            for &(c, _) in &self.children[atom] {
                order.push(NeighborRef::Atom(c));
            }
            if let Some(bi) = via {
                let from = self.parent[atom].unwrap();
                let sym = self.bond_symbol(bi, from);
                self.out.push_str(sym);
            }
            self.write_atom(atom, &order);
            for &(_, bi) in &closes {
                let d = self.digit_of_bond[&bi];
                self.free_digits.insert(d);
                self.write_digit(d);
            }
            for &(_, bi) in &opens {
                let d = *self.free_digits.iter().next().expect("ring digits exhausted");
                self.free_digits.remove(&d);
                self.digit_of_bond.insert(bi, d);
                let sym = self.bond_symbol(bi, atom);
                self.out.push_str(sym);
                self.write_digit(d);
            }
            let children = self.children[atom].clone();
            for (k, &(c, bi)) in children.iter().enumerate().rev() {
                let last = k + 1 == children.len();
                if !last {
                    steps.push(Step::Close);
                }
                steps.push(Step::Enter(c, Some(bi)));
                if !last {
                    steps.push(Step::Open);
                }
            }
        }
    }
}

/// Whether `written` is an even permutation of `stored` (None when the two
/// lists do not describe the same neighbor set).
fn permutation_parity(stored: &[NeighborRef], written: &[NeighborRef]) -> Option<bool> {
    if stored.len() != written.len() {
        return None;
    }
    let mut perm = Vec::with_capacity(stored.len());
    for w in written {
        perm.push(stored.iter().position(|s| s == w)?);
    }
    let mut seen = vec![false; perm.len()];
    let mut even = true;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            even = !even;
        }
    }
    Some(even)
}

/// Canonical SMILES. Identical for every input spelling of the same labeled graph.
pub fn write_canonical(mol: &Molecule) -> String {
    let ranks = canonical_ranks(mol);
    let n = mol.atom_count();
    let mut w = Writer {
        mol,
        ranks,
        visited: vec![false; n],
        parent: vec![None; n],
        ring_opens: vec![Vec::new(); n],
        ring_closes: vec![Vec::new(); n],
        children: vec![Vec::new(); n],
        digit_of_bond: Default::default(),
        free_digits: (1..100).collect(),
        written_from: vec![usize::MAX; mol.bond_count()],
        preorder: vec![usize::MAX; n],
        visits: 0,
        markers: vec![None; mol.bond_count()],
        out: String::new(),
    };
    let mut roots: Vec<usize> = mol
        .components()
        .iter()
        .map(|comp| *comp.iter().min_by_key(|&&a| w.ranks[a]).unwrap())
        .collect();
    roots.sort_by_key(|&r| w.ranks[r]);
    for &root in &roots {
        w.plan(root);
    }
    w.assign_markers();
    for (k, &root) in roots.iter().enumerate() {
        if k > 0 {
            w.out.push('.');
        }
        w.emit(root);
    }
    w.out
}
