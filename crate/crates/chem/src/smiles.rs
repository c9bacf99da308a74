//! SMILES reader covering the OpenSMILES subset found in TDC-style tables:
//! organic-subset and bracket atoms, branches, ring closures (including `%nn`),
//! charges, isotopes, atom maps, tetrahedral and directional-bond markers.

use crate::element::Element;
use crate::molecule::{
    implicit_hydrogens, Atom, Bond, BondOrder, BondStereo, Chirality, Molecule, MoleculeError, NeighborRef,
};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesErrorKind {
    #[error("empty input")]
    Empty,
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("unknown element")]
    UnknownElement,
    #[error("malformed bracket atom")]
    MalformedBracket,
    #[error("unmatched parenthesis")]
    UnmatchedParenthesis,
    #[error("unmatched ring-closure digit")]
    UnmatchedRingClosure,
    #[error("conflicting ring-closure bond symbols")]
    RingBondConflict,
    #[error("bond symbol without a following atom")]
    DanglingBond,
    #[error("unsupported feature: {0}")]
    Unsupported(&'static str),
    #[error("invalid graph: {0}")]
    Graph(MoleculeError),
}

/// Parse failure with the byte offset into the input where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at byte {offset}")]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl SmilesError {
    fn new(offset: usize, kind: SmilesErrorKind) -> SmilesError {
        SmilesError { offset, kind }
    }
}

#[derive(Debug, Clone, Copy)]
enum BondSymbol {
    Order(BondOrder),
    Stereo(BondStereo),
}

impl BondSymbol {
    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Order(o) => o,
            BondSymbol::Stereo(_) => BondOrder::Single,
        }
    }

    fn stereo(self) -> Option<BondStereo> {
        match self {
            BondSymbol::Order(_) => None,
            BondSymbol::Stereo(s) => Some(s),
        }
    }
}

struct RingOpen {
    atom: usize,
    symbol: Option<BondSymbol>,
    offset: usize,
    /// Position in the opener's neighbor order reserved for the partner.
    slot: usize,
}

struct Parser<'a> {
    text: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bracketed: Vec<bool>,
    order: Vec<Vec<NeighborRef>>,
    bonds: Vec<Bond>,
    rings: BTreeMap<u32, RingOpen>,
}

/// Parse a SMILES string into one molecular graph. Dot-separated components
/// end up as disconnected parts of the same graph; see [`parse_reaction_side`]
/// for one molecule per component.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    Parser::new(text).run()
}

/// Parse a dot-separated list of molecules (one side of a reaction).
pub fn parse_reaction_side(text: &str) -> Result<Vec<Molecule>, SmilesError> {
    let mut out = Vec::new();
    let mut start = 0;
    for part in text.split('.') {
        let mol = parse_smiles(part).map_err(|e| SmilesError {
            offset: e.offset + start,
            ..e
        })?;
        out.push(mol);
        start += part.len() + 1;
    }
    Ok(out)
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Parser<'a> {
        Parser {
            text: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bracketed: Vec::new(),
            order: Vec::new(),
            bonds: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn err<T>(&self, offset: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
        Err(SmilesError::new(offset, kind))
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        if self.text.is_empty() {
            return self.err(0, SmilesErrorKind::Empty);
        }
        let mut prev: Option<usize> = None;
        let mut pending: Option<(BondSymbol, usize)> = None;
        let mut branches: Vec<(usize, usize)> = Vec::new();

        while let Some(c) = self.peek() {
            let at = self.pos;
            match c {
                b'(' => {
                    if prev.is_none() || pending.is_some() {
                        return self.err(at, SmilesErrorKind::UnexpectedChar('('));
                    }
                    branches.push((prev.unwrap(), at));
                    self.pos += 1;
                }
                b')' => {
                    if pending.is_some() {
                        return self.err(at, SmilesErrorKind::DanglingBond);
                    }
                    match branches.pop() {
                        Some((atom, _)) => prev = Some(atom),
                        None => return self.err(at, SmilesErrorKind::UnmatchedParenthesis),
                    }
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' | b'$' => {
                    if pending.is_some() || prev.is_none() {
                        return self.err(at, SmilesErrorKind::UnexpectedChar(c as char));
                    }
                    let symbol = match c {
                        b'-' => BondSymbol::Order(BondOrder::Single),
                        b'=' => BondSymbol::Order(BondOrder::Double),
                        b'#' => BondSymbol::Order(BondOrder::Triple),
                        b':' => BondSymbol::Order(BondOrder::Aromatic),
                        b'/' => BondSymbol::Stereo(BondStereo::Up),
                        b'\\' => BondSymbol::Stereo(BondStereo::Down),
                        _ => return self.err(at, SmilesErrorKind::Unsupported("quadruple bond")),
                    };
                    pending = Some((symbol, at));
                    self.pos += 1;
                }
                b'.' => {
                    if pending.is_some() {
                        return self.err(at, SmilesErrorKind::DanglingBond);
                    }
                    prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' | b'%' => {
                    let Some(atom) = prev else {
                        return self.err(at, SmilesErrorKind::UnexpectedChar(c as char));
                    };
                    let digit = self.ring_number()?;
                    self.ring_closure(atom, digit, pending.take().map(|p| p.0), at)?;
                }
                _ => {
                    let atom = if c == b'[' {
                        self.bracket_atom()?
                    } else {
                        self.organic_atom()?
                    };
                    if let Some(p) = prev {
                        self.add_bond(p, atom, pending.take().map(|p| p.0), at)?;
                        self.order[p].push(NeighborRef::Atom(atom));
                        // the implicit H slot comes right after the preceding atom
                        self.order[atom].insert(0, NeighborRef::Atom(p));
                    }
                    prev = Some(atom);
                }
            }
        }

        if let Some((_, at)) = pending {
            return self.err(at, SmilesErrorKind::DanglingBond);
        }
        if !branches.is_empty() {
            return self.err(self.text.len(), SmilesErrorKind::UnmatchedParenthesis);
        }
        if let Some(open) = self.rings.values().next() {
            return self.err(open.offset, SmilesErrorKind::UnmatchedRingClosure);
        }
        self.finish()
    }

    fn finish(mut self) -> Result<Molecule, SmilesError> {
        let mut valence = vec![0u8; self.atoms.len()];
        for b in &self.bonds {
            valence[b.a] += b.order.valence();
            valence[b.b] += b.order.valence();
        }
        let order = std::mem::take(&mut self.order);
        for (i, atom) in self.atoms.iter_mut().enumerate() {
            if !self.bracketed[i] {
                atom.hydrogens = implicit_hydrogens(atom.element, atom.aromatic, valence[i]);
            }
            if let Some(ch) = &mut atom.chirality {
                ch.order = order[i].clone();
            }
        }
        Molecule::new(self.atoms, self.bonds).map_err(|e| SmilesError::new(0, SmilesErrorKind::Graph(e)))
    }

    fn push_atom(&mut self, atom: Atom, bracketed: bool) -> usize {
        let idx = self.atoms.len();
        let mut order = Vec::new();
        if atom.chirality.is_some() && atom.hydrogens > 0 {
            order.push(NeighborRef::ImplicitH);
        }
        self.atoms.push(atom);
        self.bracketed.push(bracketed);
        self.order.push(order);
        idx
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        symbol: Option<BondSymbol>,
        at: usize,
    ) -> Result<(), SmilesError> {
        if a == b {
            return self.err(
                at,
                SmilesErrorKind::Graph(MoleculeError::SelfBond(self.bonds.len())),
            );
        }
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return self.err(at, SmilesErrorKind::Graph(MoleculeError::DuplicateBond(a, b)));
        }
        let order = match symbol {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push(Bond {
            a,
            b,
            order,
            stereo: symbol.and_then(BondSymbol::stereo),
        });
        Ok(())
    }

    fn ring_number(&mut self) -> Result<u32, SmilesError> {
        let at = self.pos;
        if self.text[at] == b'%' {
            let digits = self.text.get(at + 1..at + 3);
            match digits {
                Some(d) if d.iter().all(u8::is_ascii_digit) => {
                    self.pos += 3;
                    Ok(((d[0] - b'0') * 10 + (d[1] - b'0')) as u32)
                }
                _ => self.err(at, SmilesErrorKind::UnexpectedChar('%')),
            }
        } else {
            self.pos += 1;
            Ok((self.text[at] - b'0') as u32)
        }
    }

    fn ring_closure(
        &mut self,
        atom: usize,
        digit: u32,
        symbol: Option<BondSymbol>,
        at: usize,
    ) -> Result<(), SmilesError> {
        match self.rings.remove(&digit) {
            None => {
                let slot = self.order[atom].len();
                self.order[atom].push(NeighborRef::Atom(usize::MAX));
                self.rings.insert(
                    digit,
                    RingOpen {
                        atom,
                        symbol,
                        offset: at,
                        slot,
                    },
                );
                Ok(())
            }
            Some(open) => {
                let merged = match (open.symbol, symbol) {
                    (Some(x), Some(y)) => {
                        if x.order() != y.order() {
                            return self.err(at, SmilesErrorKind::RingBondConflict);
                        }
                        Some(x)
                    }
                    (Some(x), None) => Some(x),
                    // a marker written at the closing end describes closer -> opener
                    (None, Some(BondSymbol::Stereo(s))) => Some(BondSymbol::Stereo(s.flipped())),
                    (None, y) => y,
                };
                self.add_bond(open.atom, atom, merged, at)?;
                self.order[open.atom][open.slot] = NeighborRef::Atom(atom);
                self.order[atom].push(NeighborRef::Atom(open.atom));
                Ok(())
            }
        }
    }

    fn organic_atom(&mut self) -> Result<usize, SmilesError> {
        let at = self.pos;
        let c = self.text[at];
        let two = self.text.get(at..at + 2);
        let (symbol, aromatic, len) = match (c, two) {
            (b'C', Some(b"Cl")) => ("Cl", false, 2),
            (b'B', Some(b"Br")) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => {
                (std::str::from_utf8(&self.text[at..at + 1]).unwrap(), false, 1)
            }
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (b'*', _) => ("*", false, 1),
            _ if c.is_ascii_alphabetic() => return self.err(at, SmilesErrorKind::UnknownElement),
            _ => {
                let ch = std::str::from_utf8(&self.text[at..])
                    .ok()
                    .and_then(|s| s.chars().next())
                    .unwrap_or('\u{fffd}');
                return self.err(at, SmilesErrorKind::UnexpectedChar(ch));
            }
        };
        self.pos += len;
        let mut atom = Atom::new(Element::from_symbol(symbol).unwrap());
        atom.aromatic = aromatic;
        Ok(self.push_atom(atom, false))
    }

    fn digits(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.text[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }

    fn bracket_atom(&mut self) -> Result<usize, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let malformed = |p: &Parser| SmilesError::new(p.pos, SmilesErrorKind::MalformedBracket);

        let isotope = match self.digits() {
            Some(n) => Some(u16::try_from(n).map_err(|_| malformed(self))?),
            None => None,
        };

        let sym_at = self.pos;
        let rest = &self.text[sym_at..];
        let (element, aromatic, len) = if rest.first() == Some(&b'*') {
            (Element::WILDCARD, false, 1)
        } else if let Some(&(sym, len)) = [("se", 2), ("as", 2), ("te", 2)]
            .iter()
            .find(|(s, _)| rest.starts_with(s.as_bytes()))
        {
            let mut upper = sym.to_string();
            upper[..1].make_ascii_uppercase();
            (Element::from_symbol(&upper).unwrap(), true, len)
        } else {
            match rest.first() {
                Some(&c) if c.is_ascii_lowercase() => {
                    let sym = (c as char).to_ascii_uppercase().to_string();
                    match Element::from_symbol(&sym) {
                        Some(e) if e.can_be_aromatic() => (e, true, 1),
                        _ => return self.err(sym_at, SmilesErrorKind::UnknownElement),
                    }
                }
                Some(&c) if c.is_ascii_uppercase() => {
                    let two = rest
                        .get(..2)
                        .filter(|t| t[1].is_ascii_lowercase())
                        .and_then(|t| Element::from_symbol(std::str::from_utf8(t).ok()?));
                    match two {
                        Some(e) => (e, false, 2),
                        None => match Element::from_symbol(&(c as char).to_string()) {
                            Some(e) => (e, false, 1),
                            None => return self.err(sym_at, SmilesErrorKind::UnknownElement),
                        },
                    }
                }
                _ => return Err(malformed(self)),
            }
        };
        self.pos += len;

        let mut atom = Atom::new(element);
        atom.isotope = isotope;
        atom.aromatic = aromatic;

        if self.peek() == Some(b'@') {
            self.pos += 1;
            let mut clockwise = false;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                clockwise = true;
            } else if self.text[self.pos..].starts_with(b"TH") {
                self.pos += 2;
                clockwise = match self.digits() {
                    Some(1) => false,
                    Some(2) => true,
                    _ => return Err(malformed(self)),
                };
            } else if [&b"AL"[..], b"SP", b"TB", b"OH"]
                .iter()
                .any(|p| self.text[self.pos..].starts_with(p))
            {
                return self.err(
                    self.pos,
                    SmilesErrorKind::Unsupported("non-tetrahedral chirality"),
                );
            }
            atom.chirality = Some(Chirality {
                clockwise,
                order: Vec::new(),
            });
        }

        if self.peek() == Some(b'H') {
            self.pos += 1;
            atom.hydrogens = match self.digits() {
                Some(n) => u8::try_from(n).map_err(|_| malformed(self))?,
                None => 1,
            };
        }

        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let magnitude = match self.digits() {
                Some(n) => n as i32,
                None => {
                    let mut m = 1;
                    while self.peek() == Some(sign) {
                        self.pos += 1;
                        m += 1;
                    }
                    m
                }
            };
            let charge = if sign == b'+' { magnitude } else { -magnitude };
            atom.charge = i8::try_from(charge).map_err(|_| malformed(self))?;
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            match self.digits() {
                Some(n) => atom.map = (n > 0).then_some(n),
                None => return Err(malformed(self)),
            }
        }

        if self.peek() != Some(b']') {
            return if self.pos >= self.text.len() {
                self.err(open, SmilesErrorKind::MalformedBracket)
            } else {
                Err(malformed(self))
            };
        }
        self.pos += 1;
        Ok(self.push_atom(atom, true))
    }
}
