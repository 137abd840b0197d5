//! Network constraints, topologies and multi-hop constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::universe::Universe;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Addr {
    Known(String),
    Unknown,
}

impl Addr {
    pub fn known(name: impl Into<String>) -> Self {
        Addr::Known(name.into())
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Addr::Unknown)
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Addr::Known(n) => Some(n),
            Addr::Unknown => None,
        }
    }

    pub fn subst(&self, new: &Addr, old: &Addr) -> Addr {
        if self == old {
            new.clone()
        } else {
            self.clone()
        }
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Known(n) => write!(f, "{n}"),
            Addr::Unknown => write!(f, "?"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Conn,
    Disconn,
}

impl Polarity {
    pub fn flip(self) -> Self {
        match self {
            Polarity::Conn => Polarity::Disconn,
            Polarity::Disconn => Polarity::Conn,
        }
    }
}

/// A one-hop (dis)connectivity literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub from: Addr,
    pub to: Addr,
    pub pol: Polarity,
}

impl Link {
    pub fn new(from: Addr, to: Addr, pol: Polarity) -> Self {
        Link { from, to, pol }
    }

    pub fn conn(from: Addr, to: Addr) -> Self {
        Link::new(from, to, Polarity::Conn)
    }

    pub fn disconn(from: Addr, to: Addr) -> Self {
        Link::new(from, to, Polarity::Disconn)
    }

    pub fn negated(&self) -> Link {
        Link::new(self.from.clone(), self.to.clone(), self.pol.flip())
    }

    pub fn is_self_link(&self) -> bool {
        self.from == self.to
    }

    pub fn subst(&self, new: &Addr, old: &Addr) -> Link {
        Link::new(self.from.subst(new, old), self.to.subst(new, old), self.pol)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pol {
            Polarity::Conn => write!(f, "{}->{}", self.from, self.to),
            Polarity::Disconn => write!(f, "{}-/->{}", self.from, self.to),
        }
    }
}

/// A set of links. Well-formedness is checked by the operations that need it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Constraint {
    links: BTreeSet<Link>,
}

pub fn well_formed<'a>(links: impl IntoIterator<Item = &'a Link>) -> bool {
    let mut seen: BTreeMap<(&Addr, &Addr), Polarity> = BTreeMap::new();
    for l in links {
        if let Some(p) = seen.insert((&l.from, &l.to), l.pol) {
            if p != l.pol {
                return false;
            }
        }
    }
    true
}

impl Constraint {
    pub fn empty() -> Self {
        Constraint::default()
    }

    pub fn from_links(links: impl IntoIterator<Item = Link>) -> Self {
        Constraint { links: links.into_iter().collect() }
    }

    pub fn single(link: Link) -> Self {
        Constraint::from_links([link])
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.iter()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn contains(&self, l: &Link) -> bool {
        self.links.contains(l)
    }

    pub fn insert(&mut self, l: Link) {
        self.links.insert(l);
    }

    pub fn is_subset(&self, other: &Constraint) -> bool {
        self.links.is_subset(&other.links)
    }

    pub fn is_well_formed(&self) -> bool {
        well_formed(self.links.iter())
    }

    pub fn has_unknown(&self) -> bool {
        self.links.iter().any(|l| l.from.is_unknown() || l.to.is_unknown())
    }

    pub fn has_self_link(&self) -> bool {
        self.links.iter().any(Link::is_self_link)
    }

    /// Literal union without any check.
    pub fn union(&self, other: &Constraint) -> Constraint {
        Constraint { links: self.links.union(&other.links).cloned().collect() }
    }

    /// Union, or `None` when the result is ill-formed.
    pub fn union_wf(&self, other: &Constraint) -> Option<Constraint> {
        let u = self.union(other);
        u.is_well_formed().then_some(u)
    }

    pub fn negate(&self) -> Constraint {
        Constraint::from_links(self.links.iter().map(Link::negated))
    }

    pub fn subst(&self, new: &Addr, old: &Addr) -> Constraint {
        Constraint::from_links(self.links.iter().map(|l| l.subst(new, old)))
    }

    /// Drops negative self-links and rejects positive ones or clashes.
    /// Topologies never contain a self-link, so `l-/->l` always holds and `l->l` never does.
    pub fn normalize_self_links(self) -> Option<Constraint> {
        let mut out = BTreeSet::new();
        for l in self.links {
            if l.is_self_link() && !l.from.is_unknown() {
                if l.pol == Polarity::Conn {
                    return None;
                }
            } else {
                out.insert(l);
            }
        }
        let c = Constraint { links: out };
        c.is_well_formed().then_some(c)
    }

    /// `C[l/?]` as used when a deployment fixes the executing node.
    pub fn ground_at(&self, l: &Addr) -> Option<Constraint> {
        self.subst(l, &Addr::Unknown).normalize_self_links()
    }

    /// `C[?/l]` for the hiding operator. Literals between two anonymous
    /// endpoints and pairs that acquire both polarities are dropped.
    pub fn hide(&self, l: &Addr) -> Constraint {
        let raw = self.subst(&Addr::Unknown, l);
        let mut pols: BTreeMap<(Addr, Addr), BTreeSet<Polarity>> = BTreeMap::new();
        for lk in raw.links {
            if lk.from.is_unknown() && lk.to.is_unknown() {
                continue;
            }
            pols.entry((lk.from, lk.to)).or_default().insert(lk.pol);
        }
        Constraint::from_links(
            pols.into_iter()
                .filter(|(_, p)| p.len() == 1)
                .map(|((f, t), p)| Link::new(f, t, *p.iter().next().unwrap())),
        )
    }

    /// `self ≼ other`: `other ⊆ self`, or `other[l/?] ⊆ self` for some known `l`.
    pub fn preceq(&self, other: &Constraint, uni: &Universe) -> bool {
        if other.is_subset(self) {
            return true;
        }
        if !other.has_unknown() {
            return false;
        }
        uni.locs.iter().any(|l| other.subst(&Addr::known(l.as_str()), &Addr::Unknown).is_subset(self))
    }

    /// All well-formed instances `C[l/?]` with self-links resolved; `{C}` when ground.
    pub fn ground_unknown(&self, uni: &Universe) -> Vec<Constraint> {
        if !self.has_unknown() {
            return vec![self.clone()];
        }
        let mut out: Vec<Constraint> = uni
            .locs
            .iter()
            .filter_map(|l| self.ground_at(&Addr::known(l.as_str())))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Addresses mentioned by the literals.
    pub fn addrs(&self) -> BTreeSet<Addr> {
        self.links.iter().flat_map(|l| [l.from.clone(), l.to.clone()]).collect()
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.links.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<Link> for Constraint {
    fn from_iter<T: IntoIterator<Item = Link>>(iter: T) -> Self {
        Constraint::from_links(iter)
    }
}

/// Index of the ordered pair `(i, j)`, `i != j`, among `n` addresses.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    i * (n - 1) + if j < i { j } else { j - 1 }
}

/// A directed topology over the declared addresses, one bit per ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Topology {
    pub n: usize,
    pub edges: u32,
}

impl Topology {
    pub fn empty(n: usize) -> Self {
        Topology { n, edges: 0 }
    }

    pub fn full(n: usize) -> Self {
        let p = n * n.saturating_sub(1);
        Topology { n, edges: if p == 32 { u32::MAX } else { (1u32 << p) - 1 } }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut t = Topology::empty(n);
        for (i, j) in edges {
            if i != j {
                t.edges |= 1 << pair_index(n, i, j);
            }
        }
        t
    }

    pub fn from_named(uni: &Universe, edges: &[(&str, &str)]) -> Self {
        Topology::from_edges(
            uni.locs.len(),
            edges.iter().map(|(a, b)| (uni.loc_index(a).unwrap(), uni.loc_index(b).unwrap())),
        )
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges & (1 << pair_index(self.n, i, j)) != 0
    }

    pub fn out(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// A directed path of length at least one from `i` to `j`.
    pub fn reaches(&self, i: usize, j: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = self.out(i);
        while let Some(k) = stack.pop() {
            if k == j {
                return true;
            }
            if !seen[k] {
                seen[k] = true;
                stack.extend(self.out(k));
            }
        }
        false
    }
}

/// The complete constraint of a topology.
pub fn extract_constraint(g: &Topology, uni: &Universe) -> Constraint {
    let mut c = Constraint::empty();
    for i in 0..g.n {
        for j in 0..g.n {
            if i != j {
                let pol = if g.has_edge(i, j) { Polarity::Conn } else { Polarity::Disconn };
                c.insert(Link::new(Addr::known(uni.locs[i].as_str()), Addr::known(uni.locs[j].as_str()), pol));
            }
        }
    }
    c
}

/// A set of topologies over `n` addresses.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TopoSet {
    n: usize,
    bits: Vec<u64>,
}

impl TopoSet {
    fn universe_size(n: usize) -> usize {
        1usize << (n * n.saturating_sub(1))
    }

    pub fn empty(n: usize) -> Self {
        let size = Self::universe_size(n);
        TopoSet { n, bits: vec![0; size.div_ceil(64)] }
    }

    pub fn all(n: usize) -> Self {
        let mut s = TopoSet::empty(n);
        for t in 0..Self::universe_size(n) {
            s.bits[t / 64] |= 1 << (t % 64);
        }
        s
    }

    pub fn insert(&mut self, g: Topology) {
        let t = g.edges as usize;
        self.bits[t / 64] |= 1 << (t % 64);
    }

    pub fn contains(&self, g: &Topology) -> bool {
        let t = g.edges as usize;
        self.bits[t / 64] & (1 << (t % 64)) != 0
    }

    pub fn union_with(&mut self, other: &TopoSet) {
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
    }

    pub fn intersects(&self, other: &TopoSet) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &TopoSet) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| a & !b == 0)
    }

    pub fn difference(&self, other: &TopoSet) -> TopoSet {
        TopoSet { n: self.n, bits: self.bits.iter().zip(&other.bits).map(|(a, b)| a & !b).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|b| *b == 0)
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = Topology> + '_ {
        let n = self.n;
        (0..Self::universe_size(n))
            .filter(move |t| self.bits[t / 64] & (1 << (t % 64)) != 0)
            .map(move |t| Topology { n, edges: t as u32 })
    }
}

fn masks(c: &Constraint, uni: &Universe) -> Result<Option<(u32, u32)>> {
    let n = uni.locs.len();
    let (mut pos, mut neg) = (0u32, 0u32);
    for l in c.links() {
        let (Some(a), Some(b)) = (l.from.name(), l.to.name()) else {
            return Err(CoreError::UnknownAddress(c.to_string()));
        };
        let (Some(i), Some(j)) = (uni.loc_index(a), uni.loc_index(b)) else {
            return Err(CoreError::Invalid(format!("undeclared address in {c}")));
        };
        if i == j {
            if l.pol == Polarity::Conn {
                return Ok(None);
            }
            continue;
        }
        let bit = 1u32 << pair_index(n, i, j);
        match l.pol {
            Polarity::Conn => pos |= bit,
            Polarity::Disconn => neg |= bit,
        }
    }
    Ok(Some((pos, neg)))
}

/// `Γ(c)`: the topologies whose complete constraint is `≼ c`. `c` must be ground.
pub fn denotation(c: &Constraint, uni: &Universe) -> Result<TopoSet> {
    uni.check_size()?;
    if !c.is_well_formed() {
        return Err(CoreError::IllFormed(c.to_string()));
    }
    let n = uni.locs.len();
    let mut out = TopoSet::empty(n);
    let Some((pos, neg)) = masks(c, uni)? else {
        return Ok(out);
    };
    for t in 0..TopoSet::universe_size(n) {
        let t = t as u32;
        if t & pos == pos && t & neg == 0 {
            out.insert(Topology { n, edges: t });
        }
    }
    Ok(out)
}

/// Union of `Γ` over every grounding of the unknown address.
pub fn grounded_denotation(c: &Constraint, uni: &Universe) -> Result<TopoSet> {
    let mut out = TopoSet::empty(uni.locs.len());
    for g in c.ground_unknown(uni) {
        out.union_with(&denotation(&g, uni)?);
    }
    Ok(out)
}

/// Pairwise disjoint denotations whose union is the denotation of `whole`.
pub fn is_partitioning(parts: &[Constraint], whole: &Constraint, uni: &Universe) -> Result<bool> {
    let target = denotation(whole, uni)?;
    let mut acc = TopoSet::empty(uni.locs.len());
    for p in parts {
        let d = denotation(p, uni)?;
        if acc.intersects(&d) {
            return Ok(false);
        }
        acc.union_with(&d);
    }
    Ok(acc == target)
}

/// A multi-hop (un)reachability literal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HopLit {
    pub from: String,
    pub to: String,
    pub reach: bool,
}

impl HopLit {
    pub fn reach(from: &str, to: &str) -> Self {
        HopLit { from: from.into(), to: to.into(), reach: true }
    }

    pub fn unreach(from: &str, to: &str) -> Self {
        HopLit { from: from.into(), to: to.into(), reach: false }
    }
}

impl fmt::Display for HopLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.reach {
            write!(f, "{}=>{}", self.from, self.to)
        } else {
            write!(f, "{}=/=>{}", self.from, self.to)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiHop {
    lits: BTreeSet<HopLit>,
}

impl MultiHop {
    pub fn from_lits(lits: impl IntoIterator<Item = HopLit>) -> Self {
        MultiHop { lits: lits.into_iter().collect() }
    }

    pub fn lits(&self) -> impl Iterator<Item = &HopLit> {
        self.lits.iter()
    }

    pub fn is_well_formed(&self) -> bool {
        !self.lits.iter().any(|l| self.lits.contains(&HopLit { reach: !l.reach, ..l.clone() }))
    }
}

impl fmt::Display for MultiHop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

pub fn topology_satisfies(g: &Topology, m: &MultiHop, uni: &Universe) -> bool {
    m.lits.iter().all(|l| match (uni.loc_index(&l.from), uni.loc_index(&l.to)) {
        (Some(i), Some(j)) => g.reaches(i, j) == l.reach,
        _ => false,
    })
}

/// `c ⊨ m`: some topology of `Γ(c)` satisfies `m`. Unknown addresses are grounded first.
pub fn constraint_satisfies(c: &Constraint, m: &MultiHop, uni: &Universe) -> Result<bool> {
    Ok(grounded_denotation(c, uni)?.iter().any(|g| topology_satisfies(&g, m, uni)))
}
