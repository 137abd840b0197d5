//! Branching computed-network bisimilarity, its reliable variant with
//! partition matching, the rooted versions and the semi-branching variant.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::constraint::{denotation, extract_constraint, Addr, Constraint, TopoSet, Topology};
use crate::error::{CoreError, Result};
use crate::sos::Clts;
use crate::term::{Action, Label};
use crate::universe::Universe;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    /// Single-step matching, receives may stutter.
    Branching,
    RootedBranching,
    /// Partition matching, only τ may stutter.
    BranchingReliable,
    RootedBranchingReliable,
    SemiBranchingReliable,
}

impl Mode {
    pub fn is_rooted(self) -> bool {
        matches!(self, Mode::RootedBranching | Mode::RootedBranchingReliable)
    }

    fn base(self) -> Mode {
        match self {
            Mode::RootedBranching => Mode::Branching,
            Mode::RootedBranchingReliable => Mode::BranchingReliable,
            m => m,
        }
    }

    fn partitions(self) -> bool {
        matches!(self.base(), Mode::BranchingReliable | Mode::SemiBranchingReliable)
    }
}

impl FromStr for Mode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Mode> {
        Ok(match s {
            "b" => Mode::Branching,
            "rb" => Mode::RootedBranching,
            "br" => Mode::BranchingReliable,
            "rbr" => Mode::RootedBranchingReliable,
            "sbr" => Mode::SemiBranchingReliable,
            _ => return Err(CoreError::Invalid(format!("unknown mode `{s}`; expected b, rb, br, rbr or sbr"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Branching => "b",
            Mode::RootedBranching => "rb",
            Mode::BranchingReliable => "br",
            Mode::RootedBranchingReliable => "rbr",
            Mode::SemiBranchingReliable => "sbr",
        };
        f.write_str(s)
    }
}

/// `{l}` plus every instance `(C[ℓ/?], nsnd(m, ℓ))` when the sender is unknown.
pub fn angle_counterparts(l: &Label, uni: &Universe) -> Vec<Label> {
    let mut out = vec![l.clone()];
    if let Action::NSnd(m, Addr::Unknown) = &l.action {
        for loc in &uni.locs {
            let a = Addr::known(loc.as_str());
            if let Some(c) = instance(&l.constraint, &a) {
                out.push(Label::new(c, Action::NSnd(m.clone(), a)));
            }
        }
    }
    out
}

/// `C[ℓ/?]` when well-formed once self-links are resolved.
fn instance(c: &Constraint, l: &Addr) -> Option<Constraint> {
    c.ground_at(l)
}

/// Matchers that cover one challenge from the initial pair.
#[derive(Clone, Debug, Serialize)]
pub struct RootCoverage {
    /// 1 when the challenge comes from the first system.
    pub side: u8,
    pub challenge: Label,
    pub matchers: Vec<Label>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Counterexample {
    pub side: u8,
    pub state: String,
    pub challenge: Label,
    pub target: String,
    /// A topology no matcher accounts for, as its complete constraint.
    pub uncovered: Option<Constraint>,
    pub other_state: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BisimVerdict {
    pub mode: Mode,
    pub related: bool,
    /// Related state index pairs (first system, second system).
    pub witness: Vec<(usize, usize)>,
    pub root_coverage: Vec<RootCoverage>,
    pub counterexample: Option<Counterexample>,
}

struct Side {
    tau: Vec<Vec<usize>>,
    moves: Vec<Vec<(Label, usize)>>,
}

impl Side {
    fn new(c: &Clts) -> Self {
        let tau = (0..c.len()).map(|s| c.tau_reach(s).into_iter().collect()).collect();
        let moves = (0..c.len()).map(|s| c.outgoing(s).map(|t| (t.label.clone(), t.dst)).collect()).collect();
        Side { tau, moves }
    }
}

struct Failure {
    label: Label,
    target: usize,
    uncovered: Option<Topology>,
}

struct Checker<'a> {
    uni: &'a Universe,
    mode: Mode,
    gamma: RefCell<HashMap<Constraint, TopoSet>>,
}

impl Checker<'_> {
    fn gamma(&self, c: &Constraint) -> TopoSet {
        if let Some(s) = self.gamma.borrow().get(c) {
            return s.clone();
        }
        let s = denotation(c, self.uni).unwrap_or_else(|_| TopoSet::empty(self.uni.locs.len()));
        self.gamma.borrow_mut().insert(c.clone(), s.clone());
        s
    }

    /// Union of `Γ(D[ℓ/?])` over all addresses, or `Γ(D)` for ground `D`.
    fn gamma_star(&self, d: &Constraint) -> TopoSet {
        let mut out = TopoSet::empty(self.uni.locs.len());
        for g in d.ground_unknown(self.uni) {
            out.union_with(&self.gamma(&g));
        }
        out
    }

    /// `(C, η)` is matched by a single stored step `(D, ζ)` under `⟨−⟩` and Exe.
    fn single(&self, c: &Constraint, eta: &Action, d: &Constraint, zeta: &Action) -> bool {
        if zeta == eta && c.preceq(d, self.uni) {
            return true;
        }
        match (eta, zeta) {
            (Action::NSnd(m, Addr::Unknown), Action::NSnd(m2, l @ Addr::Known(_))) if m == m2 => {
                instance(c, l).is_some_and(|ci| ci.preceq(d, self.uni))
            }
            _ => false,
        }
    }

    /// Topology coverage of a challenge by a family of matchers; returns an uncovered topology.
    fn coverage(&self, c: &Constraint, eta: &Action, matchers: &[(&Constraint, &Action)]) -> Option<Topology> {
        let n = self.uni.locs.len();
        let locs: Vec<Addr> = self.uni.locs.iter().map(|l| Addr::known(l.as_str())).collect();
        match eta {
            Action::NSnd(m, Addr::Unknown) => {
                let mut first_gap = None;
                let mut any_instance = false;
                for l in &locs {
                    let Some(ci) = instance(c, l) else { continue };
                    any_instance = true;
                    let mut cover = TopoSet::empty(n);
                    for (d, z) in matchers {
                        match z {
                            Action::NSnd(m2, l2) if m2 == m && l2 == l => cover.union_with(&self.gamma_star(d)),
                            Action::NSnd(m2, Addr::Unknown) if m2 == m => {
                                if let Some(di) = d.ground_at(l) {
                                    cover.union_with(&self.gamma(&di));
                                }
                            }
                            _ => {}
                        }
                    }
                    let gap = self.gamma(&ci).difference(&cover);
                    let next = gap.iter().next();
                    match next {
                        None => return None,
                        Some(g) => {
                            first_gap.get_or_insert(g);
                        }
                    }
                }
                if any_instance {
                    first_gap
                } else {
                    None
                }
            }
            _ if c.has_unknown() => {
                for l in &locs {
                    let Some(ci) = instance(c, l) else { continue };
                    let mut cover = TopoSet::empty(n);
                    for (d, z) in matchers {
                        if *z != eta {
                            continue;
                        }
                        if d.has_unknown() {
                            if let Some(di) = d.ground_at(l) {
                                cover.union_with(&self.gamma(&di));
                            }
                        } else {
                            cover.union_with(&self.gamma(d));
                        }
                    }
                    if let Some(g) = self.gamma(&ci).difference(&cover).iter().next() {
                        return Some(g);
                    }
                }
                None
            }
            _ => {
                let mut cover = TopoSet::empty(n);
                for (d, z) in matchers {
                    if *z == eta {
                        cover.union_with(&self.gamma_star(d));
                    }
                }
                self.gamma(c).difference(&cover).iter().next()
            }
        }
    }

    /// Transfer condition for `p` (in `a`) against `q` (in `b`); `rel(x, y)` relates `a` to `b` states.
    fn simulate(&self, a: &Side, b: &Side, p: usize, q: usize, rel: &dyn Fn(usize, usize) -> bool) -> Option<Failure> {
        let mode = self.mode.base();
        for (lab, p2) in &a.moves[p] {
            let (c, eta) = (&lab.constraint, &lab.action);
            let stutter_ok = match mode {
                Mode::Branching => matches!(eta, Action::Tau | Action::NRcv(_)),
                _ => eta.is_tau(),
            };
            if stutter_ok {
                let ok = match mode {
                    Mode::SemiBranchingReliable => b.tau[q].iter().any(|&q2| rel(p, q2) && rel(*p2, q2)),
                    _ => rel(*p2, q),
                };
                if ok {
                    continue;
                }
            }
            let mut matchers: Vec<(&Constraint, &Action)> = Vec::new();
            let mut single = false;
            'outer: for &q2 in &b.tau[q] {
                if !rel(p, q2) {
                    continue;
                }
                for (lb, q3) in &b.moves[q2] {
                    if !rel(*p2, *q3) {
                        continue;
                    }
                    if self.single(c, eta, &lb.constraint, &lb.action) {
                        single = true;
                        break 'outer;
                    }
                    matchers.push((&lb.constraint, &lb.action));
                }
            }
            if single {
                continue;
            }
            if !self.mode.partitions() {
                return Some(Failure { label: lab.clone(), target: *p2, uncovered: None });
            }
            if let Some(g) = self.coverage(c, eta, &matchers) {
                return Some(Failure { label: lab.clone(), target: *p2, uncovered: Some(g) });
            }
        }
        None
    }

    /// Root condition: every step of `p` is matched by one step of `q` into related states.
    fn root(&self, a: &Side, b: &Side, p: usize, q: usize, rel: &dyn Fn(usize, usize) -> bool) -> std::result::Result<Vec<RootCoverage>, Failure> {
        let mut cov = Vec::new();
        for (lab, p2) in &a.moves[p] {
            let m: Vec<Label> = b.moves[q]
                .iter()
                .filter(|(lb, q2)| rel(*p2, *q2) && self.single(&lab.constraint, &lab.action, &lb.constraint, &lb.action))
                .map(|(lb, _)| lb.clone())
                .collect();
            if m.is_empty() {
                return Err(Failure { label: lab.clone(), target: *p2, uncovered: None });
            }
            cov.push(RootCoverage { side: 0, challenge: lab.clone(), matchers: m });
        }
        Ok(cov)
    }

    /// Matchers with the challenge's action that contribute to covering it (for reporting).
    fn contributing(&self, a: &Side, b: &Side, p: usize, q: usize, rel: &dyn Fn(usize, usize) -> bool) -> Vec<RootCoverage> {
        let mut out = Vec::new();
        for (lab, p2) in &a.moves[p] {
            let mut ms = Vec::new();
            for &q2 in &b.tau[q] {
                if !rel(p, q2) {
                    continue;
                }
                for (lb, q3) in &b.moves[q2] {
                    if !rel(*p2, *q3) {
                        continue;
                    }
                    let same_kind = lb.action == lab.action
                        || matches!((&lab.action, &lb.action), (Action::NSnd(m, Addr::Unknown), Action::NSnd(m2, _)) if m == m2);
                    if same_kind && !ms.contains(lb) {
                        ms.push(lb.clone());
                    }
                }
            }
            out.push(RootCoverage { side: 0, challenge: lab.clone(), matchers: ms });
        }
        out
    }
}

fn topology_constraint(g: Option<Topology>, uni: &Universe) -> Option<Constraint> {
    g.map(|g| extract_constraint(&g, uni))
}

/// Decides whether the initial states of two systems are related in `mode`.
pub fn check_bisim(c1: &Clts, c2: &Clts, mode: Mode) -> Result<BisimVerdict> {
    c1.universe.same_as(&c2.universe)?;
    c1.universe.check_size()?;
    let uni = &c1.universe;
    let (a, b) = (Side::new(c1), Side::new(c2));
    let ck = Checker { uni, mode, gamma: RefCell::default() };
    let (n1, n2) = (c1.len(), c2.len());
    let rel = RefCell::new(vec![true; n1 * n2]);
    loop {
        let mut changed = false;
        for p in 0..n1 {
            for q in 0..n2 {
                if !rel.borrow()[p * n2 + q] {
                    continue;
                }
                let fwd = |x: usize, y: usize| rel.borrow()[x * n2 + y];
                let bwd = |y: usize, x: usize| rel.borrow()[x * n2 + y];
                let bad = ck.simulate(&a, &b, p, q, &fwd).is_some() || ck.simulate(&b, &a, q, p, &bwd).is_some();
                if bad {
                    rel.borrow_mut()[p * n2 + q] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let rel = rel.into_inner();
    let fwd = |x: usize, y: usize| rel[x * n2 + y];
    let bwd = |y: usize, x: usize| rel[x * n2 + y];
    let (i1, i2) = (c1.initial, c2.initial);
    let witness: Vec<(usize, usize)> =
        (0..n1).flat_map(|p| (0..n2).map(move |q| (p, q))).filter(|&(p, q)| rel[p * n2 + q]).collect();

    let cex = |side: u8, f: Failure, from: &Clts, other: &Clts, p: usize, q: usize| Counterexample {
        side,
        state: from.states[p].to_string(),
        challenge: f.label,
        target: from.states[f.target].to_string(),
        uncovered: topology_constraint(f.uncovered, uni),
        other_state: other.states[q].to_string(),
    };

    if mode.is_rooted() {
        let r1 = ck.root(&a, &b, i1, i2, &fwd);
        let r2 = ck.root(&b, &a, i2, i1, &bwd);
        return Ok(match (r1, r2) {
            (Ok(mut x), Ok(y)) => {
                x.extend(y.into_iter().map(|mut r| {
                    r.side = 2;
                    r
                }));
                for r in x.iter_mut().filter(|r| r.side == 0) {
                    r.side = 1;
                }
                BisimVerdict { mode, related: true, witness, root_coverage: x, counterexample: None }
            }
            (Err(f), _) => BisimVerdict {
                mode,
                related: false,
                witness: vec![],
                root_coverage: vec![],
                counterexample: Some(cex(1, f, c1, c2, i1, i2)),
            },
            (_, Err(f)) => BisimVerdict {
                mode,
                related: false,
                witness: vec![],
                root_coverage: vec![],
                counterexample: Some(cex(2, f, c2, c1, i2, i1)),
            },
        });
    }

    if fwd(i1, i2) {
        let mut cov = ck.contributing(&a, &b, i1, i2, &fwd);
        cov.iter_mut().for_each(|r| r.side = 1);
        let mut cov2 = ck.contributing(&b, &a, i2, i1, &bwd);
        cov2.iter_mut().for_each(|r| r.side = 2);
        cov.extend(cov2);
        return Ok(BisimVerdict { mode, related: true, witness, root_coverage: cov, counterexample: None });
    }
    let counterexample = if let Some(f) = ck.simulate(&a, &b, i1, i2, &fwd) {
        Some(cex(1, f, c1, c2, i1, i2))
    } else {
        ck.simulate(&b, &a, i2, i1, &bwd).map(|f| cex(2, f, c2, c1, i2, i1))
    };
    Ok(BisimVerdict { mode, related: false, witness: vec![], root_coverage: vec![], counterexample })
}

/// Replays the transfer conditions of `mode` on a claimed relation.
pub fn verify_relation(c1: &Clts, c2: &Clts, mode: Mode, pairs: &[(usize, usize)]) -> bool {
    let uni = &c1.universe;
    let (a, b) = (Side::new(c1), Side::new(c2));
    let ck = Checker { uni, mode, gamma: RefCell::default() };
    let set: std::collections::HashSet<(usize, usize)> = pairs.iter().copied().collect();
    let fwd = |x: usize, y: usize| set.contains(&(x, y));
    let bwd = |y: usize, x: usize| set.contains(&(x, y));
    pairs.iter().all(|&(p, q)| ck.simulate(&a, &b, p, q, &fwd).is_none() && ck.simulate(&b, &a, q, p, &bwd).is_none())
}

/// Whether the semi-branching and branching reliable verdicts agree.
pub fn check_semi_branching_coincidence(c1: &Clts, c2: &Clts) -> Result<bool> {
    let x = check_bisim(c1, c2, Mode::SemiBranchingReliable)?;
    let y = check_bisim(c1, c2, Mode::BranchingReliable)?;
    Ok(x.related == y.related)
}
