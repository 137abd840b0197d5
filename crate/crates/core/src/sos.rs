//! Transition derivation and state-space exploration.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::rc::Rc;

use serde::Serialize;

use crate::constraint::{Addr, Constraint, Link, Polarity};
use crate::error::{CoreError, Result};
use crate::term::{Action, DefKind, Label, Specification, Term};
use crate::universe::Universe;

/// A process-level step `(C, a)` of an undeployed body.
pub type ProcMove = (Constraint, Action, Term);
/// A network-level step.
pub type Move = (Label, Term);

const MAX_UNFOLD: usize = 64;

/// Derives transitions for one specification, memoising per term.
pub struct Engine<'a> {
    spec: &'a Specification,
    proc_cache: RefCell<HashMap<Term, Rc<Vec<ProcMove>>>>,
    net_cache: RefCell<HashMap<Term, Rc<Vec<Move>>>>,
}

fn exec_sense(target: &Addr, pol: Polarity) -> Link {
    Link::new(Addr::Unknown, target.clone(), pol)
}

/// Removes labels that are strict `≼`-instances of a sibling with the same action and target.
pub fn most_general(mut moves: Vec<Move>, uni: &Universe) -> Vec<Move> {
    moves.sort();
    moves.dedup();
    let keep: Vec<bool> = moves
        .iter()
        .map(|(l, t)| {
            !moves.iter().any(|(l2, t2)| {
                t2 == t
                    && l2.action == l.action
                    && l2.constraint != l.constraint
                    && l.constraint.preceq(&l2.constraint, uni)
                    && !l2.constraint.preceq(&l.constraint, uni)
            })
        })
        .collect();
    moves.into_iter().zip(keep).filter_map(|(m, k)| k.then_some(m)).collect()
}

impl<'a> Engine<'a> {
    pub fn new(spec: &'a Specification) -> Self {
        Engine { spec, proc_cache: RefCell::default(), net_cache: RefCell::default() }
    }

    pub fn spec(&self) -> &Specification {
        self.spec
    }

    fn uni(&self) -> &Universe {
        &self.spec.universe
    }

    fn lookup(&self, n: &str, kind_ok: impl Fn(DefKind) -> bool) -> Result<&'a Term> {
        match self.spec.defs.get(n) {
            Some(d) if kind_ok(d.kind) => Ok(&d.term),
            _ => Err(CoreError::UnboundName(n.into())),
        }
    }

    /// Steps of a deployable process body: Prefix, Choice, Sen1, Sen2 and Inv.
    pub fn proc_moves(&self, t: &Term) -> Result<Rc<Vec<ProcMove>>> {
        self.proc_moves_at(t, 0)
    }

    fn proc_moves_at(&self, t: &Term, depth: usize) -> Result<Rc<Vec<ProcMove>>> {
        if let Some(m) = self.proc_cache.borrow().get(t) {
            return Ok(m.clone());
        }
        let mut out = Vec::new();
        match t {
            Term::Nil => {}
            Term::Prefix(a, b) => out.push((Constraint::empty(), a.clone(), (**b).clone())),
            Term::Choice(a, b) => {
                out.extend(self.proc_moves_at(a, depth)?.iter().cloned());
                out.extend(self.proc_moves_at(b, depth)?.iter().cloned());
            }
            Term::Sense(l, a, b) => {
                for (branch, pol) in [(a, Polarity::Conn), (b, Polarity::Disconn)] {
                    let lit = Constraint::single(exec_sense(l, pol));
                    for (c, act, t2) in self.proc_moves_at(branch, depth)?.iter() {
                        if let Some(u) = lit.union_wf(c) {
                            out.push((u, act.clone(), t2.clone()));
                        }
                    }
                }
            }
            Term::Name(n) => {
                if depth > MAX_UNFOLD {
                    return Err(CoreError::UnguardedRecursion(n.clone()));
                }
                let body = self.lookup(n, |k| k == DefKind::Proc)?;
                out.extend(self.proc_moves_at(body, depth + 1)?.iter().cloned());
            }
            other => return Err(CoreError::Invalid(format!("`{other}` cannot occur in a deployed process"))),
        }
        out.sort();
        out.dedup();
        let rc = Rc::new(out);
        if depth == 0 {
            self.proc_cache.borrow_mut().insert(t.clone(), rc.clone());
        }
        Ok(rc)
    }

    /// Resolves process names at the head of a body.
    fn resolve_proc<'t>(&'t self, mut t: &'t Term) -> Result<&'t Term> {
        let mut depth = 0;
        while let Term::Name(n) = t {
            depth += 1;
            if depth > MAX_UNFOLD {
                return Err(CoreError::UnguardedRecursion(n.clone()));
            }
            t = self.lookup(n, |k| k == DefKind::Proc)?;
        }
        Ok(t)
    }

    fn receives(&self, t: &Term, m: &str) -> Result<Vec<Constraint>> {
        Ok(self
            .proc_moves(t)?
            .iter()
            .filter(|(_, a, _)| matches!(a, Action::Rcv(x) if x == m))
            .map(|(c, _, _)| c.clone())
            .collect())
    }

    /// Rules Snd, Rcv1 and Int (or Inter1', Inter2' and Int for local deployment).
    fn node_moves(&self, body: &Term, at: &Addr) -> Result<Vec<Move>> {
        let mut out = Vec::new();
        for (c, a, t2) in self.proc_moves(body)?.iter() {
            let Some(g) = c.ground_at(at) else { continue };
            let target = Term::Deploy(Box::new(t2.clone()), at.clone());
            match a {
                Action::Snd(m) => out.push((Label::new(g, Action::NSnd(m.clone(), at.clone())), target)),
                Action::Rcv(m) => {
                    let mut g = g;
                    g.insert(Link::conn(Addr::Unknown, at.clone()));
                    if g.is_well_formed() {
                        out.push((Label::new(g, Action::NRcv(m.clone())), target));
                    }
                }
                Action::Internal(_) => out.push((Label::new(g, a.clone()), target)),
                other => return Err(CoreError::Invalid(format!("action {other} inside a deployment"))),
            }
        }
        Ok(out)
    }

    /// Drop transitions that make `[[body]]_at` input-enabled (rule Rcv2).
    ///
    /// For a message with positive receive constraints `P`, the drop constraints
    /// are the subset-minimal constraints over the literal pairs of `P` that clash
    /// with every `P_i` for every possible sender.
    pub fn complete_receives(&self, body: &Term, at: &Addr) -> Result<Vec<Move>> {
        let uni = self.uni();
        let positive = self.node_moves(body, at)?;
        let node = Term::Deploy(Box::new(body.clone()), at.clone());
        let mut out = Vec::new();
        for m in &uni.msgs {
            let p: Vec<&Constraint> = positive
                .iter()
                .filter(|(l, _)| matches!(&l.action, Action::NRcv(x) if x == m))
                .map(|(l, _)| &l.constraint)
                .collect();
            for d in drop_constraints(&p, at, uni) {
                out.push((Label::new(d, Action::NRcv(m.clone())), node.clone()));
            }
        }
        Ok(out)
    }

    /// Sen3 and Sen4 for each `sense` summand of a local deployment body.
    fn sense_drops(&self, body: &Term, at: &Addr, fallback: &Term) -> Result<Vec<Move>> {
        let mut out = Vec::new();
        let mut stack = vec![self.resolve_proc(body)?];
        let mut seen = BTreeSet::new();
        while let Some(t) = stack.pop() {
            match t {
                Term::Choice(a, b) => {
                    stack.push(self.resolve_proc(a)?);
                    stack.push(self.resolve_proc(b)?);
                }
                Term::Sense(l2, t1, t2) if seen.insert(t) => {
                    for m in &self.uni().msgs {
                        let r1 = self.receives(t1, m)?;
                        let r2 = self.receives(t2, m)?;
                        let cases = [(Polarity::Conn, &r1, &r2), (Polarity::Disconn, &r2, &r1)];
                        for (pol, blocked, live) in cases {
                            if !blocked.is_empty() {
                                continue;
                            }
                            for c in live.iter() {
                                let Some(g) = c.ground_at(at) else { continue };
                                let mut lab = Constraint::single(Link::new(at.clone(), l2.clone(), pol));
                                lab = match lab.union_wf(&g).and_then(Constraint::normalize_self_links) {
                                    Some(u) => u,
                                    None => continue,
                                };
                                out.push((Label::new(lab, Action::NRcv(m.clone())), fallback.clone()));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    /// All most-general transitions of a closed network term.
    pub fn derive(&self, t: &Term) -> Result<Rc<Vec<Move>>> {
        self.derive_at(t, 0)
    }

    fn derive_at(&self, t: &Term, depth: usize) -> Result<Rc<Vec<Move>>> {
        if let Some(m) = self.net_cache.borrow().get(t) {
            return Ok(m.clone());
        }
        if depth > MAX_UNFOLD {
            let id = match t {
                Term::Name(n) | Term::Rec(n, _) => n.clone(),
                _ => t.to_string(),
            };
            return Err(CoreError::UnguardedRecursion(id));
        }
        let uni = self.uni();
        let d = |x: &Term| self.derive_at(x, depth);
        let mut out: Vec<Move> = Vec::new();
        match t {
            Term::Nil => {}
            Term::Prefix(a, b) if a.is_iota() => out.push((Label::new(Constraint::empty(), a.clone()), (**b).clone())),
            Term::Prefix(a, _) => return Err(CoreError::Invalid(format!("protocol action {a} outside a deployment"))),
            Term::CPrefix(c, a, b) => out.push((Label::new(c.clone(), a.clone()), (**b).clone())),
            Term::MPrefix(..) => {
                return Err(CoreError::Invalid("multi-hop prefixes have no network transitions".into()))
            }
            Term::Sense(..) => return Err(CoreError::Invalid("sense outside a deployment".into())),
            Term::Choice(a, b) => {
                out.extend(d(a)?.iter().cloned());
                out.extend(d(b)?.iter().cloned());
            }
            Term::Deploy(body, at) => {
                out.extend(self.node_moves(body, at)?);
                out.extend(self.complete_receives(body, at)?);
            }
            Term::LocalDeploy(at, fallback, body) => {
                for (c, a, t2) in self.proc_moves(body)?.iter() {
                    let Some(g) = c.ground_at(at) else { continue };
                    let target = Term::Deploy(Box::new(t2.clone()), at.clone());
                    match a {
                        Action::Snd(m) => out.push((Label::new(g, Action::NSnd(m.clone(), at.clone())), target)),
                        Action::Internal(_) => out.push((Label::new(g, a.clone()), target)),
                        Action::Rcv(m) => {
                            for (pol, tgt) in [(Polarity::Conn, target), (Polarity::Disconn, (**fallback).clone())] {
                                let mut g = g.clone();
                                g.insert(Link::new(Addr::Unknown, at.clone(), pol));
                                if g.is_well_formed() {
                                    out.push((Label::new(g, Action::NRcv(m.clone())), tgt));
                                }
                            }
                        }
                        other => return Err(CoreError::Invalid(format!("action {other} inside a deployment"))),
                    }
                }
                out.extend(self.sense_drops(body, at, fallback)?);
            }
            Term::Par(a, b) => {
                let (ma, mb) = (d(a)?, d(b)?);
                interleave(&ma, b, |x, y| Term::Par(Box::new(x), Box::new(y)), &mut out);
                interleave(&mb, a, |y, x| Term::Par(Box::new(x), Box::new(y)), &mut out);
                communicate(&ma, &mb, &mut out);
            }
            Term::LeftMerge(a, b) => {
                interleave(&d(a)?, b, |x, y| Term::Par(Box::new(x), Box::new(y)), &mut out);
            }
            Term::CommMerge(a, b) => communicate(&d(a)?, &d(b)?, &mut out),
            Term::Hide(l, b) => {
                for (lab, t2) in d(b)?.iter() {
                    let c = lab.constraint.hide(l);
                    let a = lab.action.subst(&Addr::Unknown, l);
                    out.push((Label::new(c, a), Term::Hide(l.clone(), Box::new(t2.clone()))));
                }
            }
            Term::Abstract(ms, b) => {
                for (lab, t2) in d(b)?.iter() {
                    let next = Term::Abstract(ms.clone(), Box::new(t2.clone()));
                    match lab.action.message() {
                        // An anonymous send stands for its sender instances; once the
                        // action is silent nothing else can match them up, so ground here.
                        Some(m) if ms.contains(m) && matches!(lab.action, Action::NSnd(_, Addr::Unknown)) => {
                            for g in lab.constraint.ground_unknown(uni) {
                                out.push((Label::new(g, Action::Tau), next.clone()));
                            }
                        }
                        Some(m) if ms.contains(m) => out.push((Label::new(lab.constraint.clone(), Action::Tau), next)),
                        _ => out.push((lab.clone(), next)),
                    }
                }
            }
            Term::Encap(ms, b) => {
                for (lab, t2) in d(b)?.iter() {
                    if matches!(&lab.action, Action::NRcv(m) if ms.contains(m)) {
                        continue;
                    }
                    out.push((lab.clone(), Term::Encap(ms.clone(), Box::new(t2.clone()))));
                }
            }
            Term::Restrict(c, b) => {
                for (lab, t2) in d(b)?.iter() {
                    if let Some(u) = lab.constraint.union_wf(c) {
                        out.push((Label::new(u, lab.action.clone()), t2.clone()));
                    }
                }
            }
            Term::Name(n) => {
                let body = self.lookup(n, |k| k != DefKind::Proc)?;
                out.extend(self.derive_at(body, depth + 1)?.iter().cloned());
            }
            Term::Rec(..) => {
                let unfolded = t.unfold_rec().expect("rec");
                out.extend(self.derive_at(&unfolded, depth + 1)?.iter().cloned());
            }
        }
        let rc = Rc::new(most_general(out, uni));
        if depth == 0 {
            self.net_cache.borrow_mut().insert(t.clone(), rc.clone());
        }
        Ok(rc)
    }
}

/// Rule Par (and LExe): only internal and silent steps interleave.
fn interleave(moves: &[Move], other: &Term, mk: impl Fn(Term, Term) -> Term, out: &mut Vec<Move>) {
    for (lab, t2) in moves {
        if lab.action.is_iota() {
            out.push((lab.clone(), mk(t2.clone(), other.clone())));
        }
    }
}

/// Rules Bro and Recv (Sync1 and Sync2 for the communication merge), both orientations.
fn communicate(ma: &[Move], mb: &[Move], out: &mut Vec<Move>) {
    let par = |x: &Term, y: &Term| Term::Par(Box::new(x.clone()), Box::new(y.clone()));
    for (la, ta) in ma {
        for (lb, tb) in mb {
            match (&la.action, &lb.action) {
                (Action::NRcv(m1), Action::NRcv(m2)) if m1 == m2 => {
                    if let Some(u) = la.constraint.union_wf(&lb.constraint) {
                        out.push((Label::new(u, la.action.clone()), par(ta, tb)));
                    }
                }
                (Action::NSnd(m1, l), Action::NRcv(m2)) if m1 == m2 => {
                    if let Some(u) = lb.constraint.ground_at(l).and_then(|g| la.constraint.union_wf(&g)) {
                        out.push((Label::new(u, la.action.clone()), par(ta, tb)));
                    }
                }
                (Action::NRcv(m2), Action::NSnd(m1, l)) if m1 == m2 => {
                    if let Some(u) = la.constraint.ground_at(l).and_then(|g| lb.constraint.union_wf(&g)) {
                        out.push((Label::new(u, lb.action.clone()), par(ta, tb)));
                    }
                }
                _ => {}
            }
        }
    }
}

/// Drop constraints for one message given the positive receive constraints of the node.
pub fn drop_constraints(positive: &[&Constraint], at: &Addr, uni: &Universe) -> Vec<Constraint> {
    if positive.is_empty() {
        return vec![Constraint::empty()];
    }
    let pairs: Vec<(Addr, Addr)> = positive
        .iter()
        .flat_map(|c| c.links().map(|l| (l.from.clone(), l.to.clone())))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let senders: Vec<Addr> = uni.locs.iter().map(|s| Addr::known(s.as_str())).filter(|s| s != at).collect();
    let clashes_all = |d: &Constraint| {
        senders.iter().all(|s| {
            let ds = d.subst(s, &Addr::Unknown);
            positive.iter().all(|p| {
                let ps = p.subst(s, &Addr::Unknown);
                !ds.union(&ps).is_well_formed()
                    || ps.links().any(|l| l.is_self_link() && l.pol == Polarity::Conn)
                    || ds.links().any(|l| l.is_self_link() && l.pol == Polarity::Conn)
            })
        })
    };
    // Enumerate by increasing size so minimality is a subset test against earlier hits.
    let k = pairs.len();
    let mut found: Vec<Constraint> = Vec::new();
    let mut candidates: Vec<Constraint> = Vec::new();
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut c = Constraint::empty();
        let mut x = code;
        for (from, to) in &pairs {
            match x % 3 {
                1 => c.insert(Link::conn(from.clone(), to.clone())),
                2 => c.insert(Link::disconn(from.clone(), to.clone())),
                _ => {}
            }
            x /= 3;
        }
        candidates.push(c);
    }
    candidates.sort_by_key(Constraint::len);
    for c in candidates {
        if found.iter().any(|f| f.is_subset(&c)) {
            continue;
        }
        if clashes_all(&c) {
            found.push(c);
        }
    }
    found.sort();
    found
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub src: usize,
    pub label: Label,
    pub dst: usize,
}

/// A finite constrained labelled transition system.
#[derive(Clone, Debug, Serialize)]
pub struct Clts {
    #[serde(skip)]
    pub universe: Universe,
    pub states: Vec<Term>,
    pub initial: usize,
    pub transitions: Vec<Transition>,
    #[serde(skip)]
    out: Vec<Vec<usize>>,
}

impl Clts {
    pub fn from_parts(universe: Universe, states: Vec<Term>, initial: usize, transitions: Vec<Transition>) -> Self {
        let mut out = vec![Vec::new(); states.len()];
        for (i, t) in transitions.iter().enumerate() {
            out[t.src].push(i);
        }
        Clts { universe, states, initial, transitions, out }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn outgoing(&self, s: usize) -> impl Iterator<Item = &Transition> {
        self.out[s].iter().map(move |&i| &self.transitions[i])
    }

    pub fn index_of(&self, t: &Term) -> Option<usize> {
        let c = t.canon();
        self.states.iter().position(|s| *s == c)
    }

    /// States reachable by zero or more τ steps.
    pub fn tau_reach(&self, s: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([s]);
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            for t in self.outgoing(x) {
                if t.label.action.is_tau() && seen.insert(t.dst) {
                    stack.push(t.dst);
                }
            }
        }
        seen
    }

    /// Pairs `(s', C)` with `s ⇒^C s'`, accumulating τ constraints and pruning clashes.
    pub fn tau_reach_accum(&self, s: usize) -> BTreeSet<(usize, Constraint)> {
        let mut seen = BTreeSet::from([(s, Constraint::empty())]);
        let mut queue = VecDeque::from([(s, Constraint::empty())]);
        while let Some((x, c)) = queue.pop_front() {
            for t in self.outgoing(x) {
                if !t.label.action.is_tau() {
                    continue;
                }
                if let Some(u) = c.union_wf(&t.label.constraint) {
                    let item = (t.dst, u);
                    if seen.insert(item.clone()) {
                        queue.push_back(item);
                    }
                }
            }
        }
        seen
    }

    /// Distinct labels per state, grouped by action.
    pub fn labels_by_action(&self, s: usize) -> BTreeMap<Action, Vec<(Constraint, usize)>> {
        let mut m: BTreeMap<Action, Vec<(Constraint, usize)>> = BTreeMap::new();
        for t in self.outgoing(s) {
            m.entry(t.label.action.clone()).or_default().push((t.label.constraint.clone(), t.dst));
        }
        m
    }
}

/// Transitions of `t` with canonical targets.
pub fn derive_transitions(t: &Term, spec: &Specification) -> Result<Vec<Move>> {
    let e = Engine::new(spec);
    let v: Vec<Move> = e.derive(t)?.iter().map(|(l, t2)| (l.clone(), t2.canon())).collect();
    Ok(most_general(v, &spec.universe))
}

/// The drop transitions of a deployed node.
pub fn complete_receives(node: &Term, spec: &Specification) -> Result<Vec<Move>> {
    let e = Engine::new(spec);
    match node {
        Term::Deploy(body, at) => e.complete_receives(body, at),
        Term::LocalDeploy(at, fallback, body) => {
            Ok(e.derive(&Term::LocalDeploy(at.clone(), fallback.clone(), body.clone()))?
                .iter()
                .filter(|(l, t)| matches!(l.action, Action::NRcv(_)) && t == &**fallback)
                .cloned()
                .collect())
        }
        _ => Err(CoreError::Invalid("complete_receives expects a deployed node".into())),
    }
}

/// Breadth-first exploration from the canonical form of `t0`.
pub fn explore(t0: &Term, spec: &Specification, max_states: usize) -> Result<Clts> {
    Engine::new(spec).explore(t0, max_states)
}

impl Engine<'_> {
    pub fn explore(&self, t0: &Term, max_states: usize) -> Result<Clts> {
        self.uni().check_size()?;
        let init = self.inline_nets(t0, &mut vec![]).canon();
        let mut index: HashMap<Term, usize> = HashMap::new();
        let mut states = vec![init.clone()];
        index.insert(init, 0);
        let mut transitions = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let term = states[s].clone();
            let mut seen = BTreeSet::new();
            let moves: Vec<Move> = self.derive(&term)?.iter().map(|(l, t2)| (l.clone(), t2.canon())).collect();
            for (lab, c) in most_general(moves, self.uni()) {
                let dst = match index.get(&c) {
                    Some(&i) => i,
                    None => {
                        if states.len() >= max_states {
                            return Err(CoreError::StateBudgetExceeded(max_states));
                        }
                        let i = states.len();
                        index.insert(c.clone(), i);
                        states.push(c);
                        queue.push_back(i);
                        i
                    }
                };
                if seen.insert((lab.clone(), dst)) {
                    transitions.push(Transition { src: s, label: lab, dst });
                }
            }
        }
        Ok(Clts::from_parts(self.uni().clone(), states, 0, transitions))
    }
}

impl Engine<'_> {
    /// Replaces non-recursive network names by their bodies, so that the
    /// initial state and its successors share one representation.
    fn inline_nets(&self, t: &Term, bound: &mut Vec<String>) -> Term {
        match t {
            Term::Name(n) if !bound.contains(n) => match self.spec.defs.get(n) {
                Some(d) if d.kind != DefKind::Proc => {
                    bound.push(n.clone());
                    let body = self.inline_nets(&d.term, bound);
                    bound.pop();
                    if body.free_names().contains(n) {
                        t.clone()
                    } else {
                        body
                    }
                }
                _ => t.clone(),
            },
            Term::Rec(x, b) => {
                bound.push(x.clone());
                let b2 = self.inline_nets(b, bound);
                bound.pop();
                Term::Rec(x.clone(), Box::new(b2))
            }
            Term::Deploy(..) => t.clone(),
            _ => t.map_children(|c| self.inline_nets(c, bound)),
        }
    }
}

pub const DEFAULT_MAX_STATES: usize = 20_000;
