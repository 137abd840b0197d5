//! Refinement of an explored implementation against a multi-hop specification.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::Serialize;

use crate::constraint::{grounded_denotation, topology_satisfies, Constraint, MultiHop};
use crate::error::{CoreError, Result};
use crate::sos::Clts;
use crate::term::{Action, DefKind, Label, Specification, Term};
use crate::universe::Universe;

const MAX_UNFOLD: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum SpecMove {
    Multi(MultiHop, Action, usize),
    Cons(Constraint, Action, usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RefinementStep {
    pub impl_state: usize,
    pub impl_term: String,
    pub spec_term: String,
    pub accumulated: Constraint,
    /// The implementation step that led here, when it was a single step.
    pub via: Option<Label>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementVerdict {
    pub refines: bool,
    /// From the initial triple to one whose obligation cannot be met at all.
    pub counterexample: Vec<RefinementStep>,
    pub reason: Option<String>,
    /// Number of (implementation, specification, constraint) triples examined.
    pub triples: usize,
}

type Triple = (usize, usize, Constraint);

struct Clause {
    what: String,
    via: Option<Label>,
    alts: Vec<Vec<usize>>,
}

struct Checker<'a> {
    imp: &'a Clts,
    spec: &'a Specification,
    uni: &'a Universe,
    spec_states: Vec<Term>,
    spec_index: HashMap<Term, usize>,
    spec_moves: HashMap<usize, Vec<SpecMove>>,
    sat: RefCell<HashMap<(Constraint, MultiHop), (bool, bool)>>,
    tau_cache: HashMap<usize, Vec<(usize, Constraint)>>,
    triples: Vec<Triple>,
    index: HashMap<Triple, usize>,
    queue: VecDeque<usize>,
}

impl<'a> Checker<'a> {
    fn spec_id(&mut self, t: &Term) -> usize {
        let c = t.canon();
        if let Some(&i) = self.spec_index.get(&c) {
            return i;
        }
        self.spec_states.push(c.clone());
        self.spec_index.insert(c, self.spec_states.len() - 1);
        self.spec_states.len() - 1
    }

    fn collect(&self, t: &Term, depth: usize, out: &mut Vec<(bool, Constraint, MultiHop, Action, Term)>) -> Result<()> {
        if depth > MAX_UNFOLD {
            return Err(CoreError::UnguardedRecursion(t.to_string()));
        }
        match t {
            Term::Nil => {}
            Term::MPrefix(m, a, b) => out.push((true, Constraint::empty(), m.clone(), a.clone(), (**b).clone())),
            Term::CPrefix(c, a, b) => out.push((false, c.clone(), MultiHop::default(), a.clone(), (**b).clone())),
            Term::Prefix(a, b) if a.is_iota() => {
                out.push((false, Constraint::empty(), MultiHop::default(), a.clone(), (**b).clone()))
            }
            Term::Choice(a, b) => {
                self.collect(a, depth, out)?;
                self.collect(b, depth, out)?;
            }
            Term::Rec(..) => self.collect(&t.unfold_rec().expect("rec"), depth + 1, out)?,
            Term::Name(n) => match self.spec.defs.get(n) {
                Some(d) if d.kind != DefKind::Proc => self.collect(&d.term, depth + 1, out)?,
                _ => return Err(CoreError::UnboundName(n.clone())),
            },
            other => return Err(CoreError::Invalid(format!("`{other}` is outside the specification fragment"))),
        }
        Ok(())
    }

    fn moves_of(&mut self, s: usize) -> Result<Vec<SpecMove>> {
        if let Some(m) = self.spec_moves.get(&s) {
            return Ok(m.clone());
        }
        let mut raw = Vec::new();
        self.collect(&self.spec_states[s].clone(), 0, &mut raw)?;
        let mut out = Vec::new();
        for (multi, c, m, a, b) in raw {
            let id = self.spec_id(&b);
            out.push(if multi { SpecMove::Multi(m, a, id) } else { SpecMove::Cons(c, a, id) });
        }
        out.sort_by_key(|m| format!("{m:?}"));
        out.dedup();
        self.spec_moves.insert(s, out.clone());
        Ok(out)
    }

    /// `(c ⊨ m, every topology of c satisfies m)`.
    fn sat(&self, c: &Constraint, m: &MultiHop) -> Result<(bool, bool)> {
        let key = (c.clone(), m.clone());
        if let Some(&r) = self.sat.borrow().get(&key) {
            return Ok(r);
        }
        let gs = grounded_denotation(c, self.uni)?;
        let mut any = false;
        let mut all = true;
        for g in gs.iter() {
            let ok = topology_satisfies(&g, m, self.uni);
            any |= ok;
            all &= ok;
        }
        let r = (any, all && any);
        self.sat.borrow_mut().insert(key, r);
        Ok(r)
    }

    fn tau_paths(&mut self, t: usize) -> Vec<(usize, Constraint)> {
        if let Some(v) = self.tau_cache.get(&t) {
            return v.clone();
        }
        let v: Vec<_> = self.imp.tau_reach_accum(t).into_iter().collect();
        self.tau_cache.insert(t, v.clone());
        v
    }

    fn id(&mut self, tr: Triple) -> usize {
        if let Some(&i) = self.index.get(&tr) {
            return i;
        }
        self.triples.push(tr.clone());
        self.index.insert(tr, self.triples.len() - 1);
        self.queue.push_back(self.triples.len() - 1);
        self.triples.len() - 1
    }

    fn obligations(&mut self, k: usize) -> Result<Vec<Clause>> {
        let (t, s, c) = self.triples[k].clone();
        let moves = self.moves_of(s)?;
        let multis: Vec<(MultiHop, Action, usize)> = moves
            .iter()
            .filter_map(|m| match m {
                SpecMove::Multi(h, a, s2) => Some((h.clone(), a.clone(), *s2)),
                _ => None,
            })
            .collect();
        let cons: Vec<(Constraint, Action, usize)> = moves
            .iter()
            .filter_map(|m| match m {
                SpecMove::Cons(d, a, s2) => Some((d.clone(), a.clone(), *s2)),
                _ => None,
            })
            .collect();
        let imp = self.imp;
        let mut clauses = Vec::new();

        for tr in imp.outgoing(t) {
            let Some(c2) = c.union_wf(&tr.label.constraint) else { continue };
            let eta = &tr.label.action;
            let mut alts = Vec::new();
            if eta.is_tau() {
                let mut ok = multis.is_empty();
                for (m, _, _) in &multis {
                    ok = ok || self.sat(&c2, m)?.0;
                }
                if ok {
                    alts.push(vec![self.id((tr.dst, s, c2.clone()))]);
                }
            }
            for (d, a, s2) in &cons {
                if a == eta && tr.label.constraint.preceq(d, self.uni) {
                    alts.push(vec![self.id((tr.dst, *s2, c2.clone()))]);
                }
            }
            if eta.is_iota() {
                for (m, a, s2) in &multis {
                    if a == eta && (!eta.is_tau() || self.sat(&c2, m)?.0) {
                        alts.push(vec![self.id((tr.dst, *s2, c2.clone()))]);
                    }
                }
            }
            clauses.push(Clause {
                what: format!("implementation step {} has no match", tr.label),
                via: Some(tr.label.clone()),
                alts,
            });
        }

        for (m, iota, s2) in &multis {
            if !self.sat(&c, m)?.1 {
                continue;
            }
            let mut alts = Vec::new();
            for (t2, c1) in self.tau_paths(t) {
                let Some(acc1) = c.union_wf(&c1) else { continue };
                for tr in imp.outgoing(t2) {
                    if tr.label.action != *iota {
                        continue;
                    }
                    let Some(acc2) = acc1.union_wf(&tr.label.constraint) else { continue };
                    let a = self.id((t2, s, acc1.clone()));
                    let b = self.id((tr.dst, *s2, acc2));
                    alts.push(vec![a, b]);
                }
            }
            clauses.push(Clause {
                what: format!("specification step ({m}, {iota}) cannot be matched although {c} entails {m}"),
                via: None,
                alts,
            });
        }

        for (d, eta, s2) in &cons {
            let mut alts = Vec::new();
            for tr in imp.outgoing(t) {
                if tr.label.action == *eta && tr.label.constraint.preceq(d, self.uni) {
                    if let Some(c2) = c.union_wf(&tr.label.constraint) {
                        alts.push(vec![self.id((tr.dst, *s2, c2))]);
                    }
                }
            }
            clauses.push(Clause { what: format!("specification step ({d}, {eta}) cannot be matched"), via: None, alts });
        }
        Ok(clauses)
    }
}

/// Whether `imp` refines `spec_term`, starting from the accumulated constraint `{}`.
pub fn refines(imp: &Clts, spec_term: &Term, spec: &Specification) -> Result<RefinementVerdict> {
    refines_under(imp, spec_term, &Constraint::empty(), spec)
}

/// Refinement with an initial accumulated constraint, written `C ▷ t ⊑ s` in proofs.
pub fn refines_under(imp: &Clts, spec_term: &Term, acc: &Constraint, spec: &Specification) -> Result<RefinementVerdict> {
    imp.universe.same_as(&spec.universe)?;
    let mut ck = Checker {
        imp,
        spec,
        uni: &spec.universe,
        spec_states: vec![],
        spec_index: HashMap::new(),
        spec_moves: HashMap::new(),
        sat: RefCell::default(),
        tau_cache: HashMap::new(),
        triples: vec![],
        index: HashMap::new(),
        queue: VecDeque::new(),
    };
    let s0 = ck.spec_id(spec_term);
    let root = ck.id((imp.initial, s0, acc.clone()));
    let mut clauses: Vec<Vec<Clause>> = Vec::new();
    while let Some(k) = ck.queue.pop_front() {
        let cl = ck.obligations(k)?;
        if clauses.len() <= k {
            clauses.resize_with(k + 1, Vec::new);
        }
        clauses[k] = cl;
    }
    let n = ck.triples.len();
    clauses.resize_with(n, Vec::new);

    // Greatest fixpoint; `dead[k]` records the round in which a triple was dropped.
    let mut dead: Vec<Option<usize>> = vec![None; n];
    let mut round = 0;
    loop {
        round += 1;
        let alive_before = |x: usize, dead: &[Option<usize>]| dead[x].is_none();
        let killed: Vec<usize> = (0..n)
            .filter(|&k| dead[k].is_none())
            .filter(|&k| clauses[k].iter().any(|cl| !cl.alts.iter().any(|a| a.iter().all(|&x| alive_before(x, &dead)))))
            .collect();
        if killed.is_empty() {
            break;
        }
        for k in killed {
            dead[k] = Some(round);
        }
    }

    let step = |k: usize, via: Option<Label>| {
        let (t, s, c) = &ck.triples[k];
        RefinementStep {
            impl_state: *t,
            impl_term: imp.states[*t].to_string(),
            spec_term: ck.spec_states[*s].to_string(),
            accumulated: c.clone(),
            via,
        }
    };
    if dead[root].is_none() {
        return Ok(RefinementVerdict { refines: true, counterexample: vec![], reason: None, triples: n });
    }
    let mut path = vec![step(root, None)];
    let mut cur = root;
    let mut seen = BTreeSet::new();
    let reason = loop {
        seen.insert(cur);
        let r = dead[cur].expect("dead triple");
        let alive_at = |x: usize| dead[x].is_none_or(|d| d >= r);
        let failing = clauses[cur]
            .iter()
            .find(|cl| !cl.alts.iter().any(|a| a.iter().all(|&x| alive_at(x))))
            .expect("a clause failed in the round the triple was dropped");
        if failing.alts.is_empty() {
            break failing.what.clone();
        }
        let next = failing
            .alts
            .iter()
            .flat_map(|a| a.iter().copied())
            .filter(|&x| !alive_at(x) && !seen.contains(&x))
            .min_by_key(|&x| dead[x]);
        let Some(next) = next else { break failing.what.clone() };
        path.push(step(next, failing.via.clone().filter(|_| failing.alts.iter().all(|a| a.len() == 1))));
        cur = next;
    };
    Ok(RefinementVerdict { refines: false, counterexample: path, reason: Some(reason), triples: n })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Subgoal {
    /// `accumulated ▷ implementation ⊑ specification`.
    Refines { accumulated: Constraint, implementation: Term, specification: Term },
    Satisfies { constraint: Constraint, multihop: MultiHop, holds: bool },
}

fn constrained_prefix(t: &Term) -> Option<(Constraint, &Action, &Term)> {
    match t {
        Term::CPrefix(c, a, b) => Some((c.clone(), a, b)),
        Term::Prefix(a, b) if a.is_iota() => Some((Constraint::empty(), a, b)),
        _ => None,
    }
}

/// `(C,τ).t ⊑ (M,ι).s` splits into `C ▷ t ⊑ (M,ι).s` and `C ⊨ M`.
pub fn tactic_tau(lhs: &Term, rhs: &Term, uni: &Universe) -> Result<Option<Vec<Subgoal>>> {
    let (Some((c, Action::Tau, t)), Term::MPrefix(m, Action::Internal(_), _)) = (constrained_prefix(lhs), rhs) else {
        return Ok(None);
    };
    let holds = crate::constraint::constraint_satisfies(&c, m, uni)?;
    Ok(Some(vec![
        Subgoal::Refines { accumulated: c.clone(), implementation: t.clone(), specification: rhs.clone() },
        Subgoal::Satisfies { constraint: c, multihop: m.clone(), holds },
    ]))
}

/// `(C,ι).t ⊑ (M,ι).s` reduces to `C ▷ t ⊑ s`.
pub fn tactic_iota(lhs: &Term, rhs: &Term) -> Option<Vec<Subgoal>> {
    let (Some((c, a @ Action::Internal(_), t)), Term::MPrefix(_, b, s)) = (constrained_prefix(lhs), rhs) else {
        return None;
    };
    (a == b).then(|| vec![Subgoal::Refines { accumulated: c, implementation: t.clone(), specification: (**s).clone() }])
}
