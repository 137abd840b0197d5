//! The equational theory: single axiom applications, node linearization,
//! one-step expansion of parallel compositions and normal forms.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::Serialize;

use crate::constraint::{Addr, Constraint, Link, Polarity};
use crate::error::{CoreError, Result};
use crate::sos::{Clts, Engine, DEFAULT_MAX_STATES};
use crate::term::{is_guarded, sum, Action, DefKind, MsgSet, Specification, Term};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Axiom {
    Ch1,
    Ch2,
    Ch3,
    Ch4,
    Ch5,
    Ch6,
    Dep0,
    Dep1,
    Dep2,
    Dep3,
    Dep4,
    Dep5,
    Dep6,
    Dep7,
    TRes1,
    TRes2,
    TRes3,
    TRes4,
    TRes5,
    Br,
    LM1p,
    LM2,
    LM2p,
    LM3,
    S1,
    S2,
    S3,
    S4,
    Sync1,
    Sync2,
    Sync3,
    Res1,
    Res2,
    Res3,
    Ecp1,
    Ecp2,
    Ecp3,
    Ecp4,
    Abs1,
    Abs2,
    Abs3,
    Abs4,
    T1,
    T2,
    Unfold,
    /// Recursive specification principle with a user-supplied equation `X = body`.
    Fold { binder: String, body: Term },
    Ung,
    WUng1,
    WUng2,
    Hid,
}

impl Axiom {
    /// Every axiom that needs no extra data, in table order.
    pub fn all() -> Vec<Axiom> {
        use Axiom::*;
        vec![
            Ch1, Ch2, Ch3, Ch4, Ch5, Ch6, Dep0, Dep1, Dep2, Dep3, Dep4, Dep5, Dep6, Dep7, TRes1, TRes2, TRes3, TRes4,
            TRes5, Br, LM1p, LM2, LM2p, LM3, S1, S2, S3, S4, Sync1, Sync2, Sync3, Res1, Res2, Res3, Ecp1, Ecp2, Ecp3,
            Ecp4, Abs1, Abs2, Abs3, Abs4, T1, T2, Unfold, Ung, WUng1, WUng2, Hid,
        ]
    }

    pub fn name(&self) -> String {
        match self {
            Axiom::LM1p => "LM1'".into(),
            Axiom::LM2p => "LM2'".into(),
            Axiom::Fold { .. } => "Fold".into(),
            other => format!("{other:?}"),
        }
    }

    /// Looks an axiom up by its printed name (Fold excluded).
    pub fn from_name(s: &str) -> Option<Axiom> {
        Axiom::all().into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RewriteStep {
    pub axiom: Axiom,
    /// Child indices from the root.
    pub position: Vec<usize>,
    pub before: Term,
    pub after: Term,
    /// The axiom was used right to left.
    pub reversed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RewriteTrace {
    pub steps: Vec<RewriteStep>,
}

impl RewriteTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Re-applies every step from `start`, checking each redex, and returns the final term.
    pub fn replay(&self, start: &Term, spec: &Specification) -> Result<Term> {
        let mut t = start.clone();
        for (i, s) in self.steps.iter().enumerate() {
            if subterm_at(&t, &s.position) != Some(&s.before) {
                return Err(CoreError::Invalid(format!("step {} does not match its redex", i + 1)));
            }
            if s.reversed {
                let fwd = rewrite_here(&s.after, &s.axiom, &s.after, spec)?;
                if !fwd.is_some_and(|f| alpha_eq(&f, &s.before)) {
                    return Err(CoreError::Invalid(format!("reversed step {} ({}) does not hold", i + 1, s.axiom)));
                }
                t = replace_at(&t, &s.position, s.after.clone());
                continue;
            }
            t = apply_axiom(&t, &s.axiom, &s.position, spec)?
                .ok_or_else(|| CoreError::Invalid(format!("step {} ({}) no longer applies", i + 1, s.axiom)))?;
        }
        Ok(t)
    }

    /// Numbered derivation, one line per step.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{:>4}. ={}{}= at {}: {}  ~>  {}\n",
                i + 1,
                s.axiom,
                if s.reversed { "<-" } else { "" },
                fmt_pos(&s.position),
                s.before,
                s.after
            ));
        }
        out
    }
}

fn fmt_pos(p: &[usize]) -> String {
    if p.is_empty() {
        "/".into()
    } else {
        p.iter().map(|i| format!("/{i}")).collect()
    }
}

/// Equality up to renaming the outermost recursion binder.
fn alpha_eq(a: &Term, b: &Term) -> bool {
    match (a, b) {
        (Term::Rec(x, s), Term::Rec(y, t)) => s.subst_name(x, &Term::Name(y.clone())) == **t,
        _ => a == b,
    }
}

pub fn subterm_at<'t>(t: &'t Term, pos: &[usize]) -> Option<&'t Term> {
    let mut cur = t;
    for &i in pos {
        cur = *cur.children().get(i)?;
    }
    Some(cur)
}

fn replace_at(t: &Term, pos: &[usize], new: Term) -> Term {
    let Some((&first, rest)) = pos.split_first() else { return new };
    let mut idx = 0;
    let mut new = Some(new);
    t.map_children(|c| {
        let r = if idx == first { replace_at(c, rest, new.take().expect("single use")) } else { c.clone() };
        idx += 1;
        r
    })
}

/// Messages a process body can currently receive, following definitions once.
pub fn message_set(t: &Term, seen: &BTreeSet<String>, spec: &Specification) -> MsgSet {
    match t {
        Term::Prefix(Action::Rcv(m), _) => MsgSet::from([m.clone()]),
        Term::Choice(a, b) | Term::Sense(_, a, b) => {
            let mut s = message_set(a, seen, spec);
            s.extend(message_set(b, seen, spec));
            s
        }
        Term::Name(n) if !seen.contains(n) => match spec.defs.get(n) {
            Some(d) if d.kind == DefKind::Proc => {
                let mut seen = seen.clone();
                seen.insert(n.clone());
                message_set(&d.term, &seen, spec)
            }
            _ => MsgSet::new(),
        },
        _ => MsgSet::new(),
    }
}

fn bx(t: Term) -> Box<Term> {
    Box::new(t)
}

fn cp(c: Constraint, a: Action, t: Term) -> Term {
    Term::CPrefix(c, a, bx(t))
}

fn par(a: Term, b: Term) -> Term {
    Term::Par(bx(a), bx(b))
}

fn ch(a: Term, b: Term) -> Term {
    Term::Choice(bx(a), bx(b))
}

/// A network-level prefix; plain internal or silent prefixes carry `{}`.
fn as_prefix(t: &Term) -> Option<(Constraint, &Action, &Term)> {
    match t {
        Term::CPrefix(c, a, b) => Some((c.clone(), a, b)),
        Term::Prefix(a, b) if a.is_iota() => Some((Constraint::empty(), a, b)),
        _ => None,
    }
}

fn all_names(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Name(n) => {
            out.insert(n.clone());
        }
        Term::Rec(x, _) => {
            out.insert(x.clone());
        }
        _ => {}
    }
    for c in t.children() {
        all_names(c, out);
    }
}

fn fresh(stem: &str, whole: &Term, spec: &Specification) -> String {
    let mut used = BTreeSet::new();
    all_names(whole, &mut used);
    used.extend(spec.defs.keys().cloned());
    (0..).map(|i| if i == 0 { stem.to_string() } else { format!("{stem}{i}") }).find(|n| !used.contains(n)).unwrap()
}

/// `id` occurs only under prefixes, choices and other recursions.
fn serial(id: &str, t: &Term) -> bool {
    match t {
        Term::Name(_) | Term::Nil => true,
        Term::Rec(x, _) if x == id => true,
        Term::Prefix(_, b) | Term::CPrefix(_, _, b) | Term::MPrefix(_, _, b) | Term::Rec(_, b) => serial(id, b),
        Term::Choice(a, b) => serial(id, a) && serial(id, b),
        other => !other.free_names().contains(id),
    }
}

/// The single differing link of a `T1` pair: `c1 = c ∪ {l->l'}`, `c2 = c ∪ {l-/->l'}`.
fn t1_split(c1: &Constraint, c2: &Constraint) -> Option<Constraint> {
    let only1: Vec<&Link> = c1.links().filter(|l| !c2.contains(l)).collect();
    let only2: Vec<&Link> = c2.links().filter(|l| !c1.contains(l)).collect();
    let (&[a], &[b]) = (only1.as_slice(), only2.as_slice()) else { return None };
    let known = !a.from.is_unknown() && !a.to.is_unknown();
    if !known || a.pol != Polarity::Conn || *b != a.negated() {
        return None;
    }
    let base: Constraint = c1.links().filter(|l| *l != a).cloned().collect();
    base.is_well_formed().then_some(base)
}

/// The axiom instantiated at the root of `s`, left to right. `whole` is the enclosing term.
fn rewrite_here(s: &Term, ax: &Axiom, whole: &Term, spec: &Specification) -> Result<Option<Term>> {
    use Term::*;
    let uni = &spec.universe;
    let msgs = |t: &Term| message_set(t, &BTreeSet::new(), spec);
    let r = match (ax, s) {
        (Axiom::Ch1, Choice(a, b)) if **a == Nil => Some((**b).clone()),
        (Axiom::Ch2, Choice(a, b)) => Some(ch((**b).clone(), (**a).clone())),
        (Axiom::Ch3, Choice(a, bc)) => match &**bc {
            Choice(b, c) => Some(ch(ch((**a).clone(), (**b).clone()), (**c).clone())),
            _ => None,
        },
        (Axiom::Ch4, Choice(a, b)) if a == b => Some((**a).clone()),
        (Axiom::Ch5, Choice(..)) => {
            let sums = s.summands();
            let pos = sums.iter().enumerate().position(|(i, x)| {
                let Some((c, Action::NSnd(m, Addr::Unknown), t)) = as_prefix(x) else { return false };
                sums.iter().enumerate().any(|(j, y)| {
                    let Some((d, Action::NSnd(m2, l @ Addr::Known(_)), t2)) = as_prefix(y) else { return false };
                    j != i && m2 == m && t2 == t && c.ground_at(l).as_ref() == Some(&d)
                })
            });
            pos.map(|i| sum(sums.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| (*x).clone())))
        }
        (Axiom::Ch6, Choice(a, b)) => match (as_prefix(a), as_prefix(b)) {
            (Some((c1, e1, t1)), Some((c2, e2, t2))) if e1 == e2 && t1 == t2 && c2.preceq(&c1, uni) => {
                Some(cp(c1, e1.clone(), t1.clone()))
            }
            _ => None,
        },
        (Axiom::Dep0, Deploy(t, l)) => {
            let q = fresh("_Q", whole, spec);
            let handled = msgs(t);
            let mut parts: Vec<Term> = uni
                .msgs
                .iter()
                .filter(|m| !handled.contains(*m))
                .map(|m| cp(Constraint::empty(), Action::NRcv(m.clone()), Name(q.clone())))
                .collect();
            parts.push(LocalDeploy(l.clone(), bx(Name(q.clone())), t.clone()));
            Some(Rec(q, bx(sum(parts))))
        }
        (Axiom::Dep1, LocalDeploy(l, _, body)) => match &**body {
            Prefix(Action::Snd(m), t) => {
                Some(cp(Constraint::empty(), Action::NSnd(m.clone(), l.clone()), Deploy(t.clone(), l.clone())))
            }
            _ => None,
        },
        (Axiom::Dep2, LocalDeploy(l, fb, body)) => match &**body {
            Prefix(Action::Rcv(m), t) => Some(ch(
                cp(Constraint::single(Link::disconn(Addr::Unknown, l.clone())), Action::NRcv(m.clone()), (**fb).clone()),
                cp(Constraint::single(Link::conn(Addr::Unknown, l.clone())), Action::NRcv(m.clone()), Deploy(t.clone(), l.clone())),
            )),
            _ => None,
        },
        (Axiom::Dep3, LocalDeploy(l, fb, body)) => match &**body {
            Choice(a, b) => Some(ch(LocalDeploy(l.clone(), fb.clone(), a.clone()), LocalDeploy(l.clone(), fb.clone(), b.clone()))),
            _ => None,
        },
        (Axiom::Dep4, LocalDeploy(_, _, body)) if **body == Nil => Some(Nil),
        (Axiom::Dep5, LocalDeploy(l, fb, body)) => match &**body {
            Name(n) => match spec.defs.get(n) {
                Some(d) if d.kind == DefKind::Proc => Some(LocalDeploy(l.clone(), fb.clone(), bx(d.term.clone()))),
                _ => return Err(CoreError::UnboundName(n.clone())),
            },
            _ => None,
        },
        (Axiom::Dep6, LocalDeploy(l, _, body)) => match &**body {
            Prefix(a @ Action::Internal(_), t) => Some(cp(Constraint::empty(), a.clone(), Deploy(t.clone(), l.clone()))),
            _ => None,
        },
        (Axiom::Dep7, LocalDeploy(l, t3, body)) => match &**body {
            Sense(l2, t1, t2) => {
                let (r1, r2) = (msgs(t1), msgs(t2));
                let conn = Constraint::single(Link::conn(l.clone(), l2.clone()));
                let disc = Constraint::single(Link::disconn(l.clone(), l2.clone()));
                let mut parts = Vec::new();
                for m in r2.difference(&r1) {
                    parts.push(cp(conn.clone(), Action::NRcv(m.clone()), (**t3).clone()));
                }
                for m in r1.difference(&r2) {
                    parts.push(cp(disc.clone(), Action::NRcv(m.clone()), (**t3).clone()));
                }
                parts.push(Restrict(conn, bx(LocalDeploy(l.clone(), t3.clone(), t1.clone()))));
                parts.push(Restrict(disc, bx(LocalDeploy(l.clone(), t3.clone(), t2.clone()))));
                Some(sum(parts))
            }
            _ => None,
        },
        (Axiom::TRes1, Restrict(c1, t)) => match as_prefix(t) {
            Some((c2, a, b)) => c1.union_wf(&c2).map(|u| cp(u, a.clone(), b.clone())),
            None => None,
        },
        (Axiom::TRes2, Restrict(c, t)) => match &**t {
            Choice(a, b) => Some(ch(Restrict(c.clone(), a.clone()), Restrict(c.clone(), b.clone()))),
            _ => None,
        },
        (Axiom::TRes3, Restrict(c, t)) => match &**t {
            Rec(x, b) => Some(Rec(x.clone(), bx(Restrict(c.clone(), b.clone())))),
            _ => None,
        },
        (Axiom::TRes4, Restrict(_, t)) => matches!(&**t, Name(_)).then(|| (**t).clone()),
        (Axiom::TRes5, Restrict(_, t)) if **t == Nil => Some(Nil),
        (Axiom::Br, Par(a, b)) => Some(ch(
            ch(LeftMerge(a.clone(), b.clone()), LeftMerge(b.clone(), a.clone())),
            CommMerge(a.clone(), b.clone()),
        )),
        (Axiom::LM1p, LeftMerge(a, _)) => as_prefix(a).and_then(|(_, e, _)| (!e.is_iota()).then_some(Nil)),
        (Axiom::LM2, LeftMerge(ab, c)) => match &**ab {
            Choice(a, b) => Some(ch(LeftMerge(a.clone(), c.clone()), LeftMerge(b.clone(), c.clone()))),
            _ => None,
        },
        (Axiom::LM2p, LeftMerge(a, t2)) => match as_prefix(a) {
            Some((c, e, t1)) if e.is_iota() => Some(cp(c, e.clone(), par(t1.clone(), (**t2).clone()))),
            _ => None,
        },
        (Axiom::LM3, LeftMerge(a, _)) if **a == Nil => Some(Nil),
        (Axiom::S1, CommMerge(a, b)) => Some(CommMerge(b.clone(), a.clone())),
        (Axiom::S2, CommMerge(ab, c)) => match &**ab {
            Choice(a, b) => Some(ch(CommMerge(a.clone(), c.clone()), CommMerge(b.clone(), c.clone()))),
            _ => None,
        },
        (Axiom::S3, CommMerge(a, _)) if **a == Nil => Some(Nil),
        (Axiom::S4, CommMerge(a, _)) => as_prefix(a).and_then(|(_, e, _)| e.is_iota().then_some(Nil)),
        (Axiom::Sync1, CommMerge(a, b)) => match (as_prefix(a), as_prefix(b)) {
            (Some((c1, Action::NSnd(m1, l), t1)), Some((c2, Action::NRcv(m2), t2))) => {
                if m1 != m2 {
                    Some(Nil)
                } else {
                    let u = c2.ground_at(l).and_then(|g| c1.union_wf(&g));
                    Some(match u {
                        Some(u) => cp(u, Action::NSnd(m1.clone(), l.clone()), par(t1.clone(), t2.clone())),
                        None => Nil,
                    })
                }
            }
            _ => None,
        },
        (Axiom::Sync2, CommMerge(a, b)) => match (as_prefix(a), as_prefix(b)) {
            (Some((c1, Action::NRcv(m1), t1)), Some((c2, Action::NRcv(m2), t2))) => Some(match c1.union_wf(&c2) {
                Some(u) if m1 == m2 => cp(u, Action::NRcv(m1.clone()), par(t1.clone(), t2.clone())),
                _ => Nil,
            }),
            _ => None,
        },
        (Axiom::Sync3, CommMerge(a, b)) => match (as_prefix(a), as_prefix(b)) {
            (Some((_, Action::NSnd(..), _)), Some((_, Action::NSnd(..), _))) => Some(Nil),
            _ => None,
        },
        (Axiom::Res1, Hide(l, t)) => match &**t {
            Choice(a, b) => Some(ch(Hide(l.clone(), a.clone()), Hide(l.clone(), b.clone()))),
            _ => None,
        },
        (Axiom::Res2, Hide(l, t)) => {
            as_prefix(t).map(|(c, a, b)| cp(c.hide(l), a.subst(&Addr::Unknown, l), Hide(l.clone(), bx(b.clone()))))
        }
        (Axiom::Res3, Hide(_, t)) if **t == Nil => Some(Nil),
        (Axiom::Ecp1, Encap(ms, t)) => match as_prefix(t) {
            Some((c, a, b)) if !matches!(a, Action::NRcv(_)) => Some(cp(c, a.clone(), Encap(ms.clone(), bx(b.clone())))),
            _ => None,
        },
        (Axiom::Ecp2, Encap(ms, t)) => match as_prefix(t) {
            Some((c, a @ Action::NRcv(m), b)) => Some(if ms.contains(m) {
                Nil
            } else {
                cp(c, a.clone(), Encap(ms.clone(), bx(b.clone())))
            }),
            _ => None,
        },
        (Axiom::Ecp3, Encap(ms, t)) => match &**t {
            Choice(a, b) => Some(ch(Encap(ms.clone(), a.clone()), Encap(ms.clone(), b.clone()))),
            _ => None,
        },
        (Axiom::Ecp4, Encap(_, t)) if **t == Nil => Some(Nil),
        (Axiom::Abs1, Abstract(ms, t)) => match as_prefix(t) {
            Some((c, a @ Action::NRcv(m), b)) => {
                let a = if ms.contains(m) { Action::Tau } else { a.clone() };
                Some(cp(c, a, Abstract(ms.clone(), bx(b.clone()))))
            }
            _ => None,
        },
        (Axiom::Abs2, Abstract(ms, t)) => match as_prefix(t) {
            Some((c, a, b)) if !matches!(a, Action::NRcv(_)) => {
                let a = match a.message() {
                    Some(m) if ms.contains(m) => Action::Tau,
                    _ => a.clone(),
                };
                Some(cp(c, a, Abstract(ms.clone(), bx(b.clone()))))
            }
            _ => None,
        },
        (Axiom::Abs3, Abstract(ms, t)) => match &**t {
            Choice(a, b) => Some(ch(Abstract(ms.clone(), a.clone()), Abstract(ms.clone(), b.clone()))),
            _ => None,
        },
        (Axiom::Abs4, Abstract(_, t)) if **t == Nil => Some(Nil),
        (Axiom::T1, _) => {
            let Some((c0, e0, body)) = as_prefix(s) else { return Ok(None) };
            let sums = body.summands();
            let mut hit = None;
            'outer: for i in 0..sums.len() {
                for j in 0..sums.len() {
                    let (Some((c1, a1, t1)), Some((c2, a2, t2))) = (as_prefix(sums[i]), as_prefix(sums[j])) else {
                        continue;
                    };
                    if i != j && a1 == a2 && t1 == t2 {
                        if let Some(base) = t1_split(&c1, &c2) {
                            hit = Some((i, j, cp(base, a1.clone(), t1.clone())));
                            break 'outer;
                        }
                    }
                }
            }
            hit.map(|(i, j, merged)| {
                let rest = sums
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(k, x)| if k == i { merged.clone() } else { (*x).clone() });
                cp(c0, e0.clone(), sum(rest))
            })
        }
        (Axiom::T2, _) => {
            let Some((c, e, body)) = as_prefix(s) else { return Ok(None) };
            match body {
                Choice(x, t2) => match as_prefix(x) {
                    Some((_, Action::Tau, inner)) => match inner {
                        Choice(t1, t2b) if t2b == t2 => Some(cp(c, e.clone(), ch((**t1).clone(), (**t2).clone()))),
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            }
        }
        (Axiom::Unfold, Rec(..)) => s.unfold_rec(),
        (Axiom::Fold { binder, body }, _) => {
            let solved = body.subst_name(binder, s);
            (is_guarded(binder, body) && (solved == *s || s.unfold_rec().as_ref() == Some(&solved))).then(|| Rec(binder.clone(), bx(body.clone())))
        }
        (Axiom::Ung, Rec(x, b)) => match &**b {
            Choice(n, t) if **n == Name(x.clone()) => Some(Rec(x.clone(), t.clone())),
            _ => None,
        },
        (Axiom::WUng1, Rec(x, b)) => {
            let Choice(first, s_rest) = &**b else { return Ok(None) };
            let Some((c, Action::Tau, inner)) = as_prefix(first) else { return Ok(None) };
            let Choice(tp, t) = inner else { return Ok(None) };
            match as_prefix(tp) {
                Some((_, Action::Tau, t_prime)) if !is_guarded(x, t_prime) => Some(Rec(
                    x.clone(),
                    bx(ch(cp(c, Action::Tau, ch(t_prime.clone(), (**t).clone())), (**s_rest).clone())),
                )),
                _ => None,
            }
        }
        (Axiom::WUng2, Rec(x, b)) => {
            let Choice(first, s_rest) = &**b else { return Ok(None) };
            let Some((c, Action::Tau, inner)) = as_prefix(first) else { return Ok(None) };
            match inner {
                Choice(n, t) if **n == Name(x.clone()) => Some(Rec(
                    x.clone(),
                    bx(ch(cp(c, Action::Tau, ch((**t).clone(), (**s_rest).clone())), (**s_rest).clone())),
                )),
                _ => None,
            }
        }
        (Axiom::Hid, Abstract(ms, t)) => match &**t {
            Rec(x, b) if serial(x, b) => Some(Rec(x.clone(), bx(Abstract(ms.clone(), b.clone())))),
            _ => None,
        },
        _ => None,
    };
    Ok(r)
}

/// Applies `axiom` left to right at `pos`; `Ok(None)` when the pattern or side condition fails.
pub fn apply_axiom(t: &Term, axiom: &Axiom, pos: &[usize], spec: &Specification) -> Result<Option<Term>> {
    let s = subterm_at(t, pos).ok_or_else(|| CoreError::Invalid(format!("no subterm at {}", fmt_pos(pos))))?;
    Ok(rewrite_here(s, axiom, t, spec)?.map(|r| replace_at(t, pos, r)))
}

const STEP_BUDGET: usize = 50_000;

struct Rewriter<'a> {
    spec: &'a Specification,
    trace: RewriteTrace,
}

impl Rewriter<'_> {
    fn apply(&mut self, t: &mut Term, ax: Axiom, pos: &[usize]) -> Result<bool> {
        let before = subterm_at(t, pos).cloned();
        let Some(next) = apply_axiom(t, &ax, pos, self.spec)? else { return Ok(false) };
        if self.trace.steps.len() >= STEP_BUDGET {
            return Err(CoreError::UnguardedRecursion("rewrite step budget exhausted".into()));
        }
        let after = subterm_at(&next, pos).cloned().expect("position survives");
        self.trace.steps.push(RewriteStep { axiom: ax, position: pos.to_vec(), before: before.unwrap(), after, reversed: false });
        *t = next;
        Ok(true)
    }

    /// Positions under `scope` in post-order, not descending into prefix continuations.
    fn positions(t: &Term, scope: &[usize]) -> Vec<Vec<usize>> {
        fn go(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if !matches!(t, Term::Prefix(..) | Term::CPrefix(..) | Term::MPrefix(..) | Term::Deploy(..)) {
                for (i, c) in t.children().into_iter().enumerate() {
                    path.push(i);
                    go(c, path, out);
                    path.pop();
                }
            }
            out.push(path.clone());
        }
        let mut out = Vec::new();
        if let Some(s) = subterm_at(t, scope) {
            go(s, &mut scope.to_vec(), &mut out);
        }
        out
    }

    /// One innermost-leftmost step among `axioms` (priority order at each position).
    fn step(&mut self, t: &mut Term, axioms: &[Axiom], scope: &[usize]) -> Result<bool> {
        for pos in Self::positions(t, scope) {
            for ax in axioms {
                if self.apply(t, ax.clone(), &pos)? {
                    return Ok(true);
                }
            }
            if self.oriented(t, &pos)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Commutations that only fire when they enable a simplification: `x + 0`
    /// before Ch1 and communication merges whose left side is not yet a sender.
    fn oriented(&mut self, t: &mut Term, pos: &[usize]) -> Result<bool> {
        let s = subterm_at(t, pos).expect("valid position");
        match s {
            Term::Choice(_, b) if **b == Term::Nil => {
                self.apply(t, Axiom::Ch2, pos)?;
                self.apply(t, Axiom::Ch1, pos)
            }
            Term::CommMerge(a, b) => {
                let flip = match (as_prefix(a).map(|p| p.1.clone()), &**b) {
                    (_, Term::Nil | Term::Choice(..)) => as_prefix(a).is_some(),
                    (Some(Action::NRcv(_)), x) => matches!(as_prefix(x), Some((_, Action::NSnd(..), _))),
                    (Some(_), x) => as_prefix(x).is_some_and(|p| p.1.is_iota()),
                    _ => false,
                };
                if flip {
                    self.apply(t, Axiom::S1, pos)
                } else {
                    Ok(false)
                }
            }
            _ => Ok(false),
        }
    }

    fn run(&mut self, t: &mut Term, axioms: &[Axiom], scope: &[usize]) -> Result<()> {
        while self.step(t, axioms, scope)? {}
        Ok(())
    }
}

fn local_axioms() -> Vec<Axiom> {
    use Axiom::*;
    vec![Dep5, Dep3, Dep7, Dep1, Dep2, Dep4, Dep6, TRes2, TRes1, TRes5, TRes4, Ch1]
}

fn deploy_parts(d: &Term) -> Result<(&Term, &Addr)> {
    match d {
        Term::Deploy(t, l) => Ok((t, l)),
        other => Err(CoreError::Invalid(format!("expected a deployment, found {other}"))),
    }
}

/// Dep0 followed by exhaustive local-deployment and restriction axioms.
/// The result is a guarded recursion whose continuations are deployments.
pub fn linearize_node(d: &Term, spec: &Specification) -> Result<(Term, RewriteTrace)> {
    deploy_parts(d)?;
    let mut rw = Rewriter { spec, trace: RewriteTrace::default() };
    let mut t = d.clone();
    rw.apply(&mut t, Axiom::Dep0, &[])?;
    rw.run(&mut t, &local_axioms(), &[])?;
    Ok((t, rw.trace))
}

/// Head normal form of a deployment at `pos`: Dep0, one unfolding, then the
/// recursion is named back as the deployment it came from.
fn head_form(rw: &mut Rewriter, t: &mut Term, pos: &[usize]) -> Result<()> {
    let d = subterm_at(t, pos).cloned().expect("valid position");
    rw.apply(t, Axiom::Dep0, pos)?;
    let rec = subterm_at(t, pos).cloned().expect("valid position");
    rw.apply(t, Axiom::Unfold, pos)?;
    // Occurrences of the recursion are the deployment itself (Dep0 read right to left).
    let mut hits = Vec::new();
    find_term(subterm_at(t, pos).expect("valid position"), &rec, &mut pos.to_vec(), &mut hits);
    for h in hits {
        rw.trace.steps.push(RewriteStep { axiom: Axiom::Dep0, position: h.clone(), before: rec.clone(), after: d.clone(), reversed: true });
        *t = replace_at(t, &h, d.clone());
    }
    rw.run(t, &local_axioms(), pos)?;
    Ok(())
}

fn find_term(t: &Term, needle: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if t == needle {
        out.push(path.clone());
        return;
    }
    for (i, c) in t.children().into_iter().enumerate() {
        path.push(i);
        find_term(c, needle, path, out);
        path.pop();
    }
}

fn par_leaves(t: &Term, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    match t {
        Term::Par(a, b) => {
            path.push(0);
            par_leaves(a, path, out);
            path.pop();
            path.push(1);
            par_leaves(b, path, out);
            path.pop();
        }
        _ => out.push(path.clone()),
    }
}

fn merge_axioms() -> Vec<Axiom> {
    use Axiom::*;
    vec![LM2, LM3, LM1p, LM2p, S2, S3, S4, Sync1, Sync2, Sync3, Ch1]
}

/// Expands the binary composition tree at `pos` bottom-up with Br and the merge axioms.
fn expand_par_at(rw: &mut Rewriter, t: &mut Term, pos: &[usize]) -> Result<()> {
    match subterm_at(t, pos) {
        Some(Term::Par(..)) => {
            for i in 0..2 {
                let mut p = pos.to_vec();
                p.push(i);
                expand_par_at(rw, t, &p)?;
            }
            rw.apply(t, Axiom::Br, pos)?;
            rw.run(t, &merge_axioms(), pos)
        }
        Some(Term::Deploy(..)) => head_form(rw, t, pos),
        _ => Ok(()),
    }
}

/// One-step expansion of a (possibly encapsulated, abstracted or hidden)
/// parallel composition of deployments into a choice of prefixed summands.
pub fn expand_parallel(t: &Term, spec: &Specification) -> Result<(Term, RewriteTrace)> {
    let mut rw = Rewriter { spec, trace: RewriteTrace::default() };
    let mut cur = t.clone();
    let mut wrappers = Vec::new();
    let mut pos: Vec<usize> = Vec::new();
    loop {
        match subterm_at(&cur, &pos).expect("valid position") {
            Term::Encap(..) | Term::Abstract(..) | Term::Hide(..) => {
                wrappers.push(pos.clone());
                pos.push(0);
            }
            Term::Par(..) => break,
            other => return Err(CoreError::Invalid(format!("expected a parallel composition, found {other}"))),
        }
    }
    let mut leaves = Vec::new();
    par_leaves(subterm_at(&cur, &pos).expect("valid position"), &mut pos.clone(), &mut leaves);
    for l in &leaves {
        if !matches!(subterm_at(&cur, l), Some(Term::Deploy(..))) {
            return Err(CoreError::Invalid("every parallel component must be a deployment".into()));
        }
    }
    expand_par_at(&mut rw, &mut cur, &pos)?;
    use Axiom::*;
    for w in wrappers.iter().rev() {
        let axioms = match subterm_at(&cur, w).expect("valid position") {
            Term::Encap(..) => vec![Ecp3, Ecp4, Ecp1, Ecp2, Ch1],
            Term::Abstract(..) => vec![Abs3, Abs4, Abs1, Abs2, Ch1],
            _ => vec![Res1, Res3, Res2, Ch1],
        };
        rw.run(&mut cur, &axioms, w)?;
    }
    Ok((cur, rw.trace))
}

/// The first violation of the finite-state fragment: a recursion variable
/// (or network name) used under a composition, hiding, encapsulation or abstraction.
fn finite_state_violation(t: &Term, spec: &Specification) -> Option<String> {
    fn under_op(id: &str, t: &Term, inside: bool) -> bool {
        match t {
            Term::Name(n) => n == id && inside,
            Term::Rec(x, _) if x == id => false,
            Term::Par(..) | Term::LeftMerge(..) | Term::CommMerge(..) | Term::Hide(..) | Term::Encap(..) | Term::Abstract(..) => {
                t.children().into_iter().any(|c| under_op(id, c, true))
            }
            Term::Deploy(..) | Term::LocalDeploy(..) => false,
            _ => t.children().into_iter().any(|c| under_op(id, c, inside)),
        }
    }
    fn go(t: &Term, spec: &Specification, seen: &mut BTreeSet<String>) -> Option<String> {
        match t {
            Term::Rec(x, b) if under_op(x, b, false) => return Some(x.clone()),
            Term::Name(n) if !seen.contains(n) => {
                if let Some(d) = spec.defs.get(n).filter(|d| d.kind != DefKind::Proc) {
                    if under_op(n, &d.term, false) {
                        return Some(n.clone());
                    }
                    seen.insert(n.clone());
                    return go(&d.term, spec, seen);
                }
            }
            _ => {}
        }
        t.children().into_iter().find_map(|c| go(c, spec, seen))
    }
    go(t, spec, &mut BTreeSet::new())
}

/// Reads an explored system back as a term over prefixes, choice and recursion.
/// Silent self-loops are dropped everywhere except at the initial state.
/// Open subterms are rebuilt per path, so large strongly connected systems can
/// blow up; the read-back gives up after `READ_BACK_BUDGET` subterms.
pub fn read_back(c: &Clts) -> Result<Term> {
    struct Gen<'a> {
        c: &'a Clts,
        closed: HashMap<usize, Term>,
        visits: usize,
    }
    fn var(i: usize) -> String {
        format!("_X{i}")
    }
    impl Gen<'_> {
        fn term(&mut self, i: usize, stack: &mut Vec<usize>) -> Result<Term> {
            if stack.contains(&i) {
                return Ok(Term::Name(var(i)));
            }
            if let Some(t) = self.closed.get(&i) {
                return Ok(t.clone());
            }
            self.visits += 1;
            if self.visits > READ_BACK_BUDGET {
                return Err(CoreError::NormalFormTooLarge(self.c.len()));
            }
            stack.push(i);
            let moves: Vec<_> = self
                .c
                .outgoing(i)
                .filter(|tr| !(tr.dst == i && tr.label.action.is_tau() && i != self.c.initial))
                .map(|tr| (tr.label.clone(), tr.dst))
                .collect();
            let mut parts = Vec::new();
            for (l, d) in moves {
                parts.push(cp(l.constraint, l.action, self.term(d, stack)?));
            }
            stack.pop();
            let body = sum(parts);
            let free = body.free_names();
            let t = if free.contains(&var(i)) { Term::Rec(var(i), bx(body)) } else { body };
            if !t.free_names().iter().any(|n| n.starts_with("_X")) {
                self.closed.insert(i, t.clone());
            }
            Ok(t)
        }
    }
    Gen { c, closed: HashMap::new(), visits: 0 }.term(c.initial, &mut Vec::new())
}

const READ_BACK_BUDGET: usize = 50_000;

/// Normal form of a finite-state term: explore, then read the system back.
pub fn normalize(t: &Term, spec: &Specification) -> Result<Term> {
    if let Some(id) = finite_state_violation(t, spec) {
        return Err(CoreError::NotFiniteState(format!("`{id}` recurses through a parallel or scoping operator")));
    }
    let engine = Engine::new(spec);
    let c = engine.explore(t, DEFAULT_MAX_STATES)?;
    read_back(&c)
}
