//! Actions, process/network terms and specifications.

use std::collections::BTreeSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::constraint::{Addr, Constraint, MultiHop};
use crate::universe::Universe;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Snd(String),
    Rcv(String),
    NSnd(String, Addr),
    NRcv(String),
    Internal(String),
    Tau,
}

impl Action {
    pub fn subst(&self, new: &Addr, old: &Addr) -> Action {
        match self {
            Action::NSnd(m, a) => Action::NSnd(m.clone(), a.subst(new, old)),
            a => a.clone(),
        }
    }

    pub fn message(&self) -> Option<&str> {
        match self {
            Action::Snd(m) | Action::Rcv(m) | Action::NSnd(m, _) | Action::NRcv(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, Action::Tau)
    }

    /// Internal action or τ.
    pub fn is_iota(&self) -> bool {
        matches!(self, Action::Tau | Action::Internal(_))
    }

    pub fn has_unknown_sender(&self) -> bool {
        matches!(self, Action::NSnd(_, Addr::Unknown))
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Snd(m) => write!(f, "snd({m})"),
            Action::Rcv(m) => write!(f, "rcv({m})"),
            Action::NSnd(m, a) => write!(f, "nsnd({m}, {a})"),
            Action::NRcv(m) => write!(f, "nrcv({m})"),
            Action::Internal(i) => write!(f, "{i}"),
            Action::Tau => write!(f, "tau"),
        }
    }
}

/// A transition label `(C, η)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub constraint: Constraint,
    pub action: Action,
}

impl Label {
    pub fn new(constraint: Constraint, action: Action) -> Self {
        Label { constraint, action }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.constraint, self.action)
    }
}

pub type MsgSet = BTreeSet<String>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Nil,
    Prefix(Action, Box<Term>),
    CPrefix(Constraint, Action, Box<Term>),
    MPrefix(MultiHop, Action, Box<Term>),
    Choice(Box<Term>, Box<Term>),
    Deploy(Box<Term>, Addr),
    LocalDeploy(Addr, Box<Term>, Box<Term>),
    Par(Box<Term>, Box<Term>),
    LeftMerge(Box<Term>, Box<Term>),
    CommMerge(Box<Term>, Box<Term>),
    Sense(Addr, Box<Term>, Box<Term>),
    Hide(Addr, Box<Term>),
    Abstract(MsgSet, Box<Term>),
    Encap(MsgSet, Box<Term>),
    Name(String),
    Rec(String, Box<Term>),
    Restrict(Constraint, Box<Term>),
}

pub fn nil() -> Term {
    Term::Nil
}

pub fn prefix(a: Action, t: Term) -> Term {
    Term::Prefix(a, Box::new(t))
}

pub fn cprefix(c: Constraint, a: Action, t: Term) -> Term {
    Term::CPrefix(c, a, Box::new(t))
}

pub fn mprefix(m: MultiHop, a: Action, t: Term) -> Term {
    Term::MPrefix(m, a, Box::new(t))
}

pub fn choice(a: Term, b: Term) -> Term {
    Term::Choice(Box::new(a), Box::new(b))
}

/// Right-nested choice; the empty sum is `0`.
pub fn sum(ts: impl IntoIterator<Item = Term>) -> Term {
    let mut v: Vec<Term> = ts.into_iter().collect();
    let Some(mut acc) = v.pop() else { return Term::Nil };
    while let Some(t) = v.pop() {
        acc = choice(t, acc);
    }
    acc
}

pub fn par(a: Term, b: Term) -> Term {
    Term::Par(Box::new(a), Box::new(b))
}

pub fn par_all(ts: impl IntoIterator<Item = Term>) -> Term {
    let mut v: Vec<Term> = ts.into_iter().collect();
    let Some(mut acc) = v.pop() else { return Term::Nil };
    while let Some(t) = v.pop() {
        acc = par(t, acc);
    }
    acc
}

pub fn deploy(t: Term, at: &str) -> Term {
    Term::Deploy(Box::new(t), Addr::known(at))
}

pub fn local_deploy(at: Addr, fallback: Term, body: Term) -> Term {
    Term::LocalDeploy(at, Box::new(fallback), Box::new(body))
}

pub fn sense(target: &str, then: Term, otherwise: Term) -> Term {
    Term::Sense(Addr::known(target), Box::new(then), Box::new(otherwise))
}

pub fn hide(at: &str, t: Term) -> Term {
    Term::Hide(Addr::known(at), Box::new(t))
}

pub fn abstract_msgs(ms: MsgSet, t: Term) -> Term {
    Term::Abstract(ms, Box::new(t))
}

pub fn encap(ms: MsgSet, t: Term) -> Term {
    Term::Encap(ms, Box::new(t))
}

pub fn name(id: &str) -> Term {
    Term::Name(id.into())
}

pub fn rec(id: &str, t: Term) -> Term {
    Term::Rec(id.into(), Box::new(t))
}

pub fn restrict(c: Constraint, t: Term) -> Term {
    Term::Restrict(c, Box::new(t))
}

pub fn snd(m: &str) -> Action {
    Action::Snd(m.into())
}

pub fn rcv(m: &str) -> Action {
    Action::Rcv(m.into())
}

pub fn nsnd(m: &str, from: Addr) -> Action {
    Action::NSnd(m.into(), from)
}

pub fn nrcv(m: &str) -> Action {
    Action::NRcv(m.into())
}

pub fn internal(i: &str) -> Action {
    Action::Internal(i.into())
}

impl Term {
    /// Immediate subterms.
    pub fn children(&self) -> Vec<&Term> {
        use Term::*;
        match self {
            Nil | Name(_) => vec![],
            Prefix(_, t) | CPrefix(_, _, t) | MPrefix(_, _, t) | Deploy(t, _) | Hide(_, t) | Abstract(_, t)
            | Encap(_, t) | Rec(_, t) | Restrict(_, t) => vec![t],
            Choice(a, b) | Par(a, b) | LeftMerge(a, b) | CommMerge(a, b) | Sense(_, a, b)
            | LocalDeploy(_, a, b) => vec![a, b],
        }
    }

    /// Rebuilds the node with children mapped by `f`.
    pub fn map_children(&self, mut f: impl FnMut(&Term) -> Term) -> Term {
        use Term::*;
        let b = |t: Term| Box::new(t);
        match self {
            Nil => Nil,
            Name(n) => Name(n.clone()),
            Prefix(a, t) => Prefix(a.clone(), b(f(t))),
            CPrefix(c, a, t) => CPrefix(c.clone(), a.clone(), b(f(t))),
            MPrefix(m, a, t) => MPrefix(m.clone(), a.clone(), b(f(t))),
            Deploy(t, l) => Deploy(b(f(t)), l.clone()),
            Hide(l, t) => Hide(l.clone(), b(f(t))),
            Abstract(m, t) => Abstract(m.clone(), b(f(t))),
            Encap(m, t) => Encap(m.clone(), b(f(t))),
            Rec(x, t) => Rec(x.clone(), b(f(t))),
            Restrict(c, t) => Restrict(c.clone(), b(f(t))),
            Choice(x, y) => {
                let x = f(x);
                Choice(b(x), b(f(y)))
            }
            Par(x, y) => {
                let x = f(x);
                Par(b(x), b(f(y)))
            }
            LeftMerge(x, y) => {
                let x = f(x);
                LeftMerge(b(x), b(f(y)))
            }
            CommMerge(x, y) => {
                let x = f(x);
                CommMerge(b(x), b(f(y)))
            }
            Sense(l, x, y) => {
                let x = f(x);
                Sense(l.clone(), b(x), b(f(y)))
            }
            LocalDeploy(l, x, y) => {
                let x = f(x);
                LocalDeploy(l.clone(), b(x), b(f(y)))
            }
        }
    }

    /// Replaces every occurrence of the address `old` by `new`.
    pub fn subst_addr(&self, new: &Addr, old: &Addr) -> Term {
        use Term::*;
        let inner = self.map_children(|t| t.subst_addr(new, old));
        match inner {
            Prefix(a, t) => Prefix(a.subst(new, old), t),
            CPrefix(c, a, t) => CPrefix(c.subst(new, old), a.subst(new, old), t),
            Deploy(t, l) => Deploy(t, l.subst(new, old)),
            LocalDeploy(l, x, y) => LocalDeploy(l.subst(new, old), x, y),
            Sense(l, x, y) => Sense(l.subst(new, old), x, y),
            Hide(l, t) => Hide(l.subst(new, old), t),
            Restrict(c, t) => Restrict(c.subst(new, old), t),
            other => other,
        }
    }

    /// Replaces free occurrences of `Name(id)` by `by`.
    pub fn subst_name(&self, id: &str, by: &Term) -> Term {
        match self {
            Term::Name(n) if n == id => by.clone(),
            Term::Rec(x, _) if x == id => self.clone(),
            _ => self.map_children(|t| t.subst_name(id, by)),
        }
    }

    /// One unfolding of `rec X·t`.
    pub fn unfold_rec(&self) -> Option<Term> {
        match self {
            Term::Rec(x, body) => Some(body.subst_name(x, self)),
            _ => None,
        }
    }

    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        fn go(t: &Term, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match t {
                Term::Name(n) if !bound.contains(n) => {
                    out.insert(n.clone());
                }
                Term::Rec(x, b) => {
                    bound.push(x.clone());
                    go(b, bound, out);
                    bound.pop();
                }
                _ => t.children().into_iter().for_each(|c| go(c, bound, out)),
            }
        }
        go(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    /// Summands of a (nested) choice, with `0` summands removed.
    pub fn summands(&self) -> Vec<&Term> {
        match self {
            Term::Choice(a, b) => {
                let mut v = a.summands();
                v.extend(b.summands());
                v
            }
            Term::Nil => vec![],
            t => vec![t],
        }
    }

    pub fn components(&self) -> Vec<&Term> {
        match self {
            Term::Par(a, b) => {
                let mut v = a.components();
                v.extend(b.components());
                v
            }
            t => vec![t],
        }
    }
}

/// Every free occurrence of `id` in `t` lies under a non-τ action prefix and
/// outside any abstraction.
pub fn is_guarded(id: &str, t: &Term) -> bool {
    fn go(id: &str, t: &Term, guarded: bool, abstracted: bool) -> bool {
        match t {
            Term::Name(n) if n == id => guarded && !abstracted,
            Term::Rec(x, _) if x == id => true,
            Term::Prefix(a, b) | Term::CPrefix(_, a, b) | Term::MPrefix(_, a, b) => {
                go(id, b, guarded || !a.is_tau(), abstracted)
            }
            Term::Abstract(_, b) => go(id, b, guarded, true),
            _ => t.children().into_iter().all(|c| go(id, c, guarded, abstracted)),
        }
    }
    go(id, t, false, false)
}

fn canon_choice(ts: Vec<Term>) -> Term {
    let mut v: Vec<Term> = ts.into_iter().filter(|t| *t != Term::Nil).collect();
    v.sort();
    v.dedup();
    sum(v)
}

impl Term {
    /// Canonical representative: choices and parallel compositions are
    /// flattened and sorted, `0` summands and duplicate summands removed.
    /// Nested abstractions (encapsulations) are merged and empty ones dropped,
    /// so unfolding `rec X . tau{I}(..X..)` does not grow the state.
    pub fn canon(&self) -> Term {
        let t = self.map_children(Term::canon);
        match &t {
            Term::Abstract(ms, b) | Term::Encap(ms, b) if ms.is_empty() => (**b).clone(),
            Term::Abstract(ms, b) => match &**b {
                Term::Abstract(inner, x) => Term::Abstract(ms.union(inner).cloned().collect(), x.clone()),
                _ => t,
            },
            Term::Encap(ms, b) => match &**b {
                Term::Encap(inner, x) => Term::Encap(ms.union(inner).cloned().collect(), x.clone()),
                _ => t,
            },
            Term::Choice(..) => canon_choice(t.summands().into_iter().cloned().collect()),
            Term::Par(..) => {
                let mut v: Vec<Term> = t.components().into_iter().cloned().collect();
                v.sort();
                par_all(v)
            }
            _ => t,
        }
    }
}

fn fmt_msgs(ms: &MsgSet, uni_all: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if uni_all {
        return write!(f, "*");
    }
    let v: Vec<&str> = ms.iter().map(String::as_str).collect();
    write!(f, "{}", v.join(","))
}

// Precedence levels: 0 restrict, 1 par, 2 choice, 3 prefix/atom.
fn fmt_term(t: &Term, prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    use Term::*;
    let open = |f: &mut fmt::Formatter<'_>, need: bool| if need { write!(f, "(") } else { Ok(()) };
    let close = |f: &mut fmt::Formatter<'_>, need: bool| if need { write!(f, ")") } else { Ok(()) };
    match t {
        Nil => write!(f, "0"),
        Name(n) => write!(f, "{n}"),
        Prefix(a, b) => {
            write!(f, "{a}.")?;
            fmt_term(b, 3, f)
        }
        CPrefix(c, a, b) => {
            write!(f, "({c}, {a}).")?;
            fmt_term(b, 3, f)
        }
        MPrefix(m, a, b) => {
            write!(f, "({m}, {a}).")?;
            fmt_term(b, 3, f)
        }
        Choice(a, b) => {
            let need = prec > 2;
            open(f, need)?;
            fmt_term(a, 3, f)?;
            write!(f, " + ")?;
            fmt_term(b, 2, f)?;
            close(f, need)
        }
        Par(a, b) => {
            let need = prec > 1;
            open(f, need)?;
            fmt_term(a, 2, f)?;
            write!(f, " || ")?;
            fmt_term(b, 1, f)?;
            close(f, need)
        }
        Restrict(c, b) => {
            let need = prec > 0;
            open(f, need)?;
            write!(f, "{c} |> ")?;
            fmt_term(b, 0, f)?;
            close(f, need)
        }
        Rec(x, b) => {
            let need = prec > 0;
            open(f, need)?;
            write!(f, "rec {x} . ")?;
            fmt_term(b, 0, f)?;
            close(f, need)
        }
        Hide(l, b) => {
            let need = prec > 0;
            open(f, need)?;
            write!(f, "hide {l} in ")?;
            fmt_term(b, 0, f)?;
            close(f, need)
        }
        Deploy(b, l) => {
            write!(f, "dep(")?;
            fmt_term(b, 0, f)?;
            write!(f, ")@{l}")
        }
        LocalDeploy(l, a, b) => {
            write!(f, "local({l}, ")?;
            fmt_term(a, 0, f)?;
            write!(f, ", ")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
        LeftMerge(a, b) => {
            write!(f, "lmerge(")?;
            fmt_term(a, 0, f)?;
            write!(f, ", ")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
        CommMerge(a, b) => {
            write!(f, "cmerge(")?;
            fmt_term(a, 0, f)?;
            write!(f, ", ")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
        Sense(l, a, b) => {
            write!(f, "sense({l}, ")?;
            fmt_term(a, 0, f)?;
            write!(f, ", ")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
        Abstract(ms, b) => {
            write!(f, "tau{{")?;
            fmt_msgs(ms, false, f)?;
            write!(f, "}}(")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
        Encap(ms, b) => {
            write!(f, "encap{{")?;
            fmt_msgs(ms, false, f)?;
            write!(f, "}}(")?;
            fmt_term(b, 0, f)?;
            write!(f, ")")
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DefKind {
    Proc,
    Net,
    Spec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Definition {
    pub kind: DefKind,
    pub term: Term,
    /// 1-based source line of the definition, when parsed from text.
    pub line: usize,
}

/// Declared universes plus named definitions sharing one namespace.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Specification {
    pub universe: Universe,
    pub defs: IndexMap<String, Definition>,
}

impl Specification {
    pub fn new(universe: Universe) -> Self {
        Specification { universe, defs: IndexMap::new() }
    }

    pub fn define(&mut self, kind: DefKind, id: &str, term: Term) -> &mut Self {
        self.defs.insert(id.into(), Definition { kind, term, line: 0 });
        self
    }

    pub fn proc(mut self, id: &str, term: Term) -> Self {
        self.define(DefKind::Proc, id, term);
        self
    }

    pub fn net(mut self, id: &str, term: Term) -> Self {
        self.define(DefKind::Net, id, term);
        self
    }

    pub fn spec(mut self, id: &str, term: Term) -> Self {
        self.define(DefKind::Spec, id, term);
        self
    }

    pub fn lookup(&self, id: &str) -> Option<&Term> {
        self.defs.get(id).map(|d| &d.term)
    }

    pub fn all_msgs(&self) -> MsgSet {
        self.universe.msgs.iter().cloned().collect()
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let u = &self.universe;
        writeln!(f, "addresses {};", u.locs.join(", "))?;
        writeln!(f, "messages {};", u.msgs.join(", "))?;
        if !u.iacts.is_empty() {
            writeln!(f, "internal {};", u.iacts.join(", "))?;
        }
        for (id, d) in &self.defs {
            let kw = match d.kind {
                DefKind::Proc => "proc",
                DefKind::Net => "net",
                DefKind::Spec => "spec",
            };
            writeln!(f, "{kw} {id} = {};", d.term)?;
        }
        Ok(())
    }
}
