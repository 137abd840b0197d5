//! Grammatical well-formedness of terms.

use std::fmt;

use serde::Serialize;

use crate::constraint::{Addr, Constraint};
use crate::term::{Action, DefKind, Specification, Term};
use crate::universe::Universe;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Child indices from the root, e.g. `/1/0`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", if self.path.is_empty() { "/" } else { &self.path }, self.message)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Ctx {
    Network,
    Process,
    SpecTerm,
}

struct Checker<'a> {
    spec: &'a Specification,
    out: Vec<Violation>,
    path: Vec<usize>,
    bound: Vec<String>,
}

impl Checker<'_> {
    fn report(&mut self, msg: impl Into<String>) {
        let path = self.path.iter().map(|i| format!("/{i}")).collect();
        self.out.push(Violation { path, message: msg.into() });
    }

    fn uni(&self) -> &Universe {
        &self.spec.universe
    }

    fn addr(&mut self, a: &Addr, what: &str) {
        match a {
            Addr::Unknown => self.report(format!("{what} must be a known address")),
            Addr::Known(n) if !self.uni().has_loc(n) => self.report(format!("undeclared address `{n}`")),
            _ => {}
        }
    }

    fn constraint(&mut self, c: &Constraint) {
        if !c.is_well_formed() {
            self.report(format!("ill-formed constraint {c}"));
        }
        if c.links().any(|l| l.is_self_link() && !l.from.is_unknown()) {
            self.report(format!("self-link in {c}"));
        }
        for a in c.addrs() {
            if let Addr::Known(n) = &a {
                if !self.uni().has_loc(n) {
                    self.report(format!("undeclared address `{n}`"));
                }
            }
        }
    }

    fn msg(&mut self, m: &str) {
        if !self.uni().has_msg(m) {
            self.report(format!("undeclared message `{m}`"));
        }
    }

    fn action(&mut self, a: &Action) {
        match a {
            Action::Snd(m) | Action::Rcv(m) | Action::NRcv(m) => self.msg(m),
            Action::NSnd(m, l) => {
                self.msg(m);
                if let Addr::Known(n) = l {
                    if !self.uni().has_loc(n) {
                        self.report(format!("undeclared address `{n}`"));
                    }
                }
            }
            Action::Internal(i) => {
                if !self.uni().has_iact(i) {
                    self.report(format!("undeclared internal action `{i}`"));
                }
            }
            Action::Tau => {}
        }
    }

    fn child(&mut self, i: usize, t: &Term, ctx: Ctx) {
        self.path.push(i);
        self.term(t, ctx);
        self.path.pop();
    }

    fn name(&mut self, n: &str, ctx: Ctx) {
        if self.bound.iter().any(|b| b == n) {
            return;
        }
        match self.spec.defs.get(n) {
            None => self.report(format!("unbound name `{n}`")),
            Some(d) => {
                let ok = match ctx {
                    Ctx::Process => d.kind == DefKind::Proc,
                    Ctx::Network => d.kind != DefKind::Proc,
                    Ctx::SpecTerm => d.kind == DefKind::Spec,
                };
                if !ok {
                    self.report(format!("`{n}` names a {:?} definition, not usable here", d.kind));
                }
            }
        }
    }

    fn term(&mut self, t: &Term, ctx: Ctx) {
        use Term::*;
        match t {
            Nil => {}
            Name(n) => self.name(n, ctx),
            Prefix(a, b) => {
                self.action(a);
                match (ctx, a) {
                    (Ctx::Process, Action::Snd(_) | Action::Rcv(_) | Action::Internal(_)) => {}
                    (Ctx::Process, _) => self.report(format!("action {a} cannot occur in a deployed process")),
                    (_, Action::Internal(_) | Action::Tau) => {}
                    (_, _) => self.report(format!("protocol action {a} outside a deployment")),
                }
                self.child(0, b, ctx);
            }
            CPrefix(c, a, b) => {
                if ctx == Ctx::Process {
                    self.report("constrained prefix inside a deployed process");
                }
                if matches!(a, Action::Snd(_) | Action::Rcv(_)) {
                    self.report(format!("protocol action {a} in a constrained prefix"));
                }
                self.constraint(c);
                self.action(a);
                self.child(0, b, ctx);
            }
            MPrefix(m, a, b) => {
                if ctx == Ctx::Process {
                    self.report("multi-hop prefix inside a deployed process");
                }
                if !a.is_iota() {
                    self.report(format!("multi-hop prefix needs an internal action or tau, found {a}"));
                }
                if !m.is_well_formed() {
                    self.report(format!("ill-formed multi-hop constraint {m}"));
                }
                for l in m.lits() {
                    for n in [&l.from, &l.to] {
                        if !self.uni().has_loc(n) {
                            self.report(format!("undeclared address `{n}`"));
                        }
                    }
                }
                self.action(a);
                self.child(0, b, ctx);
            }
            Choice(..) => {
                let sums = t.summands();
                let has_c = sums.iter().any(|s| matches!(s, CPrefix(..)));
                let has_m = sums.iter().any(|s| matches!(s, MPrefix(..)));
                if has_c && has_m {
                    self.report("choice mixes constrained and multi-hop summands");
                }
                for (i, c) in t.children().into_iter().enumerate() {
                    self.child(i, c, ctx);
                }
            }
            Sense(l, a, b) => {
                if ctx != Ctx::Process {
                    self.report("sense outside a deployment");
                }
                self.addr(l, "sense target");
                self.child(0, a, ctx);
                self.child(1, b, ctx);
            }
            Deploy(b, l) => {
                self.net_only(ctx, "deployment");
                self.addr(l, "deployment address");
                self.child(0, b, Ctx::Process);
            }
            LocalDeploy(l, fb, body) => {
                self.net_only(ctx, "local deployment");
                self.addr(l, "deployment address");
                self.child(0, fb, Ctx::Network);
                self.child(1, body, Ctx::Process);
            }
            Par(a, b) | LeftMerge(a, b) | CommMerge(a, b) => {
                self.net_only(ctx, "parallel composition");
                self.child(0, a, ctx);
                self.child(1, b, ctx);
            }
            Hide(l, b) => {
                self.net_only(ctx, "hiding");
                self.addr(l, "hidden address");
                self.child(0, b, ctx);
            }
            Abstract(ms, b) | Encap(ms, b) => {
                self.net_only(ctx, "abstraction or encapsulation");
                for m in ms {
                    self.msg(m);
                }
                self.child(0, b, ctx);
            }
            Restrict(c, b) => {
                self.net_only(ctx, "topology restriction");
                self.constraint(c);
                self.child(0, b, ctx);
            }
            Rec(x, b) => {
                if ctx == Ctx::Process {
                    self.report("recursion inside a deployed process; use a process definition");
                }
                if self.bound.contains(x) || self.spec.defs.contains_key(x) {
                    self.report(format!("`{x}` shadows an existing name"));
                }
                self.bound.push(x.clone());
                self.child(0, b, ctx);
                self.bound.pop();
            }
        }
    }

    fn net_only(&mut self, ctx: Ctx, what: &str) {
        match ctx {
            Ctx::Process => self.report(format!("{what} inside a deployed process")),
            // reported once by the fragment check
            Ctx::SpecTerm | Ctx::Network => {}
        }
    }
}

fn check(t: &Term, spec: &Specification, ctx: Ctx) -> Vec<Violation> {
    let mut c = Checker { spec, out: vec![], path: vec![], bound: vec![] };
    c.term(t, ctx);
    c.out
}

/// Violations of a closed network-level term. An empty list means valid.
pub fn validate_term(t: &Term, spec: &Specification) -> Vec<Violation> {
    check(t, spec, Ctx::Network)
}

/// Violations of a process body as deployed at a node.
pub fn validate_process(t: &Term, spec: &Specification) -> Vec<Violation> {
    check(t, spec, Ctx::Process)
}

/// Violations of every definition, each path prefixed by the definition name.
pub fn validate_spec(spec: &Specification) -> Vec<Violation> {
    let mut out = Vec::new();
    for (id, d) in &spec.defs {
        let ctx = match d.kind {
            DefKind::Proc => Ctx::Process,
            DefKind::Net => Ctx::Network,
            DefKind::Spec => Ctx::SpecTerm,
        };
        for v in check(&d.term, spec, ctx) {
            out.push(Violation { path: format!("{id}{}", v.path), message: v.message });
        }
        if d.kind == DefKind::Spec {
            spec_fragment(&d.term, id, &mut out);
        }
    }
    out
}

fn spec_fragment(t: &Term, id: &str, out: &mut Vec<Violation>) {
    let ok = matches!(t, Term::Nil | Term::MPrefix(..) | Term::CPrefix(..) | Term::Choice(..) | Term::Rec(..) | Term::Name(_));
    if !ok {
        out.push(Violation { path: id.to_string(), message: format!("specification terms allow only prefixes, choice and recursion, found {t}") });
        return;
    }
    for c in t.children() {
        spec_fragment(c, id, out);
    }
}
