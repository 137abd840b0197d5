#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rrbpt_core::term::{cprefix, prefix, rcv, snd};
use rrbpt_core::*;

pub const LOCS: [&str; 2] = ["A", "B"];
pub const MSGS: [&str; 2] = ["a", "b"];

pub fn universe() -> Universe {
    Universe::new(LOCS, MSGS, ["i"])
}

/// Two addresses, two messages, one internal action, plus a process and a network definition.
pub fn small_spec() -> Specification {
    Specification::new(universe())
        .proc("P1", prefix(snd("a"), prefix(rcv("b"), Term::Nil)))
        .net("N1", cprefix(Constraint::empty(), Action::Tau, Term::Nil))
}

pub fn spec_from(src: &str) -> Specification {
    parse(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

pub fn lts(t: &Term, spec: &Specification) -> Clts {
    explore(t, spec, 5_000).unwrap_or_else(|e| panic!("exploring {t}: {e}"))
}

pub fn c(src: &str) -> Constraint {
    parse_constraint(src, &universe()).unwrap()
}

pub struct Gen {
    pub rng: StdRng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: StdRng::seed_from_u64(seed) }
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn loc(&mut self) -> Addr {
        Addr::known(LOCS[self.rng.gen_range(0..LOCS.len())])
    }

    pub fn other(&self, l: &Addr) -> Addr {
        Addr::known(if l.name() == Some("A") { "B" } else { "A" })
    }

    pub fn msg(&mut self) -> String {
        MSGS[self.rng.gen_range(0..MSGS.len())].to_string()
    }

    pub fn msg_set(&mut self) -> MsgSet {
        MSGS.iter().filter(|_| self.rng.gen_bool(0.5)).map(|m| m.to_string()).collect()
    }

    fn link(&mut self, unknown: bool) -> Link {
        let to = self.loc();
        let from = if unknown && self.coin(0.4) { Addr::Unknown } else { self.other(&to) };
        if self.coin(0.5) {
            Link::conn(from, to)
        } else {
            Link::disconn(from, to)
        }
    }

    /// Zero to two literals, well-formed and free of self-links.
    pub fn constraint(&mut self, unknown: bool) -> Constraint {
        let mut out = Constraint::empty();
        for _ in 0..self.rng.gen_range(0..3) {
            let l = self.link(unknown);
            let mut next = out.clone();
            next.insert(l);
            if next.is_well_formed() {
                out = next;
            }
        }
        out
    }

    pub fn action(&mut self) -> Action {
        match self.rng.gen_range(0..4) {
            0 => Action::NSnd(self.msg(), self.loc()),
            1 => Action::NRcv(self.msg()),
            2 => Action::Tau,
            _ => Action::Internal("i".into()),
        }
    }

    pub fn labelled(&mut self, a: Action, t: Term) -> Term {
        let c = self.constraint(matches!(a, Action::NRcv(_)));
        cprefix(c, a, t)
    }

    pub fn proc(&mut self, d: usize) -> Term {
        if d == 0 {
            return Term::Nil;
        }
        match self.rng.gen_range(0..7) {
            0 => Term::Nil,
            1 => prefix(snd(&self.msg()), self.proc(d - 1)),
            2 | 3 => prefix(rcv(&self.msg()), self.proc(d - 1)),
            4 => prefix(Action::Internal("i".into()), self.proc(d - 1)),
            5 => term::choice(self.proc(d - 1), self.proc(d - 1)),
            _ => {
                let l = self.loc();
                Term::Sense(l, Box::new(self.proc(d - 1)), Box::new(self.proc(d - 1)))
            }
        }
    }

    pub fn node(&mut self, d: usize) -> Term {
        let l = self.loc();
        Term::Deploy(Box::new(self.proc(d)), l)
    }

    /// Closed sequential network terms built from prefixes, choice, restriction and deployments.
    pub fn net(&mut self, d: usize) -> Term {
        if d == 0 {
            return if self.coin(0.5) { Term::Nil } else { self.node(1) };
        }
        match self.rng.gen_range(0..6) {
            0 => Term::Nil,
            1 | 2 => {
                let a = self.action();
                let t = self.net(d - 1);
                self.labelled(a, t)
            }
            3 => term::choice(self.net(d - 1), self.net(d - 1)),
            4 => self.node(d),
            _ => Term::Restrict(self.constraint(false), Box::new(self.net(d - 1))),
        }
    }

    /// A parallel composition of two or three deployed nodes, sometimes wrapped.
    pub fn network(&mut self, d: usize) -> Term {
        let a = self.loc();
        let b = self.other(&a);
        let mut t = Term::Par(Box::new(Term::Deploy(Box::new(self.proc(d)), a)), Box::new(Term::Deploy(Box::new(self.proc(d)), b)));
        if self.coin(0.2) {
            let l = self.loc();
            t = Term::Par(Box::new(t), Box::new(Term::Deploy(Box::new(self.proc(d - 1)), l)));
        }
        match self.rng.gen_range(0..6) {
            0 => Term::Encap(self.msg_set(), Box::new(t)),
            1 => Term::Abstract(self.msg_set(), Box::new(t)),
            2 => Term::Hide(self.loc(), Box::new(t)),
            _ => t,
        }
    }

    pub fn pick<'a, T>(&mut self, xs: &'a [T]) -> &'a T {
        &xs[self.rng.gen_range(0..xs.len())]
    }
}

/// A closed, explorable left-hand side for `ax`, or `None` when the axiom is not sampled.
pub fn redex(g: &mut Gen, ax: &Axiom) -> Option<Term> {
    use Axiom::*;
    let b = Box::new;
    let d = 2;
    let t = match ax {
        Ch1 => term::choice(Term::Nil, g.net(d)),
        Ch2 => term::choice(g.net(d), g.net(d)),
        Ch3 => term::choice(g.net(1), term::choice(g.net(1), g.net(1))),
        Ch4 => {
            let x = g.net(d);
            term::choice(x.clone(), x)
        }
        Ch5 => {
            let l = g.loc();
            let o = g.other(&l);
            let m = g.msg();
            let k = g.net(1);
            let cu = Constraint::single(if g.coin(0.5) { Link::conn(Addr::Unknown, o.clone()) } else { Link::disconn(Addr::Unknown, o) });
            let cl = cu.ground_at(&l).unwrap();
            term::sum([
                cprefix(cu, Action::NSnd(m.clone(), Addr::Unknown), k.clone()),
                cprefix(cl, Action::NSnd(m, l), k),
                g.net(1),
            ])
        }
        Ch6 => {
            let a = g.action();
            let c1 = g.constraint(matches!(a, Action::NRcv(_)));
            let extra = g.constraint(false);
            let c2 = c1.union_wf(&extra).unwrap_or_else(|| c1.clone());
            let k = g.net(1);
            term::choice(cprefix(c1, a.clone(), k.clone()), cprefix(c2, a, k))
        }
        Dep0 => g.node(3),
        Dep1 | Dep2 | Dep3 | Dep4 | Dep6 | Dep7 | Dep5 => {
            let l = g.loc();
            let body = match ax {
                Dep1 => prefix(snd(&g.msg()), g.proc(2)),
                Dep2 => prefix(rcv(&g.msg()), g.proc(2)),
                Dep3 => term::choice(g.proc(2), g.proc(2)),
                Dep4 => Term::Nil,
                Dep6 => prefix(Action::Internal("i".into()), g.proc(2)),
                Dep5 => Term::Name("P1".into()),
                _ => {
                    let o = g.other(&l);
                    Term::Sense(o, b(g.proc(2)), b(g.proc(2)))
                }
            };
            let fallback = Term::Deploy(b(body.clone()), l.clone());
            Term::LocalDeploy(l, b(fallback), b(body))
        }
        TRes1 => {
            let a = g.action();
            let k = g.net(1);
            Term::Restrict(g.constraint(false), b(g.labelled(a, k)))
        }
        TRes2 => Term::Restrict(g.constraint(false), b(term::choice(g.net(1), g.net(1)))),
        TRes3 => {
            let a = g.action();
            let body = term::choice(g.labelled(a, Term::Name("X".into())), g.net(1));
            Term::Restrict(g.constraint(false), b(Term::Rec("X".into(), b(body))))
        }
        TRes4 => Term::Restrict(g.constraint(false), b(Term::Name("N1".into()))),
        TRes5 => Term::Restrict(g.constraint(false), b(Term::Nil)),
        Br => Term::Par(b(g.net(1)), b(g.net(1))),
        LM1p => {
            let a = if g.coin(0.5) { Action::NSnd(g.msg(), g.loc()) } else { Action::NRcv(g.msg()) };
            let k = g.net(1);
            Term::LeftMerge(b(g.labelled(a, k)), b(g.net(1)))
        }
        LM2 => Term::LeftMerge(b(term::choice(g.net(1), g.net(1))), b(g.net(1))),
        LM2p => {
            let a = if g.coin(0.5) { Action::Tau } else { Action::Internal("i".into()) };
            let k = g.net(1);
            Term::LeftMerge(b(g.labelled(a, k)), b(g.net(1)))
        }
        LM3 => Term::LeftMerge(b(Term::Nil), b(g.net(1))),
        S1 => Term::CommMerge(b(g.net(1)), b(g.net(1))),
        S2 => Term::CommMerge(b(term::choice(g.net(1), g.net(1))), b(g.net(1))),
        S3 => Term::CommMerge(b(Term::Nil), b(g.net(1))),
        S4 => {
            let a = if g.coin(0.5) { Action::Tau } else { Action::Internal("i".into()) };
            let k = g.net(1);
            Term::CommMerge(b(g.labelled(a, k)), b(g.net(1)))
        }
        Sync1 | Sync2 | Sync3 => {
            let m = g.msg();
            let m2 = if g.coin(0.7) { m.clone() } else { g.msg() };
            let (a1, a2) = match ax {
                Sync1 => (Action::NSnd(m, g.loc()), Action::NRcv(m2)),
                Sync2 => (Action::NRcv(m), Action::NRcv(m2)),
                _ => (Action::NSnd(m, g.loc()), Action::NSnd(m2, g.loc())),
            };
            let (k1, k2) = (g.net(1), g.net(1));
            Term::CommMerge(b(g.labelled(a1, k1)), b(g.labelled(a2, k2)))
        }
        Res1 => Term::Hide(g.loc(), b(term::choice(g.net(1), g.net(1)))),
        Res2 => {
            let a = g.action();
            let k = g.net(1);
            Term::Hide(g.loc(), b(g.labelled(a, k)))
        }
        Res3 => Term::Hide(g.loc(), b(Term::Nil)),
        Ecp1 | Ecp2 | Abs1 | Abs2 => {
            let a = match ax {
                Ecp2 | Abs1 => Action::NRcv(g.msg()),
                _ => loop {
                    let a = g.action();
                    if !matches!(a, Action::NRcv(_)) {
                        break a;
                    }
                },
            };
            let k = g.net(1);
            let inner = b(g.labelled(a, k));
            if matches!(ax, Ecp1 | Ecp2) {
                Term::Encap(g.msg_set(), inner)
            } else {
                Term::Abstract(g.msg_set(), inner)
            }
        }
        Ecp3 => Term::Encap(g.msg_set(), b(term::choice(g.net(1), g.net(1)))),
        Abs3 => Term::Abstract(g.msg_set(), b(term::choice(g.net(1), g.net(1)))),
        Ecp4 => Term::Encap(g.msg_set(), b(Term::Nil)),
        Abs4 => Term::Abstract(g.msg_set(), b(Term::Nil)),
        T1 => {
            let l = g.loc();
            let o = g.other(&l);
            let base = g.constraint(false);
            let (Some(c1), Some(c2)) = (
                base.union_wf(&Constraint::single(Link::conn(l.clone(), o.clone()))),
                base.union_wf(&Constraint::single(Link::disconn(l, o))),
            ) else {
                return None;
            };
            let inner = g.action();
            let k = g.net(1);
            let outer = g.action();
            let c0 = g.constraint(matches!(outer, Action::NRcv(_)));
            cprefix(c0, outer, term::sum([cprefix(c1, inner.clone(), k.clone()), cprefix(c2, inner, k), g.net(1)]))
        }
        T2 => {
            let (t1, t2) = (g.net(1), g.net(1));
            let outer = g.action();
            let c0 = g.constraint(matches!(outer, Action::NRcv(_)));
            let ct = g.constraint(false);
            cprefix(c0, outer, term::choice(cprefix(ct, Action::Tau, term::choice(t1, t2.clone())), t2))
        }
        Unfold => {
            let a = g.action();
            Term::Rec("X".into(), b(term::choice(g.labelled(a, Term::Name("X".into())), g.net(1))))
        }
        Hid => {
            let a = g.action();
            let body = term::choice(g.labelled(a, Term::Name("X".into())), g.net(1));
            Term::Abstract(g.msg_set(), b(Term::Rec("X".into(), b(body))))
        }
        _ => return None,
    };
    Some(t)
}

/// Per-axiom instance count and the failing instances.
pub type AxiomTally = std::collections::BTreeMap<String, (usize, Vec<String>)>;

/// Sampled axioms; the unguarded-recursion ones need open terms and are tested by hand.
pub fn sampled_axioms() -> Vec<Axiom> {
    Axiom::all().into_iter().filter(|a| !matches!(a, Axiom::Ung | Axiom::WUng1 | Axiom::WUng2)).collect()
}

/// Instantiates every sampled axiom `rounds` times at the root and compares both sides.
pub fn axiom_soundness(seed: u64, rounds: usize) -> AxiomTally {
    let spec = small_spec();
    let mut g = Gen::new(seed);
    let mut tally = AxiomTally::new();
    for round in 0..rounds {
        for ax in sampled_axioms() {
            let Some(lhs) = redex(&mut g, &ax) else { continue };
            let rhs = match apply_axiom(&lhs, &ax, &[], &spec) {
                Ok(Some(r)) => r,
                Ok(None) => continue,
                Err(e) => panic!("{ax} on {lhs}: {e}"),
            };
            let v = check_bisim(&lts(&lhs, &spec), &lts(&rhs, &spec), Mode::RootedBranchingReliable).unwrap();
            let e = tally.entry(ax.name()).or_default();
            e.0 += 1;
            if !v.related {
                e.1.push(format!("round {round}: {lhs}  =  {rhs}"));
            }
        }
    }
    tally
}

/// Edge sets of every directed topology over `n` addresses, enumerated without the library's bit layout.
pub fn all_edge_sets(n: usize) -> Vec<std::collections::BTreeSet<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    (0..1usize << pairs.len())
        .map(|mask| pairs.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, p)| *p).collect())
        .collect()
}

pub fn edge_set(g: &Topology) -> std::collections::BTreeSet<(usize, usize)> {
    (0..g.n).flat_map(|i| (0..g.n).map(move |j| (i, j))).filter(|&(i, j)| g.has_edge(i, j)).collect()
}

/// Whether the edge set satisfies every literal of a ground constraint.
pub fn oracle_holds(c: &Constraint, edges: &std::collections::BTreeSet<(usize, usize)>, uni: &Universe) -> bool {
    c.links().all(|l| {
        let i = uni.loc_index(l.from.name().unwrap()).unwrap();
        let j = uni.loc_index(l.to.name().unwrap()).unwrap();
        let present = i != j && edges.contains(&(i, j));
        match l.pol {
            Polarity::Conn => present,
            Polarity::Disconn => !present,
        }
    })
}

/// Exhaustively compares `is_partitioning` with topology enumeration on every
/// family of up to three parts built from a pool of literals. Returns (checked, disagreements).
pub fn partition_oracle(uni: &Universe, pool: &[Link]) -> (usize, Vec<String>) {
    let n = uni.locs.len();
    let all = all_edge_sets(n);
    let subsets: Vec<Constraint> = (0..1usize << pool.len())
        .map(|m| pool.iter().enumerate().filter(|(k, _)| m >> k & 1 == 1).map(|(_, l)| l.clone()).collect::<Constraint>())
        .filter(|c: &Constraint| c.is_well_formed())
        .collect();
    let sat = |c: &Constraint| -> Vec<bool> { all.iter().map(|e| oracle_holds(c, e, uni)).collect() };
    let sats: Vec<Vec<bool>> = subsets.iter().map(sat).collect();
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut families: Vec<Vec<usize>> = vec![];
    for a in 0..subsets.len() {
        families.push(vec![a]);
        for b in a..subsets.len() {
            families.push(vec![a, b]);
            for c in b..subsets.len() {
                families.push(vec![a, b, c]);
            }
        }
    }
    for (w, whole) in subsets.iter().enumerate() {
        for fam in &families {
            let parts: Vec<Constraint> = fam.iter().map(|&k| subsets[k].clone()).collect();
            let expected = (0..all.len()).all(|t| fam.iter().filter(|&&k| sats[k][t]).count() == usize::from(sats[w][t]));
            let got = is_partitioning(&parts, whole, uni).unwrap();
            checked += 1;
            if got != expected {
                bad.push(format!("{parts:?} of {whole}: got {got}"));
            }
        }
    }
    (checked, bad)
}

pub fn pool_two() -> (Universe, Vec<Link>) {
    let uni = universe();
    let k = |s: &str| Addr::known(s);
    (uni, vec![Link::conn(k("A"), k("B")), Link::disconn(k("A"), k("B")), Link::conn(k("B"), k("A")), Link::disconn(k("B"), k("A"))])
}

pub fn pool_three() -> (Universe, Vec<Link>) {
    let uni = Universe::new(["A", "B", "C"], ["a"], Vec::<&str>::new());
    let k = |s: &str| Addr::known(s);
    (
        uni,
        vec![
            Link::conn(k("A"), k("B")),
            Link::disconn(k("A"), k("B")),
            Link::conn(k("B"), k("C")),
            Link::disconn(k("C"), k("A")),
            Link::conn(k("C"), k("A")),
        ],
    )
}

pub fn fixture(name: &str) -> Specification {
    let path = format!("{}/../cli/examples/{name}.rbpt", env!("CARGO_MANIFEST_DIR"));
    spec_from(&std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")))
}

pub fn named(spec: &Specification, name: &str) -> Term {
    spec.lookup(name).cloned().unwrap_or_else(|| panic!("no {name}"))
}

/// (state, message, topology) triples with no covering receive or drop.
pub fn input_enabled_failures(c: &Clts) -> Vec<String> {
    let uni = &c.universe;
    let mut bad = Vec::new();
    for s in 0..c.len() {
        for m in &uni.msgs {
            let mut cover = TopoSet::empty(uni.locs.len());
            for t in c.outgoing(s) {
                if matches!(&t.label.action, Action::NRcv(x) if x == m) {
                    cover.union_with(&grounded_denotation(&t.label.constraint, uni).unwrap());
                }
            }
            if let Some(g) = TopoSet::all(uni.locs.len()).difference(&cover).iter().next() {
                bad.push(format!("{} cannot take nrcv({m}) under {}", c.states[s], extract_constraint(&g, uni)));
            }
        }
    }
    bad
}

/// Deployed networks whose receives stay observable (no encapsulation or
/// abstraction): the fixtures' open networks plus random ones.
pub fn deployed_corpus(seed: u64, random: usize) -> Vec<(Term, Specification)> {
    let pq = fixture("pq");
    let mut out: Vec<(Term, Specification)> = ["NP", "NQ", "NPQ"].iter().map(|n| (named(&pq, n), pq.clone())).collect();
    for f in ["routing_original", "routing_revised"] {
        let s = fixture(f);
        let open = parse_term("dep(P)@A || dep(M)@C || dep(Q)@B", &s.universe).unwrap();
        out.push((open, s));
    }
    let spec = small_spec();
    let mut g = Gen::new(seed);
    for _ in 0..random {
        let t = loop {
            let t = g.network(3);
            if !matches!(t, Term::Encap(..) | Term::Abstract(..)) {
                break t;
            }
        };
        out.push((t, spec.clone()));
    }
    out
}

/// Closed term pairs: sound axiom instances (related), random pairs (mostly
/// unrelated) and perturbed copies.
pub fn pair_corpus(seed: u64, n: usize) -> Vec<(Term, Term)> {
    use Axiom::*;
    let spec = small_spec();
    let sound = [Ch1, Ch2, Ch3, Ch4, Ch5, Ch6, Dep1, Dep2, Dep3, Dep4, Dep5, Dep6, TRes1, TRes2, TRes5, Br, S1, S2, Abs1, Abs3, Ecp2, Ecp3, Unfold, Hid];
    let mut g = Gen::new(seed);
    let mut out = Vec::new();
    while out.len() < n {
        match out.len() % 3 {
            0 => {
                let ax = g.pick(&sound).clone();
                let Some(l) = redex(&mut g, &ax) else { continue };
                if let Ok(Some(r)) = apply_axiom(&l, &ax, &[], &spec) {
                    out.push((l, r));
                }
            }
            1 => out.push((g.net(2), g.net(2))),
            _ => {
                let t = g.network(2);
                let u = if g.coin(0.5) { term::choice(t.clone(), t.clone()) } else { term::choice(t.clone(), g.net(1)) };
                out.push((t, u));
            }
        }
    }
    out
}

#[derive(Default)]
pub struct TheoryReport {
    pub pairs: usize,
    pub related_pairs: usize,
    pub input_enabled_pairs: usize,
    pub triples: usize,
    pub contexts: usize,
    pub failures: Vec<String>,
    /// Congruence failures on pairs that use `?` for an address (anonymous
    /// sends or hidden nodes); see `anonymous`.
    pub anonymous_failures: Vec<String>,
    pub sbr_disagreements: Vec<String>,
}

/// Whether `t` sends anonymously or hides an address. Both put `?` into labels,
/// where an enclosing context reads it as the unknown sender.
pub fn anonymous(t: &Term) -> bool {
    let s = t.to_string();
    s.contains(", ?)") || s.contains("hide ")
}

fn related(c1: &Clts, c2: &Clts, m: Mode) -> bool {
    check_bisim(c1, c2, m).unwrap().related
}

/// Reflexivity, symmetry, transitivity, b ⇒ br, congruence of rbr and the
/// semi-branching coincidence on a sampled corpus.
pub fn equivalence_theory(seed: u64, n: usize) -> TheoryReport {
    let spec = small_spec();
    let mut g = Gen::new(seed ^ 0x5eed);
    let mut r = TheoryReport::default();
    let corpus = pair_corpus(seed, n);
    let ltss: Vec<(Clts, Clts)> = corpus.iter().map(|(a, b)| (lts(a, &spec), lts(b, &spec))).collect();
    for ((t1, t2), (c1, c2)) in corpus.iter().zip(&ltss) {
        r.pairs += 1;
        for m in [Mode::BranchingReliable, Mode::RootedBranchingReliable] {
            if !related(c1, c1, m) {
                r.failures.push(format!("{m} not reflexive on {t1}"));
            }
            if related(c1, c2, m) != related(c2, c1, m) {
                r.failures.push(format!("{m} not symmetric on {t1} / {t2}"));
            }
        }
        // Branching treats receives as silent, so the implication is only
        // meaningful for systems that can always receive.
        let enabled = input_enabled_failures(c1).is_empty() && input_enabled_failures(c2).is_empty();
        if enabled {
            r.input_enabled_pairs += 1;
        }
        if enabled && related(c1, c2, Mode::Branching) && !related(c1, c2, Mode::BranchingReliable) {
            r.failures.push(format!("b but not br: {t1} / {t2}"));
        }
        if !check_semi_branching_coincidence(c1, c2).unwrap() {
            r.sbr_disagreements.push(format!("{t1} / {t2}"));
        }
        if !related(c1, c2, Mode::RootedBranchingReliable) {
            continue;
        }
        r.related_pairs += 1;
        let contexts: Vec<Box<dyn Fn(&Term) -> Term>> = {
            let u = g.node(2);
            let k = g.constraint(false);
            let (m1, m2) = (g.msg_set(), g.msg_set());
            vec![
                Box::new(move |t: &Term| Term::Par(Box::new(t.clone()), Box::new(u.clone()))),
                Box::new(move |t: &Term| Term::Restrict(k.clone(), Box::new(t.clone()))),
                Box::new(move |t: &Term| Term::Encap(m1.clone(), Box::new(t.clone()))),
                Box::new(move |t: &Term| Term::Abstract(m2.clone(), Box::new(t.clone()))),
            ]
        };
        for ctx in &contexts {
            let (x1, x2) = (ctx(t1), ctx(t2));
            r.contexts += 1;
            if !related(&lts(&x1, &spec), &lts(&x2, &spec), Mode::RootedBranchingReliable) {
                let msg = format!("congruence: {x1} / {x2}");
                if anonymous(t1) || anonymous(t2) {
                    r.anonymous_failures.push(msg);
                } else {
                    r.failures.push(msg);
                }
            }
        }
    }
    // Transitivity over chains t1 ~ t2 ~ t3 built from the related pairs.
    for (i, (_, b)) in ltss.iter().enumerate() {
        for (j, (a2, _)) in ltss.iter().enumerate().take(i + 40).skip(i + 1) {
            for m in [Mode::BranchingReliable, Mode::RootedBranchingReliable] {
                let (x, y, z) = (&ltss[i].0, b, a2);
                if related(x, y, m) && related(y, z, m) {
                    r.triples += 1;
                    if !related(x, z, m) {
                        r.failures.push(format!("{m} not transitive: {} / {} / {}", corpus[i].0, corpus[i].1, corpus[j].0));
                    }
                }
            }
        }
    }
    r
}
