//! Text syntax for specifications.

use std::collections::BTreeSet;

use crate::constraint::{Addr, Constraint, HopLit, Link, MultiHop, Polarity};
use crate::error::{CoreError, Result};
use crate::term::*;
use crate::universe::Universe;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Zero,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Plus,
    ParBar,
    Tri,
    At,
    Eq,
    Conn,
    Disconn,
    Reach,
    Unreach,
    Question,
    Star,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| CoreError::Parse { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = (line, col);
        let rest: String = chars[i..chars.len().min(i + 5)].iter().collect();
        let (tok, len) = if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if rest.starts_with("=/=>") {
            (Tok::Unreach, 4)
        } else if rest.starts_with("-/->") {
            (Tok::Disconn, 4)
        } else if rest.starts_with("->") {
            (Tok::Conn, 2)
        } else if rest.starts_with("=>") {
            (Tok::Reach, 2)
        } else if rest.starts_with("||") {
            (Tok::ParBar, 2)
        } else if rest.starts_with("|>") {
            (Tok::Tri, 2)
        } else {
            let t = match c {
                '0' => Tok::Zero,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '@' => Tok::At,
                '=' => Tok::Eq,
                '?' => Tok::Question,
                '*' => Tok::Star,
                _ => return Err(err(line, col, format!("unexpected character `{c}`"))),
            };
            (t, 1)
        };
        out.push(Token { tok, line: start.0, col: start.1 });
        i += len;
        col += len;
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Process,
    Network,
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    uni: &'a Universe,
    rec_bound: Vec<String>,
}

const KEYWORDS: &[&str] = &[
    "addresses", "messages", "internal", "proc", "net", "spec", "dep", "sense", "hide", "in", "tau", "encap", "rec",
    "snd", "rcv", "nsnd", "nrcv", "local", "lmerge", "cmerge",
];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(CoreError::Parse { line, col, msg: msg.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            self.err(format!("expected {t:?}, found {:?}", self.peek()))
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String> {
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            t => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {t:?}"))
            }
        }
    }

    fn ident_list(&mut self) -> Result<Vec<String>> {
        let mut v = vec![self.ident()?];
        while self.eat(&Tok::Comma) {
            v.push(self.ident()?);
        }
        Ok(v)
    }

    fn addr(&mut self) -> Result<Addr> {
        if self.eat(&Tok::Question) {
            return Ok(Addr::Unknown);
        }
        let a = self.ident()?;
        if !self.uni.has_loc(&a) {
            self.pos -= 1;
            return self.err(format!("undeclared address `{a}`"));
        }
        Ok(Addr::Known(a))
    }

    fn msg(&mut self) -> Result<String> {
        let m = self.ident()?;
        if !self.uni.has_msg(&m) {
            self.pos -= 1;
            return self.err(format!("undeclared message `{m}`"));
        }
        Ok(m)
    }

    fn msg_set(&mut self) -> Result<MsgSet> {
        self.expect(Tok::LBrace)?;
        let set: MsgSet = if self.eat(&Tok::Star) {
            self.uni.msgs.iter().cloned().collect()
        } else if self.peek() == &Tok::RBrace {
            BTreeSet::new()
        } else {
            let mut s = BTreeSet::new();
            s.insert(self.msg()?);
            while self.eat(&Tok::Comma) {
                s.insert(self.msg()?);
            }
            s
        };
        self.expect(Tok::RBrace)?;
        Ok(set)
    }

    /// Parses `{ ... }` into either a network or a multi-hop constraint.
    fn braced(&mut self) -> Result<Either> {
        self.expect(Tok::LBrace)?;
        let mut links = Vec::new();
        let mut hops = Vec::new();
        if !self.eat(&Tok::RBrace) {
            loop {
                let from = self.addr()?;
                let op = self.bump();
                let to = self.addr()?;
                match op {
                    Tok::Conn => links.push(Link::new(from, to, Polarity::Conn)),
                    Tok::Disconn => links.push(Link::new(from, to, Polarity::Disconn)),
                    Tok::Reach | Tok::Unreach => {
                        let (Some(f), Some(t)) = (from.name(), to.name()) else {
                            return self.err("multi-hop literals need known addresses");
                        };
                        hops.push(HopLit { from: f.into(), to: t.into(), reach: op == Tok::Reach });
                    }
                    t => return self.err(format!("expected a literal operator, found {t:?}")),
                }
                if links.iter().any(Link::is_self_link) {
                    return self.err("self-links are not allowed");
                }
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrace)?;
        }
        match (links.is_empty(), hops.is_empty()) {
            (_, true) => {
                let c = Constraint::from_links(links);
                if !c.is_well_formed() {
                    return self.err(format!("ill-formed constraint {c}"));
                }
                Ok(Either::Net(c))
            }
            (true, false) => {
                let m = MultiHop::from_lits(hops);
                if !m.is_well_formed() {
                    return self.err(format!("ill-formed multi-hop constraint {m}"));
                }
                Ok(Either::Multi(m))
            }
            _ => self.err("constraint mixes one-hop and multi-hop literals"),
        }
    }

    fn action(&mut self, ctx: Ctx) -> Result<Action> {
        let (line, col) = self.here();
        let id = self.ident()?;
        let a = match id.as_str() {
            "snd" | "rcv" | "nrcv" => {
                self.expect(Tok::LParen)?;
                let m = self.msg()?;
                self.expect(Tok::RParen)?;
                match id.as_str() {
                    "snd" => Action::Snd(m),
                    "rcv" => Action::Rcv(m),
                    _ => Action::NRcv(m),
                }
            }
            "nsnd" => {
                self.expect(Tok::LParen)?;
                let m = self.msg()?;
                self.expect(Tok::Comma)?;
                let a = self.addr()?;
                self.expect(Tok::RParen)?;
                Action::NSnd(m, a)
            }
            "tau" => Action::Tau,
            i if self.uni.has_iact(i) => Action::Internal(i.into()),
            other => {
                return Err(CoreError::Parse { line, col, msg: format!("undeclared internal action `{other}`") })
            }
        };
        let _ = ctx;
        Ok(a)
    }

    fn starts_action_prefix(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "snd" | "rcv" | "nrcv" | "nsnd" => true,
                "tau" => self.peek_at(1) == &Tok::Dot,
                "rec" | "hide" | "dep" | "sense" | "encap" | "local" | "lmerge" | "cmerge" => false,
                _ => self.peek_at(1) == &Tok::Dot,
            },
            _ => false,
        }
    }

    fn term(&mut self, ctx: Ctx) -> Result<Term> {
        if self.peek() == &Tok::LBrace {
            let (line, col) = self.here();
            return match self.braced()? {
                Either::Net(c) => {
                    self.expect(Tok::Tri)?;
                    Ok(restrict(c, self.term(ctx)?))
                }
                Either::Multi(_) => Err(CoreError::Parse { line, col, msg: "multi-hop constraint cannot restrict".into() }),
            };
        }
        let mut parts = vec![self.choice(ctx)?];
        while self.eat(&Tok::ParBar) {
            parts.push(self.choice(ctx)?);
        }
        Ok(par_all(parts))
    }

    fn choice(&mut self, ctx: Ctx) -> Result<Term> {
        let mut parts = vec![self.seq(ctx)?];
        while self.eat(&Tok::Plus) {
            parts.push(self.seq(ctx)?);
        }
        Ok(sum(parts))
    }

    fn seq(&mut self, ctx: Ctx) -> Result<Term> {
        if self.starts_action_prefix() {
            let a = self.action(ctx)?;
            self.expect(Tok::Dot)?;
            let body = self.seq(ctx)?;
            return Ok(match (ctx, &a) {
                (Ctx::Process, _) | (Ctx::Network, Action::Snd(_) | Action::Rcv(_)) => prefix(a, body),
                (Ctx::Network, _) => cprefix(Constraint::empty(), a, body),
            });
        }
        if self.peek() == &Tok::LParen && self.peek_at(1) == &Tok::LBrace {
            self.bump();
            let g = self.braced()?;
            self.expect(Tok::Comma)?;
            let a = self.action(ctx)?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Dot)?;
            let body = self.seq(ctx)?;
            return Ok(match g {
                Either::Net(c) => cprefix(c, a, body),
                Either::Multi(m) => mprefix(m, a, body),
            });
        }
        self.atom(ctx)
    }

    fn atom(&mut self, ctx: Ctx) -> Result<Term> {
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Term::Nil)
            }
            Tok::LParen => {
                self.bump();
                let t = self.term(ctx)?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) => match s.as_str() {
                "dep" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let body = self.term(Ctx::Process)?;
                    self.expect(Tok::RParen)?;
                    self.expect(Tok::At)?;
                    let a = self.addr()?;
                    Ok(Term::Deploy(Box::new(body), a))
                }
                "local" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let a = self.addr()?;
                    self.expect(Tok::Comma)?;
                    let fallback = self.term(Ctx::Network)?;
                    self.expect(Tok::Comma)?;
                    let body = self.term(Ctx::Process)?;
                    self.expect(Tok::RParen)?;
                    Ok(local_deploy(a, fallback, body))
                }
                "sense" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let a = self.addr()?;
                    self.expect(Tok::Comma)?;
                    let t1 = self.term(ctx)?;
                    self.expect(Tok::Comma)?;
                    let t2 = self.term(ctx)?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::Sense(a, Box::new(t1), Box::new(t2)))
                }
                "lmerge" | "cmerge" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let t1 = self.term(ctx)?;
                    self.expect(Tok::Comma)?;
                    let t2 = self.term(ctx)?;
                    self.expect(Tok::RParen)?;
                    Ok(if s == "lmerge" {
                        Term::LeftMerge(Box::new(t1), Box::new(t2))
                    } else {
                        Term::CommMerge(Box::new(t1), Box::new(t2))
                    })
                }
                "hide" => {
                    self.bump();
                    let mut addrs = vec![self.addr()?];
                    while self.eat(&Tok::Comma) {
                        addrs.push(self.addr()?);
                    }
                    if !self.is_kw("in") {
                        return self.err("expected `in`");
                    }
                    self.bump();
                    let mut t = self.term(ctx)?;
                    for a in addrs.into_iter().rev() {
                        t = Term::Hide(a, Box::new(t));
                    }
                    Ok(t)
                }
                "tau" | "encap" if self.peek_at(1) == &Tok::LBrace => {
                    self.bump();
                    let ms = self.msg_set()?;
                    self.expect(Tok::LParen)?;
                    let t = self.term(ctx)?;
                    self.expect(Tok::RParen)?;
                    Ok(if s == "tau" { abstract_msgs(ms, t) } else { encap(ms, t) })
                }
                "rec" => {
                    self.bump();
                    let x = self.ident()?;
                    self.expect(Tok::Dot)?;
                    self.rec_bound.push(x.clone());
                    let body = self.term(ctx);
                    self.rec_bound.pop();
                    Ok(rec(&x, body?))
                }
                _ if KEYWORDS.contains(&s.as_str()) => self.err(format!("unexpected keyword `{s}`")),
                _ => {
                    self.bump();
                    Ok(Term::Name(s))
                }
            },
            t => self.err(format!("unexpected token {t:?}")),
        }
    }
}

enum Either {
    Net(Constraint),
    Multi(MultiHop),
}

/// Parses a specification file. Terms are checked with [`crate::validate::validate_spec`].
pub fn parse(src: &str) -> Result<Specification> {
    let toks = lex(src)?;
    let empty = Universe::default();
    let mut p = Parser { toks, pos: 0, uni: &empty, rec_bound: vec![] };
    let mut uni = Universe::default();
    // Declarations come first; collect them in a pre-pass so definitions may follow in any order.
    loop {
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "addresses" || kw == "messages" || kw == "internal" => {
                p.bump();
                let names = p.ident_list()?;
                p.expect(Tok::Semi)?;
                let target = match kw.as_str() {
                    "addresses" => &mut uni.locs,
                    "messages" => &mut uni.msgs,
                    _ => &mut uni.iacts,
                };
                for n in names {
                    if !target.contains(&n) {
                        target.push(n);
                    }
                }
            }
            _ => {
                while !matches!(p.peek(), Tok::Semi | Tok::Eof) {
                    p.bump();
                }
                p.eat(&Tok::Semi);
            }
        }
    }
    uni.check_size()?;
    if let Some(m) = uni.msgs.iter().find(|m| uni.iacts.contains(m)) {
        return Err(CoreError::Parse { line: 1, col: 1, msg: format!("`{m}` declared both as message and internal action") });
    }
    let toks = std::mem::take(&mut p.toks);
    let mut p = Parser { toks, pos: 0, uni: &uni, rec_bound: vec![] };
    let mut spec = Specification::new(uni.clone());
    loop {
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(kw) if kw == "addresses" || kw == "messages" || kw == "internal" => {
                while !matches!(p.peek(), Tok::Semi | Tok::Eof) {
                    p.bump();
                }
                p.eat(&Tok::Semi);
            }
            Tok::Ident(kw) if kw == "proc" || kw == "net" || kw == "spec" => {
                let (line, _) = p.here();
                p.bump();
                let id = p.ident()?;
                if KEYWORDS.contains(&id.as_str()) {
                    p.pos -= 1;
                    return p.err(format!("`{id}` is a keyword"));
                }
                if spec.defs.contains_key(&id) {
                    p.pos -= 1;
                    return p.err(format!("`{id}` is defined twice"));
                }
                p.expect(Tok::Eq)?;
                let (kind, ctx) = match kw.as_str() {
                    "proc" => (DefKind::Proc, Ctx::Process),
                    "net" => (DefKind::Net, Ctx::Network),
                    _ => (DefKind::Spec, Ctx::Network),
                };
                let term = p.term(ctx)?;
                p.expect(Tok::Semi)?;
                spec.defs.insert(id, Definition { kind, term, line });
            }
            t => return p.err(format!("expected a declaration or definition, found {t:?}")),
        }
    }
    Ok(spec)
}

/// Parses a single network-level term against the given universe.
pub fn parse_term(src: &str, uni: &Universe) -> Result<Term> {
    let mut p = Parser { toks: lex(src)?, pos: 0, uni, rec_bound: vec![] };
    let t = p.term(Ctx::Network)?;
    if p.peek() != &Tok::Eof {
        return p.err("trailing input");
    }
    Ok(t)
}

/// Parses a single process-level term.
pub fn parse_process(src: &str, uni: &Universe) -> Result<Term> {
    let mut p = Parser { toks: lex(src)?, pos: 0, uni, rec_bound: vec![] };
    let t = p.term(Ctx::Process)?;
    if p.peek() != &Tok::Eof {
        return p.err("trailing input");
    }
    Ok(t)
}

pub fn parse_constraint(src: &str, uni: &Universe) -> Result<Constraint> {
    let mut p = Parser { toks: lex(src)?, pos: 0, uni, rec_bound: vec![] };
    match p.braced()? {
        Either::Net(c) => Ok(c),
        Either::Multi(_) => p.err("expected a one-hop constraint"),
    }
}

pub fn parse_multihop(src: &str, uni: &Universe) -> Result<MultiHop> {
    let mut p = Parser { toks: lex(src)?, pos: 0, uni, rec_bound: vec![] };
    match p.braced()? {
        Either::Multi(m) => Ok(m),
        Either::Net(c) if c.is_empty() => Ok(MultiHop::default()),
        Either::Net(_) => p.err("expected a multi-hop constraint"),
    }
}
