//! Path searches over an explored system, tracking the topology assumed so far.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::constraint::{grounded_denotation, topology_satisfies, Constraint, MultiHop};
use crate::error::{CoreError, Result};
use crate::sos::Clts;
use crate::term::{Action, Label};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub src: usize,
    pub label: Label,
    pub dst: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LoopTrace {
    /// From the initial state to the first state of the loop.
    pub prefix: Vec<TraceStep>,
    /// Returns to the first state of the loop without adding assumptions.
    pub cycle: Vec<TraceStep>,
    /// Union of every constraint on the way.
    pub accumulated: Constraint,
}

/// Whether `a` is the action named `name`, or carries the message `name`.
pub fn action_matches(a: &Action, name: &str) -> bool {
    a.to_string() == name || a.message() == Some(name)
}

type Config = (usize, Constraint);

struct Graph {
    configs: Vec<Config>,
    /// Edges as (transition index, target config).
    edges: Vec<Vec<(usize, usize)>>,
    parent: Vec<Option<(usize, usize)>>,
    hits: Vec<bool>,
}

fn out_index(c: &Clts) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]; c.len()];
    for (i, t) in c.transitions.iter().enumerate() {
        out[t.src].push(i);
    }
    out
}

fn build(c: &Clts, avoid: &str, max_configs: usize) -> Result<Graph> {
    let out = out_index(c);
    let start = (c.initial, Constraint::empty());
    let mut index = HashMap::from([(start.clone(), 0usize)]);
    let mut g = Graph { configs: vec![start], edges: vec![vec![]], parent: vec![None], hits: vec![false] };
    let mut queue = VecDeque::from([0usize]);
    while let Some(k) = queue.pop_front() {
        let (s, acc) = g.configs[k].clone();
        for &ti in &out[s] {
            let t = &c.transitions[ti];
            let Some(u) = acc.union_wf(&t.label.constraint) else { continue };
            if action_matches(&t.label.action, avoid) {
                g.hits[k] = true;
                continue;
            }
            let key = (t.dst, u);
            let j = match index.get(&key) {
                Some(&j) => j,
                None => {
                    if g.configs.len() >= max_configs {
                        return Err(CoreError::StateBudgetExceeded(max_configs));
                    }
                    g.configs.push(key.clone());
                    g.edges.push(vec![]);
                    g.parent.push(Some((k, ti)));
                    g.hits.push(false);
                    index.insert(key, g.configs.len() - 1);
                    queue.push_back(g.configs.len() - 1);
                    g.configs.len() - 1
                }
            };
            g.edges[k].push((ti, j));
        }
    }
    Ok(g)
}

fn step(c: &Clts, ti: usize) -> TraceStep {
    let t = &c.transitions[ti];
    TraceStep { src: t.src, label: t.label.clone(), dst: t.dst }
}

fn entails(acc: &Constraint, m: &MultiHop, c: &Clts) -> Result<bool> {
    let gs = grounded_denotation(acc, &c.universe)?;
    Ok(!gs.is_empty() && gs.iter().all(|g| topology_satisfies(&g, m, &c.universe)))
}

/// Shortest run into a loop from which `avoid` can no longer happen, under a
/// topology that entails `assuming` when given.
pub fn find_loop_without(c: &Clts, avoid: &str, assuming: Option<&MultiHop>, max_configs: usize) -> Result<Option<LoopTrace>> {
    let g = build(c, avoid, max_configs)?;
    let n = g.configs.len();
    // Configurations that can still reach `avoid`.
    let mut rev: Vec<Vec<usize>> = vec![vec![]; n];
    for (k, es) in g.edges.iter().enumerate() {
        for &(_, j) in es {
            rev[j].push(k);
        }
    }
    let mut live = g.hits.clone();
    let mut stack: Vec<usize> = (0..n).filter(|&k| live[k]).collect();
    while let Some(j) = stack.pop() {
        for &k in &rev[j] {
            if !live[k] {
                live[k] = true;
                stack.push(k);
            }
        }
    }
    for k in 0..n {
        if live[k] {
            continue;
        }
        if let Some(m) = assuming {
            if !entails(&g.configs[k].1, m, c)? {
                continue;
            }
        }
        let Some(cycle) = shortest_cycle(&g, k) else { continue };
        let mut prefix = Vec::new();
        let mut cur = k;
        while let Some((p, ti)) = g.parent[cur] {
            prefix.push(step(c, ti));
            cur = p;
        }
        prefix.reverse();
        return Ok(Some(LoopTrace {
            prefix,
            cycle: cycle.into_iter().map(|ti| step(c, ti)).collect(),
            accumulated: g.configs[k].1.clone(),
        }));
    }
    Ok(None)
}

fn shortest_cycle(g: &Graph, k: usize) -> Option<Vec<usize>> {
    let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut queue = VecDeque::from([k]);
    while let Some(x) = queue.pop_front() {
        for &(ti, y) in &g.edges[x] {
            if g.configs[y].1 != g.configs[k].1 {
                continue;
            }
            if y == k {
                let mut path = vec![ti];
                let mut cur = x;
                while cur != k {
                    let (p, t) = prev[&cur];
                    path.push(t);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            if let std::collections::hash_map::Entry::Vacant(e) = prev.entry(y) {
                e.insert((x, ti));
                queue.push_back(y);
            }
        }
    }
    None
}

/// Shortest run to a state whose rendering contains `pattern`.
pub fn find_path_to(c: &Clts, pattern: &str) -> Option<Vec<TraceStep>> {
    let out = out_index(c);
    let mut prev: Vec<Option<usize>> = vec![None; c.len()];
    let mut seen = vec![false; c.len()];
    seen[c.initial] = true;
    let mut queue = VecDeque::from([c.initial]);
    while let Some(s) = queue.pop_front() {
        if c.states[s].to_string().contains(pattern) {
            let mut out = Vec::new();
            let mut cur = s;
            while let Some(ti) = prev[cur] {
                out.push(step(c, ti));
                cur = c.transitions[ti].src;
            }
            out.reverse();
            return Some(out);
        }
        for &ti in &out[s] {
            let t = &c.transitions[ti];
            if !seen[t.dst] {
                seen[t.dst] = true;
                prev[t.dst] = Some(ti);
                queue.push_back(t.dst);
            }
        }
    }
    None
}
