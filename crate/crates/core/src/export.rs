//! DOT and JSON renderings of an explored system.

use std::fmt::Write;

use serde_json::{json, Value};

use crate::sos::Clts;

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

pub fn to_dot(c: &Clts) -> String {
    let mut s = String::from("digraph clts {\n  rankdir=LR;\n  node [shape=ellipse, fontsize=10];\n");
    for (i, st) in c.states.iter().enumerate() {
        let shape = if i == c.initial { ", peripheries=2" } else { "" };
        let _ = writeln!(s, "  s{i} [label=\"{}\"{shape}];", escape(&st.to_string()));
    }
    for t in &c.transitions {
        let _ = writeln!(
            s,
            "  s{} -> s{} [label=\"{} / {}\"];",
            t.src,
            t.dst,
            escape(&t.label.constraint.to_string()),
            escape(&t.label.action.to_string())
        );
    }
    s.push_str("}\n");
    s
}

pub fn to_json(c: &Clts) -> Value {
    let transitions: Vec<Value> = c
        .transitions
        .iter()
        .map(|t| {
            let lits: Vec<String> = t.label.constraint.links().map(ToString::to_string).collect();
            json!({
                "src": t.src,
                "constraint": lits,
                "action": t.label.action.to_string(),
                "dst": t.dst,
            })
        })
        .collect();
    json!({
        "states": c.states.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "initial": c.initial,
        "transitions": transitions,
    })
}
