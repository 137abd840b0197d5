use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rrbpt_core::{
    check_bisim, expand_parallel, explore, export, find_loop_without, find_path_to, linearize_node, normalize,
    parse, parse_constraint, parse_multihop, refines_under, validate_spec, Clts, Constraint, CoreError, Mode, Specification, Term, TraceStep,
};
use serde_json::json;

// Output errors (a closed pipe, usually) are ignored rather than turned into panics.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! put {
    ($e:expr) => {{
        let _ = write!(std::io::stdout().lock(), "{}", $e);
    }};
}

#[derive(Parser)]
#[command(name = "rrbpt", version, about = "Explore, compare and refine reliable broadcast network models")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a model file.
    Check { file: PathBuf },
    /// Explore a definition and print its transition system.
    Lts {
        file: PathBuf,
        name: String,
        #[arg(long, default_value_t = rrbpt_core::sos::DEFAULT_MAX_STATES)]
        max_states: usize,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
    },
    /// Compare two definitions.
    Bisim {
        file: PathBuf,
        left: String,
        right: String,
        #[arg(long, default_value = "rbr")]
        mode: Mode,
        #[arg(long, default_value_t = rrbpt_core::sos::DEFAULT_MAX_STATES)]
        max_states: usize,
        /// Print the relation and the root coverage.
        #[arg(long)]
        witness: bool,
    },
    /// Check that an implementation refines a multi-hop specification.
    Refine {
        file: PathBuf,
        implementation: String,
        specification: String,
        /// Start from this accumulated one-hop constraint instead of `{}`.
        #[arg(long)]
        under: Option<String>,
        #[arg(long, default_value_t = rrbpt_core::sos::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
    /// Rewrite a definition towards a sum of prefixed terms: a node is
    /// linearised, a finite-state term normalised, and a composition whose
    /// normal form is out of reach is expanded by one step.
    Simplify {
        file: PathBuf,
        name: String,
        /// Print every axiom application.
        #[arg(long)]
        trace: bool,
    },
    /// Search the transition system for a path.
    Trace {
        file: PathBuf,
        name: String,
        /// Find a loop from which this action can no longer happen.
        #[arg(long, conflicts_with = "to")]
        loop_without: Option<String>,
        /// Only accept loops whose topology entails this multi-hop constraint, e.g. "{A=>B, B=>A}".
        #[arg(long, requires = "loop_without")]
        assuming: Option<String>,
        /// Find the shortest path to a state whose rendering contains this text.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = rrbpt_core::sos::DEFAULT_MAX_STATES)]
        max_states: usize,
    },
}

fn load(file: &Path) -> anyhow::Result<Specification> {
    let src = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    parse(&src).map_err(|e| match e {
        CoreError::Parse { line, col, msg } => anyhow!("{}:{line}:{col}: {msg}", file.display()),
        e => anyhow!("{}: {e}", file.display()),
    })
}

fn lookup(spec: &Specification, name: &str) -> anyhow::Result<Term> {
    spec.lookup(name).cloned().ok_or_else(|| anyhow!("no definition named `{name}`"))
}

fn lts(spec: &Specification, name: &str, max: usize) -> anyhow::Result<Clts> {
    Ok(explore(&lookup(spec, name)?, spec, max)?)
}

fn print_steps(steps: &[TraceStep], c: &Clts) {
    for s in steps {
        say!("  s{} --({}, {})--> s{}", s.src, s.label.constraint, s.label.action, s.dst);
    }
    if let Some(last) = steps.last() {
        say!("  s{} = {}", last.dst, c.states[last.dst]);
    }
}

/// `Ok(true)` for a positive answer.
fn run(cmd: Cmd) -> anyhow::Result<bool> {
    match cmd {
        Cmd::Check { file } => {
            let spec = load(&file)?;
            let problems = validate_spec(&spec);
            for v in &problems {
                say!("{}: {v}", file.display());
            }
            if problems.is_empty() {
                say!(
                    "{}: ok ({} addresses, {} messages, {} definitions)",
                    file.display(),
                    spec.universe.locs.len(),
                    spec.universe.msgs.len(),
                    spec.defs.len()
                );
            }
            Ok(problems.is_empty())
        }
        Cmd::Lts { file, name, max_states, format } => {
            let spec = load(&file)?;
            let c = lts(&spec, &name, max_states)?;
            match format {
                Format::Dot => put!(export::to_dot(&c)),
                Format::Json => say!("{}", serde_json::to_string_pretty(&export::to_json(&c))?),
            }
            Ok(true)
        }
        Cmd::Bisim { file, left, right, mode, max_states, witness } => {
            let spec = load(&file)?;
            let c1 = lts(&spec, &left, max_states)?;
            let c2 = lts(&spec, &right, max_states)?;
            let v = check_bisim(&c1, &c2, mode)?;
            say!(
                "{left} {} {right} in mode {mode} ({} and {} states)",
                if v.related { "is related to" } else { "is NOT related to" },
                c1.len(),
                c2.len()
            );
            if let Some(cx) = &v.counterexample {
                say!(
                    "system {} state `{}` moves ({}, {}) to `{}`; `{}` cannot answer",
                    cx.side, cx.state, cx.challenge.constraint, cx.challenge.action, cx.target, cx.other_state
                );
                if let Some(u) = &cx.uncovered {
                    say!("uncovered topology: {u}");
                }
            }
            if witness && v.related {
                say!("{}", serde_json::to_string_pretty(&json!({
                    "pairs": v.witness,
                    "root_coverage": v.root_coverage,
                }))?);
            }
            Ok(v.related)
        }
        Cmd::Refine { file, implementation, specification, under, max_states } => {
            let spec = load(&file)?;
            let c = lts(&spec, &implementation, max_states)?;
            let s = lookup(&spec, &specification)?;
            let acc = match under {
                Some(u) => parse_constraint(&u, &spec.universe)?,
                None => Constraint::empty(),
            };
            let v = refines_under(&c, &s, &acc, &spec)?;
            say!(
                "{implementation} {} {specification} ({} triples)",
                if v.refines { "refines" } else { "does NOT refine" },
                v.triples
            );
            if let Some(r) = &v.reason {
                say!("reason: {r}");
            }
            for (i, st) in v.counterexample.iter().enumerate() {
                let via = st.via.as_ref().map(|l| format!(" via ({}, {})", l.constraint, l.action)).unwrap_or_default();
                say!("{:>3}.{via} s{} under {} against {}", i, st.impl_state, st.accumulated, st.spec_term);
            }
            Ok(v.refines)
        }
        Cmd::Simplify { file, name, trace } => {
            let spec = load(&file)?;
            let t = lookup(&spec, &name)?;
            let body = match &t {
                Term::Name(n) => lookup(&spec, n)?,
                _ => t.clone(),
            };
            let (nf, tr) = match &body {
                Term::Deploy(..) => linearize_node(&body, &spec)?,
                _ => match normalize(&body, &spec) {
                    Ok(nf) => (nf, Default::default()),
                    Err(CoreError::NotFiniteState(_) | CoreError::NormalFormTooLarge(_)) => expand_parallel(&body, &spec)?,
                    Err(e) => return Err(e.into()),
                },
            };
            say!("{name} = {nf}");
            if trace {
                put!(tr.render());
            }
            Ok(true)
        }
        Cmd::Trace { file, name, loop_without, assuming, to, max_states } => {
            let spec = load(&file)?;
            let c = lts(&spec, &name, max_states)?;
            if let Some(avoid) = loop_without {
                let m = assuming.map(|a| parse_multihop(&a, &spec.universe)).transpose()?;
                let Some(lt) = find_loop_without(&c, &avoid, m.as_ref(), 50 * max_states)? else {
                    say!("no loop avoiding {avoid}");
                    return Ok(false);
                };
                say!("prefix ({} steps):", lt.prefix.len());
                print_steps(&lt.prefix, &c);
                say!("loop ({} steps):", lt.cycle.len());
                print_steps(&lt.cycle, &c);
                say!("assumed topology: {}", lt.accumulated);
                return Ok(true);
            }
            let pattern = to.ok_or_else(|| anyhow!("give --loop-without or --to"))?;
            match find_path_to(&c, &pattern) {
                Some(p) => {
                    say!("path ({} steps):", p.len());
                    print_steps(&p, &c);
                    if p.is_empty() {
                        say!("  s{} = {}", c.initial, c.states[c.initial]);
                    }
                    Ok(true)
                }
                None => {
                    say!("no reachable state matches `{pattern}`");
                    Ok(false)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
