//! Verification workbench for reliable restricted broadcast network models.
//!
//! Terms are parsed with [`parse`], explored into constrained labelled
//! transition systems with [`explore`], compared with [`check_bisim`] and
//! checked against multi-hop specifications with [`refines`].

pub mod bisim;
pub mod constraint;
pub mod error;
pub mod export;
pub mod parse;
pub mod refine;
pub mod rewrite;
pub mod sos;
pub mod term;
pub mod trace;
pub mod universe;
pub mod validate;

pub use bisim::{angle_counterparts, check_bisim, check_semi_branching_coincidence, verify_relation, BisimVerdict, Mode};
pub use constraint::{
    constraint_satisfies, denotation, extract_constraint, grounded_denotation, is_partitioning, topology_satisfies,
    well_formed, Addr, Constraint, HopLit, Link, MultiHop, Polarity, TopoSet, Topology,
};
pub use error::{CoreError, Result};
pub use parse::{parse, parse_constraint, parse_multihop, parse_process, parse_term};
pub use refine::{refines, refines_under, tactic_iota, tactic_tau, RefinementStep, RefinementVerdict, Subgoal};
pub use rewrite::{apply_axiom, expand_parallel, linearize_node, message_set, normalize, read_back, Axiom, RewriteStep, RewriteTrace};
pub use sos::{complete_receives, derive_transitions, explore, Clts, Engine, Transition};
pub use term::{is_guarded, Action, DefKind, Definition, Label, MsgSet, Specification, Term};
pub use trace::{find_loop_without, find_path_to, LoopTrace, TraceStep};
pub use universe::{Universe, MAX_LOCS};
pub use validate::{validate_process, validate_spec, validate_term, Violation};
