//! Shared inputs for the engine benchmarks.

use rrbpt_core::{parse, Specification};

pub const ROUTING: &str = include_str!("../../cli/examples/routing_revised.rbpt");
pub const DELIVERY: &str = include_str!("../../cli/examples/spec_delivery.rbpt");

pub fn routing() -> Specification {
    parse(ROUTING).expect("bundled fixture parses")
}

pub fn delivery() -> Specification {
    parse(DELIVERY).expect("bundled fixture parses")
}
