//! Fixtures shared by the benchmarks in `benches/`.

use monotony_core::{parse_protocol, Protocol};

pub const WOO_LAM: &str = include_str!("../../core/protocols/woo_lam.proto");
pub const WOO_LAM_CLEAR: &str = include_str!("../../core/protocols/woo_lam_clear.proto");

pub fn woo_lam() -> Protocol {
    parse_protocol(WOO_LAM).expect("bundled protocol parses")
}

pub fn woo_lam_clear() -> Protocol {
    parse_protocol(WOO_LAM_CLEAR).expect("bundled protocol parses")
}
