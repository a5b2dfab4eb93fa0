//! A small declarative language for describing tasks and runs.
//!
//! ```text
//! set s = bell_basis(2)          # the four Bell states
//! task t = subset(s, k=2)
//! simulate t protocol bell32
//! certify t cut auto             # or `cut A:B`, or `cut all`
//! ```
//!
//! Families: `bell_basis(2)`, `ges_basis(d)`, `ghz3_basis`, `ghz4_basis` and
//! `states[...]` over the names `B1`..`B4`, `G1`..`G8`, `G4_1`..`G4_16`,
//! `W{d}_{a}_{b}` (Weyl-generated maximally entangled states) and `K` plus
//! bits (computational kets on qubits `A`, `B`, ...).

mod exec;
mod parser;
pub mod report;

pub use exec::{
    execute, ExecError, ExecErrorKind, ExecOptions, Report, RunFilter, MAX_SIMULATION_AMPLITUDES,
};
pub use parser::{
    parse, serialize, CutSpec, Family, ParseError, ParseErrorKind, Script, Span, StateName,
    Statement, StmtKind,
};
pub use report::{format_number, Value};
