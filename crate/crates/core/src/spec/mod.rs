//! The specification language: expressions, clauses, annotation placement,
//! and evaluation against execution traces.

pub mod annotate;
pub mod clause;
pub mod eval;
pub mod expr;
pub mod parse;
pub mod trace;

pub use annotate::{
    anchors_in, extract_annotations, instrument, instrument_with_lines, AnnotationError, ExtractErrors,
    InstrumentError, Instrumented,
};
pub use clause::{render_clause, AnnotatedProgram, Clause, ClauseId, ClauseKind, ProgramAnchor, SpecClause};
pub use eval::{eval_bool, eval_expr, extract_bounds, Bindings, EvalError, Interval, Phase, TraceRecord, Value};
pub use expr::{BinOp, QuantKind, SpecExpr, UnOp};
pub use parse::{parse_clause, parse_expr, ParseError};
