//! Generation and repair of JML-style specifications.
//!
//! A chat model proposes clauses in a feedback loop with a verifier; clause
//! sets that never verify are repaired by operator mutation and a
//! verify-and-replace loop.

pub mod config;
pub mod llm;
pub mod mutation;
pub mod pipeline;
pub mod repair;
pub mod report;
pub mod spec;
pub mod verifier;

pub use config::{ConfigError, PipelineConfig};
pub use llm::{
    extract_specs, run_conversation, ChatClient, ChatMessage, ConversationOutcome, ConversationTranscript,
    EndpointConfig, ScriptedClient,
};
pub use mutation::{enumerate_variants, select_by_heuristic, Family, MutationKind, Variant, WeightTable};
pub use pipeline::{run_batch, run_pipeline, PipelineContext, ProgramInput};
pub use repair::{mutation_based_gen, RepairConfig, RepairError, SelectionState, Strategy};
pub use report::{PipelineOutcome, ProgramReport, Summary};
pub use spec::{
    extract_annotations, instrument, parse_clause, parse_expr, AnnotatedProgram, ClauseId, ClauseKind,
    Phase, ProgramAnchor, SpecClause, SpecExpr, TraceRecord, Value,
};
pub use verifier::{
    FailureCategory, FailureReport, MockVerifier, Outcome, TraceVerifier, Verifier, VerifierVerdict,
};
