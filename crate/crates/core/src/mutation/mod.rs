//! Operator mutation of template clauses and weighted variant selection.

pub mod family;
pub mod operators;

pub use family::{
    enumerate_variants, score_variant, select_by_heuristic, select_random, select_random_with,
    Family, KindCounts, Variant, WeightTable, DEFAULT_VARIANT_CAP,
};
pub use operators::{
    apply_choice, apply_choices, enumerate_sites, replacements, MutationChoice, MutationError,
    MutationKind, MutationSite, OpToken, Replacement,
};
