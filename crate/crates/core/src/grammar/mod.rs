//! The meta-grammar prior over L-systems.

mod derivation;
mod enumerate;
mod meta;
mod parse;

pub use derivation::{
    proposal_logq, regenerate_subtree, sample_lsystem, sample_lsystem_where, sample_subtree, sample_tree,
    DerivationTree, Node, Regeneration, MAX_TREE_NODES, REJECTION_LIMIT,
};
pub use enumerate::{enumerate_support, min_yield_lengths, SUPPORT_LIMIT};
pub use meta::{Item, MetaGrammar, Production, RawItem, DEFAULT_GRAMMAR, DISTRACTOR_GRAMMAR, START};
pub use parse::{length_mass, log_prior, parse_all, rule_log_prior, Chart};
