//! Core engine for an explainable restaurant concierge.
//!
//! An utterance flows through [`parse`] (rule-based or model-backed semantic
//! parsing into predicate terms), [`commonsense`] (expanding vague preferences
//! into attribute values), [`dialog`] (state tracking and the choice between
//! asking and recommending), [`recommend`] (constraint search, justification,
//! relaxation) and finally [`nlg`]. [`session`] ties the steps together per
//! turn; [`eval`] scores parsers against annotated corpora.

pub mod commonsense;
pub mod dialog;
pub mod eval;
pub mod kb;
pub mod nlg;
pub mod parse;
pub mod recommend;
pub mod session;
pub mod terms;
