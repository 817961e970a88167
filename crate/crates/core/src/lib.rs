//! Environment for LLM-driven protein design through RosettaScripts.
//!
//! The crate covers the composition-penalty language ([`penalty`]), agent
//! action parsing ([`action`]), XML protocol instantiation ([`script`]),
//! execution backends ([`backend`]), trajectory bookkeeping
//! ([`trajectory`]), the agent loop ([`agent`]), and evaluation statistics
//! ([`evalkit`]).

pub mod action;
pub mod agent;
pub mod backend;
pub mod config;
pub mod evalkit;
pub mod penalty;
pub mod residue;
pub mod script;
pub mod trajectory;
