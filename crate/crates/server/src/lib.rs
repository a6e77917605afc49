//! Chat service, REPL and evaluation front end for the concierge engine.
//!
//! [`service::ChatService`] owns the sessions and serializes turns per
//! session; [`http::router`] exposes it as a JSON API; [`config`] turns
//! command-line options into an engine.

pub mod config;
pub mod http;
pub mod llm_client;
pub mod service;
