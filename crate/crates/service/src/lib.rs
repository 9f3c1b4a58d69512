//! Operational surface of the dialogue engine: layered configuration, a
//! terminal chat loop, batch replay/scoring commands and an HTTP session API.

pub mod api;
pub mod chat;
pub mod commands;
pub mod config;
pub mod data;
pub mod store;
