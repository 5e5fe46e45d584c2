//! Configuration parsing, output formats, and the command layer behind the
//! `invnet` binary.

pub mod commands;
pub mod config;
pub mod digest;
pub mod formats;
pub mod manifest;
pub mod sweep;
