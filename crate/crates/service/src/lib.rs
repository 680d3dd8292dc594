//! REPL and HTTP front ends for the talkchart editor.

pub mod api;
pub mod repl;
pub mod suggest;
