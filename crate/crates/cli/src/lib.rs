//! Record types, renderers and command bodies behind the `prophetcomp` binary.

pub mod commands;
pub mod distspec;
pub mod output;
