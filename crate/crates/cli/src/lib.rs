//! Front end of the `lqsense` binary: experiment configuration, output
//! formatting and one module per subcommand.

pub mod commands;
pub mod config;
pub mod failure;
pub mod output;
