//! Library surface of the command-line driver, exposed so integration
//! tests can call commands directly.

pub mod commands;
pub mod config;
pub mod pareto;
pub mod summary;

/// Process exit code for an error: 3 for numeric failures, 2 for
/// configuration, schema, and everything else.
pub fn exit_code(error: &fairlens::Error) -> i32 {
    match error {
        fairlens::Error::Numeric(_) => 3,
        _ => 2,
    }
}
