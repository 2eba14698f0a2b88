/*!
Command-line front end for the network toolkit: six tasks that turn a TOML
network description into correlation matrices, topology reconstructions,
optimizer traces, mitigation comparisons, noise sweeps, and source censuses.

Every task writes CSV tables plus one structured TOML report into the output
directory, and every output is byte-identical for a fixed invocation and
seed.
*/

pub mod doc;
pub mod spec;
pub mod tasks;

pub use spec::{Cli, ExperimentSpec};

/// Maps an error to the process exit code: configuration and usage problems
/// exit 1, broken structural assumptions exit 2, numerical failures exit 3.
pub fn exit_code(err: &qtopo_core::Error) -> i32 {
    use qtopo_core::Error;
    match err {
        Error::Config(_) | Error::Dimension(_) | Error::InvalidArgument(_) => 1,
        Error::AssumptionViolated(_) => 2,
        Error::Numeric(_) => 3,
    }
}
