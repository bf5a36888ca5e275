//! Command-line pipeline and HTTP service around `selftrip-core`.

pub mod config;
pub mod pipeline;
pub mod serve;

use selftrip_core::{Error, ErrorKind};

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    }
}
