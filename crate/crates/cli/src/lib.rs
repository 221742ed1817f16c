//! The `qmcdm` command line and HTTP service.

pub mod api;
pub mod inputs;
pub mod output;
