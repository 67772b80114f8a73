//! Seeded experiment runners behind the `rff` binary.
//!
//! Each command turns a [`RunConfig`] into a [`Report`], a CSV table whose
//! leading `#` lines echo the resolved configuration. Identical configs give
//! byte-identical output.

pub mod config;
pub mod experiments;
pub mod model;
pub mod report;

pub use config::{Command, RunConfig, SamplerKind};
pub use experiments::{run, write_outputs, RunOutput};
pub use model::RffModel;
pub use report::{Cell, Report};
