//! Sizing a shared EV fleet and its deposit charging stations inside an
//! energy community on a radial low-voltage network.

pub mod config;
pub mod domain;
pub mod error;
pub mod formulation;
pub mod io;
pub mod kpi;
pub mod oracle;
pub mod report;
pub mod results;
pub mod scenario;
pub mod synth;

pub use error::{CoreError, Result};
