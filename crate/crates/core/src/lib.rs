//! Steady-state analysis, cutset majorization checks, structure-preserving
//! reduction and discrete-event simulation for open Jackson networks.

pub mod analytics;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod perturb;
pub mod reduce;
pub mod sim;

pub use error::{Error, Result};
pub use model::{NetworkModel, Partition, QueueId};
