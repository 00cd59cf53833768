pub mod channel_stats;
pub mod em_network;
pub mod error;
pub mod evaluator;
pub mod exec;
pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod optimizer;
pub mod quadrature;
pub mod ris_response;
pub mod scenario;

pub use error::{Error, Result};
pub use exec::Exec;
