//! Numerical toolkit for a replicator-mutator population coupled to a
//! logistic resource, with subsidy control.

pub mod bifurcation;
pub mod control;
pub mod cycles;
pub mod equilibria;
pub mod error;
pub mod export;
pub mod flow;
pub mod lienard;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod roots;

pub use error::{Error, ErrorFamily, Result};
pub use model::{PayoffPair, State, SystemParams};
