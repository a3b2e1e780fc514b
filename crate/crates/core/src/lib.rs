//! Adversarial risk analysis for bi-agent influence diagrams, solved by
//! augmented probability simulation.

pub mod baid;
pub mod disinfo;
pub mod dist;
pub mod engine;
pub mod metamodel;
pub mod oracle;
pub mod pipeline;
pub mod rng;

pub use baid::{Agent, Baid, BaidError, Domain, Node, NodeId, NodeKind, Owner};
