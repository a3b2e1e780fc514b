//! The disinformation-war case study.
//!
//! A public-health defender invests in prevention (`d1`) and, once a
//! disinformation attack of intensity `a2` is recognized to degree
//! `theta1`, in a vaccination campaign (`d2`). The attacker first invests
//! in its campaign (`a1`). `theta2` counts unvaccinated infected persons.
//! [`CaseParams`] holds the defender's assessments and the bands of its
//! random model of the attacker; [`targets`] turns them into the four
//! augmented problems the solver reduces.

mod attacker;
mod params;
pub mod targets;

use thiserror::Error;

pub use attacker::{draw_attacker_instance, mu_d2, AttackerDraw};
pub use params::{beta_shapes, health_cost, CaseParams, Theta1Params};

#[derive(Debug, Error)]
pub enum DisinfoError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("utility is not strictly positive: {0}")]
    Positivity(String),
}
