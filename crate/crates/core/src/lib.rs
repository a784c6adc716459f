//! Data-variety-aware provisioning: estimate how much each portion of an
//! input contributes to an accumulative job's result, group portions by
//! efficiency, and pick a server type per group that meets a finishing-time
//! deadline at the lowest cost.
//!
//! The stages are independent modules wired together by [`pipeline`]:
//! [`corpus`] → [`sampling`] → [`classify`] → [`planner`] → [`simulate`].

pub mod classify;
pub mod corpus;
pub mod cost;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod planner;
pub mod report;
pub mod sampling;
pub mod scenario;
pub mod simulate;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    ClassKind, Catalog, DataPortion, ExecutionMode, Money, ProvisionPlan, ServerType, Slo, Strategy,
    VarietyClass,
};
