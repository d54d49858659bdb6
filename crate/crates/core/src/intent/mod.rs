//! The `$Device (args)` control protocol and the JSON documents an LLM
//! returns: device catalogs and task plans.

mod catalog;
mod instruction;
mod plan;

pub use catalog::{
    catalog_from_value, parse_device_catalog, ArgKind, CatalogEntry, DeviceCatalog, DeviceFunction,
    CATALOG_SCHEMA_VERSION,
};
pub use instruction::{parse_instruction, render_instruction, Arg, ControlInstruction, ParseError};
pub use plan::{
    compile_plan, parse_task_plan, plan_from_value, Domain, PlanStep, StepKind, TaskPlan, ARM_DEVICE, HOME_DEVICES,
    PLAN_SCHEMA_VERSION, UAV_DEVICE,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One schema violation with the JSON path where it was found.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join_issues(v: &[SchemaIssue]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntentError {
    #[error("parse error {0}")]
    Parse(#[from] ParseError),
    #[error("invalid instruction: {0}")]
    InvalidInstruction(String),
    #[error("schema error: {}", join_issues(.0))]
    Schema(Vec<SchemaIssue>),
}
