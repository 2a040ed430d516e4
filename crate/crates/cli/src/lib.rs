//! Batch harness around `dpms-core`: configuration, CSV ingestion, the
//! simulation data generator and the `dpms` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod sim;

pub use commands::{run_command, write_error_record, RunReport};
pub use config::{Command, MechanismChoice, Overrides, PriorChoice, RunConfig};
pub use data::{ingest_csv, read_table, rescale_to_unit_box, ColumnSpec, Ingested, RescaleRecord};
pub use error::{CliError, CliResult};
pub use sim::{generate_sim_dataset, SimDataset, SimStudyConfig};
