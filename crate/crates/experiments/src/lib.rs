//! Monte Carlo harness, CSV ingestion and the command-line front end for
//! `garch-ksample`.

pub mod config;
pub mod data;
pub mod diag;
pub mod study;

pub use config::{ConfigError, Dgp, GroupDist, StudyConfig};
pub use data::{ingest_csv, write_series_csv, Column, IngestOptions, IngestedSeries, SeriesKind};
pub use study::{render_table, run_study, CellResult, Method, StudyReport};
