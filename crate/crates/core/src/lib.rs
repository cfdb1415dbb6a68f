//! Retrospective score tests for rare-variant association in case-control
//! studies, with known or interval-specified disease prevalence.

pub mod data;
pub mod cli;
pub mod error;
pub mod io;
pub mod logistic;
pub mod procedures;
pub mod pvalue;
pub mod score;
pub mod simulation;
pub mod variance;

pub use data::{CaseControlDataset, PrevalenceSpec, RawDataset};
pub use error::{Error, Result};
