//! Evolutionary design of budgeted, sequential classifiers with a reject
//! option.
//!
//! A solution assigns every feature to one of an ordered sequence of stages.
//! Each stage runs a logistic-regression model over all features acquired so
//! far; inputs exit at the first confident stage or are rejected after the
//! last one. Solutions are scored on coverage, selective accuracy and mean
//! acquisition cost, and searched with a rank-scalarized genetic algorithm.
//! Small instances can be solved exactly by enumeration.

pub mod chromosome;
pub mod classifier;
pub mod data;
pub mod error;
pub mod evolution;
pub mod objectives;
pub mod oracle;

pub use chromosome::{ordered_partition_count, search_space_size, Chromosome, SearchSpaceParams};
pub use error::{Error, Result};
