//! Datasets, the blockmodel generator and result tables.

mod dataset;
mod features;
mod results;
mod sbm;

pub use dataset::{load_dataset, save_dataset, Dataset};
pub use features::FeatureMatrix;
pub use results::{read_results, write_results, BudgetRow, CsvRecord, MarginRow, TrialRow};
pub use sbm::{generate_sbm, SbmConfig};
