//! File formats: features, links, models, ground truth, and reports.
//!
//! Binary formats are little-endian with 64-bit reals and round-trip
//! bit-exactly; loaders turn every malformed input into a positioned
//! error instead of crashing.

mod bytes;
mod features;
mod links;
mod model_file;
mod report;
mod truth;

pub use bytes::write_atomic;
pub use features::{load_features, save_features, save_features_csv, FEATURES_MAGIC, FEATURES_VERSION};
pub use links::{load_links, save_links};
pub use model_file::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use report::export_report;
pub use truth::{load_truth, save_truth, TRUTH_MAGIC, TRUTH_VERSION};
