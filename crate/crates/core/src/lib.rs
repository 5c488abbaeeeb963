//! Mining toolkit for @-mention call networks in GitHub issue and pull
//! request discussions.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`ingest`] normalizes fixture or API data into an on-disk store.
//! * [`mention_graph`] extracts @-mentions and classifies them as replies or calls.
//! * [`focus_metrics`] computes KL-divergence specialization (OSS, ISS, DAF)
//!   plus degree and responsiveness counts.
//! * [`szz`] links fixing commits to issues and blames their deleted lines.
//! * [`features`] applies the observation/response split and builds model rows.
//! * [`count_models`] fits logistic, Poisson, truncated Poisson and negative
//!   binomial GLMs, the hurdle composition, VIF screening and BH adjustment.
//! * [`xeval`] runs the cross-project prediction protocol and heatmap export.
//! * [`report`] wires everything together and writes `report.md`.
//!
//! Data-parallel loops go through [`exec::Execution`], which uses rayon when
//! the `parallel` feature is enabled and falls back to sequential iteration
//! otherwise.

pub mod count_models;
pub mod error;
pub mod exec;
pub mod features;
pub mod focus_metrics;
pub mod ingest;
pub mod mention_graph;
pub mod report;
pub mod sim;
pub mod szz;
pub mod timewin;
pub mod xeval;

pub use error::{Error, Result};
pub use exec::Execution;
