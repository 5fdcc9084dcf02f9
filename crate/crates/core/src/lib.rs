//! Auditable feature selection driven by a four-role LLM debate.
//!
//! The crate is organised the way a run flows:
//!
//! * [`data`] loads tabular data and applies the preprocessing sequence
//!   (constant-column cleaning, collinearity pruning, standardization,
//!   majority undersampling, stratified split).
//! * [`features`] computes the per-feature statistics handed to the Refiner.
//! * [`llm`] is the chat-completion gateway (Ollama HTTP or a scripted backend).
//! * [`debate`] runs Initiator → Refiner → Challenger → Judge per feature and
//!   aggregates the final score.
//! * [`select`] ranks features, cuts top-n subsets, and provides the
//!   single-prompt and PCA baselines.
//! * [`eval`] trains logistic regression and random forest models on each
//!   subset and measures accuracy, macro one-vs-rest AUC and timings.
//! * [`stats`] holds the paired t-test, Cohen's d and the ratio helpers.
//! * [`config`], [`audit`], [`report`] and [`pipeline`] tie everything into
//!   the command-line workflow.
//!
//! Data-parallel loops (tree fitting, per-feature statistics, per-feature
//! debates, evaluation grids) use rayon when the `parallel` feature is on and
//! fall back to plain iterators otherwise.

pub mod audit;
pub mod config;
pub mod data;
pub mod debate;
pub mod error;
pub mod eval;
pub mod features;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod report;
pub mod select;
pub mod stats;

pub use error::{Error, Result};
