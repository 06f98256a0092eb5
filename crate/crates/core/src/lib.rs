//! Harvest scholarly works, score them against a seven-question
//! climate-innovation rubric with a language model or human raters, and rank
//! them by commercialisation potential.
//!
//! The pipeline stages map onto modules:
//!
//! * [`openalex`] builds works queries, pages through results and
//!   reconstructs abstracts from inverted indexes.
//! * [`corpus`] persists works and draws seeded samples spiked with
//!   positive controls.
//! * [`evaluator`] builds prompts, calls a [`evaluator::CompletionProvider`]
//!   and parses structured answers into [`evaluator::ScoreVector`]s.
//! * [`survey`] ingests human survey responses.
//! * [`stats`] computes mean scores, Cohen's kappa and Pearson correlation.
//! * [`ranking`] filters on Q1, fits logistic weights and ranks works.
//! * [`reporting`] produces keyword summaries and plot-ready tables.
//! * [`pipeline`] wires the stages together through files.

pub mod corpus;
pub mod evaluator;
pub mod openalex;
pub mod pipeline;
pub mod question;
pub mod ranking;
pub mod reporting;
pub mod retry;
pub mod stats;
pub mod survey;
pub mod synthetic;

pub use question::Question;
