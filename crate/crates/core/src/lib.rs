//! Code evolution analysis for Git repositories.
//!
//! The pipeline samples a repository's first-parent history at yearly or
//! monthly boundaries, parses every sampled snapshot with a tree-sitter
//! grammar, runs a registry of metrics over each parsed snapshot and exports
//! the resulting time series as CSV and as a self-contained HTML report.
//!
//! ```no_run
//! use evolens::{builtin, engine::{self, AnalysisConfig}, repo, report, sampler::DateUnit, cst::Language};
//!
//! # fn main() -> anyhow::Result<()> {
//! let sources = repo::resolve_sources(&repo::RepoInput::new("."), &repo::default_workspace())?;
//! let registry = builtin::builtin_set(Language::Python).into_registry()?;
//! let config = AnalysisConfig::new(repo::RepoInput::new("."), Language::Python, DateUnit::Year);
//! for handle in &sources.handles {
//!     let table = engine::evaluate(&config, &registry, handle)?;
//!     std::io::Write::write_all(&mut std::io::stdout(), &report::to_csv(&table))?;
//! }
//! # Ok(())
//! # }
//! ```

pub mod builtin;
pub mod cli;
pub mod cst;
pub mod engine;
pub mod repo;
pub mod report;
pub mod sampler;

pub use cst::{CstNode, Language, ParsedCommit, ParsedFile};
pub use engine::{EvolutionTable, MetricDef, MetricKind, MetricRegistry, MetricValue};
pub use repo::{CommitRef, FileBlob, RepositoryHandle};
pub use sampler::{CommitSample, DateUnit, SamplingWindow};
