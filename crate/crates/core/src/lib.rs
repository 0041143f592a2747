//! Bipartite ranking from several binary labels.
//!
//! Two ways to train one scorer against `K` labels are covered end to end:
//! averaging per-label AUCs (loss aggregation, [`metrics::loss_agg_auc`]) and
//! aggregating the labels into an ordinal target first (label aggregation,
//! [`metrics::label_agg_auc`]). For each there are closed-form optimal
//! scorers ([`bayes`]), surrogate training ([`surrogate`]), an exhaustive
//! optimality oracle for small instance sets ([`oracle`]) and a bound on how
//! far the plain sum scorer can fall short ([`bound`]).
//!
//! ```
//! use rankagg::bayes::label_agg_bayes_scorer_sum;
//! use rankagg::metrics::{auc_report, LabelSource};
//! use rankagg::types::EtaTable;
//!
//! let eta = EtaTable::from_rows(&[vec![0.9, 0.2], vec![0.4, 0.8], vec![0.1, 0.1]])?;
//! let scorer = label_agg_bayes_scorer_sum(&eta);
//! let report = auc_report(scorer.table().unwrap(), LabelSource::Eta(&eta))?;
//! assert!(report.min > 0.5);
//! # Ok::<(), rankagg::Error>(())
//! ```
//!
//! The guide in `book/` walks through each piece; its code blocks run as
//! doctests of this crate.

pub mod bayes;
pub mod bound;
pub mod error;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod plot;
pub mod surrogate;
pub mod synthgen;
pub mod types;

pub use error::{Error, Result};
pub use metrics::{AucReport, LabelSource, PairwiseObjective};
pub use types::{
    Aggregator, CostMatrix, Dataset, EtaTable, InstanceSet, JointLabelModel, ObjectiveSpec, SampledLabels, Scorer,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/objectives.md")]
    mod objectives {}
    #[doc = include_str!("../../../book/src/scorers.md")]
    mod scorers {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/bound.md")]
    mod bound {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
