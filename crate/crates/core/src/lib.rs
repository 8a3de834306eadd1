//! Quantal response equilibria of multi-agent influence diagrams (MAIDs),
//! their exact sensitivities to game parameters, and the differential value
//! of information built on top of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod inference;
pub mod info;
pub mod lp;
pub mod maid;
pub mod qre;
pub mod scenarios;
pub mod sensitivity;

pub use analysis::{BranchSelector, MetricChoice, ScanSpec};
pub use error::{Error, Result};
pub use geometry::{ConeReport, FisherFamily, Metric};
pub use inference::{conditional_expected_utility, expected_utility, joint_distribution, Evaluator, JointTable};
pub use info::{Channel, Units};
pub use maid::{parse_maid, Maid, ParamPoint, StrategyProfile};
pub use qre::{Branch, Equilibrium, PathAxis, SolveOptions, TraceOptions};
pub use sensitivity::Statistic;
