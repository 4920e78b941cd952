//! Group fairness metrics computed from per-group prediction tables.

mod metrics;
mod outcomes;
mod report;

pub use metrics::{acc_gap, eo_binary, eo_multigroup, sp_binary, sp_multigroup, AccGap, PairGap};
pub use outcomes::{tabulate, GroupCounts, GroupId, GroupedOutcomes, Ratio};
pub use report::{fairness_reports, write_reports_csv, FairnessReport, Metric, Violations, ALL_METRICS};
