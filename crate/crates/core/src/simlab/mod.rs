//! Generative models for the simulation studies, value and error oracles,
//! and the Monte Carlo harness that assembles summary tables.
//!
//! Covariates and noise are independent `N(0, 0.5²)`. Outcome means are
//! linear in `(1, x)` with a treatment interaction; the clinician picks the
//! optimal action with a constant or covariate-dependent probability.
//! Every replication draws from its own RNG stream, so results do not depend
//! on scheduling or thread count.

mod harness;
mod scenario;
mod value;

pub use harness::{
    cell_key, fit_with_plan, median, replicate_table, describe_table, run_cell, run_replication, run_test_cell,
    run_test_replication, ColumnStyle, McSummary, MetricSummary, RepMetrics, ReplicationSettings, SummaryRow,
    TableId, DEFAULT_SIZES, POWER_THETAS,
};
pub use scenario::{
    value_mc, FitPlan, HiddenTruth, OutcomeModel, PlanMethod, Scenario, ScenarioId, TestSample, TrueBehavior,
    Y3Reading,
};
pub use value::{value_observational, FoldValue, ObservationalValue};

#[cfg(test)]
mod tests;
