//! Hierarchical cooperation: regimes, recursive cluster sizing, three-phase
//! scheduling and throughput bookkeeping.

mod plan;
mod regime;
mod simulate;

pub use plan::{plan_hierarchy, HierarchyPlan, PhaseSchedule, PlanLevel, SchemeConstants};
pub use regime::{
    classify_regime, cluster_area_monomial, exponent_after, next_exponent, r3_threshold_exponent,
    r3a_cluster_monomial, Monomial, Regime, RegimeLabel,
};
pub use simulate::{
    fit_exponent, random_traffic, simulate_throughput, split_groups, tdma_baseline, tdma_pairs, write_sweep_csv,
    RateModel, SweepRow, ThroughputReport, SWEEP_HEADER,
};
