//! Fixtures shared by the benchmarks.

use losnet_core::mimo::{random_los_link, MimoLink};
use losnet_core::oscillatory::{lemma5_family, PhaseIntegrand};
use losnet_core::scheme::{plan_hierarchy, HierarchyPlan, SchemeConstants};
use losnet_core::{NodePlacement, Rect};

/// Facing-cluster link with `m` nodes per side at `A_c / d = 32`, `rho = 10`.
pub fn link(m: usize) -> MimoLink {
    let d = 200.0;
    random_los_link(m, 32.0 * d, d, 10.0, 1, 0).expect("valid link parameters")
}

/// First integrand of the linear-phase family.
pub fn integrand() -> PhaseIntegrand {
    lemma5_family(1, 1).remove(0)
}

/// One-level plan and uniform placement with `A0 = n^3`.
pub fn scheme_fixture(n: usize) -> (HierarchyPlan, NodePlacement) {
    let a0 = (n as f64).powi(3);
    let plan = plan_hierarchy(n, a0, 1, SchemeConstants::default()).expect("feasible plan");
    let domain = Rect::square(a0.sqrt()).expect("positive side");
    let mut rng = losnet_core::rng::substream(1, "bench-placement");
    let placement = losnet_core::geometry::place_uniform(n, domain, &mut rng).expect("placement");
    (plan, placement)
}
