//! Recursive cluster sizing and per-level phase schedules.

use std::fmt::Write as _;

use num_rational::{BigRational, Rational64};

use super::regime::{check_b, classify_regime, exponent_after, next_exponent, to_f64, RegimeLabel};
use crate::error::{Error, Result};

/// Scheduling constants of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConstants {
    /// MIMO rate constant: a cluster round carries its bits in `1 / k3` slots.
    pub k3: f64,
    /// Inner-scheme constant: a cluster of `m` nodes sustains `k4 m^b` bits per slot.
    pub k4: f64,
    /// Quantizer bits per observation.
    pub q: u32,
    /// Charge phases 1 and 3 a 9-colour spatial reuse factor.
    pub reuse9: bool,
}

impl Default for SchemeConstants {
    fn default() -> Self {
        Self { k3: 1.0, k4: 1.0, q: 2, reuse9: false }
    }
}

impl SchemeConstants {
    pub fn with_q(q: u32) -> Self {
        Self { q, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if !(self.k3 > 0.0 && self.k3.is_finite() && self.k4 > 0.0 && self.k4.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate constants must be positive, got k3 = {}, k4 = {}",
                self.k3, self.k4
            )));
        }
        if self.q == 0 {
            return Err(Error::InvalidParameter("quantizer needs at least one bit".into()));
        }
        Ok(())
    }

    fn reuse(&self) -> f64 {
        if self.reuse9 {
            9.0
        } else {
            1.0
        }
    }
}

/// One level of a hierarchical plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanLevel {
    /// Recursion depth of this level; the top level has depth `h`.
    pub depth: usize,
    pub n: usize,
    pub a0: f64,
    /// Throughput exponent of the scheme run inside each cluster.
    pub b: Rational64,
    pub regime: RegimeLabel,
    /// Nodes per cluster, rounded down.
    pub m: usize,
    /// Unrounded cluster size.
    pub m_exact: f64,
    pub cluster_area: f64,
    /// MIMO group size, rounded down and capped at `m`.
    pub m_prime: usize,
    pub m_prime_exact: f64,
}

impl PlanLevel {
    /// Number of group rounds per cluster MIMO transfer.
    pub fn groups(&self) -> usize {
        self.m / self.m_prime
    }

    /// Inner-scheme rate of a cluster holding `m` nodes, `k4 min(m, sqrt(A_c))^b`.
    pub fn inner_rate(&self, m: usize, constants: &SchemeConstants) -> f64 {
        let dof = (m as f64).min(self.cluster_area.sqrt());
        constants.k4 * dof.powf(to_f64(self.b))
    }

    /// Slot counts of the three phases at this level.
    pub fn schedule(&self, constants: &SchemeConstants) -> PhaseSchedule {
        let r1 = self.inner_rate(self.m, constants);
        let m = self.m as f64;
        let (phase1, phase3) = if self.m == 1 {
            (0.0, 0.0)
        } else {
            let p1 = constants.reuse() * m * m / r1;
            (p1, p1 * f64::from(constants.q) / constants.k3)
        };
        let phase2 = self.n as f64 * self.groups() as f64 / constants.k3;
        PhaseSchedule { phase1, phase2, phase3, k3: constants.k3, k4: constants.k4, q: constants.q }
    }

    /// Closed-form throughput `n M / (phase1 + phase2 + phase3)` in exact arithmetic.
    pub fn closed_form_exact(&self, constants: &SchemeConstants) -> BigRational {
        let m = BigRational::from_integer(self.m.into());
        let n = BigRational::from_integer(self.n.into());
        let k3 = exact(constants.k3);
        let mut slots = &n * BigRational::from_integer(self.groups().into()) / &k3;
        if self.m > 1 {
            let p1 = exact(constants.reuse()) * &m * &m / exact(self.inner_rate(self.m, constants));
            let p3 = &p1 * BigRational::from_integer(constants.q.into()) / &k3;
            slots += p1 + p3;
        }
        n * m / slots
    }

    fn line(&self) -> String {
        format!(
            "level={} n={} a0={:e} b={} regime={} M={} M_exact={:.6} A_c={:e} M_prime={} M_prime_exact={:.6}",
            self.depth,
            self.n,
            self.a0,
            self.b,
            self.regime,
            self.m,
            self.m_exact,
            self.cluster_area,
            self.m_prime,
            self.m_prime_exact
        )
    }
}

pub(crate) fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite rate constant")
}

/// Slot counts of one level; `phase3 / phase1 = q / k3` before rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSchedule {
    pub phase1: f64,
    pub phase2: f64,
    pub phase3: f64,
    pub k3: f64,
    pub k4: f64,
    pub q: u32,
}

impl PhaseSchedule {
    pub fn total(&self) -> f64 {
        self.phase1 + self.phase2 + self.phase3
    }

    /// Integer slot counts; non-vanishing phases take at least one slot.
    pub fn slots(&self) -> [u64; 3] {
        [self.phase1, self.phase2, self.phase3].map(|p| if p > 0.0 { p.ceil().max(1.0) as u64 } else { 0 })
    }
}

/// A hierarchical cooperation plan, top level first.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyPlan {
    pub n: usize,
    pub a0: f64,
    pub depth: usize,
    pub levels: Vec<PlanLevel>,
    pub constants: SchemeConstants,
    /// Throughput exponent `h / (h + 1)` reached by the recursion.
    pub predicted_exponent: Rational64,
    /// Predicted minus fitted exponent, once a sweep has been fitted.
    pub epsilon1: Option<f64>,
}

impl HierarchyPlan {
    pub fn top(&self) -> Option<&PlanLevel> {
        self.levels.first()
    }

    /// Whether the plan is plain TDMA.
    pub fn is_tdma(&self) -> bool {
        self.levels.is_empty()
    }

    /// Closed-form throughput of the top level; TDMA plans have none.
    pub fn closed_form(&self) -> Option<f64> {
        self.top().map(|l| {
            let s = l.schedule(&self.constants);
            l.n as f64 * l.m as f64 / s.total()
        })
    }

    /// Structured text dump, one level per line.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "plan n={} a0={:e} h={} predicted_exponent={} k3={} k4={} q={} reuse9={}\n",
            self.n,
            self.a0,
            self.depth,
            self.predicted_exponent,
            self.constants.k3,
            self.constants.k4,
            self.constants.q,
            self.constants.reuse9
        );
        for level in &self.levels {
            let _ = writeln!(out, "{}", level.line());
        }
        if self.is_tdma() {
            out.push_str("level=0 tdma\n");
        }
        out
    }
}

fn size_level(depth: usize, n: usize, a0: f64, b: Rational64) -> Result<PlanLevel> {
    let infeasible = |reason: String| Error::PlanInfeasible { level: depth, reason };
    let regime = classify_regime(n, a0, b)?;
    let nf = n as f64;
    let inv = 1.0 / (2.0 - to_f64(b));
    let (m_exact, area_from_m) = match regime.label {
        RegimeLabel::R1 => {
            return Err(Error::OutOfScope(format!("level {depth}: a0 = {a0:e} <= n = {n}")));
        }
        RegimeLabel::R2 => (nf.powf(inv), true),
        RegimeLabel::R3a => (nf.powf(2.0 * inv) * a0.powf(-0.5 * inv), true),
        RegimeLabel::R3b => {
            let a_c = a0.powf(3.0 / (4.0 - to_f64(b)));
            (nf * a_c / a0, false)
        }
    };
    let m = m_exact.floor() as usize;
    if m < 1 {
        return Err(infeasible(format!("cluster size {m_exact:.3} < 1")));
    }
    if m >= n {
        return Err(infeasible(format!("cluster size {m} is not below n = {n}")));
    }
    let cluster_area = if area_from_m { m as f64 * a0 / nf } else { a0.powf(3.0 / (4.0 - to_f64(b))) };
    let (m_prime, m_prime_exact) = if regime.label == RegimeLabel::R2 {
        (m, m as f64)
    } else {
        let x = cluster_area / a0.sqrt();
        let exact = if x > 1.0 { x / x.ln() } else { 0.0 };
        ((exact.floor() as usize).min(m), exact)
    };
    if m_prime < 1 {
        return Err(infeasible(format!("group size {m_prime_exact:.3} < 1")));
    }
    Ok(PlanLevel { depth, n, a0, b, regime: regime.label, m, m_exact, cluster_area, m_prime, m_prime_exact })
}

/// Sizes an `h`-level hierarchy for `n` nodes on normalized area `a0`.
pub fn plan_hierarchy(n: usize, a0: f64, h: usize, constants: SchemeConstants) -> Result<HierarchyPlan> {
    constants.check()?;
    if n < 1 || !(a0 > 0.0 && a0.is_finite()) {
        return Err(Error::InvalidParameter(format!("plan needs n >= 1 and a0 > 0, got n = {n}, a0 = {a0}")));
    }
    if a0 <= n as f64 {
        return Err(Error::OutOfScope(format!("a0 = {a0:e} <= n = {n}: outside the theorem's scope")));
    }
    let mut levels = Vec::with_capacity(h);
    let (mut n_l, mut a0_l) = (n, a0);
    for depth in (1..=h).rev() {
        let b = exponent_after(depth - 1);
        check_b(b)?;
        if n_l < 2 {
            return Err(Error::PlanInfeasible { level: depth, reason: format!("only {n_l} node(s) left") });
        }
        let level = size_level(depth, n_l, a0_l, b)?;
        n_l = level.m;
        a0_l = level.cluster_area;
        levels.push(level);
    }
    let predicted_exponent = exponent_after(h);
    debug_assert!(h == 0 || predicted_exponent == next_exponent(exponent_after(h - 1)));
    Ok(HierarchyPlan { n, a0, depth: h, levels, constants, predicted_exponent, epsilon1: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tdma_plan() {
        let p = plan_hierarchy(100, 1e5, 0, SchemeConstants::default()).unwrap();
        assert!(p.is_tdma());
        assert_eq!(p.predicted_exponent, Rational64::from_integer(0));
        assert!(p.dump().contains("tdma"));
    }

    #[test]
    fn two_level_exponent() {
        let p = plan_hierarchy(10_000, 1e12, 2, SchemeConstants::default()).unwrap();
        assert_eq!(p.predicted_exponent, Rational64::new(2, 3));
        assert_eq!(p.levels.len(), 2);
        assert_eq!(p.levels[0].b, Rational64::new(1, 2));
        assert_eq!(p.levels[1].b, Rational64::from_integer(0));
        assert_eq!(p.dump().lines().count(), 3);
    }

    #[test]
    fn r3a_cluster_size() {
        let a0 = 10f64.powf(7.5);
        let p = plan_hierarchy(10_000, a0, 1, SchemeConstants::default()).unwrap();
        let top = p.top().unwrap();
        assert_eq!(top.regime, RegimeLabel::R3a);
        let oracle = 10f64.powf(4.0 - 1.875);
        assert!((top.m_exact - oracle).abs() < 1e-9 * oracle);
        assert_eq!(top.m, 133);
        assert!(top.m_prime >= 1 && top.m_prime <= top.m);
        let x = top.cluster_area / a0.sqrt();
        assert_eq!(top.m_prime, (x / x.ln()).floor() as usize);
    }

    #[test]
    fn r2_cluster_size() {
        let p = plan_hierarchy(4096, 4096f64.powi(3), 1, SchemeConstants::default()).unwrap();
        let top = p.top().unwrap();
        assert_eq!(top.regime, RegimeLabel::R2);
        assert_eq!(top.m, 64);
        assert_eq!(top.m_prime, 64);
        assert_eq!(top.groups(), 1);
    }

    #[test]
    fn r3b_cluster_area() {
        let (n, a0) = (10_000usize, 2e5);
        let p = plan_hierarchy(n, a0, 1, SchemeConstants::default()).unwrap();
        let top = p.top().unwrap();
        assert_eq!(top.regime, RegimeLabel::R3b);
        assert!((top.cluster_area - a0.powf(0.75)).abs() < 1e-9 * top.cluster_area);
        assert_eq!(top.m, (n as f64 * a0.powf(0.75) / a0).floor() as usize);
    }

    #[test]
    fn out_of_scope_and_infeasible() {
        let c = SchemeConstants::default();
        assert!(matches!(plan_hierarchy(100, 100.0, 1, c), Err(Error::OutOfScope(_))));
        assert!(matches!(plan_hierarchy(100, 50.0, 0, c), Err(Error::OutOfScope(_))));
        // Deep recursion on a small network runs out of nodes.
        match plan_hierarchy(16, 1e6, 6, c) {
            Err(Error::PlanInfeasible { level, .. }) => assert!((1..6).contains(&level)),
            other => panic!("expected an infeasible plan, got {other:?}"),
        }
    }

    #[test]
    fn schedule_ratio_and_example() {
        let level = PlanLevel {
            depth: 1,
            n: 16,
            a0: 1e4,
            b: Rational64::from_integer(0),
            regime: RegimeLabel::R2,
            m: 4,
            m_exact: 4.0,
            cluster_area: 2500.0,
            m_prime: 4,
            m_prime_exact: 4.0,
        };
        let c = SchemeConstants::default();
        let s = level.schedule(&c);
        assert_eq!((s.phase1, s.phase2, s.phase3), (16.0, 16.0, 32.0));
        assert_eq!(s.phase3 / s.phase1, f64::from(c.q) / c.k3);
        assert_eq!(s.slots(), [16, 16, 32]);
        assert_eq!(level.closed_form_exact(&c), BigRational::from_integer(1.into()));
    }

    #[test]
    fn optimal_cluster_size_near_formula() {
        // Closed-form throughput over a factor-2 grid of cluster sizes.
        for (n, b) in [(4096usize, 0.0f64), (65_536, 0.0), (65_536, 0.5)] {
            let c = SchemeConstants::default();
            let throughput = |m: f64| {
                let p1 = m.powf(2.0 - b) / c.k4;
                n as f64 * m / (p1 + n as f64 / c.k3 + f64::from(c.q) * p1 / c.k3)
            };
            let formula = (n as f64).powf(1.0 / (2.0 - b));
            let grid: Vec<f64> = (-4..=4).map(|k| formula * 2f64.powi(k)).collect();
            let best = (0..grid.len()).max_by(|&i, &j| throughput(grid[i]).total_cmp(&throughput(grid[j]))).unwrap();
            assert!(best.abs_diff(4) <= 1, "n = {n}, b = {b}: argmax at grid step {best}");
        }
    }

    #[test]
    fn deeper_levels_are_strictly_better() {
        let mut last = -1.0;
        for h in 0..5 {
            let e = to_f64(exponent_after(h));
            assert!(e > last);
            last = e;
        }
    }
}
