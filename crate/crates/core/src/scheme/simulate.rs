//! Slot-level bookkeeping of the three-phase scheme and the TDMA baseline.

use std::collections::HashMap;
use std::io::Write;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;

use super::plan::{exact, HierarchyPlan, PlanLevel, SchemeConstants};
use crate::channel::{channel_matrix, snr_long_range, MatrixSpec};
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::geometry::{partition_clusters, ClusterGrid, NodePlacement};
use crate::mimo::capacity_of;
use crate::rng::{indexed_substream, substream};
use crate::stats::log_log_slope;

/// Splits `members` into `floor(M / m_prime)` groups of at least `m_prime`
/// nodes after a seeded shuffle; remainder nodes are dealt round-robin.
pub fn split_groups(members: &[usize], m_prime: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if m_prime == 0 || m_prime > members.len() {
        return Err(Error::InvalidParameter(format!(
            "group size {m_prime} must lie in 1..={}",
            members.len()
        )));
    }
    let mut shuffled = members.to_vec();
    shuffled.shuffle(&mut substream(seed, "groups"));
    let count = members.len() / m_prime;
    let mut groups: Vec<Vec<usize>> = shuffled.chunks(m_prime).take(count).map(<[usize]>::to_vec).collect();
    for (k, &node) in shuffled[count * m_prime..].iter().enumerate() {
        groups[k % count].push(node);
    }
    Ok(groups)
}

/// Random destination of every source; no node is its own destination.
pub fn random_traffic(n: usize, seed: u64) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("traffic needs at least two nodes, got {n}")));
    }
    // A shuffled cycle is a derangement and keeps each node a destination once.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, "traffic"));
    let mut dest = vec![0; n];
    for k in 0..n {
        dest[order[k]] = order[(k + 1) % n];
    }
    Ok(dest)
}

/// How phase-2 transfers are timed.
#[derive(Debug, Clone)]
pub enum RateModel {
    /// Every group round takes `1 / k3` slots; inner clusters run at their oracle rate.
    ClosedForm,
    /// Group rounds are timed by the MIMO capacity of the actual node positions.
    MeasuredMimo(NetworkConfig),
}

impl RateModel {
    pub fn label(&self) -> &'static str {
        match self {
            RateModel::ClosedForm => "closed-form",
            RateModel::MeasuredMimo(_) => "measured-mimo",
        }
    }
}

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputReport {
    pub bits_delivered: u64,
    /// Slots per phase.
    pub phase_slots: [f64; 3],
    pub total_slots: f64,
    /// Aggregate throughput in bits per slot.
    pub throughput: f64,
    /// `n M / (phase1 + phase2 + phase3)`, when a closed form applies.
    pub closed_form: Option<f64>,
    /// Whether the simulated and closed-form values agree exactly in rational arithmetic.
    pub exact_match: Option<bool>,
    /// Log-log slope over the sweep this run belongs to.
    pub exponent_fit: Option<f64>,
}

impl ThroughputReport {
    fn from_slots(bits: u64, phase_slots: [f64; 3]) -> Self {
        let total_slots = phase_slots.iter().sum::<f64>();
        Self {
            bits_delivered: bits,
            phase_slots,
            total_slots,
            throughput: bits as f64 / total_slots,
            closed_form: None,
            exact_match: None,
            exponent_fit: None,
        }
    }
}

fn check_placement(plan: &HierarchyPlan, placement: &NodePlacement) -> Result<()> {
    if placement.len() != plan.n {
        return Err(Error::InvalidInput(format!("placement has {} nodes, plan expects {}", placement.len(), plan.n)));
    }
    let area = placement.domain.area();
    if (area - plan.a0).abs() > 1e-9 * plan.a0 {
        return Err(Error::InvalidInput(format!("placement area {area:e} differs from plan area {:e}", plan.a0)));
    }
    Ok(())
}

/// Runs the top level of `plan` over `placement` for one round of traffic.
pub fn simulate_throughput(
    plan: &HierarchyPlan,
    placement: &NodePlacement,
    rate_model: &RateModel,
    seed: u64,
) -> Result<ThroughputReport> {
    check_placement(plan, placement)?;
    let Some(top) = plan.top() else {
        return Err(Error::InvalidInput("TDMA plans are simulated by tdma_baseline".into()));
    };
    let dest = random_traffic(plan.n, seed)?;
    match rate_model {
        RateModel::ClosedForm => simulate_closed_form(top, &plan.constants, &dest, seed),
        RateModel::MeasuredMimo(config) => simulate_measured(top, &plan.constants, placement, config, &dest, seed),
    }
}

/// Index-ordered clusters of `m` nodes; the last one may be partial.
fn nominal_clusters(n: usize, m: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let clusters: Vec<Vec<usize>> = (0..n).collect::<Vec<_>>().chunks(m).map(<[usize]>::to_vec).collect();
    let membership = (0..n).map(|i| i / m).collect();
    (clusters, membership)
}

/// Tracks which node holds each bit and checks delivery at the end.
struct BitLedger {
    holder: Vec<usize>,
    per_source: usize,
}

impl BitLedger {
    fn new(n: usize, per_source: usize) -> Self {
        Self { holder: (0..n * per_source).map(|b| b / per_source).collect(), per_source }
    }

    fn bits_of(&self, source: usize) -> std::ops::Range<usize> {
        source * self.per_source..(source + 1) * self.per_source
    }

    fn verify(&self, dest: &[usize]) -> Result<u64> {
        for (bit, &h) in self.holder.iter().enumerate() {
            let want = dest[bit / self.per_source];
            if h != want {
                return Err(Error::InvalidInput(format!("bit {bit} ended at node {h}, destination is {want}")));
            }
        }
        Ok(self.holder.len() as u64)
    }
}

fn simulate_closed_form(
    level: &PlanLevel,
    constants: &SchemeConstants,
    dest: &[usize],
    seed: u64,
) -> Result<ThroughputReport> {
    let (n, m) = (level.n, level.m);
    let (clusters, membership) = nominal_clusters(n, m);
    let groups = level.groups();
    let mut ledger = BitLedger::new(n, m);
    let k3 = exact(constants.k3);
    let q = BigRational::from_integer(constants.q.into());
    let reuse = exact(if constants.reuse9 { 9.0 } else { 1.0 });
    let mut load1 = vec![0usize; clusters.len()];
    let mut load3 = vec![BigRational::zero(); clusters.len()];
    let mut phase2 = BigRational::zero();
    // Bit-index groups of one source; every source uses the same split.
    let bit_groups = split_groups(&(0..m).collect::<Vec<_>>(), level.m_prime, seed)?;
    debug_assert_eq!(bit_groups.len(), groups);
    for s in 0..n {
        let src = membership[s];
        let dst = membership[dest[s]];
        let bits = ledger.bits_of(s);
        // Phase 1: bit i goes to member i of the source cluster.
        for (i, bit) in bits.clone().enumerate() {
            let members = &clusters[src];
            ledger.holder[bit] = members[i % members.len()];
        }
        load1[src] += m;
        // Phase 2: one MIMO round per bit group towards the destination cluster.
        for group in &bit_groups {
            for &i in group {
                let members = &clusters[dst];
                ledger.holder[bits.start + i] = members[i % members.len()];
            }
            phase2 += BigRational::from_integer(1.into()) / &k3;
        }
        // Phase 3: each observation is quantized and forwarded to the destination.
        load3[dst] += BigRational::from_integer(m.into()) * &q / &k3;
        for bit in bits {
            ledger.holder[bit] = dest[s];
        }
    }
    let delivered = ledger.verify(dest)?;
    let rate = |c: usize| exact(level.inner_rate(clusters[c].len(), constants));
    let (phase1, phase3) = if m == 1 {
        (BigRational::zero(), BigRational::zero())
    } else {
        let p1 = (0..clusters.len())
            .map(|c| &reuse * BigRational::from_integer(load1[c].into()) / rate(c))
            .max()
            .unwrap_or_else(BigRational::zero);
        let p3 = (0..clusters.len()).map(|c| &reuse * &load3[c] / rate(c)).max().unwrap_or_else(BigRational::zero);
        (p1, p3)
    };
    let total = &phase1 + &phase2 + &phase3;
    let simulated = BigRational::from_integer(delivered.into()) / &total;
    let closed = level.closed_form_exact(constants);
    let f = |r: &BigRational| r.to_f64().unwrap_or(f64::NAN);
    let mut report = ThroughputReport::from_slots(delivered, [f(&phase1), f(&phase2), f(&phase3)]);
    report.throughput = f(&simulated);
    report.closed_form = Some(f(&closed));
    report.exact_match = Some(simulated == closed);
    Ok(report)
}

/// Per-group phase-2 durations of one cluster-to-cluster hop.
struct HopTiming {
    /// Receive group paired with each transmit group.
    rx_group: Vec<usize>,
    /// Capacity in bits per slot of each group pair.
    capacity: Vec<f64>,
}

struct MeasuredNetwork<'a> {
    grid: ClusterGrid,
    groups: Vec<Vec<Vec<usize>>>,
    placement: &'a NodePlacement,
    config: &'a NetworkConfig,
    cache: HashMap<(usize, usize), HopTiming>,
}

impl MeasuredNetwork<'_> {
    fn hop(&mut self, from: usize, to: usize) -> Result<&HopTiming> {
        if !self.cache.contains_key(&(from, to)) {
            let d = self.grid.cell_rect(self.grid.coords(from)).center().distance(&self.grid.cell_rect(self.grid.coords(to)).center());
            // Total MIMO power nP shared by the transmitting group.
            let rho = self.config.friis_gain() * self.config.n as f64 * self.config.power
                / (self.config.noise_density * self.config.bandwidth * d * d);
            let rx_count = self.groups[to].len();
            let mut timing = HopTiming { rx_group: Vec::new(), capacity: Vec::new() };
            for (g, tx) in self.groups[from].iter().enumerate() {
                let rx = &self.groups[to][g % rx_count];
                let domain = self.placement.domain;
                let f = channel_matrix(
                    &self.placement.subset(tx, domain)?,
                    &self.placement.subset(rx, domain)?,
                    MatrixSpec::normalized(d),
                )?;
                timing.rx_group.push(g % rx_count);
                timing.capacity.push(capacity_of(&f.entries, rho)?);
            }
            self.cache.insert((from, to), timing);
        }
        Ok(&self.cache[&(from, to)])
    }

    /// Occupied cluster at grid distance at least two from both ends with the
    /// shortest two-hop path; ties go to the least-loaded, then lowest index.
    fn relay(&self, a: usize, b: usize, load: &[f64]) -> Option<usize> {
        (0..self.grid.len())
            .filter(|&c| {
                !self.grid.members[c].is_empty() && self.grid.grid_distance(a, c) >= 2 && self.grid.grid_distance(c, b) >= 2
            })
            .min_by(|&x, &y| {
                let path = |c: usize| self.grid.grid_distance(a, c) + self.grid.grid_distance(c, b);
                path(x).cmp(&path(y)).then(load[x].total_cmp(&load[y])).then(x.cmp(&y))
            })
    }
}

fn simulate_measured(
    level: &PlanLevel,
    constants: &SchemeConstants,
    placement: &NodePlacement,
    config: &NetworkConfig,
    dest: &[usize],
    seed: u64,
) -> Result<ThroughputReport> {
    let grid = partition_clusters(placement, level.cluster_area)?;
    let groups = grid
        .members
        .iter()
        .enumerate()
        .map(|(c, members)| {
            if members.is_empty() {
                Ok(Vec::new())
            } else {
                let mut rng_seed = indexed_substream(seed, "cluster-groups", c as u64);
                let gseed = rand::Rng::random::<u64>(&mut rng_seed);
                split_groups(members, level.m_prime.min(members.len()), gseed)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut net = MeasuredNetwork { grid, groups, placement, config, cache: HashMap::new() };
    let occupancy = net.grid.occupancy();
    let clusters = net.grid.len();
    let q = f64::from(constants.q);
    let mut load1 = vec![0.0; clusters];
    let mut load3 = vec![0.0; clusters];
    let mut phase2 = 0.0;
    let mut delivered = 0u64;
    for (s, &d) in dest.iter().enumerate().take(placement.len()) {
        let src = net.grid.membership[s];
        let dst = net.grid.membership[d];
        let bits = occupancy[src];
        load1[src] += bits as f64;
        delivered += bits as u64;
        if src == dst {
            continue;
        }
        let path = match net.grid.grid_distance(src, dst) {
            1 => match net.relay(src, dst, &load3) {
                Some(r) => vec![(src, r), (r, dst)],
                None => vec![(src, dst)],
            },
            _ => vec![(src, dst)],
        };
        // Bits sit one per node of the sending cluster, so a group carries as
        // many bits as it has members.
        for (from, to) in path {
            let tx_sizes: Vec<usize> = net.groups[from].iter().map(Vec::len).collect();
            let rx_sizes: Vec<usize> = net.groups[to].iter().map(Vec::len).collect();
            let scale = bits as f64 / occupancy[from] as f64;
            let timing = net.hop(from, to)?;
            for (g, &size) in tx_sizes.iter().enumerate() {
                let tau = scale * size as f64 / timing.capacity[g];
                phase2 += tau;
                load3[to] += rx_sizes[timing.rx_group[g]] as f64 * q * tau;
            }
        }
    }
    let reuse = if constants.reuse9 { 9.0 } else { 1.0 };
    let phase = |load: &[f64]| {
        (0..clusters)
            .filter(|&c| occupancy[c] > 0)
            .map(|c| reuse * load[c] / level.inner_rate(occupancy[c], constants))
            .fold(0.0, f64::max)
    };
    Ok(ThroughputReport::from_slots(delivered, [phase(&load1), phase2, phase(&load3)]))
}

/// Successive point-to-point slots, each source alone at power `nP`.
pub fn tdma_baseline(placement: &NodePlacement, config: &NetworkConfig, seed: u64) -> Result<ThroughputReport> {
    let dest = random_traffic(placement.len(), seed)?;
    let pairs: Vec<(usize, usize)> = dest.iter().copied().enumerate().collect();
    tdma_pairs(placement, &pairs, config)
}

/// TDMA over explicit `(source, destination)` pairs; each pair gets one slot.
pub fn tdma_pairs(placement: &NodePlacement, pairs: &[(usize, usize)], config: &NetworkConfig) -> Result<ThroughputReport> {
    let snr = snr_long_range(config);
    if !snr.feasible {
        return Err(Error::OutOfScope(format!("long-range SNR {:.2} dB is not above 0 dB", snr.db)));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidInput("TDMA needs at least one pair".into()));
    }
    let scale = config.friis_gain() * config.n as f64 * config.power / (config.noise_density * config.bandwidth);
    let mut bits = 0.0;
    for &(s, t) in pairs {
        let r = placement.distance(s, t);
        if !(r > 0.0) {
            return Err(Error::SingularDistance(placement.positions[s].x, placement.positions[s].y));
        }
        bits += (1.0 + scale / (r * r)).log2();
    }
    let slots = pairs.len() as f64;
    Ok(ThroughputReport {
        bits_delivered: bits.floor() as u64,
        phase_slots: [0.0, slots, 0.0],
        total_slots: slots,
        throughput: bits / slots,
        closed_form: None,
        exact_match: None,
        exponent_fit: None,
    })
}

/// One row of a throughput sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub a0: f64,
    pub h: usize,
    pub regime: String,
    pub m: usize,
    pub m_prime: usize,
    pub t_sim: f64,
    pub t_closed_form: Option<f64>,
}

pub const SWEEP_HEADER: [&str; 9] = ["n", "a0", "h", "regime", "M", "M_prime", "T_sim", "T_closed_form", "exponent_fit"];

/// Log-log slope of simulated throughput against `n`.
pub fn fit_exponent(rows: &[SweepRow]) -> f64 {
    let n: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.t_sim).collect();
    log_log_slope(&n, &t)
}

impl SweepRow {
    pub fn record(&self, exponent_fit: f64) -> Vec<String> {
        vec![
            self.n.to_string(),
            format!("{:e}", self.a0),
            self.h.to_string(),
            self.regime.clone(),
            self.m.to_string(),
            self.m_prime.to_string(),
            format!("{:.12e}", self.t_sim),
            self.t_closed_form.map(|v| format!("{v:.12e}")).unwrap_or_default(),
            format!("{exponent_fit:.6}"),
        ]
    }
}

/// Writes a sweep with its fitted exponent on every row.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let fit = fit_exponent(rows);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        w.write_record(row.record(fit))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{place_uniform, Point2, Rect};
    use crate::scheme::plan::plan_hierarchy;
    use crate::scheme::regime::RegimeLabel;
    use num_rational::Rational64;
    use rand::Rng;

    fn level(n: usize, m: usize, m_prime: usize) -> PlanLevel {
        PlanLevel {
            depth: 1,
            n,
            a0: 1e6,
            b: Rational64::from_integer(0),
            regime: if m == m_prime { RegimeLabel::R2 } else { RegimeLabel::R3a },
            m,
            m_exact: m as f64,
            cluster_area: 1e6 * m as f64 / n as f64,
            m_prime,
            m_prime_exact: m_prime as f64,
        }
    }

    #[test]
    fn groups_exact_division() {
        let g = split_groups(&[0, 1, 2, 3, 4, 5], 2, 3).unwrap();
        assert_eq!(g.len(), 3);
        let mut all: Vec<usize> = g.concat();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4, 5]);
        assert!(g.iter().all(|x| x.len() == 2));
        assert_eq!(split_groups(&[4, 5, 6], 3, 0).unwrap().len(), 1);
        assert!(split_groups(&[1, 2], 3, 0).is_err());
        let r = split_groups(&(0..7).collect::<Vec<_>>(), 2, 1).unwrap();
        assert_eq!(r.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 2, 2]);
    }

    #[test]
    fn group_membership_is_uniform() {
        let (m, mp, seeds) = (6usize, 2usize, 10_000u64);
        let members: Vec<usize> = (0..m).collect();
        let mut hits = vec![0u64; m];
        for seed in 0..seeds {
            for &node in &split_groups(&members, mp, seed).unwrap()[0] {
                hits[node] += 1;
            }
        }
        let p = mp as f64 / m as f64;
        let sigma = (seeds as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - seeds as f64 * p).abs() <= 3.0 * sigma, "{h}");
        }
    }

    #[test]
    fn traffic_is_a_derangement() {
        let d = random_traffic(50, 9).unwrap();
        let mut seen = d.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..50).collect::<Vec<_>>());
        assert!(d.iter().enumerate().all(|(i, &t)| i != t));
    }

    #[test]
    fn one_bit_per_slot_example() {
        let lvl = level(16, 4, 4);
        let r = simulate_closed_form(&lvl, &SchemeConstants::default(), &random_traffic(16, 1).unwrap(), 1).unwrap();
        assert_eq!(r.phase_slots, [16.0, 16.0, 32.0]);
        assert_eq!(r.throughput, 1.0);
        assert_eq!(r.bits_delivered, 64);
        assert_eq!(r.exact_match, Some(true));
    }

    #[test]
    fn singleton_clusters_skip_intra_phases() {
        let lvl = level(10, 1, 1);
        let r = simulate_closed_form(&lvl, &SchemeConstants::default(), &random_traffic(10, 2).unwrap(), 2).unwrap();
        assert_eq!(r.phase_slots[0], 0.0);
        assert_eq!(r.phase_slots[2], 0.0);
        assert_eq!(r.phase_slots[1], 10.0);
        assert_eq!(r.exact_match, Some(true));
    }

    #[test]
    fn partial_clusters_and_groups_match_closed_form() {
        let c = SchemeConstants { k3: 0.75, k4: 1.5, q: 3, reuse9: false };
        for (n, m, mp) in [(103, 10, 3), (64, 7, 7), (50, 9, 4)] {
            let lvl = level(n, m, mp);
            let r = simulate_closed_form(&lvl, &c, &random_traffic(n, 5).unwrap(), 5).unwrap();
            assert_eq!(r.exact_match, Some(true), "n={n} m={m} m'={mp}");
            assert_eq!(r.bits_delivered, (n * m) as u64);
        }
    }

    #[test]
    fn plan_level_simulation_round_trip() {
        let (n, a0) = (256usize, 256f64.powi(3));
        let plan = plan_hierarchy(n, a0, 1, SchemeConstants::default()).unwrap();
        let placement = place_uniform(n, Rect::square(a0.sqrt()).unwrap(), &mut substream(1, "placement")).unwrap();
        let r = simulate_throughput(&plan, &placement, &RateModel::ClosedForm, 3).unwrap();
        assert_eq!(r.exact_match, Some(true));
        assert_eq!(r.closed_form, plan.closed_form());
        let wrong = place_uniform(n - 1, Rect::square(a0.sqrt()).unwrap(), &mut substream(1, "placement")).unwrap();
        assert!(simulate_throughput(&plan, &wrong, &RateModel::ClosedForm, 3).is_err());
    }

    #[test]
    fn measured_simulation_delivers_all_bits() {
        let (n, a0) = (64usize, 64f64.powi(3));
        let plan = plan_hierarchy(n, a0, 1, SchemeConstants::default()).unwrap();
        let mut config = NetworkConfig { n, a0, ..NetworkConfig::default() };
        config.power = 10.0 * a0 * config.noise_density * config.bandwidth / (n as f64 * config.friis_gain());
        let placement = place_uniform(n, Rect::square(a0.sqrt()).unwrap(), &mut substream(2, "placement")).unwrap();
        let r = simulate_throughput(&plan, &placement, &RateModel::MeasuredMimo(config), 4).unwrap();
        assert!(r.throughput > 0.0 && r.throughput.is_finite());
        assert_eq!(r.bits_delivered as usize, {
            let grid = partition_clusters(&placement, plan.top().unwrap().cluster_area).unwrap();
            (0..n).map(|s| grid.members[grid.membership[s]].len()).sum::<usize>()
        });
    }

    #[test]
    fn tdma_single_pair_and_power_doubling() {
        let domain = Rect::square(100.0).unwrap();
        let placement = NodePlacement::new(vec![Point2::new(10.0, 10.0), Point2::new(40.0, 50.0)], domain).unwrap();
        let config = NetworkConfig { n: 1, a0: 1e4, power: 3e4, ..NetworkConfig::default() };
        let r = tdma_pairs(&placement, &[(0, 1)], &config).unwrap();
        let snr = config.friis_gain() * config.power / 2500.0;
        assert!((r.throughput - (1.0 + snr).log2()).abs() < 1e-12);

        let mut rng = substream(3, "tdma");
        let pts: Vec<Point2> = (0..20).map(|_| Point2::new(rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0)).collect();
        let placement = NodePlacement::new(pts, domain).unwrap();
        let config = NetworkConfig { n: 20, a0: 1e4, power: 1e3, ..NetworkConfig::default() };
        let doubled = NetworkConfig { power: 2e3, ..config.clone() };
        for s in 0..19 {
            let a = tdma_pairs(&placement, &[(s, s + 1)], &config).unwrap().throughput;
            let b = tdma_pairs(&placement, &[(s, s + 1)], &doubled).unwrap().throughput;
            assert!(b >= a && b - a <= 1.0);
        }
    }

    #[test]
    fn tdma_needs_positive_long_range_snr() {
        let domain = Rect::square(100.0).unwrap();
        let placement = NodePlacement::new(vec![Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)], domain).unwrap();
        let config = NetworkConfig { n: 2, a0: 1e4, power: 1e-3, ..NetworkConfig::default() };
        assert!(matches!(tdma_baseline(&placement, &config, 0), Err(Error::OutOfScope(_))));
    }

    #[test]
    fn sweep_csv_has_fit_column() {
        let rows: Vec<SweepRow> = [16usize, 64, 256]
            .iter()
            .map(|&n| SweepRow {
                n,
                a0: 1.0,
                h: 1,
                regime: "R2".into(),
                m: 1,
                m_prime: 1,
                t_sim: (n as f64).sqrt(),
                t_closed_form: None,
            })
            .collect();
        assert!((fit_exponent(&rows) - 0.5).abs() < 1e-12);
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,a0,h,regime,M,M_prime,T_sim,T_closed_form,exponent_fit\n"));
        assert!(text.lines().nth(1).unwrap().ends_with("0.500000"));
    }
}
