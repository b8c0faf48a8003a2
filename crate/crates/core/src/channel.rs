//! Line-of-sight channel synthesis and power feasibility checks.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::config::NetworkConfig;
use crate::geometry::{NodePlacement, Point2};
use crate::error::{Error, Result};
use crate::rng::substream;

/// `e^{j 2 pi r}` with the integer part of `r` removed first.
pub fn unit_phasor(cycles: f64) -> Complex64 {
    let frac = cycles - cycles.floor();
    Complex64::from_polar(1.0, 2.0 * PI * frac)
}

/// Free-space gain `sqrt(G) e^{j 2 pi r} / r` between two points, `r` in wavelengths.
pub fn los_gain(tx: Point2, rx: Point2, config: &NetworkConfig) -> Result<Complex64> {
    let r = tx.distance(&rx);
    if !(r > 0.0) {
        return Err(Error::SingularDistance(tx.x, tx.y));
    }
    Ok(unit_phasor(r) * (config.friis_gain().sqrt() / r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixForm {
    /// `H`, entries `sqrt(G) e^{j 2 pi r} / r`.
    Raw,
    /// `F`, entries `d e^{j 2 pi r} / r`.
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Los,
    /// LOS amplitudes with i.i.d. uniform phases.
    IidPhase,
}

/// How to build a [`ChannelMatrix`].
#[derive(Debug, Clone, Copy)]
pub struct MatrixSpec {
    /// Cluster separation used for normalization.
    pub d: f64,
    pub form: MatrixForm,
    pub model: ChannelModel,
    /// Friis gain `G`, only used by the raw form.
    pub friis_gain: f64,
    pub seed: u64,
}

impl MatrixSpec {
    pub fn normalized(d: f64) -> Self {
        Self { d, form: MatrixForm::Normalized, model: ChannelModel::Los, friis_gain: 1.0, seed: 0 }
    }

    pub fn raw(d: f64, friis_gain: f64) -> Self {
        Self { d, form: MatrixForm::Raw, model: ChannelModel::Los, friis_gain, seed: 0 }
    }

    pub fn iid_phase(mut self, seed: u64) -> Self {
        self.model = ChannelModel::IidPhase;
        self.seed = seed;
        self
    }
}

/// Complex `M_rx x M_tx` gain matrix; entry `(i, k)` is from transmitter `k` to receiver `i`.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    pub form: MatrixForm,
    pub d: f64,
    pub model: ChannelModel,
    pub friis_gain: f64,
}

impl ChannelMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Entries in normalized form, whatever the stored form.
    pub fn normalized_entries(&self) -> DMatrix<Complex64> {
        match self.form {
            MatrixForm::Normalized => self.entries.clone(),
            MatrixForm::Raw => self.entries.map(|h| h * (self.d / self.friis_gain.sqrt())),
        }
    }

    /// Writes `row,col,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "re", "im"])?;
        for i in 0..self.rows() {
            for k in 0..self.cols() {
                let v = self.entries[(i, k)];
                w.write_record([i.to_string(), k.to_string(), format!("{:.16e}", v.re), format!("{:.16e}", v.im)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds the channel from the nodes of `tx` to the nodes of `rx`.
pub fn channel_matrix(tx: &NodePlacement, rx: &NodePlacement, spec: MatrixSpec) -> Result<ChannelMatrix> {
    if tx.is_empty() || rx.is_empty() {
        return Err(Error::InvalidInput("channel needs non-empty clusters".into()));
    }
    if !(spec.d > 0.0) {
        return Err(Error::InvalidParameter(format!("separation d must be positive, got {}", spec.d)));
    }
    if spec.form == MatrixForm::Raw && !(spec.friis_gain > 0.0) {
        return Err(Error::InvalidParameter("raw form needs a positive Friis gain".into()));
    }
    let scale = match spec.form {
        MatrixForm::Raw => spec.friis_gain.sqrt(),
        MatrixForm::Normalized => spec.d,
    };
    let mut phase_rng = substream(spec.seed, "iid-phase");
    let mut entries = DMatrix::zeros(rx.len(), tx.len());
    // Column-major fill so IID phases are drawn in a fixed order.
    for k in 0..tx.len() {
        for i in 0..rx.len() {
            let a = tx.positions[k];
            let b = rx.positions[i];
            let r = a.distance(&b);
            if !(r > 0.0) {
                return Err(Error::SingularDistance(a.x, a.y));
            }
            let phasor = match spec.model {
                ChannelModel::Los => unit_phasor(r),
                ChannelModel::IidPhase => unit_phasor(phase_rng.random::<f64>()),
            };
            entries[(i, k)] = phasor * (scale / r);
        }
    }
    Ok(ChannelMatrix { entries, form: spec.form, d: spec.d, model: spec.model, friis_gain: spec.friis_gain })
}

/// Lower amplitude bound `(1 + 2 sqrt(2 a_c) / d)^{-1}` for normalized entries
/// between facing clusters.
pub fn amplitude_floor(a_c: f64, d: f64) -> f64 {
    1.0 / (1.0 + 2.0 * (2.0 * a_c).sqrt() / d)
}

/// `c0 = (1 + 2 sqrt 2)^{-1}`, the floor when `sqrt(a_c) = d`.
pub fn c0() -> f64 {
    1.0 / (1.0 + 2.0 * 2f64.sqrt())
}

/// MIMO transmit power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBudget {
    /// Total MIMO transmit power `P0` (W).
    pub p0: f64,
    /// Per-node power `P0 / M`.
    pub per_node: f64,
    /// `10 log10(G P0 / (N0 W d^2))`.
    pub snr_mimo_db: f64,
}

impl PowerBudget {
    pub fn new(p0: f64, m: usize, config: &NetworkConfig, d: f64) -> Result<Self> {
        if !(p0 > 0.0 && d > 0.0) || m == 0 {
            return Err(Error::InvalidParameter("power budget needs p0 > 0, d > 0, m > 0".into()));
        }
        let linear = config.friis_gain() * p0 / (config.noise_density * config.bandwidth * d * d);
        Ok(Self { p0, per_node: p0 / m as f64, snr_mimo_db: 10.0 * linear.log10() })
    }

    /// Budget whose SNR at separation `d` equals `snr` (linear).
    pub fn with_snr(snr: f64, m: usize, config: &NetworkConfig, d: f64) -> Result<Self> {
        let p0 = snr * config.noise_density * config.bandwidth * d * d / config.friis_gain();
        Self::new(p0, m, config, d)
    }

    /// `G P0 / (N0 W d^2)`, linear.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_mimo_db / 10.0)
    }
}

/// Long-range SNR with path-loss exponent 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongRangeSnr {
    pub linear: f64,
    pub db: f64,
    /// Whether `SNR_l > 0 dB`.
    pub feasible: bool,
}

/// `n G P / (N0 W A)` in dB.
pub fn snr_long_range(config: &NetworkConfig) -> LongRangeSnr {
    let linear = config.n as f64 * config.friis_gain() * config.power
        / (config.noise_density * config.bandwidth * config.a0);
    LongRangeSnr { linear, db: 10.0 * linear.log10(), feasible: linear > 1.0 }
}

/// `G P0 / (N0 W d^2) > 0 dB`, strict.
pub fn mimo_power_check(budget: &PowerBudget, config: &NetworkConfig, d: f64) -> bool {
    if !(d > 0.0) {
        return false;
    }
    config.friis_gain() * budget.p0 / (config.noise_density * config.bandwidth * d * d) > 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{facing_clusters, place_uniform, Rect};
    use crate::rng::substream;
    use crate::stats;
    use proptest::prelude::*;

    fn unit_gain() -> NetworkConfig {
        NetworkConfig { gain_tx: 4.0 * PI, gain_rx: 4.0 * PI, ..Default::default() }
    }

    #[test]
    fn one_wavelength_is_unit_gain() {
        let g = los_gain(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), &unit_gain()).unwrap();
        assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn half_integer_distance_flips_phase() {
        let g = los_gain(Point2::new(0.0, 0.0), Point2::new(1.5, 2.0), &unit_gain()).unwrap();
        assert!((g.norm() - 0.4).abs() < 1e-15);
        assert!((g.arg().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn coincident_points_are_errors() {
        let p = Point2::new(3.0, 4.0);
        assert!(matches!(los_gain(p, p, &unit_gain()), Err(Error::SingularDistance(..))));
    }

    #[test]
    fn single_entry_at_distance_d() {
        let d = 7.25;
        let tx = NodePlacement::new(vec![Point2::new(0.0, 0.0)], Rect::square(1.0).unwrap()).unwrap();
        let rx_dom = Rect::new(d, 0.0, 1.0, 1.0).unwrap();
        let rx = NodePlacement::new(vec![Point2::new(d, 0.0)], rx_dom).unwrap();
        let f = channel_matrix(&tx, &rx, MatrixSpec::normalized(d)).unwrap();
        assert!((f.entries[(0, 0)] - unit_phasor(d)).norm() < 1e-15);
        assert!((f.entries[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_cluster_is_rejected() {
        let dom = Rect::square(1.0).unwrap();
        let empty = NodePlacement::new(vec![], dom).unwrap();
        let one = NodePlacement::new(vec![Point2::new(0.5, 0.5)], dom).unwrap();
        assert!(matches!(channel_matrix(&empty, &one, MatrixSpec::normalized(1.0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn normalized_amplitudes_respect_floor() {
        let (a_c, d) = (400.0, 45.0);
        let (txd, rxd) = facing_clusters(a_c, d).unwrap();
        let mut rng = substream(3, "test");
        let tx = place_uniform(8, txd, &mut rng).unwrap();
        let rx = place_uniform(8, rxd, &mut rng).unwrap();
        let f = channel_matrix(&tx, &rx, MatrixSpec::normalized(d)).unwrap();
        let floor = amplitude_floor(a_c, d);
        assert!(floor >= c0());
        for v in f.entries.iter() {
            assert!(v.norm() >= floor && v.norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn collinear_equal_spacing_is_numerically_rank_one() {
        // Short arrays far apart on a common axis: amplitudes are nearly
        // separable and the phases factor exactly.
        let d = 1.0e5;
        let dom_t = Rect::new(-1.0, 0.0, 1.0, 1.0).unwrap();
        let dom_r = Rect::new(d, 0.0, 1.0, 1.0).unwrap();
        let tx = NodePlacement::new((0..16).map(|k| Point2::new(-(k as f64) / 16.0, 0.0)).collect(), dom_t).unwrap();
        let rx = NodePlacement::new((0..16).map(|i| Point2::new(d + i as f64 / 16.0, 0.0)).collect(), dom_r).unwrap();
        let f = channel_matrix(&tx, &rx, MatrixSpec::normalized(d)).unwrap();
        let sv = f.entries.clone().singular_values();
        assert!(sv[1] / sv[0] < 1e-4, "sigma2/sigma1 = {}", sv[1] / sv[0]);
        // Rows are proportional: r_ik = w_i - x_k makes every 2x2 minor vanish up to amplitude drift.
        let minor = f.entries[(0, 0)] * f.entries[(1, 1)] - f.entries[(0, 1)] * f.entries[(1, 0)];
        assert!(minor.norm() < 1e-8);
    }

    #[test]
    fn iid_phases_are_uniform_and_reproducible() {
        let (txd, rxd) = facing_clusters(100.0, 20.0).unwrap();
        let mut rng = substream(9, "test");
        let tx = place_uniform(320, txd, &mut rng).unwrap();
        let rx = place_uniform(320, rxd, &mut rng).unwrap();
        let spec = MatrixSpec::normalized(20.0).iid_phase(77);
        let a = channel_matrix(&tx, &rx, spec).unwrap();
        let b = channel_matrix(&tx, &rx, spec).unwrap();
        assert_eq!(a.entries, b.entries);
        let los = channel_matrix(&tx, &rx, MatrixSpec::normalized(20.0)).unwrap();
        let phases: Vec<f64> = a.entries.iter().take(100_000).map(|v| (v.arg() / (2.0 * PI)).rem_euclid(1.0)).collect();
        let ks = stats::ks_uniform_statistic(&phases);
        assert!(ks < stats::ks_critical(phases.len(), 0.001), "ks = {ks}");
        for (x, y) in a.entries.iter().zip(los.entries.iter()) {
            assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn long_range_snr_values() {
        let mut c = unit_gain();
        c.n = 1;
        c.a0 = 250.0;
        c.power = 250.0;
        c.noise_density = 1.0;
        c.bandwidth = 1.0;
        assert!(snr_long_range(&c).db.abs() < 1e-12);
        assert!(!snr_long_range(&c).feasible);
        c.n = 100;
        c.power = 1.0e4;
        c.a0 = 1.0e5;
        assert!((snr_long_range(&c).db - 10.0).abs() < 1e-12);
        let before = snr_long_range(&c).db;
        c.bandwidth *= 0.5;
        assert!((snr_long_range(&c).db - before - 3.0103).abs() < 1e-4);
    }

    #[test]
    fn mimo_power_boundary_is_strict() {
        let c = unit_gain();
        let d = 10.0;
        let two = PowerBudget::with_snr(2.0, 4, &c, d).unwrap();
        assert!(mimo_power_check(&two, &c, d));
        let one = PowerBudget::new(100.0, 4, &c, d).unwrap();
        assert!((one.snr_linear() - 1.0).abs() < 1e-12);
        assert!(!mimo_power_check(&one, &c, d));
        assert!((one.per_node - 25.0).abs() < 1e-12);
    }

    #[test]
    fn full_network_power_passes_within_network() {
        let c = NetworkConfig { n: 500, a0: 1.0e8, power: 3.0e5, ..unit_gain() };
        assert!(snr_long_range(&c).feasible);
        let p0 = c.n as f64 * c.power;
        for d in [10.0, 1.0e3, 0.999 * c.side()] {
            let b = PowerBudget::new(p0, 10, &c, d).unwrap();
            assert!(mimo_power_check(&b, &c, d));
        }
    }

    #[test]
    fn matrix_csv_has_header() {
        let dom = Rect::square(1.0).unwrap();
        let one = NodePlacement::new(vec![Point2::new(0.5, 0.5)], dom).unwrap();
        let other = NodePlacement::new(vec![Point2::new(0.1, 0.5)], dom).unwrap();
        let f = channel_matrix(&one, &other, MatrixSpec::normalized(1.0)).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("row,col,re,im\n0,0,"));
    }

    proptest! {
        #[test]
        fn amplitude_reciprocity(ax in -1e3..1e3f64, ay in -1e3..1e3f64, bx in -1e3..1e3f64, by in -1e3..1e3f64) {
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            prop_assume!(a.distance(&b) > 1e-9);
            let c = NetworkConfig::default();
            prop_assert_eq!(los_gain(a, b, &c).unwrap().norm(), los_gain(b, a, &c).unwrap().norm());
        }

        #[test]
        fn raw_equals_scaled_normalized(seed in any::<u64>(), d in 11.0..500.0f64) {
            let (txd, rxd) = facing_clusters(100.0, d).unwrap();
            let mut rng = substream(seed, "test");
            let tx = place_uniform(5, txd, &mut rng).unwrap();
            let rx = place_uniform(6, rxd, &mut rng).unwrap();
            let g = 0.37;
            let h = channel_matrix(&tx, &rx, MatrixSpec::raw(d, g)).unwrap();
            let f = channel_matrix(&tx, &rx, MatrixSpec::normalized(d)).unwrap();
            for (hv, fv) in h.entries.iter().zip(f.entries.iter()) {
                let expect = fv * (g.sqrt() / d);
                prop_assert!((hv - expect).norm() <= 1e-12 * expect.norm());
            }
        }
    }
}
