//! Four-node correlation `S` and related degree-of-freedom diagnostics.
//!
//! `S = |E(rho e^{j 2 pi Delta})|` over two transmit nodes `x_a, x_b` and two
//! receive nodes `w_a, w_b` drawn uniformly from facing clusters. Three
//! estimators are provided: plain Monte Carlo, a factored estimator that
//! integrates the receive side by quadrature, and the reduced integral `S0`.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::unit_phasor;
use crate::error::{Error, Result};
use crate::geometry::{facing_clusters, Point2, Rect};
use crate::mimo::{capacity_of, dof_scale, random_los_link};
use crate::quadrature::{fixed_panels, integrate, panels_for_phase_rate, QuadOptions};
use crate::rng::indexed_substream;
use crate::stats::jackknife_complex;

/// Number of jackknife blocks for Monte Carlo estimates.
pub const JACKKNIFE_BLOCKS: usize = 20;

/// Normalization of the amplitude factor `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Amplitude {
    /// `d^4 / (r_aa r_ab r_bb r_ba)`, in `(0, 1]` when `d` is the minimum distance.
    #[default]
    Dimensionless,
    /// `d / (r_aa r_ab r_bb r_ba)`.
    Literal,
    /// `rho = 1`.
    Unit,
}

/// Positions of the four nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourNodeSample {
    pub x_a: Point2,
    pub x_b: Point2,
    pub w_a: Point2,
    pub w_b: Point2,
}

impl FourNodeSample {
    pub fn swap_tx(self) -> Self {
        Self { x_a: self.x_b, x_b: self.x_a, ..self }
    }

    pub fn swap_rx(self) -> Self {
        Self { w_a: self.w_b, w_b: self.w_a, ..self }
    }
}

/// `|x - w| - |x - v|` without cancellation.
fn norm_difference(x: Point2, w: Point2, v: Point2) -> f64 {
    let p = x.sub(&w);
    let q = x.sub(&v);
    // |p|^2 - |q|^2 = (v - w) . (2x - w - v)
    let num = v.sub(&w).dot(&Point2::new(2.0 * x.x - w.x - v.x, 2.0 * x.y - w.y - v.y));
    let den = p.norm() + q.norm();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Exact `(Delta, rho)` for a sample.
pub fn four_node_delta_rho(s: &FourNodeSample, d: f64, amplitude: Amplitude) -> Result<(f64, f64)> {
    let r_aa = s.x_a.distance(&s.w_a);
    let r_ab = s.x_a.distance(&s.w_b);
    let r_bb = s.x_b.distance(&s.w_b);
    let r_ba = s.x_b.distance(&s.w_a);
    for (r, p) in [(r_aa, s.x_a), (r_ab, s.x_a), (r_bb, s.x_b), (r_ba, s.x_b)] {
        if !(r > 0.0) {
            return Err(Error::SingularDistance(p.x, p.y));
        }
    }
    let delta = norm_difference(s.x_a, s.w_a, s.w_b) + norm_difference(s.x_b, s.w_b, s.w_a);
    let rho = match amplitude {
        Amplitude::Dimensionless => (d / r_aa) * (d / r_ab) * (d / r_bb) * (d / r_ba),
        Amplitude::Literal => d / (r_aa * r_ab * r_bb * r_ba),
        Amplitude::Unit => 1.0,
    };
    Ok((delta, rho))
}

/// Reduced phase `-(A_c/d)(y_b - y_a)(z_b - z_a)` with `y` the transmit and
/// `z` the receive vertical coordinates. Horizontal coordinates are ignored.
pub fn reduced_delta(s: &FourNodeSample, d: f64) -> f64 {
    -(s.x_b.y - s.x_a.y) * (s.w_b.y - s.w_a.y) / d
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMethod {
    MonteCarlo,
    Quadrature,
    S0Approx,
}

impl SMethod {
    pub fn label(self) -> &'static str {
        match self {
            SMethod::MonteCarlo => "monte-carlo",
            SMethod::Quadrature => "quadrature",
            SMethod::S0Approx => "s0-approx",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: SMethod,
    pub a_c: f64,
    pub d: f64,
    /// Complex mean before taking the modulus (Monte Carlo only).
    pub mean: Complex64,
    /// Whether `sqrt(A_c) <= d <= A_c`.
    pub in_range: bool,
}

/// Node layout used for Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SGeometry {
    /// Facing `sqrt(A_c)` squares at separation `d`.
    Squares,
    /// All four nodes on the inter-cluster axis.
    Collinear,
    /// Arbitrary transmit and receive rectangles.
    Custom { tx: Rect, rx: Rect },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseModel {
    Los,
    /// `Delta` replaced by an independent uniform phase.
    IidPhase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SOptions {
    pub geometry: SGeometry,
    pub phase: PhaseModel,
    pub amplitude: Amplitude,
}

impl Default for SOptions {
    fn default() -> Self {
        Self { geometry: SGeometry::Squares, phase: PhaseModel::Los, amplitude: Amplitude::Dimensionless }
    }
}

fn sample_segment<R: Rng>(x0: f64, len: f64, y: f64, rng: &mut R) -> Point2 {
    Point2::new(x0 + len * rng.random::<f64>(), y)
}

/// Monte Carlo estimate of `S` with default options.
pub fn estimate_s_monte_carlo(a_c: f64, d: f64, n_samples: u64, seed: u64) -> Result<SEstimate> {
    estimate_s_with(a_c, d, n_samples, seed, SOptions::default())
}

pub fn estimate_s_with(a_c: f64, d: f64, n_samples: u64, seed: u64, opts: SOptions) -> Result<SEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    if n_samples < JACKKNIFE_BLOCKS as u64 {
        return Err(Error::InvalidParameter(format!("need at least {JACKKNIFE_BLOCKS} samples for the jackknife")));
    }
    if !(a_c > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter("a_c and d must be positive".into()));
    }
    let side = a_c.sqrt();
    let rects = match opts.geometry {
        SGeometry::Squares => Some(facing_clusters(a_c, d)?),
        SGeometry::Custom { tx, rx } => Some((tx, rx)),
        SGeometry::Collinear => None,
    };
    let blocks = JACKKNIFE_BLOCKS as u64;
    let per_block: Vec<u64> = (0..blocks).map(|b| n_samples / blocks + u64::from(b < n_samples % blocks)).collect();
    let sums: Vec<Result<Complex64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = indexed_substream(seed, "s-mc", b);
            let mut acc = Complex64::new(0.0, 0.0);
            for _ in 0..per_block[b as usize] {
                let s = match rects {
                    Some((tx, rx)) => FourNodeSample {
                        x_a: tx.sample(&mut rng),
                        x_b: tx.sample(&mut rng),
                        w_a: rx.sample(&mut rng),
                        w_b: rx.sample(&mut rng),
                    },
                    None => FourNodeSample {
                        x_a: sample_segment(-side, side, 0.0, &mut rng),
                        x_b: sample_segment(-side, side, 0.0, &mut rng),
                        w_a: sample_segment(d, side, 0.0, &mut rng),
                        w_b: sample_segment(d, side, 0.0, &mut rng),
                    },
                };
                let (delta, rho) = four_node_delta_rho(&s, d, opts.amplitude)?;
                let phase = match opts.phase {
                    PhaseModel::Los => delta,
                    PhaseModel::IidPhase => rng.random::<f64>(),
                };
                acc += unit_phasor(phase) * rho;
            }
            Ok(acc)
        })
        .collect();
    let sums = sums.into_iter().collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = per_block.iter().map(|&c| c as usize).collect();
    let (mean, se) = jackknife_complex(&sums, &counts);
    Ok(SEstimate {
        value: mean.norm(),
        std_error: se,
        samples: n_samples,
        method: SMethod::MonteCarlo,
        a_c,
        d,
        mean,
        in_range: side <= d && d <= a_c,
    })
}

/// `S` as `E_x |E_w phi(x, w)|^2` with the receive average done by tensor
/// Gauss-Kronrod quadrature and the transmit pair sampled. Uses the
/// dimensionless amplitude.
pub fn estimate_s_factored(a_c: f64, d: f64, n_pairs: u64, seed: u64) -> Result<SEstimate> {
    if n_pairs < JACKKNIFE_BLOCKS as u64 {
        return Err(Error::InvalidParameter(format!("need at least {JACKKNIFE_BLOCKS} transmit pairs")));
    }
    let (tx, rx) = facing_clusters(a_c, d)?;
    let side = a_c.sqrt();
    // The phase of phi changes by at most |x_a - x_b| / d cycles per unit length.
    let rate = (2.0 * a_c).sqrt() / d * 1.05;
    let panels = panels_for_phase_rate(rate, side).max(2);
    let blocks = JACKKNIFE_BLOCKS as u64;
    let per_block: Vec<u64> = (0..blocks).map(|b| n_pairs / blocks + u64::from(b < n_pairs % blocks)).collect();
    let sums: Vec<Complex64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = indexed_substream(seed, "s-factored", b);
            let mut acc = 0.0;
            for _ in 0..per_block[b as usize] {
                let x_a = tx.sample(&mut rng);
                let x_b = tx.sample(&mut rng);
                let phi = |w: Point2| {
                    let ra = x_a.distance(&w);
                    let rb = x_b.distance(&w);
                    unit_phasor(norm_difference(w, x_a, x_b)) * ((d / ra) * (d / rb))
                };
                let inner = fixed_panels(
                    |u| fixed_panels(|v| phi(Point2::new(rx.x0 + u, rx.y0 + v)), 0.0, side, panels),
                    0.0,
                    side,
                    panels,
                ) / a_c;
                acc += inner.norm_sqr();
            }
            Complex64::new(acc, 0.0)
        })
        .collect();
    let counts: Vec<usize> = per_block.iter().map(|&c| c as usize).collect();
    let (mean, se) = jackknife_complex(&sums, &counts);
    Ok(SEstimate {
        value: mean.re,
        std_error: se,
        samples: n_pairs,
        method: SMethod::Quadrature,
        a_c,
        d,
        mean,
        in_range: side <= d && d <= a_c,
    })
}

/// `(1 - e^{-j theta}) / (j theta)`, continuous at zero.
fn one_minus_exp_over(theta: f64) -> Complex64 {
    if theta.abs() < 1e-4 {
        Complex64::new(1.0 - theta * theta / 6.0, -theta / 2.0)
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta)) / Complex64::new(0.0, theta)
    }
}

/// Inner `z_b` integral `int_0^1 e^{-j 2 pi a u (z_b - z_a)} dz_b` in closed
/// form, `a = A_c / d`, `u = y_b - y_a`.
pub fn s0_inner(a: f64, u: f64, z_a: f64) -> Complex64 {
    let theta = 2.0 * PI * a * u;
    Complex64::from_polar(1.0, theta * z_a) * one_minus_exp_over(theta)
}

/// Reduced correlation `S0` by nested adaptive quadrature over
/// `(y_a, y_b, z_a)` in normalized coordinates.
pub fn estimate_s0(a_c: f64, d: f64, quadrature_points: usize) -> Result<SEstimate> {
    if quadrature_points < 64 {
        return Err(Error::InvalidParameter("S0 quadrature needs at least 64 points per axis".into()));
    }
    if !(a_c > 0.0 && d > 0.0) {
        return Err(Error::InvalidParameter("a_c and d must be positive".into()));
    }
    let a = a_c / d;
    let tol = 1e-6;
    let min_panels = quadrature_points.div_ceil(15);
    let opts_for = |rate: f64| QuadOptions::new(tol / 3.0).with_panels(panels_for_phase_rate(rate, 1.0).max(min_panels));
    let evaluations = std::cell::Cell::new(0u64);
    let failure = std::cell::Cell::new(None::<Error>);
    let inner = |y_a: f64, y_b: f64| -> Complex64 {
        let u = y_b - y_a;
        match integrate(|z_a| s0_inner(a, u, z_a), 0.0, 1.0, opts_for(a * u.abs())) {
            Ok(r) => {
                evaluations.set(evaluations.get() + r.evaluations as u64);
                r.value
            }
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let middle = |y_a: f64| -> Complex64 {
        match integrate(|y_b| inner(y_a, y_b), 0.0, 1.0, opts_for(a)) {
            Ok(r) => r.value,
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let outer = integrate(middle, 0.0, 1.0, QuadOptions::new(tol / 3.0).with_panels(min_panels));
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let outer = outer?;
    Ok(SEstimate {
        value: outer.value.norm(),
        std_error: outer.error + 2.0 * tol / 3.0,
        samples: evaluations.get(),
        method: SMethod::S0Approx,
        a_c,
        d,
        mean: outer.value,
        in_range: a_c.sqrt() <= d && d <= a_c,
    })
}

/// `k (d / A_c) ln(A_c / d)`.
pub fn s_bound(a_c: f64, d: f64, k: f64) -> Result<f64> {
    if !(d > 0.0) || d >= a_c {
        return Err(Error::Domain(format!("bound is vacuous for d = {d} >= A_c = {a_c}")));
    }
    let x = d / a_c;
    Ok(k * x * (1.0 / x).ln())
}

pub const S_SWEEP_HEADER: [&str; 7] = ["a_c", "d", "method", "samples", "s_value", "std_error", "bound_k1"];

impl SEstimate {
    pub fn record(&self) -> Vec<String> {
        let bound = s_bound(self.a_c, self.d, 1.0).map(|b| format!("{b:.16e}")).unwrap_or_else(|_| "nan".into());
        vec![
            format!("{:.16e}", self.a_c),
            format!("{:.16e}", self.d),
            self.method.label().to_string(),
            self.samples.to_string(),
            format!("{:.16e}", self.value),
            format!("{:.16e}", self.std_error),
            bound,
        ]
    }
}

pub fn write_s_sweep_csv<W: Write>(rows: &[SEstimate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(S_SWEEP_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Empirical spread of MIMO capacity over independent placements.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub trials: usize,
    pub capacities: Vec<f64>,
    pub mean: f64,
    /// `|C - mean|` per trial.
    pub deviations: Vec<f64>,
    /// `min(M, (A_c/d) / ln(A_c/d))`.
    pub s: f64,
    pub t_grid: Vec<f64>,
    pub empirical_tail: Vec<f64>,
    /// Reference curve `exp(-2 t^2 / s)`.
    pub lemma_bound: Vec<f64>,
}

impl ConcentrationReport {
    /// Fraction of trials with deviation strictly above `t`.
    pub fn tail_at(&self, t: f64) -> f64 {
        self.deviations.iter().filter(|&&v| v > t).count() as f64 / self.trials as f64
    }

    /// Grid points where the empirical tail exceeds the reference curve.
    pub fn violations(&self) -> Vec<f64> {
        self.t_grid
            .iter()
            .zip(self.empirical_tail.iter().zip(&self.lemma_bound))
            .filter(|(_, (e, b))| e > b)
            .map(|(t, _)| *t)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "empirical_tail", "lemma_bound"])?;
        for i in 0..self.t_grid.len() {
            w.write_record([
                format!("{:.16e}", self.t_grid[i]),
                format!("{:.16e}", self.empirical_tail[i]),
                format!("{:.16e}", self.lemma_bound[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SNR used by [`concentration_check`].
pub const CONCENTRATION_SNR: f64 = 10.0;
/// Grid points in `t`, spaced `sqrt(s) / 8` apart.
pub const CONCENTRATION_GRID: usize = 41;

pub fn concentration_check(a_c: f64, d: f64, m: usize, trials: usize, seed: u64) -> Result<ConcentrationReport> {
    concentration_check_with(a_c, d, m, trials, seed, CONCENTRATION_SNR)
}

pub fn concentration_check_with(a_c: f64, d: f64, m: usize, trials: usize, seed: u64, rho: f64) -> Result<ConcentrationReport> {
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("concentration needs at least 100 trials, got {trials}")));
    }
    let capacities = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let link = random_los_link(m, a_c, d, rho, seed, t)?;
            capacity_of(&link.matrix.entries, rho)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = capacities.iter().sum::<f64>() / trials as f64;
    let deviations: Vec<f64> = capacities.iter().map(|c| (c - mean).abs()).collect();
    let s = dof_scale(m, a_c, d);
    let mut report = ConcentrationReport {
        trials,
        capacities,
        mean,
        deviations,
        s,
        t_grid: Vec::new(),
        empirical_tail: Vec::new(),
        lemma_bound: Vec::new(),
    };
    for k in 0..CONCENTRATION_GRID {
        let t = k as f64 * s.sqrt() / 8.0;
        report.empirical_tail.push(report.tail_at(t));
        report.lemma_bound.push((-2.0 * t * t / s).exp());
        report.t_grid.push(t);
    }
    Ok(report)
}

/// Envelope of capacity deviations for a single-antenna link:
/// `log2(1 + rho) - log2(1 + rho c^2)` with `c` the amplitude floor.
pub fn scalar_deviation_envelope(a_c: f64, d: f64, rho: f64) -> f64 {
    let c = crate::channel::amplitude_floor(a_c, d);
    ((1.0 + rho).ln() - (1.0 + rho * c * c).ln()) / LN_2
}
