//! Oscillatory-integral machinery behind the correlation bound.
//!
//! Two groups of tools live here. The first is the one-dimensional lemma
//! families `int_0^1 e^{j 2 pi g(z)} / G(z) dz` with a hypothesis checker,
//! bound evaluation and the integration-by-parts identity. The second is the
//! link phase `g_{a,b}(w, z)` between two transmit nodes and a receive point
//! in normalized cluster coordinates, its derivative, the `U1/U2/U3` domain
//! split, the tilted-frame evaluation and the constant fits that go with
//! them.
//!
//! Normalized coordinates: transmit node `(x, y)` sits at
//! `(-sqrt(A_c) x, sqrt(A_c) y)`, receive point `(w, z)` at
//! `(d + sqrt(A_c) w, sqrt(A_c) z)`, all in `[0, 1]`.

use std::cell::Cell;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::unit_phasor;
use crate::error::{Error, Result};
use crate::geometry::{Point2, TiltedFrame};
use crate::quadrature::{integrate, integrate_real, panels_for_phase_rate, QuadOptions};
use crate::rng::{indexed_substream, substream};
use crate::stats::jackknife_complex;

/// Grid size used by the hypothesis checker.
pub const HYPOTHESIS_GRID: usize = 10_000;

/// Polynomial with coefficients in increasing degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn eval(&self, z: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// `p(z - z0)` expanded, for coefficients given around `z0`.
    pub fn shifted(around: &[f64], z0: f64) -> Poly {
        let n = around.len();
        let mut out = vec![0.0; n];
        for (k, c) in around.iter().enumerate() {
            // (z - z0)^k = sum_i binom(k, i) z^i (-z0)^{k-i}
            let mut binom = 1.0;
            for (i, o) in out.iter_mut().enumerate().take(k + 1) {
                *o += c * binom * (-z0).powi((k - i) as i32);
                binom = binom * (k - i) as f64 / (i + 1) as f64;
            }
        }
        Poly(out)
    }
}

/// Which lemma a phase integrand is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaMode {
    /// `|g'| >= c1`, bound `14 / (pi c1 c2)`.
    Mu,
    /// `|g'| >= c1 |z - z0|`, bound `sqrt(14 / (pi c1 c2))`.
    SqrtMu,
}

/// `int_0^1 e^{j 2 pi g(z)} / G(z) dz` with polynomial `g` and `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseIntegrand {
    pub family: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub g: Poly,
    pub big_g: Poly,
    pub c1: f64,
    pub c2: f64,
    pub z0: Option<f64>,
    pub mode: LemmaMode,
}

/// Minimum of `|p|` on `[0, 1]` for `deg p <= 2`.
fn min_abs_quadratic(p: &Poly) -> f64 {
    let mut candidates = vec![0.0, 1.0];
    let c = &p.0;
    if c.len() >= 3 && c[2] != 0.0 {
        let v = -c[1] / (2.0 * c[2]);
        if (0.0..=1.0).contains(&v) {
            candidates.push(v);
        }
    }
    let vals: Vec<f64> = candidates.iter().map(|&z| p.eval(z)).collect();
    if vals.iter().any(|v| *v <= 0.0) && vals.iter().any(|v| *v >= 0.0) {
        0.0
    } else {
        vals.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min)
    }
}

impl PhaseIntegrand {
    /// `g = c z`, `G = 1`.
    pub fn linear(c: f64) -> Self {
        Self {
            family: "linear",
            params: vec![("c", c)],
            g: Poly(vec![0.0, c]),
            big_g: Poly(vec![1.0]),
            c1: c.abs(),
            c2: 1.0,
            z0: None,
            mode: LemmaMode::Mu,
        }
    }

    /// `g = 0`, `G = 1`; fails the lemma hypotheses.
    pub fn flat() -> Self {
        Self {
            family: "flat",
            params: vec![],
            g: Poly(vec![0.0]),
            big_g: Poly(vec![1.0]),
            c1: 0.0,
            c2: 1.0,
            z0: None,
            mode: LemmaMode::Mu,
        }
    }

    /// Cubic phase `g = sign (a z + k z^2 + m z^3)` with a quadratic
    /// amplitude `G = alpha + beta z + gamma z^2`. Returns `None` when `g'`
    /// or `G` vanish on `[0, 1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn cubic(sign: f64, a: f64, k: f64, m: f64, alpha: f64, beta: f64, gamma: f64) -> Option<Self> {
        let g = Poly(vec![0.0, sign * a, sign * k, sign * m]);
        let big_g = Poly(vec![alpha, beta, gamma]);
        let c1 = min_abs_quadratic(&g.derivative());
        let c2 = min_abs_quadratic(&big_g);
        (c1 > 0.0 && c2 > 0.0).then(|| Self {
            family: "cubic",
            params: vec![("sign", sign), ("a", a), ("k", k), ("m", m), ("alpha", alpha), ("beta", beta), ("gamma", gamma)],
            g,
            big_g,
            c1,
            c2,
            z0: None,
            mode: LemmaMode::Mu,
        })
    }

    /// `g = sign ((c1 / 2)(z - z0)^2 + (k / 4)(z - z0)^4)`, `k >= 0`, with a
    /// quadratic amplitude.
    #[allow(clippy::too_many_arguments)]
    pub fn quartic_stationary(sign: f64, c1: f64, z0: f64, k: f64, alpha: f64, beta: f64, gamma: f64) -> Option<Self> {
        if !(c1 > 0.0 && k >= 0.0 && (0.0..=1.0).contains(&z0)) {
            return None;
        }
        let g = Poly::shifted(&[0.0, 0.0, sign * c1 / 2.0, 0.0, sign * k / 4.0], z0);
        let big_g = Poly(vec![alpha, beta, gamma]);
        let c2 = min_abs_quadratic(&big_g);
        (c2 > 0.0).then(|| Self {
            family: "quartic",
            params: vec![("sign", sign), ("c1", c1), ("z0", z0), ("k", k), ("alpha", alpha), ("beta", beta), ("gamma", gamma)],
            g,
            big_g,
            c1,
            c2,
            z0: Some(z0),
            mode: LemmaMode::SqrtMu,
        })
    }

    pub fn value(&self, z: f64) -> Complex64 {
        unit_phasor(self.g.eval(z)) / self.big_g.eval(z)
    }

    /// Largest `|g'|` on a grid, inflated slightly.
    fn max_rate(&self) -> f64 {
        let gp = self.g.derivative();
        (0..=256).map(|i| gp.eval(i as f64 / 256.0).abs()).fold(0.0, f64::max) * 1.1 + 1.0
    }

    pub fn params_string(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect::<Vec<_>>().join(";")
    }
}

/// Result of checking the lemma hypotheses on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisReport {
    pub g2_sign_changes: usize,
    pub big_g_prime_sign_changes: usize,
    /// `min |G| / c2` over the grid.
    pub amplitude_margin: f64,
    /// `min |g'| / c1` (or `min |g'| / (c1 |z - z0|)`) over the grid.
    pub slope_margin: f64,
    pub holds: bool,
}

fn sign_changes(values: impl Iterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in values {
        if v == 0.0 {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

pub fn check_hypotheses(p: &PhaseIntegrand) -> HypothesisReport {
    let grid: Vec<f64> = (0..=HYPOTHESIS_GRID).map(|i| i as f64 / HYPOTHESIS_GRID as f64).collect();
    let gp = p.g.derivative();
    let gpp = gp.derivative();
    let bgp = p.big_g.derivative();
    let g2 = sign_changes(grid.iter().map(|&z| gpp.eval(z)));
    let bg2 = sign_changes(grid.iter().map(|&z| bgp.eval(z)));
    let amplitude_margin = if p.c2 > 0.0 {
        grid.iter().map(|&z| p.big_g.eval(z).abs() / p.c2).fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let slope_margin = if p.c1 > 0.0 {
        grid.iter()
            .filter_map(|&z| {
                let need = match (p.mode, p.z0) {
                    (LemmaMode::SqrtMu, Some(z0)) => p.c1 * (z - z0).abs(),
                    _ => p.c1,
                };
                (need > 0.0).then(|| gp.eval(z).abs() / need)
            })
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let tol = 1.0 - 1e-12;
    let holds = g2 <= 2 && bg2 <= 2 && amplitude_margin >= tol && slope_margin >= tol;
    HypothesisReport { g2_sign_changes: g2, big_g_prime_sign_changes: bg2, amplitude_margin, slope_margin, holds }
}

/// Adaptive quadrature of the phase integral to absolute tolerance `tol`,
/// pre-split by the largest phase rate.
pub fn eval_phase_integral(p: &PhaseIntegrand, tol: f64) -> Result<Complex64> {
    let opts = QuadOptions::new(tol).with_panels(panels_for_phase_rate(p.max_rate(), 1.0).max(4));
    Ok(integrate(|z| p.value(z), 0.0, 1.0, opts)?.value)
}

/// Stated bound `14 / (pi c1 c2)` or its square root.
pub fn lemma_bound(mode: LemmaMode, c1: f64, c2: f64) -> Result<f64> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidParameter(format!("lemma constants must be positive, got c1 = {c1}, c2 = {c2}")));
    }
    let mu = 14.0 / (PI * c1 * c2);
    Ok(match mode {
        LemmaMode::Mu => mu,
        LemmaMode::SqrtMu => mu.sqrt(),
    })
}

/// Terms of the integration-by-parts identity
/// `int e^{j2pi g}/G = [e^{j2pi g}/(j2pi g' G)]_0^1 + int (g''G + g'G')/(j2pi (g'G)^2) e^{j2pi g}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbpTerms {
    pub lhs: Complex64,
    pub boundary: Complex64,
    pub remainder: Complex64,
    /// `(1/|g'(0)G(0)| + 1/|g'(1)G(1)|) c1 c2`, at most 2.
    pub boundary_constant: f64,
    /// `c1 c2 int |g''| / (g'^2 |G|)`, at most 6 by the telescoping argument.
    pub curvature_constant: f64,
    /// `c1 c2 int |G'| / (|g'| G^2)`, at most 6.
    pub amplitude_constant: f64,
}

impl IbpTerms {
    pub fn rhs(&self) -> Complex64 {
        self.boundary + self.remainder
    }

    /// Constant `K` such that the assembled estimate equals `K / (pi c1 c2)`.
    pub fn assembled_constant(&self) -> f64 {
        (self.boundary_constant + self.curvature_constant + self.amplitude_constant) / 2.0
    }
}

pub fn ibp_terms(p: &PhaseIntegrand, tol: f64) -> Result<IbpTerms> {
    if p.mode != LemmaMode::Mu || !(p.c1 > 0.0) {
        return Err(Error::InvalidInput("integration by parts needs a non-stationary phase".into()));
    }
    let gp = p.g.derivative();
    let gpp = gp.derivative();
    let bg = &p.big_g;
    let bgp = bg.derivative();
    let panels = panels_for_phase_rate(p.max_rate(), 1.0).max(4);
    let opts = QuadOptions::new(tol).with_panels(panels);
    let lhs = integrate(|z| p.value(z), 0.0, 1.0, opts)?.value;
    let j2pi = Complex64::new(0.0, 2.0 * PI);
    let edge = |z: f64| unit_phasor(p.g.eval(z)) / (j2pi * gp.eval(z) * bg.eval(z));
    let boundary = edge(1.0) - edge(0.0);
    let remainder = integrate(
        |z| {
            let (g1, g2, b0, b1) = (gp.eval(z), gpp.eval(z), bg.eval(z), bgp.eval(z));
            unit_phasor(p.g.eval(z)) * ((g2 * b0 + g1 * b1) / (g1 * b0).powi(2)) / j2pi
        },
        0.0,
        1.0,
        opts,
    )?
    .value;
    let real_opts = QuadOptions::new(tol).with_panels(8);
    let scale = p.c1 * p.c2;
    let curvature = integrate_real(|z| gpp.eval(z).abs() / (gp.eval(z).powi(2) * bg.eval(z).abs()), 0.0, 1.0, real_opts)?.0;
    let amplitude = integrate_real(|z| bgp.eval(z).abs() / (gp.eval(z).abs() * bg.eval(z).powi(2)), 0.0, 1.0, real_opts)?.0;
    let boundary_constant = scale * (1.0 / (gp.eval(0.0) * bg.eval(0.0)).abs() + 1.0 / (gp.eval(1.0) * bg.eval(1.0)).abs());
    Ok(IbpTerms {
        lhs,
        boundary,
        remainder,
        boundary_constant,
        curvature_constant: scale * curvature,
        amplitude_constant: scale * amplitude,
    })
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

fn random_amplitude<R: Rng>(rng: &mut R) -> (f64, f64, f64) {
    let alpha = log_uniform(rng, 0.5, 5.0);
    let beta = rng.random_range(-0.5..1.0) * alpha;
    let gamma = rng.random_range(-0.4..0.8) * alpha;
    (alpha, beta, gamma)
}

/// Random integrands from the non-stationary family; only those passing the
/// hypothesis checker are returned.
pub fn lemma5_family(count: usize, seed: u64) -> Vec<PhaseIntegrand> {
    let mut rng = substream(seed, "lemma5-family");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let a = log_uniform(&mut rng, 0.3, 200.0);
        let k = rng.random_range(-0.45..2.0) * a;
        let m = rng.random_range(-0.3..1.0) * a;
        let (alpha, beta, gamma) = random_amplitude(&mut rng);
        if let Some(p) = PhaseIntegrand::cubic(sign, a, k, m, alpha, beta, gamma) {
            if check_hypotheses(&p).holds {
                out.push(p);
            }
        }
    }
    out
}

/// Random integrands with a stationary point.
pub fn lemma6_family(count: usize, seed: u64) -> Vec<PhaseIntegrand> {
    let mut rng = substream(seed, "lemma6-family");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let c1 = log_uniform(&mut rng, 0.5, 400.0);
        let z0 = if rng.random::<f64>() < 0.2 { if rng.random::<bool>() { 0.0 } else { 1.0 } } else { rng.random::<f64>() };
        let k = rng.random::<f64>() * 4.0 * c1;
        let (alpha, beta, gamma) = random_amplitude(&mut rng);
        if let Some(p) = PhaseIntegrand::quartic_stationary(sign, c1, z0, k, alpha, beta, gamma) {
            if check_hypotheses(&p).holds {
                out.push(p);
            }
        }
    }
    out
}

/// One row of a lemma bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub family: &'static str,
    pub params: String,
    pub integral_mag: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Evaluates every integrand and compares it with its lemma bound. Integrands
/// failing the hypothesis checker are rejected.
pub fn check_lemma_bounds(family: &[PhaseIntegrand], tol: f64) -> Result<Vec<BoundCheck>> {
    family
        .par_iter()
        .map(|p| {
            if !check_hypotheses(p).holds {
                return Err(Error::Domain(format!("{} integrand {} fails the lemma hypotheses", p.family, p.params_string())));
            }
            let integral_mag = eval_phase_integral(p, tol)?.norm();
            let bound = lemma_bound(p.mode, p.c1, p.c2)?;
            Ok(BoundCheck { family: p.family, params: p.params_string(), integral_mag, bound, pass: integral_mag <= bound })
        })
        .collect()
}

pub fn write_bound_csv<W: Write>(rows: &[BoundCheck], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "params", "integral_mag", "bound", "pass"])?;
    for r in rows {
        w.write_record([
            r.family.to_string(),
            r.params.clone(),
            format!("{:.16e}", r.integral_mag),
            format!("{:.16e}", r.bound),
            r.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two transmit nodes of a cluster pair in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub a_c: f64,
    pub d: f64,
    pub x_a: f64,
    pub x_b: f64,
    pub y_a: f64,
    pub y_b: f64,
}

impl LinkGeometry {
    pub fn new(x_a: f64, x_b: f64, y_a: f64, y_b: f64, a_c: f64, d: f64) -> Result<Self> {
        if !(a_c > 0.0 && d > 0.0) {
            return Err(Error::InvalidParameter("a_c and d must be positive".into()));
        }
        Ok(Self { a_c, d, x_a, x_b, y_a, y_b })
    }

    /// `d / sqrt(A_c)`.
    pub fn big_d(&self) -> f64 {
        self.d / self.a_c.sqrt()
    }

    /// `sqrt(A_c)/d`, the slope separating `U1` from `U3`.
    pub fn slope(&self) -> f64 {
        self.a_c.sqrt() / self.d
    }

    /// Physical distances (in wavelengths) from `x_a` and `x_b` to `(w, z)`.
    pub fn distances(&self, w: f64, z: f64) -> (f64, f64) {
        let s = self.a_c.sqrt();
        let dd = self.big_d();
        (s * (dd + self.x_a + w).hypot(self.y_a - z), s * (dd + self.x_b + w).hypot(self.y_b - z))
    }

    /// `g_{a,b}(w, z)`, difference of the two distances, evaluated without
    /// cancellation.
    pub fn g(&self, w: f64, z: f64) -> f64 {
        let dd = self.big_d();
        let (ua, ub) = (dd + self.x_a + w, dd + self.x_b + w);
        let num = (self.x_a - self.x_b) * (ua + ub) + (self.y_a - self.y_b) * (self.y_a + self.y_b - 2.0 * z);
        if num == 0.0 {
            return 0.0;
        }
        let (sa, sb) = self.distances(w, z);
        self.a_c * num / (sa + sb)
    }

    /// `g_{a,b}` from its path-integral representation: along `x` at height
    /// `y_a`, then along `y` at abscissa `x_b`.
    pub fn g_integral_form(&self, w: f64, z: f64, tol: f64) -> Result<f64> {
        let dd = self.big_d();
        let opts = QuadOptions::new(tol).with_panels(2);
        let horizontal = integrate_real(
            |x| {
                let u = dd + x + w;
                u / u.hypot(self.y_a - z)
            },
            self.x_a,
            self.x_b,
            opts,
        )?
        .0;
        let vertical = integrate_real(
            |y| {
                let u = dd + self.x_b + w;
                (y - z) / u.hypot(y - z)
            },
            self.y_a,
            self.y_b,
            opts,
        )?
        .0;
        Ok(-self.a_c.sqrt() * (horizontal + vertical))
    }

    /// `G_{a,b} = r_a r_b / d^2`.
    pub fn big_g(&self, w: f64, z: f64) -> f64 {
        let (sa, sb) = self.distances(w, z);
        (sa / self.d) * (sb / self.d)
    }

    /// The two terms of `dg/dz` in closed form.
    pub fn dg_dz_terms(&self, w: f64, z: f64) -> (f64, f64) {
        let dd = self.big_d();
        let s = self.a_c.sqrt();
        let ua = dd + self.x_a + w;
        let ub = dd + self.x_b + w;
        (s * (z - self.y_a) / ua.hypot(z - self.y_a), s * (self.y_b - z) / ub.hypot(self.y_b - z))
    }

    pub fn dg_dz_closed(&self, w: f64, z: f64) -> f64 {
        let (t1, t2) = self.dg_dz_terms(w, z);
        t1 + t2
    }

    /// `dg/dz` through its two-integral representation, each integral
    /// evaluated by adaptive quadrature to relative accuracy ~`rel_tol`.
    pub fn dg_dz(&self, w: f64, z: f64, rel_tol: f64) -> Result<f64> {
        let dd = self.big_d();
        let ub = dd + self.x_b + w;
        let za = z - self.y_a;
        let f1 = |x: f64| {
            let u = dd + x + w;
            za * u / (u * u + za * za).powf(1.5)
        };
        let f2 = |y: f64| ub * ub / (ub * ub + (z - y).powi(2)).powf(1.5);
        let scale1 = (za.abs() / (dd * dd)).max(f64::MIN_POSITIVE) * (self.x_b - self.x_a).abs();
        let scale2 = (self.y_b - self.y_a).abs() / ub;
        let t1 = if self.x_a == self.x_b {
            0.0
        } else {
            integrate_real(f1, self.x_a, self.x_b, QuadOptions::new(rel_tol * scale1).with_panels(2))?.0
        };
        let t2 = if self.y_a == self.y_b {
            0.0
        } else {
            integrate_real(f2, self.y_a, self.y_b, QuadOptions::new(rel_tol * scale2).with_panels(4))?.0
        };
        Ok(self.a_c.sqrt() * (t1 + t2))
    }

    /// Central difference `(g(z + h) - g(z - h)) / 2h`, with each distance
    /// difference formed from the difference of squares.
    pub fn dg_dz_central(&self, w: f64, z: f64, h: f64) -> f64 {
        let dd = self.big_d();
        let s = self.a_c.sqrt();
        let step = |x: f64, y: f64| {
            let u = dd + x + w;
            let up = u.hypot(y - z - h);
            let dn = u.hypot(y - z + h);
            // up - dn = ((y-z-h)^2 - (y-z+h)^2) / (up + dn)
            s * (-4.0 * h * (y - z)) / (up + dn)
        };
        (step(self.x_a, self.y_a) - step(self.x_b, self.y_b)) / (2.0 * h)
    }

    /// Upper bound on `|grad g|` in cycles per unit normalized length.
    fn phase_rate(&self) -> f64 {
        let sep = (self.x_b - self.x_a).hypot(self.y_b - self.y_a);
        self.a_c * sep / self.d * 1.1 + 1.0
    }

    /// `int_0^1 int_0^1 e^{j 2 pi g(w,z)} / G(w,z) dw dz`.
    pub fn receive_integral(&self, tol: f64) -> Result<Complex64> {
        let rate = self.phase_rate();
        let panels = panels_for_phase_rate(rate, 1.0).max(2);
        nested_2d(|w, z| unit_phasor(self.g(w, z)) / self.big_g(w, z), &[0.0, 1.0], |_| (0.0, 1.0), panels, panels, tol)
    }
}

/// Nested adaptive quadrature over `w` in consecutive `breaks` and `z` in
/// `z_range(w)`.
fn nested_2d<F, B>(f: F, breaks: &[f64], z_range: B, w_panels: usize, z_panels: usize, tol: f64) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Complex64,
    B: Fn(f64) -> (f64, f64),
{
    let failure = Cell::new(None::<Error>);
    let inner = |w: f64| {
        let (lo, hi) = z_range(w);
        if hi <= lo {
            return Complex64::new(0.0, 0.0);
        }
        match integrate(|z| f(w, z), lo, hi, QuadOptions::new(tol / 2.0).with_panels(z_panels)) {
            Ok(r) => r.value,
            Err(e) => {
                failure.set(Some(e));
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let mut total = Complex64::new(0.0, 0.0);
    let span = breaks[breaks.len() - 1] - breaks[0];
    for pair in breaks.windows(2) {
        if pair[1] <= pair[0] {
            continue;
        }
        let share = ((pair[1] - pair[0]) / span * w_panels as f64).ceil().max(1.0) as usize;
        total += integrate(inner, pair[0], pair[1], QuadOptions::new(tol / 2.0).with_panels(share))?.value;
        if let Some(e) = failure.take() {
            return Err(e);
        }
    }
    Ok(total)
}

/// Free-function form of [`LinkGeometry::g`].
#[allow(clippy::too_many_arguments)]
pub fn g_ab(w: f64, z: f64, x_a: f64, x_b: f64, y_a: f64, y_b: f64, a_c: f64, d: f64) -> Result<f64> {
    Ok(LinkGeometry::new(x_a, x_b, y_a, y_b, a_c, d)?.g(w, z))
}

/// Free-function form of [`LinkGeometry::dg_dz`].
#[allow(clippy::too_many_arguments)]
pub fn dg_dz(w: f64, z: f64, x_a: f64, x_b: f64, y_a: f64, y_b: f64, a_c: f64, d: f64) -> Result<f64> {
    LinkGeometry::new(x_a, x_b, y_a, y_b, a_c, d)?.dg_dz(w, z, 1e-13)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainLabel {
    U1,
    U2,
    U3,
}

/// `|y_a - y_b| - (sqrt(A_c)/d) |x_b - x_a|`.
pub fn domain_margin(x_a: f64, x_b: f64, y_a: f64, y_b: f64, a_c: f64, d: f64) -> f64 {
    (y_a - y_b).abs() - a_c.sqrt() / d * (x_b - x_a).abs()
}

pub fn classify_domain(x_a: f64, x_b: f64, y_a: f64, y_b: f64, a_c: f64, d: f64, eps3: f64) -> DomainLabel {
    let v = domain_margin(x_a, x_b, y_a, y_b, a_c, d);
    if v >= eps3 {
        DomainLabel::U1
    } else if v > 0.0 {
        DomainLabel::U2
    } else {
        DomainLabel::U3
    }
}

/// Receive integral in the original and the tilted frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedCheck {
    pub original: Complex64,
    pub rotated: Complex64,
    /// `|x_b' - x_a'|` in normalized units.
    pub axis_length: f64,
    /// `(d / A_c^{3/4}) ((x_b-x_a)^2 + (y_b-y_a)^2)^{-1/4}`.
    pub bound_scale: f64,
}

impl TiltedCheck {
    pub fn ratio(&self) -> f64 {
        self.rotated.norm() / self.bound_scale
    }
}

/// Evaluates the receive integral of a `U3` tuple in a frame whose first
/// axis runs along `x_a - x_b`; the receive square becomes a tilted square
/// integrated slice by slice.
pub fn tilted_integral(geom: &LinkGeometry, tol: f64) -> Result<TiltedCheck> {
    let (x_a, x_b, y_a, y_b) = (geom.x_a, geom.x_b, geom.y_a, geom.y_b);
    if x_a == x_b && y_a == y_b {
        return Err(Error::InvalidInput("tilted frame needs distinct transmit nodes".into()));
    }
    if classify_domain(x_a, x_b, y_a, y_b, geom.a_c, geom.d, 0.5) != DomainLabel::U3 {
        return Err(Error::OutOfScope("tilted evaluation applies to U3 tuples".into()));
    }
    let s = geom.a_c.sqrt();
    let pa = Point2::new(-s * x_a, s * y_a);
    let pb = Point2::new(-s * x_b, s * y_b);
    let corners = [
        Point2::new(geom.d, 0.0),
        Point2::new(geom.d + s, 0.0),
        Point2::new(geom.d + s, s),
        Point2::new(geom.d, s),
    ];
    let origin = Point2::new(geom.d + 0.5 * s, 0.5 * s);
    let frame = TiltedFrame::new(origin, pa, pb)?;
    let local: Vec<Point2> = corners.iter().map(|c| frame.to_local(c)).collect();
    let mut breaks: Vec<f64> = local.iter().map(|p| p.x).collect();
    breaks.sort_by(f64::total_cmp);
    let z_range = |u: f64| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..4 {
            let (p, q) = (local[i], local[(i + 1) % 4]);
            if (p.x - u) * (q.x - u) <= 0.0 && p.x != q.x {
                let v = p.y + (u - p.x) * (q.y - p.y) / (q.x - p.x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    };
    let d2 = geom.d * geom.d;
    let phi = |u: f64, v: f64| {
        let p = frame.to_global(&Point2::new(u, v));
        let ra = pa.distance(&p);
        let rb = pb.distance(&p);
        let diff = (pb.sub(&pa)).dot(&Point2::new(2.0 * p.x - pa.x - pb.x, 2.0 * p.y - pa.y - pb.y)) / (ra + rb);
        unit_phasor(diff) * (d2 / (ra * rb))
    };
    // Physical phase rate is the normalized rate divided by sqrt(A_c).
    let rate = geom.phase_rate() / s;
    let panels = panels_for_phase_rate(rate, s * std::f64::consts::SQRT_2).max(2);
    let rotated = nested_2d(phi, &breaks, z_range, panels, panels, tol * geom.a_c)? / geom.a_c;
    let original = geom.receive_integral(tol)?;
    let axis = frame.to_local(&pa).x - frame.to_local(&pb).x;
    let sep = (x_b - x_a).hypot(y_b - y_a);
    Ok(TiltedCheck {
        original,
        rotated,
        axis_length: axis.abs() / s,
        bound_scale: geom.d / geom.a_c.powf(0.75) / sep.sqrt(),
    })
}

/// Extreme ratio found on a sweep and the constant derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantFit {
    /// Smallest (lower bounds) or largest (upper bounds) observed ratio.
    pub extreme: f64,
    /// `extreme / 2` for lower bounds, `2 extreme` for upper bounds.
    pub constant: f64,
    pub samples: usize,
}

/// Safety factor between the observed extreme and the frozen constant.
pub const FIT_MARGIN: f64 = 2.0;

/// Parameter sweep used to fit or validate a constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub a_c_lo: f64,
    pub a_c_hi: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Calibration and validation sweeps. Each pair has disjoint `A_c` ranges.
pub mod sweeps {
    use super::SweepSpec;

    pub const K7_CALIBRATION: SweepSpec = SweepSpec { a_c_lo: 1e2, a_c_hi: 1e3, samples: 2000, seed: 7 };
    pub const K7_VALIDATION: SweepSpec = SweepSpec { a_c_lo: 1e3, a_c_hi: 1e4, samples: 2000, seed: 107 };
    pub const K9_CALIBRATION: SweepSpec = SweepSpec { a_c_lo: 1e2, a_c_hi: 1e3, samples: 2000, seed: 9 };
    pub const K9_VALIDATION: SweepSpec = SweepSpec { a_c_lo: 1e3, a_c_hi: 1e4, samples: 2000, seed: 109 };
    pub const K8_CALIBRATION: SweepSpec = SweepSpec { a_c_lo: 1e2, a_c_hi: 3e2, samples: 120, seed: 8 };
    pub const K8_VALIDATION: SweepSpec = SweepSpec { a_c_lo: 3e2, a_c_hi: 1e3, samples: 120, seed: 108 };
    pub const K10_CALIBRATION: SweepSpec = SweepSpec { a_c_lo: 1e2, a_c_hi: 3e2, samples: 120, seed: 10 };
    pub const K10_VALIDATION: SweepSpec = SweepSpec { a_c_lo: 3e2, a_c_hi: 1e3, samples: 120, seed: 110 };
}

/// Margin used to define `U1` in the derivative sweeps.
pub const SWEEP_EPS3: f64 = 0.05;
/// Quadrature tolerance for receive integrals in sweeps.
pub const SWEEP_TOL: f64 = 1e-8;

/// Draws `(A_c, d)` with `A_c` log-uniform in the sweep range and `d`
/// log-uniform in `[sqrt(A_c), A_c^{d_exp}]`.
fn draw_scale<R: Rng>(rng: &mut R, spec: &SweepSpec, d_exp: f64) -> (f64, f64) {
    let a_c = log_uniform(rng, spec.a_c_lo, spec.a_c_hi);
    let d = log_uniform(rng, a_c.sqrt(), a_c.powf(d_exp));
    (a_c, d)
}

/// Rejection-samples a `U1` tuple.
fn draw_u1<R: Rng>(rng: &mut R, a_c: f64, d: f64, eps3: f64) -> LinkGeometry {
    loop {
        let (x_a, x_b, y_a, y_b) = (rng.random(), rng.random(), rng.random(), rng.random());
        if classify_domain(x_a, x_b, y_a, y_b, a_c, d, eps3) == DomainLabel::U1 {
            return LinkGeometry { a_c, d, x_a, x_b, y_a, y_b };
        }
    }
}

fn draw_u3<R: Rng>(rng: &mut R, a_c: f64, d: f64) -> LinkGeometry {
    loop {
        let (x_a, x_b, y_a, y_b): (f64, f64, f64, f64) = (rng.random(), rng.random(), rng.random(), rng.random());
        if x_a != x_b && classify_domain(x_a, x_b, y_a, y_b, a_c, d, 0.5) == DomainLabel::U3 {
            return LinkGeometry { a_c, d, x_a, x_b, y_a, y_b };
        }
    }
}

/// Ratios `|dg/dz| / ((A_c/d) margin)` on `U1`.
pub fn k7_ratios(spec: &SweepSpec) -> Vec<f64> {
    let mut rng = substream(spec.seed, "k7-sweep");
    (0..spec.samples)
        .map(|_| {
            let (a_c, d) = draw_scale(&mut rng, spec, 1.0);
            let geom = draw_u1(&mut rng, a_c, d, SWEEP_EPS3);
            let (w, z): (f64, f64) = (rng.random(), rng.random());
            let v = domain_margin(geom.x_a, geom.x_b, geom.y_a, geom.y_b, a_c, d);
            geom.dg_dz_closed(w, z).abs() / (a_c / d * v)
        })
        .collect()
}

/// Ratios `|dg/dz| / ((A_c^{3/2}/d^2) |x_b - x_a| |z - y_a|)` with `y_a = y_b`.
pub fn k9_ratios(spec: &SweepSpec) -> Vec<f64> {
    let mut rng = substream(spec.seed, "k9-sweep");
    (0..spec.samples)
        .map(|_| {
            let (a_c, d) = draw_scale(&mut rng, spec, 0.75);
            let y: f64 = rng.random();
            let (x_a, x_b): (f64, f64) = (rng.random(), rng.random());
            let geom = LinkGeometry { a_c, d, x_a, x_b, y_a: y, y_b: y };
            let (w, z): (f64, f64) = (rng.random(), rng.random());
            geom.dg_dz_closed(w, z).abs() / (a_c.powf(1.5) / (d * d) * (x_b - x_a).abs() * (z - y).abs())
        })
        .collect()
}

/// Ratios `|I| (A_c/d) margin` on `U1`, `I` the receive integral.
pub fn k8_ratios(spec: &SweepSpec) -> Result<Vec<f64>> {
    let mut rng = substream(spec.seed, "k8-sweep");
    let geoms: Vec<LinkGeometry> = (0..spec.samples)
        .map(|_| {
            let (a_c, d) = draw_scale(&mut rng, spec, 1.0);
            draw_u1(&mut rng, a_c, d, SWEEP_EPS3)
        })
        .collect();
    geoms
        .par_iter()
        .map(|g| {
            let v = domain_margin(g.x_a, g.x_b, g.y_a, g.y_b, g.a_c, g.d);
            Ok(g.receive_integral(SWEEP_TOL)?.norm() * (g.a_c / g.d) * v)
        })
        .collect()
}

/// Ratios `|I| / ((d / A_c^{3/4}) sep^{-1/2})` on `U3` with
/// `sqrt(A_c) <= d <= A_c^{3/4}`.
pub fn k10_ratios(spec: &SweepSpec) -> Result<Vec<f64>> {
    let mut rng = substream(spec.seed, "k10-sweep");
    let geoms: Vec<LinkGeometry> = (0..spec.samples)
        .map(|_| {
            let (a_c, d) = draw_scale(&mut rng, spec, 0.75);
            draw_u3(&mut rng, a_c, d)
        })
        .collect();
    geoms
        .par_iter()
        .map(|g| {
            let sep = (g.x_b - g.x_a).hypot(g.y_b - g.y_a);
            Ok(g.receive_integral(SWEEP_TOL)?.norm() / (g.d / g.a_c.powf(0.75) / sep.sqrt()))
        })
        .collect()
}

pub fn fit_lower(ratios: &[f64]) -> ConstantFit {
    let extreme = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ConstantFit { extreme, constant: extreme / FIT_MARGIN, samples: ratios.len() }
}

pub fn fit_upper(ratios: &[f64]) -> ConstantFit {
    let extreme = ratios.iter().copied().fold(0.0, f64::max);
    ConstantFit { extreme, constant: extreme * FIT_MARGIN, samples: ratios.len() }
}

/// Contributions of `U1`, `U2`, `U3` to `S = E_x |I(x)|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDecomposition {
    pub a_c: f64,
    pub d: f64,
    pub eps3: f64,
    pub u1: f64,
    pub u2: f64,
    pub u3: f64,
    pub u1_se: f64,
    pub u2_se: f64,
    pub u3_se: f64,
    pub samples: usize,
}

impl SDecomposition {
    pub fn total(&self) -> f64 {
        self.u1 + self.u2 + self.u3
    }
}

/// Monte Carlo over transmit pairs of `|I|^2` split by domain label, with
/// 20 jackknife blocks per label.
pub fn s_decomposition(a_c: f64, d: f64, samples: usize, seed: u64, eps3: f64) -> Result<SDecomposition> {
    const BLOCKS: usize = 20;
    if samples < BLOCKS {
        return Err(Error::InvalidParameter(format!("need at least {BLOCKS} samples")));
    }
    let per_block: Vec<usize> = (0..BLOCKS).map(|b| samples / BLOCKS + usize::from(b < samples % BLOCKS)).collect();
    let blocks: Vec<[f64; 3]> = (0..BLOCKS)
        .into_par_iter()
        .map(|b| {
            let mut rng = indexed_substream(seed, "s-decomposition", b as u64);
            let mut acc = [0.0; 3];
            for _ in 0..per_block[b] {
                let geom = LinkGeometry { a_c, d, x_a: rng.random(), x_b: rng.random(), y_a: rng.random(), y_b: rng.random() };
                let mag2 = geom.receive_integral(SWEEP_TOL)?.norm_sqr();
                let slot = match classify_domain(geom.x_a, geom.x_b, geom.y_a, geom.y_b, a_c, d, eps3) {
                    DomainLabel::U1 => 0,
                    DomainLabel::U2 => 1,
                    DomainLabel::U3 => 2,
                };
                acc[slot] += mag2;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = [(0.0, 0.0); 3];
    for (slot, o) in out.iter_mut().enumerate() {
        let sums: Vec<Complex64> = blocks.iter().map(|b| Complex64::new(b[slot], 0.0)).collect();
        let (mean, se) = jackknife_complex(&sums, &per_block);
        *o = (mean.re, se);
    }
    Ok(SDecomposition {
        a_c,
        d,
        eps3,
        u1: out[0].0,
        u2: out[1].0,
        u3: out[2].0,
        u1_se: out[0].1,
        u2_se: out[1].1,
        u3_se: out[2].1,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    #[test]
    fn polynomial_helpers() {
        let p = Poly::shifted(&[1.0, 2.0, 3.0], 0.5);
        for z in [0.0, 0.3, 1.0] {
            let t = z - 0.5;
            assert!((p.eval(z) - (1.0 + 2.0 * t + 3.0 * t * t)).abs() < 1e-14);
        }
        assert_eq!(Poly(vec![1.0, 2.0, 3.0]).derivative(), Poly(vec![2.0, 6.0]));
    }

    #[test]
    fn linear_phase_closed_form() {
        for c in [0.7, 3.0, 25.5, 140.0] {
            let p = PhaseIntegrand::linear(c);
            let v = eval_phase_integral(&p, 1e-10).unwrap();
            let expect = (unit_phasor(c) - 1.0) / Complex64::new(0.0, 2.0 * PI * c);
            assert!((v - expect).norm() < 1e-10);
            assert!(v.norm() <= lemma_bound(LemmaMode::Mu, c, 1.0).unwrap());
        }
    }

    #[test]
    fn flat_phase_is_one_and_fails_hypotheses() {
        let p = PhaseIntegrand::flat();
        assert!((eval_phase_integral(&p, 1e-12).unwrap() - 1.0).norm() < 1e-12);
        assert!(!check_hypotheses(&p).holds);
    }

    #[test]
    fn quadratic_stationary_phase_against_dense_midpoint_rule() {
        let p = PhaseIntegrand::quartic_stationary(1.0, 10.0, 0.0, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(check_hypotheses(&p).holds);
        let v = eval_phase_integral(&p, 1e-10).unwrap();
        let n = 1_000_000;
        let h = 1.0 / n as f64;
        let oracle: Complex64 = (0..n).map(|i| unit_phasor(5.0 * ((i as f64 + 0.5) * h).powi(2))).sum::<Complex64>() * h;
        assert!((v - oracle).norm() < 1e-8, "{v} vs {oracle}");
        let bound = lemma_bound(LemmaMode::SqrtMu, 10.0, 1.0).unwrap();
        assert!((bound - 0.6676).abs() < 1e-4);
        assert!(v.norm() <= bound);
    }

    #[test]
    fn lemma_bound_arithmetic() {
        assert!((lemma_bound(LemmaMode::Mu, 1.0, 1.0).unwrap() - 4.4563).abs() < 1e-4);
        assert!((lemma_bound(LemmaMode::SqrtMu, 14.0 / PI, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(lemma_bound(LemmaMode::Mu, 0.0, 1.0), Err(Error::InvalidParameter(_))));
        for (c1, c2) in [(0.5, 0.5), (1.0, 4.0), (3.0, 2.0), (100.0, 1.0)] {
            let mu = lemma_bound(LemmaMode::Mu, c1, c2).unwrap();
            let sq = lemma_bound(LemmaMode::SqrtMu, c1, c2).unwrap();
            assert_eq!(mu >= sq, 14.0 / (PI * c1 * c2) >= 1.0);
        }
    }

    #[test]
    fn hypothesis_checker_counts_sign_changes() {
        // g'' = 2k + 6mz changes sign once when -k/3m in (0,1).
        let p = PhaseIntegrand::cubic(1.0, 5.0, -1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let r = check_hypotheses(&p);
        assert_eq!(r.g2_sign_changes, 1);
        assert_eq!(r.big_g_prime_sign_changes, 0);
        assert!(r.holds);
        // A G that dips below the claimed c2 is caught.
        let mut bad = p.clone();
        bad.c2 = 2.0;
        assert!(!check_hypotheses(&bad).holds);
        assert!(PhaseIntegrand::cubic(1.0, 1.0, -1.0, 0.0, 1.0, 0.0, 0.0).is_none());
    }

    #[test]
    fn family_integrals_respect_bounds() {
        let mut all = lemma5_family(60, 1);
        all.extend(lemma6_family(60, 1));
        let rows = check_lemma_bounds(&all, 1e-8).unwrap();
        assert_eq!(rows.len(), 120);
        assert!(rows.iter().all(|r| r.pass));
        let mut buf = Vec::new();
        write_bound_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("family,params,integral_mag,bound,pass\n"));
    }

    #[test]
    fn integration_by_parts_identity() {
        for p in lemma5_family(25, 3) {
            let t = ibp_terms(&p, 1e-11).unwrap();
            assert!((t.lhs - t.rhs()).norm() < 1e-9, "{}", p.params_string());
            assert!(t.boundary_constant <= 2.0 + 1e-9);
            assert!(t.curvature_constant <= 6.0 + 1e-6);
            assert!(t.amplitude_constant <= 6.0 + 1e-6);
            // The assembled estimate is at most 7 / (pi c1 c2).
            assert!(t.assembled_constant() <= 7.0 + 1e-6);
            assert!(t.lhs.norm() <= t.assembled_constant() / (PI * p.c1 * p.c2) + 1e-9);
        }
    }

    #[test]
    fn g_vanishes_for_identical_nodes() {
        let geom = LinkGeometry::new(0.3, 0.3, 0.6, 0.6, 400.0, 40.0).unwrap();
        for (w, z) in [(0.0, 0.0), (0.5, 0.9), (1.0, 0.2)] {
            assert_eq!(geom.g(w, z), 0.0);
            assert_eq!(geom.g_integral_form(w, z, 1e-12).unwrap(), 0.0);
            assert_eq!(geom.dg_dz(w, z, 1e-12).unwrap(), 0.0);
            assert_eq!(geom.dg_dz_closed(w, z), 0.0);
        }
    }

    #[test]
    fn g_is_the_difference_of_distances() {
        let geom = LinkGeometry::new(0.1, 0.8, 0.2, 0.7, 100.0, 20.0).unwrap();
        let (w, z) = (0.4, 0.5);
        let pa = Point2::new(-10.0 * 0.1, 10.0 * 0.2);
        let pb = Point2::new(-10.0 * 0.8, 10.0 * 0.7);
        let p = Point2::new(20.0 + 10.0 * w, 10.0 * z);
        assert!((geom.g(w, z) - (pa.distance(&p) - pb.distance(&p))).abs() < 1e-12);
        assert!((geom.big_g(w, z) - pa.distance(&p) * pb.distance(&p) / 400.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_routes_agree() {
        let mut rng = substream(11, "test");
        for _ in 0..1000 {
            let a_c = log_uniform(&mut rng, 1e2, 1e6);
            let d = log_uniform(&mut rng, a_c.sqrt(), a_c);
            let geom = LinkGeometry { a_c, d, x_a: rng.random(), x_b: rng.random(), y_a: rng.random(), y_b: rng.random() };
            let (w, z): (f64, f64) = (rng.random(), rng.random());
            let exact = geom.dg_dz_closed(w, z);
            let quad = geom.dg_dz(w, z, 1e-13).unwrap();
            let fd = geom.dg_dz_central(w, z, 1e-6);
            assert!((quad - exact).abs() <= 1e-9 * exact.abs().max(1e-300), "quad {quad} vs {exact}");
            assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "fd {fd} vs {exact}");
        }
    }

    #[test]
    fn domain_labels() {
        assert_eq!(classify_domain(0.1, 0.9, 0.4, 0.4, 100.0, 10.0, 0.1), DomainLabel::U3);
        assert_eq!(classify_domain(0.5, 0.5, 0.0, 1.0, 100.0, 10.0, 0.5), DomainLabel::U1);
        assert_eq!(classify_domain(0.5, 0.5, 0.0, 0.3, 100.0, 10.0, 0.5), DomainLabel::U2);
    }

    #[test]
    fn domain_measures() {
        let (a_c, d, eps3) = (400.0, 50.0, 0.05);
        let mut rng = substream(5, "test");
        let n = 1_000_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let label = classify_domain(rng.random(), rng.random(), rng.random(), rng.random(), a_c, d, eps3);
            counts[label as usize] += 1;
        }
        let frac = |c: usize| c as f64 / n as f64;
        assert!(frac(counts[1]) <= 2.0 * eps3);
        assert!(frac(counts[2]) <= 2.0 * a_c.sqrt() / d);
        assert_eq!(counts.iter().sum::<usize>(), n);
    }

    #[test]
    fn tilted_frame_matches_original() {
        let geom = LinkGeometry::new(0.2, 0.7, 0.30, 0.45, 400.0, 30.0).unwrap();
        let t = tilted_integral(&geom, 1e-9).unwrap();
        assert!((t.original - t.rotated).norm() < 1e-8, "{} vs {}", t.original, t.rotated);
        let sep = (0.5f64).hypot(0.15);
        assert!((t.axis_length - sep).abs() < 1e-12);
        assert!(tilted_integral(&LinkGeometry::new(0.2, 0.2, 0.3, 0.3, 400.0, 30.0).unwrap(), 1e-9).is_err());
        assert!(matches!(
            tilted_integral(&LinkGeometry::new(0.5, 0.5, 0.0, 1.0, 400.0, 30.0).unwrap(), 1e-9),
            Err(Error::OutOfScope(_))
        ));
    }

    #[test]
    fn horizontal_pair_reduces_to_untilted_scale() {
        let geom = LinkGeometry::new(0.1, 0.6, 0.5, 0.5, 900.0, 60.0).unwrap();
        let t = tilted_integral(&geom, 1e-9).unwrap();
        let untilted = 60.0 / 900f64.powf(0.75) / 0.5f64.sqrt();
        assert!((t.bound_scale - untilted).abs() < 1e-12);
        assert!((t.original - t.rotated).norm() < 1e-8);
    }

    #[test]
    fn fits_apply_margin() {
        let lo = fit_lower(&[0.5, 0.4, 0.9]);
        assert_eq!((lo.extreme, lo.constant, lo.samples), (0.4, 0.2, 3));
        let hi = fit_upper(&[0.5, 0.4, 0.9]);
        assert_eq!((hi.extreme, hi.constant), (0.9, 1.8));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn g_representations_agree(x_a in 0.0..1.0f64, x_b in 0.0..1.0f64, y_a in 0.0..1.0f64, y_b in 0.0..1.0f64,
                                   w in 0.0..1.0f64, z in 0.0..1.0f64, la in 2.0..6.0f64, t in 0.0..1.0f64) {
            let a_c = 10f64.powf(la);
            let d = a_c.sqrt() * a_c.sqrt().powf(t);
            let geom = LinkGeometry::new(x_a, x_b, y_a, y_b, a_c, d).unwrap();
            let direct = geom.g(w, z);
            let path = geom.g_integral_form(w, z, 1e-13).unwrap();
            prop_assert!((direct - path).abs() <= 1e-8, "{direct} vs {path}");
        }

        #[test]
        fn labels_partition(x_a in 0.0..1.0f64, x_b in 0.0..1.0f64, y_a in 0.0..1.0f64, y_b in 0.0..1.0f64, eps3 in 0.001..0.999f64) {
            let v = domain_margin(x_a, x_b, y_a, y_b, 400.0, 40.0);
            let label = classify_domain(x_a, x_b, y_a, y_b, 400.0, 40.0, eps3);
            let hits = [v >= eps3, v > 0.0 && v < eps3, v <= 0.0];
            prop_assert!(hits.iter().filter(|h| **h).count() == 1);
            prop_assert!(hits[label as usize]);
        }
    }
}
