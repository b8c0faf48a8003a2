//! MIMO capacity and spectrum numerics.
//!
//! Capacities are `log2 det(I + rho (1/M) F F^H)` with `F` the normalized
//! channel, so `rho = G P0 / (N0 W d^2)`. All routes go through the
//! Hermitian eigendecomposition of `F F^H`; a Cholesky log-det is kept as a
//! cross-check.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{c0, channel_matrix, ChannelMatrix, MatrixSpec, PowerBudget};
use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::geometry::{facing_clusters, place_uniform};
use crate::rng::indexed_substream;

/// Tolerance below zero accepted for eigenvalues before clamping, relative
/// to `max(1, lambda_max)`.
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

/// Cluster-to-cluster link.
#[derive(Debug, Clone)]
pub struct MimoLink {
    pub matrix: ChannelMatrix,
    pub budget: PowerBudget,
    /// Transmit-side node count `M`.
    pub m: usize,
    pub cluster_area: f64,
    pub separation: f64,
}

impl MimoLink {
    pub fn new(matrix: ChannelMatrix, budget: PowerBudget, cluster_area: f64) -> Self {
        let m = matrix.cols();
        let separation = matrix.d;
        Self { matrix, budget, m, cluster_area, separation }
    }

    /// `G P0 / (N0 W d^2)`.
    pub fn rho(&self) -> f64 {
        self.budget.snr_linear()
    }

    /// Whether `sqrt(A_c) <= d <= A_c`. Outside this range capacity claims are
    /// flagged rather than rejected.
    pub fn in_lemma_range(&self) -> bool {
        self.cluster_area.sqrt() <= self.separation && self.separation <= self.cluster_area
    }
}

/// Builds a link between two facing `sqrt(a_c)` squares at separation `d`
/// with `m` uniform nodes on each side and SNR `rho`. Placement is drawn from
/// the `(seed, "link", trial)` stream.
pub fn random_los_link(m: usize, a_c: f64, d: f64, rho: f64, seed: u64, trial: u64) -> Result<MimoLink> {
    let (txd, rxd) = facing_clusters(a_c, d)?;
    let mut rng = indexed_substream(seed, "link", trial);
    let tx = place_uniform(m, txd, &mut rng)?;
    let rx = place_uniform(m, rxd, &mut rng)?;
    let matrix = channel_matrix(&tx, &rx, MatrixSpec::normalized(d))?;
    let budget = PowerBudget::with_snr(rho, m, &NetworkConfig::default(), d)?;
    Ok(MimoLink::new(matrix, budget, a_c))
}

/// Eigenvalues of `(1/M) F F^H` with their first two moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Descending, nonnegative.
    pub eigenvalues: Vec<f64>,
    pub m1: f64,
    pub m2: f64,
}

impl Spectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("empty spectrum".into()));
        }
        if eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericInput("non-finite eigenvalue".into()));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let floor = -NEGATIVE_EIGEN_TOL * eigenvalues[0].max(1.0);
        if let Some(bad) = eigenvalues.iter().find(|&&v| v < floor) {
            return Err(Error::NumericInput(format!("eigenvalue {bad:e} is materially negative")));
        }
        for v in eigenvalues.iter_mut() {
            *v = v.max(0.0);
        }
        let n = eigenvalues.len() as f64;
        let m1 = eigenvalues.iter().sum::<f64>() / n;
        let m2 = eigenvalues.iter().map(|v| v * v).sum::<f64>() / n;
        Ok(Self { eigenvalues, m1, m2 })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// `sum log2(1 + rho lambda_i)`.
    pub fn capacity(&self, rho: f64) -> f64 {
        self.eigenvalues.iter().map(|l| (rho * l).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
    }

    /// Writes `index,eigenvalue`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "eigenvalue"])?;
        for (i, v) in self.eigenvalues.iter().enumerate() {
            w.write_record([i.to_string(), format!("{v:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_finite(f: &DMatrix<Complex64>) -> Result<()> {
    if f.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NumericInput("channel matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Eigenvalues of `scale * F F^H` through the Hermitian solver, choosing the
/// smaller of `F F^H` and `F^H F` (same nonzero spectrum) and padding zeros.
fn gram_eigenvalues(f: &DMatrix<Complex64>, scale: f64) -> Vec<f64> {
    let (rows, cols) = f.shape();
    let gram = if rows <= cols { f * f.adjoint() } else { f.adjoint() * f };
    let gram = gram.map(|v| v * scale);
    let eig = SymmetricEigen::new(gram);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.resize(rows, 0.0);
    vals
}

/// Spectrum of `(1/M) F F^H`, `M` the transmit count.
pub fn eigen_spectrum(matrix: &ChannelMatrix) -> Result<Spectrum> {
    let f = matrix.normalized_entries();
    check_finite(&f)?;
    Spectrum::from_eigenvalues(gram_eigenvalues(&f, 1.0 / f.ncols() as f64))
}

/// `log2 det(I + rho (1/M) F F^H)` for a raw matrix `f`.
pub fn capacity_of(f: &DMatrix<Complex64>, rho: f64) -> Result<f64> {
    check_finite(f)?;
    if !(rho >= 0.0) || !rho.is_finite() {
        return Err(Error::NumericInput(format!("invalid snr {rho}")));
    }
    let spec = Spectrum::from_eigenvalues(gram_eigenvalues(f, 1.0 / f.ncols() as f64))?;
    Ok(spec.capacity(rho))
}

/// Capacity in bits per symbol of a link.
pub fn capacity_logdet(link: &MimoLink) -> Result<f64> {
    capacity_of(&link.matrix.normalized_entries(), link.rho())
}

/// Same quantity through a Cholesky factor of `I + rho (1/M) F F^H`.
pub fn capacity_cholesky(f: &DMatrix<Complex64>, rho: f64) -> Result<f64> {
    check_finite(f)?;
    let rows = f.nrows();
    let scale = rho / f.ncols() as f64;
    let a = DMatrix::<Complex64>::identity(rows, rows) + (f * f.adjoint()).map(|v| v * scale);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::NumericInput("I + rho F F^H not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..rows).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2)
}

/// Heuristic count of modes with `log2(1 + rho l) >= threshold log2(1 + rho l_max)`.
pub fn effective_dof(spectrum: &Spectrum, rho: f64, threshold: f64) -> Result<usize> {
    if spectrum.is_empty() {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!("threshold must be in (0,1), got {threshold}")));
    }
    let top = (rho * spectrum.max()).ln_1p();
    // Relative slack absorbs rounding between numerically equal eigenvalues.
    let cut = threshold * top * (1.0 - 1e-12);
    Ok(spectrum.eigenvalues.iter().filter(|&&l| (rho * l).ln_1p() >= cut).count())
}

/// Paley-Zygmund lower bounds on capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PzBound {
    /// Best value over the `t` grid.
    pub grid_max: f64,
    pub grid_t: f64,
    /// Value at `t = c0^2 / 2`, absent when that `t` is not below `m1`.
    pub fixed_value: Option<f64>,
    pub fixed_t: f64,
}

pub const PZ_GRID_POINTS: usize = 1024;

/// `M log2(1 + rho t) (m1 - t)^2 / m2`.
pub fn pz_value(spectrum: &Spectrum, rho: f64, t: f64) -> f64 {
    let m = spectrum.len() as f64;
    m * (rho * t).ln_1p() / std::f64::consts::LN_2 * (spectrum.m1 - t).powi(2) / spectrum.m2
}

pub fn paley_zygmund_bound(spectrum: &Spectrum, rho: f64) -> Result<PzBound> {
    if !(spectrum.m1 > 0.0) || !(spectrum.m2 > 0.0) {
        return Err(Error::Domain("Paley-Zygmund bound needs m1 > 0 and m2 > 0".into()));
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 1..=PZ_GRID_POINTS {
        let t = spectrum.m1 * k as f64 / (PZ_GRID_POINTS + 1) as f64;
        let v = pz_value(spectrum, rho, t);
        if v > best.0 {
            best = (v, t);
        }
    }
    let fixed_t = c0() * c0() / 2.0;
    let fixed_value = (fixed_t < spectrum.m1).then(|| pz_value(spectrum, rho, fixed_t));
    Ok(PzBound { grid_max: best.0, grid_t: best.1, fixed_value, fixed_t })
}

/// `min(M, (A_c/d) / ln(A_c/d))`, the DoF scale of a link. For `A_c / d <= e`
/// the second term is replaced by 1.
pub fn dof_scale(m: usize, a_c: f64, d: f64) -> f64 {
    let x = a_c / d;
    let s = if x > std::f64::consts::E { x / x.ln() } else { 1.0 };
    s.min(m as f64)
}

/// One row of a capacity sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityRow {
    pub m: usize,
    pub a_c: f64,
    pub d: f64,
    pub capacity_bits: f64,
    pub eff_dof: usize,
    pub pz_bound: f64,
}

impl CapacityRow {
    pub fn measure(link: &MimoLink, threshold: f64) -> Result<Self> {
        let spectrum = eigen_spectrum(&link.matrix)?;
        let rho = link.rho();
        Ok(Self {
            m: link.m,
            a_c: link.cluster_area,
            d: link.separation,
            capacity_bits: spectrum.capacity(rho),
            eff_dof: effective_dof(&spectrum, rho, threshold)?,
            pz_bound: paley_zygmund_bound(&spectrum, rho)?.grid_max,
        })
    }
}

pub const CAPACITY_HEADER: [&str; 6] = ["M", "A_c", "d", "capacity_bits", "eff_dof", "pz_bound"];

impl CapacityRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.m.to_string(),
            format!("{:.16e}", self.a_c),
            format!("{:.16e}", self.d),
            format!("{:.16e}", self.capacity_bits),
            self.eff_dof.to_string(),
            format!("{:.16e}", self.pz_bound),
        ]
    }
}

pub fn write_capacity_csv<W: Write>(rows: &[CapacityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CAPACITY_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}
