//! Frozen constants for bounds whose constants are only known to exist.
//!
//! Each constant is fitted once on a calibration sweep with a factor-2
//! safety margin and written to a versioned key-value file. Tests and
//! experiments read the frozen file and check it on validation sweeps whose
//! parameter ranges do not overlap the calibration ranges.

use std::path::Path;

use crate::config::KvFile;
use crate::error::{Error, Result};
use crate::oscillatory::{fit_lower, fit_upper, k10_ratios, k7_ratios, k8_ratios, k9_ratios, sweeps, ConstantFit, FIT_MARGIN};

pub const CONSTANTS_VERSION: u32 = 1;

const SHIPPED: &str = include_str!("../data/constants.kv");

#[derive(Debug, Clone, PartialEq)]
pub struct Constants {
    pub version: u32,
    pub provenance: String,
    /// Lower constant for `|dg/dz|` on `U1`.
    pub k7: f64,
    /// Upper constant for the receive integral on `U1`.
    pub k8: f64,
    /// Lower constant for `|dg/dz|` when `y_a = y_b`.
    pub k9: f64,
    /// Upper constant for the receive integral on `U3`.
    pub k10: f64,
}

impl Constants {
    /// Constants bundled with the crate.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED).expect("bundled constants file is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let version: u32 = kv.get("version")?.ok_or_else(|| Error::Config("constants file lacks `version`".into()))?;
        if version != CONSTANTS_VERSION {
            return Err(Error::Config(format!("constants version {version} is not supported (expected {CONSTANTS_VERSION})")));
        }
        let provenance = kv.raw("provenance").unwrap_or_default();
        let mut need = |key: &str| -> Result<f64> {
            let v: f64 = kv.get(key)?.ok_or_else(|| Error::Config(format!("constants file lacks `{key}`")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("constant `{key}` must be positive, got {v}")));
            }
            Ok(v)
        };
        let c = Self { version, provenance, k7: need("k7")?, k8: need("k8")?, k9: need("k9")?, k10: need("k10")? };
        kv.finish()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "# Frozen bound constants. Regenerate with `losnet calibrate`.\nversion = {}\nprovenance = {}\nk7 = {:e}\nk8 = {:e}\nk9 = {:e}\nk10 = {:e}\n",
            self.version, self.provenance, self.k7, self.k8, self.k9, self.k10
        )
    }

    /// Short label written next to every result row.
    pub fn label(&self) -> String {
        format!("v{}", self.version)
    }
}

/// Outcome of a calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub constants: Constants,
    pub k7: ConstantFit,
    pub k8: ConstantFit,
    pub k9: ConstantFit,
    pub k10: ConstantFit,
}

/// Fits all constants on the calibration sweeps.
pub fn calibrate() -> Result<Calibration> {
    let k7 = fit_lower(&k7_ratios(&sweeps::K7_CALIBRATION));
    let k9 = fit_lower(&k9_ratios(&sweeps::K9_CALIBRATION));
    let k8 = fit_upper(&k8_ratios(&sweeps::K8_CALIBRATION)?);
    let k10 = fit_upper(&k10_ratios(&sweeps::K10_CALIBRATION)?);
    let s = |name: &str, spec: &crate::oscillatory::SweepSpec| {
        format!("{name}: A_c in [{:e}, {:e}) n={} seed={}", spec.a_c_lo, spec.a_c_hi, spec.samples, spec.seed)
    };
    let provenance = format!(
        "fit-then-freeze, margin {FIT_MARGIN}; {}; {}; {}; {}",
        s("k7", &sweeps::K7_CALIBRATION),
        s("k8", &sweeps::K8_CALIBRATION),
        s("k9", &sweeps::K9_CALIBRATION),
        s("k10", &sweeps::K10_CALIBRATION)
    );
    let constants = Constants {
        version: CONSTANTS_VERSION,
        provenance,
        k7: k7.constant,
        k8: k8.constant,
        k9: k9.constant,
        k10: k10.constant,
    };
    Ok(Calibration { constants, k7, k8, k9, k10 })
}
