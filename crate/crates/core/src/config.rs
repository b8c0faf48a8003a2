//! Global physical parameters and the flat key-value config format.
//!
//! All distances inside the crate are in carrier wavelengths. SI inputs
//! (`area_m2`, `wavelength`) are converted once here.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Parsed `key = value` text. Keys must be consumed explicitly; anything left
/// over when [`KvFile::finish`] is called is an error.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { entries, used: Default::default() })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.entries.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    pub fn get<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Config(format!("cannot parse list item `{s}` in `{key}`")))
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on any key that was never read.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !self.used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

/// Network-wide physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub n: usize,
    /// Network area normalized by the squared wavelength.
    pub a0: f64,
    /// Carrier wavelength in meters. Only used to convert SI inputs.
    pub wavelength: f64,
    /// Per-node average transmit power P (W).
    pub power: f64,
    /// Bandwidth W (Hz).
    pub bandwidth: f64,
    /// Noise spectral density N0 (W/Hz).
    pub noise_density: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
    /// Quantizer resolution Q (bits per observation).
    pub quantizer_bits: u32,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n: 100,
            a0: 1.0e6,
            wavelength: 0.1,
            power: 1.0,
            bandwidth: 1.0,
            noise_density: 1.0,
            gain_tx: 4.0 * PI,
            gain_rx: 4.0 * PI,
            quantizer_bits: 2,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Builds a config from SI area and wavelength.
    pub fn from_si(n: usize, area_m2: f64, wavelength: f64) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        let cfg = Self { n, a0: area_m2 / (wavelength * wavelength), wavelength, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a0", self.a0),
            ("wavelength", self.wavelength),
            ("power", self.power),
            ("bandwidth", self.bandwidth),
            ("noise_density", self.noise_density),
            ("gain_tx", self.gain_tx),
            ("gain_rx", self.gain_rx),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        Ok(())
    }

    /// Friis gain in wavelength units, `G_tx G_rx / (16 pi^2)`.
    pub fn friis_gain(&self) -> f64 {
        self.gain_tx * self.gain_rx / (16.0 * PI * PI)
    }

    /// Side of the square network, in wavelengths.
    pub fn side(&self) -> f64 {
        self.a0.sqrt()
    }

    pub fn area_m2(&self) -> f64 {
        self.a0 * self.wavelength * self.wavelength
    }

    /// `P / (N0 W)`.
    pub fn snr_per_watt_scale(&self) -> f64 {
        self.power / (self.noise_density * self.bandwidth)
    }

    /// Reads the network keys from a key-value file. `a0` may instead be
    /// given as `area_m2` together with `wavelength`.
    pub fn from_kv(kv: &mut KvFile) -> Result<Self> {
        let d = Self::default();
        let wavelength = kv.get_or("wavelength", d.wavelength)?;
        let a0 = match (kv.get::<f64>("a0")?, kv.get::<f64>("area_m2")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either `a0` or `area_m2`, not both".into()))
            }
            (Some(a0), None) => a0,
            (None, Some(area)) => area / (wavelength * wavelength),
            (None, None) => d.a0,
        };
        let cfg = Self {
            n: kv.get_or("n", d.n)?,
            a0,
            wavelength,
            power: kv.get_or("power", d.power)?,
            bandwidth: kv.get_or("bandwidth", d.bandwidth)?,
            noise_density: kv.get_or("noise_density", d.noise_density)?,
            gain_tx: kv.get_or("gain_tx", d.gain_tx)?,
            gain_rx: kv.get_or("gain_rx", d.gain_rx)?,
            quantizer_bits: kv.get_or("quantizer_bits", d.quantizer_bits)?,
            seed: kv.get_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = KvFile::parse(text)?;
        let cfg = Self::from_kv(&mut kv)?;
        kv.finish()?;
        Ok(cfg)
    }

    /// Serializes to the key-value format understood by [`NetworkConfig::parse`].
    pub fn to_kv_string(&self) -> String {
        format!(
            "n = {}\na0 = {:e}\nwavelength = {:e}\npower = {:e}\nbandwidth = {:e}\nnoise_density = {:e}\ngain_tx = {:e}\ngain_rx = {:e}\nquantizer_bits = {}\nseed = {}\n",
            self.n,
            self.a0,
            self.wavelength,
            self.power,
            self.bandwidth,
            self.noise_density,
            self.gain_tx,
            self.gain_rx,
            self.quantizer_bits,
            self.seed
        )
    }
}
