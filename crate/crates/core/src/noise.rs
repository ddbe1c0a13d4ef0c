//! Multichannel Wiener increments, simple Ito drivers and the
//! output/innovation conversion.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat
//! sampler) over a `ChaCha8Rng` seeded from a 64-bit seed, so a path is a
//! pure function of `(seed, channels, steps, dt)` on every platform.

use std::borrow::Cow;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counter-based sub-seed for trajectory `index`: `seed ⊕ splitmix64(index)`.
///
/// The splitmix64 finalizer is a bijection on `u64`, so distinct indices
/// always give distinct sub-seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    seed ^ (z ^ (z >> 31))
}

/// Increments of an `n`-channel Wiener process on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerPath {
    channels: usize,
    dt: f64,
    seed: u64,
    /// Row-major `steps × channels`.
    increments: Vec<f64>,
}

pub fn sample_wiener(channels: usize, steps: usize, dt: f64, seed: u64) -> Result<WienerPath> {
    WienerPath::sample(channels, steps, dt, seed)
}

impl WienerPath {
    pub fn sample(channels: usize, steps: usize, dt: f64, seed: u64) -> Result<Self> {
        if channels == 0 || steps == 0 {
            return Err(Error::InvalidParameter(
                "channel and step counts must be positive".into(),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = dt.sqrt();
        let increments = (0..channels * steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sd
            })
            .collect();
        Ok(Self {
            channels,
            dt,
            seed,
            increments,
        })
    }

    /// Path for trajectory `index` of a run seeded with `seed`.
    pub fn for_trajectory(
        channels: usize,
        steps: usize,
        dt: f64,
        seed: u64,
        index: u64,
    ) -> Result<Self> {
        Self::sample(channels, steps, dt, derive_seed(seed, index))
    }

    pub fn from_increments(channels: usize, dt: f64, increments: Vec<f64>) -> Result<Self> {
        if channels == 0 || increments.is_empty() || increments.len() % channels != 0 {
            return Err(Error::InvalidParameter(
                "increment count must be a positive multiple of the channel count".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            channels,
            dt,
            seed: 0,
            increments,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn steps(&self) -> usize {
        self.increments.len() / self.channels
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increment(&self, step: usize) -> &[f64] {
        &self.increments[step * self.channels..(step + 1) * self.channels]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.channels)
    }

    pub fn raw(&self) -> &[f64] {
        &self.increments
    }

    /// Same Brownian path on a grid `factor` times coarser (sums of
    /// consecutive increments). Trailing steps that do not fill a block are
    /// dropped.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || factor > self.steps() {
            return Err(Error::InvalidParameter(format!(
                "coarsening factor {factor} out of range"
            )));
        }
        let n = self.channels;
        let steps = self.steps() / factor;
        let mut increments = vec![0.0; steps * n];
        for s in 0..steps {
            for k in 0..factor {
                let src = self.increment(s * factor + k);
                for (dst, x) in increments[s * n..(s + 1) * n].iter_mut().zip(src) {
                    *dst += x;
                }
            }
        }
        Ok(Self {
            channels: n,
            dt: self.dt * factor as f64,
            seed: self.seed,
            increments,
        })
    }

    /// Debug dump: header `t,dW_1,…,dW_n`, one row per step (`t` is the
    /// left end of the step).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.channels).map(|j| format!("dW_{j}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (k, row) in self.iter().enumerate() {
            write!(w, "{}", k as f64 * self.dt)?;
            for x in row {
                write!(w, ",{x:e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Simple Ito process `dX = a dt + dW` with a bounded drift table.
#[derive(Debug, Clone, PartialEq)]
pub struct ItoPath {
    base: WienerPath,
    drift: Vec<f64>,
    bound: f64,
}

impl ItoPath {
    pub fn new(base: WienerPath, drift: Vec<f64>, bound: f64) -> Result<Self> {
        if drift.len() != base.raw().len() {
            return Err(Error::DimensionMismatch {
                expected: base.raw().len(),
                got: drift.len(),
            });
        }
        if let Some(a) = drift.iter().find(|a| !(a.abs() <= bound)) {
            return Err(Error::InvalidParameter(format!(
                "drift sample {a} exceeds declared bound {bound}"
            )));
        }
        Ok(Self { base, drift, bound })
    }

    /// Driftless driver (the Brownian case).
    pub fn brownian(base: WienerPath) -> Self {
        let drift = vec![0.0; base.raw().len()];
        Self {
            base,
            drift,
            bound: 0.0,
        }
    }

    pub fn base(&self) -> &WienerPath {
        &self.base
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn steps(&self) -> usize {
        self.base.steps()
    }

    pub fn increment(&self, step: usize) -> Vec<f64> {
        let n = self.base.channels();
        let dt = self.base.dt();
        self.base
            .increment(step)
            .iter()
            .zip(&self.drift[step * n..(step + 1) * n])
            .map(|(dw, a)| a * dt + dw)
            .collect()
    }
}

/// Per-step increments consumed by the SDE steppers.
pub trait Driver {
    fn channels(&self) -> usize;
    fn steps(&self) -> usize;
    fn dt(&self) -> f64;
    fn increment_at(&self, step: usize) -> Cow<'_, [f64]>;
}

impl Driver for WienerPath {
    fn channels(&self) -> usize {
        self.channels
    }
    fn steps(&self) -> usize {
        WienerPath::steps(self)
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn increment_at(&self, step: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.increment(step))
    }
}

impl Driver for ItoPath {
    fn channels(&self) -> usize {
        self.base.channels()
    }
    fn steps(&self) -> usize {
        self.base.steps()
    }
    fn dt(&self) -> f64 {
        self.base.dt()
    }
    fn increment_at(&self, step: usize) -> Cow<'_, [f64]> {
        Cow::Owned(self.increment(step))
    }
}

/// Explicit increment table, e.g. a recorded output or innovation path.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementTable<'a> {
    pub dt: f64,
    pub rows: &'a [Vec<f64>],
}

impl Driver for IncrementTable<'_> {
    fn channels(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
    fn steps(&self) -> usize {
        self.rows.len()
    }
    fn dt(&self) -> f64 {
        self.dt
    }
    fn increment_at(&self, step: usize) -> Cow<'_, [f64]> {
        Cow::Borrowed(&self.rows[step])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDirection {
    OutputToInnovation,
    InnovationToOutput,
}

/// `dB = dY − c·dt` or `dY = dB + c·dt` channel-wise.
pub fn convert_noise(
    direction: NoiseDirection,
    incr: &[f64],
    compensator: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    if incr.len() != compensator.len() {
        return Err(Error::DimensionMismatch {
            expected: incr.len(),
            got: compensator.len(),
        });
    }
    Ok(incr
        .iter()
        .zip(compensator)
        .map(|(x, m)| match direction {
            NoiseDirection::OutputToInnovation => x - m * dt,
            NoiseDirection::InnovationToOutput => x + m * dt,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_wiener(2, 100, 0.01, 7).unwrap();
        let b = sample_wiener(2, 100, 0.01, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_wiener(2, 100, 0.01, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_bad_arguments() {
        assert!(sample_wiener(0, 10, 0.1, 1).is_err());
        assert!(sample_wiener(1, 0, 0.1, 1).is_err());
        assert!(sample_wiener(1, 10, 0.0, 1).is_err());
        assert!(sample_wiener(1, 10, -1.0, 1).is_err());
    }

    #[test]
    fn increment_moments() {
        let dt = 0.01;
        let n = 100_000;
        let p = sample_wiener(1, n, dt, 2024).unwrap();
        let mean = p.raw().iter().sum::<f64>() / n as f64;
        let var = p.raw().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        assert!(mean.abs() <= 3.0 * (dt / n as f64).sqrt(), "mean {mean}");
        assert!((var / dt - 1.0).abs() <= 0.05, "var {var}");
    }

    #[test]
    fn sub_seeds_are_distinct_and_uncorrelated() {
        let steps = 1000;
        let bound = 3.0 / (steps as f64).sqrt();
        let mut seeds = std::collections::HashSet::new();
        for k in 0..1000u64 {
            assert!(seeds.insert(derive_seed(99, k)));
        }
        let mut worst = 0.0f64;
        for k in 0..1000u64 {
            let a = WienerPath::for_trajectory(1, steps, 1e-3, 99, 2 * k).unwrap();
            let b = WienerPath::for_trajectory(1, steps, 1e-3, 99, 2 * k + 1).unwrap();
            let dot: f64 = a.raw().iter().zip(b.raw()).map(|(x, y)| x * y).sum();
            let na: f64 = a.raw().iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.raw().iter().map(|x| x * x).sum::<f64>().sqrt();
            worst = worst.max((dot / (na * nb)).abs());
        }
        // A 3-sigma band per pair; across 10³ pairs a handful may graze it,
        // so bound the maximum at 4.5 sigma.
        assert!(worst <= 1.5 * bound, "worst |r| = {worst}");
    }

    #[test]
    fn coarsening_sums_blocks() {
        let p = sample_wiener(2, 8, 0.25, 3).unwrap();
        let q = p.coarsen(4).unwrap();
        assert_eq!(q.steps(), 2);
        assert!((q.dt() - 1.0).abs() < 1e-15);
        let s: f64 = (0..4).map(|k| p.increment(k)[1]).sum();
        assert_eq!(q.increment(0)[1], s);
    }

    #[test]
    fn ito_path_adds_drift() {
        let base = WienerPath::from_increments(1, 0.5, vec![0.1, -0.2]).unwrap();
        let p = ItoPath::new(base.clone(), vec![1.0, -2.0], 2.0).unwrap();
        assert_eq!(p.increment(0), vec![0.6]);
        assert_eq!(p.increment(1), vec![-1.2]);
        assert!(ItoPath::new(base, vec![1.0, -3.0], 2.0).is_err());
    }

    #[test]
    fn conversion_special_cases() {
        let y = [0.3, -0.1];
        assert_eq!(
            convert_noise(NoiseDirection::OutputToInnovation, &y, &[0.0, 0.0], 0.1).unwrap(),
            y.to_vec()
        );
        let b = convert_noise(NoiseDirection::OutputToInnovation, &[0.05], &[2.0], 0.01).unwrap();
        assert!((b[0] - 0.03).abs() < 1e-15);
        assert!(convert_noise(NoiseDirection::OutputToInnovation, &y, &[0.0], 0.1).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let p = WienerPath::from_increments(2, 0.5, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,dW_1,dW_2");
        assert!(lines[2].starts_with("0.5,"));
        assert_eq!(lines.len(), 3);
    }
}
