use serde::Serialize;

use super::stats::summarize;
use crate::error::{Error, Result};
use crate::linalg::{Ket, Operator};
use crate::master::{checkpoint_steps, measurement_compensator, run_linear_sme};
use crate::montecarlo::ordered_map;
use crate::noise::WienerPath;
use crate::pure::{linear_pure_increment, symmetric_expectations};
use crate::system::SystemParams;

pub const MIN_TRAJECTORIES: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTestResult {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `|mean(t) − mean(0)| / stderr(t)`.
    pub zscores: Vec<f64>,
}

impl MartingaleTestResult {
    pub fn max_abs_z(&self) -> f64 {
        self.zscores.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.max_abs_z() <= threshold
    }
}

/// Per-checkpoint z-scores of the sample mean against its initial value.
/// `samples[i][k]` is trajectory `i` at `times[k]`.
pub fn martingale_test(times: &[f64], samples: &[Vec<f64>]) -> Result<MartingaleTestResult> {
    if samples.len() < MIN_TRAJECTORIES {
        return Err(Error::InsufficientSamples { needed: MIN_TRAJECTORIES, got: samples.len() });
    }
    for s in samples {
        if s.len() != times.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), got: s.len() });
        }
    }
    let mut means = Vec::with_capacity(times.len());
    let mut stderrs = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let s = summarize(&column);
        means.push(s.mean);
        stderrs.push(s.stderr);
    }
    let m0 = means[0];
    let zscores = means
        .iter()
        .zip(&stderrs)
        .map(|(m, s)| {
            let dev = (m - m0).abs();
            if *s > 0.0 {
                dev / s
            } else if dev <= 1e-14 * m0.abs().max(1.0) {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    Ok(MartingaleTestResult { times: times.to_vec(), means, stderrs, zscores })
}

/// Checkpointed sample paths of one scalar process per trajectory.
#[derive(Debug, Clone)]
pub struct ScalarSamples {
    pub times: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

impl ScalarSamples {
    pub fn martingale_test(&self) -> Result<MartingaleTestResult> {
        martingale_test(&self.times, &self.samples)
    }
}

/// `T(t) = tr γ(t)` along linear paths driven by a Brownian output, tracked
/// by its own recursion `T_{k+1} = T_k (1 + Σ m_j dY_j + drift_bias·dt)`.
/// A nonzero `drift_bias` deliberately breaks the martingale property.
pub fn trace_samples(
    params: &SystemParams,
    gamma0: &Operator,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
    drift_bias: f64,
) -> Result<ScalarSamples> {
    let marks = checkpoint_steps(steps, stride);
    let dt = params.dt();
    let samples = ordered_map(trajectories, |i| {
        let w = WienerPath::for_trajectory(params.channels(), steps, dt, seed, i as u64)?;
        let mut t_value = crate::linalg::trace_re(gamma0);
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        let mut err = None;
        run_linear_sme(params, gamma0, &w, 1, |k, _, g| {
            if marks.get(next) == Some(&k) {
                out.push(t_value);
                next += 1;
            }
            if k < steps {
                let tr = crate::linalg::trace_re(g);
                if !(tr > 0.0) {
                    err.get_or_insert(Error::TrajectoryAbort { step: k, reason: format!("trace {tr}") });
                    return;
                }
                let rho = g / crate::linalg::c(tr, 0.0);
                let m = measurement_compensator(&rho, params.couplings());
                let s: f64 = m.iter().zip(w.increment(k)).map(|(a, b)| a * b).sum();
                t_value *= 1.0 + s + drift_bias * dt;
            }
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(out),
        }
    })?;
    Ok(ScalarSamples { times: marks.iter().map(|k| *k as f64 * dt).collect(), samples })
}

/// `‖χ(t)‖²` for the linear pure-state filter.
///
/// With `innovation_driven = false` the output `Y` is Brownian (the squared
/// norm is then a martingale); otherwise `B` is Brownian and
/// `dY = dB + 2⟨L_S⟩ dt`.
pub fn pure_norm_samples(
    params: &SystemParams,
    chi0: &Ket,
    steps: usize,
    trajectories: usize,
    seed: u64,
    stride: usize,
    innovation_driven: bool,
) -> Result<ScalarSamples> {
    crate::error::ensure_dim(params.dim(), chi0.len())?;
    let marks = checkpoint_steps(steps, stride);
    let dt = params.dt();
    let samples = ordered_map(trajectories, |i| {
        let w = WienerPath::for_trajectory(params.channels(), steps, dt, seed, i as u64)?;
        let mut chi = params.ket_from_lab(chi0, 0.0);
        let mut out = Vec::with_capacity(marks.len());
        let mut next = 0;
        for k in 0..=steps {
            if marks.get(next) == Some(&k) {
                out.push(chi.norm_squared());
                next += 1;
            }
            if k == steps {
                break;
            }
            let frame = params.frame(k as f64 * dt);
            let dw = w.increment(k);
            let dy: Vec<f64> = if innovation_driven {
                let m = symmetric_expectations(&frame, &chi)?;
                dw.iter().zip(&m).map(|(b, m)| b + 2.0 * m * dt).collect()
            } else {
                dw.to_vec()
            };
            chi = linear_pure_increment(&frame, &chi, dt, &dy);
        }
        Ok(out)
    })?;
    Ok(ScalarSamples { times: marks.iter().map(|k| *k as f64 * dt).collect(), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diagonal, pauli_x, zeros};
    use crate::system::Picture;

    #[test]
    fn constant_series_has_zero_scores() {
        let samples = vec![vec![1.5; 4]; 40];
        let r = martingale_test(&[0.0, 0.1, 0.2, 0.3], &samples).unwrap();
        assert!(r.zscores.iter().all(|z| *z == 0.0));
        assert!(martingale_test(&[0.0], &vec![vec![1.0]; 10]).is_err());
    }

    #[test]
    fn biased_series_is_flagged() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let samples: Vec<Vec<f64>> = (0..2000)
            .map(|_| {
                let mut x = 1.0;
                times
                    .iter()
                    .enumerate()
                    .map(|(k, t)| {
                        if k > 0 {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            x += 0.1 * z;
                        }
                        x + 0.1 * t
                    })
                    .collect()
            })
            .collect();
        assert!(martingale_test(&times, &samples).unwrap().max_abs_z() > 3.0);
    }

    #[test]
    fn tracked_trace_matches_state_trace() {
        let p = SystemParams::new(zeros(2), vec![pauli_x() * c(0.8, 0.0)], 0.01, Picture::Schroedinger).unwrap();
        let g0 = diagonal(&[0.7, 0.3]);
        let s = trace_samples(&p, &g0, 50, 3, 5, 50, 0.0).unwrap();
        for (i, path) in s.samples.iter().enumerate() {
            let w = WienerPath::for_trajectory(1, 50, 0.01, 5, i as u64).unwrap();
            let r = run_linear_sme(&p, &g0, &w, 50, |_, _, _| {}).unwrap();
            assert!((path[1] - r.final_trace).abs() < 1e-12);
        }
    }
}
