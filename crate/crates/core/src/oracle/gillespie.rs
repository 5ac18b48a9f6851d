//! Stochastic simulation of the population master equation (direct method)
//! and a Welch estimate of the dipole noise spectrum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::welch::Welch;
use super::{OracleReport, ReportConfig};
use crate::basis::SymmetricBasis;
use crate::error::{Error, Result};
use crate::master::{steady_state, RateMatrix};
use crate::potential::LevelStructure;
use crate::spectrum::SpectralDecomposition;

/// Sub-seed of trajectory `index`: splitmix64 applied to
/// `master + (index + 1) * 0x9E3779B97F4A7C15`.
pub fn trajectory_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add((index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Simulated time per trajectory, s.
    pub duration: f64,
    /// Discarded initial interval, s.
    pub burn_in: f64,
    pub seed: u64,
    pub trajectories: usize,
    /// Sampling interval of D(t), s.
    pub sampling_dt: f64,
    /// Welch segment length, s. Defaults to an eighth of the recorded span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_duration: Option<f64>,
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.duration.is_finite()
            && self.burn_in.is_finite()
            && self.burn_in >= 0.0
            && self.duration > self.burn_in
            && self.trajectories >= 1
            && self.sampling_dt.is_finite()
            && self.sampling_dt > 0.0;
        if !ok {
            return Err(Error::invalid(format!(
                "trajectory config needs duration > burn_in >= 0, trajectories >= 1, sampling_dt > 0; got {self:?}"
            )));
        }
        if let Some(seg) = self.segment_duration {
            if !(seg.is_finite() && seg > 0.0 && seg <= self.duration - self.burn_in) {
                return Err(Error::invalid(format!(
                    "segment duration {seg} must lie in (0, duration - burn_in]"
                )));
            }
        }
        if self.segment_samples() < 8 {
            return Err(Error::invalid("Welch segments need at least 8 samples"));
        }
        Ok(())
    }

    pub fn recorded_samples(&self) -> usize {
        ((self.duration - self.burn_in) / self.sampling_dt).floor() as usize
    }

    pub fn segment_samples(&self) -> usize {
        let span = self.segment_duration.unwrap_or((self.duration - self.burn_in) / 8.0);
        let n = (span / self.sampling_dt).floor() as usize;
        n - n % 2
    }
}

/// Gillespie estimate with per-bin standard errors across trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GillespieSpectrum {
    pub omega: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Time-weighted state occupancy after burn-in, averaged over trajectories.
    pub occupancy: Vec<f64>,
    pub occupancy_stderr: Vec<f64>,
    pub jumps: u64,
    pub warnings: Vec<String>,
}

impl GillespieSpectrum {
    pub fn report(&self, config: &TrajectoryConfig, analytic: Vec<f64>) -> OracleReport {
        OracleReport::new(
            ReportConfig::Trajectories(*config),
            self.omega.clone(),
            self.estimate.clone(),
            self.stderr.clone(),
            analytic,
            self.warnings.clone(),
        )
    }
}

struct Channels {
    exit: Vec<f64>,
    /// per source: (cumulative rate, target)
    jumps: Vec<Vec<(f64, usize)>>,
}

impl Channels {
    fn new(rm: &RateMatrix) -> Self {
        let n = rm.dimension();
        let mut jumps: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
        for (j, out) in jumps.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in 0..n {
                let r = rm.get(i, j);
                if i != j && r > 0.0 {
                    acc += r;
                    out.push((acc, i));
                }
            }
        }
        let exit = jumps.iter().map(|c| c.last().map_or(0.0, |l| l.0)).collect();
        Self { exit, jumps }
    }
}

struct Trajectory {
    periodogram: Vec<f64>,
    occupancy: Vec<f64>,
    jumps: u64,
}

fn run_trajectory(
    ch: &Channels,
    dipoles: &[f64],
    cfg: &TrajectoryConfig,
    welch: &Welch,
    seed: u64,
) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = cfg.recorded_samples();
    let mut trace = Vec::with_capacity(samples);
    let mut occupancy = vec![0.0; ch.exit.len()];
    let mut state = 0usize;
    let mut t = 0.0;
    let mut jumps = 0u64;
    let sample_time = |k: usize| cfg.burn_in + k as f64 * cfg.sampling_dt;
    loop {
        let exit = ch.exit[state];
        let wait = if exit > 0.0 {
            // 1 - U lies in (0, 1]
            -(1.0 - rng.random::<f64>()).ln() / exit
        } else {
            f64::INFINITY
        };
        let t_next = (t + wait).min(cfg.duration);
        while trace.len() < samples && sample_time(trace.len()) < t_next {
            trace.push(dipoles[state]);
        }
        let lo = t.max(cfg.burn_in);
        if t_next > lo {
            occupancy[state] += t_next - lo;
        }
        if t + wait >= cfg.duration {
            break;
        }
        t += wait;
        let u = rng.random::<f64>() * exit;
        let list = &ch.jumps[state];
        let pick = list.partition_point(|(c, _)| *c <= u).min(list.len() - 1);
        state = list[pick].1;
        jumps += 1;
    }
    while trace.len() < samples {
        trace.push(dipoles[state]);
    }
    let span = cfg.duration - cfg.burn_in;
    occupancy.iter_mut().for_each(|o| *o /= span);
    let mean = trace.iter().sum::<f64>() / trace.len() as f64;
    trace.iter_mut().for_each(|x| *x -= mean);
    Trajectory {
        periodogram: welch.average(&trace, cfg.sampling_dt),
        occupancy,
        jumps,
    }
}

fn mean_and_stderr(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let width = rows[0].len();
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    if rows.len() > 1 {
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        var.iter_mut().for_each(|s| *s /= n - 1.0);
    }
    let se = var.iter().map(|s| (s / n).sqrt()).collect();
    (mean, se)
}

/// Simulate `cfg.trajectories` independent jump trajectories starting in
/// the all-ground state and estimate S(w) on the Welch bins.
pub fn gillespie_spectrum(
    rm: &RateMatrix,
    basis: &SymmetricBasis,
    levels: &LevelStructure,
    cfg: &TrajectoryConfig,
) -> Result<GillespieSpectrum> {
    cfg.validate()?;
    if basis.len() != rm.dimension() {
        return Err(Error::domain("rate matrix and basis dimensions differ"));
    }
    let dipoles = basis.dipoles(levels)?;
    let channels = Channels::new(rm);
    let welch = Welch::new(cfg.segment_samples());
    if welch.segments(cfg.recorded_samples()) == 0 {
        return Err(Error::invalid("recorded span is shorter than one Welch segment"));
    }

    let runs: Vec<Trajectory> = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|i| run_trajectory(&channels, &dipoles, cfg, &welch, trajectory_seed(cfg.seed, i)))
        .collect();

    let spectra: Vec<&[f64]> = runs.iter().map(|r| r.periodogram.as_slice()).collect();
    let (estimate, stderr) = mean_and_stderr(&spectra);
    let occ: Vec<&[f64]> = runs.iter().map(|r| r.occupancy.as_slice()).collect();
    let (occupancy, occupancy_stderr) = mean_and_stderr(&occ);
    let jumps: u64 = runs.iter().map(|r| r.jumps).sum();

    let mut warnings = Vec::new();
    if let Ok(rho) = steady_state(rm) {
        let floor = 10.0 / jumps.max(1) as f64;
        let missed: Vec<usize> = (0..rho.len())
            .filter(|&i| rho[i] > floor && runs.iter().all(|r| r.occupancy[i] == 0.0))
            .collect();
        if !missed.is_empty() {
            warnings.push(format!(
                "possible non-ergodic sampling: {} state(s) with steady-state weight above {floor:.3e} never visited (first: {})",
                missed.len(),
                missed[0]
            ));
        }
    }

    Ok(GillespieSpectrum {
        omega: welch.frequencies(cfg.sampling_dt),
        estimate,
        stderr,
        occupancy,
        occupancy_stderr,
        jumps,
        warnings,
    })
}

/// Expected two-sided density of the Lorentzian sum sampled every `dt`:
/// `sum_k (C_k / 2) dt (1 - r^2) / (1 - 2 r cos(w dt) + r^2)`, r = exp(lambda dt).
/// This is the aliased counterpart of `evaluate_spectrum`; it tends to it
/// as `dt -> 0`.
pub fn sampled_spectrum(sd: &SpectralDecomposition, dt: f64, omega: &[f64]) -> Vec<f64> {
    omega
        .iter()
        .map(|w| {
            let c = (w * dt).cos();
            sd.pairs()
                .iter()
                .map(|p| {
                    let r = (p.lambda * dt).exp();
                    0.5 * p.weight * dt * (1.0 - r * r) / (1.0 - 2.0 * r * c + r * r)
                })
                .sum()
        })
        .collect()
}
