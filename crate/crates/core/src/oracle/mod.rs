//! Independent numerical routes to the noise spectrum, used to validate the
//! eigen-decomposition pipeline.

pub mod correlator;
pub mod gillespie;
mod welch;

use serde::{Deserialize, Serialize};

pub use correlator::{correlator_spectrum, CorrelatorSpectrum, TauGrid};
pub use gillespie::{gillespie_spectrum, sampled_spectrum, trajectory_seed, GillespieSpectrum, TrajectoryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportConfig {
    Trajectories(TrajectoryConfig),
    Tau(TauGrid),
}

/// Oracle estimate set against an analytic reference, bin by bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub config: ReportConfig,
    pub omega_per_s: Vec<f64>,
    pub estimate: Vec<f64>,
    pub stderr: Vec<f64>,
    pub analytic: Vec<f64>,
    /// max_i |estimate_i - analytic_i| / stderr_i
    pub max_sigma_deviation: f64,
    pub fraction_within_3_sigma: f64,
    /// max_i |estimate_i / analytic_i - 1|
    pub max_relative_deviation: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl OracleReport {
    pub fn new(
        config: ReportConfig,
        omega_per_s: Vec<f64>,
        estimate: Vec<f64>,
        stderr: Vec<f64>,
        analytic: Vec<f64>,
        warnings: Vec<String>,
    ) -> Self {
        let mut max_sigma: f64 = 0.0;
        let mut within = 0usize;
        let mut max_rel: f64 = 0.0;
        for ((e, s), a) in estimate.iter().zip(&stderr).zip(&analytic) {
            let dev = (e - a).abs();
            let sigmas = if *s > 0.0 {
                dev / s
            } else if dev == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            max_sigma = max_sigma.max(sigmas);
            if sigmas <= 3.0 {
                within += 1;
            }
            if *a != 0.0 {
                max_rel = max_rel.max(dev / a.abs());
            }
        }
        let fraction = if estimate.is_empty() {
            1.0
        } else {
            within as f64 / estimate.len() as f64
        };
        Self {
            config,
            omega_per_s,
            estimate,
            stderr,
            analytic,
            max_sigma_deviation: max_sigma,
            fraction_within_3_sigma: fraction,
            max_relative_deviation: max_rel,
            warnings,
        }
    }
}

impl CorrelatorSpectrum {
    /// Report against an analytic reference; the correlator carries no
    /// sampling error, so only the relative deviation is meaningful.
    pub fn report(&self, tau: TauGrid, analytic: Vec<f64>) -> OracleReport {
        OracleReport::new(
            ReportConfig::Tau(tau),
            self.omega.clone(),
            self.spectrum.clone(),
            vec![0.0; self.spectrum.len()],
            analytic,
            Vec::new(),
        )
    }
}
