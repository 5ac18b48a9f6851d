//! Patch-aggregated spectra and the 1/N closed form.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use surfnoise_core::spectrum::{default_pink_amplitude, log_log_slope};
use surfnoise_core::{
    aggregate_patches, exact_spectrum, low_temperature_spectrum, pink_noise_closed_form, SpectralDecomposition, ThermalParams,
};

use crate::config::{Format, PinkModel, RunConfig};
use crate::error::CliResult;
use crate::levels::solve_levels;
use crate::output::{local_slopes, num, write_csv, write_json, Stamp};
use crate::spectrum::levels_at;

#[derive(Debug, Clone, Serialize)]
pub struct PinkSummary {
    #[serde(rename = "T_over_omega0")]
    pub temperature_ratio: f64,
    #[serde(rename = "Gamma0_per_s")]
    pub gamma0: f64,
    #[serde(rename = "N_max")]
    pub n_max: usize,
    pub model: PinkModel,
    /// Closed-form amplitude 2 (d1 - d2)^2 exp(-beta w0), Debye^2.
    pub amplitude_debye2: f64,
    /// Least-squares log-log slope of the finite sum over the whole grid.
    pub fitted_slope: f64,
    pub fitted_slope_closed_form: f64,
}

pub fn cmd_pink(cfg: &RunConfig, out: &Path, stamp: &Stamp) -> CliResult<Vec<PinkSummary>> {
    let levels = solve_levels(cfg)?;
    let dist = cfg.patch_distribution.distribution()?;
    let mut summaries = Vec::new();
    for &t in &cfg.temperatures {
        let th = ThermalParams::new(t)?;
        let lv = levels_at(&levels, t)?;
        let gamma0 = lv.rate(0, 1);
        let mut spectra: BTreeMap<usize, SpectralDecomposition> = BTreeMap::new();
        for n in dist.support() {
            let sd = match cfg.pink_model {
                PinkModel::LowTemperature => low_temperature_spectrum(n, &lv, &th)?,
                PinkModel::Exact => exact_spectrum(n, &lv, &th, &cfg.transition_set)?,
            };
            spectra.insert(n, sd);
        }
        let omega = cfg.omega_grid(gamma0);
        let total = aggregate_patches(&spectra, &dist, &omega)?;
        let amplitude = default_pink_amplitude(&lv, &th);
        let closed = pink_noise_closed_form(gamma0, amplitude, &omega)?;

        if cfg.wants(Format::Csv) {
            let rows = |s: &[f64]| -> Vec<Vec<String>> {
                omega
                    .iter()
                    .zip(s.iter().zip(local_slopes(&omega, s)))
                    .map(|(w, (v, slope))| vec![num(*w), num(w / gamma0), num(*v), num(slope)])
                    .collect()
            };
            write_csv(
                &out.join(format!("pink_sum_T{t}.csv")),
                stamp,
                &["omega_per_s", "omega_over_Gamma0", "S_total_debye2_s", "local_slope"],
                &rows(&total),
            )?;
            write_csv(
                &out.join(format!("pink_closed_T{t}.csv")),
                stamp,
                &["omega_per_s", "omega_over_Gamma0", "S_closed_form_debye2_s", "local_slope"],
                &rows(&closed),
            )?;
        }
        let summary = PinkSummary {
            temperature_ratio: t,
            gamma0,
            n_max: dist.n_max(),
            model: cfg.pink_model,
            amplitude_debye2: amplitude,
            fitted_slope: log_log_slope(&omega, &total),
            fitted_slope_closed_form: log_log_slope(&omega, &closed),
        };
        if cfg.wants(Format::Json) {
            write_json(&out.join(format!("pink_T{t}.json")), stamp, "pink", &summary)?;
        }
        summaries.push(summary);
    }
    Ok(summaries)
}
