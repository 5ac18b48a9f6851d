//! Per-point spectra over the (N, T/w0) grid, and resumable sweeps.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surfnoise_core::{evaluate_spectrum, exact_spectrum, LevelStructure, SpectralDecomposition, ThermalParams};

use crate::config::{Format, RunConfig};
use crate::error::CliResult;
use crate::levels::solve_levels;
use crate::output::{num, point_tag, read_json_data, write_csv, write_json, Stamp};

/// Summary of one grid point, also the completion marker of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    #[serde(rename = "N")]
    pub n_atoms: usize,
    #[serde(rename = "T_over_omega0")]
    pub temperature_ratio: f64,
    #[serde(rename = "M")]
    pub n_levels: usize,
    #[serde(rename = "Gamma0_per_s")]
    pub gamma0: f64,
    #[serde(rename = "S0_debye2_s")]
    pub white_noise: f64,
    pub dominant_lambda_per_s: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOutcome {
    pub points: Vec<PointSummary>,
    /// Tags of points read back from an earlier run.
    pub reused: Vec<String>,
}

/// Levels kept at temperature `t`: those bound by at least k_B T.
pub fn levels_at(levels: &LevelStructure, t: f64) -> CliResult<LevelStructure> {
    let w12_mev = levels.energies_mev()[1] - levels.energies_mev()[0];
    Ok(levels.truncated_bound_margin(t * w12_mev)?)
}

fn grid_points(cfg: &RunConfig) -> Vec<(usize, f64)> {
    cfg.temperatures
        .iter()
        .flat_map(|&t| cfg.sizes.iter().map(move |&n| (n, t)))
        .collect()
}

#[derive(Serialize)]
struct DecompositionFile<'a> {
    #[serde(rename = "N")]
    n_atoms: usize,
    #[serde(rename = "T_over_omega0")]
    temperature_ratio: f64,
    #[serde(rename = "Gamma0_per_s")]
    gamma0: f64,
    decomposition: &'a SpectralDecomposition,
}

fn spectrum_rows(omega: &[f64], gamma0: f64, s: &[f64]) -> Vec<Vec<String>> {
    omega
        .iter()
        .zip(s)
        .map(|(w, v)| vec![num(*w), num(w / gamma0), num(*v)])
        .collect()
}

fn compute_point(
    cfg: &RunConfig,
    levels: &LevelStructure,
    n: usize,
    t: f64,
    top_k: Option<usize>,
    dir: &Path,
    stamp: &Stamp,
) -> CliResult<PointSummary> {
    let lv = levels_at(levels, t)?;
    let sd = exact_spectrum(n, &lv, &ThermalParams::new(t)?, &cfg.transition_set)?;
    let gamma0 = lv.rate(0, 1);
    let tag = point_tag(n, t);
    let omega = cfg.omega_grid(gamma0);
    let exact = evaluate_spectrum(&sd, &omega);

    if cfg.wants(Format::Json) {
        let file = DecompositionFile {
            n_atoms: n,
            temperature_ratio: t,
            gamma0,
            decomposition: &sd,
        };
        write_json(&dir.join(format!("decomposition_{tag}.json")), stamp, "decomposition", &file)?;
    }
    if cfg.wants(Format::Csv) {
        write_csv(
            &dir.join(format!("spectrum_{tag}.csv")),
            stamp,
            &["omega_per_s", "omega_over_Gamma0", "S_debye2_s"],
            &spectrum_rows(&omega, gamma0, &exact),
        )?;
        let mut rank = vec![0usize; sd.pairs().len()];
        for (r, &k) in sd.ranking().iter().enumerate() {
            rank[k] = r + 1;
        }
        let rows: Vec<Vec<String>> = sd
            .pairs()
            .iter()
            .enumerate()
            .map(|(k, p)| vec![(k + 1).to_string(), num(p.lambda), num(p.weight), rank[k].to_string()])
            .collect();
        write_csv(
            &dir.join(format!("pairs_{tag}.csv")),
            stamp,
            &["k", "lambda_per_s", "C_k", "weight_rank"],
            &rows,
        )?;
        if let Some(k) = top_k {
            let approx = evaluate_spectrum(&sd.truncated(k), &omega);
            let rows: Vec<Vec<String>> = omega
                .iter()
                .zip(approx.iter().zip(&exact))
                .map(|(w, (a, e))| vec![num(*w), num(w / gamma0), num(*a), num(*e), num((a - e).abs() / e)])
                .collect();
            write_csv(
                &dir.join(format!("top{k}_{tag}.csv")),
                stamp,
                &["omega_per_s", "omega_over_Gamma0", "S_truncated_debye2_s", "S_debye2_s", "relative_error"],
                &rows,
            )?;
        }
    }

    let summary = PointSummary {
        n_atoms: n,
        temperature_ratio: t,
        n_levels: lv.count(),
        gamma0,
        white_noise: sd.zero_frequency(),
        dominant_lambda_per_s: sd.dominant().map_or(0.0, |p| p.lambda),
        pairs: sd.pairs().len(),
    };
    write_json(&dir.join(format!("point_{tag}.json")), stamp, "point", &summary)?;
    Ok(summary)
}

fn previous(dir: &Path, stamp: &Stamp, n: usize, t: f64) -> Option<PointSummary> {
    let data = read_json_data(&dir.join(format!("point_{}.json", point_tag(n, t))), stamp)?;
    serde_json::from_value(data).ok()
}

/// Compute every (N, T/w0) point in parallel. With `resume`, points whose
/// completion marker matches the current config are read back instead.
pub fn run_points(cfg: &RunConfig, out: &Path, stamp: &Stamp, top_k: Option<usize>, resume: bool) -> CliResult<SweepOutcome> {
    let levels = solve_levels(cfg)?;
    let dir = out.join("points");
    let results: Vec<(CliResult<PointSummary>, bool)> = grid_points(cfg)
        .par_iter()
        .map(|&(n, t)| match resume.then(|| previous(&dir, stamp, n, t)).flatten() {
            Some(p) => (Ok(p), true),
            None => (compute_point(cfg, &levels, n, t, top_k, &dir, stamp), false),
        })
        .collect();

    let mut points = Vec::with_capacity(results.len());
    let mut reused = Vec::new();
    for (r, was_reused) in results {
        let p = r?;
        if was_reused {
            reused.push(point_tag(p.n_atoms, p.temperature_ratio));
        }
        points.push(p);
    }

    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.n_atoms.to_string(),
                num(p.temperature_ratio),
                p.n_levels.to_string(),
                num(p.white_noise),
                num(p.white_noise / p.n_atoms as f64),
                num(p.dominant_lambda_per_s),
                p.pairs.to_string(),
            ]
        })
        .collect();
    write_csv(
        &out.join("white_noise.csv"),
        stamp,
        &["N", "T_over_omega0", "M", "S0_debye2_s", "S0_per_adatom_debye2_s", "dominant_lambda_per_s", "pairs"],
        &rows,
    )?;
    Ok(SweepOutcome { points, reused })
}

