use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use surfnoise_core::potential::{anharmonic_shift, coverage_parameter, harmonic_frequency, harmonic_rate};
use surfnoise_core::{solve_bound_states, LevelStructure};

use crate::config::{Format, RunConfig};
use crate::error::CliResult;
use crate::output::{num, write_csv, write_json, Stamp};

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub levels: LevelStructure,
    pub harmonic_omega0_per_s: f64,
    pub omega12_per_s: f64,
    pub anharmonic_shift_per_s: f64,
    /// w12 - w23 of the solved levels; absent with fewer than three levels.
    pub numeric_shift_per_s: Option<f64>,
    pub harmonic_rate_per_s: f64,
    pub coverage: f64,
    /// Coverage >= 1: adatoms within one phonon wavelength act collectively.
    pub correlated: bool,
}

pub fn solve_levels(cfg: &RunConfig) -> CliResult<LevelStructure> {
    Ok(solve_bound_states(&cfg.potential, &cfg.material, cfg.levels)?)
}

pub fn level_report(cfg: &RunConfig) -> CliResult<LevelReport> {
    let levels = solve_levels(cfg)?;
    let coverage = coverage_parameter(&cfg.potential, &cfg.material)?;
    Ok(LevelReport {
        harmonic_omega0_per_s: harmonic_frequency(&cfg.potential)?,
        omega12_per_s: levels.fundamental_frequency(),
        anharmonic_shift_per_s: anharmonic_shift(&cfg.potential)?,
        numeric_shift_per_s: (levels.count() > 2)
            .then(|| levels.fundamental_frequency() - levels.transition_frequency(1, 2)),
        harmonic_rate_per_s: harmonic_rate(&cfg.potential, &cfg.material)?,
        coverage,
        correlated: coverage >= 1.0,
        levels,
    })
}

pub fn render_table(r: &LevelReport) -> String {
    let l = &r.levels;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>3}  {:>14}  {:>14}  {:>10}  {:>14}",
        "mu", "E (meV)", "omega (1/s)", "d (D)", "Gamma0 (1/s)"
    );
    for mu in 0..l.count() {
        let up = if mu + 1 < l.count() {
            format!("{:.6e}", l.rate(mu, mu + 1))
        } else {
            "-".into()
        };
        let _ = writeln!(
            s,
            "{:>3}  {:>14.6}  {:>14.6e}  {:>10.6}  {:>14}",
            mu + 1,
            l.energies_mev()[mu],
            l.excitation_frequency(mu),
            l.dipoles()[mu],
            up
        );
    }
    let _ = writeln!(s, "omega0 (harmonic)   {:.6e} 1/s", r.harmonic_omega0_per_s);
    let _ = writeln!(s, "omega12 (numeric)   {:.6e} 1/s", r.omega12_per_s);
    let _ = writeln!(s, "delta (formula)     {:.6e} 1/s", r.anharmonic_shift_per_s);
    if let Some(d) = r.numeric_shift_per_s {
        let _ = writeln!(s, "delta (numeric)     {d:.6e} 1/s");
    }
    let _ = writeln!(
        s,
        "coverage C          {:.4}{}",
        r.coverage,
        if r.correlated { "  [>= 1: correlated patches]" } else { "" }
    );
    s
}

pub fn cmd_levels(cfg: &RunConfig, out: &Path, stamp: &Stamp) -> CliResult<String> {
    let report = level_report(cfg)?;
    if cfg.wants(Format::Json) {
        write_json(&out.join("levels.json"), stamp, "levels", &report)?;
    }
    if cfg.wants(Format::Csv) {
        let l = &report.levels;
        let rows: Vec<Vec<String>> = (0..l.count())
            .map(|mu| {
                vec![
                    (mu + 1).to_string(),
                    num(l.energies_mev()[mu]),
                    num(l.excitation_frequency(mu)),
                    num(l.dipoles()[mu]),
                    num(if mu + 1 < l.count() { l.rate(mu, mu + 1) } else { 0.0 }),
                ]
            })
            .collect();
        write_csv(
            &out.join("levels.csv"),
            stamp,
            &["level", "energy_meV", "omega_per_s", "dipole_debye", "Gamma0_to_next_per_s"],
            &rows,
        )?;
    }
    Ok(render_table(&report))
}
