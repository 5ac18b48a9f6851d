//! Desk-scale invariant and oracle checks with a JSON verdict.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;
use surfnoise_core::basis::binomial;
use surfnoise_core::master::boltzmann_distribution;
use surfnoise_core::oracle::sampled_spectrum;
use surfnoise_core::potential::{solve_bound_states_with, GridOptions};
use surfnoise_core::spectrum::{default_pink_amplitude, log_grid};
use surfnoise_core::{
    aggregate_patches, build_rate_matrix, correlator_spectrum, decompose, enumerate_basis, evaluate_spectrum,
    exact_spectrum, gillespie_spectrum, lorentzian_weights, low_temperature_spectrum, pink_noise_closed_form,
    steady_state, LevelStructure, PatchDistribution, RateMatrix, SymmetricBasis, TauGrid, ThermalParams,
    TrajectoryConfig, TransitionSet,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::levels::solve_levels;
use crate::output::{write_json, Stamp};

/// Deliberate corruption used as a negative control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Scale the 0 -> 1 flow of the first rate matrix by 1.5.
    DetailedBalance,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub fault_inject: Option<Fault>,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, value: f64, tolerance: f64, detail: String) -> Check {
    Check {
        name,
        passed: value <= tolerance,
        value,
        tolerance,
        detail,
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        value: f64::NAN,
        tolerance: f64::NAN,
        detail: err.to_string(),
    }
}

struct Point {
    n: usize,
    t: f64,
    levels: LevelStructure,
    basis: SymmetricBasis,
    rm: RateMatrix,
}

fn small_grid(levels: &LevelStructure, temps: &[f64], fault: Option<Fault>) -> CliResult<Vec<Point>> {
    let mut pts = Vec::new();
    for &t in temps {
        for m in 2..=levels.count().min(3) {
            for n in 1..=3 {
                let lv = levels.truncated(m)?;
                let basis = enumerate_basis(n, m)?;
                let rm = build_rate_matrix(&basis, &lv, &ThermalParams::new(t)?, &TransitionSet::AllPairs)?;
                pts.push(Point {
                    n,
                    t,
                    levels: lv,
                    basis,
                    rm,
                });
            }
        }
    }
    if fault == Some(Fault::DetailedBalance) {
        pts[0].rm.scale_flow(1, 0, 1.5);
    }
    Ok(pts)
}

fn structure_checks(pts: &[Point]) -> Vec<Check> {
    let mut cols: f64 = 0.0;
    let mut db: f64 = 0.0;
    let mut rho_dev: f64 = 0.0;
    let mut sum_rule: f64 = 0.0;
    let mut count_errors = Vec::new();
    let mut errors = Vec::new();
    for p in pts {
        let th = p.rm.thermal();
        let boltzmann = boltzmann_distribution(&p.basis, &p.levels, &th);
        cols = cols.max(p.rm.column_sum_residual());
        db = db.max(p.rm.detailed_balance_residual(&boltzmann));
        match steady_state(&p.rm) {
            Ok(rho) => {
                rho_dev = rho_dev.max(rho.iter().zip(&boltzmann).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
            }
            Err(e) => errors.push(format!("N={} T/w0={}: {e}", p.n, p.t)),
        }
        match decompose(&p.rm).and_then(|ed| lorentzian_weights(&ed, &p.basis, &p.levels)) {
            Ok(sd) => {
                let m = p.levels.count() as u64;
                if sd.pairs().len() as u128 != binomial(p.n as u64 + m - 1, p.n as u64) - 1 {
                    count_errors.push(format!("N={} M={m}", p.n));
                }
                sum_rule = sum_rule.max(sd.sum_rule_residual());
            }
            Err(e) => errors.push(format!("N={} T/w0={}: {e}", p.n, p.t)),
        }
    }
    let suffix = if errors.is_empty() {
        String::new()
    } else {
        format!("; errors: {}", errors.join("; "))
    };
    let mut out = vec![
        check("generator-columns", cols, 1e-12, format!("max |column sum| / max |M_ij| over {} matrices", pts.len())),
        check("detailed-balance", db, 1e-12, "max relative pairwise flux imbalance at the Boltzmann state".into()),
    ];
    let mut ss = check("steady-state", rho_dev, 1e-10, format!("max |rho - Boltzmann|{suffix}"));
    let mut sr = check(
        "pair-count-and-sum-rule",
        sum_rule,
        1e-8,
        format!("relative zero-lag sum-rule residual; pair-count mismatches: {count_errors:?}{suffix}"),
    );
    if !errors.is_empty() {
        ss.passed = false;
        sr.passed = false;
    }
    if !count_errors.is_empty() {
        sr.passed = false;
    }
    out.push(ss);
    out.push(sr);
    out
}

fn two_level_check(levels: &LevelStructure, t: f64) -> CliResult<Check> {
    let lv = levels.truncated(2)?;
    let sd = exact_spectrum(1, &lv, &ThermalParams::new(t)?, &TransitionSet::AllPairs)?;
    let want = -lv.rate(0, 1) / (0.5 / t).tanh();
    let got = sd.pairs()[0].lambda;
    Ok(check(
        "two-level-eigenvalue",
        (got / want - 1.0).abs(),
        1e-10,
        format!("lambda = {got:.10e} vs -Gamma0 coth(beta w12 / 2) = {want:.10e}"),
    ))
}

fn oracle_checks(levels: &LevelStructure, seed: u64) -> CliResult<Vec<Check>> {
    let lv = levels.truncated(3)?;
    let th = ThermalParams::new(0.5)?;
    let basis = enumerate_basis(2, lv.count())?;
    let rm = build_rate_matrix(&basis, &lv, &th, &TransitionSet::AllPairs)?;
    let sd = exact_spectrum(2, &lv, &th, &TransitionSet::AllPairs)?;
    let gamma = lv.rate(0, 1);
    let cfg = TrajectoryConfig {
        duration: 410.0 / gamma,
        burn_in: 10.0 / gamma,
        seed,
        trajectories: 64,
        sampling_dt: 0.05 / gamma,
        segment_duration: Some(100.0 / gamma),
    };
    let g = gillespie_spectrum(&rm, &basis, &lv, &cfg)?;
    let report = g.report(&cfg, sampled_spectrum(&sd, cfg.sampling_dt, &g.omega));
    let again = gillespie_spectrum(&rm, &basis, &lv, &cfg)?;

    let omega = log_grid(0.1 * gamma, 10.0 * gamma, 10);
    let c = correlator_spectrum(&rm, &basis, &lv, &TauGrid::Auto, &omega)?;
    let corr = c.report(TauGrid::Auto, evaluate_spectrum(&sd, &omega));

    let mut trajectories = check(
        "gillespie-oracle",
        1.0 - report.fraction_within_3_sigma,
        0.05,
        format!(
            "fraction of {} bins outside 3 sigma (N=2, M=3, T/w0=0.5, {} trajectories, seed {seed})",
            report.omega_per_s.len(),
            cfg.trajectories
        ),
    );
    if !report.warnings.is_empty() {
        trajectories.detail.push_str(&format!("; warnings: {}", report.warnings.join("; ")));
    }
    let differing = g.estimate.iter().zip(&again.estimate).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    Ok(vec![
        trajectories,
        check(
            "gillespie-reproducible",
            differing as f64,
            0.0,
            "bins differing between two runs with the same seed".into(),
        ),
        check(
            "correlator-oracle",
            corr.max_relative_deviation,
            5e-3,
            "max relative deviation from the Lorentzian sum on [0.1, 10] Gamma0".into(),
        ),
    ])
}

fn pink_check(levels: &LevelStructure) -> CliResult<Check> {
    let lv = levels.truncated(2)?;
    let th = ThermalParams::new(0.2)?;
    let gamma = lv.rate(0, 1);
    let amp = default_pink_amplitude(&lv, &th);
    let zero = pink_noise_closed_form(gamma, amp, &[1e-9 * gamma])?[0];
    let zero_dev = (zero / (amp * PI * PI / (6.0 * gamma)) - 1.0).abs();
    let n_max = 200_000;
    let spectra: BTreeMap<usize, _> = (1..=n_max)
        .map(|n| low_temperature_spectrum(n, &lv, &th).map(|s| (n, s)))
        .collect::<Result<_, _>>()?;
    let partial = aggregate_patches(&spectra, &PatchDistribution::one_over_n(n_max)?, &[gamma])?[0];
    let closed = pink_noise_closed_form(gamma, amp, &[gamma])?[0];
    let sum_dev = (partial / closed - 1.0).abs();
    let mut c = check(
        "pink-closed-form",
        sum_dev,
        1e-5,
        format!("partial sum to N_max={n_max} at w = Gamma0 vs closed form; w -> 0 limit deviation {zero_dev:.2e} (tol 1e-6)"),
    );
    c.passed &= zero_dev <= 1e-6;
    Ok(c)
}

fn refinement_check(cfg: &RunConfig) -> CliResult<Check> {
    let base = solve_bound_states_with(&cfg.potential, &cfg.material, cfg.levels, &GridOptions::default())?;
    let half = GridOptions {
        spacing_angstrom: Some(base.spacing / 2.0),
    };
    let fine = solve_bound_states_with(&cfg.potential, &cfg.material, cfg.levels, &half)?;
    let dev = base
        .levels
        .energies_mev()
        .iter()
        .zip(fine.levels.energies_mev())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / cfg.potential.depth_mev;
    Ok(check(
        "grid-refinement",
        dev,
        1e-6,
        format!("max level shift / U0 when halving the spacing, {} levels", base.levels.count()),
    ))
}

pub fn run_checks(cfg: &RunConfig, seed: u64, fault: Option<Fault>) -> CliResult<ValidationReport> {
    let levels = solve_levels(cfg)?;
    let mut checks = structure_checks(&small_grid(&levels, &cfg.temperatures, fault)?);
    checks.push(two_level_check(&levels, cfg.temperatures[0]).unwrap_or_else(|e| failed("two-level-eigenvalue", e)));
    match oracle_checks(&levels, seed) {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(failed("oracles", e)),
    }
    checks.push(pink_check(&levels).unwrap_or_else(|e| failed("pink-closed-form", e)));
    checks.push(refinement_check(cfg).unwrap_or_else(|e| failed("grid-refinement", e)));
    Ok(ValidationReport {
        seed,
        fault_inject: fault,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Run the suite, write `validate.json`, and fail with the names of the
/// failed checks.
pub fn cmd_validate(cfg: &RunConfig, out: &Path, stamp: &Stamp, seed: u64, fault: Option<Fault>) -> CliResult<ValidationReport> {
    let report = run_checks(cfg, seed, fault)?;
    write_json(&out.join("validate.json"), stamp, "validation", &report)?;
    Ok(report)
}

pub fn render(report: &ValidationReport) -> String {
    report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {:<24} {:.3e} (tol {:.1e})  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance,
                c.detail
            )
        })
        .collect()
}

pub fn failures(report: &ValidationReport) -> CliResult<()> {
    let names: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.to_string()).collect();
    if names.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(names))
    }
}
