//! Dipole autocorrelation by direct propagation with a matrix exponential,
//! Fourier-transformed by Simpson quadrature.
//!
//! `c(tau) = <D(tau) D(0)> - <D>^2 = y^T exp(S tau) y` with `S` the
//! symmetrised generator and `y_i = (D_i - <D>) sqrt(rho_i)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::SymmetricBasis;
use crate::error::{Error, Result};
use crate::master::{steady_state, symmetrised_generator, RateMatrix};
use crate::potential::LevelStructure;

/// Quadrature target: step * (spectral radius + w_max).
const STEP_PRODUCT: f64 = 0.2;
/// The correlator must have decayed to this fraction of c(0).
const DECAY_TOLERANCE: f64 = 1e-10;
const MAX_STEPS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauGrid {
    /// Uniform grid 0, step, ..., tau_max.
    Uniform { step: f64, tau_max: f64 },
    /// Step from the generator norm and the highest frequency; propagate
    /// until c(tau) < 1e-10 c(0).
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSpectrum {
    pub step: f64,
    /// c(k * step) for k = 0, 1, ...
    pub correlation: Vec<f64>,
    pub omega: Vec<f64>,
    pub spectrum: Vec<f64>,
}

impl CorrelatorSpectrum {
    pub fn tau_max(&self) -> f64 {
        self.step * (self.correlation.len() - 1) as f64
    }
}

pub fn correlator_spectrum(
    rm: &RateMatrix,
    basis: &SymmetricBasis,
    levels: &LevelStructure,
    tau: &TauGrid,
    omega: &[f64],
) -> Result<CorrelatorSpectrum> {
    if basis.len() != rm.dimension() {
        return Err(Error::domain("rate matrix and basis dimensions differ"));
    }
    if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::domain("frequencies must be finite and >= 0"));
    }
    // detailed balance is required for the symmetrised propagator
    rm.log_stationary()?;
    let rho = steady_state(rm)?;
    let dipoles = basis.dipoles(levels)?;
    let mean: f64 = dipoles.iter().zip(&rho).map(|(d, r)| d * r).sum();
    let y = DVector::from_iterator(
        rho.len(),
        dipoles.iter().zip(&rho).map(|(d, r)| (d - mean) * r.sqrt()),
    );
    let s = symmetrised_generator(rm);
    let radius = (0..s.nrows())
        .map(|i| s.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let w_max = omega.iter().cloned().fold(0.0, f64::max);

    let (step, fixed_steps) = match *tau {
        TauGrid::Uniform { step, tau_max } => {
            if !(step > 0.0 && tau_max > step && step.is_finite() && tau_max.is_finite()) {
                return Err(Error::invalid(format!("tau grid needs 0 < step < tau_max, got {step}, {tau_max}")));
            }
            (step, Some((tau_max / step).round() as usize))
        }
        TauGrid::Auto => (STEP_PRODUCT / (radius + w_max).max(f64::MIN_POSITIVE), None),
    };
    let propagator = (&s * step).exp();

    let c0 = y.dot(&y);
    let mut correlation = vec![c0];
    let mut v = y.clone();
    loop {
        v = &propagator * &v;
        let c = y.dot(&v);
        correlation.push(c);
        let k = correlation.len() - 1;
        match fixed_steps {
            Some(n) if k >= n => break,
            Some(_) => {}
            None => {
                if (c.abs() <= DECAY_TOLERANCE * c0 || c0 == 0.0) && k % 2 == 0 {
                    break;
                }
                if k >= MAX_STEPS {
                    return Err(Error::Resolution {
                        required_tau_max: required_tau_max(&correlation, step, c0),
                    });
                }
            }
        }
    }
    if fixed_steps.is_some() {
        let last = *correlation.last().unwrap();
        if last.abs() > DECAY_TOLERANCE * c0 {
            return Err(Error::Resolution {
                required_tau_max: required_tau_max(&correlation, step, c0),
            });
        }
        if correlation.len() % 2 == 0 {
            // Simpson needs an even number of intervals
            v = &propagator * &v;
            correlation.push(y.dot(&v));
        }
    }

    let spectrum = omega.iter().map(|&w| cosine_transform(&correlation, step, w)).collect();
    Ok(CorrelatorSpectrum {
        step,
        correlation,
        omega: omega.to_vec(),
        spectrum,
    })
}

/// Extrapolate the tail decay rate to where c falls below the tolerance.
fn required_tau_max(correlation: &[f64], step: f64, c0: f64) -> f64 {
    let n = correlation.len();
    let tau = step * (n - 1) as f64;
    let (a, b) = (correlation[n - 2].abs(), correlation[n - 1].abs());
    if !(a > b && b > 0.0) {
        return 2.0 * tau;
    }
    let rate = (a / b).ln() / step;
    tau + (b / (DECAY_TOLERANCE * c0)).ln().max(0.0) / rate
}

/// S(w) = 2 int_0^tau_max c(tau) cos(w tau) d tau by composite Simpson.
fn cosine_transform(c: &[f64], h: f64, w: f64) -> f64 {
    let n = c.len() - 1;
    let mut acc = c[0] + c[n] * (w * h * n as f64).cos();
    for (k, ck) in c.iter().enumerate().take(n).skip(1) {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += weight * ck * (w * h * k as f64).cos();
    }
    2.0 * acc * h / 3.0
}
