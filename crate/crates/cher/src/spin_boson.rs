//! Bosonic-bath dephasing: the phase and decoherence integrals and the
//! model factor sets they generate.
//!
//! Everything is in natural units (k_B = hbar = 1). The two workhorse
//! integrals over the spectral density J are
//!
//!   theta(t) = 4 int J(w)/w^2 (wt - sin wt) dw
//!   Phi(t)   = 4 int J(w)/w^2 coth(w/2T) (1 - cos wt) dw
//!
//! with coth -> 1 in the T = 0 limit. For the exponential-cutoff Ohmic
//! density at T = 0 both have closed forms, which the tests hold the
//! quadrature to at 1e-8.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dephasing::{DephasingFactors, TimeUnit};
use crate::error::{Error, Result};
use crate::quad;

/// Bath spectral density J(w) on w >= 0.
#[derive(Debug, Clone)]
pub enum SpectralDensity {
    /// J(w) = w exp(-w / cutoff)
    OhmicExp { cutoff: f64 },
    /// Piecewise-linear table of (w, J(w)) with strictly increasing w;
    /// zero outside the tabulated range.
    Tabulated { table: Vec<(f64, f64)> },
}

impl SpectralDensity {
    pub fn ohmic(cutoff: f64) -> Result<Self> {
        if !(cutoff > 0.0) {
            return Err(Error::BadFactors(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        Ok(SpectralDensity::OhmicExp { cutoff })
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.len() < 2 {
            return Err(Error::BadFactors(
                "tabulated density needs at least two points".into(),
            ));
        }
        if table[0].0 < 0.0 {
            return Err(Error::BadFactors("table frequencies must be >= 0".into()));
        }
        for w in table.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::BadFactors(format!(
                    "table frequencies must increase, got {} after {}",
                    w[1].0, w[0].0
                )));
            }
        }
        if let Some(bad) = table.iter().find(|(_, j)| *j < 0.0) {
            return Err(Error::BadFactors(format!(
                "spectral density must be nonnegative, got J({}) = {}",
                bad.0, bad.1
            )));
        }
        Ok(SpectralDensity::Tabulated { table })
    }

    pub fn value(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::OhmicExp { cutoff } => {
                if omega <= 0.0 {
                    0.0
                } else {
                    omega * (-omega / cutoff).exp()
                }
            }
            SpectralDensity::Tabulated { table } => {
                if omega < table[0].0 || omega > table[table.len() - 1].0 {
                    return 0.0;
                }
                let k = table.partition_point(|(w, _)| *w <= omega).max(1);
                let (w0, j0) = table[(k - 1).min(table.len() - 2)];
                let (w1, j1) = table[k.min(table.len() - 1)];
                if w1 == w0 {
                    return j0;
                }
                let frac = (omega - w0) / (w1 - w0);
                j0 + frac * (j1 - j0)
            }
        }
    }

    /// Upper integration bound: the exponential tail is dead 50 cutoffs
    /// out, tabulated data ends where the table does.
    pub fn integration_limit(&self) -> f64 {
        match self {
            SpectralDensity::OhmicExp { cutoff } => 50.0 * cutoff,
            SpectralDensity::Tabulated { table } => table[table.len() - 1].0,
        }
    }
}

/// Temperature and overall coupling scale of the bath.
#[derive(Debug, Clone, Copy)]
pub struct BathParams {
    /// Temperature in units of the cutoff (k_B = 1); 0 selects the
    /// zero-temperature limit coth -> 1.
    pub temperature: f64,
    /// Overall multiplier on J; the factor 4 of the model is already in
    /// the integral definitions.
    pub coupling_prefactor: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        BathParams {
            temperature: 0.0,
            coupling_prefactor: 1.0,
        }
    }
}

impl BathParams {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::BadFactors(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Phase theta(t) and decoherence exponent Phi(t) on a time grid.
#[derive(Debug, Clone)]
pub struct ModelFactors {
    pub times: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ModelFactors {
    pub fn new(times: Vec<f64>, theta: Vec<f64>, mut phi: Vec<f64>) -> Result<Self> {
        if times.len() != theta.len() || times.len() != phi.len() {
            return Err(Error::GridMismatch(format!(
                "lengths differ: {} times, {} theta, {} phi",
                times.len(),
                theta.len(),
                phi.len()
            )));
        }
        crate::dephasing::validate_time_grid(&times)?;
        if theta[0].abs() > 1e-12 || phi[0].abs() > 1e-12 {
            return Err(Error::BadFactors(format!(
                "theta(0) = {}, Phi(0) = {}; both must vanish",
                theta[0], phi[0]
            )));
        }
        for p in &mut phi {
            if *p < -1e-10 {
                return Err(Error::BadFactors(format!(
                    "decoherence exponent must be >= 0, got {p}"
                )));
            }
            *p = p.max(0.0);
        }
        let mut theta = theta;
        theta[0] = 0.0;
        phi[0] = 0.0;
        Ok(ModelFactors { times, theta, phi })
    }
}

/// (x - sin x) / x^2, stable near the origin.
pub(crate) fn growth_kernel(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        x / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    } else {
        (x - x.sin()) / (x * x)
    }
}

/// (1 - cos x) / x^2 = sin^2(x/2) / (2 (x/2)^2), stable near the origin.
pub(crate) fn cosine_kernel(x: f64) -> f64 {
    let h = 0.5 * x;
    if h.abs() < 1e-4 {
        0.5 * (1.0 - h * h / 3.0)
    } else {
        let s = h.sin() / h;
        0.5 * s * s
    }
}

pub(crate) fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// Both integrals at a single time, for any real t (theta is odd in t,
/// Phi even).
pub fn theta_phi_at(sd: &SpectralDensity, bath: &BathParams, t: f64) -> Result<(f64, f64)> {
    bath.validate()?;
    let limit = sd.integration_limit();
    let panels = ((limit * t.abs() / std::f64::consts::PI).ceil() as usize).clamp(1, 2000);
    let temperature = bath.temperature;

    let theta_integrand = |w: f64| sd.value(w) * t * t * growth_kernel(w * t);
    let phi_integrand = |w: f64| {
        let thermal = if temperature > 0.0 {
            coth(w / (2.0 * temperature))
        } else {
            1.0
        };
        sd.value(w) * thermal * t * t * cosine_kernel(w * t)
    };

    let map_err = |e: Error| match e {
        Error::QuadratureFailed { estimate, .. } => Error::QuadratureFailed { t, estimate },
        other => other,
    };
    let (theta, _) =
        quad::integrate(theta_integrand, 0.0, limit, panels, 1e-11, 1e-12).map_err(map_err)?;
    let (phi, _) =
        quad::integrate(phi_integrand, 0.0, limit, panels, 1e-11, 1e-12).map_err(map_err)?;
    let pref = 4.0 * bath.coupling_prefactor;
    Ok((pref * theta, pref * phi))
}

/// Evaluates theta and Phi over a grid starting at 0; time points are
/// independent and run in parallel.
pub fn compute_theta_phi(
    sd: &SpectralDensity,
    bath: &BathParams,
    times: &[f64],
) -> Result<ModelFactors> {
    crate::dephasing::validate_time_grid(times)?;
    let pairs: Vec<(f64, f64)> = times
        .par_iter()
        .map(|&t| theta_phi_at(sd, bath, t))
        .collect::<Result<_>>()?;
    let theta = pairs.iter().map(|p| p.0).collect();
    let phi = pairs.iter().map(|p| p.1).collect();
    ModelFactors::new(times.to_vec(), theta, phi)
}

/// Single-qubit dephasing factor e^{-i theta - Phi} on the model grid.
pub fn single_qubit_factor(model: &ModelFactors) -> Result<DephasingFactors> {
    let series: Vec<Complex64> = model
        .theta
        .iter()
        .zip(&model.phi)
        .map(|(&th, &ph)| Complex64::new(0.0, -th).exp() * (-ph).exp())
        .collect();
    let mut factors = BTreeMap::new();
    factors.insert(1usize, series);
    DephasingFactors::new(2, model.times.clone(), factors, TimeUnit::InverseCutoff)
}

/// Dephasing factors of two qubits coupled with equal strength to one
/// common bath, in the su(4) root numbering:
/// phi_1 = phi_4 = e^{+i theta - Phi}, phi_6 = 1, phi_9 = e^{-4 Phi},
/// phi_11 = phi_13 = e^{-i theta - Phi}.
pub fn qubit_pair_factors(
    sd: &SpectralDensity,
    bath: &BathParams,
    times: &[f64],
) -> Result<DephasingFactors> {
    let model = compute_theta_phi(sd, bath, times)?;
    let plus: Vec<Complex64> = model
        .theta
        .iter()
        .zip(&model.phi)
        .map(|(&th, &ph)| Complex64::new(0.0, th).exp() * (-ph).exp())
        .collect();
    let minus: Vec<Complex64> = plus.iter().map(|z| z.conj()).collect();
    let quartic: Vec<Complex64> = model
        .phi
        .iter()
        .map(|&ph| Complex64::new((-4.0 * ph).exp(), 0.0))
        .collect();
    let ones = vec![Complex64::new(1.0, 0.0); times.len()];

    let mut factors = BTreeMap::new();
    factors.insert(1usize, plus.clone());
    factors.insert(4usize, plus);
    factors.insert(6usize, ones);
    factors.insert(9usize, quartic);
    factors.insert(11usize, minus.clone());
    factors.insert(13usize, minus);
    DephasingFactors::new(4, times.to_vec(), factors, TimeUnit::InverseCutoff)
}

/// Single-qubit factor of a qubit pair sharing one bath with a relative
/// coupling phase, g2 = g1 e^{i phi_rel}, computed by the few-mode
/// simulator on `cfg` with its couplings of qubit 2 overridden.
///
/// `up_weight` is the population of the partner qubit's upper z state:
/// its two sectors dephase the watched qubit with opposite bath-induced
/// phases, and the reduced factor is their mixture. 0.5 is the unpolarized
/// partner used by the sweep pipeline.
pub fn relative_phase_factor(
    phi_rel: f64,
    cfg: &crate::oracle::ModeConfig,
    times: &[f64],
    up_weight: f64,
) -> Result<DephasingFactors> {
    if !(0.0..=1.0).contains(&up_weight) {
        return Err(Error::BadFactors(format!(
            "partner population must lie in [0, 1], got {up_weight}"
        )));
    }
    if cfg.modes.iter().all(|m| m.g1.norm_sqr() == 0.0) {
        return Err(Error::BadFactors(
            "the watched qubit is uncoupled; there is no phase to vary".into(),
        ));
    }
    let mut shifted = cfg.clone();
    let shift = Complex64::from_polar(1.0, phi_rel);
    for m in &mut shifted.modes {
        m.g2 = m.g1 * shift;
    }
    let pair = crate::oracle::reduced_coherences(&shifted, times)?;
    let up = pair.factor(4).ok_or(Error::MissingRootFactor(4))?;
    let down = pair.factor(11).ok_or(Error::MissingRootFactor(11))?;
    let series: Vec<Complex64> = up
        .iter()
        .zip(down)
        .map(|(a, b)| up_weight * a + (1.0 - up_weight) * b)
        .collect();
    let mut factors = BTreeMap::new();
    factors.insert(1usize, series);
    DephasingFactors::new(2, times.to_vec(), factors, pair.unit())
}
