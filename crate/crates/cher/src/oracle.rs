//! Brute-force few-mode simulator of a qubit pair dephasing through a
//! shared boson bath.
//!
//! Every mode couples to the z component of each qubit, so the joint
//! evolution is exactly solvable sector by sector: a z-product state tags
//! each mode with a scalar coupling, the bath gets displaced, and tracing
//! it out multiplies every coherence by a per-mode overlap. The default
//! path evaluates that overlap in closed form; a truncated-Fock path
//! builds the displacement operators numerically and serves as an
//! independent check of the first.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dephasing::{DephasingFactors, TimeUnit};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quad;
use crate::spin_boson::{cosine_kernel, coth, growth_kernel, SpectralDensity};

/// Largest admissible population outside the kept Fock levels.
pub const LEAKAGE_TOL: f64 = 1e-6;

/// The exponential-cutoff density carries under 1e-11 of its weight past
/// thirty cutoffs; stopping there buys node resolution where J lives.
const OHMIC_WINDOW: f64 = 30.0;

/// One bath mode and the coupling of each qubit to it.
#[derive(Clone, Copy, Debug)]
pub struct Mode {
    pub omega: f64,
    pub g1: Complex64,
    pub g2: Complex64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    /// Exact per-mode overlap of displaced thermal states.
    AnalyticDisplacement,
    /// Numerically exponentiated displacement on a truncated Fock space.
    TruncatedFock,
}

#[derive(Clone, Debug)]
pub struct ModeConfig {
    pub modes: Vec<Mode>,
    /// Levels kept per mode on the numeric path.
    pub fock_cutoff: usize,
    /// Bath temperature, natural units; zero selects the vacuum.
    pub temperature: f64,
    pub method: OracleMethod,
}

impl ModeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::BadFactors("mode list is empty".into()));
        }
        if let Some(m) = self.modes.iter().find(|m| !(m.omega > 0.0)) {
            return Err(Error::BadFactors(format!(
                "mode frequencies must be positive, got {}",
                m.omega
            )));
        }
        if self.temperature < 0.0 {
            return Err(Error::BadFactors(format!(
                "temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        if self.method == OracleMethod::TruncatedFock && self.fock_cutoff < 2 {
            return Err(Error::BadFactors(format!(
                "numeric path needs at least two Fock levels, got {}",
                self.fock_cutoff
            )));
        }
        Ok(())
    }
}

/// Quadrature nodes standing in for a continuum spectral density. Each
/// node's weight already absorbs the density value, so it is the squared
/// coupling magnitude of that mode.
#[derive(Clone, Debug)]
pub struct DiscretizedBath {
    nodes: Vec<(f64, f64)>,
}

impl DiscretizedBath {
    /// (frequency, squared coupling) pairs.
    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    /// Discrete counterpart of the phase integral
    /// 4 int J(w)/w^2 (wt - sin wt) dw.
    pub fn theta(&self, t: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(w, g2)| 4.0 * g2 * t * t * growth_kernel(w * t))
            .sum()
    }

    /// Discrete counterpart of the decoherence integral
    /// 4 int J(w)/w^2 coth(w/2T) (1 - cos wt) dw.
    pub fn phi(&self, t: f64, temperature: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(w, g2)| {
                let thermal = if temperature > 0.0 {
                    coth(w / (2.0 * temperature))
                } else {
                    1.0
                };
                4.0 * g2 * thermal * t * t * cosine_kernel(w * t)
            })
            .sum()
    }

    /// Both qubits coupled with equal magnitude, the second shifted by
    /// `relative_phase`.
    pub fn pair_modes(&self, relative_phase: f64) -> Vec<Mode> {
        let shift = Complex64::from_polar(1.0, relative_phase);
        self.nodes
            .iter()
            .map(|&(w, g2)| {
                let g = Complex64::new(g2.sqrt(), 0.0);
                Mode {
                    omega: w,
                    g1: g,
                    g2: g * shift,
                }
            })
            .collect()
    }

    /// Only the first qubit coupled.
    pub fn single_qubit_modes(&self) -> Vec<Mode> {
        self.nodes
            .iter()
            .map(|&(w, g2)| Mode {
                omega: w,
                g1: Complex64::new(g2.sqrt(), 0.0),
                g2: Complex64::new(0.0, 0.0),
            })
            .collect()
    }
}

/// Gauss-Legendre discretization of a spectral density into finitely many
/// modes, with node weights folded into the couplings.
pub fn discretize_bath(sd: &SpectralDensity, n_modes: usize) -> Result<DiscretizedBath> {
    if n_modes == 0 {
        return Err(Error::BadFactors("need at least one mode".into()));
    }
    let upper = match sd {
        SpectralDensity::OhmicExp { cutoff } => OHMIC_WINDOW * cutoff,
        _ => sd.integration_limit(),
    };
    let (x, w) = quad::gauss_legendre_on(n_modes, 0.0, upper)?;
    let nodes: Vec<(f64, f64)> = x
        .iter()
        .zip(&w)
        .map(|(&omega, &weight)| (omega, weight * sd.value(omega)))
        .filter(|&(_, g2)| g2 > 0.0)
        .collect();
    if nodes.is_empty() {
        return Err(Error::BadFactors(
            "spectral density vanishes on every quadrature node".into(),
        ));
    }
    Ok(DiscretizedBath { nodes })
}

/// z-basis sectors and the coherence -> factor-index map for the reduced
/// system. Sector order fixes row/column conventions everywhere below.
struct SectorLayout {
    dim: usize,
    /// Per-sector (sign of qubit 1, sign of qubit 2).
    signs: Vec<(f64, f64)>,
    /// (row, column, factor index) per independent coherence.
    pairs: Vec<(usize, usize, usize)>,
}

fn sector_layout(cfg: &ModeConfig) -> SectorLayout {
    let coupled1 = cfg.modes.iter().any(|m| m.g1.norm_sqr() > 0.0);
    let coupled2 = cfg.modes.iter().any(|m| m.g2.norm_sqr() > 0.0);
    if coupled1 && coupled2 {
        SectorLayout {
            dim: 4,
            signs: vec![(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)],
            pairs: vec![
                (0, 1, 1),
                (0, 2, 4),
                (0, 3, 9),
                (1, 2, 6),
                (1, 3, 11),
                (2, 3, 13),
            ],
        }
    } else if coupled2 {
        SectorLayout {
            dim: 2,
            signs: vec![(0.0, 1.0), (0.0, -1.0)],
            pairs: vec![(0, 1, 1)],
        }
    } else {
        // qubit 1 alone, or the trivial uncoupled config
        SectorLayout {
            dim: 2,
            signs: vec![(1.0, 0.0), (-1.0, 0.0)],
            pairs: vec![(0, 1, 1)],
        }
    }
}

fn sector_coupling(mode: &Mode, signs: (f64, f64)) -> Complex64 {
    mode.g1 * signs.0 + mode.g2 * signs.1
}

/// Phase accumulated by a sector from the bath-induced self-interaction,
/// sum_k |z_k|^2 (w t - sin w t)/w^2. Exact in both paths.
fn sector_phase(cfg: &ModeConfig, signs: (f64, f64), t: f64) -> f64 {
    cfg.modes
        .iter()
        .map(|m| sector_coupling(m, signs).norm_sqr() * t * t * growth_kernel(m.omega * t))
        .sum()
}

fn analytic_factor(cfg: &ModeConfig, a: (f64, f64), b: (f64, f64), t: f64) -> Complex64 {
    let mut phase = sector_phase(cfg, a, t) - sector_phase(cfg, b, t);
    let mut log_mag = 0.0;
    for m in &cfg.modes {
        let za = sector_coupling(m, a);
        let zb = sector_coupling(m, b);
        let alpha_sq = 2.0 * t * t * cosine_kernel(m.omega * t);
        phase += alpha_sq * (zb.conj() * za).im;
        let thermal = if cfg.temperature > 0.0 {
            coth(m.omega / (2.0 * cfg.temperature))
        } else {
            1.0
        };
        log_mag -= 0.5 * (za - zb).norm_sqr() * alpha_sq * thermal;
    }
    Complex64::from_polar(log_mag.exp(), phase)
}

/// Thermal occupations on the kept levels plus the discarded tail mass.
fn thermal_populations(omega: f64, temperature: f64, cut: usize) -> (Vec<f64>, f64) {
    if temperature <= 0.0 {
        let mut p = vec![0.0; cut];
        p[0] = 1.0;
        return (p, 0.0);
    }
    let q = (-omega / temperature).exp();
    let raw: Vec<f64> = (0..cut).map(|n| q.powi(n as i32)).collect();
    let kept: f64 = raw.iter().sum();
    let total = 1.0 / (1.0 - q);
    let tail = (total - kept) / total;
    (raw.iter().map(|p| p / total).collect(), tail)
}

/// exp(beta b† - conj(beta) b) on `cut` Fock levels, by diagonalizing the
/// Hermitian generator.
fn displacement(beta: Complex64, cut: usize) -> Result<Array2<Complex64>> {
    let mut herm = Array2::<Complex64>::zeros((cut, cut));
    for n in 1..cut {
        // i (beta b† - conj(beta) b) is Hermitian
        let up = Complex64::new(0.0, 1.0) * beta * (n as f64).sqrt();
        herm[(n, n - 1)] = up;
        herm[(n - 1, n)] = up.conj();
    }
    let (vals, vecs) = linalg::eigh(&herm)?;
    let mut out = Array2::<Complex64>::zeros((cut, cut));
    for (k, &mu) in vals.iter().enumerate() {
        let ph = Complex64::from_polar(1.0, -mu);
        for i in 0..cut {
            for j in 0..cut {
                out[(i, j)] += vecs[(i, k)] * ph * vecs[(j, k)].conj();
            }
        }
    }
    Ok(out)
}

struct FockModeResult {
    /// Per coherence pair, the bath-overlap contribution of this mode.
    overlaps: Vec<Complex64>,
    leakage: f64,
}

fn fock_mode_overlaps(
    cfg: &ModeConfig,
    layout: &SectorLayout,
    mode: &Mode,
    t: f64,
) -> Result<FockModeResult> {
    let cut = cfg.fock_cutoff;
    let (pops, thermal_tail) = thermal_populations(mode.omega, cfg.temperature, cut);
    let alpha = (Complex64::new(1.0, 0.0)
        - Complex64::from_polar(1.0, mode.omega * t))
        / mode.omega;

    let mut displacements: Vec<(Complex64, Array2<Complex64>)> = Vec::new();
    let mut sector_ops = Vec::with_capacity(layout.signs.len());
    let mut leakage = thermal_tail;
    for &signs in &layout.signs {
        let beta = sector_coupling(mode, signs) * alpha;
        let idx = match displacements.iter().position(|(b, _)| *b == beta) {
            Some(i) => i,
            None => {
                displacements.push((beta, displacement(beta, cut)?));
                displacements.len() - 1
            }
        };
        sector_ops.push(idx);
        let d = &displacements[idx].1;
        // displaced-state population in the top two kept levels
        let mut top = 0.0;
        for row in [cut - 2, cut - 1] {
            for (j, &p) in pops.iter().enumerate() {
                top += p * d[(row, j)].norm_sqr();
            }
        }
        leakage = leakage.max(top);
    }

    let overlaps = layout
        .pairs
        .iter()
        .map(|&(a, b, _)| {
            let da = &displacements[sector_ops[a]].1;
            let db = &displacements[sector_ops[b]].1;
            // Tr[ D_b† D_a rho ] with rho diagonal
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &p) in pops.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let mut diag = Complex64::new(0.0, 0.0);
                for k in 0..cut {
                    diag += db[(k, n)].conj() * da[(k, n)];
                }
                acc += p * diag;
            }
            acc
        })
        .collect();
    Ok(FockModeResult { overlaps, leakage })
}

fn suggest_cutoff(cfg: &ModeConfig, layout: &SectorLayout, t_max: f64) -> usize {
    let mut mean: f64 = 1.0;
    for m in &cfg.modes {
        let amp_sq = 2.0 * t_max * t_max * cosine_kernel(m.omega * t_max).max(
            // the envelope |alpha|^2 <= 4/w^2 is reached within a period
            2.0 / (m.omega * m.omega * t_max * t_max).max(f64::MIN_POSITIVE),
        );
        let thermal = if cfg.temperature > 0.0 {
            coth(m.omega / (2.0 * cfg.temperature))
        } else {
            1.0
        };
        for &signs in &layout.signs {
            let occ = sector_coupling(m, signs).norm_sqr() * amp_sq * thermal;
            mean = mean.max(occ);
        }
    }
    (mean + 10.0 * (mean + 1.0).sqrt() + 10.0).ceil() as usize
}

/// Reduced dephasing factors of the qubits after tracing out the bath.
///
/// Both qubits coupled gives the four-level factor set over all six
/// coherences; a single coupled qubit reduces to its lone factor. The
/// factor indices follow the generator numbering used by the rest of the
/// crate.
pub fn reduced_coherences(cfg: &ModeConfig, times: &[f64]) -> Result<DephasingFactors> {
    cfg.validate()?;
    let layout = sector_layout(cfg);

    let per_time: Vec<Vec<Complex64>> = match cfg.method {
        OracleMethod::AnalyticDisplacement => times
            .par_iter()
            .map(|&t| {
                layout
                    .pairs
                    .iter()
                    .map(|&(a, b, _)| {
                        analytic_factor(cfg, layout.signs[a], layout.signs[b], t)
                    })
                    .collect()
            })
            .collect(),
        OracleMethod::TruncatedFock => {
            let results: Vec<Result<(Vec<Complex64>, f64)>> = times
                .par_iter()
                .map(|&t| {
                    let mut vals =
                        vec![Complex64::new(1.0, 0.0); layout.pairs.len()];
                    let mut worst = 0.0f64;
                    for mode in &cfg.modes {
                        let r = fock_mode_overlaps(cfg, &layout, mode, t)?;
                        worst = worst.max(r.leakage);
                        for (v, o) in vals.iter_mut().zip(&r.overlaps) {
                            *v *= o;
                        }
                    }
                    for (k, &(a, b, _)) in layout.pairs.iter().enumerate() {
                        let phase = sector_phase(cfg, layout.signs[a], t)
                            - sector_phase(cfg, layout.signs[b], t);
                        vals[k] *= Complex64::from_polar(1.0, phase);
                    }
                    Ok((vals, worst))
                })
                .collect();
            let mut rows = Vec::with_capacity(times.len());
            let mut leakage = 0.0f64;
            for r in results {
                let (vals, worst) = r?;
                leakage = leakage.max(worst);
                rows.push(vals);
            }
            if leakage > LEAKAGE_TOL {
                let t_max = times.iter().cloned().fold(0.0, f64::max);
                return Err(Error::FockLeakage {
                    leakage,
                    suggested_cutoff: suggest_cutoff(cfg, &layout, t_max),
                });
            }
            rows
        }
    };

    let mut map: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    for (k, &(_, _, index)) in layout.pairs.iter().enumerate() {
        map.insert(index, per_time.iter().map(|row| row[k]).collect());
    }
    DephasingFactors::new(layout.dim, times.to_vec(), map, TimeUnit::InverseCutoff)
}
