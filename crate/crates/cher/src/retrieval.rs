//! Retrieval of quasi-distributions over dephasing rates.
//!
//! A factor series phi_m(t) is the characteristic function of a (quasi-)
//! density along the rate direction of root m. This module inverts those
//! series back to densities on uniform grids, detects directions that are
//! pure phases (point masses), and provides the exact forward transform
//! used to check any retrieved density against its input.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dephasing::{DephasingFactors, TimeUnit};
use crate::error::{Error, Result};
use crate::lie::{root_system, RootSystem};
use crate::linalg;

const IMAG_RESIDUE_TOL: f64 = 1e-8;
const MASS_TOL: f64 = 1e-6;
const PHASE_TOL: f64 = 1e-10;

/// Coordinate frame of a dense grid.
///
/// `Cartan`: lattice axes are the diagonal-generator coordinates, one per
/// Cartan slot in ascending index order. Point masses are not representable
/// here. `SimpleRoot`: physical components are projections onto the simple
/// roots, ascending by ladder index; directions carried by a point mass are
/// listed as delta factors labelled `x<index>`, the remaining directions map
/// to the dense axes in the same ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Frame {
    Cartan,
    SimpleRoot,
}

/// Uniform grid axis: points `min + i * step` for `i = 0..len`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub label: String,
    pub min: f64,
    pub step: f64,
    pub len: usize,
}

impl Axis {
    pub fn value(&self, i: usize) -> f64 {
        self.min + self.step * i as f64
    }
}

/// Direction whose factor is the pure phase e^{-i c t}: a point mass at c.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaFactor {
    pub label: String,
    pub location: f64,
}

/// Real density sampled on a uniform lattice, plus any point-mass
/// directions. Column j of `basis` is the physical displacement per lattice
/// step along axis j, so oblique grids produced by frame changes keep their
/// exact values. Total mass stays within 1e-6 of one.
#[derive(Clone, Debug)]
pub struct QuasiDistribution {
    frame: Frame,
    axes: Vec<Axis>,
    basis: Array2<f64>,
    density: Vec<f64>,
    deltas: Vec<DeltaFactor>,
    mass: f64,
}

impl QuasiDistribution {
    pub fn new(
        frame: Frame,
        axes: Vec<Axis>,
        basis: Array2<f64>,
        density: Vec<f64>,
        deltas: Vec<DeltaFactor>,
    ) -> Result<Self> {
        let d = axes.len();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(Error::InvalidState(format!(
                "lattice basis is {}x{} for {} axes",
                basis.nrows(),
                basis.ncols(),
                d
            )));
        }
        let mut cells = 1usize;
        for ax in &axes {
            if ax.len == 0 || !(ax.step > 0.0) {
                return Err(Error::InvalidState(format!(
                    "axis {} needs a positive step and at least one point",
                    ax.label
                )));
            }
            cells = cells.checked_mul(ax.len).ok_or_else(|| {
                Error::InvalidState("lattice cell count overflows".into())
            })?;
        }
        if density.len() != cells {
            return Err(Error::InvalidState(format!(
                "density holds {} values for {} lattice cells",
                density.len(),
                cells
            )));
        }
        if density.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("density has non-finite values".into()));
        }
        if frame == Frame::Cartan && !deltas.is_empty() {
            return Err(Error::InvalidState(
                "point-mass directions require the simple-root frame".into(),
            ));
        }
        let mut labels: Vec<&str> = axes
            .iter()
            .map(|a| a.label.as_str())
            .chain(deltas.iter().map(|d| d.label.as_str()))
            .collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidState("duplicate direction label".into()));
        }
        let volume = cell_volume_of(&axes, &basis);
        let mass: f64 = density.iter().sum::<f64>() * volume;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Unnormalized { mass });
        }
        Ok(QuasiDistribution {
            frame,
            axes,
            basis,
            density,
            deltas,
            mass,
        })
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn delta_factors(&self) -> &[DeltaFactor] {
        &self.deltas
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cell_volume(&self) -> f64 {
        cell_volume_of(&self.axes, &self.basis)
    }

    pub fn min_density(&self) -> f64 {
        self.density.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True when every lattice axis is its own physical direction.
    pub fn is_axis_aligned(&self) -> bool {
        let d = self.axes.len();
        (0..d).all(|r| {
            (0..d).all(|c| {
                let want = if r == c { 1.0 } else { 0.0 };
                (self.basis[[r, c]] - want).abs() < 1e-12
            })
        })
    }

    /// Physical coordinates of the cell at flat row-major index `flat`.
    pub fn physical_point(&self, flat: usize) -> Vec<f64> {
        let d = self.axes.len();
        let mut lattice = vec![0.0; d];
        let mut rem = flat;
        for j in (0..d).rev() {
            lattice[j] = self.axes[j].value(rem % self.axes[j].len);
            rem /= self.axes[j].len;
        }
        (0..d)
            .map(|r| (0..d).map(|c| self.basis[[r, c]] * lattice[c]).sum())
            .collect()
    }

    /// Dense marginal onto one axis; the other axes integrate out and the
    /// point-mass directions carry no weight. Axis-aligned grids only.
    pub fn marginal(&self, axis: usize) -> Result<QuasiDistribution> {
        if axis >= self.axes.len() {
            return Err(Error::InvalidState(format!(
                "axis {axis} out of range for a {}-axis grid",
                self.axes.len()
            )));
        }
        if !self.is_axis_aligned() {
            return Err(Error::InvalidState(
                "marginals need an axis-aligned grid".into(),
            ));
        }
        let ax = self.axes[axis].clone();
        let other_volume: f64 = self
            .axes
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != axis)
            .map(|(_, a)| a.step)
            .product();
        let mut out = vec![0.0; ax.len];
        let d = self.axes.len();
        for (flat, &v) in self.density.iter().enumerate() {
            let mut rem = flat;
            let mut idx = 0;
            for j in (0..d).rev() {
                let i = rem % self.axes[j].len;
                rem /= self.axes[j].len;
                if j == axis {
                    idx = i;
                }
            }
            out[idx] += v * other_volume;
        }
        QuasiDistribution::new(
            self.frame,
            vec![ax],
            Array2::eye(1),
            out,
            Vec::new(),
        )
    }
}

fn cell_volume_of(axes: &[Axis], basis: &Array2<f64>) -> f64 {
    let steps: f64 = axes.iter().map(|a| a.step).product();
    linalg::det_real(basis).abs() * steps
}

/// Grid and residual diagnostics attached to every inversion.
#[derive(Clone, Debug)]
pub struct InversionReport {
    /// Input samples per time axis.
    pub samples: usize,
    /// Transform length per axis after padding.
    pub transform_len: usize,
    pub dt: f64,
    pub domega: f64,
    /// Tail fraction of the raised-cosine window, when one was applied.
    pub window: Option<f64>,
    /// Largest factor magnitude at the end of the time grid.
    pub tail_magnitude: f64,
    /// max |Im| / max |Re| of the raw inverse transform.
    pub max_imag_residue: f64,
    pub mass_defect: f64,
    /// Sup-norm mismatch of the forward transform of the result against the
    /// input series, keyed by direction label.
    pub forward_residuals: BTreeMap<String, f64>,
}

/// Controls for the one-dimensional inversion.
#[derive(Clone, Debug)]
pub struct InversionConfig {
    /// Transform length = pad * samples; at least 2 so the reflected
    /// negative-time half never collides with the data.
    pub pad: usize,
    /// Largest |phi(T)| accepted without a window.
    pub tail_threshold: f64,
    /// Raised-cosine taper over this trailing fraction of the series.
    pub window: Option<f64>,
    /// Skip the forward-transform residual (left empty in the report);
    /// useful for refinement reruns where only the density is wanted.
    pub forward_check: bool,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            pad: 2,
            tail_threshold: 0.05,
            window: None,
            forward_check: true,
        }
    }
}

fn uniform_spacing(times: &[f64]) -> Result<f64> {
    crate::dephasing::validate_time_grid(times)?;
    if times.len() < 4 {
        return Err(Error::BadTimeGrid(
            "inversion needs at least four samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-8 * dt {
            return Err(Error::BadTimeGrid(
                "inversion requires a uniform time grid".into(),
            ));
        }
    }
    Ok(dt)
}

/// sum_j weights[j] e^{-i rates[j] t} for every t.
fn phase_sum(rates: &[f64], weights: &[f64], times: &[f64]) -> Vec<Complex64> {
    times
        .par_iter()
        .map(|&t| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (&r, &w) in rates.iter().zip(weights) {
                acc += Complex64::from_polar(w, -r * t);
            }
            acc
        })
        .collect()
}

fn sup_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Ascending frequency axis of an M-point transform with spacing dt.
fn frequency_axis(m: usize, dt: f64, label: &str) -> Axis {
    let domega = 2.0 * PI / (m as f64 * dt);
    Axis {
        label: label.to_owned(),
        min: -((m / 2) as f64) * domega,
        step: domega,
        len: m,
    }
}

/// Offset s with sorted[i] = wrapped[(i + s) % m].
fn fft_sort_shift(m: usize) -> usize {
    (m + 1) / 2
}

/// Recovers the density along one rate direction from its factor series by
/// discrete Fourier inversion.
///
/// The series is extended to negative times by conjugate reflection with
/// trapezoid end weights, transformed on a grid `pad` times longer, and the
/// real part is kept after checking the imaginary residue. The returned
/// grid integrates to the value of phi at t = 0 exactly, up to rounding.
/// A tail magnitude above the threshold is an error unless a raised-cosine
/// window is requested; windowing biases the result and is always reported.
pub fn invert_1d(
    times: &[f64],
    values: &[Complex64],
    label: &str,
    cfg: &InversionConfig,
) -> Result<(QuasiDistribution, InversionReport)> {
    if values.len() != times.len() {
        return Err(Error::BadFactors(format!(
            "{} samples on a {}-point grid",
            values.len(),
            times.len()
        )));
    }
    if cfg.pad < 2 {
        return Err(Error::InvalidState(
            "transform padding below 2 folds negative times onto the data".into(),
        ));
    }
    let dt = uniform_spacing(times)?;
    let n = times.len();
    let tail = values[n - 1].norm();
    if cfg.window.is_none() && tail > cfg.tail_threshold {
        return Err(Error::InsufficientDecay {
            tail,
            threshold: cfg.tail_threshold,
        });
    }

    let mut series = values.to_vec();
    if let Some(frac) = cfg.window {
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(Error::InvalidState(format!(
                "window fraction {frac} outside (0, 1]"
            )));
        }
        let t_end = times[n - 1];
        let t_start = t_end * (1.0 - frac);
        for (s, &t) in series.iter_mut().zip(times) {
            if t > t_start {
                *s *= 0.5 * (1.0 + (PI * (t - t_start) / (t_end - t_start)).cos());
            }
        }
    }

    let m = cfg.pad * n;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[0] = series[0];
    for j in 1..n {
        let w = if j == n - 1 { 0.5 } else { 1.0 };
        buf[j] = series[j] * w;
        buf[m - j] = buf[j].conj();
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);

    let shift = fft_sort_shift(m);
    let scale = dt / (2.0 * PI);
    let mut density = vec![0.0; m];
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    for i in 0..m {
        let z = buf[(i + shift) % m] * scale;
        density[i] = z.re;
        max_re = max_re.max(z.re.abs());
        max_im = max_im.max(z.im.abs());
    }
    let residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    if residue > IMAG_RESIDUE_TOL {
        return Err(Error::InvalidState(format!(
            "imaginary residue {residue:.3e} of the inverse transform exceeds {IMAG_RESIDUE_TOL:.0e}"
        )));
    }

    let axis = frequency_axis(m, dt, label);
    let domega = axis.step;
    let mass: f64 = density.iter().sum::<f64>() * domega;
    let q = QuasiDistribution::new(
        Frame::SimpleRoot,
        vec![axis],
        Array2::eye(1),
        density,
        Vec::new(),
    )?;

    let mut forward = BTreeMap::new();
    if cfg.forward_check {
        let rates: Vec<f64> = q.axes[0].iter_values().collect();
        let weights: Vec<f64> = q.density.iter().map(|v| v * domega).collect();
        let recovered = phase_sum(&rates, &weights, times);
        forward.insert(label.to_owned(), sup_diff(&recovered, values));
    }

    let report = InversionReport {
        samples: n,
        transform_len: m,
        dt,
        domega,
        window: cfg.window,
        tail_magnitude: tail,
        max_imag_residue: residue,
        mass_defect: (mass - 1.0).abs(),
        forward_residuals: forward,
    };
    Ok((q, report))
}

impl Axis {
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.value(i))
    }
}

/// Identifies a factor series that is a pure phase e^{-i c t} and returns c.
///
/// Requires every |phi| within 1e-10 of one; c comes from a least-squares
/// fit of the unwrapped phase through the origin and must reproduce the
/// series to sup-norm 1e-10.
pub fn detect_delta(times: &[f64], values: &[Complex64]) -> Option<f64> {
    if values.len() != times.len() || values.is_empty() {
        return None;
    }
    if values.iter().any(|v| (v.norm() - 1.0).abs() > PHASE_TOL) {
        return None;
    }
    let mut prev = 0.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, v) in times.iter().zip(values) {
        let raw = v.arg();
        let ph = raw + 2.0 * PI * ((prev - raw) / (2.0 * PI)).round();
        prev = ph;
        num += ph * t;
        den += t * t;
    }
    let c = if den > 0.0 { -num / den } else { 0.0 };
    let ok = times
        .iter()
        .zip(values)
        .all(|(&t, v)| (v - Complex64::from_polar(1.0, -c * t)).norm() < PHASE_TOL);
    ok.then_some(c)
}

/// Controls for the correlated two-direction inversion of a qubit pair.
#[derive(Clone, Debug)]
pub struct PairInversionConfig {
    /// Samples per axis of the square transform grid.
    pub grid: usize,
    /// Half-period: the grid covers times in [-t_max, t_max).
    pub t_max: f64,
    pub tail_threshold: f64,
    /// Largest allowed mismatch between the measured factors and the
    /// restriction of the two-time profile to its slices.
    pub slice_tolerance: f64,
    /// Skip the forward-transform residuals (left empty in the report).
    pub forward_check: bool,
}

impl PairInversionConfig {
    pub fn for_cutoff(cutoff: f64) -> Self {
        PairInversionConfig {
            grid: 512,
            t_max: 40.0 / cutoff,
            tail_threshold: 0.05,
            slice_tolerance: 1e-10,
            forward_check: true,
        }
    }
}

/// Two-time profile of a qubit pair coupled with equal strength to one
/// zero-temperature bath with an exponential cutoff. Restricting to
/// (t, 0), (0, t), (t, t) gives the three independent measured factors.
pub fn pair_profile(t1: f64, t13: f64, cutoff: f64) -> Complex64 {
    let u = cutoff * (t1 - t13);
    let theta = 4.0 * (u - u.atan());
    let s2 = (t1 + t13) * (t1 + t13);
    let psi = if s2 > 0.0 {
        let ln_tau = 8.0 * t1 * t13 / s2 * LN_2;
        let tau = ln_tau.clamp(-700.0, 10.0).exp();
        let ratio = cutoff * cutoff * s2 / tau;
        if ratio.is_finite() {
            2.0 * tau * ratio.ln_1p()
        } else {
            2.0 * tau * ((cutoff * cutoff * s2).ln() - ln_tau)
        }
    } else {
        0.0
    };
    Complex64::from_polar((-psi).exp(), theta)
}

fn require_factor<'a>(f: &'a DephasingFactors, m: usize) -> Result<&'a [Complex64]> {
    f.factor(m).ok_or(Error::MissingRootFactor(m))
}

/// Joint inversion of all six factor series of a qubit pair whose two
/// lowest raise directions are fully correlated.
///
/// Only the equal-coupling zero-temperature exponential-cutoff profile is
/// supported: the three independent slices of the input are checked against
/// it and any mismatch aborts with the offending direction named. The
/// profile is sampled on a wrapped two-time grid (Nyquist row and column
/// zeroed on even grids), inverted by a two-dimensional transform, and the
/// trivial third direction is attached as a point mass. Negative cells are
/// kept as found.
pub fn invert_pair_correlated(
    factors: &DephasingFactors,
    cutoff: f64,
    cfg: &PairInversionConfig,
) -> Result<(QuasiDistribution, InversionReport)> {
    if factors.dim() != 4 {
        return Err(Error::BadDimension(factors.dim()));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidState("cutoff must be positive".into()));
    }
    if cfg.grid < 8 {
        return Err(Error::InvalidState(format!(
            "transform grid {} is too small",
            cfg.grid
        )));
    }
    let times = factors.times();

    let slices: [(usize, fn(f64, f64) -> (f64, f64)); 3] = [
        (1, |t, _| (t, 0.0)),
        (13, |t, _| (0.0, t)),
        (9, |t, _| (t, t)),
    ];
    for (m, path) in slices {
        let series = require_factor(factors, m)?;
        let dev = times
            .iter()
            .zip(series)
            .map(|(&t, v)| {
                let (a, b) = path(t, t);
                (v - pair_profile(a, b, cutoff)).norm()
            })
            .fold(0.0, f64::max);
        if dev > cfg.slice_tolerance {
            return Err(Error::NoInversionStrategy(format!(
                "factor {m} deviates from the correlated-pair profile slice by {dev:.3e}"
            )));
        }
    }
    for (m, twin) in [(4usize, 1usize), (11, 13)] {
        let a = require_factor(factors, m)?;
        let b = require_factor(factors, twin)?;
        let dev = sup_diff(a, b);
        if dev > cfg.slice_tolerance {
            return Err(Error::NoInversionStrategy(format!(
                "factor {m} differs from factor {twin} by {dev:.3e}; \
                 the correlated-pair ansatz needs them equal"
            )));
        }
    }
    let trivial = require_factor(factors, 6)?;
    let delta_loc = detect_delta(times, trivial).ok_or_else(|| {
        Error::NoInversionStrategy(
            "factor 6 is not a pure phase, so no direction can be carried as a point mass"
                .into(),
        )
    })?;

    let m = cfg.grid;
    let dt = 2.0 * cfg.t_max / m as f64;
    let edge = (m / 2) as f64 * dt;
    let tail = pair_profile(edge, 0.0, cutoff).norm();
    if tail > cfg.tail_threshold {
        return Err(Error::InsufficientDecay {
            tail,
            threshold: cfg.tail_threshold,
        });
    }

    let wrapped_time = |k: usize| -> f64 {
        if k <= m / 2 {
            k as f64 * dt
        } else {
            (k as f64 - m as f64) * dt
        }
    };
    let mut grid: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|f| pair_profile(wrapped_time(f / m), wrapped_time(f % m), cutoff))
        .collect();
    if m % 2 == 0 {
        let nyq = m / 2;
        for k in 0..m {
            grid[nyq * m + k] = Complex64::new(0.0, 0.0);
            grid[k * m + nyq] = Complex64::new(0.0, 0.0);
        }
    }

    let fft = FftPlanner::new().plan_fft_inverse(m);
    for row in grid.chunks_exact_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for c in 0..m {
        for r in 0..m {
            col[r] = grid[r * m + c];
        }
        fft.process(&mut col);
        for r in 0..m {
            grid[r * m + c] = col[r];
        }
    }

    let shift = fft_sort_shift(m);
    let scale = dt * dt / (4.0 * PI * PI);
    let mut density = vec![0.0; m * m];
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    for i1 in 0..m {
        for i2 in 0..m {
            let z = grid[((i1 + shift) % m) * m + (i2 + shift) % m] * scale;
            density[i1 * m + i2] = z.re;
            max_re = max_re.max(z.re.abs());
            max_im = max_im.max(z.im.abs());
        }
    }
    let residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    if residue > IMAG_RESIDUE_TOL {
        return Err(Error::InvalidState(format!(
            "imaginary residue {residue:.3e} of the inverse transform exceeds {IMAG_RESIDUE_TOL:.0e}"
        )));
    }

    let axes = vec![
        frequency_axis(m, dt, "x1"),
        frequency_axis(m, dt, "x13"),
    ];
    let domega = axes[0].step;
    let mass: f64 = density.iter().sum::<f64>() * domega * domega;
    let q = QuasiDistribution::new(
        Frame::SimpleRoot,
        axes,
        Array2::eye(2),
        density,
        vec![DeltaFactor {
            label: "x6".into(),
            location: delta_loc,
        }],
    )?;

    let mut forward = BTreeMap::new();
    if cfg.forward_check {
        let rs = root_system(4)?;
        let recovered = forward_transform(&q, &rs, times, factors.unit())?;
        for idx in rs.positive_indices() {
            let got = recovered.factor(*idx).expect("forward covers every root");
            let want = require_factor(factors, *idx)?;
            forward.insert(format!("x{idx}"), sup_diff(got, want));
        }
    }

    let report = InversionReport {
        samples: times.len(),
        transform_len: m,
        dt,
        domega,
        window: None,
        tail_magnitude: tail,
        max_imag_residue: residue,
        mass_defect: (mass - 1.0).abs(),
        forward_residuals: forward,
    };
    Ok((q, report))
}

/// Positions of the dense axes and point masses among the simple roots,
/// each position an index into `rs.simple_indices()`.
fn direction_layout(q: &QuasiDistribution, rs: &RootSystem) -> Result<(Vec<usize>, Vec<usize>)> {
    let simple = rs.simple_indices();
    let mut delta_pos = Vec::with_capacity(q.deltas.len());
    for d in &q.deltas {
        let idx: usize = d
            .label
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::InvalidState(format!(
                    "point-mass label {} does not name a root direction",
                    d.label
                ))
            })?;
        let pos = simple.iter().position(|&s| s == idx).ok_or_else(|| {
            Error::InvalidState(format!("x{idx} is not a simple direction here"))
        })?;
        delta_pos.push(pos);
    }
    let dense_pos: Vec<usize> = (0..simple.len())
        .filter(|p| !delta_pos.contains(p))
        .collect();
    if dense_pos.len() != q.axes.len() {
        return Err(Error::InvalidState(format!(
            "{} dense axes plus {} point masses do not cover {} simple directions",
            q.axes.len(),
            delta_pos.len(),
            simple.len()
        )));
    }
    Ok((dense_pos, delta_pos))
}

/// Exact forward transform: characteristic function of the density along
/// every positive-root direction, by direct summation over lattice cells.
///
/// Directions beyond the simple ones use the integer expansion of their
/// root in the simple system; point masses contribute pure phases.
pub fn forward_transform(
    q: &QuasiDistribution,
    rs: &RootSystem,
    times: &[f64],
    unit: TimeUnit,
) -> Result<DephasingFactors> {
    let n = rs.dim();
    let rank = n - 1;
    let layout = match q.frame {
        Frame::Cartan => {
            if q.axes.len() != rank {
                return Err(Error::InvalidState(format!(
                    "{} lattice axes for a rank-{rank} system",
                    q.axes.len()
                )));
            }
            None
        }
        Frame::SimpleRoot => Some(direction_layout(q, rs)?),
    };

    let cells = q.density.len();
    let volume = q.cell_volume();
    let weights: Vec<f64> = q.density.iter().map(|v| v * volume).collect();
    let points: Vec<Vec<f64>> = (0..cells).map(|f| q.physical_point(f)).collect();

    let mut out = BTreeMap::new();
    for &idx in rs.positive_indices() {
        let alpha = rs.root(idx).expect("positive index has a root");
        let (dense_rate, delta_rate): (Vec<f64>, f64) = match &layout {
            None => (alpha.to_vec(), 0.0),
            Some((dense_pos, delta_pos)) => {
                let coeff = rs.expand_in_simple(alpha)?;
                let dense = dense_pos.iter().map(|&p| coeff[p]).collect();
                let shift = delta_pos
                    .iter()
                    .zip(&q.deltas)
                    .map(|(&p, d)| coeff[p] * d.location)
                    .sum();
                (dense, shift)
            }
        };
        let rates: Vec<f64> = points
            .iter()
            .map(|p| dense_rate.iter().zip(p).map(|(r, x)| r * x).sum())
            .collect();
        let mut series = phase_sum(&rates, &weights, times);
        if delta_rate != 0.0 {
            for (s, &t) in series.iter_mut().zip(times) {
                *s *= Complex64::from_polar(1.0, -delta_rate * t);
            }
        }
        out.insert(idx, series);
    }
    DephasingFactors::new(n, times.to_vec(), out, unit)
}

/// Re-expresses a Cartan-frame density in simple-root coordinates. The
/// lattice is untouched; the change of variables goes into the basis and
/// the volume factor into the values, so the operation is exact.
pub fn to_simple_root_frame(
    q: &QuasiDistribution,
    rs: &RootSystem,
) -> Result<QuasiDistribution> {
    if q.frame != Frame::Cartan {
        return Err(Error::InvalidState(
            "density is already in simple-root coordinates".into(),
        ));
    }
    let rank = rs.dim() - 1;
    if q.axes.len() != rank {
        return Err(Error::InvalidState(format!(
            "{} lattice axes for a rank-{rank} system",
            q.axes.len()
        )));
    }
    let basis = rs.change_matrix().dot(&q.basis);
    let density: Vec<f64> = q.density.iter().map(|v| v * rs.jacobian()).collect();
    QuasiDistribution::new(Frame::SimpleRoot, q.axes.clone(), basis, density, Vec::new())
}

/// Inverse of [`to_simple_root_frame`]. Point-mass directions cannot be
/// re-gridded onto Cartan axes and are rejected.
pub fn to_cartan_frame(q: &QuasiDistribution, rs: &RootSystem) -> Result<QuasiDistribution> {
    if q.frame != Frame::SimpleRoot {
        return Err(Error::InvalidState(
            "density is already in Cartan coordinates".into(),
        ));
    }
    if !q.deltas.is_empty() {
        return Err(Error::InvalidState(
            "point-mass directions have no Cartan-frame grid".into(),
        ));
    }
    let rank = rs.dim() - 1;
    if q.axes.len() != rank {
        return Err(Error::InvalidState(format!(
            "{} lattice axes for a rank-{rank} system",
            q.axes.len()
        )));
    }
    let s = rs.change_matrix();
    let mut basis = Array2::<f64>::zeros((rank, rank));
    for c in 0..rank {
        let col: Vec<f64> = (0..rank).map(|r| q.basis[[r, c]]).collect();
        let solved = linalg::solve_real(s, &col)?;
        for r in 0..rank {
            basis[[r, c]] = solved[r];
        }
    }
    let density: Vec<f64> = q.density.iter().map(|v| v / rs.jacobian()).collect();
    QuasiDistribution::new(Frame::Cartan, q.axes.clone(), basis, density, Vec::new())
}
