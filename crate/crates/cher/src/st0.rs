//! Free-induction-decay tomography of a singlet-triplet qubit: simulate
//! the three return-probability curves, identify the rotation axis and
//! frequency from the measured Bloch trajectory, recover the frequency
//! distribution behind the dephasing, and stress the whole chain against
//! Gaussian measurement noise.
//!
//! Units: energies in ueV, times in ns, fields in tesla.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::nonclassicality::nonclassicality_negativity;
use crate::retrieval::{invert_1d, InversionConfig, InversionReport, QuasiDistribution};

/// hbar in ueV ns.
pub const HBAR_UEV_NS: f64 = 0.6582119569;

/// Exchange-plus-gradient qubit in the singlet-triplet basis. The free
/// Hamiltonian is -(J/2) sigma_Z + g mu_B dB sigma_X, so the Bloch vector
/// precesses about a tilted axis at omega = sqrt(J^2 + (2 g mu_B dB)^2)/hbar.
#[derive(Clone, Copy, Debug)]
pub struct ST0Params {
    /// Exchange energy J (ueV).
    pub exchange: f64,
    /// Hyperfine field gradient (tesla).
    pub gradient: f64,
    /// Electron g-factor (dimensionless, negative for GaAs).
    pub g_factor: f64,
    /// Bohr magneton (ueV per tesla).
    pub mu_b: f64,
    /// Gaussian dephasing time (ns); infinity disables the decay.
    pub t2star: f64,
    /// hbar (ueV ns).
    pub hbar: f64,
}

impl Default for ST0Params {
    fn default() -> Self {
        ST0Params {
            exchange: 0.37,
            gradient: 0.0105,
            g_factor: -0.44,
            mu_b: 57.8,
            t2star: 30.0,
            hbar: HBAR_UEV_NS,
        }
    }
}

impl ST0Params {
    pub fn with_exchange(exchange: f64) -> Self {
        ST0Params {
            exchange,
            ..ST0Params::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t2star > 0.0) {
            return Err(Error::BadFactors(format!(
                "dephasing time must be positive, got {}",
                self.t2star
            )));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::BadFactors("hbar must be positive".into()));
        }
        if !self.exchange.is_finite() || !self.gradient.is_finite() {
            return Err(Error::BadFactors(
                "exchange and gradient must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Transverse splitting 2 g mu_B dB (ueV); sign follows the g-factor.
    pub fn transverse_splitting(&self) -> f64 {
        2.0 * self.g_factor * self.mu_b * self.gradient
    }

    /// Angular velocity vector of the Bloch precession (rad/ns).
    pub fn rotation_vector(&self) -> [f64; 3] {
        [
            self.transverse_splitting() / self.hbar,
            0.0,
            -self.exchange / self.hbar,
        ]
    }

    /// Precession frequency sqrt(J^2 + (2 g mu_B dB)^2)/hbar (rad/ns).
    pub fn omega(&self) -> f64 {
        let v = self.rotation_vector();
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    }

    /// Acute angle between the rotation axis and the Z axis.
    pub fn tilt(&self) -> f64 {
        (self.transverse_splitting().abs()).atan2(self.exchange.abs())
    }
}

/// Measured return probabilities along the three Bloch axes.
#[derive(Clone, Debug)]
pub struct ReturnProbabilities {
    times: Vec<f64>,
    probs: [Vec<f64>; 3],
}

impl ReturnProbabilities {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Probability series for axis 0 = X, 1 = Y, 2 = Z.
    pub fn series(&self, axis: usize) -> &[f64] {
        &self.probs[axis]
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let points = (0..self.times.len())
            .map(|s| {
                [
                    2.0 * self.probs[0][s] - 1.0,
                    2.0 * self.probs[1][s] - 1.0,
                    2.0 * self.probs[2][s] - 1.0,
                ]
            })
            .collect();
        Trajectory::new(self.times.clone(), points)
    }
}

/// Bloch-vector samples r(tau) with |r| inside the unit ball.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    points: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, points: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::BadTimeGrid(format!(
                "{} timestamps for {} points",
                times.len(),
                points.len()
            )));
        }
        if times.len() < 4 {
            return Err(Error::BadTimeGrid(
                "trajectory needs at least four samples".into(),
            ));
        }
        if times[0] != 0.0 {
            return Err(Error::BadTimeGrid(format!(
                "trajectory must start at zero, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadTimeGrid("timestamps must increase".into()));
        }
        for (s, p) in points.iter().enumerate() {
            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if !(norm <= 1.0 + 1e-9) {
                return Err(Error::BadFactors(format!(
                    "point {s} leaves the Bloch ball, |r| = {norm}"
                )));
            }
        }
        Ok(Trajectory { times, points })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }
}

/// Uniform grid spanning `periods` rotation periods of `params`.
pub fn fid_time_grid(params: &ST0Params, periods: f64, samples: usize) -> Result<Vec<f64>> {
    let omega = params.omega();
    if !(omega > 0.0) {
        return Err(Error::BadFactors(
            "zero rotation frequency; no period to span".into(),
        ));
    }
    if samples < 4 || !(periods > 0.0) {
        return Err(Error::BadTimeGrid(
            "need at least four samples over a positive span".into(),
        ));
    }
    let t_end = periods * std::f64::consts::TAU / omega;
    Ok((0..samples)
        .map(|j| t_end * j as f64 / (samples - 1) as f64)
        .collect())
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Evolve the Bloch vector of the initial state -Y: the component along
/// the rotation axis is conserved, the transverse part rotates at omega
/// and shrinks by the Gaussian envelope.
pub fn simulate_return_probs(params: &ST0Params, times: &[f64]) -> Result<ReturnProbabilities> {
    params.validate()?;
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadTimeGrid(
            "times must start at zero and increase".into(),
        ));
    }
    let r0 = [0.0, -1.0, 0.0];
    let axis_vec = params.rotation_vector();
    let omega = params.omega();
    let (axis, parallel, perp) = if omega > 0.0 {
        let axis = scale(axis_vec, 1.0 / omega);
        let parallel = scale(axis, dot(r0, axis));
        (axis, parallel, sub(r0, parallel))
    } else {
        ([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], r0)
    };
    let swept = cross(axis, perp);

    let mut probs = [
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
    ];
    for &t in times {
        let angle = omega * t;
        let damp = if params.t2star.is_finite() {
            (-(t / params.t2star).powi(2)).exp()
        } else {
            1.0
        };
        let rotated = add(
            scale(perp, angle.cos()),
            scale(swept, angle.sin()),
        );
        let r = add(parallel, scale(rotated, damp));
        for j in 0..3 {
            probs[j].push(0.5 * (1.0 + r[j]));
        }
    }
    Ok(ReturnProbabilities {
        times: times.to_vec(),
        probs,
    })
}

/// Rotation axis and frequency read off a trajectory.
#[derive(Clone, Copy, Debug)]
pub struct AxisFit {
    /// Unit normal of the dephasing disk, oriented along the sense of
    /// rotation.
    pub normal: [f64; 3],
    /// Precession frequency from the in-plane phase progression (rad/ns).
    pub omega: f64,
    /// Acute angle between the axis line and Z.
    pub tilt: f64,
    /// Disk offset along the normal.
    pub center: f64,
    /// Root-mean-square out-of-plane scatter.
    pub planarity: f64,
}

/// In-plane axes completing `normal` to a right-handed frame, chosen as
/// the minimal rotation carrying Z onto the normal applied to X and Y.
/// With the tilted axis in the XZ plane this is exactly a rotation about
/// Y by the tilt angle.
fn disk_frame(normal: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let z = [0.0, 0.0, 1.0];
    let k = cross(z, normal);
    let s = norm(k);
    if s < 1e-12 {
        return if normal[2] >= 0.0 {
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        } else {
            // antipodal: half turn about X
            ([1.0, 0.0, 0.0], [0.0, -1.0, 0.0])
        };
    }
    let k = scale(k, 1.0 / s);
    let c = normal[2]; // cos of the rotation angle
    let rotate = |v: [f64; 3]| -> [f64; 3] {
        add(
            add(scale(v, c), scale(cross(k, v), s)),
            scale(k, dot(k, v) * (1.0 - c)),
        )
    };
    (rotate([1.0, 0.0, 0.0]), rotate([0.0, 1.0, 0.0]))
}

/// Least-squares plane through the trajectory, normal oriented by the
/// rotation sense, frequency from a weighted fit of the unwrapped
/// in-plane angle.
pub fn identify_axis(traj: &Trajectory) -> Result<AxisFit> {
    let pts = traj.points();
    let n = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in pts {
        mean = add(mean, *p);
    }
    mean = scale(mean, 1.0 / n);

    let mut cov = ndarray::Array2::<f64>::zeros((3, 3));
    for p in pts {
        let d = sub(*p, mean);
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += d[i] * d[j];
            }
        }
    }
    let (evals, evecs) = linalg::eigh_symmetric(&cov)?;
    // ascending eigenvalues: [0] is the normal candidate, [1] must carry
    // real spread or the points sit on a line
    if evals[1] <= 1e-10 * evals[2].max(1e-30) {
        return Err(Error::DegenerateTrajectory);
    }
    let mut normal = [evecs[(0, 0)], evecs[(1, 0)], evecs[(2, 0)]];

    let mut sense = [0.0; 3];
    for w in pts.windows(2) {
        sense = add(sense, cross(w[0], w[1]));
    }
    if dot(sense, normal) < 0.0 {
        normal = scale(normal, -1.0);
    }

    let center = dot(mean, normal);
    let planarity = (pts
        .iter()
        .map(|p| (dot(*p, normal) - center).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();

    let (e1, e2) = disk_frame(normal);
    let hub = scale(normal, center);
    let mut angles = Vec::with_capacity(pts.len());
    let mut weights = Vec::with_capacity(pts.len());
    let mut prev = 0.0f64;
    for p in pts {
        let d = sub(*p, hub);
        let (u, v) = (dot(d, e1), dot(d, e2));
        let raw = v.atan2(u);
        let unwrapped = raw + std::f64::consts::TAU * ((prev - raw) / std::f64::consts::TAU).round();
        angles.push(unwrapped);
        weights.push(u * u + v * v);
        prev = unwrapped;
    }
    let wsum: f64 = weights.iter().sum();
    if wsum <= 0.0 {
        return Err(Error::DegenerateTrajectory);
    }
    let tbar: f64 = traj
        .times()
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| w * t)
        .sum::<f64>()
        / wsum;
    let abar: f64 = angles
        .iter()
        .zip(&weights)
        .map(|(&a, &w)| w * a)
        .sum::<f64>()
        / wsum;
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&t, &a), &w) in traj.times().iter().zip(&angles).zip(&weights) {
        num += w * (t - tbar) * (a - abar);
        den += w * (t - tbar) * (t - tbar);
    }
    if den <= 0.0 {
        return Err(Error::DegenerateTrajectory);
    }
    let omega = num / den;

    let tilt = normal[2].abs().min(1.0).acos();
    Ok(AxisFit {
        normal,
        omega,
        tilt,
        center,
        planarity,
    })
}

/// Inversion settings for free-induction decays: the envelope at the end
/// of a finite measurement window is accepted as-is rather than rejected,
/// truncation ripple and all.
pub fn fid_inversion_config() -> InversionConfig {
    InversionConfig {
        tail_threshold: 1.0,
        ..InversionConfig::default()
    }
}

/// Frequency distribution behind a precessing, dephasing trajectory.
///
/// Points are orthogonally projected onto the fitted disk and radially
/// clamped into the unit circle, the in-plane coordinate is read as a
/// complex dephasing factor normalized to its starting value, and the
/// factor is inverted on the trajectory's own time grid.
pub fn recover_distribution(
    traj: &Trajectory,
    fit: &AxisFit,
    cfg: &InversionConfig,
) -> Result<(QuasiDistribution, InversionReport)> {
    let (e1, e2) = disk_frame(fit.normal);
    let hub = scale(fit.normal, fit.center);
    let mut factor = Vec::with_capacity(traj.points().len());
    for p in traj.points() {
        let d = sub(*p, hub);
        let (mut u, mut v) = (dot(d, e1), dot(d, e2));
        let rho = (u * u + v * v).sqrt();
        if rho > 1.0 {
            u /= rho;
            v /= rho;
        }
        // positive rotation about the oriented normal advances the angle;
        // the dephasing factor carries the conjugate phase
        factor.push(num_complex::Complex64::new(u, -v));
    }
    let anchor = factor[0];
    if anchor.norm() < 1e-9 {
        return Err(Error::DegenerateTrajectory);
    }
    let series: Vec<num_complex::Complex64> = factor.iter().map(|z| z / anchor).collect();
    invert_1d(traj.times(), &series, "omega", cfg)
}

/// Gaussian measurement noise applied to every probability sample.
#[derive(Clone, Copy, Debug)]
pub struct NoiseConfig {
    /// Standard deviation of the probability offsets.
    pub sigma: f64,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma: 0.05,
            repeats: 200,
            seed: 1,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 {
            return Err(Error::BadFactors(format!(
                "noise level must be >= 0, got {}",
                self.sigma
            )));
        }
        if self.repeats == 0 {
            return Err(Error::BadFactors("need at least one repeat".into()));
        }
        Ok(())
    }
}

/// Outcome of the repeated noisy-recovery experiment.
#[derive(Clone, Debug)]
pub struct NoiseStudy {
    pub mean: f64,
    pub std: f64,
    /// Per-repeat measure values, in repeat order, successes only.
    pub values: Vec<f64>,
    pub failures: usize,
}

struct DampedCosineFit {
    omega: f64,
    decay: f64,
    /// Cosine and sine amplitude vectors; orthogonal, equal length, so
    /// the model sweeps a rigid circle under the Gaussian envelope.
    cos_amp: [f64; 3],
    sin_amp: [f64; 3],
}

impl DampedCosineFit {
    fn point(&self, t: f64) -> [f64; 3] {
        let env = (-(t / self.decay).powi(2)).exp();
        let (s, c) = (self.omega * t).sin_cos();
        add(scale(self.cos_amp, env * c), scale(self.sin_amp, env * s))
    }
}

/// Nearest scaled pair of orthonormal columns to the 3x2 amplitude
/// matrix [a b], shared scale capped at the Bloch radius. Free per-axis
/// amplitudes trace an ellipse whose counter-rotating part would leak a
/// spurious mirror peak into the recovered distribution; the projection
/// removes it.
fn circularize(a: [f64; 3], b: [f64; 3]) -> Result<([f64; 3], [f64; 3])> {
    let g11 = dot(a, a);
    let g12 = dot(a, b);
    let g22 = dot(b, b);
    let tr = g11 + g22;
    let gap = ((g11 - g22) * (g11 - g22) + 4.0 * g12 * g12).sqrt();
    let hi = 0.5 * (tr + gap);
    let lo = (0.5 * (tr - gap)).max(0.0);
    let (s_hi, s_lo) = (hi.sqrt(), lo.sqrt());
    if !(s_lo > 1e-6 * s_hi) {
        return Err(Error::DegenerateTrajectory);
    }
    // eigenvectors of the Gram matrix
    let v_hi = if g12.abs() > (hi - g11).abs() {
        [g12, hi - g11]
    } else {
        [hi - g22, g12]
    };
    let nv = (v_hi[0] * v_hi[0] + v_hi[1] * v_hi[1]).sqrt();
    let v_hi = [v_hi[0] / nv, v_hi[1] / nv];
    let v_lo = [-v_hi[1], v_hi[0]];

    let col = |v: [f64; 2], s: f64| -> [f64; 3] {
        scale(add(scale(a, v[0]), scale(b, v[1])), 1.0 / s)
    };
    let u_hi = col(v_hi, s_hi);
    let u_lo = col(v_lo, s_lo);
    let rho = (0.5 * (s_hi + s_lo)).min(1.0);
    // rho * U V^T, columns back in the (cos, sin) order
    let a2 = scale(add(scale(u_hi, v_hi[0]), scale(u_lo, v_lo[0])), rho);
    let b2 = scale(add(scale(u_hi, v_hi[1]), scale(u_lo, v_lo[1])), rho);
    Ok((a2, b2))
}

/// Residual of the shared-(omega, T) damped-cosine model after solving
/// the per-axis amplitudes in closed form.
fn damped_cosine_sse(
    times: &[f64],
    series: &[Vec<f64>; 3],
    omega: f64,
    decay: f64,
) -> (f64, [[f64; 2]; 3]) {
    let mut scc = 0.0;
    let mut scd = 0.0;
    let mut sdd = 0.0;
    let mut rhs = [[0.0f64; 2]; 3];
    let env_cd: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let env = (-(t / decay).powi(2)).exp();
            let (s, c) = (omega * t).sin_cos();
            (env * c, env * s)
        })
        .collect();
    for (s, &(c, d)) in env_cd.iter().enumerate() {
        scc += c * c;
        scd += c * d;
        sdd += d * d;
        for j in 0..3 {
            rhs[j][0] += c * series[j][s];
            rhs[j][1] += d * series[j][s];
        }
    }
    let det = scc * sdd - scd * scd;
    if det.abs() < 1e-30 {
        return (f64::INFINITY, [[0.0; 2]; 3]);
    }
    let mut amps = [[0.0f64; 2]; 3];
    let mut sse = 0.0;
    for j in 0..3 {
        amps[j][0] = (sdd * rhs[j][0] - scd * rhs[j][1]) / det;
        amps[j][1] = (scc * rhs[j][1] - scd * rhs[j][0]) / det;
        for (s, &(c, d)) in env_cd.iter().enumerate() {
            let resid = series[j][s] - amps[j][0] * c - amps[j][1] * d;
            sse += resid * resid;
        }
    }
    (sse, amps)
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

fn fit_damped_cosine(times: &[f64], series: &[Vec<f64>; 3]) -> Result<DampedCosineFit> {
    let dt = times[1] - times[0];
    let span = times[times.len() - 1];

    // seed the frequency with a coarse spectral scan of the combined signal
    let lo_w = std::f64::consts::TAU / (2.0 * span);
    let hi_w = 0.9 * std::f64::consts::PI / dt;
    let candidates = 800;
    let mut best_w = lo_w;
    let mut best_power = -1.0;
    for k in 0..candidates {
        let w = lo_w + (hi_w - lo_w) * k as f64 / (candidates - 1) as f64;
        let mut power = 0.0;
        for axis in series {
            let (mut re, mut im) = (0.0f64, 0.0f64);
            for (&t, &r) in times.iter().zip(axis) {
                let (s, c) = (w * t).sin_cos();
                re += r * c;
                im += r * s;
            }
            power += re * re + im * im;
        }
        if power > best_power {
            best_power = power;
            best_w = w;
        }
    }

    let t_lo = 2.0 * dt;
    let t_hi = 3.0 * span;
    let mut omega = best_w;
    let mut decay = 0.5 * span;
    let mut half_width = (hi_w - lo_w) / (candidates - 1) as f64 * 2.0;
    for _ in 0..3 {
        let d = decay;
        omega = golden_min(
            |w| damped_cosine_sse(times, series, w, d).0,
            omega - half_width,
            omega + half_width,
            48,
        );
        let w = omega;
        decay = golden_min(
            |t| damped_cosine_sse(times, series, w, t).0,
            t_lo,
            t_hi,
            48,
        );
        half_width *= 0.25;
    }
    let (sse, amps) = damped_cosine_sse(times, series, omega, decay);
    if !sse.is_finite() {
        return Err(Error::DegenerateTrajectory);
    }
    let raw_cos = [amps[0][0], amps[1][0], amps[2][0]];
    let raw_sin = [amps[0][1], amps[1][1], amps[2][1]];
    let (cos_amp, sin_amp) = circularize(raw_cos, raw_sin)?;
    Ok(DampedCosineFit {
        omega,
        decay,
        cos_amp,
        sin_amp,
    })
}

fn measure_trajectory(traj: &Trajectory, cfg: &InversionConfig) -> Result<f64> {
    let fit = identify_axis(traj)?;
    let (q, _) = recover_distribution(traj, &fit, cfg)?;
    Ok(nonclassicality_negativity(&q).value)
}

/// Repeat the full tomography chain under Gaussian probability noise.
///
/// Each repeat offsets every probability sample, refits the shared
/// damped-cosine model, rebuilds the trajectory on a grid extended to
/// four fitted decay times so the refitted envelope closes, and measures
/// the recovered distribution. sigma = 0 short-circuits to the exact
/// pipeline on the measured grid.
pub fn noise_study(
    params: &ST0Params,
    times: &[f64],
    noise: &NoiseConfig,
) -> Result<NoiseStudy> {
    noise.validate()?;
    let clean = simulate_return_probs(params, times)?;
    if times.len() < 8 {
        return Err(Error::BadTimeGrid(
            "noise study needs a denser measurement grid".into(),
        ));
    }
    let dt = times[1] - times[0];
    if times
        .windows(2)
        .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt)
    {
        return Err(Error::BadTimeGrid(
            "noise study needs a uniform measurement grid".into(),
        ));
    }

    if noise.sigma == 0.0 {
        let value = measure_trajectory(&clean.trajectory()?, &fid_inversion_config())?;
        return Ok(NoiseStudy {
            mean: value,
            std: 0.0,
            values: vec![value; noise.repeats],
            failures: 0,
        });
    }

    let repeat_cfg = InversionConfig {
        forward_check: false,
        ..fid_inversion_config()
    };
    let outcomes: Vec<Result<f64>> = (0..noise.repeats)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                noise
                    .seed
                    .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(rep as u64 + 1)),
            );
            let mut noisy: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for (j, slot) in noisy.iter_mut().enumerate() {
                *slot = clean
                    .series(j)
                    .iter()
                    .map(|&p| {
                        let u1: f64 = 1.0 - rng.gen::<f64>();
                        let u2: f64 = rng.gen();
                        let z = (-2.0 * u1.ln()).sqrt()
                            * (std::f64::consts::TAU * u2).cos();
                        // bloch component about zero, offsets pinned to
                        // the half-probability baseline
                        2.0 * (p + noise.sigma * z).clamp(0.0, 1.0) - 1.0
                    })
                    .collect();
            }
            let fit = fit_damped_cosine(times, &noisy)?;
            let horizon = (4.0 * fit.decay).max(times[times.len() - 1]);
            let steps = (horizon / dt).ceil() as usize;
            let ext_times: Vec<f64> = (0..=steps).map(|s| s as f64 * dt).collect();
            let points: Vec<[f64; 3]> = ext_times.iter().map(|&t| fit.point(t)).collect();
            let traj = Trajectory::new(ext_times, points)?;
            measure_trajectory(&traj, &repeat_cfg)
        })
        .collect();

    let mut values = Vec::with_capacity(noise.repeats);
    let mut failures = 0usize;
    for o in outcomes {
        match o {
            Ok(v) => values.push(v),
            Err(_) => failures += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidState(
            "every noisy repeat failed to invert".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(NoiseStudy {
        mean,
        std,
        values,
        failures,
    })
}
