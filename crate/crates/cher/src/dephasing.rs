//! Pure-dephasing dynamical maps in three interchangeable forms.
//!
//! A dephasing process is fixed by one complex factor per positive root:
//! the factor multiplies the coherence its root slot addresses, and the
//! conjugate acts on the mirrored slot. `DephasingFactors` stores exactly
//! that data. `DynamicalMapSeries` is the same process as a real matrix
//! acting on generator-basis coordinates (the form process tomography
//! produces), and `ChiSeries` is the chi-matrix form experiments measure.
//! Conversions between the three are exact linear algebra, no fitting.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{root_system, simultaneous_diagonalizer, GeneratorSet, Slot};
use crate::linalg;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Unit the time grid is expressed in: inverse bath cutoff for simulated
/// environments, nanoseconds for lab data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeUnit {
    #[serde(rename = "inverse_cutoff")]
    InverseCutoff,
    #[serde(rename = "ns")]
    Nanoseconds,
}

pub(crate) fn validate_time_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::BadTimeGrid("grid is empty".into()));
    }
    if times[0].abs() > 1e-12 {
        return Err(Error::BadTimeGrid(format!(
            "grid must start at 0, got {}",
            times[0]
        )));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::BadTimeGrid(format!(
                "grid must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// One complex factor series per positive root; negative-root factors are
/// the conjugates and are never stored.
#[derive(Debug, Clone)]
pub struct DephasingFactors {
    n: usize,
    times: Vec<f64>,
    factors: BTreeMap<usize, Vec<Complex64>>,
    unit: TimeUnit,
}

impl DephasingFactors {
    /// Validates the grid, the root indices, |phi| <= 1 + 1e-9, and snaps
    /// phi(0) to exactly 1.
    pub fn new(
        n: usize,
        times: Vec<f64>,
        mut factors: BTreeMap<usize, Vec<Complex64>>,
        unit: TimeUnit,
    ) -> Result<Self> {
        validate_time_grid(&times)?;
        let rs = root_system(n)?;
        for (&m, series) in &mut factors {
            if !rs.is_positive(m) {
                return Err(Error::BadFactors(format!(
                    "index {m} is not a positive-root slot for dimension {n}"
                )));
            }
            if series.len() != times.len() {
                return Err(Error::BadFactors(format!(
                    "factor {m} has {} samples for {} grid points",
                    series.len(),
                    times.len()
                )));
            }
            if (series[0] - ONE).norm() > 1e-9 {
                return Err(Error::BadFactors(format!(
                    "factor {m} starts at {} instead of 1",
                    series[0]
                )));
            }
            series[0] = ONE;
            if let Some(bad) = series.iter().find(|z| z.norm() > 1.0 + 1e-9) {
                return Err(Error::BadFactors(format!(
                    "factor {m} exceeds unit modulus: |{bad}| = {}",
                    bad.norm()
                )));
            }
        }
        Ok(DephasingFactors {
            n,
            times,
            factors,
            unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn factor(&self, index: usize) -> Option<&[Complex64]> {
        self.factors.get(&index).map(|v| v.as_slice())
    }

    /// Pointwise product of two factor sets on the same grid. Grids must
    /// match bitwise; combining across grids requires an explicit resample.
    pub fn pointwise_product(&self, other: &DephasingFactors) -> Result<DephasingFactors> {
        if self.n != other.n {
            return Err(Error::GridMismatch(format!(
                "dimensions {} and {} differ",
                self.n, other.n
            )));
        }
        if self.times != other.times {
            return Err(Error::GridMismatch(
                "time grids differ; resample explicitly first".into(),
            ));
        }
        let keys: Vec<usize> = self.factors.keys().copied().collect();
        if keys != other.factors.keys().copied().collect::<Vec<_>>() {
            return Err(Error::GridMismatch("factor index sets differ".into()));
        }
        let mut factors = BTreeMap::new();
        for m in keys {
            let a = &self.factors[&m];
            let b = &other.factors[&m];
            factors.insert(m, a.iter().zip(b).map(|(x, y)| x * y).collect());
        }
        DephasingFactors::new(self.n, self.times.clone(), factors, self.unit)
    }

    /// Linear-interpolation resampler onto a new grid inside the old span.
    pub fn resample(&self, new_times: &[f64]) -> Result<DephasingFactors> {
        validate_time_grid(new_times)?;
        let old = &self.times;
        if new_times[new_times.len() - 1] > old[old.len() - 1] + 1e-12 {
            return Err(Error::BadTimeGrid(format!(
                "resample target extends past the data (to {} vs {})",
                new_times[new_times.len() - 1],
                old[old.len() - 1]
            )));
        }
        let mut factors = BTreeMap::new();
        for (&m, series) in &self.factors {
            let resampled = new_times
                .iter()
                .map(|&t| {
                    let k = match old.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
                        Ok(exact) => return series[exact],
                        Err(k) => k.clamp(1, old.len() - 1),
                    };
                    let (t0, t1) = (old[k - 1], old[k]);
                    let w = (t - t0) / (t1 - t0);
                    series[k - 1] * (1.0 - w) + series[k] * w
                })
                .collect();
            factors.insert(m, resampled);
        }
        DephasingFactors::new(self.n, new_times.to_vec(), factors, self.unit)
    }
}

/// Real matrix per time point acting on generator-basis coordinates
/// (1/n, x_1, ..., x_{n^2-1}) of a state.
#[derive(Debug, Clone)]
pub struct DynamicalMapSeries {
    n: usize,
    times: Vec<f64>,
    maps: Vec<Array2<f64>>,
    unit: TimeUnit,
}

impl DynamicalMapSeries {
    /// Validates trace preservation (row 0 = e_0) at every time and that
    /// the map at t = 0 is the identity within 1e-12.
    pub fn new(
        n: usize,
        times: Vec<f64>,
        maps: Vec<Array2<f64>>,
        unit: TimeUnit,
    ) -> Result<Self> {
        validate_time_grid(&times)?;
        if maps.len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "{} maps for {} grid points",
                maps.len(),
                times.len()
            )));
        }
        let d = n * n;
        for (idx, map) in maps.iter().enumerate() {
            if map.nrows() != d || map.ncols() != d {
                return Err(Error::GridMismatch(format!(
                    "map {idx} is {}x{}, expected {d}x{d}",
                    map.nrows(),
                    map.ncols()
                )));
            }
            for c in 0..d {
                let want = if c == 0 { 1.0 } else { 0.0 };
                if (map[[0, c]] - want).abs() > 1e-12 {
                    return Err(Error::BadFactors(format!(
                        "map {idx} is not trace preserving: row 0 entry {c} = {}",
                        map[[0, c]]
                    )));
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                let want = if r == c { 1.0 } else { 0.0 };
                if (maps[0][[r, c]] - want).abs() > 1e-12 {
                    return Err(Error::BadFactors(format!(
                        "map at t=0 is not the identity at entry ({r},{c})"
                    )));
                }
            }
        }
        Ok(DynamicalMapSeries {
            n,
            times,
            maps,
            unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn map_at(&self, idx: usize) -> &Array2<f64> {
        &self.maps[idx]
    }

    /// Pointwise matrix product self(t) * other(t); grids must match.
    pub fn compose(&self, other: &DynamicalMapSeries) -> Result<DynamicalMapSeries> {
        if self.n != other.n || self.times != other.times {
            return Err(Error::GridMismatch(
                "composition needs identical dimensions and grids".into(),
            ));
        }
        let maps = self
            .maps
            .iter()
            .zip(&other.maps)
            .map(|(a, b)| a.dot(b))
            .collect();
        DynamicalMapSeries::new(self.n, self.times.clone(), maps, self.unit)
    }
}

/// Chi-matrix series over the generator basis, identity at index 0.
#[derive(Debug, Clone)]
pub struct ChiSeries {
    n: usize,
    times: Vec<f64>,
    chi: Vec<Array2<Complex64>>,
    unit: TimeUnit,
}

impl ChiSeries {
    pub fn new(
        n: usize,
        times: Vec<f64>,
        chi: Vec<Array2<Complex64>>,
        unit: TimeUnit,
    ) -> Result<Self> {
        validate_time_grid(&times)?;
        if chi.len() != times.len() {
            return Err(Error::GridMismatch(format!(
                "{} chi matrices for {} grid points",
                chi.len(),
                times.len()
            )));
        }
        let d = n * n;
        for (idx, m) in chi.iter().enumerate() {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::GridMismatch(format!(
                    "chi {idx} is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            let mut residual = 0.0_f64;
            for r in 0..d {
                for c in 0..d {
                    residual = residual.max((m[[r, c]] - m[[c, r]].conj()).norm());
                }
            }
            if residual > 1e-9 {
                return Err(Error::NotHermitian { residual });
            }
        }
        Ok(ChiSeries {
            n,
            times,
            chi,
            unit,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn unit(&self) -> TimeUnit {
        self.unit
    }

    pub fn chi_at(&self, idx: usize) -> &Array2<Complex64> {
        &self.chi[idx]
    }

    /// Smallest eigenvalue of chi(t) per time point. Negative values flag
    /// data outside the completely positive cone; callers report the
    /// magnitude rather than projecting it away.
    pub fn min_eigenvalue_per_time(&self) -> Result<Vec<f64>> {
        self.chi
            .iter()
            .map(|m| Ok(linalg::eigh(m)?.0[0]))
            .collect()
    }
}

/// Builds the generator-basis map series from dephasing factors: a diagonal
/// ladder-basis matrix (1 on identity and CSA slots, phi_m on each positive
/// slot, conj on its partner) conjugated into the generator basis.
pub fn map_from_factors(f: &DephasingFactors) -> Result<DynamicalMapSeries> {
    let n = f.dim();
    let d = n * n;
    let rs = root_system(n)?;
    for &m in rs.positive_indices() {
        if f.factor(m).is_none() {
            return Err(Error::MissingRootFactor(m));
        }
    }
    let (x, xinv) = simultaneous_diagonalizer(n)?;

    let maps = (0..f.times().len())
        .map(|ti| {
            let mut lambda = Array2::<Complex64>::zeros((d, d));
            for s in 0..d {
                lambda[[s, s]] = match Slot::of_index(n, s) {
                    Slot::Identity | Slot::Diag { .. } => ONE,
                    Slot::Sym { .. } => f.factor(s).unwrap()[ti],
                    Slot::Anti { j, k } => {
                        let raise = Slot::Sym { j, k }.index();
                        f.factor(raise).unwrap()[ti].conj()
                    }
                };
            }
            let complex_map = xinv.dot(&lambda).dot(&x);
            let mut real = Array2::<f64>::zeros((d, d));
            for r in 0..d {
                for c in 0..d {
                    debug_assert!(complex_map[[r, c]].im.abs() < 1e-12);
                    real[[r, c]] = complex_map[[r, c]].re;
                }
            }
            real
        })
        .collect();

    DynamicalMapSeries::new(n, f.times().to_vec(), maps, f.unit())
}

/// Reads dephasing factors back off a map series with the default
/// off-diagonal tolerance.
pub fn factors_from_map(map: &DynamicalMapSeries) -> Result<DephasingFactors> {
    factors_from_map_with(map, 1e-8)
}

/// As [`factors_from_map`], with an explicit relative Frobenius threshold
/// on the ladder-basis off-diagonal mass.
pub fn factors_from_map_with(
    map: &DynamicalMapSeries,
    threshold: f64,
) -> Result<DephasingFactors> {
    let n = map.dim();
    let d = n * n;
    let rs = root_system(n)?;
    let (x, xinv) = simultaneous_diagonalizer(n)?;

    let mut worst = (0.0_f64, 0usize);
    let mut factors: BTreeMap<usize, Vec<Complex64>> = rs
        .positive_indices()
        .iter()
        .map(|&m| (m, Vec::with_capacity(map.times().len())))
        .collect();

    for ti in 0..map.times().len() {
        let complex_map = map.map_at(ti).mapv(|v| Complex64::new(v, 0.0));
        let lambda = x.dot(&complex_map).dot(&xinv);
        let mut off = 0.0_f64;
        let mut total = 0.0_f64;
        for r in 0..d {
            for c in 0..d {
                let v = lambda[[r, c]].norm_sqr();
                total += v;
                if r != c {
                    off += v;
                }
            }
        }
        let rel = (off / total).sqrt();
        if rel > worst.0 {
            worst = (rel, ti);
        }
        if rel > threshold {
            continue; // keep scanning for the worst time before reporting
        }
        for s in 0..d {
            match Slot::of_index(n, s) {
                Slot::Identity | Slot::Diag { .. } => {
                    if (lambda[[s, s]] - ONE).norm() > threshold.max(1e-10) {
                        return Err(Error::BadFactors(format!(
                            "non-dephasing direction: diagonal slot {s} holds {} at time \
                             index {ti}",
                            lambda[[s, s]]
                        )));
                    }
                }
                Slot::Sym { .. } => factors.get_mut(&s).unwrap().push(lambda[[s, s]]),
                Slot::Anti { .. } => {}
            }
        }
    }
    if worst.0 > threshold {
        return Err(Error::NotPureDephasing {
            residual: worst.0,
            time_index: worst.1,
            threshold,
        });
    }
    DephasingFactors::new(n, map.times().to_vec(), factors, map.unit())
}

fn state_coords(rho: &Array2<Complex64>, gens: &GeneratorSet) -> Result<Vec<f64>> {
    let n = gens.dim();
    let mut herm = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            herm = herm.max((rho[[i, j]] - rho[[j, i]].conj()).norm());
        }
    }
    if herm > 1e-9 {
        return Err(Error::InvalidState(format!(
            "not Hermitian (residual {herm:.3e})"
        )));
    }
    let trace: Complex64 = (0..n).map(|i| rho[[i, i]]).sum();
    if (trace - ONE).norm() > 1e-9 {
        return Err(Error::InvalidState(format!("trace is {trace}, not 1")));
    }
    let (evals, _) = linalg::eigh(rho)?;
    if evals[0] < -1e-9 {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {:.3e}",
            evals[0]
        )));
    }
    Ok(gens.expand(rho).iter().map(|z| z.re).collect())
}

/// Evolves a state through the map series, returning one density matrix
/// per time point.
pub fn apply_map(
    map: &DynamicalMapSeries,
    rho0: &Array2<Complex64>,
) -> Result<Vec<Array2<Complex64>>> {
    let n = map.dim();
    if rho0.nrows() != n || rho0.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "state is {}x{}, map acts on dimension {n}",
            rho0.nrows(),
            rho0.ncols()
        )));
    }
    let gens = GeneratorSet::new(n)?;
    let coords = state_coords(rho0, &gens)?;
    let d = n * n;
    Ok((0..map.times().len())
        .map(|ti| {
            let m = map.map_at(ti);
            let evolved: Vec<Complex64> = (0..d)
                .map(|r| {
                    let x: f64 = (0..d).map(|c| m[[r, c]] * coords[c]).sum();
                    Complex64::new(x, 0.0)
                })
                .collect();
            gens.assemble(&evolved)
        })
        .collect())
}

/// Choi matrix of one generator-basis map: sum_{ij} E(E_ij) (x) E_ij.
/// Complete positivity of the map is positive semidefiniteness here.
pub fn choi_matrix(map: &Array2<f64>, gens: &GeneratorSet) -> Array2<Complex64> {
    let n = gens.dim();
    let d = n * n;
    let mut choi = Array2::<Complex64>::zeros((d, d));
    for i in 0..n {
        for j in 0..n {
            let mut eij = Array2::<Complex64>::zeros((n, n));
            eij[[i, j]] = ONE;
            let coords = gens.expand(&eij);
            let out: Vec<Complex64> = (0..d)
                .map(|r| (0..d).map(|c| map[[r, c]] * coords[c]).sum())
                .collect();
            let image = gens.assemble(&out);
            for a in 0..n {
                for b in 0..n {
                    choi[[a * n + i, b * n + j]] += image[[a, b]];
                }
            }
        }
    }
    choi
}

/// Coefficient tensor T with vec(E) = T vec(chi): row (j,k), column (l,m),
/// entry w_j Tr(B_j B_l B_k B_m) where B_0 = I, w_0 = 1/n and w_j = 1/2
/// otherwise. Restricting to the four index sectors reproduces the four
/// trace formulas used for tomography reconstruction.
fn process_tensor(gens: &GeneratorSet) -> Array2<Complex64> {
    let n = gens.dim();
    let d = n * n;
    let mut prods = Vec::with_capacity(d * d);
    for a in 0..d {
        for b in 0..d {
            prods.push(gens.matrix(a).dot(gens.matrix(b)));
        }
    }
    let trace = |p: &Array2<Complex64>, q: &Array2<Complex64>| {
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += p[[i, j]] * q[[j, i]];
            }
        }
        acc
    };
    let mut t = Array2::<Complex64>::zeros((d * d, d * d));
    for j in 0..d {
        let w = if j == 0 { 1.0 / n as f64 } else { 0.5 };
        for k in 0..d {
            for l in 0..d {
                for m in 0..d {
                    t[[j * d + k, l * d + m]] = w * trace(&prods[j * d + l], &prods[k * d + m]);
                }
            }
        }
    }
    t
}

/// Chi series reproducing the given map series: inverts the trace-formula
/// tensor once and applies it per time point.
pub fn chi_from_map(map: &DynamicalMapSeries, gens: &GeneratorSet) -> Result<ChiSeries> {
    let n = map.dim();
    if gens.dim() != n {
        return Err(Error::GridMismatch(format!(
            "map dimension {n} vs generator dimension {}",
            gens.dim()
        )));
    }
    let d = n * n;
    let t_inv = linalg::inverse(&process_tensor(gens))?;
    let chi = (0..map.times().len())
        .map(|ti| {
            let m = map.map_at(ti);
            let mut vec_chi = vec![ZERO; d * d];
            for (row, out) in vec_chi.iter_mut().enumerate() {
                let mut acc = ZERO;
                for col in 0..d * d {
                    acc += t_inv[[row, col]] * m[[col / d, col % d]];
                }
                *out = acc;
            }
            Array2::from_shape_fn((d, d), |(l, mm)| vec_chi[l * d + mm])
        })
        .collect();
    ChiSeries::new(n, map.times().to_vec(), chi, map.unit())
}

/// Evaluates the trace formulas to turn a chi series back into a map
/// series. The imaginary parts must cancel for Hermitian chi; the residual
/// is checked before they are dropped.
pub fn reconstruct_from_chi(c: &ChiSeries, gens: &GeneratorSet) -> Result<DynamicalMapSeries> {
    let n = c.dim();
    if gens.dim() != n {
        return Err(Error::GridMismatch(format!(
            "chi dimension {n} vs generator dimension {}",
            gens.dim()
        )));
    }
    let d = n * n;
    let t = process_tensor(gens);
    let maps = (0..c.times().len())
        .map(|ti| {
            let chi = c.chi_at(ti);
            let mut map = Array2::<f64>::zeros((d, d));
            for j in 0..d {
                for k in 0..d {
                    let mut acc = ZERO;
                    for l in 0..d {
                        for m in 0..d {
                            acc += t[[j * d + k, l * d + m]] * chi[[l, m]];
                        }
                    }
                    if acc.im.abs() > 1e-9 {
                        return Err(Error::Schema {
                            location: format!("chi[{ti}]"),
                            message: format!(
                                "reconstruction left imaginary residue {:.3e} at ({j},{k})",
                                acc.im
                            ),
                        });
                    }
                    map[[j, k]] = acc.re;
                }
            }
            Ok(map)
        })
        .collect::<Result<Vec<_>>>()?;
    DynamicalMapSeries::new(n, c.times().to_vec(), maps, c.unit())
}
