//! Generator bases and root data for u(n).
//!
//! Two bases of the same operator space are kept side by side. The Hermitian
//! generator basis extends the Pauli/Gell-Mann family to any dimension and is
//! what process matrices are written in. The ladder basis trades Hermiticity
//! for a diagonal adjoint action: commuting a diagonal Hamiltonian past a
//! ladder operator only rescales it, and the rescaling factors are linear in
//! the Hamiltonian's diagonal coordinates. Those linear forms are the roots,
//! and everything downstream (dephasing factors, distribution retrieval)
//! hangs off them.
//!
//! Index layout, shared by both bases: slot 0 is the identity; for each
//! k = 2..=n the block [(k-1)^2, k^2-1] holds the pairs (j,k) for j < k,
//! symmetric then antisymmetric, followed by the diagonal generator at
//! k^2-1. So n = 3 reproduces the textbook Gell-Mann numbering.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// What a basis index refers to. Pair indices `j < k` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Identity,
    /// E_jk + E_kj in the generator basis; the raising operator E_jk in the
    /// ladder basis.
    Sym { j: usize, k: usize },
    /// -i(E_jk - E_kj) in the generator basis; the lowering operator E_kj in
    /// the ladder basis.
    Anti { j: usize, k: usize },
    /// Diagonal generator closing block k; these span the Cartan subalgebra.
    Diag { k: usize },
}

fn isqrt(m: usize) -> usize {
    let mut r = (m as f64).sqrt() as usize;
    while (r + 1) * (r + 1) <= m {
        r += 1;
    }
    while r * r > m {
        r -= 1;
    }
    r
}

impl Slot {
    /// Decodes a flat index into its slot. Panics if `m >= n*n`.
    pub fn of_index(n: usize, m: usize) -> Slot {
        assert!(m < n * n, "index {m} out of range for dimension {n}");
        if m == 0 {
            return Slot::Identity;
        }
        let k = isqrt(m) + 1;
        let offset = m - (k - 1) * (k - 1);
        if offset == 2 * (k - 1) {
            Slot::Diag { k }
        } else {
            let j = offset / 2 + 1;
            if offset % 2 == 0 {
                Slot::Sym { j, k }
            } else {
                Slot::Anti { j, k }
            }
        }
    }

    /// Inverse of [`Slot::of_index`].
    pub fn index(&self) -> usize {
        match *self {
            Slot::Identity => 0,
            Slot::Sym { j, k } => (k - 1) * (k - 1) + 2 * (j - 1),
            Slot::Anti { j, k } => (k - 1) * (k - 1) + 2 * (j - 1) + 1,
            Slot::Diag { k } => k * k - 1,
        }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::BadDimension(n))
    } else {
        Ok(())
    }
}

/// Tr(a * b) without forming the product.
fn trace_prod(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[[i, j]] * b[[j, i]];
        }
    }
    acc
}

fn commutator(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    a.dot(b) - b.dot(a)
}

/// Hermitian generator basis of u(n) with its structure constants.
#[derive(Debug, Clone)]
pub struct GeneratorSet {
    n: usize,
    mats: Vec<Array2<Complex64>>,
    /// c_{klm} over 1-based indices 1..n^2-1, flattened row-major.
    c: Vec<f64>,
}

impl GeneratorSet {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        let mut mats = Vec::with_capacity(n * n);
        for m in 0..n * n {
            let mut mat = Array2::<Complex64>::zeros((n, n));
            match Slot::of_index(n, m) {
                Slot::Identity => {
                    for i in 0..n {
                        mat[[i, i]] = ONE;
                    }
                }
                Slot::Sym { j, k } => {
                    mat[[j - 1, k - 1]] = ONE;
                    mat[[k - 1, j - 1]] = ONE;
                }
                Slot::Anti { j, k } => {
                    mat[[j - 1, k - 1]] = -I;
                    mat[[k - 1, j - 1]] = I;
                }
                Slot::Diag { k } => {
                    let scale = (2.0 / (k as f64 * (k as f64 - 1.0))).sqrt();
                    for i in 0..k - 1 {
                        mat[[i, i]] = Complex64::new(scale, 0.0);
                    }
                    mat[[k - 1, k - 1]] = Complex64::new(-scale * (k as f64 - 1.0), 0.0);
                }
            }
            mats.push(mat);
        }

        // c_{klm} = Tr([L_k, L_l] L_m) / (4i), antisymmetric in (k,l).
        let d = n * n - 1;
        let mut c = vec![0.0; d * d * d];
        for k in 1..=d {
            for l in k + 1..=d {
                let comm = commutator(&mats[k], &mats[l]);
                for m in 1..=d {
                    let val = (trace_prod(&comm, &mats[m]) / (4.0 * I)).re;
                    c[((k - 1) * d + (l - 1)) * d + (m - 1)] = val;
                    c[((l - 1) * d + (k - 1)) * d + (m - 1)] = -val;
                }
            }
        }
        Ok(GeneratorSet { n, mats, c })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of basis elements, n^2.
    pub fn count(&self) -> usize {
        self.n * self.n
    }

    pub fn matrix(&self, m: usize) -> &Array2<Complex64> {
        &self.mats[m]
    }

    pub fn slot(&self, m: usize) -> Slot {
        Slot::of_index(self.n, m)
    }

    /// c_{klm} for 1-based indices in 1..n^2-1.
    pub fn structure_constant(&self, k: usize, l: usize, m: usize) -> f64 {
        let d = self.n * self.n - 1;
        assert!(
            (1..=d).contains(&k) && (1..=d).contains(&l) && (1..=d).contains(&m),
            "structure constant indices must lie in 1..={d}"
        );
        self.c[((k - 1) * d + (l - 1)) * d + (m - 1)]
    }

    /// Coordinates of an arbitrary matrix: a = x_0 I + sum_m x_m L_m with
    /// x_0 = Tr(a)/n and x_m = Tr(a L_m)/2.
    pub fn expand(&self, a: &Array2<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        out.push(trace_prod(a, &self.mats[0]) / n as f64);
        for m in 1..n * n {
            out.push(trace_prod(a, &self.mats[m]) / 2.0);
        }
        out
    }

    pub fn assemble(&self, coords: &[Complex64]) -> Array2<Complex64> {
        assert_eq!(coords.len(), self.n * self.n);
        let mut out = Array2::<Complex64>::zeros((self.n, self.n));
        for (x, mat) in coords.iter().zip(&self.mats) {
            out.scaled_add(*x, mat);
        }
        out
    }

    /// Indices of the diagonal generators, in block order k = 2..=n.
    pub fn csa_indices(&self) -> Vec<usize> {
        (2..=self.n).map(|k| k * k - 1).collect()
    }

    /// The Hamiltonian (1/2) sum_c lambda_c L_c over the diagonal
    /// generators. This normalization makes the adjoint eigenvalue on each
    /// raising slot equal to the plain dot product of its root with lambda.
    pub fn csa_element(&self, lambda: &[f64]) -> Result<Array2<Complex64>> {
        if lambda.len() != self.n - 1 {
            return Err(Error::GridMismatch(format!(
                "expected {} diagonal coordinates, got {}",
                self.n - 1,
                lambda.len()
            )));
        }
        let mut h = Array2::<Complex64>::zeros((self.n, self.n));
        for (c, &lam) in lambda.iter().enumerate() {
            let k = c + 2;
            h.scaled_add(Complex64::new(0.5 * lam, 0.0), &self.mats[k * k - 1]);
        }
        Ok(h)
    }
}

/// gl(n) basis: identity, elementary matrices E_jk on the pair slots, and
/// the same diagonal generators as [`GeneratorSet`].
#[derive(Debug, Clone)]
pub struct LadderBasis {
    n: usize,
    ops: Vec<Array2<Complex64>>,
    csa: Vec<usize>,
}

impl LadderBasis {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        let gens = GeneratorSet::new(n)?;
        let mut ops = Vec::with_capacity(n * n);
        for m in 0..n * n {
            match Slot::of_index(n, m) {
                Slot::Sym { j, k } => {
                    let mut mat = Array2::<Complex64>::zeros((n, n));
                    mat[[j - 1, k - 1]] = ONE;
                    ops.push(mat);
                }
                Slot::Anti { j, k } => {
                    let mut mat = Array2::<Complex64>::zeros((n, n));
                    mat[[k - 1, j - 1]] = ONE;
                    ops.push(mat);
                }
                _ => ops.push(gens.matrix(m).clone()),
            }
        }
        let csa = gens.csa_indices();
        Ok(LadderBasis { n, ops, csa })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn count(&self) -> usize {
        self.n * self.n
    }

    pub fn operator(&self, m: usize) -> &Array2<Complex64> {
        &self.ops[m]
    }

    pub fn slot(&self, m: usize) -> Slot {
        Slot::of_index(self.n, m)
    }

    pub fn csa_indices(&self) -> &[usize] {
        &self.csa
    }

    /// Index of the conjugate-transpose partner: raise <-> lower, identity
    /// and diagonal slots are self-paired.
    pub fn conjugate_index(&self, m: usize) -> usize {
        match Slot::of_index(self.n, m) {
            Slot::Sym { j, k } => Slot::Anti { j, k }.index(),
            Slot::Anti { j, k } => Slot::Sym { j, k }.index(),
            _ => m,
        }
    }

    /// Coordinates under the Hilbert-Schmidt pairing; the basis is
    /// HS-orthogonal with squared norms n (identity), 1 (ladder slots) and
    /// 2 (diagonals).
    pub fn expand(&self, a: &Array2<Complex64>) -> Vec<Complex64> {
        let n = self.n;
        (0..n * n)
            .map(|m| {
                let op = &self.ops[m];
                let mut acc = ZERO;
                for r in 0..n {
                    for c in 0..n {
                        acc += op[[r, c]].conj() * a[[r, c]];
                    }
                }
                match Slot::of_index(n, m) {
                    Slot::Identity => acc / n as f64,
                    Slot::Diag { .. } => acc / 2.0,
                    _ => acc,
                }
            })
            .collect()
    }

    pub fn assemble(&self, coords: &[Complex64]) -> Array2<Complex64> {
        assert_eq!(coords.len(), self.n * self.n);
        let mut out = Array2::<Complex64>::zeros((self.n, self.n));
        for (x, op) in coords.iter().zip(&self.ops) {
            out.scaled_add(*x, op);
        }
        out
    }
}

/// Which basis an adjoint matrix is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    Generator,
    Ladder,
}

/// Matrix of the commutator action X -> [H, X] on coordinate vectors.
#[derive(Debug, Clone)]
pub struct AdjointMap {
    n: usize,
    basis: BasisTag,
    matrix: Array2<Complex64>,
}

impl AdjointMap {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> BasisTag {
        self.basis
    }

    /// The n^2 x n^2 coordinate matrix; slot 0 row and column are zero.
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }
}

fn hermiticity_residual(h: &Array2<Complex64>) -> f64 {
    let n = h.nrows();
    let mut res: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            res = res.max((h[[i, j]] - h[[j, i]].conj()).norm());
        }
    }
    res
}

/// Adjoint representation of a Hermitian matrix in the requested basis:
/// column m holds the coordinates of [H, B_m].
///
/// In the generator basis the result is i times a real antisymmetric matrix,
/// hence Hermitian; both bases give zero in the identity row and column.
pub fn adjoint_rep(
    h: &Array2<Complex64>,
    gens: &GeneratorSet,
    basis: BasisTag,
) -> Result<AdjointMap> {
    let n = gens.dim();
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "Hamiltonian is {}x{}, generators are for dimension {}",
            h.nrows(),
            h.ncols(),
            n
        )));
    }
    let residual = hermiticity_residual(h);
    if residual > 1e-10 {
        return Err(Error::NotHermitian { residual });
    }

    let ladder;
    let mut matrix = Array2::<Complex64>::zeros((n * n, n * n));
    match basis {
        BasisTag::Generator => {
            for m in 0..n * n {
                let col = gens.expand(&commutator(h, gens.matrix(m)));
                for (j, x) in col.into_iter().enumerate() {
                    matrix[[j, m]] = x;
                }
            }
        }
        BasisTag::Ladder => {
            ladder = LadderBasis::new(n)?;
            for m in 0..n * n {
                let col = ladder.expand(&commutator(h, ladder.operator(m)));
                for (j, x) in col.into_iter().enumerate() {
                    matrix[[j, m]] = x;
                }
            }
        }
    }
    Ok(AdjointMap { n, basis, matrix })
}

/// One ladder slot together with the linear form its commutator eigenvalue
/// takes on diagonal-Hamiltonian coordinates.
#[derive(Debug, Clone)]
pub struct Root {
    pub index: usize,
    pub alpha: Vec<f64>,
}

/// Root data of su(n) in the ladder numbering.
#[derive(Debug, Clone)]
pub struct RootSystem {
    n: usize,
    roots: Vec<Root>,
    positive: Vec<usize>,
    simple: Vec<usize>,
    change: Array2<f64>,
    jacobian: f64,
}

/// Positivity rule: a root is positive when its highest-indexed nonzero
/// coordinate is positive. Reading coordinates from the top CSA index down
/// makes every raising slot positive, which is what the downstream factor
/// conventions assume.
fn root_is_positive(alpha: &[f64]) -> bool {
    for &a in alpha.iter().rev() {
        if a.abs() > 1e-12 {
            return a > 0.0;
        }
    }
    false
}

pub fn root_system(n: usize) -> Result<RootSystem> {
    check_dim(n)?;
    let gens = GeneratorSet::new(n)?;
    let csa = gens.csa_indices();

    // alpha_c = (L_c[j,j] - L_c[k,k]) / 2 for the slot moving weight from k
    // to j; with H = (1/2) lambda . L this is the eigenvalue's gradient.
    let mut roots = Vec::with_capacity(n * n - n);
    for m in 1..n * n {
        let (j, k, sign) = match Slot::of_index(n, m) {
            Slot::Sym { j, k } => (j, k, 1.0),
            Slot::Anti { j, k } => (j, k, -1.0),
            _ => continue,
        };
        let alpha: Vec<f64> = csa
            .iter()
            .map(|&c| {
                let l = gens.matrix(c);
                sign * 0.5 * (l[[j - 1, j - 1]].re - l[[k - 1, k - 1]].re)
            })
            .collect();
        roots.push(Root { index: m, alpha });
    }

    let positive: Vec<usize> = roots
        .iter()
        .filter(|r| root_is_positive(&r.alpha))
        .map(|r| r.index)
        .collect();

    // Simple roots: positive roots that are not sums of two positive roots.
    let pos_vecs: Vec<&[f64]> = roots
        .iter()
        .filter(|r| positive.contains(&r.index))
        .map(|r| r.alpha.as_slice())
        .collect();
    let is_sum = |alpha: &[f64]| {
        for a in &pos_vecs {
            for b in &pos_vecs {
                let close = alpha
                    .iter()
                    .enumerate()
                    .all(|(c, &x)| (x - a[c] - b[c]).abs() < 1e-10);
                if close {
                    return true;
                }
            }
        }
        false
    };
    let simple: Vec<usize> = roots
        .iter()
        .filter(|r| positive.contains(&r.index) && !is_sum(&r.alpha))
        .map(|r| r.index)
        .collect();

    let mut change = Array2::<f64>::zeros((n - 1, n - 1));
    for (row, &m) in simple.iter().enumerate() {
        let root = roots.iter().find(|r| r.index == m).unwrap();
        for c in 0..n - 1 {
            change[[row, c]] = root.alpha[c];
        }
    }
    let det = linalg::det_real(&change);
    if det.abs() < 1e-12 {
        return Err(Error::Singular { pivot: det.abs() });
    }
    let jacobian = det.abs().recip();

    Ok(RootSystem {
        n,
        roots,
        positive,
        simple,
        change,
        jacobian,
    })
}

impl RootSystem {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn root(&self, index: usize) -> Option<&[f64]> {
        self.roots
            .iter()
            .find(|r| r.index == index)
            .map(|r| r.alpha.as_slice())
    }

    pub fn positive_indices(&self) -> &[usize] {
        &self.positive
    }

    pub fn simple_indices(&self) -> &[usize] {
        &self.simple
    }

    pub fn is_positive(&self, index: usize) -> bool {
        self.positive.contains(&index)
    }

    /// Ladder index carrying the opposite root (the conjugate slot).
    pub fn opposite(&self, index: usize) -> usize {
        match Slot::of_index(self.n, index) {
            Slot::Sym { j, k } => Slot::Anti { j, k }.index(),
            Slot::Anti { j, k } => Slot::Sym { j, k }.index(),
            _ => panic!("index {index} is not a root slot"),
        }
    }

    /// Rows are the simple roots in ascending ladder-index order.
    pub fn change_matrix(&self) -> &Array2<f64> {
        &self.change
    }

    /// 1/|det(change_matrix)|: the volume factor picked up when moving
    /// densities between simple-root and CSA coordinates.
    pub fn jacobian(&self) -> f64 {
        self.jacobian
    }

    /// Coefficients x with alpha = sum_i x_i * simple_i.
    pub fn expand_in_simple(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let st = self.change.t().to_owned();
        linalg::solve_real(&st, alpha)
    }
}

/// Change of basis X from generator coordinates to ladder coordinates,
/// returned with its inverse.
///
/// X is block diagonal: 1 on the identity and diagonal slots, and
/// [[1, -i], [1, i]] on each (sym, anti) pair, since
/// L_sym = K_raise + K_lower and L_anti = -i K_raise + i K_lower.
/// Conjugating the adjoint matrix of any diagonal Hamiltonian by X
/// diagonalizes it.
pub fn simultaneous_diagonalizer(n: usize) -> Result<(Array2<Complex64>, Array2<Complex64>)> {
    check_dim(n)?;
    let mut x = Array2::<Complex64>::zeros((n * n, n * n));
    let mut xinv = Array2::<Complex64>::zeros((n * n, n * n));
    let half = Complex64::new(0.5, 0.0);
    for m in 0..n * n {
        match Slot::of_index(n, m) {
            Slot::Identity | Slot::Diag { .. } => {
                x[[m, m]] = ONE;
                xinv[[m, m]] = ONE;
            }
            Slot::Sym { .. } => {
                // rows/cols (m, m+1) hold the 2x2 blocks
                x[[m, m]] = ONE;
                x[[m, m + 1]] = -I;
                x[[m + 1, m]] = ONE;
                x[[m + 1, m + 1]] = I;
                xinv[[m, m]] = half;
                xinv[[m, m + 1]] = half;
                xinv[[m + 1, m]] = I * half;
                xinv[[m + 1, m + 1]] = -I * half;
            }
            Slot::Anti { .. } => {}
        }
    }
    Ok((x, xinv))
}
