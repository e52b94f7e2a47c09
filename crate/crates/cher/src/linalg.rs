//! Dense linear algebra helpers on `ndarray` storage.
//!
//! The sizes in this crate are tiny (generator bases up to n^2, Fock
//! truncations in the low hundreds), so straightforward O(n^3) algorithms
//! with pivoting are plenty and keep the whole stack dependency-light.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Inverse of a square complex matrix by Gauss-Jordan elimination with
/// partial pivoting.
pub fn inverse(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "inverse needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut work = a.clone();
    let mut inv = Array2::<Complex64>::eye(n);
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);

    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_mag = work[[col, col]].norm();
        for r in col + 1..n {
            let mag = work[[r, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = r;
            }
        }
        if pivot_mag <= scale * 1e-13 {
            return Err(Error::Singular { pivot: pivot_mag });
        }
        if pivot_row != col {
            for c in 0..n {
                work.swap([col, c], [pivot_row, c]);
                inv.swap([col, c], [pivot_row, c]);
            }
        }
        let pivot = work[[col, col]];
        for c in 0..n {
            work[[col, c]] /= pivot;
            inv[[col, c]] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = work[[r, col]];
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in 0..n {
                let wc = work[[col, c]];
                let ic = inv[[col, c]];
                work[[r, c]] -= factor * wc;
                inv[[r, c]] -= factor * ic;
            }
        }
    }
    Ok(inv)
}

/// Determinant of a square real matrix by Gaussian elimination with
/// partial pivoting.
pub fn det_real(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "determinant needs a square matrix");
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[pivot_row, col]].abs() {
                pivot_row = r;
            }
        }
        let pivot = m[[pivot_row, col]];
        if pivot == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap([col, c], [pivot_row, c]);
            }
            det = -det;
        }
        det *= pivot;
        for r in col + 1..n {
            let factor = m[[r, col]] / pivot;
            for c in col..n {
                let top = m[[col, c]];
                m[[r, c]] -= factor * top;
            }
        }
    }
    det
}

/// Solves the real linear system a x = b by Gaussian elimination with
/// partial pivoting.
pub fn solve_real(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::GridMismatch(format!(
            "solve needs square a and matching b, got {}x{} with b of {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    let scale = a.iter().map(|x| x.abs()).fold(0.0_f64, f64::max).max(1.0);
    for col in 0..n {
        let mut pivot_row = col;
        for r in col + 1..n {
            if m[[r, col]].abs() > m[[pivot_row, col]].abs() {
                pivot_row = r;
            }
        }
        let pivot = m[[pivot_row, col]];
        if pivot.abs() <= scale * 1e-13 {
            return Err(Error::Singular { pivot: pivot.abs() });
        }
        if pivot_row != col {
            for c in 0..n {
                m.swap([col, c], [pivot_row, c]);
            }
            rhs.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = m[[r, col]] / pivot;
            for c in col..n {
                let top = m[[col, c]];
                m[[r, c]] -= factor * top;
            }
            rhs[r] -= factor * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = rhs[col];
        for c in col + 1..n {
            acc -= m[[col, c]] * rhs[c];
        }
        rhs[col] = acc / m[[col, col]];
    }
    Ok(rhs)
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns.
pub fn eigh_symmetric(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::GridMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let sym_res = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (a[[i, j]] - a[[j, i]]).abs())
        .fold(0.0_f64, f64::max);
    let scale = a.iter().map(|x| x.abs()).fold(0.0_f64, f64::max).max(1.0);
    if sym_res > scale * 1e-10 {
        return Err(Error::NotHermitian { residual: sym_res });
    }

    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let max_sweeps = 60;
    let mut converged = false;

    for _ in 0..max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off.sqrt() <= scale * 1e-15 * (n as f64) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= scale * f64::EPSILON * 1e-2 {
                    continue;
                }
                // Classic two-sided rotation zeroing m[p,q].
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: max_sweeps });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap());
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vecs[[r, new_col]] = v[[r, old_col]];
        }
    }
    Ok((vals, vecs))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Embeds the m x m Hermitian problem as the 2m x 2m real symmetric matrix
/// [[Re, -Im], [Im, Re]], whose spectrum is that of the original with every
/// eigenvalue doubled: if u = x + iy is an eigenvector then both (x, y) and
/// (-y, x) are embedding eigenvectors. One member of each pair is kept by
/// projecting out the complex span of vectors already accepted at the same
/// eigenvalue.
pub fn eigh(a: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let m = a.nrows();
    if a.ncols() != m {
        return Err(Error::GridMismatch(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m,
            a.ncols()
        )));
    }
    let herm_res = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (a[[i, j]] - a[[j, i]].conj()).norm())
        .fold(0.0_f64, f64::max);
    let scale = a.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
    if herm_res > scale * 1e-10 {
        return Err(Error::NotHermitian { residual: herm_res });
    }

    let mut embed = Array2::<f64>::zeros((2 * m, 2 * m));
    for i in 0..m {
        for j in 0..m {
            let z = a[[i, j]];
            embed[[i, j]] = z.re;
            embed[[i + m, j + m]] = z.re;
            embed[[i, j + m]] = -z.im;
            embed[[i + m, j]] = z.im;
        }
    }
    let (evals, evecs) = eigh_symmetric(&embed)?;

    let mut vals = Vec::with_capacity(m);
    let mut kept: Vec<(f64, Array1<Complex64>)> = Vec::with_capacity(m);
    let degeneracy_tol = scale * 1e-8;
    for k in 0..2 * m {
        if kept.len() == m {
            break;
        }
        let lambda = evals[k];
        let mut u = Array1::from_iter(
            (0..m).map(|r| Complex64::new(evecs[[r, k]], evecs[[r + m, k]])),
        );
        for (mu, w) in &kept {
            if (lambda - mu).abs() > degeneracy_tol {
                continue;
            }
            let overlap: Complex64 = w.iter().zip(u.iter()).map(|(wi, ui)| wi.conj() * ui).sum();
            for (ui, wi) in u.iter_mut().zip(w.iter()) {
                *ui -= overlap * wi;
            }
        }
        let norm = u.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue; // partner of a vector already kept
        }
        u.mapv_inplace(|z| z / norm);
        vals.push(lambda);
        kept.push((lambda, u));
    }
    if kept.len() != m {
        return Err(Error::EigenNoConvergence { sweeps: 60 });
    }

    let mut vecs = Array2::<Complex64>::zeros((m, m));
    for (col, (_, u)) in kept.iter().enumerate() {
        for r in 0..m {
            vecs[[r, col]] = u[r];
        }
    }
    Ok((Array1::from(vals), vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_complex(n: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, n), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn inverse_times_original_is_identity() {
        let a = random_complex(12, 7);
        let inv = inverse(&a).unwrap();
        let prod = a.dot(&inv);
        for i in 0..12 {
            for j in 0..12 {
                let want = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((prod[[i, j]] - want).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn inverse_rejects_singular() {
        let a = array![[c(1.0, 0.0), c(2.0, 0.0)], [c(2.0, 0.0), c(4.0, 0.0)]];
        assert!(matches!(inverse(&a), Err(Error::Singular { .. })));
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        // 2(6-1) - 1(2-0) = 8
        assert!((det_real(&a) - 8.0).abs() < 1e-12);
        let b = array![[1.0, 2.0], [2.0, 4.0]];
        assert_eq!(det_real(&b), 0.0);
    }

    #[test]
    fn solve_recovers_known_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let a = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0_f64));
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[[i, j]] * x[j]).sum())
            .collect();
        let got = solve_real(&a, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_matches_hand_spectrum() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let (vals, vecs) = eigh_symmetric(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        let av = a.dot(&vecs);
        for j in 0..2 {
            for i in 0..2 {
                assert!((av[[i, j]] - vals[j] * vecs[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_random_symmetric_decomposes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 15;
        let raw = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0_f64));
        let a = 0.5 * (&raw + &raw.t());
        let (vals, vecs) = eigh_symmetric(&a).unwrap();
        for j in 1..n {
            assert!(vals[j] >= vals[j - 1]);
        }
        let av = a.dot(&vecs);
        let vtv = vecs.t().dot(&vecs);
        for i in 0..n {
            for j in 0..n {
                assert!((av[[i, j]] - vals[j] * vecs[[i, j]]).abs() < 1e-10);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_eigen_known_two_level() {
        // [[1, i], [-i, 1]] has eigenvalues 0 and 2.
        let a = array![[c(1.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(1.0, 0.0)]];
        let (vals, vecs) = eigh(&a).unwrap();
        assert!((vals[0] - 0.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        let av = a.dot(&vecs);
        for j in 0..2 {
            for i in 0..2 {
                assert!((av[[i, j]] - vals[j] * vecs[[i, j]]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hermitian_eigen_random_decomposes() {
        let raw = random_complex(10, 23);
        let mut a = Array2::<Complex64>::zeros((10, 10));
        for i in 0..10 {
            for j in 0..10 {
                a[[i, j]] = 0.5 * (raw[[i, j]] + raw[[j, i]].conj());
            }
        }
        let (vals, vecs) = eigh(&a).unwrap();
        let av = a.dot(&vecs);
        for i in 0..10 {
            for j in 0..10 {
                assert!((av[[i, j]] - vals[j] * vecs[[i, j]]).norm() < 1e-9);
                let dot: Complex64 = (0..10).map(|r| vecs[[r, i]].conj() * vecs[[r, j]]).sum();
                let want = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                assert!((dot - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn hermitian_eigen_rejects_non_hermitian() {
        let a = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(matches!(eigh(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn hermitian_eigen_handles_degenerate_spectrum() {
        // diag(1, 1, 3) in a rotated frame keeps a two-fold degeneracy.
        let u = array![
            [c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0)],
            [c(0.0, 0.8), c(0.6, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
        ];
        let d = array![
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]
        ];
        let uh = Array2::from_shape_fn((3, 3), |(i, j)| u[[j, i]].conj());
        let a = u.dot(&d).dot(&uh);
        let (vals, vecs) = eigh(&a).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-10);
        assert!((vals[1] - 1.0).abs() < 1e-10);
        assert!((vals[2] - 3.0).abs() < 1e-10);
        let av = a.dot(&vecs);
        for i in 0..3 {
            for j in 0..3 {
                assert!((av[[i, j]] - vals[j] * vecs[[i, j]]).norm() < 1e-9);
            }
        }
    }
}
