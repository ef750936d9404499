//! Small dense linear-algebra helpers shared by the gain and topology code.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn rho_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn rho_max(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().expect("non-empty matrix")
}

/// Eigenvalues of a general square matrix, or `None` if the Schur
/// iteration does not settle within `max_iter` sweeps.
pub fn eigenvalues(m: &DMatrix<f64>, max_iter: usize) -> Option<Vec<Complex<f64>>> {
    m.clone()
        .try_schur(f64::EPSILON, max_iter)
        .map(|s| s.complex_eigenvalues().iter().copied().collect())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Solves `shift * X + M X + X Mᵀ = R` for symmetric `X`.
///
/// The unknowns are the n(n+1)/2 upper-triangular entries of `X`; the
/// equation is assembled entrywise on the upper triangle and solved by LU.
pub fn solve_symmetric_sylvester(
    shift: f64,
    m: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let idx = |i: usize, j: usize| -> usize {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        // row-major packed upper triangle
        a * n - a * (a + 1) / 2 + b
    };
    let size = n * (n + 1) / 2;
    let mut lhs = DMatrix::<f64>::zeros(size, size);
    let mut rhs = DVector::<f64>::zeros(size);
    for i in 0..n {
        for j in i..n {
            let row = idx(i, j);
            rhs[row] = 0.5 * (r[(i, j)] + r[(j, i)]);
            lhs[(row, idx(i, j))] += shift;
            // (M X)_{ij} = Σ_k M_ik X_kj
            for k in 0..n {
                let mik = m[(i, k)];
                if mik != 0.0 {
                    lhs[(row, idx(k, j))] += mik;
                }
                // (X Mᵀ)_{ij} = Σ_k X_ik M_jk
                let mjk = m[(j, k)];
                if mjk != 0.0 {
                    lhs[(row, idx(i, k))] += mjk;
                }
            }
        }
    }
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SolveFailed)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolveFailed);
    }
    let mut x = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = sol[idx(i, j)];
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_pascal_rows() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(6, 3), 20.0);
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }

    #[test]
    fn sylvester_matches_residual() {
        let m = DMatrix::from_row_slice(3, 3, &[0.1, 1.0, 0.0, -0.3, 0.2, 1.0, 0.5, 0.0, -0.4]);
        let r = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 1.0, 0.0, 0.1, 0.0, 3.0]);
        let x = solve_symmetric_sylvester(1.0, &m, &r).unwrap();
        let res = &x + &m * &x + &x * m.transpose() - &r;
        assert!(max_abs(&res) < 1e-12);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, -40.0]));
        assert!((spectral_norm(&d) - 40.0).abs() < 1e-12);
    }
}
