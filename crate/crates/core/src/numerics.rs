//! Dense complex kernels: LU solve, modified Gram–Schmidt, norms.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef};
use num_complex::Complex64;

use crate::{Error, Result};

/// Default relative threshold below which a Gram–Schmidt candidate is dropped.
pub const DEFAULT_DROP_TOL: f64 = 1e-10;

pub fn norm2(v: &[Complex64]) -> f64 {
    // scaled accumulation, safe for the 1e-12 .. 1e12 magnitudes seen in sweeps
    let scale = v
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = v.iter().map(|z| (z / scale).norm_sqr()).sum();
    scale * s.sqrt()
}

/// `‖a − b‖₂`.
pub fn diff_norm2(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d)
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    diff_norm2(a, b) / norm2(b)
}

/// `Σ conj(a_i) b_i`.
pub fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `y = M x` for a dense complex matrix.
pub fn matvec(m: MatRef<'_, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(m.ncols(), x.len());
    let mut y = vec![Complex64::new(0.0, 0.0); m.nrows()];
    for (c, &xc) in x.iter().enumerate() {
        if xc == Complex64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(c);
        for (r, yr) in y.iter_mut().enumerate() {
            *yr += col[r] * xc;
        }
    }
    y
}

/// Partial-pivoting LU factorization of a square complex matrix.
pub struct LuFactor {
    lu: faer::linalg::solvers::PartialPivLu<Complex64>,
    n: usize,
}

impl LuFactor {
    pub fn new(a: MatRef<'_, Complex64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let u = lu.U();
        for i in 0..n {
            let p = u[(i, i)];
            let mag = p.norm();
            if !mag.is_finite() || mag < f64::MIN_POSITIVE {
                return Err(Error::Singular {
                    pivot: i,
                    magnitude: mag,
                });
            }
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }
}

/// Solves `A x = b` by LU with partial pivoting and one step of iterative
/// refinement.
pub fn lu_solve(a: MatRef<'_, Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    let lu = LuFactor::new(a)?;
    let mut x = lu.solve(b)?;

    let r: Vec<Complex64> = matvec(a, &x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| bi - ax)
        .collect();
    let r_norm = norm2(&r);
    if r_norm > 0.0 {
        let dx = lu.solve(&r)?;
        let refined: Vec<Complex64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
        let r2: Vec<Complex64> = matvec(a, &refined)
            .iter()
            .zip(b)
            .map(|(ax, bi)| bi - ax)
            .collect();
        if norm2(&r2) < r_norm {
            x = refined;
        }
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular {
            pivot: 0,
            magnitude: f64::NAN,
        });
    }
    Ok(x)
}

/// Matrix with orthonormal columns built by Gram–Schmidt.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    pub columns: Mat<Complex64>,
    /// Candidates rejected as numerically dependent over the basis lifetime.
    pub drop_count: usize,
}

impl OrthoBasis {
    pub fn empty(rows: usize) -> Self {
        Self {
            columns: Mat::zeros(rows, 0),
            drop_count: 0,
        }
    }

    /// Identity basis of dimension `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            columns: Mat::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
            drop_count: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.nrows()
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        let c = self.columns.col(k);
        (0..self.rows()).map(|i| c[i]).collect()
    }

    /// `V x`.
    pub fn expand(&self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coeffs.len(),
            });
        }
        Ok(matvec(self.columns.as_ref(), coeffs))
    }

    /// `Vᴴ x`.
    pub fn coefficients(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.rows() {
            return Err(Error::DimensionMismatch {
                expected: self.rows(),
                found: x.len(),
            });
        }
        Ok((0..self.len())
            .map(|k| {
                let c = self.columns.col(k);
                (0..self.rows()).map(|i| c[i].conj() * x[i]).sum()
            })
            .collect())
    }

    /// `max |Vᴴ V − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.columns.adjoint() * &self.columns;
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Returns a new basis extended with `candidates` by modified Gram–Schmidt
    /// with one re-orthogonalization pass.
    ///
    /// A candidate whose norm after projection falls below
    /// `drop_tol × ‖candidate‖` is discarded and counted in `drop_count`.
    pub fn extend(&self, candidates: &[Vec<Complex64>], drop_tol: f64) -> Result<OrthoBasis> {
        if !(drop_tol > 0.0 && drop_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "drop_tol must lie in (0, 1), got {drop_tol}"
            )));
        }
        let rows = self.rows();
        if let Some(bad) = candidates.iter().find(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: bad.len(),
            });
        }

        let mut cols: Vec<Vec<Complex64>> = (0..self.len()).map(|k| self.column(k)).collect();
        let mut drop_count = self.drop_count;

        for cand in candidates {
            let original = norm2(cand);
            if original == 0.0 || !original.is_finite() {
                drop_count += 1;
                continue;
            }
            let mut v: Vec<Complex64> = cand.iter().map(|z| z / original).collect();
            for _pass in 0..2 {
                for q in &cols {
                    let h = dotc(q, &v);
                    for (vi, qi) in v.iter_mut().zip(q) {
                        *vi -= h * qi;
                    }
                }
            }
            let remaining = norm2(&v);
            if remaining < drop_tol {
                drop_count += 1;
                continue;
            }
            v.iter_mut().for_each(|z| *z /= remaining);
            cols.push(v);
        }

        let k = cols.len();
        Ok(OrthoBasis {
            columns: Mat::from_fn(rows, k, |i, j| cols[j][i]),
            drop_count,
        })
    }
}

/// Extends `basis` with candidates; see [`OrthoBasis::extend`].
pub fn mgs_extend(
    basis: &OrthoBasis,
    candidates: &[Vec<Complex64>],
    drop_tol: f64,
) -> Result<OrthoBasis> {
    basis.extend(candidates, drop_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit(n: usize, k: usize) -> Vec<Complex64> {
        let mut v = vec![c(0.0, 0.0); n];
        v[k] = c(1.0, 0.0);
        v
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = Mat::from_fn(4, 4, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, 0.0), c(7.0, -1.0)];
        let x = lu_solve(a.as_ref(), &b).unwrap();
        assert!(relative_error(&x, &b) < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let a = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(2.0, 0.0),
            (1, 1) => c(4.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let x = lu_solve(a.as_ref(), &[c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_well_conditioned_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let a = Mat::from_fn(n, n, |i, j| {
            let d = if i == j { 10.0 } else { 0.0 };
            c(rng.gen_range(-1.0..1.0) + d, rng.gen_range(-1.0..1.0))
        });
        let b = random_vec(&mut rng, n);
        let x = lu_solve(a.as_ref(), &b).unwrap();
        let r = relative_error(&matvec(a.as_ref(), &x), &b);
        assert!(r <= 1e-10, "residual {r}");
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let a = Mat::from_fn(3, 3, |i, j| c((i + 1) as f64 * (j + 1) as f64, 0.0));
        match lu_solve(a.as_ref(), &[c(1.0, 0.0); 3]) {
            Err(Error::Singular { pivot, .. }) => assert!(pivot >= 1),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = Mat::<Complex64>::zeros(3, 3);
        assert!(matches!(
            lu_solve(a.as_ref(), &[c(1.0, 0.0); 2]),
            Err(Error::DimensionMismatch { .. })
        ));
        let basis = OrthoBasis::empty(3);
        assert!(basis.extend(&[vec![c(1.0, 0.0); 2]], 1e-10).is_err());
    }

    #[test]
    fn extend_empty_with_e1() {
        let b = OrthoBasis::empty(3).extend(&[unit(3, 0)], 1e-10).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.drop_count, 0);
        assert!(relative_error(&b.column(0), &unit(3, 0)) < 1e-15);
    }

    #[test]
    fn dependent_candidate_is_dropped() {
        let b = OrthoBasis::empty(3).extend(&[unit(3, 0)], 1e-10).unwrap();
        let five_e1: Vec<Complex64> = unit(3, 0).iter().map(|z| z * 5.0).collect();
        let b2 = b.extend(&[five_e1], 1e-10).unwrap();
        assert_eq!(b2.len(), 1);
        assert_eq!(b2.drop_count, 1);
    }

    #[test]
    fn hand_gram_schmidt_gives_e2() {
        let b = OrthoBasis::empty(3).extend(&[unit(3, 0)], 1e-10).unwrap();
        let cand = vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
        let b2 = b.extend(&[cand], 1e-10).unwrap();
        assert_eq!(b2.len(), 2);
        let q = b2.column(1);
        // equal to e2 up to a unit phase
        assert!(q[0].norm() < 1e-15 && q[2].norm() < 1e-15);
        assert!((q[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn re_extending_with_own_columns_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cands: Vec<_> = (0..6).map(|_| random_vec(&mut rng, 20)).collect();
        let b = OrthoBasis::empty(20).extend(&cands, 1e-10).unwrap();
        let own: Vec<_> = (0..b.len()).map(|k| b.column(k)).collect();
        let b2 = b.extend(&own, 1e-10).unwrap();
        assert_eq!(b2.len(), b.len());
        assert_eq!(b2.drop_count, b.drop_count + own.len());
        for k in 0..b.len() {
            assert!(relative_error(&b2.column(k), &b.column(k)) == 0.0);
        }
    }

    #[test]
    fn span_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cands: Vec<_> = (0..8).map(|_| random_vec(&mut rng, 30)).collect();
        let b = OrthoBasis::empty(30).extend(&cands, 1e-10).unwrap();
        assert_eq!(b.len(), 8);
        for cand in &cands {
            let proj = b.expand(&b.coefficients(cand).unwrap()).unwrap();
            assert!(diff_norm2(&proj, cand) <= 1e-10 * norm2(cand));
        }
    }

    #[test]
    fn orthonormality_after_many_extensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 200;
        let mut basis = OrthoBasis::empty(n);
        for step in 0..100 {
            let mut cand = random_vec(&mut rng, n);
            // mix in existing directions to stress the re-orthogonalization
            if step > 0 && step % 3 == 0 {
                let prev = basis.column(step / 2);
                for (x, p) in cand.iter_mut().zip(&prev) {
                    *x = *x * 1e-6 + p;
                }
            }
            basis = basis.extend(&[cand], DEFAULT_DROP_TOL).unwrap();
        }
        assert_eq!(basis.len(), 100);
        assert!(basis.orthonormality_defect() <= 1e-12);
        for k in 0..basis.len() {
            assert!((norm2(&basis.column(k)) - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn zero_candidate_is_dropped() {
        let b = OrthoBasis::empty(4)
            .extend(&[vec![c(0.0, 0.0); 4]], 1e-10)
            .unwrap();
        assert!(b.is_empty());
        assert_eq!(b.drop_count, 1);
    }

    #[test]
    fn norm2_handles_wide_range() {
        let v = vec![c(3e-200, 0.0), c(0.0, 4e-200)];
        assert!((norm2(&v) - 5e-200).abs() < 1e-214);
        let w = vec![c(3e200, 0.0), c(0.0, 4e200)];
        assert!((norm2(&w) / 5e200 - 1.0).abs() < 1e-15);
    }
}
