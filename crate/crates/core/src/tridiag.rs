//! Selected eigenpairs of a real symmetric tridiagonal matrix.
//!
//! Eigenvalues are located by Sturm-sequence bisection, eigenvectors by
//! inverse iteration. Both are O(n) per pair, which is what makes a
//! fine uniform finite-difference grid affordable.

/// Symmetric tridiagonal matrix: `diag[i]` on the diagonal, `off[i]`
/// coupling rows `i` and `i + 1`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(!diag.is_empty());
        assert_eq!(off.len() + 1, diag.len(), "off-diagonal length must be n - 1");
        Self { diag, off }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let q_prev = if q.abs() < tiny { -tiny } else { q };
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q_prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based), bisected to `tol`.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> f64 {
        assert!(k < self.len());
        let (mut lo, mut hi) = self.gershgorin();
        let width = (hi - lo).abs().max(f64::MIN_POSITIVE);
        lo -= 1e-12 * width;
        hi += 1e-12 * width;
        for _ in 0..200 {
            if hi - lo <= tol {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// y = T x
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    /// Solve (T - shift I) x = b with partial pivoting (banded LU).
    fn solve_shifted(&self, shift: f64, b: &[f64]) -> Vec<f64> {
        let n = self.len();
        let (glo, ghi) = self.gershgorin();
        let eps = f64::EPSILON * ghi.abs().max(glo.abs());
        // Row i of the factored system has up to three nonzeros: u0 (diag),
        // u1, u2 (fill-in from pivoting).
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut rhs = b.to_vec();

        // working copies of the current row
        let mut a_diag = self.diag[0] - shift;
        let mut a_up = if n > 1 { self.off[0] } else { 0.0 };
        for i in 0..n {
            if i + 1 == n {
                u0[i] = if a_diag.abs() < eps { eps } else { a_diag };
                u1[i] = 0.0;
                u2[i] = 0.0;
                break;
            }
            let below = self.off[i];
            let next_diag = self.diag[i + 1] - shift;
            let next_up = if i + 2 < n { self.off[i + 1] } else { 0.0 };
            if a_diag.abs() >= below.abs() {
                let piv = if a_diag.abs() < eps { eps } else { a_diag };
                let l = below / piv;
                u0[i] = piv;
                u1[i] = a_up;
                u2[i] = 0.0;
                rhs[i + 1] -= l * rhs[i];
                a_diag = next_diag - l * a_up;
                a_up = next_up;
            } else {
                // swap rows i and i+1
                let l = a_diag / below;
                u0[i] = below;
                u1[i] = next_diag;
                u2[i] = next_up;
                rhs.swap(i, i + 1);
                rhs[i + 1] -= l * rhs[i];
                a_diag = a_up - l * next_diag;
                a_up = -l * next_up;
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            if i + 1 < n {
                acc -= u1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc -= u2[i] * x[i + 2];
            }
            x[i] = acc / u0[i];
        }
        x
    }

    /// Unit-norm eigenvector for an accurate eigenvalue estimate, orthogonalised
    /// against `cluster` (previously found vectors with nearby eigenvalues).
    /// Returns the vector and its residual norm ||T x - lambda x||.
    pub fn eigenvector(&self, lambda: f64, cluster: &[&[f64]]) -> (Vec<f64>, f64) {
        let n = self.len();
        // deterministic, non-degenerate start vector
        let mut x: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract())
            .collect();
        normalize(&mut x);
        let (lo, hi) = self.gershgorin();
        let scale = hi.abs().max(lo.abs());
        let mut residual = f64::INFINITY;
        for _ in 0..6 {
            let mut y = self.solve_shifted(lambda, &x);
            for v in cluster {
                let proj: f64 = y.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (yi, vi) in y.iter_mut().zip(v.iter()) {
                    *yi -= proj * vi;
                }
            }
            normalize(&mut y);
            x = y;
            let tx = self.apply(&x);
            residual = tx
                .iter()
                .zip(x.iter())
                .map(|(t, xi)| (t - lambda * xi).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= 1e-10 * scale {
                break;
            }
        }
        (x, residual)
    }
}

fn normalize(x: &mut [f64]) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}
