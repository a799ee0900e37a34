//! Dense real symmetric eigenproblems for the lower end of the spectrum.
//!
//! Householder reduction to tridiagonal form, Sturm-sequence bisection for
//! the requested eigenvalues, inverse iteration for their eigenvectors and
//! back-transformation through the stored reflectors. Only the smallest
//! `k` pairs are computed, so the cost is dominated by the `O(n³)` reduction.

use crate::{par, Error, Result};

const MAX_BISECTION_STEPS: usize = 256;
const INVERSE_ITERATIONS: usize = 3;
/// Relative eigenvalue separation below which eigenvectors are
/// reorthogonalized against each other during inverse iteration.
const CLUSTER_TOL: f64 = 1e-3;

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "tridiagonal needs n diagonal and n - 1 off-diagonal entries, got {} and {}",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin interval containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn pivmin(&self) -> f64 {
        let emax = self.off.iter().fold(1.0f64, |m, e| m.max(e * e));
        f64::MIN_POSITIVE * emax
    }

    /// Number of eigenvalues strictly less than `x` (Sturm count).
    pub fn count_below(&self, x: f64) -> usize {
        let pivmin = self.pivmin();
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            if q.abs() < pivmin {
                q = -pivmin;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `index`-th smallest eigenvalue (zero-based) by bisection.
    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        if index >= self.len() {
            return Err(Error::ModesOutOfRange {
                requested: index + 1,
                available: self.len(),
            });
        }
        let (gl, gu) = self.gershgorin();
        let spread = (gu - gl).abs().max(f64::MIN_POSITIVE);
        let mut lo = gl - 2.0 * f64::EPSILON * spread - self.pivmin();
        let mut hi = gu + 2.0 * f64::EPSILON * spread + self.pivmin();
        let pivmin = self.pivmin();
        for _ in 0..MAX_BISECTION_STEPS {
            let tol = 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + 2.0 * pivmin;
            if hi - lo <= tol {
                return Ok(0.5 * (lo + hi));
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::NoConvergence {
            iterations: MAX_BISECTION_STEPS,
        })
    }

    /// Unit eigenvector for the (accurate) eigenvalue `lambda` by inverse
    /// iteration, kept orthogonal to every vector in `against`.
    pub fn eigenvector(&self, lambda: f64, against: &[&[f64]]) -> Vec<f64> {
        let n = self.len();
        if n == 1 {
            return vec![1.0];
        }
        let (gl, gu) = self.gershgorin();
        let scale = gl.abs().max(gu.abs()).max(f64::MIN_POSITIVE);
        let lu = ShiftedLu::factor(self, lambda, f64::EPSILON * scale);

        // deterministic start vector with no special structure
        let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (n as u64);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut x);
        for _ in 0..INVERSE_ITERATIONS {
            lu.solve(&mut x);
            orthogonalize(&mut x, against);
            normalize(&mut x);
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

fn orthogonalize(x: &mut [f64], against: &[&[f64]]) {
    for q in against {
        let c = dot(x, q);
        x.iter_mut().zip(q.iter()).for_each(|(v, qi)| *v -= c * qi);
    }
}

/// LU factorization with partial pivoting of `T - λI`.
struct ShiftedLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn factor(t: &Tridiagonal, lambda: f64, tiny: f64) -> Self {
        let n = t.len();
        let mut d: Vec<f64> = t.diag.iter().map(|v| v - lambda).collect();
        let mut du = t.off.clone();
        let mut dl = t.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n - 1];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        for v in d.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < 0.0 { -tiny } else { tiny };
            }
        }
        Self {
            d,
            du,
            du2,
            dl,
            swapped,
        }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Householder reduction `A = Q T Qᵀ` of a dense symmetric matrix.
pub struct Reduction {
    pub tridiagonal: Tridiagonal,
    n: usize,
    /// Reflector `k` acts on indices `k+1..n`; its vector (with implicit
    /// leading 1) is stored in row `k` of this buffer.
    store: Vec<f64>,
    taus: Vec<f64>,
}

impl Reduction {
    /// Reduce the row-major `n × n` symmetric matrix `a` (consumed).
    pub fn new(mut a: Vec<f64>, n: usize) -> Result<Self> {
        if n == 0 || a.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: a.len(),
            });
        }
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut taus = vec![0.0; n.saturating_sub(1)];
        let mut w = vec![0.0; n];

        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &mut head[k * n..];
            diag[k] = row_k[k];
            let x = &mut row_k[k + 1..n];

            let alpha = x[0];
            let xnorm = dot(&x[1..], &x[1..]).sqrt();
            if xnorm == 0.0 {
                off[k] = alpha;
                taus[k] = 0.0;
                x[0] = 1.0;
                continue;
            }
            let beta = -alpha.signum() * alpha.hypot(xnorm);
            let tau = (beta - alpha) / beta;
            let scale = 1.0 / (alpha - beta);
            x[1..].iter_mut().for_each(|v| *v *= scale);
            x[0] = 1.0;
            off[k] = beta;
            taus[k] = tau;
            let v: &[f64] = x;

            // p = τ S v over the trailing block S = a[k+1.., k+1..]
            let p = &mut w[..m];
            for (i, pi) in p.iter_mut().enumerate() {
                let row = &tail[i * n + k + 1..(i + 1) * n];
                *pi = tau * dot(row, v);
            }
            let kappa = 0.5 * tau * dot(p, v);
            p.iter_mut().zip(v).for_each(|(pi, vi)| *pi -= kappa * vi);
            let w_vec: &[f64] = p;

            // S -= v wᵀ + w vᵀ
            par::for_each_row(&mut tail[..m * n], n, |i, row| {
                let (vi, wi) = (v[i], w_vec[i]);
                let row = &mut row[k + 1..];
                for ((s, vj), wj) in row.iter_mut().zip(v).zip(w_vec) {
                    *s -= vi * wj + wi * vj;
                }
            });
        }
        if n >= 2 {
            diag[n - 2] = a[(n - 2) * n + n - 2];
            off[n - 2] = a[(n - 2) * n + n - 1];
        }
        diag[n - 1] = a[n * n - 1];

        Ok(Self {
            tridiagonal: Tridiagonal { diag, off },
            n,
            store: a,
            taus,
        })
    }

    /// Map an eigenvector of the tridiagonal back to the original basis.
    pub fn back_transform(&self, x: &mut [f64]) {
        let n = self.n;
        for k in (0..n.saturating_sub(2)).rev() {
            let tau = self.taus[k];
            if tau == 0.0 {
                continue;
            }
            let v = &self.store[k * n + k + 1..(k + 1) * n];
            let seg = &mut x[k + 1..];
            let c = tau * dot(v, seg);
            seg.iter_mut().zip(v).for_each(|(s, vi)| *s -= c * vi);
        }
    }
}

/// The smallest eigenpairs of a symmetric matrix, ascending, unit 2-norm vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Smallest `k` eigenpairs of the row-major symmetric `n × n` matrix `a`.
pub fn smallest_eigenpairs(a: Vec<f64>, n: usize, k: usize) -> Result<PartialEigen> {
    if k > n {
        return Err(Error::ModesOutOfRange {
            requested: k,
            available: n,
        });
    }
    let red = Reduction::new(a, n)?;
    let t = &red.tridiagonal;
    let values = (0..k)
        .map(|j| t.eigenvalue(j))
        .collect::<Result<Vec<_>>>()?;

    let (gl, gu) = t.gershgorin();
    let cluster = CLUSTER_TOL * gl.abs().max(gu.abs());
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (j, &lam) in values.iter().enumerate() {
        let against: Vec<&[f64]> = (0..j)
            .filter(|&i| (values[i] - lam).abs() <= cluster)
            .map(|i| vectors[i].as_slice())
            .collect();
        let y = t.eigenvector(lam, &against);
        vectors.push(y);
    }
    for y in vectors.iter_mut() {
        red.back_transform(y);
        normalize(y);
    }
    Ok(PartialEigen { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matvec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
        (0..n).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
    }

    fn test_matrix(n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.4 + if i == j { 2.0 } else { 0.0 };
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn tridiagonal_eigenvalues_of_laplacian() {
        let n = 50;
        let t = Tridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap();
        for k in 0..n {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            let got = t.eigenvalue(k).unwrap();
            assert!((got - exact).abs() < 1e-14 * exact.max(1.0), "k = {k}");
        }
        assert_eq!(t.count_below(-1.0), 0);
        assert_eq!(t.count_below(5.0), n);
    }

    #[test]
    fn full_spectrum_residuals_and_orthogonality() {
        let n = 40;
        let a = test_matrix(n);
        let eig = smallest_eigenpairs(a.clone(), n, n).unwrap();
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
        assert!((eig.values.iter().sum::<f64>() - trace).abs() < 1e-10);
        for (lam, v) in eig.values.iter().zip(&eig.vectors) {
            let av = matvec(&a, n, v);
            let res: f64 = av.iter().zip(v).map(|(x, y)| (x - lam * y).powi(2)).sum();
            assert!(res.sqrt() < 1e-11);
        }
        for i in 0..n {
            for j in 0..n {
                let d = dot(&eig.vectors[i], &eig.vectors[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-10, "({i}, {j}) -> {d}");
            }
        }
    }

    #[test]
    fn tiny_sizes() {
        let eig = smallest_eigenpairs(vec![3.0], 1, 1).unwrap();
        assert_eq!(eig.values, vec![3.0]);
        let eig = smallest_eigenpairs(vec![2.0, 1.0, 1.0, 2.0], 2, 2).unwrap();
        assert!((eig.values[0] - 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 3.0).abs() < 1e-15);
        assert!(smallest_eigenpairs(vec![1.0], 1, 2).is_err());
    }

    #[test]
    fn diagonal_input_is_handled() {
        let n = 5;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = (n - i) as f64;
        }
        let eig = smallest_eigenpairs(a, n, 3).unwrap();
        assert_eq!(eig.values.len(), 3);
        for (k, v) in eig.values.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-14);
        }
        assert!((eig.vectors[0][n - 1].abs() - 1.0).abs() < 1e-14);
    }
}
