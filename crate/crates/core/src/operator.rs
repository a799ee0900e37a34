//! Fractional centered-difference discretization of the restricted
//! fractional Laplacian on a uniform grid of `(-1, 1)`.
//!
//! The operator acts on interior nodal values; the exterior is identically
//! zero, so the infinite Toeplitz stencil is simply truncated to an
//! `N × N` symmetric Toeplitz matrix with first row `h^{-2β} g_j`.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::gamma::gamma;
use crate::{Error, Result};

/// Exponent β of `(-Δ)^β`, restricted to `0 < β ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta <= 1.0 {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidOrder(beta))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `β = 1`, the classical Laplacian.
    pub fn is_classical(self) -> bool {
        self.0 == 1.0
    }

    /// Whether the eigenvalue gap stays uniformly positive, `β ≥ 1/2`.
    pub fn has_uniform_gap(self) -> bool {
        self.0 >= 0.5
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(b: FractionalOrder) -> f64 {
        b.0
    }
}

/// Uniform grid of `n_interior` nodes strictly inside `(-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n_interior: usize,
    h: f64,
}

impl Grid {
    pub fn new(n_interior: usize) -> Result<Self> {
        if n_interior == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self {
            n_interior,
            h: 2.0 / (n_interior as f64 + 1.0),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_interior
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Coordinate of the zero-based node `i`, i.e. `x = -1 + (i + 1) h`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        -1.0 + (i as f64 + 1.0) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_interior).map(|i| self.node(i)).collect()
    }

    /// `δ(x_i) = 1 - |x_i|`, computed from node counts to avoid cancellation.
    #[inline]
    pub fn boundary_distance(&self, i: usize) -> f64 {
        let from_left = i + 1;
        let from_right = self.n_interior - i;
        from_left.min(from_right) as f64 * self.h
    }

    /// Discrete `L²(-1, 1)` inner product `h Σ conj(v_i) u_i`.
    pub fn inner(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        let s: Complex64 = u.iter().zip(v).map(|(a, b)| b.conj() * a).sum();
        s * self.h
    }

    pub fn norm(&self, u: &[Complex64]) -> f64 {
        (self.h * u.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }
}

/// Value of the constant `c_{n,s}` in front of the singular integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationConstant(pub f64);

/// `c_{n,s} = s 2^{2s} Γ((n+2s)/2) / (π^{n/2} Γ(1-s))`, for `n = 1` and `0 < s < 1`.
pub fn normalization_constant(beta: FractionalOrder, n: usize) -> Result<NormalizationConstant> {
    if n != 1 {
        return Err(Error::UnsupportedDimension(n));
    }
    let s = beta.value();
    if s >= 1.0 {
        return Err(Error::GammaPole(s));
    }
    let nf = n as f64;
    let value =
        s * 2f64.powf(2.0 * s) * gamma((nf + 2.0 * s) / 2.0) / (PI.powf(nf / 2.0) * gamma(1.0 - s));
    Ok(NormalizationConstant(value))
}

/// Coefficients `g_0..g_{count-1}` of the generating symbol `|2 sin(θ/2)|^{2β}`.
pub fn centered_difference_weights(beta: FractionalOrder, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "weight count must be at least 2, got {count}"
        )));
    }
    Ok(weights_unchecked(beta.value(), count))
}

fn weights_unchecked(b: f64, count: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(count);
    let mut cur = gamma(2.0 * b + 1.0) / gamma(b + 1.0).powi(2);
    for j in 0..count {
        g.push(cur);
        let jf = j as f64;
        cur *= (jf - b) / (jf + b + 1.0);
    }
    g
}

/// Generating symbol `|2 sin(θ/2)|^{2β}` of the centered-difference weights.
pub fn symbol(beta: FractionalOrder, theta: f64) -> f64 {
    (2.0 * (0.5 * theta).sin()).abs().powf(2.0 * beta.value())
}

/// Symmetric Toeplitz discretization of `(-Δ)^β` with zero exterior data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteOperator {
    grid: Grid,
    beta: FractionalOrder,
    first_row: Vec<f64>,
}

impl DiscreteOperator {
    pub fn assemble(grid: Grid, beta: FractionalOrder) -> Self {
        let n = grid.len();
        let scale = grid.spacing().powf(-2.0 * beta.value());
        let mut first_row = weights_unchecked(beta.value(), n.max(2));
        first_row.truncate(n);
        first_row.iter_mut().for_each(|w| *w *= scale);
        Self {
            grid,
            beta,
            first_row,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn beta(&self) -> FractionalOrder {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    /// Weights `w_j = A_{i, i+j}`.
    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.first_row[i.abs_diff(j)]
    }

    /// Row-major dense copy of the matrix.
    pub fn dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = self.entry(i, j);
            }
        }
        a
    }

    /// Upper bound on the spectral norm (the maximum absolute row sum,
    /// attained in the middle row of a symmetric Toeplitz matrix).
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        let mid = n / 2;
        (0..n).map(|j| self.first_row[mid.abs_diff(j)].abs()).sum()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }

    /// Direct O(N²) matrix-vector product.
    pub fn apply<T>(&self, u: &[T]) -> Result<Vec<T>>
    where
        T: Copy + Zero + Add<Output = T> + Mul<f64, Output = T>,
    {
        self.check_len(u.len())?;
        let n = self.dim();
        let w = &self.first_row;
        Ok((0..n)
            .map(|i| {
                u.iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (j, &uj)| acc + uj * w[i.abs_diff(j)])
            })
            .collect())
    }

    /// Matrix-vector product through circulant embedding and FFT, O(N log N).
    pub fn apply_fast(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(u.len())?;
        let n = self.dim();
        let len = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);

        let mut col = vec![Complex64::zero(); len];
        col[0] = self.first_row[0].into();
        for j in 1..n {
            col[j] = self.first_row[j].into();
            col[len - j] = self.first_row[j].into();
        }
        let mut x = vec![Complex64::zero(); len];
        x[..n].copy_from_slice(u);

        fwd.process(&mut col);
        fwd.process(&mut x);
        x.iter_mut().zip(&col).for_each(|(a, b)| *a *= b);
        inv.process(&mut x);
        let scale = 1.0 / len as f64;
        Ok(x[..n].iter().map(|z| z * scale).collect())
    }

    pub fn apply_fast_real(&self, u: &[f64]) -> Result<Vec<f64>> {
        let z: Vec<Complex64> = u.iter().map(|&x| x.into()).collect();
        Ok(self.apply_fast(&z)?.into_iter().map(|z| z.re).collect())
    }

    /// `h vᴴ A u`, the discrete analogue of `∫ conj(v) (-Δ)^β u dx`.
    pub fn quadratic_form(&self, u: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
        self.check_len(v.len())?;
        let au = self.apply(u)?;
        Ok(self.grid.inner(&au, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn order(b: f64) -> FractionalOrder {
        FractionalOrder::new(b).unwrap()
    }

    #[test]
    fn order_range() {
        assert!(FractionalOrder::new(0.0).is_err());
        assert!(FractionalOrder::new(1.2).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(FractionalOrder::new(1.0).unwrap().is_classical());
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(3).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.nodes(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(g.boundary_distance(0), 0.5);
        assert_eq!(g.boundary_distance(2), 0.5);
        assert!(Grid::new(0).is_err());
        let g = Grid::new(1023).unwrap();
        assert_relative_eq!(g.spacing() * 1024.0, 2.0, max_relative = 1e-15);
        assert!(g.node(0) > -1.0 && g.node(1022) < 1.0);
    }

    #[test]
    fn normalization_constant_values() {
        let c = normalization_constant(order(0.5), 1).unwrap().0;
        assert_relative_eq!(c, 1.0 / PI, max_relative = 1e-13);
        let c = normalization_constant(order(0.25), 1).unwrap().0;
        assert_relative_eq!(c, 2f64.sqrt() / (4.0 * PI.sqrt()), max_relative = 1e-13);
        let c = normalization_constant(order(0.75), 1).unwrap().0;
        assert_relative_eq!(c, 0.29921, max_relative = 2e-5);
    }

    #[test]
    fn normalization_constant_rejects() {
        assert_eq!(
            normalization_constant(order(1.0), 1),
            Err(Error::GammaPole(1.0))
        );
        assert_eq!(
            normalization_constant(order(0.5), 2),
            Err(Error::UnsupportedDimension(2))
        );
    }

    #[test]
    fn classical_weights() {
        let g = centered_difference_weights(order(1.0), 4).unwrap();
        assert_eq!(g, vec![2.0, -1.0, 0.0, 0.0]);
        assert!(centered_difference_weights(order(0.5), 1).is_err());
    }

    #[test]
    fn half_order_weights() {
        let g = centered_difference_weights(order(0.5), 3).unwrap();
        assert_relative_eq!(g[0], 4.0 / PI, max_relative = 1e-13);
        assert_relative_eq!(g[1], -4.0 / (3.0 * PI), max_relative = 1e-13);
        assert_relative_eq!(g[2], -4.0 / (15.0 * PI), max_relative = 1e-13);
    }

    #[test]
    fn weight_sign_pattern() {
        for i in 1..10 {
            let g = centered_difference_weights(order(i as f64 / 10.0), 65).unwrap();
            assert!(g[0] > 0.0);
            assert!(g[1..].iter().all(|&w| w < 0.0), "beta = 0.{i}");
        }
    }

    #[test]
    fn two_sided_partial_sums_decrease_to_zero() {
        let g = centered_difference_weights(order(0.5), 1 << 14).unwrap();
        let partial = |m: usize| g[0] + 2.0 * g[1..m].iter().sum::<f64>();
        let sums: Vec<f64> = [16, 256, 4096, 16384].iter().map(|&m| partial(m)).collect();
        assert!(sums.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        assert!(sums[3] < 1e-3);
    }

    #[test]
    fn assemble_classical() {
        let op = DiscreteOperator::assemble(Grid::new(3).unwrap(), order(1.0));
        assert_eq!(
            op.dense(),
            vec![8.0, -4.0, 0.0, -4.0, 8.0, -4.0, 0.0, -4.0, 8.0]
        );
    }

    #[test]
    fn assemble_half() {
        let op = DiscreteOperator::assemble(Grid::new(3).unwrap(), order(0.5));
        let r = op.first_row();
        assert_relative_eq!(r[0], 8.0 / PI, max_relative = 1e-13);
        assert_relative_eq!(r[1], -8.0 / (3.0 * PI), max_relative = 1e-13);
        assert_relative_eq!(r[2], -8.0 / (15.0 * PI), max_relative = 1e-13);
        let a = op.dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i * 3 + j], a[j * 3 + i]);
                assert_eq!(a[i * 3 + j], r[i.abs_diff(j)]);
            }
        }
    }

    #[test]
    fn single_node_operator() {
        let op = DiscreteOperator::assemble(Grid::new(1).unwrap(), order(0.3));
        assert_eq!(op.first_row().len(), 1);
        assert!(op.first_row()[0] > 0.0);
    }

    #[test]
    fn apply_classical_sine_mode() {
        let n = 31;
        let grid = Grid::new(n).unwrap();
        let op = DiscreteOperator::assemble(grid, order(1.0));
        let h = grid.spacing();
        let u: Vec<f64> = (0..n)
            .map(|i| (PI * (i + 1) as f64 / (n + 1) as f64).sin())
            .collect();
        let lam = 2.0 / (h * h) * (1.0 - (PI / (n + 1) as f64).cos());
        let au = op.apply(&u).unwrap();
        for (a, x) in au.iter().zip(&u) {
            assert_relative_eq!(*a, lam * x, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn apply_zero_and_mismatch() {
        let op = DiscreteOperator::assemble(Grid::new(8).unwrap(), order(0.4));
        assert!(op.apply(&[0.0; 8]).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(
            op.apply(&[0.0; 7]),
            Err(Error::LengthMismatch {
                expected: 8,
                found: 7
            })
        );
        assert!(op
            .quadratic_form(&[Complex64::zero(); 8], &[Complex64::zero(); 9])
            .is_err());
    }

    #[test]
    fn fast_apply_matches_direct() {
        let n = 300;
        let op = DiscreteOperator::assemble(Grid::new(n).unwrap(), order(0.35));
        let u: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let direct = op.apply(&u).unwrap();
        let fast = op.apply_fast(&u).unwrap();
        let err: f64 = direct
            .iter()
            .zip(&fast)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let scale: f64 = direct.iter().map(|a| a.norm_sqr()).sum();
        assert!((err / scale).sqrt() < 1e-12);
    }

    #[test]
    fn classical_quadratic_form_is_rayleigh_quotient() {
        let n = 63;
        let grid = Grid::new(n).unwrap();
        let op = DiscreteOperator::assemble(grid, order(1.0));
        let mut u: Vec<Complex64> = (0..n)
            .map(|i| (PI * (i + 1) as f64 / (n + 1) as f64).sin().into())
            .collect();
        let nrm = grid.norm(&u);
        u.iter_mut().for_each(|z| *z /= nrm);
        let h = grid.spacing();
        let lam = 2.0 / (h * h) * (1.0 - (PI / (n + 1) as f64).cos());
        let q = op.quadratic_form(&u, &u).unwrap();
        assert_relative_eq!(q.re, lam, max_relative = 1e-12);
        assert!(q.im.abs() < 1e-12);
    }
}
