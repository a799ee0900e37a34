//! Boundary traces `u/δ^β` and the Pohozaev-type identities.
//!
//! For an `L²`-normalised eigenfunction on `(-1, 1)` the identity reads
//! `d₊² + d₋² = 2βλ / Γ(1+β)²`. Along a free Schrödinger trajectory
//! `i u_t + (-Δ)^β u = 0` it becomes
//!
//! `Γ(1+β)² ∫_0^T (|d₊|² + |d₋|²) dt = 2βT Σ λ_k |a_k|² + [Im ∫ ū x u_x]_0^T`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::simpson;
use crate::dynamics::{reconstruct, schrodinger_evolve, ModalState};
use crate::gamma::gamma;
use crate::operator::{FractionalOrder, Grid};
use crate::par::{self, Execution};
use crate::spectrum::EigenPair;
use crate::{Error, Result};

/// Nodes nearest each endpoint left out of the trace fit.
pub const SKIPPED_NODES: usize = 2;
/// Default number of time subintervals for the Pohozaev time integral.
pub const DEFAULT_QUADRATURE: usize = 256;
/// Fewest time subintervals accepted.
pub const MIN_QUADRATURE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    /// Limit of `u/δ^β` at `x = 1`.
    pub d_plus: f64,
    /// Limit of `u/δ^β` at `x = -1`.
    pub d_minus: f64,
    /// Relative RMS misfit of the layer fit, worst endpoint.
    pub fit_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexBoundaryTrace {
    pub d_plus: Complex64,
    pub d_minus: Complex64,
    pub fit_residual: f64,
}

/// Default boundary layer width `max(8, N/64)`.
pub fn default_layer(n: usize) -> usize {
    (n / 64).max(8)
}

/// Node indices of the fit layer at each end: `(left, right)`.
fn layer_indices(n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = default_layer(n);
    if n < 2 * (m + SKIPPED_NODES) {
        return Err(Error::InvalidArgument(format!(
            "grid of {n} nodes too small for a boundary layer of {m} nodes"
        )));
    }
    let left = (SKIPPED_NODES..SKIPPED_NODES + m).collect();
    let right = (SKIPPED_NODES..SKIPPED_NODES + m)
        .map(|j| n - 1 - j)
        .collect();
    Ok((left, right))
}

/// Model fitted to the boundary layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFit {
    /// `u ≈ d δ^β`.
    Leading,
    /// `u ≈ δ^β (d + e δ^β)`; the correction absorbs the first term of the
    /// expansion of `u/δ^β`, so `d` converges under refinement.
    #[default]
    Corrected,
}

/// Least-squares `d` in `u_i ≈ d w_i (+ e w_i²)`, with the relative RMS misfit.
fn fit(values: &[Complex64], weights: &[f64], model: TraceFit) -> (Complex64, f64) {
    let uu: f64 = values.iter().map(|u| u.norm_sqr()).sum();
    if uu == 0.0 {
        return (Complex64::new(0.0, 0.0), 0.0);
    }
    let dot = |f: &dyn Fn(f64) -> f64| -> Complex64 {
        values.iter().zip(weights).map(|(u, &w)| u * f(w)).sum()
    };
    let moment = |p: i32| weights.iter().map(|w| w.powi(p)).sum::<f64>();
    let (d, e) = match model {
        TraceFit::Leading => (dot(&|w| w) / moment(2), Complex64::new(0.0, 0.0)),
        TraceFit::Corrected => {
            let (a, b, c) = (moment(2), moment(3), moment(4));
            let (r1, r2) = (dot(&|w| w), dot(&|w| w * w));
            let det = a * c - b * b;
            ((r1 * c - r2 * b) / det, (r2 * a - r1 * b) / det)
        }
    };
    let misfit: f64 = values
        .iter()
        .zip(weights)
        .map(|(u, &w)| (u - d * w - e * w * w).norm_sqr())
        .sum();
    (d, (misfit / uu).sqrt())
}

fn trace_at(
    u: impl Fn(usize) -> Complex64,
    beta: FractionalOrder,
    grid: &Grid,
    model: TraceFit,
) -> Result<ComplexBoundaryTrace> {
    let n = grid.len();
    let (left, right) = layer_indices(n)?;
    let side = |idx: &[usize]| {
        let values: Vec<Complex64> = idx.iter().map(|&i| u(i)).collect();
        let weights: Vec<f64> = idx
            .iter()
            .map(|&i| grid.boundary_distance(i).powf(beta.value()))
            .collect();
        fit(&values, &weights, model)
    };
    let (d_minus, rm) = side(&left);
    let (d_plus, rp) = side(&right);
    Ok(ComplexBoundaryTrace {
        d_plus,
        d_minus,
        fit_residual: rm.max(rp),
    })
}

/// Fit `u(x_i) ≈ d δ(x_i)^β` over a layer of `max(8, N/64)` nodes at each
/// end, skipping the two nodes nearest the boundary.
pub fn boundary_trace(u: &[f64], beta: FractionalOrder, grid: &Grid) -> Result<BoundaryTrace> {
    boundary_trace_with(u, beta, grid, TraceFit::default())
}

pub fn boundary_trace_with(
    u: &[f64],
    beta: FractionalOrder,
    grid: &Grid,
    model: TraceFit,
) -> Result<BoundaryTrace> {
    check_len(u.len(), grid)?;
    let t = trace_at(|i| u[i].into(), beta, grid, model)?;
    Ok(BoundaryTrace {
        d_plus: t.d_plus.re,
        d_minus: t.d_minus.re,
        fit_residual: t.fit_residual,
    })
}

/// [`boundary_trace`] for complex nodal values.
pub fn complex_boundary_trace(
    u: &[Complex64],
    beta: FractionalOrder,
    grid: &Grid,
) -> Result<ComplexBoundaryTrace> {
    check_len(u.len(), grid)?;
    trace_at(|i| u[i], beta, grid, TraceFit::default())
}

fn check_len(len: usize, grid: &Grid) -> Result<()> {
    if len != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: len,
        });
    }
    Ok(())
}

fn gamma_sq(beta: FractionalOrder) -> f64 {
    gamma(1.0 + beta.value()).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPohozaev {
    pub index: usize,
    pub trace: BoundaryTrace,
    /// `d₊² + d₋²`.
    pub boundary: f64,
    /// `2βλ / Γ(1+β)²`.
    pub target: f64,
    pub residual: f64,
}

/// Check `d₊² + d₋² = 2βλ/Γ(1+β)²` for an `L²`-normalised eigenpair.
pub fn eigen_pohozaev_check(
    pair: &EigenPair,
    beta: FractionalOrder,
    grid: &Grid,
) -> Result<EigenPohozaev> {
    eigen_pohozaev_check_with(pair, beta, grid, TraceFit::default())
}

pub fn eigen_pohozaev_check_with(
    pair: &EigenPair,
    beta: FractionalOrder,
    grid: &Grid,
    model: TraceFit,
) -> Result<EigenPohozaev> {
    let trace = boundary_trace_with(&pair.vector, beta, grid, model)?;
    let boundary = trace.d_plus.powi(2) + trace.d_minus.powi(2);
    let target = 2.0 * beta.value() * pair.lambda / gamma_sq(beta);
    Ok(EigenPohozaev {
        index: pair.index,
        trace,
        boundary,
        target,
        residual: (boundary - target).abs() / target,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevReport {
    /// `Γ(1+β)² ∫_0^T (|d₊|² + |d₋|²) dt`.
    pub lhs_boundary: f64,
    /// `2β ∫_0^T ‖(-Δ)^{β/2} u‖² dt`.
    pub rhs_dirichlet: f64,
    /// `Im ∫ ū x u_x` at `T` minus at `0`.
    pub rhs_cross: f64,
    pub relative_residual: f64,
    /// Largest `|Im|` of the discrete cross integrand sum over both times,
    /// relative to its modulus scale. Zero for single-mode states.
    pub cross_imaginary_scale: f64,
    pub horizon: f64,
    pub quadrature_intervals: usize,
    pub max_fit_residual: f64,
}

/// `h Σ ū_i x_i (Du)_i` with centered differences inside and one-sided
/// differences at the outermost nodes.
fn cross_integral(u: &[Complex64], grid: &Grid) -> Complex64 {
    let n = u.len();
    let h = grid.spacing();
    let du = |i: usize| -> Complex64 {
        if i == 0 {
            (u[1] - u[0]) / h
        } else if i == n - 1 {
            (u[n - 1] - u[n - 2]) / h
        } else {
            (u[i + 1] - u[i - 1]) / (2.0 * h)
        }
    };
    (0..n)
        .map(|i| u[i].conj() * grid.node(i) * du(i))
        .sum::<Complex64>()
        * h
}

fn check_quadrature(m: usize) -> Result<()> {
    if m < MIN_QUADRATURE || !m.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "time quadrature needs an even number of at least {MIN_QUADRATURE} intervals, got {m}"
        )));
    }
    Ok(())
}

/// `(∫_0^T (|d₊|² + |d₋|²) dt, worst fit residual)` along the free flow.
fn boundary_time_integral(
    state0: &ModalState<'_>,
    horizon: f64,
    intervals: usize,
) -> Result<(f64, f64)> {
    let spectrum = state0.spectrum();
    let grid = spectrum.grid();
    let beta = spectrum.beta();
    let (left, right) = layer_indices(grid.len())?;
    let layer: Vec<usize> = left.iter().chain(&right).copied().collect();
    let a0 = state0.l2_coefficients();
    let local: Vec<Vec<f64>> = spectrum.pairs()[..a0.len()]
        .iter()
        .map(|p| layer.iter().map(|&i| p.vector[i]).collect())
        .collect();
    let lam = spectrum.lambdas();

    let dt = horizon / intervals as f64;
    let mut density = Vec::with_capacity(intervals + 1);
    let mut worst: f64 = 0.0;
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len()];
    for j in 0..=intervals {
        let t = j as f64 * dt;
        let mut layer_values = vec![Complex64::new(0.0, 0.0); layer.len()];
        for (k, a) in a0.iter().enumerate() {
            let c = a * Complex64::cis(lam[k] * t);
            layer_values
                .iter_mut()
                .zip(&local[k])
                .for_each(|(u, v)| *u += c * v);
        }
        for (&i, v) in layer.iter().zip(&layer_values) {
            values[i] = *v;
        }
        let tr = trace_at(|i| values[i], beta, grid, TraceFit::default())?;
        worst = worst.max(tr.fit_residual);
        density.push(tr.d_plus.norm_sqr() + tr.d_minus.norm_sqr());
    }
    Ok((simpson(&density, dt), worst))
}

/// Pohozaev report of the free Schrödinger flow from `state0` over `[0, T]`,
/// with a composite Simpson time integral on `intervals` subintervals.
pub fn schrodinger_pohozaev_report(
    state0: &ModalState<'_>,
    horizon: f64,
    intervals: usize,
) -> Result<PohozaevReport> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidHorizon(horizon));
    }
    check_quadrature(intervals)?;
    let spectrum = state0.spectrum();
    let grid = spectrum.grid();
    let beta = spectrum.beta();

    let (boundary, max_fit_residual) = boundary_time_integral(state0, horizon, intervals)?;
    let lhs_boundary = gamma_sq(beta) * boundary;
    let rhs_dirichlet = 2.0 * beta.value() * horizon * state0.spectral_moment(1);

    let start = state0.clone().with_time(0.0);
    let x0 = cross_integral(&reconstruct(&start), grid);
    let x1 = cross_integral(&reconstruct(&schrodinger_evolve(&start, horizon)), grid);
    let rhs_cross = x1.im - x0.im;
    let cross_imaginary_scale = [x0, x1]
        .iter()
        .map(|z| {
            if z.norm() == 0.0 {
                0.0
            } else {
                z.im.abs() / z.norm()
            }
        })
        .fold(0.0, f64::max);

    let rhs = rhs_dirichlet + rhs_cross;
    let scale = lhs_boundary.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok(PohozaevReport {
        lhs_boundary,
        rhs_dirichlet,
        rhs_cross,
        relative_residual: (lhs_boundary - rhs).abs() / scale,
        cross_imaginary_scale,
        horizon,
        quadrature_intervals: intervals,
        max_fit_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRatio {
    /// `∫_0^T (|d₊|² + |d₋|²) dt / ‖u0‖²_{H^β}`.
    pub ratio: f64,
    pub horizon: f64,
    pub beta: f64,
}

/// Ratio of the boundary observation to the discrete `H^β` energy
/// `Σ (1 + λ_k) |⟨u0, φ_k⟩|²` of the initial datum.
pub fn two_sided_estimate_ratio(
    state0: &ModalState<'_>,
    horizon: f64,
    intervals: usize,
) -> Result<EstimateRatio> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidHorizon(horizon));
    }
    check_quadrature(intervals)?;
    let energy = state0.energy_norm_sqr();
    if energy == 0.0 {
        return Err(Error::ZeroState);
    }
    let (boundary, _) = boundary_time_integral(state0, horizon, intervals)?;
    Ok(EstimateRatio {
        ratio: boundary / energy,
        horizon,
        beta: state0.spectrum().beta().value(),
    })
}

/// Single-mode value `2βTλ / (Γ(1+β)² (1 + λ))` of the estimate ratio.
pub fn single_mode_ratio(beta: FractionalOrder, lambda: f64, horizon: f64) -> f64 {
    2.0 * beta.value() * horizon * lambda / (gamma_sq(beta) * (1.0 + lambda))
}

/// Estimate ratios for a batch of states.
pub fn estimate_battery(
    states: &[ModalState<'_>],
    horizon: f64,
    intervals: usize,
    exec: Execution,
) -> Vec<Result<EstimateRatio>> {
    par::map(exec, states, |s| {
        two_sided_estimate_ratio(s, horizon, intervals)
    })
}
