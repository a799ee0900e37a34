//! Observability Gramians, the eigenvalue-gap sharpness experiment and HUM
//! control synthesis in the truncated eigenbasis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{schrodinger_forced_evolve, Basis, ModalState, SourceSignal, DEFAULT_STEPS};
use crate::operator::{DiscreteOperator, FractionalOrder, Grid};
use crate::par::{self, Execution};
use crate::spectrum::{compute_spectrum, Spectrum};
use crate::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const MEMBERSHIP_TOL: f64 = 1e-12;

/// Largest Gramian condition number accepted for HUM synthesis.
pub const MAX_CONDITION: f64 = 1e12;
/// Synthesis is refused when the observability constant is below this times `T`.
pub const MIN_OBSERVABILITY: f64 = 1e-12;

/// Union of disjoint closed subintervals of `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRegion {
    intervals: Vec<(f64, f64)>,
}

impl ObservationRegion {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidRegion("no intervals".into()));
        }
        for &(l, r) in &intervals {
            if !(l >= -1.0 && l < r && r <= 1.0) {
                return Err(Error::InvalidRegion(format!(
                    "interval ({l}, {r}) is not an ordered subinterval of [-1, 1]"
                )));
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if intervals.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::InvalidRegion("intervals overlap".into()));
        }
        Ok(Self { intervals })
    }

    /// The whole interval `(-1, 1)`.
    pub fn full() -> Self {
        Self {
            intervals: vec![(-1.0, 1.0)],
        }
    }

    /// `(-1, -1+ε) ∪ (1-ε, 1)`, a neighbourhood of both boundary points.
    pub fn boundary_neighbourhood(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidRegion(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        Self::new(vec![(-1.0, -1.0 + epsilon), (1.0 - epsilon, 1.0)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Zero-based indices of the grid nodes lying in the region.
    pub fn node_indices(&self, grid: &Grid) -> Result<Vec<usize>> {
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&i| {
                let x = grid.node(i);
                self.intervals
                    .iter()
                    .any(|&(l, r)| x >= l - MEMBERSHIP_TOL && x <= r + MEMBERSHIP_TOL)
            })
            .collect();
        if nodes.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(nodes)
    }

    /// The region actually seen by the discrete quadrature: the union of the
    /// grid cells `[x_i - h/2, x_i + h/2]` of member nodes, clipped to `[-1, 1]`.
    pub fn snapped(&self, grid: &Grid) -> Result<Vec<(f64, f64)>> {
        let nodes = self.node_indices(grid)?;
        let half = 0.5 * grid.spacing();
        let mut out: Vec<(f64, f64)> = Vec::new();
        let mut start = nodes[0];
        for w in nodes.windows(2) {
            if w[1] != w[0] + 1 {
                out.push((start, w[0]).into_cells(grid, half));
                start = w[1];
            }
        }
        out.push((start, *nodes.last().unwrap()).into_cells(grid, half));
        Ok(out)
    }
}

trait IntoCells {
    fn into_cells(self, grid: &Grid, half: f64) -> (f64, f64);
}

impl IntoCells for (usize, usize) {
    fn into_cells(self, grid: &Grid, half: f64) -> (f64, f64) {
        (
            (grid.node(self.0) - half).max(-1.0),
            (grid.node(self.1) + half).min(1.0),
        )
    }
}

/// `R_{jk} = h Σ_{i∈ω} φ_j(x_i) φ_k(x_i)` for the first `modes` eigenvectors.
pub fn region_mass_matrix(
    spectrum: &Spectrum,
    region: &ObservationRegion,
    modes: usize,
) -> Result<DMatrix<f64>> {
    if modes == 0 || modes > spectrum.len() {
        return Err(Error::ModesOutOfRange {
            requested: modes,
            available: spectrum.len(),
        });
    }
    let nodes = region.node_indices(spectrum.grid())?;
    let h = spectrum.grid().spacing();
    let restricted: Vec<Vec<f64>> = spectrum.pairs()[..modes]
        .iter()
        .map(|p| nodes.iter().map(|&i| p.vector[i]).collect())
        .collect();
    Ok(DMatrix::from_fn(modes, modes, |j, k| {
        h * restricted[j]
            .iter()
            .zip(&restricted[k])
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dynamics {
    Schrodinger,
    Wave,
}

/// Truncated observability Gramian.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    matrix: DMatrix<Complex64>,
    horizon: f64,
    dynamics: Dynamics,
    region: ObservationRegion,
}

impl Gramian {
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }

    pub fn region(&self) -> &ObservationRegion {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `zᴴ G z`.
    pub fn quadratic_form(&self, z: &[Complex64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                found: z.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..self.dim() {
            let row: Complex64 = (0..self.dim()).map(|k| self.matrix[(j, k)] * z[k]).sum();
            acc += z[j].conj() * row;
        }
        Ok(acc.re)
    }

    /// Largest `|G_{jk} - conj(G_{kj})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                worst = worst.max((self.matrix[(j, k)] - self.matrix[(k, j)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `λ_max / λ_min`; infinite when the Gramian is singular.
    pub fn condition_number(&self) -> f64 {
        condition(&self.eigenvalues())
    }
}

fn condition(ev: &[f64]) -> f64 {
    let lo = ev[0];
    let hi = ev[ev.len() - 1];
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidHorizon(t));
    }
    Ok(())
}

/// `∫_0^T e^{iωt} dt`, evaluated as `T e^{iωT/2} sinc(ωT/2)`.
fn exp_integral(omega: f64, t: f64) -> Complex64 {
    let half = 0.5 * omega * t;
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    Complex64::cis(half) * (t * sinc)
}

/// Observability Gramian of the free Schrödinger flow on `ω × [0, T]`.
///
/// With `u(t) = Σ a_k e^{iλ_k t} φ_k`, `aᴴ G a = ∫_0^T h Σ_{i∈ω} |u(x_i, t)|² dt`
/// holds exactly, since `G_{jk} = R_{jk} ∫_0^T e^{i(λ_k - λ_j)t} dt`.
pub fn schrodinger_gramian(
    spectrum: &Spectrum,
    region: &ObservationRegion,
    horizon: f64,
    modes: usize,
) -> Result<Gramian> {
    check_horizon(horizon)?;
    let r = region_mass_matrix(spectrum, region, modes)?;
    let lam = spectrum.lambdas();
    let matrix = DMatrix::from_fn(modes, modes, |j, k| {
        r[(j, k)] * exp_integral(lam[k] - lam[j], horizon)
    });
    Ok(Gramian {
        matrix,
        horizon,
        dynamics: Dynamics::Schrodinger,
        region: region.clone(),
    })
}

/// `∫_0^T cos(ωt) dt`.
fn cos_integral(omega: f64, t: f64) -> f64 {
    exp_integral(omega, t).re
}

/// `∫_0^T sin(ωt) dt`.
fn sin_integral(omega: f64, t: f64) -> f64 {
    exp_integral(omega, t).im
}

/// Observability Gramian of the fractional wave equation for the velocity
/// observation `∫_0^T h Σ_{i∈ω} |u_t(x_i, t)|² dt`.
///
/// Coordinates are the stacked modal data `z = (λ_k a_k ; b_k)` of
/// `u(0) = Σ a_k φ_k`, `u_t(0) = Σ b_k φ_k`, so `zᴴ z` is the energy.
pub fn wave_gramian(
    spectrum: &Spectrum,
    region: &ObservationRegion,
    horizon: f64,
    modes: usize,
) -> Result<Gramian> {
    check_horizon(horizon)?;
    let r = region_mass_matrix(spectrum, region, modes)?;
    let lam = spectrum.lambdas();
    let t = horizon;
    let mut g = DMatrix::<Complex64>::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        for k in 0..modes {
            let (a, b) = (lam[j], lam[k]);
            let (cm, cp) = (cos_integral(a - b, t), cos_integral(a + b, t));
            let ss = 0.5 * (cm - cp);
            let cc = 0.5 * (cm + cp);
            // ∫ sin(a t) cos(b t) and ∫ cos(a t) sin(b t)
            let sc = 0.5 * (sin_integral(a + b, t) + sin_integral(a - b, t));
            let cs = 0.5 * (sin_integral(a + b, t) - sin_integral(a - b, t));
            let rjk = r[(j, k)];
            // u_t = Σ_k (-p_k sin(λ_k t) + b_k cos(λ_k t)) φ_k
            g[(j, k)] = (rjk * ss).into();
            g[(j, modes + k)] = (-rjk * sc).into();
            g[(modes + j, k)] = (-rjk * cs).into();
            g[(modes + j, modes + k)] = (rjk * cc).into();
        }
    }
    Ok(Gramian {
        matrix: g,
        horizon,
        dynamics: Dynamics::Wave,
        region: region.clone(),
    })
}

/// Minimum eigenvalue of the Gramian: the best constant `c` with
/// `c ‖z‖² ≤ zᴴ G z` over the truncated span. The Gramian is positive
/// semidefinite, so negative rounding noise is reported as zero.
pub fn observability_constant(gramian: &Gramian) -> Result<f64> {
    let ev = gramian.eigenvalues();
    ev.first()
        .copied()
        .filter(|v| v.is_finite())
        .map(|v| v.max(0.0))
        .ok_or(Error::NoConvergence { iterations: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpnessRow {
    pub beta: f64,
    pub modes: usize,
    pub horizon: f64,
    pub obs_constant: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservabilityVerdict {
    /// The constant collapses as modes are added.
    Vanishing,
    /// The constant stays bounded below.
    Uniform,
    Inconclusive,
}

/// Tail ratio `const(K_max) / const(K_min)` below which the constant is vanishing.
pub const VANISHING_RATIO: f64 = 1e-2;
/// Smallest successive ratio `const(K_{i+1}) / const(K_i)` accepted as stable.
pub const STABLE_STEP_RATIO: f64 = 0.25;
/// Slack on monotone decay between successive mode counts.
pub const DECAY_SLACK: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaVerdict {
    pub beta: f64,
    /// `const(K_max) / const(K_min)`.
    pub tail_ratio: f64,
    pub monotone_decay: bool,
    pub min_step_ratio: f64,
    pub verdict: ObservabilityVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessTable {
    pub grid_size: usize,
    pub rows: Vec<SharpnessRow>,
    pub verdicts: Vec<BetaVerdict>,
}

impl SharpnessTable {
    pub fn constant(&self, beta: f64, modes: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.beta == beta && r.modes == modes)
            .map(|r| r.obs_constant)
    }

    pub fn verdict(&self, beta: f64) -> Option<&BetaVerdict> {
        self.verdicts.iter().find(|v| v.beta == beta)
    }
}

fn classify(beta: f64, constants: &[f64]) -> BetaVerdict {
    let first = constants[0];
    let last = constants[constants.len() - 1];
    let tail_ratio = last / first;
    let steps: Vec<f64> = constants.windows(2).map(|w| w[1] / w[0]).collect();
    let monotone_decay = steps.iter().all(|&s| s <= DECAY_SLACK);
    let min_step_ratio = steps.iter().cloned().fold(f64::INFINITY, f64::min);
    let verdict = if monotone_decay && tail_ratio < VANISHING_RATIO {
        ObservabilityVerdict::Vanishing
    } else if min_step_ratio >= STABLE_STEP_RATIO {
        ObservabilityVerdict::Uniform
    } else {
        ObservabilityVerdict::Inconclusive
    };
    BetaVerdict {
        beta,
        tail_ratio,
        monotone_decay,
        min_step_ratio,
        verdict,
    }
}

/// Observability constants over a `β × K` table at fixed region and horizon.
pub fn sharpness_experiment(
    betas: &[FractionalOrder],
    modes: &[usize],
    region: &ObservationRegion,
    horizon: f64,
    grid_size: usize,
    exec: Execution,
) -> Result<SharpnessTable> {
    check_horizon(horizon)?;
    if betas.is_empty() || modes.is_empty() {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    let mut modes = modes.to_vec();
    modes.sort_unstable();
    modes.dedup();
    let kmax = *modes.last().unwrap();
    let grid = Grid::new(grid_size)?;

    let per_beta = par::map(exec, betas, |&beta| -> Result<Vec<SharpnessRow>> {
        let spectrum = compute_spectrum(&DiscreteOperator::assemble(grid, beta), kmax)?;
        modes
            .iter()
            .map(|&k| {
                let g = schrodinger_gramian(&spectrum, region, horizon, k)?;
                let ev = g.eigenvalues();
                Ok(SharpnessRow {
                    beta: beta.value(),
                    modes: k,
                    horizon,
                    obs_constant: ev[0].max(0.0),
                    condition: condition(&ev),
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (beta, cells) in betas.iter().zip(per_beta) {
        let cells = cells?;
        let constants: Vec<f64> = cells.iter().map(|r| r.obs_constant).collect();
        verdicts.push(classify(beta.value(), &constants));
        rows.extend(cells);
    }
    Ok(SharpnessTable {
        grid_size,
        rows,
        verdicts,
    })
}

/// Outcome of a HUM synthesis and its verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlResult {
    /// Adjoint initial datum `y_0` in the `L²` eigenbasis.
    pub hum_coefficients: Vec<Complex64>,
    /// `h = y|_ω` sampled on the region nodes.
    pub control: SourceSignal,
    pub region_nodes: Vec<usize>,
    pub initial_norm: f64,
    /// `‖u(T)‖` of the controlled truncated state.
    pub final_state_norm: f64,
    /// Same, from the plain trapezoidal forcing quadrature.
    pub trapezoid_final_norm: f64,
    pub final_state: Vec<Complex64>,
    pub observability_constant: f64,
    pub gramian_condition: f64,
    /// `⟨Λ y_0, y_0⟩`.
    pub duality_pairing: f64,
    /// `∫_0^T ∫_ω |y|²` by time quadrature of the control samples.
    pub observed_energy: f64,
    pub identity_residual: f64,
}

/// Largest phase advance per forcing step used when verifying a control.
const VERIFY_PHASE_STEP: f64 = 5e-3;
const MAX_VERIFY_STEPS: usize = 40_000;

/// HUM control steering `u0` to rest at time `horizon` with a control on `region`.
///
/// `Λ` is represented on the truncated basis by the Schrödinger Gramian:
/// the forced solution satisfies `a(T) = e^{iλT} (a(0) - i G y_0)`, so the
/// adjoint datum is `y_0 = Λ⁻¹(-i u_0)` and the control is `y|_ω`.
pub fn hum_control(
    u0: &ModalState<'_>,
    region: &ObservationRegion,
    horizon: f64,
) -> Result<ControlResult> {
    check_horizon(horizon)?;
    let spectrum = u0.spectrum();
    let modes = u0.modes();
    let a0 = u0.l2_coefficients();
    let initial_norm = a0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();

    let gramian = schrodinger_gramian(spectrum, region, horizon, modes)?;
    let ev = gramian.eigenvalues();
    let obs = ev[0];
    let threshold = MIN_OBSERVABILITY * horizon;
    if !(obs > threshold) {
        return Err(Error::Uncontrollable {
            constant: obs,
            threshold,
        });
    }
    let cond = condition(&ev);
    if cond > MAX_CONDITION {
        return Err(Error::IllConditioned {
            condition: cond,
            limit: MAX_CONDITION,
        });
    }

    let rhs = nalgebra::DVector::from_iterator(modes, a0.iter().map(|a| -I * a));
    let y0 = match gramian.matrix.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gramian
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::IllConditioned {
                condition: f64::INFINITY,
                limit: MAX_CONDITION,
            })?,
    };
    let y0: Vec<Complex64> = y0.iter().copied().collect();

    // sample the adjoint trajectory finely enough for a fourth-order check
    let lam = spectrum.lambdas();
    let spread = lam[modes - 1] - lam[0];
    let mut steps = ((horizon * spread / VERIFY_PHASE_STEP).ceil() as usize)
        .clamp(DEFAULT_STEPS, MAX_VERIFY_STEPS);
    steps += steps % 2;

    let nodes = region.node_indices(spectrum.grid())?;
    let local: Vec<Vec<f64>> = spectrum.pairs()[..modes]
        .iter()
        .map(|p| nodes.iter().map(|&i| p.vector[i]).collect())
        .collect();
    let control = SourceSignal::from_fn(horizon, steps, nodes.len(), |t, r| {
        y0.iter()
            .zip(&lam)
            .zip(&local)
            .map(|((y, l), phi)| y * Complex64::cis(l * t) * phi[r])
            .sum()
    })?;

    let state = u0.to_basis(Basis::L2).with_time(0.0);
    let fine = schrodinger_forced_evolve(&state, &control, region, horizon)?;
    let coarse = schrodinger_forced_evolve(&state, &control.decimate(2)?, region, horizon)?;
    // Richardson extrapolation of the trapezoidal forcing quadrature
    let final_state: Vec<Complex64> = fine
        .coefficients()
        .iter()
        .zip(coarse.coefficients())
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect();
    let norm = |v: &[Complex64]| v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let final_state_norm = norm(&final_state);
    let trapezoid_final_norm = norm(fine.coefficients());

    let duality_pairing = gramian.quadratic_form(&y0)?;
    let h = spectrum.grid().spacing();
    let density: Vec<f64> = control
        .samples()
        .iter()
        .map(|row| h * row.iter().map(|v| v.norm_sqr()).sum::<f64>())
        .collect();
    let observed_energy = simpson(&density, control.dt());
    let identity_residual = relative_difference(duality_pairing, observed_energy);

    Ok(ControlResult {
        hum_coefficients: y0,
        control,
        region_nodes: nodes,
        initial_norm,
        final_state_norm,
        trapezoid_final_norm,
        final_state,
        observability_constant: obs,
        gramian_condition: cond,
        duality_pairing,
        observed_energy,
        identity_residual,
    })
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Composite Simpson rule over uniformly spaced samples (odd count);
/// an even count falls back to Simpson on all but the last interval plus a
/// trapezoid there.
pub fn simpson(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * dx * (values[0] + values[1]),
        _ if n.is_multiple_of(2) => {
            simpson(&values[..n - 1], dx) + 0.5 * dx * (values[n - 2] + values[n - 1])
        }
        _ => {
            let mut acc = values[0] + values[n - 1];
            for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
                acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            acc * dx / 3.0
        }
    }
}

/// `T_0 = 2 P d` for `Ω = (-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinTimeEstimate {
    pub t0: f64,
    pub poincare_constant: f64,
    pub diameter: f64,
}

/// Minimal control time estimate on `(-1, 1)`; the Poincaré constant
/// defaults to `diameter / π`.
pub fn min_time_estimate(poincare: Option<f64>) -> Result<MinTimeEstimate> {
    let diameter = 2.0;
    let p = poincare.unwrap_or(diameter / PI);
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Poincaré constant must be positive, got {p}"
        )));
    }
    Ok(MinTimeEstimate {
        t0: 2.0 * p * diameter,
        poincare_constant: p,
        diameter,
    })
}
