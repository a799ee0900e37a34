//! Spectral propagation in the truncated eigenbasis.
//!
//! Free Schrödinger and wave evolutions are exact phase rotations of the
//! modal coefficients. The forced Schrödinger solver integrates the source
//! term in the interaction picture with the trapezoidal rule, which is the
//! only place where a time step enters.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::control::ObservationRegion;
use crate::spectrum::Spectrum;
use crate::{Error, Result};

/// Default number of forcing steps over a horizon.
pub const DEFAULT_STEPS: usize = 1000;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Expansion basis of modal coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `φ_k`, orthonormal in `L²`.
    #[default]
    L2,
    /// `θ_k = φ_k / sqrt(1 + λ_k)`, orthonormal in `H^β`.
    Energy,
}

impl Basis {
    /// Factor `c` with `basis_k = c φ_k`.
    fn scale(self, lambda: f64) -> f64 {
        match self {
            Basis::L2 => 1.0,
            Basis::Energy => 1.0 / (1.0 + lambda).sqrt(),
        }
    }
}

/// Modal coefficients `a_k` of `u(t) = Σ a_k basis_k` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState<'a> {
    spectrum: &'a Spectrum,
    coefficients: Vec<Complex64>,
    time: f64,
    basis: Basis,
}

fn check_modes(k: usize, available: usize) -> Result<()> {
    if k == 0 || k > available {
        return Err(Error::ModesOutOfRange {
            requested: k,
            available,
        });
    }
    Ok(())
}

impl<'a> ModalState<'a> {
    pub fn new(spectrum: &'a Spectrum, coefficients: Vec<Complex64>, basis: Basis) -> Result<Self> {
        check_modes(coefficients.len(), spectrum.len())?;
        if coefficients
            .iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "non-finite modal coefficient".into(),
            ));
        }
        Ok(Self {
            spectrum,
            coefficients,
            time: 0.0,
            basis,
        })
    }

    pub fn zero(spectrum: &'a Spectrum, modes: usize, basis: Basis) -> Result<Self> {
        Self::new(spectrum, vec![Complex64::new(0.0, 0.0); modes], basis)
    }

    /// The single mode `basis_k` (1-based) with unit coefficient.
    pub fn mode(spectrum: &'a Spectrum, modes: usize, k: usize, basis: Basis) -> Result<Self> {
        check_modes(k, modes)?;
        let mut s = Self::zero(spectrum, modes, basis)?;
        s.coefficients[k - 1] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn spectrum(&self) -> &'a Spectrum {
        self.spectrum
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn modes(&self) -> usize {
        self.coefficients.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time = t;
        self
    }

    fn lambda(&self, k: usize) -> f64 {
        self.spectrum.pairs()[k].lambda
    }

    /// Same function expressed in another basis.
    pub fn to_basis(&self, basis: Basis) -> ModalState<'a> {
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let l = self.lambda(k);
                a * self.basis.scale(l) / basis.scale(l)
            })
            .collect();
        ModalState {
            coefficients,
            basis,
            ..self.clone()
        }
    }

    /// Coefficients with respect to the `L²`-orthonormal `φ_k`.
    pub fn l2_coefficients(&self) -> Vec<Complex64> {
        self.to_basis(Basis::L2).coefficients
    }

    /// `Σ λ_k^p |c_k|²` over the `L²` coefficients; `p = 0` is the squared `L²` norm.
    pub fn spectral_moment(&self, p: i32) -> f64 {
        self.l2_coefficients()
            .iter()
            .enumerate()
            .map(|(k, c)| self.lambda(k).powi(p) * c.norm_sqr())
            .sum()
    }

    /// Sum of `|a_k|²` in the state's own basis.
    pub fn coefficient_norm_sqr(&self) -> f64 {
        self.coefficients.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Discrete `‖u‖²_{H^β} = Σ (1 + λ_k) |c_k|²` over the `L²` coefficients.
    pub fn energy_norm_sqr(&self) -> f64 {
        self.spectral_moment(0) + self.spectral_moment(1)
    }
}

/// Project nodal samples onto the first `modes` basis functions.
///
/// The coefficients are the ones whose [`reconstruct`] gives the spectral
/// truncation of `u0`: `⟨u0, φ_k⟩` for [`Basis::L2`] and
/// `sqrt(1 + λ_k) ⟨u0, φ_k⟩` for [`Basis::Energy`].
pub fn project_initial_datum<'a>(
    u0: &[Complex64],
    spectrum: &'a Spectrum,
    modes: usize,
    basis: Basis,
) -> Result<ModalState<'a>> {
    let n = spectrum.grid().len();
    if u0.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: u0.len(),
        });
    }
    check_modes(modes, spectrum.len())?;
    let h = spectrum.grid().spacing();
    let coefficients = spectrum.pairs()[..modes]
        .iter()
        .map(|p| {
            let ip: Complex64 = u0.iter().zip(&p.vector).map(|(u, v)| u * v).sum();
            ip * h / basis.scale(p.lambda)
        })
        .collect();
    ModalState::new(spectrum, coefficients, basis)
}

pub fn project_real_datum<'a>(
    u0: &[f64],
    spectrum: &'a Spectrum,
    modes: usize,
    basis: Basis,
) -> Result<ModalState<'a>> {
    let z: Vec<Complex64> = u0.iter().map(|&x| x.into()).collect();
    project_initial_datum(&z, spectrum, modes, basis)
}

/// Nodal values `u(x_i) = Σ_k a_k basis_k(x_i)`.
pub fn reconstruct(state: &ModalState<'_>) -> Vec<Complex64> {
    let n = state.spectrum.grid().len();
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    for (k, a) in state.coefficients.iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let p = &state.spectrum.pairs()[k];
        let c = a * state.basis.scale(p.lambda);
        u.iter_mut().zip(&p.vector).for_each(|(ui, v)| *ui += c * v);
    }
    u
}

/// Free evolution `a_k ← a_k e^{iλ_k t}` of `i u_t + (-Δ)^β u = 0`.
pub fn schrodinger_evolve<'a>(state: &ModalState<'a>, t: f64) -> ModalState<'a> {
    let coefficients = state
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, a)| a * Complex64::cis(state.lambda(k) * t))
        .collect();
    ModalState {
        coefficients,
        time: state.time + t,
        ..state.clone()
    }
}

/// Time samples of a source on the nodes of an observation region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSignal {
    dt: f64,
    /// `samples[j][r]`: value at time `j dt` on the `r`-th region node.
    samples: Vec<Vec<Complex64>>,
}

impl SourceSignal {
    pub fn new(dt: f64, samples: Vec<Vec<Complex64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidSource(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidSource(
                "need at least two time samples".into(),
            ));
        }
        let width = samples[0].len();
        if samples.iter().any(|s| s.len() != width) {
            return Err(Error::InvalidSource("ragged sample rows".into()));
        }
        Ok(Self { dt, samples })
    }

    /// Sample `f(t, r)` on `steps + 1` uniform times over `[0, horizon]`
    /// for region nodes `r = 0..width`.
    pub fn from_fn<F>(horizon: f64, steps: usize, width: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, usize) -> Complex64,
    {
        if !(horizon > 0.0) {
            return Err(Error::InvalidHorizon(horizon));
        }
        let dt = horizon / steps as f64;
        let samples = (0..=steps)
            .map(|j| {
                let t = j as f64 * dt;
                (0..width).map(|r| f(t, r)).collect()
            })
            .collect();
        Self::new(dt, samples)
    }

    pub fn zero(horizon: f64, steps: usize, width: usize) -> Result<Self> {
        Self::from_fn(horizon, steps, width, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[Vec<Complex64>] {
        &self.samples
    }

    pub fn steps(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn width(&self) -> usize {
        self.samples[0].len()
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    /// Every `factor`-th sample, i.e. the same signal at step `factor · dt`.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::InvalidSource(format!(
                "cannot decimate {} steps by {factor}",
                self.steps()
            )));
        }
        Self::new(
            self.dt * factor as f64,
            self.samples.iter().step_by(factor).cloned().collect(),
        )
    }
}

/// Solve `i u_t + (-Δ)^β u = h χ_ω` over `[0, horizon]` in the truncated basis.
///
/// Coefficients obey `a_k' = iλ_k a_k - i f_k(t)` where `f_k` is the
/// coefficient of the localized source in the state's basis. In the
/// interaction picture `c_k = e^{-iλ_k t} a_k` the source integral is taken
/// with the trapezoidal rule on the sample grid; the error is `O(dt²)`.
pub fn schrodinger_forced_evolve<'a>(
    state: &ModalState<'a>,
    source: &SourceSignal,
    region: &ObservationRegion,
    horizon: f64,
) -> Result<ModalState<'a>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidHorizon(horizon));
    }
    let spectrum = state.spectrum;
    let nodes = region.node_indices(spectrum.grid())?;
    if nodes.len() != source.width() {
        return Err(Error::InvalidSource(format!(
            "source has {} values per sample but the region has {} nodes",
            source.width(),
            nodes.len()
        )));
    }
    if ((source.duration() - horizon) / horizon).abs() > 1e-9 {
        return Err(Error::InvalidSource(format!(
            "source spans [0, {}] but the horizon is {horizon}",
            source.duration()
        )));
    }

    let h = spectrum.grid().spacing();
    let lambdas: Vec<f64> = (0..state.modes()).map(|k| state.lambda(k)).collect();
    // projection rows: coefficient of a unit source on region node r
    let proj: Vec<Vec<f64>> = lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let v = &spectrum.pairs()[k].vector;
            let c = h / state.basis.scale(l);
            nodes.iter().map(|&i| c * v[i]).collect()
        })
        .collect();

    let dt = source.dt();
    let forcing = |j: usize, k: usize| -> Complex64 {
        let t = j as f64 * dt;
        let fk: Complex64 = proj[k]
            .iter()
            .zip(&source.samples()[j])
            .map(|(p, s)| s * *p)
            .sum();
        Complex64::cis(-lambdas[k] * t) * fk
    };

    let mut c = state.coefficients.clone();
    for (k, ck) in c.iter_mut().enumerate() {
        let mut prev = forcing(0, k);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 1..=source.steps() {
            let next = forcing(j, k);
            acc += prev + next;
            prev = next;
        }
        *ck -= I * acc * (0.5 * dt);
    }
    let coefficients = c
        .iter()
        .zip(&lambdas)
        .map(|(ck, l)| ck * Complex64::cis(l * horizon))
        .collect();
    Ok(ModalState {
        coefficients,
        time: state.time + horizon,
        ..state.clone()
    })
}

/// Position and velocity coefficients of the fractional wave equation
/// `u_tt + (-Δ)^{2β} u = 0` in the `L²` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveModalState<'a> {
    spectrum: &'a Spectrum,
    position: Vec<Complex64>,
    velocity: Vec<Complex64>,
    time: f64,
}

impl<'a> WaveModalState<'a> {
    pub fn new(
        spectrum: &'a Spectrum,
        position: Vec<Complex64>,
        velocity: Vec<Complex64>,
    ) -> Result<Self> {
        check_modes(position.len(), spectrum.len())?;
        if velocity.len() != position.len() {
            return Err(Error::LengthMismatch {
                expected: position.len(),
                found: velocity.len(),
            });
        }
        if position
            .iter()
            .chain(&velocity)
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "non-finite modal coefficient".into(),
            ));
        }
        if spectrum.pairs()[..position.len()]
            .iter()
            .any(|p| !(p.lambda > 0.0))
        {
            return Err(Error::InvalidArgument(
                "wave propagation needs positive eigenvalues".into(),
            ));
        }
        Ok(Self {
            spectrum,
            position,
            velocity,
            time: 0.0,
        })
    }

    pub fn position(&self) -> &[Complex64] {
        &self.position
    }

    pub fn velocity(&self) -> &[Complex64] {
        &self.velocity
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn modes(&self) -> usize {
        self.position.len()
    }

    /// `Σ (λ_k² |a_k|² + |b_k|²)`, the discrete `‖u‖²_{H^{2β}} + ‖u_t‖²_{L²}`.
    pub fn energy(&self) -> f64 {
        self.position
            .iter()
            .zip(&self.velocity)
            .zip(self.spectrum.pairs())
            .map(|((a, b), p)| p.lambda * p.lambda * a.norm_sqr() + b.norm_sqr())
            .sum()
    }

    /// Nodal displacement `Σ a_k φ_k(x_i)`.
    pub fn displacement(&self) -> Vec<Complex64> {
        let state = ModalState {
            spectrum: self.spectrum,
            coefficients: self.position.clone(),
            time: self.time,
            basis: Basis::L2,
        };
        reconstruct(&state)
    }
}

/// Exact rotation at frequency `λ_k`, the square root of the eigenvalue
/// `λ_k²` of `(-Δ)^{2β} = ((-Δ)^β)²`.
pub fn wave_evolve<'a>(state: &WaveModalState<'a>, t: f64) -> WaveModalState<'a> {
    let mut position = Vec::with_capacity(state.modes());
    let mut velocity = Vec::with_capacity(state.modes());
    for ((a, b), p) in state
        .position
        .iter()
        .zip(&state.velocity)
        .zip(state.spectrum.pairs())
    {
        let l = p.lambda;
        let (s, c) = (l * t).sin_cos();
        position.push(a * c + b * (s / l));
        velocity.push(-a * (l * s) + b * c);
    }
    WaveModalState {
        spectrum: state.spectrum,
        position,
        velocity,
        time: state.time + t,
    }
}
