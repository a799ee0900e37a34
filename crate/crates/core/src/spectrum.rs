//! Discrete spectrum of the fractional operator and spectral diagnostics.
//!
//! The Toeplitz matrix commutes with the exchange matrix `J`, so its
//! eigenvectors are either even (`Jv = v`) or odd (`Jv = -v`). The
//! eigenproblem is split into two half-size symmetric problems, which cuts
//! the cost of the dense reduction by a factor of four.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::linalg::smallest_eigenpairs;
use crate::operator::{DiscreteOperator, FractionalOrder, Grid};
use crate::par::{self, Execution};
use crate::{Error, Result};

/// Residual bound `‖Av - λv‖ ≤ RESIDUAL_TOL ‖A‖` enforced on every pair.
pub const RESIDUAL_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    /// 1-based mode number.
    pub index: usize,
    pub lambda: f64,
    /// Nodal values normalized so that `h Σ v_i² = 1`.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    beta: FractionalOrder,
    grid: Grid,
    pairs: Vec<EigenPair>,
    warnings: Vec<String>,
}

impl Spectrum {
    pub fn beta(&self) -> FractionalOrder {
        self.beta
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    /// Pair for the 1-based mode `k`.
    pub fn pair(&self, k: usize) -> &EigenPair {
        &self.pairs[k - 1]
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// `θ_k = φ_k / sqrt(1 + λ_k)`, orthonormal in the discrete `H^β` inner product.
    pub fn energy_normalized(&self, k: usize) -> Vec<f64> {
        let p = self.pair(k);
        let s = 1.0 / (1.0 + p.lambda).sqrt();
        p.vector.iter().map(|v| v * s).collect()
    }

    /// Numerical ties detected while ordering the spectrum.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Keep only the first `modes` pairs.
    pub fn truncated(&self, modes: usize) -> Result<Spectrum> {
        check_modes(modes, self.len())?;
        Ok(Spectrum {
            beta: self.beta,
            grid: self.grid,
            pairs: self.pairs[..modes].to_vec(),
            warnings: self.warnings.clone(),
        })
    }
}

fn check_modes(requested: usize, available: usize) -> Result<()> {
    if requested == 0 || requested > available {
        return Err(Error::ModesOutOfRange {
            requested,
            available,
        });
    }
    Ok(())
}

/// Even and odd half-size blocks of a symmetric centrosymmetric Toeplitz matrix.
fn parity_blocks(w: &[f64]) -> [(Vec<f64>, usize); 2] {
    let n = w.len();
    let m = n / 2;
    let odd_len = n % 2 == 1;
    let es = if odd_len { m + 1 } else { m };
    let mut even = vec![0.0; es * es];
    let mut odd = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let direct = w[i.abs_diff(j)];
            let mirrored = w[n - 1 - i - j];
            even[i * es + j] = direct + mirrored;
            odd[i * m + j] = direct - mirrored;
        }
    }
    if odd_len {
        for i in 0..m {
            let c = SQRT_2 * w[m - i];
            even[i * es + m] = c;
            even[m * es + i] = c;
        }
        even[m * es + m] = w[0];
    }
    [(even, es), (odd, m)]
}

fn unfold(x: &[f64], n: usize, even: bool) -> Vec<f64> {
    let m = n / 2;
    let sign = if even { 1.0 } else { -1.0 };
    let mut v = vec![0.0; n];
    for i in 0..m {
        v[i] = x[i] * FRAC_1_SQRT_2;
        v[n - 1 - i] = sign * x[i] * FRAC_1_SQRT_2;
    }
    if n % 2 == 1 && even {
        v[m] = x[m];
    }
    v
}

/// First `modes` eigenpairs of `op`, ascending, with `h Σ φ² = 1` and a
/// non-negative value at the first node where the eigenvector is nonzero.
pub fn compute_spectrum(op: &DiscreteOperator, modes: usize) -> Result<Spectrum> {
    let n = op.dim();
    check_modes(modes, n)?;
    let grid = *op.grid();

    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(2 * modes);
    for (parity, (block, size)) in parity_blocks(op.first_row()).into_iter().enumerate() {
        if size == 0 {
            continue;
        }
        let want = modes.min(size);
        let eig = smallest_eigenpairs(block, size, want)?;
        for (lam, x) in eig.values.into_iter().zip(eig.vectors) {
            candidates.push((lam, unfold(&x, n, parity == 0)));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(modes);

    let norm_a = op.norm_bound();
    let scale = 1.0 / grid.spacing().sqrt();
    let mut pairs = Vec::with_capacity(modes);
    for (idx, (lambda, mut v)) in candidates.into_iter().enumerate() {
        let av = op.apply(&v)?;
        let res = av
            .iter()
            .zip(&v)
            .map(|(a, x)| (a - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if !(res <= RESIDUAL_TOL * norm_a) {
            return Err(Error::InaccurateEigenpair {
                index: idx + 1,
                residual: res / norm_a,
            });
        }
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * vmax) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        v.iter_mut().for_each(|x| *x *= scale);
        pairs.push(EigenPair {
            index: idx + 1,
            lambda,
            vector: v,
        });
    }

    let mut warnings = Vec::new();
    for w in pairs.windows(2) {
        let tol = TIE_TOL * w[0].lambda.abs().max(w[1].lambda.abs());
        if w[1].lambda - w[0].lambda <= tol {
            warnings.push(format!(
                "numerical tie between modes {} and {} (λ = {:e})",
                w[0].index, w[1].index, w[0].lambda
            ));
        }
    }

    Ok(Spectrum {
        beta: op.beta(),
        grid,
        pairs,
        warnings,
    })
}

/// Assemble and solve for every `(β, N)` cell.
pub fn compute_spectra(
    cells: &[(FractionalOrder, usize)],
    modes: usize,
    exec: Execution,
) -> Result<Vec<Spectrum>> {
    par::map(exec, cells, |&(beta, n)| {
        let op = DiscreteOperator::assemble(Grid::new(n)?, beta);
        compute_spectrum(&op, modes)
    })
    .into_iter()
    .collect()
}

/// Main term of the eigenvalue asymptotics, `(kπ/2 - (2-2β)π/8)^{2β}`.
pub fn asymptotic_eigenvalue(beta: FractionalOrder, k: usize) -> f64 {
    let b = beta.value();
    (k as f64 * PI / 2.0 - (2.0 - 2.0 * b) * PI / 8.0).powf(2.0 * b)
}

/// Where eigenvalues for a diagnostic come from.
#[derive(Debug, Clone, Copy)]
pub enum EigenSource<'a> {
    Numeric(&'a Spectrum),
    Asymptotic(FractionalOrder),
}

impl EigenSource<'_> {
    fn beta(&self) -> FractionalOrder {
        match self {
            EigenSource::Numeric(s) => s.beta(),
            EigenSource::Asymptotic(b) => *b,
        }
    }

    fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        match self {
            EigenSource::Numeric(s) => {
                check_modes(count, s.len())?;
                Ok(s.pairs()[..count].iter().map(|p| p.lambda).collect())
            }
            EigenSource::Asymptotic(b) => {
                Ok((1..=count).map(|k| asymptotic_eigenvalue(*b, k)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapVerdict {
    UniformGap,
    VanishingGap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// `gaps[k-1] = λ_{k+1} - λ_k`.
    pub gaps: Vec<f64>,
    pub inf_gap_estimate: f64,
    pub verdict: GapVerdict,
    /// Least-squares slope of `log gap` against `log k` (numeric source only).
    pub log_slope: Option<f64>,
    /// 1-based indices `k` with `λ_{k+1} ≈ λ_k`.
    pub ties: Vec<usize>,
}

/// Slope below which a numeric gap sequence counts as vanishing.
pub const VANISHING_SLOPE: f64 = -0.05;

/// Gap sequence of the first `count` eigenvalues and the uniform/vanishing verdict.
pub fn gap_sequence(source: EigenSource<'_>, count: usize) -> Result<GapReport> {
    if count < 2 {
        return Err(Error::InvalidArgument(format!(
            "gap sequence needs at least 2 eigenvalues, got {count}"
        )));
    }
    let lambdas = source.eigenvalues(count)?;
    let gaps: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0]).collect();
    let ties: Vec<usize> = lambdas
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] <= TIE_TOL * w[1].abs())
        .map(|(i, _)| i + 1)
        .collect();

    let (verdict, log_slope) = match source {
        EigenSource::Asymptotic(b) => {
            let v = if b.has_uniform_gap() {
                GapVerdict::UniformGap
            } else {
                GapVerdict::VanishingGap
            };
            (v, None)
        }
        EigenSource::Numeric(_) => {
            let slope = log_log_slope(&gaps);
            let v = if !ties.is_empty() || slope < VANISHING_SLOPE {
                GapVerdict::VanishingGap
            } else {
                GapVerdict::UniformGap
            };
            (v, Some(slope))
        }
    };
    let inf_gap_estimate = match verdict {
        GapVerdict::UniformGap => gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        GapVerdict::VanishingGap => 0.0,
    };
    Ok(GapReport {
        gaps,
        inf_gap_estimate,
        verdict,
        log_slope,
        ties,
    })
}

fn log_log_slope(gaps: &[f64]) -> f64 {
    if gaps.len() < 2 {
        return 0.0;
    }
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .map(|(i, g)| (((i + 1) as f64).ln(), g.max(f64::MIN_POSITIVE).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummabilityReport {
    pub exponent_d: f64,
    /// `2βd`, the p-series exponent of the tail.
    pub tail_exponent: f64,
    /// `partial_sums[K-1] = Σ_{k≤K} λ_k^{-d}`.
    pub partial_sums: Vec<f64>,
    /// Asymptotic estimate of `Σ_{k>K} λ_k^{-d}`; infinite when divergent.
    pub tail_estimate: f64,
    pub converges: bool,
}

/// Partial sums of `Σ λ_k^{-d}` plus the tail predicted by the asymptotic law.
pub fn trace_summability(
    source: EigenSource<'_>,
    d: f64,
    count: usize,
) -> Result<SummabilityReport> {
    if !(d >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "summability exponent must be at least 1, got {d}"
        )));
    }
    check_modes(count, usize::MAX)?;
    let lambdas = source.eigenvalues(count)?;
    let mut acc = 0.0;
    let partial_sums = lambdas
        .iter()
        .map(|l| {
            acc += l.powf(-d);
            acc
        })
        .collect();
    let b = source.beta().value();
    let p = 2.0 * b * d;
    let converges = p > 1.0;
    let tail_estimate = if converges {
        // ∫_{K+1/2}^∞ (kπ/2 - c)^{-p} dk
        let c = (2.0 - 2.0 * b) * PI / 8.0;
        let u = (count as f64 + 0.5) * PI / 2.0 - c;
        2.0 / PI * u.powf(1.0 - p) / (p - 1.0)
    } else {
        f64::INFINITY
    };
    Ok(SummabilityReport {
        exponent_d: d,
        tail_exponent: p,
        partial_sums,
        tail_estimate,
        converges,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupNormReport {
    pub mode: usize,
    pub grid_sizes: Vec<usize>,
    pub sup_norms: Vec<f64>,
    /// Relative change between the two finest levels.
    pub finest_change: f64,
    pub bounded: bool,
}

/// Relative change allowed between the two finest levels for a "bounded" verdict.
pub const SUP_NORM_TOL: f64 = 0.05;

/// `max_i |φ_k(x_i)|` of the L²-normalized k-th eigenvector over refinements.
pub fn sup_norm_diagnostic(
    beta: FractionalOrder,
    k: usize,
    grid_sizes: &[usize],
    exec: Execution,
) -> Result<SupNormReport> {
    if grid_sizes.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "sup-norm diagnostic needs at least 3 refinement levels, got {}",
            grid_sizes.len()
        )));
    }
    let mut sizes = grid_sizes.to_vec();
    sizes.sort_unstable();
    let cells: Vec<_> = sizes.iter().map(|&n| (beta, n)).collect();
    let spectra = compute_spectra(&cells, k, exec)?;
    let sup_norms: Vec<f64> = spectra
        .iter()
        .map(|s| s.pair(k).vector.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let l = sup_norms.len();
    let finest_change = ((sup_norms[l - 1] - sup_norms[l - 2]) / sup_norms[l - 1]).abs();
    Ok(SupNormReport {
        mode: k,
        grid_sizes: sizes,
        sup_norms,
        finest_change,
        bounded: finest_change < SUP_NORM_TOL,
    })
}
