//! One function per subcommand. Each computes its results and hands every
//! artifact to the shared [`Writer`].

use fraclab::control::{
    hum_control, min_time_estimate, observability_constant, schrodinger_gramian,
    sharpness_experiment, wave_gramian, BetaVerdict, MinTimeEstimate, ObservationRegion,
};
use fraclab::dynamics::{
    reconstruct, schrodinger_evolve, wave_evolve, Basis, ModalState, WaveModalState,
};
use fraclab::gamma::gamma;
use fraclab::identity::{
    eigen_pohozaev_check, estimate_battery, schrodinger_pohozaev_report, single_mode_ratio,
    two_sided_estimate_ratio, EstimateRatio, PohozaevReport,
};
use fraclab::operator::FractionalOrder;
use fraclab::par::{self, Execution};
use fraclab::spectrum::{
    asymptotic_eigenvalue, compute_spectra, gap_sequence, EigenSource, GapReport, Spectrum,
};
use fraclab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Command, InitialState, RunConfig};
use crate::output::{num, Writer};
use crate::svg::{LinePlot, Series};
use crate::CliError;

/// Time rows kept in the optional control CSV.
const CONTROL_CSV_ROWS: usize = 512;

pub fn execute(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    match cfg.command {
        Command::Spectrum => spectrum(cfg, w, exec),
        Command::Gaps => gaps(cfg, w, exec),
        Command::Evolve => evolve(cfg, w),
        Command::Observability => observability(cfg, w, exec),
        Command::Sharpness => sharpness(cfg, w, exec),
        Command::Hum => hum(cfg, w),
        Command::Pohozaev => pohozaev(cfg, w, exec),
        Command::Sweep => sweep(cfg, w, exec),
    }
}

fn order(b: f64) -> Result<FractionalOrder, CliError> {
    Ok(FractionalOrder::new(b)?)
}

fn tag(beta: f64, n: usize) -> String {
    format!("beta{beta}_n{n}")
}

fn spectra(cfg: &RunConfig, exec: Execution) -> Result<Vec<Spectrum>, CliError> {
    let mut cells = Vec::new();
    for &b in &cfg.betas {
        for &n in &cfg.grid_sizes {
            cells.push((order(b)?, n));
        }
    }
    Ok(compute_spectra(&cells, cfg.max_modes(), exec)?)
}

fn single_spectrum(cfg: &RunConfig) -> Result<Spectrum, CliError> {
    let mut s = spectra(cfg, Execution::Sequential)?;
    Ok(s.remove(0))
}

fn region(cfg: &RunConfig) -> Result<ObservationRegion, CliError> {
    Ok(ObservationRegion::boundary_neighbourhood(cfg.epsilon)?)
}

fn random_coefficients(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn initial_state<'a>(
    cfg: &RunConfig,
    spectrum: &'a Spectrum,
    rng: &mut ChaCha8Rng,
) -> Result<ModalState<'a>, CliError> {
    let k = cfg.max_modes();
    Ok(match cfg.initial {
        InitialState::Random => ModalState::new(spectrum, random_coefficients(rng, k), cfg.basis)?,
        InitialState::Zero => ModalState::zero(spectrum, k, cfg.basis)?,
        InitialState::Mode(j) => ModalState::mode(spectrum, k, j, cfg.basis)?,
    })
}

fn eigen_rows(s: &Spectrum, rows: usize) -> Vec<Vec<String>> {
    let beta = s.beta();
    let lam = s.lambdas();
    let k_max = lam.len();
    (1..=rows)
        .map(|k| {
            let gap = |v: f64| if k < k_max { num(v) } else { String::new() };
            vec![
                k.to_string(),
                num(lam[k - 1]),
                num(asymptotic_eigenvalue(beta, k)),
                gap(if k < k_max { lam[k] - lam[k - 1] } else { 0.0 }),
                gap(asymptotic_eigenvalue(beta, k + 1) - asymptotic_eigenvalue(beta, k)),
            ]
        })
        .collect()
}

const EIGEN_HEADER: [&str; 5] = [
    "k",
    "lambda_numeric",
    "lambda_asymptotic",
    "gap_numeric",
    "gap_asymptotic",
];

#[derive(Serialize)]
struct SpectrumCell {
    beta: f64,
    n: usize,
    modes: usize,
    warnings: Vec<String>,
}

fn spectrum(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let all = spectra(cfg, exec)?;
    let mut cells = Vec::new();
    for s in &all {
        let (b, n) = (s.beta().value(), s.grid().len());
        w.csv(
            &format!("spectrum_{}.csv", tag(b, n)),
            &EIGEN_HEADER,
            &eigen_rows(s, s.len()),
        )?;
        let lam = s.lambdas();
        let plot = LinePlot {
            title: format!("First {} eigenvalues, beta = {b}, N = {n}", lam.len()),
            x_label: "k".into(),
            y_label: "lambda_k".into(),
            series: vec![
                Series {
                    name: "numeric".into(),
                    points: lam
                        .iter()
                        .enumerate()
                        .map(|(i, l)| ((i + 1) as f64, *l))
                        .collect(),
                    dashed: false,
                },
                Series {
                    name: "asymptotic".into(),
                    points: (1..=lam.len())
                        .map(|k| (k as f64, asymptotic_eigenvalue(s.beta(), k)))
                        .collect(),
                    dashed: true,
                },
            ],
        };
        w.write(
            &format!("spectrum_{}.svg", tag(b, n)),
            plot.render(w.timestamp()).as_bytes(),
        )?;
        cells.push(SpectrumCell {
            beta: b,
            n,
            modes: lam.len(),
            warnings: s.warnings().to_vec(),
        });
    }
    w.json("spectrum.json", &cells)
}

#[derive(Serialize)]
struct GapCell {
    beta: f64,
    n: usize,
    numeric: GapReport,
    asymptotic: GapReport,
}

fn gaps(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let all = spectra(cfg, exec)?;
    let mut cells = Vec::new();
    for s in &all {
        let (b, n) = (s.beta().value(), s.grid().len());
        let k = s.len();
        w.csv(
            &format!("gaps_{}.csv", tag(b, n)),
            &EIGEN_HEADER,
            &eigen_rows(s, k - 1),
        )?;
        let numeric = gap_sequence(EigenSource::Numeric(s), k)?;
        let asymptotic = gap_sequence(EigenSource::Asymptotic(s.beta()), k)?;
        let series = |name: &str, gaps: &[f64], dashed| Series {
            name: name.into(),
            points: gaps
                .iter()
                .enumerate()
                .map(|(i, g)| ((i + 1) as f64, *g))
                .collect(),
            dashed,
        };
        let plot = LinePlot {
            title: format!("Gap between the first {k} eigenvalues, beta = {b}, N = {n}"),
            x_label: "k".into(),
            y_label: "lambda_{k+1} - lambda_k".into(),
            series: vec![
                series("numeric", &numeric.gaps, false),
                series("asymptotic", &asymptotic.gaps, true),
            ],
        };
        w.write(
            &format!("gaps_{}.svg", tag(b, n)),
            plot.render(w.timestamp()).as_bytes(),
        )?;
        cells.push(GapCell {
            beta: b,
            n,
            numeric,
            asymptotic,
        });
    }
    w.json("gaps.json", &cells)
}

#[derive(Serialize)]
struct Drift {
    l2_norm_sq: f64,
    moment1: f64,
    moment2: f64,
    wave_energy: f64,
}

#[derive(Serialize)]
struct EvolveSummary {
    beta: f64,
    n: usize,
    modes: usize,
    horizon: f64,
    basis: Basis,
    initial: InitialState,
    max_relative_drift: Drift,
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn evolve(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let s = single_spectrum(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = initial_state(cfg, &s, &mut rng)?;
    let velocity = match cfg.initial {
        InitialState::Random => random_coefficients(&mut rng, u0.modes()),
        _ => vec![Complex64::new(0.0, 0.0); u0.modes()],
    };
    let w0 = WaveModalState::new(&s, u0.l2_coefficients(), velocity)?;
    let base = [
        u0.spectral_moment(0),
        u0.spectral_moment(1),
        u0.spectral_moment(2),
        w0.energy(),
    ];
    let mut worst = [0.0f64; 4];
    let mut rows = Vec::new();
    for j in 0..cfg.times {
        let t = cfg.horizon * j as f64 / (cfg.times - 1) as f64;
        let u = schrodinger_evolve(&u0, t);
        let v = wave_evolve(&w0, t);
        let now = [
            u.spectral_moment(0),
            u.spectral_moment(1),
            u.spectral_moment(2),
            v.energy(),
        ];
        for i in 0..4 {
            worst[i] = worst[i].max(relative(now[i], base[i]));
        }
        let mut row = vec![num(t)];
        row.extend(now.iter().map(|x| num(*x)));
        rows.push(row);
    }
    w.csv(
        "evolve.csv",
        &["t", "l2_norm_sq", "moment1", "moment2", "wave_energy"],
        &rows,
    )?;
    let start = reconstruct(&u0);
    let end = reconstruct(&schrodinger_evolve(&u0, cfg.horizon));
    let profile: Vec<Vec<String>> = (0..s.grid().len())
        .map(|i| {
            vec![
                num(s.grid().node(i)),
                num(start[i].re),
                num(start[i].im),
                num(end[i].re),
                num(end[i].im),
            ]
        })
        .collect();
    w.csv(
        "evolve_profile.csv",
        &["x", "re_u0", "im_u0", "re_uT", "im_uT"],
        &profile,
    )?;
    w.json(
        "evolve.json",
        &EvolveSummary {
            beta: cfg.beta(),
            n: cfg.grid_size(),
            modes: cfg.max_modes(),
            horizon: cfg.horizon,
            basis: cfg.basis,
            initial: cfg.initial,
            max_relative_drift: Drift {
                l2_norm_sq: worst[0],
                moment1: worst[1],
                moment2: worst[2],
                wave_energy: worst[3],
            },
        },
    )
}

const SWEEP_HEADER: [&str; 6] = ["beta", "K", "T", "epsilon", "obs_constant", "condition"];

#[derive(Serialize)]
struct ObservabilityCell {
    beta: f64,
    modes: usize,
    schrodinger_constant: f64,
    schrodinger_condition: f64,
    wave_constant: f64,
    wave_condition: f64,
}

#[derive(Serialize)]
struct ObservabilitySummary {
    n: usize,
    horizon: f64,
    epsilon: f64,
    min_time: MinTimeEstimate,
    horizon_exceeds_min_time: bool,
    cells: Vec<ObservabilityCell>,
}

fn observability(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let all = spectra(cfg, exec)?;
    let region = region(cfg)?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for s in &all {
        let per_k = par::map(
            exec,
            &cfg.modes,
            |&k| -> Result<ObservabilityCell, CliError> {
                let g = schrodinger_gramian(s, &region, cfg.horizon, k)?;
                let wg = wave_gramian(s, &region, cfg.horizon, k)?;
                Ok(ObservabilityCell {
                    beta: s.beta().value(),
                    modes: k,
                    schrodinger_constant: observability_constant(&g)?,
                    schrodinger_condition: g.condition_number(),
                    wave_constant: observability_constant(&wg)?,
                    wave_condition: wg.condition_number(),
                })
            },
        );
        for cell in per_k {
            let cell = cell?;
            rows.push(vec![
                cell.beta.to_string(),
                cell.modes.to_string(),
                num(cfg.horizon),
                num(cfg.epsilon),
                num(cell.schrodinger_constant),
                num(cell.schrodinger_condition),
            ]);
            cells.push(cell);
        }
    }
    w.csv("observability.csv", &SWEEP_HEADER, &rows)?;
    let min_time = min_time_estimate(cfg.poincare)?;
    w.json(
        "observability.json",
        &ObservabilitySummary {
            n: cfg.grid_size(),
            horizon: cfg.horizon,
            epsilon: cfg.epsilon,
            horizon_exceeds_min_time: cfg.horizon > min_time.t0,
            min_time,
            cells,
        },
    )
}

#[derive(Serialize)]
struct SharpnessSummary {
    n: usize,
    horizon: f64,
    epsilon: f64,
    modes: Vec<usize>,
    verdicts: Vec<BetaVerdict>,
}

fn sharpness(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let betas: Vec<FractionalOrder> = cfg
        .betas
        .iter()
        .map(|&b| order(b))
        .collect::<Result<_, _>>()?;
    let table = sharpness_experiment(
        &betas,
        &cfg.modes,
        &region(cfg)?,
        cfg.horizon,
        cfg.grid_size(),
        exec,
    )?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.beta.to_string(),
                r.modes.to_string(),
                num(r.horizon),
                num(cfg.epsilon),
                num(r.obs_constant),
                num(r.condition),
            ]
        })
        .collect();
    w.csv("sharpness.csv", &SWEEP_HEADER, &rows)?;
    let series = cfg
        .betas
        .iter()
        .map(|&b| Series {
            name: format!("beta = {b}"),
            points: table
                .rows
                .iter()
                .filter(|r| r.beta == b)
                .map(|r| (r.modes as f64, r.obs_constant.log10()))
                .collect(),
            dashed: false,
        })
        .collect();
    let plot = LinePlot {
        title: format!(
            "Observability constant, epsilon = {}, T = {}",
            cfg.epsilon, cfg.horizon
        ),
        x_label: "K".into(),
        y_label: "log10 obs_constant".into(),
        series,
    };
    w.write("sharpness.svg", plot.render(w.timestamp()).as_bytes())?;
    let mut modes = cfg.modes.clone();
    modes.sort_unstable();
    modes.dedup();
    w.json(
        "sharpness.json",
        &SharpnessSummary {
            n: table.grid_size,
            horizon: cfg.horizon,
            epsilon: cfg.epsilon,
            modes,
            verdicts: table.verdicts,
        },
    )
}

#[derive(Serialize)]
struct HumReport {
    beta: f64,
    n: usize,
    modes: usize,
    horizon: f64,
    epsilon: f64,
    basis: Basis,
    initial: InitialState,
    region_nodes: usize,
    steps: usize,
    initial_norm: f64,
    final_state_norm: f64,
    relative_final_norm: f64,
    trapezoid_final_norm: f64,
    observability_constant: f64,
    gramian_condition: f64,
    duality_pairing: f64,
    observed_energy: f64,
    identity_residual: f64,
    hum_coefficients: Vec<Complex64>,
    final_state: Vec<Complex64>,
}

fn hum(cfg: &RunConfig, w: &mut Writer) -> Result<(), CliError> {
    let s = single_spectrum(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = initial_state(cfg, &s, &mut rng)?;
    let result = hum_control(&u0, &region(cfg)?, cfg.horizon)?;
    if cfg.control_csv {
        let stride = result.control.steps().div_ceil(CONTROL_CSV_ROWS).max(1);
        let dt = result.control.dt();
        let mut rows = Vec::new();
        for (j, sample) in result.control.samples().iter().enumerate().step_by(stride) {
            for (r, v) in sample.iter().enumerate() {
                let x = s.grid().node(result.region_nodes[r]);
                rows.push(vec![num(j as f64 * dt), num(x), num(v.re), num(v.im)]);
            }
        }
        w.csv("control.csv", &["t", "x", "re_h", "im_h"], &rows)?;
    }
    let relative_final_norm = if result.initial_norm == 0.0 {
        0.0
    } else {
        result.final_state_norm / result.initial_norm
    };
    w.json(
        "hum.json",
        &HumReport {
            beta: cfg.beta(),
            n: cfg.grid_size(),
            modes: cfg.max_modes(),
            horizon: cfg.horizon,
            epsilon: cfg.epsilon,
            basis: cfg.basis,
            initial: cfg.initial,
            region_nodes: result.region_nodes.len(),
            steps: result.control.steps(),
            initial_norm: result.initial_norm,
            final_state_norm: result.final_state_norm,
            relative_final_norm,
            trapezoid_final_norm: result.trapezoid_final_norm,
            observability_constant: result.observability_constant,
            gramian_condition: result.gramian_condition,
            duality_pairing: result.duality_pairing,
            observed_energy: result.observed_energy,
            identity_residual: result.identity_residual,
            hum_coefficients: result.hum_coefficients,
            final_state: result.final_state,
        },
    )
}

#[derive(Serialize)]
struct PohozaevSummary {
    beta: f64,
    n: usize,
    modes: usize,
    horizon: f64,
    basis: Basis,
    initial: InitialState,
    report: PohozaevReport,
    estimate_ratio: Option<EstimateRatio>,
    /// `[2βTλ_1 / (Γ² (1+λ_1)), 2βT/Γ²]`.
    single_mode_band: [f64; 2],
    battery: BatterySummary,
}

/// Estimate ratios over `states` seeded random states.
#[derive(Serialize)]
struct BatterySummary {
    states: usize,
    min_ratio: f64,
    max_ratio: f64,
}

fn pohozaev(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let s = single_spectrum(cfg)?;
    let beta = s.beta();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u0 = initial_state(cfg, &s, &mut rng)?;
    let report = schrodinger_pohozaev_report(&u0, cfg.horizon, cfg.quadrature)?;
    let estimate_ratio = if u0.energy_norm_sqr() > 0.0 {
        Some(two_sided_estimate_ratio(&u0, cfg.horizon, cfg.quadrature)?)
    } else {
        None
    };
    let rows = s
        .pairs()
        .iter()
        .map(|p| -> Result<Vec<String>, CliError> {
            let c = eigen_pohozaev_check(p, beta, s.grid())?;
            Ok(vec![
                p.index.to_string(),
                num(p.lambda),
                num(c.trace.d_plus),
                num(c.trace.d_minus),
                num(c.boundary),
                num(c.target),
                num(c.residual),
            ])
        })
        .collect::<Result<Vec<_>, _>>()?;
    w.csv(
        "pohozaev_eigen.csv",
        &[
            "k", "lambda", "d_plus", "d_minus", "boundary", "target", "residual",
        ],
        &rows,
    )?;
    let battery_states = (0..cfg.states)
        .map(|_| {
            ModalState::new(
                &s,
                random_coefficients(&mut rng, cfg.max_modes()),
                cfg.basis,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ratios = estimate_battery(&battery_states, cfg.horizon, cfg.quadrature, exec)
        .into_iter()
        .map(|r| r.map(|e| e.ratio))
        .collect::<Result<Vec<f64>, _>>()?;
    let battery = BatterySummary {
        states: ratios.len(),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        max_ratio: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let lo = single_mode_ratio(beta, s.pair(1).lambda, cfg.horizon);
    let hi = 2.0 * beta.value() * cfg.horizon / gamma(1.0 + beta.value()).powi(2);
    w.json(
        "pohozaev.json",
        &PohozaevSummary {
            beta: beta.value(),
            n: cfg.grid_size(),
            modes: cfg.max_modes(),
            horizon: cfg.horizon,
            basis: cfg.basis,
            initial: cfg.initial,
            report,
            estimate_ratio,
            single_mode_band: [lo, hi],
            battery,
        },
    )
}

#[derive(Serialize)]
struct SweepCell {
    beta: f64,
    n: usize,
    gap_verdict: fraclab::spectrum::GapVerdict,
    log_slope: Option<f64>,
    inf_gap_estimate: f64,
    warnings: Vec<String>,
}

fn sweep(cfg: &RunConfig, w: &mut Writer, exec: Execution) -> Result<(), CliError> {
    let all = spectra(cfg, exec)?;
    let per_cell = par::map(
        exec,
        &all,
        |s| -> Result<(Vec<Vec<String>>, SweepCell), CliError> {
            let beta = s.beta();
            let rows = s
                .pairs()
                .iter()
                .map(|p| {
                    let asym = asymptotic_eigenvalue(beta, p.index);
                    let residual = eigen_pohozaev_check(p, beta, s.grid())
                        .map(|c| num(c.residual))
                        .unwrap_or_default();
                    vec![
                        beta.value().to_string(),
                        s.grid().len().to_string(),
                        p.index.to_string(),
                        num(p.lambda),
                        num(asym),
                        num((p.lambda - asym).abs() / asym),
                        residual,
                    ]
                })
                .collect();
            let gaps = if s.len() >= 2 {
                Some(gap_sequence(EigenSource::Numeric(s), s.len())?)
            } else {
                None
            };
            Ok((
                rows,
                SweepCell {
                    beta: beta.value(),
                    n: s.grid().len(),
                    gap_verdict: gaps
                        .as_ref()
                        .map(|g| g.verdict)
                        .unwrap_or(fraclab::spectrum::GapVerdict::UniformGap),
                    log_slope: gaps.as_ref().and_then(|g| g.log_slope),
                    inf_gap_estimate: gaps.as_ref().map_or(f64::NAN, |g| g.inf_gap_estimate),
                    warnings: s.warnings().to_vec(),
                },
            ))
        },
    );
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for cell in per_cell {
        let (r, c) = cell?;
        rows.extend(r);
        cells.push(c);
    }
    w.csv(
        "sweep.csv",
        &[
            "beta",
            "n",
            "k",
            "lambda_numeric",
            "lambda_asymptotic",
            "relative_gap",
            "pohozaev_residual",
        ],
        &rows,
    )?;
    w.json("sweep.json", &cells)
}
