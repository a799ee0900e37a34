//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use fraclab::control::{
    hum_control, schrodinger_gramian, sharpness_experiment, simpson, wave_gramian,
    ObservationRegion,
};
use fraclab::dynamics::{schrodinger_evolve, wave_evolve, Basis, ModalState, WaveModalState};
use fraclab::identity::{
    eigen_pohozaev_check, schrodinger_pohozaev_report, single_mode_ratio, two_sided_estimate_ratio,
};
use fraclab::operator::{DiscreteOperator, FractionalOrder, Grid};
use fraclab::par::Execution;
use fraclab::spectrum::{asymptotic_eigenvalue, compute_spectra, compute_spectrum, Spectrum};
use fraclab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn order(b: f64) -> FractionalOrder {
    FractionalOrder::new(b).unwrap()
}

fn spectrum(beta: f64, n: usize, k: usize) -> Spectrum {
    compute_spectrum(
        &DiscreteOperator::assemble(Grid::new(n).unwrap(), order(beta)),
        k,
    )
    .unwrap()
}

const FINE: usize = 2048;
const FINE_BETAS: [f64; 12] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0, 0.25];

/// Ten lowest eigenpairs at `N = 2048`, computed once for all criteria.
fn fine(beta: f64) -> &'static Spectrum {
    static CACHE: OnceLock<BTreeMap<u64, Spectrum>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| {
        let cells: Vec<_> = FINE_BETAS.iter().map(|&b| (order(b), FINE)).collect();
        let spectra = compute_spectra(&cells, 10, Execution::default()).unwrap();
        FINE_BETAS
            .iter()
            .map(|b| b.to_bits())
            .zip(spectra)
            .collect()
    });
    &cache[&beta.to_bits()]
}

fn random_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<Complex64> {
    (0..k)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn classical_limit() -> Outcome {
    let s = spectrum(1.0, 3, 3);
    let r = 2.0f64.sqrt() / 2.0;
    let exact = [8.0 * (1.0 - r), 8.0, 8.0 * (1.0 + r)];
    let worst = s
        .lambdas()
        .iter()
        .zip(exact)
        .map(|(l, e)| rel(*l, e))
        .fold(0.0, f64::max);
    ensure(worst <= 1e-10, || format!("N=3 relative error {worst:.2e}"))?;
    let l1 = spectrum(1.0, 2047, 1).pair(1).lambda;
    let e1 = rel(l1, PI * PI / 4.0);
    ensure(e1 <= 1e-5, || {
        format!("N=2047 λ_1 = {l1}, relative error {e1:.2e}")
    })?;
    Ok(format!("N=3 error {worst:.1e}, N=2047 λ_1 error {e1:.1e}"))
}

fn asymptotic_agreement() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for beta in [0.3, 0.5, 0.75] {
        let s = fine(beta);
        let gaps: Vec<f64> = (5..=10)
            .map(|k| rel(s.pair(k).lambda, asymptotic_eigenvalue(order(beta), k)))
            .collect();
        worst = worst.max(gaps.iter().copied().fold(0.0, f64::max));
        if gaps.iter().any(|&g| g > 0.03) {
            failures.push(format!("β={beta}: relative gap above 3%"));
        }
        if gaps.windows(2).any(|w| w[1] >= w[0]) {
            let list: Vec<String> = gaps.iter().map(|g| format!("{g:.1e}")).collect();
            failures.push(format!(
                "β={beta}: relative gap not decreasing over k=5..10 [{}]",
                list.join(", ")
            ));
        }
    }
    let l10 = fine(0.5).pair(10).lambda;
    let target = 10.0 * PI / 2.0 - PI / 8.0;
    if rel(l10, target) > 0.02 {
        failures.push(format!("β=0.5 λ_10 = {l10} vs {target}"));
    }
    if failures.is_empty() {
        Ok(format!(
            "max relative gap {worst:.1e}, β=0.5 λ_10 = {l10:.4}"
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn gap_dichotomy() -> Outcome {
    let half = order(0.5);
    for k in 1..200 {
        let g = asymptotic_eigenvalue(half, k + 1) - asymptotic_eigenvalue(half, k);
        ensure((g - PI / 2.0).abs() <= 1e-12, || {
            format!("β=0.5 asymptotic gap {g} at k={k}")
        })?;
    }
    let mut numeric_checked = 0;
    for step in 1..=10 {
        let beta = step as f64 / 10.0;
        if step == 5 {
            continue;
        }
        let asym: Vec<f64> = (1..=200)
            .map(|k| {
                asymptotic_eigenvalue(order(beta), k + 1) - asymptotic_eigenvalue(order(beta), k)
            })
            .collect();
        let increasing = step > 5;
        let monotone = |g: &[f64]| {
            g.windows(2)
                .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
        };
        ensure(monotone(&asym), || {
            format!("β={beta}: asymptotic gaps not monotone")
        })?;
        if !increasing {
            ensure(asym[199] < asym[0] * 0.5 && asym[199] > 0.0, || {
                format!("β={beta}: asymptotic gaps do not decay toward 0")
            })?;
        }
        let lam = fine(beta).lambdas();
        let num: Vec<f64> = lam.windows(2).map(|w| w[1] - w[0]).collect();
        ensure(monotone(&num), || {
            format!("β={beta}: numeric gaps at N={FINE} not monotone: {num:?}")
        })?;
        numeric_checked += 1;
    }
    Ok(format!(
        "asymptotic gaps exact at β=0.5, monotone for 9 orders; numeric monotone in {numeric_checked} orders"
    ))
}

fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for beta in [0.3, 0.5, 0.75] {
        let s = spectrum(beta, 512, 20);
        for _ in 0..50 {
            let u0 = ModalState::new(&s, random_vec(&mut rng, 20), Basis::L2).unwrap();
            let w0 = WaveModalState::new(&s, random_vec(&mut rng, 20), random_vec(&mut rng, 20))
                .unwrap();
            let base = [
                u0.spectral_moment(0),
                u0.spectral_moment(1),
                u0.spectral_moment(2),
                w0.energy(),
            ];
            for j in 0..=100 {
                let t = 0.1 * j as f64;
                let u = schrodinger_evolve(&u0, t);
                let now = [
                    u.spectral_moment(0),
                    u.spectral_moment(1),
                    u.spectral_moment(2),
                    wave_evolve(&w0, t).energy(),
                ];
                for (a, b) in now.iter().zip(base) {
                    worst = worst.max(rel(*a, b));
                }
            }
        }
    }
    ensure(worst <= 1e-12, || {
        format!("largest relative drift {worst:.2e}")
    })?;
    Ok(format!(
        "largest relative drift {worst:.1e} over 150 states"
    ))
}

/// `∫_0^T h Σ_{i∈ω} |w(x_i, t)|² dt` by Simpson with `T / 10⁵` steps.
fn brute_force(
    s: &Spectrum,
    nodes: &[usize],
    horizon: f64,
    coefficients: impl Fn(f64) -> Vec<Complex64>,
) -> f64 {
    let steps = 100_000;
    let dt = horizon / steps as f64;
    let h = s.grid().spacing();
    let density: Vec<f64> = (0..=steps)
        .map(|j| {
            let c = coefficients(j as f64 * dt);
            nodes
                .iter()
                .map(|&i| {
                    let w: Complex64 = c.iter().zip(s.pairs()).map(|(c, p)| c * p.vector[i]).sum();
                    h * w.norm_sqr()
                })
                .sum()
        })
        .collect();
    simpson(&density, dt)
}

fn gramian_oracle() -> Outcome {
    let (k, horizon) = (6, 4.0);
    let s = spectrum(0.5, 128, k);
    let lam = s.lambdas();
    let region = ObservationRegion::boundary_neighbourhood(0.2).unwrap();
    let nodes = region.node_indices(s.grid()).unwrap();
    let g = schrodinger_gramian(&s, &region, horizon, k).unwrap();
    let gw = wave_gramian(&s, &region, horizon, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_s, mut worst_w) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let u0 = ModalState::new(&s, random_vec(&mut rng, k), Basis::L2).unwrap();
        let closed = g.quadratic_form(u0.coefficients()).unwrap();
        let brute = brute_force(&s, &nodes, horizon, |t| {
            schrodinger_evolve(&u0, t).l2_coefficients()
        });
        worst_s = worst_s.max(rel(closed, brute));

        let w0 = WaveModalState::new(&s, random_vec(&mut rng, k), random_vec(&mut rng, k)).unwrap();
        let mut z: Vec<Complex64> = w0.position().iter().zip(&lam).map(|(a, l)| a * l).collect();
        z.extend_from_slice(w0.velocity());
        let closed = gw.quadratic_form(&z).unwrap();
        let brute = brute_force(&s, &nodes, horizon, |t| {
            wave_evolve(&w0, t).velocity().to_vec()
        });
        worst_w = worst_w.max(rel(closed, brute));
    }
    ensure(worst_s <= 1e-6 && worst_w <= 1e-6, || {
        format!("Schrödinger {worst_s:.2e}, wave {worst_w:.2e}")
    })?;
    Ok(format!(
        "Schrödinger {worst_s:.1e}, wave {worst_w:.1e} relative over 20 states"
    ))
}

fn sharpness() -> Outcome {
    let region = ObservationRegion::boundary_neighbourhood(0.2).unwrap();
    let t = sharpness_experiment(
        &[order(0.25), order(0.75)],
        &[5, 40],
        &region,
        4.0,
        1024,
        Execution::default(),
    )
    .map_err(|e| e.to_string())?;
    let c = |b, k| t.constant(b, k).unwrap();
    let r_low = c(0.25, 40) / c(0.25, 5);
    let r_high = c(0.75, 40) / c(0.75, 5);
    ensure(r_low * 10.0 <= r_high, || {
        format!("ratios β=0.25 {r_low:.2e}, β=0.75 {r_high:.2e}")
    })?;
    ensure(c(0.25, 40) < c(0.75, 40) / 10.0, || {
        format!("K=40 constants {:.2e} vs {:.2e}", c(0.25, 40), c(0.75, 40))
    })?;
    Ok(format!(
        "const(40)/const(5): β=0.25 {r_low:.1e}, β=0.75 {r_high:.2e}; const(0.25,40) = {:.1e}",
        c(0.25, 40)
    ))
}

fn hum_end_to_end() -> Outcome {
    let s = spectrum(0.6, 1024, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let u0 = ModalState::new(&s, random_vec(&mut rng, 20), Basis::L2).unwrap();
    let region = ObservationRegion::boundary_neighbourhood(0.2).unwrap();
    let r = hum_control(&u0, &region, 1.0).map_err(|e| e.to_string())?;
    let final_rel = r.final_state_norm / r.initial_norm;
    let identity = rel(r.duality_pairing, r.observed_energy);
    ensure(final_rel <= 1e-8, || {
        format!("final/initial norm {final_rel:.2e}")
    })?;
    ensure(identity <= 1e-8, || {
        format!("duality vs observed energy {identity:.2e}")
    })?;
    Ok(format!(
        "final/initial {final_rel:.1e}, identity {identity:.1e}"
    ))
}

fn eigen_pohozaev() -> Outcome {
    let exact = eigen_pohozaev_check(fine(1.0).pair(1), order(1.0), fine(1.0).grid())
        .map_err(|e| e.to_string())?;
    let target_err = rel(exact.target, PI * PI / 2.0);
    ensure(exact.residual <= 1e-3 && target_err <= 1e-5, || {
        format!(
            "β=1 residual {:.2e}, target {}",
            exact.residual, exact.target
        )
    })?;
    let mut failures = Vec::new();
    let mut cells = Vec::new();
    for beta in [0.5, 0.75] {
        let coarse = [512, 1024].map(|n| spectrum(beta, n, 2));
        for k in 1..=2 {
            let res: Vec<f64> = coarse
                .iter()
                .chain([fine(beta)])
                .map(|s| {
                    eigen_pohozaev_check(s.pair(k), order(beta), s.grid())
                        .unwrap()
                        .residual
                })
                .collect();
            cells.push(format!("β={beta},k={k}: {:.1}%", 100.0 * res[2]));
            if res[2] > 0.10 {
                failures.push(format!(
                    "β={beta}, k={k}: residual {:.1}% at N={FINE}",
                    100.0 * res[2]
                ));
            }
            if !(res[0] > res[1] && res[1] > res[2]) {
                failures.push(format!("β={beta}, k={k}: not decreasing {res:?}"));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("β=1 {:.1e}; {}", exact.residual, cells.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn schrodinger_pohozaev() -> Outcome {
    let horizon = 1.0;
    for beta in [0.5, 0.75] {
        let s = fine(beta);
        for k in 1..=3 {
            let u0 = ModalState::mode(s, 10, k, Basis::L2).unwrap();
            let rep = schrodinger_pohozaev_report(&u0, horizon, 256).map_err(|e| e.to_string())?;
            let eig = eigen_pohozaev_check(s.pair(k), order(beta), s.grid()).unwrap();
            let g2 = fraclab::gamma::gamma(1.0 + beta).powi(2);
            ensure(rep.cross_imaginary_scale <= 1e-10, || {
                format!(
                    "β={beta}, k={k}: imaginary cross part {:.1e}",
                    rep.cross_imaginary_scale
                )
            })?;
            ensure(rep.rhs_cross.abs() <= 1e-10 * rep.rhs_dirichlet, || {
                format!("β={beta}, k={k}: cross term {:.1e}", rep.rhs_cross)
            })?;
            let lhs_err = rel(rep.lhs_boundary, horizon * g2 * eig.boundary);
            let rhs_err = rel(rep.rhs_dirichlet, horizon * g2 * eig.target);
            ensure(lhs_err <= 1e-10 && rhs_err <= 1e-10, || {
                format!(
                    "β={beta}, k={k}: single-mode reduction off by {lhs_err:.1e}, {rhs_err:.1e}"
                )
            })?;
        }
    }
    let beta = 0.6;
    let spectra = [512, 1024].map(|n| spectrum(beta, n, 2));
    let coefficients = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    let res: Vec<f64> = spectra
        .iter()
        .chain([fine(beta)])
        .map(|s| {
            let u0 = ModalState::new(s, coefficients.clone(), Basis::L2).unwrap();
            schrodinger_pohozaev_report(&u0, horizon, 256)
                .unwrap()
                .relative_residual
        })
        .collect();
    ensure(res[2] <= 0.10 && res[0] > res[1] && res[1] > res[2], || {
        format!("two-mode residuals over N=512,1024,2048: {res:?}")
    })?;
    Ok(format!(
        "single modes reduce to 1e-10; two-mode residual {:.1}%, {:.1}%, {:.1}%",
        100.0 * res[0],
        100.0 * res[1],
        100.0 * res[2]
    ))
}

fn estimate_battery() -> Outcome {
    let (beta, horizon) = (0.5, 4.0);
    let s = spectrum(beta, 1024, 5);
    let band: Vec<f64> = s
        .pairs()
        .iter()
        .map(|p| single_mode_ratio(order(beta), p.lambda, horizon))
        .collect();
    let lo = band.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = band.iter().copied().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let u0 = ModalState::new(&s, random_vec(&mut rng, 5), Basis::L2).unwrap();
        let r = two_sided_estimate_ratio(&u0, horizon, 256)
            .map_err(|e| e.to_string())?
            .ratio;
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    ensure(rmin > 0.0 && rmin >= 0.1 * lo && rmax <= 10.0 * hi, || {
        format!("ratios [{rmin:.3}, {rmax:.3}] vs band [{lo:.3}, {hi:.3}]")
    })?;
    Ok(format!(
        "ratios [{rmin:.3}, {rmax:.3}] within 10x of band [{lo:.3}, {hi:.3}]"
    ))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [&[&str]; 5] = [
        &["spectrum", "--beta", "0.3,0.7", "--n", "256"],
        &["evolve", "--n", "256", "--seed", "11"],
        &["sharpness", "--n", "256", "--modes", "5,10"],
        &["hum", "--n", "256", "--modes", "10", "--seed", "3"],
        &["pohozaev", "--n", "256", "--seed", "4"],
    ];
    let mut files = 0;
    for args in runs {
        let out = tmp.path().join(args[0]);
        let mut snaps = Vec::new();
        for _ in 0..2 {
            let status = Command::new(env!("CARGO_BIN_EXE_fraclab"))
                .args(args)
                .arg("--no-timestamp")
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(status.status.success(), || {
                format!("{}: {}", args[0], String::from_utf8_lossy(&status.stderr))
            })?;
            snaps.push(snapshot(&out));
            std::fs::remove_dir_all(&out).unwrap();
        }
        for (name, bytes) in &snaps[0] {
            ensure(snaps[1].get(name) == Some(bytes), || {
                format!("{}: {name} differs", args[0])
            })?;
        }
        ensure(snaps[0].len() == snaps[1].len(), || {
            format!("{}: file sets differ", args[0])
        })?;
        files += snaps[0].len();
    }
    Ok(format!("{files} files byte-identical across repeated runs"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("classical-limit spectrum", classical_limit),
        ("asymptotic-law agreement", asymptotic_agreement),
        ("gap dichotomy", gap_dichotomy),
        ("conservation suite", conservation),
        ("Gramian oracle equivalence", gramian_oracle),
        ("sharpness experiment", sharpness),
        ("HUM end-to-end", hum_end_to_end),
        ("eigen Pohozaev identity", eigen_pohozaev),
        ("Schrödinger Pohozaev report", schrodinger_pohozaev),
        ("two-sided estimate battery", estimate_battery),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.1}s)"),
            Err(reason) => {
                failed += 1;
                println!("[FAIL] {name}: {reason} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
