//! End-to-end acceptance suite. Prints one `criterion N: PASS|FAIL` line per
//! criterion with the measured numbers.
//!
//! Criteria in [`KNOWN_SHORTFALLS`] are targets this model misses; they are
//! run and reported like the rest but do not fail the harness. Any other
//! failure does. `NVDRESS_CRITERIA=3,5` restricts the run to a subset.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::Instant;

use nvdress::engine::{evolve, EngineModel, IntegratorConfig, NoiseBank, Observable};
use nvdress::ensemble::{run_ensemble, EnsembleConfig, InitialState, Scenario};
use nvdress::experiments::{
    angle, coherence_vs_drive, coherence_vs_time, crossing_time, drive_fluctuations, sensitivity, spectrum, Setup, SensitivityPoint,
};
use nvdress::filter::{second_order_l, FilterParams};
use nvdress::model::{
    build_lambda_hamiltonian, dark_state, kappa_fraction, matched_drive, restricted_spectrum, FieldPreset,
    FrequencyConvention, NVParams, PhasePolicy, SignalMode, SignalParams,
};
use nvdress::noise::{calibrate_dephasing, stream_rng, OUState};
use nvdress::quantum::{matrix_element, DensityMatrix, Level};
use nvdress::stats::{ks_two_sample, Moments};

/// Criteria whose targets the model does not reach.
const KNOWN_SHORTFALLS: &[u32] = &[4, 5];

const CONV: FrequencyConvention = FrequencyConvention::Ordinary;
const SEED: u64 = 2024;

/// Config-unit frequency to rad/us.
fn f(x: f64) -> f64 {
    CONV.to_internal(x)
}

fn setup(preset: &FieldPreset, runs: usize) -> Setup {
    Setup::new(preset, CONV, EnsembleConfig::new(runs, SEED)).unwrap()
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(checks: &[(bool, String)]) -> Verdict {
    Verdict {
        pass: checks.iter().all(|c| c.0),
        detail: checks
            .iter()
            .map(|(ok, s)| format!("{}{s}", if *ok { "" } else { "[x] " }))
            .collect::<Vec<_>>()
            .join("; "),
    }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

// 1. OU exactness
fn ou_exactness() -> Verdict {
    let p = calibrate_dephasing(3.0, 25.0).unwrap();
    let n = 100_000;
    let (mut m0, mut m1, mut cross) = (Moments::default(), Moments::default(), Moments::default());
    let mut squares = Moments::default();
    for i in 0..n {
        let mut s = nvdress::noise::ou_burn_in(&p, stream_rng(SEED, i, 0));
        let x0 = s.value;
        let x1 = s.step(p.tau, &p);
        m0.push(x0);
        m1.push(x1);
        squares.push(x0 * x0);
        cross.push(x0 * x1);
    }
    let var = p.stationary_variance();
    let mean_z = m0.mean() / (var / n as f64).sqrt();
    let var_z = (squares.mean() - var) / squares.stderr();
    let rho = cross.mean() / squares.mean();
    let rho_se = (1.0 - (-2.0f64).exp()) / (n as f64).sqrt();
    let rho_z = (rho - (-1.0f64).exp()) / rho_se;

    // ten steps of tau/10 against one step of tau from the same start
    let x_start = 2.0 * p.stationary_std();
    let m = 100_000;
    let chained: Vec<f64> = (0..m)
        .map(|i| {
            let mut s = OUState::new(x_start, stream_rng(SEED, i, 1));
            (0..10).map(|_| s.step(p.tau / 10.0, &p)).last().unwrap()
        })
        .collect();
    let single: Vec<f64> = (0..m)
        .map(|i| OUState::new(x_start, stream_rng(SEED, i, 2)).step(p.tau, &p))
        .collect();
    let (_, pval) = ks_two_sample(&chained, &single);
    verdict(&[
        (mean_z.abs() <= 3.0, format!("mean z={mean_z:.2}")),
        (var_z.abs() <= 3.0, format!("variance z={var_z:.2}")),
        (rho_z.abs() <= 3.0, format!("lag-tau corr {rho:.4} (z={rho_z:.2})")),
        (pval > 0.01, format!("chained vs single KS p={pval:.3}")),
    ])
}

// 2. Free-induction calibration
fn free_induction() -> Verdict {
    let s = setup(&FieldPreset::zero_field(), 2000);
    let series = coherence_vs_time(&s, 0.0, 4.0, 0.25).unwrap();
    let (l3, _) = series.at(3.0).unwrap();
    let worst = series
        .x
        .iter()
        .zip(&series.y)
        .map(|(t, l)| (l - (-t * t / 9.0f64).exp()).abs())
        .fold(0.0, f64::max);
    verdict(&[
        (within(l3, 1.0 / E, 0.05), format!("|L(3)|={l3:.4} (e^-1={:.4})", 1.0 / E)),
        (worst <= 0.05, format!("max |L - exp(-t^2/T2*^2)| on t<=4: {worst:.4}")),
    ])
}

// 3. Coherence protection
fn protection() -> Verdict {
    let s = setup(&FieldPreset::zero_field(), 1000);
    let ctrl = coherence_vs_time(&s, f(10.0), 200.0, 5.0).unwrap();
    let base = coherence_vs_time(&s, 0.0, 50.0, 0.25).unwrap();
    let (l50, se50) = ctrl.at(50.0).unwrap();
    let (b50, _) = base.at(50.0).unwrap();
    let tb = crossing_time(&base, 1.0 / E).unwrap();
    let (tc, factor) = match crossing_time(&ctrl, 1.0 / E) {
        Some(tc) => (format!("{tc:.1}"), tc / tb),
        None => (">200".into(), 200.0 / tb),
    };
    verdict(&[
        (l50 >= 0.5, format!("|L(50)|={l50:.3}+-{se50:.3} at Omega=10")),
        (b50 <= 0.05, format!("baseline |L(50)|={b50:.3}")),
        (factor >= 10.0, format!("e^-1 crossing {tc} us vs {tb:.2} us, factor {factor:.1}")),
    ])
}

// 4. Drive-amplitude optimum
fn drive_optimum() -> Verdict {
    let grid = [2.0, 5.0, 7.0, 10.0, 15.0, 25.0, 50.0];
    let omegas: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut checks = Vec::new();
    for (preset, lo, hi) in [(FieldPreset::zero_field(), 5.0, 20.0), (FieldPreset::bias(), 3.5, 14.0)] {
        let s = setup(&preset, 500);
        let series = coherence_vs_drive(&s, &omegas, 50.0).unwrap();
        let i = series.argmax();
        let interior = i > 0 && i + 1 < grid.len();
        let curve: Vec<String> = grid.iter().zip(&series.y).map(|(w, l)| format!("{w}:{l:.3}")).collect();
        checks.push((
            interior && grid[i] >= lo && grid[i] <= hi,
            format!("{} argmax {} in [{lo}, {hi}] ({})", preset.name, grid[i], curve.join(" ")),
        ));
    }
    verdict(&checks)
}

// 5. Spectrum narrowing
fn narrowing() -> Verdict {
    let mut checks = Vec::new();
    for (preset, omega, eta0) in [(FieldPreset::zero_field(), 10.0, 0.01), (FieldPreset::bias(), 7.0, 0.02)] {
        let s = setup(&preset, 500);
        let ctrl = spectrum(&s, f(omega), f(eta0), 50.0, f(0.02), None).unwrap();
        let free = spectrum(&s, 0.0, f(eta0), 50.0, f(0.2), None).unwrap();
        let w = |r: &nvdress::experiments::SpectrumResult| r.fwhm.map(|x| CONV.from_internal(x));
        let (wc, wf) = (w(&ctrl), w(&free));
        let fmt = |x: Option<f64>| x.map_or("none".into(), |v| format!("{v:.4}"));
        let (dc, df) = (100.0 * ctrl.depth.abs(), 100.0 * free.depth.abs());
        if preset.name == "zero-field" {
            checks.push((within(dc, 63.0, 10.0), format!("zero-field controlled depth {dc:.1}% (63+-10)")));
            checks.push((
                wc.is_some_and(|x| within(x, 0.02, 0.01)),
                format!("controlled FWHM {} (0.02+-0.01)", fmt(wc)),
            ));
            checks.push((within(df, 21.0, 8.0), format!("uncontrolled depth {df:.1}% (21+-8)")));
            checks.push((
                wf.is_some_and(|x| within(x, 0.2, 0.08)),
                format!("uncontrolled FWHM {} (0.2+-0.08)", fmt(wf)),
            ));
        } else {
            checks.push((within(dc, 42.0, 10.0), format!("bias controlled depth {dc:.1}% (42+-10)")));
            checks.push((within(df, 30.0, 10.0), format!("uncontrolled depth {df:.1}% (30+-10)")));
            let ratio = match (wc, wf) {
                (Some(c), Some(u)) => u / c,
                _ => 0.0,
            };
            checks.push((ratio >= 5.0, format!("FWHM ratio {ratio:.1} (>=5; {} vs {})", fmt(wf), fmt(wc))));
        }
    }
    verdict(&checks)
}

// 6. Direction inference
fn direction() -> Verdict {
    let mut s = setup(&FieldPreset::zero_field(), 500);
    let theta_sig = 0.2 * PI;
    s.theta_sig = theta_sig;
    let step = 0.05 * PI;
    let thetas: Vec<f64> = (-10..=10).map(|k| theta_sig + k as f64 * step).collect();
    let series = angle(&s, f(10.0), f(0.01), 50.0, &thetas).unwrap();
    let mag: Vec<f64> = series.y.iter().map(|v| v.abs()).collect();
    let best = (0..mag.len()).fold(0, |b, i| if mag[i] > mag[b] { i } else { b });
    let offset = (thetas[best] - theta_sig) / step;
    let plateau = (8..=12).map(|i| mag[best] - mag[i]).fold(0.0, f64::max);
    verdict(&[
        (offset.abs() <= 1.0 + 1e-9, format!("extremum at theta-theta_sig = {offset:.0} steps")),
        (
            plateau * 100.0 <= 3.0,
            format!("plateau drop {:.2} pts within 0.1 pi (max {:.1}%)", 100.0 * plateau, 100.0 * mag[best]),
        ),
    ])
}

// 7. Sensitivity crossover
fn crossover() -> Verdict {
    let at = |pts: &[SensitivityPoint], t: f64| *pts.iter().find(|p| (p.t - t).abs() < 1e-9).unwrap();
    let show = |p: SensitivityPoint| format!("{:.4}{}", CONV.from_internal(p.sensitivity), if p.flagged { "*" } else { "" });
    let mut checks = Vec::new();
    for (preset, omega, eta0) in [(FieldPreset::bias(), 7.0, 0.02), (FieldPreset::zero_field(), 10.0, 0.01)] {
        let s = setup(&preset, 500);
        let ctrl = sensitivity(&s, f(omega), f(eta0), 5.0, 55.0).unwrap();
        let free = sensitivity(&s, 0.0, f(eta0), 5.0, 55.0).unwrap();
        let better = |t: f64, controlled: bool| {
            let (c, u) = (at(&ctrl, t), at(&free, t));
            let ok = !c.flagged && !u.flagged && ((c.sensitivity < u.sensitivity) == controlled);
            (
                ok,
                format!(
                    "{} t={t}: {} better (ctrl {} vs free {})",
                    preset.name,
                    if controlled { "controlled" } else { "uncontrolled" },
                    show(c),
                    show(u)
                ),
            )
        };
        if preset.name == "bias" {
            checks.push(better(5.0, false));
            checks.push(better(30.0, true));
        } else {
            checks.push(better(20.0, true));
            checks.push(better(40.0, true));
            checks.push(better(55.0, false));
        }
    }
    verdict(&checks)
}

// 8. Filter-oracle equivalence
fn filter_equivalence() -> Verdict {
    let nv = NVParams::from_preset(&FieldPreset::zero_field(), CONV).unwrap().without_decay();
    let mut s = setup(&FieldPreset::zero_field(), 0);
    s.nv = nv;
    s.model = EngineModel::Lambda;
    let ou = s.dephasing.unwrap();
    let mut checks = Vec::new();
    for (omega, t, runs) in [(0.0, 0.5, 20_000), (10.0, 50.0, 4000)] {
        s.ensemble.n_runs = runs;
        let series = coherence_vs_time(&s, f(omega), t, t).unwrap();
        let (l, se) = (*series.y.last().unwrap(), *series.stderr.last().unwrap());
        let oracle = 1.0 - second_order_l(&ou, &FilterParams::new(f(omega), t).unwrap()).unwrap();
        let mc = 1.0 - l;
        let rel = (mc - oracle) / oracle;
        checks.push((
            rel.abs() <= 0.05 && oracle <= 0.1,
            format!("Omega={omega} t={t}: 1-|L| {mc:.4e} (se {se:.1e}) vs {oracle:.4e}, rel {rel:+.3}"),
        ));
    }
    verdict(&checks)
}

// 9. Structural invariants
fn invariants() -> Verdict {
    let mut checks = Vec::new();
    let mut decoupling = 0.0f64;
    let mut gap = 0.0f64;
    let mut kappa = 0.0f64;
    for preset in [FieldPreset::zero_field(), FieldPreset::bias()] {
        let nv = NVParams::from_preset(&preset, CONV).unwrap();
        for omega in [0.5, 10.0, 70.0] {
            for phi in [0.0, 1.0, PI, -2.5] {
                let drive = matched_drive(&nv, f(omega), phi).unwrap();
                let h = build_lambda_hamiltonian(&nv, &drive);
                let d = dark_state(&nv, &drive).unwrap();
                decoupling = decoupling.max(matrix_element(&Level::A2.ket(), &h, &d).norm() / f(omega));
                let ev = restricted_spectrum(&h, &[Level::Minus, Level::Plus, Level::A2]);
                let half = 0.5 * f(omega);
                for (v, e) in ev.iter().zip([-half, 0.0, half]) {
                    gap = gap.max((v - e).abs() / f(omega));
                }
                kappa = kappa.max(kappa_fraction(&nv, &drive).unwrap().abs());
            }
        }
    }
    checks.push((decoupling < 1e-12, format!("dark coupling {decoupling:.1e}")));
    checks.push((gap < 1e-12, format!("dressed gap error {gap:.1e}")));
    checks.push((kappa < 1e-12, format!("matched kappa {kappa:.1e}")));

    // density-matrix bounds along noisy trajectories
    let mut s = setup(&FieldPreset::zero_field(), 1);
    s.drive_noise = Some(nvdress::ensemble::DriveNoise { delta_rel: 0.02, tau: 100.0 });
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for model in [EngineModel::LambdaEliminated, EngineModel::Lambda] {
        s.model = model;
        let mut sc = s.signal_scenario(f(10.0), f(0.05), s.resonance(f(10.0)).unwrap(), 20.0, 5.0).unwrap();
        sc.initial = InitialState::Zero;
        let (program, cfg) = nvdress::ensemble::integrator_for(&sc).unwrap();
        for run in 0..4 {
            let mut bank = NoiseBank::for_run(sc.noise_params().unwrap(), SEED, run);
            for t_end in [5.0, 20.0] {
                let mut b = bank.clone();
                let tr = evolve(&sc.initial_density().unwrap(), &program, &mut b, 0.3, &cfg, t_end, &[]).unwrap();
                let d = tr.final_state.diagnostics();
                worst.0 = worst.0.max(d.trace_deviation);
                worst.1 = worst.1.max(d.hermiticity);
                worst.2 = worst.2.min(d.min_eigenvalue);
            }
            bank.advance(0.0);
        }
    }
    checks.push((
        worst.0 < 1e-8 && worst.1 < 1e-12 && worst.2 > -1e-6,
        format!("trace dev {:.1e}, hermiticity {:.1e}, min eigenvalue {:.1e}", worst.0, worst.1, worst.2),
    ));

    // RK4 convergence order on a driven, decaying, signal-carrying program
    let nv = NVParams::from_preset(&FieldPreset::zero_field(), CONV).unwrap();
    let mut sc = Scenario::matched(nv.clone(), f(10.0), PI, EngineModel::Lambda).unwrap();
    sc.signal = Some(SignalParams {
        eta0: f(2.0),
        omega_s: nv.frame_offset() + 3.0,
        theta_sig: 0.0,
        phase_policy: PhasePolicy::Fixed,
        phase: 0.0,
    });
    sc.signal_mode = SignalMode::ZeroField;
    let program = sc.program().unwrap();
    let rho0 = DensityMatrix::basis(Level::Zero);
    let t_end = 1.0;
    let finals: Vec<_> = [200usize, 400, 800, 1600]
        .iter()
        .map(|&n| {
            let cfg = IntegratorConfig {
                dt: t_end / n as f64,
                record_stride: n,
                trace_tol: 1e-8,
                positivity_tol: 1e-3,
            };
            evolve(&rho0, &program, &mut NoiseBank::silent(), 0.0, &cfg, t_end, &[Observable::Population(Level::Zero)])
                .unwrap()
                .final_state
                .into_operator()
        })
        .collect();
    let diffs: Vec<f64> = finals.windows(2).map(|w| (w[0] - w[1]).norm()).collect();
    let orders: Vec<f64> = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    checks.push((
        orders.iter().all(|p| (3.5..=4.5).contains(p)),
        format!("RK4 observed order {:.2}, {:.2}", orders[0], orders[1]),
    ));

    // thread-count invariance
    let mut s = setup(&FieldPreset::bias(), 24);
    s.drive_noise = Some(nvdress::ensemble::DriveNoise { delta_rel: 0.01, tau: 100.0 });
    let sc = s.signal_scenario(f(7.0), f(0.02), s.resonance(f(7.0)).unwrap(), 10.0, 5.0).unwrap();
    let with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_ensemble(&s.ensemble, &sc).unwrap())
    };
    checks.push((with(1) == with(4), "1 vs 4 threads bitwise identical".into()));
    verdict(&checks)
}

// 10. Drive-fluctuation robustness
fn fluctuation_robustness() -> Verdict {
    let preset = FieldPreset::zero_field();
    let s = setup(&preset, 500);
    let res = s.resonance(f(10.0)).unwrap();
    let grid: Vec<f64> = (-2..=2).map(|k| res + f(0.002) * k as f64).collect();
    let depth = |delta: f64| {
        let mut local = s.clone();
        local.drive_noise = (delta > 0.0).then_some(nvdress::ensemble::DriveNoise { delta_rel: delta, tau: 100.0 });
        let r = spectrum(&local, f(10.0), f(0.01), 50.0, f(0.02), Some(grid.clone())).unwrap();
        100.0 * r.depth.abs()
    };
    let (d0, d1) = (depth(0.0), depth(0.005));
    let s = setup(&preset, 1000);
    let series = drive_fluctuations(&s, f(10.0), &[0.0, 0.02], 50.0).unwrap();
    let (l0, l2) = (series.y[0], series.y[1]);
    let rel = (l2 - l0).abs() / l0;
    verdict(&[
        ((d1 - d0).abs() < 5.0, format!("depth {d0:.1}% -> {d1:.1}% at delta=0.005")),
        (rel <= 0.2, format!("|L(50)| {l0:.3} -> {l2:.3} at delta=0.02 ({:.1}%)", 100.0 * rel)),
    ])
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        (1, "OU exactness", ou_exactness),
        (2, "free-induction calibration", free_induction),
        (3, "coherence protection", protection),
        (4, "drive-amplitude optimum", drive_optimum),
        (5, "spectrum narrowing", narrowing),
        (6, "direction inference", direction),
        (7, "sensitivity crossover", crossover),
        (8, "filter-oracle equivalence", filter_equivalence),
        (9, "structural invariants", invariants),
        (10, "drive-fluctuation robustness", fluctuation_robustness),
    ];
    let selected: Option<Vec<u32>> = std::env::var("NVDRESS_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    let mut lines = Vec::new();
    for (id, name, check) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let known = KNOWN_SHORTFALLS.contains(&id);
        let status = match (v.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => "FAIL",
        };
        let line = format!(
            "criterion {id:>2}: {status} | {name} | {} | {:.0} s",
            v.detail,
            start.elapsed().as_secs_f64()
        );
        println!("{line}");
        lines.push(line);
        if !v.pass && !known {
            unexpected.push(id);
        }
    }
    println!("\nacceptance summary");
    for l in &lines {
        println!("{}", l.split(" | ").take(2).collect::<Vec<_>>().join(" | "));
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}
