//! End-to-end acceptance run: ten criteria, one pass/fail line each.
//! Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use lattice_kpp::coeffs::make_family;
use lattice_kpp::floquet::FloquetOptions;
use lattice_kpp::lattice::{compute_entire_solution, Boundary, EntireOptions, Integrator, LatticeState};
use lattice_kpp::metrics::{part_metric_monitor, ratio_norm, WaveSample};
use lattice_kpp::waves_periodic::{build_periodic_wave, WaveOptions};
use lattice_kpp::waves_timehet::{build_transition_wave, c0_tilde, FBarStats, TimeHetOptions};
use lattice_kpp::{CoefficientField, FamilyParams, FloquetSolver, SimOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn homogeneous() -> CoefficientField {
    make_family(&FamilyParams::Homogeneous { d: 1.0, r: 1.0, a: 1.0 }).unwrap()
}

fn tsp() -> CoefficientField {
    make_family(&FamilyParams::shipped_time_space_periodic()).unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Run `kpp` and return its manifest.
fn kpp(command: &str, cfg: &str, out: &Path) -> Value {
    let status = Command::new(env!("CARGO_BIN_EXE_kpp"))
        .args([command, "--config"])
        .arg(config(cfg))
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("kpp runs");
    assert!(status.code().is_some(), "kpp {command} killed");
    let text = std::fs::read_to_string(out.join("manifest.json")).expect("manifest written");
    serde_json::from_str(&text).unwrap()
}

fn num(v: &Value, path: &[&str]) -> f64 {
    let mut cur = v;
    for p in path {
        cur = &cur[*p];
    }
    cur.as_f64().unwrap_or(f64::NAN)
}

/// Every file of the directory, with the wall clock removed from the manifest.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).unwrap();
        if name == "manifest.json" {
            let mut v: Value = serde_json::from_slice(&bytes).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock_seconds");
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    out
}

fn floquet_closed_form() -> Outcome {
    let start = Instant::now();
    let solver = FloquetSolver::new(&homogeneous(), &FloquetOptions::default()).unwrap();
    let worst = [0.25, 0.5, 1.0, 2.0]
        .iter()
        .map(|&mu: &f64| (solver.lambda(mu).unwrap() - (mu.exp() + (-mu).exp() - 1.0)).abs())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 5.0, format!("max |lambda - closed form| = {worst:.2e}, {secs:.2}s"))
}

fn critical_speed() -> Outcome {
    let start = Instant::now();
    let solver = FloquetSolver::new(&homogeneous(), &FloquetOptions::default()).unwrap();
    let sp = solver.find_mu_star((0.05, 5.0)).unwrap();
    let n = 10_000;
    let grid = (0..n)
        .map(|k| 0.05 + 4.95 * k as f64 / (n - 1) as f64)
        .map(|mu: f64| (mu.exp() + (-mu).exp() - 1.0) / mu)
        .fold(f64::INFINITY, f64::min);
    let (c0, _) = c0_tilde(&FBarStats::constant(1.0, 1.0)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (e1, e2) = ((sp.c_star - grid).abs(), (sp.c_star - c0).abs());
    outcome(
        e1 <= 1e-6 && e2 <= 1e-6 && secs < 10.0,
        format!("c* = {:.8}, grid oracle off by {e1:.1e}, averaged speed off by {e2:.1e}, {secs:.2}s", sp.c_star),
    )
}

fn comparison_principle() -> Outcome {
    let start = Instant::now();
    let field = tsp();
    let sim = SimOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
        .map(|_| {
            let u: Vec<f64> = (0..201).map(|_| rng.gen_range(0.0..1.5)).collect();
            let v = u.iter().map(|&x| x + rng.gen_range(0.0..0.5) * rng.gen_range(0.0..1.0f64).powi(3)).collect();
            (u, v)
        })
        .collect();
    let worst = lattice_kpp::par::map_slice(&pairs, |(u, v)| {
        let mut integ = Integrator::new(&field, &sim).unwrap();
        let mut su = LatticeState::new(-100, u.clone(), 0.0, Boundary::ClampBoth(0.0)).unwrap();
        let mut sv = LatticeState::new(-100, v.clone(), 0.0, Boundary::ClampBoth(0.0)).unwrap();
        let mut lows = Vec::new();
        integ
            .advance(&mut su, 5.0, &mut |s| {
                lows.push(s.values.clone());
                Ok(())
            })
            .unwrap();
        let mut k = 0;
        let mut worst = f64::NEG_INFINITY;
        integ
            .advance(&mut sv, 5.0, &mut |s| {
                worst = lows[k].iter().zip(&s.values).map(|(a, b)| a - b).fold(worst, f64::max);
                k += 1;
                Ok(())
            })
            .unwrap();
        worst
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-10 && secs < 60.0, format!("max (u - v) over all steps = {worst:.2e}, {secs:.2}s"))
}

fn part_metric() -> Outcome {
    let start = Instant::now();
    let field = tsp();
    let sim = SimOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
        .map(|_| {
            let u = (0..52).map(|_| rng.gen_range(0.1..=2.0)).collect();
            let v = (0..52).map(|_| rng.gen_range(0.1..=2.0)).collect();
            (u, v)
        })
        .collect();
    let traces =
        lattice_kpp::par::map_slice(&pairs, |(u, v)| part_metric_monitor(&field, u, v, 0.0, 5.0, &sim, 0.5, 1.0));
    let (mut inc, mut dec) = (f64::NEG_INFINITY, f64::INFINITY);
    for tr in traces {
        let tr = tr.unwrap();
        inc = inc.max(tr.max_increase);
        if let Some(d) = tr.decrement {
            dec = dec.min(d);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        inc <= 1e-8 && dec >= 1e-3 && secs < 60.0,
        format!("largest step increase {inc:.2e}, smallest decrement over tau = 1 is {dec:.3e}, {secs:.2}s"),
    )
}

/// The periodic solution of `u' = u (r(t) - u)` via `w = 1/u`, `w' = 1 - r w`:
/// `w(t) = int_{t-T}^t e^{R(s) - R(t)} ds / (1 - e^{-R(T)})`.
fn periodic_logistic(t: f64, r_amp: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let big_r = |s: f64| s + r_amp * (1.0 - (two_pi * s).cos()) / two_pi;
    let n = 4000;
    let h = 1.0 / n as f64;
    let g = |s: f64| (big_r(s) - big_r(t)).exp();
    let mut sum = g(t - 1.0) + g(t);
    for k in 1..n {
        sum += if k % 2 == 1 { 4.0 } else { 2.0 } * g(t - 1.0 + k as f64 * h);
    }
    let w = sum * h / 3.0 / (1.0 - (-big_r(1.0)).exp());
    1.0 / w
}

fn entire_solution() -> Outcome {
    let field = make_family(&FamilyParams::TimePeriodic { period: 1.0, d: 1.0, r0: 1.0, r_amp: 0.5, a: 1.0 }).unwrap();
    let opts = EntireOptions { tol: 1e-10, ..Default::default() };
    let e = compute_entire_solution(&field, 1.0, &opts, &SimOptions::default()).unwrap();
    // history[k] compares pullback periods k + 1 and k + 2.
    let first = e.history.iter().position(|&d| d < 1e-6).map_or(usize::MAX, |k| k + 2);
    let oracle = (0..=50)
        .map(|k| k as f64 / 50.0)
        .flat_map(|t| [0i64, 1, 7].map(|j| (e.value(t, j) - periodic_logistic(t, 0.5)).abs()))
        .fold(0.0, f64::max);
    let defect = e.periodicity_defect();
    let ok = first <= 60 && oracle < 1e-6 && defect < 1e-5;
    outcome(
        ok,
        format!(
            "sup step below 1e-6 after {first} periods, oracle error {oracle:.2e}, periodicity defect {defect:.2e}"
        ),
    )
}

fn periodic_wave(m: &Value, secs: f64) -> Outcome {
    let d = &m["diagnostics"];
    let iters = num(d, &["iterations_upper"]).max(num(d, &["iterations_lower"]));
    let env = num(d, &["wave", "envelope_violation"]);
    let res = num(d, &["wave", "ode_residual"]);
    let per = ["time_defect_upper", "time_defect_lower", "space_defect_upper", "space_defect_lower"]
        .iter()
        .map(|k| num(d, &["wave", k]))
        .fold(0.0, f64::max);
    let c_gap = num(d, &["params", "c"]) - num(d, &["c_star"]);
    let ok = m["status"] == "pass"
        && iters <= 80.0
        && env <= 1e-8
        && res < 1e-6
        && per < 1e-5
        && (c_gap - 0.5).abs() < 1e-12;
    outcome(
        ok,
        format!(
            "{iters} iterations, envelope violation {env:.1e}, ODE residual {res:.1e}, periodicity defect {per:.1e}, {secs:.0}s"
        ),
    )
}

fn uniqueness(m: &Value) -> Outcome {
    let gap = num(&m["diagnostics"], &["wave", "gap"]);
    outcome(gap < 1e-4, format!("sup |upper - lower| = {gap:.2e}"))
}

fn stability(m: &Value) -> Outcome {
    let d = &m["diagnostics"];
    let fin = num(d, &["final_ratio"]);
    let inc = num(d, &["max_increase_after_burn_in"]);
    let p = &m["parameters"];
    let setup_ok = num(p, &["t_end"]) == 40.0
        && num(p, &["burn_in"]) == 5.0
        && num(p, &["noise_lo"]) == 0.8
        && num(p, &["noise_hi"]) == 1.25;
    outcome(
        setup_ok && fin < 0.01 && inc <= 1e-6,
        format!("ratio norm at t = 40 is {fin:.2e}, largest increase after t = 5 is {inc:.1e}"),
    )
}

/// Constant growth: the time-heterogeneous wave against the periodic
/// construction on the homogeneous field at the same speed.
fn degenerate_ratio() -> (f64, f64) {
    let sim = SimOptions::default();
    let flat =
        make_family(&FamilyParams::TimeOnly { d: 1.0, r0: 1.0, amplitudes: vec![], frequencies: vec![], a: 1.0 })
            .unwrap();
    let th = build_transition_wave(&flat, None, &TimeHetOptions::default(), &sim).unwrap();
    let (_, _, _, pw) = build_periodic_wave(&homogeneous(), &WaveOptions::default(), &sim).unwrap();
    let speed_gap = (th.gamma() - pw.params.c).abs();
    let mut worst = 0.0f64;
    for a in &th.samples {
        let Some(b) = pw.trajectory.iter().find(|b| (b.time - a.time).abs() < 1e-9) else { continue };
        let front = front_site(b);
        let (us, vs): (Vec<f64>, Vec<f64>) =
            (front - 10..=front + 10).filter_map(|j| Some((a.get(j)?, b.get(j)?))).unzip();
        if us.len() == 21 {
            worst = worst.max(ratio_norm(&us, &vs).unwrap());
        }
    }
    (worst, speed_gap)
}

fn front_site(s: &WaveSample) -> i64 {
    let i = s.values.iter().rposition(|&u| u >= 0.5).unwrap_or(0);
    s.offset + i as i64
}

fn timehet_wave(m: &Value) -> Outcome {
    let d = &m["diagnostics"];
    let env = num(d, &["envelope_violation"]);
    let front = num(d, &["front_deviation"]);
    let margin = num(d, &["a_margin"]);
    let delta = num(d, &["delta"]);
    let gamma_gap = num(d, &["gamma"]) - num(d, &["c0_tilde"]);
    let (ratio, speed_gap) = degenerate_ratio();
    let ok = m["status"] == "pass"
        && env <= 1e-8
        && front <= 3.0
        && margin >= delta / 2.0
        && (gamma_gap - 0.5).abs() < 1e-12
        && ratio < 1e-3
        && speed_gap < 1e-6;
    outcome(
        ok,
        format!(
            "envelope violation {env:.1e}, front deviation {front:.2} sites, A margin {margin:.3} vs delta/2 = {:.3}, constant-growth ratio norm {ratio:.1e}",
            delta / 2.0
        ),
    )
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("floquet closed form", floquet_closed_form()),
        ("critical speed", critical_speed()),
        ("comparison principle", comparison_principle()),
        ("part metric", part_metric()),
        ("entire solution", entire_solution()),
    ];

    // The remaining criteria go through the binary, each run twice for the
    // determinism check.
    let runs: [(&str, &str); 7] = [
        ("floquet", "homogeneous.toml"),
        ("speed", "homogeneous.toml"),
        ("partmetric", "time_space_periodic.toml"),
        ("entire", "time_periodic.toml"),
        ("wave-periodic", "time_space_periodic.toml"),
        ("stability", "time_space_periodic.toml"),
        ("wave-timehet", "quasi_periodic.toml"),
    ];
    let mut manifests = BTreeMap::new();
    let mut mismatches = Vec::new();
    let mut wave_secs = 0.0;
    for (cmd, cfg) in runs {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        let start = Instant::now();
        let m = kpp(cmd, cfg, &a);
        if cmd == "wave-periodic" {
            wave_secs = start.elapsed().as_secs_f64();
        }
        kpp(cmd, cfg, &b);
        let (sa, sb) = (snapshot(&a), snapshot(&b));
        if sa.keys().ne(sb.keys()) {
            mismatches.push(format!("{cmd}: file sets differ"));
        }
        for (name, bytes) in &sa {
            if sb.get(name) != Some(bytes) {
                mismatches.push(format!("{cmd}/{name}"));
            }
        }
        manifests.insert(cmd, m);
    }
    results.push(("periodic wave", periodic_wave(&manifests["wave-periodic"], wave_secs)));
    results.push(("uniqueness", uniqueness(&manifests["wave-periodic"])));
    results.push(("stability", stability(&manifests["stability"])));
    results.push(("time-heterogeneous wave", timehet_wave(&manifests["wave-timehet"])));
    let detail = if mismatches.is_empty() {
        format!("{} commands byte-identical across two runs", runs.len())
    } else {
        format!("differences in {}", mismatches.join(", "))
    };
    results.push(("determinism", outcome(mismatches.is_empty(), detail)));

    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {:<24} {}  {}", k + 1, name, if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.passed);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
