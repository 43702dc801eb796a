use std::sync::Arc;

use lattice_kpp::coeffs::{audit_h0, make_family, CoefficientField, SampleGrid};
use lattice_kpp::config::Config;
use lattice_kpp::error::{Error, Result};
use lattice_kpp::floquet::FloquetSolver;
use lattice_kpp::lattice::{
    compute_entire_solution, Boundary, EntireKind, Integrator, LatticeState, RightGhost, SimOptions,
};
use lattice_kpp::metrics::{
    audit_stability_hypotheses, front_location, part_metric_monitor, ratio_convergence, PerturbationRun, RatioTrace,
    WaveSample,
};
use lattice_kpp::numerics::step_count;
use lattice_kpp::output::{line_chart, ArtifactWriter, Cell, Series, Table, PALETTE};
use lattice_kpp::waves_periodic::{build_periodic_wave, PeriodicSetup, PeriodicWave, WaveProfile, GAP_LIMIT};
use lattice_kpp::waves_timehet::{build_transition_wave, TimeHetWave};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::Command;

pub struct Report {
    pub passed: bool,
    pub parameters: Value,
    pub tolerances: Value,
    pub diagnostics: Value,
}

pub fn dispatch(cmd: Command, cfg: &Config, w: &mut ArtifactWriter) -> Result<Report> {
    let field = make_family(&cfg.field)?;
    match cmd {
        Command::Audit => audit(cfg, &field, w),
        Command::Simulate => simulate(cfg, &field, w),
        Command::Entire => entire(cfg, &field, w),
        Command::Floquet => floquet(cfg, &field, w),
        Command::Speed => speed(cfg, &field, w),
        Command::WavePeriodic => wave_periodic(cfg, &field, w),
        Command::WaveTimehet => wave_timehet(cfg, &field, w),
        Command::Partmetric => partmetric(cfg, &field, w),
        Command::Stability => stability(cfg, &field, w),
        Command::Uniqueness => uniqueness(cfg, &field, w),
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn samples_table(samples: &[WaveSample], every: usize) -> Table {
    let mut t = Table::new(&["t", "j", "u"]);
    for s in samples.iter().step_by(every.max(1)) {
        for (i, &u) in s.values.iter().enumerate() {
            t.push(vec![s.time.into(), (s.offset + i as i64).into(), u.into()]);
        }
    }
    t
}

fn profile_series(samples: &[WaveSample], count: usize) -> Vec<Series> {
    let stride = (samples.len() / count.max(1)).max(1);
    samples
        .iter()
        .step_by(stride)
        .take(PALETTE.len())
        .enumerate()
        .map(|(k, s)| {
            let pts = s.values.iter().enumerate().map(|(i, &u)| ((s.offset + i as i64) as f64, u)).collect();
            Series::new(format!("t = {:.2}", s.time), PALETTE[k], pts)
        })
        .collect()
}

fn audit(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let mut grid = SampleGrid::for_field(field, cfg.audit.horizon);
    grid.dt = cfg.audit.dt;
    let report = audit_h0(field, &grid)?;
    let mut t = Table::new(&["clause", "passed", "value", "witness"]);
    for c in &report.clauses {
        t.push(vec![c.clause.clone().into(), c.passed.into(), c.value.into(), c.witness.clone().into()]);
    }
    w.table("audit.csv", &t)?;
    Ok(Report {
        passed: report.passed(),
        parameters: to_value(&grid),
        tolerances: json!({}),
        diagnostics: to_value(&report),
    })
}

fn simulate(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let sc = &cfg.simulate;
    let uplus = Arc::new(compute_entire_solution(field, sc.t_end, &cfg.entire, &cfg.sim)?);
    let n = sc.sites.max(3);
    let offset = -((n / 2) as i64);
    let values: Vec<f64> = match sc.initial.as_str() {
        "step" => (0..n).map(|i| offset + i as i64).map(|j| if j <= 0 { uplus.value(0.0, j) } else { 0.0 }).collect(),
        "random" => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..n).map(|_| rng.gen::<f64>() * field.m0()).collect()
        }
        other => return Err(Error::Config(format!("simulate.initial must be `step` or `random`, got `{other}`"))),
    };
    let boundary = Boundary::Front { uplus: uplus.clone(), right: RightGhost::Zero };
    let mut state = LatticeState::new(offset, values, 0.0, boundary)?;
    let sim = SimOptions { output_stride: step_count(0.1, cfg.sim.dt), ..cfg.sim.clone() };
    let mut integ = Integrator::new(field, &sim)?;
    let mut samples = Vec::new();
    integ.advance(&mut state, sc.t_end, &mut |s| {
        samples.push(WaveSample::from_state(s));
        Ok(())
    })?;
    w.table("trajectory.csv", &samples_table(&samples, 1))?;
    let front = front_location(&samples, &uplus, 0.5);
    if let Ok(tr) = &front {
        let mut t = Table::new(&["t", "x"]);
        for (&time, &x) in tr.times.iter().zip(&tr.x) {
            t.push(vec![time.into(), x.into()]);
        }
        w.table("front.csv", &t)?;
    }
    w.write("profiles.svg", &line_chart("Solution profiles", "site j", "u", &profile_series(&samples, 5), false))?;
    let diagnostics = match &front {
        Ok(tr) => json!({ "front_start": tr.x.first(), "front_end": tr.x.last(), "shift_bound": tr.shift_bound }),
        Err(e) => json!({ "front": e.to_string() }),
    };
    Ok(Report {
        passed: front.is_ok() || sc.initial == "random",
        parameters: to_value(&sc),
        tolerances: json!({ "uplus_tol": cfg.entire.tol }),
        diagnostics,
    })
}

fn entire(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let e = compute_entire_solution(field, cfg.audit.horizon, &cfg.entire, &cfg.sim)?;
    let mut t = Table::new(&["t", "j", "u_plus"]);
    let times = e.times();
    for (time, row) in times.iter().zip(&e.samples) {
        for (j, &u) in row.iter().enumerate() {
            t.push(vec![(*time).into(), j.into(), u.into()]);
        }
    }
    w.table("entire.csv", &t)?;
    let mut h = Table::new(&["iteration", "delta"]);
    for (k, &d) in e.history.iter().enumerate() {
        h.push(vec![(k + 1).into(), d.into()]);
    }
    w.table("history.csv", &h)?;
    let series: Vec<Series> = (0..e.site_period.min(PALETTE.len()))
        .map(|j| {
            Series::new(format!("j = {j}"), PALETTE[j], times.iter().zip(&e.samples).map(|(&t, r)| (t, r[j])).collect())
        })
        .collect();
    w.write("entire.svg", &line_chart("Entire solution u+", "t", "u+", &series, false))?;
    let periodic = matches!(e.kind, EntireKind::Periodic { .. });
    let defect = e.periodicity_defect();
    Ok(Report {
        passed: !periodic || defect < 10.0 * cfg.entire.tol.max(1e-6),
        parameters: to_value(&cfg.entire),
        tolerances: json!({ "tol": cfg.entire.tol }),
        diagnostics: json!({
            "iterations": e.history.len() + 1,
            "last_delta": e.history.last(),
            "periodicity_defect": if periodic { Some(defect) } else { None },
            "inf": e.inf,
            "sup": e.sup,
        }),
    })
}

fn floquet(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let fc = &cfg.floquet;
    let solver = FloquetSolver::new(field, &fc.options())?;
    let mut t = Table::new(&["mu", "lambda", "lambda_over_mu", "residual", "power_iterations"]);
    let mut psi = Table::new(&["mu", "t", "j", "psi"]);
    for &mu in &fc.mus {
        let r = solver.solve(mu)?;
        t.push(vec![mu.into(), r.lambda.into(), r.speed().into(), r.residual.into(), r.power_iterations.into()]);
        let every = (r.psi.len() / 100).max(1);
        for (k, row) in r.psi.iter().enumerate().step_by(every) {
            for (j, &v) in row.iter().enumerate() {
                psi.push(vec![mu.into(), (k as f64 * r.h).into(), j.into(), v.into()]);
            }
        }
    }
    w.table("lambda.csv", &t)?;
    w.table("psi.csv", &psi)?;
    let scan: Vec<(f64, f64)> = (0..=100)
        .map(|k| fc.mu_lo + (fc.mu_hi - fc.mu_lo) * k as f64 / 100.0)
        .map(|mu| solver.lambda(mu).map(|l| (mu, l)))
        .collect::<Result<_>>()?;
    w.write(
        "lambda.svg",
        &line_chart("Principal exponent", "mu", "lambda(mu)", &[Series::new("lambda", PALETTE[0], scan)], false),
    )?;
    Ok(Report {
        passed: true,
        parameters: to_value(fc),
        tolerances: to_value(&fc.options()),
        diagnostics: json!({ "period": solver.period(), "sites": solver.sites() }),
    })
}

fn speed(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let fc = &cfg.floquet;
    let solver = FloquetSolver::new(field, &fc.options())?;
    let sp = solver.find_mu_star((fc.mu_lo, fc.mu_hi))?;
    let mut t = Table::new(&["mu_star", "c_star", "grid_min", "ties"]);
    t.push(vec![sp.mu_star.into(), sp.c_star.into(), sp.grid_min.into(), sp.ties.into()]);
    w.table("speed.csv", &t)?;
    let mut s = Table::new(&["mu", "lambda_over_mu"]);
    for &(mu, c) in &sp.scan {
        s.push(vec![mu.into(), c.into()]);
    }
    w.table("scan.csv", &s)?;
    let pts: Vec<(f64, f64)> = sp.scan.iter().step_by(20).copied().collect();
    w.write(
        "speed.svg",
        &line_chart("Speed function lambda(mu)/mu", "mu", "c", &[Series::new("lambda/mu", PALETTE[0], pts)], false),
    )?;
    let gap = (sp.c_star - sp.grid_min).abs();
    Ok(Report {
        passed: gap <= 1e-6,
        parameters: json!({ "bracket": sp.bracket }),
        tolerances: json!({ "grid_cross_check": 1e-6 }),
        diagnostics: json!({ "mu_star": sp.mu_star, "c_star": sp.c_star, "grid_min": sp.grid_min, "ties": sp.ties }),
    })
}

fn profile_table(upper: &WaveProfile, lower: &WaveProfile) -> Table {
    let mut t = Table::new(&["t", "z", "x", "upper", "lower"]);
    for (a, &time) in upper.t_grid.iter().enumerate() {
        for (l, &z) in upper.z_grid.iter().enumerate() {
            for (i, &x) in upper.x_grid.iter().enumerate() {
                t.push(vec![time.into(), z.into(), x.into(), upper.value(a, l, i).into(), lower.value(a, l, i).into()]);
            }
        }
    }
    t
}

fn history_table(upper: &WaveProfile, lower: &WaveProfile) -> Table {
    let mut t = Table::new(&["iteration", "delta_upper", "delta_lower"]);
    let n = upper.iterates_delta.len().max(lower.iterates_delta.len());
    for k in 0..n {
        let get = |v: &[f64]| v.get(k).copied().unwrap_or(f64::NAN);
        t.push(vec![(k + 1).into(), get(&upper.iterates_delta).into(), get(&lower.iterates_delta).into()]);
    }
    t
}

fn write_periodic(
    cfg: &Config,
    w: &mut ArtifactWriter,
    setup: &PeriodicSetup,
    upper: &WaveProfile,
    lower: &WaveProfile,
    wave: &PeriodicWave,
) -> Result<bool> {
    w.table("profile.csv", &profile_table(upper, lower))?;
    w.table("wave.csv", &samples_table(&wave.trajectory, 10))?;
    w.table("iterations.csv", &history_table(upper, lower))?;
    let hyp = audit_stability_hypotheses(&setup.audit_input(wave, wave.diagnostics.d1_tight, 20, cfg.seed));
    let mut t = Table::new(&["clause", "passed", "value", "witness"]);
    for c in &hyp.clauses {
        t.push(vec![c.clause.clone().into(), c.passed.into(), c.value.into(), c.witness.clone().into()]);
    }
    w.table("hypotheses.csv", &t)?;
    w.write("wave.svg", &line_chart("Wave U(t, j)", "site j", "U", &profile_series(&wave.trajectory, 5), true))?;
    let hist = |v: &[f64]| v.iter().enumerate().map(|(k, &d)| ((k + 1) as f64, d)).collect::<Vec<_>>();
    let series = [
        Series::new("upper", PALETTE[0], hist(&upper.iterates_delta)),
        Series::new("lower", PALETTE[1], hist(&lower.iterates_delta)),
    ];
    w.write("iterations.svg", &line_chart("Monotone iteration", "iteration", "sup |w_n - w_(n-1)|", &series, true))?;
    Ok(hyp.passed())
}

fn periodic_diagnostics(setup: &PeriodicSetup, upper: &WaveProfile, lower: &WaveProfile, wave: &PeriodicWave) -> Value {
    json!({
        "c_star": wave.c_star,
        "mu_star": wave.mu_star,
        "params": wave.params,
        "d0": wave.d0,
        "iterations_upper": upper.iterations,
        "iterations_lower": lower.iterations,
        "preasymptotic_upper": upper.preasymptotic_violation,
        "preasymptotic_lower": lower.preasymptotic_violation,
        "plateau_floor_lower": lower.plateau_floor,
        "wave": wave.diagnostics,
        "failures": wave.failures,
        "uplus_iterations": setup.uplus.history.len() + 1,
    })
}

fn periodic_only(field: &CoefficientField) -> Result<()> {
    if field.structure().floquet_periods().is_none() {
        return Err(Error::Parameter("periodic waves need a periodic field; use wave-timehet".into()));
    }
    Ok(())
}

fn wave_periodic(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    periodic_only(field)?;
    let (setup, upper, lower, wave) = build_periodic_wave(field, &cfg.wave, &cfg.sim)?;
    let hyp_ok = write_periodic(cfg, w, &setup, &upper, &lower, &wave)?;
    Ok(Report {
        passed: wave.passed() && hyp_ok,
        parameters: to_value(&cfg.wave),
        tolerances: json!({ "tol": cfg.wave.tol, "uplus_tol": cfg.wave.uplus_tol }),
        diagnostics: periodic_diagnostics(&setup, &upper, &lower, &wave),
    })
}

fn uniqueness(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    periodic_only(field)?;
    let (_, upper, lower, wave) = build_periodic_wave(field, &cfg.wave, &cfg.sim)?;
    let mut t = Table::new(&["t", "z", "max_gap"]);
    let nx = upper.x_grid.len();
    for a in 0..upper.t_grid.len() {
        for l in 0..upper.z_grid.len() {
            let g = (0..nx).map(|i| (upper.value(a, l, i) - lower.value(a, l, i)).abs()).fold(0.0, f64::max);
            t.push(vec![upper.t_grid[a].into(), upper.z_grid[l].into(), g.into()]);
        }
    }
    w.table("gap.csv", &t)?;
    w.table("profile.csv", &profile_table(&upper, &lower))?;
    let gap = wave.diagnostics.gap;
    Ok(Report {
        passed: gap < GAP_LIMIT,
        parameters: to_value(&cfg.wave),
        tolerances: json!({ "gap_limit": GAP_LIMIT, "tol": cfg.wave.tol }),
        diagnostics: json!({ "gap": gap, "iterations_upper": upper.iterations, "iterations_lower": lower.iterations }),
    })
}

fn write_timehet(cfg: &Config, w: &mut ArtifactWriter, wave: &TimeHetWave) -> Result<()> {
    let every = step_count(0.5, cfg.timehet.sample_every);
    w.table("wave.csv", &samples_table(&wave.samples, every))?;
    let env = &wave.envelopes;
    let n = step_count(cfg.timehet.t_out, 0.1);
    let times: Vec<f64> = (0..=n).map(|k| cfg.timehet.t_out * k as f64 / n as f64).collect();
    let mut s = Table::new(&["t", "c", "integral_c"]);
    let mut a = Table::new(&["t", "A", "B"]);
    for &t in &times {
        s.push(vec![t.into(), env.speed.speed(t).into(), env.speed.integral(t).into()]);
        let b = lattice_kpp::numerics::lerp_uniform(&env.a.b, env.a.t0, env.a.h, t);
        a.push(vec![t.into(), env.a.value(t).into(), b.into()]);
    }
    w.table("speed.csv", &s)?;
    w.table("a_trace.csv", &a)?;
    let mut h = Table::new(&["iteration", "delta"]);
    for (k, &d) in wave.history.iter().enumerate() {
        h.push(vec![(k + 2).into(), d.into()]);
    }
    w.table("history.csv", &h)?;
    let mut series = Vec::new();
    if let Some(tr) = &wave.front {
        let mut f = Table::new(&["t", "x", "x0_plus_integral_c"]);
        let x0 = tr.x[0] as f64;
        for (&t, &x) in tr.times.iter().zip(&tr.x) {
            f.push(vec![t.into(), x.into(), (x0 + env.speed.integral(t)).into()]);
        }
        w.table("front.csv", &f)?;
        series.push(Series::new(
            "X(t)",
            PALETTE[0],
            tr.times.iter().zip(&tr.x).map(|(&t, &x)| (t, x as f64)).collect(),
        ));
        series.push(Series::new(
            "X(0) + int c",
            PALETTE[1],
            tr.times.iter().map(|&t| (t, x0 + env.speed.integral(t))).collect(),
        ));
    }
    series.push(Series::new("A(t)", PALETTE[2], times.iter().map(|&t| (t, env.a.value(t))).collect()));
    w.write("diagnostics.svg", &line_chart("Front location and auxiliary exponent", "t", "sites / A", &series, false))?;
    Ok(())
}

fn timehet_diagnostics(wave: &TimeHetWave) -> Value {
    json!({
        "stats": wave.stats,
        "c0_tilde": wave.c0_tilde,
        "mu_star": wave.mu_star,
        "mu": wave.envelopes.mu,
        "mu_tilde": wave.envelopes.mu_tilde,
        "gamma": wave.envelopes.gamma,
        "delta": wave.envelopes.delta,
        "b_inf": wave.envelopes.b_inf,
        "d1": wave.envelopes.d1,
        "d1_star": wave.d1_star,
        "a_margin": wave.envelopes.a.margin,
        "a_sup": wave.envelopes.a.sup,
        "iterations": wave.iterations,
        "envelope_violation": wave.envelope_violation,
        "front_deviation": wave.front_deviation,
        "decay_deviation": wave.decay_deviation,
        "retried": wave.retried,
        "failures": wave.failures,
    })
}

fn wave_timehet(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let wave = build_transition_wave(field, None, &cfg.timehet, &cfg.sim)?;
    write_timehet(cfg, w, &wave)?;
    Ok(Report {
        passed: wave.passed(),
        parameters: to_value(&cfg.timehet),
        tolerances: json!({ "tol": cfg.timehet.tol, "envelope": lattice_kpp::waves_timehet::ENVELOPE_LIMIT }),
        diagnostics: timehet_diagnostics(&wave),
    })
}

fn partmetric(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let pc = &cfg.partmetric;
    let p = field.structure().site_period();
    let sites = pc.sites.max(3).div_ceil(p) * p;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..pc.pairs)
        .map(|_| {
            let u = (0..sites).map(|_| rng.gen_range(pc.lo..=pc.hi)).collect();
            let v = (0..sites).map(|_| rng.gen_range(pc.lo..=pc.hi)).collect();
            (u, v)
        })
        .collect();
    let traces = lattice_kpp::par::map_slice(&pairs, |(u, v)| {
        part_metric_monitor(field, u, v, 0.0, pc.t_end, &cfg.sim, pc.sigma, pc.tau)
    });
    let mut t = Table::new(&["pair", "rho_start", "rho_end", "max_increase", "decrement"]);
    let (mut worst_inc, mut worst_dec) = (f64::NEG_INFINITY, f64::INFINITY);
    for (k, tr) in traces.into_iter().enumerate() {
        let tr = tr?;
        worst_inc = worst_inc.max(tr.max_increase);
        if let Some(d) = tr.decrement {
            worst_dec = worst_dec.min(d);
        }
        t.push(vec![
            k.into(),
            tr.rho[0].into(),
            (*tr.rho.last().unwrap()).into(),
            tr.max_increase.into(),
            tr.decrement.map_or(Cell::S(String::new()), Cell::F),
        ]);
    }
    w.table("partmetric.csv", &t)?;
    let dec_ok = !worst_dec.is_finite() || worst_dec >= 1e-3;
    Ok(Report {
        passed: worst_inc <= 1e-8 && dec_ok,
        parameters: json!({ "sites": sites, "pairs": pc.pairs, "t_end": pc.t_end, "range": [pc.lo, pc.hi], "sigma": pc.sigma, "tau": pc.tau }),
        tolerances: json!({ "non_increase": 1e-8, "decrement": 1e-3 }),
        diagnostics: json!({ "max_increase": worst_inc, "min_decrement": if worst_dec.is_finite() { Some(worst_dec) } else { None } }),
    })
}

fn ratio_outputs(w: &mut ArtifactWriter, tr: &RatioTrace) -> Result<()> {
    let mut t = Table::new(&["t", "ratio_norm"]);
    for (&time, &r) in tr.times.iter().zip(&tr.ratio) {
        t.push(vec![time.into(), r.into()]);
    }
    w.table("ratio.csv", &t)?;
    let pts = tr.times.iter().zip(&tr.ratio).map(|(&a, &b)| (a, b)).collect();
    w.write(
        "ratio.svg",
        &line_chart("Ratio norm to the wave", "t", "sup |u/U - 1|", &[Series::new("ratio", PALETTE[0], pts)], true),
    )
}

fn stability(cfg: &Config, field: &CoefficientField, w: &mut ArtifactWriter) -> Result<Report> {
    let sc = &cfg.stability;
    let sim = SimOptions { output_stride: step_count(0.1, cfg.sim.dt), ..cfg.sim.clone() };
    let (start, run, wave_info) = if field.structure().floquet_periods().is_some() {
        let setup = PeriodicSetup::new(field, &cfg.wave, &cfg.sim)?;
        let upper = lattice_kpp::waves_periodic::iterate_profile(&setup, lattice_kpp::waves_periodic::Side::Upper)?;
        let r = upper.phase_zero();
        let start = WaveSample { time: 0.0, offset: r.offset, values: r.values.clone() };
        let run = PerturbationRun {
            t_end: sc.t_end,
            burn_in: sc.burn_in,
            noise: (sc.noise_lo, sc.noise_hi),
            seed: cfg.seed,
            boundary: setup.boundary(),
            frame: setup.frame(0.0),
            sim,
        };
        (start, run, json!({ "kind": "periodic", "c": setup.c(), "iterations": upper.iterations }))
    } else {
        let wave = build_transition_wave(field, None, &cfg.timehet, &cfg.sim)?;
        let start = wave.samples[0].clone();
        let run = PerturbationRun {
            t_end: sc.t_end.min(cfg.timehet.t_out),
            burn_in: sc.burn_in,
            noise: (sc.noise_lo, sc.noise_hi),
            seed: cfg.seed,
            boundary: Boundary::Front { uplus: wave.uplus.clone(), right: RightGhost::Tail(wave.tail()) },
            frame: wave.frame(cfg.timehet.x_min),
            sim,
        };
        (start, run, json!({ "kind": "time-heterogeneous", "gamma": wave.gamma(), "iterations": wave.iterations }))
    };
    let tr = ratio_convergence(field, &start, &run)?;
    ratio_outputs(w, &tr)?;
    let passed = tr.final_ratio() < sc.target && tr.max_increase <= sc.slack;
    Ok(Report {
        passed,
        parameters: to_value(sc),
        tolerances: json!({ "target": sc.target, "slack": sc.slack }),
        diagnostics: json!({ "final_ratio": tr.final_ratio(), "max_increase_after_burn_in": tr.max_increase, "wave": wave_info }),
    })
}
