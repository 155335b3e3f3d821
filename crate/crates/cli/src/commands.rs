use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use wavefront_core::analysis::{verify_profile, VerificationReport};
use wavefront_core::config::load_model;
use wavefront_core::dispersion::{minimal_speed, root_set, SpeedResult};
use wavefront_core::io::{csv_number, to_json};
use wavefront_core::lattice_sim::{run_and_measure, BoundaryPolicy, InitialData, SimConfig, SimOutcome};
use wavefront_core::solver::{solve_critical, solve_profile, CriticalProfile, SolveOptions, WaveProfile};
use wavefront_core::waveops::{apply_T_mu, mu_lower_bound, GridFunction, GridSpec};
use wavefront_core::{check_hypotheses, Error, ReactionModel};

use crate::{Cli, Command, Initial, Policy};

const HYPOTHESIS_SAMPLES: usize = 64;
/// Relative tolerance for step-data spreading speed against `c*`.
const SPREAD_TOL: f64 = 0.05;
/// Profile speeds examined by `verify`, as multiples of `c*`.
const VERIFY_FACTORS: [f64; 2] = [1.1, 1.5];

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Verification(String),
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let model = load_validated(cli)?;
    fs::create_dir_all(&cli.out).map_err(Error::from)?;
    match &cli.command {
        Command::Speed { sweep } => speed(cli, &model, sweep.as_deref()),
        Command::Roots { c } => roots(cli, &model, *c),
        Command::Profile { c, critical } => profile(cli, &model, *c, *critical),
        Command::Simulate {
            initial,
            sites,
            horizon,
            dt,
            at,
            speed_factor,
            level,
            policy,
            snapshot_every,
        } => {
            let spec = SimSpec {
                initial: *initial,
                sites: *sites,
                horizon: *horizon,
                dt: *dt,
                at: *at,
                speed_factor: *speed_factor,
                level: *level,
                policy: *policy,
                snapshot_every: *snapshot_every,
            };
            simulate(cli, &model, &spec)
        }
        Command::Verify { sites, horizon, pairs } => verify(cli, &model, *sites, *horizon, *pairs),
    }
}

fn load_validated(cli: &Cli) -> Outcome<ReactionModel> {
    let path = cli
        .model
        .as_ref()
        .ok_or_else(|| Failure::Validation("--model PATH is required".into()))?;
    let model = load_model(path).map_err(|e| match e {
        Error::Io(io) => Failure::Validation(format!("cannot read {}: {io}", path.display())),
        other => Failure::Validation(format!("{}: {other}", path.display())),
    })?;
    let report = check_hypotheses(&model, HYPOTHESIS_SAMPLES)?;
    if !report.passed() {
        let lines: Vec<String> = report
            .failures()
            .map(|c| match c.worst {
                Some(s) => format!("  {}: {} (worst at u = {}, v = {}: {:e})", c.name, c.detail, s.u, s.v, s.value),
                None => format!("  {}: {}", c.name, c.detail),
            })
            .collect();
        return Err(Failure::Validation(format!(
            "model fails the structural hypotheses:\n{}",
            lines.join("\n")
        )));
    }
    Ok(model)
}

fn solve_options(cli: &Cli) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(h) = cli.grid_spacing {
        o.spacing = h;
    }
    o.half_length = cli.half_length;
    if let Some(t) = cli.tol {
        o.tol = t;
    }
    o
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    fs::write(dir.join(name), contents).map_err(Error::from)?;
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Outcome {
    let mut text = to_json(value)?;
    text.push('\n');
    write(dir, name, &text)
}

fn speed_json(s: &SpeedResult) -> Value {
    json!({
        "c_star": s.c_star,
        "lambda_star": s.lambda_star,
        "residuals": [s.residuals.0, s.residuals.1],
    })
}

fn below_minimal(c: f64, c_star: f64) -> Failure {
    Failure::Validation(format!(
        "c = {c} is below the minimal speed c* = {c_star}: the characteristic function is negative \
         for every λ >= 0, so there are no roots λ₁ and no monotone travelling front at this speed"
    ))
}

fn speed(cli: &Cli, model: &ReactionModel, sweep: Option<&str>) -> Outcome {
    let s = minimal_speed(model)?;
    println!("c*        {:.12}", s.c_star);
    println!("lambda*   {:.12}", s.lambda_star);
    println!("residuals {:.3e} {:.3e}", s.residuals.0, s.residuals.1);
    write_json(&cli.out, "speed.json", &speed_json(&s))?;
    if let Some(spec) = sweep {
        let (param, values) = parse_sweep(spec)?;
        let rows: Vec<Result<(f64, SpeedResult), Error>> = values
            .par_iter()
            .map(|&x| {
                let m = match param.as_str() {
                    "tau" => model.with_tau(x)?,
                    _ => model.with_d(x)?,
                };
                Ok((x, minimal_speed(&m)?))
            })
            .collect();
        let mut csv = format!("{param},c_star,lambda_star\n");
        println!("\n{param:>12} {:>18} {:>18}", "c_star", "lambda_star");
        for row in rows {
            let (x, r) = row?;
            csv.push_str(&format!("{},{},{}\n", csv_number(x), csv_number(r.c_star), csv_number(r.lambda_star)));
            println!("{x:>12.6} {:>18.12} {:>18.12}", r.c_star, r.lambda_star);
        }
        write(&cli.out, &format!("speed_sweep_{param}.csv"), &csv)?;
    }
    Ok(())
}

/// `name=start:end:points` with `name` one of `tau`, `d`.
fn parse_sweep(spec: &str) -> Outcome<(String, Vec<f64>)> {
    let bad = || Failure::Validation(format!("sweep '{spec}' is not of the form tau=start:end:points or d=start:end:points"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let name = name.trim();
    if name != "tau" && name != "d" {
        return Err(bad());
    }
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let values = if n == 1 {
        vec![a]
    } else {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    };
    Ok((name.to_string(), values))
}

fn roots(cli: &Cli, model: &ReactionModel, c: f64) -> Outcome {
    let s = minimal_speed(model)?;
    if c <= s.c_star {
        return Err(below_minimal(c, s.c_star));
    }
    let r = root_set(model, &s, c)?;
    println!("c        {:.12}", r.c);
    println!("c*       {:.12}", s.c_star);
    println!("lambda1  {:.12}", r.lambda1);
    println!("lambda2  {:.12}", r.lambda2);
    println!("upsilon  {:.12}", r.upsilon);
    write_json(
        &cli.out,
        "roots.json",
        &json!({
            "c": r.c,
            "c_star": s.c_star,
            "lambda1": r.lambda1,
            "lambda2": r.lambda2,
            "upsilon": r.upsilon,
        }),
    )
}

fn critical_json(cr: &CriticalProfile) -> Value {
    json!({
        "speeds": cr.speeds,
        "distances": cr.distances,
        "log_corrected_spread": cr.log_corrected_spread,
        "log_plain_spread": cr.log_plain_spread,
    })
}

fn print_profile(p: &WaveProfile, report: &VerificationReport) {
    let s = p.summary();
    println!("c          {:.12}", s.c);
    println!("c*         {:.12}", s.c_star);
    println!("lambda1    {:.12}", s.lambda1);
    println!("upsilon    {:.12}", s.upsilon);
    println!("iterations {}", s.iterations);
    println!("residual   {:.3e}", s.residual_norm);
    if s.critical {
        println!("critical   continuation toward c* (last member shown)");
    }
    println!();
    print!("{}", report.table());
}

fn profile(cli: &Cli, model: &ReactionModel, c: Option<f64>, critical: bool) -> Outcome {
    let opts = solve_options(cli);
    let s = minimal_speed(model)?;
    let target = c.unwrap_or(s.c_star);
    if target < s.c_star * (1.0 - 1e-12) {
        return Err(below_minimal(target, s.c_star));
    }
    let use_critical = critical || target < s.c_star * (1.0 + opts.min_gap);
    let (p, continuation) = if use_critical {
        let cr = solve_critical(model, &opts)?;
        let extra = critical_json(&cr);
        (cr.profile, Some(extra))
    } else {
        (solve_profile(model, target, &opts)?, None)
    };
    let report = verify_profile(&p);
    write(&cli.out, "profile.csv", &p.to_csv())?;
    let mut summary = serde_json::to_value(p.summary()).map_err(|e| Error::Config(e.to_string()))?;
    summary["requested_c"] = json!(target);
    summary["critical_continuation"] = continuation.unwrap_or(Value::Null);
    if use_critical {
        summary["note"] = json!("critical speed: profile approximated by continuation c_j = c*(1 + 2^-j)");
    }
    write_json(&cli.out, "profile_summary.json", &summary)?;
    write_json(&cli.out, "verification.json", &serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?)?;
    print_profile(&p, &report);
    if !report.passed() {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        return Err(Failure::Verification(format!("verification failed: {}", names.join(", "))));
    }
    Ok(())
}

struct SimSpec {
    initial: Initial,
    sites: usize,
    horizon: f64,
    dt: Option<f64>,
    at: Option<f64>,
    speed_factor: f64,
    level: f64,
    policy: Policy,
    snapshot_every: usize,
}

fn simulate(cli: &Cli, model: &ReactionModel, spec: &SimSpec) -> Outcome {
    let s = minimal_speed(model)?;
    let k = model.k();
    let at = spec.at.unwrap_or_else(|| default_front_site(spec.sites));
    if !(at > 0.0 && at < spec.sites as f64 - 1.0) {
        return Err(Failure::Validation(format!("--at {at} must lie strictly inside the lattice [0, {}]", spec.sites.saturating_sub(1))));
    }
    let (initial, expected) = match spec.initial {
        Initial::Step => (InitialData::Step { at }, Some(s.c_star)),
        Initial::Profile => {
            let c = spec.speed_factor * s.c_star;
            let p = solve_profile(model, c, &solve_options(cli))?;
            (InitialData::Profile { phi: p.phi, c, at }, Some(c))
        }
        Initial::Constant => {
            if !(0.0..=1.0).contains(&spec.level) {
                return Err(Failure::Validation(format!("--level {} must lie in [0, 1]", spec.level)));
            }
            (InitialData::Custom(vec![spec.level * k; spec.sites]), None)
        }
    };
    let cfg = SimConfig {
        sites: spec.sites,
        horizon: spec.horizon,
        dt: spec.dt,
        policy: match spec.policy {
            Policy::Frozen => BoundaryPolicy::FrozenInitial,
            Policy::Equilibrium => BoundaryPolicy::Equilibrium,
        },
        snapshot_every: spec.snapshot_every,
        ..SimConfig::default()
    };
    let out = run_and_measure(model, &initial, &cfg)?;
    write(&cli.out, "front_track.csv", &out.track.to_csv())?;
    if spec.snapshot_every > 0 {
        write(&cli.out, "snapshots.csv", &out.snapshots_csv())?;
    }
    let summary = sim_json(&out, &cfg, s.c_star, expected);
    write_json(&cli.out, "simulation.json", &summary)?;
    match out.speed {
        Some(v) => println!("measured speed {v:.8}"),
        None => println!("measured speed undefined"),
    }
    if let Some(e) = expected {
        println!("reference      {e:.8}");
    }
    println!("dt             {}", out.dt);
    println!("steps          {}", out.steps);
    if let Some(d) = summary["diagnostic"].as_str() {
        println!("note           {d}");
    }
    Ok(())
}

fn sim_json(out: &SimOutcome, cfg: &SimConfig, c_star: f64, expected: Option<f64>) -> Value {
    let diagnostic = match out.speed {
        None => Some("no front: the state never straddles K/2 in the second half of the horizon"),
        Some(_) => None,
    };
    json!({
        "speed": out.speed,
        "reference_speed": expected,
        "relative_error": out.speed.zip(expected).map(|(v, e)| v / e - 1.0),
        "c_star": c_star,
        "dt": out.dt,
        "steps": out.steps,
        "sites": cfg.sites,
        "horizon": cfg.horizon,
        "track_points": out.track.points.len(),
        "diagnostic": diagnostic,
    })
}

/// 100 sites from the right end, or 80% of the way along short lattices.
fn default_front_site(sites: usize) -> f64 {
    (sites as f64 - 100.0).max(0.8 * sites as f64)
}

/// Randomised check that `T_μ` preserves the pointwise order of pairs.
fn order_checks(model: &ReactionModel, c_star: f64, spacing: f64, pairs: usize, seed: u64) -> Outcome<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.k();
    let grid = GridSpec::new(15.0, spacing)?;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let c = c_star * rng.random_range(1.05..2.0);
        let mu = 1.05 * mu_lower_bound(model, c)?;
        let hi: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..=k)).collect();
        let lo: Vec<f64> = hi.iter().map(|v| v * rng.random_range(0.0..=1.0)).collect();
        let a = apply_T_mu(model, c, mu, &GridFunction::new(grid, lo, 0.0, 0.0, k)?)?;
        let b = apply_T_mu(model, c, mu, &GridFunction::new(grid, hi, 0.0, 0.0, k)?)?;
        for (x, y) in a.values.iter().zip(&b.values) {
            let excess = (x - y) / k;
            worst = worst.max(excess);
            if excess > 1e-13 {
                violations += 1;
            }
        }
    }
    Ok((violations, worst))
}

fn verify(cli: &Cli, model: &ReactionModel, sites: usize, horizon: f64, pairs: usize) -> Outcome {
    let opts = solve_options(cli);
    let s = minimal_speed(model)?;
    let cfg = SimConfig { sites, horizon, ..SimConfig::default() };
    let (profiles, sim) = rayon::join(
        || {
            VERIFY_FACTORS
                .par_iter()
                .map(|f| solve_profile(model, f * s.c_star, &opts))
                .collect::<Vec<_>>()
        },
        || run_and_measure(model, &InitialData::Step { at: default_front_site(sites) }, &cfg),
    );
    let sim = sim?;
    let (violations, worst) = order_checks(model, s.c_star, opts.spacing, pairs, cli.seed)?;

    let mut failures = Vec::new();
    let mut profile_entries = Vec::new();
    println!("c* = {:.12}, lambda* = {:.12}\n", s.c_star, s.lambda_star);
    for (f, p) in VERIFY_FACTORS.iter().zip(profiles) {
        let p = p?;
        let report = verify_profile(&p);
        println!("profile at {f} c*");
        print!("{}", report.table());
        println!();
        if !report.passed() {
            failures.push(format!("profile at {f} c*"));
        }
        write(&cli.out, &format!("profile_{f}.csv"), &p.to_csv())?;
        profile_entries.push(json!({
            "factor": f,
            "summary": serde_json::to_value(p.summary()).map_err(|e| Error::Config(e.to_string()))?,
            "report": serde_json::to_value(&report).map_err(|e| Error::Config(e.to_string()))?,
        }));
    }
    write(&cli.out, "front_track.csv", &sim.track.to_csv())?;
    let spread_ok = sim.speed.is_some_and(|v| (v / s.c_star - 1.0).abs() <= SPREAD_TOL);
    if !spread_ok {
        failures.push("spreading speed".into());
    }
    match sim.speed {
        Some(v) => println!("spreading speed {v:.8} vs c* (tolerance {SPREAD_TOL}): {}", if spread_ok { "pass" } else { "FAIL" }),
        None => println!("spreading speed undefined: FAIL"),
    }
    if violations > 0 {
        failures.push("order preservation".into());
    }
    println!(
        "order preservation: {pairs} random pairs (seed {}), {violations} violations, worst {worst:.2e}: {}",
        cli.seed,
        if violations == 0 { "pass" } else { "FAIL" }
    );
    let dossier = json!({
        "speed": speed_json(&s),
        "profiles": profile_entries,
        "simulation": sim_json(&sim, &cfg, s.c_star, Some(s.c_star)),
        "spreading_speed_passed": spread_ok,
        "order_preservation": {
            "pairs": pairs,
            "seed": cli.seed,
            "violations": violations,
            "worst_excess": worst,
        },
        "passed": failures.is_empty(),
    });
    write_json(&cli.out, "dossier.json", &dossier)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(format!("verification failed: {}", failures.join(", "))))
    }
}
