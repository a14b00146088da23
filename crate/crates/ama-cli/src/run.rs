//! Command implementations: each command turns a scenario file into a
//! [`ResultBundle`](crate::bundle::ResultBundle) on disk.

use crate::bundle::{self, sig9, ResultBundle, TraceStage};
use crate::config::{Overrides, Resolved, ScenarioFile};
use crate::rng;
use ama_core::{
    alternating_optimize, channel_vector, circular_placement, circular_trajectory,
    correlation_sq, default_trajectory_init, evaluate_mmse_rates, joint_placement,
    maxmin_snr_trajectory, optimal_single_uav, optimal_two_uav, sca_trajectory_single_ue,
    successive_hyperbola_placement, successive_placement, AltOptOptions, ScaOptions, ScaResult,
    Scenario, SwarmTrajectory, Vec3,
};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Horizontal centroid of the terminals, on the ground plane — the natural
/// center for the geometry-only benchmark formations.
fn centroid_ground(sc: &Scenario) -> Vec3 {
    let mut c = Vec3::ZERO;
    for u in &sc.users {
        c += u.position;
    }
    c.scale(1.0 / sc.users.len() as f64)
}

fn sca_options(r: &Resolved) -> ScaOptions {
    ScaOptions { eps: r.eps1, max_rounds: r.max_iters, solve: r.solve.clone() }
}

fn alt_options(r: &Resolved) -> AltOptOptions {
    AltOptOptions {
        eps1: r.eps1,
        eps2: r.eps2,
        stage1_rounds: r.max_iters,
        max_sweeps: r.max_iters,
        solve: r.solve.clone(),
    }
}

fn require_terminals(sc: &Scenario, command: &str, count: usize) -> Result<()> {
    if sc.users.len() != count {
        bail!(
            "{command} serves exactly {count} terminal{}; the scenario has {}",
            if count == 1 { "" } else { "s" },
            sc.users.len()
        );
    }
    Ok(())
}

/// Evaluates a finished trajectory and assembles the bundle around it.
fn finish(
    command: &str,
    sc: &Scenario,
    trajectory: SwarmTrajectory,
    traces: Vec<TraceStage>,
    objective: Option<f64>,
    solver_status: &str,
    iterations: usize,
    correlation: Option<f64>,
) -> Result<(Scenario, ResultBundle)> {
    let rates = evaluate_mmse_rates(sc, &trajectory)?;
    let objective = objective.unwrap_or(rates.min_average);
    let traces = if traces.is_empty() {
        vec![TraceStage { stage: "rate", objectives: vec![rates.min_average] }]
    } else {
        traces
    };
    let b = ResultBundle {
        command: command.to_string(),
        trajectory,
        rates,
        traces,
        objective,
        solver_status: solver_status.to_string(),
        iterations,
        correlation_sq: correlation,
        // The circular benchmark flies its own closed loop in place of the
        // mission endpoints, so only its motion constraints are validated.
        endpoint_free: command == "bench-circular-traj",
    };
    bundle::check_bundle(sc, &b)?;
    Ok((sc.clone(), b))
}

fn sca_status(trace_rounds: usize, cap: usize) -> &'static str {
    if trace_rounds < cap {
        "converged"
    } else {
        "round-cap"
    }
}

fn from_sca(
    command: &str,
    sc: &Scenario,
    res: ScaResult,
    cap: usize,
    status: Option<&str>,
) -> Result<(Scenario, ResultBundle)> {
    let rounds = res.trace.rounds;
    finish(
        command,
        sc,
        res.trajectory,
        vec![TraceStage { stage: "rate", objectives: res.trace.objectives }],
        Some(res.objective),
        status.unwrap_or_else(|| sca_status(rounds, cap)),
        rounds,
        None,
    )
}

fn place_single(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    let sc = r.scenario;
    require_terminals(&sc, "place-single", 1)?;
    let w = sc.users[0].position;
    let positions = match sc.num_uavs {
        1 => vec![optimal_single_uav(w, sc.min_altitude_m)],
        2 => optimal_two_uav(sc.dmin_m, sc.min_altitude_m).positions(w).to_vec(),
        l => bail!(
            "closed-form placement handles one or two antennas (got {l}); \
             use place-joint or place-successive"
        ),
    };
    let traj = SwarmTrajectory::from_placement(positions);
    finish("place-single", &sc, traj, Vec::new(), None, "closed-form", 0, None)
}

fn place_two_ue_hyperbola(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    let sc = r.scenario;
    require_terminals(&sc, "place-two-ue-hyperbola", 2)?;
    if sc.num_uavs % 2 != 0 {
        bail!(
            "the interference-nulling construction places antennas in pairs; \
             L must be even (got {})",
            sc.num_uavs
        );
    }
    let positions = successive_hyperbola_placement(
        &sc.rf,
        sc.users[0].position,
        sc.users[1].position,
        sc.min_altitude_m,
        sc.dmin_m,
        sc.num_uavs / 2,
    )?;
    let traj = SwarmTrajectory::from_placement(positions);
    let h1 = channel_vector(&sc, &traj, 0, 0)?;
    let h2 = channel_vector(&sc, &traj, 1, 0)?;
    let rho = correlation_sq(&h1, &h2);
    finish("place-two-ue-hyperbola", &sc, traj, Vec::new(), None, "closed-form", 0, Some(rho))
}

fn place_joint(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    require_terminals(&r.scenario, "place-joint", 1)?;
    let res = joint_placement(&r.scenario, &sca_options(&r))?;
    from_sca("place-joint", &r.scenario, res, r.max_iters, None)
}

fn place_successive(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    require_terminals(&r.scenario, "place-successive", 1)?;
    let res = successive_placement(&r.scenario, &sca_options(&r))?;
    from_sca("place-successive", &r.scenario, res, r.max_iters, Some("completed"))
}

fn traj_single_sca(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.resolve(ov)?;
    require_terminals(&r.scenario, "traj-single-sca", 1)?;
    let init = default_trajectory_init(&r.scenario)?;
    let res = sca_trajectory_single_ue(&r.scenario, &init, &sca_options(&r))?;
    from_sca("traj-single-sca", &r.scenario, res, r.max_iters, None)
}

fn traj_maxmin_snr(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.resolve(ov)?;
    let init = default_trajectory_init(&r.scenario)?;
    let res = maxmin_snr_trajectory(&r.scenario, init, &alt_options(&r))?;
    let status = sca_status(res.trace.rounds, r.max_iters);
    let rounds = res.trace.rounds;
    finish(
        "traj-maxmin-snr",
        &r.scenario,
        res.trajectory,
        vec![TraceStage { stage: "snr", objectives: res.trace.objectives }],
        Some(res.min_avg_snr),
        status,
        rounds,
        None,
    )
}

fn traj_altopt(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.resolve(ov)?;
    let opts = alt_options(&r);
    let res = alternating_optimize(&r.scenario, &opts)?;
    let status = if res.sweeps < opts.max_sweeps { "converged" } else { "sweep-cap" };
    let iterations = res.stage1_trace.rounds + res.sweeps;
    finish(
        "traj-altopt",
        &r.scenario,
        res.trajectory,
        vec![
            TraceStage { stage: "snr", objectives: res.stage1_trace.objectives },
            TraceStage { stage: "rate", objectives: res.sweep_objectives },
        ],
        Some(res.min_rate),
        status,
        iterations,
        None,
    )
}

fn bench_circular_place(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    let sc = r.scenario;
    let ring = circular_placement(sc.num_uavs, sc.dmin_m, centroid_ground(&sc), sc.min_altitude_m);
    let traj = SwarmTrajectory::from_placement(ring);
    finish("bench-circular-place", &sc, traj, Vec::new(), None, "constructed", 0, None)
}

fn bench_circular_traj(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.resolve(ov)?;
    let sc = r.scenario;
    let traj = circular_trajectory(
        sc.num_uavs,
        sc.num_slots,
        sc.dmin_m,
        centroid_ground(&sc),
        sc.min_altitude_m,
        sc.vmax_step(),
    )?;
    finish("bench-circular-traj", &sc, traj, Vec::new(), None, "constructed", 0, None)
}

/// Uniform draws in a 100 m cube above the altitude floor, rejecting
/// spacing conflicts, at most 100 000 attempts.
fn random_place(file: &ScenarioFile, ov: &Overrides) -> Result<(Scenario, ResultBundle)> {
    let r = file.placement_view().resolve(ov)?;
    let sc = r.scenario;
    let c = centroid_ground(&sc);
    let seed = rng::stream(r.seed, rng::STREAM_RANDOM_PLACEMENT);
    let mut placed: Vec<Vec3> = Vec::with_capacity(sc.num_uavs);
    let mut attempt: u64 = 0;
    while placed.len() < sc.num_uavs {
        if attempt >= 100_000 {
            bail!(
                "random placement could not fit {} antennas with {} m spacing \
                 in the sampling cube within 100000 attempts",
                sc.num_uavs,
                sc.dmin_m
            );
        }
        let p = Vec3::new(
            c.x - 50.0 + 100.0 * rng::unit(seed, 3 * attempt),
            c.y - 50.0 + 100.0 * rng::unit(seed, 3 * attempt + 1),
            sc.min_altitude_m + 100.0 * rng::unit(seed, 3 * attempt + 2),
        );
        attempt += 1;
        if placed.iter().all(|q| q.distance(p) >= sc.dmin_m) {
            placed.push(p);
        }
    }
    let traj = SwarmTrajectory::from_placement(placed);
    finish("random-place", &sc, traj, Vec::new(), None, "constructed", 0, None)
}

/// Computes one command's bundle in memory.
pub fn bundle_for(
    command: &str,
    file: &ScenarioFile,
    ov: &Overrides,
) -> Result<(Scenario, ResultBundle)> {
    match command {
        "place-single" => place_single(file, ov),
        "place-two-ue-hyperbola" => place_two_ue_hyperbola(file, ov),
        "place-joint" => place_joint(file, ov),
        "place-successive" => place_successive(file, ov),
        "traj-single-sca" => traj_single_sca(file, ov),
        "traj-maxmin-snr" => traj_maxmin_snr(file, ov),
        "traj-altopt" => traj_altopt(file, ov),
        "bench-circular-place" => bench_circular_place(file, ov),
        "bench-circular-traj" => bench_circular_traj(file, ov),
        "random-place" => random_place(file, ov),
        other => bail!("unknown command: {other}"),
    }
}

/// Runs one command and writes its bundle (plus timing) under `out`.
pub fn run_single(
    command: &str,
    file: &ScenarioFile,
    ov: &Overrides,
    out: &Path,
) -> Result<ResultBundle> {
    let started = Instant::now();
    let (sc, b) = bundle_for(command, file, ov)
        .with_context(|| format!("{command} failed"))?;
    bundle::write_bundle(out, &sc, &b)?;
    bundle::write_timing(out, command, started.elapsed().as_secs_f64())?;
    Ok(b)
}

/// The benchmark set for a scenario shape: a static single-terminal
/// scenario compares placement methods, everything else compares
/// trajectory methods. Labels double as subdirectory names.
pub fn suite_methods(file: &ScenarioFile) -> Vec<(&'static str, &'static str)> {
    if file.swarm.num_slots == 1 && file.terminal_count() == 1 {
        vec![
            ("joint", "place-joint"),
            ("successive", "place-successive"),
            ("circular", "bench-circular-place"),
            ("random", "random-place"),
        ]
    } else {
        vec![
            ("altopt", "traj-altopt"),
            ("maxmin-snr", "traj-maxmin-snr"),
            ("circular", "bench-circular-traj"),
        ]
    }
}

#[derive(Serialize)]
struct MethodRow {
    name: String,
    min_average_rate: f64,
}

#[derive(Serialize)]
struct SuiteSummaryDoc {
    command: String,
    /// Method labels sorted by achieved min average rate, best first.
    ranking: Vec<String>,
    methods: Vec<MethodRow>,
}

/// Runs every applicable method into `out/<label>/` and writes the
/// comparison summary. Returns `(label, min_average_rate)` rows in
/// canonical method order.
pub fn run_bench_suite(
    file: &ScenarioFile,
    ov: &Overrides,
    out: &Path,
) -> Result<Vec<(String, f64)>> {
    let started = Instant::now();
    let mut rows: Vec<(String, f64)> = Vec::new();
    for (label, command) in suite_methods(file) {
        let b = run_single(command, file, ov, &out.join(label))
            .with_context(|| format!("suite method {label}"))?;
        rows.push((label.to_string(), b.rates.min_average));
    }
    let mut ranking: Vec<(String, f64)> = rows.clone();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
    let doc = SuiteSummaryDoc {
        command: "bench-suite".into(),
        ranking: ranking.into_iter().map(|(l, _)| l).collect(),
        methods: rows
            .iter()
            .map(|(l, v)| MethodRow { name: l.clone(), min_average_rate: *v })
            .collect(),
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("summary.toml");
    std::fs::write(&path, toml::to_string_pretty(&doc).context("suite summary")?)
        .with_context(|| format!("writing {}", path.display()))?;
    bundle::write_timing(out, "bench-suite", started.elapsed().as_secs_f64())?;
    Ok(rows)
}

/// Swept scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    PowerDbm,
    TerminalCount,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PowerDbm => "power_dbm",
            SweepAxis::TerminalCount => "K",
        }
    }
}

/// Integer-like values print without a trailing `.0` (directory names,
/// table keys).
fn value_token(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn derived_file(file: &ScenarioFile, axis: SweepAxis, v: f64) -> Result<ScenarioFile> {
    match axis {
        SweepAxis::PowerDbm => Ok(file.with_power_dbm(v)),
        SweepAxis::TerminalCount => {
            if v < 1.0 || v != v.trunc() {
                bail!("K sweep values must be positive integers, got {v}");
            }
            Ok(file.with_terminal_count(v as usize)?)
        }
    }
}

#[derive(Serialize)]
struct SweepSummaryDoc {
    command: String,
    axis: String,
    values: Vec<f64>,
    methods: Vec<String>,
}

/// One bench-suite per value (concurrently, each in its own directory),
/// plus the cross-value comparison table `sweep.csv`.
pub fn run_sweep(
    file: &ScenarioFile,
    ov: &Overrides,
    out: &Path,
    axis: SweepAxis,
    values: &[f64],
) -> Result<()> {
    let started = Instant::now();
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        bail!("sweep values must be strictly increasing: {values:?}");
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!("sweep values must be finite: {values:?}");
    }
    let derived: Vec<(f64, ScenarioFile)> = values
        .iter()
        .map(|&v| Ok((v, derived_file(file, axis, v)?)))
        .collect::<Result<_>>()?;
    let labels: Vec<&'static str> =
        suite_methods(&derived[0].1).into_iter().map(|(l, _)| l).collect();
    for (v, f) in &derived {
        let l: Vec<&'static str> = suite_methods(f).into_iter().map(|(l, _)| l).collect();
        if l != labels {
            bail!(
                "sweep value {v} changes the benchmark set ({l:?} vs {labels:?}); \
                 split the sweep so every point compares the same methods"
            );
        }
    }

    let rows: Vec<(f64, Vec<(String, f64)>)> = derived
        .par_iter()
        .map(|(v, f)| {
            let dir = out.join(format!("{}-{}", axis.name(), value_token(*v)));
            Ok((*v, run_bench_suite(f, ov, &dir)?))
        })
        .collect::<Result<_>>()?;

    let mut csv = format!("value,{}\n", labels.join(","));
    for (v, row) in &rows {
        write!(csv, "{}", value_token(*v)).unwrap();
        for (_, rate) in row {
            write!(csv, ",{}", sig9(*rate)).unwrap();
        }
        csv.push('\n');
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("sweep.csv"), csv).context("writing sweep.csv")?;

    let doc = SweepSummaryDoc {
        command: "sweep".into(),
        axis: axis.name().into(),
        values: values.to_vec(),
        methods: labels.iter().map(|l| l.to_string()).collect(),
    };
    std::fs::write(out.join("summary.toml"), toml::to_string_pretty(&doc).context("sweep summary")?)
        .context("writing sweep summary")?;
    bundle::write_timing(out, "sweep", started.elapsed().as_secs_f64())?;
    Ok(())
}
