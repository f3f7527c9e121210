use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use paoi_cli::config::{apply_overrides, load_spec, resolve, CliError, Experiment};
use paoi_cli::experiments::{decay_sweep, region_sweep};
use paoi_cli::output::{fnum, write_output, Table};

use paoi_core::bounds::{long_regime_bound, short_regime_bound, EllStrategy, ThetaSearch};
use paoi_core::designer::{
    optimal_search, Decision, DesignerConfig, RandomizedL, RandomizedS, Verifier, WeightDesigner,
};
use paoi_core::model::{ServiceModel, SystemConfig, WeightVector};
use paoi_core::simulator::{estimate_violation, run_simulation, PAoISample, SimOptions};
use paoi_core::wallenius::{DrawOutcome, PmfMode};

#[derive(Parser)]
#[command(
    name = "paoi",
    version,
    about = "Peak-age simulator, violation bounds, and scheduling-weight designers"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate peak-age samples, one row per retained sample.
    Simulate(RunArgs),
    /// Evaluate the analytical violation bounds at every target.
    Bound(RunArgs),
    /// Design weights sequentially against the long-regime bound.
    DesignL(RunArgs),
    /// Design weights per source against the short-regime bound.
    DesignS(RunArgs),
    /// Brute-force the group-weight grid with a simulation verifier.
    OptSearch(RunArgs),
    /// Sweep the second group's target level across all three methods.
    RegionSweep(RunArgs),
    /// Grow the system at scaled period and thresholds and tabulate decay.
    Decay(RunArgs),
    /// Run the built-in invariant suite.
    Validate,
}

#[derive(Args)]
struct RunArgs {
    /// Config file path, or a preset name (scenario1|scenario2|scenario3).
    #[arg(long)]
    config: String,
    /// Result file; a replayable manifest lands next to it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the per-source sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Worker threads for sweep subcommands.
    #[arg(long)]
    workers: Option<usize>,
    /// Draw-order pmf backend: quadrature, fog, or oracle.
    #[arg(long)]
    pmf: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args): (&str, &RunArgs) = match &cli.cmd {
        Cmd::Simulate(a) => ("simulate", a),
        Cmd::Bound(a) => ("bound", a),
        Cmd::DesignL(a) => ("design-l", a),
        Cmd::DesignS(a) => ("design-s", a),
        Cmd::OptSearch(a) => ("opt-search", a),
        Cmd::RegionSweep(a) => ("region-sweep", a),
        Cmd::Decay(a) => ("decay", a),
        Cmd::Validate => return run_validate(),
    };
    match run_command(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_command(name: &str, args: &RunArgs) -> Result<(), CliError> {
    let mut spec = load_spec(&args.config)?;
    apply_overrides(&mut spec, args.seed, args.samples, args.pmf.as_deref());
    let exp = resolve(spec)?;
    if let Some(w) = args.workers {
        // Only effective once per process; later calls keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match name {
        "simulate" => cmd_simulate(&exp, &args.out),
        "bound" => cmd_bound(&exp, &args.out),
        "design-l" => cmd_design(&RandomizedL, "design-l", &exp, &args.out),
        "design-s" => cmd_design(&RandomizedS, "design-s", &exp, &args.out),
        "opt-search" => cmd_opt_search(&exp, &args.out),
        "region-sweep" => cmd_region_sweep(&exp, &args.out),
        "decay" => cmd_decay(&exp, &args.out),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn require_targets(exp: &Experiment) -> Result<(), CliError> {
    if exp.targets.is_empty() {
        return Err(CliError::Config(
            "this subcommand needs a [[targets]] list".to_string(),
        ));
    }
    Ok(())
}

fn cmd_simulate(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let mut opts = SimOptions::new(exp.samples);
    opts.record_cap = Some(0);
    let run = run_simulation(&exp.config, &exp.weights, &opts)?;
    let mut table = Table::new(&["source", "k", "paoi"]);
    for (s, samples) in run.samples.iter().enumerate() {
        for (k, a) in samples.iter().enumerate() {
            table.push(vec![s.to_string(), k.to_string(), fnum(a.value)]);
        }
    }
    write_output(out, &exp.manifest_toml("simulate"), &table)
}

fn cmd_bound(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    require_targets(exp)?;
    let search = ThetaSearch::for_service(&exp.config.service);
    let groups = exp.bound_groups();
    let mut table = Table::new(&[
        "source",
        "x",
        "eps",
        "long_exhaustive",
        "long_last_draw",
        "short_bound",
        "short_admissible",
    ]);
    for (i, t) in exp.targets.iter().enumerate() {
        let ex = long_regime_bound(
            i,
            t.x,
            exp.config.b,
            &exp.config.service,
            &exp.weights,
            &search,
            EllStrategy::Exhaustive,
            exp.pmf,
            groups,
        )?;
        let ld = long_regime_bound(
            i,
            t.x,
            exp.config.b,
            &exp.config.service,
            &exp.weights,
            &search,
            EllStrategy::LastDraw,
            exp.pmf,
            groups,
        )?;
        let sh = short_regime_bound(t.x, exp.config.b, &exp.config.service, exp.weights.get(i), &search)?;
        table.push(vec![
            i.to_string(),
            fnum(t.x),
            fnum(t.eps),
            fnum(ex.value),
            fnum(ld.value),
            fnum(sh.value),
            sh.admissible.to_string(),
        ]);
    }
    write_output(out, &exp.manifest_toml("bound"), &table)
}

fn cmd_design(
    designer: &dyn WeightDesigner,
    name: &str,
    exp: &Experiment,
    out: &Path,
) -> Result<(), CliError> {
    require_targets(exp)?;
    let dcfg = DesignerConfig {
        delta: exp.delta,
        pmf_mode: exp.pmf,
        ..DesignerConfig::default()
    };
    let outcome = designer.design(&exp.config, &exp.targets, &dcfg)?;
    let mut table = Table::new(&["source", "mu", "theta_star", "bound", "eps"]);
    match &outcome.decision {
        Decision::Feasible(w) => {
            for (i, t) in exp.targets.iter().enumerate() {
                let theta = outcome
                    .trace
                    .iter()
                    .find(|step| step.source == i)
                    .map(|step| step.theta_star)
                    .unwrap_or(f64::NAN);
                table.push(vec![
                    i.to_string(),
                    fnum(w.get(i)),
                    fnum(theta),
                    fnum(outcome.certified[i]),
                    fnum(t.eps),
                ]);
            }
            write_output(out, &exp.manifest_toml(name), &table)
        }
        Decision::Infeasible {
            source,
            tightest_bound,
            detail,
        } => {
            // Keep the artifacts inspectable even on failure.
            write_output(out, &exp.manifest_toml(name), &table)?;
            Err(CliError::Infeasible(format!(
                "source {source}: {detail} (tightest bound {tightest_bound:.3e})"
            )))
        }
    }
}

fn cmd_opt_search(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    require_targets(exp)?;
    let verifier = Verifier::Simulate {
        samples_per_source: exp.samples,
        total_budget: exp.budget,
    };
    let set = optimal_search(
        &exp.config,
        &exp.targets,
        &exp.groups,
        exp.grid_step,
        &verifier,
    )?;
    let mut cols: Vec<String> = vec!["point".to_string(), "on_frontier".to_string()];
    cols.extend((0..exp.groups.num_groups()).map(|g| format!("gw_{g}")));
    cols.extend((0..exp.config.n).map(|i| format!("cert_{i}")));
    let mut table = Table::new(&cols);
    for (idx, p) in set.points.iter().enumerate() {
        let mut row = vec![idx.to_string(), set.frontier.contains(&idx).to_string()];
        row.extend(p.group_weights.iter().map(|v| fnum(*v)));
        row.extend(p.certified.iter().map(|v| fnum(*v)));
        table.push(row);
    }
    write_output(out, &exp.manifest_toml("opt-search"), &table)?;
    if set.points.is_empty() {
        return Err(CliError::Infeasible(format!(
            "none of {} grid points verified feasible",
            set.candidates
        )));
    }
    Ok(())
}

fn cmd_region_sweep(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let rows = region_sweep(exp)?;
    let cell = |r: Option<f64>| r.map(fnum).unwrap_or_else(|| "none".to_string());
    let mut table = Table::new(&["eps2", "randomized_l", "randomized_s", "opt_search"]);
    for row in rows {
        table.push(vec![
            fnum(row.eps2),
            cell(row.randomized_l),
            cell(row.randomized_s),
            cell(row.opt_search),
        ]);
    }
    write_output(out, &exp.manifest_toml("region-sweep"), &table)
}

fn cmd_decay(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let rows = decay_sweep(exp)?;
    let mut table = Table::new(&[
        "n",
        "group",
        "p_hat",
        "ci_half",
        "events",
        "long_bound",
        "short_bound",
        "long_rate",
        "short_rate",
    ]);
    for row in rows {
        table.push(vec![
            row.n.to_string(),
            row.group.to_string(),
            row.p_hat.map(fnum).unwrap_or_else(|| "below-floor".to_string()),
            row.ci_half.map(fnum).unwrap_or_else(|| "nan".to_string()),
            row.events.to_string(),
            fnum(row.long_bound),
            fnum(row.short_bound),
            fnum(row.long_rate),
            fnum(row.short_rate),
        ]);
    }
    write_output(out, &exp.manifest_toml("decay"), &table)
}

// --- validate: fast internal consistency checks, one line per invariant ---

fn run_validate() -> ExitCode {
    let checks: Vec<(&str, Result<(), String>)> = vec![
        ("weight-normalization", check_weight_normalization()),
        ("draw-law-agreement", check_draw_agreement()),
        ("draw-law-normalization", check_draw_normalization()),
        ("long-bound-hand-instance", check_long_hand_instance()),
        ("short-bound-closed-form", check_short_closed_form()),
        ("recursion-residual", check_recursion_residual()),
        ("departure-decomposition", check_departure_decomposition()),
        ("violation-estimator", check_violation_estimator()),
    ];
    let mut all = true;
    for (name, result) in checks {
        match result {
            Ok(()) => println!("invariant {name} PASS"),
            Err(detail) => {
                all = false;
                println!("invariant {name} FAIL: {detail}");
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn check(cond: bool, detail: String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail)
    }
}

fn check_weight_normalization() -> Result<(), String> {
    let w = WeightVector::new(vec![0.3, 0.7 + 3e-10]).map_err(|e| e.to_string())?;
    let sum: f64 = w.as_slice().iter().sum();
    check(sum == 1.0, format!("renormalized sum {sum} != 1"))?;
    check(
        WeightVector::new(vec![0.3, 0.3]).is_err(),
        "sum far from one was accepted".to_string(),
    )
}

const VALIDATE_WEIGHTS: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.24, 0.26];

fn subsets_of_size(n: usize, ell: usize) -> Vec<DrawOutcome> {
    (0..1usize << n)
        .filter(|mask| mask.count_ones() as usize == ell)
        .map(|mask| DrawOutcome::new((0..n).map(|j| mask >> j & 1 == 1).collect()))
        .collect()
}

fn check_draw_agreement() -> Result<(), String> {
    let q = PmfMode::Quadrature.backend();
    let o = PmfMode::Oracle.backend();
    for ell in 0..=6 {
        for outcome in subsets_of_size(6, ell) {
            let a = q.pmf(&VALIDATE_WEIGHTS, &outcome).map_err(|e| e.to_string())?;
            let b = o.pmf(&VALIDATE_WEIGHTS, &outcome).map_err(|e| e.to_string())?;
            check(
                (a - b).abs() <= 1e-8,
                format!("quadrature {a} vs oracle {b} at ell={ell}"),
            )?;
        }
    }
    Ok(())
}

fn check_draw_normalization() -> Result<(), String> {
    let q = PmfMode::Quadrature.backend();
    for ell in 0..=6 {
        let total: f64 = subsets_of_size(6, ell)
            .iter()
            .map(|outcome| q.pmf(&VALIDATE_WEIGHTS, outcome).unwrap_or(f64::NAN))
            .sum();
        check(
            (total - 1.0).abs() <= 1e-8,
            format!("size-{ell} draw law sums to {total}"),
        )?;
    }
    Ok(())
}

fn check_long_hand_instance() -> Result<(), String> {
    let service = ServiceModel::Deterministic { value: 1.0 };
    let w = WeightVector::uniform(2).map_err(|e| e.to_string())?;
    let search = ThetaSearch::for_service(&service);
    let r = long_regime_bound(
        0,
        14.0,
        10.0,
        &service,
        &w,
        &search,
        EllStrategy::Exhaustive,
        PmfMode::Quadrature,
        None,
    )
    .map_err(|e| e.to_string())?;
    check(
        (r.value - 0.25).abs() <= 1e-6,
        format!("hand instance bound {} != 0.25", r.value),
    )
}

fn check_short_closed_form() -> Result<(), String> {
    let service = ServiceModel::Exponential { rate: 1.0 };
    let search = ThetaSearch::for_service(&service);
    let r = short_regime_bound(20.0, 10.0, &service, 0.5, &search).map_err(|e| e.to_string())?;
    let expected = 5.0 * (-4.0f64).exp();
    check(
        (r.value - expected).abs() <= 1e-6,
        format!("closed form {} != {expected}", r.value),
    )
}

fn saturated_run() -> Result<paoi_core::simulator::SimulationRun, String> {
    let config = SystemConfig {
        n: 4,
        b: 10.0,
        service: ServiceModel::Deterministic { value: 3.0 },
        seed: 3,
    };
    let w = WeightVector::uniform(4).map_err(|e| e.to_string())?;
    run_simulation(&config, &w, &SimOptions::new(5000)).map_err(|e| e.to_string())
}

fn check_recursion_residual() -> Result<(), String> {
    let run = saturated_run()?;
    check(
        run.max_wait_residual <= 1e-7,
        format!("max residual {:.3e}", run.max_wait_residual),
    )
}

fn check_departure_decomposition() -> Result<(), String> {
    let run = saturated_run()?;
    let mut seen = 0usize;
    for records in &run.records {
        for r in records {
            check(
                r.depart == r.gen_time + r.wait + r.service,
                format!("source {} update {} departs off-decomposition", r.source, r.k),
            )?;
            seen += 1;
        }
    }
    check(seen > 0, "no records retained".to_string())
}

fn check_violation_estimator() -> Result<(), String> {
    let samples: Vec<PAoISample> = [11.0, 12.0, 13.0, 14.0]
        .iter()
        .map(|&value| PAoISample { source: 0, value })
        .collect();
    let (p, half) = estimate_violation(&samples, 13.0).map_err(|e| e.to_string())?;
    check(p == 0.5, format!("p {p} != 0.5"))?;
    let expected = 1.96 * (0.25f64 / 4.0).sqrt();
    check(
        (half - expected).abs() <= 1e-12,
        format!("halfwidth {half} != {expected}"),
    )
}
