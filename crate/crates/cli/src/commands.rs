//! The four subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use capa_core::channel::{read_channel_set, write_channel_set};
use capa_core::solver::{init_beamformers, Wmmse};
use capa_core::{build_channel_set, ChannelSet, Init, Scenario, ScenarioFile, SolverConfig};
use rayon::prelude::*;

use crate::config::{load_scenario, load_sweep, parse_methods, Method, MethodOptions, SweepSpec};
use crate::methods::{run_method, Outcome};
use crate::output::{mean_by_value, write_rows, ResultRow};
use crate::plot::{LinePlot, Series};
use crate::{exit, BenchArgs, Common, CompareArgs, InitArg, SolveArgs, SweepArgs};

fn scenario_file(common: &Common) -> Result<ScenarioFile> {
    match &common.config {
        Some(path) => load_scenario(path),
        None => Ok(ScenarioFile::desk()),
    }
}

fn solver_config(base: SolverConfig, common: &Common) -> Result<SolverConfig> {
    let mut cfg = base;
    if let Some(e) = common.epsilon {
        cfg.epsilon = e;
    }
    if let Some(n) = common.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn method_options(base: MethodOptions, common: &Common) -> Result<MethodOptions> {
    let mut opts = base;
    if let Some(s) = common.spacing {
        if !(s > 0.0 && s.is_finite()) {
            bail!("`--spacing` must be positive");
        }
        opts.spda_spacing = Some(s);
    }
    if let Some(n) = common.nf {
        opts.fourier_truncation = Some(n);
    }
    Ok(opts)
}

fn out_dir(common: &Common) -> Result<&Path> {
    fs::create_dir_all(&common.out).with_context(|| format!("cannot create {}", common.out.display()))?;
    Ok(&common.out)
}

fn create(path: PathBuf) -> Result<BufWriter<File>> {
    let f = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Channels from the cache when its tag matches the scenario; otherwise
/// sampled and written back.
fn cached_channels(scenario: &Scenario, cache: Option<&Path>) -> Result<ChannelSet> {
    let Some(path) = cache else {
        return Ok(build_channel_set(scenario)?);
    };
    let tag = serde_json::to_string(&ScenarioFile::from(scenario))?;
    if path.exists() {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        match read_channel_set(BufReader::new(file)) {
            Ok((set, stored)) if stored == tag => return Ok(set),
            Ok(_) => eprintln!("channel cache {} is for another scenario; rebuilding", path.display()),
            Err(e) => eprintln!("channel cache {} unreadable ({e}); rebuilding", path.display()),
        }
    }
    let set = build_channel_set(scenario)?;
    write_channel_set(create(path.to_path_buf())?, &set, &tag)?;
    Ok(set)
}

pub fn solve(args: &SolveArgs) -> Result<i32> {
    let common = &args.common;
    let scenario = scenario_file(common)?.resolve(common.seed)?;
    let mut cfg = solver_config(SolverConfig::default(), common)?;
    if let Some(init) = args.init {
        cfg.init = match init {
            InitArg::RandomGaussian => Init::RandomGaussian,
            InitArg::MatchedFilter => Init::MatchedFilter,
        };
    }
    let out = out_dir(common)?;

    let start = std::time::Instant::now();
    let channels = cached_channels(&scenario, args.channel_cache.as_deref())?;
    let init = init_beamformers(&scenario, &channels, &cfg);
    let sol = Wmmse::new(&channels.link, scenario.noise_variance, scenario.budget, init.v, cfg.clone())?.run()?;
    let seconds = start.elapsed().as_secs_f64();

    sol.trace.write_csv(create(out.join("trace.csv"))?)?;
    let per_user = sol.se.per_user_bits();
    let summary = serde_json::json!({
        "sum_se_bits": per_user.iter().sum::<f64>(),
        "per_user_se_bits": per_user,
        "iterations": sol.iterations(),
        "converged": sol.converged,
        "seconds": seconds,
        "power": sol.trace.records.last().map_or(0.0, |r| r.power),
        "mu": sol.mu,
        "seed": scenario.seed,
    });
    write_text(out.join("summary.json"), &serde_json::to_string_pretty(&summary)?)?;
    if common.plot {
        let points = sol
            .trace
            .records
            .iter()
            .map(|r| (r.iter as f64, r.sum_se / std::f64::consts::LN_2))
            .collect();
        let plot = LinePlot {
            title: "Convergence".into(),
            x_label: "iteration".into(),
            y_label: "sum SE (bit/s/Hz)".into(),
            series: vec![Series {
                name: "proposed".into(),
                points,
            }],
        };
        write_text(out.join("trace.svg"), &plot.to_svg())?;
    }

    println!("sum SE:     {:.4} bit/s/Hz", sol.se.sum_bits());
    println!("iterations: {}", sol.iterations());
    println!("converged:  {}", sol.converged);
    println!("seconds:    {seconds:.3}");
    if sol.converged {
        Ok(exit::OK)
    } else {
        eprintln!("stopped at max_iters = {} before reaching epsilon = {:e}", cfg.max_iters, cfg.epsilon);
        Ok(exit::NOT_CONVERGED)
    }
}

struct Job {
    value: f64,
    seed: u64,
    method: Method,
}

pub fn sweep(args: &SweepArgs) -> Result<i32> {
    let common = &args.common;
    let mut spec = match &common.config {
        Some(path) => load_sweep(path)?,
        None => SweepSpec::default_budget_sweep(),
    };
    if let Some(list) = &args.methods {
        spec.methods = parse_methods(list)?;
    }
    let cfg = solver_config(spec.solver.clone(), common)?;
    let opts = method_options(spec.options, common)?;
    if args.parallel == 0 {
        bail!("`--parallel` must be at least 1");
    }
    let base_seed = common.seed.unwrap_or(spec.scenario.seed);
    let out = out_dir(common)?;

    let mut jobs = Vec::new();
    for &value in &spec.values {
        for rep in 0..spec.repetitions {
            for &method in &spec.methods {
                jobs.push(Job {
                    value,
                    seed: base_seed.wrapping_add(rep as u64),
                    method,
                });
            }
        }
    }
    let variable = spec.variable.name();
    let run_job = |job: &Job| -> ResultRow {
        let attempt = spec
            .variable
            .apply(&spec.scenario, job.value)
            .resolve(Some(job.seed))
            .map_err(anyhow::Error::from)
            .and_then(|s| run_method(job.method, &s, &cfg, &opts));
        match attempt {
            Ok(o) => ResultRow::ok(&o, job.seed, variable, job.value),
            Err(e) => ResultRow::failed(job.method, job.seed, variable, job.value, &e),
        }
    };
    // collect keeps job order, so the file does not depend on scheduling
    let rows: Vec<ResultRow> = if args.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(args.parallel).build()?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    } else {
        jobs.iter().map(run_job).collect()
    };

    write_rows(create(out.join("sweep.csv"))?, &rows, !args.no_timing)?;
    if common.plot {
        let plot = LinePlot {
            title: format!("Mean sum SE versus {variable}"),
            x_label: variable.into(),
            y_label: "sum SE (bit/s/Hz)".into(),
            series: spec
                .methods
                .iter()
                .map(|&m| Series {
                    name: m.to_string(),
                    points: mean_by_value(&rows, m),
                })
                .collect(),
        };
        write_text(out.join("sweep.svg"), &plot.to_svg())?;
    }
    for &m in &spec.methods {
        let means: Vec<String> = mean_by_value(&rows, m)
            .iter()
            .map(|(v, se)| format!("{v}: {se:.3}"))
            .collect();
        println!("{m:<11} {}", means.join("  "));
    }
    let failed: Vec<&ResultRow> = rows.iter().filter(|r| !r.is_ok()).collect();
    for r in &failed {
        eprintln!("failed: {} at {variable} = {} (seed {}): {}", r.method, r.value, r.seed, r.error);
    }
    Ok(if failed.is_empty() { exit::OK } else { exit::PARTIAL })
}

fn print_table(outcomes: &[Outcome]) {
    println!(
        "{:<11} {:>12} {:>10} {:>9} {:>10}  per-user SE (bit/s/Hz)",
        "method", "sum SE", "iters", "conv", "seconds"
    );
    for o in outcomes {
        let per_user: Vec<String> = o.se.per_user_bits().iter().map(|x| format!("{x:.3}")).collect();
        println!(
            "{:<11} {:>12.4} {:>10} {:>9} {:>10.3}  {}",
            o.method.name(),
            o.se.sum_bits(),
            o.iterations,
            o.converged,
            o.seconds,
            per_user.join(" ")
        );
    }
}

pub fn compare(args: &CompareArgs) -> Result<i32> {
    let common = &args.common;
    let methods = parse_methods(&args.methods)?;
    let scenario = scenario_file(common)?.resolve(common.seed)?;
    let cfg = solver_config(SolverConfig::default(), common)?;
    let opts = method_options(MethodOptions::default(), common)?;
    let out = out_dir(common)?;

    let outcomes = methods
        .iter()
        .map(|&m| run_method(m, &scenario, &cfg, &opts).with_context(|| format!("method {m} failed")))
        .collect::<Result<Vec<_>>>()?;
    print_table(&outcomes);
    let rows: Vec<ResultRow> = outcomes
        .iter()
        .map(|o| ResultRow::ok(o, scenario.seed, "budget", scenario.budget))
        .collect();
    write_rows(create(out.join("compare.csv"))?, &rows, true)?;
    Ok(exit::OK)
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn bench(args: &BenchArgs) -> Result<i32> {
    let common = &args.common;
    if args.reps == 0 {
        bail!("`--reps` must be at least 1");
    }
    let methods = parse_methods(&args.methods)?;
    let scenario = scenario_file(common)?.resolve(common.seed)?;
    let cfg = solver_config(SolverConfig::default(), common)?;
    let opts = method_options(MethodOptions::default(), common)?;
    let out = out_dir(common)?;

    let mut table = csv::Writer::from_writer(create(out.join("bench.csv"))?);
    table.write_record([
        "method",
        "reps",
        "median_seconds",
        "min_seconds",
        "max_seconds",
        "iterations",
        "sum_se_bits",
    ])?;
    println!(
        "{:<11} {:>5} {:>14} {:>12} {:>12} {:>10}",
        "method", "reps", "median (s)", "min (s)", "max (s)", "iters"
    );
    for &m in &methods {
        run_method(m, &scenario, &cfg, &opts).with_context(|| format!("method {m} failed"))?;
        let mut times = Vec::with_capacity(args.reps);
        let mut last = None;
        for _ in 0..args.reps {
            let o = run_method(m, &scenario, &cfg, &opts).with_context(|| format!("method {m} failed"))?;
            times.push(o.seconds);
            last = Some(o);
        }
        let o = last.expect("reps >= 1");
        let med = median(&times);
        let min = times.iter().copied().fold(f64::INFINITY, f64::min);
        let max = times.iter().copied().fold(0.0, f64::max);
        println!(
            "{:<11} {:>5} {:>14.4} {:>12.4} {:>12.4} {:>10}",
            m.name(),
            args.reps,
            med,
            min,
            max,
            o.iterations
        );
        table.write_record([
            m.to_string(),
            args.reps.to_string(),
            med.to_string(),
            min.to_string(),
            max.to_string(),
            o.iterations.to_string(),
            o.se.sum_bits().to_string(),
        ])?;
    }
    table.flush()?;
    Ok(exit::OK)
}
