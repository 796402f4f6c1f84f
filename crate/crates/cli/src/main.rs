//! `dpd`: run DPD integrator experiments and write CSV tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use dpd_core::harness::{
    self, bench_cpu_per_step, critical_stepsize, efficiency_table, rdf_study, run_single, sweep, ExperimentConfig,
    RdfStudySpec,
};
use dpd_core::{Error, SchemeKind};

#[derive(Parser, Debug)]
#[command(name = "dpd", version, about = "DPD integrator benchmarks: convergence, critical stepsize, cost, RDF")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One run per scheme at the first stepsize; writes runs.csv.
    Simulate,
    /// One run per (scheme, stepsize) plus log-log slope fits; writes runs.csv.
    Sweep,
    /// Bisection for the largest stepsize with T_c error within tolerance.
    Critical,
    /// CPU time per step with observables disabled.
    Bench,
    /// Critical stepsize and timing per scheme; writes efficiency.csv.
    Efficiency,
    /// Reference RDF plus one RDF per (scheme, stepsize); writes rdf.csv.
    Rdf,
}

/// Every config key can be set here; flags win over the config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated scheme names (shardlow, aboba, m-shardlow-1, m-shardlow-2).
    #[arg(long, global = true, value_delimiter = ',')]
    scheme: Option<Vec<SchemeKind>>,
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    kbt: Option<f64>,
    #[arg(long, global = true)]
    r_c: Option<f64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "box", global = true)]
    box_len: Option<f64>,
    #[arg(long, global = true)]
    mass: Option<f64>,
    /// Single stepsize.
    #[arg(long, global = true, conflicts_with = "dt_list")]
    dt: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    dt_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    time: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    equilibration: Option<f64>,
    #[arg(long, global = true)]
    temperature_stride: Option<u64>,
    #[arg(long, global = true)]
    rdf_stride: Option<u64>,
    #[arg(long, global = true)]
    rdf_bin_width: Option<f64>,
    #[arg(long, global = true)]
    rdf_interval: Option<f64>,
    #[arg(long, global = true)]
    rdf_r_min: Option<f64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true)]
    skin: Option<f64>,
    #[arg(long, global = true)]
    max_steps: Option<u64>,
    #[arg(long, global = true)]
    fit_min: Option<f64>,
    #[arg(long, global = true)]
    fit_max: Option<f64>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    critical_lo: Option<f64>,
    #[arg(long, global = true)]
    critical_hi: Option<f64>,
    #[arg(long, global = true)]
    critical_resolution: Option<f64>,
    #[arg(long, global = true)]
    reference_dt: Option<f64>,
    #[arg(long, global = true)]
    reference_time: Option<f64>,
    #[arg(long, global = true)]
    bench_steps: Option<u64>,
    #[arg(long, global = true)]
    bench_repeats: Option<u32>,
    #[arg(long, global = true)]
    bench_dt: Option<f64>,
}

impl Overrides {
    fn apply(self, c: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident => $key:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { c.$key = v; })*
            };
        }
        set!(
            scheme => schemes, a => a, gamma => gamma, kbt => kbt, r_c => r_c, n => n, box_len => box_len,
            mass => mass, dt_list => dt, time => time, seed => seed, out => out, equilibration => equilibration,
            temperature_stride => temperature_stride, rdf_stride => rdf_stride, rdf_bin_width => rdf_bin_width,
            rdf_interval => rdf_interval, rdf_r_min => rdf_r_min, replicas => replicas, skin => skin,
            max_steps => max_steps, fit_min => fit_min, fit_max => fit_max, tolerance => tolerance,
            critical_lo => critical_lo, critical_hi => critical_hi, critical_resolution => critical_resolution,
            reference_dt => reference_dt, reference_time => reference_time, bench_steps => bench_steps,
            bench_repeats => bench_repeats, bench_dt => bench_dt,
        );
        if let Some(h) = self.dt {
            c.dt = vec![h];
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParams(_) | Error::BoxTooSmall { .. } | Error::IncompleteTable(_) => 2,
        Error::Unstable { .. } | Error::SearchFailed(_) | Error::DegeneratePair { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> dpd_core::Result<()> {
    let mut config = match &cli.overrides.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cli.overrides.apply(&mut config);
    config.validate()?;
    std::fs::create_dir_all(&config.out)?;
    let params = config.params()?;

    match cli.command {
        Command::Simulate => {
            let dt = config.dt[0];
            let mut reports = Vec::new();
            for &scheme in &config.schemes {
                let r = run_single(&config.run_spec(scheme, dt)?)?;
                println!(
                    "{:<13} dt={dt:<8} steps={:<8} T_c={:.5} T_k={:.5} stable={}",
                    scheme.name(),
                    r.steps,
                    r.t_c,
                    r.t_k,
                    r.stable
                );
                reports.push(r);
            }
            harness::write_runs_csv(&config.out.join("runs.csv"), &reports)?;
            if let Some(r) = reports.iter().find(|r| !r.stable) {
                return Err(Error::Unstable { step: r.unstable_step.unwrap_or(0) });
            }
        }
        Command::Sweep => {
            let result = sweep(&config)?;
            harness::write_runs_csv(&config.out.join("runs.csv"), &result.reports)?;
            for r in &result.reports {
                println!("{:<13} dt={:<10.5} rel_err_tc={:.5} stable={}", r.scheme.name(), r.dt, r.rel_err_tc, r.stable);
            }
            for f in &result.fits {
                match f.slope {
                    Some(s) => println!("{:<13} slope={s:.3} over {} points", f.scheme.name(), f.points_used),
                    None => println!("{:<13} slope=n/a", f.scheme.name()),
                }
                if !f.excluded_unstable.is_empty() {
                    warn!("{}: unstable at dt {:?}, excluded from fit", f.scheme, f.excluded_unstable);
                }
            }
        }
        Command::Critical => {
            for &scheme in &config.schemes {
                let c = critical_dt(&config, scheme)?;
                println!("{:<13} critical_dt={:.4}{}", scheme.name(), c.0, if c.1 { " (upper bracket)" } else { "" });
            }
        }
        Command::Bench => {
            for &scheme in &config.schemes {
                let b = bench_cpu_per_step(scheme, &params, config.bench_dt, config.bench_steps, config.bench_repeats, config.seed)?;
                println!("{:<13} ms_per_step={:.4} force_evals={}", scheme.name(), b.ms_per_step, b.force_evals);
            }
        }
        Command::Efficiency => {
            if !config.schemes.contains(&SchemeKind::Shardlow) {
                return Err(Error::IncompleteTable("the efficiency table is scaled to Shardlow, which is not selected".into()));
            }
            let mut rows = Vec::new();
            for &scheme in &config.schemes {
                let (dt, _) = critical_dt(&config, scheme)?;
                let b = bench_cpu_per_step(scheme, &params, config.bench_dt, config.bench_steps, config.bench_repeats, config.seed)?;
                rows.push((scheme, dt, b.ms_per_step));
            }
            let table = efficiency_table(&rows)?;
            harness::write_efficiency_csv(&config.out.join("efficiency.csv"), &table)?;
            for r in &table {
                println!(
                    "{:<13} critical_dt={:.4} ms_per_step={:.4} efficiency={:.2}%",
                    r.scheme.name(),
                    r.critical_dt,
                    r.ms_per_step,
                    r.efficiency_pct
                );
            }
        }
        Command::Rdf => {
            let spec = RdfStudySpec {
                params,
                schemes: config.schemes.clone(),
                stepsizes: config.dt.clone(),
                reference_dt: config.reference_dt,
                reference_time: config.reference_time,
                time: config.time,
                seed: config.seed,
                bin_width: config.rdf_bin_width,
                snapshot_interval: config.rdf_interval,
                replicas: config.replicas,
                r_min: config.rdf_r_min,
            };
            let study = rdf_study(&spec)?;
            harness::write_rdf_study_csv(&config.out.join("rdf.csv"), &study)?;
            for c in &study.curves {
                println!("{:<13} dt={:<8} sup_dev={:.4} stable={}", c.scheme.name(), c.dt, c.deviation, c.stable);
            }
        }
    }
    info!("output in {}", config.out.display());
    Ok(())
}

fn critical_dt(config: &ExperimentConfig, scheme: SchemeKind) -> dpd_core::Result<(f64, bool)> {
    let template = config.run_spec(scheme, config.critical_lo)?;
    let c = critical_stepsize(&template, config.tolerance, config.critical_lo, config.critical_hi, config.critical_resolution)?;
    Ok((c.critical_dt, c.hit_upper_bound))
}
