//! Experiment orchestration: single runs, stepsize sweeps, critical stepsize
//! search, CPU timing, efficiency tables and RDF studies.
//!
//! Everything here is deterministic given a seed except wall-clock timings.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{ForceField, Integrator, SchemeKind, SchemeSpec, StepCounters};
use crate::model::{init_state, DpdParams, RngStream};
use crate::neighbors::DEFAULT_SKIN_FRACTION;
use crate::observables::{kinetic_temperature, rdf_sup_deviation, ObservableSeries, RdfHistogram, RdfPoint};

/// A run is declared unstable once the kinetic temperature exceeds this
/// multiple of `kBT`, in addition to any non-finite momentum or force.
pub const BLOWUP_TEMPERATURE_FACTOR: f64 = 1e4;

/// Structured experiment description. Loaded from a flat `key = value`
/// (TOML) file; every key can be overridden on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schemes: Vec<SchemeKind>,
    pub a: f64,
    pub gamma: f64,
    pub kbt: f64,
    pub r_c: f64,
    pub box_len: f64,
    pub n: usize,
    pub mass: f64,
    /// Stepsizes, ascending.
    pub dt: Vec<f64>,
    /// Simulated time per run, reduced units.
    pub time: f64,
    pub seed: u64,
    /// Fraction of each run discarded before sampling.
    pub equilibration: f64,
    pub temperature_stride: u64,
    pub rdf_stride: u64,
    pub rdf_bin_width: f64,
    /// Snapshot interval of RDF studies, in simulated time, so that runs at
    /// different stepsizes collect the same number of snapshots.
    pub rdf_interval: f64,
    /// Bins with `r_center <= rdf_r_min` are ignored by RDF comparisons.
    pub rdf_r_min: f64,
    /// Independent replicas per run point, merged into one report.
    pub replicas: u64,
    /// Neighbor-list skin; defaults to `0.3 r_c`.
    pub skin: f64,
    /// Upper bound on steps of any single run.
    pub max_steps: u64,
    pub fit_min: f64,
    pub fit_max: f64,
    pub tolerance: f64,
    pub critical_lo: f64,
    pub critical_hi: f64,
    pub critical_resolution: f64,
    pub reference_dt: f64,
    pub reference_time: f64,
    pub bench_steps: u64,
    pub bench_repeats: u32,
    pub bench_dt: f64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schemes: vec![SchemeKind::Shardlow, SchemeKind::Aboba, SchemeKind::MShardlow2],
            a: 18.75,
            gamma: 4.5,
            kbt: 1.0,
            r_c: 1.0,
            box_len: 5.0,
            n: 500,
            mass: 1.0,
            dt: geometric_grid(0.002, 0.15, 12),
            time: 1000.0,
            seed: 2024,
            equilibration: 0.2,
            temperature_stride: 10,
            rdf_stride: 100,
            rdf_bin_width: 0.01,
            rdf_interval: 0.05,
            rdf_r_min: 0.1,
            replicas: 1,
            skin: DEFAULT_SKIN_FRACTION,
            max_steps: 10_000_000,
            fit_min: 0.02,
            fit_max: 0.1,
            tolerance: 0.10,
            critical_lo: 0.01,
            critical_hi: 0.2,
            critical_resolution: 0.001,
            reference_dt: 0.001,
            reference_time: 100.0,
            bench_steps: 10_000,
            bench_repeats: 3,
            bench_dt: 0.05,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn params(&self) -> Result<DpdParams> {
        DpdParams::new(self.a, self.gamma, self.kbt, self.r_c, self.box_len, self.n, self.mass)
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks the invariants and sorts the stepsizes ascending.
    pub fn validate(&mut self) -> Result<()> {
        self.params()?;
        if self.dt.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::Config("stepsizes must be positive".into()));
        }
        self.dt.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if !(self.time > 0.0) {
            return Err(Error::Config("total time must be positive".into()));
        }
        if let Some(&h) = self.dt.first() {
            let steps = steps_for(self.time, h);
            if steps > self.max_steps {
                return Err(Error::Config(format!("time {} / dt {h} = {steps} steps exceeds budget {}", self.time, self.max_steps)));
            }
        }
        if !(0.0..1.0).contains(&self.equilibration) {
            return Err(Error::Config("equilibration fraction must lie in [0, 1)".into()));
        }
        if self.temperature_stride == 0 || self.rdf_stride == 0 || self.replicas == 0 {
            return Err(Error::Config("strides and replicas must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("no scheme selected".into()));
        }
        Ok(())
    }

    /// Per-run settings for one scheme and stepsize.
    pub fn run_spec(&self, scheme: SchemeKind, dt: f64) -> Result<RunSpec> {
        Ok(RunSpec {
            scheme,
            params: self.params()?,
            dt,
            time: self.time,
            seed: self.seed,
            equilibration: self.equilibration,
            temperature_stride: self.temperature_stride,
            rdf: None,
            skin: self.skin * self.r_c,
            replicas: self.replicas,
        })
    }
}

/// `per_decade` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let intervals = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=intervals).map(|k| lo * (hi / lo).powf(k as f64 / intervals as f64)).collect()
}

/// Number of whole steps of length `dt` that fit in `time`.
pub fn steps_for(time: f64, dt: f64) -> u64 {
    (time / dt * (1.0 + 1e-12)).floor() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdfSettings {
    pub bin_width: f64,
    pub stride: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub scheme: SchemeKind,
    pub params: DpdParams,
    pub dt: f64,
    pub time: f64,
    pub seed: u64,
    pub equilibration: f64,
    pub temperature_stride: u64,
    pub rdf: Option<RdfSettings>,
    pub skin: f64,
    pub replicas: u64,
}

impl RunSpec {
    pub fn new(scheme: SchemeKind, params: DpdParams, dt: f64, time: f64, seed: u64) -> Self {
        RunSpec {
            scheme,
            params,
            dt,
            time,
            seed,
            equilibration: 0.2,
            temperature_stride: 10,
            rdf: None,
            skin: DEFAULT_SKIN_FRACTION * params.r_c,
            replicas: 1,
        }
    }

    pub fn with_rdf(mut self, bin_width: f64, stride: u64) -> Self {
        self.rdf = Some(RdfSettings { bin_width, stride });
        self
    }

    pub fn with_replicas(mut self, replicas: u64) -> Self {
        self.replicas = replicas.max(1);
        self
    }
}

/// Outcome of one run point (possibly merged over replicas).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scheme: SchemeKind,
    pub a: f64,
    pub gamma: f64,
    pub dt: f64,
    /// Steps per replica.
    pub steps: u64,
    pub t_c: f64,
    pub t_k: f64,
    pub rel_err_tc: f64,
    pub rel_err_tk: f64,
    pub ms_per_step: f64,
    pub force_evals: u64,
    pub pair_sweeps: u64,
    pub stable: bool,
    /// Step at which the first unstable replica blew up.
    pub unstable_step: Option<u64>,
    pub seed: u64,
    #[serde(skip)]
    pub series: ObservableSeries,
    #[serde(skip)]
    pub rdf: Option<RdfHistogram>,
}

impl RunReport {
    pub fn rdf_table(&self) -> Option<Vec<RdfPoint>> {
        self.rdf.as_ref().map(|h| h.finalize())
    }
}

struct ReplicaOutcome {
    series: ObservableSeries,
    rdf: Option<RdfHistogram>,
    counters: StepCounters,
    unstable_step: Option<u64>,
    seconds: f64,
}

fn run_replica(spec: &RunSpec, replica: u64) -> Result<ReplicaOutcome> {
    let params = &spec.params;
    let mut rng = RngStream::with_stream(spec.seed, replica);
    let mut state = init_state(params, &mut rng)?;
    let field = crate::integrators::DpdForceField::new(&state, params, spec.skin)?;
    let mut integ = Integrator::new(SchemeSpec::new(spec.scheme), *params, field);

    let steps = steps_for(spec.time, spec.dt);
    let discard = (spec.equilibration * steps as f64).floor() as u64;
    let mut series = ObservableSeries::new();
    let mut rdf = match spec.rdf {
        Some(s) => Some(RdfHistogram::new(s.bin_width, 0.5 * params.box_len, params.n, params.box_len)?),
        None => None,
    };
    let blowup = BLOWUP_TEMPERATURE_FACTOR * params.kbt.max(f64::MIN_POSITIVE);
    let mut unstable_step = None;

    let start = Instant::now();
    for step in 1..=steps {
        if let Err(e) = integ.step(&mut state, spec.dt, &mut rng) {
            match e {
                Error::DegeneratePair { .. } => {
                    unstable_step = Some(step);
                    break;
                }
                other => return Err(other),
            }
        }
        if step % spec.temperature_stride == 0 || step == steps {
            let tk = kinetic_temperature(&state);
            if !state.all_finite() || !(tk < blowup) {
                unstable_step = Some(step);
                break;
            }
            if step > discard && step % spec.temperature_stride == 0 {
                if !state.forces_current {
                    integ.field.evaluate(&mut state)?;
                }
                series.record(tk, &integ.field.totals());
            }
        }
        if let (Some(h), Some(s)) = (rdf.as_mut(), spec.rdf) {
            if step > discard && step % s.stride == 0 {
                h.accumulate(&state);
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(ReplicaOutcome { series, rdf, counters: integ.counters, unstable_step, seconds })
}

/// Equilibrate and sample one (scheme, stepsize) point.
///
/// A run whose momenta or forces become non-finite (or whose kinetic
/// temperature exceeds [`BLOWUP_TEMPERATURE_FACTOR`] `kBT`) is reported with
/// `stable = false` and infinite relative errors.
pub fn run_single(spec: &RunSpec) -> Result<RunReport> {
    if !(spec.dt > 0.0) || !(spec.time > 0.0) {
        return Err(Error::Config("stepsize and time must be positive".into()));
    }
    spec.params.validate()?;
    let outcomes: Vec<ReplicaOutcome> = if spec.replicas > 1 {
        (0..spec.replicas).into_par_iter().map(|r| run_replica(spec, r)).collect::<Result<_>>()?
    } else {
        vec![run_replica(spec, 0)?]
    };

    let mut series = ObservableSeries::new();
    let mut rdf: Option<RdfHistogram> = None;
    let mut force_evals = 0;
    let mut pair_sweeps = 0;
    let mut unstable_step = None;
    let mut seconds = 0.0;
    let mut total_steps = 0;
    for o in &outcomes {
        series.merge(&o.series);
        match (&mut rdf, &o.rdf) {
            (None, Some(h)) => rdf = Some(h.clone()),
            (Some(acc), Some(h)) => acc.merge(h)?,
            _ => {}
        }
        force_evals += o.counters.force_evaluations;
        pair_sweeps += o.counters.pair_sweeps;
        total_steps += o.counters.steps;
        seconds += o.seconds;
        if unstable_step.is_none() {
            unstable_step = o.unstable_step;
        }
    }
    let stable = unstable_step.is_none();
    let kbt = spec.params.kbt;
    let (t_c, t_k) = if stable {
        (series.configurational_temperature().unwrap_or(f64::NAN), series.kinetic_temperature().unwrap_or(f64::NAN))
    } else {
        (f64::NAN, f64::NAN)
    };
    let rel = |x: f64| if x.is_finite() { (x - kbt).abs() / kbt } else { f64::INFINITY };
    let report = RunReport {
        scheme: spec.scheme,
        a: spec.params.a,
        gamma: spec.params.gamma,
        dt: spec.dt,
        steps: steps_for(spec.time, spec.dt),
        t_c,
        t_k,
        rel_err_tc: rel(t_c),
        rel_err_tk: rel(t_k),
        ms_per_step: if total_steps > 0 { 1e3 * seconds / total_steps as f64 } else { 0.0 },
        force_evals,
        pair_sweeps,
        stable,
        unstable_step,
        seed: spec.seed,
        series,
        rdf,
    };
    debug!(
        "{} dt={} T_c={:.5} T_k={:.5} stable={}",
        report.scheme, report.dt, report.t_c, report.t_k, report.stable
    );
    Ok(report)
}

/// Least-squares slope of `ln y` against `ln x`. Needs at least two points
/// with positive, finite coordinates.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub scheme: SchemeKind,
    pub slope: Option<f64>,
    pub points_used: usize,
    /// Stepsizes inside the window whose runs were unstable and left out.
    pub excluded_unstable: Vec<f64>,
}

/// Slope of the relative `T_c` error against stepsize for each scheme,
/// restricted to `dt` in `[lo, hi]`.
pub fn fit_slopes(reports: &[RunReport], lo: f64, hi: f64) -> Vec<SlopeFit> {
    let mut schemes: Vec<SchemeKind> = reports.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let in_window = |h: f64| h >= lo * (1.0 - 1e-9) && h <= hi * (1.0 + 1e-9);
    schemes
        .into_iter()
        .map(|scheme| {
            let rows: Vec<&RunReport> = reports.iter().filter(|r| r.scheme == scheme && in_window(r.dt)).collect();
            let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.stable).map(|r| (r.dt, r.rel_err_tc)).collect();
            SlopeFit {
                scheme,
                slope: fit_loglog_slope(&pts),
                points_used: pts.len(),
                excluded_unstable: rows.iter().filter(|r| !r.stable).map(|r| r.dt).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub reports: Vec<RunReport>,
    pub fits: Vec<SlopeFit>,
}

/// One run per (scheme, stepsize) in the configuration, then slope fits over
/// `[fit_min, fit_max]`. Reports are ordered by (scheme, dt).
pub fn sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let mut config = config.clone();
    config.validate()?;
    if config.dt.len() < 3 {
        return Err(Error::Config("a sweep needs at least 3 stepsizes".into()));
    }
    let mut jobs = Vec::new();
    for &scheme in &config.schemes {
        for &dt in &config.dt {
            jobs.push(config.run_spec(scheme, dt)?);
        }
    }
    let mut reports: Vec<RunReport> = jobs.par_iter().map(run_single).collect::<Result<_>>()?;
    reports.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.dt.partial_cmp(&b.dt).unwrap()));
    let fits = fit_slopes(&reports, config.fit_min, config.fit_max);
    Ok(SweepResult { reports, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalSearch {
    pub scheme: SchemeKind,
    /// Largest stepsize found with relative `T_c` error within tolerance.
    pub critical_dt: f64,
    /// True when the upper end of the bracket itself met the tolerance.
    pub hit_upper_bound: bool,
    /// Every (dt, relative error) evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisection for the largest stepsize whose relative `T_c` error stays within
/// `tolerance`, between a known-good `lo` and a known-bad `hi`, down to
/// `resolution`. `template` supplies everything but the stepsize.
pub fn critical_stepsize(template: &RunSpec, tolerance: f64, lo: f64, hi: f64, resolution: f64) -> Result<CriticalSearch> {
    if !(lo > 0.0 && hi > lo && resolution > 0.0) {
        return Err(Error::Config(format!("bad bracket [{lo}, {hi}] / resolution {resolution}")));
    }
    let mut evaluations = Vec::new();
    let mut error_at = |dt: f64| -> Result<f64> {
        let spec = RunSpec { dt, ..template.clone() };
        let r = run_single(&spec)?;
        let err = if r.stable { r.rel_err_tc } else { f64::INFINITY };
        debug!("critical {} dt={dt:.5} err={err:.4}", template.scheme);
        evaluations.push((dt, err));
        Ok(err)
    };
    let scheme = template.scheme;
    if !(error_at(lo)? <= tolerance) {
        return Err(Error::SearchFailed(format!("{scheme}: lower bracket dt={lo} already exceeds tolerance")));
    }
    if error_at(hi)? <= tolerance {
        return Ok(CriticalSearch { scheme, critical_dt: hi, hit_upper_bound: true, evaluations });
    }
    let (mut good, mut bad) = (lo, hi);
    while bad - good > resolution {
        let mid = 0.5 * (good + bad);
        if error_at(mid)? <= tolerance {
            good = mid;
        } else {
            bad = mid;
        }
    }
    info!("{scheme}: critical stepsize {good:.4}");
    Ok(CriticalSearch { scheme, critical_dt: good, hit_upper_bound: false, evaluations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub scheme: SchemeKind,
    /// Median over repetitions of wall time per step.
    pub ms_per_step: f64,
    pub repetitions: Vec<f64>,
    /// Force evaluations during one timed repetition.
    pub force_evals: u64,
    pub steps: u64,
}

/// Wall time per step with observables disabled, after a warm-up that
/// equilibrates and fills the neighbor list. Median of `repeats` blocks of
/// `steps` steps each.
pub fn bench_cpu_per_step(scheme: SchemeKind, params: &DpdParams, dt: f64, steps: u64, repeats: u32, seed: u64) -> Result<BenchResult> {
    let mut rng = RngStream::new(seed);
    let mut state = init_state(params, &mut rng)?;
    let mut integ = Integrator::dpd(scheme, &state, params)?;
    let warmup = (steps / 10).clamp(10, 1000);
    for _ in 0..warmup {
        integ.step(&mut state, dt, &mut rng)?;
    }
    let mut times = Vec::with_capacity(repeats as usize);
    let mut force_evals = 0;
    for _ in 0..repeats.max(1) {
        let before = integ.counters.force_evaluations;
        let start = Instant::now();
        for _ in 0..steps {
            integ.step(&mut state, dt, &mut rng)?;
        }
        times.push(1e3 * start.elapsed().as_secs_f64() / steps as f64);
        force_evals = integ.counters.force_evaluations - before;
    }
    if !state.all_finite() {
        return Err(Error::Unstable { step: state.step_count });
    }
    let mut sorted = times.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(BenchResult { scheme, ms_per_step: sorted[sorted.len() / 2], repetitions: times, force_evals, steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub scheme: SchemeKind,
    pub critical_dt: f64,
    pub ms_per_step: f64,
    /// Critical stepsize per CPU time, as a percentage of Shardlow's.
    pub efficiency_pct: f64,
}

/// Scales `critical_dt / ms_per_step` so the Shardlow row reads 100%.
/// Input rows are `(scheme, critical_dt, ms_per_step)`.
pub fn efficiency_table(rows: &[(SchemeKind, f64, f64)]) -> Result<Vec<EfficiencyRow>> {
    for &(scheme, dt, ms) in rows {
        if !(dt > 0.0 && dt.is_finite() && ms > 0.0 && ms.is_finite()) {
            return Err(Error::IncompleteTable(format!("{scheme}: critical dt {dt}, ms/step {ms}")));
        }
    }
    let &(_, dt_ref, ms_ref) = rows
        .iter()
        .find(|r| r.0 == SchemeKind::Shardlow)
        .ok_or_else(|| Error::IncompleteTable("Shardlow benchmark row missing".into()))?;
    let base = dt_ref / ms_ref;
    Ok(rows
        .iter()
        .map(|&(scheme, critical_dt, ms_per_step)| EfficiencyRow {
            scheme,
            critical_dt,
            ms_per_step,
            efficiency_pct: if scheme == SchemeKind::Shardlow { 100.0 } else { 100.0 * critical_dt / ms_per_step / base },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdfCurve {
    pub scheme: SchemeKind,
    pub dt: f64,
    pub stable: bool,
    /// Sup-norm distance to the reference over `r > r_min`.
    pub deviation: f64,
    pub points: Vec<RdfPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdfStudy {
    pub reference_dt: f64,
    pub reference: Vec<RdfPoint>,
    pub curves: Vec<RdfCurve>,
}

/// Settings shared by the reference and the compared runs of an RDF study.
#[derive(Debug, Clone, PartialEq)]
pub struct RdfStudySpec {
    pub params: DpdParams,
    pub schemes: Vec<SchemeKind>,
    pub stepsizes: Vec<f64>,
    pub reference_dt: f64,
    pub reference_time: f64,
    pub time: f64,
    pub seed: u64,
    pub bin_width: f64,
    /// Snapshot interval in simulated time.
    pub snapshot_interval: f64,
    pub replicas: u64,
    pub r_min: f64,
}

/// Reference RDF from Shardlow at `reference_dt`, then one RDF per
/// (scheme, stepsize) with its sup-norm deviation from the reference.
/// Unstable runs keep whatever snapshots they collected and are flagged.
pub fn rdf_study(spec: &RdfStudySpec) -> Result<RdfStudy> {
    let stride = |dt: f64| ((spec.snapshot_interval / dt).round() as u64).max(1);
    let reference_run = RunSpec::new(SchemeKind::Shardlow, spec.params, spec.reference_dt, spec.reference_time, spec.seed)
        .with_rdf(spec.bin_width, stride(spec.reference_dt))
        .with_replicas(spec.replicas);
    let reference = run_single(&reference_run)?
        .rdf_table()
        .ok_or_else(|| Error::Config("reference run produced no RDF".into()))?;
    let mut jobs = Vec::new();
    for &scheme in &spec.schemes {
        for &dt in &spec.stepsizes {
            jobs.push(
                RunSpec::new(scheme, spec.params, dt, spec.time, spec.seed.wrapping_add(1))
                    .with_rdf(spec.bin_width, stride(dt))
                    .with_replicas(spec.replicas),
            );
        }
    }
    let curves = jobs
        .par_iter()
        .map(|job| {
            let report = run_single(job)?;
            let points = report.rdf_table().unwrap_or_default();
            let have_data = report.rdf.as_ref().is_some_and(|h| h.samples() > 0);
            let deviation = if have_data { rdf_sup_deviation(&points, &reference, spec.r_min) } else { f64::INFINITY };
            Ok(RdfCurve { scheme: job.scheme, dt: job.dt, stable: report.stable, deviation, points })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RdfStudy { reference_dt: spec.reference_dt, reference, curves })
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `runs.csv`: scheme, a, gamma, dt, steps, t_c, t_k, rel_err_tc, rel_err_tk,
/// ms_per_step, force_evals, stable.
pub fn write_runs_csv(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "a", "gamma", "dt", "steps", "t_c", "t_k", "rel_err_tc", "rel_err_tk", "ms_per_step", "force_evals", "stable"])?;
    for r in reports {
        w.write_record([
            r.scheme.name().to_string(),
            fmt_f(r.a),
            fmt_f(r.gamma),
            fmt_f(r.dt),
            r.steps.to_string(),
            fmt_f(r.t_c),
            fmt_f(r.t_k),
            fmt_f(r.rel_err_tc),
            fmt_f(r.rel_err_tk),
            format!("{:.6}", r.ms_per_step),
            r.force_evals.to_string(),
            r.stable.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `rdf.csv`: r_center, g, scheme, dt; one block per curve.
pub fn write_rdf_study_csv(path: &Path, study: &RdfStudy) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r_center", "g", "scheme", "dt"])?;
    let mut block = |points: &[RdfPoint], scheme: &str, dt: f64| -> Result<()> {
        for p in points {
            w.write_record([fmt_f(p.r_center), fmt_f(p.g), scheme.to_string(), fmt_f(dt)])?;
        }
        Ok(())
    };
    block(&study.reference, "reference", study.reference_dt)?;
    for c in &study.curves {
        block(&c.points, c.scheme.name(), c.dt)?;
    }
    w.flush()?;
    Ok(())
}

/// `efficiency.csv`: scheme, critical_dt, ms_per_step, efficiency_pct.
pub fn write_efficiency_csv(path: &Path, rows: &[EfficiencyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "critical_dt", "ms_per_step", "efficiency_pct"])?;
    for r in rows {
        w.write_record([r.scheme.name().to_string(), fmt_f(r.critical_dt), format!("{:.6}", r.ms_per_step), format!("{:.2}", r.efficiency_pct)])?;
    }
    w.flush()?;
    Ok(())
}
