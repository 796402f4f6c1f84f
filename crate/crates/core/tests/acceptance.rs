//! Acceptance run for the full experimental profile (N = 500, L = 5).
//!
//! Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//! `ACCEPTANCE_CRITERIA=1,5` restricts the run to the listed criteria.
//! Single-threaded runtime is roughly a quarter of an hour.

use std::process::ExitCode;
use std::time::Instant;

use dpd_core::forces::{compute_forces_all_pairs, pair_laplacian, potential_energy, PairGeometry};
use dpd_core::harness::{
    bench_cpu_per_step, critical_stepsize, efficiency_table, fit_loglog_slope, geometric_grid, rdf_study, run_single,
    sweep, ExperimentConfig, RdfStudySpec, RunSpec,
};
use dpd_core::integrators::{
    bbk_pair_sweep, exact_ou_pair_sweep, improper_yoshida_coefficients, yoshida4_substep, yoshida_coefficients,
    ForceField,
};
use dpd_core::model::init_state;
use dpd_core::neighbors::{brute_force_pairs, NeighborList};
use dpd_core::observables::total_momentum;
use dpd_core::{DpdParams, Integrator, Result, RngStream, SchemeKind, SchemeSpec, SystemState, Vec3};

const SEED: u64 = 20_240_607;
const SWEEP_TIME: f64 = 200.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn standard(gamma: f64) -> DpdParams {
    DpdParams::standard(25.0, gamma).expect("standard parameters")
}

/// Convergence orders of the relative T_c error at T = 200.
fn criterion_1() -> Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for gamma in [4.5, 40.5] {
        let base = ExperimentConfig { a: 25.0, gamma, time: SWEEP_TIME, seed: SEED, ..Default::default() };
        let second = ExperimentConfig {
            schemes: vec![SchemeKind::Shardlow, SchemeKind::Aboba],
            dt: geometric_grid(0.02, 0.1, 12),
            fit_min: 0.02,
            fit_max: 0.1,
            ..base.clone()
        };
        let third = ExperimentConfig {
            schemes: vec![SchemeKind::MShardlow2],
            dt: geometric_grid(0.04, 0.12, 12),
            fit_min: 0.04,
            fit_max: 0.12,
            ..base
        };
        for (config, lo, hi) in [(second, 1.6, 2.4), (third, 2.5, f64::INFINITY)] {
            for fit in sweep(&config)?.fits {
                let ok = fit.slope.is_some_and(|s| s >= lo && s <= hi);
                pass &= ok;
                lines.push(format!(
                    "{}(g={gamma})={}",
                    fit.scheme,
                    fit.slope.map_or("n/a".into(), |s| format!("{s:.2}"))
                ));
            }
        }
    }
    Ok(outcome(pass, lines.join(" ")))
}

fn critical(scheme: SchemeKind, gamma: f64) -> Result<f64> {
    let template = RunSpec::new(scheme, standard(gamma), 0.02, SWEEP_TIME, SEED);
    Ok(critical_stepsize(&template, 0.10, 0.02, 0.2, 0.001)?.critical_dt)
}

/// Critical stepsizes at (25, 4.5): ordering and closeness to the published values.
fn criterion_2(table1: &mut Vec<(SchemeKind, f64)>) -> Result<Outcome> {
    let published = [(SchemeKind::Shardlow, 0.051), (SchemeKind::MShardlow2, 0.096), (SchemeKind::Aboba, 0.1132)];
    let mut pass = true;
    let mut lines = Vec::new();
    for (scheme, target) in published {
        let dt = critical(scheme, 4.5)?;
        let ok = (dt - target).abs() <= 0.3 * target;
        pass &= ok;
        lines.push(format!("{scheme}={dt:.4} (published {target})"));
        table1.push((scheme, dt));
    }
    let get = |k| table1.iter().find(|r| r.0 == k).unwrap().1;
    let ordered = get(SchemeKind::Aboba) > get(SchemeKind::MShardlow2) && get(SchemeKind::MShardlow2) > get(SchemeKind::Shardlow);
    lines.push(format!("ordering {}", if ordered { "ok" } else { "violated" }));
    Ok(outcome(pass && ordered, lines.join(", ")))
}

/// Force budgets, CPU-time ratios and efficiency ordering for all four tables.
fn criterion_3(table1: &[(SchemeKind, f64)]) -> Result<Outcome> {
    let params = standard(4.5);
    let steps = 10_000;
    let mut lines = Vec::new();
    let mut pass = true;

    let mut ms = Vec::new();
    for scheme in [SchemeKind::Shardlow, SchemeKind::Aboba, SchemeKind::MShardlow2] {
        let b = bench_cpu_per_step(scheme, &params, 0.05, steps, 3, SEED)?;
        let budget = SchemeSpec::new(scheme).force_evals_per_step as u64;
        pass &= b.force_evals == steps * budget;
        lines.push(format!("{scheme}: {:.3} ms/step, {} evals", b.ms_per_step, b.force_evals));
        ms.push((scheme, b.ms_per_step));
    }
    // M-Shardlow-1 is only counted; it is benchmarked at a step it survives
    let b = bench_cpu_per_step(SchemeKind::MShardlow1, &params, 0.01, steps, 1, SEED)?;
    pass &= b.force_evals == 3 * steps;
    lines.push(format!("mshardlow1: {} evals", b.force_evals));

    let time = |k| ms.iter().find(|r: &&(SchemeKind, f64)| r.0 == k).unwrap().1;
    let r_ms = time(SchemeKind::MShardlow2) / time(SchemeKind::Shardlow);
    let r_ab = time(SchemeKind::Aboba) / time(SchemeKind::Shardlow);
    let ratios_ok = (2.0..=4.0).contains(&r_ms) && (0.6..=1.2).contains(&r_ab);
    pass &= ratios_ok;
    lines.push(format!("ratios ms2/sh={r_ms:.2} aboba/sh={r_ab:.2}"));

    // ABOBA counts as far ahead when at least 1.5 times either competitor
    for gamma in [4.5, 40.5, 200.0, 450.0] {
        let mut rows = Vec::new();
        for &(scheme, t) in &ms {
            let dt = match table1.iter().find(|r| r.0 == scheme) {
                Some(r) if gamma == 4.5 => r.1,
                _ => critical(scheme, gamma)?,
            };
            rows.push((scheme, dt, t));
        }
        let table = efficiency_table(&rows)?;
        let eff = |k| table.iter().find(|r| r.scheme == k).unwrap().efficiency_pct;
        let ab = eff(SchemeKind::Aboba);
        let ok = ab >= 1.5 * eff(SchemeKind::Shardlow) && ab >= 1.5 * eff(SchemeKind::MShardlow2);
        pass &= ok;
        lines.push(format!(
            "g={gamma}: sh 100% ms2 {:.1}% aboba {:.1}% (dt {:.4}/{:.4}/{:.4})",
            eff(SchemeKind::MShardlow2),
            ab,
            rows[0].1,
            rows[2].1,
            rows[1].1
        ));
    }
    Ok(outcome(pass, lines.join("; ")))
}

/// Smooth anharmonic well `U = |x|^2/2 + |x|^4/4` per particle.
struct Anharmonic {
    evals: u64,
}

const CENTRE: f64 = 50.0;

impl ForceField for Anharmonic {
    fn evaluate(&mut self, state: &mut SystemState) -> Result<()> {
        self.evals += 1;
        for (f, q) in state.f.iter_mut().zip(&state.q) {
            let x = q - Vec3::repeat(CENTRE);
            *f = -x * (1.0 + x.norm_squared());
        }
        state.forces_current = true;
        Ok(())
    }
    fn interacting_pairs(&self) -> &[PairGeometry] {
        &[]
    }
    fn box_len(&self) -> f64 {
        100.0
    }
    fn evaluations(&self) -> u64 {
        self.evals
    }
}

fn composition_energy_error(x0: f64, x1: f64, h: f64) -> f64 {
    let energy = |s: &SystemState| {
        let x = s.q[0] - Vec3::repeat(CENTRE);
        0.5 * s.p[0].norm_squared() + 0.5 * x.norm_squared() + 0.25 * x.norm_squared().powi(2)
    };
    let mut s = SystemState::from_parts(
        vec![Vec3::new(CENTRE + 0.8, CENTRE, CENTRE + 0.3)],
        vec![Vec3::new(0.0, 0.6, 0.0)],
        1.0,
        100.0,
    );
    let mut field = Anharmonic { evals: 0 };
    let e0 = energy(&s);
    let steps = (10.0 / h).round() as usize;
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        yoshida4_substep(&mut s, &mut field, h, x0, x1).unwrap();
        worst = worst.max((energy(&s) - e0).abs());
    }
    worst
}

/// Improper coefficients: order drop on a smooth surrogate and in full DPD.
fn criterion_4() -> Result<Outcome> {
    let hs = [0.05, 0.025, 0.0125];
    let slope = |(x0, x1): (f64, f64)| {
        let pts: Vec<(f64, f64)> = hs.iter().map(|&h| (h, composition_energy_error(x0, x1, h))).collect();
        fit_loglog_slope(&pts).unwrap_or(f64::NAN)
    };
    let corrected = slope(yoshida_coefficients());
    let improper = slope(improper_yoshida_coefficients());
    let params = standard(4.5);
    let ms1 = run_single(&RunSpec::new(SchemeKind::MShardlow1, params, 0.08, SWEEP_TIME, SEED))?;
    let ms2 = run_single(&RunSpec::new(SchemeKind::MShardlow2, params, 0.08, SWEEP_TIME, SEED))?;
    let pass = (3.5..=4.5).contains(&corrected) && (1.6..=2.4).contains(&improper) && ms1.rel_err_tc > ms2.rel_err_tc;
    Ok(outcome(
        pass,
        format!(
            "surrogate slopes corrected={corrected:.2} improper={improper:.2}; dt=0.08 T_c error ms1={:.4}{} ms2={:.4}",
            ms1.rel_err_tc,
            if ms1.stable { "" } else { " (unstable)" },
            ms2.rel_err_tc
        ),
    ))
}

/// `m` isolated pairs at separation 0.5 along x; particles 2k and 2k+1.
fn frozen_pairs(m: usize, v0: f64) -> (SystemState, Vec<PairGeometry>) {
    let q = (0..2 * m).map(|k| Vec3::new(if k % 2 == 0 { 1.5 } else { 1.0 }, 1.0, 1.0)).collect();
    let p = (0..2 * m).map(|k| Vec3::new(if k % 2 == 0 { 0.5 * v0 } else { -0.5 * v0 }, 0.0, 0.0)).collect();
    let state = SystemState::from_parts(q, p, 1.0, 5.0);
    let pairs = (0..m).map(|k| PairGeometry { i: 2 * k, j: 2 * k + 1, r_vec: Vec3::new(0.5, 0.0, 0.0), r: 0.5 }).collect();
    (state, pairs)
}

fn relative_velocities(state: &SystemState, m: usize) -> Vec<f64> {
    (0..m).map(|k| state.p[2 * k].x - state.p[2 * k + 1].x).collect()
}

/// Momentum conservation, exact OU variance, BBK weak order.
fn criterion_5() -> Result<Outcome> {
    let mut lines = Vec::new();
    let params = standard(4.5);
    let n = params.n as f64;

    let mut drift_ok = true;
    for scheme in SchemeKind::ALL {
        let mut rng = RngStream::new(SEED);
        let mut state = init_state(&params, &mut rng)?;
        let mut integ = Integrator::dpd(scheme, &state, &params)?;
        let mut last = total_momentum(&state);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            integ.step(&mut state, 0.01, &mut rng)?;
            let now = total_momentum(&state);
            worst = worst.max((now - last).amax());
            last = now;
        }
        drift_ok &= worst <= 1e-10 * n;
        lines.push(format!("{scheme} max |dP|={worst:.1e}"));
    }

    // exact OU: one long step lands in the stationary law, variance kBT / m_ij
    let m = 100_000;
    let (mut state, pairs) = frozen_pairs(m, 0.0);
    let mut rng = RngStream::new(SEED);
    exact_ou_pair_sweep(&mut state, &params, 50.0, &pairs, &mut rng);
    let v = relative_velocities(&state, m);
    let mean = v.iter().sum::<f64>() / m as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let target = params.kbt / 0.5;
    let ou_ok = ((var - target) / target).abs() <= 0.05;
    lines.push(format!("OU variance {var:.4} vs {target}"));

    // BBK on a frozen pair: moments at T = 0.5 from a large initial velocity
    let (t_end, v0) = (0.5, 1000.0);
    let w = 1.0 - 0.5 / params.r_c;
    let tau = 2.0 * params.gamma * w * w;
    let exact_mean = v0 * (-tau * t_end).exp();
    let exact_second = exact_mean.powi(2) + target * (1.0 - (-2.0 * tau * t_end).exp());
    let mut mean_err = Vec::new();
    let mut second_err = Vec::new();
    for h in [0.1, 0.05, 0.025] {
        let (mut state, pairs) = frozen_pairs(m, v0);
        let mut rng = RngStream::new(SEED);
        for _ in 0..(t_end / h).round() as usize {
            bbk_pair_sweep(&mut state, &params, h, &pairs, &mut rng);
        }
        let v = relative_velocities(&state, m);
        let m1 = v.iter().sum::<f64>() / m as f64;
        let m2 = v.iter().map(|x| x * x).sum::<f64>() / m as f64;
        mean_err.push((h, (m1 - exact_mean).abs()));
        second_err.push((h, (m2 - exact_second).abs()));
    }
    let s1 = fit_loglog_slope(&mean_err).unwrap_or(f64::NAN);
    let s2 = fit_loglog_slope(&second_err).unwrap_or(f64::NAN);
    let bbk_ok = (1.6..=2.4).contains(&s1) && (1.6..=2.4).contains(&s2);
    lines.push(format!("BBK weak slopes mean={s1:.2} second={s2:.2}"));

    Ok(outcome(drift_ok && ou_ok && bbk_ok, lines.join(", ")))
}

/// Neighbor lists against the O(N^2) oracle; forces and Laplacians against
/// finite differences of the potential.
fn criterion_6() -> Result<Outcome> {
    let mut rng = RngStream::new(SEED);
    let mut list_ok = 0;
    for trial in 0..100 {
        let box_len = 2.7 + 9.0 * rng.uniform();
        let n = 20 + (380.0 * rng.uniform()) as usize;
        let params = DpdParams::new(25.0, 4.5, 1.0, 1.0, box_len, n, 1.0)?;
        let state = init_state(&params, &mut RngStream::with_stream(SEED, trial))?;
        let list = NeighborList::build(&state, &params, 0.3)?;
        if list.pairs() == brute_force_pairs(&state.q, box_len, 1.3).as_slice() {
            list_ok += 1;
        }
    }

    let box_len = 3.0;
    let params = DpdParams::new(25.0, 4.5, 1.0, 1.0, box_len, 5, 1.0)?;
    let (mut force_worst, mut lap_worst): (f64, f64) = (0.0, 0.0);
    let mut configs = 0;
    while configs < 100 {
        let q: Vec<Vec3> = (0..5).map(|_| Vec3::new(rng.uniform(), rng.uniform(), rng.uniform()) * box_len).collect();
        let state = SystemState::from_parts(q.clone(), vec![Vec3::zeros(); 5], 1.0, box_len);
        // keep clear of the cutoff kink and of near-coincident pairs
        let dists: Vec<f64> = (0..5)
            .flat_map(|i| (i + 1..5).map(move |j| (i, j)))
            .map(|(i, j)| dpd_core::model::minimum_image(&(q[i] - q[j]), box_len).norm())
            .collect();
        if dists.iter().any(|&r| (r - 1.0).abs() < 1e-2 || r < 0.05) || dists.iter().all(|&r| r >= 1.0) {
            continue;
        }
        configs += 1;
        let report = compute_forces_all_pairs(&state, &params)?;
        let e = 1e-6;
        let lap_h = 1e-4;
        let mut fd_lap = 0.0;
        let mut fd_force = vec![Vec3::zeros(); 5];
        let u0 = potential_energy(&q, &params);
        for i in 0..5 {
            for k in 0..3 {
                let shifted = |d: f64| {
                    let mut x = q.clone();
                    x[i][k] += d;
                    potential_energy(&x, &params)
                };
                fd_force[i][k] = -(shifted(e) - shifted(-e)) / (2.0 * e);
                fd_lap += (shifted(lap_h) - 2.0 * u0 + shifted(-lap_h)) / (lap_h * lap_h);
            }
        }
        let scale = report.f.iter().map(|f| f.amax()).fold(1e-12, f64::max);
        let worst = report.f.iter().zip(&fd_force).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        force_worst = force_worst.max(worst / scale);
        // the Laplacian sum can nearly cancel, so scale by its absolute terms
        let lap_scale: f64 = dists.iter().filter(|&&r| r < 1.0).map(|&r| 2.0 * pair_laplacian(r, &params).abs()).sum();
        lap_worst = lap_worst.max((report.laplacian_sum - fd_lap).abs() / lap_scale);
    }
    let pass = list_ok == 100 && force_worst <= 1e-4 && lap_worst <= 1e-3;
    Ok(outcome(
        pass,
        format!("neighbor lists {list_ok}/100 equal; forces rel {force_worst:.1e}; Laplacian rel {lap_worst:.1e}"),
    ))
}

/// RDF fidelity at small steps and distortion ranking at dt = 0.13.
fn criterion_7() -> Result<Outcome> {
    let spec = RdfStudySpec {
        params: standard(4.5),
        schemes: SchemeKind::ALL.to_vec(),
        stepsizes: vec![0.01, 0.13],
        reference_dt: 0.001,
        reference_time: 100.0,
        time: 100.0,
        seed: SEED,
        bin_width: 0.01,
        snapshot_interval: 0.02,
        replicas: 1,
        r_min: 0.1,
    };
    let study = rdf_study(&spec)?;
    let dev = |k: SchemeKind, dt: f64| study.curves.iter().find(|c| c.scheme == k && c.dt == dt).unwrap().deviation;
    let small_ok = SchemeKind::ALL.iter().all(|&k| dev(k, 0.01) <= 0.05);
    let ab = dev(SchemeKind::Aboba, 0.13);
    let rank_ok = ab < dev(SchemeKind::Shardlow, 0.13) && ab < dev(SchemeKind::MShardlow2, 0.13);
    let small: Vec<String> = SchemeKind::ALL.iter().map(|&k| format!("{k}={:.4}", dev(k, 0.01))).collect();
    Ok(outcome(
        small_ok && rank_ok,
        format!(
            "dt=0.01 sup-norm {}; dt=0.13 aboba={ab:.3} shardlow={:.3} mshardlow2={:.3}",
            small.join(" "),
            dev(SchemeKind::Shardlow, 0.13),
            dev(SchemeKind::MShardlow2, 0.13)
        ),
    ))
}

/// Shardlow at dt = 0.005 keeps both temperatures within 5%.
fn criterion_8() -> Result<Outcome> {
    let r = run_single(&RunSpec::new(SchemeKind::Shardlow, standard(4.5), 0.005, 100.0, SEED))?;
    let pass = r.stable && r.rel_err_tc <= 0.05 && r.rel_err_tk <= 0.05;
    Ok(outcome(pass, format!("T_c={:.4} T_k={:.4}", r.t_c, r.t_k)))
}

fn main() -> ExitCode {
    let selected: Option<Vec<u32>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |k: u32| selected.as_ref().is_none_or(|s| s.contains(&k));

    let titles = [
        "convergence orders",
        "critical stepsizes",
        "cost structure",
        "improper coefficients",
        "exactness and conservation",
        "oracle equivalences",
        "RDF structure",
        "small-step thermostat",
    ];
    let mut table1 = Vec::new();
    let mut failures = 0;
    for k in 1..=8u32 {
        if !wanted(k) {
            continue;
        }
        let start = Instant::now();
        let result = match k {
            1 => criterion_1(),
            2 => criterion_2(&mut table1),
            3 => criterion_3(&table1),
            4 => criterion_4(),
            5 => criterion_5(),
            6 => criterion_6(),
            7 => criterion_7(),
            _ => criterion_8(),
        };
        let o = result.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {k} {} {}: {} [{:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            titles[k as usize - 1],
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
