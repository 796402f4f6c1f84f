//! Splitting integrators for DPD.
//!
//! The equations of motion split into a drift `A`, a conservative kick `B` and
//! a pairwise fluctuation-dissipation part `O`. The schemes here differ in how
//! they integrate `A + B` and how they sweep `O` over interacting pairs:
//!
//! | scheme      | Hamiltonian part                  | pair sweep | force evals |
//! |-------------|-----------------------------------|------------|-------------|
//! | Shardlow    | velocity Verlet                   | BBK        | 1           |
//! | ABOBA       | A/2 B/2 . B/2 A/2 around the sweep| exact OU   | 1           |
//! | M-Shardlow-1| Verlet composed with `x1 x0 x1`   | BBK        | 3           |
//! | M-Shardlow-2| same, fourth-order coefficients   | BBK        | 3           |
//!
//! Pair sweeps are sequential in ascending `(i, j)` order; each pair sees the
//! momenta left by the pairs before it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forces::{accumulate_forces, weight_r, ForceTotals, PairGeometry};
use crate::model::{wrap, DpdParams, RngStream, SystemState};
use crate::neighbors::{NeighborList, DEFAULT_SKIN_FRACTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SchemeKind {
    Shardlow,
    Aboba,
    MShardlow1,
    MShardlow2,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [SchemeKind::Shardlow, SchemeKind::Aboba, SchemeKind::MShardlow1, SchemeKind::MShardlow2];

    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Shardlow => "shardlow",
            SchemeKind::Aboba => "aboba",
            SchemeKind::MShardlow1 => "mshardlow1",
            SchemeKind::MShardlow2 => "mshardlow2",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "shardlow" | "s1" => Ok(SchemeKind::Shardlow),
            "aboba" => Ok(SchemeKind::Aboba),
            "mshardlow1" | "ms1" => Ok(SchemeKind::MShardlow1),
            "mshardlow2" | "ms2" => Ok(SchemeKind::MShardlow2),
            _ => Err(Error::Config(format!("unknown scheme '{s}'"))),
        }
    }
}

impl From<SchemeKind> for String {
    fn from(k: SchemeKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for SchemeKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Triple-composition coefficients `(x0, x1)` satisfying `x0 + 2 x1 = 1` and
/// `x0^3 + 2 x1^3 = 0`.
pub fn yoshida_coefficients() -> (f64, f64) {
    let cbrt2 = 2f64.cbrt();
    let x1 = 1.0 / (2.0 - cbrt2);
    (-cbrt2 * x1, x1)
}

/// The sign-flipped coefficients of M-Shardlow-1: `x0 = +2^(1/3) / (2 - 2^(1/3))`.
/// They violate both order conditions.
pub fn improper_yoshida_coefficients() -> (f64, f64) {
    let (x0, x1) = yoshida_coefficients();
    (-x0, x1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    /// Middle composition weight; zero for single-stage schemes.
    pub x0: f64,
    /// Outer composition weight; zero for single-stage schemes.
    pub x1: f64,
    pub force_evals_per_step: u32,
}

impl SchemeSpec {
    pub fn new(kind: SchemeKind) -> Self {
        let ((x0, x1), evals) = match kind {
            SchemeKind::Shardlow | SchemeKind::Aboba => ((0.0, 0.0), 1),
            SchemeKind::MShardlow1 => (improper_yoshida_coefficients(), 3),
            SchemeKind::MShardlow2 => (yoshida_coefficients(), 3),
        };
        SchemeSpec { kind, x0, x1, force_evals_per_step: evals }
    }
}

impl From<SchemeKind> for SchemeSpec {
    fn from(kind: SchemeKind) -> Self {
        SchemeSpec::new(kind)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCounters {
    pub force_evaluations: u64,
    pub pair_sweeps: u64,
    pub gaussian_draws: u64,
    pub steps: u64,
}

/// Source of conservative forces for the Hamiltonian sub-steps.
pub trait ForceField {
    /// Writes the forces at the current positions into `state.f`.
    fn evaluate(&mut self, state: &mut SystemState) -> Result<()>;

    /// Pairs inside the cutoff at the last evaluated positions.
    fn interacting_pairs(&self) -> &[PairGeometry];

    fn box_len(&self) -> f64;

    /// Number of calls to [`ForceField::evaluate`] so far.
    fn evaluations(&self) -> u64;
}

/// DPD conservative field backed by a Verlet list that is rebuilt whenever
/// the skin criterion trips.
#[derive(Debug, Clone)]
pub struct DpdForceField {
    params: DpdParams,
    neighbors: NeighborList,
    pairs: Vec<PairGeometry>,
    totals: ForceTotals,
    evaluations: u64,
    rebuilds: u64,
}

impl DpdForceField {
    pub fn new(state: &SystemState, params: &DpdParams, skin: f64) -> Result<Self> {
        let neighbors = NeighborList::build(state, params, skin)?;
        Ok(DpdForceField {
            params: *params,
            neighbors,
            pairs: Vec::with_capacity(8 * state.len()),
            totals: ForceTotals::default(),
            evaluations: 0,
            rebuilds: 0,
        })
    }

    pub fn with_default_skin(state: &SystemState, params: &DpdParams) -> Result<Self> {
        Self::new(state, params, DEFAULT_SKIN_FRACTION * params.r_c)
    }

    /// Potential, gradient and Laplacian sums of the last evaluation.
    pub fn totals(&self) -> ForceTotals {
        self.totals
    }

    pub fn neighbors(&self) -> &NeighborList {
        &self.neighbors
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }
}

impl ForceField for DpdForceField {
    fn evaluate(&mut self, state: &mut SystemState) -> Result<()> {
        if self.neighbors.needs_rebuild(state) {
            self.neighbors.rebuild(state);
            self.rebuilds += 1;
        }
        self.evaluations += 1;
        self.totals = accumulate_forces(
            &state.q,
            &self.params,
            self.neighbors.pairs().iter().copied(),
            &mut state.f,
            &mut self.pairs,
        )?;
        state.forces_current = true;
        Ok(())
    }

    fn interacting_pairs(&self) -> &[PairGeometry] {
        &self.pairs
    }

    fn box_len(&self) -> f64 {
        self.params.box_len
    }

    fn evaluations(&self) -> u64 {
        self.evaluations
    }
}

#[inline]
fn kick(state: &mut SystemState, h: f64) {
    for (p, f) in state.p.iter_mut().zip(&state.f) {
        *p += f * h;
    }
}

#[inline]
fn drift(state: &mut SystemState, h: f64, box_len: f64) {
    for ((q, p), m) in state.q.iter_mut().zip(&state.p).zip(&state.mass) {
        *q = wrap(&(*q + p * (h / m)), box_len);
    }
    state.forces_current = false;
}

/// One velocity Verlet step of length `h`: half kick, drift, new forces,
/// half kick. Forces left in `state.f` belong to the new positions.
pub fn verlet_substep<F: ForceField + ?Sized>(state: &mut SystemState, field: &mut F, h: f64) -> Result<()> {
    if !state.forces_current {
        field.evaluate(state)?;
    }
    kick(state, 0.5 * h);
    drift(state, h, field.box_len());
    field.evaluate(state)?;
    kick(state, 0.5 * h);
    Ok(())
}

/// Symmetric composition of three Verlet steps with lengths `x1 h`, `x0 h`,
/// `x1 h`. Three force evaluations; the last one carries over to the next call.
pub fn yoshida4_substep<F: ForceField + ?Sized>(
    state: &mut SystemState,
    field: &mut F,
    h: f64,
    x0: f64,
    x1: f64,
) -> Result<()> {
    verlet_substep(state, field, x1 * h)?;
    verlet_substep(state, field, x0 * h)?;
    verlet_substep(state, field, x1 * h)
}

/// Shardlow's sequential BBK sweep over `pairs`.
///
/// Each pair uses one fresh Gaussian `R`, shared by the explicit and the
/// implicit half-updates:
///
/// ```text
/// K = gamma w_D h / 2,  J = sigma w_R sqrt(h) R / 2 e
/// explicit:  p_i -= K (e.v) e - J,         p_j += K (e.v) e - J
/// implicit:  p_i += J - K/(1+2K) [(e.v') e + 2J],  p_j the opposite
/// ```
pub fn bbk_pair_sweep(state: &mut SystemState, params: &DpdParams, h: f64, pairs: &[PairGeometry], rng: &mut RngStream) {
    let sqrt_h = h.sqrt();
    for g in pairs {
        let (i, j) = (g.i, g.j);
        let e = g.r_vec / g.r;
        let wr = weight_r(g.r, params.r_c);
        let k = 0.5 * params.gamma * wr * wr * h;
        let jmag = 0.5 * params.sigma * wr * sqrt_h * rng.gaussian();
        let (mi, mj) = (state.mass[i], state.mass[j]);

        let v = e.dot(&(state.p[i] / mi - state.p[j] / mj));
        let du = (jmag - k * v) * e;
        state.p[i] += du;
        state.p[j] -= du;

        let v = e.dot(&(state.p[i] / mi - state.p[j] / mj));
        let du = (jmag - k / (1.0 + 2.0 * k) * (v + 2.0 * jmag)) * e;
        state.p[i] += du;
        state.p[j] -= du;
    }
}

/// Below this value of `tau h` the noise variance factor
/// `(1 - exp(-2 tau h)) / (2 tau)` is replaced by its limit `h`.
pub const OU_SMALL_DECAY: f64 = 1e-12;

/// Sequential sweep solving each pair's projected Ornstein-Uhlenbeck process
/// exactly over time `h`.
pub fn exact_ou_pair_sweep(
    state: &mut SystemState,
    params: &DpdParams,
    h: f64,
    pairs: &[PairGeometry],
    rng: &mut RngStream,
) {
    for g in pairs {
        let (i, j) = (g.i, g.j);
        let e = g.r_vec / g.r;
        let wr = weight_r(g.r, params.r_c);
        let (mi, mj) = (state.mass[i], state.mass[j]);
        let mij = mi * mj / (mi + mj);
        let tau = params.gamma * wr * wr / mij;
        let th = tau * h;
        let r = rng.gaussian();

        // decay - 1, computed without cancellation
        let decay_m1 = (-th).exp_m1();
        let variance = if th < OU_SMALL_DECAY {
            h
        } else {
            // 1 - decay^2 = -(decay - 1)(decay + 1)
            -decay_m1 * (2.0 + decay_m1) / (2.0 * tau)
        };
        let v = e.dot(&(state.p[i] / mi - state.p[j] / mj));
        let dv = v * decay_m1 + params.sigma * wr / mij * variance.sqrt() * r;
        let dp = (mij * dv) * e;
        state.p[i] += dp;
        state.p[j] -= dp;
    }
}

/// Drives one [`SchemeSpec`] over a force field and keeps the step counters.
#[derive(Debug, Clone)]
pub struct Integrator<F = DpdForceField> {
    pub spec: SchemeSpec,
    pub params: DpdParams,
    pub field: F,
    pub counters: StepCounters,
}

impl Integrator<DpdForceField> {
    /// DPD integrator with the default neighbor-list skin.
    pub fn dpd(spec: impl Into<SchemeSpec>, state: &SystemState, params: &DpdParams) -> Result<Self> {
        let field = DpdForceField::with_default_skin(state, params)?;
        Ok(Integrator::new(spec.into(), *params, field))
    }
}

impl<F: ForceField> Integrator<F> {
    pub fn new(spec: SchemeSpec, params: DpdParams, field: F) -> Self {
        Integrator { spec, params, field, counters: StepCounters::default() }
    }

    /// Advances `state` by one step of length `h`.
    pub fn step(&mut self, state: &mut SystemState, h: f64, rng: &mut RngStream) -> Result<()> {
        let evals_before = self.field.evaluations();
        let draws_before = rng.draws();
        match self.spec.kind {
            SchemeKind::Shardlow => {
                verlet_substep(state, &mut self.field, h)?;
                bbk_pair_sweep(state, &self.params, h, self.field.interacting_pairs(), rng);
            }
            SchemeKind::MShardlow1 | SchemeKind::MShardlow2 => {
                yoshida4_substep(state, &mut self.field, h, self.spec.x0, self.spec.x1)?;
                bbk_pair_sweep(state, &self.params, h, self.field.interacting_pairs(), rng);
            }
            SchemeKind::Aboba => {
                let l = self.field.box_len();
                drift(state, 0.5 * h, l);
                self.field.evaluate(state)?;
                kick(state, 0.5 * h);
                exact_ou_pair_sweep(state, &self.params, h, self.field.interacting_pairs(), rng);
                kick(state, 0.5 * h);
                drift(state, 0.5 * h, l);
                // state.f now holds the midpoint force
                state.forces_current = false;
            }
        }
        self.counters.pair_sweeps += 1;
        self.counters.force_evaluations += self.field.evaluations() - evals_before;
        self.counters.gaussian_draws += rng.draws() - draws_before;
        self.counters.steps += 1;
        state.t += h;
        state.step_count += 1;
        Ok(())
    }
}
