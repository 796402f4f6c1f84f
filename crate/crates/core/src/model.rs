//! Parameters, particle state, periodic geometry and random streams.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forces;

pub type Vec3 = Vector3<f64>;

/// Spatial dimension used by the temperature estimators.
pub const DIM: usize = 3;

/// Physical constants of a DPD fluid in a cubic periodic box.
///
/// `sigma` is derived from `gamma` and `kbt` by the fluctuation-dissipation
/// relation `sigma^2 = 2 gamma kBT` when built through [`DpdParams::new`]. It is
/// a public field so tests can switch the noise off independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpdParams {
    /// Maximum repulsion `a` (energy / length).
    pub a: f64,
    /// Friction coefficient.
    pub gamma: f64,
    /// Noise amplitude.
    pub sigma: f64,
    /// Cutoff radius.
    pub r_c: f64,
    /// Target temperature times Boltzmann's constant.
    pub kbt: f64,
    /// Edge length of the cubic box.
    pub box_len: f64,
    /// Number of particles.
    pub n: usize,
    /// Per-particle mass.
    pub mass: f64,
    /// Number density `n / box_len^3`, reporting only.
    pub rho: f64,
}

impl DpdParams {
    pub fn new(a: f64, gamma: f64, kbt: f64, r_c: f64, box_len: f64, n: usize, mass: f64) -> Result<Self> {
        let params = DpdParams {
            a,
            gamma,
            sigma: (2.0 * gamma * kbt).sqrt(),
            r_c,
            kbt,
            box_len,
            n,
            mass,
            rho: n as f64 / box_len.powi(3),
        };
        params.validate()?;
        Ok(params)
    }

    /// Reference profile: 500 unit-mass particles in a box of edge 5 with
    /// `r_c = 1` and `kBT = 1`.
    pub fn standard(a: f64, gamma: f64) -> Result<Self> {
        Self::new(a, gamma, 1.0, 1.0, 5.0, 500, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.gamma, self.sigma, self.r_c, self.kbt, self.box_len, self.mass]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        if self.r_c <= 0.0 {
            return Err(Error::InvalidParams(format!("cutoff must be positive, got {}", self.r_c)));
        }
        if self.box_len <= 2.0 * self.r_c {
            return Err(Error::InvalidParams(format!(
                "box length {} must exceed 2 r_c = {}",
                self.box_len,
                2.0 * self.r_c
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("need at least 2 particles, got {}", self.n)));
        }
        if self.mass <= 0.0 {
            return Err(Error::InvalidParams(format!("mass must be positive, got {}", self.mass)));
        }
        if self.gamma < 0.0 || self.sigma < 0.0 || self.kbt < 0.0 || self.a < 0.0 {
            return Err(Error::InvalidParams("a, gamma, sigma and kBT must be non-negative".into()));
        }
        Ok(())
    }
}

/// Positions, momenta and cached conservative forces of all particles.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    /// Wrapped positions, every coordinate in `[0, box_len)`.
    pub q: Vec<Vec3>,
    pub p: Vec<Vec3>,
    pub mass: Vec<f64>,
    /// Conservative forces at the positions of the last evaluation.
    pub f: Vec<Vec3>,
    pub t: f64,
    pub step_count: u64,
    /// False when `f` was evaluated at positions other than the current `q`
    /// (ABOBA keeps its midpoint force).
    pub forces_current: bool,
}

impl SystemState {
    /// State with the given positions and momenta and zeroed forces marked stale.
    pub fn from_parts(q: Vec<Vec3>, p: Vec<Vec3>, mass: f64, box_len: f64) -> Self {
        assert_eq!(q.len(), p.len(), "positions and momenta must have equal length");
        let n = q.len();
        SystemState {
            q: q.into_iter().map(|x| wrap(&x, box_len)).collect(),
            p,
            mass: vec![mass; n],
            f: vec![Vec3::zeros(); n],
            t: 0.0,
            step_count: 0,
            forces_current: false,
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.p.iter().chain(self.f.iter()).chain(self.q.iter()).all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Minimum-image displacement. Each component of the result lies in `[-L/2, L/2)`.
#[inline]
pub fn minimum_image(dq: &Vec3, box_len: f64) -> Vec3 {
    dq.map(|d| minimum_image_1d(d, box_len))
}

#[inline]
pub fn minimum_image_1d(d: f64, box_len: f64) -> f64 {
    let half = 0.5 * box_len;
    let mut r = d - box_len * (d / box_len + 0.5).floor();
    if r >= half {
        r -= box_len;
    } else if r < -half {
        r += box_len;
    }
    r
}

/// Minimum image of `a - b` for coordinates already wrapped into `[0, L)`,
/// where each component difference lies in `(-L, L)`. Cheaper than
/// [`minimum_image`]; used in the force and neighbor loops.
#[inline(always)]
pub fn minimum_image_wrapped(a: &Vec3, b: &Vec3, box_len: f64) -> Vec3 {
    let half = 0.5 * box_len;
    let fold = |d: f64| {
        if d >= half {
            d - box_len
        } else if d < -half {
            d + box_len
        } else {
            d
        }
    };
    Vec3::new(fold(a.x - b.x), fold(a.y - b.y), fold(a.z - b.z))
}

/// Maps a position back into the primary box `[0, L)^3`.
#[inline]
pub fn wrap(q: &Vec3, box_len: f64) -> Vec3 {
    q.map(|x| {
        let r = x.rem_euclid(box_len);
        // rem_euclid rounds tiny negative inputs up to box_len itself
        if r >= box_len {
            0.0
        } else {
            r
        }
    })
}

/// Seeded stream of uniform and standard normal variates.
///
/// Backed by the ChaCha8 stream cipher, which is counter based: a `(seed,
/// stream)` pair fixes the sequence, and `draws` counts the variates taken
/// (one per call).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    draws: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream for replica `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, draws: 0, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        self.draws += 1;
        self.rng.sample(StandardNormal)
    }

    /// Uniform variate in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.rng.random::<f64>()
    }
}

/// Random initial condition: uniform positions, Maxwell-Boltzmann momenta with
/// the centre-of-mass momentum removed, forces cached.
pub fn init_state(params: &DpdParams, rng: &mut RngStream) -> Result<SystemState> {
    params.validate()?;
    let n = params.n;
    let l = params.box_len;
    let q: Vec<Vec3> = (0..n)
        .map(|_| {
            let x = rng.uniform() * l;
            let y = rng.uniform() * l;
            let z = rng.uniform() * l;
            Vec3::new(x, y, z)
        })
        .collect();
    let scale = (params.mass * params.kbt).sqrt();
    let mut p: Vec<Vec3> = (0..n)
        .map(|_| {
            let x = rng.gaussian();
            let y = rng.gaussian();
            let z = rng.gaussian();
            Vec3::new(x, y, z) * scale
        })
        .collect();
    let mean = p.iter().fold(Vec3::zeros(), |acc, v| acc + v) / n as f64;
    for pi in &mut p {
        *pi -= mean;
    }
    let mut state = SystemState::from_parts(q, p, params.mass, l);
    let report = forces::compute_forces_all_pairs(&state, params)?;
    state.f = report.f;
    state.forces_current = true;
    Ok(state)
}
