//! Soft conservative pair interaction and the weight functions of the
//! dissipative and random forces.

use crate::error::{Error, Result};
use crate::model::{minimum_image, minimum_image_wrapped, DpdParams, SystemState, Vec3};
use crate::neighbors::NeighborList;

/// Random-force weight `1 - r/r_c` inside the cutoff, zero outside.
#[inline]
pub fn weight_r(r: f64, r_c: f64) -> f64 {
    if r < r_c {
        1.0 - r / r_c
    } else {
        0.0
    }
}

/// Dissipative weight, the square of [`weight_r`].
#[inline]
pub fn weight_d(r: f64, r_c: f64) -> f64 {
    let w = weight_r(r, r_c);
    w * w
}

/// Conservative force on particle `i` from `j`, where `r_vec = q_i - q_j`
/// (minimum image).
pub fn pair_force(r_vec: &Vec3, params: &DpdParams) -> Result<Vec3> {
    let r = r_vec.norm();
    if r == 0.0 {
        return Err(Error::DegeneratePair { i: 0, j: 1 });
    }
    if r >= params.r_c {
        return Ok(Vec3::zeros());
    }
    Ok(r_vec * (params.a * (1.0 - r / params.r_c) / r))
}

/// Pair potential `(a r_c / 2)(1 - r/r_c)^2`.
#[inline]
pub fn pair_potential(r: f64, params: &DpdParams) -> f64 {
    if r < params.r_c {
        let w = 1.0 - r / params.r_c;
        0.5 * params.a * params.r_c * w * w
    } else {
        0.0
    }
}

/// Laplacian of the pair potential with respect to one member's position,
/// `phi'' + 2 phi' / r` in three dimensions. Requires `r > 0`.
#[inline]
pub fn pair_laplacian(r: f64, params: &DpdParams) -> f64 {
    if r < params.r_c {
        params.a / params.r_c - 2.0 * params.a * (1.0 - r / params.r_c) / r
    } else {
        0.0
    }
}

/// Geometry of one interacting pair, `r_vec = q_i - q_j` by minimum image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub i: usize,
    pub j: usize,
    pub r_vec: Vec3,
    pub r: f64,
}

/// Scalar by-products of a force evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForceTotals {
    pub potential: f64,
    /// `sum_i |grad_i U|^2`
    pub grad_sq_sum: f64,
    /// `sum_i laplacian_i U`
    pub laplacian_sum: f64,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceReport {
    pub f: Vec<Vec3>,
    pub potential: f64,
    pub grad_sq_sum: f64,
    pub laplacian_sum: f64,
    pub pair_count: usize,
}

impl ForceReport {
    pub fn totals(&self) -> ForceTotals {
        ForceTotals {
            potential: self.potential,
            grad_sq_sum: self.grad_sq_sum,
            laplacian_sum: self.laplacian_sum,
            pair_count: self.pair_count,
        }
    }
}

/// Accumulates conservative forces over candidate pairs into `f`, in the
/// order the candidates are given. Pairs inside the cutoff are appended to
/// `pairs_out` (cleared first).
pub fn accumulate_forces<I>(
    q: &[Vec3],
    params: &DpdParams,
    candidates: I,
    f: &mut [Vec3],
    pairs_out: &mut Vec<PairGeometry>,
) -> Result<ForceTotals>
where
    I: IntoIterator<Item = (usize, usize)>,
{
    let l = params.box_len;
    let rc = params.r_c;
    let rc2 = rc * rc;
    let a = params.a;
    let curvature = a / rc;
    f.iter_mut().for_each(|x| *x = Vec3::zeros());
    pairs_out.clear();

    let mut potential = 0.0;
    let mut laplacian = 0.0;
    for (i, j) in candidates {
        let r_vec = minimum_image_wrapped(&q[i], &q[j], l);
        let r2 = r_vec.norm_squared();
        if r2 >= rc2 {
            continue;
        }
        if r2 == 0.0 {
            return Err(Error::DegeneratePair { i, j });
        }
        let r = r2.sqrt();
        let w = 1.0 - r / rc;
        let fij = r_vec * (a * w / r);
        f[i] += fij;
        f[j] -= fij;
        potential += 0.5 * a * rc * w * w;
        // both members receive phi'' + 2 phi'/r
        laplacian += 2.0 * (curvature - 2.0 * a * w / r);
        pairs_out.push(PairGeometry { i, j, r_vec, r });
    }
    let grad_sq_sum = f.iter().map(|v| v.norm_squared()).sum();
    Ok(ForceTotals { potential, grad_sq_sum, laplacian_sum: laplacian, pair_count: pairs_out.len() })
}

/// Conservative forces, potential energy and the configurational-temperature
/// sums using a neighbor list that must still be valid for `state`.
pub fn compute_forces(state: &SystemState, params: &DpdParams, neighbors: &NeighborList) -> Result<ForceReport> {
    neighbors.check_fresh(state)?;
    let mut f = vec![Vec3::zeros(); state.len()];
    let mut pairs = Vec::new();
    let totals = accumulate_forces(&state.q, params, neighbors.pairs().iter().copied(), &mut f, &mut pairs)?;
    Ok(report(f, totals))
}

/// O(N^2) evaluation over every `i < j`; reference path and bootstrap.
pub fn compute_forces_all_pairs(state: &SystemState, params: &DpdParams) -> Result<ForceReport> {
    let n = state.len();
    let mut f = vec![Vec3::zeros(); n];
    let mut pairs = Vec::new();
    let candidates = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
    let totals = accumulate_forces(&state.q, params, candidates, &mut f, &mut pairs)?;
    Ok(report(f, totals))
}

fn report(f: Vec<Vec3>, t: ForceTotals) -> ForceReport {
    ForceReport {
        f,
        potential: t.potential,
        grad_sq_sum: t.grad_sq_sum,
        laplacian_sum: t.laplacian_sum,
        pair_count: t.pair_count,
    }
}

/// Total potential energy by direct summation, used by finite-difference checks.
pub fn potential_energy(q: &[Vec3], params: &DpdParams) -> f64 {
    let n = q.len();
    let mut u = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = minimum_image(&(q[i] - q[j]), params.box_len).norm();
            u += pair_potential(r, params);
        }
    }
    u
}
