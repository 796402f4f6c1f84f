//! Cell-assisted Verlet neighbor list over the periodic box.
//!
//! The list stores every pair closer than `r_c + skin` at build time, sorted
//! ascending by `(i, j)`. As long as no particle has moved `skin / 2` or more
//! since the build, every pair currently inside `r_c` is in the list.

use crate::error::{Error, Result};
use crate::forces::PairGeometry;
use crate::model::{minimum_image, minimum_image_wrapped, DpdParams, SystemState, Vec3};

/// Default skin as a fraction of the cutoff.
pub const DEFAULT_SKIN_FRACTION: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct NeighborList {
    pairs: Vec<(usize, usize)>,
    skin: f64,
    r_c: f64,
    box_len: f64,
    anchor: Vec<Vec3>,
    scratch: Vec<(usize, usize)>,
}

impl NeighborList {
    pub fn build(state: &SystemState, params: &DpdParams, skin: f64) -> Result<Self> {
        if skin < 0.0 || !skin.is_finite() {
            return Err(Error::InvalidParams(format!("skin must be non-negative, got {skin}")));
        }
        let reach = params.r_c + skin;
        let required = 2.0 * reach;
        if params.box_len < required {
            return Err(Error::BoxTooSmall { box_len: params.box_len, required });
        }
        let mut list = NeighborList {
            pairs: Vec::new(),
            skin,
            r_c: params.r_c,
            box_len: params.box_len,
            anchor: Vec::new(),
            scratch: Vec::new(),
        };
        list.rebuild(state);
        Ok(list)
    }

    /// Rebuild in place for the current positions, reusing allocations.
    pub fn rebuild(&mut self, state: &SystemState) {
        let reach = self.r_c + self.skin;
        self.pairs.clear();
        // cells of at least reach/k, searched over a (2k+1)^3 stencil; when
        // the stencil spans most of the box a flat scan is cheaper
        let stencil_of = |k: usize| {
            let n_cells = (self.box_len * k as f64 / reach).floor() as usize;
            (n_cells >= 2 * (2 * k + 1)).then_some((k, n_cells))
        };
        match stencil_of(2).or_else(|| stencil_of(1)) {
            Some((k, n_cells)) => self.build_cells(state, reach, k, n_cells),
            None => self.build_all_pairs(state, reach),
        }
        self.anchor.clear();
        self.anchor.extend_from_slice(&state.q);
    }

    fn build_all_pairs(&mut self, state: &SystemState, reach: f64) {
        let reach2 = reach * reach;
        let l = self.box_len;
        let half = 0.5 * l;
        let n = state.len();
        let (xs, ys, zs): (Vec<f64>, Vec<f64>, Vec<f64>) = (
            state.q.iter().map(|v| v.x).collect(),
            state.q.iter().map(|v| v.y).collect(),
            state.q.iter().map(|v| v.z).collect(),
        );
        let fold = |d: f64| {
            let up = if d < -half { l } else { 0.0 };
            let down = if d >= half { l } else { 0.0 };
            d + up - down
        };
        let mut r2 = vec![0.0; n];
        for i in 0..n {
            let (xi, yi, zi) = (xs[i], ys[i], zs[i]);
            let m = n - i - 1;
            let (tx, ty, tz) = (&xs[i + 1..], &ys[i + 1..], &zs[i + 1..]);
            let tail = &mut r2[..m];
            for k in 0..m {
                let (dx, dy, dz) = (fold(xi - tx[k]), fold(yi - ty[k]), fold(zi - tz[k]));
                tail[k] = dx * dx + dy * dy + dz * dz;
            }
            for (k, &d2) in tail.iter().enumerate() {
                if d2 < reach2 {
                    self.pairs.push((i, i + 1 + k));
                }
            }
        }
    }

    fn build_cells(&mut self, state: &SystemState, reach: f64, k: usize, n_cells: usize) {
        let reach2 = reach * reach;
        let l = self.box_len;
        let q = &state.q;
        let inv_cell = n_cells as f64 / l;
        let index = |cx: usize, cy: usize, cz: usize| (cz * n_cells + cy) * n_cells + cx;
        let coord = |v: f64| ((v * inv_cell) as usize).min(n_cells - 1);

        // counting sort of particles into cells, with a cell-ordered copy of
        // the positions so the inner loop reads contiguous memory
        let total = n_cells * n_cells * n_cells;
        let mut start = vec![0usize; total + 1];
        let cells: Vec<usize> = q.iter().map(|x| index(coord(x.x), coord(x.y), coord(x.z))).collect();
        for &c in &cells {
            start[c + 1] += 1;
        }
        for c in 0..total {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut members = vec![0usize; q.len()];
        let mut sorted = vec![Vec3::zeros(); q.len()];
        for (i, &c) in cells.iter().enumerate() {
            members[fill[c]] = i;
            sorted[fill[c]] = q[i];
            fill[c] += 1;
        }

        // half stencil: the lexicographically positive offsets
        let span = k as isize;
        let mut offsets = Vec::new();
        for dz in -span..=span {
            for dy in -span..=span {
                for dx in -span..=span {
                    if (dz, dy, dx) > (0, 0, 0) {
                        offsets.push((dx, dy, dz));
                    }
                }
            }
        }

        let nc = n_cells as isize;
        let wrap_cell = |c: isize| c.rem_euclid(nc) as usize;
        let push = |pairs: &mut Vec<(usize, usize)>, a: usize, b: usize| {
            pairs.push(if a < b { (a, b) } else { (b, a) });
        };
        for cz in 0..nc {
            for cy in 0..nc {
                for cx in 0..nc {
                    let home = index(cx as usize, cy as usize, cz as usize);
                    let (h0, h1) = (start[home], start[home + 1]);
                    if h0 == h1 {
                        continue;
                    }
                    for a in h0..h1 {
                        for b in a + 1..h1 {
                            if minimum_image_wrapped(&sorted[a], &sorted[b], l).norm_squared() < reach2 {
                                push(&mut self.pairs, members[a], members[b]);
                            }
                        }
                    }
                    for &(dx, dy, dz) in &offsets {
                        let other = index(wrap_cell(cx + dx), wrap_cell(cy + dy), wrap_cell(cz + dz));
                        let (o0, o1) = (start[other], start[other + 1]);
                        for a in h0..h1 {
                            let qa = sorted[a];
                            for b in o0..o1 {
                                if minimum_image_wrapped(&qa, &sorted[b], l).norm_squared() < reach2 {
                                    push(&mut self.pairs, members[a], members[b]);
                                }
                            }
                        }
                    }
                }
            }
        }
        let n = q.len();
        sort_pairs(&mut self.pairs, &mut self.scratch, n);
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn skin(&self) -> f64 {
        self.skin
    }

    /// Largest single-particle displacement since the last build.
    pub fn max_displacement(&self, state: &SystemState) -> f64 {
        if self.anchor.len() != state.len() {
            return f64::INFINITY;
        }
        let d2 = self
            .anchor
            .iter()
            .zip(&state.q)
            .map(|(a, q)| minimum_image_wrapped(q, a, self.box_len).norm_squared())
            .fold(0.0, f64::max);
        d2.sqrt()
    }

    pub fn needs_rebuild(&self, state: &SystemState) -> bool {
        // NaN displacement also forces a rebuild
        !(self.max_displacement(state) < 0.5 * self.skin)
    }

    pub(crate) fn check_fresh(&self, state: &SystemState) -> Result<()> {
        let displacement = self.max_displacement(state);
        if displacement < 0.5 * self.skin {
            Ok(())
        } else {
            Err(Error::StaleNeighborList { displacement, limit: 0.5 * self.skin })
        }
    }

    /// Pairs currently inside the cutoff, ascending by `(i, j)`, with fresh
    /// displacements `q_i - q_j`.
    pub fn interacting_pairs(&self, state: &SystemState, params: &DpdParams) -> Result<Vec<PairGeometry>> {
        self.check_fresh(state)?;
        let rc2 = params.r_c * params.r_c;
        Ok(self
            .pairs
            .iter()
            .filter_map(|&(i, j)| {
                let r_vec = minimum_image(&(state.q[i] - state.q[j]), params.box_len);
                let r2 = r_vec.norm_squared();
                (r2 < rc2).then(|| PairGeometry { i, j, r_vec, r: r2.sqrt() })
            })
            .collect())
    }
}

/// Lexicographic order by two stable counting passes (by `j`, then by `i`).
fn sort_pairs(pairs: &mut Vec<(usize, usize)>, scratch: &mut Vec<(usize, usize)>, n: usize) {
    let mut counts = vec![0usize; n + 1];
    let mut pass = |src: &[(usize, usize)], dst: &mut Vec<(usize, usize)>, key: fn(&(usize, usize)) -> usize| {
        counts.iter_mut().for_each(|c| *c = 0);
        for p in src {
            counts[key(p) + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        dst.clear();
        dst.resize(src.len(), (0, 0));
        for p in src {
            let slot = &mut counts[key(p)];
            dst[*slot] = *p;
            *slot += 1;
        }
    };
    pass(pairs, scratch, |p| p.1);
    pass(scratch, pairs, |p| p.0);
}

/// Every `i < j` pair closer than `cutoff`, by direct O(N^2) search.
pub fn brute_force_pairs(q: &[Vec3], box_len: f64, cutoff: f64) -> Vec<(usize, usize)> {
    let n = q.len();
    let c2 = cutoff * cutoff;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if minimum_image(&(q[i] - q[j]), box_len).norm_squared() < c2 {
                out.push((i, j));
            }
        }
    }
    out
}
