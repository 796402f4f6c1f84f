//! Temperature estimators, radial distribution function and momentum.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forces::ForceTotals;
use crate::model::{SystemState, Vec3, DIM};

/// Kinetic temperature `sum_i p_i.p_i / m_i / (d (N - 1))`.
pub fn kinetic_temperature(state: &SystemState) -> f64 {
    let n = state.len();
    assert!(n >= 2, "kinetic temperature needs at least two particles");
    let twice_kinetic: f64 = state.p.iter().zip(&state.mass).map(|(p, m)| p.norm_squared() / m).sum();
    twice_kinetic / (DIM * (n - 1)) as f64
}

pub fn total_momentum(state: &SystemState) -> Vec3 {
    state.p.iter().fold(Vec3::zeros(), |acc, p| acc + p)
}

/// Running averages for the temperature estimators.
///
/// The configurational temperature is the ratio of the averaged gradient
/// and Laplacian sums, not the average of per-sample ratios.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ObservableSeries {
    pub samples: u64,
    pub sum_kinetic: f64,
    pub sum_grad_sq: f64,
    pub sum_laplacian: f64,
}

impl ObservableSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, kinetic_temperature: f64, totals: &ForceTotals) {
        self.samples += 1;
        self.sum_kinetic += kinetic_temperature;
        self.sum_grad_sq += totals.grad_sq_sum;
        self.sum_laplacian += totals.laplacian_sum;
    }

    pub fn merge(&mut self, other: &ObservableSeries) {
        self.samples += other.samples;
        self.sum_kinetic += other.sum_kinetic;
        self.sum_grad_sq += other.sum_grad_sq;
        self.sum_laplacian += other.sum_laplacian;
    }

    pub fn configurational_temperature(&self) -> Result<f64> {
        if self.samples == 0 {
            return Err(Error::UndefinedEstimate("no samples recorded".into()));
        }
        if self.sum_laplacian == 0.0 {
            return Err(Error::UndefinedEstimate("Laplacian sum is zero (no interacting pairs)".into()));
        }
        Ok(self.sum_grad_sq / self.sum_laplacian)
    }

    pub fn kinetic_temperature(&self) -> Result<f64> {
        if self.samples == 0 {
            return Err(Error::UndefinedEstimate("no samples recorded".into()));
        }
        Ok(self.sum_kinetic / self.samples as f64)
    }
}

/// One row of a finalized g(r) table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdfPoint {
    pub r_center: f64,
    pub g: f64,
}

/// Pair-distance histogram over snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct RdfHistogram {
    bin_width: f64,
    max_radius: f64,
    counts: Vec<u64>,
    samples: u64,
    n: usize,
    box_len: f64,
}

impl RdfHistogram {
    pub fn new(bin_width: f64, max_radius: f64, n: usize, box_len: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidParams(format!("bin width must be positive, got {bin_width}")));
        }
        if !(max_radius > 0.0) || max_radius > 0.5 * box_len + 1e-12 {
            return Err(Error::InvalidParams(format!("max radius {max_radius} must lie in (0, L/2]")));
        }
        let bins = (max_radius / bin_width + 1e-9).floor() as usize;
        Ok(RdfHistogram { bin_width, max_radius: bins as f64 * bin_width, counts: vec![0; bins], samples: 0, n, box_len })
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Bins every `i < j` minimum-image distance below the max radius once.
    /// Positions must lie in the primary box, as they do in a [`SystemState`].
    pub fn accumulate(&mut self, state: &SystemState) {
        debug_assert_eq!(state.len(), self.n);
        let l = self.box_len;
        let half = 0.5 * l;
        let rmax2 = self.max_radius * self.max_radius;
        let inv_w = 1.0 / self.bin_width;
        let bins = self.counts.len();
        let n = state.len();
        let xs: Vec<f64> = state.q.iter().map(|v| v.x).collect();
        let ys: Vec<f64> = state.q.iter().map(|v| v.y).collect();
        let zs: Vec<f64> = state.q.iter().map(|v| v.z).collect();
        let fold = |d: f64| {
            let up = if d < -half { l } else { 0.0 };
            let down = if d >= half { l } else { 0.0 };
            d + up - down
        };
        let mut r2 = vec![0.0; n];
        for i in 0..n {
            let m = n - i - 1;
            let (tx, ty, tz) = (&xs[i + 1..], &ys[i + 1..], &zs[i + 1..]);
            let tail = &mut r2[..m];
            for k in 0..m {
                let (dx, dy, dz) = (fold(xs[i] - tx[k]), fold(ys[i] - ty[k]), fold(zs[i] - tz[k]));
                tail[k] = dx * dx + dy * dy + dz * dz;
            }
            for &d2 in tail.iter() {
                if d2 < rmax2 {
                    let k = (d2.sqrt() * inv_w) as usize;
                    if k < bins {
                        self.counts[k] += 1;
                    }
                }
            }
        }
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &RdfHistogram) -> Result<()> {
        if self.counts.len() != other.counts.len() || self.bin_width != other.bin_width || self.n != other.n || self.box_len != other.box_len {
            return Err(Error::InvalidParams("cannot merge histograms with different layouts".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.samples += other.samples;
        Ok(())
    }

    /// Normalizes so that an ideal gas gives `g = 1`; bin centers as radii.
    pub fn finalize(&self) -> Vec<RdfPoint> {
        let n = self.n as f64;
        let pairs = 0.5 * n * (n - 1.0);
        let volume = self.box_len.powi(3);
        let dr = self.bin_width;
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let r = (k as f64 + 0.5) * dr;
                let expected = pairs * 4.0 * std::f64::consts::PI * r * r * dr / volume * self.samples as f64;
                let g = if expected > 0.0 { c as f64 / expected } else { 0.0 };
                RdfPoint { r_center: r, g }
            })
            .collect()
    }
}

/// Largest |g_a - g_b| over bins with `r_center > r_min`. Tables must share
/// their binning.
pub fn rdf_sup_deviation(a: &[RdfPoint], b: &[RdfPoint], r_min: f64) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, _)| x.r_center > r_min)
        .map(|(x, y)| (x.g - y.g).abs())
        .fold(0.0, f64::max)
}

/// Writes a `r_center,g` table.
pub fn write_rdf_csv(path: &Path, points: &[RdfPoint]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "r_center,g")?;
    for p in points {
        writeln!(w, "{},{}", p.r_center, p.g)?;
    }
    Ok(())
}
