//! Numeric Neyman–Pearson construction of a trade-off curve from two densities.
//!
//! The real line is cut into fine cells and each cell's mass under both densities
//! is integrated with 5-point Gauss–Legendre. Rejecting cells in decreasing
//! likelihood-ratio order traces the ROC of the most powerful tests; cells with
//! equal ratio form straight segments, which is exactly the randomized test at a
//! threshold carrying point mass in the ratio distribution.

use super::{CurveTable, TradeoffCurve};
use crate::error::{AuditError, Result};
use rayon::prelude::*;

/// Table resolution used when callers have no preference.
pub const DEFAULT_GRID_SIZE: usize = 4096;

const MIN_GRID_SIZE: usize = 64;
const FINE_CELLS: usize = 1 << 19;
const MASS_TOL: f64 = 1e-6;
/// ROC vertices turning by more than this (radians) are kept exactly.
const CORNER_ANGLE: f64 = 0.01;

const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// A probability density on the real line.
pub trait Density: Sync {
    fn pdf(&self, x: f64) -> f64;

    /// Interval carrying all but a negligible amount of the mass; the density is
    /// treated as zero outside it.
    fn support(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug)]
pub struct NormalDensity {
    pub mean: f64,
    pub sd: f64,
}

impl Density for NormalDensity {
    fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd;
        crate::special::norm_pdf(z) / self.sd
    }

    fn support(&self) -> (f64, f64) {
        (self.mean - 12.0 * self.sd, self.mean + 12.0 * self.sd)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LaplaceDensity {
    pub loc: f64,
    pub scale: f64,
}

impl Density for LaplaceDensity {
    fn pdf(&self, x: f64) -> f64 {
        (-(x - self.loc).abs() / self.scale).exp() / (2.0 * self.scale)
    }

    fn support(&self) -> (f64, f64) {
        (self.loc - 40.0 * self.scale, self.loc + 40.0 * self.scale)
    }
}

/// A density given by a closure on an explicit support interval.
pub struct FnDensity<F> {
    pub f: F,
    pub lo: f64,
    pub hi: f64,
}

impl<F: Fn(f64) -> f64 + Sync> Density for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// Trade-off curve `T(P0, P1)` between the distributions with densities `d0`
/// (null) and `d1` (alternative), tabulated at `grid_size` points spaced evenly
/// along the curve's arc length. Sharp corners of the ROC are added on top.
pub fn np_curve<D0: Density, D1: Density>(d0: &D0, d1: &D1, grid_size: usize) -> Result<TradeoffCurve> {
    if grid_size < MIN_GRID_SIZE {
        return Err(AuditError::Domain {
            name: "grid_size",
            value: grid_size as f64,
            domain: "[64, inf)",
        });
    }
    let (lo0, hi0) = d0.support();
    let (lo1, hi1) = d1.support();
    let (lo, hi) = (lo0.min(lo1), hi0.max(hi1));
    let h = (hi - lo) / FINE_CELLS as f64;

    let masses: Vec<(f64, f64)> = (0..FINE_CELLS)
        .into_par_iter()
        .map(|i| {
            let c = lo + (i as f64 + 0.5) * h;
            let r = 0.5 * h;
            let (mut m0, mut m1) = (0.0, 0.0);
            for (node, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let x = c + r * node;
                m0 += w * d0.pdf(x);
                m1 += w * d1.pdf(x);
            }
            (m0 * r, m1 * r)
        })
        .collect();

    let total0: f64 = masses.iter().map(|m| m.0).sum();
    let total1: f64 = masses.iter().map(|m| m.1).sum();
    for total in [total0, total1] {
        if !total.is_finite() || (total - 1.0).abs() > MASS_TOL {
            return Err(AuditError::NotNormalized { mass: total });
        }
    }

    let mut order: Vec<usize> = (0..FINE_CELLS)
        .filter(|&i| masses[i].0 > 0.0 || masses[i].1 > 0.0)
        .collect();
    // Decreasing likelihood ratio, keyed by ln m1 - ln m0 so that cells with
    // m0 = 0 get +inf and the order stays total.
    let key: Vec<f64> = masses.iter().map(|&(m0, m1)| m1.ln() - m0.ln()).collect();
    order.sort_by(|&a, &b| key[b].total_cmp(&key[a]));

    let mut alpha = Vec::with_capacity(order.len() + 1);
    let mut beta = Vec::with_capacity(order.len() + 1);
    let (mut acc0, mut acc1) = (0.0f64, 0.0f64);
    alpha.push(0.0);
    beta.push(1.0);
    for &i in &order {
        acc0 += masses[i].0 / total0;
        acc1 += masses[i].1 / total1;
        alpha.push(acc0.min(1.0));
        beta.push((1.0 - acc1).max(0.0));
    }
    *alpha.last_mut().unwrap() = 1.0;
    *beta.last_mut().unwrap() = 0.0;

    let (alpha, beta) = resample_by_arclength(&alpha, &beta, grid_size);
    let table = CurveTable::new(alpha, beta)?;
    Ok(TradeoffCurve::Numeric { table })
}

fn resample_by_arclength(alpha: &[f64], beta: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut s = Vec::with_capacity(alpha.len());
    s.push(0.0);
    for i in 1..alpha.len() {
        let d = (alpha[i] - alpha[i - 1]).hypot(beta[i] - beta[i - 1]);
        s.push(s[i - 1] + d);
    }
    let total = *s.last().unwrap();

    let mut targets: Vec<f64> = (0..points).map(|j| total * j as f64 / (points - 1) as f64).collect();
    let mut prev_dir: Option<f64> = None;
    for i in 1..alpha.len() {
        let (da, db) = (alpha[i] - alpha[i - 1], beta[i] - beta[i - 1]);
        if da == 0.0 && db == 0.0 {
            continue;
        }
        let dir = db.atan2(da);
        if prev_dir.is_some_and(|p| (dir - p).abs() > CORNER_ANGLE) {
            targets.push(s[i - 1]);
        }
        prev_dir = Some(dir);
    }
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut out_a = Vec::with_capacity(targets.len());
    let mut out_b = Vec::with_capacity(targets.len());
    let mut seg = 1;
    for &target in &targets {
        while seg < s.len() - 1 && s[seg] < target {
            seg += 1;
        }
        let span = s[seg] - s[seg - 1];
        let t = if span > 0.0 { ((target - s[seg - 1]) / span).clamp(0.0, 1.0) } else { 1.0 };
        let a = alpha[seg - 1] + t * (alpha[seg] - alpha[seg - 1]);
        let b = beta[seg - 1] + t * (beta[seg] - beta[seg - 1]);
        if out_a.last().is_some_and(|&prev| a <= prev) {
            // Vertical stretch of the curve: keep the lowest β seen at this α.
            *out_b.last_mut().unwrap() = b;
            continue;
        }
        out_a.push(a);
        out_b.push(b);
    }
    *out_a.first_mut().unwrap() = 0.0;
    if *out_a.last().unwrap() < 1.0 {
        out_a.push(1.0);
        out_b.push(0.0);
    } else {
        *out_b.last_mut().unwrap() = 0.0;
    }
    (out_a, out_b)
}
