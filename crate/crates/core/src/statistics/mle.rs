//! Maximum-likelihood populations for a fixed detection model.
//!
//! The log-likelihood `sum_i m_i ln(p . w_i)` is concave in `(p0, p1)`, so a stationary
//! point inside the simplex is the global maximum. When Newton's iteration does not find
//! one there, the maximum lies on an edge and each edge is a one-dimensional concave
//! problem solved exactly. Boundary solutions (`p1 = 0` and similar) are allowed.

use serde::{Deserialize, Serialize};

use super::mixture::{ln_poisson, CountHistogram, MixtureModel};
use crate::error::{Error, Result};

/// Per-shot gradient norm below which the interior iteration has converged.
pub const GRADIENT_TOL: f64 = 1e-10;

/// Log-mass below which a count is treated as impossible under a subspace.
const LN_UNDERFLOW: f64 = -708.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub log_likelihood: f64,
    /// True when the maximum sits on the simplex boundary.
    pub on_boundary: bool,
}

impl PopulationEstimate {
    pub fn as_array(&self) -> [f64; 3] {
        [self.p0, self.p1, self.p2]
    }
}

/// Poisson masses of each distinct count, rescaled so the largest of the three is 1.
#[derive(Debug, Clone)]
pub(crate) struct LikelihoodTable {
    /// `ln` of the rescaling factor per row.
    ln_scale: Vec<f64>,
    /// `[w0, w1, w2]` per row.
    w: Vec<[f64; 3]>,
}

impl LikelihoodTable {
    pub(crate) fn new(counts: impl Iterator<Item = u64>, model: &MixtureModel) -> Result<Self> {
        model.validate()?;
        let means = model.means();
        let mut ln_scale = Vec::new();
        let mut w = Vec::new();
        for n in counts {
            let l = means.map(|k| ln_poisson(n, k));
            let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(top > LN_UNDERFLOW) {
                return Err(Error::Fit(format!("count {n} has vanishing likelihood under every subspace")));
            }
            ln_scale.push(top);
            w.push(l.map(|x| (x - top).exp()));
        }
        Ok(Self { ln_scale, w })
    }

    fn value(&self, mult: &[u64], p: [f64; 2]) -> f64 {
        let mut f = 0.0;
        for ((w, ls), &m) in self.w.iter().zip(&self.ln_scale).zip(mult) {
            if m == 0 {
                continue;
            }
            let s = w[2] + p[0] * (w[0] - w[2]) + p[1] * (w[1] - w[2]);
            if !(s > 0.0) {
                return f64::NEG_INFINITY;
            }
            f += m as f64 * (ls + s.ln());
        }
        f
    }

    /// Gradient and Hessian in `(p0, p1)`; `None` outside the likelihood's domain.
    fn derivatives(&self, mult: &[u64], p: [f64; 2]) -> Option<([f64; 2], [f64; 3])> {
        let mut g = [0.0; 2];
        let mut h = [0.0; 3];
        for (w, &m) in self.w.iter().zip(mult) {
            if m == 0 {
                continue;
            }
            let d = [w[0] - w[2], w[1] - w[2]];
            let s = w[2] + p[0] * d[0] + p[1] * d[1];
            if !(s > 0.0) {
                return None;
            }
            let m = m as f64;
            let (a, b) = (d[0] / s, d[1] / s);
            g[0] += m * a;
            g[1] += m * b;
            h[0] -= m * a * a;
            h[1] -= m * a * b;
            h[2] -= m * b * b;
        }
        Some((g, h))
    }

    fn interior(&self, mult: &[u64], shots: f64, start: [f64; 2]) -> Option<[f64; 2]> {
        let mut x = start;
        let mut fx = self.value(mult, x);
        if !fx.is_finite() {
            return None;
        }
        for _ in 0..100 {
            let (g, h) = self.derivatives(mult, x)?;
            if g[0].hypot(g[1]) / shots < GRADIENT_TOL {
                return Some(x);
            }
            let det = h[0] * h[2] - h[1] * h[1];
            if !(h[0] < 0.0 && det > 0.0) {
                return None;
            }
            let step = [(-h[2] * g[0] + h[1] * g[1]) / det, (h[1] * g[0] - h[0] * g[1]) / det];
            let mut lambda = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let y = [x[0] + lambda * step[0], x[1] + lambda * step[1]];
                let fy = self.value(mult, y);
                if fy.is_finite() && fy >= fx - 1e-12 * fx.abs() {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !moved {
                return None;
            }
        }
        None
    }

    /// Maximum along the edge from vertex `a` to vertex `b` (vertex `j` puts all weight on
    /// subspace `j`), as `(s, value)` with the point `(1 - s) e_a + s e_b`.
    fn edge(&self, mult: &[u64], shots: f64, a: usize, b: usize) -> Option<(f64, f64)> {
        let slope = |s: f64| -> (f64, f64) {
            let (mut g, mut h) = (0.0, 0.0);
            for (w, &m) in self.w.iter().zip(mult) {
                if m == 0 {
                    continue;
                }
                let c = w[b] - w[a];
                let v = w[a] + s * c;
                let m = m as f64;
                g += m * c / v;
                h -= m * c * c / (v * v);
            }
            (g, h)
        };
        if self.w.iter().zip(mult).any(|(w, &m)| m > 0 && w[a] == 0.0 && w[b] == 0.0) {
            return None;
        }
        let s = if slope(0.0).0 <= 0.0 {
            0.0
        } else if slope(1.0).0 >= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let mut s = 0.5;
            for _ in 0..200 {
                let (g, h) = slope(s);
                if g.abs() / shots < GRADIENT_TOL * 1e-2 || hi - lo < 1e-16 {
                    break;
                }
                if g > 0.0 {
                    lo = s;
                } else {
                    hi = s;
                }
                let newton = s - g / h;
                s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            }
            s
        };
        let mut p = [0.0; 3];
        p[a] += 1.0 - s;
        p[b] += s;
        Some((s, self.value(mult, [p[0], p[1]])))
    }

    /// Maximizer over the simplex for the given multiplicities.
    pub(crate) fn fit(&self, mult: &[u64], start: Option<[f64; 2]>) -> Result<PopulationEstimate> {
        let shots: u64 = mult.iter().sum();
        if shots == 0 {
            return Err(Error::Fit("histogram is empty".into()));
        }
        let shots = shots as f64;
        let start = start
            .filter(|s| s[0] > 1e-6 && s[1] > 1e-6 && s[0] + s[1] < 1.0 - 1e-6)
            .unwrap_or([1.0 / 3.0, 1.0 / 3.0]);
        if let Some(x) = self.interior(mult, shots, start) {
            if x[0] >= 0.0 && x[1] >= 0.0 && x[0] + x[1] <= 1.0 {
                return Ok(estimate([x[0], x[1], 1.0 - x[0] - x[1]], self.value(mult, x), false));
            }
        }
        let mut best: Option<([f64; 3], f64)> = None;
        for (a, b) in [(0usize, 1usize), (1, 2), (2, 0)] {
            if let Some((s, v)) = self.edge(mult, shots, a, b) {
                if best.is_none_or(|(_, bv)| v > bv) {
                    let mut p = [0.0; 3];
                    p[a] += 1.0 - s;
                    p[b] += s;
                    best = Some((p, v));
                }
            }
        }
        match best {
            Some((p, v)) if v.is_finite() => Ok(estimate(p, v, true)),
            _ => Err(Error::Fit("likelihood vanishes everywhere on the simplex".into())),
        }
    }
}

fn estimate(p: [f64; 3], log_likelihood: f64, on_boundary: bool) -> PopulationEstimate {
    let c = p.map(|x| x.max(0.0));
    let s: f64 = c.iter().sum();
    PopulationEstimate {
        p0: c[0] / s,
        p1: c[1] / s,
        p2: c[2] / s,
        log_likelihood,
        on_boundary,
    }
}

/// `sum_i ln PMF(n_i; p0, p1)` over the histogram.
pub fn log_likelihood(hist: &CountHistogram, p: [f64; 3], model: &MixtureModel) -> Result<f64> {
    super::mixture::check_simplex(p)?;
    let table = LikelihoodTable::new(hist.bins().iter().map(|b| b.0), model)?;
    let mult: Vec<u64> = hist.bins().iter().map(|b| b.1).collect();
    Ok(table.value(&mult, [p[0], p[1]]))
}

/// Populations maximizing the likelihood of `hist` with the detection means held fixed.
pub fn mle_populations(hist: &CountHistogram, model: &MixtureModel) -> Result<PopulationEstimate> {
    if hist.is_empty() {
        return Err(Error::Fit("histogram is empty".into()));
    }
    let table = LikelihoodTable::new(hist.bins().iter().map(|b| b.0), model)?;
    let mult: Vec<u64> = hist.bins().iter().map(|b| b.1).collect();
    table.fit(&mult, None)
}
