use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Simplex membership slack for caller-supplied probabilities.
pub(crate) const SIMPLEX_SLACK: f64 = 1e-12;

/// Mean photon counts for two bright ions (`k0`), one (`k1`) and none (`k2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureModel {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
}

impl MixtureModel {
    /// Engineering defaults, not measured values: a 60-count bright level, a linear
    /// single-ion level and one background count.
    pub const DEFAULT: MixtureModel = MixtureModel {
        k0: 60.0,
        k1: 30.0,
        k2: 1.0,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.k2 >= 0.0 && self.k1 > self.k2 && self.k0 > self.k1 && self.k0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("model", "detection means must satisfy k0 > k1 > k2 >= 0"))
        }
    }

    pub fn means(&self) -> [f64; 3] {
        [self.k0, self.k1, self.k2]
    }
}

impl Default for MixtureModel {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// `ln(k^n e^-k / n!)`; a zero mean puts all mass on `n = 0`.
pub fn ln_poisson(n: u64, k: f64) -> f64 {
    if k == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let x = n as f64;
    x * k.ln() - k - ln_gamma(x + 1.0)
}

pub(crate) fn check_simplex(p: [f64; 3]) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_SLACK) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("({}, {}, {}) is not a probability vector", p[0], p[1], p[2])));
    }
    Ok(())
}

/// Probability of `n` counts when the ions are in the two-bright, one-bright and
/// two-dark subspaces with weights `p0`, `p1` and `1 - p0 - p1`.
pub fn mixture_pmf(n: u64, p0: f64, p1: f64, model: &MixtureModel) -> Result<f64> {
    model.validate()?;
    if !(p0 >= 0.0 && p1 >= 0.0 && p0 + p1 <= 1.0 + SIMPLEX_SLACK) {
        return Err(Error::Domain(format!("(p0, p1) = ({p0}, {p1}) is outside the simplex")));
    }
    let p2 = (1.0 - p0 - p1).max(0.0);
    Ok([p0, p1, p2]
        .iter()
        .zip(model.means())
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, k)| w * ln_poisson(n, k).exp())
        .sum())
}

/// Photon counts of repeated detections, stored as sorted `(count, multiplicity)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountHistogram {
    bins: Vec<(u64, u64)>,
}

impl CountHistogram {
    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Self {
        let mut map = BTreeMap::new();
        for c in counts {
            *map.entry(c).or_insert(0u64) += 1;
        }
        Self::from_map(map)
    }

    /// Pairs may repeat counts; zero multiplicities are dropped.
    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Self {
        let mut map = BTreeMap::new();
        for (c, m) in pairs {
            if m > 0 {
                *map.entry(c).or_insert(0u64) += m;
            }
        }
        Self::from_map(map)
    }

    fn from_map(map: BTreeMap<u64, u64>) -> Self {
        Self {
            bins: map.into_iter().filter(|(_, m)| *m > 0).collect(),
        }
    }

    /// `(count, multiplicity)` in increasing count order.
    pub fn bins(&self) -> &[(u64, u64)] {
        &self.bins
    }

    pub fn shots(&self) -> u64 {
        self.bins.iter().map(|b| b.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn mean(&self) -> f64 {
        let n = self.shots();
        if n == 0 {
            return f64::NAN;
        }
        self.bins.iter().map(|(c, m)| *c as f64 * *m as f64).sum::<f64>() / n as f64
    }

    /// Multiplicity of `count`.
    pub fn frequency(&self, count: u64) -> u64 {
        self.bins
            .binary_search_by_key(&count, |b| b.0)
            .map(|i| self.bins[i].1)
            .unwrap_or(0)
    }

    /// Every shot's count in increasing order.
    pub fn expand(&self) -> Vec<u64> {
        self.bins
            .iter()
            .flat_map(|&(c, m)| std::iter::repeat_n(c, m as usize))
            .collect()
    }
}

fn poisson_draw(rng: &mut ChaCha8Rng, dist: &Option<Poisson<f64>>) -> u64 {
    match dist {
        Some(d) => d.sample(rng) as u64,
        None => 0,
    }
}

/// Forward model: each shot picks a subspace with probabilities `p`, then a Poisson count
/// at that subspace's mean. Identical seeds give identical histograms.
pub fn sample_counts(p: [f64; 3], model: &MixtureModel, shots: u64, seed: u64) -> Result<CountHistogram> {
    model.validate()?;
    check_simplex(p)?;
    if shots == 0 {
        return Err(Error::invalid("shots", "must be at least 1"));
    }
    let dists: Vec<Option<Poisson<f64>>> = model
        .means()
        .iter()
        .map(|&k| if k > 0.0 { Poisson::new(k).ok() } else { None })
        .collect();
    let c0 = p[0].max(0.0);
    let c1 = c0 + p[1].max(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.random();
        let which = if u < c0 {
            0
        } else if u < c1 {
            1
        } else {
            2
        };
        *map.entry(poisson_draw(&mut rng, &dists[which])).or_insert(0u64) += 1;
    }
    Ok(CountHistogram::from_map(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_at_zero() {
        let m = MixtureModel { k0: 5.0, k1: 2.0, k2: 1.0 };
        let v = mixture_pmf(0, 0.0, 0.0, &m).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.3679).abs() < 1e-4);
    }

    #[test]
    fn vertex_is_a_single_poisson() {
        let m = MixtureModel::DEFAULT;
        for n in [0u64, 10, 60, 200] {
            let direct = (n as f64 * 60f64.ln() - 60.0 - ln_gamma(n as f64 + 1.0)).exp();
            let v = mixture_pmf(n, 1.0, 0.0, &m).unwrap();
            assert!((v - direct).abs() <= 1e-14 * direct.max(1e-300), "n={n}");
        }
    }

    #[test]
    fn normalized_over_the_bulk() {
        let m = MixtureModel::DEFAULT;
        let top = (m.k0 + 20.0 * m.k0.sqrt()).ceil() as u64;
        for (p0, p1) in [(1.0, 0.0), (0.2, 0.3), (0.0, 0.0), (0.0, 1.0)] {
            let s: f64 = (0..=top).map(|n| mixture_pmf(n, p0, p1, &m).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-10, "{p0} {p1}: {s}");
        }
    }

    #[test]
    fn large_counts_do_not_overflow() {
        let m = MixtureModel::DEFAULT;
        let v = mixture_pmf(10 * 60, 0.5, 0.25, &m).unwrap();
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn rejects_points_off_the_simplex() {
        let m = MixtureModel::DEFAULT;
        assert!(matches!(mixture_pmf(3, 0.7, 0.4, &m), Err(Error::Domain(_))));
        assert!(matches!(mixture_pmf(3, -0.1, 0.4, &m), Err(Error::Domain(_))));
    }

    #[test]
    fn model_ordering_is_enforced() {
        assert!(MixtureModel { k0: 10.0, k1: 10.0, k2: 1.0 }.validate().is_err());
        assert!(MixtureModel { k0: 10.0, k1: 5.0, k2: -1.0 }.validate().is_err());
        assert!(MixtureModel { k0: 10.0, k1: 5.0, k2: 0.0 }.validate().is_ok());
    }

    #[test]
    fn bright_sample_mean_is_k0() {
        let m = MixtureModel::DEFAULT;
        let n = 100_000u64;
        let h = sample_counts([1.0, 0.0, 0.0], &m, n, 7).unwrap();
        assert_eq!(h.shots(), n);
        let sigma = (m.k0 / n as f64).sqrt();
        assert!((h.mean() - m.k0).abs() < 5.0 * sigma);
    }

    #[test]
    fn dark_zero_fraction_is_e_inverse() {
        let m = MixtureModel::DEFAULT;
        let n = 100_000u64;
        let h = sample_counts([0.0, 0.0, 1.0], &m, n, 11).unwrap();
        let q = (-1.0f64).exp();
        let frac = h.frequency(0) as f64 / n as f64;
        assert!((frac - q).abs() < 5.0 * (q * (1.0 - q) / n as f64).sqrt());
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let m = MixtureModel::DEFAULT;
        let a = sample_counts([0.3, 0.2, 0.5], &m, 5000, 42).unwrap();
        let b = sample_counts([0.3, 0.2, 0.5], &m, 5000, 42).unwrap();
        let c = sample_counts([0.3, 0.2, 0.5], &m, 5000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pairs_and_counts_agree() {
        let a = CountHistogram::from_counts([3, 1, 3, 0, 3]);
        let b = CountHistogram::from_pairs([(3, 2), (0, 1), (1, 1), (3, 1), (7, 0)]);
        assert_eq!(a, b);
        assert_eq!(a.bins(), &[(0, 1), (1, 1), (3, 3)]);
        assert_eq!(a.expand(), vec![0, 1, 3, 3, 3]);
    }
}
