//! Nonparametric bootstrap over one or more count histograms.
//!
//! Replicate `i` draws from `ChaCha8(seed)` on stream `i`, so the summary does not depend
//! on how replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inference::{bell_fidelity, parity_stats};
use super::mixture::{CountHistogram, MixtureModel};
use super::mle::{LikelihoodTable, PopulationEstimate};
use crate::error::{Error, Result};

/// Smallest accepted replicate count.
pub const MIN_REPLICATES: usize = 100;
/// Largest tolerated fraction of failed replicates.
pub const MAX_DROP_FRACTION: f64 = 0.01;
/// Central interval reported by [`bootstrap`].
pub const CI_LEVEL: f64 = 0.68;

/// A histogram together with the detection model it was recorded under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub histogram: CountHistogram,
    pub model: MixtureModel,
}

/// Quantity recomputed on every replicate.
///
/// Dataset order: `EvenPopulation` takes `[populations]`, `ParityAmplitude` takes
/// `[pi/4, 3pi/4]` and `Fidelity` takes `[populations, pi/4, 3pi/4]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapStatistic {
    ParityAmplitude,
    EvenPopulation,
    Fidelity,
}

impl BootstrapStatistic {
    pub fn dataset_count(self) -> usize {
        match self {
            BootstrapStatistic::EvenPopulation => 1,
            BootstrapStatistic::ParityAmplitude => 2,
            BootstrapStatistic::Fidelity => 3,
        }
    }

    /// Statistic from fitted populations of each dataset, in dataset order.
    pub fn evaluate(self, fits: &[PopulationEstimate]) -> Result<f64> {
        if fits.len() != self.dataset_count() {
            return Err(Error::invalid("datasets", format!("{self:?} needs {} histograms", self.dataset_count())));
        }
        match self {
            BootstrapStatistic::EvenPopulation => Ok(fits[0].p0 + fits[0].p2),
            BootstrapStatistic::ParityAmplitude => Ok(parity_stats(fits[0].p1, fits[1].p1)?.amplitude),
            BootstrapStatistic::Fidelity => {
                let a = parity_stats(fits[1].p1, fits[2].p1)?.amplitude;
                bell_fidelity(fits[0].p0 + fits[0].p2, a).map_err(|e| Error::Fit(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    /// Statistic of the original data.
    pub point: f64,
    /// Mean over successful replicates.
    pub mean: f64,
    /// Central 68% interval of the replicate distribution.
    pub ci68: (f64, f64),
    /// `|mean - point|`.
    pub bias: f64,
    pub replicates: usize,
    pub dropped: usize,
}

impl BootstrapSummary {
    pub fn width(&self) -> f64 {
        self.ci68.1 - self.ci68.0
    }
}

struct Prepared {
    table: LikelihoodTable,
    mult: Vec<u64>,
    shots: u64,
    fit: PopulationEstimate,
}

/// Multinomial resample of a histogram's multiplicities by sequential binomials.
fn resample(mult: &[u64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left_shots = shots;
    let mut left_mass = shots;
    let mut out = Vec::with_capacity(mult.len());
    for &m in mult {
        if left_shots == 0 || m == 0 {
            out.push(0);
            left_mass -= m;
            continue;
        }
        let draw = if m >= left_mass {
            left_shots
        } else {
            let p = m as f64 / left_mass as f64;
            Binomial::new(left_shots, p).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out.push(draw);
        left_shots -= draw;
        left_mass -= m;
    }
    out
}

/// Lower/upper quantiles with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = h.floor() as usize;
    let frac = h - i as f64;
    if i + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Resamples every dataset with replacement `n_boot` times, refits populations and
/// summarizes the statistic's replicate distribution.
pub fn bootstrap(
    datasets: &[Dataset],
    n_boot: usize,
    seed: u64,
    statistic: BootstrapStatistic,
) -> Result<BootstrapSummary> {
    if n_boot < MIN_REPLICATES {
        return Err(Error::invalid("n_boot", format!("needs at least {MIN_REPLICATES} replicates")));
    }
    if datasets.len() != statistic.dataset_count() {
        return Err(Error::invalid(
            "datasets",
            format!("{statistic:?} needs {} histograms, got {}", statistic.dataset_count(), datasets.len()),
        ));
    }
    let prepared: Vec<Prepared> = datasets
        .iter()
        .map(|d| {
            let table = LikelihoodTable::new(d.histogram.bins().iter().map(|b| b.0), &d.model)?;
            let mult: Vec<u64> = d.histogram.bins().iter().map(|b| b.1).collect();
            let fit = table.fit(&mult, None)?;
            Ok(Prepared {
                table,
                shots: d.histogram.shots(),
                mult,
                fit,
            })
        })
        .collect::<Result<_>>()?;
    let point = statistic.evaluate(&prepared.iter().map(|p| p.fit).collect::<Vec<_>>())?;

    let draws: Vec<Option<f64>> = (0..n_boot)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut fits = Vec::with_capacity(prepared.len());
            for p in &prepared {
                let mult = resample(&p.mult, p.shots, &mut rng);
                fits.push(p.table.fit(&mult, Some([p.fit.p0, p.fit.p1])).ok()?);
            }
            statistic.evaluate(&fits).ok().filter(|v| v.is_finite())
        })
        .collect();

    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let dropped = n_boot - values.len();
    if dropped as f64 > MAX_DROP_FRACTION * n_boot as f64 {
        return Err(Error::Bootstrap(format!("{dropped} of {n_boot} replicates failed")));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - CI_LEVEL) / 2.0;
    Ok(BootstrapSummary {
        point,
        mean,
        ci68: (quantile(&values, tail), quantile(&values, 1.0 - tail)),
        bias: (mean - point).abs(),
        replicates: values.len(),
        dropped,
    })
}
