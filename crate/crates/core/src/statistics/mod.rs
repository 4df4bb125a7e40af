//! Photon-count measurement model and the inference built on it.
//!
//! Detection means are inputs. They are never fitted.

pub mod bootstrap;
pub mod inference;
pub mod io;
pub mod mixture;
pub mod mle;

pub use bootstrap::{bootstrap, BootstrapStatistic, BootstrapSummary, Dataset};
pub use inference::{
    bell_fidelity, depolarize, fit_sinusoid, jeffreys_interval, parity_amplitude, parity_stats, ParityStats,
    SinusoidFit,
};
pub use io::{parse_histogram, parse_json_histogram, parse_text_histogram, HistogramFile, LoadedHistogram};
pub use mixture::{mixture_pmf, sample_counts, CountHistogram, MixtureModel};
pub use mle::{log_likelihood, mle_populations, PopulationEstimate};
