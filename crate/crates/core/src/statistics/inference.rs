use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};

/// Parities at the two analysis phases and half their difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityStats {
    /// Parity at `phi = pi/4`.
    pub plus: f64,
    /// Parity at `phi = 3 pi/4`.
    pub minus: f64,
    pub amplitude: f64,
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{x} is not a probability")))
    }
}

/// Half the peak-to-peak parity swing between the two analysis phases.
pub fn parity_amplitude(plus: f64, minus: f64) -> f64 {
    (plus - minus) / 2.0
}

/// Parity `1 - 2 P1` at each analysis phase and the resulting amplitude.
pub fn parity_stats(p1_at_quarter: f64, p1_at_three_quarter: f64) -> Result<ParityStats> {
    check_unit("p1_at_quarter", p1_at_quarter)?;
    check_unit("p1_at_three_quarter", p1_at_three_quarter)?;
    let plus = 1.0 - 2.0 * p1_at_quarter;
    let minus = 1.0 - 2.0 * p1_at_three_quarter;
    Ok(ParityStats {
        plus,
        minus,
        amplitude: parity_amplitude(plus, minus),
    })
}

/// Bell-state fidelity from the even population and the parity amplitude.
pub fn bell_fidelity(even_population: f64, amplitude: f64) -> Result<f64> {
    check_unit("even_population", even_population)?;
    check_unit("amplitude", amplitude)?;
    Ok((even_population + amplitude) / 2.0)
}

/// Central Jeffreys interval: quantiles of `Beta(k + 1/2, n - k + 1/2)` at
/// `(1 -/+ level) / 2`, with `lo = 0` when `k = 0` and `hi = 1` when `k = n`.
pub fn jeffreys_interval(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if successes > trials {
        return Err(Error::invalid("successes", "cannot exceed trials"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", "must lie strictly between 0 and 1"));
    }
    let a = successes as f64 + 0.5;
    let b = (trials - successes) as f64 + 0.5;
    let beta = Beta::new(a, b).map_err(|e| Error::Domain(e.to_string()))?;
    let tail = (1.0 - level) / 2.0;
    let lo = if successes == 0 { 0.0 } else { beta.inverse_cdf(tail) };
    let hi = if successes == trials { 1.0 } else { beta.inverse_cdf(1.0 - tail) };
    Ok((lo, hi))
}

/// Least-squares `offset + amplitude * sin(frequency * x + phase)` at fixed frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

/// Linear least squares in the basis `sin(f x)`, `cos(f x)`, `1`.
pub fn fit_sinusoid(points: &[(f64, f64)], frequency: f64) -> Result<SinusoidFit> {
    if points.len() < 3 {
        return Err(Error::Fit("sinusoid fit needs at least three points".into()));
    }
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for &(x, y) in points {
        let row = [(frequency * x).sin(), (frequency * x).cos(), 1.0];
        for i in 0..3 {
            b[i] += row[i] * y;
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let c = solve3(a, b).ok_or_else(|| Error::Fit("sample phases do not determine a sinusoid".into()))?;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| (y - c[0] * (frequency * x).sin() - c[1] * (frequency * x).cos() - c[2]).powi(2))
        .sum();
    Ok(SinusoidFit {
        amplitude: c[0].hypot(c[1]),
        phase: c[1].atan2(c[0]),
        offset: c[2],
        rms_residual: (sse / points.len() as f64).sqrt(),
    })
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for k in col..3 {
                a[r][k] -= f * a[col][k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Mixes `(p0, p1, p2)` with the fully mixed two-qubit state at weight `lambda`.
pub fn depolarize(p: [f64; 3], lambda: f64) -> [f64; 3] {
    let mixed = [0.25, 0.5, 0.25];
    [0, 1, 2].map(|i| (1.0 - lambda) * p[i] + lambda * mixed[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parities_give_reference_amplitude() {
        assert!((parity_amplitude(0.99902, -0.99920) - 0.99911).abs() <= 1e-15);
        let s = parity_stats(0.0, 0.0).unwrap();
        assert_eq!((s.plus, s.minus, s.amplitude), (1.0, 1.0, 0.0));
        let s = parity_stats(0.5, 0.5).unwrap();
        assert_eq!((s.plus, s.minus, s.amplitude), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fidelity_algebra() {
        assert!((bell_fidelity(0.99977, 0.99911).unwrap() - 0.99944).abs() <= 1e-15);
        assert_eq!(bell_fidelity(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(bell_fidelity(0.5, 0.0).unwrap(), 0.25);
        assert!(bell_fidelity(1.2, 0.0).is_err());
    }

    #[test]
    fn jeffreys_clamps_at_the_ends() {
        let (lo, hi) = jeffreys_interval(0, 50, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
        let (lo, hi) = jeffreys_interval(50, 50, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!(lo > 0.9 && lo < 1.0);
        assert!(jeffreys_interval(3, 2, 0.5).is_err());
        assert!(jeffreys_interval(1, 2, 1.0).is_err());
    }

    #[test]
    fn sinusoid_fit_recovers_parameters() {
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|i| {
                let x = i as f64 * 0.11;
                (x, 0.1 + 0.8 * (2.0 * x + 0.4).sin())
            })
            .collect();
        let f = fit_sinusoid(&pts, 2.0).unwrap();
        assert!((f.amplitude - 0.8).abs() < 1e-12);
        assert!((f.phase - 0.4).abs() < 1e-12);
        assert!((f.offset - 0.1).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
        assert!(fit_sinusoid(&[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)], 2.0).is_err());
    }

    #[test]
    fn depolarizing_a_bell_state_lowers_fidelity_by_three_quarters_lambda() {
        let lambda = 8e-4;
        let even = depolarize([0.5, 0.0, 0.5], lambda);
        let plus = depolarize([0.5, 0.0, 0.5], lambda)[1];
        let minus = depolarize([0.0, 1.0, 0.0], lambda)[1];
        let s = parity_stats(plus, minus).unwrap();
        let f = bell_fidelity(even[0] + even[2], s.amplitude).unwrap();
        assert!((f - (1.0 - 0.75 * lambda)).abs() < 1e-15);
    }
}
