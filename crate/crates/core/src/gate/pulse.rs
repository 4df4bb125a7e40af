use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge profile of the force pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RampShape {
    /// `sin^2` rise over `tau_ramp`, mirror-image fall.
    SineSquared,
    /// Hard edges; `tau_ramp` is ignored.
    Square,
}

/// Shaped optical-dipole-force pulse. Times are measured from the pulse start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdfPulse {
    /// Peak differential light-shift coupling (rad/s).
    pub omega_peak: f64,
    /// Duration of each ramp (s).
    pub tau_ramp: f64,
    /// Full pulse duration including both ramps (s).
    pub tau_total: f64,
    pub shape: RampShape,
}

impl OdfPulse {
    pub fn sine_squared(omega_peak: f64, tau_ramp: f64, tau_total: f64) -> Self {
        Self {
            omega_peak,
            tau_ramp,
            tau_total,
            shape: RampShape::SineSquared,
        }
    }

    pub fn square(omega_peak: f64, tau_total: f64) -> Self {
        Self {
            omega_peak,
            tau_ramp: 0.0,
            tau_total,
            shape: RampShape::Square,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_total > 0.0) || !self.tau_total.is_finite() {
            return Err(Error::invalid("tau_total", "pulse duration must be positive"));
        }
        if !(self.tau_ramp >= 0.0) || 2.0 * self.effective_ramp() > self.tau_total {
            return Err(Error::invalid(
                "tau_ramp",
                "ramps must be non-negative and fit twice inside the pulse",
            ));
        }
        if !(self.omega_peak >= 0.0) || !self.omega_peak.is_finite() {
            return Err(Error::invalid("omega_peak", "coupling must be non-negative"));
        }
        Ok(())
    }

    fn effective_ramp(&self) -> f64 {
        match self.shape {
            RampShape::SineSquared => self.tau_ramp,
            RampShape::Square => 0.0,
        }
    }

    /// Duration of the flat top.
    pub fn flat_duration(&self) -> f64 {
        self.tau_total - 2.0 * self.effective_ramp()
    }

    /// Envelope normalized to one on the flat top; zero outside `[0, tau_total]`.
    pub fn shape_at(&self, t: f64) -> f64 {
        if !(0.0..=self.tau_total).contains(&t) {
            return 0.0;
        }
        let ramp = self.effective_ramp();
        if ramp == 0.0 {
            return 1.0;
        }
        let q = std::f64::consts::FRAC_PI_2 / ramp;
        if t < ramp {
            (q * t).sin().powi(2)
        } else if t > self.tau_total - ramp {
            (q * (self.tau_total - t)).sin().powi(2)
        } else {
            1.0
        }
    }

    /// `Omega(t)` in rad/s.
    pub fn envelope(&self, t: f64) -> f64 {
        self.omega_peak * self.shape_at(t)
    }

    /// Points where the envelope is not smooth, relative to the pulse start.
    pub fn breakpoints(&self) -> Vec<f64> {
        let ramp = self.effective_ramp();
        if ramp == 0.0 {
            vec![0.0, self.tau_total]
        } else {
            vec![0.0, ramp, self.tau_total - ramp, self.tau_total]
        }
    }

    /// Area of the normalized envelope (s).
    pub fn shape_area(&self) -> f64 {
        self.tau_total - self.effective_ramp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_squared_envelope_is_continuous_and_vanishes_at_edges() {
        let p = OdfPulse::sine_squared(2.0, 3.2e-6, 12e-6);
        assert_eq!(p.envelope(0.0), 0.0);
        assert!(p.envelope(12e-6).abs() < 1e-30);
        assert_eq!(p.envelope(6e-6), 2.0);
        assert!((p.envelope(1.6e-6) - 1.0).abs() < 1e-12);
        assert!((p.flat_duration() - 5.6e-6).abs() < 1e-18);
        for &edge in &[3.2e-6, 8.8e-6] {
            let left = p.envelope(edge - 1e-12);
            let right = p.envelope(edge + 1e-12);
            assert!((left - right).abs() < 1e-9);
        }
        assert_eq!(p.envelope(-1e-9), 0.0);
        assert_eq!(p.envelope(12.1e-6), 0.0);
    }

    #[test]
    fn area_matches_trapezoidal_quadrature() {
        let p = OdfPulse::sine_squared(1.0, 3.2e-6, 12e-6);
        let n = 200_000;
        let h = p.tau_total / n as f64;
        let sum: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * p.shape_at(i as f64 * h)
            })
            .sum::<f64>()
            * h;
        assert!((sum - p.shape_area()).abs() < 1e-12);
    }

    #[test]
    fn rejects_overlong_ramps() {
        assert!(OdfPulse::sine_squared(1.0, 7e-6, 12e-6).validate().is_err());
        assert!(OdfPulse::sine_squared(1.0, 6e-6, 12e-6).validate().is_ok());
        assert!(OdfPulse::square(1.0, 0.0).validate().is_err());
    }
}
