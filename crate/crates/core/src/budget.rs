//! Closed-form infidelity contributions and the dephasing bound left over after them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gate::GateConfig;
use crate::quantum::ModeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    /// (c.m., BM)
    pub modes: [ModeSpec; 2],
    /// Gate detuning (rad/s).
    pub delta: f64,
    /// Summed force-pulse duration (s).
    pub tau_g: f64,
    pub loops: u32,
    /// Shot-to-shot trap-frequency spread (rad/s).
    pub delta_omega: f64,
    /// Metastable-level lifetime (s).
    pub d_lifetime: f64,
    /// Dark time between gate and detection light (s).
    pub pre_detect_delay: f64,
    /// Illuminated time before photon counting starts (s).
    pub detect_settle: f64,
    /// Photon counting window (s).
    pub detect_duration: f64,
    /// Decay-rate suppression under detection light, in (0, 1].
    pub zeno_factor: f64,
    /// Photon-scattering error, passed through.
    pub scattering_error: f64,
    pub measured_infidelity: f64,
    /// Confidence interval of the measured infidelity, if known.
    pub measured_infidelity_ci: Option<(f64, f64)>,
}

impl BudgetInputs {
    /// Published `Ca-40` values with both thermal occupations at their 0.1 bound and a
    /// 200 us detection window.
    pub fn ca40_2021() -> Self {
        let g = GateConfig::ca40_2021();
        let mut cm = g.cm;
        let mut bm = g.bm;
        cm.nbar = 0.1;
        bm.nbar = 0.1;
        Self {
            modes: [cm, bm],
            delta: g.delta,
            tau_g: 2.0 * g.pulse.tau_total,
            loops: g.loops,
            delta_omega: 2.0 * PI * 63.0,
            d_lifetime: 1.174,
            pre_detect_delay: 50e-6,
            detect_settle: 50e-6,
            detect_duration: 200e-6,
            zeno_factor: 0.5,
            scattering_error: 1.1e-5,
            measured_infidelity: 5.7e-4,
            measured_infidelity_ci: Some((1.0 - 0.99973, 1.0 - 0.99913)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modes[0].validate("cm")?;
        self.modes[1].validate("bm")?;
        let nonneg = [
            ("tau_g", self.tau_g),
            ("delta_omega", self.delta_omega),
            ("pre_detect_delay", self.pre_detect_delay),
            ("detect_settle", self.detect_settle),
            ("detect_duration", self.detect_duration),
            ("scattering_error", self.scattering_error),
            ("measured_infidelity", self.measured_infidelity),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be non-negative"));
            }
        }
        if !(self.d_lifetime > 0.0) || !self.d_lifetime.is_finite() {
            return Err(Error::invalid("d_lifetime", "must be positive"));
        }
        if !(self.zeno_factor > 0.0 && self.zeno_factor <= 1.0) {
            return Err(Error::invalid("zeno_factor", "must lie in (0, 1]"));
        }
        if self.loops == 0 {
            return Err(Error::invalid("loops", "must be at least 1"));
        }
        if let Some((lo, hi)) = self.measured_infidelity_ci {
            if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::invalid("measured_infidelity_ci", "needs 0 <= lo <= hi"));
            }
        }
        Ok(())
    }
}

/// `sum_m (pi^2/4) eta_m^4 nbar_m (2 nbar_m + 1)`.
pub fn finite_temperature_error(modes: &[ModeSpec]) -> f64 {
    modes
        .iter()
        .map(|m| PI * PI / 4.0 * m.eta.powi(4) * m.nbar * (2.0 * m.nbar + 1.0))
        .sum()
}

/// `heat_rate * tau_g / (2 K)`.
pub fn heating_error(heat_rate: f64, tau_g: f64, loops: u32) -> f64 {
    heat_rate * tau_g / (2.0 * loops as f64)
}

/// `(pi^2/4) (delta_omega / delta)^2`.
pub fn trap_frequency_error(delta_omega: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::Domain("trap-frequency error needs a nonzero detuning".into()));
    }
    Ok(PI * PI / 4.0 * (delta_omega / delta).powi(2))
}

/// `(before detection, during detection)`. Each ion spends on average half its time in the
/// metastable level; under detection light the decay rate is scaled by `zeno_factor`.
pub fn metastable_decay_error(inputs: &BudgetInputs) -> (f64, f64) {
    let rate = 2.0 * 0.5 / inputs.d_lifetime;
    let pre = rate * (inputs.pre_detect_delay + inputs.zeno_factor * inputs.detect_settle);
    let during = rate * inputs.zeno_factor * inputs.detect_duration;
    (pre, during)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub source: String,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub rows: Vec<BudgetRow>,
    /// `measured_infidelity - sum(rows)`, floored at 0.
    pub dephasing_bound: f64,
    /// Same subtraction from the upper confidence edge of the measured infidelity.
    pub dephasing_bound_ci_edge: Option<f64>,
    pub inputs: BudgetInputs,
}

impl ErrorBudget {
    pub fn total_known(&self) -> f64 {
        self.rows.iter().map(|r| r.contribution).sum()
    }

    pub fn row(&self, source: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.source == source).map(|r| r.contribution)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("budget serializes")
    }

    /// Aligned table in units of 1e-4 with two significant figures.
    pub fn to_table(&self) -> String {
        let mut lines: Vec<(String, String)> = Vec::new();
        let mut bound = format!("<= {}", two_significant(self.dephasing_bound * 1e4));
        if let Some(edge) = self.dephasing_bound_ci_edge {
            bound.push_str(&format!(" (CI edge <= {})", two_significant(edge * 1e4)));
        }
        lines.push(("Spin dephasing".into(), bound));
        for r in &self.rows {
            lines.push((r.source.clone(), two_significant(r.contribution * 1e4)));
        }
        let header = ("Error source", "Contribution (x1e-4)");
        let w = lines.iter().map(|l| l.0.len()).chain([header.0.len()]).max().unwrap_or(0);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {}", header.0, header.1);
        let _ = writeln!(s, "{}", "-".repeat(w + 2 + header.1.len()));
        for (a, b) in lines {
            let _ = writeln!(s, "{a:<w$}  {b}");
        }
        let _ = writeln!(
            s,
            "heating uses tau_g = {:.1} us summed over both force pulses",
            self.inputs.tau_g * 1e6
        );
        s
    }
}

/// `x` rounded to two significant figures, in plain decimal notation.
pub fn two_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let decimals = (1 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const METASTABLE: &str = "Metastable decay";
pub const DETECTION: &str = "Detection decay";
pub const FINITE_TEMPERATURE: &str = "Finite axial mode temperature";
pub const SCATTERING: &str = "Spontaneous photon scattering";
pub const BM_HEATING: &str = "BM mode heating";
pub const TRAP_FREQUENCY: &str = "Trap frequency variation";

pub fn assemble_budget(inputs: &BudgetInputs) -> Result<ErrorBudget> {
    inputs.validate()?;
    let (pre, during) = metastable_decay_error(inputs);
    let rows = vec![
        (METASTABLE, pre),
        (DETECTION, during),
        (FINITE_TEMPERATURE, finite_temperature_error(&inputs.modes)),
        (SCATTERING, inputs.scattering_error),
        (BM_HEATING, heating_error(inputs.modes[1].heat_rate, inputs.tau_g, inputs.loops)),
        (TRAP_FREQUENCY, trap_frequency_error(inputs.delta_omega, inputs.delta)?),
    ];
    let known: f64 = rows.iter().map(|r| r.1).sum();
    Ok(ErrorBudget {
        rows: rows
            .into_iter()
            .map(|(s, c)| BudgetRow {
                source: s.to_string(),
                contribution: c,
            })
            .collect(),
        dephasing_bound: (inputs.measured_infidelity - known).max(0.0),
        dephasing_bound_ci_edge: inputs.measured_infidelity_ci.map(|(_, hi)| (hi - known).max(0.0)),
        inputs: *inputs,
    })
}
