//! Run configuration: a TOML (or JSON) document in Hz and microseconds, resolved against
//! the `ca40-2021` preset and converted once to SI angular units.
//!
//! Every key of the resolved document is listed by serializing [`ConfigDocument::default`];
//! anything else is rejected with the closest known key as a suggestion.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use otdf_core::budget::BudgetInputs;
use otdf_core::calibration::SpacingOptions;
use otdf_core::gate::{
    CompensationFrame, GateConfig, InitialCondition, LdModel, NumericOptions, OdfPulse, RampShape, SimulationModel,
};
use otdf_core::quantum::{FockSpace, ModeSpec};
use otdf_core::statistics::{BootstrapStatistic, MixtureModel};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const PRESET: &str = "ca40-2021";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DetuningScan,
    ParityScan,
    BellRun,
    FitHistogram,
    Bootstrap,
    Budget,
    CalibrateSpacing,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::DetuningScan => "detuning-scan",
            Experiment::ParityScan => "parity-scan",
            Experiment::BellRun => "bell-run",
            Experiment::FitHistogram => "fit-histogram",
            Experiment::Bootstrap => "bootstrap",
            Experiment::Budget => "budget",
            Experiment::CalibrateSpacing => "calibrate-spacing",
        }
    }
}

/// Gate parameters. Frequencies are cyclic (Hz), durations in microseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub detuning_hz: f64,
    pub cm_frequency_hz: f64,
    pub bm_frequency_hz: f64,
    pub cm_eta: f64,
    pub bm_eta: f64,
    pub cm_nbar: f64,
    pub bm_nbar: f64,
    /// quanta/s
    pub cm_heating_rate: f64,
    pub bm_heating_rate: f64,
    /// Peak differential light shift amplitude over 2 pi.
    pub peak_coupling_hz: f64,
    pub odf_duration_us: f64,
    pub ramp_duration_us: f64,
    pub ramp_shape: RampShape,
    pub loops: u32,
    pub echo_gap_us: f64,
    pub ion_phases_rad: [f64; 2],
    pub balance: [f64; 2],
    pub lattice_phase_rad: f64,
    pub compensate_echo_phase: bool,
    pub compensation_frame: CompensationFrame,
    /// Re-solve the peak coupling for `chi = pi/2` at the configured detuning.
    pub calibrate_amplitude: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            detuning_hz: 114e3,
            cm_frequency_hz: 2.53e6,
            bm_frequency_hz: 4.38e6,
            cm_eta: 0.083,
            bm_eta: 0.063,
            cm_nbar: 0.0,
            bm_nbar: 0.0,
            cm_heating_rate: 33.0,
            bm_heating_rate: 1.4,
            peak_coupling_hz: otdf_core::gate::config::CA40_2021_OMEGA_PEAK / TAU,
            odf_duration_us: 12.0,
            ramp_duration_us: 3.2,
            ramp_shape: RampShape::SineSquared,
            loops: 2,
            echo_gap_us: 5.6,
            ion_phases_rad: [0.0, 0.0],
            balance: [1.0, 1.0],
            lattice_phase_rad: 0.0,
            compensate_echo_phase: true,
            compensation_frame: CompensationFrame::GateMode,
            calibrate_amplitude: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Numeric,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticTerms {
    Full,
    Rotating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Model {
    pub kind: ModelKind,
    pub analytic_terms: AnalyticTerms,
    pub cm_levels: usize,
    pub bm_levels: usize,
    pub rel_tol: f64,
    /// Lost thermal probability tolerated when either occupation is nonzero.
    pub thermal_cutoff: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            kind: ModelKind::Numeric,
            analytic_terms: AnalyticTerms::Full,
            cm_levels: 15,
            bm_levels: 15,
            rel_tol: 1e-10,
            thermal_cutoff: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scan {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub step_hz: f64,
}

impl Default for Scan {
    fn default() -> Self {
        Self {
            start_hz: 90e3,
            stop_hz: 140e3,
            step_hz: 2e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Parity {
    pub start_rad: f64,
    pub stop_rad: f64,
    pub points: usize,
}

impl Default for Parity {
    fn default() -> Self {
        Self {
            start_rad: 0.0,
            stop_rad: PI,
            points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Statistics {
    pub k0: f64,
    pub k1: f64,
    pub k2: f64,
    /// Shots per analysis phase.
    pub shots: u64,
    /// Shots of the population measurement without analysis pulse.
    pub population_shots: u64,
    pub n_boot: usize,
    pub statistic: BootstrapStatistic,
    /// Bell-state infidelity added by depolarizing the simulated state.
    pub injected_infidelity: f64,
    /// Input histogram files, in the order the statistic expects.
    pub histograms: Vec<PathBuf>,
}

impl Default for Statistics {
    fn default() -> Self {
        let m = MixtureModel::DEFAULT;
        Self {
            k0: m.k0,
            k1: m.k1,
            k2: m.k2,
            shots: 5000,
            population_shots: 10000,
            n_boot: 10000,
            statistic: BootstrapStatistic::Fidelity,
            injected_infidelity: 0.0,
            histograms: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub cm_nbar: f64,
    pub bm_nbar: f64,
    /// Defaults to both force pulses.
    pub tau_g_us: Option<f64>,
    pub delta_omega_hz: f64,
    pub d_lifetime_s: f64,
    pub pre_detect_delay_us: f64,
    pub detect_settle_us: f64,
    pub detect_duration_us: f64,
    pub zeno_factor: f64,
    pub scattering_error: f64,
    pub measured_infidelity: f64,
    pub measured_infidelity_ci: Option<[f64; 2]>,
}

impl Default for Budget {
    fn default() -> Self {
        let b = BudgetInputs::ca40_2021();
        Self {
            cm_nbar: b.modes[0].nbar,
            bm_nbar: b.modes[1].nbar,
            tau_g_us: None,
            delta_omega_hz: 63.0,
            d_lifetime_s: b.d_lifetime,
            pre_detect_delay_us: 50.0,
            detect_settle_us: 50.0,
            detect_duration_us: 200.0,
            zeno_factor: b.zeno_factor,
            scattering_error: b.scattering_error,
            measured_infidelity: b.measured_infidelity,
            measured_infidelity_ci: b.measured_infidelity_ci.map(|(a, c)| [a, c]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Calibration {
    pub bracket_rad: [f64; 2],
    pub scan_points: usize,
    pub omega_scale: f64,
    pub cm_levels: usize,
    pub bm_levels: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        let s = SpacingOptions::default();
        Self {
            bracket_rad: [-1.0, 1.0],
            scan_points: 33,
            omega_scale: s.omega_scale,
            cm_levels: s.space.n_cm,
            bm_levels: s.space.n_bm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    /// CSV table plus JSON sidecar.
    Csv,
    /// Rows embedded in the JSON sidecar only.
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for Output {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("otdf-out"),
            format: OutputFormat::Csv,
        }
    }
}

/// The document as written by users and as emitted, fully resolved, in sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub experiment: Option<Experiment>,
    pub preset: String,
    pub seed: u64,
    pub physics: Physics,
    pub model: Model,
    pub scan: Scan,
    pub parity: Parity,
    pub statistics: Statistics,
    pub budget: Budget,
    pub calibration: Calibration,
    pub output: Output,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            experiment: None,
            preset: PRESET.into(),
            seed: 0,
            physics: Physics::default(),
            model: Model::default(),
            scan: Scan::default(),
            parity: Parity::default(),
            statistics: Statistics::default(),
            budget: Budget::default(),
            calibration: Calibration::default(),
            output: Output::default(),
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub preset: Option<String>,
}

/// Validated configuration in SI angular units.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Resolved human-unit document; revalidating it reproduces this value.
    pub document: ConfigDocument,
    pub gate: GateConfig,
    pub model: SimulationModel,
    pub initial: InitialCondition,
    /// Gate detunings of the scan (rad/s) and their cyclic values (Hz).
    pub scan_deltas: Vec<(f64, f64)>,
    pub parity_phases: Vec<f64>,
    pub mixture: MixtureModel,
    pub budget: BudgetInputs,
    pub spacing: SpacingOptions,
    pub spacing_bracket: (f64, f64),
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

fn known_keys() -> Value {
    serde_json::to_value(ConfigDocument::default()).expect("default document serializes")
}

fn leaf_paths(v: &Value, prefix: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = v {
        for (k, child) in map {
            let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
            if child.is_object() {
                leaf_paths(child, &path, out);
            } else {
                out.push(path);
            }
        }
    }
}

fn suggest(unknown: &str, siblings: &[String], all: &[String]) -> Option<String> {
    let score = |cand: &str| strsim::jaro_winkler(unknown, cand);
    let best = |pool: &mut dyn Iterator<Item = (String, String)>| {
        pool.map(|(short, full)| (score(&short), full))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .filter(|(s, _)| *s >= 0.75)
            .map(|(_, f)| f)
    };
    best(&mut siblings.iter().map(|s| (s.clone(), s.clone()))).or_else(|| {
        best(&mut all
            .iter()
            .map(|p| (p.rsplit('.').next().unwrap_or(p).to_string(), p.clone())))
    })
}

fn check_keys(doc: &Value, schema: &Value, prefix: &str, all: &[String]) -> Result<(), CliError> {
    let (Value::Object(d), Value::Object(s)) = (doc, schema) else {
        return Ok(());
    };
    let siblings: Vec<String> = s.keys().cloned().collect();
    for (k, v) in d {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match s.get(k) {
            None => {
                return Err(CliError::Config {
                    key: path,
                    message: "unknown key".into(),
                    suggestion: suggest(k, &siblings, all),
                })
            }
            Some(child) if child.is_object() => {
                if !v.is_object() {
                    return Err(CliError::config(&path, "must be a table"));
                }
                check_keys(v, child, &path, all)?;
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn parse_document(text: &str) -> Result<Value, CliError> {
    if text.trim_start().starts_with('{') {
        serde_json::from_str(text).map_err(|e| CliError::config("", format!("malformed JSON: {e}")))
    } else {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config("", format!("malformed TOML: {}", e.message())))?;
        serde_json::to_value(table).map_err(|e| CliError::config("", e.to_string()))
    }
}

fn require(ok: bool, key: &str, constraint: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::config(key, constraint))
    }
}

fn positive(x: f64, key: &str) -> Result<(), CliError> {
    require(x > 0.0 && x.is_finite(), key, "must be positive")
}

fn non_negative(x: f64, key: &str) -> Result<(), CliError> {
    require(x >= 0.0 && x.is_finite(), key, "must be non-negative")
}

fn finite(x: f64, key: &str) -> Result<(), CliError> {
    require(x.is_finite(), key, "must be finite")
}

fn check_physics(p: &Physics) -> Result<(), CliError> {
    finite(p.detuning_hz, "physics.detuning_hz")?;
    positive(p.cm_frequency_hz, "physics.cm_frequency_hz")?;
    positive(p.bm_frequency_hz, "physics.bm_frequency_hz")?;
    for (x, k) in [(p.cm_eta, "physics.cm_eta"), (p.bm_eta, "physics.bm_eta")] {
        require(x > 0.0 && x < 1.0, k, "must lie in (0, 1)")?;
    }
    non_negative(p.cm_nbar, "physics.cm_nbar")?;
    non_negative(p.bm_nbar, "physics.bm_nbar")?;
    non_negative(p.cm_heating_rate, "physics.cm_heating_rate")?;
    non_negative(p.bm_heating_rate, "physics.bm_heating_rate")?;
    positive(p.peak_coupling_hz, "physics.peak_coupling_hz")?;
    positive(p.odf_duration_us, "physics.odf_duration_us")?;
    non_negative(p.ramp_duration_us, "physics.ramp_duration_us")?;
    if p.ramp_shape == RampShape::SineSquared {
        require(
            2.0 * p.ramp_duration_us <= p.odf_duration_us,
            "physics.ramp_duration_us",
            "two ramps must fit inside physics.odf_duration_us",
        )?;
    }
    require(p.loops >= 1, "physics.loops", "must be at least 1")?;
    non_negative(p.echo_gap_us, "physics.echo_gap_us")?;
    for x in p.ion_phases_rad {
        finite(x, "physics.ion_phases_rad")?;
    }
    for x in p.balance {
        positive(x, "physics.balance")?;
    }
    finite(p.lattice_phase_rad, "physics.lattice_phase_rad")?;
    require(
        p.bm_frequency_hz + p.detuning_hz > 0.0,
        "physics.detuning_hz",
        "lattice beat frequency bm_frequency_hz + detuning_hz must stay positive",
    )
}

/// Converts the physics block to SI angular units.
pub fn gate_config(p: &Physics) -> GateConfig {
    let preset = GateConfig::ca40_2021();
    let pulse = match p.ramp_shape {
        RampShape::SineSquared => {
            OdfPulse::sine_squared(TAU * p.peak_coupling_hz, p.ramp_duration_us * 1e-6, p.odf_duration_us * 1e-6)
        }
        RampShape::Square => OdfPulse::square(TAU * p.peak_coupling_hz, p.odf_duration_us * 1e-6),
    };
    let mut lattice = preset.lattice;
    lattice.theta_ion = p.ion_phases_rad;
    lattice.balance = p.balance;
    lattice.phi_lattice = p.lattice_phase_rad;
    GateConfig {
        cm: ModeSpec {
            omega: TAU * p.cm_frequency_hz,
            eta: p.cm_eta,
            signs: preset.cm.signs,
            nbar: p.cm_nbar,
            heat_rate: p.cm_heating_rate,
        },
        bm: ModeSpec {
            omega: TAU * p.bm_frequency_hz,
            eta: p.bm_eta,
            signs: preset.bm.signs,
            nbar: p.bm_nbar,
            heat_rate: p.bm_heating_rate,
        },
        pulse,
        lattice,
        delta: TAU * p.detuning_hz,
        loops: p.loops,
        echo_gap: p.echo_gap_us * 1e-6,
        compensate_echo_phase: p.compensate_echo_phase,
        compensation_frame: p.compensation_frame,
    }
}

fn simulation_model(m: &Model) -> Result<SimulationModel, CliError> {
    for (n, k) in [(m.cm_levels, "model.cm_levels"), (m.bm_levels, "model.bm_levels")] {
        require((2..=80).contains(&n), k, "must lie in 2..=80")?;
    }
    require(m.rel_tol > 0.0 && m.rel_tol <= 1e-3, "model.rel_tol", "must lie in (0, 1e-3]")?;
    require(m.thermal_cutoff > 0.0 && m.thermal_cutoff < 1.0, "model.thermal_cutoff", "must lie in (0, 1)")?;
    Ok(match m.kind {
        ModelKind::Analytic => SimulationModel::Analytic(match m.analytic_terms {
            AnalyticTerms::Full => LdModel::FULL,
            AnalyticTerms::Rotating => LdModel::ROTATING,
        }),
        ModelKind::Numeric => SimulationModel::Numeric(NumericOptions {
            space: FockSpace {
                n_cm: m.cm_levels,
                n_bm: m.bm_levels,
            },
            rel_tol: m.rel_tol,
        }),
    })
}

fn scan_deltas(s: &Scan) -> Result<Vec<(f64, f64)>, CliError> {
    finite(s.start_hz, "scan.start_hz")?;
    finite(s.stop_hz, "scan.stop_hz")?;
    positive(s.step_hz, "scan.step_hz")?;
    require(s.stop_hz >= s.start_hz, "scan.stop_hz", "must not be below scan.start_hz")?;
    let n = ((s.stop_hz - s.start_hz) / s.step_hz + 1e-9).floor() as usize + 1;
    require(n <= 10_000, "scan.step_hz", "scan may not exceed 10000 points")?;
    Ok((0..n)
        .map(|i| {
            let hz = s.start_hz + i as f64 * s.step_hz;
            (TAU * hz, hz)
        })
        .collect())
}

fn parity_phases(p: &Parity) -> Result<Vec<f64>, CliError> {
    finite(p.start_rad, "parity.start_rad")?;
    finite(p.stop_rad, "parity.stop_rad")?;
    require(p.stop_rad > p.start_rad, "parity.stop_rad", "must exceed parity.start_rad")?;
    require((3..=100_000).contains(&p.points), "parity.points", "must lie in 3..=100000")?;
    let step = (p.stop_rad - p.start_rad) / (p.points - 1) as f64;
    Ok((0..p.points).map(|i| p.start_rad + i as f64 * step).collect())
}

fn check_statistics(s: &Statistics, experiment: Experiment) -> Result<MixtureModel, CliError> {
    let m = MixtureModel {
        k0: s.k0,
        k1: s.k1,
        k2: s.k2,
    };
    require(m.validate().is_ok(), "statistics.k0", "detection means must satisfy k0 > k1 > k2 >= 0")?;
    require(s.shots >= 1, "statistics.shots", "must be at least 1")?;
    require(s.population_shots >= 1, "statistics.population_shots", "must be at least 1")?;
    require(
        s.n_boot >= otdf_core::statistics::bootstrap::MIN_REPLICATES,
        "statistics.n_boot",
        "must be at least 100",
    )?;
    require(
        (0.0..=0.75).contains(&s.injected_infidelity),
        "statistics.injected_infidelity",
        "must lie in [0, 0.75]",
    )?;
    match experiment {
        Experiment::FitHistogram => require(!s.histograms.is_empty(), "statistics.histograms", "needs at least one file")?,
        Experiment::Bootstrap => require(
            s.histograms.len() == s.statistic.dataset_count(),
            "statistics.histograms",
            &format!("statistic needs exactly {} files", s.statistic.dataset_count()),
        )?,
        _ => {}
    }
    Ok(m)
}

fn budget_inputs(b: &Budget, gate: &GateConfig) -> Result<BudgetInputs, CliError> {
    let mut modes = gate.modes();
    modes[0].nbar = b.cm_nbar;
    modes[1].nbar = b.bm_nbar;
    non_negative(b.cm_nbar, "budget.cm_nbar")?;
    non_negative(b.bm_nbar, "budget.bm_nbar")?;
    let tau_g = match b.tau_g_us {
        Some(t) => {
            non_negative(t, "budget.tau_g_us")?;
            t * 1e-6
        }
        None => 2.0 * gate.pulse.tau_total,
    };
    for (x, k) in [
        (b.delta_omega_hz, "budget.delta_omega_hz"),
        (b.pre_detect_delay_us, "budget.pre_detect_delay_us"),
        (b.detect_settle_us, "budget.detect_settle_us"),
        (b.detect_duration_us, "budget.detect_duration_us"),
        (b.scattering_error, "budget.scattering_error"),
        (b.measured_infidelity, "budget.measured_infidelity"),
    ] {
        non_negative(x, k)?;
    }
    positive(b.d_lifetime_s, "budget.d_lifetime_s")?;
    require(b.zeno_factor > 0.0 && b.zeno_factor <= 1.0, "budget.zeno_factor", "must lie in (0, 1]")?;
    if let Some([lo, hi]) = b.measured_infidelity_ci {
        require(lo >= 0.0 && lo <= hi && hi.is_finite(), "budget.measured_infidelity_ci", "needs 0 <= lo <= hi")?;
    }
    require(gate.delta != 0.0, "physics.detuning_hz", "must be nonzero for the budget")?;
    Ok(BudgetInputs {
        modes,
        delta: gate.delta,
        tau_g,
        loops: gate.loops,
        delta_omega: TAU * b.delta_omega_hz,
        d_lifetime: b.d_lifetime_s,
        pre_detect_delay: b.pre_detect_delay_us * 1e-6,
        detect_settle: b.detect_settle_us * 1e-6,
        detect_duration: b.detect_duration_us * 1e-6,
        zeno_factor: b.zeno_factor,
        scattering_error: b.scattering_error,
        measured_infidelity: b.measured_infidelity,
        measured_infidelity_ci: b.measured_infidelity_ci.map(|[a, c]| (a, c)),
    })
}

fn spacing(c: &Calibration) -> Result<(SpacingOptions, (f64, f64)), CliError> {
    let [lo, hi] = c.bracket_rad;
    require(lo.is_finite() && hi.is_finite() && lo < hi, "calibration.bracket_rad", "needs finite lo < hi")?;
    require((3..=10_000).contains(&c.scan_points), "calibration.scan_points", "must lie in 3..=10000")?;
    positive(c.omega_scale, "calibration.omega_scale")?;
    for (n, k) in [(c.cm_levels, "calibration.cm_levels"), (c.bm_levels, "calibration.bm_levels")] {
        require((2..=80).contains(&n), k, "must lie in 2..=80")?;
    }
    Ok((
        SpacingOptions {
            omega_scale: c.omega_scale,
            space: FockSpace {
                n_cm: c.cm_levels,
                n_bm: c.bm_levels,
            },
            ..SpacingOptions::default()
        },
        (lo, hi),
    ))
}

/// Parses, checks and resolves a configuration document. Relative histogram paths are
/// joined onto `base_dir` when one is given.
pub fn validate_config(text: &str, base_dir: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, CliError> {
    let raw = parse_document(text)?;
    let schema = known_keys();
    let mut all = Vec::new();
    leaf_paths(&schema, "", &mut all);
    check_keys(&raw, &schema, "", &all)?;
    let mut doc: ConfigDocument = serde_path_to_error::deserialize(raw).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(if key == "." { "" } else { &key }, e.into_inner().to_string())
    })?;

    if let Some(p) = &overrides.preset {
        doc.preset = p.clone();
    }
    require(doc.preset == PRESET, "preset", &format!("the only available preset is `{PRESET}`"))?;
    if let Some(s) = overrides.seed {
        doc.seed = s;
    }
    if let Some(d) = &overrides.out_dir {
        doc.output.dir = d.clone();
    }
    let experiment = match (doc.experiment, overrides.experiment) {
        (Some(a), Some(b)) if a != b => {
            return Err(CliError::config(
                "experiment",
                format!("document names `{}` but the subcommand is `{}`", a.name(), b.name()),
            ))
        }
        (a, b) => b.or(a).ok_or_else(|| CliError::config("experiment", "missing"))?,
    };
    doc.experiment = Some(experiment);
    if let Some(base) = base_dir {
        for h in doc.statistics.histograms.iter_mut() {
            if h.is_relative() {
                *h = base.join(&*h);
            }
        }
    }
    if doc.budget.tau_g_us.is_none() {
        doc.budget.tau_g_us = Some(2.0 * doc.physics.odf_duration_us);
    }

    check_physics(&doc.physics)?;
    let mut gate = gate_config(&doc.physics);
    gate.validate().map_err(|e| CliError::config("physics", e.to_string()))?;
    let model = simulation_model(&doc.model)?;
    if doc.physics.calibrate_amplitude {
        let terms = match doc.model.analytic_terms {
            AnalyticTerms::Full => LdModel::FULL,
            AnalyticTerms::Rotating => LdModel::ROTATING,
        };
        gate = otdf_core::gate::calibrate_amplitude(&gate, terms)?;
    }
    let initial = if doc.physics.cm_nbar > 0.0 || doc.physics.bm_nbar > 0.0 {
        InitialCondition::Thermal {
            weight_cutoff: doc.model.thermal_cutoff,
        }
    } else {
        InitialCondition::Ground
    };
    let scan_deltas = scan_deltas(&doc.scan)?;
    let parity_phases = parity_phases(&doc.parity)?;
    let mixture = check_statistics(&doc.statistics, experiment)?;
    let budget = budget_inputs(&doc.budget, &gate)?;
    let (spacing, spacing_bracket) = spacing(&doc.calibration)?;
    Ok(RunConfig {
        experiment,
        seed: doc.seed,
        gate,
        model,
        initial,
        scan_deltas,
        parity_phases,
        mixture,
        budget,
        spacing,
        spacing_bracket,
        out_dir: doc.output.dir.clone(),
        format: doc.output.format,
        document: doc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(text: &str) -> RunConfig {
        validate_config(text, None, &Overrides::default()).unwrap()
    }

    fn err(text: &str) -> CliError {
        validate_config(text, None, &Overrides::default()).unwrap_err()
    }

    #[test]
    fn empty_physics_takes_the_preset() {
        let rc = ok("experiment = \"bell-run\"\n[physics]\n");
        let g = rc.gate;
        assert!((g.delta - TAU * 114e3).abs() < 1e-9);
        assert_eq!(g.pulse.tau_total, 12e-6);
        assert!((g.pulse.tau_ramp - 3.2e-6).abs() < 1e-18);
        assert_eq!((g.cm.eta, g.bm.eta), (0.083, 0.063));
        let preset = GateConfig::ca40_2021();
        assert!((g.pulse.omega_peak - preset.pulse.omega_peak).abs() < 1e-9 * preset.pulse.omega_peak);
        assert!((g.cm.omega - preset.cm.omega).abs() < 1e-6 && (g.bm.omega - preset.bm.omega).abs() < 1e-6);
        assert!((g.echo_delay() - preset.echo_delay()).abs() < 1e-18);
    }

    #[test]
    fn negative_duration_names_the_field() {
        match err("experiment = \"bell-run\"\n[physics]\nodf_duration_us = -3\n") {
            CliError::Config { key, .. } => assert_eq!(key, "physics.odf_duration_us"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn misspelled_key_gets_a_suggestion() {
        match err("experiment = \"bell-run\"\n[physics]\ndetunning = 1e5\n") {
            CliError::Config { key, suggestion, .. } => {
                assert_eq!(key, "physics.detunning");
                assert_eq!(suggestion.as_deref(), Some("detuning_hz"));
            }
            e => panic!("{e:?}"),
        }
        match err("experiment = \"bell-run\"\ndetunning = 1e5\n") {
            CliError::Config { suggestion, .. } => assert_eq!(suggestion.as_deref(), Some("physics.detuning_hz")),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn wrong_types_name_the_key() {
        match err("experiment = \"bell-run\"\n[scan]\nstep_hz = \"fast\"\n") {
            CliError::Config { key, .. } => assert_eq!(key, "scan.step_hz"),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn resolved_document_revalidates_to_the_same_config() {
        let rc = ok("experiment = \"detuning-scan\"\nseed = 9\n[physics]\ndetuning_hz = 101234.5\n[scan]\nstep_hz = 5e3\n");
        let json = serde_json::to_string(&rc.document).unwrap();
        assert_eq!(validate_config(&json, None, &Overrides::default()).unwrap(), rc);
    }

    #[test]
    fn subcommand_and_document_must_agree() {
        let o = Overrides {
            experiment: Some(Experiment::Budget),
            ..Default::default()
        };
        assert!(validate_config("experiment = \"bell-run\"\n", None, &o).is_err());
        assert_eq!(validate_config("", None, &o).unwrap().experiment, Experiment::Budget);
        assert!(validate_config("", None, &Overrides::default()).is_err());
    }

    #[test]
    fn bootstrap_needs_matching_histograms() {
        let e = err("experiment = \"bootstrap\"\n[statistics]\nhistograms = [\"a.txt\"]\n");
        assert!(matches!(e, CliError::Config { ref key, .. } if key == "statistics.histograms"));
    }

    #[test]
    fn scan_grid_includes_both_ends() {
        let rc = ok("experiment = \"detuning-scan\"\n");
        assert_eq!(rc.scan_deltas.len(), 26);
        assert_eq!(rc.scan_deltas[0].1, 90e3);
        assert_eq!(rc.scan_deltas[25].1, 140e3);
    }
}
