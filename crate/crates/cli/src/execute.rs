//! One function per experiment. Each returns a table and a JSON summary; [`execute`]
//! writes them, plus any extra artifacts, under the output directory.

use std::f64::consts::{FRAC_PI_4, TAU};
use std::fs;
use std::path::{Path, PathBuf};

use otdf_core::budget::assemble_budget;
use otdf_core::calibration::{calibrate_spacing, spacing_scan};
use otdf_core::gate::{
    analysis_pulse, bell_sequence, detuning_scan, parity_scan, prepare_sequence, solve_gate_detuning, Populations,
    SequenceSegment,
};
use otdf_core::statistics::io::histogram_to_json;
use otdf_core::statistics::{
    bell_fidelity, bootstrap, depolarize, fit_sinusoid, mle_populations, parity_stats, parse_histogram,
    sample_counts, Dataset,
};
use serde_json::{json, Value};

use crate::config::{OutputFormat, RunConfig};
use crate::error::CliError;

pub const TOOL: &str = "otdf";

/// Rectangular result with one header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Dot-decimal CSV; floats use the shortest representation that round-trips.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        };
        w.write_record(&self.columns).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell_text)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: "<csv>".into(),
            message: e.to_string(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn to_json(&self) -> Value {
        json!({ "columns": self.columns, "rows": self.rows })
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => x.to_string(),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

/// Finite floats become numbers; anything else is rejected as a numeric failure.
fn num(x: f64) -> Result<Value, CliError> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| CliError::Core(otdf_core::Error::Domain(format!("non-finite output value {x}"))))
}

/// In-memory result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    /// Extra files, relative to the output directory.
    pub files: Vec<(String, String)>,
}

fn p1_of(p: &Populations) -> f64 {
    p.p1.clamp(0.0, 1.0)
}

fn detuning(rc: &RunConfig) -> Result<Outcome, CliError> {
    let deltas: Vec<f64> = rc.scan_deltas.iter().map(|d| d.0).collect();
    let rows = detuning_scan(&deltas, &rc.gate, &rc.model, &rc.initial)?;
    let mut table = Table::new(&["delta_hz", "p0", "p1", "p2"]);
    for (row, &(_, hz)) in rows.iter().zip(&rc.scan_deltas) {
        table.push(vec![num(hz)?, num(row.p0)?, num(row.p1)?, num(row.p2)?]);
    }
    let worst = rows
        .iter()
        .zip(&rc.scan_deltas)
        .max_by(|a, b| a.0.p1.total_cmp(&b.0.p1))
        .expect("scan has at least one point");
    // linear interpolation of every sign change of p0 - p2
    let mut crossings = Vec::new();
    for (w, hz) in rows.windows(2).zip(rc.scan_deltas.windows(2)) {
        let (a, b) = (w[0].p0 - w[0].p2, w[1].p0 - w[1].p2);
        if a == 0.0 {
            crossings.push(num(hz[0].1)?);
        } else if a * b < 0.0 {
            crossings.push(num(hz[0].1 + (hz[1].1 - hz[0].1) * a / (a - b))?);
        }
    }
    let solved = solve_gate_detuning(&rc.gate, rc.gate.loops)?;
    Ok(Outcome {
        table,
        summary: json!({
            "max_p1": { "delta_hz": num(worst.1 .1)?, "p1": num(worst.0.p1)? },
            "p0_p2_crossings_hz": crossings,
            "solved_detuning_hz": num(solved / TAU)?,
        }),
        files: Vec::new(),
    })
}

fn parity(rc: &RunConfig) -> Result<Outcome, CliError> {
    let pts = parity_scan(&rc.parity_phases, &rc.gate, &rc.model, &rc.initial)?;
    let mut table = Table::new(&["phi_rad", "parity"]);
    for &(phi, p) in &pts {
        table.push(vec![num(phi)?, num(p)?]);
    }
    let fit = fit_sinusoid(&pts, 2.0)?;
    Ok(Outcome {
        table,
        summary: json!({
            "fit_frequency": 2.0,
            "amplitude": num(fit.amplitude)?,
            "phase_rad": num(fit.phase)?,
            "offset": num(fit.offset)?,
            "rms_residual": num(fit.rms_residual)?,
        }),
        files: Vec::new(),
    })
}

const BELL_FILES: [&str; 3] = ["populations.json", "parity_quarter.json", "parity_three_quarter.json"];

fn bell_run(rc: &RunConfig) -> Result<Outcome, CliError> {
    let prepared = prepare_sequence(&bell_sequence(&rc.gate), &rc.gate, &rc.model, &rc.initial)?;
    let analysed = |phi: f64| {
        let SequenceSegment::Rotation { theta, phi: axis } = analysis_pulse(phi) else {
            unreachable!("analysis pulse is a rotation")
        };
        prepared.rotated(theta, axis)
    };
    let states = [prepared.populations(), analysed(FRAC_PI_4), analysed(3.0 * FRAC_PI_4)];
    // depolarizing weight lambda lowers the Bell fidelity by 3 lambda / 4
    let lambda = 4.0 * rc.document.statistics.injected_infidelity / 3.0;
    let st = &rc.document.statistics;
    let shots = [st.population_shots, st.shots, st.shots];
    let mut fits = Vec::with_capacity(3);
    let mut truth = Vec::with_capacity(3);
    let mut files = Vec::new();
    for i in 0..3 {
        let p = depolarize([states[i].p0, states[i].p1, states[i].p2].map(|x| x.clamp(0.0, 1.0)), lambda);
        let seed = rc.seed.wrapping_mul(3).wrapping_add(i as u64);
        let hist = sample_counts(p, &rc.mixture, shots[i], seed)?;
        fits.push(mle_populations(&hist, &rc.mixture)?);
        files.push((BELL_FILES[i].to_string(), histogram_to_json(&hist, Some(rc.mixture))));
        truth.push(p);
    }
    let true_pop = Populations { p0: truth[0][0], p1: truth[0][1], p2: truth[0][2] };
    let sim_stats = parity_stats(truth[1][1].clamp(0.0, 1.0), truth[2][1].clamp(0.0, 1.0))?;
    let est_stats = parity_stats(fits[1].p1, fits[2].p1)?;
    let sim_even = (true_pop.p0 + true_pop.p2).clamp(0.0, 1.0);
    let est_even = fits[0].p0 + fits[0].p2;
    let sim_f = bell_fidelity(sim_even, sim_stats.amplitude.clamp(0.0, 1.0))?;
    let est_f = bell_fidelity(est_even.clamp(0.0, 1.0), est_stats.amplitude.clamp(0.0, 1.0))?;
    let rows: [(&str, f64, f64); 8] = [
        ("p0", true_pop.p0, fits[0].p0),
        ("p1", p1_of(&true_pop), fits[0].p1),
        ("p2", true_pop.p2, fits[0].p2),
        ("p1_quarter", truth[1][1], fits[1].p1),
        ("p1_three_quarter", truth[2][1], fits[2].p1),
        ("even_population", sim_even, est_even),
        ("parity_amplitude", sim_stats.amplitude, est_stats.amplitude),
        ("fidelity", sim_f, est_f),
    ];
    let mut table = Table::new(&["quantity", "simulated", "estimated"]);
    for (name, s, e) in rows {
        table.push(vec![json!(name), num(s)?, num(e)?]);
    }
    Ok(Outcome {
        table,
        summary: json!({
            "simulated_fidelity": num(sim_f)?,
            "estimated_fidelity": num(est_f)?,
            "injected_infidelity": num(st.injected_infidelity)?,
            "histograms": BELL_FILES,
        }),
        files,
    })
}

fn load(path: &Path, rc: &RunConfig) -> Result<Dataset, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let loaded = parse_histogram(&text)?;
    Ok(Dataset {
        histogram: loaded.histogram,
        model: loaded.model.unwrap_or(rc.mixture),
    })
}

fn fit_histograms(rc: &RunConfig) -> Result<Outcome, CliError> {
    let mut table = Table::new(&["file", "shots", "p0", "p1", "p2", "log_likelihood", "on_boundary"]);
    for path in &rc.document.statistics.histograms {
        let d = load(path, rc)?;
        let fit = mle_populations(&d.histogram, &d.model)?;
        table.push(vec![
            json!(path.display().to_string()),
            json!(d.histogram.shots()),
            num(fit.p0)?,
            num(fit.p1)?,
            num(fit.p2)?,
            num(fit.log_likelihood)?,
            json!(fit.on_boundary),
        ]);
    }
    Ok(Outcome {
        table,
        summary: json!({ "files": rc.document.statistics.histograms.len() }),
        files: Vec::new(),
    })
}

fn run_bootstrap(rc: &RunConfig) -> Result<Outcome, CliError> {
    let st = &rc.document.statistics;
    let datasets = st.histograms.iter().map(|p| load(p, rc)).collect::<Result<Vec<_>, _>>()?;
    let s = bootstrap(&datasets, st.n_boot, rc.seed, st.statistic)?;
    let name = serde_json::to_value(st.statistic).expect("statistic serializes");
    let mut table = Table::new(&["statistic", "point", "mean", "ci68_lo", "ci68_hi", "bias", "replicates", "dropped"]);
    table.push(vec![
        name.clone(),
        num(s.point)?,
        num(s.mean)?,
        num(s.ci68.0)?,
        num(s.ci68.1)?,
        num(s.bias)?,
        json!(s.replicates),
        json!(s.dropped),
    ]);
    Ok(Outcome {
        table,
        summary: json!({
            "statistic": name,
            "point": num(s.point)?,
            "mean": num(s.mean)?,
            "ci68": [num(s.ci68.0)?, num(s.ci68.1)?],
            "bias": num(s.bias)?,
            "replicates": s.replicates,
            "dropped": s.dropped,
        }),
        files: Vec::new(),
    })
}

fn budget(rc: &RunConfig) -> Result<Outcome, CliError> {
    let b = assemble_budget(&rc.budget)?;
    let mut table = Table::new(&["source", "contribution"]);
    for r in &b.rows {
        table.push(vec![json!(r.source), num(r.contribution)?]);
    }
    table.push(vec![json!("Dephasing bound"), num(b.dephasing_bound)?]);
    if let Some(edge) = b.dephasing_bound_ci_edge {
        table.push(vec![json!("Dephasing bound (CI edge)"), num(edge)?]);
    }
    let summary = serde_json::from_str::<Value>(&b.to_json()).expect("budget json is valid");
    Ok(Outcome {
        table,
        summary: json!({ "total_known": num(b.total_known())?, "budget": summary }),
        files: vec![("budget.txt".into(), b.to_table())],
    })
}

fn spacing(rc: &RunConfig) -> Result<Outcome, CliError> {
    let (lo, hi) = rc.spacing_bracket;
    let n = rc.document.calibration.scan_points;
    let intrinsic = rc.gate.lattice.mismatch();
    let corrections: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let phases: Vec<f64> = corrections.iter().map(|c| intrinsic - c).collect();
    let scan = spacing_scan(&phases, &rc.gate, &rc.spacing)?;
    let mut table = Table::new(&["correction_rad", "mismatch_rad", "excitation"]);
    for (c, r) in corrections.iter().zip(&scan) {
        table.push(vec![num(*c)?, num(r.mismatch_phase)?, num(r.excitation)?]);
    }
    let estimate = calibrate_spacing(rc.spacing_bracket, &rc.gate, &rc.spacing)?;
    Ok(Outcome {
        table,
        summary: json!({
            "configured_mismatch_rad": num(intrinsic)?,
            "estimated_mismatch_rad": num(estimate)?,
        }),
        files: Vec::new(),
    })
}

/// Runs the configured experiment without touching the filesystem (except for reading
/// input histograms).
pub fn compute(rc: &RunConfig) -> Result<Outcome, CliError> {
    use crate::config::Experiment::*;
    match rc.experiment {
        DetuningScan => detuning(rc),
        ParityScan => parity(rc),
        BellRun => bell_run(rc),
        FitHistogram => fit_histograms(rc),
        Bootstrap => run_bootstrap(rc),
        Budget => budget(rc),
        CalibrateSpacing => spacing(rc),
    }
}

/// Sidecar document: enough to rerun the experiment bit-identically.
pub fn sidecar(rc: &RunConfig, outcome: &Outcome, artifacts: &[String]) -> Value {
    let mut v = json!({
        "tool": TOOL,
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": rc.experiment.name(),
        "seed": rc.seed,
        "config": rc.document,
        "summary": outcome.summary,
        "artifacts": artifacts,
    });
    if rc.format == OutputFormat::Json {
        v["table"] = outcome.table.to_json();
    }
    v
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs the experiment and writes its artifacts. Returns the written paths, sidecar last.
pub fn execute(rc: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let outcome = compute(rc)?;
    fs::create_dir_all(&rc.out_dir).map_err(|e| CliError::io(&rc.out_dir, e))?;
    let name = rc.experiment.name();
    let mut artifacts = Vec::new();
    let mut written = Vec::new();
    if rc.format == OutputFormat::Csv {
        let file = format!("{name}.csv");
        let path = rc.out_dir.join(&file);
        write(&path, &outcome.table.to_csv()?)?;
        artifacts.push(file);
        written.push(path);
    }
    for (file, text) in &outcome.files {
        let path = rc.out_dir.join(file);
        write(&path, text)?;
        artifacts.push(file.clone());
        written.push(path);
    }
    let path = rc.out_dir.join(format!("{name}.json"));
    let doc = sidecar(rc, &outcome, &artifacts);
    write(&path, &(serde_json::to_string_pretty(&doc).expect("sidecar serializes") + "\n"))?;
    written.push(path);
    Ok(written)
}
