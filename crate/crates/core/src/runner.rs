//! Experiment configuration, execution and artifact writing.
//!
//! A run is driven by one JSON document: an `experiment` tag choosing the
//! study, a master `seed`, an optional output base name and a `params`
//! object holding the study's own config. Executing it emits a long-format
//! metric CSV and a resolved-config sidecar; rerunning from the sidecar
//! reproduces the CSV byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::experiments::aec::{run_aec, AecConfig};
use crate::experiments::classify::{run_classify, ClassifyConfig};
use crate::experiments::prediction::{run_mg_prediction, MgStudyConfig};
use crate::experiments::sysid::{run_sweep, run_sysid, SweepConfig, SysIdConfig};
use crate::experiments::{config_err, Curve, ExperimentError, Result};

/// Canonical CSV number format: nine significant digits in scientific
/// notation with a `.` decimal separator, `nan`/`inf` spelled out.
pub fn fmt_csv(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.8e}")
    }
}

/// The study selected by a config's `experiment` tag.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentKind {
    Sysid(SysIdConfig),
    Aec(AecConfig),
    Mg(MgStudyConfig),
    Classify(ClassifyConfig),
    Sweep(SweepConfig),
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sysid(_) => "sysid",
            ExperimentKind::Aec(_) => "aec",
            ExperimentKind::Mg(_) => "mg",
            ExperimentKind::Classify(_) => "classify",
            ExperimentKind::Sweep(_) => "sweep",
        }
    }

    /// Name of the metric column this study emits.
    pub fn metric(&self) -> &'static str {
        match self {
            ExperimentKind::Sysid(_) => "msd_db",
            ExperimentKind::Aec(_) => "erle_db",
            ExperimentKind::Mg(_) => "test_mse",
            ExperimentKind::Classify(_) => "accuracy",
            ExperimentKind::Sweep(_) => "h_ave",
        }
    }
}

/// One complete run description. The JSON layout is
/// `{"experiment": kind, "seed": u64, "output": name?, "params": {…}}`;
/// unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    /// Base name of emitted artifacts; defaults to the experiment tag.
    pub output: Option<String>,
}

const EXPERIMENT_TAGS: &str = "sysid, aec, mg, classify, sweep";

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| config_err("<document>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let mut obj = match value {
            Value::Object(map) => map,
            other => {
                return Err(config_err(
                    "<document>",
                    format!("expected a JSON object, got {other}"),
                ))
            }
        };
        let tag = match obj.remove("experiment") {
            Some(Value::String(s)) => s,
            Some(other) => {
                return Err(config_err(
                    "experiment",
                    format!("expected a string tag, got {other}"),
                ))
            }
            None => {
                return Err(config_err(
                    "experiment",
                    format!("missing tag; expected one of {EXPERIMENT_TAGS}"),
                ))
            }
        };
        let seed = match obj.remove("seed") {
            None => 0,
            Some(v) => serde_json::from_value(v)
                .map_err(|e| config_err("seed", e.to_string()))?,
        };
        let output = match obj.remove("output") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                serde_json::from_value(v).map_err(|e| config_err("output", e.to_string()))?,
            ),
        };
        let params = obj.remove("params").unwrap_or_else(|| json!({}));
        if let Some(extra) = obj.keys().next() {
            return Err(config_err(
                extra.clone(),
                "unknown top-level key (expected experiment, seed, output, params)",
            ));
        }
        let wrap = |e: serde_json::Error| config_err("params", e.to_string());
        let kind = match tag.as_str() {
            "sysid" => ExperimentKind::Sysid(serde_json::from_value(params).map_err(wrap)?),
            "aec" => ExperimentKind::Aec(serde_json::from_value(params).map_err(wrap)?),
            "mg" => ExperimentKind::Mg(serde_json::from_value(params).map_err(wrap)?),
            "classify" => ExperimentKind::Classify(serde_json::from_value(params).map_err(wrap)?),
            "sweep" => ExperimentKind::Sweep(serde_json::from_value(params).map_err(wrap)?),
            other => {
                return Err(config_err(
                    "experiment",
                    format!("unknown kind `{other}`; expected one of {EXPERIMENT_TAGS}"),
                ))
            }
        };
        Ok(Self { kind, seed, output })
    }

    pub fn to_json(&self) -> Value {
        let params = match &self.kind {
            ExperimentKind::Sysid(c) => serde_json::to_value(c),
            ExperimentKind::Aec(c) => serde_json::to_value(c),
            ExperimentKind::Mg(c) => serde_json::to_value(c),
            ExperimentKind::Classify(c) => serde_json::to_value(c),
            ExperimentKind::Sweep(c) => serde_json::to_value(c),
        }
        .expect("config structs serialize infallibly");
        let mut doc = json!({
            "experiment": self.kind.name(),
            "seed": self.seed,
            "params": params,
        });
        if let Some(out) = &self.output {
            doc["output"] = json!(out);
        }
        doc
    }

    /// Base name of the emitted artifacts.
    pub fn output_base(&self) -> &str {
        self.output.as_deref().unwrap_or_else(|| self.kind.name())
    }

    /// The config actually executed, with seed-derived choices materialized
    /// (the identified system's true weights) so the sidecar pins the entire
    /// run.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        if let ExperimentKind::Sysid(c) = &mut out.kind {
            c.true_weights = Some(c.resolve_true_weights(self.seed));
        }
        out
    }
}

/// Executes the configured study and returns its metric name plus curves.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<Curve>> {
    match &cfg.kind {
        ExperimentKind::Sysid(c) => Ok(run_sysid(c, cfg.seed)?.curves),
        ExperimentKind::Aec(c) => Ok(run_aec(c, cfg.seed)?.curves),
        ExperimentKind::Mg(c) => run_mg_prediction(c, cfg.seed),
        ExperimentKind::Classify(c) => {
            let trained = run_classify(c, cfg.seed)?;
            let mut curves = Vec::with_capacity(trained.len() * 2);
            for t in trained {
                curves.push(t.train_curve);
                curves.push(t.test_curve);
            }
            Ok(curves)
        }
        ExperimentKind::Sweep(c) => run_sweep(c, cfg.seed),
    }
}

/// Writes curves in long format: `iteration,algorithm,<metric>`.
pub fn write_curves_csv<W: Write>(
    mut out: W,
    metric: &str,
    curves: &[Curve],
) -> std::io::Result<()> {
    writeln!(out, "iteration,algorithm,{metric}")?;
    for curve in curves {
        for &(iteration, value) in &curve.points {
            writeln!(out, "{iteration},{},{}", curve.algorithm, fmt_csv(value))?;
        }
    }
    Ok(())
}

/// Artifacts and outcomes of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub csv: PathBuf,
    pub sidecar: PathBuf,
    pub curves: usize,
    /// Algorithms whose curves were truncated, with the failing iteration.
    pub diverged: Vec<(String, u64)>,
}

/// Runs a config and writes `<base>.csv` plus `<base>.config.json` under
/// `out_dir`. Divergence still produces both artifacts (with truncated
/// curves); the report carries the failures so callers can exit nonzero.
pub fn run_config(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunReport> {
    let resolved = cfg.resolved();
    let curves = execute(&resolved)?;
    std::fs::create_dir_all(out_dir)?;
    let base = resolved.output_base();
    let csv_path = out_dir.join(format!("{base}.csv"));
    let sidecar_path = out_dir.join(format!("{base}.config.json"));

    let mut csv = Vec::new();
    write_curves_csv(&mut csv, resolved.kind.metric(), &curves)?;
    std::fs::write(&csv_path, csv)?;

    let mut sidecar = serde_json::to_string_pretty(&resolved.to_json())
        .expect("json values serialize infallibly");
    sidecar.push('\n');
    std::fs::write(&sidecar_path, sidecar)?;

    let diverged = curves
        .iter()
        .filter_map(|c| c.diverged.map(|it| (c.algorithm.clone(), it)))
        .collect();
    Ok(RunReport {
        csv: csv_path,
        sidecar: sidecar_path,
        curves: curves.len(),
        diverged,
    })
}

/// Error for a run whose artifacts were written but whose curves truncated.
pub fn divergence_error(report: &RunReport) -> Option<ExperimentError> {
    report
        .diverged
        .first()
        .map(|(algorithm, iteration)| ExperimentError::Diverged {
            algorithm: algorithm.clone(),
            iteration: *iteration,
        })
}

/// Human-readable catalogue of every runnable experiment.
pub fn list_experiments() -> String {
    let entries = [
        (
            "sysid",
            "Monte Carlo system identification: adaptive filters track a \
             seeded unit-norm unknown system under configurable noise; emits \
             trial-averaged MSD (dB) per iteration.",
            "params: taps, trials, iterations, noise, true_weights?, \
             algorithms[{algorithm, step, window, mix, epsilon}]",
        ),
        (
            "aec",
            "Synthetic acoustic echo cancellation: speech-like far-end \
             signal through a decaying echo path, optional double-talk \
             burst gated by a Geigel-style detector; emits ERLE (dB) per \
             recorded sample.",
            "params: sample_rate, duration, echo_taps, echo_decay, \
             echo_gain, envelope_period, background_sigma, double_talk?, \
             detector, smoothing, record_every, algorithms[…]",
        ),
        (
            "mg",
            "Chaotic time-series prediction: delay-embedded Mackey–Glass \
             samples train kernel recursive and linear models, optionally \
             with noisy training targets; emits clean test MSE per \
             checkpoint.",
            "params: series{delay, step, sample_every, history, length}, \
             washout, train, test, embed, noise?, eval_every, \
             algorithms[{kind: kernel|linear, …}]",
        ),
        (
            "classify",
            "Supervised classification: one MLP per configured cost trained \
             from a shared seeded initialization on synthetic clusters, IDX \
             or CSV data; emits train/test accuracy per epoch.",
            "params: data{source}, hidden, epochs, window, mode, \
             costs[{cost, rate, mix?}]",
        ),
        (
            "sweep",
            "Quantization-threshold sweep: reruns the quantized filter \
             across epsilon values on one noise realization; emits the mean \
             codebook size per full window (H_ave) per epsilon.",
            "params: taps, iterations, trials, noise, epsilons, algorithm",
        ),
    ];
    let mut out = String::from("available experiments:\n");
    for (name, what, params) in entries {
        out.push_str(&format!("\n{name}\n  {what}\n  {params}\n"));
    }
    out
}
