//! Monte-Carlo comparison of aggregation schemes.
//!
//! Every trial draws one [`RawDraws`] and evaluates every (scheme, K) pair on
//! it, so the comparisons use common random numbers. Master-side decoding
//! cost is not modelled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError};
use crate::rng::Streams;
use crate::runtime::RawDraws;
use crate::schemes::{Scheme, SchemeSpec};
use crate::stats::Summary;
use crate::topology::{Tolerance, Topology};

pub const GAIN_DEFINITION: &str = "gain(a, b) = 1 - mean_a / mean_b";
pub const MODEL_NOTE: &str = "per-iteration time only; master decoding cost is ignored";

/// One scheme at one `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KResult {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
    /// Per-worker load `D`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub load: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_comm_load: Option<usize>,
    /// Iteration time statistics (ms).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub scheme: String,
    pub spec: SchemeSpec,
    pub results: Vec<KResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub gain_definition: String,
    pub model_note: String,
    pub seed: u64,
    pub trials: u64,
    pub topology: Topology,
    pub k_values: Vec<usize>,
    pub schemes: Vec<SchemeRow>,
}

/// Raw per-trial iteration times of one (scheme, K) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub scheme: String,
    pub k: usize,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub report: ExperimentReport,
    pub samples: Vec<SampleSeries>,
}

#[derive(Serialize)]
struct SampleLine<'a> {
    scheme: &'a str,
    #[serde(rename = "K")]
    k: usize,
    trial: usize,
    #[serde(rename = "T_tol_ms")]
    t_tol_ms: f64,
}

impl Experiment {
    /// One JSON object per sample.
    pub fn samples_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            for (trial, &t) in s.samples.iter().enumerate() {
                let line = SampleLine { scheme: &s.scheme, k: s.k, trial, t_tol_ms: t };
                out.push_str(&serde_json::to_string(&line).expect("sample serializes"));
                out.push('\n');
            }
        }
        out
    }

    /// Columns `scheme,K,trial,T_tol_ms`.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("scheme,K,trial,T_tol_ms\n");
        for s in &self.samples {
            for (trial, t) in s.samples.iter().enumerate() {
                out.push_str(&format!("{},{},{},{:?}\n", s.scheme, s.k, trial, t));
            }
        }
        out
    }
}

/// Runs the configured sweep. Build failures become error entries.
pub fn run(config: &Config) -> Result<Experiment, ConfigError> {
    let profiles = config.validate()?;
    let topology = &config.topology;
    let specs = config.schemes();
    let k_values = config.k_values();
    let trials = config.experiment.trials;

    let built: Vec<Vec<Result<Scheme, String>>> = specs
        .iter()
        .map(|spec| {
            k_values
                .iter()
                .map(|&k| Scheme::build(spec, topology, &profiles, k, config.seed).map_err(|e| e.to_string()))
                .collect()
        })
        .collect();
    let live: Vec<&Scheme> = built.iter().flatten().filter_map(|b| b.as_ref().ok()).collect();

    let streams = Streams::new(config.seed);
    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let draws = RawDraws::sample(topology, &profiles, &streams, trial);
            live.iter().map(|s| s.iteration_time(&profiles, &draws)).collect()
        })
        .collect();

    let mut column = 0;
    let mut samples = Vec::new();
    let mut rows = Vec::with_capacity(specs.len());
    for (spec, per_k) in specs.iter().zip(&built) {
        let name = spec.kind.name().to_string();
        let mut results = Vec::with_capacity(k_values.len());
        for (&k, b) in k_values.iter().zip(per_k) {
            match b {
                Ok(scheme) => {
                    let xs: Vec<f64> = per_trial.iter().map(|row| row[column]).collect();
                    column += 1;
                    results.push(KResult {
                        k,
                        tolerance: Some(scheme.tolerance),
                        load: Some(scheme.load),
                        master_comm_load: Some(scheme.master_comm_load()),
                        stats: Some(Summary::of(&xs)),
                        error: None,
                    });
                    samples.push(SampleSeries { scheme: name.clone(), k, samples: xs });
                }
                Err(e) => results.push(KResult {
                    k,
                    tolerance: spec.tolerance,
                    load: None,
                    master_comm_load: None,
                    stats: None,
                    error: Some(e.clone()),
                }),
            }
        }
        rows.push(SchemeRow { scheme: name, spec: spec.clone(), results });
    }
    Ok(Experiment {
        report: ExperimentReport {
            gain_definition: GAIN_DEFINITION.into(),
            model_note: MODEL_NOTE.into(),
            seed: config.seed,
            trials,
            topology: topology.clone(),
            k_values,
            schemes: rows,
        },
        samples,
    })
}

/// `1 - a/b`.
pub fn gain(a: f64, b: f64) -> f64 {
    1.0 - a / b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub scheme: String,
    pub baseline: String,
    pub gain: f64,
    /// `|mean - mean_baseline| > 2 sqrt(se² + se_baseline²)`.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub k: usize,
    pub gain_definition: String,
    /// Scheme names by increasing mean iteration time.
    pub ranking: Vec<String>,
    pub gains: Vec<GainRow>,
}

/// Pairwise gains at each `K`, over schemes that produced statistics.
pub fn compare_table(report: &ExperimentReport) -> Vec<ComparisonTable> {
    report
        .k_values
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            let mut entries: Vec<(&str, &Summary)> = report
                .schemes
                .iter()
                .filter_map(|r| r.results.get(col).and_then(|x| x.stats.as_ref()).map(|s| (r.scheme.as_str(), s)))
                .collect();
            let mut gains = Vec::new();
            for &(a, sa) in &entries {
                for &(b, sb) in &entries {
                    if a == b {
                        continue;
                    }
                    let se = (sa.std_error.powi(2) + sb.std_error.powi(2)).sqrt();
                    gains.push(GainRow {
                        scheme: a.into(),
                        baseline: b.into(),
                        gain: gain(sa.mean, sb.mean),
                        significant: (sa.mean - sb.mean).abs() > 2.0 * se,
                    });
                }
            }
            entries.sort_by(|x, y| x.1.mean.total_cmp(&y.1.mean));
            ComparisonTable {
                k,
                gain_definition: GAIN_DEFINITION.into(),
                ranking: entries.iter().map(|e| e.0.to_string()).collect(),
                gains,
            }
        })
        .collect()
}

impl ComparisonTable {
    pub fn gain_of(&self, scheme: &str, baseline: &str) -> Option<&GainRow> {
        self.gains.iter().find(|g| g.scheme == scheme && g.baseline == baseline)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("K,scheme,baseline,gain,significant\n");
        for g in &self.gains {
            out.push_str(&format!("{},{},{},{:?},{}\n", self.k, g.scheme, g.baseline, g.gain, g.significant));
        }
        out
    }
}
