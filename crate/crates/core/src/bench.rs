//! Benchmark harness: generate or load circuits, run the full pipeline
//! (convert, embed, build hierarchy, cost, optionally execute), compute the
//! requested analytic bounds, and emit CSV/JSON comparison tables.
//!
//! Output is a pure function of the configuration: realization seeds are
//! derived from the base seed, records are ordered by realization index, and
//! the CSV omits wall times so repeated runs are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{
    circuit_to_network, explicit_bound, sidewise_bound, statevector_expectation_capped,
    circuit_bound, circuit_planar_bound, Circuit, GateProfile, Measurement,
};
use crate::error::{Error, Result};
use crate::generators::{gen_iqp, gen_random3d, gen_sycamore, IqpParams, Random3dParams, SycamoreParams};
use crate::separator::{build_hierarchy, child_seed, SeparatorParams};
use crate::tncore::{execute_plan, hierarchy_cost, network_bound};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Network,
    Circuit,
    Planar,
    Sidewise,
    Explicit,
    Ssa,
}

impl BoundKind {
    pub const ALL: [BoundKind; 6] = [
        BoundKind::Network,
        BoundKind::Circuit,
        BoundKind::Planar,
        BoundKind::Sidewise,
        BoundKind::Explicit,
        BoundKind::Ssa,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Network => "network",
            BoundKind::Circuit => "circuit",
            BoundKind::Planar => "planar",
            BoundKind::Sidewise => "sidewise",
            BoundKind::Explicit => "explicit",
            BoundKind::Ssa => "ssa",
        }
    }

    pub fn parse(s: &str) -> Result<BoundKind> {
        BoundKind::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown bound {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilySpec {
    Iqp { l: usize, t: Option<usize>, gamma: f64 },
    Sycamore { l: usize, q: usize, p_idle: f64 },
    Random3d { l: usize, alpha: f64, s_cavity: usize, sigma: f64, lambda: Option<f64> },
    File { circuit: PathBuf, measurement: Option<PathBuf> },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Iqp { .. } => "iqp",
            FamilySpec::Sycamore { .. } => "sycamore",
            FamilySpec::Random3d { .. } => "random3d",
            FamilySpec::File { .. } => "file",
        }
    }

    pub fn side(&self) -> Option<usize> {
        match self {
            FamilySpec::Iqp { l, .. }
            | FamilySpec::Sycamore { l, .. }
            | FamilySpec::Random3d { l, .. } => Some(*l),
            FamilySpec::File { .. } => None,
        }
    }

    pub fn realize(&self, seed: u64) -> Result<(Circuit, Measurement)> {
        match self {
            FamilySpec::Iqp { l, t, gamma } => {
                let mut p = IqpParams::new(*l, seed);
                if let Some(t) = t {
                    p.t = *t;
                }
                p.gamma = *gamma;
                Ok((gen_iqp(&p)?, Measurement::default()))
            }
            FamilySpec::Sycamore { l, q, p_idle } => {
                let mut p = SycamoreParams::new(*l, seed);
                p.q = *q;
                p.p_idle = *p_idle;
                Ok((gen_sycamore(&p)?, Measurement::default()))
            }
            FamilySpec::Random3d { l, alpha, s_cavity, sigma, lambda } => {
                let mut p = Random3dParams::new(*l, seed);
                p.alpha = *alpha;
                p.s_cavity = *s_cavity;
                p.sigma = *sigma;
                if let Some(lambda) = lambda {
                    p.lambda = *lambda;
                }
                Ok((gen_random3d(&p)?, Measurement::default()))
            }
            FamilySpec::File { circuit, measurement } => {
                let c = crate::circuit::io::load_circuit(circuit)?;
                let m = match measurement {
                    Some(path) => crate::circuit::io::load_measurement(path)?,
                    None => Measurement::default(),
                };
                Ok((c, m))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub family: FamilySpec,
    pub realizations: usize,
    pub seed: u64,
    pub bounds: BTreeSet<BoundKind>,
    pub execute: bool,
    pub format: ReportFormat,
    pub out: Option<PathBuf>,
    pub timeout: Duration,
    pub statevector_cap: usize,
}

impl RunConfig {
    pub fn new(family: FamilySpec) -> Self {
        RunConfig {
            family,
            realizations: 1,
            seed: 0,
            bounds: BoundKind::ALL.into(),
            execute: false,
            format: ReportFormat::Csv,
            out: None,
            timeout: DEFAULT_TIMEOUT,
            statevector_cap: crate::circuit::DEFAULT_STATEVECTOR_CAP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations < 1 {
            return Err(Error::Parameter("need at least one realization".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub realization: usize,
    pub seed: u64,
    pub family: String,
    pub l: Option<usize>,
    pub n_qubits: usize,
    pub sum_f: u64,
    pub max_f: u64,
    pub n_tensors: usize,
    pub k: u64,
    pub ssa_retries: usize,
    pub fallbacks: usize,
    pub bounds: BTreeMap<BoundKind, f64>,
    pub value_re: Option<f64>,
    pub value_im: Option<f64>,
    pub oracle: Option<f64>,
    /// Reserved for merging third-party planner costs into reports.
    pub external_cost: Option<f64>,
    /// Excluded from CSV to keep repeated runs byte-identical.
    pub wall_time_secs: f64,
    pub status: RowStatus,
    pub error: Option<String>,
}

fn run_one(config: &RunConfig, realization: usize) -> RunRecord {
    let seed = child_seed(config.seed, realization as u64);
    let start = Instant::now();
    let mut record = RunRecord {
        realization,
        seed,
        family: config.family.name().to_string(),
        l: config.family.side(),
        n_qubits: 0,
        sum_f: 0,
        max_f: 0,
        n_tensors: 0,
        k: 0,
        ssa_retries: 0,
        fallbacks: 0,
        bounds: BTreeMap::new(),
        value_re: None,
        value_im: None,
        oracle: None,
        external_cost: None,
        wall_time_secs: 0.0,
        status: RowStatus::Ok,
        error: None,
    };
    let outcome = fill_record(config, seed, start, &mut record);
    record.wall_time_secs = start.elapsed().as_secs_f64();
    if let Err(e) = outcome {
        if record.status == RowStatus::Ok {
            record.status = RowStatus::Failed;
            record.error = Some(e.to_string());
        }
    }
    record
}

fn fill_record(
    config: &RunConfig,
    seed: u64,
    start: Instant,
    record: &mut RunRecord,
) -> Result<()> {
    let over_time = |record: &mut RunRecord| -> bool {
        if start.elapsed() > config.timeout {
            record.status = RowStatus::Timeout;
            record.error = Some(format!("timed out after {:?}", config.timeout));
            true
        } else {
            false
        }
    };

    let (circuit, measurement) = config.family.realize(seed)?;
    let profile = GateProfile::from_circuit(&circuit);
    record.n_qubits = circuit.qubit_count();
    record.sum_f = profile.sum_f;
    record.max_f = profile.max_f;

    let want = |b: BoundKind| config.bounds.contains(&b);
    if want(BoundKind::Circuit) {
        let v = circuit_bound(&profile, circuit.d, circuit.gate_range, circuit.min_spacing)?;
        record.bounds.insert(BoundKind::Circuit, v);
    }
    if want(BoundKind::Planar) {
        let v = circuit_planar_bound(&profile, circuit.d, circuit.gate_range, circuit.min_spacing)?;
        record.bounds.insert(BoundKind::Planar, v);
    }
    if want(BoundKind::Sidewise) {
        record.bounds.insert(BoundKind::Sidewise, sidewise_bound(&circuit, &profile)?);
    }
    if want(BoundKind::Explicit) {
        record.bounds.insert(BoundKind::Explicit, explicit_bound(&circuit));
    }
    if over_time(record) {
        return Ok(());
    }

    let needs_network = want(BoundKind::Ssa) || want(BoundKind::Network) || config.execute;
    if !needs_network {
        return Ok(());
    }
    let converted = circuit_to_network(&circuit, &measurement, None)?;
    record.n_tensors = converted.network.tensors.len();
    record.k = converted.k_bound.max(1);

    if want(BoundKind::Network) && record.n_tensors >= 1 {
        // Bond bookkeeping dimension 4 per half, M = 16 per contracted pair.
        let v = network_bound(record.n_tensors as u64, 16, record.k, circuit.d)?;
        record.bounds.insert(BoundKind::Network, v);
    }
    if over_time(record) {
        return Ok(());
    }

    if record.n_tensors == 0 {
        // Wires all collapsed to scalars: nothing to contract.
        if want(BoundKind::Ssa) {
            record.bounds.insert(BoundKind::Ssa, 0.0);
        }
        if config.execute {
            record.value_re = Some(converted.scalar_factor.re);
            record.value_im = Some(converted.scalar_factor.im);
        }
    } else {
        let params = SeparatorParams::new(circuit.d, record.k)?;
        let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 0x5e9a));
        let (root, stats) =
            build_hierarchy(&converted.network, &converted.embedding, &params, &mut rng)?;
        record.ssa_retries = stats.circle_retries;
        record.fallbacks = stats.fallback_calls;
        if want(BoundKind::Ssa) {
            let ledger = hierarchy_cost(&root, &converted.network)?;
            record.bounds.insert(BoundKind::Ssa, ledger.log2_scalar_ops);
        }
        if over_time(record) {
            return Ok(());
        }
        if config.execute {
            let value = converted.scalar_factor * execute_plan(&converted.network, &root)?;
            record.value_re = Some(value.re);
            record.value_im = Some(value.im);
        }
    }

    if config.execute {
        let oracle = statevector_expectation_capped(&circuit, &measurement, config.statevector_cap)?;
        record.oracle = Some(oracle);
        let scale = oracle.abs().max(1.0);
        let (re, im) = (record.value_re.unwrap_or(f64::NAN), record.value_im.unwrap_or(f64::NAN));
        if !((re - oracle).abs() <= 1e-8 * scale && im.abs() <= 1e-8 * scale) {
            record.status = RowStatus::Failed;
            record.error = Some(format!(
                "contraction {re}+{im}i disagrees with oracle {oracle}"
            ));
        }
    }
    for (kind, v) in &record.bounds {
        if !v.is_finite() {
            record.status = RowStatus::Failed;
            record.error = Some(format!("non-finite {} bound", kind.name()));
        }
    }
    Ok(())
}

/// Run all realizations (worker pool; records ordered by realization index).
pub fn run_experiment(config: &RunConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    use rayon::prelude::*;
    Ok((0..config.realizations)
        .into_par_iter()
        .map(|i| run_one(config, i))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundAggregate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Mean and standard error (sample stddev / sqrt(count)) of each bound's
/// log2 values over the non-failed records.
pub fn aggregate(records: &[RunRecord]) -> BTreeMap<BoundKind, BoundAggregate> {
    let mut out = BTreeMap::new();
    for kind in BoundKind::ALL {
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.status == RowStatus::Ok)
            .filter_map(|r| r.bounds.get(&kind).copied())
            .collect();
        if values.is_empty() {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        out.insert(kind, BoundAggregate { mean, stderr, count: values.len() });
    }
    out
}

pub const CSV_HEADER: &str = "realization,seed,family,L,N,sum_f,F,n_tensors,k,ssa_retries,fallbacks,\
network_log2,circuit_log2,planar_log2,sidewise_log2,explicit_log2,ssa_log2,\
value_re,value_im,oracle,external_cost,status,error,\
network_stderr,circuit_stderr,planar_stderr,sidewise_stderr,explicit_stderr,ssa_stderr";

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| format!("{x}")).unwrap_or_default()
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render the records plus a trailing aggregate row as CSV. Wall times are
/// omitted, so the output is byte-identical across repeated runs.
pub fn render_csv(records: &[RunRecord]) -> String {
    let mut lines = vec![CSV_HEADER.to_string()];
    for r in records {
        let bound = |k: BoundKind| fmt_opt(&r.bounds.get(&k).copied());
        let status = match r.status {
            RowStatus::Ok => "ok",
            RowStatus::Failed => "failed",
            RowStatus::Timeout => "timeout",
        };
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},,,,,,",
            r.realization,
            r.seed,
            r.family,
            fmt_opt(&r.l),
            r.n_qubits,
            r.sum_f,
            r.max_f,
            r.n_tensors,
            r.k,
            r.ssa_retries,
            r.fallbacks,
            bound(BoundKind::Network),
            bound(BoundKind::Circuit),
            bound(BoundKind::Planar),
            bound(BoundKind::Sidewise),
            bound(BoundKind::Explicit),
            bound(BoundKind::Ssa),
            fmt_opt(&r.value_re),
            fmt_opt(&r.value_im),
            fmt_opt(&r.oracle),
            fmt_opt(&r.external_cost),
            status,
            csv_escape(r.error.as_deref().unwrap_or("")),
        ));
    }
    let agg = aggregate(records);
    let mean = |k: BoundKind| fmt_opt(&agg.get(&k).map(|a| a.mean));
    let stderr = |k: BoundKind| fmt_opt(&agg.get(&k).map(|a| a.stderr));
    lines.push(format!(
        "aggregate,,,,,,,,,,,{},{},{},{},{},{},,,,,aggregate,,{},{},{},{},{},{}",
        mean(BoundKind::Network),
        mean(BoundKind::Circuit),
        mean(BoundKind::Planar),
        mean(BoundKind::Sidewise),
        mean(BoundKind::Explicit),
        mean(BoundKind::Ssa),
        stderr(BoundKind::Network),
        stderr(BoundKind::Circuit),
        stderr(BoundKind::Planar),
        stderr(BoundKind::Sidewise),
        stderr(BoundKind::Explicit),
        stderr(BoundKind::Ssa),
    ));
    lines.join("\n") + "\n"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<RunRecord>,
    pub aggregate: BTreeMap<BoundKind, BoundAggregate>,
}

pub fn render_json(records: &[RunRecord]) -> Result<String> {
    let report = Report { records: records.to_vec(), aggregate: aggregate(records) };
    serde_json::to_string_pretty(&report).map_err(|e| Error::json("serializing report", e))
}

pub fn parse_report_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| Error::json("parsing report", e))
}

pub fn emit_report(records: &[RunRecord], format: ReportFormat, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Precondition("no records to report".into()));
    }
    let text = match format {
        ReportFormat::Csv => render_csv(records),
        ReportFormat::Json => render_json(records)?,
    };
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn failed_rows(records: &[RunRecord]) -> usize {
    records.iter().filter(|r| r.status != RowStatus::Ok).count()
}
