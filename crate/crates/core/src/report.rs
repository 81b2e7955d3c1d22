//! Per-application report: every metric computed per thread, then
//! aggregated as mean and sample standard deviation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::FeatureSource;
use crate::memory::{
    check_cuts, check_line_sizes, spatial_locality, EntropyLadder, MemoryError, SignatureSummary, DEFAULT_CUTS,
};
use crate::parallelism::{analyze_thread, DependencyPolicy, ParallelismConfig, ParallelismError, ParallelismReport};
use crate::trace::{Trace, TraceEvent, TraceHeader, ValidationReport};

pub const SCHEMA: &str = "nmc-report/1";

/// Features fed to PCA when none are selected.
pub const DEFAULT_FEATURES: [&str; 4] = ["bblp_full", "pbblp_avg", "entropy_diff", "slq_8_16"];

/// Violations listed verbatim in a report; the rest are only counted.
const MAX_LISTED_VIOLATIONS: usize = 32;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ReportError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("thread {thread}: {source}")]
    Memory { thread: u32, source: MemoryError },
    #[error("thread {thread}: {source}")]
    Parallelism { thread: u32, source: ParallelismError },
    #[error("trace has no events")]
    NoEvents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Cache-line sizes for reuse and spatial locality. When unset, sizes
    /// double from the trace's word size up to `max_line`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line_sizes: Option<Vec<u64>>,
    pub max_line: u64,
    pub entropy_cuts: Vec<u32>,
    pub policies: Vec<DependencyPolicy>,
    pub memory_deps: bool,
    pub features: Vec<String>,
    pub components: usize,
    /// Where the front end writes its result; never echoed into reports.
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            line_sizes: None,
            max_line: 512,
            entropy_cuts: DEFAULT_CUTS.to_vec(),
            policies: vec![DependencyPolicy::Full, DependencyPolicy::SkipIndexUpdates],
            memory_deps: false,
            features: DEFAULT_FEATURES.iter().map(|s| s.to_string()).collect(),
            components: 2,
            output: None,
        }
    }
}

impl AnalysisConfig {
    pub fn resolved_line_sizes(&self, word_size_bytes: u32) -> Vec<u64> {
        if let Some(sizes) = &self.line_sizes {
            return sizes.clone();
        }
        let mut sizes = vec![];
        let mut b = u64::from(word_size_bytes.max(1));
        while b <= self.max_line {
            sizes.push(b);
            b *= 2;
        }
        sizes
    }

    /// Checks the configuration against a trace and pins down the line sizes.
    pub fn resolve(&self, header: &TraceHeader) -> Result<AnalysisConfig, ReportError> {
        let bad = |e: MemoryError| ReportError::Config(e.to_string());
        check_cuts(&self.entropy_cuts).map_err(bad)?;
        if let Some(&cut) = self.entropy_cuts.iter().find(|&&c| c >= header.address_bits) {
            return Err(bad(MemoryError::CutTooLarge {
                cut,
                address_bits: header.address_bits,
            }));
        }
        let sizes = self.resolved_line_sizes(header.word_size_bytes);
        check_line_sizes(&sizes).map_err(bad)?;
        if sizes[0] < u64::from(header.word_size_bytes) {
            return Err(ReportError::Config(format!(
                "smallest line size {} is below the {}-byte word",
                sizes[0], header.word_size_bytes
            )));
        }
        if self.policies.is_empty() {
            return Err(ReportError::Config("no scheduling policy selected".into()));
        }
        let mut resolved = self.clone();
        resolved.output = None;
        resolved.line_sizes = Some(sizes);
        resolved.policies.sort_by_key(|p| *p != DependencyPolicy::Full);
        resolved.policies.dedup();
        Ok(resolved)
    }
}

/// Memory metrics of one thread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreadMemory {
    pub accesses: u64,
    pub entropy_ladder: Vec<f64>,
    pub entropy_diff: f64,
    pub reuse_signatures: Vec<SignatureSummary>,
    /// Score of each consecutive line-size pair.
    pub slq_pairs: Vec<f64>,
    pub slq_total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreadMetrics {
    pub thread_id: u32,
    pub memory: ThreadMemory,
    pub parallelism: ParallelismReport,
}

/// Memory metrics over one thread's accesses. A thread that never touches
/// memory gets all-zero scores.
pub fn thread_memory(
    addresses: &[u64],
    header: &TraceHeader,
    config: &AnalysisConfig,
) -> Result<ThreadMemory, MemoryError> {
    let sizes = config.resolved_line_sizes(header.word_size_bytes);
    if addresses.is_empty() {
        return Ok(ThreadMemory {
            accesses: 0,
            entropy_ladder: vec![0.0; config.entropy_cuts.len()],
            entropy_diff: 0.0,
            reuse_signatures: sizes
                .iter()
                .map(|&b| SignatureSummary {
                    line_size: b,
                    accesses: 0,
                    bins: vec![],
                })
                .collect(),
            slq_pairs: vec![0.0; sizes.len().saturating_sub(1)],
            slq_total: 0.0,
        });
    }
    let ladder = EntropyLadder::compute(addresses, &config.entropy_cuts, header.address_bits)?;
    let (signatures, locality) = spatial_locality(addresses, &sizes)?;
    Ok(ThreadMemory {
        accesses: addresses.len() as u64,
        entropy_diff: ladder.diff()?,
        entropy_ladder: ladder.values,
        reuse_signatures: signatures.iter().map(|s| s.summary()).collect(),
        slq_pairs: locality.pairs.iter().map(|p| p.score).collect(),
        slq_total: locality.total,
    })
}

/// All metrics of one thread. `config` must already be resolved.
pub fn analyze_thread_events(
    thread_id: u32,
    events: &[&TraceEvent],
    header: &TraceHeader,
    config: &AnalysisConfig,
    lenient: bool,
) -> Result<ThreadMetrics, ReportError> {
    let addresses: Vec<u64> = events.iter().filter_map(|e| e.mem.map(|m| m.address)).collect();
    let memory = thread_memory(&addresses, header, config).map_err(|source| ReportError::Memory {
        thread: thread_id,
        source,
    })?;
    let parallelism = analyze_thread(
        events,
        header.word_size_bytes,
        ParallelismConfig {
            memory_deps: config.memory_deps,
            ignore_undefined: lenient,
        },
    )
    .map_err(|source| ReportError::Parallelism {
        thread: thread_id,
        source,
    })?;
    Ok(ThreadMetrics {
        thread_id,
        memory,
        parallelism,
    })
}

/// Per-thread values of a scalar metric with their mean and sample
/// standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub per_thread: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    pub fn of(values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self {
            per_thread: values,
            mean,
            std,
        }
    }
}

/// Sample mean and standard deviation; a single value has zero spread.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// A metric keyed by opcode or block. Threads lacking a key contribute
/// nothing to that key's statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyedAggregate {
    pub per_thread: Vec<BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
    pub std: BTreeMap<String, f64>,
}

impl KeyedAggregate {
    pub fn of(per_thread: Vec<BTreeMap<String, f64>>) -> Self {
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for m in &per_thread {
            for (k, v) in m {
                columns.entry(k.clone()).or_default().push(*v);
            }
        }
        let mut mean = BTreeMap::new();
        let mut std = BTreeMap::new();
        for (k, vals) in columns {
            let (m, s) = mean_std(&vals);
            mean.insert(k.clone(), m);
            std.insert(k, s);
        }
        Self { per_thread, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderAggregate {
    pub cuts: Vec<u32>,
    pub per_thread: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlqPairAggregate {
    pub line_size: u64,
    pub doubled: u64,
    pub score: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub instructions: Aggregate,
    pub memory_accesses: Aggregate,
    pub entropy_ladder: LadderAggregate,
    pub entropy_diff: Aggregate,
    /// Keyed by line size in bytes; one summary per thread.
    pub reuse_signature: BTreeMap<u64, Vec<SignatureSummary>>,
    pub slq_pairs: Vec<SlqPairAggregate>,
    pub slq_total: Aggregate,
    pub ilp: Aggregate,
    pub ilp_specialized: KeyedAggregate,
    pub dlp_avg: Aggregate,
    pub dlp1: Aggregate,
    pub dlp2: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bblp_full: Option<Aggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bblp_smart: Option<Aggregate>,
    pub pbblp_avg: Aggregate,
    pub pbblp_per_bb: KeyedAggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceInfo {
    /// Hex digest of the trace file bytes, or empty when not supplied.
    pub checksum: String,
    pub events: u64,
    pub thread_count: u32,
    pub word_size_bytes: u32,
    pub address_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub clean: bool,
    /// Analysis went ahead despite violations.
    pub forced: bool,
    pub violation_count: u64,
    pub violations: Vec<String>,
}

impl ValidationSummary {
    pub fn new(report: &ValidationReport, forced: bool) -> Self {
        Self {
            clean: report.is_clean(),
            forced: forced && !report.is_clean(),
            violation_count: report.violations.len() as u64,
            violations: report
                .violations
                .iter()
                .take(MAX_LISTED_VIOLATIONS)
                .map(|v| v.to_string())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppReport {
    pub schema: String,
    pub app: String,
    pub trace: TraceInfo,
    pub config: AnalysisConfig,
    pub validation: ValidationSummary,
    /// Threads that contributed events, in per-thread column order.
    pub threads: Vec<u32>,
    pub metrics: Metrics,
}

impl AppReport {
    /// Assembles a report from per-thread results ordered by thread id.
    pub fn assemble(
        header: &TraceHeader,
        events: u64,
        checksum: String,
        config: AnalysisConfig,
        validation: ValidationSummary,
        threads: Vec<ThreadMetrics>,
    ) -> Self {
        let scalar = |f: &dyn Fn(&ThreadMetrics) -> f64| Aggregate::of(threads.iter().map(f).collect());
        let sizes = config.line_sizes.clone().unwrap_or_default();

        let ladders: Vec<Vec<f64>> = threads.iter().map(|t| t.memory.entropy_ladder.clone()).collect();
        let rungs = config.entropy_cuts.len();
        let (mean, std) = (0..rungs)
            .map(|i| mean_std(&ladders.iter().map(|l| l[i]).collect::<Vec<_>>()))
            .unzip();
        let entropy_ladder = LadderAggregate {
            cuts: config.entropy_cuts.clone(),
            per_thread: ladders,
            mean,
            std,
        };

        let reuse_signature = sizes
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                (
                    b,
                    threads.iter().map(|t| t.memory.reuse_signatures[i].clone()).collect(),
                )
            })
            .collect();
        let slq_pairs = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| SlqPairAggregate {
                line_size: w[0],
                doubled: w[1],
                score: scalar(&|t| t.memory.slq_pairs[i]),
            })
            .collect();

        let keyed = |f: &dyn Fn(&ParallelismReport) -> BTreeMap<String, f64>| {
            KeyedAggregate::of(threads.iter().map(|t| f(&t.parallelism)).collect())
        };
        let has = |p| config.policies.contains(&p);

        let metrics = Metrics {
            instructions: scalar(&|t| t.parallelism.instructions as f64),
            memory_accesses: scalar(&|t| t.memory.accesses as f64),
            entropy_ladder,
            entropy_diff: scalar(&|t| t.memory.entropy_diff),
            reuse_signature,
            slq_pairs,
            slq_total: scalar(&|t| t.memory.slq_total),
            ilp: scalar(&|t| t.parallelism.ilp),
            ilp_specialized: keyed(&|p| p.ilp_specialized.clone()),
            dlp_avg: scalar(&|t| t.parallelism.dlp_avg),
            dlp1: scalar(&|t| t.parallelism.dlp1),
            dlp2: scalar(&|t| t.parallelism.dlp2),
            bblp_full: has(DependencyPolicy::Full).then(|| scalar(&|t| t.parallelism.bblp_full)),
            bblp_smart: has(DependencyPolicy::SkipIndexUpdates).then(|| scalar(&|t| t.parallelism.bblp_smart)),
            pbblp_avg: scalar(&|t| t.parallelism.pbblp_avg),
            pbblp_per_bb: keyed(&|p| p.pbblp_per_bb.iter().map(|(bb, v)| (bb.to_string(), *v)).collect()),
        };

        Self {
            schema: SCHEMA.to_string(),
            app: header.app_name.clone(),
            trace: TraceInfo {
                checksum,
                events,
                thread_count: header.thread_count,
                word_size_bytes: header.word_size_bytes,
                address_bits: header.address_bits,
            },
            config,
            validation,
            threads: threads.iter().map(|t| t.thread_id).collect(),
            metrics,
        }
    }
}

/// Sequential end-to-end analysis of an in-memory trace.
pub fn analyze_trace(
    trace: &Trace,
    config: &AnalysisConfig,
    validation: &ValidationReport,
    forced: bool,
    checksum: String,
) -> Result<AppReport, ReportError> {
    let config = config.resolve(&trace.header)?;
    if trace.events.is_empty() {
        return Err(ReportError::NoEvents);
    }
    let lenient = forced && !validation.is_clean();
    let threads = trace
        .split_threads()
        .iter()
        .enumerate()
        .filter(|(_, evs)| !evs.is_empty())
        .map(|(tid, evs)| analyze_thread_events(tid as u32, evs, &trace.header, &config, lenient))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AppReport::assemble(
        &trace.header,
        trace.events.len() as u64,
        checksum,
        config,
        ValidationSummary::new(validation, forced),
        threads,
    ))
}

impl FeatureSource for AppReport {
    fn app_name(&self) -> &str {
        &self.app
    }

    /// Thread-mean of a scalar metric, `slq_<b>_<2b>` for one line-size
    /// pair, or `entropy_<cut>` for one rung of the ladder.
    fn feature(&self, name: &str) -> Option<f64> {
        let m = &self.metrics;
        let scalar = match name {
            "instructions" => Some(&m.instructions),
            "memory_accesses" => Some(&m.memory_accesses),
            "entropy_diff" => Some(&m.entropy_diff),
            "slq_total" => Some(&m.slq_total),
            "ilp" => Some(&m.ilp),
            "dlp_avg" => Some(&m.dlp_avg),
            "dlp1" => Some(&m.dlp1),
            "dlp2" => Some(&m.dlp2),
            "bblp_full" => m.bblp_full.as_ref(),
            "bblp_smart" => m.bblp_smart.as_ref(),
            "pbblp_avg" => Some(&m.pbblp_avg),
            _ => None,
        };
        if let Some(a) = scalar {
            return Some(a.mean);
        }
        if let Some(rest) = name.strip_prefix("slq_") {
            let (b, b2) = rest.split_once('_')?;
            let (b, b2): (u64, u64) = (b.parse().ok()?, b2.parse().ok()?);
            return m
                .slq_pairs
                .iter()
                .find(|p| p.line_size == b && p.doubled == b2)
                .map(|p| p.score.mean);
        }
        if let Some(cut) = name.strip_prefix("entropy_") {
            let cut: u32 = cut.parse().ok()?;
            let i = m.entropy_ladder.cuts.iter().position(|&c| c == cut)?;
            return m.entropy_ladder.mean.get(i).copied();
        }
        None
    }
}
