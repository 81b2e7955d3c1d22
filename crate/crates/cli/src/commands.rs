use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use nmc_core::analytics::{assemble, quadrant_report, AnalyticsError, PcaResult};
use nmc_core::kernels::{KernelKind, KernelSpec};
use nmc_core::report::{self, analyze_thread_events, AppReport, ValidationSummary};
use nmc_core::trace::{read_trace, validate_trace, Trace, TraceEvent, ValidationReport};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{config, AnalyzeArgs, Failure, GenArgs, Kernel, PcaArgs};

pub const PCA_SCHEMA: &str = "nmc-pca/1";

type CmdResult = Result<(), Failure>;

pub fn gen(args: GenArgs) -> CmdResult {
    let kind = match args.kernel {
        Kernel::Stream { n, stride, base } => KernelKind::Stream {
            n,
            stride_bytes: stride,
            base_addr: base,
        },
        Kernel::Random { n, space } => KernelKind::Random { n, space_bytes: space },
        Kernel::Chain { n } => KernelKind::Chain { n },
        Kernel::Parallel { n } => KernelKind::Parallel { n },
        Kernel::Matmul { dim } => KernelKind::Matmul { dim },
        Kernel::Dploop {
            instances,
            body,
            carried,
        } => KernelKind::Dploop {
            instances,
            body_len: body,
            carried,
        },
    };
    let spec = KernelSpec {
        kind,
        seed: args.seed,
        threads: args.threads,
        word_size_bytes: args.word,
        address_bits: args.addrbits,
        app_name: args.app,
    };
    let trace = spec.generate().map_err(Failure::input)?;
    let bytes = trace.to_bytes().map_err(Failure::input)?;
    emit(args.out.as_deref(), &bytes)
}

/// Writes to `path`, or stdout when `None`.
fn emit(path: Option<&Path>, bytes: &[u8]) -> CmdResult {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().lock().write_all(bytes).context("writing to stdout"),
    }
    .map_err(Failure::input)
}

struct LoadedTrace {
    trace: Trace,
    checksum: String,
}

fn load_trace(path: &Path) -> Result<LoadedTrace, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("cannot read trace {}", path.display()))
        .map_err(Failure::input)?;
    let checksum = format!("{:x}", Sha256::digest(&bytes));
    let parsed = read_trace(&bytes[..]).and_then(|(header, reader)| {
        let events = reader.collect::<Result<Vec<TraceEvent>, _>>()?;
        Ok(Trace { header, events })
    });
    let trace = parsed
        .with_context(|| format!("cannot parse trace {}", path.display()))
        .map_err(Failure::input)?;
    Ok(LoadedTrace { trace, checksum })
}

pub fn validate(path: &Path) -> CmdResult {
    let loaded = load_trace(path)?;
    let report = validate_trace(&loaded.trace.header, &loaded.trace.events);
    let mut out = String::new();
    for v in &report.violations {
        let _ = writeln!(out, "{v}");
    }
    if report.is_clean() {
        println!("{}: ok ({} events)", path.display(), loaded.trace.events.len());
        Ok(())
    } else {
        print!("{out}");
        Err(Failure::rejected(anyhow!(
            "{}: {} violation(s)",
            path.display(),
            report.violations.len()
        )))
    }
}

pub fn analyze(args: AnalyzeArgs) -> CmdResult {
    let mut config = config::load(&args.overrides).map_err(Failure::input)?;
    if args.out.is_some() {
        config.output = args.out.clone();
    }
    let LoadedTrace { trace, checksum } = load_trace(&args.trace)?;
    let validation = validate_trace(&trace.header, &trace.events);
    if !validation.is_clean() {
        for v in validation.violations.iter().take(10) {
            eprintln!("warning: {v}");
        }
        if !args.force {
            return Err(Failure::rejected(anyhow!(
                "{} failed validation with {} violation(s); rerun with --force to analyze anyway",
                args.trace.display(),
                validation.violations.len()
            )));
        }
    }
    let report = build_report(&trace, &config, &validation, args.force, checksum)?;
    let mut json = serde_json::to_string_pretty(&report).map_err(Failure::input)?;
    json.push('\n');
    emit(config.output.as_deref(), json.as_bytes())
}

/// Analyzes threads in parallel, then assembles the report in thread order.
fn build_report(
    trace: &Trace,
    config: &report::AnalysisConfig,
    validation: &ValidationReport,
    forced: bool,
    checksum: String,
) -> Result<AppReport, Failure> {
    let config = config.resolve(&trace.header).map_err(Failure::input)?;
    if trace.events.is_empty() {
        return Err(Failure::rejected(report::ReportError::NoEvents));
    }
    let lenient = forced && !validation.is_clean();
    let threads: Vec<(u32, Vec<&TraceEvent>)> = trace
        .split_threads()
        .into_iter()
        .enumerate()
        .filter(|(_, evs)| !evs.is_empty())
        .map(|(tid, evs)| (tid as u32, evs))
        .collect();
    let metrics = threads
        .par_iter()
        .map(|(tid, evs)| analyze_thread_events(*tid, evs, &trace.header, &config, lenient))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::rejected)?;
    Ok(AppReport::assemble(
        &trace.header,
        trace.events.len() as u64,
        checksum,
        config,
        ValidationSummary::new(validation, forced),
        metrics,
    ))
}

#[derive(Serialize)]
struct AppScores {
    app: String,
    scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrant: Option<String>,
}

#[derive(Serialize)]
struct PcaDocument {
    schema: &'static str,
    apps: Vec<String>,
    features: Vec<String>,
    dropped_features: Vec<String>,
    warnings: Vec<String>,
    means: Vec<f64>,
    stds: Vec<f64>,
    eigenvalues: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    /// One row per component over `features`.
    loadings: Vec<Vec<f64>>,
    scores: Vec<AppScores>,
}

impl PcaDocument {
    fn new(result: PcaResult) -> Self {
        let quadrants = quadrant_report(&result).ok();
        let scores = result
            .apps
            .iter()
            .zip(&result.scores)
            .enumerate()
            .map(|(i, (app, s))| AppScores {
                app: app.clone(),
                scores: s.clone(),
                quadrant: quadrants.as_ref().map(|q| q[i].1.label().to_string()),
            })
            .collect();
        Self {
            schema: PCA_SCHEMA,
            apps: result.apps,
            features: result.feature_names,
            dropped_features: result.dropped_features,
            warnings: result.warnings,
            means: result.means,
            stds: result.stds,
            eigenvalues: result.eigenvalues,
            explained_variance_ratio: result.explained_variance_ratio,
            loadings: result.loadings,
            scores,
        }
    }

    fn csv(&self) -> String {
        let k = self.eigenvalues.len();
        let mut out = String::from("app");
        for c in 1..=k {
            let _ = write!(out, ",pc{c}");
        }
        out.push_str(",quadrant\n");
        for row in &self.scores {
            out.push_str(&row.app);
            for v in &row.scores {
                let _ = write!(out, ",{v}");
            }
            let _ = writeln!(out, ",{}", row.quadrant.as_deref().unwrap_or(""));
        }
        out
    }
}

/// Reads every report in `dir` ordered by file name, skipping JSON files
/// that are not reports.
fn load_reports(dir: &Path) -> Result<Vec<AppReport>, Failure> {
    let read_dir = fs::read_dir(dir)
        .with_context(|| format!("cannot read report directory {}", dir.display()))
        .map_err(Failure::input)?;
    let mut paths: Vec<PathBuf> = read_dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut reports = vec![];
    for path in paths {
        let text = fs::read_to_string(&path)
            .with_context(|| format!("cannot read {}", path.display()))
            .map_err(Failure::input)?;
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
            eprintln!("warning: skipping {} (not JSON)", path.display());
            continue;
        };
        if value.get("schema").and_then(|s| s.as_str()) != Some(report::SCHEMA) {
            continue;
        }
        let r: AppReport = serde_json::from_value(value)
            .with_context(|| format!("malformed report {}", path.display()))
            .map_err(Failure::input)?;
        reports.push(r);
    }
    Ok(reports)
}

pub fn pca(args: PcaArgs) -> CmdResult {
    let config = config::load(&args.overrides).map_err(Failure::input)?;
    let reports = load_reports(&args.report_dir)?;
    if reports.len() < 2 {
        return Err(Failure::rejected(anyhow!(
            "need ≥ 2 applications, found {} report(s) in {}",
            reports.len(),
            args.report_dir.display()
        )));
    }
    let matrix = assemble(&reports, &config.features).map_err(Failure::rejected)?;
    let result = PcaResult::fit(&matrix, config.components).map_err(|e| match e {
        AnalyticsError::TooFewRows(_) => Failure::rejected(anyhow!("need ≥ 2 applications")),
        e => Failure::rejected(e),
    })?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let doc = PcaDocument::new(result);
    let out_dir = args.out.or(config.output).unwrap_or(args.report_dir);
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(Failure::input)?;
    let mut json = serde_json::to_string_pretty(&doc).map_err(Failure::input)?;
    json.push('\n');
    write_file(&out_dir.join("pca.json"), json.as_bytes())?;
    write_file(&out_dir.join("scores.csv"), doc.csv().as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    let file = fs::File::create(path)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::input)?;
    let mut w = BufWriter::new(file);
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::input)
}
