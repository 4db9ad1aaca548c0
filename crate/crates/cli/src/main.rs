//! `codeval`: score generated code, compute pass@k, apply perturbations and
//! run meta-evaluation over score tables.
//!
//! Exit codes: 0 success, 1 usage or configuration, 2 data, 3 embedding backend.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use codeval_core::config::{build_backend, RunConfig};
use codeval_core::corpus::{join_executions, load_executions, load_instances, write_instances, ExecutionRecord, InputFormat};
use codeval_core::meta::{self, render_document, Artifact, Grouping};
use codeval_core::perturb::{apply_transform_pairwise, TransformKind};
use codeval_core::pipeline::{passk_table, score_corpus, summary_table};
use codeval_core::report::{emit_report, ReportFormat, ScoreTable};
use codeval_core::Error;

#[derive(Parser)]
#[command(name = "codeval", version, about = "Evaluate generated code and the metrics that judge it")]
struct Cli {
    /// Run configuration (.toml or .json).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for scoring (0 = all cores). Overrides the config file.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Recorded in provenance output; no computation is randomized.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every instance with the selected metrics.
    Score(ScoreArgs),
    /// Per-model pass@k from execution records.
    Passk(PasskArgs),
    /// Apply a semantics-preserving identifier rewrite to every instance.
    Perturb(PerturbArgs),
    /// Meta-evaluation of metrics over score tables.
    #[command(subcommand)]
    Meta(MetaVerb),
    /// Write the combined report: summary, distributions, ties, power, robustness.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Tsv,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Md => ReportFormat::Md,
            Format::Tsv => ReportFormat::Tsv,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Instances (JSONL).
    #[arg(long)]
    input: PathBuf,
    /// Execution records (JSONL), used for the functional-correctness column of the summary.
    #[arg(long)]
    executions: Option<PathBuf>,
    /// Score table output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Also write the per-model summary (Markdown) here.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct PasskArgs {
    #[arg(long)]
    executions: PathBuf,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    k: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    input: PathBuf,
    /// var-cand, var-ref, var-both, func-same or func-diff.
    #[arg(long, value_parser = parse_transform)]
    transform: TransformKind,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Common {
    /// Score table (CSV written by `score`).
    #[arg(long)]
    scores: PathBuf,
    /// Restrict to these metric columns (comma-separated); default is all.
    #[arg(long, value_delimiter = ',')]
    metric: Vec<String>,
    /// Directory for the artifacts.
    #[arg(long)]
    out_dir: PathBuf,
    /// Format of the data files; a Markdown copy is always written.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    Pooled,
    PerDataset,
}

#[derive(Subcommand)]
enum MetaVerb {
    /// Correlation with functional correctness and with edit similarity.
    Correlate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        executions: PathBuf,
        #[arg(long, value_enum, default_value = "pooled")]
        grouping: GroupingArg,
    },
    /// Centrality and shape measures plus histogram data.
    Distribution {
        #[command(flatten)]
        common: Common,
    },
    /// Percentage of tied scores between models.
    Ties {
        #[command(flatten)]
        common: Common,
    },
    /// Discriminative power and ASL curves.
    Power {
        #[command(flatten)]
        common: Common,
    },
    /// Distinguishability of passing versus failing instances.
    Distinguish {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        executions: PathBuf,
    },
    /// Mean shift and rank autocorrelation under perturbations.
    Robustness {
        #[command(flatten)]
        common: Common,
        /// Perturbed score table as LABEL=PATH (repeatable).
        #[arg(long = "after", value_parser = parse_labeled, required = true)]
        after: Vec<(String, PathBuf)>,
    },
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// Execution records (JSONL); adds functional correctness, correlation and distinguishability.
    #[arg(long)]
    executions: Option<PathBuf>,
    /// Perturbed score table as LABEL=PATH (repeatable).
    #[arg(long = "after", value_parser = parse_labeled)]
    after: Vec<(String, PathBuf)>,
}

fn parse_transform(s: &str) -> Result<TransformKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_labeled(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => Ok((label.to_string(), path.into())),
        _ => {
            let path = PathBuf::from(s);
            let label = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| format!("expected LABEL=PATH, got `{s}`"))?
                .to_string();
            Ok((label, path))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::UnsupportedLanguage(_) => 1,
        Error::Backend(_) => 3,
        _ => 2,
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| with_path(dir, e.into()))?;
    }
    fs::write(path, contents).map_err(|e| with_path(path, e.into()))
}

fn read_scores(path: &Path) -> Result<ScoreTable, Error> {
    ScoreTable::load(path).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => with_path(path, other),
    })
}

fn read_executions(path: &Path) -> Result<Vec<ExecutionRecord>, Error> {
    load_executions(path).map_err(|e| with_path(path, e))
}

/// Write each artifact as `<name>.<ext>` and `<name>.md`; return the combined Markdown.
fn write_artifacts(dir: &Path, format: Format, heading: &str, artifacts: &[Artifact]) -> Result<String, Error> {
    let format = ReportFormat::from(format);
    for a in artifacts {
        write_file(&dir.join(format!("{}.md", a.name)), &a.table.render(ReportFormat::Md))?;
        if format != ReportFormat::Md {
            write_file(&dir.join(format!("{}.{}", a.name, format.extension())), &a.table.render(format))?;
        }
    }
    Ok(render_document(heading, artifacts))
}

fn cmd_score(cli: &Cli, args: &ScoreArgs) -> Result<(), Error> {
    let config = load_config(cli)?;
    let backend = build_backend(&config.embedding)?;
    let mut corpus = load_instances(&args.input, InputFormat::Jsonl).map_err(|e| with_path(&args.input, e))?;
    for (line, report) in &corpus.rejected {
        eprintln!("warning: {}:{line}: skipped invalid instance: {:?}", args.input.display(), report.violations);
    }
    let executions = match &args.executions {
        Some(p) => read_executions(p)?,
        None => Vec::new(),
    };
    corpus = join_executions(&corpus, &executions)?;
    let table = score_corpus(&corpus, &config, backend.as_deref())?;

    let mut buf = Vec::new();
    emit_report(&table, args.format.into(), &mut buf)?;
    write_file(&args.out, &String::from_utf8(buf).expect("utf-8 report"))?;

    let provenance = serde_json::json!({
        "tool": concat!("codeval ", env!("CARGO_PKG_VERSION")),
        "seed": config.seed,
        "backend": backend.as_ref().map(|b| b.identity()),
        "metrics": table.metrics,
        "instances": table.rows.len(),
        "rejected": corpus.rejected.len(),
    });
    let prov_path = args.out.with_extension("provenance.json");
    write_file(&prov_path, &format!("{}\n", serde_json::to_string_pretty(&provenance).expect("json")))?;

    let flagged = table.rows.iter().filter(|r| r.values.iter().any(Option::is_none)).count();
    if flagged > 0 {
        eprintln!("{flagged} of {} rows have null scores; see the flags column", table.rows.len());
    }
    let summary = summary_table(&table, &executions).render(ReportFormat::Md);
    if let Some(p) = &args.summary {
        write_file(p, &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn cmd_passk(args: &PasskArgs) -> Result<(), Error> {
    let records = read_executions(&args.executions)?;
    let table = passk_table(&records, &args.k)?;
    if let Some(out) = &args.out {
        write_file(out, &table.render(args.format.into()))?;
    }
    print!("{}", table.render(ReportFormat::Md));
    Ok(())
}

fn cmd_perturb(args: &PerturbArgs) -> Result<(), Error> {
    let corpus = load_instances(&args.input, InputFormat::Jsonl).map_err(|e| with_path(&args.input, e))?;
    let mut failed = 0;
    let out: Vec<_> = corpus
        .instances
        .iter()
        .map(|inst| {
            let o = apply_transform_pairwise(inst, args.transform);
            if !o.applied {
                failed += 1;
            }
            o.instance
        })
        .collect();
    let mut buf = Vec::new();
    write_instances(&out, &mut buf)?;
    write_file(&args.out, &String::from_utf8(buf).expect("utf-8 jsonl"))?;
    eprintln!(
        "{}: rewrote {} of {} instances ({failed} flagged with transform_error)",
        args.transform.label(),
        out.len() - failed,
        out.len()
    );
    Ok(())
}

fn grouping(g: GroupingArg) -> Grouping {
    match g {
        GroupingArg::Pooled => Grouping::Pooled,
        GroupingArg::PerDataset => Grouping::PerDataset,
    }
}

fn load_afters(after: &[(String, PathBuf)]) -> Result<Vec<(String, ScoreTable)>, Error> {
    after.iter().map(|(l, p)| Ok((l.clone(), read_scores(p)?))).collect()
}

fn cmd_meta(cli: &Cli, verb: &MetaVerb) -> Result<(), Error> {
    let config = load_config(cli)?;
    let params = &config.meta;
    let (common, heading, artifacts) = match verb {
        MetaVerb::Correlate { common, executions, grouping: g } => {
            let t = read_scores(&common.scores)?;
            let recs = read_executions(executions)?;
            (common, "Construct correlation", meta::correlate(&t, &recs, &common.metric, grouping(*g))?)
        }
        MetaVerb::Distribution { common } => {
            let t = read_scores(&common.scores)?;
            (common, "Score distributions", meta::distribution(&t, &common.metric)?)
        }
        MetaVerb::Ties { common } => {
            let t = read_scores(&common.scores)?;
            (common, "Ties", meta::ties(&t, &common.metric, params)?)
        }
        MetaVerb::Power { common } => {
            let t = read_scores(&common.scores)?;
            (common, "Discriminative power", meta::power(&t, &common.metric, params)?)
        }
        MetaVerb::Distinguish { common, executions } => {
            let t = read_scores(&common.scores)?;
            let recs = read_executions(executions)?;
            (common, "Distinguishability", meta::distinguish(&t, &recs, &common.metric)?)
        }
        MetaVerb::Robustness { common, after } => {
            let t = read_scores(&common.scores)?;
            (common, "Robustness", meta::robustness(&t, &load_afters(after)?, &common.metric)?)
        }
    };
    let doc = write_artifacts(&common.out_dir, common.format, heading, &artifacts)?;
    print!("{doc}");
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<(), Error> {
    let config = load_config(cli)?;
    let c = &args.common;
    let table = read_scores(&c.scores)?;
    let executions = match &args.executions {
        Some(p) => read_executions(p)?,
        None => Vec::new(),
    };
    let mut shown = vec![Artifact {
        name: "summary".into(),
        table: summary_table(&table, &executions),
    }];
    let mut files_only = Vec::new();
    for a in meta::distribution(&table, &c.metric)? {
        if a.name == "histogram" { files_only.push(a) } else { shown.push(a) }
    }
    shown.extend(meta::ties(&table, &c.metric, &config.meta)?);
    for a in meta::power(&table, &c.metric, &config.meta)? {
        if a.name == "power" { shown.push(a) } else { files_only.push(a) }
    }
    if !executions.is_empty() {
        shown.extend(meta::correlate(&table, &executions, &c.metric, Grouping::Pooled)?);
        shown.extend(meta::distinguish(&table, &executions, &c.metric)?);
    }
    if !args.after.is_empty() {
        shown.extend(meta::robustness(&table, &load_afters(&args.after)?, &c.metric)?);
    }
    let format = ReportFormat::from(c.format);
    let mut scores = Vec::new();
    emit_report(&table, format, &mut scores)?;
    write_file(&c.out_dir.join(format!("scores.{}", format.extension())), &String::from_utf8(scores).expect("utf-8"))?;
    write_artifacts(&c.out_dir, c.format, "", &files_only)?;
    let doc = write_artifacts(&c.out_dir, c.format, "Evaluation report", &shown)?;
    write_file(&c.out_dir.join("report.md"), &doc)?;
    print!("{doc}");
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    // Every command validates the global configuration, even if it only reads part of it.
    load_config(cli)?;
    match &cli.command {
        Command::Score(a) => cmd_score(cli, a),
        Command::Passk(a) => cmd_passk(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Meta(v) => cmd_meta(cli, v),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
