mod config;
mod error;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};

use navmine::pipeline::ingest_text;
use navmine::report::{self, ReportError};
use navmine::simulate::{self, CorpusSpec, DwellDistribution, UserPolicy};
use navmine::{load_edge_list, mine_sessions, sessionize, MiningReport, SiteGraph};

use crate::config::{Emit, PipelineArgs, PipelineConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "navmine",
    version,
    about = "Find destination pages in access logs and recommend links to them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Mine pattern records and link recommendations.
    Mine(MineArgs),
    /// Print per-page threshold times.
    Thresholds(ThresholdArgs),
    /// Count visits to a page by predecessor and month.
    Report(ReportArgs),
    /// Generate a synthetic access log with ground truth.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct MineArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format.
    #[arg(long, value_enum)]
    emit: Option<Emit>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Destination page to count entry paths for.
    #[arg(long)]
    page: String,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Site edge list with a `# root` line.
    #[arg(long, conflicts_with = "random_tree")]
    graph: Option<PathBuf>,
    /// Use a random tree with this many pages instead of --graph.
    #[arg(long)]
    random_tree: Option<usize>,
    #[arg(long, default_value_t = 100)]
    sessions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Probability of taking a link other than the best one.
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    /// Probability of going back when no link gets closer.
    #[arg(long, default_value_t = 0.9)]
    backtrack: f64,
    /// Moves before giving up on a destination.
    #[arg(long, default_value_t = 25)]
    give_up: usize,
    #[arg(long, default_value_t = 10.0)]
    transit_mean: f64,
    #[arg(long, default_value_t = 5.0)]
    transit_jitter: f64,
    #[arg(long, default_value_t = 120.0)]
    dest_mean: f64,
    #[arg(long, default_value_t = 30.0)]
    dest_jitter: f64,
    /// Comma-separated destination pool (default: every reachable leaf).
    #[arg(long, value_delimiter = ',')]
    destinations: Vec<String>,
    /// Destinations per session as `min,max`.
    #[arg(long, default_value = "1,2")]
    per_session: String,
    /// First session start, RFC 3339.
    #[arg(long)]
    start: Option<String>,
    /// Output directory for access.log, ground_truth.tsv (and site.edges).
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn report_err(path: &Path) -> impl Fn(ReportError) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn load_graph(path: &Path) -> Result<SiteGraph, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    load_edge_list(io::BufReader::new(file)).map_err(|e| match e {
        navmine::graph::GraphError::Io(e) => CliError::io(path, e),
        other => CliError::config(path, other),
    })
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, CliError> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Config(format!("--threads: {e}"))),
        None => Ok(f()),
    }
}

/// Parse every log, build sessions and mine them.
fn run_pipeline(cfg: &PipelineConfig) -> Result<MiningReport, CliError> {
    let graph = cfg.graph.as_deref().map(load_graph).transpose()?;
    let mut texts = Vec::with_capacity(cfg.logs.len());
    for path in &cfg.logs {
        texts.push(fs::read_to_string(path).map_err(|e| CliError::io(path, e))?);
    }
    with_threads(cfg.threads, || {
        let mut hits = Vec::new();
        let mut malformed = Vec::new();
        let (mut lines, mut filtered_out) = (0, 0);
        for (path, text) in cfg.logs.iter().zip(&texts) {
            let (h, bad, dropped) = ingest_text(text, cfg.mining.format, &cfg.mining.filter);
            for line in bad.iter().take(5) {
                eprintln!(
                    "warning: {}:{line}: malformed log line skipped",
                    path.display()
                );
            }
            if bad.len() > 5 {
                eprintln!(
                    "warning: {}: {} more malformed lines",
                    path.display(),
                    bad.len() - 5
                );
            }
            hits.extend(h);
            malformed.extend(bad.into_iter().map(|l| l + lines));
            lines += text.lines().count();
            filtered_out += dropped;
        }
        let sessions = sessionize(&hits, &cfg.mining.session);
        drop(hits);
        MiningReport {
            lines,
            malformed,
            filtered_out,
            ..mine_sessions(sessions, graph.as_ref(), &cfg.mining)
        }
    })
}

fn mine(args: &MineArgs) -> Result<(), CliError> {
    let file = args.pipeline.file_config()?;
    let cfg = args.pipeline.resolve(&file)?;
    let out = args
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("navmine-out"));
    let emit = args.emit.or(file.emit).unwrap_or(Emit::Csv);
    let report = run_pipeline(&cfg)?;

    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let (records, recs) = match emit {
        Emit::Csv => (out.join("records.csv"), out.join("recommendations.csv")),
        Emit::Text => (out.join("records.txt"), out.join("recommendations.txt")),
    };
    let summary = out.join("summary.txt");
    let thresholds = out.join("thresholds.csv");
    match emit {
        Emit::Csv => {
            report::write_records_csv(&report.records, create(&records)?)
                .map_err(report_err(&records))?;
            report::write_recommendations_csv(&report.destinations, create(&recs)?)
                .map_err(report_err(&recs))?;
        }
        Emit::Text => {
            report::write_records_text(&report.records, create(&records)?)
                .map_err(report_err(&records))?;
            report::write_recommendations_text(&report.destinations, create(&recs)?)
                .map_err(report_err(&recs))?;
        }
    }
    report::write_thresholds_csv(&report.thresholds, create(&thresholds)?)
        .map_err(report_err(&thresholds))?;
    report::write_summary(&report, create(&summary)?).map_err(report_err(&summary))?;
    eprintln!(
        "{} sessions, {} records, {} destinations, {} malformed lines -> {}",
        report.sessions.len(),
        report.records.len(),
        report.destinations.len(),
        report.malformed.len(),
        out.display()
    );
    Ok(())
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn thresholds(args: &ThresholdArgs) -> Result<(), CliError> {
    let file = args.pipeline.file_config()?;
    let cfg = args.pipeline.resolve(&file)?;
    let report = run_pipeline(&cfg)?;
    let target = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    report::write_thresholds_csv(&report.thresholds, sink(args.out.as_deref())?)
        .map_err(report_err(&target))
}

fn path_report(args: &ReportArgs) -> Result<(), CliError> {
    let file = args.pipeline.file_config()?;
    let cfg = args.pipeline.resolve(&file)?;
    let report = run_pipeline(&cfg)?;
    let rows = report::emit_path_hit_counts(&report.sessions, &args.page)
        .map_err(|e| CliError::Config(format!("--page: {e}")))?;
    let target = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    report::write_path_hits_csv(&rows, sink(args.out.as_deref())?).map_err(report_err(&target))
}

fn simulate_corpus(args: &SimulateArgs) -> Result<(), CliError> {
    let graph = match (&args.graph, args.random_tree) {
        (Some(path), None) => {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "graph file `{}` does not exist",
                    path.display()
                )));
            }
            load_graph(path)?
        }
        (None, Some(n)) => simulate::random_tree(n, args.seed),
        _ => {
            return Err(CliError::Config(
                "give exactly one of --graph or --random-tree".into(),
            ))
        }
    };
    let per_session = args
        .per_session
        .split_once(',')
        .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)))
        .filter(|(lo, hi): &(usize, usize)| lo <= hi)
        .ok_or_else(|| {
            CliError::Config(format!(
                "--per-session: `{}` is not min,max",
                args.per_session
            ))
        })?;
    let mut spec = CorpusSpec {
        sessions: args.sessions,
        destination_pool: args.destinations.clone(),
        destinations_per_session: per_session,
        ..CorpusSpec::default()
    };
    if let Some(start) = &args.start {
        spec.clock_start = DateTime::parse_from_rfc3339(start)
            .map_err(|e| CliError::Config(format!("--start: {e}")))?
            .with_timezone(&Utc);
    }
    let policy = UserPolicy {
        wrong_choice_prob: args.epsilon,
        backtrack_prob: args.backtrack,
        give_up_steps: args.give_up,
        dwell_at_transit: DwellDistribution {
            mean: args.transit_mean,
            jitter: args.transit_jitter,
        },
        dwell_at_destination: DwellDistribution {
            mean: args.dest_mean,
            jitter: args.dest_jitter,
        },
        seed: args.seed,
    };
    let corpus = simulate::generate_corpus(&graph, &spec, &policy)
        .map_err(|e| CliError::Config(e.to_string()))?;

    let out = &args.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let write = |name: &str, text: &str| {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    };
    write("access.log", &corpus.log_text())?;
    write("ground_truth.tsv", &corpus.ground_truth_text())?;
    if args.random_tree.is_some() {
        let mut edges = format!("# root {}\n", graph.root().unwrap_or_default());
        for (a, b) in graph.edges() {
            edges.push_str(&format!("{a}\t{b}\n"));
        }
        write("site.edges", &edges)?;
    }
    eprintln!("{} sessions -> {}", corpus.sessions.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Mine(a) => mine(a),
        Command::Thresholds(a) => thresholds(a),
        Command::Report(a) => path_report(a),
        Command::Simulate(a) => simulate_corpus(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("navmine: {e}");
            e.exit_code()
        }
    }
}
