use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use usg_core::alignment::{align_tokens_to_nodes, degree_normalize_rows, AlignOptions, DEFAULT_CONTEXT_LEN};
use usg_core::annotation::{chunk_document, ingest_annotations, to_json_line, WordCount, DEFAULT_TARGET_WORDS};
use usg_core::augment::{augment_graph, AugmentedRecord};
use usg_core::builder::{build_usg, MergeRuleTable};
use usg_core::kernels::check::run_kernel_checks;
use usg_core::kernels::{propagation_matrix, PropagationConfig, PropagationFormula};
use usg_core::pipeline::run_pipeline;
use usg_core::stats::{compare_graph_sets, graph_stats, render_table, StatsReport, DEFAULT_BUCKETS};
use usg_core::tokenize::SubwordRecord;
use usg_core::{Error, Result, SemanticGraph, Variant};

#[derive(Parser, Debug)]
#[command(name = "usg", version, about = "Unified semantic graph toolkit")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Construction variant.
    #[arg(long, global = true, default_value = "src")]
    variant: Variant,
    /// Merge rule table (TOML).
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Bucket targets for statistics.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = DEFAULT_BUCKETS)]
    buckets: Vec<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and check annotated documents.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        /// Fail on the first invalid record instead of skipping it.
        #[arg(long)]
        validate: bool,
        /// Write the valid documents, re-serialized.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one semantic graph per document.
    BuildGraph {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TARGET_WORDS)]
        target_words: usize,
    },
    /// Add reverse, two-hop, self-loop and supernode edges.
    Augment {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the token-to-node construction matrices.
    Align {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        subwords: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CONTEXT_LEN)]
        context_len: usize,
    },
    /// Write one propagation matrix per augmented graph.
    Propagate {
        #[arg(long)]
        adj: PathBuf,
        #[arg(long, default_value_t = 0.85)]
        omega: f64,
        #[arg(long, default_value_t = 2)]
        p: usize,
        /// Use ω^p·Â^p for the tail term.
        #[arg(long)]
        power_formula: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bucketed graph statistics.
    Stats {
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long)]
        subwords: PathBuf,
        /// Also write the statistics as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Percentage increase of one statistics file over another.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run the full pipeline from a config file.
    Run { config: PathBuf },
    /// Check every kernel against its oracle.
    KernelCheck,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

fn jsonl<T>(path: &Path, parse: impl Fn(&str, usize) -> Result<T>) -> Result<Vec<T>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse(l, i + 1))
        .collect()
}

fn open_docs(path: &Path) -> Result<Vec<Result<usg_core::annotation::AnnotatedDocument>>> {
    let file = fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(ingest_annotations(BufReader::new(file)))
}

fn rules(cli: &Cli) -> Result<MergeRuleTable> {
    cli.rules.as_deref().map_or_else(|| Ok(MergeRuleTable::default()), MergeRuleTable::load)
}

fn run(cli: &Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Ingest { input, validate, out: dest } => {
            let mut valid = Vec::new();
            let mut invalid = 0;
            for doc in open_docs(input)? {
                match doc {
                    Ok(d) => valid.push(d),
                    Err(e) if *validate => return Err(e),
                    Err(e) => {
                        invalid += 1;
                        eprintln!("warning: skipped: {e}");
                    }
                }
            }
            if let Some(dest) = dest {
                write_lines(dest, valid.iter().map(to_json_line))?;
            }
            let _ = writeln!(out, "{} documents, {invalid} invalid", valid.len());
        }
        Command::BuildGraph { input, out: dest, target_words } => {
            if *target_words == 0 {
                return Err(Error::Config("target words must be at least 1".into()));
            }
            let rules = rules(cli)?;
            let mut lines = Vec::new();
            for doc in open_docs(input)? {
                let doc = doc?;
                let chunks = chunk_document(&doc, *target_words, WordCount::AllTokens);
                let built = build_usg(&doc, &chunks, cli.variant, &rules);
                built.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
                lines.push(built.graph.to_json_line());
            }
            let _ = writeln!(out, "{} graphs ({})", lines.len(), cli.variant);
            write_lines(dest, lines)?;
        }
        Command::Augment { input, out: dest } => {
            let graphs = jsonl(input, SemanticGraph::from_json_line)?;
            let mut lines = Vec::new();
            for g in &graphs {
                if g.nodes.is_empty() {
                    eprintln!("warning: {}: empty graph skipped", g.doc_id);
                    continue;
                }
                lines.push(augment_graph(g)?.to_record().to_json_line());
            }
            let _ = writeln!(out, "{} augmented graphs", lines.len());
            write_lines(dest, lines)?;
        }
        Command::Align { graphs, subwords, out: dest, context_len } => {
            let graphs = jsonl(graphs, AugmentedRecord::from_json_line)?;
            let records = jsonl(subwords, SubwordRecord::from_json_line)?;
            let opts = AlignOptions {
                context_len: *context_len,
                ..AlignOptions::default()
            };
            let mut lines = Vec::new();
            for g in &graphs {
                let Some(sw) = records.iter().find(|r| r.doc_id == g.base.doc_id) else {
                    eprintln!("warning: {}: no subword record", g.base.doc_id);
                    continue;
                };
                let c = align_tokens_to_nodes(g, &sw.tokens(), opts)?;
                if c.truncated > 0 {
                    eprintln!("warning: {}: {} subwords truncated", c.doc_id, c.truncated);
                }
                lines.push(c.to_json_line());
            }
            let _ = writeln!(out, "{} construction matrices", lines.len());
            write_lines(dest, lines)?;
        }
        Command::Propagate { adj, omega, p, power_formula, out: dest } => {
            let cfg = PropagationConfig {
                omega: *omega,
                steps: *p,
                formula: if *power_formula {
                    PropagationFormula::Power
                } else {
                    PropagationFormula::Literal
                },
            };
            cfg.validate()?;
            let mut bytes = Vec::new();
            let graphs = jsonl(adj, AugmentedRecord::from_json_line)?;
            for g in &graphs {
                let a_hat = degree_normalize_rows(&g.adjacency).matrix.to_dense();
                bytes.extend(propagation_matrix(&a_hat, &cfg)?.to_container_bytes());
            }
            let _ = writeln!(out, "{} propagation matrices", graphs.len());
            write_bytes(dest, &bytes)?;
        }
        Command::Stats { graphs, subwords, json } => {
            let graphs = jsonl(graphs, SemanticGraph::from_json_line)?;
            let records = jsonl(subwords, SubwordRecord::from_json_line)?;
            let report = graph_stats(&graphs, &records, &cli.buckets)?;
            report.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            if let Some(path) = json {
                write_bytes(path, report.to_json().as_bytes())?;
            }
            let label = format!("USG_{}", cli.variant);
            let _ = write!(out, "{}", render_table(&[(&label, &report.buckets)], None));
        }
        Command::Compare { a, b } => {
            let load = |p: &Path| -> Result<StatsReport> { StatsReport::from_json(&read_text(p)?) };
            let (sa, sb) = (load(a)?, load(b)?);
            let inc = compare_graph_sets(&sa.buckets, &sb.buckets)?;
            let _ = write!(out, "{}", render_table(&[("A", &sa.buckets), ("B", &sb.buckets)], Some(&inc)));
        }
        Command::Run { config } => {
            let manifest = run_pipeline(config)?;
            manifest.warnings.iter().for_each(|w| eprintln!("warning: {w}"));
            let _ = writeln!(
                out,
                "complete: {} files, {} warnings, {} errors",
                manifest.files.len(),
                manifest.warnings.len(),
                manifest.error_count()
            );
        }
        Command::KernelCheck => {
            let results = run_kernel_checks(cli.seed);
            for r in &results {
                let _ = writeln!(out, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if let Some(bad) = results.iter().find(|r| !r.passed) {
                return Err(Error::Shape(format!("kernel check failed: {}", bad.name)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
