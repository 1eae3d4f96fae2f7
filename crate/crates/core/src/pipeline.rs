//! End-to-end run driven by a TOML config: ingest, chunk, build, augment,
//! align, propagate and stats, writing every interchange file and a
//! manifest.
//!
//! Layout of `out_dir`:
//!
//! ```text
//! manifest.json
//! stats.json, stats.txt
//! <variant>/chunks.jsonl, graphs.jsonl, adj.jsonl, C.jsonl, P.bin
//! ```
//!
//! Nothing written depends on wall-clock time or thread count.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{align_tokens_to_nodes, degree_normalize_rows, AlignOptions, DEFAULT_CONTEXT_LEN};
use crate::annotation::{chunk_document, ingest_annotations, AnnotatedDocument, WordCount, DEFAULT_TARGET_WORDS};
use crate::augment::augment_graph;
use crate::builder::{build_usg, MergeRuleTable};
use crate::error::{Error, Result};
use crate::graph::Variant;
use crate::kernels::{propagation_matrix, PropagationConfig, PropagationFormula};
use crate::par;
use crate::stats::{bucket_stats, compare_graph_sets, measure_document, render_table, DocMeasure, GraphStats, Increase, LengthUnit, DEFAULT_BUCKETS};
use crate::tokenize::{whitespace_record, SubwordRecord};

pub const TOOL_NAME: &str = "usg";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSettings {
    pub omega: f64,
    pub steps: usize,
    pub power_formula: bool,
    pub context_len: usize,
}

impl Default for KernelSettings {
    fn default() -> Self {
        let p = PropagationConfig::default();
        KernelSettings {
            omega: p.omega,
            steps: p.steps,
            power_formula: false,
            context_len: DEFAULT_CONTEXT_LEN,
        }
    }
}

impl KernelSettings {
    pub fn propagation(&self) -> PropagationConfig {
        PropagationConfig {
            omega: self.omega,
            steps: self.steps,
            formula: if self.power_formula {
                PropagationFormula::Power
            } else {
                PropagationFormula::Literal
            },
        }
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant::Src, Variant::Ppr]
}

fn default_buckets() -> Vec<usize> {
    DEFAULT_BUCKETS.to_vec()
}

fn default_target_words() -> usize {
    DEFAULT_TARGET_WORDS
}

/// Relative paths are resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub annotations: PathBuf,
    /// Subword spans; documents are whitespace-tokenized when absent.
    #[serde(default)]
    pub subwords: Option<PathBuf>,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub rules: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "default_buckets")]
    pub buckets: Vec<usize>,
    #[serde(default = "default_target_words")]
    pub target_words: usize,
    #[serde(default)]
    pub word_count: WordCount,
    #[serde(default)]
    pub length_unit: LengthUnit,
    #[serde(default)]
    pub kernel: KernelSettings,
}

impl PipelineConfig {
    pub fn from_toml(src: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.annotations);
        resolve(&mut cfg.out_dir);
        cfg.subwords.as_mut().map(resolve);
        cfg.rules.as_mut().map(resolve);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        if self.target_words == 0 {
            return Err(Error::Config("target_words must be at least 1".into()));
        }
        if self.kernel.context_len == 0 {
            return Err(Error::Config("context_len must be at least 1".into()));
        }
        self.kernel.propagation().validate()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub stage: String,
    pub variant: Option<Variant>,
    pub ok: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_sha256: String,
    pub complete: bool,
    pub error: Option<String>,
    pub stages: Vec<StageCount>,
    pub warnings: Vec<String>,
    /// Output path relative to `out_dir` → SHA-256 of its content.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    fn new(config_sha256: String) -> Self {
        Manifest {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config_sha256,
            complete: false,
            error: None,
            stages: Vec::new(),
            warnings: Vec::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn error_count(&self) -> usize {
        usize::from(self.error.is_some())
    }

    fn count(&mut self, stage: &str, variant: Option<Variant>, ok: usize, skipped: usize) {
        self.stages.push(StageCount {
            stage: stage.into(),
            variant,
            ok,
            skipped,
        });
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct StatsFile<'a> {
    length_unit: LengthUnit,
    variants: BTreeMap<String, &'a [GraphStats]>,
    excluded: &'a [String],
    /// Increase of the second variant over the first.
    increase: Option<Vec<Increase>>,
}

struct DocArtifacts {
    chunks_line: String,
    graph_line: String,
    adj_line: Option<String>,
    c_line: Option<String>,
    p_bytes: Option<Vec<u8>>,
    measure: Option<DocMeasure>,
    warnings: Vec<String>,
}

struct Writer<'a> {
    root: &'a Path,
    manifest: &'a mut Manifest,
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.files.insert(rel.to_owned(), sha256_hex(bytes));
        Ok(())
    }
}

fn jsonl(lines: impl IntoIterator<Item = String>) -> Vec<u8> {
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out.into_bytes()
}

fn process_document(
    doc: &AnnotatedDocument,
    subwords: Option<&SubwordRecord>,
    variant: Variant,
    rules: &MergeRuleTable,
    cfg: &PipelineConfig,
) -> Result<DocArtifacts> {
    let id = doc.doc_id.as_str();
    let chunks = chunk_document(doc, cfg.target_words, cfg.word_count);
    let chunks_line = serde_json::to_string(&chunks).expect("chunks always serialize");
    let built = build_usg(doc, &chunks, variant, rules);
    built.graph.validate().map_err(|e| e.in_stage("build", id))?;
    let mut warnings = built.warnings;
    let graph_line = built.graph.to_json_line();

    let mut art = DocArtifacts {
        chunks_line,
        graph_line,
        adj_line: None,
        c_line: None,
        p_bytes: None,
        measure: None,
        warnings: Vec::new(),
    };
    if built.graph.nodes.is_empty() {
        warnings.push(format!("{id}: empty graph, skipped augmentation and alignment"));
        art.warnings = warnings;
        return Ok(art);
    }
    let aug = augment_graph(&built.graph).map_err(|e| e.in_stage("augment", id))?;
    art.adj_line = Some(aug.to_record().to_json_line());

    let a_hat = degree_normalize_rows(&aug.adjacency).matrix.to_dense();
    let p = propagation_matrix(&a_hat, &cfg.kernel.propagation()).map_err(|e| e.in_stage("propagate", id))?;
    art.p_bytes = Some(p.to_container_bytes());

    match subwords {
        Some(sw) => {
            let opts = AlignOptions {
                context_len: cfg.kernel.context_len,
                ..AlignOptions::default()
            };
            let c = align_tokens_to_nodes(&aug, &sw.tokens(), opts).map_err(|e| e.in_stage("align", id))?;
            if c.truncated > 0 {
                warnings.push(format!("{id}: {} subwords truncated beyond the context", c.truncated));
            }
            art.c_line = Some(c.to_json_line());
            let words = doc.sentences.iter().map(|s| cfg.word_count.count(s)).sum();
            art.measure = Some(measure_document(&built.graph, sw, Some(words)).map_err(|e| e.in_stage("stats", id))?);
        }
        None => warnings.push(format!("{id}: no subword record, skipped alignment and statistics")),
    }
    art.warnings = warnings;
    Ok(art)
}

fn load_subwords(path: &Path) -> Result<BTreeMap<String, SubwordRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = SubwordRecord::from_json_line(line, i + 1).map_err(|e| e.in_stage("ingest", "subwords"))?;
        out.insert(rec.doc_id.clone(), rec);
    }
    Ok(out)
}

fn execute(cfg: &PipelineConfig, manifest: &mut Manifest) -> Result<()> {
    let file = fs::File::open(&cfg.annotations).map_err(|e| Error::io(&cfg.annotations, e))?;
    let mut docs = Vec::new();
    for (i, parsed) in ingest_annotations(BufReader::new(file)).into_iter().enumerate() {
        docs.push(parsed.map_err(|e| e.in_stage("ingest", &format!("record {}", i + 1)))?);
    }
    manifest.count("ingest", None, docs.len(), 0);

    let rules = match &cfg.rules {
        Some(p) => MergeRuleTable::load(p)?,
        None => MergeRuleTable::default(),
    };
    let subwords: BTreeMap<String, SubwordRecord> = match &cfg.subwords {
        Some(p) => load_subwords(p)?,
        None => docs
            .iter()
            .map(|d| (d.doc_id.clone(), whitespace_record(&d.doc_id, &d.text)))
            .collect(),
    };

    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut table: Vec<(String, Vec<GraphStats>)> = Vec::new();
    let mut excluded = Vec::new();
    for &variant in &cfg.variants {
        let results = par::map(&docs, |d| process_document(d, subwords.get(&d.doc_id), variant, &rules, cfg));
        let arts = results.into_iter().collect::<Result<Vec<_>>>()?;

        let adj = arts.iter().filter(|a| a.adj_line.is_some()).count();
        let aligned = arts.iter().filter(|a| a.c_line.is_some()).count();
        manifest.count("chunk", Some(variant), arts.len(), 0);
        manifest.count("build", Some(variant), arts.len(), 0);
        manifest.count("augment", Some(variant), adj, arts.len() - adj);
        manifest.count("propagate", Some(variant), adj, arts.len() - adj);
        manifest.count("align", Some(variant), aligned, arts.len() - aligned);
        for a in &arts {
            manifest.warnings.extend(a.warnings.iter().map(|w| format!("{variant}: {w}")));
        }

        let dir = variant.as_str();
        let mut w = Writer {
            root: &cfg.out_dir,
            manifest,
        };
        w.write(&format!("{dir}/chunks.jsonl"), &jsonl(arts.iter().map(|a| a.chunks_line.clone())))?;
        w.write(&format!("{dir}/graphs.jsonl"), &jsonl(arts.iter().map(|a| a.graph_line.clone())))?;
        w.write(&format!("{dir}/adj.jsonl"), &jsonl(arts.iter().filter_map(|a| a.adj_line.clone())))?;
        w.write(&format!("{dir}/C.jsonl"), &jsonl(arts.iter().filter_map(|a| a.c_line.clone())))?;
        let p: Vec<u8> = arts.iter().filter_map(|a| a.p_bytes.as_deref()).flatten().copied().collect();
        w.write(&format!("{dir}/P.bin"), &p)?;

        let measures: Vec<DocMeasure> = arts.iter().filter_map(|a| a.measure.clone()).collect();
        if excluded.is_empty() {
            excluded = docs
                .iter()
                .zip(&arts)
                .filter(|(_, a)| a.measure.is_none())
                .map(|(d, _)| d.doc_id.clone())
                .collect();
        }
        manifest.count("stats", Some(variant), measures.len(), arts.len() - measures.len());
        table.push((dir.to_owned(), bucket_stats(&measures, &cfg.buckets, cfg.length_unit)));
    }

    let increase = match table.as_slice() {
        [(_, a), (_, b), ..] => Some(compare_graph_sets(a, b)?),
        _ => None,
    };
    let stats = StatsFile {
        length_unit: cfg.length_unit,
        variants: table.iter().map(|(k, v)| (k.clone(), v.as_slice())).collect(),
        excluded: &excluded,
        increase: increase.clone(),
    };
    let labels: Vec<String> = table.iter().map(|(k, _)| format!("USG_{k}")).collect();
    let rows: Vec<(&str, &[GraphStats])> = labels.iter().zip(&table).map(|(l, (_, s))| (l.as_str(), s.as_slice())).collect();
    let text = render_table(&rows, increase.as_deref());
    let mut w = Writer {
        root: &cfg.out_dir,
        manifest,
    };
    let mut json = serde_json::to_string_pretty(&stats).expect("stats always serialize");
    json.push('\n');
    w.write("stats.json", json.as_bytes())?;
    w.write("stats.txt", text.as_bytes())?;
    Ok(())
}

/// Runs a parsed config. `config_bytes` feeds the manifest hash.
pub fn run_config(cfg: &PipelineConfig, config_bytes: &[u8]) -> Result<Manifest> {
    let mut manifest = Manifest::new(sha256_hex(config_bytes));
    let outcome = execute(cfg, &mut manifest);
    manifest.complete = outcome.is_ok();
    if let Err(e) = &outcome {
        manifest.error = Some(e.to_string());
    }
    if cfg.out_dir.is_dir() {
        let path = cfg.out_dir.join("manifest.json");
        let mut body = serde_json::to_string_pretty(&manifest).expect("manifest always serializes");
        body.push('\n');
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    outcome.map(|()| manifest)
}

/// Loads the TOML config at `path` and runs it.
pub fn run_pipeline(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = PipelineConfig::from_toml(&text, base)?;
    run_config(&cfg, &bytes)
}
