//! Subcommand definitions and their implementations.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use claimpref::corpus::{exclude_provenance, ingest_notes, segment_corpus, sort_notes, EvidenceUnit, ExclusionList, Note};
use claimpref::dpo::{beta_sweep, best_of_k, synthetic_toy_pairs, train_toy_dpo, BetaSweepPoint, TracePoint, BETA_GRID};
use claimpref::eval::{
    aggregate_run, degeneration_gate, diagnostics_table, judge_aggregate, mining_diagnostics, pair_count_spread,
    runs_table, stability_sweep, stability_table, DiagnosticsReport, GateResult, JudgeLabel, JudgeSummary, RunAggregates,
    StabilityPoint,
};
use claimpref::mining::{
    build_pools, score_candidate, select_pairs, MiningSummary, PoolBuild, PreferencePair, SelectionSettings, Strategy,
    SummaryStats,
};
use claimpref::retrieval::{
    pack_evidence, retrieve_two_stage, subject_corpora, trace_records, SubjectCorpus, INDEX_FORMAT_VERSION,
};
use claimpref::seed::derive_seed;
use claimpref::synth::{gen_world, sample_labeled_claims, SynthGenerator, SyntheticWorld};
use claimpref::verifier::{
    bias_grid, compute_metrics, decode, sweep_bias, train_toy_verifier, BiasPoint, ClassMetrics, LabeledInstance,
    LexicalOracle, ToyLinearVerifier, VerifierClient, VerifierLogits,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, read_jsonl, require, write_json, write_jsonl, Run};
use crate::config::{PipelineConfig, VerifierKind};
use crate::records::{ClaimInput, EvidenceMeta, InstanceRecord, RerankRecord, RetrievalInfo, SystemOutput};
use crate::remote::RemoteScorer;

const WORLD: &str = "synth/world.json";
const SYNTH_NOTES: &str = "synth/notes.jsonl";
const SYNTH_CLAIMS: &str = "synth/claims.jsonl";
const NOTES: &str = "notes.jsonl";
const UNITS: &str = "units.jsonl";
const INDEX: &str = "index.json";
const INSTANCES: &str = "instances.jsonl";
const TOY_MODEL: &str = "toy_verifier.json";
const POOLS: &str = "pools.json";

#[derive(Debug, Parser)]
#[command(name = "claimpref", version, about = "Claim verification and verifier-driven preference mining")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides paths.work_dir.
    #[arg(long, global = true)]
    pub work_dir: Option<PathBuf>,
    /// Overrides master_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides verifier.kind.
    #[arg(long, global = true, value_enum)]
    pub verifier: Option<VerifierKind>,
    /// Overrides verifier.url and the environment variable.
    #[arg(long, global = true)]
    pub verifier_url: Option<String>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic world: notes, labeled claims and ground truth.
    SynthWorld(SynthArgs),
    /// Read notes, drop excluded ones and segment them into evidence units.
    Ingest(IngestArgs),
    /// Build per-subject note and unit indexes.
    Index,
    /// Retrieve evidence units for a claim.
    Retrieve(RetrieveArgs),
    /// Pair claims with packed evidence.
    BuildInstances(BuildArgs),
    /// Sweep the Not-Supported logit bias on labeled instances.
    Calibrate(CalibrateArgs),
    /// Generate, score and mine preference pairs.
    Mine(MineArgs),
    /// Diagnostics for mined pair files.
    Diagnose(DiagnoseArgs),
    /// Re-select pairs over a grid of thresholds from the cached pool.
    Stability(StabilityArgs),
    /// Train the toy DPO policy on synthetic preferences.
    DpoTrainToy(DpoArgs),
    /// Rerank the cached candidates by utility.
    BestOfK(BestOfKArgs),
    /// Score system outputs and apply the degeneration gate.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub notes_per_subject: Option<usize>,
    #[arg(long)]
    pub claims_per_subject: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Overrides paths.notes.
    #[arg(long)]
    pub notes: Option<PathBuf>,
    /// Overrides paths.exclusions.
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub subject: Option<String>,
    #[arg(long, requires = "subject")]
    pub claim: Option<String>,
    /// Claim records to trace in bulk instead of a single claim.
    #[arg(long, conflicts_with = "claim")]
    pub claims: Option<PathBuf>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Overrides paths.claims.
    #[arg(long)]
    pub claims: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Bias grid as lo:hi:step.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fit the toy verifier on the instances first and calibrate it.
    #[arg(long)]
    pub fit_toy: bool,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    /// full, random, no-hcns, no-length-coverage or all.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub bias_prec: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Pair files; defaults to every pairs-*.jsonl in the work directory.
    pub pairs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub deltas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub biases: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct DpoArgs {
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Also train once per β in the standard grid.
    #[arg(long)]
    pub beta_sweep: bool,
}

#[derive(Debug, Args)]
pub struct BestOfKArgs {
    /// Use only the first k candidates of each prompt.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub outputs: PathBuf,
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Judge labels to aggregate alongside the verifier.
    #[arg(long)]
    pub judge: Option<PathBuf>,
    #[arg(long, default_value = "system")]
    pub name: String,
}

/// Load the configuration, apply global overrides and run the command.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    if let Some(dir) = cli.work_dir {
        cfg.paths.work_dir = dir;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(kind) = cli.verifier {
        cfg.verifier.kind = kind;
    }
    if let Some(url) = cli.verifier_url {
        cfg.verifier.url = Some(url);
    }
    match cli.command {
        Command::SynthWorld(a) => synth_world(cfg, a),
        Command::Ingest(a) => ingest(cfg, a),
        Command::Index => index(cfg),
        Command::Retrieve(a) => retrieve(cfg, a),
        Command::BuildInstances(a) => build_instances(cfg, a),
        Command::Calibrate(a) => calibrate(cfg, a),
        Command::Mine(a) => mine(cfg, a),
        Command::Diagnose(a) => diagnose(cfg, a),
        Command::Stability(a) => stability(cfg, a),
        Command::DpoTrainToy(a) => dpo_train_toy(cfg, a),
        Command::BestOfK(a) => best_of_k_cmd(cfg, a),
        Command::Eval(a) => eval(cfg, a),
    }
}

fn prepare(cfg: &mut PipelineConfig) -> Result<String> {
    cfg.finalize()?;
    std::fs::create_dir_all(&cfg.paths.work_dir)
        .with_context(|| format!("creating work directory {}", cfg.paths.work_dir.display()))?;
    Ok(cfg.hash())
}

fn seed_for(cfg: &PipelineConfig, command: &str) -> u64 {
    derive_seed(cfg.master_seed, &[command])
}

fn load_world(cfg: &PipelineConfig, run: &mut Run, why: &str) -> Result<SyntheticWorld> {
    let path = cfg.work(WORLD);
    if !path.exists() {
        bail!("{why} needs {}; run `claimpref synth-world` first", path.display());
    }
    run.input(&path);
    read_json(&path)
}

fn load_index(cfg: &PipelineConfig, run: &mut Run) -> Result<Vec<SubjectCorpus>> {
    let path = cfg.work(INDEX);
    require(&path, "index")?;
    run.input(&path);
    let file: IndexFile = read_json(&path)?;
    if file.format_version != INDEX_FORMAT_VERSION {
        bail!("{} has index format {}, expected {INDEX_FORMAT_VERSION}; rerun `claimpref index`", path.display(), file.format_version);
    }
    Ok(file
        .corpora
        .into_iter()
        .map(|mut c| {
            c.reindex();
            c
        })
        .collect())
}

fn build_verifier(cfg: &PipelineConfig, run: &mut Run) -> Result<Box<dyn VerifierClient>> {
    Ok(match cfg.verifier.kind {
        VerifierKind::Oracle => {
            let world = load_world(cfg, run, "the oracle verifier")?;
            Box::new(world.oracle(cfg.verifier.oracle_noise, derive_seed(cfg.master_seed, &["oracle"]))?)
        }
        VerifierKind::Lexical => Box::new(LexicalOracle::default()),
        VerifierKind::Toy => {
            let path = cfg.verifier.toy_model.clone().unwrap_or_else(|| cfg.work(TOY_MODEL));
            if !path.exists() {
                bail!("missing toy verifier {}; run `claimpref calibrate --fit-toy` first", path.display());
            }
            run.input(&path);
            Box::new(read_json::<ToyLinearVerifier>(&path)?)
        }
        VerifierKind::Remote => {
            let url = cfg.verifier.url.as_deref().ok_or_else(|| anyhow!("remote verifier URL not set"))?;
            Box::new(RemoteScorer::new(url, Duration::from_millis(cfg.verifier.timeout_ms), cfg.verifier.retries))
        }
    })
}

fn finish(run: Run, cfg: &PipelineConfig) -> Result<()> {
    let path = run.finish(&cfg.paths.work_dir)?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

// ---------------------------------------------------------------------------

fn synth_world(mut cfg: PipelineConfig, a: SynthArgs) -> Result<()> {
    if let Some(v) = a.subjects {
        cfg.synth.subjects = v;
    }
    if let Some(v) = a.notes_per_subject {
        cfg.synth.notes_per_subject = v;
    }
    if let Some(v) = a.claims_per_subject {
        cfg.synth.claims_per_subject = v;
    }
    let hash = prepare(&mut cfg)?;
    let seed = seed_for(&cfg, "synth-world");
    let mut run = Run::start("synth-world", &hash, seed);
    let world = gen_world(cfg.synth.subjects, cfg.synth.notes_per_subject, seed)?;

    let world_path = cfg.work(WORLD);
    write_json(&world_path, &world, &hash)?;
    let notes: Vec<&Note> = world.notes().collect();
    let notes_path = cfg.work(SYNTH_NOTES);
    write_jsonl(&notes_path, notes.iter().copied(), &hash)?;
    let claims: Vec<ClaimInput> = sample_labeled_claims(&world, cfg.synth.claims_per_subject, seed)
        .into_iter()
        .enumerate()
        .map(|(i, c)| ClaimInput {
            proposition_id: format!("P{i:05}"),
            hadm_id: Some(format!("{}-A1", c.subject_id)),
            subject_id: c.subject_id,
            claim: c.claim,
            label: Some(c.label),
        })
        .collect();
    let claims_path = cfg.work(SYNTH_CLAIMS);
    write_jsonl(&claims_path, &claims, &hash)?;
    for p in [&world_path, &notes_path, &claims_path] {
        run.output(p);
    }
    println!(
        "synthetic world: {} subjects, {} notes, {} labeled claims -> {}",
        world.subjects.len(),
        notes.len(),
        claims.len(),
        cfg.work("synth").display()
    );
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct IngestReport {
    n_records_ok: usize,
    n_rejected: usize,
    n_excluded: usize,
    n_notes: usize,
    n_units: usize,
    n_subjects: usize,
}

fn ingest(mut cfg: PipelineConfig, a: IngestArgs) -> Result<()> {
    if a.notes.is_some() {
        cfg.paths.notes = a.notes;
    }
    if a.exclusions.is_some() {
        cfg.paths.exclusions = a.exclusions;
    }
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("ingest", &hash, seed_for(&cfg, "ingest"));
    let notes_path = cfg.paths.notes.clone().unwrap_or_else(|| cfg.work(SYNTH_NOTES));
    if !notes_path.exists() {
        bail!("notes file {} not found; pass --notes or run `claimpref synth-world`", notes_path.display());
    }
    run.input(&notes_path);
    let ingested = ingest_notes(BufReader::new(File::open(&notes_path)?))?;
    for e in &ingested.rejected {
        log::warn!("{}: {e}", notes_path.display());
    }
    if ingested.notes.is_empty() {
        bail!("no valid notes in {}", notes_path.display());
    }
    let n_records_ok = ingested.notes.len();
    let exclusions = match &cfg.paths.exclusions {
        Some(p) => {
            run.input(p);
            ExclusionList::parse(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => ExclusionList::default(),
    };
    let mut notes = exclude_provenance(ingested.notes, &exclusions);
    sort_notes(&mut notes);
    let units = segment_corpus(&notes, &cfg.segment);
    let subjects: std::collections::BTreeSet<&str> = notes.iter().map(|n| n.subject_id.as_str()).collect();
    let report = IngestReport {
        n_records_ok,
        n_rejected: ingested.rejected.len(),
        n_excluded: n_records_ok - notes.len(),
        n_notes: notes.len(),
        n_units: units.len(),
        n_subjects: subjects.len(),
    };
    for (rel, write) in [
        (NOTES, &|p: &Path| write_jsonl(p, &notes, &hash).map(drop) as Result<()>),
        (UNITS, &|p: &Path| write_jsonl(p, &units, &hash).map(drop)),
        ("ingest.json", &|p: &Path| write_json(p, &report, &hash)),
    ] as [(&str, &dyn Fn(&Path) -> Result<()>); 3]
    {
        let path = cfg.work(rel);
        write(&path)?;
        run.output(&path);
    }
    println!(
        "ingested {} notes ({} rejected, {} excluded) into {} units across {} subjects",
        report.n_notes, report.n_rejected, report.n_excluded, report.n_units, report.n_subjects
    );
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    corpora: Vec<SubjectCorpus>,
}

fn index(mut cfg: PipelineConfig) -> Result<()> {
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("index", &hash, seed_for(&cfg, "index"));
    let (notes_path, units_path) = (cfg.work(NOTES), cfg.work(UNITS));
    require(&notes_path, "ingest")?;
    require(&units_path, "ingest")?;
    run.input(&notes_path);
    run.input(&units_path);
    let notes: Vec<Note> = read_jsonl(&notes_path)?;
    let units: Vec<EvidenceUnit> = read_jsonl(&units_path)?;
    let corpora = subject_corpora(&notes, &units)?;
    let path = cfg.work(INDEX);
    let n_units: usize = corpora.iter().map(|c| c.units.len()).sum();
    write_json(&path, &IndexFile { format_version: INDEX_FORMAT_VERSION, corpora }, &hash)?;
    run.output(&path);
    println!("indexed {} units -> {}", n_units, path.display());
    finish(run, &cfg)
}

fn corpus_for<'a>(corpora: &'a [SubjectCorpus], subject: &str) -> Option<&'a SubjectCorpus> {
    corpora.iter().find(|c| c.subject_id == subject)
}

fn retrieve(mut cfg: PipelineConfig, a: RetrieveArgs) -> Result<()> {
    if let Some(k) = a.top_k {
        cfg.retrieval.top_k_units = k;
    }
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("retrieve", &hash, seed_for(&cfg, "retrieve"));
    let corpora = load_index(&cfg, &mut run)?;
    if let Some(path) = a.claims {
        run.input(&path);
        let claims: Vec<ClaimInput> = read_jsonl(&path)?;
        let mut traces = Vec::new();
        for c in &claims {
            match corpus_for(&corpora, &c.subject_id) {
                Some(corpus) => traces.extend(trace_records(&c.proposition_id, &retrieve_two_stage(&c.claim, corpus, &cfg.retrieval))),
                None => log::warn!("claim {}: subject {} is not indexed; skipped", c.proposition_id, c.subject_id),
            }
        }
        let out = cfg.work("retrieval.jsonl");
        write_jsonl(&out, &traces, &hash)?;
        run.output(&out);
        println!("{} trace records for {} claims -> {}", traces.len(), claims.len(), out.display());
    } else {
        let (Some(subject), Some(claim)) = (a.subject, a.claim) else {
            bail!("pass --subject and --claim, or --claims FILE");
        };
        let corpus = corpus_for(&corpora, &subject).ok_or_else(|| anyhow!("subject {subject} is not indexed"))?;
        for h in retrieve_two_stage(&claim, corpus, &cfg.retrieval) {
            let text = corpus.unit(&h.unit_id).map_or("", |u| u.text.as_str());
            println!("{:>3}  {:>8.4}  {:<16}  {}", h.rank, h.score, h.unit_id, text);
        }
    }
    finish(run, &cfg)
}

fn build_instances(mut cfg: PipelineConfig, a: BuildArgs) -> Result<()> {
    if a.claims.is_some() {
        cfg.paths.claims = a.claims;
    }
    let hash = prepare(&mut cfg)?;
    let seed = seed_for(&cfg, "build-instances");
    let mut run = Run::start("build-instances", &hash, seed);
    let corpora = load_index(&cfg, &mut run)?;
    let claims_path = cfg.paths.claims.clone().unwrap_or_else(|| cfg.work(SYNTH_CLAIMS));
    if !claims_path.exists() {
        bail!("claims file {} not found; pass --claims or run `claimpref synth-world`", claims_path.display());
    }
    run.input(&claims_path);
    let claims: Vec<ClaimInput> = read_jsonl(&claims_path)?;
    let mut out = Vec::with_capacity(claims.len());
    for c in claims {
        let Some(corpus) = corpus_for(&corpora, &c.subject_id) else {
            log::warn!("claim {}: subject {} is not indexed; skipped", c.proposition_id, c.subject_id);
            continue;
        };
        let hits = retrieve_two_stage(&c.claim, corpus, &cfg.retrieval);
        let packed = pack_evidence(&hits, corpus, &cfg.packing, derive_seed(seed, &[&c.proposition_id]))?;
        let notes: HashMap<&str, &str> = hits.iter().map(|h| (h.unit_id.as_str(), h.note_id.as_str())).collect();
        out.push(InstanceRecord {
            retrieval: RetrievalInfo {
                params: cfg.retrieval,
                n_hits: hits.len(),
                dropped_ids: packed.dropped_ids.clone(),
                token_count: packed.token_count(),
            },
            evidence: packed.items.iter().map(|i| i.text.clone()).collect(),
            evidence_meta: packed
                .items
                .iter()
                .map(|i| EvidenceMeta {
                    unit_id: i.unit_id.clone(),
                    note_id: notes.get(i.unit_id.as_str()).copied().unwrap_or_default().to_owned(),
                    time: i.time,
                    score: i.score,
                })
                .collect(),
            proposition_id: c.proposition_id,
            subject_id: c.subject_id,
            hadm_id: c.hadm_id,
            claim: c.claim,
            label: c.label,
        });
    }
    let path = cfg.work(INSTANCES);
    write_jsonl(&path, &out, &hash)?;
    run.output(&path);
    println!("{} instances -> {}", out.len(), path.display());
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationReport {
    verifier: VerifierKind,
    n_instances: usize,
    n_failed: usize,
    lambda: f64,
    best_bias: f64,
    best_objective: f64,
    metrics_at_zero: ClassMetrics,
    metrics_at_best: ClassMetrics,
    curve: Vec<BiasPoint>,
}

fn parse_grid(spec: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("grid `{spec}` must be lo:hi:step"))?;
    match parts[..] {
        [lo, hi, step] => Ok((lo, hi, step)),
        _ => bail!("grid `{spec}` must be lo:hi:step"),
    }
}

fn calibrate(mut cfg: PipelineConfig, a: CalibrateArgs) -> Result<()> {
    if let Some(g) = &a.grid {
        (cfg.calibration.lo, cfg.calibration.hi, cfg.calibration.step) = parse_grid(g)?;
    }
    if let Some(l) = a.lambda {
        cfg.calibration.lambda = l;
    }
    if a.fit_toy {
        cfg.verifier.kind = VerifierKind::Toy;
    }
    let hash = prepare(&mut cfg)?;
    let seed = seed_for(&cfg, "calibrate");
    let mut run = Run::start("calibrate", &hash, seed);
    let path = cfg.work(INSTANCES);
    require(&path, "build-instances")?;
    run.input(&path);
    let instances: Vec<InstanceRecord> = read_jsonl(&path)?;
    let labeled: Vec<LabeledInstance> = instances
        .iter()
        .filter_map(|i| i.label.map(|label| LabeledInstance { claim: i.claim.clone(), evidence: i.evidence.clone(), label }))
        .collect();
    if labeled.is_empty() {
        bail!("{} has no labeled instances", path.display());
    }

    if a.fit_toy {
        let settings = claimpref::verifier::ToyTrainSettings { seed, ..cfg.verifier.toy };
        let model = train_toy_verifier(&labeled, &cfg.verifier.loss, &settings)?;
        let model_path = cfg.verifier.toy_model.clone().unwrap_or_else(|| cfg.work(TOY_MODEL));
        write_json(&model_path, &model, &hash)?;
        run.output(&model_path);
        println!("fitted toy verifier on {} instances -> {}", labeled.len(), model_path.display());
    }
    let verifier = build_verifier(&cfg, &mut run)?;
    let mut dev: Vec<(VerifierLogits, claimpref::verifier::Verdict)> = Vec::with_capacity(labeled.len());
    let mut n_failed = 0;
    for inst in &labeled {
        let ev: Vec<&str> = inst.evidence.iter().map(String::as_str).collect();
        match verifier.score(&inst.claim, &ev) {
            Ok(l) if l.is_finite() => dev.push((l, inst.label)),
            Ok(_) | Err(_) => n_failed += 1,
        }
    }
    if dev.is_empty() {
        bail!("the verifier failed on every instance");
    }
    let grid = bias_grid(cfg.calibration.lo, cfg.calibration.hi, cfg.calibration.step)?;
    let sweep = sweep_bias(&dev, &grid, cfg.calibration.lambda)?;
    let metrics = |b: f64| -> Result<ClassMetrics> {
        let pairs: Vec<_> = dev.iter().map(|(l, y)| Ok((*y, decode(l, b)?.verdict))).collect::<claimpref::Result<_>>()?;
        Ok(compute_metrics(&pairs)?)
    };
    let report = CalibrationReport {
        verifier: cfg.verifier.kind,
        n_instances: dev.len(),
        n_failed,
        lambda: sweep.lambda,
        best_bias: sweep.best_bias,
        best_objective: sweep.best_objective,
        metrics_at_zero: metrics(0.0)?,
        metrics_at_best: metrics(sweep.best_bias)?,
        curve: sweep.curve,
    };
    let out = cfg.work("calibration.json");
    write_json(&out, &report, &hash)?;
    run.output(&out);
    println!(
        "best_b = {:+.2}  J = {:.4}  macro-F1 {:.4} -> {:.4}  NS recall {:.4} -> {:.4}  ({} instances, {} failed)",
        report.best_bias,
        report.best_objective,
        report.metrics_at_zero.macro_f1,
        report.metrics_at_best.macro_f1,
        report.metrics_at_zero.recall_ns(),
        report.metrics_at_best.recall_ns(),
        report.n_instances,
        n_failed
    );
    finish(run, &cfg)
}

fn parse_strategies(arg: Option<&str>, default: Strategy) -> Result<Vec<Strategy>> {
    match arg {
        None => Ok(vec![default]),
        Some("all") => Ok(Strategy::ALL.to_vec()),
        Some(s) => Ok(vec![s.parse()?]),
    }
}

fn pairs_file(strategy: Strategy) -> String {
    format!("pairs-{}.jsonl", strategy.name().replace('_', "-"))
}

#[derive(Debug, Serialize, Deserialize)]
struct MiningReport {
    summary: MiningSummary,
    diagnostics: Option<DiagnosticsReport>,
}

fn mine(mut cfg: PipelineConfig, a: MineArgs) -> Result<()> {
    let strategies = parse_strategies(a.strategy.as_deref(), cfg.strategy)?;
    if let [s] = strategies[..] {
        cfg.strategy = s;
    }
    if let Some(b) = a.bias_prec {
        cfg.mining.scoring.bias_prec = b;
    }
    if let Some(d) = a.delta {
        cfg.mining.scoring.delta = d;
    }
    let hash = prepare(&mut cfg)?;
    let seed = seed_for(&cfg, "mine");
    let mut run = Run::start("mine", &hash, seed);
    let corpora = load_index(&cfg, &mut run)?;
    let world = load_world(&cfg, &mut run, "the synthetic generator")?;
    let verifier = build_verifier(&cfg, &mut run)?;
    let filters = cfg.filters.compile()?;
    let generator = SynthGenerator { world, spec: cfg.synth.corruption };
    let build = build_pools(&corpora, &generator, verifier.as_ref(), &filters, &cfg.mining, seed)?;
    let pools_path = cfg.work(POOLS);
    write_json(&pools_path, &build, &hash)?;
    run.output(&pools_path);

    let mut rows = Vec::new();
    for strategy in strategies {
        let (pairs, summary) = select_pairs(&build, &cfg.mining, SelectionSettings::from_config(&cfg.mining, strategy), seed);
        let pairs_path = cfg.work(&pairs_file(strategy));
        write_jsonl(&pairs_path, &pairs, &hash)?;
        let diagnostics = mining_diagnostics(&pairs).ok();
        let report_path = cfg.work(&format!("mining-{}.json", strategy.name().replace('_', "-")));
        write_json(&report_path, &MiningReport { summary: summary.clone(), diagnostics }, &hash)?;
        run.output(&pairs_path);
        run.output(&report_path);
        println!(
            "{}: {} pairs from {} prompts ({} prefiltered, {} generator failures) -> {}",
            strategy.name(),
            summary.n_pairs,
            summary.n_prompts,
            summary.n_prefiltered,
            summary.n_generator_failures,
            pairs_path.display()
        );
        if let Some(d) = diagnostics {
            rows.push((strategy.name().to_owned(), d));
        }
    }
    if !rows.is_empty() {
        print!("{}", diagnostics_table(&rows));
    }
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagnosticsRow {
    name: String,
    path: PathBuf,
    report: DiagnosticsReport,
}

#[derive(Debug, Serialize, Deserialize)]
struct DiagnosticsFile {
    rows: Vec<DiagnosticsRow>,
}

fn diagnose(mut cfg: PipelineConfig, a: DiagnoseArgs) -> Result<()> {
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("diagnose", &hash, seed_for(&cfg, "diagnose"));
    let files = if a.pairs.is_empty() {
        let mut found: Vec<PathBuf> = std::fs::read_dir(&cfg.paths.work_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("pairs-") && n.ends_with(".jsonl"))
            })
            .collect();
        found.sort();
        if found.is_empty() {
            bail!("no pair files in {}; run `claimpref mine` first", cfg.paths.work_dir.display());
        }
        found
    } else {
        a.pairs
    };
    let mut rows = Vec::new();
    for path in files {
        run.input(&path);
        let pairs: Vec<PreferencePair> = read_jsonl(&path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .map_or_else(|| path.display().to_string(), |s| s.trim_start_matches("pairs-").to_owned());
        match mining_diagnostics(&pairs) {
            Ok(report) => rows.push(DiagnosticsRow { name, path, report }),
            Err(e) => log::warn!("{}: {e}", path.display()),
        }
    }
    print!("{}", diagnostics_table(&rows.iter().map(|r| (r.name.clone(), r.report)).collect::<Vec<_>>()));
    let out = cfg.work("diagnostics.json");
    write_json(&out, &DiagnosticsFile { rows }, &hash)?;
    run.output(&out);
    finish(run, &cfg)
}

fn load_pools(cfg: &PipelineConfig, run: &mut Run) -> Result<PoolBuild> {
    let path = cfg.work(POOLS);
    require(&path, "mine")?;
    run.input(&path);
    read_json(&path)
}

#[derive(Debug, Serialize, Deserialize)]
struct StabilityFile {
    points: Vec<StabilityPoint>,
    pair_count_spread: Option<f64>,
}

fn stability(mut cfg: PipelineConfig, a: StabilityArgs) -> Result<()> {
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("stability", &hash, seed_for(&cfg, "stability"));
    let build = load_pools(&cfg, &mut run)?;
    let deltas = a.deltas.unwrap_or_else(|| claimpref::eval::STABILITY_DELTAS.to_vec());
    let biases = a.biases.unwrap_or_else(|| claimpref::eval::STABILITY_BIASES.to_vec());
    let points = stability_sweep(&build, &cfg.mining, &deltas, &biases, seed_for(&cfg, "mine"));
    let spread = pair_count_spread(&points);
    print!("{}", stability_table(&points));
    match spread {
        Some(s) => println!("pair-count spread (max - min) / min = {s:.4}"),
        None => println!("some grid points produced no pairs"),
    }
    let out = cfg.work("stability.json");
    write_json(&out, &StabilityFile { points, pair_count_spread: spread }, &hash)?;
    run.output(&out);
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct DpoSummary {
    n_pairs: usize,
    final_loss: f64,
    mean_margin: f64,
    frac_positive: f64,
    beta_sweep: Vec<BetaSweepPoint>,
}

fn dpo_train_toy(mut cfg: PipelineConfig, a: DpoArgs) -> Result<()> {
    let t = &mut cfg.dpo.train;
    if let Some(v) = a.beta {
        t.beta = v;
    }
    if let Some(v) = a.steps {
        t.steps = v;
    }
    if let Some(v) = a.lr {
        t.learning_rate = v;
    }
    if let Some(v) = a.pairs {
        cfg.dpo.n_pairs = v;
    }
    let hash = prepare(&mut cfg)?;
    let seed = seed_for(&cfg, "dpo-train-toy");
    let mut run = Run::start("dpo-train-toy", &hash, seed);
    let d = cfg.dpo;
    let train = claimpref::dpo::DpoTrainConfig { seed, ..d.train };
    let pairs = synthetic_toy_pairs(d.n_pairs, d.n_prompts, d.vocab, seed)?;
    let result = train_toy_dpo(&pairs, d.n_prompts, d.vocab, &train)?;
    let sweep = if a.beta_sweep { beta_sweep(&pairs, d.n_prompts, d.vocab, &BETA_GRID, &train)? } else { Vec::new() };
    let summary = DpoSummary {
        n_pairs: pairs.len(),
        final_loss: result.trace.last().map_or(f64::NAN, |p| p.loss),
        mean_margin: result.mean_margin(),
        frac_positive: result.frac_positive(),
        beta_sweep: sweep,
    };
    let trace_path = cfg.work("dpo/trace.jsonl");
    write_jsonl::<TracePoint, _>(&trace_path, &result.trace, &hash)?;
    let summary_path = cfg.work("dpo/summary.json");
    write_json(&summary_path, &summary, &hash)?;
    run.output(&trace_path);
    run.output(&summary_path);
    println!(
        "beta {} lr {} steps {}: loss {:.4}, mean s {:.4}, s > 0 on {:.1}% of {} pairs",
        train.beta,
        train.learning_rate,
        train.steps,
        summary.final_loss,
        summary.mean_margin,
        100.0 * summary.frac_positive,
        summary.n_pairs
    );
    for p in &summary.beta_sweep {
        println!("  beta {:<5} loss {:.4}  mean s {:.4}  s > 0 {:.1}%", p.beta, p.final_loss, p.mean_margin, 100.0 * p.frac_positive);
    }
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct RerankSummary {
    k: usize,
    base: RunAggregates,
    best_of_k: RunAggregates,
    gate: GateResult,
}

fn best_of_k_cmd(mut cfg: PipelineConfig, a: BestOfKArgs) -> Result<()> {
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("best-of-k", &hash, seed_for(&cfg, "best-of-k"));
    let build = load_pools(&cfg, &mut run)?;
    let k = a.k.unwrap_or(cfg.mining.generation.candidates_per_prompt);
    if k == 0 {
        bail!("k must be >= 1");
    }
    let mut records = Vec::new();
    let mut base_out = Vec::new();
    let mut best_out = Vec::new();
    let mut base_stats = Vec::new();
    let mut best_stats = Vec::new();
    for pool in &build.pools {
        let cands = &pool.candidates[..k.min(pool.candidates.len())];
        let stats: Vec<SummaryStats> = cands.iter().map(|c| c.stats).collect();
        let Ok(pick) = best_of_k(&stats, &cfg.mining.weights) else { continue };
        let pid = pool.prompt_id();
        let utility = |i: usize| claimpref::mining::utility(&stats[i], &cfg.mining.weights);
        records.push(RerankRecord {
            prompt_id: pid.clone(),
            subject_id: pool.window.subject_id.clone(),
            chosen_index: pick,
            chosen_utility: utility(pick),
            base_index: 0,
            base_utility: utility(0),
            chosen_stats: stats[pick],
            base_stats: stats[0],
        });
        let out = |i: usize| SystemOutput { prompt_id: pid.clone(), subject_id: pool.window.subject_id.clone(), text: cands[i].text.clone() };
        base_out.push(out(0));
        best_out.push(out(pick));
        base_stats.push((pid.clone(), stats[0]));
        best_stats.push((pid, stats[pick]));
    }
    let base = aggregate_run("base", &base_stats, &cfg.eval.validity);
    let best = aggregate_run(&format!("best-of-{k}"), &best_stats, &cfg.eval.validity);
    let gate = degeneration_gate(&best, &base, &cfg.eval.gate)?;
    let files = [
        ("best-of-k.jsonl", write_jsonl(&cfg.work("best-of-k.jsonl"), &records, &hash).map(drop)),
        ("outputs-base.jsonl", write_jsonl(&cfg.work("outputs-base.jsonl"), &base_out, &hash).map(drop)),
        ("outputs-best-of-k.jsonl", write_jsonl(&cfg.work("outputs-best-of-k.jsonl"), &best_out, &hash).map(drop)),
    ];
    for (rel, res) in files {
        res?;
        run.output(&cfg.work(rel));
    }
    print!("{}", runs_table(&[base.clone(), best.clone()]));
    println!("degeneration gate: {}", if gate.pass { "pass" } else { "FAIL" });
    let summary_path = cfg.work("best-of-k.json");
    write_json(&summary_path, &RerankSummary { k, base, best_of_k: best, gate }, &hash)?;
    run.output(&summary_path);
    finish(run, &cfg)
}

#[derive(Debug, Serialize, Deserialize)]
struct EvalReport {
    system: RunAggregates,
    baseline: Option<RunAggregates>,
    gate: Option<GateResult>,
    judge: Option<JudgeSummary>,
    n_unscored: usize,
}

fn score_outputs(
    outputs: &[SystemOutput],
    corpora: &[SubjectCorpus],
    verifier: &dyn VerifierClient,
    cfg: &PipelineConfig,
) -> Result<(Vec<(String, SummaryStats)>, usize)> {
    let filters = cfg.filters.compile()?;
    let mut scored = Vec::with_capacity(outputs.len());
    let mut skipped = 0;
    for (i, o) in outputs.iter().enumerate() {
        match corpus_for(corpora, &o.subject_id) {
            Some(corpus) => {
                let c = score_candidate(i, &o.text, corpus, verifier, &filters, &cfg.mining.scoring);
                scored.push((o.prompt_id.clone(), c.stats));
            }
            None => {
                log::warn!("output for {}: subject {} is not indexed; skipped", o.prompt_id, o.subject_id);
                skipped += 1;
            }
        }
    }
    Ok((scored, skipped))
}

fn eval(mut cfg: PipelineConfig, a: EvalArgs) -> Result<()> {
    let hash = prepare(&mut cfg)?;
    let mut run = Run::start("eval", &hash, seed_for(&cfg, "eval"));
    let corpora = load_index(&cfg, &mut run)?;
    let verifier = build_verifier(&cfg, &mut run)?;
    run.input(&a.outputs);
    let outputs: Vec<SystemOutput> = read_jsonl(&a.outputs)?;
    let (scored, mut n_unscored) = score_outputs(&outputs, &corpora, verifier.as_ref(), &cfg)?;
    let system = aggregate_run(&a.name, &scored, &cfg.eval.validity);
    let (baseline, gate) = match &a.baseline {
        Some(path) => {
            run.input(path);
            let base_outputs: Vec<SystemOutput> = read_jsonl(path)?;
            let (base_scored, skipped) = score_outputs(&base_outputs, &corpora, verifier.as_ref(), &cfg)?;
            n_unscored += skipped;
            let base = aggregate_run("baseline", &base_scored, &cfg.eval.validity);
            let gate = degeneration_gate(&system, &base, &cfg.eval.gate)
                .context("system and baseline outputs must cover the same prompts")?;
            (Some(base), Some(gate))
        }
        None => (None, None),
    };
    let judge = match &a.judge {
        Some(path) => {
            run.input(path);
            let labels: Vec<JudgeLabel> = read_jsonl(path)?;
            for l in &labels {
                l.validate()?;
            }
            Some(judge_aggregate(&labels, cfg.eval.judge_hc_confidence))
        }
        None => None,
    };
    let mut rows = vec![system.clone()];
    rows.extend(baseline.clone());
    print!("{}", runs_table(&rows));
    if let Some(g) = gate {
        println!(
            "degeneration gate: {} (valid {:+.3}, chars ratio {:.3}, claims {:+.2})",
            if g.pass { "pass" } else { "FAIL" },
            g.valid_margin,
            g.char_ratio,
            g.claim_margin
        );
    }
    if let Some(j) = judge {
        println!("judge: NS-rate {}, HCNS {}", j.ns_rate.map_or("-".into(), |r| format!("{:.2}%", 100.0 * r)), j.n_hcns);
    }
    let out = cfg.work(&format!("eval-{}.json", a.name));
    write_json(&out, &EvalReport { system, baseline, gate, judge, n_unscored }, &hash)?;
    run.output(&out);
    finish(run, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_parses() {
        assert_eq!(parse_grid("-0.8:1.6:0.05").unwrap(), (-0.8, 1.6, 0.05));
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a:b:c").is_err());
    }

    #[test]
    fn strategy_arguments() {
        assert_eq!(parse_strategies(Some("all"), Strategy::Full).unwrap().len(), 4);
        assert_eq!(parse_strategies(Some("no-hcns"), Strategy::Full).unwrap(), [Strategy::NoHcns]);
        assert_eq!(parse_strategies(None, Strategy::Random).unwrap(), [Strategy::Random]);
        assert!(parse_strategies(Some("best"), Strategy::Full).is_err());
        assert_eq!(pairs_file(Strategy::NoLengthCoverage), "pairs-no-length-coverage.jsonl");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
