//! End-to-end pipeline orchestration and stage plumbing.
//!
//! Stage order: filter (local duplicates, unstructured, then a
//! sentence-hash round to drop broadcast duplicates), word-hash
//! aggregation into the global frequency table, per-client discovery
//! (cluster, mine, refine), server pooling, model training from manual
//! rules, rule prediction for unruled templates, and extraction. Every
//! stage writes a named artifact so stages can also run independently.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::{
    aggregate_word_hashes, detect_common_hashes, pool_templates, ClientUpload,
    GlobalFrequencyTable, TemplateBank,
};
use crate::discovery::{discover_client_templates, ClusterConfig, RefineConfig};
use crate::error::{Error, Result};
use crate::filters::{
    drop_global_duplicates, drop_local_duplicates, drop_unstructured, FilterConfig,
};
use crate::hash::{Salt, SentenceHash};
use crate::ingest::{
    generate_corpus, load_corpus, save_corpus, Corpus, GenerationSpec, GeneratorBank,
    NoiseFractions,
};
use crate::kb::{extract_all, ExtractionReport, KnowledgeBase};
use crate::notification::Notification;
use crate::semantics::{
    train, EmbeddingTable, EncoderModel, LabeledTemplate, SemanticRule, TrainConfig,
};
use crate::text::tokenize;

/// Flat knob set shared by the pipeline and the CLI. Field names double as
/// config-file keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub delta: f64,
    pub min_pts: usize,
    pub theta_param: f64,
    pub theta_split: f64,
    pub l_max: usize,
    pub threshold: f64,
    pub salt: u64,
    pub seed: u64,
    pub hidden: usize,
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            delta: 0.5,
            min_pts: 2,
            theta_param: 0.01,
            theta_split: 0.2,
            l_max: crate::kb::DEFAULT_MAX_SLOT_TOKENS,
            threshold: 0.5,
            salt: 0,
            seed: 0,
            hidden: crate::semantics::encoder::DEFAULT_HIDDEN,
            embedding_dim: crate::semantics::embedding::DEFAULT_DIM,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            max_epochs: 15,
            patience: 3,
            val_fraction: 0.2,
        }
    }
}

impl PipelineParams {
    pub fn cluster_config(&self) -> ClusterConfig {
        ClusterConfig {
            delta: self.delta,
            min_pts: self.min_pts,
        }
    }

    pub fn refine_config(&self) -> RefineConfig {
        RefineConfig {
            theta_param: self.theta_param,
            theta_split: self.theta_split,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            max_epochs: self.max_epochs,
            patience: self.patience,
            val_fraction: self.val_fraction,
            seed: self.seed,
        }
    }

    pub fn salt(&self) -> Salt {
        Salt(self.salt)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub filter_config: Option<PathBuf>,
    pub manual_rules: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Load this model instead of training one.
    pub model_in: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub params: PipelineParams,
}

/// Artifact locations inside the pipeline output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub out_dir: PathBuf,
}

impl Artifacts {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Artifacts {
            out_dir: out_dir.into(),
        }
    }

    pub fn filtered(&self) -> PathBuf {
        self.out_dir.join("filtered.jsonl")
    }
    pub fn frequencies(&self) -> PathBuf {
        self.out_dir.join("frequencies.json")
    }
    pub fn uploads(&self) -> PathBuf {
        self.out_dir.join("uploads.jsonl")
    }
    pub fn bank(&self) -> PathBuf {
        self.out_dir.join("bank.json")
    }
    pub fn model(&self) -> PathBuf {
        self.out_dir.join("model.json")
    }
    pub fn predicted_rules(&self) -> PathBuf {
        self.out_dir.join("predicted_rules.jsonl")
    }
    pub fn triples(&self) -> PathBuf {
        self.out_dir.join("triples.jsonl")
    }
    pub fn report(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n_notifications: usize,
    pub n_after_filter: usize,
    pub n_clients: usize,
    pub n_candidate_templates: usize,
    pub n_pooled_templates: usize,
    pub n_manual_rules: usize,
    pub n_skipped_manual_rules: usize,
    pub n_predicted_rules: usize,
    pub extraction: ExtractionReport,
    pub stage_seconds: Vec<(String, f64)>,
}

/// Client-side filtering plus the broadcast-duplicate round-trip. Returns
/// the filtered corpus (grouped per client) and the detected common
/// sentence hashes.
pub fn filter_stage(
    corpus: &Corpus,
    config: &FilterConfig,
    salt: Salt,
) -> Result<(Corpus, BTreeSet<SentenceHash>)> {
    config.validate()?;
    let mut per_user: Vec<Vec<Notification>> = Vec::new();
    for user in corpus.users() {
        let owned: Vec<Notification> = corpus.of_user(user).into_iter().cloned().collect();
        let kept = drop_unstructured(&drop_local_duplicates(&owned), config)?;
        per_user.push(kept);
    }
    // Sentence-hash upload round: count contributing clients per hash.
    let uploads: Vec<ClientUpload> = per_user
        .iter()
        .zip(corpus.users())
        .map(|(kept, user)| {
            let refs: Vec<&Notification> = kept.iter().collect();
            ClientUpload::from_notifications(user.0.clone(), &refs, salt)
        })
        .collect();
    let common = detect_common_hashes(&uploads, config.global_dup_user_fraction)?;

    let filtered: Vec<Notification> = per_user
        .into_iter()
        .flat_map(|kept| drop_global_duplicates(&kept, &common, salt))
        .collect();
    Ok((Corpus::from_notifications(filtered), common))
}

/// Build hash-only uploads (word and sentence hashes) from a filtered
/// corpus.
pub fn hash_uploads(corpus: &Corpus, salt: Salt) -> Vec<ClientUpload> {
    corpus
        .users()
        .map(|user| {
            let refs = corpus.of_user(user);
            ClientUpload::from_notifications(user.0.clone(), &refs, salt)
        })
        .collect()
}

/// Per-client discovery producing complete uploads.
pub fn discover_stage(
    filtered: &Corpus,
    freq: &GlobalFrequencyTable,
    cluster: &ClusterConfig,
    refine: &RefineConfig,
    salt: Salt,
) -> Result<Vec<ClientUpload>> {
    let users: Vec<_> = filtered.users().cloned().collect();
    users
        .par_iter()
        .map(|user| {
            let refs = filtered.of_user(user);
            let templates = discover_client_templates(&refs, freq, cluster, refine)?;
            let mut upload = ClientUpload::from_notifications(user.0.clone(), &refs, salt);
            upload.templates = templates;
            Ok(upload)
        })
        .collect()
}

/// Parse a rules file and resolve it against a bank, skipping rules whose
/// template id is not in the bank (discovery is not guaranteed to recover
/// every labeled template). Returns resolved pairs and the skip count.
pub fn load_rules_intersecting(
    path: &Path,
    bank: &TemplateBank,
) -> Result<(Vec<LabeledTemplate>, usize)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut resolved = Vec::new();
    let mut skipped = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rule: SemanticRule = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let rule = SemanticRule::new(rule.template_id, rule.ktts)
            .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        match bank.get(rule.template_id) {
            Some(pooled) => {
                rule.validate_against(&pooled.template)
                    .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
                resolved.push(LabeledTemplate {
                    template: pooled.template.clone(),
                    rule,
                });
            }
            None => skipped += 1,
        }
    }
    Ok((resolved, skipped))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, 1, e.to_string()))
}

pub fn write_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for item in items {
        let line = serde_json::to_string(&item).expect("artifacts serialize");
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_uploads(path: &Path) -> Result<Vec<ClientUpload>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| {
            serde_json::from_str(l).map_err(|e| Error::parse(path, idx + 1, e.to_string()))
        })
        .collect()
}

/// Run every stage, writing artifacts into `config.out_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    let artifacts = Artifacts::new(&config.out_dir);
    fs::create_dir_all(&artifacts.out_dir).map_err(|e| Error::io(&artifacts.out_dir, e))?;
    let params = &config.params;
    let mut stage_seconds = Vec::new();

    // filter
    let t0 = Instant::now();
    let corpus = load_corpus(&config.corpus).map_err(|e| e.in_stage("filter"))?;
    let filter_config = match &config.filter_config {
        Some(path) => FilterConfig::load(path).map_err(|e| e.in_stage("filter"))?,
        None => FilterConfig::default(),
    };
    let (filtered, _common) =
        filter_stage(&corpus, &filter_config, params.salt()).map_err(|e| e.in_stage("filter"))?;
    save_corpus(&filtered, &artifacts.filtered()).map_err(|e| e.in_stage("filter"))?;
    stage_seconds.push(("filter".to_string(), t0.elapsed().as_secs_f64()));

    // aggregate
    let t0 = Instant::now();
    let uploads = hash_uploads(&filtered, params.salt());
    let freq =
        aggregate_word_hashes(&uploads, params.salt()).map_err(|e| e.in_stage("aggregate"))?;
    write_json(&freq, &artifacts.frequencies()).map_err(|e| e.in_stage("aggregate"))?;
    stage_seconds.push(("aggregate".to_string(), t0.elapsed().as_secs_f64()));

    // discover
    let t0 = Instant::now();
    let uploads = discover_stage(
        &filtered,
        &freq,
        &params.cluster_config(),
        &params.refine_config(),
        params.salt(),
    )
    .map_err(|e| e.in_stage("discover"))?;
    write_jsonl(uploads.iter(), &artifacts.uploads()).map_err(|e| e.in_stage("discover"))?;
    let n_candidate_templates = uploads.iter().map(|u| u.templates.len()).sum();
    stage_seconds.push(("discover".to_string(), t0.elapsed().as_secs_f64()));

    // pool
    let t0 = Instant::now();
    let bank = pool_templates(&uploads);
    write_json(&bank, &artifacts.bank()).map_err(|e| e.in_stage("pool"))?;
    stage_seconds.push(("pool".to_string(), t0.elapsed().as_secs_f64()));

    // train (or load)
    let t0 = Instant::now();
    let table = match &config.embeddings {
        Some(path) => EmbeddingTable::load(path).map_err(|e| e.in_stage("train"))?,
        None => EmbeddingTable::fallback_only(params.embedding_dim),
    };
    let mut n_manual_rules = 0usize;
    let mut n_skipped_manual_rules = 0usize;
    let mut manual: Vec<LabeledTemplate> = Vec::new();
    if let Some(path) = &config.manual_rules {
        let (resolved, skipped) =
            load_rules_intersecting(path, &bank).map_err(|e| e.in_stage("train"))?;
        n_manual_rules = resolved.len();
        n_skipped_manual_rules = skipped;
        manual = resolved;
    }
    let model: Option<EncoderModel> = if let Some(path) = &config.model_in {
        Some(EncoderModel::load(path).map_err(|e| e.in_stage("train"))?)
    } else if !manual.is_empty() {
        let space = label_space_of(&manual);
        let model = train(&manual, &space, table, &params.train_config())
            .map_err(|e| e.in_stage("train"))?;
        model.save(&artifacts.model()).map_err(|e| e.in_stage("train"))?;
        Some(model)
    } else {
        None
    };
    stage_seconds.push(("train".to_string(), t0.elapsed().as_secs_f64()));

    // predict rules for templates without a manual rule
    let t0 = Instant::now();
    let manual_ids: BTreeSet<_> = manual.iter().map(|l| l.rule.template_id).collect();
    let mut predicted: Vec<SemanticRule> = Vec::new();
    if let Some(model) = &model {
        for pooled in bank.iter() {
            if !manual_ids.contains(&pooled.template.template_id) {
                predicted.push(model.predict_rule(&pooled.template, params.threshold));
            }
        }
    }
    crate::semantics::save_rules(&artifacts.predicted_rules(), predicted.iter())
        .map_err(|e| e.in_stage("predict-rules"))?;
    stage_seconds.push(("predict-rules".to_string(), t0.elapsed().as_secs_f64()));

    // extract over the original corpus
    let t0 = Instant::now();
    let mut rules: BTreeMap<_, _> = predicted
        .into_iter()
        .map(|r| (r.template_id, r))
        .collect();
    for l in &manual {
        rules.insert(l.rule.template_id, l.rule.clone());
    }
    let triples_path = artifacts.triples();
    if triples_path.exists() {
        fs::remove_file(&triples_path).map_err(|e| Error::io(&triples_path, e))?;
    }
    let mut kb = KnowledgeBase::open(&triples_path).map_err(|e| e.in_stage("extract"))?;
    let extraction = extract_all(&corpus, &bank, &rules, &mut kb, params.l_max)
        .map_err(|e| e.in_stage("extract"))?;
    stage_seconds.push(("extract".to_string(), t0.elapsed().as_secs_f64()));

    let report = PipelineReport {
        n_notifications: corpus.len(),
        n_after_filter: filtered.len(),
        n_clients: filtered.n_users(),
        n_candidate_templates,
        n_pooled_templates: bank.len(),
        n_manual_rules,
        n_skipped_manual_rules,
        n_predicted_rules: rules.len() - n_manual_rules,
        extraction,
        stage_seconds,
    };
    write_json(&report, &artifacts.report())?;
    Ok(report)
}

/// Smallest label space containing every rule in the set.
pub fn label_space_of(labeled: &[LabeledTemplate]) -> crate::semantics::LabelSpace {
    let mut zero = BTreeSet::new();
    let mut one = BTreeSet::new();
    for l in labeled {
        for ktt in &l.rule.ktts {
            match &ktt.entity {
                crate::semantics::KttEntity::Fixed(v) => {
                    zero.insert((ktt.relation, v.clone()));
                }
                crate::semantics::KttEntity::FromSlot(_) => {
                    one.insert(ktt.relation);
                }
            }
        }
    }
    crate::semantics::LabelSpace {
        zero_param: zero.into_iter().collect(),
        one_param: one.into_iter().collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchEntry {
    pub n_notifications: usize,
    pub discovery_seconds: f64,
    pub extraction_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
}

/// Time template discovery and knowledge extraction over synthetic corpora
/// of the given sizes.
pub fn run_bench(sizes: &[usize], seed: u64) -> Result<BenchReport> {
    let mut entries = Vec::new();
    for &n in sizes {
        // Enough clients that client-fraction thresholds stay meaningful.
        let users = (n / 250).max(10);
        let per_user = (n / users).max(1);
        let spec = GenerationSpec {
            bank: GeneratorBank::standard(),
            n_users: users,
            notifications_per_user: (per_user, per_user),
            noise: NoiseFractions {
                unstructured: 0.1,
                local_dup: 0.1,
                global_dup: 0.05,
            },
            seed,
        };
        let (corpus, _) = generate_corpus(&spec)?;
        let params = PipelineParams::default();

        let t0 = Instant::now();
        let (filtered, _) =
            filter_stage(&corpus, &GeneratorBank::filter_config(), params.salt())?;
        let freq = aggregate_word_hashes(&hash_uploads(&filtered, params.salt()), params.salt())?;
        let uploads = discover_stage(
            &filtered,
            &freq,
            &params.cluster_config(),
            &params.refine_config(),
            params.salt(),
        )?;
        let _bank = pool_templates(&uploads);
        let discovery_seconds = t0.elapsed().as_secs_f64();

        let truth_bank = spec.bank.to_template_bank(users as u64);
        let rules: BTreeMap<_, _> = spec
            .bank
            .labeled_templates()
            .into_iter()
            .map(|l| (l.rule.template_id, l.rule))
            .collect();
        let t0 = Instant::now();
        let mut kb = KnowledgeBase::in_memory();
        extract_all(&corpus, &truth_bank, &rules, &mut kb, params.l_max)?;
        let extraction_seconds = t0.elapsed().as_secs_f64();

        entries.push(BenchEntry {
            n_notifications: corpus.len(),
            discovery_seconds,
            extraction_seconds,
        });
    }
    Ok(BenchReport { entries })
}

/// Convenience wrapper used by tests and the CLI for one-shot synthetic
/// corpora written to disk.
pub fn generate_to_dir(spec: &GenerationSpec, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (corpus, truth) = generate_corpus(spec)?;
    save_corpus(&corpus, &dir.join("corpus.jsonl"))?;
    crate::ingest::save_ground_truth(&truth, &dir.join("truth.jsonl"))?;
    write_json(
        &spec.bank.to_template_bank(spec.n_users as u64),
        &dir.join("truth_bank.json"),
    )?;
    let rules: Vec<SemanticRule> = spec
        .bank
        .labeled_templates()
        .into_iter()
        .map(|l| l.rule)
        .collect();
    crate::semantics::save_rules(&dir.join("truth_rules.jsonl"), rules.iter())?;
    GeneratorBank::filter_config().save(&dir.join("filter_config.json"))?;
    Ok(())
}

/// Require tokenized text for ad-hoc CLI input.
pub fn tokenize_nonempty(text: &str) -> Result<crate::text::TokenSeq> {
    let toks = tokenize(text);
    if toks.is_empty() {
        return Err(Error::InvalidInput("text has no tokens".into()));
    }
    Ok(toks)
}
