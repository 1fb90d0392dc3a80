//! Command line driver: each subcommand wraps one pipeline stage so stages
//! can run independently, plus `run` for the whole chain.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 stage failure.

mod params;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use notikb_core::aggregator::{aggregate_word_hashes, pool_templates, TemplateBank};
use notikb_core::discovery::calibrate_delta;
use notikb_core::error::Error;
use notikb_core::eval::synth::{synthetic_labeled_bank, SyntheticBankConfig};
use notikb_core::eval::{evaluate_cv, EvalMode};
use notikb_core::ingest::{generate_corpus, load_corpus, save_corpus, GenerationSpec, GeneratorBank, NoiseFractions};
use notikb_core::kb::{extract_all, KnowledgeBase};
use notikb_core::pipeline::{
    self, discover_stage, filter_stage, hash_uploads, label_space_of, run_bench, run_pipeline,
    Artifacts, PipelineConfig,
};
use notikb_core::semantics::{
    load_manual_rules, save_rules, train, EmbeddingTable, EncoderModel, SemanticRule,
};
use notikb_core::{FilterConfig, Relation, TemplateId, UserId};

use params::ParamFlags;

#[derive(Parser)]
#[command(
    name = "notikb",
    about = "Discover notification templates, learn their semantics, and extract knowledge triples",
    version
)]
struct Cli {
    /// JSON parameter file; values in it override command line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with ground truth into a directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 120)]
        min_notifications: usize,
        #[arg(long, default_value_t = 160)]
        max_notifications: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_unstructured: f64,
        #[arg(long, default_value_t = 0.1)]
        noise_local: f64,
        #[arg(long, default_value_t = 0.05)]
        noise_global: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Remove local duplicates, unstructured messages, and broadcast
    /// duplicates.
    Filter {
        #[arg(long)]
        corpus: PathBuf,
        /// Filter configuration JSON (messenger apps, patterns, duplicate
        /// threshold).
        #[arg(long)]
        filter_config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Aggregate salted word hashes from a filtered corpus into the global
    /// frequency table.
    Aggregate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Run per-client clustering, template mining and refinement; write
    /// client uploads.
    Discover {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        frequencies: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Pool client uploads into the deduplicated, filtered template bank.
    Pool {
        #[arg(long)]
        uploads: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the semantic rule model from manually labeled rules.
    Train {
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Skip rules whose template id is not in the bank instead of
        /// failing.
        #[arg(long)]
        skip_unknown: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Predict semantic rules for bank templates that have no manual rule.
    PredictRules {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        /// Manual rules whose templates are skipped.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Match notifications against the bank and emit knowledge triples.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        bank: PathBuf,
        /// Rule files; later files override earlier ones per template.
        #[arg(long, required = true)]
        rules: Vec<PathBuf>,
        /// Triple log (appended to if it exists).
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Query the knowledge base for one user's triples.
    Query {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        relation: Option<Relation>,
    },
    /// Cross-validate the semantic model (unseen-apps or new-templates).
    Evaluate {
        /// Labeled rules resolved against --bank; omit both for the
        /// built-in synthetic bank.
        #[arg(long, requires = "bank")]
        rules: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        mode: EvalMode,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a CSV of label, precision, recall.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        params: ParamFlags,
    },
    /// Time template discovery and knowledge extraction on synthetic
    /// corpora.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [100usize, 1000, 10000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Histogram pairwise edit distances of one app's notifications to
    /// pick a clustering threshold.
    CalibrateDelta {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        app: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        bucket_width: f64,
        /// CSV output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline: filter, aggregate, discover, pool, train,
    /// predict rules, extract.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        filter_config: Option<PathBuf>,
        /// Manually labeled rules used for training.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Use this trained model instead of training.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamFlags,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits.
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            match err {
                Error::Stage { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let config_file = cli.config.as_deref();
    match cli.command {
        Command::Generate {
            out,
            users,
            min_notifications,
            max_notifications,
            noise_unstructured,
            noise_local,
            noise_global,
            seed,
        } => {
            let spec = GenerationSpec {
                bank: GeneratorBank::standard(),
                n_users: users,
                notifications_per_user: (min_notifications, max_notifications),
                noise: NoiseFractions {
                    unstructured: noise_unstructured,
                    local_dup: noise_local,
                    global_dup: noise_global,
                },
                seed,
            };
            pipeline::generate_to_dir(&spec, &out)?;
            let (corpus, truth) = generate_corpus(&spec)?;
            eprintln!(
                "generated {} notifications for {} users ({} noise) in {}",
                corpus.len(),
                users,
                truth.n_noise(),
                out.display()
            );
            Ok(())
        }
        Command::Filter {
            corpus,
            filter_config,
            out,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let corpus = load_corpus(&corpus)?;
            let fc = match filter_config {
                Some(path) => FilterConfig::load(&path)?,
                None => FilterConfig::default(),
            };
            let (filtered, common) = filter_stage(&corpus, &fc, params.salt())?;
            save_corpus(&filtered, &out)?;
            eprintln!(
                "kept {} of {} notifications ({} broadcast hashes)",
                filtered.len(),
                corpus.len(),
                common.len()
            );
            Ok(())
        }
        Command::Aggregate { corpus, out, params } => {
            let params = params.resolve(config_file)?;
            let corpus = load_corpus(&corpus)?;
            let uploads = hash_uploads(&corpus, params.salt());
            let freq = aggregate_word_hashes(&uploads, params.salt())?;
            pipeline::write_json(&freq, &out)?;
            eprintln!(
                "aggregated {} word hashes from {} clients",
                freq.counts.len(),
                freq.n_contributors
            );
            Ok(())
        }
        Command::Discover {
            corpus,
            frequencies,
            out,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let corpus = load_corpus(&corpus)?;
            let freq = pipeline::read_json(&frequencies)?;
            let uploads = discover_stage(
                &corpus,
                &freq,
                &params.cluster_config(),
                &params.refine_config(),
                params.salt(),
            )?;
            let n_templates: usize = uploads.iter().map(|u| u.templates.len()).sum();
            pipeline::write_jsonl(uploads.iter(), &out)?;
            eprintln!(
                "discovered {} candidate templates across {} clients",
                n_templates,
                uploads.len()
            );
            Ok(())
        }
        Command::Pool { uploads, out } => {
            let uploads = pipeline::read_uploads(&uploads)?;
            let bank = pool_templates(&uploads);
            pipeline::write_json(&bank, &out)?;
            eprintln!("pooled {} templates", bank.len());
            Ok(())
        }
        Command::Train {
            rules,
            bank,
            embeddings,
            skip_unknown,
            out,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let bank: TemplateBank = pipeline::read_json(&bank)?;
            let labeled = if skip_unknown {
                let (resolved, skipped) = pipeline::load_rules_intersecting(&rules, &bank)?;
                if skipped > 0 {
                    eprintln!("skipped {skipped} rules without a bank template");
                }
                resolved
            } else {
                load_manual_rules(&rules, &bank)?
            };
            let table = match embeddings {
                Some(path) => EmbeddingTable::load(&path)?,
                None => EmbeddingTable::fallback_only(params.embedding_dim),
            };
            let space = label_space_of(&labeled);
            let model = train(&labeled, &space, table, &params.train_config())?;
            model.save(&out)?;
            eprintln!("trained on {} rules; model written to {}", labeled.len(), out.display());
            Ok(())
        }
        Command::PredictRules {
            model,
            bank,
            rules,
            out,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let model = EncoderModel::load(&model)?;
            let bank: TemplateBank = pipeline::read_json(&bank)?;
            let manual_ids: std::collections::BTreeSet<TemplateId> = match rules {
                Some(path) => pipeline::load_rules_intersecting(&path, &bank)?
                    .0
                    .into_iter()
                    .map(|l| l.rule.template_id)
                    .collect(),
                None => Default::default(),
            };
            let predicted: Vec<SemanticRule> = bank
                .iter()
                .filter(|p| !manual_ids.contains(&p.template.template_id))
                .map(|p| model.predict_rule(&p.template, params.threshold))
                .collect();
            save_rules(&out, predicted.iter())?;
            eprintln!("predicted {} rules", predicted.len());
            Ok(())
        }
        Command::Extract {
            corpus,
            bank,
            rules,
            kb,
            report,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let corpus = load_corpus(&corpus)?;
            let bank: TemplateBank = pipeline::read_json(&bank)?;
            let mut merged: BTreeMap<TemplateId, SemanticRule> = BTreeMap::new();
            for path in &rules {
                let (resolved, _) = pipeline::load_rules_intersecting(path, &bank)?;
                for l in resolved {
                    merged.insert(l.rule.template_id, l.rule);
                }
            }
            let mut store = KnowledgeBase::open(&kb)?;
            let extraction = extract_all(&corpus, &bank, &merged, &mut store, params.l_max)?;
            if let Some(path) = report {
                pipeline::write_json(&extraction, &path)?;
            }
            eprintln!(
                "matched {} of {} notifications, stored {} distinct triples",
                extraction.n_matched, extraction.n_notifications, extraction.n_distinct_triples
            );
            Ok(())
        }
        Command::Query { kb, user, relation } => {
            let store = KnowledgeBase::open(&kb)?;
            for triple in store.query(&UserId(user), relation) {
                println!("{}", serde_json::to_string(triple).expect("triples serialize"));
            }
            Ok(())
        }
        Command::Evaluate {
            rules,
            bank,
            mode,
            k,
            embeddings,
            out,
            csv,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let (labeled, space) = match (rules, bank) {
                (Some(rules), Some(bank)) => {
                    let bank: TemplateBank = pipeline::read_json(&bank)?;
                    let labeled = load_manual_rules(&rules, &bank)?;
                    let space = label_space_of(&labeled);
                    (labeled, space)
                }
                _ => {
                    eprintln!("evaluating on the built-in synthetic labeled bank");
                    let labeled = synthetic_labeled_bank(&SyntheticBankConfig {
                        seed: params.seed,
                        ..SyntheticBankConfig::default()
                    });
                    (labeled, Default::default())
                }
            };
            let table = match embeddings {
                Some(path) => EmbeddingTable::load(&path)?,
                None => EmbeddingTable::fallback_only(params.embedding_dim),
            };
            let report = evaluate_cv(
                &labeled,
                &space,
                mode,
                k,
                params.seed,
                &table,
                &params.train_config(),
                params.threshold,
            )?;
            for l in &report.per_label {
                eprintln!(
                    "{:>24}  precision {:.4}  recall {:.4}",
                    l.label, l.precision, l.recall
                );
            }
            eprintln!(
                "{mode} micro: precision {:.4} recall {:.4} f1 {:.4}",
                report.micro.precision, report.micro.recall, report.micro.f1
            );
            if let Some(path) = out {
                pipeline::write_json(&report, &path)?;
            }
            if let Some(path) = csv {
                std::fs::write(&path, report.to_csv()).map_err(|e| Error::io(&path, e))?;
            }
            Ok(())
        }
        Command::Bench { sizes, seed, out } => {
            let report = run_bench(&sizes, seed)?;
            for entry in &report.entries {
                println!(
                    "n={:<6} discovery {:>8.2}s  extraction {:>8.2}s",
                    entry.n_notifications, entry.discovery_seconds, entry.extraction_seconds
                );
            }
            if let Some(path) = out {
                pipeline::write_json(&report, &path)?;
            }
            Ok(())
        }
        Command::CalibrateDelta {
            corpus,
            app,
            seed,
            bucket_width,
            out,
        } => {
            let corpus = load_corpus(&corpus)?;
            let notifications = corpus.of_app(&app.as_str().into());
            let histogram = calibrate_delta(&notifications, seed, bucket_width)?;
            let csv = histogram.to_csv();
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Run {
            corpus,
            filter_config,
            rules,
            embeddings,
            model,
            out,
            params,
        } => {
            let params = params.resolve(config_file)?;
            let report = run_pipeline(&PipelineConfig {
                corpus,
                filter_config,
                manual_rules: rules,
                embeddings,
                model_in: model,
                out_dir: out.clone(),
                params,
            })?;
            for (stage, seconds) in &report.stage_seconds {
                eprintln!("{stage:>14}: {seconds:>8.2}s");
            }
            eprintln!(
                "{} templates pooled, {} triples stored; artifacts in {}",
                report.n_pooled_templates,
                report.extraction.n_distinct_triples,
                out.display()
            );
            eprintln!("report: {}", Artifacts::new(out).report().display());
            Ok(())
        }
    }
}
