//! Template discovery, semantic rule learning, and knowledge triple
//! extraction for notification streams.
//!
//! The pipeline mirrors how a fleet of devices and one server would share
//! the work: each client filters its own notifications, clusters them per
//! app, mines and refines templates, and uploads only salted hashes plus
//! candidate templates. The server aggregates hashes into global word
//! frequencies, pools templates, and trains a model that predicts which
//! knowledge triples a template expresses. Matching templates back against
//! notifications turns them into `<user, relation, entity>` facts.

pub mod aggregator;
pub mod discovery;
pub mod error;
pub mod eval;
pub mod filters;
pub mod hash;
pub mod ingest;
pub mod kb;
pub mod notification;
pub mod pipeline;
pub mod relation;
pub mod semantics;
pub mod text;

pub use aggregator::{
    aggregate_word_hashes, detect_common_hashes, pool_templates, ClientUpload,
    GlobalFrequencyTable, PooledTemplate, TemplateBank,
};
pub use discovery::{
    calibrate_delta, cluster_notifications, discover_client_templates, relative_edit_distance,
    ClusterConfig, Element, RefineConfig, Template, TemplateId,
};
pub use error::{Error, Result};
pub use filters::{
    drop_global_duplicates, drop_local_duplicates, drop_unstructured, FilterConfig,
};
pub use hash::{hash_sentence, hash_word, Salt, SentenceHash, WordHash};
pub use ingest::{generate_corpus, load_corpus, save_corpus, Corpus, GenerationSpec, GroundTruth};
pub use kb::{apply_rule, extract_all, match_template, KnowledgeBase, KnowledgeTriple, Match};
pub use notification::{AppId, Notification, UserId};
pub use relation::{Relation, RelationCategory};
pub use semantics::{
    load_manual_rules, train, EmbeddingTable, EncoderModel, Ktt, KttEntity, LabelSpace,
    LabeledTemplate, SemanticRule, TrainConfig,
};
pub use text::{tokenize, Token, TokenSeq, NUM_TOKEN};
