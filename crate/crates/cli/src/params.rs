//! Parameter resolution: defaults, then command line flags, then (highest
//! precedence) the JSON parameter file given with `--config`.

use std::path::Path;

use clap::Args;
use serde::Deserialize;

use notikb_core::error::{Error, Result};
use notikb_core::pipeline::PipelineParams;

/// Threshold flags shared by the stage subcommands. Defaults live in
/// [`PipelineParams`]; only flags the user sets are applied.
#[derive(Debug, Clone, Args)]
pub struct ParamFlags {
    /// Clustering radius over relative edit distance (default 0.5).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Minimum points per cluster (default 2).
    #[arg(long)]
    pub min_pts: Option<usize>,
    /// Literal words rarer than this become slots (default 0.01).
    #[arg(long)]
    pub theta_param: Option<f64>,
    /// Slot fillers at least this common split the template (default 0.2).
    #[arg(long)]
    pub theta_split: Option<f64>,
    /// Maximum tokens one slot may bind while matching (default 10).
    #[arg(long)]
    pub l_max: Option<usize>,
    /// Sigmoid threshold for rule prediction (default 0.5).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Corpus-wide hashing salt (default 0).
    #[arg(long)]
    pub salt: Option<u64>,
    /// Random seed (default 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Recurrent units per direction (default 200).
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Embedding dimension for the fallback table (default 100).
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Optimizer learning rate (default 0.001).
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Per-epoch learning rate decay (default 0.9).
    #[arg(long)]
    pub lr_decay: Option<f64>,
    /// Training epoch cap (default 15).
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Early-stopping patience in epochs (default 3).
    #[arg(long)]
    pub patience: Option<usize>,
    /// Held-out fraction for early stopping (default 0.2).
    #[arg(long)]
    pub val_fraction: Option<f64>,
}

/// The same knobs as optional JSON fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialParams {
    delta: Option<f64>,
    min_pts: Option<usize>,
    theta_param: Option<f64>,
    theta_split: Option<f64>,
    l_max: Option<usize>,
    threshold: Option<f64>,
    salt: Option<u64>,
    seed: Option<u64>,
    hidden: Option<usize>,
    embedding_dim: Option<usize>,
    learning_rate: Option<f64>,
    lr_decay: Option<f64>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    val_fraction: Option<f64>,
}

macro_rules! apply {
    ($target:expr, $source:expr, [$($field:ident),+ $(,)?]) => {
        $(if let Some(v) = $source.$field {
            $target.$field = v;
        })+
    };
}

impl ParamFlags {
    /// Defaults, overridden by set flags, overridden by the config file.
    pub fn resolve(&self, config_file: Option<&Path>) -> Result<PipelineParams> {
        let mut params = PipelineParams::default();
        apply!(params, self.clone(), [
            delta, min_pts, theta_param, theta_split, l_max, threshold, salt, seed, hidden,
            embedding_dim, learning_rate, lr_decay, max_epochs, patience, val_fraction,
        ]);
        if let Some(path) = config_file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let partial: PartialParams = serde_json::from_str(&text)
                .map_err(|e| Error::parse(path, 1, e.to_string()))?;
            apply!(params, partial, [
                delta, min_pts, theta_param, theta_split, l_max, threshold, salt, seed, hidden,
                embedding_dim, learning_rate, lr_decay, max_epochs, patience, val_fraction,
            ]);
        }
        params.cluster_config().validate()?;
        params.refine_config().validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_beats_flags_beats_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        std::fs::write(&path, r#"{"delta": 0.4}"#).unwrap();
        let flags = ParamFlags {
            delta: Some(0.7),
            min_pts: Some(3),
            theta_param: None,
            theta_split: None,
            l_max: None,
            threshold: None,
            salt: None,
            seed: None,
            hidden: None,
            embedding_dim: None,
            learning_rate: None,
            lr_decay: None,
            max_epochs: None,
            patience: None,
            val_fraction: None,
        };
        let params = flags.resolve(Some(&path)).unwrap();
        assert_eq!(params.delta, 0.4); // config wins over flag
        assert_eq!(params.min_pts, 3); // flag wins over default
        assert_eq!(params.theta_param, 0.01); // default
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        std::fs::write(&path, r#"{"detla": 0.4}"#).unwrap();
        let flags = ParamFlags {
            delta: None,
            min_pts: None,
            theta_param: None,
            theta_split: None,
            l_max: None,
            threshold: None,
            salt: None,
            seed: None,
            hidden: None,
            embedding_dim: None,
            learning_rate: None,
            lr_decay: None,
            max_epochs: None,
            patience: None,
            val_fraction: None,
        };
        assert!(flags.resolve(Some(&path)).is_err());
    }
}
