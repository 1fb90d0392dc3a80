//! Cross-validation evaluation of the rule predictor with per-label
//! precision and recall.

pub mod synth;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::template::Template;
use crate::error::{Error, Result};
use crate::notification::AppId;
use crate::semantics::embedding::EmbeddingTable;
use crate::semantics::{train, KttEntity, LabelSpace, LabeledTemplate, TrainConfig};

/// How held-out folds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Whole apps are held out: the model must handle templates of apps it
    /// never saw.
    UnseenApps,
    /// Each app's templates are split: the model saw the app's other
    /// templates.
    NewTemplates,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::UnseenApps => f.write_str("unseen-apps"),
            EvalMode::NewTemplates => f.write_str("new-templates"),
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unseen-apps" => Ok(EvalMode::UnseenApps),
            "new-templates" => Ok(EvalMode::NewTemplates),
            other => Err(format!("unknown mode {other:?} (unseen-apps | new-templates)")),
        }
    }
}

/// One label's summed confusion counts over all folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    /// True when the label was never predicted (precision reported as 1.0
    /// by convention).
    pub zero_predictions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub folds: usize,
    pub per_label: Vec<LabelReport>,
    pub micro: MicroMetrics,
    pub n_zero_prediction_labels: usize,
}

impl EvalReport {
    /// CSV rows: label, precision, recall.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,precision,recall\n");
        for l in &self.per_label {
            out.push_str(&format!("{},{:.4},{:.4}\n", l.label, l.precision, l.recall));
        }
        out.push_str(&format!(
            "overall,{:.4},{:.4}\n",
            self.micro.precision, self.micro.recall
        ));
        out
    }

    /// Recompute micro metrics from the stored per-label counts; reports
    /// must stay consistent with their own counts.
    pub fn micro_from_counts(&self) -> MicroMetrics {
        let tp: u64 = self.per_label.iter().map(|l| l.tp).sum();
        let fp: u64 = self.per_label.iter().map(|l| l.fp).sum();
        let fn_: u64 = self.per_label.iter().map(|l| l.fn_).sum();
        micro_metrics(tp, fp, fn_)
    }
}

fn ratio_or_one(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        1.0
    } else {
        num as f64 / denom as f64
    }
}

fn micro_metrics(tp: u64, fp: u64, fn_: u64) -> MicroMetrics {
    let precision = ratio_or_one(tp, tp + fp);
    let recall = ratio_or_one(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MicroMetrics {
        precision,
        recall,
        f1,
    }
}

/// The label inventory as displayable atoms, zero-param first.
fn label_names(space: &LabelSpace) -> Vec<String> {
    space
        .zero_param
        .iter()
        .map(|(rel, value)| format!("{rel}={value}"))
        .chain(space.one_param.iter().map(|rel| rel.to_string()))
        .collect()
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: u64,
    fp: u64,
    fn_: u64,
}

impl Counts {
    fn add(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => {}
        }
    }
}

/// Partition deterministically into k folds of template indices.
fn partition(
    labeled: &[LabeledTemplate],
    mode: EvalMode,
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need k >= 2 folds, got {k}")));
    }
    let mut by_app: BTreeMap<&AppId, Vec<usize>> = BTreeMap::new();
    for (i, l) in labeled.iter().enumerate() {
        by_app.entry(&l.template.app_id).or_default().push(i);
    }
    let mut folds = vec![Vec::new(); k];
    match mode {
        EvalMode::UnseenApps => {
            if by_app.len() < k {
                return Err(Error::InsufficientData(format!(
                    "unseen-apps mode needs at least {k} apps, found {}",
                    by_app.len()
                )));
            }
            // Stratify approximately: how many apps carry each label; sort
            // apps by their rarest label and deal round-robin.
            let mut label_app_counts: BTreeMap<String, usize> = BTreeMap::new();
            let app_labels: BTreeMap<&AppId, Vec<String>> = by_app
                .iter()
                .map(|(app, idxs)| {
                    let mut labels: Vec<String> = idxs
                        .iter()
                        .flat_map(|&i| rule_label_names(&labeled[i]))
                        .collect();
                    labels.sort();
                    labels.dedup();
                    for l in &labels {
                        *label_app_counts.entry(l.clone()).or_default() += 1;
                    }
                    (*app, labels)
                })
                .collect();
            let mut apps: Vec<&AppId> = by_app.keys().copied().collect();
            apps.sort_by_key(|app| {
                let rarest = app_labels[app]
                    .iter()
                    .map(|l| label_app_counts[l])
                    .min()
                    .unwrap_or(usize::MAX);
                (rarest, (*app).clone())
            });
            for (pos, app) in apps.iter().enumerate() {
                folds[pos % k].extend(by_app[*app].iter().copied());
            }
        }
        EvalMode::NewTemplates => {
            if labeled.len() < k {
                return Err(Error::InsufficientData(format!(
                    "new-templates mode needs at least {k} templates, found {}",
                    labeled.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (app_ordinal, idxs) in by_app.values().enumerate() {
                let mut shuffled = idxs.clone();
                shuffled.shuffle(&mut rng);
                // Rotate the starting fold so small apps spread out.
                for (j, idx) in shuffled.into_iter().enumerate() {
                    folds[(app_ordinal + j) % k].push(idx);
                }
            }
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

fn rule_label_names(labeled: &LabeledTemplate) -> Vec<String> {
    labeled
        .rule
        .ktts
        .iter()
        .map(|k| match &k.entity {
            KttEntity::Fixed(value) => format!("{}={}", k.relation, value),
            KttEntity::FromSlot(_) => k.relation.to_string(),
        })
        .collect()
}

/// Cross-validate with a custom per-fold trainer. The trainer returns a
/// predictor mapping a template to a semantic rule; folds are evaluated
/// independently and confusion counts summed.
pub fn evaluate_cv_with<T, P>(
    labeled: &[LabeledTemplate],
    space: &LabelSpace,
    mode: EvalMode,
    k: usize,
    seed: u64,
    trainer: T,
) -> Result<EvalReport>
where
    T: Fn(&[LabeledTemplate], u64) -> Result<P> + Sync,
    P: Fn(&Template) -> crate::semantics::SemanticRule,
{
    space.validate()?;
    let folds = partition(labeled, mode, k, seed)?;
    let names = label_names(space);

    let fold_counts: Vec<Result<Vec<Counts>>> = folds
        .par_iter()
        .enumerate()
        .map(|(fold_no, test_idx)| {
            let test: Vec<&LabeledTemplate> = test_idx.iter().map(|&i| &labeled[i]).collect();
            let train_set: Vec<LabeledTemplate> = labeled
                .iter()
                .enumerate()
                .filter(|(i, _)| !test_idx.contains(i))
                .map(|(_, l)| l.clone())
                .collect();
            let predictor = trainer(&train_set, seed.wrapping_add(fold_no as u64))?;

            let mut counts = vec![Counts::default(); names.len()];
            for item in test {
                let predicted = predictor(&item.template);
                // Zero-param labels judged per template.
                for (j, (rel, value)) in space.zero_param.iter().enumerate() {
                    let wanted = KttEntity::Fixed(value.clone());
                    let truth = item
                        .rule
                        .ktts
                        .iter()
                        .any(|kt| kt.relation == *rel && kt.entity == wanted);
                    let pred = predicted
                        .ktts
                        .iter()
                        .any(|kt| kt.relation == *rel && kt.entity == wanted);
                    counts[j].add(truth, pred);
                }
                // One-param labels judged per slot.
                for slot in 1..=item.template.n_slots {
                    for (j, rel) in space.one_param.iter().enumerate() {
                        let wanted = KttEntity::FromSlot(slot);
                        let truth = item
                            .rule
                            .ktts
                            .iter()
                            .any(|kt| kt.relation == *rel && kt.entity == wanted);
                        let pred = predicted
                            .ktts
                            .iter()
                            .any(|kt| kt.relation == *rel && kt.entity == wanted);
                        counts[space.n_zero() + j].add(truth, pred);
                    }
                }
            }
            Ok(counts)
        })
        .collect();

    let mut totals = vec![Counts::default(); names.len()];
    for fold in fold_counts {
        for (t, c) in totals.iter_mut().zip(fold?) {
            t.tp += c.tp;
            t.fp += c.fp;
            t.fn_ += c.fn_;
        }
    }

    let per_label: Vec<LabelReport> = names
        .into_iter()
        .zip(&totals)
        .map(|(label, c)| LabelReport {
            label,
            tp: c.tp,
            fp: c.fp,
            fn_: c.fn_,
            precision: ratio_or_one(c.tp, c.tp + c.fp),
            recall: ratio_or_one(c.tp, c.tp + c.fn_),
            zero_predictions: c.tp + c.fp == 0,
        })
        .collect();
    let tp: u64 = totals.iter().map(|c| c.tp).sum();
    let fp: u64 = totals.iter().map(|c| c.fp).sum();
    let fn_: u64 = totals.iter().map(|c| c.fn_).sum();
    let n_zero_prediction_labels = per_label.iter().filter(|l| l.zero_predictions).count();
    Ok(EvalReport {
        mode,
        folds: k,
        per_label,
        micro: micro_metrics(tp, fp, fn_),
        n_zero_prediction_labels,
    })
}

/// Cross-validate the real encoder model.
pub fn evaluate_cv(
    labeled: &[LabeledTemplate],
    space: &LabelSpace,
    mode: EvalMode,
    k: usize,
    seed: u64,
    table: &EmbeddingTable,
    config: &TrainConfig,
    threshold: f64,
) -> Result<EvalReport> {
    evaluate_cv_with(labeled, space, mode, k, seed, |train_set, fold_seed| {
        let fold_config = TrainConfig {
            seed: fold_seed,
            ..*config
        };
        let model = train(train_set, space, table.clone(), &fold_config)?;
        Ok(move |template: &Template| model.predict_rule(template, threshold))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::template::template_from_pattern;
    use crate::relation::Relation;
    use crate::semantics::{Ktt, SemanticRule};

    fn labeled(app: &str, pattern: &str, ktts: Vec<Ktt>) -> LabeledTemplate {
        let template = template_from_pattern(app, pattern).unwrap();
        let rule = SemanticRule::new(template.template_id, ktts).unwrap();
        LabeledTemplate { template, rule }
    }

    fn tiny_set() -> Vec<LabeledTemplate> {
        let mut out = Vec::new();
        for a in 0..6 {
            out.push(labeled(
                &format!("shop{a}"),
                &format!("Variant{a} order {{}} has shipped today"),
                vec![Ktt::from_slot(Relation::Purchases, 1)],
            ));
            out.push(labeled(
                &format!("shop{a}"),
                &format!("Variant{a} fresh job offers for you !"),
                vec![Ktt::fixed(Relation::Status, "job_hunt")],
            ));
        }
        out
    }

    #[test]
    fn perfect_stub_scores_one() {
        let set = tiny_set();
        let space = LabelSpace::default();
        let truth: BTreeMap<_, _> = set
            .iter()
            .map(|l| (l.template.template_id, l.rule.clone()))
            .collect();
        for mode in [EvalMode::UnseenApps, EvalMode::NewTemplates] {
            let report = evaluate_cv_with(&set, &space, mode, 5, 1, |_, _| {
                let truth = truth.clone();
                Ok(move |t: &Template| truth[&t.template_id].clone())
            })
            .unwrap();
            for l in &report.per_label {
                assert_eq!(l.precision, 1.0, "{}", l.label);
                assert_eq!(l.recall, 1.0, "{}", l.label);
            }
            assert_eq!(report.micro.f1, 1.0);
        }
    }

    #[test]
    fn constant_empty_stub_has_zero_recall_and_flagged_precision() {
        let set = tiny_set();
        let space = LabelSpace::default();
        let report = evaluate_cv_with(&set, &space, EvalMode::NewTemplates, 5, 1, |_, _| {
            Ok(|t: &Template| SemanticRule::new(t.template_id, vec![]).unwrap())
        })
        .unwrap();
        for l in &report.per_label {
            if l.fn_ > 0 {
                assert_eq!(l.recall, 0.0, "{}", l.label);
            }
            assert_eq!(l.precision, 1.0, "{}", l.label);
            assert!(l.zero_predictions);
        }
        assert!(report.n_zero_prediction_labels > 0);
        assert_eq!(report.micro.recall, 0.0);
    }

    #[test]
    fn confusion_arithmetic() {
        // Hand-built fixture: TP=3, FP=1, FN=2 for one label.
        let c = Counts { tp: 3, fp: 1, fn_: 2 };
        assert!((ratio_or_one(c.tp, c.tp + c.fp) - 0.75).abs() < 1e-12);
        assert!((ratio_or_one(c.tp, c.tp + c.fn_) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn folds_are_disjoint_exhaustive_and_deterministic() {
        let set = tiny_set();
        for mode in [EvalMode::UnseenApps, EvalMode::NewTemplates] {
            let a = partition(&set, mode, 5, 3).unwrap();
            let b = partition(&set, mode, 5, 3).unwrap();
            assert_eq!(a, b);
            let mut seen = std::collections::BTreeSet::new();
            for fold in &a {
                for &i in fold {
                    assert!(seen.insert(i), "index {i} in two folds");
                }
            }
            assert_eq!(seen.len(), set.len());
        }
    }

    #[test]
    fn unseen_apps_keeps_whole_apps_together() {
        let set = tiny_set();
        let folds = partition(&set, EvalMode::UnseenApps, 5, 3).unwrap();
        for fold in folds {
            let apps: std::collections::BTreeSet<_> =
                fold.iter().map(|&i| set[i].template.app_id.clone()).collect();
            for (i, l) in set.iter().enumerate() {
                if apps.contains(&l.template.app_id) {
                    assert!(fold.contains(&i));
                }
            }
        }
    }

    #[test]
    fn insufficient_data_errors() {
        let set = tiny_set();
        assert!(matches!(
            partition(&set[..2], EvalMode::UnseenApps, 5, 1),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            partition(&set[..3], EvalMode::NewTemplates, 5, 1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn report_micro_consistency_and_csv() {
        let set = tiny_set();
        let space = LabelSpace::default();
        let truth: BTreeMap<_, _> = set
            .iter()
            .map(|l| (l.template.template_id, l.rule.clone()))
            .collect();
        let report = evaluate_cv_with(&set, &space, EvalMode::NewTemplates, 5, 1, |_, _| {
            let truth = truth.clone();
            Ok(move |t: &Template| truth[&t.template_id].clone())
        })
        .unwrap();
        assert_eq!(report.micro, report.micro_from_counts());
        let csv = report.to_csv();
        assert!(csv.starts_with("label,precision,recall\n"));
        assert!(csv.contains("purchases,"));
        assert!(csv.trim_end().ends_with("overall,1.0000,1.0000"));
    }
}
