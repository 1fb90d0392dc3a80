use std::time::Instant;
use notikb_core::eval::synth::{synthetic_labeled_bank, SyntheticBankConfig};
use notikb_core::eval::{evaluate_cv, EvalMode};
use notikb_core::semantics::{EmbeddingTable, LabelSpace, TrainConfig};

fn main() {
    let space = LabelSpace::default();
    let table = EmbeddingTable::fallback_only(100);
    for (tpa, patience) in [((6usize,8usize), 3usize), ((6,8), 14)] {
        let bank = synthetic_labeled_bank(&SyntheticBankConfig{ n_apps: 40, templates_per_app: tpa, seed: 0 });
        for mode in [EvalMode::NewTemplates, EvalMode::UnseenApps] {
            let config = TrainConfig { seed: 7, hidden: 200, learning_rate: 1e-2, patience, ..TrainConfig::default() };
            let t0 = Instant::now();
            let report = evaluate_cv(&bank, &space, mode, 5, 7, &table, &config, 0.5).unwrap();
            println!("tpa={tpa:?} pat={patience} n={} {mode}: F1={:.4}  ({:.0}s)",
                bank.len(), report.micro.f1, t0.elapsed().as_secs_f64());
        }
    }
}
