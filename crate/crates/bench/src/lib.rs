//! Shared corpus builders for the benchmark targets.

use notikb_core::ingest::{generate_corpus, GenerationSpec, GeneratorBank, NoiseFractions};
use notikb_core::ingest::{Corpus, GroundTruth};

/// A deterministic synthetic corpus sized roughly to `n` notifications.
pub fn corpus_of_size(n: usize, seed: u64) -> (Corpus, GroundTruth, GeneratorBank) {
    let users = (n / 250).max(2);
    let per_user = (n / users).max(1);
    let bank = GeneratorBank::standard();
    let spec = GenerationSpec {
        bank: bank.clone(),
        n_users: users,
        notifications_per_user: (per_user, per_user),
        noise: NoiseFractions {
            unstructured: 0.1,
            local_dup: 0.1,
            global_dup: 0.05,
        },
        seed,
    };
    let (corpus, truth) = generate_corpus(&spec).expect("bench corpus generates");
    (corpus, truth, bank)
}
