//! Corpus I/O and synthetic corpus generation.

pub mod corpus;
pub mod generator;

pub use corpus::{load_corpus, save_corpus, Corpus};
pub use generator::{
    generate_corpus, load_ground_truth, save_ground_truth, BankEntry, GenerationSpec,
    GeneratorBank, GroundTruth, NoiseClass, NoiseFractions, NotificationTruth,
};
