//! Synthetic labeled template banks for exercising the rule predictor.
//!
//! Apps are built from archetypes (shopping, social, travel, jobs, cars,
//! news). Each archetype owns a pool of frames per relation; a frame
//! carries a synonym set for its key word, and every app commits to one
//! synonym per frame, so apps of one archetype express the same knowledge
//! with partly different vocabulary. Within an app a frame can recur with
//! different decorations. Held-out templates of a known app therefore
//! reuse wording the model saw, while templates of held-out apps may use
//! synonyms and tag words it never saw.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discovery::template::{normalize_elements, Element, Template};
use crate::relation::Relation;
use crate::semantics::{Ktt, LabeledTemplate, SemanticRule};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticBankConfig {
    pub n_apps: usize,
    /// Inclusive range of templates per app.
    pub templates_per_app: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticBankConfig {
    fn default() -> Self {
        SyntheticBankConfig {
            n_apps: 40,
            templates_per_app: (6, 8),
            seed: 0,
        }
    }
}

/// A frame: a pattern whose `{}` slots carry the listed labels (in order)
/// and whose `@` is replaced by the app's synonym choice.
struct Frame {
    pattern: &'static str,
    synonyms: &'static [&'static str],
    slot_labels: &'static [Option<Relation>],
    zero_labels: &'static [(Relation, &'static str)],
}

const fn f(
    pattern: &'static str,
    synonyms: &'static [&'static str],
    slot_labels: &'static [Option<Relation>],
    zero_labels: &'static [(Relation, &'static str)],
) -> Frame {
    Frame {
        pattern,
        synonyms,
        slot_labels,
        zero_labels,
    }
}

const PURCHASES: Option<Relation> = Some(Relation::Purchases);
const WANTS: Option<Relation> = Some(Relation::WantsToBuy);
const FOLLOWS: Option<Relation> = Some(Relation::Follows);
const FRIEND: Option<Relation> = Some(Relation::IsFriendOf);
const LIVES: Option<Relation> = Some(Relation::LivesNear);
const TRAVELS: Option<Relation> = Some(Relation::TravelsTo);
const UNLABELED: Option<Relation> = None;
const JOB: (Relation, &str) = (Relation::Status, "job_hunt");
const CAR: (Relation, &str) = (Relation::Status, "car_hunt");

fn shopping_frames() -> Vec<Frame> {
    vec![
        f("your order {} has been @ .", &["shipped", "dispatched", "mailed"], &[PURCHASES], &[]),
        f("your order {} was @ today .", &["delivered", "received", "collected"], &[PURCHASES], &[]),
        f("@ {} is on its way !", &["package", "parcel", "shipment"], &[PURCHASES], &[]),
        f("receipt for your {} @ is ready .", &["purchase", "order"], &[PURCHASES], &[]),
        f("rate the {} you @ last week !", &["bought", "ordered", "purchased"], &[PURCHASES], &[]),
        f("the {} in your @ is cheaper now !", &["cart", "basket"], &[WANTS], &[]),
        f("price @ on {} , check it out !", &["drop", "cut"], &[WANTS], &[]),
        f("{} is back in @ , hurry !", &["stock", "store"], &[WANTS], &[]),
        f("still want the {} ? last @ !", &["chance", "call"], &[WANTS], &[]),
        f("your saved {} goes on @ soon .", &["sale", "discount"], &[WANTS], &[]),
    ]
}

fn social_frames() -> Vec<Frame> {
    vec![
        f("{} posted a new @ .", &["photo", "picture", "snapshot"], &[FOLLOWS], &[]),
        f("{} is @ streaming now !", &["live", "currently"], &[FOLLOWS], &[]),
        f("{} published a new @ .", &["article", "essay", "column"], &[FOLLOWS], &[]),
        f("new @ from {} is out !", &["episode", "video", "mix"], &[FOLLOWS], &[]),
        f("{} shared a new @ today .", &["story", "moment", "clip"], &[FOLLOWS], &[]),
        f("your @ {} sent a message .", &["friend", "buddy", "pal"], &[FRIEND], &[]),
        f("{} invited you to an @ !", &["event", "outing"], &[FRIEND], &[]),
        f("{} commented on your @ .", &["post", "photo", "update"], &[FRIEND], &[]),
        f("{} wants to @ with you .", &["connect", "chat"], &[FRIEND], &[]),
        f("{} tagged you in a @ .", &["photo", "post", "memory"], &[FRIEND], &[]),
    ]
}

fn travel_frames() -> Vec<Frame> {
    vec![
        f("your @ to {} is delayed .", &["flight", "train", "bus"], &[TRAVELS], &[]),
        f("your flight to {} is @ .", &["canceled", "postponed", "rescheduled"], &[TRAVELS], &[]),
        f("@ to {} confirmed , enjoy !", &["trip", "journey", "getaway"], &[TRAVELS], &[]),
        f("your @ to {} arrives soon .", &["ride", "cab", "driver"], &[TRAVELS], &[]),
        f("@ in {} is booked for you .", &["hotel", "room", "suite"], &[TRAVELS], &[]),
        f("@ near {} : rain expected .", &["weather", "forecast"], &[LIVES], &[]),
        f("traffic @ near {} right now .", &["jam", "alert", "delays"], &[LIVES], &[]),
        f("new @ near {} to explore !", &["places", "spots", "venues"], &[LIVES], &[]),
        f("@ outage reported near {} today .", &["power", "water", "network"], &[LIVES], &[]),
        f("@ near {} this weekend !", &["events", "concerts", "festivals"], &[LIVES], &[]),
    ]
}

fn job_frames() -> Vec<Frame> {
    vec![
        f("new job @ for you today !", &["matches", "offers", "leads"], &[], &[JOB]),
        f("a @ viewed your profile !", &["recruiter", "company", "manager"], &[], &[JOB]),
        f("{} is @ for your skills !", &["hiring", "searching", "looking"], &[UNLABELED], &[JOB]),
        f("your @ to {} moved forward !", &["application", "resume"], &[UNLABELED], &[JOB]),
        f("interview @ are waiting , respond now !", &["invitations", "requests"], &[], &[JOB]),
        f("fresh @ near {} match your resume .", &["openings", "positions", "roles"], &[UNLABELED], &[JOB]),
    ]
}

fn car_frames() -> Vec<Frame> {
    vec![
        f("hot car @ near you !", &["deals", "offers", "prices"], &[], &[CAR]),
        f("new {} @ in your area !", &["listings", "arrivals"], &[UNLABELED], &[CAR]),
        f("book a test @ this weekend !", &["drive", "ride"], &[], &[CAR]),
        f("your dream car just got @ !", &["cheaper", "closer"], &[], &[CAR]),
        f("{} models are on @ now !", &["clearance", "promotion"], &[UNLABELED], &[CAR]),
        f("financing @ for the {} expire soon .", &["offers", "quotes", "plans"], &[WANTS], &[CAR]),
    ]
}

fn news_frames() -> Vec<Frame> {
    vec![
        f("daily news @ is ready .", &["digest", "roundup", "briefing"], &[], &[]),
        f("weekend @ are live now !", &["deals", "picks"], &[], &[]),
        f("new @ in the latest update !", &["features", "tools"], &[], &[]),
        f("your weekly @ awaits .", &["summary", "recap"], &[], &[]),
        f("@ stories selected for you .", &["trending", "popular", "featured"], &[], &[]),
        f("good news ! {} is on @ !", &["sale", "discount"], &[UNLABELED], &[]),
    ]
}

fn archetype_frames(archetype: usize) -> Vec<Frame> {
    match archetype % 6 {
        0 => shopping_frames(),
        1 => social_frames(),
        2 => travel_frames(),
        3 => job_frames(),
        4 => car_frames(),
        _ => news_frames(),
    }
}

/// Greeting prefixes that add a name slot.
const GREETINGS: [&str; 3] = ["hi {} ,", "dear {} ,", "hey {} ,"];
const PREFIXES: [&str; 4] = ["", "reminder :", "update :", "heads up :"];
const SUFFIXES: [&str; 4] = ["", "tap to view .", "see details inside .", "don't miss it !"];

/// App-unique tag words (kept digit-free so tokenization leaves them
/// alone).
fn app_tag(app_index: usize) -> String {
    let syllables = ["ka", "lo", "mi", "ne", "po", "ra", "su", "ti", "vu", "ze"];
    let mut n = app_index + 1;
    let mut tag = String::from("app");
    while n > 0 {
        tag.push_str(syllables[n % syllables.len()]);
        n /= syllables.len();
    }
    tag
}

/// Build a labeled synthetic bank. Deterministic per config.
pub fn synthetic_labeled_bank(config: &SyntheticBankConfig) -> Vec<LabeledTemplate> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::new();
    for app_index in 0..config.n_apps {
        let app_id = format!("app{:03}.{}", app_index, app_tag(app_index));
        let frames = archetype_frames(app_index);
        // This app's vocabulary: one synonym per frame, fixed.
        let synonym_choice: Vec<&'static str> = frames
            .iter()
            .map(|frame| frame.synonyms[rng.gen_range(0..frame.synonyms.len())])
            .collect();
        let (min_t, max_t) = config.templates_per_app;
        let want = rng.gen_range(min_t..=max_t);

        // Apps reuse a small frame repertoire with varying decorations, the
        // way one app's templates resemble each other across versions.
        let mut frame_order: Vec<usize> = (0..frames.len()).collect();
        frame_order.shuffle(&mut rng);
        frame_order.truncate((want + 1) / 2);
        let mut seen = std::collections::BTreeSet::new();
        let mut produced = 0usize;
        let mut cursor = 0usize;
        while produced < want && cursor < frame_order.len() * 3 {
            let frame_idx = frame_order[cursor % frame_order.len()];
            let frame = &frames[frame_idx];
            cursor += 1;

            let greeting = if frame.slot_labels.len() < 2 && rng.gen_bool(0.25) {
                Some(GREETINGS[rng.gen_range(0..GREETINGS.len())])
            } else {
                None
            };
            let prefix = PREFIXES[rng.gen_range(0..PREFIXES.len())];
            let suffix = SUFFIXES[rng.gen_range(0..SUFFIXES.len())];
            let tagged = rng.gen_bool(0.6);

            let mut pattern = String::new();
            if tagged {
                pattern.push_str(&format!("[ {} ] ", app_tag(app_index)));
            }
            if !prefix.is_empty() {
                pattern.push_str(prefix);
                pattern.push(' ');
            }
            let mut slot_labels: Vec<Option<Relation>> = Vec::new();
            if let Some(g) = greeting {
                pattern.push_str(g);
                pattern.push(' ');
                slot_labels.push(Some(Relation::Name));
            }
            pattern.push_str(&frame.pattern.replace('@', synonym_choice[frame_idx]));
            slot_labels.extend(frame.slot_labels.iter().copied());
            if !suffix.is_empty() {
                pattern.push(' ');
                pattern.push_str(suffix);
            }

            let Ok(template) = pattern_to_template(&app_id, &pattern) else {
                continue;
            };
            if !seen.insert(template.elements.clone()) {
                continue;
            }
            let mut ktts: Vec<Ktt> = frame
                .zero_labels
                .iter()
                .map(|(rel, value)| Ktt::fixed(*rel, *value))
                .collect();
            for (slot_no, label) in slot_labels.iter().enumerate() {
                if let Some(rel) = label {
                    ktts.push(Ktt::from_slot(*rel, slot_no as u32 + 1));
                }
            }
            let rule = SemanticRule::new(template.template_id, ktts)
                .expect("synthetic rules are well-formed");
            out.push(LabeledTemplate { template, rule });
            produced += 1;
        }
    }
    out
}

fn pattern_to_template(app_id: &str, pattern: &str) -> crate::error::Result<Template> {
    let mut elements = Vec::new();
    for part in pattern.split_whitespace() {
        if part == "{}" {
            elements.push(Element::Slot(0));
        } else {
            for tok in tokenize(part).0 {
                elements.push(Element::Literal(tok));
            }
        }
    }
    Template::new(app_id.into(), normalize_elements(elements))
}
