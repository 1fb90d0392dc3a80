//! Synthetic corpus generation with known ground truth.
//!
//! The generator plants a bank of templates with per-slot entity
//! dictionaries, instantiates them per user, and mixes in three kinds of
//! noise (person-to-person messages, repeated system events, broadcast
//! promotions). Slots whose relation is a user attribute (name, gender,
//! profession) bind to one sticky value per user; item-like slots draw
//! fresh values per notification. The ground truth records, for every
//! notification, which template produced it with which bindings.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregator::{PooledTemplate, TemplateBank};
use crate::discovery::template::{template_from_pattern, Template, TemplateId};
use crate::error::{Error, Result};
use crate::filters::FilterConfig;
use crate::ingest::corpus::Corpus;
use crate::notification::{AppId, Notification, UserId};
use crate::relation::Relation;
use crate::semantics::{Ktt, KttEntity, LabeledTemplate, SemanticRule};
use crate::text::tokenize;

/// Relations whose slot values stay fixed per user.
pub const STICKY_RELATIONS: [Relation; 3] =
    [Relation::Name, Relation::Gender, Relation::Profession];

/// One plantable template: the template itself, the knowledge-triple
/// templates it expresses, and an entity dictionary per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct BankEntry {
    pub template: Template,
    pub ktts: Vec<Ktt>,
    /// `slot_dictionaries[i]` feeds slot `i + 1`.
    pub slot_dictionaries: Vec<Vec<String>>,
}

impl BankEntry {
    pub fn new(template: Template, ktts: Vec<Ktt>, slot_dictionaries: Vec<Vec<String>>) -> Self {
        BankEntry {
            template,
            ktts,
            slot_dictionaries,
        }
    }

    pub fn rule(&self) -> SemanticRule {
        SemanticRule::new(self.template.template_id, self.ktts.clone())
            .expect("bank rules are well-formed")
    }

    /// Relation bound to a slot by this entry's rule, if any.
    pub fn slot_relation(&self, slot: u32) -> Option<Relation> {
        self.ktts.iter().find_map(|k| match k.entity {
            KttEntity::FromSlot(s) if s == slot => Some(k.relation),
            _ => None,
        })
    }
}

/// The generator's template bank.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorBank {
    pub entries: Vec<BankEntry>,
}

impl GeneratorBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry_by_id(&self, id: TemplateId) -> Option<&BankEntry> {
        self.entries.iter().find(|e| e.template.template_id == id)
    }

    /// The bank as a server-style template bank (for running extraction
    /// against the planted truth).
    pub fn to_template_bank(&self, support_users: u64) -> TemplateBank {
        TemplateBank::new(
            self.entries
                .iter()
                .map(|e| PooledTemplate {
                    template: e.template.clone(),
                    support_users,
                })
                .collect(),
        )
    }

    /// Template/rule pairs (the planted semantic labels).
    pub fn labeled_templates(&self) -> Vec<LabeledTemplate> {
        self.entries
            .iter()
            .map(|e| LabeledTemplate {
                template: e.template.clone(),
                rule: e.rule(),
            })
            .collect()
    }

    /// Every dictionary value, normalized to tokenizer form. This is the
    /// entity list the privacy audit scans uploads for.
    pub fn entity_strings(&self) -> Vec<String> {
        let mut set = std::collections::BTreeSet::new();
        for entry in &self.entries {
            for dict in &entry.slot_dictionaries {
                for value in dict {
                    set.insert(tokenize(value).render());
                }
            }
        }
        set.into_iter().collect()
    }

    /// Filter configuration matching the generator's noise apps.
    ///
    /// The duplicate threshold is scale-aware: with synthetic entity
    /// dictionaries of a few hundred values, a personalized sentence can
    /// legitimately recur for ~10% of users, while planted broadcasts
    /// reach 70-100%. 0.2 separates the two cleanly; production-sized
    /// entity spaces would use the stock 0.01 default.
    pub fn filter_config() -> FilterConfig {
        FilterConfig {
            messenger_app_ids: [AppId(CHAT_APP.into())].into_iter().collect(),
            unstructured_patterns: vec!["[NEW MAIL]".into()],
            global_dup_user_fraction: 0.2,
        }
    }
}

/// Fractions of notifications drawn from each noise class; the remainder
/// instantiates bank templates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseFractions {
    pub unstructured: f64,
    pub local_dup: f64,
    pub global_dup: f64,
}

impl NoiseFractions {
    pub const ZERO: NoiseFractions = NoiseFractions {
        unstructured: 0.0,
        local_dup: 0.0,
        global_dup: 0.0,
    };

    pub fn total(&self) -> f64 {
        self.unstructured + self.local_dup + self.global_dup
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("unstructured", self.unstructured),
            ("local_dup", self.local_dup),
            ("global_dup", self.global_dup),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "noise fraction {name} out of [0,1]: {v}"
                )));
            }
        }
        if self.total() > 1.0 {
            return Err(Error::InvalidInput(format!(
                "noise fractions sum to {} > 1",
                self.total()
            )));
        }
        Ok(())
    }
}

/// Full description of a synthetic corpus.
#[derive(Debug, Clone)]
pub struct GenerationSpec {
    pub bank: GeneratorBank,
    pub n_users: usize,
    /// Inclusive (min, max) notifications per user.
    pub notifications_per_user: (usize, usize),
    pub noise: NoiseFractions,
    pub seed: u64,
}

impl GenerationSpec {
    fn validate(&self) -> Result<()> {
        if self.bank.is_empty() {
            return Err(Error::InvalidInput("empty template bank".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidInput("n_users must be positive".into()));
        }
        let (min, max) = self.notifications_per_user;
        if min == 0 || min > max {
            return Err(Error::InvalidInput(format!(
                "bad notifications_per_user range ({min}, {max})"
            )));
        }
        self.noise.validate()?;
        for entry in &self.bank.entries {
            if entry.slot_dictionaries.len() != entry.template.n_slots as usize {
                return Err(Error::InvalidInput(format!(
                    "template {} has {} slots but {} dictionaries",
                    entry.template.template_id,
                    entry.template.n_slots,
                    entry.slot_dictionaries.len()
                )));
            }
            for (i, dict) in entry.slot_dictionaries.iter().enumerate() {
                if dict.is_empty() {
                    return Err(Error::InvalidInput(format!(
                        "empty dictionary for slot {} of template {}",
                        i + 1,
                        entry.template.template_id
                    )));
                }
                if dict.iter().any(|v| tokenize(v).is_empty()) {
                    return Err(Error::InvalidInput(format!(
                        "dictionary value with no tokens in slot {} of template {}",
                        i + 1,
                        entry.template.template_id
                    )));
                }
            }
            entry.rule().validate_against(&entry.template)?;
        }
        Ok(())
    }
}

/// Which noise pool a notification came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseClass {
    Unstructured,
    LocalDup,
    GlobalDup,
}

/// Per-notification ground truth.
#[derive(Debug, Clone, PartialEq)]
pub enum NotificationTruth {
    Planted {
        template_id: TemplateId,
        bindings: BTreeMap<u32, String>,
    },
    Noise {
        class: NoiseClass,
    },
}

impl NotificationTruth {
    pub fn is_noise(&self) -> bool {
        matches!(self, NotificationTruth::Noise { .. })
    }
}

/// Ground truth parallel to the corpus notification order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub entries: Vec<NotificationTruth>,
}

impl GroundTruth {
    /// The set of (user, relation, entity) facts planted in the corpus,
    /// with entities normalized exactly as extraction renders them.
    pub fn planted_triples(
        &self,
        corpus: &Corpus,
        bank: &GeneratorBank,
    ) -> std::collections::BTreeSet<(UserId, Relation, String)> {
        let mut out = std::collections::BTreeSet::new();
        for (ordinal, entry) in self.entries.iter().enumerate() {
            let NotificationTruth::Planted {
                template_id,
                bindings,
            } = entry
            else {
                continue;
            };
            let user = &corpus.notifications()[ordinal].user_id;
            let bank_entry = bank
                .entry_by_id(*template_id)
                .expect("truth references bank template");
            for ktt in &bank_entry.ktts {
                let entity = match &ktt.entity {
                    KttEntity::Fixed(v) => v.clone(),
                    KttEntity::FromSlot(slot) => tokenize(&bindings[slot]).render(),
                };
                out.insert((user.clone(), ktt.relation, entity));
            }
        }
        out
    }

    pub fn n_noise(&self) -> usize {
        self.entries.iter().filter(|e| e.is_noise()).count()
    }
}

#[derive(Serialize, Deserialize)]
struct TruthLine {
    ordinal: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    template_id: Option<TemplateId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bindings: Option<BTreeMap<u32, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_class: Option<NoiseClass>,
}

/// Write ground truth as JSON Lines keyed by notification ordinal.
pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for (ordinal, entry) in truth.entries.iter().enumerate() {
        let line = match entry {
            NotificationTruth::Planted {
                template_id,
                bindings,
            } => TruthLine {
                ordinal,
                template_id: Some(*template_id),
                bindings: Some(bindings.clone()),
                noise_class: None,
            },
            NotificationTruth::Noise { class } => TruthLine {
                ordinal,
                template_id: None,
                bindings: None,
                noise_class: Some(*class),
            },
        };
        writeln!(writer, "{}", serde_json::to_string(&line).expect("truth serializes"))
            .map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TruthLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if parsed.ordinal != entries.len() {
            return Err(Error::parse(
                path,
                line_no,
                format!("ordinal {} out of order", parsed.ordinal),
            ));
        }
        let entry = match (parsed.template_id, parsed.noise_class) {
            (Some(template_id), None) => NotificationTruth::Planted {
                template_id,
                bindings: parsed.bindings.unwrap_or_default(),
            },
            (None, Some(class)) => NotificationTruth::Noise { class },
            _ => {
                return Err(Error::parse(
                    path,
                    line_no,
                    "need exactly one of template_id or noise_class",
                ))
            }
        };
        entries.push(entry);
    }
    Ok(GroundTruth { entries })
}

// ---------------------------------------------------------------------------
// Noise pools
// ---------------------------------------------------------------------------

pub const CHAT_APP: &str = "chat.meet";
pub const MAIL_APP: &str = "inbox.mail";
pub const SYSTEM_APP: &str = "sys.events";
pub const BROADCAST_APP: &str = "blast.promo";

const SYSTEM_EVENTS: [&str; 5] = [
    "Low battery",
    "Searching for GPS",
    "Battery fully charged",
    "Storage space running out",
    "Screenshot saved",
];

const BROADCASTS: [&str; 12] = [
    "Best sales today only !",
    "A new version is available .",
    "Big discounts this weekend !",
    "Download the latest update now !",
    "Flash sale starts at midnight !",
    "Invite friends and earn rewards !",
    "Holiday specials are here !",
    "Daily check in bonus unlocked !",
    "Limited time offer inside !",
    "New features just landed !",
    "Your weekly digest awaits .",
    "Watch the big game tonight live !",
];

fn chat_pool() -> Vec<String> {
    let greets = ["hey", "hi", "yo", "hello", "listen"];
    let mids = [
        "are you coming to",
        "did you hear about",
        "can we move",
        "what happened at",
        "remember",
    ];
    let ends = [
        "dinner tonight ?",
        "the game ?",
        "that meeting tomorrow ?",
        "the party ?",
    ];
    let mut out = Vec::new();
    for g in greets {
        for m in mids {
            for e in ends {
                out.push(format!("{g} {m} {e}"));
            }
        }
    }
    out
}

fn mail_pool() -> Vec<String> {
    [
        "Meeting notes attached",
        "Your invoice is ready",
        "Lunch plans question",
        "Weekly report draft",
        "Quick question about the schedule",
        "Photos from the weekend",
        "Follow up on our call",
        "Document review request",
    ]
    .iter()
    .map(|s| format!("[NEW MAIL] {s}"))
    .collect()
}

// ---------------------------------------------------------------------------
// Entity pools
// ---------------------------------------------------------------------------

/// 600 distinct single-token given names, built from capitalized onsets and
/// lowercase rimes. The rime list is prefix-free, so no generated name is a
/// substring of another (substring scans stay exact in the privacy audit).
pub fn name_pool() -> Vec<String> {
    let onsets = [
        "Bel", "Cor", "Dav", "El", "Fen", "Gal", "Hart", "Ira", "Jol", "Kam", "Lor", "Mer",
        "Nor", "Or", "Pel", "Quin", "Ros", "Sel", "Tam", "Ul", "Vor", "Wen", "Xan", "Yol", "Zan",
    ];
    let rimes = [
        "a", "ben", "cia", "dor", "el", "fin", "gar", "hila", "ion", "ka", "lo", "mir", "na",
        "ora", "pin", "ren", "sia", "ta", "uel", "via", "wyn", "xel", "yra", "zel",
    ];
    let mut out = Vec::with_capacity(onsets.len() * rimes.len());
    for onset in onsets {
        for rime in rimes {
            out.push(format!("{onset}{rime}"));
        }
    }
    out
}

/// 300 single-token place names.
pub fn place_pool() -> Vec<String> {
    let prefixes = [
        "North", "South", "East", "West", "Glen", "Oak", "Elm", "Ash", "River", "Lake", "Stone",
        "Mill", "Fox", "Gold", "Silver", "Iron", "Clear", "Bright", "Green", "High",
    ];
    let suffixes = [
        "haven", "field", "bridge", "wood", "gate", "ford", "dale", "crest", "view", "mere",
        "port", "ton", "burg", "wick", "moor",
    ];
    let mut out = Vec::with_capacity(prefixes.len() * suffixes.len());
    for p in prefixes {
        for s in suffixes {
            out.push(format!("{p}{s}"));
        }
    }
    out
}

/// 140 two-token product names.
pub fn product_pool() -> Vec<String> {
    let brands = [
        "Nivo", "Aura", "Peakline", "Novari", "Zephra", "Solace", "Emberly", "Crestwave", "Ionix",
        "Vertexo",
    ];
    let items = [
        "Sneakers", "Backpack", "Bottle", "Headphones", "Mat", "Jacket", "Blender", "Toaster",
        "Lamp", "Notebook", "Charger", "Monitor", "Keyboard", "Tent",
    ];
    let mut out = Vec::with_capacity(brands.len() * items.len());
    for b in brands {
        for i in items {
            out.push(format!("{b} {i}"));
        }
    }
    out
}

/// 196 two-token person names (friends, followed accounts).
pub fn person_pool() -> Vec<String> {
    let firsts = [
        "Juno", "Milo", "Vera", "Otis", "Nia", "Remy", "Sage", "Theo", "Isla", "Knox", "Lyra",
        "Ezra", "Wren", "Bodhi",
    ];
    let lasts = [
        "Vale", "Marsh", "Quill", "Hollow", "Finch", "Strand", "Mercer", "Bloom", "Thorne",
        "Ames", "Larkspur", "Pike", "Rook", "Soler",
    ];
    let mut out = Vec::with_capacity(firsts.len() * lasts.len());
    for f in firsts {
        for l in lasts {
            out.push(format!("{f} {l}"));
        }
    }
    out
}

/// 80 two-token merchant names.
pub fn merchant_pool() -> Vec<String> {
    let firsts = ["Crimson", "Olive", "Copper", "Velvet", "Amber", "Cobalt", "Maple", "Indigo"];
    let seconds = [
        "Fork", "Wharf", "Kettle", "Pantry", "Bistro", "Grill", "Bakery", "Cantina", "Deli",
        "Tavern",
    ];
    let mut out = Vec::with_capacity(firsts.len() * seconds.len());
    for f in firsts {
        for s in seconds {
            out.push(format!("{f} {s}"));
        }
    }
    out
}

/// 64 two-token car model names.
pub fn car_pool() -> Vec<String> {
    let makes = ["Velaro", "Octanis", "Quanta", "Stratos", "Halcyon", "Meridia", "Talon", "Zenthi"];
    let models = ["Sprint", "Compact", "Tourer", "Estate", "Coupe", "Rover", "Hatch", "Sedan"];
    let mut out = Vec::with_capacity(makes.len() * models.len());
    for m in makes {
        for d in models {
            out.push(format!("{m} {d}"));
        }
    }
    out
}

/// 48 two-token company names.
pub fn company_pool() -> Vec<String> {
    let firsts = ["Foxden", "Bluepine", "Starling", "Openwater", "Ridgeway", "Cobblestone"];
    let seconds = ["Labs", "Systems", "Works", "Group", "Collective", "Partners", "Forge", "Hub"];
    let mut out = Vec::with_capacity(firsts.len() * seconds.len());
    for f in firsts {
        for s in seconds {
            out.push(format!("{f} {s}"));
        }
    }
    out
}

fn workout_pool() -> Vec<String> {
    [
        "core strength",
        "full stretch",
        "trail running",
        "open water",
        "power lifting",
        "steady cardio",
        "balance flow",
        "interval sprints",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

// ---------------------------------------------------------------------------
// The standard 40-template bank
// ---------------------------------------------------------------------------

impl GeneratorBank {
    /// 40 templates over 12 apps, spanning all four relation categories.
    /// Every template has at least 5 literal words, at most 3 slots, at
    /// least one non-sticky slot, and four sibling pairs differ in exactly
    /// one status word to exercise the split correction.
    pub fn standard() -> Self {
        let names = name_pool();
        let places = place_pool();
        let products = product_pool();
        let people = person_pool();
        let merchants = merchant_pool();
        let cars = car_pool();
        let companies = company_pool();
        let workouts = workout_pool();

        struct Row {
            app: &'static str,
            pattern: &'static str,
            ktts: Vec<Ktt>,
            dicts: Vec<Vec<String>>,
        }

        let rows = vec![
            // --- orchid.shop -----------------------------------------------
            Row {
                app: "orchid.shop",
                pattern: "Hi {} , your order {} has been shipped !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::from_slot(Relation::Purchases, 2),
                ],
                dicts: vec![names.clone(), products.clone()],
            },
            Row {
                app: "orchid.shop",
                pattern: "Hi {} , your order {} has been delivered !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::from_slot(Relation::Purchases, 2),
                ],
                dicts: vec![names.clone(), products.clone()],
            },
            Row {
                app: "orchid.shop",
                pattern: "Your package {} is out for delivery today .",
                ktts: vec![Ktt::from_slot(Relation::Purchases, 1)],
                dicts: vec![products.clone()],
            },
            Row {
                app: "orchid.shop",
                pattern: "The {} in your cart is on sale now !",
                ktts: vec![Ktt::from_slot(Relation::WantsToBuy, 1)],
                dicts: vec![products.clone()],
            },
            Row {
                app: "orchid.shop",
                pattern: "Rate your recent purchase of the {} please !",
                ktts: vec![Ktt::from_slot(Relation::Purchases, 1)],
                dicts: vec![products.clone()],
            },
            // --- lumen.market ----------------------------------------------
            Row {
                app: "lumen.market",
                pattern: "Price drop alert : {} is now cheaper !",
                ktts: vec![Ktt::from_slot(Relation::WantsToBuy, 1)],
                dicts: vec![products.clone()],
            },
            Row {
                app: "lumen.market",
                pattern: "Your order {} has left the warehouse .",
                ktts: vec![Ktt::from_slot(Relation::Purchases, 1)],
                dicts: vec![products.clone()],
            },
            Row {
                app: "lumen.market",
                pattern: "Your order {} has reached the warehouse .",
                ktts: vec![Ktt::from_slot(Relation::Purchases, 1)],
                dicts: vec![products.clone()],
            },
            Row {
                app: "lumen.market",
                pattern: "Thanks for shopping at {} , see your receipt !",
                ktts: vec![Ktt::from_slot(Relation::VisitsMerchant, 1)],
                dicts: vec![merchants.clone()],
            },
            Row {
                app: "lumen.market",
                pattern: "Dear {} , the {} from your wishlist is back in stock !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::from_slot(Relation::WantsToBuy, 2),
                ],
                dicts: vec![names.clone(), products.clone()],
            },
            // --- pulse.social ----------------------------------------------
            Row {
                app: "pulse.social",
                pattern: "{} posted a new photo on their wall .",
                ktts: vec![Ktt::from_slot(Relation::Follows, 1)],
                dicts: vec![people.clone()],
            },
            Row {
                app: "pulse.social",
                pattern: "{} posted a new video on their wall .",
                ktts: vec![Ktt::from_slot(Relation::Follows, 1)],
                dicts: vec![people.clone()],
            },
            Row {
                app: "pulse.social",
                pattern: "Your friend {} sent you a message .",
                ktts: vec![Ktt::from_slot(Relation::IsFriendOf, 1)],
                dicts: vec![people.clone()],
            },
            Row {
                app: "pulse.social",
                pattern: "Hi {} , see what your friend {} is talking about !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::from_slot(Relation::IsFriendOf, 2),
                ],
                dicts: vec![names.clone(), people.clone()],
            },
            Row {
                app: "pulse.social",
                pattern: "{} mentioned you in a comment today .",
                ktts: vec![Ktt::from_slot(Relation::IsFriendOf, 1)],
                dicts: vec![people.clone()],
            },
            // --- castbox.live ----------------------------------------------
            Row {
                app: "castbox.live",
                pattern: "{} is now live streaming , watch now !",
                ktts: vec![Ktt::from_slot(Relation::Follows, 1)],
                dicts: vec![people.clone()],
            },
            Row {
                app: "castbox.live",
                pattern: "New episode from {} is waiting for you .",
                ktts: vec![Ktt::from_slot(Relation::Follows, 1)],
                dicts: vec![people.clone()],
            },
            Row {
                app: "castbox.live",
                pattern: "{} just followed your channel , say hello !",
                ktts: vec![Ktt::from_slot(Relation::IsFriendOf, 1)],
                dicts: vec![people.clone()],
            },
            // --- atlas.travel ----------------------------------------------
            Row {
                app: "atlas.travel",
                pattern: "Your flight to {} is delayed .",
                ktts: vec![Ktt::from_slot(Relation::TravelsTo, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "atlas.travel",
                pattern: "Your flight to {} is boarding .",
                ktts: vec![Ktt::from_slot(Relation::TravelsTo, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "atlas.travel",
                pattern: "Your trip to {} is confirmed , pack your bags !",
                ktts: vec![Ktt::from_slot(Relation::TravelsTo, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "atlas.travel",
                pattern: "Hotel booking in {} confirmed for tomorrow night .",
                ktts: vec![Ktt::from_slot(Relation::TravelsTo, 1)],
                dicts: vec![places.clone()],
            },
            // --- breeze.weather --------------------------------------------
            Row {
                app: "breeze.weather",
                pattern: "Weather today near {} : sunny skies expected .",
                ktts: vec![Ktt::from_slot(Relation::LivesNear, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "breeze.weather",
                pattern: "Heavy rain warning issued near {} this afternoon .",
                ktts: vec![Ktt::from_slot(Relation::LivesNear, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "breeze.weather",
                pattern: "Air quality near {} is poor today , stay inside .",
                ktts: vec![Ktt::from_slot(Relation::LivesNear, 1)],
                dicts: vec![places.clone()],
            },
            // --- nearcity.guide --------------------------------------------
            Row {
                app: "nearcity.guide",
                pattern: "These popular restaurants near {} are trending !",
                ktts: vec![Ktt::from_slot(Relation::LivesNear, 1)],
                dicts: vec![places.clone()],
            },
            Row {
                app: "nearcity.guide",
                pattern: "Traffic is heavy near {} this morning , leave early !",
                ktts: vec![Ktt::from_slot(Relation::LivesNear, 1)],
                dicts: vec![places.clone()],
            },
            // --- talentlink.jobs -------------------------------------------
            Row {
                app: "talentlink.jobs",
                pattern: "Dear {} , {} posted new job opportunities for you !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::fixed(Relation::Status, "job_hunt"),
                ],
                dicts: vec![names.clone(), companies.clone()],
            },
            Row {
                app: "talentlink.jobs",
                pattern: "{} just downloaded your resume , talk with them now !",
                ktts: vec![Ktt::fixed(Relation::Status, "job_hunt")],
                dicts: vec![companies.clone()],
            },
            Row {
                app: "talentlink.jobs",
                pattern: "Now hiring ! See new openings near {} today !",
                ktts: vec![Ktt::fixed(Relation::Status, "job_hunt")],
                dicts: vec![places.clone()],
            },
            // --- motorhub.cars ---------------------------------------------
            Row {
                app: "motorhub.cars",
                pattern: "Dear {} , fresh deals on the {} are waiting for you !",
                ktts: vec![
                    Ktt::from_slot(Relation::Name, 1),
                    Ktt::from_slot(Relation::WantsToBuy, 2),
                    Ktt::fixed(Relation::Status, "car_hunt"),
                ],
                dicts: vec![names.clone(), cars.clone()],
            },
            Row {
                app: "motorhub.cars",
                pattern: "Test drive invitation : book your {} session this weekend !",
                ktts: vec![Ktt::fixed(Relation::Status, "car_hunt")],
                dicts: vec![cars.clone()],
            },
            Row {
                app: "motorhub.cars",
                pattern: "The {} you saved just dropped in price , act fast !",
                ktts: vec![
                    Ktt::from_slot(Relation::WantsToBuy, 1),
                    Ktt::fixed(Relation::Status, "car_hunt"),
                ],
                dicts: vec![cars.clone()],
            },
            // --- mailer.promo (non-personal) -------------------------------
            Row {
                app: "mailer.promo",
                pattern: "Good news ! {} is on sale this weekend only !",
                ktts: vec![],
                dicts: vec![products.clone()],
            },
            Row {
                app: "mailer.promo",
                pattern: "Weekend deals on {} are live , shop them now !",
                ktts: vec![],
                dicts: vec![products.clone()],
            },
            // --- foodie.delivery -------------------------------------------
            Row {
                app: "foodie.delivery",
                pattern: "Your table at {} is reserved for tonight .",
                ktts: vec![Ktt::from_slot(Relation::VisitsMerchant, 1)],
                dicts: vec![merchants.clone()],
            },
            Row {
                app: "foodie.delivery",
                pattern: "Thank you for dining at {} , rate your visit !",
                ktts: vec![Ktt::from_slot(Relation::VisitsMerchant, 1)],
                dicts: vec![merchants.clone()],
            },
            Row {
                app: "foodie.delivery",
                pattern: "Your delivery from {} is arriving in minutes !",
                ktts: vec![Ktt::from_slot(Relation::VisitsMerchant, 1)],
                dicts: vec![merchants.clone()],
            },
            // --- fitness.coach ---------------------------------------------
            Row {
                app: "fitness.coach",
                pattern: "Hi {} , your {} workout plan is ready today !",
                ktts: vec![Ktt::from_slot(Relation::Name, 1)],
                dicts: vec![names.clone(), workouts.clone()],
            },
            Row {
                app: "fitness.coach",
                pattern: "Your friend {} completed the daily challenge , join them !",
                ktts: vec![Ktt::from_slot(Relation::IsFriendOf, 1)],
                dicts: vec![people.clone()],
            },
        ];

        let entries = rows
            .into_iter()
            .map(|row| {
                let template = template_from_pattern(row.app, row.pattern)
                    .expect("standard bank patterns are valid");
                BankEntry::new(template, row.ktts, row.dicts)
            })
            .collect();
        GeneratorBank { entries }
    }
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Generate a corpus and its ground truth. Deterministic for a given spec
/// and seed.
pub fn generate_corpus(spec: &GenerationSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bank = &spec.bank;

    // Sticky values per (relation, user). Drawn without replacement when
    // the dictionary is large enough, so each value stays rare globally.
    let mut sticky: BTreeMap<Relation, Vec<String>> = BTreeMap::new();
    for relation in STICKY_RELATIONS {
        let dict = bank.entries.iter().find_map(|e| {
            (1..=e.template.n_slots)
                .find(|&s| e.slot_relation(s) == Some(relation))
                .map(|s| &e.slot_dictionaries[s as usize - 1])
        });
        let Some(dict) = dict else { continue };
        let values = if dict.len() >= spec.n_users {
            let mut shuffled = dict.clone();
            shuffled.shuffle(&mut rng);
            shuffled.truncate(spec.n_users);
            shuffled
        } else {
            (0..spec.n_users)
                .map(|_| dict[rng.gen_range(0..dict.len())].clone())
                .collect()
        };
        sticky.insert(relation, values);
    }

    let chat = chat_pool();
    let mail = mail_pool();
    let (min_n, max_n) = spec.notifications_per_user;
    let noise = &spec.noise;

    let mut notifications = Vec::new();
    let mut entries = Vec::new();

    for user_index in 0..spec.n_users {
        let user_id = UserId(format!("u{:05}", user_index + 1));
        let base_ts = 1_700_000_000i64 + user_index as i64 * 100_000;
        let n = rng.gen_range(min_n..=max_n);

        // Balanced template coverage: cycle a per-user shuffled order.
        let mut order: Vec<usize> = (0..bank.len()).collect();
        order.shuffle(&mut rng);
        let mut cursor = 0usize;

        for i in 0..n {
            let timestamp = base_ts + i as i64 * 60;
            let roll: f64 = rng.gen();
            let (app_id, text, truth) = if roll < noise.unstructured {
                if rng.gen_bool(0.7) {
                    (
                        AppId(CHAT_APP.into()),
                        chat[rng.gen_range(0..chat.len())].clone(),
                        NotificationTruth::Noise {
                            class: NoiseClass::Unstructured,
                        },
                    )
                } else {
                    (
                        AppId(MAIL_APP.into()),
                        mail[rng.gen_range(0..mail.len())].clone(),
                        NotificationTruth::Noise {
                            class: NoiseClass::Unstructured,
                        },
                    )
                }
            } else if roll < noise.unstructured + noise.local_dup {
                (
                    AppId(SYSTEM_APP.into()),
                    SYSTEM_EVENTS[rng.gen_range(0..SYSTEM_EVENTS.len())].to_string(),
                    NotificationTruth::Noise {
                        class: NoiseClass::LocalDup,
                    },
                )
            } else if roll < noise.total() {
                (
                    AppId(BROADCAST_APP.into()),
                    BROADCASTS[rng.gen_range(0..BROADCASTS.len())].to_string(),
                    NotificationTruth::Noise {
                        class: NoiseClass::GlobalDup,
                    },
                )
            } else {
                let entry = &bank.entries[order[cursor]];
                cursor = (cursor + 1) % order.len();
                let mut bindings = BTreeMap::new();
                for slot in 1..=entry.template.n_slots {
                    let dict = &entry.slot_dictionaries[slot as usize - 1];
                    let value = match entry.slot_relation(slot) {
                        Some(rel) if STICKY_RELATIONS.contains(&rel) => {
                            sticky.get(&rel).map(|v| v[user_index].clone()).unwrap_or_else(
                                || dict[rng.gen_range(0..dict.len())].clone(),
                            )
                        }
                        _ => dict[rng.gen_range(0..dict.len())].clone(),
                    };
                    bindings.insert(slot, value);
                }
                let filler_tokens: Vec<Vec<String>> = (1..=entry.template.n_slots)
                    .map(|s| tokenize(&bindings[&s]).0)
                    .collect();
                let tokens = entry
                    .template
                    .instantiate(&filler_tokens)
                    .expect("bindings cover all slots");
                let truth = NotificationTruth::Planted {
                    template_id: entry.template.template_id,
                    bindings,
                };
                // Ship the rendered text, not the tokens: notifications go
                // through the normal tokenize path like real input would.
                (entry.template.app_id.clone(), tokens.render(), truth)
            };

            notifications.push(Notification::new(
                user_id.clone(),
                app_id,
                timestamp,
                tokenize(&text),
            )?);
            entries.push(truth);
        }
    }

    Ok((
        Corpus::from_notifications(notifications),
        GroundTruth { entries },
    ))
}
