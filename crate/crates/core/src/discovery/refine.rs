//! Frequency-based template correction.
//!
//! Raw mined templates make two characteristic mistakes: values that are
//! constant on one device (the user's own name) end up as literals, and
//! small enumerations shared by everyone ("shipped" / "delivered") end up
//! as slots. Global word frequencies separate the two cases: literal runs
//! of globally rare words are demoted to slots, and slots whose fillers are
//! all single, globally common tokens split the cluster into one template
//! per filler value.

use crate::aggregator::GlobalFrequencyTable;
use crate::discovery::lcs::MinedTemplate;
use crate::discovery::template::{normalize_elements, Element, Template};
use crate::error::Result;
use crate::text::Token;

/// Correction thresholds. Literal words with global frequency strictly
/// below `theta_param` are treated as parameter values; slot fillers with
/// frequency at or above `theta_split` are treated as template text.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RefineConfig {
    pub theta_param: f64,
    pub theta_split: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            theta_param: 0.01,
            theta_split: 0.2,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_param > 0.0 && self.theta_param <= self.theta_split && self.theta_split < 1.0)
        {
            return Err(crate::error::Error::InvalidInput(format!(
                "need 0 < theta_param <= theta_split < 1, got {} and {}",
                self.theta_param, self.theta_split
            )));
        }
        Ok(())
    }
}

// Working representation: literals plus slots that carry their per-member
// fillers, so corrections can restructure freely before re-validation.
#[derive(Debug, Clone)]
enum Piece {
    Lit(Token),
    Slot(Vec<Vec<Token>>),
}

#[derive(Debug, Clone)]
struct Working {
    pieces: Vec<Piece>,
    members: Vec<usize>,
}

impl Working {
    fn from_mined(mined: &MinedTemplate) -> Self {
        let n_members = mined.members.len();
        let mut slot_no = 0usize;
        let pieces = mined
            .template
            .elements
            .iter()
            .map(|el| match el {
                Element::Literal(tok) => Piece::Lit(tok.clone()),
                Element::Slot(_) => {
                    let fillers = (0..n_members)
                        .map(|m| mined.fillers[m][slot_no].clone())
                        .collect();
                    slot_no += 1;
                    Piece::Slot(fillers)
                }
            })
            .collect();
        Working {
            pieces,
            members: mined.members.clone(),
        }
    }

    fn into_mined(self, app_id: &crate::notification::AppId) -> Result<MinedTemplate> {
        let n_members = self.members.len();
        let mut elements = Vec::with_capacity(self.pieces.len());
        let mut slot_fillers: Vec<Vec<Vec<Token>>> = vec![Vec::new(); n_members];
        for piece in self.pieces {
            match piece {
                Piece::Lit(tok) => elements.push(Element::Literal(tok)),
                Piece::Slot(fillers) => {
                    elements.push(Element::Slot(0));
                    for (m, filler) in fillers.into_iter().enumerate() {
                        slot_fillers[m].push(filler);
                    }
                }
            }
        }
        let template = Template::new(app_id.clone(), normalize_elements(elements))?;
        Ok(MinedTemplate {
            template,
            members: self.members,
            fillers: slot_fillers,
        })
    }

    /// Demote maximal runs of globally rare literals to slots, then merge
    /// adjacent slots. Returns true if anything changed.
    fn correct_rare_literals(&mut self, freq: &GlobalFrequencyTable, theta_param: f64) -> bool {
        let n_members = self.members.len();
        let mut changed = false;
        let mut out: Vec<Piece> = Vec::with_capacity(self.pieces.len());
        for piece in self.pieces.drain(..) {
            match piece {
                Piece::Lit(tok) if freq.frequency(&tok) < theta_param => {
                    changed = true;
                    push_slot_token(&mut out, tok, n_members);
                }
                other => out.push(other),
            }
        }
        self.pieces = merge_adjacent_slots(out);
        changed
    }

    /// Find the leftmost slot whose fillers are all single tokens of
    /// frequency >= theta_split and split the cluster on its value.
    /// Returns the partitions, or None if no slot qualifies.
    fn try_split(&self, freq: &GlobalFrequencyTable, theta_split: f64) -> Option<Vec<Working>> {
        let split_at = self.pieces.iter().position(|piece| match piece {
            Piece::Slot(fillers) => fillers
                .iter()
                .all(|f| f.len() == 1 && freq.frequency(&f[0]) >= theta_split),
            Piece::Lit(_) => false,
        })?;

        // Partition members by the splitting slot's value, preserving
        // first-seen order for determinism.
        let values: Vec<&Token> = match &self.pieces[split_at] {
            Piece::Slot(fillers) => fillers.iter().map(|f| &f[0]).collect(),
            Piece::Lit(_) => unreachable!(),
        };
        let mut order: Vec<Token> = Vec::new();
        for v in &values {
            if !order.iter().any(|o| o == *v) {
                order.push((*v).clone());
            }
        }

        let partitions = order
            .into_iter()
            .map(|value| {
                let keep: Vec<usize> = values
                    .iter()
                    .enumerate()
                    .filter_map(|(m, v)| (**v == value).then_some(m))
                    .collect();
                let pieces = self
                    .pieces
                    .iter()
                    .enumerate()
                    .map(|(i, piece)| match piece {
                        Piece::Lit(tok) => Piece::Lit(tok.clone()),
                        Piece::Slot(_) if i == split_at => Piece::Lit(value.clone()),
                        Piece::Slot(fillers) => {
                            Piece::Slot(keep.iter().map(|&m| fillers[m].clone()).collect())
                        }
                    })
                    .collect();
                Working {
                    pieces,
                    members: keep.iter().map(|&m| self.members[m]).collect(),
                }
            })
            .collect();
        Some(partitions)
    }
}

fn push_slot_token(out: &mut Vec<Piece>, tok: Token, n_members: usize) {
    match out.last_mut() {
        Some(Piece::Slot(fillers)) => {
            for f in fillers.iter_mut() {
                f.push(tok.clone());
            }
        }
        _ => out.push(Piece::Slot(vec![vec![tok]; n_members])),
    }
}

fn merge_adjacent_slots(pieces: Vec<Piece>) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        match (out.last_mut(), piece) {
            (Some(Piece::Slot(acc)), Piece::Slot(next)) => {
                for (a, n) in acc.iter_mut().zip(next) {
                    a.extend(n);
                }
            }
            (_, piece) => out.push(piece),
        }
    }
    out
}

/// Apply both corrections to a fixpoint. Degenerate results (everything
/// demoted to a slot) are dropped rather than emitted.
pub fn refine_template(
    mined: &MinedTemplate,
    freq: &GlobalFrequencyTable,
    config: &RefineConfig,
) -> Result<Vec<MinedTemplate>> {
    config.validate()?;
    let app_id = mined.template.app_id.clone();
    let mut queue = vec![Working::from_mined(mined)];
    let mut done: Vec<Working> = Vec::new();

    while let Some(mut w) = queue.pop() {
        w.correct_rare_literals(freq, config.theta_param);
        match w.try_split(freq, config.theta_split) {
            Some(partitions) => queue.extend(partitions),
            None => done.push(w),
        }
    }

    // Splits pop from a stack; restore a deterministic order by first
    // member index.
    done.sort_by_key(|w| w.members.first().copied().unwrap_or(usize::MAX));
    Ok(done
        .into_iter()
        .filter_map(|w| w.into_mined(&app_id).ok())
        .collect())
}
