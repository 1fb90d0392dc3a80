//! Common-subsequence template mining for one cluster.
//!
//! A multi-way longest common subsequence is folded progressively: start
//! from the shortest member and fold each next member in with a pairwise
//! LCS. The result is a common subsequence of every member (not necessarily
//! the longest possible one); gaps against each member become parameter
//! slots and the skipped tokens become that member's slot fillers.

use crate::discovery::template::{normalize_elements, Element, Template};
use crate::error::{Error, Result};
use crate::notification::AppId;
use crate::text::{Token, TokenSeq};

/// Pairwise LCS with deterministic tie-breaking: among equal-length
/// subsequences, matches are taken as far left in `a` as possible.
pub fn lcs_pair(a: &[Token], b: &[Token]) -> Vec<Token> {
    let m = a.len();
    let n = b.len();
    let mut dp = vec![vec![0usize; n + 1]; m + 1];
    for i in (0..m).rev() {
        for j in (0..n).rev() {
            dp[i][j] = if a[i] == b[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    // Walk forward, taking every match that preserves the optimum; this
    // picks the leftmost positions in `a`.
    let mut out = Vec::with_capacity(dp[0][0]);
    let (mut i, mut j) = (0, 0);
    while i < m && j < n {
        if a[i] == b[j] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            out.push(a[i].clone());
            i += 1;
            j += 1;
        } else if dp[i][j + 1] >= dp[i + 1][j] {
            // On ties, skip in `b` so earlier `a` positions stay
            // available: matches land leftmost in the first argument.
            j += 1;
        } else {
            i += 1;
        }
    }
    out
}

/// A mined raw template together with the cluster bookkeeping needed for
/// refinement: which cluster members it covers and what each member put in
/// each slot (fillers may be empty for individual members).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinedTemplate {
    pub template: Template,
    /// Indices into the original cluster, parallel to `fillers`.
    pub members: Vec<usize>,
    /// `fillers[m][s]` = tokens member `m` contributed to slot `s+1`.
    pub fillers: Vec<Vec<Vec<Token>>>,
}

/// Mine a raw template from a cluster of at least two token sequences.
pub fn mine_lcs_template(app_id: &AppId, cluster: &[&TokenSeq]) -> Result<MinedTemplate> {
    if cluster.len() < 2 {
        return Err(Error::InvalidInput(
            "template mining needs a cluster of at least 2".into(),
        ));
    }

    // Fold in order of increasing length; ties by cluster position.
    let mut order: Vec<usize> = (0..cluster.len()).collect();
    order.sort_by_key(|&i| (cluster[i].len(), i));
    let mut common: Vec<Token> = cluster[order[0]].as_slice().to_vec();
    for &i in &order[1..] {
        common = lcs_pair(&common, cluster[i].as_slice());
        if common.is_empty() {
            return Err(Error::NoCommonTemplate);
        }
    }

    // Embed the common sequence into each member (greedy leftmost) and
    // collect the skipped tokens per gap. Gap g sits before common[g];
    // gap |common| collects the tail.
    let n_gaps = common.len() + 1;
    let mut gap_used = vec![false; n_gaps];
    let mut member_gaps: Vec<Vec<Vec<Token>>> = Vec::with_capacity(cluster.len());
    for seq in cluster {
        let mut gaps: Vec<Vec<Token>> = vec![Vec::new(); n_gaps];
        let mut c = 0;
        for tok in seq.iter() {
            if c < common.len() && *tok == common[c] {
                c += 1;
            } else {
                gaps[c].push(tok.clone());
            }
        }
        debug_assert_eq!(c, common.len(), "common sequence must embed in member");
        for (g, gap) in gaps.iter().enumerate() {
            if !gap.is_empty() {
                gap_used[g] = true;
            }
        }
        member_gaps.push(gaps);
    }

    let mut elements = Vec::new();
    for (g, used) in gap_used.iter().enumerate() {
        if *used {
            elements.push(Element::Slot(0));
        }
        if g < common.len() {
            elements.push(Element::Literal(common[g].clone()));
        }
    }
    let template = Template::new(app_id.clone(), normalize_elements(elements))?;

    let slot_gaps: Vec<usize> = gap_used
        .iter()
        .enumerate()
        .filter_map(|(g, used)| used.then_some(g))
        .collect();
    let fillers: Vec<Vec<Vec<Token>>> = member_gaps
        .into_iter()
        .map(|mut gaps| {
            slot_gaps
                .iter()
                .map(|&g| std::mem::take(&mut gaps[g]))
                .collect()
        })
        .collect();

    Ok(MinedTemplate {
        template,
        members: (0..cluster.len()).collect(),
        fillers,
    })
}

impl MinedTemplate {
    /// Check that substituting each member's fillers reproduces the member.
    pub fn regenerates(&self, cluster: &[&TokenSeq]) -> bool {
        self.members.iter().zip(&self.fillers).all(|(&m, fillers)| {
            self.template
                .instantiate(fillers)
                .map(|seq| seq == *cluster[m])
                .unwrap_or(false)
        })
    }
}
