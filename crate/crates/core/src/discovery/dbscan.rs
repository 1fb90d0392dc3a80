//! Density-based clustering of one (user, app) notification group.

use serde::{Deserialize, Serialize};

use crate::discovery::distance::relative_edit_distance;
use crate::error::{Error, Result};
use crate::text::TokenSeq;

/// Clustering knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    /// Neighborhood radius over relative edit distance.
    pub delta: f64,
    /// Minimum neighborhood size (the point itself counts) for a core
    /// point. Doubles as the minimum template instance count.
    pub min_pts: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            delta: 0.5,
            min_pts: 2,
        }
    }
}

impl ClusterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        if self.min_pts < 2 {
            return Err(Error::InvalidInput(format!(
                "min_pts must be at least 2, got {}",
                self.min_pts
            )));
        }
        Ok(())
    }
}

/// Clusters as index sets into the input, plus the noise indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

/// Condensed upper-triangle pairwise distance matrix.
struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    fn compute(items: &[&TokenSeq]) -> Result<Self> {
        let n = items.len();
        let mut values = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                values.push(relative_edit_distance(items[i], items[j])?);
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        // Row lo starts at lo*n - lo*(lo+1)/2 within the condensed layout.
        let idx = lo * self.n - lo * (lo + 1) / 2 + (hi - lo - 1);
        self.values[idx]
    }
}

/// DBSCAN over token sequences with the relative-edit-distance metric.
///
/// Points are visited in input order and clusters expand breadth-first, so
/// border points join the first cluster that reaches them; the whole
/// procedure is deterministic.
pub fn cluster_token_seqs(items: &[&TokenSeq], config: &ClusterConfig) -> Result<Clustering> {
    config.validate()?;
    let n = items.len();
    if n == 0 {
        return Ok(Clustering {
            clusters: Vec::new(),
            noise: Vec::new(),
        });
    }
    let matrix = DistanceMatrix::compute(items)?;

    let neighbors = |p: usize| -> Vec<usize> {
        (0..n).filter(|&q| matrix.get(p, q) <= config.delta).collect()
    };

    const UNVISITED: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNVISITED; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();

    for p in 0..n {
        if label[p] != UNVISITED {
            continue;
        }
        let p_neighbors = neighbors(p);
        if p_neighbors.len() < config.min_pts {
            label[p] = NOISE;
            continue;
        }
        let cluster_id = clusters.len();
        clusters.push(Vec::new());
        label[p] = cluster_id;
        clusters[cluster_id].push(p);

        let mut queue: std::collections::VecDeque<usize> = p_neighbors.into();
        while let Some(q) = queue.pop_front() {
            if label[q] == NOISE {
                // Border point: density-reachable but not core.
                label[q] = cluster_id;
                clusters[cluster_id].push(q);
                continue;
            }
            if label[q] != UNVISITED {
                continue;
            }
            label[q] = cluster_id;
            clusters[cluster_id].push(q);
            let q_neighbors = neighbors(q);
            if q_neighbors.len() >= config.min_pts {
                queue.extend(q_neighbors);
            }
        }
    }

    let mut noise: Vec<usize> = (0..n).filter(|&p| label[p] == NOISE).collect();
    noise.sort_unstable();
    for members in &mut clusters {
        members.sort_unstable();
    }
    Ok(Clustering { clusters, noise })
}
