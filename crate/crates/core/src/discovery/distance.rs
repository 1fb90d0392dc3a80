//! Relative edit distance between token sequences, and the pairwise
//! distance histogram used to eyeball a clustering threshold.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::notification::Notification;
use crate::text::TokenSeq;

/// Word-level Levenshtein distance (insert/delete/substitute one token,
/// unit cost each).
pub fn levenshtein(a: &TokenSeq, b: &TokenSeq) -> usize {
    let a = a.as_slice();
    let b = b.as_slice();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ta) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, tb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ta != tb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Edit distance normalized by the shorter sequence's length. May exceed
/// 1.0 when lengths differ a lot.
pub fn relative_edit_distance(a: &TokenSeq, b: &TokenSeq) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let edits = levenshtein(a, b);
    Ok(edits as f64 / a.len().min(b.len()) as f64)
}

/// Histogram of pairwise distances over a sample of one app's
/// notifications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceHistogram {
    /// Bucket width; bucket k covers `[k*width, (k+1)*width)` and the last
    /// bucket absorbs everything at or above 1.0.
    pub bucket_width_milli: u32,
    pub counts: Vec<u64>,
}

impl DistanceHistogram {
    pub fn new(bucket_width: f64) -> Self {
        let width_milli = (bucket_width * 1000.0).round() as u32;
        assert!(width_milli > 0 && width_milli <= 1000, "bucket width out of range");
        let n_finite = (1000 + width_milli - 1) / width_milli;
        DistanceHistogram {
            bucket_width_milli: width_milli,
            counts: vec![0; n_finite as usize + 1],
        }
    }

    pub fn bucket_width(&self) -> f64 {
        self.bucket_width_milli as f64 / 1000.0
    }

    pub fn add(&mut self, distance: f64) {
        let idx = ((distance * 1000.0) as u32 / self.bucket_width_milli) as usize;
        let idx = idx.min(self.counts.len() - 1);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn merge(mut self, other: &DistanceHistogram) -> Self {
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self
    }

    /// CSV rows of `bucket_lower_bound,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower_bound,count\n");
        for (k, count) in self.counts.iter().enumerate() {
            let lower = k as f64 * self.bucket_width();
            out.push_str(&format!("{lower:.3},{count}\n"));
        }
        out
    }
}

pub const CALIBRATION_SAMPLE_CAP: usize = 1000;
pub const DEFAULT_BUCKET_WIDTH: f64 = 0.05;

/// Histogram all pairwise distances of (a sample of) one app's
/// notifications. When more than [`CALIBRATION_SAMPLE_CAP`] notifications
/// are given, a seeded random subsample of that size is used.
pub fn calibrate_delta(
    notifications: &[&Notification],
    seed: u64,
    bucket_width: f64,
) -> Result<DistanceHistogram> {
    if notifications.len() < 2 {
        return Err(Error::InsufficientData(
            "delta calibration needs at least 2 notifications".into(),
        ));
    }
    let mut sample: Vec<&TokenSeq> = notifications.iter().map(|n| &n.tokens).collect();
    if sample.len() > CALIBRATION_SAMPLE_CAP {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample.shuffle(&mut rng);
        sample.truncate(CALIBRATION_SAMPLE_CAP);
    }

    let histogram = (0..sample.len() - 1)
        .into_par_iter()
        .map(|i| {
            let mut h = DistanceHistogram::new(bucket_width);
            for j in i + 1..sample.len() {
                let d = relative_edit_distance(sample[i], sample[j])
                    .expect("notification tokens are non-empty");
                h.add(d);
            }
            h
        })
        .reduce(
            || DistanceHistogram::new(bucket_width),
            |a, b| a.merge(&b),
        );
    Ok(histogram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn seq(s: &str) -> TokenSeq {
        tokenize(s)
    }

    #[test]
    fn identical_sequences_have_zero_distance() {
        let a = seq("Low battery warning now");
        assert_eq!(relative_edit_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn shipped_vs_nike_example() {
        let a = seq("Your order iPhone X has been shipped");
        let b = seq("Your order Nike Running Shoes has been shipped");
        let d = relative_edit_distance(&a, &b).unwrap();
        assert!((d - 3.0 / 7.0).abs() < 1e-12, "got {d}");
    }

    #[test]
    fn disjoint_equal_length_is_one() {
        let a = seq("a b c d e");
        let b = seq("v w x y z");
        assert_eq!(relative_edit_distance(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn can_exceed_one() {
        let a = seq("a");
        let b = seq("x y z");
        assert_eq!(relative_edit_distance(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let a = seq("a b");
        assert!(relative_edit_distance(&a, &TokenSeq::default()).is_err());
        assert!(relative_edit_distance(&TokenSeq::default(), &a).is_err());
    }

    fn notif(text: &str) -> Notification {
        Notification::new("u1".into(), "app".into(), 0, tokenize(text)).unwrap()
    }

    #[test]
    fn two_identical_notifications_land_in_first_bucket() {
        let ns = vec![notif("Low battery"), notif("Low battery")];
        let refs: Vec<&Notification> = ns.iter().collect();
        let h = calibrate_delta(&refs, 7, DEFAULT_BUCKET_WIDTH).unwrap();
        assert_eq!(h.total(), 1);
        assert_eq!(h.counts[0], 1);
    }

    #[test]
    fn pair_count_is_n_choose_two() {
        let ns: Vec<Notification> = (0..17)
            .map(|i| notif(&format!("message number item{i} arrived")))
            .collect();
        let refs: Vec<&Notification> = ns.iter().collect();
        let h = calibrate_delta(&refs, 7, DEFAULT_BUCKET_WIDTH).unwrap();
        assert_eq!(h.total(), 17 * 16 / 2);
    }

    #[test]
    fn bimodal_separation_leaves_middle_buckets_empty() {
        // Two synthetic templates: tight inside, far apart between.
        let words = ["alpha", "bravo", "carbon", "delta", "ember"];
        let mut ns = Vec::new();
        for w in words {
            ns.push(notif(&format!(
                "Your order {w} has been shipped to you today"
            )));
            ns.push(notif(&format!(
                "Weather alert near {w} heavy rain expected soon here"
            )));
        }
        let refs: Vec<&Notification> = ns.iter().collect();
        let h = calibrate_delta(&refs, 7, DEFAULT_BUCKET_WIDTH).unwrap();
        // Verify by direct enumeration that the histogram counted every pair.
        assert_eq!(h.total(), (10 * 9 / 2) as u64);
        // [0.4, 0.6) straddles buckets 8..12 with width 0.05.
        for k in 8..12 {
            assert_eq!(h.counts[k], 0, "bucket {k} not empty");
        }
        assert!(h.counts[0..4].iter().sum::<u64>() > 0);
        assert!(h.counts[12..].iter().sum::<u64>() > 0);
    }

    #[test]
    fn csv_shape() {
        let h = DistanceHistogram::new(0.5);
        let csv = h.to_csv();
        assert!(csv.starts_with("lower_bound,count\n0.000,0\n0.500,0\n1.000,0\n"));
    }
}
