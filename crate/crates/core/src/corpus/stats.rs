use serde::{Deserialize, Serialize};

use super::ReviewRecord;

/// Vote-count bins: `[0]`, `[1,5]`, `(5,10]`, `(10,50]`, `(50,100]`, `(100,∞)`.
pub const VOTE_BINS: [(&str, u64, Option<u64>); 6] = [
    ("0", 0, Some(0)),
    ("1-5", 1, Some(5)),
    ("5-10", 6, Some(10)),
    ("10-50", 11, Some(50)),
    ("50-100", 51, Some(100)),
    (">100", 101, None),
];

pub fn vote_bin(total_votes: u64) -> usize {
    VOTE_BINS
        .iter()
        .position(|&(_, lo, hi)| total_votes >= lo && hi.is_none_or(|h| total_votes <= h))
        .expect("bins cover all of u64")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteBin {
    pub label: String,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingDistributionReport {
    pub total: u64,
    pub bins: Vec<VoteBin>,
}

pub fn corpus_stats<'a, I>(records: I) -> VotingDistributionReport
where
    I: IntoIterator<Item = &'a ReviewRecord>,
{
    stats_from_totals(records.into_iter().map(|r| r.total_votes))
}

pub fn stats_from_totals<I: IntoIterator<Item = u64>>(totals: I) -> VotingDistributionReport {
    let mut counts = [0u64; 6];
    for t in totals {
        counts[vote_bin(t)] += 1;
    }
    let total: u64 = counts.iter().sum();
    let bins = VOTE_BINS
        .iter()
        .zip(counts)
        .map(|(&(label, _, _), count)| VoteBin {
            label: label.to_string(),
            count,
            percent: if total == 0 { 0.0 } else { 100.0 * count as f64 / total as f64 },
        })
        .collect();
    VotingDistributionReport { total, bins }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn all_zero_votes() {
        let r = stats_from_totals([0, 0, 0]);
        assert_eq!(r.bins[0].percent, 100.0);
        assert!(r.bins[1..].iter().all(|b| b.count == 0));
    }

    #[test]
    fn one_per_bin() {
        let r = stats_from_totals([0, 3, 7, 20, 60, 500]);
        assert!(r.bins.iter().all(|b| b.count == 1));
    }

    #[test]
    fn boundaries() {
        assert_eq!(vote_bin(5), 1);
        assert_eq!(vote_bin(6), 2);
        assert_eq!(vote_bin(10), 2);
        assert_eq!(vote_bin(11), 3);
        assert_eq!(vote_bin(50), 3);
        assert_eq!(vote_bin(100), 4);
        assert_eq!(vote_bin(101), 5);
        assert_eq!(vote_bin(u64::MAX), 5);
    }

    #[test]
    fn matches_oracle_on_synthetic_totals() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // about half zero-vote, like the real corpus
        let totals: Vec<u64> = (0..5000)
            .map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..300) })
            .collect();
        let r = stats_from_totals(totals.iter().copied());
        let oracle = |lo: u64, hi: u64| totals.iter().filter(|&&t| t >= lo && t <= hi).count() as u64;
        let expected = [oracle(0, 0), oracle(1, 5), oracle(6, 10), oracle(11, 50), oracle(51, 100), oracle(101, u64::MAX)];
        let got: Vec<u64> = r.bins.iter().map(|b| b.count).collect();
        assert_eq!(got, expected);
        assert!((r.bins[0].percent - 50.0).abs() < 3.0);
        assert!((r.bins.iter().map(|b| b.percent).sum::<f64>() - 100.0).abs() < 1e-9);
    }
}
