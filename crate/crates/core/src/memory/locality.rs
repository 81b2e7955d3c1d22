//! Reuse signatures, distribution maps and the spatial-locality score.

use serde::{Deserialize, Serialize};

use super::reuse::{ReuseDistance, ReuseTracker};
use super::MemoryError;

/// Finite bins: `[0,1)`, `[1,2)`, `[2,4)`, ... `[2^63, 2^64)`.
pub const FINITE_BINS: usize = 65;
/// Index of the terminal bin holding cold (first-touch) accesses.
pub const COLD_BIN: usize = FINITE_BINS;
pub const NUM_BINS: usize = FINITE_BINS + 1;

/// Bin index of a reuse distance in the doubling progression.
pub fn bin_of(d: ReuseDistance) -> usize {
    match d {
        ReuseDistance::Finite(0) => 0,
        ReuseDistance::Finite(d) => 64 - d.leading_zeros() as usize,
        ReuseDistance::Cold => COLD_BIN,
    }
}

/// `[lo, hi)` bounds of a bin; `None` marks an unbounded end.
pub fn bin_bounds(bin: usize) -> (Option<u64>, Option<u64>) {
    match bin {
        0 => (Some(0), Some(1)),
        COLD_BIN => (None, None),
        64 => (Some(1 << 63), None),
        i => (Some(1 << (i - 1)), Some(1 << i)),
    }
}

/// Logarithmically binned reuse-distance distribution at one line size.
#[derive(Debug, Clone, PartialEq)]
pub struct ReuseSignature {
    pub line_size_bytes: u64,
    counts: Vec<u64>,
    total: u64,
}

impl ReuseSignature {
    pub fn from_distances(line_size_bytes: u64, distances: &[ReuseDistance]) -> Result<Self, MemoryError> {
        if distances.is_empty() {
            return Err(MemoryError::EmptyStream);
        }
        let mut counts = vec![0u64; NUM_BINS];
        for &d in distances {
            counts[bin_of(d)] += 1;
        }
        Ok(Self {
            line_size_bytes,
            counts,
            total: distances.len() as u64,
        })
    }

    pub fn accesses(&self) -> u64 {
        self.total
    }

    pub fn count(&self, bin: usize) -> u64 {
        self.counts[bin]
    }

    pub fn probability(&self, bin: usize) -> f64 {
        self.counts[bin] as f64 / self.total as f64
    }

    pub fn probabilities(&self) -> Vec<f64> {
        (0..NUM_BINS).map(|b| self.probability(b)).collect()
    }
}

impl ReuseSignature {
    /// Non-empty bins with their bounds and probabilities.
    pub fn summary(&self) -> SignatureSummary {
        SignatureSummary {
            line_size: self.line_size_bytes,
            accesses: self.total,
            bins: (0..NUM_BINS)
                .filter(|&b| self.counts[b] > 0)
                .map(|index| {
                    let (lo, hi) = bin_bounds(index);
                    SignatureBin {
                        index,
                        lo,
                        hi,
                        p: self.probability(index),
                    }
                })
                .collect(),
        }
    }
}

/// Serializable view of a [`ReuseSignature`]. The cold bin has no bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureSummary {
    pub line_size: u64,
    pub accesses: u64,
    pub bins: Vec<SignatureBin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureBin {
    pub index: usize,
    pub lo: Option<u64>,
    pub hi: Option<u64>,
    pub p: f64,
}

/// Transition counts between reuse-distance bins at line size `b` (rows) and
/// `2b` (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionMap {
    pub line_size_bytes: u64,
    cells: Vec<u64>,
    row_totals: Vec<u64>,
}

impl DistributionMap {
    /// Builds the map from per-access distances at `b` and `2b`.
    ///
    /// Panics if some access has a larger distance at `2b` than at `b`,
    /// which would mean the distance computation is broken.
    pub fn from_distances(line_size_bytes: u64, at_b: &[ReuseDistance], at_2b: &[ReuseDistance]) -> Self {
        assert_eq!(at_b.len(), at_2b.len(), "distance streams differ in length");
        let mut cells = vec![0u64; NUM_BINS * NUM_BINS];
        let mut row_totals = vec![0u64; NUM_BINS];
        for (&small, &large) in at_b.iter().zip(at_2b) {
            assert!(
                large <= small,
                "doubling the line size increased a reuse distance ({small} -> {large})"
            );
            let (i, j) = (bin_of(small), bin_of(large));
            cells[i * NUM_BINS + j] += 1;
            row_totals[i] += 1;
        }
        Self {
            line_size_bytes,
            cells,
            row_totals,
        }
    }

    pub fn row_total(&self, row: usize) -> u64 {
        self.row_totals[row]
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.cells[row * NUM_BINS + col]
    }

    /// Row-normalized probability `p_ij`; zero for empty rows.
    pub fn probability(&self, row: usize, col: usize) -> f64 {
        match self.row_totals[row] {
            0 => 0.0,
            t => self.count(row, col) as f64 / t as f64,
        }
    }

    /// Mass of row `row` that moved to a strictly smaller bin at `2b`.
    ///
    /// For the cold row this is the fraction of first touches that became
    /// reuses once the line doubled.
    pub fn slq_bin(&self, row: usize) -> Result<f64, MemoryError> {
        if row >= NUM_BINS {
            return Err(MemoryError::InvalidRow(row));
        }
        Ok((0..row).map(|j| self.probability(row, j)).sum())
    }
}

/// Computes the distribution map for `(b, 2b)` in a single pass.
pub fn distribution_map(addresses: &[u64], line_size_bytes: u64) -> DistributionMap {
    let mut small = ReuseTracker::new(line_size_bytes);
    let mut large = ReuseTracker::new(line_size_bytes * 2);
    let (at_b, at_2b): (Vec<_>, Vec<_>) = addresses.iter().map(|&a| (small.access(a), large.access(a))).unzip();
    DistributionMap::from_distances(line_size_bytes, &at_b, &at_2b)
}

/// Score of one `(b, 2b)` pair: `|sum_i slq_bin(i) * p_i|`.
pub fn slq_pair_score(map: &DistributionMap, signature: &ReuseSignature) -> Result<f64, MemoryError> {
    if map.line_size_bytes != signature.line_size_bytes {
        return Err(MemoryError::LineSizeMismatch {
            map: map.line_size_bytes,
            signature: signature.line_size_bytes,
        });
    }
    let mut sum = 0.0;
    for i in 0..NUM_BINS {
        let p = signature.probability(i);
        if p > 0.0 {
            sum += map.slq_bin(i)? * p;
        }
    }
    Ok(sum.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlqPair {
    pub line_size: u64,
    pub doubled: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialLocalityReport {
    pub pairs: Vec<SlqPair>,
    pub total: f64,
}

impl SpatialLocalityReport {
    pub fn pair(&self, line_size: u64) -> Option<&SlqPair> {
        self.pairs.iter().find(|p| p.line_size == line_size)
    }
}

/// Weights a list of per-pair scores, ordered by ascending line size, with
/// `2^-k` for the 1-based pair index `k`, normalized by the weight sum.
pub fn weighted_total(scores: &[f64]) -> Result<f64, MemoryError> {
    if scores.is_empty() {
        return Err(MemoryError::NoPairs);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut w = 1.0;
    for &s in scores {
        w *= 0.5;
        num += s * w;
        den += w;
    }
    Ok(num / den)
}

/// Aggregates `(map, signature)` pairs ordered by ascending line size.
pub fn slq_total(pairs: &[(DistributionMap, ReuseSignature)]) -> Result<SpatialLocalityReport, MemoryError> {
    let pairs = pairs
        .iter()
        .map(|(map, sig)| {
            Ok(SlqPair {
                line_size: map.line_size_bytes,
                doubled: map.line_size_bytes * 2,
                score: slq_pair_score(map, sig)?,
            })
        })
        .collect::<Result<Vec<_>, MemoryError>>()?;
    let scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    let total = weighted_total(&scores)?;
    Ok(SpatialLocalityReport { pairs, total })
}

pub fn check_line_sizes(line_sizes: &[u64]) -> Result<(), MemoryError> {
    let ok =
        line_sizes.len() >= 2 && line_sizes[0].is_power_of_two() && line_sizes.windows(2).all(|w| w[1] == w[0] * 2);
    if ok {
        Ok(())
    } else {
        Err(MemoryError::BadLineSizes(line_sizes.to_vec()))
    }
}

/// Signatures at every line size plus the spatial-locality report over the
/// consecutive doubling pairs of `line_sizes`.
pub fn spatial_locality(
    addresses: &[u64],
    line_sizes: &[u64],
) -> Result<(Vec<ReuseSignature>, SpatialLocalityReport), MemoryError> {
    check_line_sizes(line_sizes)?;
    if addresses.is_empty() {
        return Err(MemoryError::EmptyStream);
    }
    let distances: Vec<Vec<ReuseDistance>> = line_sizes
        .iter()
        .map(|&b| super::reuse_distances(addresses, b))
        .collect();
    let signatures = line_sizes
        .iter()
        .zip(&distances)
        .map(|(&b, d)| ReuseSignature::from_distances(b, d))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(DistributionMap, ReuseSignature)> = line_sizes
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            (
                DistributionMap::from_distances(w[0], &distances[k], &distances[k + 1]),
                signatures[k].clone(),
            )
        })
        .collect();
    let report = slq_total(&pairs)?;
    Ok((signatures, report))
}
