//! Memory-behavior metrics: address entropy, reuse distance and spatial locality.

mod entropy;
mod locality;
mod reuse;

pub use entropy::{check_cuts, entropy_diff, memory_entropy, EntropyLadder, DEFAULT_CUTS};
pub use locality::{
    bin_bounds, bin_of, check_line_sizes, distribution_map, slq_pair_score, slq_total, spatial_locality,
    weighted_total, DistributionMap, ReuseSignature, SignatureBin, SignatureSummary, SlqPair, SpatialLocalityReport,
    COLD_BIN, FINITE_BINS, NUM_BINS,
};
pub use reuse::{reuse_distances, ReuseDistance, ReuseTracker};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum MemoryError {
    #[error("empty memory access stream")]
    EmptyStream,
    #[error("lsb cut {cut} must be below the address width ({address_bits} bits)")]
    CutTooLarge { cut: u32, address_bits: u32 },
    #[error("entropy cuts must start at 0 and strictly increase, got {0:?}")]
    BadCuts(Vec<u32>),
    #[error("entropy ladder needs at least 2 entries, got {0}")]
    LadderTooShort(usize),
    #[error("distribution map row {0} out of range")]
    InvalidRow(usize),
    #[error("spatial locality needs at least one line-size pair")]
    NoPairs,
    #[error("distribution map at {map}B paired with a {signature}B signature")]
    LineSizeMismatch { map: u64, signature: u64 },
    #[error("line sizes must be powers of two, each twice the previous, got {0:?}")]
    BadLineSizes(Vec<u64>),
}
