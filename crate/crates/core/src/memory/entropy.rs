use std::collections::HashMap;

use serde::Serialize;

use super::MemoryError;

/// Default LSB cuts for the entropy ladder.
pub const DEFAULT_CUTS: [u32; 5] = [0, 3, 6, 9, 12];

/// Shannon entropy, in bits, of the addresses after discarding the `lsb_cut`
/// least-significant bits.
pub fn memory_entropy(addresses: &[u64], lsb_cut: u32, address_bits: u32) -> Result<f64, MemoryError> {
    if addresses.is_empty() {
        return Err(MemoryError::EmptyStream);
    }
    if lsb_cut >= address_bits {
        return Err(MemoryError::CutTooLarge {
            cut: lsb_cut,
            address_bits,
        });
    }
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for &a in addresses {
        *counts.entry(a >> lsb_cut).or_default() += 1;
    }
    Ok(shannon(counts.into_values().collect()))
}

/// Entropy of an empirical distribution given by occurrence counts.
///
/// Counts are summed in sorted order so that equal multisets of counts yield
/// bit-identical results.
fn shannon(mut counts: Vec<u64>) -> f64 {
    counts.sort_unstable();
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let h: f64 = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    h.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyLadder {
    pub cuts: Vec<u32>,
    pub values: Vec<f64>,
}

impl EntropyLadder {
    pub fn compute(addresses: &[u64], cuts: &[u32], address_bits: u32) -> Result<Self, MemoryError> {
        check_cuts(cuts)?;
        let values = cuts
            .iter()
            .map(|&c| memory_entropy(addresses, c, address_bits))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            cuts: cuts.to_vec(),
            values,
        })
    }

    /// Mean drop in entropy between consecutive rungs.
    pub fn diff(&self) -> Result<f64, MemoryError> {
        entropy_diff(&self.values)
    }
}

pub fn check_cuts(cuts: &[u32]) -> Result<(), MemoryError> {
    if cuts.first() != Some(&0) || cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MemoryError::BadCuts(cuts.to_vec()));
    }
    Ok(())
}

/// Mean of `values[k] - values[k + 1]` over consecutive pairs.
pub fn entropy_diff(values: &[f64]) -> Result<f64, MemoryError> {
    if values.len() < 2 {
        return Err(MemoryError::LadderTooShort(values.len()));
    }
    let sum: f64 = values.windows(2).map(|w| w[0] - w[1]).sum();
    Ok(sum / (values.len() - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_address_has_zero_entropy() {
        assert_eq!(memory_entropy(&[0x40; 17], 0, 48).unwrap(), 0.0);
    }

    #[test]
    fn uniform_over_n_bits() {
        let addrs: Vec<u64> = (0..256).collect();
        assert!((memory_entropy(&addrs, 0, 8).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn four_strided_addresses() {
        let addrs = [0x00, 0x08, 0x10, 0x18];
        assert_eq!(memory_entropy(&addrs, 0, 48).unwrap(), 2.0);
        assert_eq!(memory_entropy(&addrs, 5, 48).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(memory_entropy(&[], 0, 48), Err(MemoryError::EmptyStream));
        assert!(matches!(
            memory_entropy(&[1], 48, 48),
            Err(MemoryError::CutTooLarge { .. })
        ));
        assert!(EntropyLadder::compute(&[1], &[3, 6], 48).is_err());
        assert!(EntropyLadder::compute(&[1], &[0, 6, 6], 48).is_err());
        assert_eq!(entropy_diff(&[1.0]), Err(MemoryError::LadderTooShort(1)));
    }

    #[test]
    fn ladder_on_stream() {
        let ladder = EntropyLadder::compute(&[0x00, 0x08, 0x10, 0x18], &[0, 3, 5], 48).unwrap();
        assert_eq!(ladder.values, vec![2.0, 2.0, 0.0]);
        assert_eq!(ladder.diff().unwrap(), 1.0);
    }

    #[test]
    fn ladder_constant_when_aligned_above_cuts() {
        let addrs: Vec<u64> = (0..16u64).map(|i| (i % 5) << 11).collect();
        let ladder = EntropyLadder::compute(&addrs, &[0, 2, 5, 10], 48).unwrap();
        assert!(ladder.values.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(ladder.diff().unwrap(), 0.0);
    }

    #[test]
    fn diff_arithmetic() {
        assert_eq!(entropy_diff(&[10.0, 9.0, 8.5]).unwrap(), 0.75);
        assert_eq!(entropy_diff(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
    }
}
