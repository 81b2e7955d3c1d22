use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use super::Rate;
use crate::trace::{RegId, TraceEvent};

#[derive(Default)]
struct BlockStats {
    depth: HashMap<u64, u64>,
    all_index: bool,
}

/// Per-block potential parallelism of repeated block instances.
///
/// An instance depends on another instance of the same static block when it
/// reads a register that instance defined, unless the producer is an index
/// update. Each block scores `instances / longest instance chain`, which is
/// 1 when every instance waits on the previous one and the instance count
/// when none do. Blocks made only of index updates are left out.
pub fn pbblp_per_block<E: Borrow<TraceEvent>>(events: &[E], index_flags: &[bool]) -> BTreeMap<u32, Rate> {
    let mut producers: HashMap<RegId, (u32, u64)> = HashMap::new();
    let mut blocks: BTreeMap<u32, BlockStats> = BTreeMap::new();

    for (e, &ix) in events.iter().zip(index_flags) {
        let e = e.borrow();
        let stats = blocks.entry(e.bb_id).or_insert_with(|| BlockStats {
            all_index: true,
            ..Default::default()
        });
        stats.all_index &= ix;
        let mut depth = *stats.depth.entry(e.bb_instance).or_insert(1);
        for r in &e.uses {
            if let Some(&(bb, inst)) = producers.get(r) {
                if bb == e.bb_id && inst != e.bb_instance {
                    let upstream = stats.depth.get(&inst).copied().unwrap_or(1);
                    depth = depth.max(upstream + 1);
                }
            }
        }
        stats.depth.insert(e.bb_instance, depth);
        if let (Some(d), false) = (e.def, ix) {
            producers.insert(d, (e.bb_id, e.bb_instance));
        }
    }

    blocks
        .into_iter()
        .filter(|(_, s)| !s.all_index)
        .map(|(bb, s)| {
            let instances = s.depth.len() as u64;
            let longest = s.depth.values().copied().max().unwrap_or(1);
            (bb, Rate::new(instances, longest))
        })
        .collect()
}

/// Instance-weighted mean of the per-block scores; 1 when no block qualifies.
pub fn pbblp_average(per_block: &BTreeMap<u32, Rate>) -> f64 {
    let total: u64 = per_block.values().map(|r| r.work).sum();
    if total == 0 {
        return 1.0;
    }
    per_block
        .values()
        .map(|r| r.value() * r.work as f64 / total as f64)
        .sum()
}
