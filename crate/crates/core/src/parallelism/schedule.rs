//! Idealized dataflow scheduling.
//!
//! Every instruction issues one cycle after the latest of its producers;
//! instructions without producers issue at cycle 1. Resources are unlimited.

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{ParallelismError, Rate};
use crate::trace::{AccessKind, Opcode, RegId, TraceEvent};

/// Which inter-block dependences constrain the basic-block schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependencyPolicy {
    /// Every register dependence is honored.
    Full,
    /// Dependences on loop-index-update producers are ignored.
    SkipIndexUpdates,
}

#[derive(Debug, Clone, Copy)]
struct Ready {
    cycle: u64,
    index_update: bool,
}

/// Knobs shared by every schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleOptions {
    /// Honor store→load dependences on the same word.
    pub memory_deps: bool,
    pub word_size_bytes: u32,
    /// Treat reads of never-defined registers as ready from the start
    /// instead of failing.
    pub ignore_undefined: bool,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        Self {
            memory_deps: false,
            word_size_bytes: 8,
            ignore_undefined: false,
        }
    }
}

/// Ready-cycle bookkeeping shared by the instruction- and block-level schedules.
pub struct ScheduleState {
    reg_ready: HashMap<RegId, Ready>,
    /// Last store cycle per word-granular line, when memory-carried
    /// dependences are enabled.
    mem_last_store: Option<HashMap<u64, u64>>,
    policy: DependencyPolicy,
    line_shift: u32,
    ignore_undefined: bool,
}

impl ScheduleState {
    pub fn new(policy: DependencyPolicy, options: ScheduleOptions) -> Self {
        Self {
            reg_ready: HashMap::new(),
            mem_last_store: options.memory_deps.then(HashMap::new),
            policy,
            line_shift: options.word_size_bytes.max(1).trailing_zeros(),
            ignore_undefined: options.ignore_undefined,
        }
    }

    pub fn policy(&self) -> DependencyPolicy {
        self.policy
    }

    /// Earliest cycle at which `e` may issue given its producers.
    pub fn earliest(&self, e: &TraceEvent) -> Result<u64, ParallelismError> {
        let mut cycle = 1;
        for r in &e.uses {
            let Some(ready) = self.reg_ready.get(r) else {
                if self.ignore_undefined {
                    continue;
                }
                return Err(ParallelismError::UndefinedRegister { seq: e.seq, reg: *r });
            };
            if self.policy == DependencyPolicy::SkipIndexUpdates && ready.index_update {
                continue;
            }
            cycle = cycle.max(ready.cycle + 1);
        }
        if let (Some(stores), Some(m)) = (&self.mem_last_store, &e.mem) {
            if m.kind == AccessKind::Load {
                if let Some(&c) = stores.get(&(m.address >> self.line_shift)) {
                    cycle = cycle.max(c + 1);
                }
            }
        }
        Ok(cycle)
    }

    /// Records that `e` issued at `cycle`.
    pub fn retire(&mut self, e: &TraceEvent, cycle: u64, index_update: bool) {
        if let Some(d) = e.def {
            self.reg_ready.insert(d, Ready { cycle, index_update });
        }
        if let (Some(stores), Some(m)) = (&mut self.mem_last_store, &e.mem) {
            if m.kind == AccessKind::Store {
                let slot = stores.entry(m.address >> self.line_shift).or_insert(0);
                *slot = (*slot).max(cycle);
            }
        }
    }
}

/// Issue cycle of each instruction under pure dataflow scheduling.
pub fn issue_cycles<E: Borrow<TraceEvent>>(
    events: &[E],
    options: ScheduleOptions,
) -> Result<Vec<u64>, ParallelismError> {
    let mut state = ScheduleState::new(DependencyPolicy::Full, options);
    events
        .iter()
        .map(|e| {
            let e = e.borrow();
            let cycle = state.earliest(e)?;
            state.retire(e, cycle, false);
            Ok(cycle)
        })
        .collect()
}

pub fn ilp_from_cycles(cycles: &[u64]) -> Result<Rate, ParallelismError> {
    let span = cycles.iter().copied().max().ok_or(ParallelismError::EmptyTrace)?;
    Ok(Rate::new(cycles.len() as u64, span))
}

/// Per-opcode parallelism: instruction count over the number of distinct
/// issue cycles those instructions occupy in the global schedule.
pub fn specialized_from_cycles<E: Borrow<TraceEvent>>(events: &[E], cycles: &[u64]) -> BTreeMap<Opcode, Rate> {
    let mut per_op: BTreeMap<Opcode, (u64, Vec<u64>)> = BTreeMap::new();
    for (e, &c) in events.iter().zip(cycles) {
        let slot = per_op.entry(e.borrow().opcode).or_default();
        slot.0 += 1;
        slot.1.push(c);
    }
    per_op
        .into_iter()
        .map(|(op, (count, mut cs))| {
            cs.sort_unstable();
            cs.dedup();
            (op, Rate::new(count, cs.len() as u64))
        })
        .collect()
}

/// Load/store parallelism where only address-consecutive accesses issued in
/// the same cycle share a group.
///
/// Within each cycle the longest run of accesses with `next.address ==
/// prev.address + prev.size` (after sorting by address) forms one group;
/// every other access of that cycle is a group of its own.
pub fn consecutive_memory_rates<E: Borrow<TraceEvent>>(events: &[E], cycles: &[u64]) -> BTreeMap<Opcode, Rate> {
    let mut buckets: BTreeMap<(Opcode, u64), Vec<(u64, u64)>> = BTreeMap::new();
    for (e, &c) in events.iter().zip(cycles) {
        let e = e.borrow();
        if !matches!(e.opcode, Opcode::Load | Opcode::Store) {
            continue;
        }
        let (addr, size) = e
            .mem
            .map(|m| (m.address, m.size_bytes as u64))
            // a memory opcode without a reference cannot join a run
            .unwrap_or((u64::MAX, 0));
        buckets.entry((e.opcode, c)).or_default().push((addr, size));
    }
    let mut out: BTreeMap<Opcode, Rate> = BTreeMap::new();
    for ((op, _), mut accesses) in buckets {
        accesses.sort_unstable();
        let run = longest_consecutive_run(&accesses);
        let groups = (accesses.len() - run) as u64 + 1;
        let rate = out.entry(op).or_insert(Rate::new(0, 0));
        rate.work += accesses.len() as u64;
        rate.span += groups;
    }
    out
}

/// Longest chain in address-sorted `(address, size)` pairs where each element
/// starts where the previous one ends; each access is used at most once.
fn longest_consecutive_run(sorted: &[(u64, u64)]) -> usize {
    let mut best_ending_at: HashMap<u64, usize> = HashMap::new();
    let mut best = 0;
    for &(addr, size) in sorted {
        if size == 0 {
            best = best.max(1);
            continue;
        }
        let len = 1 + best_ending_at.get(&addr).copied().unwrap_or(0);
        let end = addr.saturating_add(size);
        let slot = best_ending_at.entry(end).or_insert(0);
        *slot = (*slot).max(len);
        best = best.max(len);
    }
    best
}

/// Opcode-frequency-weighted mean of per-opcode rates.
pub fn weighted_parallelism(rates: &BTreeMap<Opcode, Rate>) -> f64 {
    let total: u64 = rates.values().map(|r| r.work).sum();
    if total == 0 {
        return 0.0;
    }
    rates.values().map(|r| r.value() * r.work as f64 / total as f64).sum()
}

/// Basic-block-level schedule: instructions of one dynamic block instance
/// run serially in trace order, each no earlier than one cycle after its
/// producers (as filtered by `policy`).
pub fn bblp_cycles<E: Borrow<TraceEvent>>(
    events: &[E],
    index_flags: &[bool],
    policy: DependencyPolicy,
    options: ScheduleOptions,
) -> Result<Vec<u64>, ParallelismError> {
    let mut state = ScheduleState::new(policy, options);
    let mut block_last: HashMap<(u32, u64), u64> = HashMap::new();
    events
        .iter()
        .zip(index_flags)
        .map(|(e, &ix)| {
            let e = e.borrow();
            let mut cycle = state.earliest(e)?;
            let last = block_last.entry(e.block()).or_insert(0);
            cycle = cycle.max(*last + 1);
            *last = cycle;
            state.retire(e, cycle, ix);
            Ok(cycle)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gen_chain, gen_dploop, gen_parallel};
    use crate::trace::MemRef;

    const OPTS: ScheduleOptions = ScheduleOptions {
        memory_deps: false,
        word_size_bytes: 8,
        ignore_undefined: false,
    };

    fn op(seq: u64, opcode: Opcode, def: Option<RegId>, uses: &[RegId]) -> TraceEvent {
        let mut e = TraceEvent::new(seq, opcode);
        e.def = def;
        e.uses = uses.to_vec();
        e
    }

    #[test]
    fn chain_and_parallel() {
        let c = gen_chain(5).unwrap();
        let cycles = issue_cycles(&c.events, OPTS).unwrap();
        assert_eq!(cycles, vec![1, 2, 3, 4, 5]);
        assert_eq!(ilp_from_cycles(&cycles).unwrap(), Rate::new(5, 5));

        let p = gen_parallel(8).unwrap();
        let cycles = issue_cycles(&p.events, OPTS).unwrap();
        assert_eq!(ilp_from_cycles(&cycles).unwrap().value(), 8.0);
    }

    #[test]
    fn diamond() {
        let events = [
            op(0, Opcode::Add, Some(1), &[]),
            op(1, Opcode::Add, Some(2), &[1]),
            op(2, Opcode::Add, Some(3), &[1]),
            op(3, Opcode::Add, Some(4), &[2, 3]),
        ];
        let cycles = issue_cycles(&events, OPTS).unwrap();
        assert_eq!(cycles, vec![1, 2, 2, 3]);
        assert_eq!(ilp_from_cycles(&cycles).unwrap(), Rate::new(4, 3));
    }

    #[test]
    fn undefined_register() {
        let events = [op(4, Opcode::Add, Some(1), &[9])];
        assert_eq!(
            issue_cycles(&events, OPTS),
            Err(ParallelismError::UndefinedRegister { seq: 4, reg: 9 })
        );
    }

    #[test]
    fn undefined_register_ignored_when_lenient() {
        let events = [op(4, Opcode::Add, Some(1), &[9]), op(5, Opcode::Add, Some(2), &[1])];
        let lenient = ScheduleOptions {
            ignore_undefined: true,
            ..OPTS
        };
        assert_eq!(issue_cycles(&events, lenient).unwrap(), vec![1, 2]);
    }

    #[test]
    fn specialized_fadd_fmul() {
        let mut events: Vec<TraceEvent> = (0..4).map(|i| op(i, Opcode::Fadd, Some(i + 1), &[])).collect();
        events.push(op(4, Opcode::Fmul, Some(10), &[]));
        for i in 0..3 {
            events.push(op(5 + i, Opcode::Fmul, Some(11 + i), &[10 + i]));
        }
        let cycles = issue_cycles(&events, OPTS).unwrap();
        let spec = specialized_from_cycles(&events, &cycles);
        assert_eq!(spec[&Opcode::Fadd].value(), 4.0);
        assert_eq!(spec[&Opcode::Fmul].value(), 1.0);
        assert_eq!(weighted_parallelism(&spec), 2.5);
    }

    #[test]
    fn distinct_cycle_compaction() {
        // two adds at cycles 1 and 5 never co-issue
        let mut events = vec![op(0, Opcode::Add, Some(1), &[])];
        let mut prev = 1;
        for i in 0..3 {
            events.push(op(1 + i, Opcode::Mul, Some(10 + i), &[prev]));
            prev = 10 + i;
        }
        events.push(op(4, Opcode::Add, Some(20), &[prev]));
        let cycles = issue_cycles(&events, OPTS).unwrap();
        assert_eq!(cycles, vec![1, 2, 3, 4, 5]);
        let spec = specialized_from_cycles(&events, &cycles);
        assert_eq!(spec[&Opcode::Add], Rate::new(2, 2));
    }

    fn loads(addrs: &[u64]) -> Vec<TraceEvent> {
        addrs
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let mut e = op(i as u64, Opcode::Load, Some(i as u64 + 1), &[]);
                e.mem = Some(MemRef::load(a, 8));
                e
            })
            .collect()
    }

    #[test]
    fn consecutive_groups() {
        let events = loads(&[0x18, 0x0, 0x10, 0x8]);
        let cycles = vec![1; 4];
        assert_eq!(
            consecutive_memory_rates(&events, &cycles)[&Opcode::Load],
            Rate::new(4, 1)
        );
        let events = loads(&[0x0, 0x100, 0x200, 0x300]);
        assert_eq!(
            consecutive_memory_rates(&events, &cycles)[&Opcode::Load],
            Rate::new(4, 4)
        );
        let events = loads(&[0x0, 0x8, 0x100, 0x0]);
        assert_eq!(
            consecutive_memory_rates(&events, &cycles)[&Opcode::Load],
            Rate::new(4, 3)
        );
    }

    #[test]
    fn memory_dependences_when_enabled() {
        let mut st = op(0, Opcode::Store, None, &[]);
        st.mem = Some(MemRef::store(0x40, 8));
        let mut ld = op(1, Opcode::Load, Some(1), &[]);
        ld.mem = Some(MemRef::load(0x40, 8));
        let events = [st, ld];
        assert_eq!(issue_cycles(&events, OPTS).unwrap(), vec![1, 1]);
        assert_eq!(
            issue_cycles(
                &events,
                ScheduleOptions {
                    memory_deps: true,
                    ..OPTS
                }
            )
            .unwrap(),
            vec![1, 2]
        );
    }

    #[test]
    fn bblp_two_independent_blocks() {
        let mut events = Vec::new();
        for bb in 0..2u32 {
            for i in 0..5u64 {
                let mut e = op(bb as u64 * 5 + i, Opcode::Add, Some(bb as u64 * 5 + i + 1), &[]);
                e.bb_id = bb;
                events.push(e);
            }
        }
        let flags = vec![false; events.len()];
        let cycles = bblp_cycles(&events, &flags, DependencyPolicy::Full, OPTS).unwrap();
        assert_eq!(ilp_from_cycles(&cycles).unwrap(), Rate::new(10, 5));
    }

    #[test]
    fn bblp_single_block_is_serial() {
        let p = gen_parallel(8).unwrap();
        let flags = vec![false; 8];
        let cycles = bblp_cycles(&p.events, &flags, DependencyPolicy::Full, OPTS).unwrap();
        assert_eq!(ilp_from_cycles(&cycles).unwrap().value(), 1.0);
    }

    #[test]
    fn bblp_dploop_policies() {
        let (k, m) = (6, 4);
        let t = gen_dploop(k, m, false).unwrap();
        let flags: Vec<bool> = t.events.iter().map(|e| e.is_index_update).collect();
        let full = bblp_cycles(&t.events, &flags, DependencyPolicy::Full, OPTS).unwrap();
        assert_eq!(ilp_from_cycles(&full).unwrap().value(), 1.0);
        let smart = bblp_cycles(&t.events, &flags, DependencyPolicy::SkipIndexUpdates, OPTS).unwrap();
        assert_eq!(ilp_from_cycles(&smart).unwrap(), Rate::new(k * m, m));
    }
}
