//! Parallelism metrics from idealized dependence scheduling: ILP, per-opcode
//! ILP, DLP, basic-block-level parallelism and its potential (PBBLP) variant.
//!
//! All functions here work on the events of a single thread.

mod index;
mod pbblp;
mod schedule;

pub use index::classify_index_updates;
pub use pbblp::{pbblp_average, pbblp_per_block};
pub use schedule::{
    bblp_cycles, consecutive_memory_rates, ilp_from_cycles, issue_cycles, specialized_from_cycles,
    weighted_parallelism, DependencyPolicy, ScheduleOptions, ScheduleState,
};

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Opcode, RegId, TraceEvent};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParallelismError {
    #[error("seq {seq}: register {reg} used before any definition")]
    UndefinedRegister { seq: u64, reg: RegId },
    #[error("no instructions to schedule")]
    EmptyTrace,
    #[error("events from threads {0} and {1} mixed in one schedule")]
    MixedThreads(u32, u32),
}

/// An exact ratio `work / span`, e.g. instructions over issue cycles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rate {
    pub work: u64,
    pub span: u64,
}

impl Rate {
    pub fn new(work: u64, span: u64) -> Self {
        Self { work, span }
    }

    pub fn value(&self) -> f64 {
        self.work as f64 / self.span as f64
    }

    /// Exact rational comparison.
    pub fn same_ratio(&self, other: &Rate) -> bool {
        self.work as u128 * other.span as u128 == other.work as u128 * self.span as u128
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.work, self.span)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelismConfig {
    /// Treat store→load on the same word as a dependence.
    pub memory_deps: bool,
    /// Schedule traces that read undefined registers instead of failing.
    pub ignore_undefined: bool,
}

impl ParallelismConfig {
    fn options(self, word_size_bytes: u32) -> ScheduleOptions {
        ScheduleOptions {
            memory_deps: self.memory_deps,
            word_size_bytes,
            ignore_undefined: self.ignore_undefined,
        }
    }
}

fn check_thread<E: Borrow<TraceEvent>>(events: &[E]) -> Result<(), ParallelismError> {
    let first = events.first().ok_or(ParallelismError::EmptyTrace)?.borrow().thread_id;
    match events
        .iter()
        .map(Borrow::borrow)
        .find(|e: &&TraceEvent| e.thread_id != first)
    {
        Some(e) => Err(ParallelismError::MixedThreads(first, e.thread_id)),
        None => Ok(()),
    }
}

// The standalone metric functions run the default register-only schedule.
const DEFAULTS: ScheduleOptions = ScheduleOptions {
    memory_deps: false,
    word_size_bytes: 8,
    ignore_undefined: false,
};

pub fn ilp_overall<E: Borrow<TraceEvent>>(events: &[E]) -> Result<Rate, ParallelismError> {
    check_thread(events)?;
    ilp_from_cycles(&issue_cycles(events, DEFAULTS)?)
}

pub fn ilp_specialized<E: Borrow<TraceEvent>>(events: &[E]) -> Result<BTreeMap<Opcode, Rate>, ParallelismError> {
    check_thread(events)?;
    let cycles = issue_cycles(events, DEFAULTS)?;
    Ok(specialized_from_cycles(events, &cycles))
}

pub fn dlp_avg<E: Borrow<TraceEvent>>(events: &[E]) -> Result<f64, ParallelismError> {
    Ok(weighted_parallelism(&ilp_specialized(events)?))
}

/// `(dlp1, dlp2)`: DLP without and with the address-consecutiveness
/// requirement on loads and stores.
pub fn dlp_variants<E: Borrow<TraceEvent>>(events: &[E]) -> Result<(f64, f64), ParallelismError> {
    check_thread(events)?;
    let cycles = issue_cycles(events, DEFAULTS)?;
    Ok(dlp_from_cycles(events, &cycles))
}

fn dlp_from_cycles<E: Borrow<TraceEvent>>(events: &[E], cycles: &[u64]) -> (f64, f64) {
    let specialized = specialized_from_cycles(events, cycles);
    let mut grouped = specialized.clone();
    grouped.extend(consecutive_memory_rates(events, cycles));
    (weighted_parallelism(&specialized), weighted_parallelism(&grouped))
}

pub fn bblp<E: Borrow<TraceEvent>>(events: &[E], policy: DependencyPolicy) -> Result<Rate, ParallelismError> {
    check_thread(events)?;
    let flags = classify_index_updates(events);
    ilp_from_cycles(&bblp_cycles(events, &flags, policy, DEFAULTS)?)
}

/// Per-block PBBLP scores and their instance-weighted average.
pub fn pbblp<E: Borrow<TraceEvent>>(events: &[E]) -> Result<(BTreeMap<u32, Rate>, f64), ParallelismError> {
    check_thread(events)?;
    let flags = classify_index_updates(events);
    let per_block = pbblp_per_block(events, &flags);
    let avg = pbblp_average(&per_block);
    Ok((per_block, avg))
}

/// All parallelism metrics of one thread.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelismReport {
    pub instructions: u64,
    pub ilp: f64,
    pub ilp_specialized: BTreeMap<String, f64>,
    pub dlp_avg: f64,
    pub dlp1: f64,
    pub dlp2: f64,
    pub bblp_full: f64,
    pub bblp_smart: f64,
    pub pbblp_avg: f64,
    pub pbblp_per_bb: BTreeMap<u32, f64>,
}

/// Runs every schedule over one thread's events.
pub fn analyze_thread<E: Borrow<TraceEvent>>(
    events: &[E],
    word_size_bytes: u32,
    config: ParallelismConfig,
) -> Result<ParallelismReport, ParallelismError> {
    check_thread(events)?;
    let options = config.options(word_size_bytes);
    let cycles = issue_cycles(events, options)?;
    let ilp = ilp_from_cycles(&cycles)?;
    let specialized = specialized_from_cycles(events, &cycles);
    let (dlp1, dlp2) = dlp_from_cycles(events, &cycles);

    let flags = classify_index_updates(events);
    let bblp_for =
        |policy| -> Result<Rate, ParallelismError> { ilp_from_cycles(&bblp_cycles(events, &flags, policy, options)?) };
    let bblp_full = bblp_for(DependencyPolicy::Full)?;
    let bblp_smart = bblp_for(DependencyPolicy::SkipIndexUpdates)?;
    let per_block = pbblp_per_block(events, &flags);

    Ok(ParallelismReport {
        instructions: events.len() as u64,
        ilp: ilp.value(),
        ilp_specialized: specialized
            .iter()
            .map(|(op, r)| (op.mnemonic().to_string(), r.value()))
            .collect(),
        dlp_avg: dlp1,
        dlp1,
        dlp2,
        bblp_full: bblp_full.value(),
        bblp_smart: bblp_smart.value(),
        pbblp_avg: pbblp_average(&per_block),
        pbblp_per_bb: per_block.iter().map(|(bb, r)| (*bb, r.value())).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gen_chain, gen_dploop, gen_matmul, gen_parallel, gen_stream};
    use crate::trace::MemRef;

    #[test]
    fn rate_ratio() {
        assert!(Rate::new(2, 4).same_ratio(&Rate::new(1, 2)));
        assert!(!Rate::new(2, 4).same_ratio(&Rate::new(2, 3)));
        assert_eq!(Rate::new(8, 2).value(), 4.0);
    }

    #[test]
    fn chain_metrics() {
        let t = gen_chain(5).unwrap();
        assert_eq!(ilp_overall(&t.events).unwrap().value(), 1.0);
        assert_eq!(dlp_avg(&t.events).unwrap(), 1.0);
        assert_eq!(ilp_overall(&gen_chain(1).unwrap().events).unwrap().value(), 1.0);
    }

    #[test]
    fn parallel_metrics() {
        let t = gen_parallel(8).unwrap();
        assert_eq!(ilp_overall(&t.events).unwrap().value(), 8.0);
        assert_eq!(ilp_specialized(&t.events).unwrap()[&Opcode::Add].value(), 8.0);
        assert_eq!(bblp(&t.events, DependencyPolicy::Full).unwrap().value(), 1.0);
        assert_eq!(dlp_avg(&t.events).unwrap(), 8.0);
    }

    #[test]
    fn dlp_variants_on_strided_loads() {
        let t = gen_stream(4, 8, 0).unwrap();
        let (d1, d2) = dlp_variants(&t.events).unwrap();
        assert_eq!((d1, d2), (4.0, 4.0));
        let t = gen_stream(4, 0x100, 0).unwrap();
        let (d1, d2) = dlp_variants(&t.events).unwrap();
        assert_eq!((d1, d2), (4.0, 1.0));
        let t = gen_chain(4).unwrap();
        let (d1, d2) = dlp_variants(&t.events).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn pbblp_anchor_values() {
        let (per, avg) = pbblp(&gen_dploop(2, 5, false).unwrap().events).unwrap();
        assert_eq!(per[&0].value(), 2.0);
        assert_eq!(avg, 2.0);
        let (_, avg) = pbblp(&gen_dploop(5, 3, true).unwrap().events).unwrap();
        assert_eq!(avg, 1.0);
    }

    #[test]
    fn errors() {
        let empty: [TraceEvent; 0] = [];
        assert_eq!(ilp_overall(&empty), Err(ParallelismError::EmptyTrace));
        let mut a = TraceEvent::new(0, Opcode::Add);
        let mut b = TraceEvent::new(1, Opcode::Add);
        a.thread_id = 0;
        b.thread_id = 3;
        assert_eq!(ilp_overall(&[a, b]), Err(ParallelismError::MixedThreads(0, 3)));
    }

    #[test]
    fn report_invariants_on_matmul() {
        let t = gen_matmul(4).unwrap();
        let r = analyze_thread(&t.events, 8, ParallelismConfig::default()).unwrap();
        assert!(r.ilp >= 1.0);
        assert!(r.dlp2 <= r.dlp1);
        assert!(r.bblp_full <= r.bblp_smart);
        assert_eq!(r.dlp_avg, r.dlp1);
        assert_eq!(r.instructions, t.events.len() as u64);
    }

    #[test]
    fn memory_dependences_lengthen_schedules() {
        let mut st = TraceEvent::new(0, Opcode::Store);
        st.mem = Some(MemRef::store(0, 8));
        let mut ld = TraceEvent::new(1, Opcode::Load);
        ld.def = Some(1);
        ld.mem = Some(MemRef::load(0, 8));
        ld.bb_id = 1;
        let events = [st, ld];
        let off = analyze_thread(&events, 8, ParallelismConfig::default()).unwrap();
        let on = analyze_thread(
            &events,
            8,
            ParallelismConfig {
                memory_deps: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(off.ilp, 2.0);
        assert_eq!(on.ilp, 1.0);
        assert_eq!(on.bblp_full, 1.0);
    }
}
