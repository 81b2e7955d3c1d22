//! Loop-index-update classification.
//!
//! Traces that carry `ix=1` flags are trusted as-is. Traces without any flag
//! fall back to a structural heuristic, which is approximate:
//!
//! * a loop-exit compare is a `cmp` whose result only feeds branches;
//! * an integer `add`/`sub` with at most one register operand whose result
//!   is consumed, and only by branches, loop-exit compares or the same
//!   static block's next dynamic instance, is an index update
//!   (`i = i + 1` feeding the next iteration);
//! * a loop-exit compare whose operands are all index updates is one too;
//! * so is a `br` whose operands are all index updates.

use std::borrow::Borrow;
use std::collections::HashMap;

use crate::trace::{Opcode, TraceEvent};

/// Per-event index-update flags for one thread's events.
pub fn classify_index_updates<E: Borrow<TraceEvent>>(events: &[E]) -> Vec<bool> {
    if events.iter().any(|e| e.borrow().is_index_update) {
        return events.iter().map(|e| e.borrow().is_index_update).collect();
    }
    heuristic(events)
}

fn heuristic<E: Borrow<TraceEvent>>(events: &[E]) -> Vec<bool> {
    let n = events.len();
    let mut producer: HashMap<u64, usize> = HashMap::new();
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in events.iter().enumerate() {
        let e = e.borrow();
        for u in &e.uses {
            if let Some(&p) = producer.get(u) {
                consumers[p].push(i);
            }
        }
        if let Some(d) = e.def {
            producer.insert(d, i);
        }
    }

    let ev = |i: usize| events[i].borrow();
    let exit_cmp: Vec<bool> = (0..n)
        .map(|i| {
            ev(i).opcode == Opcode::Cmp
                && !consumers[i].is_empty()
                && consumers[i].iter().all(|&c| ev(c).opcode == Opcode::Br)
        })
        .collect();

    let mut flags = vec![false; n];
    for i in 0..n {
        let e = ev(i);
        if !matches!(e.opcode, Opcode::Add | Opcode::Sub) || e.def.is_none() || e.uses.len() > 1 {
            continue;
        }
        let feeds = &consumers[i];
        flags[i] = !feeds.is_empty()
            && feeds.iter().all(|&c| {
                let c_ev = ev(c);
                c_ev.opcode == Opcode::Br
                    || exit_cmp[c]
                    || (c_ev.bb_id == e.bb_id && c_ev.bb_instance == e.bb_instance + 1)
            });
    }

    let operands_are_index = |e: &TraceEvent, flags: &[bool]| {
        !e.uses.is_empty() && e.uses.iter().all(|u| producer.get(u).is_some_and(|&p| flags[p]))
    };
    for i in 0..n {
        if exit_cmp[i] && operands_are_index(ev(i), &flags) {
            flags[i] = true;
        }
    }
    for i in 0..n {
        let e = ev(i);
        if e.opcode == Opcode::Br && operands_are_index(e, &flags) {
            flags[i] = true;
        }
    }
    flags
}
