use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{RegId, TraceEvent, TraceHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// A register was read before any instruction of the thread defined it.
    UseBeforeDef,
    /// A register was defined twice in the same thread.
    SsaViolation,
    /// `seq` did not strictly increase within a thread.
    NonMonotoneSeq,
    ThreadOutOfRange,
    AddressOutOfRange,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::UseBeforeDef => "use-before-def",
            ViolationKind::SsaViolation => "ssa-violation",
            ViolationKind::NonMonotoneSeq => "non-monotone-seq",
            ViolationKind::ThreadOutOfRange => "thread-out-of-range",
            ViolationKind::AddressOutOfRange => "address-out-of-range",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub seq: u64,
    pub thread_id: u32,
    /// Offending register, when the violation concerns one.
    pub register: Option<RegId>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at seq {} (thread {})", self.kind, self.seq, self.thread_id)?;
        if let Some(r) = self.register {
            write!(f, ", register {r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

#[derive(Default)]
struct ThreadState {
    defined: HashSet<RegId>,
    last_seq: Option<u64>,
}

/// Checks the SSA and ordering assumptions the metrics rely on.
pub fn validate_trace<'a, I>(header: &TraceHeader, events: I) -> ValidationReport
where
    I: IntoIterator<Item = &'a TraceEvent>,
{
    let mut threads: HashMap<u32, ThreadState> = HashMap::new();
    let mut report = ValidationReport::default();
    let mut push = |kind, e: &TraceEvent, register| {
        report.violations.push(Violation {
            kind,
            seq: e.seq,
            thread_id: e.thread_id,
            register,
        })
    };

    for e in events {
        if e.thread_id >= header.thread_count {
            push(ViolationKind::ThreadOutOfRange, e, None);
        }
        if let Some(mem) = &e.mem {
            if !header.contains(mem) {
                push(ViolationKind::AddressOutOfRange, e, None);
            }
        }
        let state = threads.entry(e.thread_id).or_default();
        if state.last_seq.is_some_and(|last| e.seq <= last) {
            push(ViolationKind::NonMonotoneSeq, e, None);
        }
        state.last_seq = Some(e.seq);
        for &r in &e.uses {
            if !state.defined.contains(&r) {
                push(ViolationKind::UseBeforeDef, e, Some(r));
            }
        }
        if let Some(r) = e.def {
            if !state.defined.insert(r) {
                push(ViolationKind::SsaViolation, e, Some(r));
            }
        }
    }
    report
}
