//! The reader must hold one line at a time, whatever the trace length.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use nmc_core::trace::{read_trace, MemRef, Opcode, TraceEvent, TraceHeader, TraceWriter};

struct Counting;

static LIVE: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let now = LIVE.fetch_add(layout.size(), Ordering::SeqCst) + layout.size();
        PEAK.fetch_max(now, Ordering::SeqCst);
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        LIVE.fetch_sub(layout.size(), Ordering::SeqCst);
        System.dealloc(ptr, layout)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

const EVENTS: u64 = 1_000_000;

#[test]
fn million_events_in_constant_memory() {
    let header = TraceHeader::new("big", 8, 48);
    let mut bytes = Vec::new();
    let mut w = TraceWriter::new(header, &mut bytes).unwrap();
    for i in 0..EVENTS {
        let mut e = TraceEvent::new(i, if i % 2 == 0 { Opcode::Load } else { Opcode::Add });
        e.def = Some(i);
        if i > 0 {
            e.uses = vec![i - 1];
        }
        if i % 2 == 0 {
            e.mem = Some(MemRef::load((i % 4096) * 8, 8));
        }
        e.bb_instance = i / 8;
        w.write_event(&e).unwrap();
    }
    w.finish().unwrap();

    let baseline = LIVE.load(Ordering::SeqCst);
    PEAK.store(baseline, Ordering::SeqCst);
    let (_, reader) = read_trace(&bytes[..]).unwrap();
    let mut count = 0u64;
    let mut loads = 0u64;
    for e in reader {
        let e = e.unwrap();
        count += 1;
        loads += e.mem.is_some() as u64;
    }
    let peak = PEAK.load(Ordering::SeqCst) - baseline;
    assert_eq!((count, loads), (EVENTS, EVENTS / 2));
    assert!(peak < 64 * 1024, "reader peaked at {peak} bytes");
}
