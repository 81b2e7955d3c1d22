use nmc_core::parallelism::{
    analyze_thread, bblp, classify_index_updates, dlp_variants, ilp_overall, ilp_specialized, pbblp, DependencyPolicy,
    ParallelismConfig, Rate,
};
use nmc_core::trace::{Trace, TraceEvent};
use nmc_testkit::oracle::{self, Mode};
use nmc_testkit::{fuzz_trace, generator_suite, FuzzConfig};

fn fuzz_traces(n: u64) -> Vec<Trace> {
    (0..n)
        .map(|seed| {
            fuzz_trace(
                seed,
                &FuzzConfig {
                    threads: 1 + (seed % 3) as u32,
                    ..Default::default()
                },
            )
        })
        .collect()
}

fn same(got: Rate, (work, span): (u64, u64)) -> bool {
    got.same_ratio(&Rate::new(work, span))
}

fn check_against_oracle(label: &str, events: &[&TraceEvent]) {
    let flags = classify_index_updates(events);

    let cycles = oracle::list_schedule(events, Mode::Dataflow, &flags);
    let ilp = ilp_overall(events).unwrap();
    assert!(same(ilp, oracle::rate(&cycles)), "{label}: ilp {ilp}");

    let spec = ilp_specialized(events).unwrap();
    let want = oracle::specialized(events, &cycles);
    assert_eq!(spec.len(), want.len(), "{label}");
    for (op, r) in &spec {
        assert!(
            same(*r, want[op]),
            "{label}: ilp_specialized[{op}] {r} vs {:?}",
            want[op]
        );
    }

    for (policy, skip_index) in [
        (DependencyPolicy::Full, false),
        (DependencyPolicy::SkipIndexUpdates, true),
    ] {
        let got = bblp(events, policy).unwrap();
        let want = oracle::rate(&oracle::list_schedule(events, Mode::Blocks { skip_index }, &flags));
        assert!(same(got, want), "{label}: bblp {policy:?} {got} vs {want:?}");
    }

    let (per_bb, _) = pbblp(events).unwrap();
    let want = oracle::pbblp(events, &flags);
    assert_eq!(per_bb.len(), want.len(), "{label}");
    for (bb, r) in &per_bb {
        assert!(same(*r, want[bb]), "{label}: pbblp[{bb}] {r} vs {:?}", want[bb]);
    }
}

#[test]
fn generators_match_list_schedule() {
    for t in generator_suite() {
        for (tid, events) in t.split_threads().iter().enumerate() {
            check_against_oracle(&format!("{} thread {tid}", t.header.app_name), events);
        }
    }
}

#[test]
fn fuzz_matches_list_schedule() {
    for t in fuzz_traces(100) {
        for (tid, events) in t.split_threads().iter().enumerate() {
            if !events.is_empty() {
                check_against_oracle(&format!("{} thread {tid}", t.header.app_name), events);
            }
        }
    }
}

#[test]
fn ordering_invariants() {
    for t in generator_suite().into_iter().chain(fuzz_traces(60)) {
        for events in t.split_threads().iter().filter(|e| !e.is_empty()) {
            let (d1, d2) = dlp_variants(events).unwrap();
            assert!(d2 <= d1 + 1e-12, "{}: dlp2 {d2} > dlp1 {d1}", t.header.app_name);
            let full = bblp(events, DependencyPolicy::Full).unwrap();
            let smart = bblp(events, DependencyPolicy::SkipIndexUpdates).unwrap();
            assert!(full.value() <= smart.value(), "{}", t.header.app_name);
            let r = analyze_thread(events, 8, ParallelismConfig::default()).unwrap();
            assert!(r.ilp >= 1.0 && r.bblp_full >= 1.0);
            assert!(r.bblp_full <= r.ilp + 1e-12);
            for (bb, p) in &r.pbblp_per_bb {
                let instances = events
                    .iter()
                    .filter(|e| e.bb_id == *bb)
                    .map(|e| e.bb_instance)
                    .max()
                    .unwrap()
                    + 1;
                assert!(*p >= 1.0 && *p <= instances as f64);
            }
        }
    }
}

#[test]
fn memory_deps_only_slow_things_down() {
    for t in fuzz_traces(30) {
        for events in t.split_threads().iter().filter(|e| !e.is_empty()) {
            let plain = analyze_thread(events, 8, ParallelismConfig::default()).unwrap();
            let strict = analyze_thread(
                events,
                8,
                ParallelismConfig {
                    memory_deps: true,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(strict.ilp <= plain.ilp);
        }
    }
}
