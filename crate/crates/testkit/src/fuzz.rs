//! Random but well-formed traces.

use nmc_core::trace::{MemRef, Opcode, RegId, Trace, TraceEvent, TraceHeader};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub max_events: usize,
    pub threads: u32,
    /// Static basic blocks to draw from.
    pub blocks: u32,
    /// Largest address space, in words, a trace may use.
    pub max_space_words: u64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            max_events: 2000,
            threads: 1,
            blocks: 4,
            max_space_words: 1 << 12,
        }
    }
}

const ALU: [Opcode; 8] = [
    Opcode::Add,
    Opcode::Sub,
    Opcode::Mul,
    Opcode::Xor,
    Opcode::Fadd,
    Opcode::Fmul,
    Opcode::Cmp,
    Opcode::Gep,
];

/// Address patterns mixed within one trace.
#[derive(Clone, Copy)]
enum Pattern {
    Stride { next: u64, step: u64 },
    Uniform,
    Hot { base: u64, span: u64 },
}

struct ThreadGen {
    rng: StdRng,
    next_reg: RegId,
    defined: Vec<RegId>,
    index_reg: Vec<Option<RegId>>,
    instances: Vec<u64>,
    space_words: u64,
    pattern: Pattern,
}

impl ThreadGen {
    fn address(&mut self, word: u64) -> u64 {
        if self.rng.gen_bool(0.05) {
            self.pattern = match self.rng.gen_range(0..3) {
                0 => Pattern::Stride {
                    next: self.rng.gen_range(0..self.space_words),
                    step: *[1u64, 1, 2, 4, 8].choose(&mut self.rng).unwrap(),
                },
                1 => Pattern::Uniform,
                _ => {
                    let span = self.rng.gen_range(1..=self.space_words.min(64));
                    Pattern::Hot {
                        base: self.rng.gen_range(0..=self.space_words - span),
                        span,
                    }
                }
            };
        }
        let w = match &mut self.pattern {
            Pattern::Stride { next, step } => {
                let w = *next % self.space_words;
                *next = next.wrapping_add(*step);
                w
            }
            Pattern::Uniform => self.rng.gen_range(0..self.space_words),
            Pattern::Hot { base, span } => *base + self.rng.gen_range(0..*span),
        };
        w * word
    }

    fn pick_uses(&mut self, max: usize) -> Vec<RegId> {
        let n = self.rng.gen_range(0..=max.min(self.defined.len()));
        (0..n)
            .map(|_| {
                // favor recent values so chains form
                let len = self.defined.len();
                let back = if self.rng.gen_bool(0.6) {
                    self.rng.gen_range(0..len.min(8))
                } else {
                    self.rng.gen_range(0..len)
                };
                self.defined[len - 1 - back]
            })
            .collect()
    }

    fn fresh(&mut self) -> RegId {
        let r = self.next_reg;
        self.next_reg += 1;
        self.defined.push(r);
        r
    }

    fn block(&mut self, thread: u32, word: u64, blocks: u32, budget: usize, out: &mut Vec<TraceEvent>) {
        let bb = self.rng.gen_range(0..blocks);
        let instance = self.instances[bb as usize];
        self.instances[bb as usize] += 1;
        let len = self.rng.gen_range(1..=6).min(budget);
        let with_index = len >= 2 && self.rng.gen_bool(0.6);
        for i in 0..len {
            let mut e = TraceEvent::new(0, Opcode::Add);
            e.thread_id = thread;
            e.bb_id = bb;
            e.bb_instance = instance;
            if with_index && i + 1 == len {
                e.uses = self.index_reg[bb as usize].into_iter().collect();
                e.def = Some(self.fresh());
                e.is_index_update = true;
                self.index_reg[bb as usize] = e.def;
            } else {
                match self.rng.gen_range(0..10) {
                    0..=2 => {
                        e.opcode = Opcode::Load;
                        e.uses = self.pick_uses(1);
                        e.mem = Some(MemRef::load(self.address(word), word as u32));
                        e.def = Some(self.fresh());
                    }
                    3 => {
                        e.opcode = Opcode::Store;
                        e.uses = self.pick_uses(2);
                        e.mem = Some(MemRef::store(self.address(word), word as u32));
                    }
                    4 => {
                        e.opcode = Opcode::Br;
                        e.uses = self.pick_uses(1);
                    }
                    _ => {
                        e.opcode = *ALU.choose(&mut self.rng).unwrap();
                        e.uses = self.pick_uses(3);
                        e.def = Some(self.fresh());
                    }
                }
            }
            out.push(e);
        }
    }
}

/// A trace that passes validation: SSA registers, monotone sequence
/// numbers, in-range addresses, explicit index-update flags.
pub fn fuzz_trace(seed: u64, config: &FuzzConfig) -> Trace {
    let mut rng = StdRng::seed_from_u64(seed);
    let word = 8u64;
    let events_total = rng.gen_range(1..=config.max_events);
    let space_words = 1u64 << rng.gen_range(0..=config.max_space_words.trailing_zeros());
    let mut per_thread: Vec<Vec<TraceEvent>> = vec![];
    let share = events_total.div_ceil(config.threads as usize);
    for t in 0..config.threads {
        let mut g = ThreadGen {
            rng: StdRng::seed_from_u64(seed ^ (0x9e37_79b9 * (t as u64 + 1))),
            next_reg: 0,
            defined: vec![],
            index_reg: vec![None; config.blocks as usize],
            instances: vec![0; config.blocks as usize],
            space_words,
            pattern: Pattern::Uniform,
        };
        let mut evs = vec![];
        while evs.len() < share {
            g.block(t, word, config.blocks, share - evs.len(), &mut evs);
        }
        per_thread.push(evs);
    }
    // merge threads in random order while keeping each thread's order
    let mut cursors = vec![0usize; per_thread.len()];
    let mut events = Vec::with_capacity(events_total);
    loop {
        let live: Vec<usize> = (0..per_thread.len())
            .filter(|&t| cursors[t] < per_thread[t].len())
            .collect();
        let Some(&t) = live.choose(&mut rng) else { break };
        let mut e = per_thread[t][cursors[t]].clone();
        cursors[t] += 1;
        e.seq = events.len() as u64;
        events.push(e);
    }
    let mut header = TraceHeader::new(format!("fuzz{seed}"), word as u32, 48);
    header.thread_count = config.threads;
    Trace { header, events }
}

/// Just the addresses of a random access stream, for memory-only checks.
pub fn fuzz_addresses(seed: u64, max_len: usize, max_space_words: u64) -> Vec<u64> {
    let t = fuzz_trace(
        seed,
        &FuzzConfig {
            max_events: max_len * 3,
            max_space_words,
            ..Default::default()
        },
    );
    let mut addrs: Vec<u64> = t.events.iter().filter_map(|e| e.mem.map(|m| m.address)).collect();
    let mut rng = StdRng::seed_from_u64(!seed);
    addrs.truncate(rng.gen_range(1..=max_len));
    if addrs.is_empty() {
        addrs.push(0);
    }
    addrs
}

/// Every generator with a few parameter settings, single- and multi-threaded.
pub fn generator_suite() -> Vec<Trace> {
    use nmc_core::kernels::{KernelKind, KernelSpec};

    let kinds = [
        KernelKind::Stream {
            n: 300,
            stride_bytes: 8,
            base_addr: 0,
        },
        KernelKind::Stream {
            n: 200,
            stride_bytes: 64,
            base_addr: 0x4000,
        },
        KernelKind::Random {
            n: 300,
            space_bytes: 1 << 16,
        },
        KernelKind::Chain { n: 50 },
        KernelKind::Parallel { n: 16 },
        KernelKind::Matmul { dim: 4 },
        KernelKind::Dploop {
            instances: 10,
            body_len: 5,
            carried: false,
        },
        KernelKind::Dploop {
            instances: 10,
            body_len: 5,
            carried: true,
        },
        KernelKind::Dploop {
            instances: 3,
            body_len: 2,
            carried: true,
        },
    ];
    kinds
        .into_iter()
        .flat_map(|k| {
            [1, 3].map(|t| {
                KernelSpec::new(k.clone())
                    .with_threads(t)
                    .with_seed(5)
                    .generate()
                    .unwrap()
            })
        })
        .collect()
}
