//! Deterministic synthetic trace generators.
//!
//! Each generator models one behavioral class (streaming, random access,
//! serial dependence chain, independent work, data-parallel loop, dense
//! matrix multiply) with dependence structure and addresses chosen so the
//! resulting metric values are known in closed form.
//!
//! Random addresses come from xoshiro256** seeded through SplitMix64
//! (`seed_from_u64`). Draws are `next_u64() % words`, which is unbiased for
//! the power-of-two word counts used throughout.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{MemRef, Opcode, RegId, Trace, TraceEvent, TraceHeader};

pub const DEFAULT_WORD_SIZE: u32 = 8;
pub const DEFAULT_ADDRESS_BITS: u32 = 48;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParam(String),
    #[error("kernel footprint ends at {end:#x}, beyond the {bits}-bit address space")]
    AddressOverflow { end: u128, bits: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelKind {
    /// `n` loads at `base, base + stride, ...`, one single-instruction block each.
    Stream { n: u64, stride_bytes: u64, base_addr: u64 },
    /// `n` word-aligned loads drawn uniformly from `[0, space_bytes)`.
    Random { n: u64, space_bytes: u64 },
    /// `n` integer adds, each consuming the previous one's result.
    Chain { n: u64 },
    /// `n` independent integer adds in one block.
    Parallel { n: u64 },
    /// Naive `dim`×`dim` matrix multiply.
    Matmul { dim: u64 },
    /// `instances` dynamic instances of one loop body of `body_len`
    /// instructions, the last of which is the index update.
    Dploop {
        instances: u64,
        body_len: u64,
        carried: bool,
    },
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Stream { .. } => "stream",
            KernelKind::Random { .. } => "random",
            KernelKind::Chain { .. } => "chain",
            KernelKind::Parallel { .. } => "parallel",
            KernelKind::Matmul { .. } => "matmul",
            KernelKind::Dploop { .. } => "dploop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(flatten)]
    pub kind: KernelKind,
    pub seed: u64,
    /// Number of threads; each runs its own copy of the kernel.
    pub threads: u32,
    pub word_size_bytes: u32,
    pub address_bits: u32,
    /// Overrides the kernel name in the trace header.
    pub app_name: Option<String>,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            seed: 0,
            threads: 1,
            word_size_bytes: DEFAULT_WORD_SIZE,
            address_bits: DEFAULT_ADDRESS_BITS,
            app_name: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_threads(mut self, threads: u32) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_app_name(mut self, name: impl Into<String>) -> Self {
        self.app_name = Some(name.into());
        self
    }

    fn header(&self) -> TraceHeader {
        TraceHeader {
            app_name: self.app_name.clone().unwrap_or_else(|| self.kind.name().to_string()),
            word_size_bytes: self.word_size_bytes,
            address_bits: self.address_bits,
            thread_count: self.threads,
        }
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |msg: &str| Err(GenError::InvalidParam(msg.to_string()));
        if self.threads == 0 {
            return bad("threads must be >= 1");
        }
        if self.header().check().is_err() {
            return bad("word size must be a power of two and address bits in 1..=64");
        }
        let word = self.word_size_bytes as u64;
        match self.kind {
            KernelKind::Stream { n, stride_bytes, .. } => {
                if n == 0 {
                    return bad("stream length must be >= 1");
                }
                if stride_bytes == 0 || stride_bytes % word != 0 {
                    return bad("stream stride must be a positive multiple of the word size");
                }
            }
            KernelKind::Random { n, space_bytes } => {
                if n == 0 {
                    return bad("random length must be >= 1");
                }
                if space_bytes == 0 || space_bytes % word != 0 {
                    return bad("address space must be a positive multiple of the word size");
                }
            }
            KernelKind::Chain { n } | KernelKind::Parallel { n } => {
                if n == 0 {
                    return bad("instruction count must be >= 1");
                }
            }
            KernelKind::Matmul { dim } => {
                if dim == 0 {
                    return bad("matrix dimension must be >= 1");
                }
            }
            KernelKind::Dploop {
                instances, body_len, ..
            } => {
                if instances == 0 {
                    return bad("instance count must be >= 1");
                }
                if body_len < 2 {
                    return bad("loop body must hold at least one instruction plus the index update");
                }
            }
        }
        Ok(())
    }

    /// Generates the trace. Pure in `self`: equal specs give equal traces.
    pub fn generate(&self) -> Result<Trace, GenError> {
        self.check()?;
        let header = self.header();
        let mut per_thread = Vec::with_capacity(self.threads as usize);
        for t in 0..self.threads {
            let mut b = Builder::new(&header, t);
            match self.kind {
                KernelKind::Stream {
                    n,
                    stride_bytes,
                    base_addr,
                } => stream(&mut b, n, stride_bytes, base_addr)?,
                KernelKind::Random { n, space_bytes } => {
                    random(&mut b, n, space_bytes, self.seed.wrapping_add(t as u64))
                }
                KernelKind::Chain { n } => chain(&mut b, n),
                KernelKind::Parallel { n } => parallel(&mut b, n),
                KernelKind::Matmul { dim } => matmul(&mut b, dim)?,
                KernelKind::Dploop {
                    instances,
                    body_len,
                    carried,
                } => dploop(&mut b, instances, body_len, carried)?,
            }
            per_thread.push(b.events);
        }
        Ok(Trace {
            header,
            events: interleave(per_thread),
        })
    }
}

pub fn gen_stream(n: u64, stride_bytes: u64, base_addr: u64) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Stream {
        n,
        stride_bytes,
        base_addr,
    })
    .generate()
}

pub fn gen_random(n: u64, space_bytes: u64, seed: u64) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Random { n, space_bytes })
        .with_seed(seed)
        .generate()
}

pub fn gen_chain(n: u64) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Chain { n }).generate()
}

pub fn gen_parallel(n: u64) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Parallel { n }).generate()
}

pub fn gen_matmul(dim: u64) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Matmul { dim }).generate()
}

pub fn gen_dploop(instances: u64, body_len: u64, carried: bool) -> Result<Trace, GenError> {
    KernelSpec::new(KernelKind::Dploop {
        instances,
        body_len,
        carried,
    })
    .generate()
}

/// Round-robin merge of per-thread event lists; `seq` is renumbered globally.
fn interleave(per_thread: Vec<Vec<TraceEvent>>) -> Vec<TraceEvent> {
    if per_thread.len() == 1 {
        return per_thread.into_iter().next().unwrap_or_default();
    }
    let total = per_thread.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut iters: Vec<_> = per_thread.into_iter().map(Vec::into_iter).collect();
    while out.len() < total {
        for it in iters.iter_mut() {
            if let Some(mut e) = it.next() {
                e.seq = out.len() as u64;
                out.push(e);
            }
        }
    }
    out
}

struct Builder {
    thread: u32,
    word: u32,
    address_limit: u128,
    address_bits: u32,
    next_reg: RegId,
    events: Vec<TraceEvent>,
}

struct Instr<'a> {
    bb: u32,
    instance: u64,
    opcode: Opcode,
    uses: &'a [RegId],
    mem: Option<MemRef>,
    index_update: bool,
    defines: bool,
}

impl<'a> Instr<'a> {
    fn new(bb: u32, instance: u64, opcode: Opcode, uses: &'a [RegId]) -> Self {
        Self {
            bb,
            instance,
            opcode,
            uses,
            mem: None,
            index_update: false,
            defines: true,
        }
    }

    fn mem(mut self, mem: MemRef) -> Self {
        self.mem = Some(mem);
        self
    }

    fn index(mut self) -> Self {
        self.index_update = true;
        self
    }

    fn no_def(mut self) -> Self {
        self.defines = false;
        self
    }
}

impl Builder {
    fn new(header: &TraceHeader, thread: u32) -> Self {
        Self {
            thread,
            word: header.word_size_bytes,
            address_limit: header.address_limit(),
            address_bits: header.address_bits,
            next_reg: 1,
            events: Vec::new(),
        }
    }

    fn check_footprint(&self, end: u128) -> Result<(), GenError> {
        if end > self.address_limit {
            return Err(GenError::AddressOverflow {
                end,
                bits: self.address_bits,
            });
        }
        Ok(())
    }

    fn emit(&mut self, instr: Instr<'_>) -> RegId {
        let def = instr.defines.then(|| {
            let r = self.next_reg;
            self.next_reg += 1;
            r
        });
        self.events.push(TraceEvent {
            seq: self.events.len() as u64,
            thread_id: self.thread,
            bb_id: instr.bb,
            bb_instance: instr.instance,
            opcode: instr.opcode,
            def,
            uses: instr.uses.to_vec(),
            mem: instr.mem,
            is_index_update: instr.index_update,
        });
        def.unwrap_or(0)
    }
}

fn stream(b: &mut Builder, n: u64, stride: u64, base: u64) -> Result<(), GenError> {
    let end = base as u128 + stride as u128 * (n as u128 - 1) + b.word as u128;
    b.check_footprint(end)?;
    for i in 0..n {
        let addr = base + stride * i;
        b.emit(Instr::new(0, i, Opcode::Load, &[]).mem(MemRef::load(addr, b.word)));
    }
    Ok(())
}

fn random(b: &mut Builder, n: u64, space: u64, seed: u64) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let words = space / b.word as u64;
    for i in 0..n {
        let addr = (rng.next_u64() % words) * b.word as u64;
        b.emit(Instr::new(0, i, Opcode::Load, &[]).mem(MemRef::load(addr, b.word)));
    }
}

fn chain(b: &mut Builder, n: u64) {
    let mut prev = b.emit(Instr::new(0, 0, Opcode::Add, &[]));
    for _ in 1..n {
        prev = b.emit(Instr::new(0, 0, Opcode::Add, &[prev]));
    }
}

fn parallel(b: &mut Builder, n: u64) {
    for _ in 0..n {
        b.emit(Instr::new(0, 0, Opcode::Add, &[]));
    }
}

fn dploop(b: &mut Builder, instances: u64, body_len: u64, carried: bool) -> Result<(), GenError> {
    const BASE: u64 = 0x1000;
    let word = b.word as u64;
    b.check_footprint(BASE as u128 + instances as u128 * word as u128)?;
    let work = body_len - 1;
    let mut index: Option<RegId> = None;
    let mut carry: Option<RegId> = None;
    for inst in 0..instances {
        let mut uses: Vec<RegId> = index.into_iter().collect();
        if carried && work == 1 {
            uses.extend(carry);
        }
        let addr = BASE + inst * word;
        let mut last = b.emit(Instr::new(0, inst, Opcode::Load, &uses).mem(MemRef::load(addr, b.word)));
        for t in 1..work {
            let mut uses = vec![last];
            if carried && t == work - 1 {
                uses.extend(carry);
            }
            last = b.emit(Instr::new(0, inst, Opcode::Fadd, &uses));
        }
        carry = Some(last);
        let idx_uses: Vec<RegId> = index.into_iter().collect();
        index = Some(b.emit(Instr::new(0, inst, Opcode::Add, &idx_uses).index()));
    }
    Ok(())
}

fn matmul(b: &mut Builder, dim: u64) -> Result<(), GenError> {
    const I_LOOP: u32 = 0;
    const J_LOOP: u32 = 1;
    const BODY: u32 = 2;
    const STORE: u32 = 3;

    let word = b.word as u64;
    let elems = dim * dim;
    let a_base = 0x10000u64;
    let b_base = a_base + elems * word;
    let c_base = b_base + elems * word;
    b.check_footprint(c_base as u128 + elems as u128 * word as u128)?;

    let opt = |r: Option<RegId>| r.into_iter().collect::<Vec<_>>();
    let (mut i_reg, mut j_reg, mut k_reg) = (None, None, None);
    let (mut j_inst, mut k_inst) = (0u64, 0u64);
    for i in 0..dim {
        i_reg = Some(b.emit(Instr::new(I_LOOP, i, Opcode::Add, &opt(i_reg)).index()));
        for j in 0..dim {
            j_reg = Some(b.emit(Instr::new(J_LOOP, j_inst, Opcode::Add, &opt(j_reg)).index()));
            k_reg = Some(b.emit(Instr::new(J_LOOP, j_inst, Opcode::Add, &opt(k_reg)).index()));
            let (ir, jr) = (i_reg.unwrap(), j_reg.unwrap());
            let mut acc: Option<RegId> = None;
            for k in 0..dim {
                let kr = k_reg.unwrap();
                let a_addr = a_base + (i * dim + k) * word;
                let b_addr = b_base + (k * dim + j) * word;
                let a = b.emit(Instr::new(BODY, k_inst, Opcode::Load, &[ir, kr]).mem(MemRef::load(a_addr, b.word)));
                let bv = b.emit(Instr::new(BODY, k_inst, Opcode::Load, &[kr, jr]).mem(MemRef::load(b_addr, b.word)));
                let prod = b.emit(Instr::new(BODY, k_inst, Opcode::Fmul, &[a, bv]));
                let mut sum_uses = vec![prod];
                sum_uses.extend(acc);
                acc = Some(b.emit(Instr::new(BODY, k_inst, Opcode::Fadd, &sum_uses)));
                k_reg = Some(b.emit(Instr::new(BODY, k_inst, Opcode::Add, &[kr]).index()));
                k_inst += 1;
            }
            let c_addr = c_base + (i * dim + j) * word;
            b.emit(
                Instr::new(STORE, j_inst, Opcode::Store, &[acc.unwrap(), ir, jr])
                    .mem(MemRef::store(c_addr, b.word))
                    .no_def(),
            );
            j_inst += 1;
        }
    }
    Ok(())
}
