//! Dynamic instruction trace model.
//!
//! A trace is a stream of SSA-form, RISC-like dynamic instructions. Every
//! value-producing instruction defines a fresh virtual register id, so data
//! dependences are plain id lookups.

mod format;
mod validate;

pub use format::{read_trace, write_trace, TraceReader, TraceWriter, FORMAT_VERSION};
pub use validate::{validate_trace, ValidationReport, Violation, ViolationKind};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Virtual register id (dynamic SSA value id).
pub type RegId = u64;

/// Errors raised while reading or writing traces.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace header missing")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("unsupported trace version `{found}` (expected `{expected}`)")]
    VersionMismatch { found: String, expected: String },
    #[error("line {line}: invalid field `{field}`: {reason}")]
    Malformed {
        line: u64,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: truncated record (last valid seq: {last_seq:?})")]
    Truncated { line: u64, last_seq: Option<u64> },
    #[error("seq {seq}: memory reference {address:#x}+{size} exceeds the {bits}-bit address space")]
    AddressOutOfRange {
        seq: u64,
        address: u64,
        size: u32,
        bits: u32,
    },
    #[error("invalid header: {0}")]
    InvalidHeader(&'static str),
}

/// Trace-wide properties recorded in the first line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub app_name: String,
    /// Smallest addressable datum, in bytes.
    pub word_size_bytes: u32,
    /// Width of the address space in bits.
    pub address_bits: u32,
    pub thread_count: u32,
}

impl TraceHeader {
    pub fn new(app_name: impl Into<String>, word_size_bytes: u32, address_bits: u32) -> Self {
        Self {
            app_name: app_name.into(),
            word_size_bytes,
            address_bits,
            thread_count: 1,
        }
    }

    pub fn check(&self) -> Result<(), TraceError> {
        if self.word_size_bytes == 0 || !self.word_size_bytes.is_power_of_two() {
            return Err(TraceError::InvalidHeader("word size must be a power of two"));
        }
        if !(1..=64).contains(&self.address_bits) {
            return Err(TraceError::InvalidHeader("address bits must be in 1..=64"));
        }
        if self.thread_count == 0 {
            return Err(TraceError::InvalidHeader("thread count must be positive"));
        }
        if self.app_name.is_empty() || self.app_name.chars().any(char::is_whitespace) {
            return Err(TraceError::InvalidHeader(
                "app name must be non-empty and contain no whitespace",
            ));
        }
        Ok(())
    }

    /// Exclusive upper bound of the address space (`2^address_bits`).
    pub fn address_limit(&self) -> u128 {
        1u128 << self.address_bits
    }

    /// True if `mem` lies entirely inside the address space.
    pub fn contains(&self, mem: &MemRef) -> bool {
        (mem.address as u128) + (mem.size_bytes as u128) <= self.address_limit()
    }
}

/// Coarse instruction classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpcodeCategory {
    ComputeInt,
    ComputeFp,
    Memory,
    Control,
    Other,
}

macro_rules! opcodes {
    ($($variant:ident => $mnemonic:literal, $category:ident;)*) => {
        /// RISC-like opcode set observed in traces.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Opcode {
            $($variant,)*
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant,)*];

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $mnemonic,)*
                }
            }

            pub fn category(self) -> OpcodeCategory {
                match self {
                    $(Opcode::$variant => OpcodeCategory::$category,)*
                }
            }
        }

        impl FromStr for Opcode {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($mnemonic => Ok(Opcode::$variant),)*
                    other => Err(format!("unknown mnemonic `{other}`")),
                }
            }
        }
    };
}

opcodes! {
    Add => "add", ComputeInt;
    Sub => "sub", ComputeInt;
    Mul => "mul", ComputeInt;
    Div => "div", ComputeInt;
    Rem => "rem", ComputeInt;
    And => "and", ComputeInt;
    Or => "or", ComputeInt;
    Xor => "xor", ComputeInt;
    Shl => "shl", ComputeInt;
    Shr => "shr", ComputeInt;
    Cmp => "cmp", ComputeInt;
    Fadd => "fadd", ComputeFp;
    Fsub => "fsub", ComputeFp;
    Fmul => "fmul", ComputeFp;
    Fdiv => "fdiv", ComputeFp;
    Fcmp => "fcmp", ComputeFp;
    Load => "load", Memory;
    Store => "store", Memory;
    Br => "br", Control;
    Ret => "ret", Control;
    Call => "call", Control;
    Phi => "phi", Other;
    Gep => "gep", Other;
    Cast => "cast", Other;
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl Serialize for Opcode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.mnemonic())
    }
}

impl<'de> Deserialize<'de> for Opcode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    Load,
    Store,
}

/// A memory reference made by one dynamic instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemRef {
    pub address: u64,
    pub size_bytes: u32,
    pub kind: AccessKind,
}

impl MemRef {
    pub fn load(address: u64, size_bytes: u32) -> Self {
        Self {
            address,
            size_bytes,
            kind: AccessKind::Load,
        }
    }

    pub fn store(address: u64, size_bytes: u32) -> Self {
        Self {
            address,
            size_bytes,
            kind: AccessKind::Store,
        }
    }
}

/// One dynamic instruction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub thread_id: u32,
    /// Static basic-block id.
    pub bb_id: u32,
    /// Dynamic instance counter of `bb_id`.
    pub bb_instance: u64,
    pub opcode: Opcode,
    /// Register defined by this instruction, if any.
    pub def: Option<RegId>,
    pub uses: Vec<RegId>,
    pub mem: Option<MemRef>,
    /// Marks loop-index-update instructions.
    pub is_index_update: bool,
}

impl TraceEvent {
    pub fn new(seq: u64, opcode: Opcode) -> Self {
        Self {
            seq,
            thread_id: 0,
            bb_id: 0,
            bb_instance: 0,
            opcode,
            def: None,
            uses: Vec::new(),
            mem: None,
            is_index_update: false,
        }
    }

    /// Dynamic basic-block instance this event belongs to.
    pub fn block(&self) -> (u32, u64) {
        (self.bb_id, self.bb_instance)
    }
}

/// A header plus its fully materialized events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    /// Events of each thread, indexed by thread id, in trace order.
    pub fn split_threads(&self) -> Vec<Vec<&TraceEvent>> {
        let threads = self
            .events
            .iter()
            .map(|e| e.thread_id as usize + 1)
            .max()
            .unwrap_or(0)
            .max(self.header.thread_count as usize);
        let mut out = vec![Vec::new(); threads];
        for event in &self.events {
            out[event.thread_id as usize].push(event);
        }
        out
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TraceError> {
        let mut buf = Vec::new();
        write_trace(&self.header, &self.events, &mut buf)?;
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnemonics_round_trip() {
        for &op in Opcode::ALL {
            assert_eq!(op.mnemonic().parse::<Opcode>().unwrap(), op);
        }
        assert!("vfoo".parse::<Opcode>().is_err());
    }

    #[test]
    fn categories() {
        assert_eq!(Opcode::Add.category(), OpcodeCategory::ComputeInt);
        assert_eq!(Opcode::Fmul.category(), OpcodeCategory::ComputeFp);
        assert_eq!(Opcode::Store.category(), OpcodeCategory::Memory);
        assert_eq!(Opcode::Br.category(), OpcodeCategory::Control);
        assert_eq!(Opcode::Phi.category(), OpcodeCategory::Other);
    }

    #[test]
    fn header_checks() {
        assert!(TraceHeader::new("a", 8, 48).check().is_ok());
        assert!(TraceHeader::new("a", 6, 48).check().is_err());
        assert!(TraceHeader::new("a", 8, 0).check().is_err());
        assert!(TraceHeader::new("a", 8, 65).check().is_err());
        assert!(TraceHeader::new("a b", 8, 48).check().is_err());
        let h = TraceHeader::new("a", 8, 64);
        assert!(h.contains(&MemRef::load(u64::MAX - 7, 8)));
        assert!(!h.contains(&MemRef::load(u64::MAX - 6, 8)));
    }
}
