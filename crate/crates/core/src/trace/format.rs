//! Line-delimited text encoding of traces.
//!
//! ```text
//! #TRACE v1 app=<name> word=<bytes> addrbits=<n> threads=<k>
//! <seq> <thread> <bb_id>:<bb_instance> <mnemonic> d=<reg|-> u=<reg,reg,...|-> m=<L|S>:<hexaddr>:<size>|- ix=<0|1>
//! ```

use std::io::{BufRead, Write};

use super::{AccessKind, MemRef, Opcode, RegId, TraceError, TraceEvent, TraceHeader};

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "#TRACE";

/// Writes `header` and `events` to `sink`, returning the number of bytes written.
///
/// Every memory reference is checked against the header's address space
/// before the first byte is written.
pub fn write_trace<W: Write>(header: &TraceHeader, events: &[TraceEvent], sink: W) -> Result<u64, TraceError> {
    header.check()?;
    for event in events {
        check_event(header, event)?;
    }
    let mut writer = TraceWriter::new(header.clone(), sink)?;
    for event in events {
        writer.write_event(event)?;
    }
    writer.finish()
}

fn check_event(header: &TraceHeader, event: &TraceEvent) -> Result<(), TraceError> {
    if let Some(mem) = &event.mem {
        if !header.contains(mem) {
            return Err(TraceError::AddressOutOfRange {
                seq: event.seq,
                address: mem.address,
                size: mem.size_bytes,
                bits: header.address_bits,
            });
        }
    }
    Ok(())
}

/// Incremental trace encoder.
pub struct TraceWriter<W: Write> {
    header: TraceHeader,
    sink: W,
    written: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(header: TraceHeader, mut sink: W) -> Result<Self, TraceError> {
        header.check()?;
        let line = format!(
            "{MAGIC} {FORMAT_VERSION} app={} word={} addrbits={} threads={}\n",
            header.app_name, header.word_size_bytes, header.address_bits, header.thread_count
        );
        sink.write_all(line.as_bytes())?;
        Ok(Self {
            header,
            sink,
            written: line.len() as u64,
        })
    }

    pub fn write_event(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        check_event(&self.header, event)?;
        let line = encode_event(event);
        self.sink.write_all(line.as_bytes())?;
        self.written += line.len() as u64;
        Ok(())
    }

    /// Flushes the sink and returns the total byte count.
    pub fn finish(mut self) -> Result<u64, TraceError> {
        self.sink.flush()?;
        Ok(self.written)
    }
}

fn encode_event(e: &TraceEvent) -> String {
    use std::fmt::Write as _;

    let mut s = String::with_capacity(64);
    let _ = write!(
        s,
        "{} {} {}:{} {} d=",
        e.seq, e.thread_id, e.bb_id, e.bb_instance, e.opcode
    );
    match e.def {
        Some(r) => {
            let _ = write!(s, "{r}");
        }
        None => s.push('-'),
    }
    s.push_str(" u=");
    if e.uses.is_empty() {
        s.push('-');
    } else {
        for (i, r) in e.uses.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{r}");
        }
    }
    s.push_str(" m=");
    match &e.mem {
        Some(m) => {
            let kind = match m.kind {
                AccessKind::Load => 'L',
                AccessKind::Store => 'S',
            };
            let _ = write!(s, "{kind}:{:x}:{}", m.address, m.size_bytes);
        }
        None => s.push('-'),
    }
    let _ = writeln!(s, " ix={}", u8::from(e.is_index_update));
    s
}

/// Opens a trace stream: parses the header and returns it with a lazy event reader.
pub fn read_trace<R: BufRead>(source: R) -> Result<(TraceHeader, TraceReader<R>), TraceError> {
    let reader = TraceReader::new(source)?;
    Ok((reader.header().clone(), reader))
}

/// Streaming trace decoder. Holds one line buffer; memory use does not grow
/// with trace length.
pub struct TraceReader<R> {
    source: R,
    header: TraceHeader,
    line_no: u64,
    last_seq: Option<u64>,
    buf: String,
    done: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(mut source: R) -> Result<Self, TraceError> {
        let mut buf = String::new();
        if source.read_line(&mut buf)? == 0 {
            return Err(TraceError::MissingHeader);
        }
        let header = parse_header(buf.trim_end())?;
        buf.clear();
        Ok(Self {
            source,
            header,
            line_no: 1,
            last_seq: None,
            buf,
            done: false,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    /// Sequence number of the last successfully parsed event.
    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    /// Capacity of the internal line buffer, in bytes.
    pub fn buffer_capacity(&self) -> usize {
        self.buf.capacity()
    }

    fn next_event(&mut self) -> Result<Option<TraceEvent>, TraceError> {
        loop {
            self.buf.clear();
            let n = self.source.read_line(&mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let terminated = self.buf.ends_with('\n');
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            return match parse_event(line, self.line_no) {
                Ok(event) => {
                    if !self.header.contains_opt(event.mem.as_ref()) {
                        let mem = event.mem.expect("checked above");
                        return Err(TraceError::AddressOutOfRange {
                            seq: event.seq,
                            address: mem.address,
                            size: mem.size_bytes,
                            bits: self.header.address_bits,
                        });
                    }
                    self.last_seq = Some(event.seq);
                    Ok(Some(event))
                }
                Err(_) if !terminated => Err(TraceError::Truncated {
                    line: self.line_no,
                    last_seq: self.last_seq,
                }),
                Err(e) => Err(e),
            };
        }
    }
}

impl TraceHeader {
    fn contains_opt(&self, mem: Option<&MemRef>) -> bool {
        mem.is_none_or(|m| self.contains(m))
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceEvent, TraceError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_event() {
            Ok(Some(e)) => Some(Ok(e)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_header(line: &str) -> Result<TraceHeader, TraceError> {
    let mut tokens = line.split_ascii_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(TraceError::MissingHeader);
    }
    let version = tokens
        .next()
        .ok_or_else(|| TraceError::BadHeader("missing version".into()))?;
    if version != FORMAT_VERSION {
        return Err(TraceError::VersionMismatch {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let (mut app, mut word, mut bits, mut threads) = (None, None, None, None);
    for token in tokens {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| TraceError::BadHeader(format!("expected key=value, got `{token}`")))?;
        let num = || {
            value
                .parse::<u32>()
                .map_err(|_| TraceError::BadHeader(format!("`{key}` is not an integer")))
        };
        match key {
            "app" => app = Some(value.to_string()),
            "word" => word = Some(num()?),
            "addrbits" => bits = Some(num()?),
            "threads" => threads = Some(num()?),
            other => return Err(TraceError::BadHeader(format!("unknown key `{other}`"))),
        }
    }
    let missing = |k: &str| TraceError::BadHeader(format!("missing `{k}`"));
    let header = TraceHeader {
        app_name: app.ok_or_else(|| missing("app"))?,
        word_size_bytes: word.ok_or_else(|| missing("word"))?,
        address_bits: bits.ok_or_else(|| missing("addrbits"))?,
        thread_count: threads.ok_or_else(|| missing("threads"))?,
    };
    header.check()?;
    Ok(header)
}

fn parse_event(line: &str, line_no: u64) -> Result<TraceEvent, TraceError> {
    let err = |field: &'static str, reason: String| TraceError::Malformed {
        line: line_no,
        field,
        reason,
    };
    let mut tokens = line.split_ascii_whitespace();
    let mut next = |field: &'static str| tokens.next().ok_or_else(|| err(field, "missing".into()));

    let seq_tok = next("seq")?;
    let seq = seq_tok
        .parse::<u64>()
        .map_err(|_| err("seq", format!("`{seq_tok}` is not a non-negative integer")))?;
    let thread_tok = next("thread")?;
    let thread_id = thread_tok
        .parse::<u32>()
        .map_err(|_| err("thread", format!("`{thread_tok}` is not a non-negative integer")))?;
    let bb_tok = next("bb")?;
    let (bb, inst) = bb_tok
        .split_once(':')
        .ok_or_else(|| err("bb", format!("expected <bb_id>:<instance>, got `{bb_tok}`")))?;
    let bb_id = bb
        .parse::<u32>()
        .map_err(|_| err("bb", format!("bad block id `{bb}`")))?;
    let bb_instance = inst
        .parse::<u64>()
        .map_err(|_| err("bb", format!("bad block instance `{inst}`")))?;
    let opcode = next("opcode")?
        .parse::<Opcode>()
        .map_err(|reason| err("opcode", reason))?;

    let d = field_value(next("d")?, "d=").ok_or_else(|| err("d", "expected d=<reg|->".into()))?;
    let def = match d {
        "-" => None,
        r => Some(parse_reg(r).ok_or_else(|| err("d", format!("bad register `{r}`")))?),
    };

    let u = field_value(next("u")?, "u=").ok_or_else(|| err("u", "expected u=<regs|->".into()))?;
    let uses = match u {
        "-" => Vec::new(),
        list => list
            .split(',')
            .map(|r| parse_reg(r).ok_or_else(|| err("u", format!("bad register `{r}`"))))
            .collect::<Result<Vec<_>, _>>()?,
    };

    let m = field_value(next("m")?, "m=").ok_or_else(|| err("m", "expected m=<ref|->".into()))?;
    let mem = match m {
        "-" => None,
        r => Some(parse_mem(r).map_err(|reason| err("m", reason))?),
    };

    let ix = field_value(next("ix")?, "ix=").ok_or_else(|| err("ix", "expected ix=<0|1>".into()))?;
    let is_index_update = match ix {
        "0" => false,
        "1" => true,
        other => return Err(err("ix", format!("expected 0 or 1, got `{other}`"))),
    };

    if let Some(extra) = tokens.next() {
        return Err(err("ix", format!("trailing token `{extra}`")));
    }

    Ok(TraceEvent {
        seq,
        thread_id,
        bb_id,
        bb_instance,
        opcode,
        def,
        uses,
        mem,
        is_index_update,
    })
}

fn field_value<'a>(token: &'a str, prefix: &str) -> Option<&'a str> {
    token.strip_prefix(prefix).filter(|v| !v.is_empty())
}

fn parse_reg(s: &str) -> Option<RegId> {
    s.parse().ok()
}

fn parse_mem(s: &str) -> Result<MemRef, String> {
    let mut parts = s.split(':');
    let kind = match parts.next() {
        Some("L") => AccessKind::Load,
        Some("S") => AccessKind::Store,
        other => return Err(format!("bad access kind {other:?}")),
    };
    let addr = parts.next().ok_or("missing address")?;
    let addr = addr.strip_prefix("0x").unwrap_or(addr);
    let address = u64::from_str_radix(addr, 16).map_err(|_| format!("bad hex address `{addr}`"))?;
    let size = parts.next().ok_or("missing size")?;
    let size_bytes = size
        .parse::<u32>()
        .ok()
        .filter(|&s| s > 0)
        .ok_or_else(|| format!("bad size `{size}`"))?;
    if parts.next().is_some() {
        return Err("too many `:` separated parts".into());
    }
    Ok(MemRef {
        address,
        size_bytes,
        kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn header() -> TraceHeader {
        TraceHeader::new("unit", 8, 32)
    }

    fn chain3() -> Vec<TraceEvent> {
        let mut a = TraceEvent::new(0, Opcode::Load);
        a.def = Some(1);
        a.mem = Some(MemRef::load(0x1f0, 8));
        let mut b = TraceEvent::new(1, Opcode::Fmul);
        b.def = Some(2);
        b.uses = vec![1, 1];
        b.bb_instance = 3;
        let mut c = TraceEvent::new(2, Opcode::Store);
        c.uses = vec![2];
        c.mem = Some(MemRef::store(0xabc0, 4));
        c.is_index_update = true;
        c.bb_id = 7;
        vec![a, b, c]
    }

    fn read_all(bytes: &[u8]) -> Result<(TraceHeader, Vec<TraceEvent>), TraceError> {
        let (h, reader) = read_trace(Cursor::new(bytes))?;
        Ok((h, reader.collect::<Result<_, _>>()?))
    }

    #[test]
    fn empty_trace_is_header_only() {
        let mut buf = Vec::new();
        let n = write_trace(&header(), &[], &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "#TRACE v1 app=unit word=8 addrbits=32 threads=1\n");
        let (h, events) = read_all(&buf).unwrap();
        assert_eq!(h, header());
        assert!(events.is_empty());
    }

    #[test]
    fn three_event_round_trip() {
        let mut buf = Vec::new();
        write_trace(&header(), &chain3(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "0 0 0:0 load d=1 u=- m=L:1f0:8 ix=0");
        assert_eq!(lines[2], "1 0 0:3 fmul d=2 u=1,1 m=- ix=0");
        assert_eq!(lines[3], "2 0 7:0 store d=- u=2 m=S:abc0:4 ix=1");
        let (_, events) = read_all(&buf).unwrap();
        assert_eq!(events, chain3());
    }

    #[test]
    fn address_at_limit_rejected_before_writing() {
        let mut e = TraceEvent::new(0, Opcode::Load);
        e.mem = Some(MemRef::load(1 << 32, 1));
        let mut buf = Vec::new();
        let err = write_trace(&header(), &[e], &mut buf).unwrap_err();
        assert!(matches!(err, TraceError::AddressOutOfRange { seq: 0, .. }));
        assert!(buf.is_empty());
    }

    #[test]
    fn negative_seq_names_field() {
        let text = "#TRACE v1 app=x word=8 addrbits=32 threads=1\n-3 0 0:0 add d=1 u=- m=- ix=0\n";
        match read_all(text.as_bytes()).unwrap_err() {
            TraceError::Malformed { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "seq");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_final_line_reports_last_seq() {
        let mut buf = Vec::new();
        write_trace(&header(), &chain3(), &mut buf).unwrap();
        // chop the final line in the middle of the `m=` field
        let cut = buf.len() - 12;
        buf.truncate(cut);
        match read_all(&buf).unwrap_err() {
            TraceError::Truncated { line, last_seq } => {
                assert_eq!(line, 4);
                assert_eq!(last_seq, Some(1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn final_line_without_newline_is_accepted_when_complete() {
        let text = "#TRACE v1 app=x word=8 addrbits=32 threads=1\n0 0 0:0 add d=1 u=- m=- ix=0";
        let (_, events) = read_all(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 1);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            read_trace(Cursor::new(b"".as_slice())).err().unwrap(),
            TraceError::MissingHeader
        ));
        assert!(matches!(
            read_trace(Cursor::new(b"0 0 0:0 add d=1 u=- m=- ix=0\n".as_slice()))
                .err()
                .unwrap(),
            TraceError::MissingHeader
        ));
        assert!(matches!(
            read_trace(Cursor::new(
                b"#TRACE v2 app=x word=8 addrbits=32 threads=1\n".as_slice()
            ))
            .err()
            .unwrap(),
            TraceError::VersionMismatch { .. }
        ));
        assert!(matches!(
            read_trace(Cursor::new(b"#TRACE v1 app=x word=8 threads=1\n".as_slice()))
                .err()
                .unwrap(),
            TraceError::BadHeader(_)
        ));
    }

    #[test]
    fn malformed_fields_are_named() {
        let cases = [
            ("0 0 0-0 add d=1 u=- m=- ix=0", "bb"),
            ("0 0 0:0 vadd d=1 u=- m=- ix=0", "opcode"),
            ("0 0 0:0 add d=x u=- m=- ix=0", "d"),
            ("0 0 0:0 add d=1 u=1,,2 m=- ix=0", "u"),
            ("0 0 0:0 load d=1 u=- m=Q:10:8 ix=0", "m"),
            ("0 0 0:0 load d=1 u=- m=L:zz:8 ix=0", "m"),
            ("0 0 0:0 add d=1 u=- m=- ix=2", "ix"),
            ("0 x 0:0 add d=1 u=- m=- ix=0", "thread"),
        ];
        for (line, expect) in cases {
            let text = format!("#TRACE v1 app=x word=8 addrbits=32 threads=1\n{line}\n");
            match read_all(text.as_bytes()).unwrap_err() {
                TraceError::Malformed { field, .. } => assert_eq!(field, expect, "{line}"),
                other => panic!("{line}: unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn accepts_prefixed_hex() {
        let text = "#TRACE v1 app=x word=8 addrbits=32 threads=1\n0 0 0:0 load d=1 u=- m=L:0x10:8 ix=0\n";
        let (_, events) = read_all(text.as_bytes()).unwrap();
        assert_eq!(events[0].mem.unwrap().address, 0x10);
    }
}
