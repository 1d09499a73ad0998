//! `.ctrc` binary trace files.
//!
//! Little-endian throughout. Header: magic `CTRC`, version u16 (= 1),
//! reserved u16, instruction count u64, metadata length u32, metadata bytes
//! (UTF-8 `key=value` lines). Then one 32-byte record per instruction:
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 1    | kind                       |
//! | 1      | 1    | flags (bit 0 = taken)      |
//! | 2      | 1    | dest (0xFF = none)         |
//! | 3      | 1    | src1                       |
//! | 4      | 1    | src2                       |
//! | 5      | 1    | mem_size                   |
//! | 6      | 2    | padding                    |
//! | 8      | 8    | pc                         |
//! | 16     | 8    | mem_addr                   |
//! | 24     | 8    | target                     |

use cryosim_core::trace::{BranchInfo, InstrKind, MemRef, Reg, Trace, TraceError, TraceInstruction, TraceMeta};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"CTRC";
pub const VERSION: u16 = 1;
pub const RECORD_BYTES: usize = 32;
const HEADER_BYTES: usize = 4 + 2 + 2 + 8 + 4;
const NO_REG: u8 = 0xFF;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic, not a trace file")]
    BadMagic,
    #[error("unsupported trace version {0}")]
    Version(u16),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("metadata is not valid key=value UTF-8")]
    BadMetadata,
    #[error("record {index} is truncated")]
    TruncatedRecord { index: u64 },
    #[error("record {index}: invalid kind byte {byte:#04x}")]
    InvalidKind { index: u64, byte: u8 },
    #[error("record {index}: invalid register id {id}")]
    InvalidRegister { index: u64, id: u8 },
    #[error("{extra} bytes after the last record")]
    TrailingBytes { extra: usize },
    #[error(transparent)]
    Invalid(#[from] TraceError),
}

#[derive(Debug, thiserror::Error)]
pub enum TraceFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
}

fn reg_byte(r: Option<Reg>) -> u8 {
    r.map_or(NO_REG, |r| r.id())
}

fn byte_reg(b: u8, index: u64) -> Result<Option<Reg>, FormatError> {
    if b == NO_REG {
        return Ok(None);
    }
    Reg::new(b)
        .map(Some)
        .ok_or(FormatError::InvalidRegister { index, id: b })
}

pub fn encode_record(i: &TraceInstruction) -> [u8; RECORD_BYTES] {
    let mut r = [0u8; RECORD_BYTES];
    r[0] = i.kind.code();
    r[1] = i.branch.is_some_and(|b| b.taken) as u8;
    r[2] = reg_byte(i.dest);
    r[3] = reg_byte(i.src1);
    r[4] = reg_byte(i.src2);
    r[5] = i.mem.map_or(0, |m| m.size);
    r[8..16].copy_from_slice(&i.pc.to_le_bytes());
    r[16..24].copy_from_slice(&i.mem.map_or(0, |m| m.addr).to_le_bytes());
    r[24..32].copy_from_slice(&i.branch.map_or(0, |b| b.target).to_le_bytes());
    r
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode_record(r: &[u8; RECORD_BYTES], index: u64) -> Result<TraceInstruction, FormatError> {
    let kind = InstrKind::from_code(r[0]).ok_or(FormatError::InvalidKind { index, byte: r[0] })?;
    let mem = kind.is_mem().then(|| MemRef {
        addr: u64_at(r, 16),
        size: r[5],
    });
    let branch = (kind == InstrKind::CondBranch).then(|| BranchInfo {
        taken: r[1] & 1 != 0,
        target: u64_at(r, 24),
    });
    Ok(TraceInstruction {
        kind,
        pc: u64_at(r, 8),
        dest: byte_reg(r[2], index)?,
        src1: byte_reg(r[3], index)?,
        src2: byte_reg(r[4], index)?,
        mem,
        branch,
    })
}

pub fn encode(trace: &Trace) -> Vec<u8> {
    let meta = trace.meta().to_text();
    let mut out = Vec::with_capacity(HEADER_BYTES + meta.len() + trace.len() * RECORD_BYTES);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta.as_bytes());
    for i in trace.instructions() {
        out.extend_from_slice(&encode_record(i));
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Trace, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic);
    }
    if bytes.len() < HEADER_BYTES {
        return Err(FormatError::TruncatedHeader);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::Version(version));
    }
    let count = u64_at(bytes, 8);
    let meta_len = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_BYTES..];
    if body.len() < meta_len {
        return Err(FormatError::TruncatedHeader);
    }
    let text = std::str::from_utf8(&body[..meta_len]).map_err(|_| FormatError::BadMetadata)?;
    let meta = TraceMeta::from_text(text).ok_or(FormatError::BadMetadata)?;
    let records = &body[meta_len..];
    let complete = (records.len() / RECORD_BYTES) as u64;
    if complete < count {
        return Err(FormatError::TruncatedRecord { index: complete });
    }
    let expected = count as usize * RECORD_BYTES;
    if records.len() > expected {
        return Err(FormatError::TrailingBytes {
            extra: records.len() - expected,
        });
    }
    let instructions = records
        .chunks_exact(RECORD_BYTES)
        .enumerate()
        .map(|(i, r)| decode_record(r.try_into().unwrap(), i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace::new(instructions, meta)?)
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), TraceFileError> {
    let io_err = |source| TraceFileError::Io {
        path: path.display().to_string(),
        source,
    };
    let f = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(f);
    w.write_all(&encode(trace)).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn read_trace(path: &Path) -> Result<Trace, TraceFileError> {
    let bytes = fs::read(path).map_err(|source| TraceFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes).map_err(|source| TraceFileError::Format {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cryosim_core::trace::{gen_branchy, gen_compute_bound, reg};

    #[test]
    fn header_layout() {
        let t = Trace::from_instructions(vec![TraceInstruction::int_alu(0x40, reg(3), Some(reg(1)), None)]).unwrap();
        let b = encode(&t);
        assert_eq!(&b[..4], b"CTRC");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(u64_at(&b, 8), 1);
        assert_eq!(b.len(), HEADER_BYTES + RECORD_BYTES);
        let r = &b[HEADER_BYTES..];
        assert_eq!(&r[..6], &[0, 0, 3, 1, 0xFF, 0]);
        assert_eq!(u64_at(r, 8), 0x40);
    }

    #[test]
    fn branch_and_memory_fields() {
        let st = TraceInstruction::store(8, Some(reg(2)), Some(reg(40)), 0xdead_beef, 4);
        let r = encode_record(&st);
        assert_eq!((r[0], r[5]), (5, 4));
        assert_eq!(u64_at(&r, 16), 0xdead_beef);
        let br = TraceInstruction::cond_branch(12, Some(reg(1)), None, true, 0x100);
        let r = encode_record(&br);
        assert_eq!((r[0], r[1]), (6, 1));
        assert_eq!(u64_at(&r, 24), 0x100);
        assert_eq!(decode_record(&r, 0).unwrap(), br);
    }

    #[test]
    fn round_trip() {
        for t in [
            gen_compute_bound(2000, 4096, 0.2, 5).unwrap(),
            gen_branchy(2000, 0.7, 5).unwrap(),
        ] {
            assert_eq!(decode(&encode(&t)).unwrap(), t);
        }
    }

    #[test]
    fn malformed_inputs() {
        let t = gen_branchy(10, 1.0, 1).unwrap();
        let mut b = encode(&t);
        assert_eq!(decode(b"XTRC0000000000000000"), Err(FormatError::BadMagic));
        let cut = b.len() - 5;
        assert_eq!(decode(&b[..cut]), Err(FormatError::TruncatedRecord { index: 9 }));
        let first = b.len() - 10 * RECORD_BYTES;
        b[first] = 42;
        assert_eq!(decode(&b), Err(FormatError::InvalidKind { index: 0, byte: 42 }));
    }
}
