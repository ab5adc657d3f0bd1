//! Append-only archive of emitted samples.
//!
//! ```text
//! magic "TSTMARCH" | version u32 | header length u64 | header | crc32 u32
//! { record length u64 | record | crc32 u32 }*
//! ```
//!
//! Each record holds one sample (iteration, log joint, parameters and every
//! series state). Records are only ever appended; a resumed run truncates the
//! file back to the length stored in its checkpoint first.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE};

use crate::data_io::codec::{Decoder, Encoder};
use crate::error::{Error, Result};
use crate::gibbs::{ChainState, Sample};
use crate::model::{ModelParams, SeriesState};

pub const ARCHIVE_MAGIC: &[u8; 8] = b"TSTMARCH";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub n_topics: usize,
    pub n_words: usize,
    pub dim: usize,
    pub ar_order: usize,
    pub ids: Vec<String>,
    /// Modeled steps per series.
    pub lengths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub header: ArchiveHeader,
    pub samples: Vec<Sample>,
}

fn encode_header(h: &ArchiveHeader) -> Vec<u8> {
    let mut e = Encoder::new();
    for v in [h.n_topics, h.n_words, h.dim, h.ar_order] {
        e.u64(v as u64);
    }
    e.u64(h.ids.len() as u64);
    h.ids.iter().for_each(|s| e.str(s));
    e.indices(&h.lengths);
    let mut out = Vec::new();
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(e.buf.len() as u64).to_le_bytes());
    out.extend_from_slice(&e.buf);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Parses the header and returns it with the offset of the first record.
fn decode_header(bytes: &[u8]) -> Result<(ArchiveHeader, usize)> {
    if bytes.len() < 20 || &bytes[..8] != ARCHIVE_MAGIC {
        return Err(Error::Corrupt("archive: not a recognized container".into()));
    }
    let len = LE::read_u64(&bytes[12..20]) as usize;
    let end = 20usize.checked_add(len).filter(|&e| e + 4 <= bytes.len());
    let Some(end) = end else {
        return Err(Error::Corrupt("archive: truncated header".into()));
    };
    if crc32fast::hash(&bytes[..end]) != LE::read_u32(&bytes[end..end + 4]) {
        return Err(Error::Checksum("archive header".into()));
    }
    let found = LE::read_u32(&bytes[8..12]);
    if found != ARCHIVE_VERSION {
        return Err(Error::VersionMismatch {
            found,
            expected: ARCHIVE_VERSION,
        });
    }
    let mut d = Decoder::new(&bytes[20..end]);
    let n_topics = d.u64()? as usize;
    let n_words = d.u64()? as usize;
    let dim = d.u64()? as usize;
    let ar_order = d.u64()? as usize;
    let n = d.u64()? as usize;
    if n > d.remaining() {
        return Err(Error::Corrupt("archive: id count".into()));
    }
    let ids = (0..n).map(|_| d.str()).collect::<Result<Vec<_>>>()?;
    let lengths = d.indices()?;
    Ok((
        ArchiveHeader {
            n_topics,
            n_words,
            dim,
            ar_order,
            ids,
            lengths,
        },
        end + 4,
    ))
}

pub fn encode_sample(
    iteration: u64,
    log_joint: f64,
    params: &ModelParams,
    states: &[SeriesState],
) -> Vec<u8> {
    let mut e = Encoder::new();
    e.u64(iteration);
    e.f64(log_joint);
    e.params(params);
    e.states(states);
    let mut out = Vec::with_capacity(e.buf.len() + 12);
    out.extend_from_slice(&(e.buf.len() as u64).to_le_bytes());
    out.extend_from_slice(&e.buf);
    out.extend_from_slice(&crc32fast::hash(&e.buf).to_le_bytes());
    out
}

pub struct ArchiveWriter {
    out: BufWriter<File>,
    len: u64,
}

impl ArchiveWriter {
    pub fn create(path: &Path, header: &ArchiveHeader) -> Result<Self> {
        let bytes = encode_header(header);
        let mut f = File::create(path)?;
        f.write_all(&bytes)?;
        Ok(Self {
            out: BufWriter::new(f),
            len: bytes.len() as u64,
        })
    }

    /// Reopens an archive, checks its header and drops everything past `len`.
    pub fn resume(path: &Path, header: &ArchiveHeader, len: u64) -> Result<Self> {
        let existing = std::fs::read(path)?;
        let (found, start) = decode_header(&existing)?;
        if &found != header {
            return Err(Error::InvalidParameter(format!(
                "archive {} was written for a different corpus or model size",
                path.display()
            )));
        }
        if (existing.len() as u64) < len || len < start as u64 {
            return Err(Error::Corrupt(format!(
                "archive {} is shorter than its checkpoint records",
                path.display()
            )));
        }
        let mut f = OpenOptions::new().write(true).open(path)?;
        f.set_len(len)?;
        f.seek(SeekFrom::Start(len))?;
        Ok(Self {
            out: BufWriter::new(f),
            len,
        })
    }

    pub fn append(&mut self, chain: &ChainState) -> Result<u64> {
        let rec = encode_sample(
            chain.iteration,
            chain.log_joint,
            &chain.params,
            &chain.states,
        );
        self.out.write_all(&rec)?;
        self.len += rec.len() as u64;
        Ok(self.len)
    }

    /// Flushes buffered records and returns the durable length.
    pub fn flush(&mut self) -> Result<u64> {
        self.out.flush()?;
        self.out.get_ref().sync_data()?;
        Ok(self.len)
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

pub fn read_archive(path: &Path) -> Result<Archive> {
    let bytes = std::fs::read(path)?;
    let (header, mut pos) = decode_header(&bytes)?;
    let mut samples = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < 12 {
            return Err(Error::Corrupt("archive: truncated record".into()));
        }
        let len = LE::read_u64(&bytes[pos..pos + 8]) as usize;
        let body_start = pos + 8;
        if bytes.len() - body_start < len.saturating_add(4) {
            return Err(Error::Corrupt("archive: truncated record".into()));
        }
        let body = &bytes[body_start..body_start + len];
        if crc32fast::hash(body) != LE::read_u32(&bytes[body_start + len..body_start + len + 4]) {
            return Err(Error::Checksum(format!("archive record {}", samples.len())));
        }
        let mut d = Decoder::new(body);
        samples.push(Sample {
            iteration: d.u64()?,
            log_joint: d.f64()?,
            params: d.params()?,
            states: d.states()?,
        });
        pos = body_start + len + 4;
    }
    Ok(Archive { header, samples })
}

/// Writes a complete archive from in-memory samples (e.g. simulation truth).
pub fn write_archive(path: &Path, header: &ArchiveHeader, samples: &[Sample]) -> Result<()> {
    let mut bytes = encode_header(header);
    for s in samples {
        bytes.extend(encode_sample(
            s.iteration,
            s.log_joint,
            &s.params,
            &s.states,
        ));
    }
    crate::data_io::container::write_atomic(path, &bytes)
}
