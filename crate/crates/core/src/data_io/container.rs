//! Sectioned binary container with a trailing CRC-32.
//!
//! ```text
//! magic [8] | version u32 | section count u32
//! { tag [4] | payload length u64 | payload }*
//! crc32 u32   (over every preceding byte)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian as LE};

use crate::error::{Error, Result};

pub struct Section {
    pub tag: [u8; 4],
    pub payload: Vec<u8>,
}

pub fn encode(magic: &[u8; 8], version: u32, sections: &[Section]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&version.to_le_bytes());
    buf.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for s in sections {
        buf.extend_from_slice(&s.tag);
        buf.extend_from_slice(&(s.payload.len() as u64).to_le_bytes());
        buf.extend_from_slice(&s.payload);
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn decode(bytes: &[u8], magic: &[u8; 8], version: u32, what: &str) -> Result<Vec<Section>> {
    if bytes.len() < 20 || &bytes[..8] != magic {
        return Err(Error::Corrupt(format!(
            "{what}: not a recognized container"
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != LE::read_u32(tail) {
        return Err(Error::Checksum(what.to_string()));
    }
    let found = LE::read_u32(&body[8..12]);
    if found != version {
        return Err(Error::VersionMismatch {
            found,
            expected: version,
        });
    }
    let n = LE::read_u32(&body[12..16]) as usize;
    let mut pos = 16;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        if body.len() < pos + 12 {
            return Err(Error::Corrupt(format!("{what}: truncated section header")));
        }
        let mut tag = [0u8; 4];
        tag.copy_from_slice(&body[pos..pos + 4]);
        let len = LE::read_u64(&body[pos + 4..pos + 12]) as usize;
        pos += 12;
        if body.len() - pos < len {
            return Err(Error::Corrupt(format!("{what}: truncated section")));
        }
        out.push(Section {
            tag,
            payload: body[pos..pos + len].to_vec(),
        });
        pos += len;
    }
    if pos != body.len() {
        return Err(Error::Corrupt(format!("{what}: trailing bytes")));
    }
    Ok(out)
}

pub fn find<'a>(sections: &'a [Section], tag: &[u8; 4], what: &str) -> Result<&'a [u8]> {
    sections
        .iter()
        .find(|s| &s.tag == tag)
        .map(|s| s.payload.as_slice())
        .ok_or_else(|| {
            Error::Corrupt(format!(
                "{what}: missing section {}",
                String::from_utf8_lossy(tag)
            ))
        })
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
