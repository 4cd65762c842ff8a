//! `EVT1` binary event files and the `x,y,p,t` CSV variant.
//!
//! ```text
//! "EVT1" | version u32 = 1 | width u32 | height u32 | count u64
//! { x u16 | y u16 | p i8 | pad u8 = 0 | t u64 } x count
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stream::{EventRecord, EventStream};
use crate::error::{Error, Result};
use crate::format::{read_file, write_file, Reader};

pub const EVT1_MAGIC: &[u8; 4] = b"EVT1";
pub const EVT1_RECORD_BYTES: usize = 14;
const HEADER_BYTES: usize = 4 + 4 + 4 + 4 + 8;

impl EventStream {
    pub fn to_evt1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + self.len() * EVT1_RECORD_BYTES);
        out.extend_from_slice(EVT1_MAGIC);
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(self.width() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height() as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        for e in self.events() {
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.push(e.p as u8);
            out.push(0);
            out.extend_from_slice(&e.t.to_le_bytes());
        }
        out
    }

    pub fn from_evt1_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "EVT1");
        r.magic(EVT1_MAGIC)?;
        let version = r.u32()?;
        if version != 1 {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let count = r.u64()?;
        let expected = (count as u128) * EVT1_RECORD_BYTES as u128;
        if expected != r.remaining() as u128 {
            return Err(r.err(format!(
                "header declares {count} records but {} payload bytes follow",
                r.remaining()
            )));
        }
        let mut events = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let x = r.u16()?;
            let y = r.u16()?;
            let p = r.i8()?;
            let pad = r.u8()?;
            let t = r.u64()?;
            if pad != 0 {
                return Err(r.err("non-zero padding byte"));
            }
            events.push(EventRecord { x, y, p, t });
        }
        r.finish()?;
        EventStream::new(width, height, events).map_err(|e| Error::format("EVT1", e.to_string()))
    }

    pub fn save_evt1(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, &self.to_evt1_bytes())
    }

    pub fn load_evt1(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_evt1_bytes(&read_file(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    x: u16,
    y: u16,
    p: i8,
    t: u64,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("CSV", format!("{}: {other:?}", path.display())),
    }
}

/// Reads `x,y,p,t` rows. Geometry defaults to the bounding box of the events.
pub fn read_csv(path: impl AsRef<Path>, geometry: Option<(usize, usize)>) -> Result<EventStream> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?;
    if headers.iter().collect::<Vec<_>>() != ["x", "y", "p", "t"] {
        return Err(Error::format("CSV", "header must be `x,y,p,t`"));
    }
    let mut events = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let r = row.map_err(|e| csv_err(path, e))?;
        events.push(EventRecord::new(r.x, r.y, r.p, r.t));
    }
    let (w, h) = geometry.unwrap_or_else(|| {
        let w = events.iter().map(|e| e.x as usize + 1).max().unwrap_or(0);
        let h = events.iter().map(|e| e.y as usize + 1).max().unwrap_or(0);
        (w, h)
    });
    EventStream::new(w, h, events)
}

pub fn write_csv(stream: &EventStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for e in stream.events() {
        w.serialize(CsvRow {
            x: e.x,
            y: e.y,
            p: e.p,
            t: e.t,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads `.csv` files as CSV and anything else as `EVT1`.
pub fn read_events(path: impl AsRef<Path>, geometry: Option<(usize, usize)>) -> Result<EventStream> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => read_csv(path, geometry),
        _ => EventStream::load_evt1(path),
    }
}
