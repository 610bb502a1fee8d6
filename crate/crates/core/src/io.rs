//! Flat binary field container and CSV energy traces.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "SWFIELDS" | version u32 | dim u32 | points u32 | side f64
//! | mollifier scale f64 | seed u64 | block count u32
//! then per block: name length u32 | name (UTF-8) | value count u64 | values f64...
//! ```
//!
//! Blocks are row-major in the grid's linear index. Files are written to a
//! temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::dynamics::EnergyTrace;
use crate::error::{Error, Result};
use crate::spectral::{RealField, TorusGrid};

pub const CONTAINER_MAGIC: &[u8; 8] = b"SWFIELDS";
pub const CONTAINER_VERSION: u32 = 1;

/// Header of a field container.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContainerHeader {
    pub dim: u32,
    pub points: u32,
    pub side: f64,
    pub mollifier_scale: f64,
    pub seed: u64,
}

impl ContainerHeader {
    pub fn for_grid(grid: &TorusGrid, mollifier_scale: f64, seed: u64) -> Self {
        Self {
            dim: grid.dim() as u32,
            points: grid.points() as u32,
            side: grid.side(),
            mollifier_scale,
            seed,
        }
    }

    pub fn grid(&self) -> Result<Arc<TorusGrid>> {
        TorusGrid::new(self.dim as usize, self.points as usize, self.side)
    }
}

/// A header with named field blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldContainer {
    pub header: ContainerHeader,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl FieldContainer {
    pub fn new(header: ContainerHeader) -> Self {
        Self {
            header,
            blocks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: &str, field: &RealField) {
        self.blocks.push((name.to_owned(), field.values().to_vec()));
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    /// The named block as a field on the header's grid.
    pub fn field(&self, name: &str) -> Result<RealField> {
        let values = self
            .block(name)
            .ok_or_else(|| Error::Format(format!("no block named {name:?}")))?;
        RealField::from_values(&self.header.grid()?, values.to_vec())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CONTAINER_MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&self.header.dim.to_le_bytes());
        out.extend_from_slice(&self.header.points.to_le_bytes());
        out.extend_from_slice(&self.header.side.to_le_bytes());
        out.extend_from_slice(&self.header.mollifier_scale.to_le_bytes());
        out.extend_from_slice(&self.header.seed.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for (name, values) in &self.blocks {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(values.len() as u64).to_le_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CONTAINER_MAGIC {
            return Err(Error::Format("not a field container".into()));
        }
        let version = r.u32()?;
        if version != CONTAINER_VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let header = ContainerHeader {
            dim: r.u32()?,
            points: r.u32()?,
            side: r.f64()?,
            mollifier_scale: r.f64()?,
            seed: r.u64()?,
        };
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Format("block name is not UTF-8".into()))?;
            let n = r.u64()? as usize;
            if n.checked_mul(8).is_none_or(|b| b > r.remaining()) {
                return Err(Error::Format(format!("block {name:?} is truncated")));
            }
            let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            blocks.push((name, values));
        }
        if r.remaining() != 0 {
            return Err(Error::Format("trailing bytes after the last block".into()));
        }
        Ok(Self { header, blocks })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of container".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("four bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = temp_sibling(path);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn temp_sibling(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

/// CSV with columns `t,E_R,E_gg,log_slope`.
pub fn energy_trace_csv(trace: &EnergyTrace) -> String {
    let mut out = String::from("t,E_R,E_gg,log_slope\n");
    for i in 0..trace.times.len() {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            trace.times[i], trace.energy[i], trace.coercive_energy[i], trace.log_slope[i]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldContainer {
        let grid = TorusGrid::new(2, 8, 4.0).unwrap();
        let mut c = FieldContainer::new(ContainerHeader::for_grid(&grid, 0.25, 42));
        c.push("xi", &RealField::from_fn(&grid, |x| x[0] - 0.5 * x[1]));
        c.push("W", &RealField::constant(&grid, -1.5));
        c
    }

    #[test]
    fn round_trips_through_bytes() {
        let c = sample();
        let back = FieldContainer::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.field("W").unwrap().values()[3], -1.5);
        assert!(back.field("missing").is_err());
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..8], b"SWFIELDS");
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(bytes[16..20].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(bytes[20..28].try_into().unwrap()), 4.0);
        assert_eq!(u64::from_le_bytes(bytes[36..44].try_into().unwrap()), 42);
        // Header, two names and two blocks of 64 values.
        assert_eq!(bytes.len(), 48 + (4 + 2 + 8 + 512) + (4 + 1 + 8 + 512));
    }

    #[test]
    fn rejects_corrupt_input() {
        let bytes = sample().to_bytes();
        assert!(FieldContainer::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(FieldContainer::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(FieldContainer::from_bytes(&extra).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("swf-{}", std::process::id()));
        let path = dir.join("lift.bin");
        sample().write(&path).unwrap();
        let read = FieldContainer::read(&path).unwrap();
        assert_eq!(read, sample());
        let leftovers: Vec<_> = fs::read_dir(&dir).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn csv_has_expected_columns() {
        let trace = EnergyTrace {
            times: vec![0.0, 0.5],
            energy: vec![1.0, 1.0],
            coercive_energy: vec![2.0, 2.5],
            log_slope: vec![0.0, 0.4],
        };
        let csv = energy_trace_csv(&trace);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "t,E_R,E_gg,log_slope");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("5e-1,"));
    }
}
