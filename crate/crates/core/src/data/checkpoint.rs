//! Checkpoint files.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic      8 bytes  "UGCKPT\0\0"
//! version    u32      1
//! config     str      free-form configuration echo (u32 length + UTF-8)
//! datasets   u32 count, then per dataset (ascending by name):
//!            str name, u32 count, that many parameter-name strs (ascending)
//! records    u64 count, then per record (ascending by name):
//!            str name, u8 flags (bit 0 = trainable), u64 rows, u64 cols,
//!            rows·cols × f64 row-major values
//! ```
//!
//! Names are stored in sorted order and duplicates are rejected, so a
//! decoded checkpoint re-encodes to the identical byte sequence.

use std::collections::BTreeMap;
use std::path::Path;

use crate::codec::{write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"UGCKPT\0\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub trainable: bool,
    pub value: Matrix,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub config_echo: String,
    /// Dataset name to the names of its dataset-specific records.
    pub datasets: BTreeMap<String, Vec<String>>,
    pub records: BTreeMap<String, Record>,
}

impl Checkpoint {
    /// Every registry entry must name an existing record.
    pub fn validate(&self) -> Result<()> {
        for (ds, names) in &self.datasets {
            for n in names {
                if !self.records.contains_key(n) {
                    return Err(Error::Format(format!("dataset `{ds}` refers to missing record `{n}`")));
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.str(&self.config_echo);
        w.u32(self.datasets.len() as u32);
        for (name, params) in &self.datasets {
            w.str(name);
            let mut sorted: Vec<&String> = params.iter().collect();
            sorted.sort();
            w.u32(sorted.len() as u32);
            for p in sorted {
                w.str(p);
            }
        }
        w.u64(self.records.len() as u64);
        for (name, rec) in &self.records {
            w.str(name);
            w.u8(rec.trainable as u8);
            w.u64(rec.value.rows() as u64);
            w.u64(rec.value.cols() as u64);
            w.f64s(rec.value.data());
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Version {
                found: version,
                expected: VERSION,
            });
        }
        let config_echo = r.str()?;
        let mut datasets = BTreeMap::new();
        let mut last: Option<String> = None;
        for _ in 0..r.u32()? {
            let name = ascending(&mut r, &mut last)?;
            let mut params = Vec::new();
            let mut last_param = None;
            for _ in 0..r.u32()? {
                params.push(ascending(&mut r, &mut last_param)?);
            }
            datasets.insert(name, params);
        }
        let mut records = BTreeMap::new();
        let mut last = None;
        for _ in 0..r.count(29)? {
            let name = ascending(&mut r, &mut last)?;
            let flags = r.u8()?;
            if flags > 1 {
                return Err(Error::Format(format!("record `{name}` has unknown flags {flags}")));
            }
            let rows = r.u64()? as usize;
            let cols = r.u64()? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format(format!("record `{name}` shape overflows")))?;
            let value = Matrix::from_vec(rows, cols, r.f64s(len)?)?;
            records.insert(
                name,
                Record {
                    trainable: flags & 1 == 1,
                    value,
                },
            );
        }
        if !r.is_at_end() {
            return Err(Error::Format(format!("trailing bytes after offset {}", r.offset())));
        }
        let ck = Checkpoint {
            config_echo,
            datasets,
            records,
        };
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, &self.encode())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::decode(&std::fs::read(path)?)
    }
}

/// Reads a name that must sort strictly after the previous one.
fn ascending(r: &mut Reader, last: &mut Option<String>) -> Result<String> {
    let at = r.offset();
    let name = r.str()?;
    if last.as_ref().is_some_and(|l| *l >= name) {
        return Err(Error::Format(format!(
            "name `{name}` at offset {at} is duplicated or out of order"
        )));
    }
    *last = Some(name.clone());
    Ok(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut ck = Checkpoint {
            config_echo: "hidden = 8\n".into(),
            ..Default::default()
        };
        ck.records.insert(
            "encoder.w".into(),
            Record {
                trainable: true,
                value: Matrix::from_rows(&[[1.0, -0.0], [f64::MIN_POSITIVE, 3.5]]),
            },
        );
        ck.records.insert(
            "dataset.a.head.w".into(),
            Record {
                trainable: false,
                value: Matrix::zeros(0, 3),
            },
        );
        ck.datasets.insert("a".into(), vec!["dataset.a.head.w".into()]);
        ck
    }

    #[test]
    fn byte_exact_round_trip() {
        let ck = sample();
        let bytes = ck.encode();
        let back = Checkpoint::decode(&bytes).unwrap();
        assert_eq!(back.encode(), bytes);
        let w = &back.records["encoder.w"].value;
        assert_eq!(w.data()[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, ck);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/ck.bin");
        ck.save(&path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn rejects_bad_input() {
        let bytes = sample().encode();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[8] = 2;
        assert!(matches!(Checkpoint::decode(&bad), Err(Error::Version { found: 2, .. })));
        match Checkpoint::decode(&bytes[..bytes.len() - 4]) {
            Err(Error::Truncated(off)) => assert!(off > 0 && off < bytes.len() as u64),
            other => panic!("{other:?}"),
        }
        let mut ck = sample();
        ck.datasets.insert("b".into(), vec!["nope".into()]);
        assert!(ck.save(&std::env::temp_dir().join("never-written")).is_err());
    }
}
