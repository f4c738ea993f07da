//! On-disk kernel cache.
//!
//! One file per (dataset, kernel kind, configuration). Layout, all integers
//! and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "UGKERNEL"
//! version      u32      1
//! kind         u8       0 = wl, 1 = sp, 2 = fgsd
//! config echo  u32 wl_iterations, u32 fgsd_bins, f64 fgsd_range_max,
//!              u8 fgsd_variant (0 harmonic, 1 biharmonic),
//!              u8 sp_unlabeled_fallback
//! m            u64      dataset size
//! raw_diag     m × f64
//! values       m·m × f64, row-major normalized matrix
//! dictionary   u64 entry count, then per entry:
//!              u8 tag; tag 0: i64 label; tag 1: u64 prev, u32 len, len × u64
//!              followed by u64 compressed id
//! ```
//!
//! The file name carries a hash of the kind, the configuration and a
//! fingerprint of the dataset's graphs, so changing any of them misses the
//! cache.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::wl::{WlDictionary, WlSignature};
use super::{kernel_matrix, FgsdVariant, KernelConfig, KernelKind, KernelMatrix, KernelSet};
use crate::codec::{write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

pub const MAGIC: &[u8; 8] = b"UGKERNEL";
pub const VERSION: u32 = 1;

fn encode_config(w: &mut Writer, cfg: &KernelConfig) {
    w.u32(cfg.wl_iterations as u32);
    w.u32(cfg.fgsd_bins as u32);
    w.f64(cfg.fgsd_range_max);
    w.u8(match cfg.fgsd_variant {
        FgsdVariant::Harmonic => 0,
        FgsdVariant::Biharmonic => 1,
    });
    w.u8(cfg.sp_unlabeled_fallback as u8);
}

fn decode_config(r: &mut Reader) -> Result<KernelConfig> {
    let wl_iterations = r.u32()? as usize;
    let fgsd_bins = r.u32()? as usize;
    let fgsd_range_max = r.f64()?;
    let fgsd_variant = match r.u8()? {
        0 => FgsdVariant::Harmonic,
        1 => FgsdVariant::Biharmonic,
        v => return Err(Error::Format(format!("unknown fgsd variant code {v}"))),
    };
    let sp_unlabeled_fallback = r.u8()? != 0;
    Ok(KernelConfig {
        wl_iterations,
        fgsd_bins,
        fgsd_range_max,
        fgsd_variant,
        sp_unlabeled_fallback,
    })
}

pub fn encode(k: &KernelMatrix, cfg: &KernelConfig) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.u8(k.kind.code());
    encode_config(&mut w, cfg);
    w.u64(k.len() as u64);
    w.f64s(&k.raw_diag);
    w.f64s(k.values.data());
    match &k.wl_dictionary {
        None => w.u64(0),
        Some(d) => {
            w.u64(d.len() as u64);
            for (sig, id) in d.entries() {
                match sig {
                    WlSignature::Initial(l) => {
                        w.u8(0);
                        w.i64(*l);
                    }
                    WlSignature::Refined { prev, neighbors } => {
                        w.u8(1);
                        w.u64(*prev);
                        w.u32(neighbors.len() as u32);
                        for &n in neighbors {
                            w.u64(n);
                        }
                    }
                }
                w.u64(id);
            }
        }
    }
    w.finish()
}

pub fn decode(bytes: &[u8]) -> Result<(KernelMatrix, KernelConfig)> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Format("not a kernel cache file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let code = r.u8()?;
    let kind = KernelKind::from_code(code).ok_or_else(|| Error::Format(format!("unknown kernel kind code {code}")))?;
    let cfg = decode_config(&mut r)?;
    let m = r.count(8)?;
    let raw_diag = r.f64s(m)?;
    let values = Matrix::from_vec(m, m, r.f64s(m * m)?)?;
    let entries = r.count(9)?;
    let wl_dictionary = if kind == KernelKind::Wl {
        let mut list = Vec::with_capacity(entries);
        for _ in 0..entries {
            let sig = match r.u8()? {
                0 => WlSignature::Initial(r.i64()?),
                1 => {
                    let prev = r.u64()?;
                    let len = r.u32()? as usize;
                    let neighbors = (0..len).map(|_| r.u64()).collect::<Result<_>>()?;
                    WlSignature::Refined { prev, neighbors }
                }
                t => return Err(Error::Format(format!("unknown signature tag {t}"))),
            };
            list.push((sig, r.u64()?));
        }
        Some(WlDictionary::from_entries(list))
    } else {
        if entries != 0 {
            return Err(Error::Format("dictionary present for a non-WL kernel".into()));
        }
        None
    };
    if !r.is_at_end() {
        return Err(Error::Format(format!("trailing bytes after offset {}", r.offset())));
    }
    Ok((
        KernelMatrix {
            kind,
            values,
            raw_diag,
            wl_dictionary,
        },
        cfg,
    ))
}

pub fn write(path: &Path, k: &KernelMatrix, cfg: &KernelConfig) -> Result<()> {
    write_atomic(path, &encode(k, cfg))
}

pub fn read(path: &Path) -> Result<(KernelMatrix, KernelConfig)> {
    decode(&std::fs::read(path)?)
}

/// Hash over graph structure and labels.
pub fn dataset_fingerprint(graphs: &[Graph]) -> String {
    let mut h = Sha256::new();
    h.update((graphs.len() as u64).to_le_bytes());
    for g in graphs {
        h.update((g.node_count() as u64).to_le_bytes());
        h.update((g.edge_count() as u64).to_le_bytes());
        for &(a, b) in g.edges() {
            h.update((a as u64).to_le_bytes());
            h.update((b as u64).to_le_bytes());
        }
        match g.node_labels() {
            Some(l) => {
                h.update([1]);
                for v in l {
                    h.update(v.to_le_bytes());
                }
            }
            None => h.update([0]),
        }
    }
    hex::encode(h.finalize())
}

pub fn cache_key(kind: KernelKind, cfg: &KernelConfig, fingerprint: &str) -> String {
    let mut w = Writer::new();
    w.u8(kind.code());
    encode_config(&mut w, cfg);
    w.str(fingerprint);
    let digest = Sha256::digest(w.finish());
    hex::encode(&digest[..8])
}

pub fn cache_path(dir: &Path, dataset: &str, kind: KernelKind, cfg: &KernelConfig, graphs: &[Graph]) -> PathBuf {
    let key = cache_key(kind, cfg, &dataset_fingerprint(graphs));
    dir.join(format!("{}.{}.{}.ukc", sanitize(dataset), kind.name(), key))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Computed,
}

/// Loads each kernel from `dir`, computing and writing the ones that are
/// missing or stale.
pub fn load_or_compute(
    dir: &Path,
    dataset: &str,
    graphs: &[Graph],
    kinds: &[KernelKind],
    cfg: &KernelConfig,
) -> Result<(KernelSet, Vec<CacheStatus>)> {
    let mut matrices = Vec::new();
    let mut status = Vec::new();
    for &kind in kinds {
        let path = cache_path(dir, dataset, kind, cfg, graphs);
        match read(&path) {
            Ok((k, stored)) if stored == *cfg && k.kind == kind && k.len() == graphs.len() => {
                matrices.push(k);
                status.push(CacheStatus::Hit);
            }
            _ => {
                let k = kernel_matrix(graphs, kind, cfg)?;
                write(&path, &k, cfg)?;
                matrices.push(k);
                status.push(CacheStatus::Computed);
            }
        }
    }
    Ok((KernelSet { matrices }, status))
}

/// Loads every kernel from `dir`; a missing or mismatched file is an error
/// pointing at the precompute step.
pub fn load(
    dir: &Path,
    dataset: &str,
    graphs: &[Graph],
    kinds: &[KernelKind],
    cfg: &KernelConfig,
) -> Result<KernelSet> {
    let mut matrices = Vec::new();
    for &kind in kinds {
        let path = cache_path(dir, dataset, kind, cfg, graphs);
        let missing = || Error::MissingKernel {
            dataset: dataset.to_string(),
            kind: kind.name().to_string(),
        };
        let (k, stored) = read(&path).map_err(|_| missing())?;
        if stored != *cfg || k.kind != kind || k.len() != graphs.len() {
            return Err(missing());
        }
        matrices.push(k);
    }
    Ok(KernelSet { matrices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::random_graph;

    #[test]
    fn round_trip_is_bit_exact() {
        let graphs: Vec<Graph> = (0..6).map(|s| random_graph(6, 0.4, s)).collect();
        let cfg = KernelConfig::default();
        for kind in KernelKind::ALL {
            let k = kernel_matrix(&graphs, kind, &cfg).unwrap();
            let bytes = encode(&k, &cfg);
            let (back, back_cfg) = decode(&bytes).unwrap();
            assert_eq!(back_cfg, cfg);
            assert_eq!(back.raw_diag, k.raw_diag);
            assert_eq!(back.wl_dictionary, k.wl_dictionary);
            for (a, b) in back.values.data().iter().zip(k.values.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert_eq!(encode(&back, &back_cfg), bytes);
        }
    }

    #[test]
    fn rejects_corruption() {
        let cfg = KernelConfig::default();
        let k = kernel_matrix(&[Graph::path(3)], KernelKind::Wl, &cfg).unwrap();
        let mut bytes = encode(&k, &cfg);
        assert!(matches!(decode(&bytes[..bytes.len() - 3]), Err(Error::Truncated(_))));
        bytes[8] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Version { found: 9, .. })));
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn load_or_compute_hits_second_time() {
        let dir = tempfile::tempdir().unwrap();
        let graphs: Vec<Graph> = (0..5).map(|s| random_graph(5, 0.5, s)).collect();
        let cfg = KernelConfig::default();
        assert!(matches!(
            load(dir.path(), "toy", &graphs, &KernelKind::ALL, &cfg),
            Err(Error::MissingKernel { .. })
        ));
        let (a, s1) = load_or_compute(dir.path(), "toy", &graphs, &KernelKind::ALL, &cfg).unwrap();
        assert!(s1.iter().all(|&s| s == CacheStatus::Computed));
        let (b, s2) = load_or_compute(dir.path(), "toy", &graphs, &KernelKind::ALL, &cfg).unwrap();
        assert!(s2.iter().all(|&s| s == CacheStatus::Hit));
        assert_eq!(a, b);
        assert_eq!(load(dir.path(), "toy", &graphs, &KernelKind::ALL, &cfg).unwrap(), a);

        let cfg2 = KernelConfig {
            wl_iterations: 2,
            ..cfg.clone()
        };
        assert_ne!(
            cache_path(dir.path(), "toy", KernelKind::Wl, &cfg, &graphs),
            cache_path(dir.path(), "toy", KernelKind::Wl, &cfg2, &graphs)
        );
    }
}
