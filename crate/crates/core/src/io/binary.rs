//! Little-endian binary snapshot and basis files.
//!
//! Snapshot file (`PODSNAP1`), 44-byte header then payload:
//!
//! ```text
//! offset  size  field
//!      0     8  magic "PODSNAP1"
//!      8     4  u32 Nx
//!     12     4  u32 Ny
//!     16     4  u32 m
//!     20     8  f64 Lx
//!     28     8  f64 Ly
//!     36     8  f64 sample_interval
//!     44        m columns of n = Nx*Ny f64 (phi), x-fastest
//!               m columns of n f64 (q)
//!               m f64 sample times
//! ```
//!
//! Basis file (`PODBASE1`):
//!
//! ```text
//! magic "PODBASE1"
//! u32 n, u32 r, u32 k_deim (0 if absent), u32 s (length of each singular-value array)
//! f64 weight
//! U_phi (n*r, column-major), U_q (n*r), sigma_phi (s), sigma_q (s)
//! if k_deim > 0: W (n*k), k u32 indices, M = W (P^T W)^{-1} (n*k), P^T U_phi (k*r)
//! ```
//!
//! Writes go to a temporary file in the target directory that is renamed
//! into place.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::deim::DeimOperator;
use crate::error::{Error, Result};
use crate::pod::{orthonormality_error, Modes, PodBasis, SnapshotSet};
use crate::spectral::Grid2D;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"PODSNAP1";
pub const BASIS_MAGIC: &[u8; 8] = b"PODBASE1";
pub const SNAPSHOT_HEADER_LEN: usize = 44;

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} does not fit in u32")))?;
        self.0.extend_from_slice(&v.to_le_bytes());
        Ok(())
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        for v in vs {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format("file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("dimension overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let m = self.take(8)?;
        if m != expected {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(m),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

pub fn encode_snapshots(s: &SnapshotSet) -> Result<Vec<u8>> {
    let (n, m) = (s.n(), s.m());
    let mut w = Writer(Vec::with_capacity(SNAPSHOT_HEADER_LEN + 8 * (2 * n * m + m)));
    w.0.extend_from_slice(SNAPSHOT_MAGIC);
    w.u32(s.grid.nx())?;
    w.u32(s.grid.ny())?;
    w.u32(m)?;
    w.f64(s.grid.lx());
    w.f64(s.grid.ly());
    w.f64(s.sample_interval);
    w.f64s(s.phi.as_slice());
    w.f64s(s.q.as_slice());
    w.f64s(&s.times);
    Ok(w.0)
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<SnapshotSet> {
    let mut r = Reader { buf: bytes, pos: 0 };
    r.magic(SNAPSHOT_MAGIC)?;
    let nx = r.u32()?;
    let ny = r.u32()?;
    let m = r.u32()?;
    let lx = r.f64()?;
    let ly = r.f64()?;
    let interval = r.f64()?;
    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| Error::Format(e.to_string()))?;
    let n = grid.len();
    let expected = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_mul(2))
        .and_then(|v| v.checked_add(m))
        .and_then(|v| v.checked_mul(8))
        .and_then(|v| v.checked_add(SNAPSHOT_HEADER_LEN))
        .ok_or_else(|| Error::Format("dimension overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "snapshot file has {} bytes, header implies {expected}",
            bytes.len()
        )));
    }
    let phi = DMatrix::from_vec(n, m, r.f64s(n * m)?);
    let q = DMatrix::from_vec(n, m, r.f64s(n * m)?);
    let times = r.f64s(m)?;
    r.finish()?;
    SnapshotSet::new(grid, phi, q, times, interval).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_snapshots(path: &Path, s: &SnapshotSet) -> Result<()> {
    write_atomic(path, &encode_snapshots(s)?)
}

pub fn read_snapshots(path: &Path) -> Result<SnapshotSet> {
    decode_snapshots(&read_all(path)?)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Basis together with an optional DEIM operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFile {
    pub basis: PodBasis,
    pub deim: Option<DeimOperator>,
}

pub fn encode_basis(b: &BasisFile) -> Result<Vec<u8>> {
    let (n, r) = (b.basis.n(), b.basis.rank());
    let s = b.basis.phi.singular_values.len();
    if b.basis.q.singular_values.len() != s {
        return Err(Error::Format("singular-value arrays differ in length".into()));
    }
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(BASIS_MAGIC);
    w.u32(n)?;
    w.u32(r)?;
    w.u32(b.deim.as_ref().map_or(0, |d| d.k()))?;
    w.u32(s)?;
    w.f64(b.basis.weight);
    w.f64s(b.basis.u_phi().as_slice());
    w.f64s(b.basis.u_q().as_slice());
    w.f64s(&b.basis.phi.singular_values);
    w.f64s(&b.basis.q.singular_values);
    if let Some(d) = &b.deim {
        w.f64s(d.w.as_slice());
        for &i in &d.indices {
            w.u32(i)?;
        }
        w.f64s(d.lift.as_slice());
        w.f64s(d.sampler.as_slice());
    }
    Ok(w.0)
}

pub fn decode_basis(bytes: &[u8]) -> Result<BasisFile> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    rd.magic(BASIS_MAGIC)?;
    let n = rd.u32()?;
    let r = rd.u32()?;
    let k = rd.u32()?;
    let s = rd.u32()?;
    let weight = rd.f64()?;
    if r == 0 || r > n {
        return Err(Error::Format(format!("rank {r} invalid for basis length {n}")));
    }
    if k > n {
        return Err(Error::Format(format!("DEIM rank {k} exceeds basis length {n}")));
    }
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(Error::Format(format!("invalid inner-product weight {weight}")));
    }
    let nr = n.checked_mul(r).ok_or_else(|| Error::Format("dimension overflow".into()))?;
    let u_phi = DMatrix::from_vec(n, r, rd.f64s(nr)?);
    let u_q = DMatrix::from_vec(n, r, rd.f64s(nr)?);
    let sigma_phi = rd.f64s(s)?;
    let sigma_q = rd.f64s(s)?;
    let deim = if k > 0 {
        let nk = n * k;
        let w = DMatrix::from_vec(n, k, rd.f64s(nk)?);
        let mut indices = Vec::with_capacity(k);
        for _ in 0..k {
            let i = rd.u32()?;
            if i >= n {
                return Err(Error::Format(format!("DEIM index {i} out of range")));
            }
            indices.push(i);
        }
        let lift = DMatrix::from_vec(n, k, rd.f64s(nk)?);
        let sampler = DMatrix::from_vec(k, r, rd.f64s(k * r)?);
        let ptw = DMatrix::from_fn(k, k, |a, b| w[(indices[a], b)]);
        let sv = ptw.svd(false, false).singular_values;
        Some(DeimOperator {
            w,
            indices,
            lift,
            sampler,
            condition: sv.max() / sv.min(),
        })
    } else {
        None
    };
    rd.finish()?;
    for (name, u) in [("phi", &u_phi), ("q", &u_q)] {
        let err = orthonormality_error(u, weight);
        if !(err <= 1e-10) {
            return Err(Error::Format(format!(
                "{name} basis is not orthonormal (max deviation {err:e})"
            )));
        }
    }
    let rank = |v: &[f64]| crate::pod::numerical_rank(v);
    let basis = PodBasis {
        phi: Modes {
            numerical_rank: rank(&sigma_phi),
            valid_columns: r.min(rank(&sigma_phi)),
            singular_values: sigma_phi,
            basis: u_phi,
        },
        q: Modes {
            numerical_rank: rank(&sigma_q),
            valid_columns: r.min(rank(&sigma_q)),
            singular_values: sigma_q,
            basis: u_q,
        },
        weight,
    };
    Ok(BasisFile { basis, deim })
}

pub fn write_basis(path: &Path, b: &BasisFile) -> Result<()> {
    write_atomic(path, &encode_basis(b)?)
}

pub fn read_basis(path: &Path) -> Result<BasisFile> {
    decode_basis(&read_all(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_snapshots(nx: usize, ny: usize, m: usize) -> SnapshotSet {
        let grid = Grid2D::new(nx, ny, 2.0, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = grid.len();
        let phi = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let q = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let times = (0..m).map(|k| 0.1 * k as f64).collect();
        SnapshotSet::new(grid, phi, q, times, 0.1).unwrap()
    }

    #[test]
    fn snapshot_round_trip_and_size() {
        let s = random_snapshots(8, 6, 5);
        let bytes = encode_snapshots(&s).unwrap();
        let (n, m) = (48, 5);
        assert_eq!(bytes.len(), 44 + 8 * (2 * m * n + m));
        let back = decode_snapshots(&bytes).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn snapshot_rejects_bad_input() {
        let s = random_snapshots(4, 4, 2);
        let mut bytes = encode_snapshots(&s).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshots(&bad), Err(Error::Format(_))));
        bytes.pop();
        assert!(matches!(decode_snapshots(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn basis_round_trip() {
        let s = random_snapshots(8, 8, 6);
        let basis = crate::pod::compute_basis(&s, 3).unwrap();
        let nsnap = crate::deim::coefficient_snapshots(&s.phi, &crate::model::AuxMap { shift: 2.0 });
        let deim = crate::deim::deim_build(&nsnap, 2, basis.u_phi(), basis.weight).unwrap();
        let file = BasisFile {
            basis,
            deim: Some(deim),
        };
        let bytes = encode_basis(&file).unwrap();
        let back = decode_basis(&bytes).unwrap();
        assert_eq!(back.basis.u_phi(), file.basis.u_phi());
        assert_eq!(back.basis.u_q(), file.basis.u_q());
        assert_eq!(back.basis.phi.singular_values, file.basis.phi.singular_values);
        let (d0, d1) = (file.deim.unwrap(), back.deim.unwrap());
        assert_eq!(d0.indices, d1.indices);
        assert_eq!(d0.lift, d1.lift);
        assert_eq!(d0.sampler, d1.sampler);
    }

    #[test]
    fn basis_rejects_rank_above_n() {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(BASIS_MAGIC);
        for v in [2, 3, 0, 0] {
            w.u32(v).unwrap();
        }
        w.f64(1.0);
        assert!(matches!(decode_basis(&w.0), Err(Error::Format(_))));
    }

    #[test]
    fn basis_rejects_non_orthonormal() {
        let s = random_snapshots(4, 4, 3);
        let basis = crate::pod::compute_basis(&s, 2).unwrap();
        let mut file = BasisFile { basis, deim: None };
        file.basis.phi.basis[(0, 0)] += 1e-3;
        let bytes = encode_basis(&file).unwrap();
        assert!(decode_basis(&bytes).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
