//! Binary eigen-decomposition checkpoints with a JSON sidecar.
//!
//! Layout, little endian: magic `SSHHUBED`, version `u32`, 64-byte hex key,
//! `N u64`, `v w U f64`, `k u64`, `seed u64`, `tol f64`, `dim u64`,
//! `characters per state u32`; then per state `energy f64`,
//! `residual f64`, `cluster u64` and the characters as `i8`; then the `k`
//! vectors, `dim` doubles each.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eigen::EigenSolution;
use crate::error::{Error, Result};
use crate::operators::ChainSpec;

const MAGIC: &[u8; 8] = b"SSHHUBED";
const VERSION: u32 = 1;

/// Everything in the header besides the payload sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub key: String,
    pub chain: ChainSpec,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    key: &'a str,
    #[serde(rename = "N")]
    sites: usize,
    v: f64,
    w: f64,
    #[serde(rename = "U")]
    u: f64,
    k: usize,
    seed: u64,
    tol: f64,
    energies: &'a [f64],
    residuals: &'a [f64],
    clusters: &'a [usize],
    characters: &'a [Vec<i8>],
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn put_u64<W: Write>(w: &mut W, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, x: f64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

/// Writes `sol` to `path` and its sidecar next to it. The file is first
/// written under a temporary name and then renamed.
pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, sol: &EigenSolution) -> Result<()> {
    if header.key.len() != 64 {
        return Err(Error::param("checkpoint key must be 64 hex digits"));
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let nchar = sol.characters.first().map_or(0, Vec::len);
    if sol.characters.iter().any(|c| c.len() != nchar) {
        return Err(Error::param("inconsistent symmetry characters"));
    }
    let tmp = path.with_extension("bin.partial");
    {
        let mut w = BufWriter::with_capacity(1 << 20, File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(header.key.as_bytes())?;
        put_u64(&mut w, header.chain.sites as u64)?;
        put_f64(&mut w, header.chain.v)?;
        put_f64(&mut w, header.chain.w)?;
        put_f64(&mut w, header.chain.u)?;
        put_u64(&mut w, sol.len() as u64)?;
        put_u64(&mut w, header.seed)?;
        put_f64(&mut w, header.tol)?;
        put_u64(&mut w, sol.dim() as u64)?;
        w.write_all(&(nchar as u32).to_le_bytes())?;
        for i in 0..sol.len() {
            put_f64(&mut w, sol.energies[i])?;
            put_f64(&mut w, sol.residuals[i])?;
            put_u64(&mut w, sol.clusters[i] as u64)?;
            let chars: Vec<u8> = sol.characters[i].iter().map(|&c| c as u8).collect();
            w.write_all(&chars)?;
        }
        let mut bytes = Vec::with_capacity(8 * sol.dim());
        for v in &sol.vectors {
            bytes.clear();
            bytes.extend(v.iter().flat_map(|x| x.to_le_bytes()));
            w.write_all(&bytes)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    let sidecar = Sidecar {
        key: &header.key,
        sites: header.chain.sites,
        v: header.chain.v,
        w: header.chain.w,
        u: header.chain.u,
        k: sol.len(),
        seed: header.seed,
        tol: header.tol,
        energies: &sol.energies,
        residuals: &sol.residuals,
        clusters: &sol.clusters,
        characters: &sol.characters,
    };
    let mut out = BufWriter::new(File::create(sidecar_path(path))?);
    serde_json::to_writer_pretty(&mut out, &sidecar)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> Cursor<R> {
    fn bytes<const L: usize>(&mut self) -> Result<[u8; L]> {
        let mut buf = [0u8; L];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| self.truncated(e))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn truncated(&self, e: std::io::Error) -> Error {
        Error::Format {
            what: self.path.display().to_string(),
            reason: format!("truncated checkpoint ({e})"),
        }
    }
}

fn read_header<R: Read>(c: &mut Cursor<R>) -> Result<(CheckpointHeader, usize, usize)> {
    let what = c.path.display().to_string();
    let bad = |reason: &str| Error::Format {
        what: what.clone(),
        reason: reason.to_string(),
    };
    if &c.bytes::<8>()? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    if u32::from_le_bytes(c.bytes()?) != VERSION {
        return Err(bad("unsupported checkpoint version"));
    }
    let key = String::from_utf8(c.bytes::<64>()?.to_vec()).map_err(|_| bad("corrupt key"))?;
    let sites = c.u64()? as usize;
    let (v, w, u) = (c.f64()?, c.f64()?, c.f64()?);
    let k = c.u64()? as usize;
    let seed = c.u64()?;
    let tol = c.f64()?;
    let dim = c.u64()? as usize;
    let nchar = u32::from_le_bytes(c.bytes()?) as usize;
    let header = CheckpointHeader {
        key,
        chain: ChainSpec { sites, v, w, u },
        k,
        seed,
        tol,
    };
    Ok((header, dim, nchar))
}

/// Reads only the header.
pub fn read_checkpoint_header(path: &Path) -> Result<CheckpointHeader> {
    let mut c = Cursor {
        inner: BufReader::new(File::open(path)?),
        path: path.to_path_buf(),
    };
    Ok(read_header(&mut c)?.0)
}

/// Loads a checkpoint, refusing it unless its key equals `expected_key`.
pub fn read_checkpoint(
    path: &Path,
    expected_key: &str,
) -> Result<(CheckpointHeader, EigenSolution)> {
    let mut c = Cursor {
        inner: BufReader::with_capacity(1 << 20, File::open(path)?),
        path: path.to_path_buf(),
    };
    let (header, dim, nchar) = read_header(&mut c)?;
    if header.key != expected_key {
        return Err(Error::StaleCheckpoint {
            path: path.to_path_buf(),
            expected: expected_key[..16.min(expected_key.len())].to_string(),
            found: header.key[..16].to_string(),
        });
    }
    let k = header.k;
    let (mut energies, mut residuals, mut clusters, mut characters) = (
        Vec::with_capacity(k),
        Vec::with_capacity(k),
        Vec::with_capacity(k),
        Vec::with_capacity(k),
    );
    for _ in 0..k {
        energies.push(c.f64()?);
        residuals.push(c.f64()?);
        clusters.push(c.u64()? as usize);
        let mut chars = vec![0u8; nchar];
        c.inner.read_exact(&mut chars).map_err(|e| c.truncated(e))?;
        characters.push(chars.into_iter().map(|b| b as i8).collect());
    }
    let mut vectors = Vec::with_capacity(k);
    let mut bytes = vec![0u8; 8 * dim];
    for _ in 0..k {
        c.inner.read_exact(&mut bytes).map_err(|e| c.truncated(e))?;
        vectors.push(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect::<Vec<f64>>(),
        );
    }
    let mut extra = [0u8; 1];
    if c.inner.read(&mut extra)? != 0 {
        return Err(Error::Format {
            what: path.display().to_string(),
            reason: "trailing bytes after the last vector".into(),
        });
    }
    let sol = EigenSolution {
        energies,
        vectors,
        residuals,
        clusters,
        characters,
    };
    Ok((header, sol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{lowest_eigenpairs_by_symmetry, SolverOptions};
    use crate::operators::{assemble_h0, reflection, spin_swap};

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("sshhub-ckpt-{}-{name}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join("ed.bin")
    }

    fn sample() -> (CheckpointHeader, EigenSolution) {
        let chain = ChainSpec::topological(4, 0.1);
        let h = assemble_h0(&chain).unwrap();
        let p = reflection(&chain).unwrap();
        let s = spin_swap(&chain).unwrap();
        let sol = lowest_eigenpairs_by_symmetry(&h, &[&p, &s], &SolverOptions::with_k(6)).unwrap();
        let header = CheckpointHeader {
            key: "ab".repeat(32),
            chain,
            k: 6,
            seed: 1,
            tol: 1e-9,
        };
        (header, sol)
    }

    #[test]
    fn round_trip_is_exact() {
        let (header, sol) = sample();
        let path = scratch("rt");
        write_checkpoint(&path, &header, &sol).unwrap();
        let (h2, s2) = read_checkpoint(&path, &header.key).unwrap();
        assert_eq!(h2, header);
        assert_eq!(s2, sol);
        assert_eq!(read_checkpoint_header(&path).unwrap(), header);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(json["energies"].as_array().unwrap().len(), 6);
        assert_eq!(json["N"], 4);
        // deterministic bytes
        let first = std::fs::read(&path).unwrap();
        write_checkpoint(&path, &header, &sol).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
        std::fs::remove_dir_all(path.parent().unwrap()).unwrap();
    }

    #[test]
    fn stale_and_corrupt_files_are_refused() {
        let (header, sol) = sample();
        let path = scratch("stale");
        write_checkpoint(&path, &header, &sol).unwrap();
        let err = read_checkpoint(&path, &"cd".repeat(32)).unwrap_err();
        assert_eq!(err.exit_code(), 4);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_checkpoint(&path, &header.key),
            Err(Error::Format { .. })
        ));
        std::fs::write(&path, b"garbage").unwrap();
        assert!(read_checkpoint(&path, &header.key).is_err());
        std::fs::remove_dir_all(path.parent().unwrap()).unwrap();
    }
}
