//! The `.ref` binary format for solution snapshots and cached reference
//! solutions.
//!
//! Layout:
//!
//! | bytes        | content                                                   |
//! |--------------|-----------------------------------------------------------|
//! | 0..64        | ASCII header `EWIREF 1 <N> <a> <b> <T> <scheme> <tau>`, space padded, `\n` terminated |
//! | 64..64+16N   | coefficients `l = -N/2 .. N/2-1`, `re, im` as little-endian `f64` |
//! | last 32      | SHA-256 of everything before it                           |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::experiments::{ReferenceScheme, StudySpec};
use crate::integrators::{evolve, initial_field, Scheme, SchemeConfig};
use crate::spectral::{PeriodicGrid, SpectralField};

pub const HEADER_LEN: usize = 64;
pub const MAGIC: &str = "EWIREF";
pub const VERSION: u32 = 1;
const HASH_LEN: usize = 32;

/// Metadata stored in a `.ref` header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub t_final: f64,
    pub scheme: Scheme,
    pub tau: f64,
}

fn header(grid: &PeriodicGrid, meta: &SnapshotMeta) -> Result<[u8; HEADER_LEN]> {
    let text = format!(
        "{MAGIC} {VERSION} {} {:e} {:e} {:e} {} {:e}",
        grid.n(),
        grid.a(),
        grid.b(),
        meta.t_final,
        meta.scheme,
        meta.tau
    );
    if text.len() > HEADER_LEN - 1 {
        return Err(Error::Config(format!("snapshot header too long: '{text}'")));
    }
    let mut out = [b' '; HEADER_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    out[HEADER_LEN - 1] = b'\n';
    Ok(out)
}

/// Serializes a field with its metadata.
pub fn encode_snapshot(field: &SpectralField, meta: &SnapshotMeta) -> Result<Vec<u8>> {
    let n = field.grid().n();
    let mut bytes = Vec::with_capacity(HEADER_LEN + 16 * n + HASH_LEN);
    bytes.extend_from_slice(&header(field.grid(), meta)?);
    for c in field.coeffs() {
        bytes.extend_from_slice(&c.re.to_le_bytes());
        bytes.extend_from_slice(&c.im.to_le_bytes());
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    Ok(bytes)
}

/// Parses and verifies a snapshot; `path` is only used in error messages.
pub fn decode_snapshot(bytes: &[u8], path: &Path) -> Result<(SnapshotMeta, SpectralField)> {
    let bad = |reason: String| Error::Cache {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN + HASH_LEN {
        return Err(bad("file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - HASH_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(bad("content hash mismatch".into()));
    }
    let text = std::str::from_utf8(&body[..HEADER_LEN])
        .map_err(|_| bad("header is not ASCII".into()))?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != 8 || fields[0] != MAGIC {
        return Err(bad(format!("malformed header '{}'", text.trim_end())));
    }
    if fields[1] != VERSION.to_string() {
        return Err(bad(format!("unsupported version {}", fields[1])));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
    let n: usize = fields[2].parse().map_err(|_| bad(format!("bad N '{}'", fields[2])))?;
    let (a, b, t_final) = (num(fields[3])?, num(fields[4])?, num(fields[5])?);
    let scheme: Scheme = fields[6].parse().map_err(|_| bad(format!("bad scheme '{}'", fields[6])))?;
    let tau = num(fields[7])?;
    if body.len() != HEADER_LEN + 16 * n {
        return Err(bad(format!("payload length does not match N = {n}")));
    }
    let grid = PeriodicGrid::new(a, b, n).map_err(|e| bad(e.to_string()))?;
    let coeffs = body[HEADER_LEN..]
        .chunks_exact(16)
        .map(|ch| {
            let re = f64::from_le_bytes(ch[..8].try_into().unwrap());
            let im = f64::from_le_bytes(ch[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((
        SnapshotMeta {
            t_final,
            scheme,
            tau,
        },
        SpectralField::new(grid, coeffs)?,
    ))
}

/// Writes through a temporary file and a rename, so readers never see a
/// partial file.
pub fn write_snapshot(path: &Path, field: &SpectralField, meta: &SnapshotMeta) -> Result<()> {
    let bytes = encode_snapshot(field, meta)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("snapshot"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, SpectralField)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_snapshot(&bytes, path)
}

/// Resolved reference parameters for one study and scheme.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub scheme: Scheme,
    pub grid: PeriodicGrid,
    pub tau: f64,
}

impl ReferenceRun {
    pub fn for_study(spec: &StudySpec, tested: Option<Scheme>) -> Result<Self> {
        let scheme = match (spec.reference.scheme, tested) {
            (ReferenceScheme::Fixed(s), _) => s,
            (ReferenceScheme::SameAsTested, Some(s)) => s,
            (ReferenceScheme::SameAsTested, None) => {
                return Err(Error::Config(
                    "study references the tested scheme; name the scheme explicitly".into(),
                ))
            }
        };
        Ok(Self {
            scheme,
            grid: spec.reference_grid()?,
            tau: spec.reference.tau,
        })
    }

    fn config(&self, spec: &StudySpec) -> SchemeConfig {
        SchemeConfig::new(self.scheme, self.grid, self.tau, spec.problem.t_final)
            .with_potential(spec.problem.potential.clone())
            .with_nonlinearity(spec.problem.nonlinearity)
            .with_fs_oversample(spec.fs_oversample)
    }

    /// Content hash of everything that determines the reference field, or
    /// `None` for problems that cannot be described canonically.
    fn cache_key(&self, spec: &StudySpec) -> Option<String> {
        if !spec.problem.datum.is_cacheable() {
            return None;
        }
        let p = &spec.problem;
        let oversample = if self.scheme == Scheme::EwiFs {
            spec.fs_oversample
        } else {
            0
        };
        let canonical = format!(
            "v{VERSION}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{}|{:?}|{}|{}",
            p.potential,
            p.nonlinearity,
            p.datum,
            p.a,
            p.b,
            p.t_final,
            self.scheme,
            self.tau,
            self.grid.n(),
            oversample
        );
        Some(hex::encode(Sha256::digest(canonical.as_bytes())))
    }

    fn meta(&self, spec: &StudySpec) -> SnapshotMeta {
        SnapshotMeta {
            t_final: spec.problem.t_final,
            scheme: self.scheme,
            tau: self.tau,
        }
    }

    fn matches(&self, spec: &StudySpec, meta: &SnapshotMeta, field: &SpectralField) -> bool {
        *meta == self.meta(spec) && field.grid() == &self.grid
    }

    pub fn cache_path(&self, spec: &StudySpec, cache_dir: &Path) -> Option<PathBuf> {
        self.cache_key(spec)
            .map(|k| cache_dir.join(format!("{k}.ref")))
    }

    /// Computes the reference field, reusing a verified cache entry.
    pub fn solve(&self, spec: &StudySpec, cache_dir: Option<&Path>) -> Result<SpectralField> {
        let path = cache_dir.and_then(|d| self.cache_path(spec, d));
        if let Some(path) = &path {
            if path.exists() {
                match read_snapshot(path) {
                    Ok((meta, field)) if self.matches(spec, &meta, &field) => {
                        info!("reference cache hit {}", path.display());
                        return Ok(field);
                    }
                    Ok(_) => warn!("reference cache header mismatch in {}; recomputing", path.display()),
                    Err(e) => warn!("{e}; recomputing"),
                }
            }
        }
        info!(
            "computing reference: {} tau={:e} N={}",
            self.scheme,
            self.tau,
            self.grid.n()
        );
        let cfg = self.config(spec);
        let psi0 = initial_field(
            self.scheme,
            &self.grid,
            |x| spec.problem.datum.eval(x, spec.problem.a, spec.problem.b),
            spec.fs_oversample,
        )?;
        let field = evolve(&cfg, &psi0)?.field;
        if let Some(path) = &path {
            write_snapshot(path, &field, &self.meta(spec))?;
        }
        Ok(field)
    }
}

/// Reference solution at `t = T` for the study's fixed reference scheme.
pub fn compute_reference(spec: &StudySpec, cache_dir: &Path) -> Result<SpectralField> {
    ReferenceRun::for_study(spec, None)?.solve(spec, Some(cache_dir))
}

/// `L^2` distance between the reference and a run with half the time step
/// and twice the modes; small values certify the reference is converged.
pub fn reference_self_consistency(
    spec: &StudySpec,
    tested: Option<Scheme>,
    cache_dir: Option<&Path>,
) -> Result<f64> {
    let base = ReferenceRun::for_study(spec, tested)?;
    let coarse = base.solve(spec, cache_dir)?;
    let finer = ReferenceRun {
        scheme: base.scheme,
        grid: base.grid.with_modes(2 * base.grid.n())?,
        tau: 0.5 * base.tau,
    };
    let fine = finer.solve(spec, cache_dir)?;
    crate::experiments::error_against_reference(&coarse, &fine, crate::experiments::Norm::L2)
}
