//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | offset | size | content                               |
//! |--------|------|---------------------------------------|
//! | 0      | 4    | magic `DONF`                          |
//! | 4      | 4    | version, `u32` = 1                    |
//! | 8      | 4    | grid size `n`, `u32`                  |
//! | 12     | 4    | form degree, `u32`                    |
//! | 16     | 4    | component count, `u32`                |
//! | 20     | 8·c·n⁴ | `f64` values, component-major, `x₁` fastest |

use super::{GridError, GridSpec, KFormField, Scheme};
use crate::algebra::DIMS;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"DONF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

pub fn encode(field: &KFormField) -> Vec<u8> {
    let grid = field.grid();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * field.components().len() * grid.len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, grid.n() as u32, field.degree() as u32, field.components().len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for comp in field.components() {
        for x in comp {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Decodes a snapshot; the scheme is not stored and must be supplied.
pub fn decode(bytes: &[u8], scheme: Scheme) -> Result<KFormField, GridError> {
    let bad = |m: &str| GridError::Format(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing DONF header"));
    }
    let version = read_u32(bytes, 4);
    if version != VERSION {
        return Err(GridError::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(bytes, 8) as usize;
    let degree = read_u32(bytes, 12) as usize;
    let ncomp = read_u32(bytes, 16) as usize;
    if degree > 4 || DIMS[degree] != ncomp {
        return Err(GridError::Format(format!("degree {degree} with {ncomp} components")));
    }
    let grid = GridSpec::new(n, scheme)?;
    let expected = HEADER_LEN + 8 * ncomp * grid.len();
    if bytes.len() != expected {
        return Err(GridError::Format(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let comps = (0..ncomp).map(|_| values.by_ref().take(grid.len()).collect()).collect();
    Ok(KFormField::from_components(&grid, degree, comps))
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn write(path: &Path, field: &KFormField) -> Result<(), GridError> {
    Ok(write_atomic(path, &encode(field))?)
}

pub fn read(path: &Path, scheme: Scheme) -> Result<KFormField, GridError> {
    decode(&fs::read(path)?, scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_band_limited, rng};

    #[test]
    fn header_bytes() {
        let g = GridSpec::new(4, Scheme::Spectral).unwrap();
        let mut f = KFormField::zeros(&g, 2);
        f.components_mut()[0][1] = 1.5;
        let b = encode(&f);
        assert_eq!(&b[..20], &[b'D', b'O', b'N', b'F', 1, 0, 0, 0, 4, 0, 0, 0, 2, 0, 0, 0, 6, 0, 0, 0]);
        assert_eq!(b.len(), 20 + 8 * 6 * 256);
        assert_eq!(&b[28..36], &1.5f64.to_le_bytes());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = GridSpec::new(8, Scheme::Spectral).unwrap();
        let f = random_band_limited(&g, 2, 2, &mut rng(1));
        let dir = std::env::temp_dir().join(format!("donf-test-{}", std::process::id()));
        let path = dir.join("rho.donf");
        write(&path, &f).unwrap();
        let back = read(&path, Scheme::Spectral).unwrap();
        for (a, b) in f.components().iter().zip(back.components()) {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_corruption() {
        let g = GridSpec::new(4, Scheme::Spectral).unwrap();
        let mut b = encode(&KFormField::zeros(&g, 1));
        assert!(decode(&b[..b.len() - 1], Scheme::Spectral).is_err());
        b[16] = 5;
        assert!(decode(&b, Scheme::Spectral).is_err());
        b[0] = b'X';
        assert!(decode(&b, Scheme::Spectral).is_err());
    }
}
