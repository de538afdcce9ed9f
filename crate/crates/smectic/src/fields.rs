//! Flat binary dump of the final `(psi, n)` grid fields.
//!
//! All numbers are little-endian. Layout:
//!
//! | offset | type       | content                                        |
//! |--------|------------|------------------------------------------------|
//! | 0      | `[u8; 8]`  | magic `SMFIELD\0`                              |
//! | 8      | `u32`      | format version (1)                             |
//! | 12     | `u32`      | domain kind: 0 box, 1 ball                     |
//! | 16     | `f64 x 3`  | box side lengths, or `[radius, 0, 0]`          |
//! | 40     | `u64 x 3`  | node counts `nx, ny, nz`                       |
//! | 64     | `f64`      | grid spacing `dx`                              |
//! | 72     | `f64 x 3`  | position of node `(0, 0, 0)`                   |
//! | 96     | `f64 x 2N` | `psi` as interleaved `re, im` per node         |
//! |        | `f64 x 3N` | `n` as interleaved `x, y, z` per node          |
//!
//! with `N = nx ny nz` and node `(i, j, k)` stored at `i + nx (j + ny k)`.
//! Nodes outside the domain carry `psi = 0` and the extended director.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use smectic_core::geom::Vec3;
use smectic_core::ldg::{Domain, LdGGrid, LdGState};
use smectic_core::C64;

pub const MAGIC: [u8; 8] = *b"SMFIELD\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 96;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub domain: Domain,
    pub dims: [usize; 3],
    pub dx: f64,
    pub origin: Vec3,
    pub psi: Vec<C64>,
    pub n: Vec<Vec3>,
}

impl FieldFile {
    pub fn from_state(grid: &LdGGrid, s: &LdGState) -> Self {
        FieldFile {
            domain: grid.domain,
            dims: grid.dims(),
            dx: grid.h,
            origin: grid.origin,
            psi: s.psi.clone(),
            n: s.n.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let nodes = self.psi.len();
        let mut out = Vec::with_capacity(HEADER_LEN + 40 * nodes);
        self.write(&mut out).expect("writing to memory");
        out
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        let (kind, params) = match self.domain {
            Domain::Box(l) => (0, l),
            Domain::Ball(r) => (1, [r, 0.0, 0.0]),
        };
        w.write_u32::<LittleEndian>(kind)?;
        for x in params {
            w.write_f64::<LittleEndian>(x)?;
        }
        for d in self.dims {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        w.write_f64::<LittleEndian>(self.dx)?;
        for x in self.origin.0 {
            w.write_f64::<LittleEndian>(x)?;
        }
        for z in &self.psi {
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
        for v in &self.n {
            for x in v.0 {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self, String> {
        let io = |e: std::io::Error| format!("truncated field file: {e}");
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if magic != MAGIC {
            return Err("not a field file (bad magic)".into());
        }
        let version = r.read_u32::<LittleEndian>().map_err(io)?;
        if version != VERSION {
            return Err(format!("unsupported field file version {version}"));
        }
        let kind = r.read_u32::<LittleEndian>().map_err(io)?;
        let mut params = [0.0; 3];
        r.read_f64_into::<LittleEndian>(&mut params).map_err(io)?;
        let domain = match kind {
            0 => Domain::Box(params),
            1 => Domain::Ball(params[0]),
            k => return Err(format!("unknown domain kind {k}")),
        };
        let mut dims = [0usize; 3];
        for d in dims.iter_mut() {
            *d = r.read_u64::<LittleEndian>().map_err(io)? as usize;
        }
        let dx = r.read_f64::<LittleEndian>().map_err(io)?;
        let mut o = [0.0; 3];
        r.read_f64_into::<LittleEndian>(&mut o).map_err(io)?;
        let nodes = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n <= 1 << 32)
            .ok_or("implausible grid dimensions")?;
        let mut raw = vec![0.0; 5 * nodes];
        r.read_f64_into::<LittleEndian>(&mut raw).map_err(io)?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra).map_err(io)? != 0 {
            return Err("trailing bytes after payload".into());
        }
        let (p, n) = raw.split_at(2 * nodes);
        Ok(FieldFile {
            domain,
            dims,
            dx,
            origin: Vec3(o),
            psi: p.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect(),
            n: n.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use smectic_core::geom::DirectorRotation;

    #[test]
    fn roundtrip_and_layout() {
        let grid = LdGGrid::ball(1.0, 6).unwrap();
        let s = LdGState::initial(&grid, DirectorRotation::identity(2.0), 0.3, 5);
        let f = FieldFile::from_state(&grid, &s);
        let bytes = f.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 40 * 343);
        assert_eq!(&bytes[..8], b"SMFIELD\0");
        assert_eq!(u64::from_le_bytes(bytes[40..48].try_into().unwrap()), 7);
        assert_eq!(f64::from_le_bytes(bytes[64..72].try_into().unwrap()), grid.h);
        let v = 100;
        let off = HEADER_LEN + 16 * v;
        assert_eq!(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()), s.psi[v].re);
        let back = FieldFile::read(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(FieldFile::read(&mut &bytes[..bytes.len() - 1]).is_err());
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(FieldFile::read(&mut longer.as_slice()).is_err());
    }
}
