//! OBJ and binary STL readers (positions and connectivity only) and the
//! built-in mesh names accepted on the command line.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt};
use smectic_core::geom::Vec3;
use smectic_core::mesh::{ellipsoid, icosphere, SurfaceMesh};

use crate::error::{Error, Result};

/// Subdivision level of the built-in sphere and ellipsoid (5120 faces).
pub const DEFAULT_LEVEL: usize = 4;

/// Wavefront OBJ: `v x y z` and `f a b c ...` records; polygons are fanned
/// into triangles, `a/b/c` index forms and negative indices are accepted.
pub fn read_obj<R: Read>(reader: R) -> Result<SurfaceMesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let bad = |msg: &str| Error::Mesh(format!("line {}: {msg}", lineno + 1));
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let xyz: Vec<f64> = parts
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("unparsable vertex coordinate"))?;
                if xyz.len() != 3 || xyz.iter().any(|c| !c.is_finite()) {
                    return Err(bad("vertex needs three finite coordinates"));
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| bad("unparsable face index"))?;
                    let n = vertices.len() as i64;
                    let resolved = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || resolved < 0 || resolved >= n {
                        return Err(bad("face index out of range"));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(bad("face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(SurfaceMesh::new(vertices, triangles)?)
}

/// Binary STL: 80-byte header, little-endian `u32` count, then 50 bytes per
/// facet. Facet normals are ignored; vertices are merged by exact equality.
pub fn read_stl<R: Read>(mut reader: R) -> Result<SurfaceMesh> {
    let mut header = [0u8; 80];
    reader
        .read_exact(&mut header)
        .map_err(|_| Error::Mesh("truncated STL header".into()))?;
    let count = reader
        .read_u32::<LittleEndian>()
        .map_err(|_| Error::Mesh("missing STL facet count".into()))? as usize;
    let mut vertices = Vec::new();
    let mut lookup: HashMap<[u64; 3], usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(count);
    for f in 0..count {
        let truncated = |_| Error::Mesh(format!("STL truncated in facet {f}"));
        let mut rec = [0f32; 12];
        reader.read_f32_into::<LittleEndian>(&mut rec).map_err(truncated)?;
        reader.read_u16::<LittleEndian>().map_err(truncated)?;
        let mut tri = [0usize; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let p = [rec[3 + 3 * c] as f64, rec[4 + 3 * c] as f64, rec[5 + 3 * c] as f64];
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Mesh(format!("non-finite vertex in facet {f}")));
            }
            // +0.0 and -0.0 are the same point
            let key = p.map(|x| (x + 0.0).to_bits());
            *slot = *lookup.entry(key).or_insert_with(|| {
                vertices.push(Vec3::new(p[0], p[1], p[2]));
                vertices.len() - 1
            });
        }
        triangles.push(tri);
    }
    Ok(SurfaceMesh::new(vertices, triangles)?)
}

/// A mesh file (`.obj` or `.stl`) or a built-in name: `sphere`, `sphere:L`
/// (unit icosphere with `L` subdivisions) or `ellipsoid:a,b,c`.
pub fn load_mesh(name: &str) -> Result<SurfaceMesh> {
    if name == "sphere" {
        return Ok(icosphere(DEFAULT_LEVEL, 1.0)?);
    }
    if let Some(level) = name.strip_prefix("sphere:") {
        let l: usize = level
            .parse()
            .map_err(|_| Error::Mesh(format!("bad sphere level `{level}`")))?;
        if l > 7 {
            return Err(Error::Mesh("sphere level above 7".into()));
        }
        return Ok(icosphere(l, 1.0)?);
    }
    if let Some(axes) = name.strip_prefix("ellipsoid:") {
        let a: Vec<f64> = axes
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Mesh(format!("bad ellipsoid axes `{axes}`")))?;
        if a.len() != 3 {
            return Err(Error::Mesh("ellipsoid needs three semi-axes".into()));
        }
        return Ok(ellipsoid(DEFAULT_LEVEL, [a[0], a[1], a[2]])?);
    }
    let path = Path::new(name);
    let file = std::fs::File::open(path).map_err(|e| Error::Mesh(format!("{name}: {e}")))?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("obj") => read_obj(file),
        Some("stl") => read_stl(file),
        _ => Err(Error::Mesh(format!("{name}: unknown mesh format (expected .obj or .stl)"))),
    }
}
