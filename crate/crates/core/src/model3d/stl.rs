use std::collections::HashMap;
use std::path::Path;

use super::mesh::{cross, dot, sub};
use super::{ModelError, TriMesh};

/// First bytes of every STL header written here; the rest is zero padding.
pub const STL_HEADER: &[u8] = b"keyforge";

/// Encodes a binary STL. Vertices are rounded to `f32` first and normals
/// come from the winding of the rounded triangle, so writing a mesh read
/// back from these bytes reproduces them exactly.
pub fn stl_to_bytes(mesh: &TriMesh) -> Result<Vec<u8>, ModelError> {
    if mesh.is_empty() {
        return Err(ModelError::EmptyMesh);
    }
    let count = u32::try_from(mesh.triangles.len())
        .map_err(|_| ModelError::InvalidParameters("too many triangles for STL".into()))?;
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    let mut header = [0u8; 80];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&count.to_le_bytes());
    for i in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(i).map(|v| v.map(|k| f64::from(k as f32)));
        let n = cross(sub(b, a), sub(c, a));
        let len = dot(n, n).sqrt();
        let n = if len > 0.0 {
            [n[0] / len, n[1] / len, n[2] / len]
        } else {
            [0.0; 3]
        };
        for v in [n, a, b, c] {
            for k in v {
                out.extend_from_slice(&(k as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

pub fn write_stl(mesh: &TriMesh, path: &Path) -> Result<(), ModelError> {
    let bytes = stl_to_bytes(mesh)?;
    std::fs::write(path, bytes)
        .map_err(|e| ModelError::IoFailure(format!("{}: {e}", path.display())))
}

/// Decodes a binary STL. Vertices with identical bit patterns are welded,
/// so a mesh written by [`stl_to_bytes`] comes back with its connectivity.
pub fn stl_from_bytes(bytes: &[u8]) -> Result<TriMesh, ModelError> {
    if bytes.len() < 84 {
        return Err(ModelError::MalformedStl(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let expected = 84 + 50 * count;
    if bytes.len() != expected {
        return Err(ModelError::MalformedStl(format!(
            "{count} triangles need {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let mut mesh = TriMesh::default();
    let mut index: HashMap<[u32; 3], u32> = HashMap::new();
    for t in 0..count {
        let base = 84 + 50 * t + 12;
        let mut tri = [0u32; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let o = base + 12 * k;
            let v = [f(o), f(o + 4), f(o + 8)];
            let key = v.map(f32::to_bits);
            *slot = *index.entry(key).or_insert_with(|| {
                mesh.vertices.push(v.map(f64::from));
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}

pub fn read_stl(path: &Path) -> Result<TriMesh, ModelError> {
    let bytes = std::fs::read(path)
        .map_err(|e| ModelError::IoFailure(format!("{}: {e}", path.display())))?;
    stl_from_bytes(&bytes)
}
