use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Indexed triangle mesh in millimetres; triangles wind counter-clockwise
/// seen from outside. May hold several disjoint shells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Appends `other` as additional shell(s).
    pub fn merge(&mut self, other: &TriMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + off, t[1] + off, t[2] + off]),
        );
    }

    pub fn flipped(&self) -> TriMesh {
        TriMesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
        }
    }

    pub fn triangle(&self, i: usize) -> [[f64; 3]; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0] as usize],
            self.vertices[t[1] as usize],
            self.vertices[t[2] as usize],
        ]
    }

    /// Signed volume by the divergence theorem.
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                dot(a, cross(b, c)) / 6.0
            })
            .sum()
    }

    /// Splits into edge-connected shells, each with compacted vertices.
    pub fn shells(&self) -> Vec<TriMesh> {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for t in &self.triangles {
            let a = find(&mut parent, t[0] as usize);
            for &v in &t[1..] {
                let b = find(&mut parent, v as usize);
                if a != b {
                    parent[b] = a;
                }
            }
        }
        let mut shell_of_root: HashMap<usize, usize> = HashMap::new();
        let mut shells: Vec<(Vec<u32>, TriMesh)> = Vec::new();
        for t in &self.triangles {
            let root = find(&mut parent, t[0] as usize);
            let next = shells.len();
            let s = *shell_of_root.entry(root).or_insert(next);
            if s == shells.len() {
                shells.push((vec![u32::MAX; n], TriMesh::default()));
            }
            let (remap, mesh) = &mut shells[s];
            let mut tri = [0u32; 3];
            for (k, &v) in t.iter().enumerate() {
                if remap[v as usize] == u32::MAX {
                    remap[v as usize] = mesh.vertices.len() as u32;
                    mesh.vertices.push(self.vertices[v as usize]);
                }
                tri[k] = remap[v as usize];
            }
            mesh.triangles.push(tri);
        }
        shells.into_iter().map(|(_, m)| m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    /// Every directed edge is matched by exactly one opposite edge.
    pub watertight: bool,
    pub volume_mm3: f64,
    /// `V - E + F` over referenced vertices; 2 per closed genus-0 shell.
    pub euler: i64,
    pub degenerate_triangles: usize,
    pub shells: usize,
}

pub fn mesh_diagnostics(mesh: &TriMesh) -> MeshDiagnostics {
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.triangles.len() * 3);
    let mut used = vec![false; mesh.vertices.len()];
    let mut degenerate = 0;
    for (i, t) in mesh.triangles.iter().enumerate() {
        for k in 0..3 {
            *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            used[t[k] as usize] = true;
        }
        let [a, b, c] = mesh.triangle(i);
        let n = cross(sub(b, a), sub(c, a));
        let longest = [sub(b, a), sub(c, b), sub(a, c)]
            .iter()
            .map(|e| dot(*e, *e))
            .fold(0.0, f64::max);
        if t[0] == t[1]
            || t[1] == t[2]
            || t[0] == t[2]
            || dot(n, n).sqrt() <= 1e-12 * longest.max(1e-300)
        {
            degenerate += 1;
        }
    }
    let watertight = !directed.is_empty()
        && directed
            .iter()
            .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1));
    let mut undirected: Vec<(u32, u32)> = directed
        .keys()
        .map(|&(a, b)| (a.min(b), a.max(b)))
        .collect();
    undirected.sort_unstable();
    undirected.dedup();
    let v = used.iter().filter(|&&u| u).count() as i64;
    MeshDiagnostics {
        watertight,
        volume_mm3: mesh.volume(),
        euler: v - undirected.len() as i64 + mesh.triangles.len() as i64,
        degenerate_triangles: degenerate,
        shells: if mesh.triangles.is_empty() {
            0
        } else {
            mesh.shells().len()
        },
    }
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
pub(crate) fn unit_cube() -> TriMesh {
    let vertices = vec![
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [1.0, 1.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0],
        [1.0, 1.0, 1.0],
        [0.0, 1.0, 1.0],
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriMesh {
        vertices,
        triangles,
    }
}
