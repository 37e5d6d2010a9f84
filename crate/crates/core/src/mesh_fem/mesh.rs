use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Structured P1 triangulation of the unit square.
///
/// Vertex `(i, j)` sits at `(i / nx, j / ny)` with index `j * (nx + 1) + i`.
/// Each cell is split along its lower-left to upper-right diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh2D {
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_flags: Vec<bool>,
}

pub fn build_mesh(nx: usize, ny: usize) -> Result<Mesh2D> {
    if nx < 2 || ny < 2 {
        return Err(Error::MeshTooCoarse { nx, ny });
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut boundary_flags = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([i as f64 / nx as f64, j as f64 / ny as f64]);
            boundary_flags.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Ok(Mesh2D {
        nx,
        ny,
        vertices,
        triangles,
        boundary_flags,
    })
}

impl Mesh2D {
    /// Mesh size along `x1`.
    pub fn h(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Lattice coordinates `(i, j)` of a vertex.
    pub fn lattice(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Free (non-Dirichlet) dof index of every vertex, in lexicographic order.
    pub fn dof_map(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.boundary_flags
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }

    pub fn n_free(&self) -> usize {
        self.boundary_flags.iter().filter(|&&b| !b).count()
    }

    /// Vertex index of every free dof.
    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices())
            .filter(|&v| !self.boundary_flags[v])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_on_smallest_mesh() {
        let m = build_mesh(2, 2).unwrap();
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        assert_eq!(m.n_free(), 1);
    }

    #[test]
    fn desk_and_full_scale_grids() {
        assert!((build_mesh(50, 50).unwrap().h() - 0.02).abs() < 1e-15);
        assert!((build_mesh(20, 20).unwrap().h() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rejects_coarse() {
        assert!(matches!(build_mesh(1, 4), Err(Error::MeshTooCoarse { .. })));
    }

    #[test]
    fn orientation_and_boundary() {
        let m = build_mesh(5, 3).unwrap();
        assert_eq!(m.vertices.len(), 24);
        assert_eq!(m.triangles.len(), 30);
        let total: f64 = (0..m.triangles.len()).map(|t| m.signed_area(t)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((0..m.triangles.len()).all(|t| m.signed_area(t) > 0.0));
        for (v, p) in m.vertices.iter().enumerate() {
            let on = p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
            assert_eq!(on, m.boundary_flags[v]);
        }
    }
}
