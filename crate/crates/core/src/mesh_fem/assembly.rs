use serde::{Deserialize, Serialize};

use super::mesh::Mesh2D;
use super::partition::DomainPartition;
use super::problem::{OperatorSpec, ProblemDefinition, SourceSpec, SpaceProfile, TermKind};
use crate::error::{Error, Result};
use crate::frequency::ParameterPoint;
use crate::linalg::{CsrMatrix, C64};

/// Subdomain of a triangle, decided by its centroid.
pub fn triangle_subdomain(mesh: &Mesh2D, t: usize) -> usize {
    usize::from(mesh.centroid(t)[0] > 0.5)
}

/// P1 element stiffness and mass matrices of triangle `t`.
pub fn element_matrices(mesh: &Mesh2D, t: usize) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let tri = mesh.triangles[t];
    let p = tri.map(|v| mesh.vertices[v]);
    let area = mesh.signed_area(t);
    let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
    let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
            m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (k, m)
}

/// Vertex-level (no Dirichlet elimination) matrix of one bilinear form,
/// restricted to triangles of `subdomain` when given.
pub fn assemble_vertex_matrix(mesh: &Mesh2D, kind: TermKind, subdomain: Option<usize>) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if subdomain.is_some_and(|s| s != triangle_subdomain(mesh, t)) {
            continue;
        }
        let (k, m) = element_matrices(mesh, t);
        let e = match kind {
            TermKind::Diffusion => k,
            TermKind::Reaction => m,
        };
        for i in 0..3 {
            for j in 0..3 {
                trip.push((tri[i], tri[j], e[i][j]));
            }
        }
    }
    let n = mesh.n_vertices();
    CsrMatrix::from_triplets(n, n, &trip)
}

/// Vertex-level load vector `int h psi_i` with edge-midpoint quadrature.
pub fn assemble_vertex_load(mesh: &Mesh2D, space: &SpaceProfile, subdomain: Option<usize>) -> Vec<f64> {
    let mut f = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if subdomain.is_some_and(|s| s != triangle_subdomain(mesh, t)) {
            continue;
        }
        let area = mesh.signed_area(t);
        let p = tri.map(|v| mesh.vertices[v]);
        let mid = |a: usize, b: usize| [(p[a][0] + p[b][0]) / 2.0, (p[a][1] + p[b][1]) / 2.0];
        let h01 = space.value(mid(0, 1));
        let h12 = space.value(mid(1, 2));
        let h02 = space.value(mid(0, 2));
        f[tri[0]] += area / 6.0 * (h01 + h02);
        f[tri[1]] += area / 6.0 * (h01 + h12);
        f[tri[2]] += area / 6.0 * (h12 + h02);
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorTerm {
    pub spec: OperatorSpec,
    pub matrix: CsrMatrix,
}

/// `A(mu) = sum_t alpha_t(xi) A_t + i omega M` on the free dofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineOperator {
    pub terms: Vec<OperatorTerm>,
    pub mass: CsrMatrix,
    /// Mass restricted to the triangles of each subdomain; sums to `mass`.
    pub mass_parts: [CsrMatrix; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub spec: SourceSpec,
    pub vector: Vec<f64>,
}

/// `f(mu) = sum_q (Re beta_q + i Im beta_q) F_q`: the real and imaginary
/// term lists share one load vector per source term, so both have length `m_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRhs {
    pub terms: Vec<SourceTerm>,
}

impl AffineOperator {
    pub fn m_a(&self) -> usize {
        self.terms.len()
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    /// Real and imaginary parts of the system matrix at `mu`.
    pub fn evaluate(&self, problem: &ProblemDefinition, mu: &ParameterPoint) -> (CsrMatrix, CsrMatrix) {
        let alphas = problem.alphas(&mu.xi);
        let terms: Vec<(f64, &CsrMatrix)> = alphas
            .iter()
            .zip(&self.terms)
            .map(|(&a, t)| (a, &t.matrix))
            .collect();
        (
            CsrMatrix::linear_combination(&terms),
            self.mass.scaled(problem.gamma(mu)),
        )
    }
}

impl AffineRhs {
    pub fn m_b(&self) -> usize {
        self.terms.len()
    }

    pub fn evaluate(&self, problem: &ProblemDefinition, mu: &ParameterPoint) -> Vec<C64> {
        let n = self.terms.first().map_or(0, |t| t.vector.len());
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (q, t) in self.terms.iter().enumerate() {
            let b = problem.beta(q, mu);
            for (o, &v) in out.iter_mut().zip(&t.vector) {
                *o += b * v;
            }
        }
        out
    }
}

/// Assembles every parameter-independent matrix and vector on the free dofs.
pub fn assemble(problem: &ProblemDefinition, mesh: &Mesh2D) -> Result<(AffineOperator, AffineRhs)> {
    problem.validate()?;
    if mesh.nx % 2 != 0 {
        return Err(Error::InterfaceMisaligned(mesh.nx));
    }
    let free = mesh.free_vertices();
    let restrict = |m: CsrMatrix| m.submatrix(&free, &free);
    let terms = problem
        .operator_terms
        .iter()
        .map(|spec| OperatorTerm {
            spec: *spec,
            matrix: restrict(assemble_vertex_matrix(mesh, spec.kind, Some(spec.subdomain))),
        })
        .collect();
    let mass_parts = [0, 1].map(|j| restrict(assemble_vertex_matrix(mesh, TermKind::Reaction, Some(j))));
    let mass = CsrMatrix::linear_combination(&[(1.0, &mass_parts[0]), (1.0, &mass_parts[1])]);
    let sources = problem
        .sources
        .iter()
        .map(|spec| {
            let full = assemble_vertex_load(mesh, &spec.space, Some(spec.subdomain));
            SourceTerm {
                spec: *spec,
                vector: free.iter().map(|&v| full[v]).collect(),
            }
        })
        .collect();
    log::debug!(
        "assembled {} on {}x{}: {} free dofs, m_a = {}, m_b = {}",
        problem.id.name(),
        mesh.nx,
        mesh.ny,
        free.len(),
        problem.operator_terms.len(),
        problem.sources.len()
    );
    Ok((
        AffineOperator {
            terms,
            mass,
            mass_parts,
        },
        AffineRhs { terms: sources },
    ))
}

/// The four blocks of one matrix with respect to (interior, interface) of a subdomain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSet {
    pub ii: CsrMatrix,
    pub ig: CsrMatrix,
    pub gi: CsrMatrix,
    pub gg: CsrMatrix,
}

impl BlockSet {
    fn extract(m: &CsrMatrix, interior: &[usize], interface: &[usize]) -> Self {
        Self {
            ii: m.submatrix(interior, interior),
            ig: m.submatrix(interior, interface),
            gi: m.submatrix(interface, interior),
            gg: m.submatrix(interface, interface),
        }
    }
}

/// Block views of the affine data seen by one subdomain. Interface rows and
/// columns use the subdomain's local interface numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainBlocks {
    pub subdomain: usize,
    /// Global operator-term index of each entry in `a`.
    pub term_ids: Vec<usize>,
    pub a: Vec<BlockSet>,
    pub m: BlockSet,
    /// Global source-term index of each entry in `f_i` / `f_g`.
    pub source_ids: Vec<usize>,
    pub f_i: Vec<Vec<f64>>,
    pub f_g: Vec<Vec<f64>>,
    /// Local interface index to global interface index.
    pub restriction: Vec<usize>,
}

impl SubdomainBlocks {
    pub fn n_interior(&self) -> usize {
        self.m.ii.nrows()
    }

    pub fn n_interface(&self) -> usize {
        self.m.gg.nrows()
    }

    pub fn m_a(&self) -> usize {
        self.term_ids.len()
    }

    pub fn m_b(&self) -> usize {
        self.source_ids.len()
    }
}

pub fn extract_blocks(
    op: &AffineOperator,
    rhs: &AffineRhs,
    part: &DomainPartition,
    j: usize,
) -> Result<SubdomainBlocks> {
    if j > 1 {
        return Err(Error::IndexOutOfRange {
            what: "subdomain",
            index: j,
            len: 2,
        });
    }
    if op.dim() != part.n_free {
        return Err(Error::DimensionMismatch {
            what: "operator size against partition",
            expected: part.n_free,
            got: op.dim(),
        });
    }
    let interior = &part.interior_dofs[j];
    let restriction = part.restriction_maps[j].clone();
    let interface: Vec<usize> = restriction
        .iter()
        .map(|&g| {
            part.interface_dofs.get(g).copied().ok_or(Error::IndexOutOfRange {
                what: "interface index",
                index: g,
                len: part.n_interface(),
            })
        })
        .collect::<Result<_>>()?;
    let mut term_ids = Vec::new();
    let mut a = Vec::new();
    for (t, term) in op.terms.iter().enumerate() {
        if term.spec.subdomain == j {
            term_ids.push(t);
            a.push(BlockSet::extract(&term.matrix, interior, &interface));
        }
    }
    let mut source_ids = Vec::new();
    let mut f_i = Vec::new();
    let mut f_g = Vec::new();
    for (q, s) in rhs.terms.iter().enumerate() {
        if s.vector.len() != part.n_free {
            return Err(Error::DimensionMismatch {
                what: "load vector",
                expected: part.n_free,
                got: s.vector.len(),
            });
        }
        if s.spec.subdomain == j {
            source_ids.push(q);
            f_i.push(part.gather(&s.vector, interior));
            f_g.push(part.gather(&s.vector, &interface));
        }
    }
    Ok(SubdomainBlocks {
        subdomain: j,
        term_ids,
        a,
        m: BlockSet::extract(&op.mass_parts[j], interior, &interface),
        source_ids,
        f_i,
        f_g,
        restriction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::mesh::build_mesh;
    use std::f64::consts::PI;

    #[test]
    fn patch_test_and_mass_totals() {
        let mesh = build_mesh(6, 4).unwrap();
        let k = assemble_vertex_matrix(&mesh, TermKind::Diffusion, None);
        let ones = vec![1.0; mesh.n_vertices()];
        assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        let m = assemble_vertex_matrix(&mesh, TermKind::Reaction, None);
        let rows = m.mul_vec(&ones);
        assert!((rows.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        // lumped nodal area: one third of the adjacent triangle areas
        let mut lumped = vec![0.0; mesh.n_vertices()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for &v in tri {
                lumped[v] += mesh.signed_area(t) / 3.0;
            }
        }
        for (a, b) in rows.iter().zip(&lumped) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(k.is_symmetric(1e-14) && m.is_symmetric(1e-16));
    }

    #[test]
    fn heat_unit_parameters_give_piecewise_stiffness() {
        let mesh = build_mesh(4, 4).unwrap();
        let p = ProblemDefinition::heat();
        let (op, _) = assemble(&p, &mesh).unwrap();
        let free = mesh.free_vertices();
        let k1 = assemble_vertex_matrix(&mesh, TermKind::Diffusion, Some(0)).submatrix(&free, &free);
        let k2 = assemble_vertex_matrix(&mesh, TermKind::Diffusion, Some(1)).submatrix(&free, &free);
        let expect = CsrMatrix::linear_combination(&[(1.0, &k1), (2.0, &k2)]).to_dense();
        let (re, im) = op.evaluate(&p, &ParameterPoint::new(0.0, vec![1.0, 1.0]));
        assert_eq!(re.to_dense(), expect);
        assert!(im.to_dense().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn energy_matches_elementwise_quadrature() {
        let mesh = build_mesh(8, 8).unwrap();
        let p = ProblemDefinition::heat();
        let xi = [1.4, 1.9];
        let (op, _) = assemble(&p, &mesh).unwrap();
        let (re, _) = op.evaluate(&p, &ParameterPoint::new(0.0, xi.to_vec()));
        let s = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        let free = mesh.free_vertices();
        let v: Vec<f64> = free.iter().map(|&i| s(mesh.vertices[i])).collect();
        let quad = dot(&v, &re.mul_vec(&v));
        // independent oracle: gradient of the interpolant is constant per triangle
        let mut oracle = 0.0;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p3 = tri.map(|k| mesh.vertices[k]);
            let u3 = tri.map(|k| s(mesh.vertices[k]));
            let det = (p3[1][0] - p3[0][0]) * (p3[2][1] - p3[0][1])
                - (p3[2][0] - p3[0][0]) * (p3[1][1] - p3[0][1]);
            let gx = ((u3[1] - u3[0]) * (p3[2][1] - p3[0][1]) - (u3[2] - u3[0]) * (p3[1][1] - p3[0][1])) / det;
            let gy = ((u3[2] - u3[0]) * (p3[1][0] - p3[0][0]) - (u3[1] - u3[0]) * (p3[2][0] - p3[0][0])) / det;
            let c = if mesh.centroid(t)[0] < 0.5 { xi[0] } else { 2.0 * xi[1] };
            oracle += c * (gx * gx + gy * gy) * det / 2.0;
        }
        assert!((quad - oracle).abs() < 1e-12 * oracle);
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn rd2_first_subdomain_is_reaction_only() {
        let mesh = build_mesh(4, 4).unwrap();
        let p = ProblemDefinition::rd2();
        let (op, _) = assemble(&p, &mesh).unwrap();
        assert_eq!(op.terms[0].spec.kind, TermKind::Reaction);
        assert_eq!(op.terms[0].matrix, op.mass_parts[0]);
    }

    #[test]
    fn blocks_reassemble_and_transpose() {
        let mesh = build_mesh(6, 6).unwrap();
        let p = ProblemDefinition::rd1();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let part = DomainPartition::new(&mesh).unwrap();
        let blocks = [0, 1].map(|j| extract_blocks(&op, &rhs, &part, j).unwrap());
        for b in &blocks {
            assert_eq!(b.n_interface(), 5);
            for s in b.a.iter().chain(std::iter::once(&b.m)) {
                assert_eq!(s.gi, s.ig.transpose());
            }
        }
        // every term lives in one subdomain: scatter its blocks back
        for (t, term) in op.terms.iter().enumerate() {
            let j = term.spec.subdomain;
            let b = &blocks[j];
            let k = b.term_ids.iter().position(|&x| x == t).unwrap();
            let set = &b.a[k];
            let full = term.matrix.to_dense();
            let interior = &part.interior_dofs[j];
            let gamma = &part.interface_dofs;
            for (ri, &r) in interior.iter().enumerate() {
                for (ci, &c) in interior.iter().enumerate() {
                    assert_eq!(full.get(r, c), set.ii.get(ri, ci));
                }
                for (ci, &c) in gamma.iter().enumerate() {
                    assert_eq!(full.get(r, c), set.ig.get(ri, ci));
                }
            }
            for (ri, &r) in gamma.iter().enumerate() {
                for (ci, &c) in gamma.iter().enumerate() {
                    assert_eq!(full.get(r, c), set.gg.get(ri, ci));
                }
            }
            // rows of the other subdomain's interior are untouched by this term
            for &r in &part.interior_dofs[1 - j] {
                assert!(term.matrix.row(r).all(|(_, v)| v == 0.0));
            }
        }
        assert!(extract_blocks(&op, &rhs, &part, 2).is_err());
    }
}
