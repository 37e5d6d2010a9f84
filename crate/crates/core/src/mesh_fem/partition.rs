use serde::{Deserialize, Serialize};

use super::mesh::Mesh2D;
use crate::error::{Error, Result};

/// Two-subdomain split of the free dofs along `x1 = interface_coordinate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainPartition {
    pub interface_coordinate: f64,
    pub interior_dofs: [Vec<usize>; 2],
    pub interface_dofs: Vec<usize>,
    /// `restriction_maps[j][local] = global` interface index seen by subdomain `j`.
    pub restriction_maps: [Vec<usize>; 2],
    pub n_free: usize,
}

impl DomainPartition {
    pub fn new(mesh: &Mesh2D) -> Result<Self> {
        if mesh.nx % 2 != 0 {
            return Err(Error::InterfaceMisaligned(mesh.nx));
        }
        let mid = mesh.nx / 2;
        let dofs = mesh.dof_map();
        let mut interior = [Vec::new(), Vec::new()];
        let mut interface = Vec::new();
        for (v, d) in dofs.iter().enumerate() {
            let Some(d) = *d else { continue };
            let (i, _) = mesh.lattice(v);
            match i.cmp(&mid) {
                std::cmp::Ordering::Less => interior[0].push(d),
                std::cmp::Ordering::Greater => interior[1].push(d),
                std::cmp::Ordering::Equal => interface.push(d),
            }
        }
        let ident: Vec<usize> = (0..interface.len()).collect();
        Ok(Self {
            interface_coordinate: 0.5,
            interior_dofs: interior,
            interface_dofs: interface,
            restriction_maps: [ident.clone(), ident],
            n_free: mesh.n_free(),
        })
    }

    pub fn n_interface(&self) -> usize {
        self.interface_dofs.len()
    }

    pub fn n_interior(&self, j: usize) -> usize {
        self.interior_dofs[j].len()
    }

    /// Scatters interface and interior values into one free-dof vector.
    pub fn scatter<T: Copy + Default>(&self, gamma: &[T], interiors: [&[T]; 2]) -> Result<Vec<T>> {
        if gamma.len() != self.n_interface() {
            return Err(Error::DimensionMismatch {
                what: "interface values",
                expected: self.n_interface(),
                got: gamma.len(),
            });
        }
        let mut out = vec![T::default(); self.n_free];
        for (k, &d) in self.interface_dofs.iter().enumerate() {
            out[d] = gamma[k];
        }
        for j in 0..2 {
            if interiors[j].len() != self.n_interior(j) {
                return Err(Error::DimensionMismatch {
                    what: "interior values",
                    expected: self.n_interior(j),
                    got: interiors[j].len(),
                });
            }
            for (k, &d) in self.interior_dofs[j].iter().enumerate() {
                out[d] = interiors[j][k];
            }
        }
        Ok(out)
    }

    pub fn gather<T: Copy>(&self, full: &[T], dofs: &[usize]) -> Vec<T> {
        dofs.iter().map(|&d| full[d]).collect()
    }
}
