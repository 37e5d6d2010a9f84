//! Separated approximation of the interface solution `S(mu) u_G = F(mu)`,
//! built on the affine Schur complement and load.

use serde::{Deserialize, Serialize};

use crate::complex_vs::{AffineComplexSystem, DenseFamily, GreedyOptions, OpCounter, Zetas};
use crate::error::Result;
use crate::linalg::C64;
use crate::schur_dd::{AffineLoad, AffineSchur, CoefficientContext, CoefficientMap, ReducedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceRom {
    pub model: ReducedModel,
}

/// The dense affine interface system and the coefficient map of its terms.
pub fn interface_system(s: &AffineSchur, f: &AffineLoad) -> Result<(AffineComplexSystem<DenseFamily>, CoefficientMap)> {
    let family = DenseFamily::new(
        s.n_gamma,
        s.real_terms.iter().map(|(_, m)| m.clone()).collect(),
        s.imag_terms.iter().map(|(_, m)| m.clone()).collect(),
    )?;
    let system = AffineComplexSystem::new(
        family,
        f.real_terms.iter().map(|(_, v)| v.clone()).collect(),
        f.imag_terms.iter().map(|(_, v)| v.clone()).collect(),
    )?;
    let map = CoefficientMap {
        op_re: s.real_terms.iter().map(|(e, _)| *e).collect(),
        op_im: s.imag_terms.iter().map(|(e, _)| *e).collect(),
        rhs_re: f.real_terms.iter().map(|(e, _)| *e).collect(),
        rhs_im: f.imag_terms.iter().map(|(e, _)| *e).collect(),
    };
    Ok((system, map))
}

/// Runs the greedy on the interface system. `contexts` must already carry the
/// `X_j` and `x_j` coefficients of each training point.
pub fn build_interface_rom(
    s: &AffineSchur,
    f: &AffineLoad,
    contexts: &[CoefficientContext],
    opts: &GreedyOptions,
) -> Result<InterfaceRom> {
    let (system, map) = interface_system(s, f)?;
    let samples: Vec<_> = contexts.iter().map(|c| map.values(c, &mut OpCounter::default())).collect();
    let solution = crate::complex_vs::vs_greedy(&system, &samples, opts)?;
    log::info!(
        "interface ROM: {} terms, n_gamma = {}, final relative residual {:.3e}",
        solution.n_terms(),
        s.n_gamma,
        solution.status.history.last().copied().unwrap_or(0.0)
    );
    Ok(InterfaceRom {
        model: ReducedModel { map, solution },
    })
}

impl InterfaceRom {
    pub fn n_terms(&self) -> usize {
        self.model.n_terms()
    }

    pub fn n_gamma(&self) -> usize {
        self.model.solution.dim
    }

    /// Expansion coefficients only; no work proportional to `n_gamma`.
    pub fn coefficients(&self, ctx: &CoefficientContext, counter: &mut OpCounter) -> Zetas {
        self.model.zetas(ctx, counter)
    }

    pub fn evaluate(&self, ctx: &CoefficientContext) -> Vec<C64> {
        let z = self.coefficients(ctx, &mut OpCounter::default());
        self.model.solution.expand_complex(&z)
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            model: self.model.truncated(n),
        }
    }
}
