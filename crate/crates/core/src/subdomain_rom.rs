//! Separated approximation of the interior solutions, driven by the interface ROM.
//!
//! Substituting the separated interface solution into
//! `A_II(mu) u_I = f_I(mu) - A_IG(mu) R_j u_G(mu)` keeps the right-hand side
//! affine: every interface mode contributes one term per operator factor.

use crate::complex_vs::{AffineComplexSystem, GreedyOptions, OpCounter, SparseFamily};
use crate::error::Result;
use crate::interface_rom::InterfaceRom;
use crate::linalg::CsrMatrix;
use crate::mesh_fem::SubdomainBlocks;
use crate::schur_dd::{CoefficientContext, CoefficientExpr, CoefficientMap, Part, ReducedModel, ZetaSource};

/// Interior system of subdomain `j` with the interface-driven affine load.
///
/// Real load terms: `beta^Re_q f_I^q`, `alpha_n zeta^Re_k (-A_IG^n c^Re_k)`,
/// `gamma zeta^Im_k (M_IG c^Im_k)`. Imaginary load terms: `beta^Im_q f_I^q`,
/// `alpha_n zeta^Im_k (-A_IG^n c^Im_k)`, `gamma zeta^Re_k (-M_IG c^Re_k)`.
pub fn subdomain_system(
    blocks: &SubdomainBlocks,
    interface: &InterfaceRom,
) -> Result<(AffineComplexSystem<SparseFamily>, CoefficientMap)> {
    let family = SparseFamily::new(
        blocks.a.iter().map(|b| b.ii.clone()).collect(),
        vec![blocks.m.ii.clone()],
        1,
    )?;
    let mut rhs_re = blocks.f_i.clone();
    let mut rhs_im = blocks.f_i.clone();
    let mut ex_re: Vec<CoefficientExpr> = blocks.source_ids.iter().map(|&q| CoefficientExpr::BetaRe(q)).collect();
    let mut ex_im: Vec<CoefficientExpr> = blocks.source_ids.iter().map(|&q| CoefficientExpr::BetaIm(q)).collect();
    let gather = |c: &[f64]| -> Vec<f64> { blocks.restriction.iter().map(|&g| c[g]).collect() };
    let apply = |m: &CsrMatrix, v: &[f64], s: f64| -> Vec<f64> { m.mul_vec(v).into_iter().map(|x| s * x).collect() };
    let src = ZetaSource::Interface;
    for (k, mode) in interface.model.solution.modes.iter().enumerate() {
        let c_re = gather(&mode.c_re);
        let c_im = gather(&mode.c_im);
        for (set, &t) in blocks.a.iter().zip(&blocks.term_ids) {
            rhs_re.push(apply(&set.ig, &c_re, -1.0));
            ex_re.push(CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Re });
            rhs_im.push(apply(&set.ig, &c_im, -1.0));
            ex_im.push(CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Im });
        }
        rhs_re.push(apply(&blocks.m.ig, &c_im, 1.0));
        ex_re.push(CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Im });
        rhs_im.push(apply(&blocks.m.ig, &c_re, -1.0));
        ex_im.push(CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Re });
    }
    let map = CoefficientMap {
        op_re: blocks.term_ids.iter().map(|&t| CoefficientExpr::Alpha(t)).collect(),
        op_im: vec![CoefficientExpr::Gamma],
        rhs_re: ex_re,
        rhs_im: ex_im,
    };
    Ok((AffineComplexSystem::new(family, rhs_re, rhs_im)?, map))
}

/// Runs the greedy on one interior system. `contexts` must carry the
/// interface coefficients of each training point.
pub fn build_subdomain_rom(
    blocks: &SubdomainBlocks,
    interface: &InterfaceRom,
    contexts: &[CoefficientContext],
    opts: &GreedyOptions,
) -> Result<ReducedModel> {
    let (system, map) = subdomain_system(blocks, interface)?;
    let samples: Vec<_> = contexts.iter().map(|c| map.values(c, &mut OpCounter::default())).collect();
    let solution = crate::complex_vs::vs_greedy(&system, &samples, opts)?;
    log::info!(
        "subdomain {} ROM: {} terms over {} interior dofs",
        blocks.subdomain + 1,
        solution.n_terms(),
        blocks.n_interior()
    );
    Ok(ReducedModel { map, solution })
}
