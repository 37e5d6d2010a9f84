//! Two-subdomain Schur complement of the complex frequency-domain system and
//! its affine low-rank assembly.
//!
//! With `A_II(mu) X_j(mu) = A_IG(mu)` and `A_II(mu) x_j(mu) = f_I(mu)` per
//! subdomain, the interface problem is `S(mu) u_G = F(mu)` with
//! `S = sum_j R_j^T (A_GG - A_GI X_j) R_j` and `F = sum_j R_j^T (f_G - A_GI x_j)`.
//! Replacing `X_j` and `x_j` by separated expansions turns `S` and `F` into
//! affine sums whose coefficients are products of base coefficients and
//! expansion coefficients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::complex_vs::{
    vs_greedy, AffineComplexSystem, CoefficientValues, GreedyOptions, OpCounter,
    SeparatedSolution, SparseFamily, Zetas,
};
use crate::error::{Error, Result};
use crate::frequency::ParameterPoint;
use crate::linalg::{BandedLu, CsrMatrix, DenseMatrix, C64};
use crate::mesh_fem::{DomainPartition, ProblemDefinition, SubdomainBlocks};

/// Coefficients of the assembled problem at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCoefficients {
    pub alpha: Vec<f64>,
    pub gamma: f64,
    pub beta: Vec<C64>,
}

impl BaseCoefficients {
    pub fn at(problem: &ProblemDefinition, mu: &ParameterPoint) -> Self {
        Self {
            alpha: problem.alphas(&mu.xi),
            gamma: problem.gamma(mu),
            beta: problem.betas(mu),
        }
    }
}

/// Which separated expansion a product coefficient draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaSource {
    /// Expansion of `X_j` (interface-to-interior map) of subdomain `j`.
    Xs(usize),
    /// Expansion of `x_j` (interior load response) of subdomain `j`.
    Xf(usize),
    /// Expansion of the interface solution.
    Interface,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Re,
    Im,
}

/// Symbolic coefficient of one affine term, evaluable against a [`CoefficientContext`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientExpr {
    Alpha(usize),
    Gamma,
    BetaRe(usize),
    BetaIm(usize),
    AlphaTimes {
        term: usize,
        source: ZetaSource,
        mode: usize,
        part: Part,
    },
    GammaTimes {
        source: ZetaSource,
        mode: usize,
        part: Part,
    },
    Zero,
}

/// Everything a coefficient expression may refer to. Expansion coefficients
/// are filled stage by stage during online evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientContext {
    pub base: Option<BaseCoefficients>,
    pub xs: [Zetas; 2],
    pub xf: [Zetas; 2],
    pub interface: Zetas,
}

impl CoefficientContext {
    pub fn new(base: BaseCoefficients) -> Self {
        Self {
            base: Some(base),
            ..Default::default()
        }
    }

    fn base(&self) -> &BaseCoefficients {
        self.base.as_ref().expect("coefficient context without base values")
    }

    fn zeta(&self, source: ZetaSource, mode: usize, part: Part) -> f64 {
        let z = match source {
            ZetaSource::Xs(j) => &self.xs[j],
            ZetaSource::Xf(j) => &self.xf[j],
            ZetaSource::Interface => &self.interface,
        };
        match part {
            Part::Re => z.re[mode],
            Part::Im => z.im[mode],
        }
    }

    pub fn eval(&self, e: &CoefficientExpr) -> f64 {
        let b = self.base();
        match *e {
            CoefficientExpr::Alpha(t) => b.alpha[t],
            CoefficientExpr::Gamma => b.gamma,
            CoefficientExpr::BetaRe(q) => b.beta[q].re,
            CoefficientExpr::BetaIm(q) => b.beta[q].im,
            CoefficientExpr::AlphaTimes {
                term,
                source,
                mode,
                part,
            } => b.alpha[term] * self.zeta(source, mode, part),
            CoefficientExpr::GammaTimes { source, mode, part } => {
                b.gamma * self.zeta(source, mode, part)
            }
            CoefficientExpr::Zero => 0.0,
        }
    }
}

/// Coefficient expressions of the four term lists of an affine complex system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMap {
    pub op_re: Vec<CoefficientExpr>,
    pub op_im: Vec<CoefficientExpr>,
    pub rhs_re: Vec<CoefficientExpr>,
    pub rhs_im: Vec<CoefficientExpr>,
}

impl CoefficientMap {
    pub fn values(&self, ctx: &CoefficientContext, counter: &mut OpCounter) -> CoefficientValues {
        let ev = |v: &[CoefficientExpr]| v.iter().map(|e| ctx.eval(e)).collect::<Vec<_>>();
        counter.scalar_ops += (self.op_re.len() + self.op_im.len() + self.rhs_re.len() + self.rhs_im.len()) as u64;
        CoefficientValues {
            a: ev(&self.op_re),
            b: ev(&self.op_im),
            beta_re: ev(&self.rhs_re),
            beta_im: ev(&self.rhs_im),
        }
    }

    /// Operator coefficients of an interior block `A_II(mu)`.
    fn interior_operator(blocks: &SubdomainBlocks) -> (Vec<CoefficientExpr>, Vec<CoefficientExpr>) {
        (
            blocks.term_ids.iter().map(|&t| CoefficientExpr::Alpha(t)).collect(),
            vec![CoefficientExpr::Gamma],
        )
    }
}

/// A separated expansion together with the coefficient map of its system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub map: CoefficientMap,
    pub solution: SeparatedSolution,
}

impl ReducedModel {
    pub fn zetas(&self, ctx: &CoefficientContext, counter: &mut OpCounter) -> Zetas {
        let c = self.map.values(ctx, counter);
        self.solution.zetas_counted(&c, counter)
    }

    pub fn n_terms(&self) -> usize {
        self.solution.n_terms()
    }

    pub fn truncated(&self, n: usize) -> Self {
        Self {
            map: self.map.clone(),
            solution: self.solution.truncated(n),
        }
    }
}

fn interior_family(blocks: &SubdomainBlocks, columns: usize) -> Result<SparseFamily> {
    SparseFamily::new(
        blocks.a.iter().map(|b| b.ii.clone()).collect(),
        vec![blocks.m.ii.clone()],
        columns,
    )
}

/// The matrix-valued system `A_II(mu) X = A_IG(mu)`, flattened column-major.
pub fn x_system(blocks: &SubdomainBlocks) -> Result<(AffineComplexSystem<SparseFamily>, CoefficientMap)> {
    let ng = blocks.n_interface();
    let family = interior_family(blocks, ng)?;
    let rhs_re = blocks.a.iter().map(|b| b.ig.to_dense().into_vec()).collect();
    let rhs_im = vec![blocks.m.ig.to_dense().into_vec()];
    let (op_re, op_im) = CoefficientMap::interior_operator(blocks);
    let map = CoefficientMap {
        rhs_re: op_re.clone(),
        rhs_im: op_im.clone(),
        op_re,
        op_im,
    };
    Ok((AffineComplexSystem::new(family, rhs_re, rhs_im)?, map))
}

/// The interior load system `A_II(mu) x = f_I(mu)`.
pub fn xf_system(blocks: &SubdomainBlocks) -> Result<(AffineComplexSystem<SparseFamily>, CoefficientMap)> {
    let family = interior_family(blocks, 1)?;
    let (op_re, op_im) = CoefficientMap::interior_operator(blocks);
    let map = CoefficientMap {
        op_re,
        op_im,
        rhs_re: blocks.source_ids.iter().map(|&q| CoefficientExpr::BetaRe(q)).collect(),
        rhs_im: blocks.source_ids.iter().map(|&q| CoefficientExpr::BetaIm(q)).collect(),
    };
    Ok((
        AffineComplexSystem::new(family, blocks.f_i.clone(), blocks.f_i.clone())?,
        map,
    ))
}

fn train(
    system: &AffineComplexSystem<SparseFamily>,
    map: CoefficientMap,
    contexts: &[CoefficientContext],
    opts: &GreedyOptions,
) -> Result<ReducedModel> {
    let samples: Vec<CoefficientValues> = contexts
        .iter()
        .map(|c| map.values(c, &mut OpCounter::default()))
        .collect();
    Ok(ReducedModel {
        solution: vs_greedy(system, &samples, opts)?,
        map,
    })
}

/// Separated approximation of `X_j(mu) = A_II(mu)^-1 A_IG(mu)` from one joint
/// matrix-valued greedy over all interface columns.
pub fn approximate_x(blocks: &SubdomainBlocks, contexts: &[CoefficientContext], opts: &GreedyOptions) -> Result<ReducedModel> {
    let (sys, map) = x_system(blocks)?;
    train(&sys, map, contexts, opts)
}

/// Separated approximation of `x_j(mu) = A_II(mu)^-1 f_I(mu)`.
pub fn approximate_xf(blocks: &SubdomainBlocks, contexts: &[CoefficientContext], opts: &GreedyOptions) -> Result<ReducedModel> {
    let (sys, map) = xf_system(blocks)?;
    train(&sys, map, contexts, opts)
}

/// One block of `sum alpha_n B_n + i gamma M` evaluated as a complex dense matrix.
fn eval_block(terms: &[&CsrMatrix], mass: &CsrMatrix, base: &BaseCoefficients, ids: &[usize]) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(mass.nrows(), mass.ncols());
    for (m, &t) in terms.iter().zip(ids) {
        let a = base.alpha[t];
        for i in 0..m.nrows() {
            for (j, v) in m.row(i) {
                out[(i, j)].re += a * v;
            }
        }
    }
    for i in 0..mass.nrows() {
        for (j, v) in mass.row(i) {
            out[(i, j)].im += base.gamma * v;
        }
    }
    out
}

fn interior_lu(blocks: &SubdomainBlocks, base: &BaseCoefficients) -> Result<BandedLu<C64>> {
    let mut terms: Vec<(C64, &CsrMatrix)> = blocks
        .term_ids
        .iter()
        .zip(&blocks.a)
        .map(|(&t, b)| (C64::new(base.alpha[t], 0.0), &b.ii))
        .collect();
    terms.push((C64::new(0.0, base.gamma), &blocks.m.ii));
    BandedLu::factor_combination(&terms, &format!("interior block of subdomain {}", blocks.subdomain + 1))
}

/// Interior load `f_I(mu)` or interface load `f_G(mu)` of one subdomain.
fn eval_load(vectors: &[Vec<f64>], ids: &[usize], base: &BaseCoefficients, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (v, &q) in vectors.iter().zip(ids) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += base.beta[q] * x;
        }
    }
    out
}

/// Exact local Schur complement and condensed load of one subdomain, in its
/// local interface numbering.
pub fn schur_direct(blocks: &SubdomainBlocks, base: &BaseCoefficients) -> Result<(DMatrix<C64>, Vec<C64>)> {
    let ni = blocks.n_interior();
    let ng = blocks.n_interface();
    let lu = interior_lu(blocks, base)?;
    let pick = |f: fn(&crate::mesh_fem::BlockSet) -> &CsrMatrix| -> Vec<&CsrMatrix> { blocks.a.iter().map(f).collect() };
    let a_ig = eval_block(&pick(|b| &b.ig), &blocks.m.ig, base, &blocks.term_ids);
    let a_gi = eval_block(&pick(|b| &b.gi), &blocks.m.gi, base, &blocks.term_ids);
    let a_gg = eval_block(&pick(|b| &b.gg), &blocks.m.gg, base, &blocks.term_ids);
    let mut x = a_ig;
    for c in 0..ng {
        let mut col: Vec<C64> = x.column(c).iter().copied().collect();
        lu.solve_in_place(&mut col);
        x.column_mut(c).copy_from_slice(&col);
    }
    let s = a_gg - &a_gi * &x;
    let mut xf = eval_load(&blocks.f_i, &blocks.source_ids, base, ni);
    lu.solve_in_place(&mut xf);
    let fg = eval_load(&blocks.f_g, &blocks.source_ids, base, ng);
    let corr = &a_gi * nalgebra::DVector::from_vec(xf);
    let f = fg.iter().zip(corr.iter()).map(|(a, b)| a - b).collect();
    Ok((s, f))
}

/// `sum_j R_j^T S_j R_j` and `sum_j R_j^T F_j` from exact local complements.
pub fn global_schur_direct(blocks: &[SubdomainBlocks; 2], base: &BaseCoefficients, n_gamma: usize) -> Result<(DMatrix<C64>, Vec<C64>)> {
    let mut s = DMatrix::<C64>::zeros(n_gamma, n_gamma);
    let mut f = vec![C64::new(0.0, 0.0); n_gamma];
    for b in blocks {
        let (sj, fj) = schur_direct(b, base)?;
        let r = &b.restriction;
        for i in 0..r.len() {
            f[r[i]] += fj[i];
            for k in 0..r.len() {
                s[(r[i], r[k])] += sj[(i, k)];
            }
        }
    }
    Ok((s, f))
}

/// Interior values `A_II^-1 (f_I - A_IG R_j u_G)` of one subdomain.
pub fn recover_interior(blocks: &SubdomainBlocks, base: &BaseCoefficients, u_gamma: &[C64]) -> Result<Vec<C64>> {
    let lu = interior_lu(blocks, base)?;
    let local: Vec<C64> = blocks.restriction.iter().map(|&g| u_gamma[g]).collect();
    let pick: Vec<&CsrMatrix> = blocks.a.iter().map(|b| &b.ig).collect();
    let a_ig = eval_block(&pick, &blocks.m.ig, base, &blocks.term_ids);
    let prod = &a_ig * nalgebra::DVector::from_vec(local);
    let mut rhs = eval_load(&blocks.f_i, &blocks.source_ids, base, blocks.n_interior());
    for (r, p) in rhs.iter_mut().zip(prod.iter()) {
        *r -= p;
    }
    lu.solve_in_place(&mut rhs);
    Ok(rhs)
}

/// Full solve through the exact interface problem and interior recovery.
pub fn dd_solve(blocks: &[SubdomainBlocks; 2], part: &DomainPartition, base: &BaseCoefficients) -> Result<Vec<C64>> {
    let (s, f) = global_schur_direct(blocks, base, part.n_interface())?;
    let lu = crate::linalg::DenseComplexLu::new(s, "interface Schur complement")?;
    let u_g = lu.solve(&f);
    let i1 = recover_interior(&blocks[0], base, &u_g)?;
    let i2 = recover_interior(&blocks[1], base, &u_g)?;
    part.scatter(&u_g, [&i1, &i2])
}

/// Affine expansion of the global Schur complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSchur {
    pub n_gamma: usize,
    pub real_terms: Vec<(CoefficientExpr, DenseMatrix)>,
    /// Padded with zero terms to the length of `real_terms`.
    pub imag_terms: Vec<(CoefficientExpr, DenseMatrix)>,
}

/// Affine expansion of the global interface load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineLoad {
    pub n_gamma: usize,
    pub real_terms: Vec<(CoefficientExpr, Vec<f64>)>,
    pub imag_terms: Vec<(CoefficientExpr, Vec<f64>)>,
}

impl AffineSchur {
    pub fn m_s(&self) -> usize {
        self.real_terms.len()
    }

    pub fn evaluate(&self, ctx: &CoefficientContext) -> DMatrix<C64> {
        let n = self.n_gamma;
        let mut out = DMatrix::<C64>::zeros(n, n);
        for (e, m) in &self.real_terms {
            let c = ctx.eval(e);
            if c != 0.0 {
                for j in 0..n {
                    for i in 0..n {
                        out[(i, j)].re += c * m.get(i, j);
                    }
                }
            }
        }
        for (e, m) in &self.imag_terms {
            let c = ctx.eval(e);
            if c != 0.0 {
                for j in 0..n {
                    for i in 0..n {
                        out[(i, j)].im += c * m.get(i, j);
                    }
                }
            }
        }
        out
    }
}

impl AffineLoad {
    pub fn m_f(&self) -> usize {
        self.real_terms.len()
    }

    pub fn evaluate(&self, ctx: &CoefficientContext) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n_gamma];
        for (e, v) in &self.real_terms {
            let c = ctx.eval(e);
            for (o, x) in out.iter_mut().zip(v) {
                o.re += c * x;
            }
        }
        for (e, v) in &self.imag_terms {
            let c = ctx.eval(e);
            for (o, x) in out.iter_mut().zip(v) {
                o.im += c * x;
            }
        }
        out
    }
}

fn scatter_matrix(local: &DenseMatrix, r: &[usize], n: usize) -> DenseMatrix {
    local.scatter(r, n)
}

fn scatter_vector(local: &[f64], r: &[usize], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &g) in r.iter().enumerate() {
        out[g] += local[i];
    }
    out
}

/// Assembles the affine Schur complement from the `X_j` expansions.
///
/// Per subdomain, with `X = sum_k phi^Re_k X^Re_k + i phi^Im_k X^Im_k`:
/// real terms `alpha_n A_GG^n`, `alpha_n phi^Re_k (-A_GI^n X^Re_k)`,
/// `gamma phi^Im_k (M_GI X^Im_k)`; imaginary terms `gamma M_GG`,
/// `alpha_n phi^Im_k (-A_GI^n X^Im_k)`, `gamma phi^Re_k (-M_GI X^Re_k)`.
pub fn assemble_affine_s(blocks: &[SubdomainBlocks; 2], xs: &[ReducedModel; 2], n_gamma: usize) -> AffineSchur {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for (j, (b, x)) in blocks.iter().zip(xs).enumerate() {
        push_local_s(b, x, j, &b.restriction, n_gamma, &mut re, &mut im);
    }
    pad_schur(n_gamma, re, im)
}

/// Affine expansion of one local complement `S_j` in its own interface numbering.
pub fn assemble_affine_s_local(blocks: &SubdomainBlocks, x: &ReducedModel) -> AffineSchur {
    let n = blocks.n_interface();
    let ident: Vec<usize> = (0..n).collect();
    let mut re = Vec::new();
    let mut im = Vec::new();
    push_local_s(blocks, x, blocks.subdomain, &ident, n, &mut re, &mut im);
    pad_schur(n, re, im)
}

fn pad_schur(n_gamma: usize, re: Vec<(CoefficientExpr, DenseMatrix)>, mut im: Vec<(CoefficientExpr, DenseMatrix)>) -> AffineSchur {
    while im.len() < re.len() {
        im.push((CoefficientExpr::Zero, DenseMatrix::zeros(n_gamma, n_gamma)));
    }
    AffineSchur {
        n_gamma,
        real_terms: re,
        imag_terms: im,
    }
}

fn push_local_s(
    b: &SubdomainBlocks,
    x: &ReducedModel,
    j: usize,
    r: &[usize],
    n_gamma: usize,
    re: &mut Vec<(CoefficientExpr, DenseMatrix)>,
    im: &mut Vec<(CoefficientExpr, DenseMatrix)>,
) {
    let (ni, ng) = (b.n_interior(), b.n_interface());
    for (set, &t) in b.a.iter().zip(&b.term_ids) {
        re.push((CoefficientExpr::Alpha(t), scatter_matrix(&set.gg.to_dense(), r, n_gamma)));
    }
    im.push((CoefficientExpr::Gamma, scatter_matrix(&b.m.gg.to_dense(), r, n_gamma)));
    for (k, mode) in x.solution.modes.iter().enumerate() {
        let x_re = DenseMatrix::from_column_major(ni, ng, mode.c_re.clone());
        let x_im = DenseMatrix::from_column_major(ni, ng, mode.c_im.clone());
        let src = ZetaSource::Xs(j);
        for (set, &t) in b.a.iter().zip(&b.term_ids) {
            re.push((
                CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Re },
                scatter_matrix(&set.gi.mul_dense(&x_re).scaled(-1.0), r, n_gamma),
            ));
            im.push((
                CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Im },
                scatter_matrix(&set.gi.mul_dense(&x_im).scaled(-1.0), r, n_gamma),
            ));
        }
        re.push((
            CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Im },
            scatter_matrix(&b.m.gi.mul_dense(&x_im), r, n_gamma),
        ));
        im.push((
            CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Re },
            scatter_matrix(&b.m.gi.mul_dense(&x_re).scaled(-1.0), r, n_gamma),
        ));
    }
}

/// Assembles the affine interface load from the `x_j` expansions; the
/// product terms mirror [`assemble_affine_s`] with vectors in place of matrices.
pub fn assemble_affine_f(blocks: &[SubdomainBlocks; 2], xf: &[ReducedModel; 2], n_gamma: usize) -> AffineLoad {
    let mut re = Vec::new();
    let mut im = Vec::new();
    for (j, (b, x)) in blocks.iter().zip(xf).enumerate() {
        let r = &b.restriction;
        for (v, &q) in b.f_g.iter().zip(&b.source_ids) {
            re.push((CoefficientExpr::BetaRe(q), scatter_vector(v, r, n_gamma)));
            im.push((CoefficientExpr::BetaIm(q), scatter_vector(v, r, n_gamma)));
        }
        for (k, mode) in x.solution.modes.iter().enumerate() {
            let src = ZetaSource::Xf(j);
            let neg = |m: &CsrMatrix, v: &[f64]| -> Vec<f64> { m.mul_vec(v).iter().map(|x| -x).collect() };
            for (set, &t) in b.a.iter().zip(&b.term_ids) {
                re.push((
                    CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Re },
                    scatter_vector(&neg(&set.gi, &mode.c_re), r, n_gamma),
                ));
                im.push((
                    CoefficientExpr::AlphaTimes { term: t, source: src, mode: k, part: Part::Im },
                    scatter_vector(&neg(&set.gi, &mode.c_im), r, n_gamma),
                ));
            }
            re.push((
                CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Im },
                scatter_vector(&b.m.gi.mul_vec(&mode.c_im), r, n_gamma),
            ));
            im.push((
                CoefficientExpr::GammaTimes { source: src, mode: k, part: Part::Re },
                scatter_vector(&neg(&b.m.gi, &mode.c_re), r, n_gamma),
            ));
        }
    }
    AffineLoad {
        n_gamma,
        real_terms: re,
        imag_terms: im,
    }
}

/// Expected term count `m_a1 + m_a2 + (m_a1 + 1) N_1 + (m_a2 + 1) N_2`.
pub fn expected_m_s(m_a: [usize; 2], n: [usize; 2]) -> usize {
    m_a[0] + m_a[1] + (m_a[0] + 1) * n[0] + (m_a[1] + 1) * n[1]
}

/// Fills the `X_j` and `x_j` expansion coefficients of a context.
pub fn fill_schur_zetas(ctx: &mut CoefficientContext, xs: &[ReducedModel; 2], xf: &[ReducedModel; 2], counter: &mut OpCounter) {
    for j in 0..2 {
        ctx.xs[j] = xs[j].zetas(ctx, counter);
        ctx.xf[j] = xf[j].zetas(ctx, counter);
    }
}

/// Reshapes an evaluated `X_j` expansion into an `|I_j| x n_gamma` complex matrix.
pub fn evaluate_x(model: &ReducedModel, ctx: &CoefficientContext, n_interior: usize, n_gamma: usize) -> Result<DMatrix<C64>> {
    let c = model.map.values(ctx, &mut OpCounter::default());
    let v = model.solution.evaluate(&c)?;
    if v.len() != n_interior * n_gamma {
        return Err(Error::DimensionMismatch {
            what: "flattened X expansion",
            expected: n_interior * n_gamma,
            got: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(n_interior, n_gamma, &v))
}
