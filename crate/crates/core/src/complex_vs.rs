//! Greedy variable separation for affine complex linear systems
//!
//! `(sum_j a_j(mu) K_j + i sum_j b_j(mu) L_j) u(mu) = sum_q beta^Re_q(mu) F^Re_q + i sum_q beta^Im_q(mu) F^Im_q`
//!
//! The solution is approximated by `u_N(mu) = sum_k zeta^Re_k(mu) c^Re_k + i zeta^Im_k(mu) c^Im_k`.
//! Each pair `(zeta^Re_k, zeta^Im_k)` is the Galerkin solution of a 2x2 real
//! system built from the residual left by the first `k - 1` terms, tested
//! against `c^Re_k` (real part) and `c^Im_k` (imaginary part). All inner
//! products it needs are precomputed, so online evaluation never touches a
//! vector of the full dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    axpy, complex_dense, complex_norm, dot, norm2, BandedLu, CsrMatrix, DenseComplexLu,
    DenseMatrix, C64,
};

/// Relative size below which a mode's real or imaginary part is dropped.
const PART_CUTOFF: f64 = 1e-14;
/// Relative size below which a 2x2 determinant counts as vanishing.
const DET_CUTOFF: f64 = 1e-14;
/// Required relative residual of a snapshot solve.
const SNAPSHOT_TOL: f64 = 1e-10;

/// A factored system matrix at one parameter point.
pub trait ComplexSolver {
    fn solve(&self, rhs: &mut [C64]);
}

/// The parameter-independent operators of an affine complex system.
pub trait OperatorFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn n_real(&self) -> usize;
    fn n_imag(&self) -> usize;
    /// `y = K_j x`
    fn apply_real(&self, j: usize, x: &[f64], y: &mut [f64]);
    /// `y = L_j x`
    fn apply_imag(&self, j: usize, x: &[f64], y: &mut [f64]);
    /// Factors `sum a_j K_j + i sum b_j L_j`.
    fn factor(&self, a: &[f64], b: &[f64], context: &str) -> Result<Box<dyn ComplexSolver + '_>>;
}

/// Sparse operators, optionally acting block-diagonally on `columns`
/// stacked column vectors (a matrix unknown flattened column-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub real: Vec<CsrMatrix>,
    pub imag: Vec<CsrMatrix>,
    pub columns: usize,
}

impl SparseFamily {
    pub fn new(real: Vec<CsrMatrix>, imag: Vec<CsrMatrix>, columns: usize) -> Result<Self> {
        let n = real
            .first()
            .or(imag.first())
            .map(CsrMatrix::nrows)
            .ok_or_else(|| Error::InvalidArgument("operator family without terms".into()))?;
        for m in real.iter().chain(&imag) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "operator term size",
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        Ok(Self {
            real,
            imag,
            columns: columns.max(1),
        })
    }

    fn block(&self) -> usize {
        self.real.first().or(self.imag.first()).map_or(0, CsrMatrix::nrows)
    }

    fn apply(&self, m: &CsrMatrix, x: &[f64], y: &mut [f64]) {
        let n = self.block();
        for (xc, yc) in x.chunks(n).zip(y.chunks_mut(n)) {
            m.matvec(xc, yc);
        }
    }
}

struct BlockDiagSolver {
    lu: BandedLu<C64>,
}

impl ComplexSolver for BlockDiagSolver {
    fn solve(&self, rhs: &mut [C64]) {
        for col in rhs.chunks_mut(self.lu.dim()) {
            self.lu.solve_in_place(col);
        }
    }
}

impl OperatorFamily for SparseFamily {
    fn dim(&self) -> usize {
        self.block() * self.columns
    }
    fn n_real(&self) -> usize {
        self.real.len()
    }
    fn n_imag(&self) -> usize {
        self.imag.len()
    }
    fn apply_real(&self, j: usize, x: &[f64], y: &mut [f64]) {
        self.apply(&self.real[j], x, y);
    }
    fn apply_imag(&self, j: usize, x: &[f64], y: &mut [f64]) {
        self.apply(&self.imag[j], x, y);
    }
    fn factor(&self, a: &[f64], b: &[f64], context: &str) -> Result<Box<dyn ComplexSolver + '_>> {
        let terms: Vec<(C64, &CsrMatrix)> = a
            .iter()
            .zip(&self.real)
            .map(|(&a, m)| (C64::new(a, 0.0), m))
            .chain(b.iter().zip(&self.imag).map(|(&b, m)| (C64::new(0.0, b), m)))
            .collect();
        Ok(Box::new(BlockDiagSolver {
            lu: BandedLu::factor_combination(&terms, context)?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseFamily {
    pub real: Vec<DenseMatrix>,
    pub imag: Vec<DenseMatrix>,
    n: usize,
}

impl DenseFamily {
    pub fn new(n: usize, real: Vec<DenseMatrix>, imag: Vec<DenseMatrix>) -> Result<Self> {
        for m in real.iter().chain(&imag) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "dense operator term size",
                    expected: n,
                    got: m.nrows(),
                });
            }
        }
        Ok(Self { real, imag, n })
    }
}

struct DenseSolver(DenseComplexLu);

impl ComplexSolver for DenseSolver {
    fn solve(&self, rhs: &mut [C64]) {
        let x = self.0.solve(rhs);
        rhs.copy_from_slice(&x);
    }
}

impl OperatorFamily for DenseFamily {
    fn dim(&self) -> usize {
        self.n
    }
    fn n_real(&self) -> usize {
        self.real.len()
    }
    fn n_imag(&self) -> usize {
        self.imag.len()
    }
    fn apply_real(&self, j: usize, x: &[f64], y: &mut [f64]) {
        self.real[j].matvec(x, y);
    }
    fn apply_imag(&self, j: usize, x: &[f64], y: &mut [f64]) {
        self.imag[j].matvec(x, y);
    }
    fn factor(&self, a: &[f64], b: &[f64], context: &str) -> Result<Box<dyn ComplexSolver + '_>> {
        let re: Vec<(f64, &DenseMatrix)> = a.iter().copied().zip(&self.real).collect();
        let im: Vec<(f64, &DenseMatrix)> = b.iter().copied().zip(&self.imag).collect();
        let m = complex_dense(&re, &im, self.n);
        Ok(Box::new(DenseSolver(DenseComplexLu::new(m, context)?)))
    }
}

/// Numeric values of every affine coefficient at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientValues {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub beta_re: Vec<f64>,
    pub beta_im: Vec<f64>,
}

/// An affine complex system: operators plus real and imaginary rhs term lists.
/// The two lists may have different lengths.
pub struct AffineComplexSystem<F> {
    pub family: F,
    pub rhs_re: Vec<Vec<f64>>,
    pub rhs_im: Vec<Vec<f64>>,
}

impl<F: OperatorFamily> AffineComplexSystem<F> {
    pub fn new(family: F, rhs_re: Vec<Vec<f64>>, rhs_im: Vec<Vec<f64>>) -> Result<Self> {
        let n = family.dim();
        for v in rhs_re.iter().chain(&rhs_im) {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "rhs term length",
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(Self {
            family,
            rhs_re,
            rhs_im,
        })
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn check(&self, c: &CoefficientValues) -> Result<()> {
        let pairs = [
            ("real operator coefficients", self.family.n_real(), c.a.len()),
            ("imaginary operator coefficients", self.family.n_imag(), c.b.len()),
            ("real rhs coefficients", self.rhs_re.len(), c.beta_re.len()),
            ("imaginary rhs coefficients", self.rhs_im.len(), c.beta_im.len()),
        ];
        for (what, expected, got) in pairs {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// Right-hand side `(f^Re, f^Im)` at a parameter point.
    pub fn rhs(&self, c: &CoefficientValues) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for (beta, f) in c.beta_re.iter().zip(&self.rhs_re) {
            if *beta != 0.0 {
                axpy(*beta, f, &mut re);
            }
        }
        for (beta, f) in c.beta_im.iter().zip(&self.rhs_im) {
            if *beta != 0.0 {
                axpy(*beta, f, &mut im);
            }
        }
        (re, im)
    }

    /// `(sum a_j K_j) x` and `(sum b_j L_j) x`.
    fn apply_parts(&self, c: &CoefficientValues, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut tmp = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut q = vec![0.0; n];
        for (j, &a) in c.a.iter().enumerate() {
            if a != 0.0 {
                self.family.apply_real(j, x, &mut tmp);
                axpy(a, &tmp, &mut p);
            }
        }
        for (j, &b) in c.b.iter().enumerate() {
            if b != 0.0 {
                self.family.apply_imag(j, x, &mut tmp);
                axpy(b, &tmp, &mut q);
            }
        }
        (p, q)
    }

    /// `A(mu) (x_re + i x_im)` split into real and imaginary parts.
    pub fn apply(&self, c: &CoefficientValues, x_re: &[f64], x_im: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (p_re, q_re) = self.apply_parts(c, x_re);
        let (p_im, q_im) = self.apply_parts(c, x_im);
        let re = p_re.iter().zip(&q_im).map(|(a, b)| a - b).collect();
        let im = q_re.iter().zip(&p_im).map(|(a, b)| a + b).collect();
        (re, im)
    }

    /// Direct solve of the full system at one parameter point.
    pub fn solve_direct(&self, c: &CoefficientValues) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(c)?;
        let (re, im) = self.rhs(c);
        self.solve_with(c, &re, &im, "direct solve")
    }

    fn solve_with(&self, c: &CoefficientValues, r_re: &[f64], r_im: &[f64], context: &str) -> Result<(Vec<f64>, Vec<f64>)> {
        let solver = self.family.factor(&c.a, &c.b, context)?;
        let mut x: Vec<C64> = r_re.iter().zip(r_im).map(|(&a, &b)| C64::new(a, b)).collect();
        solver.solve(&mut x);
        let mut x_re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let mut x_im: Vec<f64> = x.iter().map(|z| z.im).collect();
        let rnorm = complex_norm(r_re, r_im);
        if rnorm == 0.0 {
            return Ok((x_re, x_im));
        }
        let mut res = self.solve_residual(c, r_re, r_im, &x_re, &x_im);
        if res.2 > SNAPSHOT_TOL * rnorm {
            // one step of iterative refinement
            let mut d: Vec<C64> = res.0.iter().zip(&res.1).map(|(&a, &b)| C64::new(a, b)).collect();
            solver.solve(&mut d);
            for (k, z) in d.iter().enumerate() {
                x_re[k] += z.re;
                x_im[k] += z.im;
            }
            res = self.solve_residual(c, r_re, r_im, &x_re, &x_im);
            if res.2 > SNAPSHOT_TOL * rnorm {
                return Err(Error::InaccurateSolve {
                    context: context.to_string(),
                    residual: res.2 / rnorm,
                    tolerance: SNAPSHOT_TOL,
                });
            }
        }
        Ok((x_re, x_im))
    }

    fn solve_residual(&self, c: &CoefficientValues, r_re: &[f64], r_im: &[f64], x_re: &[f64], x_im: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let (a_re, a_im) = self.apply(c, x_re, x_im);
        let d_re: Vec<f64> = r_re.iter().zip(&a_re).map(|(r, a)| r - a).collect();
        let d_im: Vec<f64> = r_im.iter().zip(&a_im).map(|(r, a)| r - a).collect();
        let n = complex_norm(&d_re, &d_im);
        (d_re, d_im, n)
    }

    /// Residual `f(mu) - A(mu) u_N(mu)` of a separated solution, computed at full dimension.
    pub fn residual(&self, sol: &SeparatedSolution, zeta: &Zetas, c: &CoefficientValues) -> (Vec<f64>, Vec<f64>) {
        let (mut r_re, mut r_im) = self.rhs(c);
        let (u_re, u_im) = sol.expand(zeta);
        let (a_re, a_im) = self.apply(c, &u_re, &u_im);
        axpy(-1.0, &a_re, &mut r_re);
        axpy(-1.0, &a_im, &mut r_im);
        (r_re, r_im)
    }
}

/// Which parts of a mode carry information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Full,
    /// `c^Im` vanished; `zeta^Im` is identically zero.
    RealOnly,
    /// `c^Re` vanished; `zeta^Re` is identically zero.
    ImagOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub c_re: Vec<f64>,
    pub c_im: Vec<f64>,
    pub kind: ModeKind,
}

/// Inner products needed to evaluate the coefficients online.
///
/// Operator entries are lower triangular: `rr[j][k][l]` holds
/// `c^Re_k . K_j c^Re_l` for `l <= k`, and likewise `ii` for imaginary parts
/// against `K_j`, `ri` for `c^Re_k . L_j c^Im_l`, and `ir` for `c^Im_k . L_j c^Re_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReducedData {
    pub rr: Vec<Vec<Vec<f64>>>,
    pub ii: Vec<Vec<Vec<f64>>>,
    pub ri: Vec<Vec<Vec<f64>>>,
    pub ir: Vec<Vec<Vec<f64>>>,
    /// `f_re[q][k] = c^Re_k . F^Re_q`
    pub f_re: Vec<Vec<f64>>,
    /// `f_im[q][k] = c^Im_k . F^Im_q`
    pub f_im: Vec<Vec<f64>>,
}

impl ReducedData {
    fn empty(m_a: usize, m_b: usize, q_re: usize, q_im: usize) -> Self {
        Self {
            rr: vec![Vec::new(); m_a],
            ii: vec![Vec::new(); m_a],
            ri: vec![Vec::new(); m_b],
            ir: vec![Vec::new(); m_b],
            f_re: vec![Vec::new(); q_re],
            f_im: vec![Vec::new(); q_im],
        }
    }

    fn truncated(&self, n: usize) -> Self {
        let cut3 = |v: &Vec<Vec<Vec<f64>>>| v.iter().map(|x| x[..n].to_vec()).collect();
        let cut2 = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[..n].to_vec()).collect();
        Self {
            rr: cut3(&self.rr),
            ii: cut3(&self.ii),
            ri: cut3(&self.ri),
            ir: cut3(&self.ir),
            f_re: cut2(&self.f_re),
            f_im: cut2(&self.f_im),
        }
    }
}

/// Operation counts of online coefficient evaluation and mode expansion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    /// Scalar floating-point operations spent on coefficients.
    pub scalar_ops: u64,
    /// Full-length vector operations spent on coefficients; stays zero.
    pub vector_ops: u64,
    /// Full-length axpy operations of the final mode expansion.
    pub expansion_axpys: u64,
    /// Scalar work of the mode expansion.
    pub expansion_flops: u64,
}

impl OpCounter {
    pub fn merge(&mut self, other: &OpCounter) {
        self.scalar_ops += other.scalar_ops;
        self.vector_ops += other.vector_ops;
        self.expansion_axpys += other.expansion_axpys;
        self.expansion_flops += other.expansion_flops;
    }
}

/// Coefficient values of every mode at one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Zetas {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Modes whose 2x2 system was degenerate at this point; their coefficients are zero.
    pub degenerate: Vec<bool>,
}

impl Zetas {
    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Galerkin quantities of mode `k`: `A = c^Re.P c^Re`, `B = c^Im.P c^Im`,
/// `m1 = c^Re.Q c^Im`, `m2 = c^Im.Q c^Re`, `p = c^Re.r^Re`, `q = c^Im.r^Im`.
#[derive(Debug, Clone, Copy)]
struct Galerkin {
    a: f64,
    b: f64,
    m1: f64,
    m2: f64,
    p: f64,
    q: f64,
    /// magnitude reference for the degeneracy test of `a` or `b` alone
    scale_a: f64,
    scale_b: f64,
}

/// Solves `[A, -m1; m2, B] [zR; zI] = [p; q]`.
fn closed_form(kind: ModeKind, g: Galerkin) -> (f64, f64, bool) {
    match kind {
        ModeKind::Full => {
            let det = g.a * g.b + g.m1 * g.m2;
            let scale = (g.a * g.b).abs() + (g.m1 * g.m2).abs();
            if !(det.abs() > DET_CUTOFF * scale) || !det.is_finite() {
                return (0.0, 0.0, true);
            }
            ((g.b * g.p + g.m1 * g.q) / det, (g.a * g.q - g.m2 * g.p) / det, false)
        }
        ModeKind::RealOnly => {
            if !(g.a.abs() > DET_CUTOFF * g.scale_a) {
                return (0.0, 0.0, true);
            }
            (g.p / g.a, 0.0, false)
        }
        ModeKind::ImagOnly => {
            if !(g.b.abs() > DET_CUTOFF * g.scale_b) {
                return (0.0, 0.0, true);
            }
            (0.0, g.q / g.b, false)
        }
    }
}

/// Status of a finished greedy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStatus {
    /// Max relative residual over the remaining samples after each step.
    pub history: Vec<f64>,
    /// Residual norm at the chosen sample before and after adding its term.
    pub chosen_residuals: Vec<(f64, f64)>,
    pub initial_norm: f64,
    pub converged: bool,
    pub exhausted: bool,
    pub hit_cap: bool,
}

/// Rank-N separated representation with complete reduced data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSolution {
    pub dim: usize,
    pub m_a: usize,
    pub m_b: usize,
    pub q_re: usize,
    pub q_im: usize,
    pub modes: Vec<Mode>,
    /// Index into the sample set of the point each mode was built at.
    pub chosen: Vec<usize>,
    pub reduced: ReducedData,
    pub status: GreedyStatus,
}

impl SeparatedSolution {
    pub fn n_terms(&self) -> usize {
        self.modes.len()
    }

    /// First `n` terms; valid because term `k` only depends on terms before it.
    pub fn truncated(&self, n: usize) -> SeparatedSolution {
        let n = n.min(self.n_terms());
        SeparatedSolution {
            dim: self.dim,
            m_a: self.m_a,
            m_b: self.m_b,
            q_re: self.q_re,
            q_im: self.q_im,
            modes: self.modes[..n].to_vec(),
            chosen: self.chosen[..n].to_vec(),
            reduced: self.reduced.truncated(n),
            status: self.status.clone(),
        }
    }

    fn check(&self, c: &CoefficientValues) -> Result<()> {
        let pairs = [
            ("real operator coefficients", self.m_a, c.a.len()),
            ("imaginary operator coefficients", self.m_b, c.b.len()),
            ("real rhs coefficients", self.q_re, c.beta_re.len()),
            ("imaginary rhs coefficients", self.q_im, c.beta_im.len()),
        ];
        for (what, expected, got) in pairs {
            if expected != got {
                return Err(Error::DimensionMismatch { what, expected, got });
            }
        }
        Ok(())
    }

    /// Evaluates all coefficients from the reduced data alone.
    pub fn zetas(&self, c: &CoefficientValues) -> Result<Zetas> {
        self.check(c)?;
        Ok(self.zetas_counted(c, &mut OpCounter::default()))
    }

    /// Like [`zetas`](Self::zetas) but records the work done; skips the length checks.
    pub fn zetas_counted(&self, c: &CoefficientValues, counter: &mut OpCounter) -> Zetas {
        let n = self.n_terms();
        let red = &self.reduced;
        let mut z = Zetas {
            re: Vec::with_capacity(n),
            im: Vec::with_capacity(n),
            degenerate: Vec::with_capacity(n),
        };
        let mut ops = 0u64;
        for k in 0..n {
            let mut g = Galerkin {
                a: 0.0,
                b: 0.0,
                m1: 0.0,
                m2: 0.0,
                p: 0.0,
                q: 0.0,
                scale_a: 0.0,
                scale_b: 0.0,
            };
            for (j, &a) in c.a.iter().enumerate() {
                g.a += a * red.rr[j][k][k];
                g.b += a * red.ii[j][k][k];
                g.scale_a += (a * red.rr[j][k][k]).abs();
                g.scale_b += (a * red.ii[j][k][k]).abs();
            }
            for (j, &b) in c.b.iter().enumerate() {
                g.m1 += b * red.ri[j][k][k];
                g.m2 += b * red.ir[j][k][k];
            }
            ops += 6 * c.a.len() as u64 + 4 * c.b.len() as u64;
            for (qi, &beta) in c.beta_re.iter().enumerate() {
                g.p += beta * red.f_re[qi][k];
            }
            for (qi, &beta) in c.beta_im.iter().enumerate() {
                g.q += beta * red.f_im[qi][k];
            }
            ops += 2 * (c.beta_re.len() + c.beta_im.len()) as u64;
            for l in 0..k {
                let (zr, zi) = (z.re[l], z.im[l]);
                let mut prr = 0.0;
                let mut pii = 0.0;
                for (j, &a) in c.a.iter().enumerate() {
                    prr += a * red.rr[j][k][l];
                    pii += a * red.ii[j][k][l];
                }
                let mut qri = 0.0;
                let mut qir = 0.0;
                for (j, &b) in c.b.iter().enumerate() {
                    qri += b * red.ri[j][k][l];
                    qir += b * red.ir[j][k][l];
                }
                g.p -= zr * prr - zi * qri;
                g.q -= zr * qir + zi * pii;
                ops += 4 * (c.a.len() + c.b.len()) as u64 + 8;
            }
            let (zr, zi, deg) = closed_form(self.modes[k].kind, g);
            ops += 12;
            z.re.push(zr);
            z.im.push(zi);
            z.degenerate.push(deg);
        }
        counter.scalar_ops += ops;
        z
    }

    /// `(sum zeta^Re_k c^Re_k, sum zeta^Im_k c^Im_k)`: real and imaginary parts of `u_N`.
    pub fn expand(&self, z: &Zetas) -> (Vec<f64>, Vec<f64>) {
        self.expand_counted(z, &mut OpCounter::default())
    }

    pub fn expand_counted(&self, z: &Zetas, counter: &mut OpCounter) -> (Vec<f64>, Vec<f64>) {
        let mut re = vec![0.0; self.dim];
        let mut im = vec![0.0; self.dim];
        for (k, m) in self.modes.iter().enumerate() {
            if z.re[k] != 0.0 && m.kind != ModeKind::ImagOnly {
                axpy(z.re[k], &m.c_re, &mut re);
                counter.expansion_axpys += 1;
                counter.expansion_flops += 2 * self.dim as u64;
            }
            if z.im[k] != 0.0 && m.kind != ModeKind::RealOnly {
                axpy(z.im[k], &m.c_im, &mut im);
                counter.expansion_axpys += 1;
                counter.expansion_flops += 2 * self.dim as u64;
            }
        }
        (re, im)
    }

    pub fn expand_complex(&self, z: &Zetas) -> Vec<C64> {
        let (re, im) = self.expand(z);
        re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect()
    }

    pub fn evaluate(&self, c: &CoefficientValues) -> Result<Vec<C64>> {
        Ok(self.expand_complex(&self.zetas(c)?))
    }

    /// Reference evaluation of the same coefficient formulas using full-length
    /// vectors: residuals are formed explicitly and projected term by term.
    pub fn full_dimension_zetas<F: OperatorFamily>(&self, system: &AffineComplexSystem<F>, c: &CoefficientValues) -> Result<Zetas> {
        system.check(c)?;
        let (mut r_re, mut r_im) = system.rhs(c);
        let mut z = Zetas::default();
        for m in &self.modes {
            let (p_re, q_re) = system.apply_parts(c, &m.c_re);
            let (p_im, q_im) = system.apply_parts(c, &m.c_im);
            let g = Galerkin {
                a: dot(&m.c_re, &p_re),
                b: dot(&m.c_im, &p_im),
                m1: dot(&m.c_re, &q_im),
                m2: dot(&m.c_im, &q_re),
                p: dot(&m.c_re, &r_re),
                q: dot(&m.c_im, &r_im),
                scale_a: scale_of(system, c, &m.c_re),
                scale_b: scale_of(system, c, &m.c_im),
            };
            let (zr, zi, deg) = closed_form(m.kind, g);
            // r <- r - A (zr c_re + i zi c_im)
            for i in 0..r_re.len() {
                r_re[i] -= zr * p_re[i] - zi * q_im[i];
                r_im[i] -= zr * q_re[i] + zi * p_im[i];
            }
            z.re.push(zr);
            z.im.push(zi);
            z.degenerate.push(deg);
        }
        Ok(z)
    }
}

/// `sum_j |a_j c.K_j c|`, the magnitude reference used by the degeneracy test.
fn scale_of<F: OperatorFamily>(system: &AffineComplexSystem<F>, c: &CoefficientValues, v: &[f64]) -> f64 {
    let mut tmp = vec![0.0; v.len()];
    let mut s = 0.0;
    for (j, &a) in c.a.iter().enumerate() {
        system.family.apply_real(j, v, &mut tmp);
        s += (a * dot(v, &tmp)).abs();
    }
    s
}

/// Solves `A(mu) c = r_k(mu)` where `r_k` is the residual left by `history`.
pub fn solve_snapshot<F: OperatorFamily>(
    system: &AffineComplexSystem<F>,
    c: &CoefficientValues,
    history: &SeparatedSolution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    system.check(c)?;
    let z = history.zetas(c)?;
    let (r_re, r_im) = system.residual(history, &z, c);
    system.solve_with(c, &r_re, &r_im, "snapshot solve")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyOptions {
    pub epsilon: f64,
    pub n_max: usize,
    pub seed: u64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            n_max: 10,
            seed: 0,
        }
    }
}

/// Operator images of one mode, cached for cheap residual updates.
struct Applied {
    k_re: Vec<Vec<f64>>,
    k_im: Vec<Vec<f64>>,
    l_re: Vec<Vec<f64>>,
    l_im: Vec<Vec<f64>>,
}

fn apply_all<F: OperatorFamily>(family: &F, m: &Mode) -> Applied {
    let n = family.dim();
    let run = |real: bool, x: &[f64]| -> Vec<Vec<f64>> {
        let count = if real { family.n_real() } else { family.n_imag() };
        (0..count)
            .map(|j| {
                let mut y = vec![0.0; n];
                if real {
                    family.apply_real(j, x, &mut y);
                } else {
                    family.apply_imag(j, x, &mut y);
                }
                y
            })
            .collect()
    };
    Applied {
        k_re: run(true, &m.c_re),
        k_im: run(true, &m.c_im),
        l_re: run(false, &m.c_re),
        l_im: run(false, &m.c_im),
    }
}

/// Residual at one sample using cached operator images.
fn cached_residual<F: OperatorFamily>(
    system: &AffineComplexSystem<F>,
    applied: &[Applied],
    z: &Zetas,
    c: &CoefficientValues,
) -> (Vec<f64>, Vec<f64>) {
    let (mut r_re, mut r_im) = system.rhs(c);
    for (l, ap) in applied.iter().enumerate() {
        let (zr, zi) = (z.re[l], z.im[l]);
        for (j, &a) in c.a.iter().enumerate() {
            if zr != 0.0 {
                axpy(-zr * a, &ap.k_re[j], &mut r_re);
            }
            if zi != 0.0 {
                axpy(-zi * a, &ap.k_im[j], &mut r_im);
            }
        }
        for (j, &b) in c.b.iter().enumerate() {
            if zi != 0.0 {
                axpy(zi * b, &ap.l_im[j], &mut r_re);
            }
            if zr != 0.0 {
                axpy(-zr * b, &ap.l_re[j], &mut r_im);
            }
        }
    }
    (r_re, r_im)
}

fn classify(c_re: &mut [f64], c_im: &mut [f64]) -> ModeKind {
    let nr = norm2(c_re);
    let ni = norm2(c_im);
    let total = (nr * nr + ni * ni).sqrt();
    if ni <= PART_CUTOFF * total {
        c_im.iter_mut().for_each(|v| *v = 0.0);
        ModeKind::RealOnly
    } else if nr <= PART_CUTOFF * total {
        c_re.iter_mut().for_each(|v| *v = 0.0);
        ModeKind::ImagOnly
    } else {
        ModeKind::Full
    }
}

/// Greedy construction of a separated solution over the sample set.
///
/// The first sample is drawn with a seeded generator; each later sample is
/// the remaining one with the largest residual norm (lowest index on ties).
/// Stops when the largest remaining relative residual is at most
/// `epsilon`, when every sample has been used, or after `n_max` terms.
pub fn vs_greedy<F: OperatorFamily>(
    system: &AffineComplexSystem<F>,
    samples: &[CoefficientValues],
    opts: &GreedyOptions,
) -> Result<SeparatedSolution> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    if !(opts.epsilon > 0.0) || opts.n_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "greedy needs epsilon > 0 and n_max >= 1 (got {}, {})",
            opts.epsilon, opts.n_max
        )));
    }
    for s in samples {
        system.check(s)?;
    }
    let family = &system.family;
    let mut sol = SeparatedSolution {
        dim: system.dim(),
        m_a: family.n_real(),
        m_b: family.n_imag(),
        q_re: system.rhs_re.len(),
        q_im: system.rhs_im.len(),
        modes: Vec::new(),
        chosen: Vec::new(),
        reduced: ReducedData::empty(family.n_real(), family.n_imag(), system.rhs_re.len(), system.rhs_im.len()),
        status: GreedyStatus {
            history: Vec::new(),
            chosen_residuals: Vec::new(),
            initial_norm: 0.0,
            converged: false,
            exhausted: false,
            hit_cap: false,
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut current = rng.random_range(0..samples.len());
    let initial: Vec<f64> = samples
        .iter()
        .map(|c| {
            let (re, im) = system.rhs(c);
            complex_norm(&re, &im)
        })
        .collect();
    if initial[current] == 0.0 {
        // fall back to the largest load so a zero sample cannot define the scale
        current = argmax(&initial, &vec![true; samples.len()]).0;
        if initial[current] == 0.0 {
            sol.status.converged = true;
            return Ok(sol);
        }
    }
    let scale = initial[current];
    sol.status.initial_norm = scale;
    let mut available = vec![true; samples.len()];
    let mut applied: Vec<Applied> = Vec::new();
    let mut zetas: Vec<Zetas> = vec![Zetas::default(); samples.len()];

    loop {
        let c = &samples[current];
        let (r_re, r_im) = cached_residual(system, &applied, &zetas[current], c);
        let before = complex_norm(&r_re, &r_im);
        let (mut c_re, mut c_im) = system
            .solve_with(c, &r_re, &r_im, &format!("snapshot at sample {current}"))?;
        let cn = complex_norm(&c_re, &c_im);
        if cn == 0.0 {
            sol.status.converged = true;
            break;
        }
        c_re.iter_mut().chain(c_im.iter_mut()).for_each(|v| *v /= cn);
        let kind = classify(&mut c_re, &mut c_im);
        let mode = Mode { c_re, c_im, kind };
        let ap = apply_all(family, &mode);
        extend_reduced(&mut sol.reduced, &mode, &ap, &sol.modes, &applied, system);
        sol.modes.push(mode);
        sol.chosen.push(current);
        applied.push(ap);
        available[current] = false;

        let mut res = vec![0.0; samples.len()];
        for (i, c) in samples.iter().enumerate() {
            zetas[i] = sol.zetas_counted(c, &mut OpCounter::default());
            if available[i] || i == current {
                let (a, b) = cached_residual(system, &applied, &zetas[i], c);
                res[i] = complex_norm(&a, &b);
            }
        }
        sol.status.chosen_residuals.push((before, res[current]));
        let (next, max_res) = argmax(&res, &available);
        let rel = max_res / scale;
        sol.status.history.push(rel);
        log::debug!(
            "greedy step {}: sample {current}, max relative residual {rel:.3e}",
            sol.n_terms()
        );
        if !available.iter().any(|&a| a) {
            sol.status.exhausted = true;
            sol.status.converged = rel <= opts.epsilon;
            break;
        }
        if rel <= opts.epsilon {
            sol.status.converged = true;
            break;
        }
        if sol.n_terms() >= opts.n_max {
            sol.status.hit_cap = true;
            log::info!(
                "greedy reached the cap of {} terms at relative residual {rel:.3e}",
                opts.n_max
            );
            break;
        }
        current = next;
    }
    Ok(sol)
}

fn argmax(values: &[f64], mask: &[bool]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in values.iter().enumerate() {
        if mask[i] && v > best.1 {
            best = (i, v);
        }
    }
    if best.1 == f64::NEG_INFINITY {
        best.1 = 0.0;
    }
    best
}

fn extend_reduced<F: OperatorFamily>(
    red: &mut ReducedData,
    new: &Mode,
    new_ap: &Applied,
    modes: &[Mode],
    applied: &[Applied],
    system: &AffineComplexSystem<F>,
) {
    let prev = modes.iter().zip(applied).chain(std::iter::once((new, new_ap)));
    let pairs: Vec<(&Mode, &Applied)> = prev.collect();
    for j in 0..red.rr.len() {
        red.rr[j].push(pairs.iter().map(|(_, ap)| dot(&new.c_re, &ap.k_re[j])).collect());
        red.ii[j].push(pairs.iter().map(|(_, ap)| dot(&new.c_im, &ap.k_im[j])).collect());
    }
    for j in 0..red.ri.len() {
        red.ri[j].push(pairs.iter().map(|(_, ap)| dot(&new.c_re, &ap.l_im[j])).collect());
        red.ir[j].push(pairs.iter().map(|(_, ap)| dot(&new.c_im, &ap.l_re[j])).collect());
    }
    for (q, f) in system.rhs_re.iter().enumerate() {
        red.f_re[q].push(dot(&new.c_re, f));
    }
    for (q, f) in system.rhs_im.iter().enumerate() {
        red.f_im[q].push(dot(&new.c_im, f));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng, shift: f64) -> DenseMatrix {
        let data: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = DenseMatrix::from_column_major(n, n, data);
        DenseMatrix::from_fn(n, n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                s += g.get(i, k) * g.get(j, k);
            }
            s / n as f64 + if i == j { shift } else { 0.0 }
        })
    }

    fn toy_system(n: usize, seed: u64) -> AffineComplexSystem<DenseFamily> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k1 = random_spd(n, &mut rng, 1.0);
        let k2 = random_spd(n, &mut rng, 0.5);
        let m = random_spd(n, &mut rng, 0.2);
        let f: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        AffineComplexSystem::new(
            DenseFamily::new(n, vec![k1, k2], vec![m]).unwrap(),
            f[..2].to_vec(),
            f[1..].to_vec(),
        )
        .unwrap()
    }

    fn toy_coefs(rng: &mut ChaCha8Rng) -> CoefficientValues {
        CoefficientValues {
            a: vec![rng.random_range(1.0..2.0), rng.random_range(1.0..3.0)],
            b: vec![rng.random_range(0.0..5.0)],
            beta_re: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            beta_im: vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
        }
    }

    fn oracle(sys: &AffineComplexSystem<DenseFamily>, c: &CoefficientValues) -> Vec<C64> {
        let re: Vec<(f64, &DenseMatrix)> = c.a.iter().copied().zip(&sys.family.real).collect();
        let im: Vec<(f64, &DenseMatrix)> = c.b.iter().copied().zip(&sys.family.imag).collect();
        let m = complex_dense(&re, &im, sys.dim());
        let (fr, fi) = sys.rhs(c);
        let b: Vec<C64> = fr.iter().zip(&fi).map(|(&a, &b)| C64::new(a, b)).collect();
        m.lu().solve(&nalgebra::DVector::from_vec(b)).unwrap().as_slice().to_vec()
    }

    fn rel(a: &[C64], b: &[C64]) -> f64 {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let n: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (d / n).sqrt()
    }

    #[test]
    fn printed_closed_form_solves_the_galerkin_pair() {
        // Random 2x2 data, including the non-symmetric case m1 != m2.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = Galerkin {
                a: rng.random_range(0.5..2.0),
                b: rng.random_range(0.5..2.0),
                m1: rng.random_range(-2.0..2.0),
                m2: rng.random_range(-2.0..2.0),
                p: rng.random_range(-1.0..1.0),
                q: rng.random_range(-1.0..1.0),
                scale_a: 1.0,
                scale_b: 1.0,
            };
            let (zr, zi, deg) = closed_form(ModeKind::Full, g);
            assert!(!deg);
            assert!((g.a * zr - g.m1 * zi - g.p).abs() < 1e-12);
            assert!((g.m2 * zr + g.b * zi - g.q).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero_snapshot_and_empty_expansion() {
        let sys = toy_system(6, 1);
        let mut c = toy_coefs(&mut ChaCha8Rng::seed_from_u64(2));
        c.beta_re.iter_mut().chain(c.beta_im.iter_mut()).for_each(|b| *b = 0.0);
        let (re, im) = sys.solve_direct(&c).unwrap();
        assert!(re.iter().chain(&im).all(|v| *v == 0.0));
        let sol = vs_greedy(&sys, &[c.clone(), c.clone()], &GreedyOptions::default()).unwrap();
        assert_eq!(sol.n_terms(), 0);
        assert!(sol.evaluate(&c).unwrap().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_frequency_snapshot_is_real() {
        let sys = toy_system(7, 4);
        let mut c = toy_coefs(&mut ChaCha8Rng::seed_from_u64(5));
        c.b[0] = 0.0;
        c.beta_im.iter_mut().for_each(|b| *b = 0.0);
        let empty = vs_greedy(&sys, &[c.clone()], &GreedyOptions { n_max: 1, ..Default::default() })
            .unwrap()
            .truncated(0);
        let (re, im) = solve_snapshot(&sys, &c, &empty).unwrap();
        assert!(im.iter().all(|v| *v == 0.0));
        assert!(norm2(&re) > 0.0);
        let sol = vs_greedy(&sys, &[c.clone()], &GreedyOptions::default()).unwrap();
        assert_eq!(sol.modes[0].kind, ModeKind::RealOnly);
        let z = sol.zetas(&c).unwrap();
        assert_eq!(z.im[0], 0.0);
        // Galerkin quotient
        let m = &sol.modes[0];
        let (f, _) = sys.rhs(&c);
        let (p, _) = sys.apply_parts(&c, &m.c_re);
        assert!((z.re[0] - dot(&m.c_re, &f) / dot(&m.c_re, &p)).abs() < 1e-12 * z.re[0].abs());
    }

    #[test]
    fn first_snapshot_matches_dense_oracle() {
        let sys = toy_system(9, 7);
        let c = toy_coefs(&mut ChaCha8Rng::seed_from_u64(8));
        let sol = vs_greedy(&sys, &[c.clone()], &GreedyOptions { n_max: 1, ..Default::default() }).unwrap();
        let (re, im) = solve_snapshot(&sys, &c, &sol.truncated(0)).unwrap();
        let got: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| C64::new(a, b)).collect();
        assert!(rel(&got, &oracle(&sys, &c)) < 1e-12);
    }

    #[test]
    fn constant_solution_needs_one_term() {
        let sys = toy_system(8, 11);
        let c = toy_coefs(&mut ChaCha8Rng::seed_from_u64(12));
        let samples = vec![c.clone(); 5];
        let sol = vs_greedy(&sys, &samples, &GreedyOptions::default()).unwrap();
        assert_eq!(sol.n_terms(), 1);
        assert!(sol.status.converged);
        assert!(rel(&sol.evaluate(&c).unwrap(), &oracle(&sys, &c)) < 1e-12);
    }

    #[test]
    fn reduced_and_full_dimension_coefficients_agree() {
        let sys = toy_system(12, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let samples: Vec<_> = (0..8).map(|_| toy_coefs(&mut rng)).collect();
        let sol = vs_greedy(&sys, &samples, &GreedyOptions { epsilon: 1e-14, n_max: 8, seed: 1 }).unwrap();
        assert!(sol.n_terms() >= 4);
        for c in samples.iter().chain(std::iter::once(&toy_coefs(&mut rng))) {
            let a = sol.zetas(c).unwrap();
            let b = sol.full_dimension_zetas(&sys, c).unwrap();
            let scale = a.re.iter().chain(&a.im).fold(0.0f64, |m, v| m.max(v.abs()));
            for k in 0..a.len() {
                assert!((a.re[k] - b.re[k]).abs() <= 1e-12 * scale);
                assert!((a.im[k] - b.im[k]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn all_samples_reproduced_at_full_rank() {
        let sys = toy_system(50, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let samples: Vec<_> = (0..6).map(|_| toy_coefs(&mut rng)).collect();
        let sol = vs_greedy(&sys, &samples, &GreedyOptions { epsilon: 1e-15, n_max: 6, seed: 9 }).unwrap();
        assert_eq!(sol.n_terms(), 6);
        assert!(sol.status.exhausted);
        for c in &samples {
            assert!(rel(&sol.evaluate(c).unwrap(), &oracle(&sys, c)) < 1e-8);
        }
        for (before, after) in &sol.status.chosen_residuals {
            assert!(after <= before);
        }
    }

    #[test]
    fn greedy_is_deterministic_and_respects_cap() {
        let sys = toy_system(10, 41);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<_> = (0..10).map(|_| toy_coefs(&mut rng)).collect();
        let opts = GreedyOptions { epsilon: 1e-14, n_max: 3, seed: 5 };
        let a = vs_greedy(&sys, &samples, &opts).unwrap();
        let b = vs_greedy(&sys, &samples, &opts).unwrap();
        assert_eq!(a, b);
        assert!(a.status.hit_cap);
        assert_eq!(a.n_terms(), 3);
        let t = a.truncated(2);
        let c = &samples[4];
        assert_eq!(t.zetas(c).unwrap().re[..], a.zetas(c).unwrap().re[..2]);
    }

    #[test]
    fn online_cost_is_dimension_free() {
        let mut counts = Vec::new();
        for n in [10, 40] {
            let sys = toy_system(n, 51);
            let mut rng = ChaCha8Rng::seed_from_u64(52);
            let samples: Vec<_> = (0..5).map(|_| toy_coefs(&mut rng)).collect();
            let sol = vs_greedy(&sys, &samples, &GreedyOptions { epsilon: 1e-15, n_max: 4, seed: 0 }).unwrap();
            let mut ctr = OpCounter::default();
            sol.zetas_counted(&samples[0], &mut ctr);
            assert_eq!(ctr.vector_ops, 0);
            counts.push(ctr.scalar_ops);
        }
        assert_eq!(counts[0], counts[1]);
    }

    #[test]
    fn sparse_block_family_matches_column_solves() {
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let k = CsrMatrix::from_triplets(n, n, &t);
        let m = CsrMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
        let fam = SparseFamily::new(vec![k.clone()], vec![m.clone()], 3).unwrap();
        let rhs: Vec<f64> = (0..15).map(|i| (i as f64).cos()).collect();
        let sys = AffineComplexSystem::new(fam, vec![rhs.clone()], vec![rhs.clone()]).unwrap();
        let c = CoefficientValues { a: vec![1.5], b: vec![2.0], beta_re: vec![1.0], beta_im: vec![0.5] };
        let (re, im) = sys.solve_direct(&c).unwrap();
        let (ar, ai) = sys.apply(&c, &re, &im);
        for i in 0..15 {
            assert!((ar[i] - rhs[i]).abs() < 1e-12);
            assert!((ai[i] - 0.5 * rhs[i]).abs() < 1e-12);
        }
    }
}
