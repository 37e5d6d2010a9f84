//! The assembled offline model and its online evaluation: coefficient chain,
//! full-field scatter and time reconstruction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::complex_vs::{GreedyOptions, OpCounter, Zetas};
use crate::error::{Error, Result};
use crate::frequency::{FrequencyGrid, ParameterPoint};
use crate::interface_rom::{build_interface_rom, InterfaceRom};
use crate::linalg::C64;
use crate::mesh_fem::{assemble, extract_blocks, AffineOperator, AffineRhs, DomainPartition, Mesh2D, ProblemDefinition, SubdomainBlocks};
use crate::schur_dd::{
    approximate_x, approximate_xf, assemble_affine_f, assemble_affine_s, fill_schur_zetas, AffineLoad, AffineSchur,
    BaseCoefficients, CoefficientContext, ReducedModel,
};
use crate::subdomain_rom::build_subdomain_rom;

/// Tolerances and term caps of every greedy in the offline stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineSettings {
    pub eps_x: f64,
    pub eps_interface: f64,
    pub eps_interior: f64,
    pub n_s: [usize; 2],
    pub n_f: [usize; 2],
    pub n_gamma: usize,
    pub n_i: [usize; 2],
    pub seed: u64,
}

/// Training set: each of `n_xi` uniform parameter draws is paired with
/// `n_omega_per_xi` uniform frequencies in `[0, omega_max]`.
pub fn training_points(problem: &ProblemDefinition, n_xi: usize, n_omega_per_xi: usize, omega_max: f64, seed: u64) -> Vec<ParameterPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_xi * n_omega_per_xi);
    for _ in 0..n_xi {
        let unit: Vec<f64> = (0..problem.dim()).map(|_| rng.random::<f64>()).collect();
        let xi = problem.scale_parameters(&unit);
        for _ in 0..n_omega_per_xi {
            out.push(ParameterPoint::new(rng.random_range(0.0..=omega_max), xi.clone()));
        }
    }
    out
}

/// `m` uniform parameter draws from the box.
pub fn parameter_samples(problem: &ProblemDefinition, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| {
            let unit: Vec<f64> = (0..problem.dim()).map(|_| rng.random::<f64>()).collect();
            problem.scale_parameters(&unit)
        })
        .collect()
}

/// Everything the online stage needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtDdVsModel {
    pub problem: ProblemDefinition,
    pub partition: DomainPartition,
    pub xs: [ReducedModel; 2],
    pub xf: [ReducedModel; 2],
    pub affine_s: AffineSchur,
    pub affine_f: AffineLoad,
    pub interface: InterfaceRom,
    pub interior: [ReducedModel; 2],
    pub training: Vec<ParameterPoint>,
}

/// Coefficients of every mode of the interface and interior expansions.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineCoefficients {
    pub interface: Zetas,
    pub interior: [Zetas; 2],
}

/// Matrices shared by all offline stages, kept for validation and reference runs.
pub struct OfflineData {
    pub op: AffineOperator,
    pub rhs: AffineRhs,
    pub blocks: [SubdomainBlocks; 2],
}

pub fn assemble_offline_data(problem: &ProblemDefinition, mesh: &Mesh2D) -> Result<(OfflineData, DomainPartition)> {
    let (op, rhs) = assemble(problem, mesh).map_err(|e| e.in_stage("assembly"))?;
    let part = DomainPartition::new(mesh).map_err(|e| e.in_stage("partition"))?;
    let b0 = extract_blocks(&op, &rhs, &part, 0).map_err(|e| e.in_stage("assembly"))?;
    let b1 = extract_blocks(&op, &rhs, &part, 1).map_err(|e| e.in_stage("assembly"))?;
    Ok((OfflineData { op, rhs, blocks: [b0, b1] }, part))
}

fn opts(epsilon: f64, n_max: usize, seed: u64) -> GreedyOptions {
    GreedyOptions { epsilon, n_max, seed }
}

/// Runs assembly, the `X_j`/`x_j` approximations, affine interface assembly,
/// the interface ROM and both interior ROMs.
pub fn build_offline(
    problem: &ProblemDefinition,
    data: &OfflineData,
    partition: &DomainPartition,
    training: Vec<ParameterPoint>,
    s: &OfflineSettings,
) -> Result<FtDdVsModel> {
    let mut contexts: Vec<CoefficientContext> = training
        .iter()
        .map(|mu| CoefficientContext::new(BaseCoefficients::at(problem, mu)))
        .collect();
    let b = &data.blocks;
    let stage_x = |j: usize| -> Result<(ReducedModel, ReducedModel)> {
        let x = approximate_x(&b[j], &contexts, &opts(s.eps_x, s.n_s[j], s.seed)).map_err(|e| e.in_stage("schur approximation"))?;
        let f = approximate_xf(&b[j], &contexts, &opts(s.eps_x, s.n_f[j], s.seed)).map_err(|e| e.in_stage("load approximation"))?;
        log::info!("subdomain {}: N_S = {}, N_F = {}", j + 1, x.n_terms(), f.n_terms());
        Ok((x, f))
    };
    let (x0, f0) = stage_x(0)?;
    let (x1, f1) = stage_x(1)?;
    let xs = [x0, x1];
    let xf = [f0, f1];
    let n_gamma = partition.n_interface();
    let affine_s = assemble_affine_s(b, &xs, n_gamma);
    let affine_f = assemble_affine_f(b, &xf, n_gamma);
    log::info!("affine interface problem: m_S = {}, m_F = {}", affine_s.m_s(), affine_f.m_f());
    for c in contexts.iter_mut() {
        fill_schur_zetas(c, &xs, &xf, &mut OpCounter::default());
    }
    let interface = build_interface_rom(&affine_s, &affine_f, &contexts, &opts(s.eps_interface, s.n_gamma, s.seed))
        .map_err(|e| e.in_stage("interface ROM"))?;
    for c in contexts.iter_mut() {
        c.interface = interface.coefficients(c, &mut OpCounter::default());
    }
    let interior = [0, 1].map(|j| build_subdomain_rom(&b[j], &interface, &contexts, &opts(s.eps_interior, s.n_i[j], s.seed)));
    let [i0, i1] = interior;
    let interior = [
        i0.map_err(|e| e.in_stage("subdomain ROM"))?,
        i1.map_err(|e| e.in_stage("subdomain ROM"))?,
    ];
    Ok(FtDdVsModel {
        problem: problem.clone(),
        partition: partition.clone(),
        xs,
        xf,
        affine_s,
        affine_f,
        interface,
        interior,
        training,
    })
}

impl FtDdVsModel {
    pub fn n_free(&self) -> usize {
        self.partition.n_free
    }

    /// Context with `X_j`, `x_j` and interface coefficients filled in.
    pub fn context(&self, mu: &ParameterPoint, counter: &mut OpCounter) -> CoefficientContext {
        let mut ctx = CoefficientContext::new(BaseCoefficients::at(&self.problem, mu));
        counter.scalar_ops += (ctx.base.as_ref().map_or(0, |b| b.alpha.len() + 2 * b.beta.len() + 1)) as u64;
        fill_schur_zetas(&mut ctx, &self.xs, &self.xf, counter);
        ctx.interface = self.interface.coefficients(&ctx, counter);
        ctx
    }

    /// All expansion coefficients at `mu`. No work scales with the mesh.
    pub fn coefficients(&self, mu: &ParameterPoint, counter: &mut OpCounter) -> OnlineCoefficients {
        let ctx = self.context(mu, counter);
        let interior = [self.interior[0].zetas(&ctx, counter), self.interior[1].zetas(&ctx, counter)];
        OnlineCoefficients {
            interface: ctx.interface,
            interior,
        }
    }

    /// `u_N(mu)` on the free dofs.
    pub fn evaluate_full_field(&self, mu: &ParameterPoint) -> Result<Vec<C64>> {
        let c = self.coefficients(mu, &mut OpCounter::default());
        let g = self.interface.model.solution.expand_complex(&c.interface);
        let i0 = self.interior[0].solution.expand_complex(&c.interior[0]);
        let i1 = self.interior[1].solution.expand_complex(&c.interior[1]);
        self.partition.scatter(&g, [&i0, &i1])
    }

    /// Free-dof field extended by zero to every mesh vertex.
    pub fn to_vertices(&self, mesh: &Mesh2D, free: &[f64]) -> Result<Vec<f64>> {
        if free.len() != self.n_free() || mesh.n_free() != self.n_free() {
            return Err(Error::ArtifactMismatch(format!(
                "field has {} values, model {} free dofs, mesh {}",
                free.len(),
                self.n_free(),
                mesh.n_free()
            )));
        }
        Ok(mesh.dof_map().iter().map(|d| d.map_or(0.0, |k| free[k])).collect())
    }

    /// Mode matrix `[c^Re_1, .., c^Re_K, c^Im_1, .., c^Im_K]` of all expansions scattered to the free dofs.
    pub fn reconstruction_basis(&self) -> ReconstructionBasis {
        let p = &self.partition;
        let sols = [
            (&self.interface.model.solution, &p.interface_dofs),
            (&self.interior[0].solution, &p.interior_dofs[0]),
            (&self.interior[1].solution, &p.interior_dofs[1]),
        ];
        let k: usize = sols.iter().map(|(s, _)| s.n_terms()).sum();
        let mut b = DMatrix::<f64>::zeros(p.n_free, 2 * k);
        let mut col = 0;
        for (s, dofs) in sols {
            for m in &s.modes {
                for (i, &d) in dofs.iter().enumerate() {
                    b[(d, col)] = m.c_re[i];
                    b[(d, col + k)] = m.c_im[i];
                }
                col += 1;
            }
        }
        ReconstructionBasis { modes: b, n_terms: k }
    }

    /// Coefficient matrix `Z` (`2K x N_omega`) of all modes at every frequency node.
    pub fn frequency_coefficients(&self, xi: &[f64], grid: &FrequencyGrid, counter: &mut OpCounter) -> DMatrix<f64> {
        let k = self.interface.n_terms() + self.interior[0].n_terms() + self.interior[1].n_terms();
        let mut z = DMatrix::<f64>::zeros(2 * k, grid.n_omega);
        for (j, &w) in grid.nodes.iter().enumerate() {
            let c = self.coefficients(&ParameterPoint::new(w, xi.to_vec()), counter);
            let mut row = 0;
            for zz in [&c.interface, &c.interior[0], &c.interior[1]] {
                for m in 0..zz.len() {
                    z[(row, j)] = zz.re[m];
                    z[(row + k, j)] = zz.im[m];
                    row += 1;
                }
            }
        }
        z
    }

    /// Time trajectory on the free dofs (one column per time) for parameter `xi`.
    pub fn reconstruct(&self, xi: &[f64], basis: &ReconstructionBasis, kernels: &TimeKernels, counter: &mut OpCounter) -> DMatrix<f64> {
        let z = self.frequency_coefficients(xi, &kernels.grid, counter);
        let k = basis.n_terms;
        let t = if k == 0 {
            DMatrix::<f64>::zeros(0, kernels.a.ncols())
        } else {
            let mut t = DMatrix::<f64>::zeros(2 * k, kernels.a.ncols());
            t.rows_mut(0, k).gemm(1.0, &z.rows(0, k), &kernels.a, 0.0);
            t.rows_mut(k, k).gemm(1.0, &z.rows(k, k), &kernels.b, 0.0);
            t
        };
        counter.expansion_flops += (2 * basis.modes.nrows() * basis.modes.ncols() * t.ncols()) as u64;
        &basis.modes * t
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionBasis {
    pub modes: DMatrix<f64>,
    pub n_terms: usize,
}

/// Inverse-transform kernels `a_j(t_m)`, `b_j(t_m)` as `N_omega x n_t` matrices.
#[derive(Debug, Clone)]
pub struct TimeKernels {
    pub grid: FrequencyGrid,
    pub times: Vec<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl TimeKernels {
    pub fn new(grid: &FrequencyGrid, times: &[f64]) -> Self {
        let mut a = DMatrix::<f64>::zeros(grid.n_omega, times.len());
        let mut b = DMatrix::<f64>::zeros(grid.n_omega, times.len());
        for (m, &t) in times.iter().enumerate() {
            let (ka, kb) = grid.time_kernels(t);
            a.column_mut(m).copy_from_slice(&ka);
            b.column_mut(m).copy_from_slice(&kb);
        }
        Self {
            grid: grid.clone(),
            times: times.to_vec(),
            a,
            b,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frequency::{inverse_transform, lgl_grid};
    use crate::linalg::cnorm;
    use crate::mesh_fem::build_mesh;
    use crate::reference::direct_frequency_solve;
    use crate::schur_dd::dd_solve;

    fn settings(n: usize) -> OfflineSettings {
        OfflineSettings {
            eps_x: 1e-10,
            eps_interface: 1e-10,
            eps_interior: 1e-10,
            n_s: [n; 2],
            n_f: [n; 2],
            n_gamma: n,
            n_i: [n; 2],
            seed: 4,
        }
    }

    fn build(p: &ProblemDefinition, nx: usize, n: usize) -> (FtDdVsModel, OfflineData) {
        let mesh = build_mesh(nx, nx).unwrap();
        let (data, part) = assemble_offline_data(p, &mesh).unwrap();
        let train = training_points(p, 4, 5, 15.0, 2);
        (build_offline(p, &data, &part, train, &settings(n)).unwrap(), data)
    }

    #[test]
    fn training_sample_matches_recovery_path() {
        let p = ProblemDefinition::rd2();
        let (model, data) = build(&p, 8, 8);
        let k = model.interior[0].solution.chosen[0];
        let mu = &model.training[k];
        let u = model.evaluate_full_field(mu).unwrap();
        let exact = dd_solve(&data.blocks, &model.partition, &BaseCoefficients::at(&p, mu)).unwrap();
        let d: Vec<C64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        assert!(cnorm(&d) < 1e-3 * cnorm(&exact), "{}", cnorm(&d) / cnorm(&exact));
    }

    #[test]
    fn held_out_point_matches_monolithic_solve() {
        let p = ProblemDefinition::heat();
        let (model, data) = build(&p, 8, 10);
        let mu = ParameterPoint::new(7.3, vec![1.37, 1.81]);
        let u = model.evaluate_full_field(&mu).unwrap();
        let exact = direct_frequency_solve(&p, &data.op, &data.rhs, &mu).unwrap();
        let d: Vec<C64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
        assert!(cnorm(&d) < 1e-2 * cnorm(&exact), "{}", cnorm(&d) / cnorm(&exact));
    }

    #[test]
    fn gemm_reconstruction_equals_inverse_transform() {
        let p = ProblemDefinition::rd1();
        let (model, _) = build(&p, 6, 3);
        let grid = lgl_grid(15, 15.0).unwrap();
        let times = [0.0, 0.13, 0.5, 1.0];
        let kernels = TimeKernels::new(&grid, &times);
        let basis = model.reconstruction_basis();
        let xi = [1.2, 1.5, 1.7, 1.1];
        let u = model.reconstruct(&xi, &basis, &kernels, &mut OpCounter::default());
        let hats: Vec<Vec<C64>> = grid
            .nodes
            .iter()
            .map(|&w| model.evaluate_full_field(&ParameterPoint::new(w, xi.to_vec())).unwrap())
            .collect();
        for (m, &t) in times.iter().enumerate() {
            let v = inverse_transform(&hats, &grid, t).unwrap();
            for (i, x) in v.iter().enumerate() {
                assert!((u[(i, m)] - x).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn zero_load_gives_zero_field() {
        let mut p = ProblemDefinition::rd1();
        p.sources.iter_mut().for_each(|s| s.coef.scale = 0.0);
        let (model, _) = build(&p, 6, 3);
        assert_eq!(model.interface.n_terms(), 0);
        let u = model.evaluate_full_field(&ParameterPoint::new(2.0, vec![1.5; 4])).unwrap();
        assert!(u.iter().all(|z| z.norm() == 0.0));
        let grid = lgl_grid(5, 15.0).unwrap();
        let kern = TimeKernels::new(&grid, &[0.0, 0.5]);
        let r = model.reconstruct(&[1.5; 4], &model.reconstruction_basis(), &kern, &mut OpCounter::default());
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn offline_is_deterministic() {
        let p = ProblemDefinition::heat();
        let (a, _) = build(&p, 6, 3);
        let (b, _) = build(&p, 6, 3);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn vertex_field_is_zero_on_boundary() {
        let p = ProblemDefinition::heat();
        let mesh = build_mesh(6, 6).unwrap();
        let (model, _) = build(&p, 6, 2);
        let free: Vec<f64> = (0..model.n_free()).map(|i| i as f64 + 1.0).collect();
        let v = model.to_vertices(&mesh, &free).unwrap();
        for (k, &on) in mesh.boundary_flags.iter().enumerate() {
            assert_eq!(v[k] == 0.0, on);
        }
    }
}
