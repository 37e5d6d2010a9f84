use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::plot;
use super::report::{ErrorReport, FieldSnapshot, OpsSummary, SampleError, SweepResult, Timing};
use crate::artifact::OfflineArtifact;
use crate::complex_vs::OpCounter;
use crate::error::{Error, Result};
use crate::frequency::{inverse_transform, lgl_grid, FrequencyGrid, ParameterPoint};
use crate::linalg::{cnorm, spectral_norm, DenseComplexLu, C64};
use crate::mesh_fem::{build_mesh, Mesh2D, ProblemDefinition};
use crate::model::{assemble_offline_data, build_offline, parameter_samples, training_points, FtDdVsModel, OfflineData, TimeKernels};
use crate::reference::{
    analytical_heat_field, direct_frequency_solve, fem_be_solve, mass_norm_sq, relative_l2_time_error, step_count, Trajectory,
};
use crate::schur_dd::{
    approximate_x, assemble_affine_s_local, dd_solve, schur_direct, BaseCoefficients, CoefficientContext,
};

/// Times at which per-sample errors are reported.
pub const PROBE_TIMES: [f64; 2] = [0.2, 0.8];

const TRAINING_STREAM: u64 = 1;
const ONLINE_STREAM: u64 = 2;
const VALIDATION_STREAM: u64 = 3;

/// Mesh, assembled data and problem for a configuration.
pub struct Setup {
    pub problem: ProblemDefinition,
    pub mesh: Mesh2D,
    pub data: OfflineData,
    pub partition: crate::mesh_fem::DomainPartition,
}

impl Setup {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let problem = config.problem_definition()?;
        let mesh = build_mesh(config.nx, config.ny).map_err(|e| e.in_stage("mesh"))?;
        let (data, partition) = assemble_offline_data(&problem, &mesh)?;
        Ok(Self { problem, mesh, data, partition })
    }
}

pub fn training_set(config: &RunConfig, problem: &ProblemDefinition) -> Vec<ParameterPoint> {
    training_points(
        problem,
        config.training.n_xi,
        config.training.n_omega_per_xi,
        config.omega_max,
        config.stream_seed(TRAINING_STREAM),
    )
}

/// Offline stage in memory.
pub fn run_offline(config: &RunConfig, setup: &Setup) -> Result<OfflineArtifact> {
    let start = Instant::now();
    let training = training_set(config, &setup.problem);
    let model = build_offline(&setup.problem, &setup.data, &setup.partition, training, &config.offline_settings())?;
    let secs = start.elapsed().as_secs_f64();
    let art = OfflineArtifact::new(config, model, secs);
    let t = &art.terms;
    log::info!(
        "offline {}: N_S = {:?}, N_F = {:?}, m_S = {}, m_F = {}, N_gamma = {}, N_I = {:?} in {:.2}s",
        config.problem.name(),
        t.n_s,
        t.n_f,
        t.m_s,
        t.m_f,
        t.n_gamma,
        t.n_i,
        secs
    );
    log::debug!("interface residual history {:?}", t.interface_history);
    Ok(art)
}

pub fn artifact_path(config: &RunConfig) -> PathBuf {
    config.output_dir.join(format!("offline_{}_{}.json", config.problem.name(), config.short_hash()))
}

/// Trains every ROM and writes the artifact; returns its path.
pub fn cmd_offline(config: &RunConfig) -> Result<PathBuf> {
    let setup = Setup::new(config)?;
    let art = run_offline(config, &setup)?;
    let path = artifact_path(config);
    art.save(&path)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// Reduced-model trajectory at one parameter with its timing and instrumented counts.
pub struct OnlineRun {
    pub field: nalgebra::DMatrix<f64>,
    pub seconds: f64,
    pub ops: OpCounter,
}

/// Everything reused across online samples.
pub struct OnlineEngine<'a> {
    pub model: &'a FtDdVsModel,
    pub basis: crate::model::ReconstructionBasis,
    pub kernels: TimeKernels,
}

impl<'a> OnlineEngine<'a> {
    pub fn new(model: &'a FtDdVsModel, grid: &FrequencyGrid, times: &[f64]) -> Self {
        Self {
            model,
            basis: model.reconstruction_basis(),
            kernels: TimeKernels::new(grid, times),
        }
    }

    pub fn run(&self, xi: &[f64]) -> OnlineRun {
        let mut ops = OpCounter::default();
        let start = Instant::now();
        let field = self.model.reconstruct(xi, &self.basis, &self.kernels, &mut ops);
        OnlineRun {
            field,
            seconds: start.elapsed().as_secs_f64(),
            ops,
        }
    }
}

fn time_grid(config: &RunConfig, problem: &ProblemDefinition) -> Result<Vec<f64>> {
    let n = step_count(problem.final_time, config.tau)?;
    Ok((0..=n).map(|m| m as f64 * config.tau).collect())
}

fn columns(m: &nalgebra::DMatrix<f64>) -> Vec<&[f64]> {
    m.as_slice().chunks(m.nrows().max(1)).collect()
}

fn relative_at(mass: &crate::linalg::CsrMatrix, a: &[f64], r: &[f64]) -> Option<f64> {
    let den = mass_norm_sq(mass, r);
    if den <= 0.0 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(r).map(|(x, y)| x - y).collect();
    Some((mass_norm_sq(mass, &d) / den).sqrt())
}

fn timed_reference(setup: &Setup, xi: &[f64], tau: f64) -> Result<(Trajectory, f64)> {
    let start = Instant::now();
    let tr = fem_be_solve(&setup.problem, &setup.data.op, &setup.data.rhs, xi, tau)?;
    Ok((tr, start.elapsed().as_secs_f64()))
}

/// References for a batch, solved on up to `threads` workers.
fn reference_batch(setup: &Setup, xis: &[Vec<f64>], tau: f64, threads: usize) -> Result<Vec<(Trajectory, f64)>> {
    if threads <= 1 || xis.len() <= 1 {
        return xis.iter().map(|xi| timed_reference(setup, xi, tau)).collect();
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = xis.iter().map(|xi| s.spawn(move || timed_reference(setup, xi, tau))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidArgument("reference worker panicked".into()))))
            .collect()
    })
}

/// Online stage in memory against an already assembled setup.
pub fn run_online(art: &OfflineArtifact, config: &RunConfig, setup: &Setup) -> Result<ErrorReport> {
    art.check_compatible(config)?;
    let grid = lgl_grid(config.n_omega, config.omega_max)?;
    let times = time_grid(config, &setup.problem)?;
    let engine = OnlineEngine::new(&art.model, &grid, &times);
    let xis = parameter_samples(&setup.problem, config.samples, config.stream_seed(ONLINE_STREAM));
    let mass = &setup.data.op.mass;
    let probe_idx: Vec<usize> = PROBE_TIMES.iter().map(|&t| ((t / config.tau).round() as usize).min(times.len() - 1)).collect();
    let analytical: Option<Vec<Vec<f64>>> = setup
        .problem
        .has_analytical()
        .then(|| times.iter().map(|&t| analytical_heat_field(&setup.mesh, t)).collect());

    let mut samples = Vec::with_capacity(xis.len());
    let mut timing = Timing {
        offline_seconds: art.offline_seconds,
        ..Default::default()
    };
    let mut curve_sum = vec![0.0; times.len()];
    let mut curve_cnt = vec![0usize; times.len()];
    let mut eps_an = Vec::new();
    let mut ref_an = Vec::new();
    let mut ops = OpsSummary::default();
    let mut snapshot = None;
    for (b, batch) in xis.chunks(config.threads).enumerate() {
        let refs = reference_batch(setup, batch, config.tau, config.threads)?;
        for (k, (xi, (tr, ref_secs))) in batch.iter().zip(refs).enumerate() {
            let index = b * config.threads + k;
            let run = engine.run(xi);
            if index == 0 {
                ops = OpsSummary {
                    coefficient_scalar_ops: run.ops.scalar_ops,
                    coefficient_vector_ops: run.ops.vector_ops,
                    expansion_flops: run.ops.expansion_flops,
                };
            }
            let cols = columns(&run.field);
            let error = relative_l2_time_error(&cols, &tr.values, mass, config.tau)?;
            for (m, (a, r)) in cols.iter().zip(&tr.values).enumerate() {
                if let Some(e) = relative_at(mass, a, r) {
                    curve_sum[m] += e;
                    curve_cnt[m] += 1;
                }
            }
            let at_times = probe_idx
                .iter()
                .map(|&m| relative_at(mass, cols[m], &tr.values[m]).unwrap_or(f64::NAN))
                .collect();
            if let Some(an) = &analytical {
                eps_an.push(relative_l2_time_error(&cols, an, mass, config.tau)?);
                ref_an.push(relative_l2_time_error(&tr.values, an, mass, config.tau)?);
            }
            if index == 0 {
                let m = times.len() / 2;
                snapshot = Some(FieldSnapshot {
                    nx: config.nx,
                    ny: config.ny,
                    t: times[m],
                    xi: xi.clone(),
                    rom: art.model.to_vertices(&setup.mesh, cols[m])?,
                    reference: art.model.to_vertices(&setup.mesh, &tr.values[m])?,
                });
            }
            log::debug!("sample {index}: error {error:.3e}, online {:.3e}s, reference {ref_secs:.3e}s", run.seconds);
            timing.online_per_sample.push(run.seconds);
            timing.reference_per_sample.push(ref_secs);
            samples.push(SampleError {
                index,
                xi: xi.clone(),
                error,
                at_times,
            });
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    timing.online_mean = mean(&timing.online_per_sample);
    timing.reference_mean = mean(&timing.reference_per_sample);
    let errs: Vec<f64> = samples.iter().map(|s| s.error).collect();
    let report = ErrorReport {
        config: config.clone(),
        config_hash: config.hash(),
        terms: art.terms.clone(),
        probe_times: PROBE_TIMES.to_vec(),
        eps_u: mean(&errs),
        eps_u_analytical: (!eps_an.is_empty()).then(|| mean(&eps_an)),
        reference_eps_analytical: (!ref_an.is_empty()).then(|| mean(&ref_an)),
        error_vs_time: times
            .iter()
            .zip(curve_sum.iter().zip(&curve_cnt))
            .filter(|(_, (_, &c))| c > 0)
            .map(|(&t, (&s, &c))| (t, s / c as f64))
            .collect(),
        samples,
        ops,
        timing,
        snapshot,
    };
    log::info!(
        "online {}: eps_u = {:.3e} over {} samples, online {:.3e}s vs reference {:.3e}s per sample",
        config.problem.name(),
        report.eps_u,
        report.samples.len(),
        report.timing.online_mean,
        report.timing.reference_mean
    );
    Ok(report)
}

/// Loads an artifact, evaluates `M` samples and writes the report files.
pub fn cmd_online(artifact: &Path, config: &RunConfig) -> Result<ErrorReport> {
    let art = OfflineArtifact::load(artifact)?;
    let setup = Setup::new(config)?;
    let report = run_online(&art, config, &setup)?;
    for p in report.write_all(&config.output_dir)? {
        log::info!("wrote {}", p.display());
    }
    print!("{}", report.table());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub xi: Vec<f64>,
    pub steps: usize,
    pub seconds: f64,
    /// Time-stepping error against the closed-form solution.
    pub analytical_error: Option<f64>,
    /// Inverse transform of direct frequency solves against the closed-form solution.
    pub fourier_round_trip_error: Option<f64>,
    pub trajectory_csv: PathBuf,
}

/// Direct frequency solves on the configured grid, inverse-transformed to the time grid.
pub fn fourier_round_trip(setup: &Setup, grid: &FrequencyGrid, times: &[f64], xi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let hats: Vec<Vec<C64>> = grid
        .nodes
        .iter()
        .map(|&w| direct_frequency_solve(&setup.problem, &setup.data.op, &setup.data.rhs, &ParameterPoint::new(w, xi.to_vec())))
        .collect::<Result<_>>()?;
    times.iter().map(|&t| inverse_transform(&hats, grid, t)).collect()
}

/// Time-stepping reference at one parameter, with closed-form checks when available.
pub fn cmd_reference(config: &RunConfig, xi: Option<Vec<f64>>) -> Result<ReferenceSummary> {
    let setup = Setup::new(config)?;
    let xi = match xi {
        Some(x) => {
            if x.len() != setup.problem.dim() {
                return Err(Error::DimensionMismatch {
                    what: "parameter vector",
                    expected: setup.problem.dim(),
                    got: x.len(),
                });
            }
            x
        }
        None => parameter_samples(&setup.problem, 1, config.stream_seed(ONLINE_STREAM)).remove(0),
    };
    let (tr, seconds) = timed_reference(&setup, &xi, config.tau)?;
    let (analytical_error, fourier_round_trip_error) = if setup.problem.has_analytical() {
        let exact: Vec<Vec<f64>> = tr.times.iter().map(|&t| analytical_heat_field(&setup.mesh, t)).collect();
        let mass = &setup.data.op.mass;
        let grid = lgl_grid(config.n_omega, config.omega_max)?;
        let ft = fourier_round_trip(&setup, &grid, &tr.times, &xi)?;
        (
            Some(relative_l2_time_error(&tr.values, &exact, mass, config.tau)?),
            Some(relative_l2_time_error(&ft, &exact, mass, config.tau)?),
        )
    } else {
        (None, None)
    };
    std::fs::create_dir_all(&config.output_dir)?;
    let path = config.output_dir.join(format!("reference_{}_{}.csv", config.problem.name(), config.short_hash()));
    tr.write_csv(&path, Some(&probe_dofs(&setup.mesh)))?;
    let summary = ReferenceSummary {
        xi,
        steps: tr.len() - 1,
        seconds,
        analytical_error,
        fourier_round_trip_error,
        trajectory_csv: path,
    };
    let json = config.output_dir.join(format!("reference_{}_{}.json", config.problem.name(), config.short_hash()));
    std::fs::write(&json, serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

/// Free dofs nearest to the subdomain centers and the interface midpoint.
pub fn probe_dofs(mesh: &Mesh2D) -> Vec<usize> {
    let dofs = mesh.dof_map();
    [[0.25, 0.5], [0.5, 0.5], [0.75, 0.5]]
        .iter()
        .filter_map(|p| {
            let i = (p[0] * mesh.nx as f64).round() as usize;
            let j = (p[1] * mesh.ny as f64).round() as usize;
            dofs[j * (mesh.nx + 1) + i]
        })
        .collect()
}

/// Writes tables and figures for the given reports and sweeps into `out`.
pub fn cmd_report(reports: &[PathBuf], sweeps: &[PathBuf], out: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() && sweeps.is_empty() {
        return Err(Error::InvalidArgument("report needs at least one report or sweep file".into()));
    }
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut table = String::new();
    let mut csv = String::from("problem,config_hash,method,eps_u,online_time_s\n");
    for path in reports {
        let r: ErrorReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let stem = r.stem();
        table.push_str(&r.table());
        table.push('\n');
        csv.push_str(&format!("{},{},FT-DD-VS,{:.6e},{:.6e}\n", r.config.problem.name(), r.config_hash, r.eps_u, r.timing.online_mean));
        csv.push_str(&format!("{},{},FEM-BE,,{:.6e}\n", r.config.problem.name(), r.config_hash, r.timing.reference_mean));
        let first: Vec<f64> = r.samples.iter().take(100).map(|s| s.error).collect();
        let p = out.join(format!("errors_first100_{stem}.svg"));
        plot::scatter_plot(&p, &format!("{}: errors for the first {} samples", r.config.problem.name(), first.len()), &first)?;
        written.push(p);
        for (k, t) in r.probe_times.iter().enumerate() {
            let v: Vec<f64> = r.samples.iter().take(100).map(|s| s.at_times[k]).collect();
            let p = out.join(format!("errors_first100_t{t}_{stem}.svg"));
            plot::scatter_plot(&p, &format!("{}: relative errors at t = {t}", r.config.problem.name()), &v)?;
            written.push(p);
        }
        let p = out.join(format!("error_vs_time_{stem}.svg"));
        plot::time_curve_plot(&p, &format!("{}: average relative error versus time", r.config.problem.name()), &r.error_vs_time)?;
        written.push(p);
        if let Some(s) = &r.snapshot {
            let p = out.join(format!("solution_{stem}.svg"));
            plot::heatmap_plot(&p, &format!("reduced solution at t = {:.2}", s.t), s.nx, s.ny, &s.rom)?;
            written.push(p);
            let p = out.join(format!("reference_{stem}.svg"));
            plot::heatmap_plot(&p, &format!("reference solution at t = {:.2}", s.t), s.nx, s.ny, &s.reference)?;
            written.push(p);
        }
    }
    for path in sweeps {
        let s: SweepResult = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let p = out.join(format!("decay_{}.svg", s.stem()));
        plot::decay_plot(&p, &format!("{} {}: average relative error versus N", s.problem, s.kind), &s.n, &s.series)?;
        written.push(p);
        table.push_str(&format!("sweep {} ({})\n{}\n", s.kind, s.problem, s.csv()));
    }
    let t = out.join("tables.txt");
    std::fs::write(&t, &table)?;
    written.push(t);
    let c = out.join("tables.csv");
    std::fs::write(&c, csv)?;
    written.push(c);
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Local Schur complement of subdomain 1 against the number of `X_1` terms.
    Schur,
    /// Interface solution against `N_gamma`.
    Interface,
    /// Interior solutions against `N_I`.
    Interior,
}

impl std::str::FromStr for SweepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schur" => Ok(SweepKind::Schur),
            "interface" => Ok(SweepKind::Interface),
            "interior" => Ok(SweepKind::Interior),
            other => Err(Error::InvalidArgument(format!("unknown sweep `{other}` (schur, interface, interior)"))),
        }
    }
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Schur => "schur",
            SweepKind::Interface => "interface",
            SweepKind::Interior => "interior",
        }
    }
}

pub fn validation_points(config: &RunConfig, problem: &ProblemDefinition) -> Vec<ParameterPoint> {
    training_points(problem, config.validation_samples, 1, config.omega_max, config.stream_seed(VALIDATION_STREAM))
}

fn rel(a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    cnorm(&d) / cnorm(b)
}

/// Mean validation error for `N = 1..=n_max` terms of one component.
pub fn run_sweep(config: &RunConfig, setup: &Setup, kind: SweepKind, n_max: usize) -> Result<SweepResult> {
    let problem = &setup.problem;
    let val = validation_points(config, problem);
    let ns: Vec<usize> = (1..=n_max).collect();
    let base: Vec<BaseCoefficients> = val.iter().map(|mu| BaseCoefficients::at(problem, mu)).collect();
    let series = match kind {
        SweepKind::Schur => {
            let train = training_set(config, problem);
            let ctx: Vec<CoefficientContext> = train.iter().map(|mu| CoefficientContext::new(BaseCoefficients::at(problem, mu))).collect();
            let b = &setup.data.blocks[0];
            let opts = crate::complex_vs::GreedyOptions { epsilon: config.tolerances.x, n_max, seed: config.seed };
            let x = approximate_x(b, &ctx, &opts)?;
            let exact: Vec<_> = base.iter().map(|c| schur_direct(b, c).map(|s| s.0)).collect::<Result<_>>()?;
            let errs = ns
                .iter()
                .map(|&n| {
                    let xn = x.truncated(n);
                    let aff = assemble_affine_s_local(b, &xn);
                    let mean = base
                        .iter()
                        .zip(&exact)
                        .map(|(c, s)| {
                            let mut ctx = CoefficientContext::new(c.clone());
                            ctx.xs[0] = xn.zetas(&ctx, &mut OpCounter::default());
                            spectral_norm(&(aff.evaluate(&ctx) - s)) / spectral_norm(s)
                        })
                        .sum::<f64>()
                        / base.len() as f64;
                    log::info!("schur sweep N_S1 = {n}: {mean:.3e}");
                    mean
                })
                .collect();
            vec![("S1".to_string(), errs)]
        }
        SweepKind::Interface | SweepKind::Interior => {
            let mut cfg = config.clone();
            if kind == SweepKind::Interface {
                cfg.caps.n_gamma = cfg.caps.n_gamma.max(n_max);
            } else {
                cfg.caps.n_i = cfg.caps.n_i.map(|n| n.max(n_max));
            }
            let art = run_offline(&cfg, setup)?;
            let model = &art.model;
            let ctxs: Vec<CoefficientContext> = val.iter().map(|mu| model.context(mu, &mut OpCounter::default())).collect();
            if kind == SweepKind::Interface {
                let exact: Vec<Vec<C64>> = ctxs
                    .iter()
                    .map(|c| {
                        let s = model.affine_s.evaluate(c);
                        let f = model.affine_f.evaluate(c);
                        DenseComplexLu::new(s, "affine interface system").map(|lu| lu.solve(&f))
                    })
                    .collect::<Result<_>>()?;
                let errs = ns
                    .iter()
                    .map(|&n| {
                        let rom = model.interface.truncated(n);
                        let mean = ctxs.iter().zip(&exact).map(|(c, e)| rel(&rom.evaluate(c), e)).sum::<f64>() / ctxs.len() as f64;
                        log::info!("interface sweep N_gamma = {n}: {mean:.3e}");
                        mean
                    })
                    .collect();
                vec![("interface".to_string(), errs)]
            } else {
                let exact: Vec<Vec<C64>> = base
                    .iter()
                    .map(|c| dd_solve(&setup.data.blocks, &setup.partition, c))
                    .collect::<Result<_>>()?;
                let part = &setup.partition;
                (0..2)
                    .map(|j| {
                        let errs = ns
                            .iter()
                            .map(|&n| {
                                let rom = model.interior[j].truncated(n);
                                ctxs.iter()
                                    .zip(&exact)
                                    .map(|(c, e)| {
                                        let z = rom.zetas(c, &mut OpCounter::default());
                                        let u = rom.solution.expand_complex(&z);
                                        rel(&u, &part.gather(e, &part.interior_dofs[j]))
                                    })
                                    .sum::<f64>()
                                    / ctxs.len() as f64
                            })
                            .collect();
                        (format!("subdomain{}", j + 1), errs)
                    })
                    .collect()
            }
        }
    };
    Ok(SweepResult {
        kind: kind.name().into(),
        problem: problem.id.name().into(),
        config_hash: config.hash(),
        n: ns,
        series,
    })
}

pub fn cmd_sweep(config: &RunConfig, kind: SweepKind, n_max: usize) -> Result<SweepResult> {
    let setup = Setup::new(config)?;
    let s = run_sweep(config, &setup, kind, n_max)?;
    for p in s.write_all(&config.output_dir)? {
        log::info!("wrote {}", p.display());
    }
    print!("{}", s.csv());
    Ok(s)
}
