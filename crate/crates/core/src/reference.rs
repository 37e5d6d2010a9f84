//! Ground-truth solvers: the monolithic frequency-domain solve, backward Euler
//! in time, and the closed-form heat solution.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{ParameterPoint, TimeProfile};
use crate::linalg::{cnorm, BandedLu, CsrMatrix, C64};
use crate::mesh_fem::{AffineOperator, AffineRhs, Mesh2D, ProblemDefinition};

const SOLVE_TOL: f64 = 1e-10;

fn complex_residual(re: &CsrMatrix, im: &CsrMatrix, x: &[C64], b: &[C64]) -> Vec<C64> {
    let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
    let xi: Vec<f64> = x.iter().map(|z| z.im).collect();
    let (rr, ri, ir, ii) = (re.mul_vec(&xr), re.mul_vec(&xi), im.mul_vec(&xr), im.mul_vec(&xi));
    b.iter()
        .enumerate()
        .map(|(k, bk)| bk - C64::new(rr[k] - ii[k], ri[k] + ir[k]))
        .collect()
}

/// Solves `(sum_t alpha_t K_t + i omega M) u = sum_q beta_q F_q` directly.
pub fn direct_frequency_solve(
    problem: &ProblemDefinition,
    op: &AffineOperator,
    rhs: &AffineRhs,
    mu: &ParameterPoint,
) -> Result<Vec<C64>> {
    let (re, im) = op.evaluate(problem, mu);
    let b = rhs.evaluate(problem, mu);
    if b.len() != re.nrows() {
        return Err(Error::DimensionMismatch {
            what: "load vector",
            expected: re.nrows(),
            got: b.len(),
        });
    }
    let lu = BandedLu::factor_combination(
        &[(C64::new(1.0, 0.0), &re), (C64::new(0.0, 1.0), &im)],
        "monolithic frequency system",
    )?;
    let mut x = b.clone();
    lu.solve_in_place(&mut x);
    let bn = cnorm(&b);
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = complex_residual(&re, &im, &x, &b);
    if cnorm(&r) > SOLVE_TOL * bn {
        lu.solve_in_place(&mut r);
        for (xk, dk) in x.iter_mut().zip(&r) {
            *xk += dk;
        }
        r = complex_residual(&re, &im, &x, &b);
    }
    let rel = cnorm(&r) / bn;
    if rel > SOLVE_TOL {
        return Err(Error::InaccurateSolve {
            context: "monolithic frequency system".into(),
            residual: rel,
            tolerance: SOLVE_TOL,
        });
    }
    Ok(x)
}

/// Real field values at `t_m = m tau`, `m = 0..=T/tau`, on the free dofs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub tau: f64,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Writes `t` followed by the selected dof values (all dofs if `probes` is `None`).
    pub fn write_csv(&self, path: &Path, probes: Option<&[usize]>) -> Result<()> {
        let n = self.values.first().map_or(0, Vec::len);
        let cols: Vec<usize> = probes.map_or_else(|| (0..n).collect(), <[usize]>::to_vec);
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(w, "t")?;
        for c in &cols {
            write!(w, ",u{c}")?;
        }
        writeln!(w)?;
        for (t, u) in self.times.iter().zip(&self.values) {
            write!(w, "{t:.6}")?;
            for &c in &cols {
                write!(w, ",{:.12e}", u[c])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Number of steps for a final time and step size, rejecting non-integral ratios.
pub fn step_count(final_time: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0) || !(final_time > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {tau} and final time {final_time} must be positive")));
    }
    let r = final_time / tau;
    let n = r.round();
    if (r - n).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::InvalidArgument(format!("final time {final_time} is not a multiple of tau = {tau}")));
    }
    Ok(n as usize)
}

/// Backward Euler `(M / tau + A(xi)) u^m = M u^{m-1} / tau + f(t_m)` from `u^0 = 0`.
///
/// The step matrix is factored once; each step is checked against the
/// relative residual tolerance.
pub fn fem_be_solve(
    problem: &ProblemDefinition,
    op: &AffineOperator,
    rhs: &AffineRhs,
    xi: &[f64],
    tau: f64,
) -> Result<Trajectory> {
    let steps = step_count(problem.final_time, tau)?;
    let n = op.dim();
    let alphas = problem.alphas(xi);
    let mut terms: Vec<(f64, &CsrMatrix)> = alphas.iter().zip(&op.terms).map(|(&a, t)| (a, &t.matrix)).collect();
    terms.push((1.0 / tau, &op.mass));
    let step_matrix = CsrMatrix::linear_combination(&terms);
    let lu = BandedLu::<f64>::factor_combination(&[(1.0, &step_matrix)], "backward Euler step matrix")?;
    let coefs: Vec<(f64, TimeProfile)> = rhs
        .terms
        .iter()
        .map(|s| (s.spec.coef.eval(xi), s.spec.time))
        .collect();
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(vec![0.0; n]);
    let mut b = vec![0.0; n];
    for m in 1..=steps {
        let t = m as f64 * tau;
        let prev = &values[m - 1];
        op.mass.matvec(prev, &mut b);
        b.iter_mut().for_each(|v| *v /= tau);
        for ((c, g), s) in coefs.iter().zip(&rhs.terms) {
            let w = c * g.value(t);
            if w != 0.0 {
                crate::linalg::axpy(w, &s.vector, &mut b);
            }
        }
        let mut u = b.clone();
        lu.solve_in_place(&mut u);
        let bn = crate::linalg::norm2(&b);
        if bn > 0.0 {
            let au = step_matrix.mul_vec(&u);
            let res: f64 = au.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if res > SOLVE_TOL * bn {
                return Err(Error::InaccurateSolve {
                    context: format!("backward Euler step {m}"),
                    residual: res / bn,
                    tolerance: SOLVE_TOL,
                });
            }
        }
        times.push(t);
        values.push(u);
    }
    Ok(Trajectory { tau, times, values })
}

/// `u(x, t) = t / (pi (1 + t^2)) sin(pi x1) sin(pi x2)`.
pub fn analytical_heat(x: [f64; 2], t: f64) -> f64 {
    t / (PI * (1.0 + t * t)) * (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Whole-line Fourier transform of the closed-form heat solution at one point.
pub fn analytical_heat_spectrum(x: [f64; 2], omega: f64) -> C64 {
    TimeProfile::OddRational.spectrum(omega) / PI * (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Closed-form heat solution sampled on the free vertices.
pub fn analytical_heat_field(mesh: &Mesh2D, t: f64) -> Vec<f64> {
    mesh.free_vertices()
        .iter()
        .map(|&v| analytical_heat(mesh.vertices[v], t))
        .collect()
}

/// `||v||_M^2 = v^T M v`.
pub fn mass_norm_sq(mass: &CsrMatrix, v: &[f64]) -> f64 {
    crate::linalg::dot(v, &mass.mul_vec(v))
}

/// Relative `L2(0, T; V_h)` distance with the trapezoid rule in time and the
/// mass-matrix norm in space. Both trajectories share the time grid.
pub fn relative_l2_time_error<A: AsRef<[f64]>, B: AsRef<[f64]>>(approx: &[A], reference: &[B], mass: &CsrMatrix, tau: f64) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "trajectory length",
            expected: reference.len(),
            got: approx.len(),
        });
    }
    let m_norm2 = |v: &[f64]| mass_norm_sq(mass, v);
    let last = reference.len().saturating_sub(1);
    let (mut num, mut den) = (0.0, 0.0);
    for (k, (a, r)) in approx.iter().zip(reference).enumerate() {
        let (a, r) = (a.as_ref(), r.as_ref());
        let w = if k == 0 || k == last { 0.5 * tau } else { tau };
        let d: Vec<f64> = a.iter().zip(r).map(|(x, y)| x - y).collect();
        num += w * m_norm2(&d);
        den += w * m_norm2(r);
    }
    if den == 0.0 {
        return Err(Error::InvalidArgument("reference trajectory has zero norm".into()));
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh_fem::{assemble, build_mesh};

    #[test]
    fn zero_frequency_matches_real_solve() {
        let p = ProblemDefinition::rd1();
        let mesh = build_mesh(8, 8).unwrap();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let mu = ParameterPoint::new(0.0, vec![1.5, 1.2, 1.8, 1.1]);
        let u = direct_frequency_solve(&p, &op, &rhs, &mu).unwrap();
        let (re, _) = op.evaluate(&p, &mu);
        let b: Vec<f64> = rhs.evaluate(&p, &mu).iter().map(|z| z.re).collect();
        let lu = BandedLu::<f64>::factor_combination(&[(1.0, &re)], "test").unwrap();
        let mut x = b;
        lu.solve_in_place(&mut x);
        for (a, b) in u.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 * b.abs().max(1e-3));
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn negative_frequency_gives_conjugate() {
        // the whole-line spectra are conjugate-symmetric, so the solution is too
        let p = ProblemDefinition::rd2();
        let mesh = build_mesh(8, 8).unwrap();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let u = direct_frequency_solve(&p, &op, &rhs, &ParameterPoint::new(3.7, vec![3.2, 3.9])).unwrap();
        let v = direct_frequency_solve(&p, &op, &rhs, &ParameterPoint::new(-3.7, vec![3.2, 3.9])).unwrap();
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b.conj()).norm() < 1e-12 * a.norm().max(1e-6));
        }
    }

    #[test]
    fn heat_frequency_solution_approaches_exact_transform() {
        let p = ProblemDefinition::heat();
        let omega = 2.0;
        let mut errs = Vec::new();
        for nx in [8, 16] {
            let mesh = build_mesh(nx, nx).unwrap();
            let (op, rhs) = assemble(&p, &mesh).unwrap();
            let u = direct_frequency_solve(&p, &op, &rhs, &ParameterPoint::new(omega, vec![1.3, 1.7])).unwrap();
            let exact: Vec<C64> = mesh
                .free_vertices()
                .iter()
                .map(|&v| analytical_heat_spectrum(mesh.vertices[v], omega))
                .collect();
            let d: Vec<C64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
            errs.push(cnorm(&d) / cnorm(&exact));
        }
        assert!(errs[1] < 0.35 * errs[0], "{errs:?}");
        assert!(errs[1] < 2e-2);
    }

    #[test]
    fn analytical_values() {
        assert_eq!(analytical_heat([0.3, 0.4], 0.0), 0.0);
        assert!(analytical_heat([0.0, 0.4], 0.7).abs() < 1e-16);
        assert!((analytical_heat([0.5, 0.5], 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn zero_source_gives_zero_trajectory() {
        let mut p = ProblemDefinition::heat();
        p.sources.iter_mut().for_each(|s| s.coef.scale = 0.0);
        let mesh = build_mesh(6, 6).unwrap();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let tr = fem_be_solve(&p, &op, &rhs, &[1.5, 1.5], 0.01).unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_euler_time_error_is_first_order() {
        let p = ProblemDefinition::heat();
        let mesh = build_mesh(6, 6).unwrap();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let xi = [1.4, 1.6];
        let fine = fem_be_solve(&p, &op, &rhs, &xi, 1e-4).unwrap();
        let err = |tau: f64| {
            let tr = fem_be_solve(&p, &op, &rhs, &xi, tau).unwrap();
            let stride = (tau / 1e-4).round() as usize;
            let sub: Vec<Vec<f64>> = (0..tr.len()).map(|k| fine.values[k * stride].clone()).collect();
            relative_l2_time_error(&tr.values, &sub, &op.mass, tau).unwrap()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let rate = (e1 / e2).log2();
        assert!((0.8..1.3).contains(&rate), "{e1} {e2} {rate}");
    }

    #[test]
    fn backward_euler_tracks_analytical_heat() {
        let p = ProblemDefinition::heat();
        let mesh = build_mesh(16, 16).unwrap();
        let (op, rhs) = assemble(&p, &mesh).unwrap();
        let tau = 2e-3;
        let tr = fem_be_solve(&p, &op, &rhs, &[1.2, 1.9], tau).unwrap();
        let exact: Vec<Vec<f64>> = tr.times.iter().map(|&t| analytical_heat_field(&mesh, t)).collect();
        let e = relative_l2_time_error(&tr.values, &exact, &op.mass, tau).unwrap();
        assert!(e < 2e-2, "{e}");
    }

    #[test]
    fn step_count_rejects_fractional_ratio() {
        assert_eq!(step_count(1.0, 5e-4).unwrap(), 2000);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let tr = Trajectory { tau: 0.5, times: vec![0.0, 0.5], values: vec![vec![0.0, 1.0], vec![2.0, 3.0]] };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        tr.write_csv(&path, Some(&[1])).unwrap();
        let s = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "t,u1");
        assert_eq!(lines.len(), 3);
    }
}
