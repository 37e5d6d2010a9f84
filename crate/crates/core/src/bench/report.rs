use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::artifact::TermSummary;
use crate::error::Result;

/// Error of one online sample against its reference trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleError {
    pub index: usize,
    pub xi: Vec<f64>,
    /// Relative `L2(0, T; V_h)` error.
    pub error: f64,
    /// Relative `V_h` errors at the probe times.
    pub at_times: Vec<f64>,
}

/// Wall-clock statistics; never part of the deterministic outputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub online_per_sample: Vec<f64>,
    pub reference_per_sample: Vec<f64>,
    pub online_mean: f64,
    pub reference_mean: f64,
    pub offline_seconds: f64,
}

impl Timing {
    /// Reference time over online time.
    pub fn speedup(&self) -> f64 {
        self.reference_mean / self.online_mean
    }
}

/// Instrumented online work per sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpsSummary {
    pub coefficient_scalar_ops: u64,
    pub coefficient_vector_ops: u64,
    pub expansion_flops: u64,
}

/// Vertex values of one sample at one time, for heatmaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub xi: Vec<f64>,
    pub rom: Vec<f64>,
    pub reference: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub config: RunConfig,
    pub config_hash: String,
    pub terms: TermSummary,
    pub probe_times: Vec<f64>,
    pub samples: Vec<SampleError>,
    /// Mean relative `L2(0, T; V_h)` error against the time-stepping reference.
    pub eps_u: f64,
    /// Mean error of the ROM against the closed-form solution, when one exists.
    pub eps_u_analytical: Option<f64>,
    /// Error of the time-stepping reference against the closed-form solution.
    pub reference_eps_analytical: Option<f64>,
    /// Mean over samples of the relative `V_h` error at each time level.
    pub error_vs_time: Vec<(f64, f64)>,
    pub ops: OpsSummary,
    pub timing: Timing,
    pub snapshot: Option<FieldSnapshot>,
}

fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

impl ErrorReport {
    pub fn stem(&self) -> String {
        format!("{}_{}", self.config.problem.name(), &self.config_hash[..12])
    }

    /// Writes the JSON report plus the deterministic CSVs and the timing CSV.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let stem = self.stem();
        let json = dir.join(format!("report_{stem}.json"));
        serde_json::to_writer_pretty(std::io::BufWriter::new(std::fs::File::create(&json)?), self)?;
        let errors = dir.join(format!("errors_{stem}.csv"));
        std::fs::write(&errors, self.errors_csv())?;
        let curve = dir.join(format!("error_vs_time_{stem}.csv"));
        std::fs::write(&curve, self.error_vs_time_csv())?;
        let timing = dir.join(format!("timing_{stem}.csv"));
        std::fs::write(&timing, self.timing_csv())?;
        Ok(vec![json, errors, curve, timing])
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from("sample");
        let d = self.samples.first().map_or(0, |x| x.xi.len());
        for k in 0..d {
            let _ = write!(s, ",xi{}", k + 1);
        }
        s.push_str(",eps_u");
        for t in &self.probe_times {
            let _ = write!(s, ",err_t{t}");
        }
        s.push('\n');
        for e in &self.samples {
            let _ = write!(s, "{}", e.index);
            for x in &e.xi {
                let _ = write!(s, ",{}", sci(*x));
            }
            let _ = write!(s, ",{}", sci(e.error));
            for x in &e.at_times {
                let _ = write!(s, ",{}", sci(*x));
            }
            s.push('\n');
        }
        s
    }

    pub fn error_vs_time_csv(&self) -> String {
        let mut s = String::from("t,mean_relative_error\n");
        for (t, e) in &self.error_vs_time {
            let _ = writeln!(s, "{t:.6},{}", sci(*e));
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("sample,online_s,reference_s\n");
        for (k, (a, b)) in self.timing.online_per_sample.iter().zip(&self.timing.reference_per_sample).enumerate() {
            let _ = writeln!(s, "{k},{a:.6e},{b:.6e}");
        }
        s
    }

    /// Two-row comparison of the reduced model and the time-stepping reference.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} (h = {:.4}, tau = {:.1e}, M = {}, N_gamma = {}, N_I = {:?})",
            self.config.problem.name(),
            1.0 / self.config.nx as f64,
            self.config.tau,
            self.samples.len(),
            self.terms.n_gamma,
            self.terms.n_i
        );
        let _ = writeln!(s, "{:<10} {:>14} {:>20}", "method", "eps_u", "online time (s)");
        let _ = writeln!(s, "{:<10} {:>14.3e} {:>20.3e}", "FT-DD-VS", self.eps_u, self.timing.online_mean);
        let _ = writeln!(s, "{:<10} {:>14} {:>20.3e}", "FEM-BE", "-", self.timing.reference_mean);
        if let Some(a) = self.eps_u_analytical {
            let _ = writeln!(s, "error against the closed-form solution: {a:.3e}");
        }
        let _ = writeln!(s, "speedup: {:.1}x", self.timing.speedup());
        s
    }
}

/// Term-count sweep of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: String,
    pub problem: String,
    pub config_hash: String,
    pub n: Vec<usize>,
    /// Mean relative error per term count, one column per series.
    pub series: Vec<(String, Vec<f64>)>,
}

impl SweepResult {
    pub fn stem(&self) -> String {
        format!("{}_{}_{}", self.kind, self.problem, &self.config_hash[..12])
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("n");
        for (name, _) in &self.series {
            let _ = write!(s, ",{name}");
        }
        s.push('\n');
        for (k, n) in self.n.iter().enumerate() {
            let _ = write!(s, "{n}");
            for (_, v) in &self.series {
                let _ = write!(s, ",{}", sci(v[k]));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let json = dir.join(format!("sweep_{}.json", self.stem()));
        let mut f = std::fs::File::create(&json)?;
        f.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        let csv = dir.join(format!("sweep_{}.csv", self.stem()));
        std::fs::write(&csv, self.csv())?;
        Ok(vec![json, csv])
    }
}

/// Checks that `values` is non-increasing up to a relative fluctuation `slack`.
pub fn is_non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
}
