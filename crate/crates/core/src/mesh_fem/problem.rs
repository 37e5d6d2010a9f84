use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frequency::{ParameterPoint, SourceTransform, TimeProfile};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemId {
    Heat,
    Rd1,
    Rd2,
    Custom,
}

impl ProblemId {
    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Heat => "heat",
            ProblemId::Rd1 => "rd1",
            ProblemId::Rd2 => "rd2",
            ProblemId::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(ProblemId::Heat),
            "rd1" => Ok(ProblemId::Rd1),
            "rd2" => Ok(ProblemId::Rd2),
            "custom" => Ok(ProblemId::Custom),
            other => Err(Error::InvalidArgument(format!("unknown problem `{other}`"))),
        }
    }
}

/// `scale * xi[component]`, or just `scale` when no component is referenced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamCoef {
    pub scale: f64,
    pub component: Option<usize>,
}

impl ParamCoef {
    pub const fn constant(scale: f64) -> Self {
        Self {
            scale,
            component: None,
        }
    }

    pub const fn linear(scale: f64, component: usize) -> Self {
        Self {
            scale,
            component: Some(component),
        }
    }

    pub fn eval(&self, xi: &[f64]) -> f64 {
        match self.component {
            Some(k) => self.scale * xi[k],
            None => self.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `int grad u . grad v`
    Diffusion,
    /// `int u v`
    Reaction,
}

/// One affine operator term `coef(xi) * a(u, v)` restricted to one subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub subdomain: usize,
    pub kind: TermKind,
    pub coef: ParamCoef,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceProfile {
    /// `sin(pi x1) sin(pi x2)`
    SinSin,
    /// `exp(rate (x1 + x2)^2)`
    ExpSquare { rate: f64 },
}

impl SpaceProfile {
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            SpaceProfile::SinSin => (PI * x[0]).sin() * (PI * x[1]).sin(),
            SpaceProfile::ExpSquare { rate } => (rate * (x[0] + x[1]).powi(2)).exp(),
        }
    }
}

/// One separable source term `coef(xi) * g(t) * h(x)` supported on one subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub subdomain: usize,
    pub space: SpaceProfile,
    pub time: TimeProfile,
    pub coef: ParamCoef,
}

/// A parametric parabolic problem on the unit square split at `x1 = 0.5`:
/// `u_t - div(c1 grad u) + c2 u = f` with homogeneous Dirichlet data and zero
/// initial state, where every coefficient is piecewise constant per subdomain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDefinition {
    pub id: ProblemId,
    pub parameter_box: Vec<(f64, f64)>,
    pub operator_terms: Vec<OperatorSpec>,
    pub sources: Vec<SourceSpec>,
    pub final_time: f64,
    #[serde(default)]
    pub transform: SourceTransform,
}

impl ProblemDefinition {
    /// Heat equation with known solution `t / (pi (t^2 + 1)) sin(pi x1) sin(pi x2)`.
    pub fn heat() -> Self {
        let mut sources = Vec::new();
        for sub in 0..2 {
            sources.push(SourceSpec {
                subdomain: sub,
                space: SpaceProfile::SinSin,
                time: TimeProfile::EvenRational,
                coef: ParamCoef::constant(1.0 / PI),
            });
        }
        // c = xi1 on D1, 2 xi2 on D2
        sources.push(SourceSpec {
            subdomain: 0,
            space: SpaceProfile::SinSin,
            time: TimeProfile::OddRational,
            coef: ParamCoef::linear(2.0 * PI, 0),
        });
        sources.push(SourceSpec {
            subdomain: 1,
            space: SpaceProfile::SinSin,
            time: TimeProfile::OddRational,
            coef: ParamCoef::linear(4.0 * PI, 1),
        });
        Self {
            id: ProblemId::Heat,
            parameter_box: vec![(1.0, 2.0); 2],
            operator_terms: vec![
                OperatorSpec {
                    subdomain: 0,
                    kind: TermKind::Diffusion,
                    coef: ParamCoef::linear(1.0, 0),
                },
                OperatorSpec {
                    subdomain: 1,
                    kind: TermKind::Diffusion,
                    coef: ParamCoef::linear(2.0, 1),
                },
            ],
            sources,
            final_time: 1.0,
            transform: SourceTransform::WholeLine,
        }
    }

    pub fn rd1() -> Self {
        let space = SpaceProfile::ExpSquare { rate: 5.0 };
        Self {
            id: ProblemId::Rd1,
            parameter_box: vec![(1.0, 2.0); 4],
            operator_terms: vec![
                OperatorSpec {
                    subdomain: 0,
                    kind: TermKind::Diffusion,
                    coef: ParamCoef::linear(100.0, 0),
                },
                OperatorSpec {
                    subdomain: 1,
                    kind: TermKind::Diffusion,
                    coef: ParamCoef::linear(10.0, 1),
                },
                OperatorSpec {
                    subdomain: 0,
                    kind: TermKind::Reaction,
                    coef: ParamCoef::linear(1.0, 2),
                },
                OperatorSpec {
                    subdomain: 1,
                    kind: TermKind::Reaction,
                    coef: ParamCoef::linear(0.1, 3),
                },
            ],
            sources: (0..2)
                .map(|sub| SourceSpec {
                    subdomain: sub,
                    space,
                    time: TimeProfile::Gaussian,
                    coef: ParamCoef::constant(1.0),
                })
                .collect(),
            final_time: 1.0,
            transform: SourceTransform::WholeLine,
        }
    }

    pub fn rd2() -> Self {
        let space = SpaceProfile::ExpSquare { rate: 5.0 };
        Self {
            id: ProblemId::Rd2,
            parameter_box: vec![(3.0, 4.0); 2],
            operator_terms: vec![
                // c1 vanishes on D1, leaving only the reaction term there
                OperatorSpec {
                    subdomain: 0,
                    kind: TermKind::Reaction,
                    coef: ParamCoef::linear(100.0, 1),
                },
                OperatorSpec {
                    subdomain: 1,
                    kind: TermKind::Diffusion,
                    coef: ParamCoef::linear(10.0, 0),
                },
            ],
            sources: (0..2)
                .map(|sub| SourceSpec {
                    subdomain: sub,
                    space,
                    time: TimeProfile::EvenRational,
                    coef: ParamCoef::constant(1.0),
                })
                .collect(),
            final_time: 1.0,
            transform: SourceTransform::WholeLine,
        }
    }

    pub fn preset(id: ProblemId) -> Result<Self> {
        match id {
            ProblemId::Heat => Ok(Self::heat()),
            ProblemId::Rd1 => Ok(Self::rd1()),
            ProblemId::Rd2 => Ok(Self::rd2()),
            ProblemId::Custom => Err(Error::InvalidArgument(
                "custom problems have no preset; build the definition directly".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.parameter_box.len()
    }

    /// Checks that every coefficient resolves against the parameter box.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        let coefs = self
            .operator_terms
            .iter()
            .map(|t| (t.coef, t.subdomain))
            .chain(self.sources.iter().map(|s| (s.coef, s.subdomain)));
        for (c, sub) in coefs {
            if let Some(k) = c.component {
                if k >= dim {
                    return Err(Error::UnknownCoefficient { index: k, dim });
                }
            }
            if sub > 1 {
                return Err(Error::IndexOutOfRange {
                    what: "subdomain",
                    index: sub,
                    len: 2,
                });
            }
        }
        if self.parameter_box.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::InvalidArgument("empty parameter interval".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidArgument("final time must be positive".into()));
        }
        Ok(())
    }

    /// Operator coefficient `alpha_t(xi)`.
    pub fn alpha(&self, term: usize, xi: &[f64]) -> f64 {
        self.operator_terms[term].coef.eval(xi)
    }

    pub fn alphas(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.operator_terms.len())
            .map(|t| self.alpha(t, xi))
            .collect()
    }

    /// `gamma(mu) = omega`.
    pub fn gamma(&self, mu: &ParameterPoint) -> f64 {
        mu.omega
    }

    /// Source coefficient `beta_q(mu)`; real and imaginary parts are the two
    /// affine rhs coefficients sharing the load vector of term `q`.
    pub fn beta(&self, q: usize, mu: &ParameterPoint) -> C64 {
        let s = &self.sources[q];
        self.transform.apply(s.time, mu.omega, self.final_time) * s.coef.eval(&mu.xi)
    }

    pub fn betas(&self, mu: &ParameterPoint) -> Vec<C64> {
        (0..self.sources.len()).map(|q| self.beta(q, mu)).collect()
    }

    /// Diffusion coefficient `c1` at a subdomain for the given parameters.
    pub fn diffusion(&self, subdomain: usize, xi: &[f64]) -> f64 {
        self.operator_terms
            .iter()
            .filter(|t| t.subdomain == subdomain && t.kind == TermKind::Diffusion)
            .map(|t| t.coef.eval(xi))
            .sum()
    }

    pub fn reaction(&self, subdomain: usize, xi: &[f64]) -> f64 {
        self.operator_terms
            .iter()
            .filter(|t| t.subdomain == subdomain && t.kind == TermKind::Reaction)
            .map(|t| t.coef.eval(xi))
            .sum()
    }

    /// Source value `f(x, t; xi)` for a point inside the given subdomain.
    pub fn source_value(&self, subdomain: usize, x: [f64; 2], t: f64, xi: &[f64]) -> f64 {
        self.sources
            .iter()
            .filter(|s| s.subdomain == subdomain)
            .map(|s| s.coef.eval(xi) * s.time.value(t) * s.space.value(x))
            .sum()
    }

    pub fn has_analytical(&self) -> bool {
        self.id == ProblemId::Heat
    }

    /// Map of a unit-cube point onto the parameter box.
    pub fn scale_parameters(&self, unit: &[f64]) -> Vec<f64> {
        self.parameter_box
            .iter()
            .zip(unit)
            .map(|(&(lo, hi), &u)| lo + (hi - lo) * u)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in [ProblemDefinition::heat(), ProblemDefinition::rd1(), ProblemDefinition::rd2()] {
            p.validate().unwrap();
        }
    }

    #[test]
    fn unknown_component_is_rejected() {
        let mut p = ProblemDefinition::heat();
        p.operator_terms[0].coef = ParamCoef::linear(1.0, 7);
        assert!(matches!(
            p.validate(),
            Err(Error::UnknownCoefficient { index: 7, dim: 2 })
        ));
    }

    #[test]
    fn gamma_is_frequency() {
        let p = ProblemDefinition::rd1();
        let mu = ParameterPoint::new(3.25, vec![1.0; 4]);
        assert_eq!(p.gamma(&mu), 3.25);
    }

    #[test]
    fn heat_source_matches_analytical_solution() {
        // f = u_t - c lap u for u = t / (pi (1 + t^2)) s(x), lap s = -2 pi^2 s
        let p = ProblemDefinition::heat();
        let xi = [1.3, 1.7];
        let x = [0.3, 0.6];
        let t: f64 = 0.45;
        let s = SpaceProfile::SinSin.value(x);
        let ut = (1.0 - t * t) / (PI * (1.0 + t * t).powi(2)) * s;
        let lap = -2.0 * PI * PI * t / (PI * (1.0 + t * t)) * s;
        let f = ut - xi[0] * lap;
        assert!((p.source_value(0, x, t, &xi) - f).abs() < 1e-14);
        assert_eq!(p.diffusion(1, &xi), 2.0 * xi[1]);
    }

    #[test]
    fn rd2_has_no_diffusion_on_first_subdomain() {
        let p = ProblemDefinition::rd2();
        assert_eq!(p.diffusion(0, &[3.0, 3.0]), 0.0);
        assert_eq!(p.reaction(0, &[3.0, 3.0]), 300.0);
        assert_eq!(p.reaction(1, &[3.0, 3.0]), 0.0);
    }
}
