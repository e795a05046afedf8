use std::f64::consts::PI;

use super::{Forcing, ModelParams};
use crate::error::{Error, Result};
use crate::mesh::Point;

/// A closed-form solution of the forced system.
///
/// Case `A`: `u* = A e^{-t} cos(pi x) cos(pi y) cos(pi z)` with amplitude
/// `A = 0.1`, `v* = 1 - u*/2`, `w* = u*/2`. Normal derivatives vanish on every
/// face of the cube, so the zero-flux conditions hold exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedCase {
    pub id: String,
    pub amplitude: f64,
    pub boundary_compatible: bool,
}

pub fn manufactured_case(id: &str) -> Result<ManufacturedCase> {
    match id {
        "A" | "a" => Ok(ManufacturedCase {
            id: "A".into(),
            amplitude: 0.1,
            boundary_compatible: true,
        }),
        _ => Err(Error::UnknownCase(id.into())),
    }
}

impl ManufacturedCase {
    fn profile(&self, x: &Point, t: f64) -> (f64, [f64; 3]) {
        let (s0, c0) = (PI * x[0]).sin_cos();
        let (s1, c1) = (PI * x[1]).sin_cos();
        let (s2, c2) = (PI * x[2]).sin_cos();
        let a = self.amplitude * (-t).exp();
        let u = a * c0 * c1 * c2;
        let g = [-a * PI * s0 * c1 * c2, -a * PI * c0 * s1 * c2, -a * PI * c0 * c1 * s2];
        (u, g)
    }

    pub fn exact(&self, x: &Point, t: f64) -> [f64; 3] {
        let (u, _) = self.profile(x, t);
        [u, 1.0 - 0.5 * u, 0.5 * u]
    }

    /// Spatial gradients of (u*, v*, w*).
    pub fn gradient(&self, x: &Point, t: f64) -> [[f64; 3]; 3] {
        let (_, g) = self.profile(x, t);
        [g, g.map(|c| -0.5 * c), g.map(|c| 0.5 * c)]
    }

    /// Sources for the given constant coefficients.
    pub fn source(&self, x: &Point, t: f64, p: &ModelParams) -> Result<[f64; 3]> {
        let (d1, chi) = constant_coefficients(p)?;
        Ok(source_terms(self, x, t, d1, chi, p))
    }

    pub(crate) fn forcing(&self, p: &ModelParams) -> Result<ManufacturedForcing> {
        let (d1, chi) = constant_coefficients(p)?;
        Ok(ManufacturedForcing {
            case: self.clone(),
            params: p.clone(),
            d1,
            chi,
        })
    }
}

fn constant_coefficients(p: &ModelParams) -> Result<(f64, f64)> {
    match (p.d1.constant(), p.chi.constant()) {
        (Some(d1), Some(chi)) => Ok((d1, chi)),
        _ => Err(Error::InvalidArgument(
            "manufactured sources are only available for constant d1 and chi".into(),
        )),
    }
}

fn source_terms(case: &ManufacturedCase, x: &Point, t: f64, d1: f64, chi: f64, p: &ModelParams) -> [f64; 3] {
    let (u, g) = case.profile(x, t);
    let grad2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
    let pi2 = 3.0 * PI * PI;
    let v = 1.0 - 0.5 * u;
    let su = -u + pi2 * d1 * u - 0.5 * chi * (grad2 - pi2 * u * u) + 0.5 * p.lambda * u * u;
    let sv = 0.5 * u + 0.5 * p.rho * v * u + 0.5 * p.eta * v * u;
    let sw = -0.5 * u + 0.5 * p.d2 * pi2 * u - p.alpha * u * (1.0 - 0.5 * u) + 0.5 * p.beta * u;
    [su, sv, sw]
}

#[derive(Clone, Debug)]
pub(crate) struct ManufacturedForcing {
    case: ManufacturedCase,
    params: ModelParams,
    d1: f64,
    chi: f64,
}

impl Forcing for ManufacturedForcing {
    fn source(&self, x: &Point, t: f64) -> [f64; 3] {
        source_terms(&self.case, x, t, self.d1, self.chi, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parameter_set;

    #[test]
    fn centre_value_and_boundary_flux() {
        let c = manufactured_case("A").unwrap();
        assert!(c.exact(&[0.5, 0.5, 0.5], 0.0)[0].abs() < 1e-17);
        let g = c.gradient(&[0.0, 0.3, 0.7], 0.4);
        assert_eq!(g[0][0], 0.0);
        assert!(matches!(manufactured_case("Z"), Err(Error::UnknownCase(_))));
        let p = parameter_set(1).unwrap();
        assert!(c.source(&[0.1, 0.2, 0.3], 0.0, &p).unwrap().iter().all(|s| s.is_finite()));
    }
}
