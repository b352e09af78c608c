//! Named example instances.

use crate::error::{Error, Result};
use crate::model::{Instance, LatencyFunction as L};

/// Links `x` and `x + 1/2`.
pub fn fig_alg() -> Instance {
    Instance::affine(&[(1.0, 0.0), (1.0, 0.5)]).expect("valid preset")
}

/// Links `x` and `a2 x`.
pub fn fig_bad(a2: f64) -> Result<Instance> {
    Instance::affine(&[(1.0, 0.0), (a2, 0.0)])
}

/// Links `x`, `x` and `x/2 + 6/5`.
pub fn fig_mul() -> Instance {
    fig_mul_with(0.5).expect("valid preset")
}

/// Links `x`, `x` and `a3 x + 6/5`.
pub fn fig_mul_with(a3: f64) -> Result<Instance> {
    Instance::affine(&[(1.0, 0.0), (1.0, 0.0), (a3, 1.2)])
}

/// Links `x^2` and the free link `0`.
pub fn fig_non() -> Instance {
    Instance::new(vec![L::monomial(1.0, 2, 0.0), L::constant(0.0)]).expect("valid preset")
}

/// Links `x^2` and `a2 x`, the strictly increasing variant of [`fig_non`].
pub fn fig_non_with(a2: f64) -> Result<Instance> {
    Instance::new(vec![L::monomial(1.0, 2, 0.0), L::affine(a2, 0.0)])
}

/// `n - 1` links `x` and one constant link `1/(2(n-1))`.
pub fn fig_aff(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Domain(format!("fig-aff needs n >= 2, got {n}")));
    }
    let mut links = vec![L::affine(1.0, 0.0); n - 1];
    links.push(L::constant(1.0 / (2.0 * (n - 1) as f64)));
    Instance::new(links)
}

/// Links `x^d` and the constant `((d-1)/d)^d`.
pub fn fig_poly(d: u32) -> Result<Instance> {
    if d < 1 {
        return Err(Error::Domain("fig-poly needs d >= 1".into()));
    }
    let df = d as f64;
    let b = ((df - 1.0) / df).powi(d as i32);
    Instance::new(vec![L::monomial(1.0, d, 0.0), L::constant(b)])
}

/// Optional preset parameters; missing values fall back to `a2 = 2`, `n = 2`, `d = 3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PresetParams {
    pub a2: Option<f64>,
    pub a3: Option<f64>,
    pub n: Option<usize>,
    pub d: Option<u32>,
}

pub const NAMES: [&str; 6] = [
    "fig-alg", "fig-bad", "fig-mul", "fig-non", "fig-aff", "fig-poly",
];

pub fn by_name(name: &str, p: PresetParams) -> Result<Instance> {
    match name {
        "fig-alg" => Ok(fig_alg()),
        "fig-bad" => fig_bad(p.a2.unwrap_or(2.0)),
        "fig-mul" => fig_mul_with(p.a3.unwrap_or(0.5)),
        "fig-non" => match p.a2 {
            Some(a2) => fig_non_with(a2),
            None => Ok(fig_non()),
        },
        "fig-aff" => fig_aff(p.n.unwrap_or(2)),
        "fig-poly" => fig_poly(p.d.unwrap_or(3)),
        _ => Err(Error::Parse(format!(
            "unknown preset {name:?}, expected one of {}",
            NAMES.join(", ")
        ))),
    }
}
