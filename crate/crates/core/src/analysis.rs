//! Efficiency of capped equilibria, worst-case bounds for polynomial latency
//! classes and numeric estimates of the smoothness parameters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::capalg::{build_cap_curve, optimal_cap};
use crate::error::{Error, Result};
use crate::model::{cost_unchecked, Cap, Instance, LatencyFunction};
use crate::pricing::{spne_price_iteration, EquilibriumStatus};
use crate::tol;
use crate::wardrop::optimal_flow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Duopoly with latencies of degree at most one.
    #[serde(rename = "affine_8_7")]
    Affine87,
    /// Duopoly with polynomial latencies of degree `d >= 2`.
    PolyD,
    /// Class-free duopoly bound.
    #[serde(rename = "general_2")]
    General2,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub cap: Option<Cap>,
    pub cost_opt: f64,
    pub cost_at_cap: f64,
    pub ratio: f64,
    /// Worst-case ratio at an optimal cap for the instance's latency class.
    pub bound: Option<f64>,
    pub bound_kind: BoundKind,
    pub tolls: Option<Vec<f64>>,
    pub flow: Vec<f64>,
}

/// Applicable class bound: duopolies only, by the largest latency degree.
pub fn bound_for(inst: &Instance) -> (BoundKind, Option<f64>) {
    if inst.n() != 2 {
        return (BoundKind::None, None);
    }
    let d = inst
        .links()
        .iter()
        .map(LatencyFunction::degree)
        .max()
        .unwrap_or(0);
    if d <= 1 {
        (BoundKind::Affine87, Some(8.0 / 7.0))
    } else {
        (BoundKind::PolyD, bound_poly(d).ok())
    }
}

fn report(
    inst: &Instance,
    cap: Option<Cap>,
    tolls: Option<Vec<f64>>,
    flow: Vec<f64>,
) -> Result<EfficiencyReport> {
    let opt = optimal_flow(inst)?;
    let cost_opt = cost_unchecked(inst, &opt.flow.x);
    if cost_opt <= 0.0 {
        return Err(Error::Domain(
            "optimal cost is zero, ratio undefined".into(),
        ));
    }
    let cost = cost_unchecked(inst, &flow);
    let (bound_kind, bound) = bound_for(inst);
    Ok(EfficiencyReport {
        cap,
        cost_opt,
        cost_at_cap: cost,
        ratio: cost / cost_opt,
        bound,
        bound_kind,
        tolls,
        flow,
    })
}

/// `C(x(c)) / C(x*)`. Affine full-support instances use the cap curve; other
/// instances use the certified price iteration and fail with `NotApplicable`
/// when no equilibrium is found at this cap.
pub fn efficiency_ratio(inst: &Instance, cap: Cap) -> Result<EfficiencyReport> {
    match build_cap_curve(inst) {
        Ok(curve) => {
            let s = curve.state_at(cap);
            report(inst, Some(cap), Some(s.t), s.x)
        }
        Err(Error::NotApplicable(_)) => {
            let r = spne_price_iteration(inst, cap, 20_000, tol::EQ, tol::GRID_N)?;
            if r.status != EquilibriumStatus::Found {
                return Err(Error::NotApplicable(format!(
                    "no equilibrium at cap {cap}: {}",
                    r.certificate
                )));
            }
            let p = r
                .equilibria
                .into_iter()
                .next()
                .expect("found status carries a point");
            report(inst, Some(cap), Some(p.tolls), p.flow)
        }
        Err(e) => Err(e),
    }
}

/// Efficiency of an externally supplied flow.
pub fn efficiency_ratio_for_flow(inst: &Instance, x: &[f64]) -> Result<EfficiencyReport> {
    inst.check_len(x)?;
    crate::model::Flow::new(x.to_vec()).check_feasible(inst)?;
    report(inst, None, None, x.to_vec())
}

/// Efficiency at the optimal cap of an affine full-support instance.
pub fn efficiency_at_optimal_cap(inst: &Instance) -> Result<EfficiencyReport> {
    let r = optimal_cap(inst)?;
    report(inst, Some(Cap::new(r.c_star)?), Some(r.tolls), r.flow)
}

fn check_degree(d: u32, min: u32) -> Result<f64> {
    if d < min {
        return Err(Error::Domain(format!("degree must be >= {min}, got {d}")));
    }
    Ok(d as f64)
}

/// `(d+1)^((d+1)/d)`.
fn p(d: f64) -> f64 {
    (d + 1.0).powf((d + 1.0) / d)
}

/// Upper bound on the ratio at an optimal cap for polynomial latencies of degree `d`.
pub fn bound_poly(d: u32) -> Result<f64> {
    let d = check_degree(d, 1)?;
    Ok(1.0 / (1.0 - d / (2.0 * p(d))))
}

/// Ratio forced by instances without an uncapped equilibrium, degree `d >= 3`.
pub fn lower_bound_nonexistence(d: u32) -> Result<f64> {
    let d = check_degree(d, 3)?;
    Ok(p(d) / (p(d) - (d - 1.0)))
}

/// Class-level value of the first smoothness parameter for degree `d`.
pub fn mu1_class_bound(d: u32) -> Result<f64> {
    let d = check_degree(d, 1)?;
    Ok(d / p(d))
}

/// Class-level value of the second smoothness parameter for degree `d`.
pub fn mu2_class_bound(d: u32) -> Result<f64> {
    Ok(mu1_class_bound(d)? / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub d: u32,
    pub upper_bound: f64,
    pub lower_bound_nonexistence: Option<f64>,
}

pub fn bounds_table(d_max: u32) -> Vec<BoundRow> {
    (1..=d_max)
        .map(|d| BoundRow {
            d,
            upper_bound: bound_poly(d).expect("d >= 1"),
            lower_bound_nonexistence: lower_bound_nonexistence(d).ok(),
        })
        .collect()
}

const MU1_X_MAX: f64 = 10.0;
const COORD_ROUNDS: usize = 8;

/// Grid maximum of `f` over `[0,1]^2` followed by coordinatewise golden-section
/// polishing.
fn sup_unit_square(f: &(impl Fn(f64, f64) -> f64 + Sync), grid_n: usize) -> f64 {
    let h = 1.0 / grid_n as f64;
    let (mut u, mut v, mut best) = (0..=grid_n)
        .into_par_iter()
        .map(|i| {
            let u = i as f64 * h;
            (0..=grid_n)
                .map(|j| {
                    let v = j as f64 * h;
                    (u, v, f(u, v))
                })
                .fold(
                    (u, 0.0, f64::NEG_INFINITY),
                    |a, b| if b.2 > a.2 { b } else { a },
                )
        })
        .reduce(
            || (0.0, 0.0, f64::NEG_INFINITY),
            |a, b| {
                if b.2 > a.2 || (b.2 == a.2 && (b.0, b.1) < (a.0, a.1)) {
                    b
                } else {
                    a
                }
            },
        );
    for _ in 0..COORD_ROUNDS {
        let lo = (u - h).max(0.0);
        let hi = (u + h).min(1.0);
        let (nu, fu) = crate::pricing::golden_max(&mut |s| f(s, v), lo, hi, tol::REFINE_ITERS);
        if fu > best {
            u = nu;
            best = fu;
        }
        let lo = (v - h).max(0.0);
        let hi = (v + h).min(1.0);
        let (nv, fv) = crate::pricing::golden_max(&mut |s| f(u, s), lo, hi, tol::REFINE_ITERS);
        if fv > best {
            v = nv;
            best = fv;
        }
    }
    best.max(0.0)
}

fn check_grid(grid_n: usize) -> Result<()> {
    if grid_n < 2 {
        return Err(Error::Domain(format!("grid_n must be >= 2, got {grid_n}")));
    }
    Ok(())
}

/// Estimates `sup (l(x) - l(y)) y / (l(x) x)` over `x, y in (0, 10]`.
///
/// The ratio is scale invariant for monomials, and a positive intercept only
/// lowers it far from the origin, so the truncated box captures the supremum
/// for the latency families used here.
pub fn mu1_estimate(l: &LatencyFunction, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    let floor = MU1_X_MAX / grid_n as f64;
    if l.value(floor) <= 0.0 || l.value(MU1_X_MAX) <= 0.0 {
        return Err(Error::Domain("latency must be positive for x > 0".into()));
    }
    let f = |u: f64, v: f64| {
        let x = (u * MU1_X_MAX).max(floor * 1e-3);
        let y = v * MU1_X_MAX;
        let lx = l.value(x);
        (lx - l.value(y)) * y / (lx * x)
    };
    Ok(sup_unit_square(&f, grid_n))
}

/// Estimates `sup (l(x) - l(y)) (y + 1 - 2x) / l(x)` over `x in [1/2, 1]`,
/// `y in [0, x]`.
pub fn mu2_estimate(l: &LatencyFunction, grid_n: usize) -> Result<f64> {
    check_grid(grid_n)?;
    if l.value(0.5) <= 0.0 {
        return Err(Error::Domain("latency must be positive on [1/2, 1]".into()));
    }
    let f = |u: f64, s: f64| {
        let x = 0.5 + 0.5 * u;
        let y = s * x;
        let lx = l.value(x);
        (lx - l.value(y)) * (y + 1.0 - 2.0 * x) / lx
    };
    Ok(sup_unit_square(&f, grid_n))
}
