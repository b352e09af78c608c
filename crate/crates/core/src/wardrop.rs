//! Wardrop equilibria for given tolls and the system-optimal flow.
//!
//! On parallel links an equilibrium is described by a single level `K`: every
//! used link has effective cost `l_i(x_i) + t_i = K`, every unused link has
//! `l_i(0) + t_i >= K`. The routed amount is a nondecreasing function of `K`,
//! so the equilibrium is found by locating the level at which it equals the
//! demand. Links with constant latency absorb any amount at their level and are
//! handled separately.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{check_tolls, Flow, Instance, LatencyFunction};
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WardropSolution {
    pub flow: Flow,
    /// Links carrying more than [`tol::SUPPORT`].
    pub support: Vec<usize>,
    /// Common effective cost on the support.
    pub level: f64,
}

/// The unique Wardrop equilibrium for `tolls`.
///
/// If several constant-latency links tie for the level at which they absorb the
/// residual demand, the residual is split evenly between them (any split is an
/// equilibrium in that case).
pub fn solve_wardrop(inst: &Instance, tolls: &[f64]) -> Result<WardropSolution> {
    inst.check_len(tolls)?;
    check_tolls(tolls)?;
    let mut x = vec![0.0; inst.n()];
    let level = equilibrium_into(inst.links(), inst.demand(), tolls, &mut x);
    Ok(solution_from(x, level))
}

pub(crate) fn solution_from(x: Vec<f64>, level: f64) -> WardropSolution {
    let support = (0..x.len()).filter(|&i| x[i] > tol::SUPPORT).collect();
    WardropSolution {
        flow: Flow {
            x,
            effective_cost: Some(level),
        },
        support,
        level,
    }
}

/// System-optimal flow: the Wardrop equilibrium of the marginal-cost latencies
/// `l_i(x) + x l_i'(x)` with zero tolls. `level` is the common marginal cost.
pub fn optimal_flow(inst: &Instance) -> Result<WardropSolution> {
    let marginal = inst.marginal_cost_instance();
    let mut x = vec![0.0; inst.n()];
    let level = equilibrium_into(
        marginal.links(),
        inst.demand(),
        &vec![0.0; inst.n()],
        &mut x,
    );
    Ok(solution_from(x, level))
}

/// Checks the pairwise Wardrop condition: no used link is more than `eps`
/// costlier than any other link. On parallel links this is equivalent to the
/// variational inequality over all feasible flows.
pub fn verify_wardrop(inst: &Instance, tolls: &[f64], x: &[f64], eps: f64) -> Result<bool> {
    inst.check_len(tolls)?;
    Flow::new(x.to_vec()).check_feasible(inst)?;
    let costs: Vec<f64> = inst
        .links()
        .iter()
        .zip(x)
        .zip(tolls)
        .map(|((l, &xi), &ti)| l.value(xi.max(0.0)) + ti)
        .collect();
    let cheapest = costs.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(x.iter()
        .zip(&costs)
        .all(|(&xi, &ci)| xi <= tol::SUPPORT || ci <= cheapest + eps))
}

/// Fills `x` with the equilibrium flow and returns the level. `tolls` must be
/// finite and nonnegative.
pub(crate) fn equilibrium_into(
    links: &[LatencyFunction],
    demand: f64,
    tolls: &[f64],
    x: &mut [f64],
) -> f64 {
    x.iter_mut().for_each(|v| *v = 0.0);
    let floor = |i: usize| links[i].intercept() + tolls[i];
    if demand <= 0.0 {
        return (0..links.len()).map(floor).fold(f64::INFINITY, f64::min);
    }

    // Cheapest constant link: caps the level and takes whatever is left.
    let absorb = (0..links.len())
        .filter(|&i| links[i].is_constant())
        .map(floor)
        .fold(f64::INFINITY, f64::min);

    if absorb.is_finite() {
        let routed = supply_into(links, tolls, absorb, x);
        if routed <= demand {
            let tie = absorb + 1e-14 * (1.0 + absorb.abs());
            let sinks: Vec<usize> = (0..links.len())
                .filter(|&i| links[i].is_constant() && floor(i) <= tie)
                .collect();
            let share = (demand - routed) / sinks.len() as f64;
            for i in sinks {
                x[i] = share;
            }
            return absorb;
        }
    }

    let all_affine = links
        .iter()
        .all(|l| l.is_constant() || l.as_affine().is_some());
    let level = if all_affine {
        affine_level(links, demand, tolls)
    } else {
        bisect_level(links, demand, tolls, absorb)
    };
    let routed = supply_into(links, tolls, level, x);
    // Remove the last few ulps of mismatch so the flow sums to the demand.
    if routed > 0.0 && !all_affine {
        let scale = demand / routed;
        x.iter_mut().for_each(|v| *v *= scale);
    }
    level
}

/// Flow each non-constant link carries at level `k`, written into `x`; returns the total.
fn supply_into(links: &[LatencyFunction], tolls: &[f64], k: f64, x: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, l) in links.iter().enumerate() {
        if l.is_constant() {
            x[i] = 0.0;
            continue;
        }
        let y = k - tolls[i];
        x[i] = if y > l.intercept() {
            l.invert_above_floor(y)
        } else {
            0.0
        };
        total += x[i];
    }
    total
}

/// Exact level for affine links: activate links in order of `b_i + t_i` until
/// the next one would be too expensive.
fn affine_level(links: &[LatencyFunction], demand: f64, tolls: &[f64]) -> f64 {
    let mut active: Vec<(f64, f64)> = links
        .iter()
        .zip(tolls)
        .filter_map(|(l, &t)| l.as_affine().map(|(a, b)| (a, b + t)))
        .collect();
    active.sort_by(|p, q| p.1.total_cmp(&q.1));
    let mut inv_sum = 0.0;
    let mut weighted = 0.0;
    let mut level = f64::INFINITY;
    for (k, &(a, s)) in active.iter().enumerate() {
        inv_sum += 1.0 / a;
        weighted += s / a;
        level = (demand + weighted) / inv_sum;
        match active.get(k + 1) {
            Some(&(_, next)) if level > next => continue,
            _ => break,
        }
    }
    level
}

fn bisect_level(links: &[LatencyFunction], demand: f64, tolls: &[f64], ceiling: f64) -> f64 {
    let variable: Vec<usize> = (0..links.len())
        .filter(|&i| !links[i].is_constant())
        .collect();
    let mut lo = variable
        .iter()
        .map(|&i| links[i].intercept() + tolls[i])
        .fold(f64::INFINITY, f64::min);
    // One link alone carrying the whole demand already overshoots.
    let mut hi = variable
        .iter()
        .map(|&i| links[i].value(demand) + tolls[i])
        .fold(f64::INFINITY, f64::min)
        .min(ceiling);
    let mut scratch = vec![0.0; links.len()];
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if supply_into(links, tolls, mid, &mut scratch) < demand {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
