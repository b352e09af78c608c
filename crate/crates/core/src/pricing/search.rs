use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{best_response, verify_spne, EquilibriumReport, EquilibriumStatus};
use crate::error::{Error, Result};
use crate::model::{Cap, Instance};
use crate::wardrop::solve_wardrop;

use super::{binding_set, EquilibriumPoint};

/// One row of a best-response tabulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponseRow {
    pub t_opponent: f64,
    pub br_lo: f64,
    pub br_hi: f64,
    pub profit: f64,
}

/// Tabulates firm `firm`'s best response in a duopoly against opponent tolls
/// `k * t_max / grid_n`, `k = 0..=grid_n`.
pub fn best_response_table(
    inst: &Instance,
    firm: usize,
    cap: Cap,
    t_max: f64,
    grid_n: usize,
) -> Result<Vec<BestResponseRow>> {
    require_duopoly(inst)?;
    inst.check_index(firm)?;
    if !(t_max.is_finite() && t_max >= 0.0) || grid_n == 0 {
        return Err(Error::Domain(format!(
            "table range must be finite with at least one step, got t_max={t_max}, grid_n={grid_n}"
        )));
    }
    let other = 1 - firm;
    (0..=grid_n)
        .into_par_iter()
        .map(|k| {
            let t_opp = t_max * k as f64 / grid_n as f64;
            let mut tolls = [0.0; 2];
            tolls[other] = t_opp;
            let br = best_response(inst, &tolls, firm, cap, grid_n.max(100))?;
            Ok(BestResponseRow {
                t_opponent: t_opp,
                br_lo: br.argmax[0][0],
                br_hi: br.argmax[br.argmax.len() - 1][1],
                profit: br.value,
            })
        })
        .collect()
}

fn require_duopoly(inst: &Instance) -> Result<()> {
    if inst.n() != 2 {
        return Err(Error::NotApplicable(format!(
            "duopoly search needs exactly 2 links, got {}",
            inst.n()
        )));
    }
    Ok(())
}

/// Searches a capped duopoly for equilibria.
///
/// For every grid toll `t_2` the composite map `t_2 -> B_2(B_1(t_2))` is
/// evaluated; fixed points of this map (grid hits and refined sign changes of
/// `B_2(B_1(t_2)) - t_2`) are equilibrium candidates, each certified by
/// [`verify_spne`]. An empty result is a certificate at the stated resolution,
/// not a proof of nonexistence.
pub fn duopoly_search(
    inst: &Instance,
    cap: Cap,
    grid_n: usize,
    eps: f64,
) -> Result<EquilibriumReport> {
    require_duopoly(inst)?;
    if !cap.is_finite() {
        return Err(Error::Domain("duopoly search needs a finite cap".into()));
    }
    if grid_n < 100 {
        return Err(Error::Domain(format!(
            "grid_n must be >= 100, got {grid_n}"
        )));
    }
    let c = cap.value();
    let h = c / grid_n as f64;
    let hit = 1e-9 * (1.0 + c);

    let composite = |t2: f64| -> Result<(f64, f64)> {
        let b1 = best_response(inst, &[0.0, t2], 0, cap, grid_n)?.toll();
        let br2 = best_response(inst, &[b1, 0.0], 1, cap, grid_n)?;
        // among tied responses pick the one closest to t2
        let b2 = br2
            .argmax
            .iter()
            .map(|&[lo, hi]| t2.clamp(lo, hi))
            .min_by(|p, q| (p - t2).abs().total_cmp(&(q - t2).abs()))
            .unwrap_or(0.0);
        Ok((b1, b2 - t2))
    };

    let table: Vec<(f64, f64, f64)> = (0..=grid_n)
        .into_par_iter()
        .map(|k| {
            let t2 = if k == grid_n { c } else { k as f64 * h };
            composite(t2).map(|(b1, psi)| (t2, b1, psi))
        })
        .collect::<Result<_>>()?;

    let mut candidates: Vec<(f64, f64)> = table
        .iter()
        .filter(|r| r.2.abs() <= hit)
        .map(|r| (r.1, r.0))
        .collect();
    for w in table.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo.2.abs() <= hit || hi.2.abs() <= hit || lo.2.signum() == hi.2.signum() {
            continue;
        }
        let (mut a, mut b) = (lo.0, hi.0);
        let mut fa = lo.2;
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let (_, fm) = composite(m)?;
            if fm.abs() <= hit {
                a = m;
                b = m;
                break;
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        let t2 = 0.5 * (a + b);
        let (b1, _) = composite(t2)?;
        candidates.push((b1, t2));
    }

    let mut found: Vec<EquilibriumPoint> = Vec::new();
    for (t1, t2) in candidates {
        if found.iter().any(|p| {
            (p.tolls[0] - t1).abs() <= 1e-6 * (1.0 + c)
                && (p.tolls[1] - t2).abs() <= 1e-6 * (1.0 + c)
        }) {
            continue;
        }
        let tolls = vec![t1.min(c), t2.min(c)];
        let v = verify_spne(inst, cap, &tolls, eps, grid_n)?;
        if v.passed {
            let sol = solve_wardrop(inst, &tolls)?;
            found.push(EquilibriumPoint {
                binding_set: binding_set(&tolls, cap),
                tolls,
                flow: sol.flow.x,
                level: sol.level,
                max_deviation_gain: Some(v.max_deviation_gain),
            });
        }
    }
    found.sort_by(|p, q| p.tolls[1].total_cmp(&q.tolls[1]));

    let status = match found.len() {
        0 => EquilibriumStatus::NoneFound,
        1 => EquilibriumStatus::Unique,
        _ => EquilibriumStatus::Multiple,
    };
    let certificate = if found.is_empty() {
        format!("no {eps:e}-equilibrium at grid resolution c/grid_n = {h:e}")
    } else {
        format!(
            "{} verified {eps:e}-equilibria at grid resolution c/grid_n = {h:e}",
            found.len()
        )
    };
    Ok(EquilibriumReport {
        status,
        cap,
        equilibria: found,
        certificate,
    })
}
