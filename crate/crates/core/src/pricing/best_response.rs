use serde::{Deserialize, Serialize};

use super::ProfitEvaluator;
use crate::error::{Error, Result};
use crate::model::{check_tolls, Cap, Instance};
use crate::tol;

/// Profit `c0 + c1 t + c2 t^2` on the toll interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitPiece {
    pub lo: f64,
    pub hi: f64,
    pub coeffs: [f64; 3],
}

impl ProfitPiece {
    pub fn eval(&self, t: f64) -> f64 {
        let [c0, c1, c2] = self.coeffs;
        c0 + t * (c1 + t * c2)
    }

    pub fn slope(&self, t: f64) -> f64 {
        self.coeffs[1] + 2.0 * self.coeffs[2] * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// Maximizing tolls as closed intervals `[lo, hi]`; isolated points have
    /// `lo == hi`. Sorted by `lo`.
    pub argmax: Vec<[f64; 2]>,
    pub value: f64,
    /// Piecewise profit description (affine instances only). Profit is zero
    /// beyond the last piece.
    pub pieces: Vec<ProfitPiece>,
    /// Profit is identically zero on the feasible range.
    pub flat: bool,
}

impl BestResponse {
    /// Smallest maximizer.
    pub fn toll(&self) -> f64 {
        self.argmax[0][0]
    }

    pub fn contains(&self, t: f64, eps: f64) -> bool {
        self.argmax
            .iter()
            .any(|&[lo, hi]| t >= lo - eps && t <= hi + eps)
    }
}

fn check_rival_tolls(inst: &Instance, tolls: &[f64], i: usize) -> Result<()> {
    inst.check_index(i)?;
    inst.check_len(tolls)?;
    let mut others = tolls.to_vec();
    others[i] = 0.0;
    check_tolls(&others)
}

/// Tolls at or above this bound leave link `i` empty: some rival alone can carry
/// the whole demand more cheaply than `l_i(0) + t_i`.
pub fn useful_toll_bound(inst: &Instance, tolls: &[f64], i: usize) -> f64 {
    let d = inst.demand();
    let rival = (0..inst.n())
        .filter(|&j| j != i)
        .map(|j| inst.link(j).value(d) + tolls[j])
        .fold(f64::INFINITY, f64::min);
    (rival - inst.link(i).intercept()).max(0.0)
}

/// Exact best response for affine latencies.
///
/// As `t_i` grows, rival links enter the support one by one; between entries
/// firm `i`'s flow is affine in `t_i`, so its profit is linear (alone on the
/// network) or a concave quadratic. The pieces join into a concave function up
/// to the toll at which link `i` empties, after which profit is zero.
pub fn best_response_affine(
    inst: &Instance,
    tolls: &[f64],
    i: usize,
    cap: Cap,
) -> Result<BestResponse> {
    check_rival_tolls(inst, tolls, i)?;
    let coeffs = inst.affine_coefficients().ok_or_else(|| {
        Error::NotApplicable("exact best response needs affine latencies with a > 0".into())
    })?;
    let pieces = affine_profit_pieces(&coeffs, inst.demand(), tolls, i);
    let c = cap.value();

    let mut best_t = 0.0;
    let mut best_v = 0.0;
    for p in &pieces {
        if p.lo > c {
            break;
        }
        let hi = p.hi.min(c);
        let mut cands = [p.lo, hi, f64::NAN];
        if p.coeffs[2] < 0.0 {
            let v = -p.coeffs[1] / (2.0 * p.coeffs[2]);
            if v > p.lo && v < hi {
                cands[2] = v;
            }
        }
        for t in cands.into_iter().filter(|t| !t.is_nan()) {
            let v = p.eval(t);
            if v > best_v || (v == best_v && t < best_t) {
                best_t = t;
                best_v = v;
            }
        }
    }

    let flat = best_v <= 0.0 && c > 0.0;
    let argmax = if flat {
        vec![[0.0, c]]
    } else {
        vec![[best_t, best_t]]
    };
    Ok(BestResponse {
        argmax,
        value: best_v.max(0.0),
        pieces,
        flat,
    })
}

fn affine_profit_pieces(
    coeffs: &[(f64, f64)],
    demand: f64,
    tolls: &[f64],
    i: usize,
) -> Vec<ProfitPiece> {
    let (ai, bi) = coeffs[i];
    let mut rivals: Vec<(f64, f64)> = (0..coeffs.len())
        .filter(|&j| j != i)
        .map(|j| (coeffs[j].0, coeffs[j].1 + tolls[j]))
        .collect();
    rivals.sort_by(|p, q| p.1.total_cmp(&q.1));

    // With rivals `S` active, the level as a function of t is
    //   K(t) = (D + B_S + (b_i + t)/a_i) / (A_S + 1/a_i)
    // where A_S = sum 1/a_j and B_S = sum s_j/a_j.
    let mut a_sum = 0.0;
    let mut b_sum = 0.0;
    let toll_at_level =
        |s: f64, a_sum: f64, b_sum: f64| s * (ai * a_sum + 1.0) - ai * (demand + b_sum) - bi;

    let mut pieces = Vec::new();
    for k in 0..=rivals.len() {
        let lo = if k == 0 {
            0.0
        } else {
            let (a, s) = rivals[k - 1];
            a_sum += 1.0 / a;
            b_sum += s / a;
            toll_at_level(s, a_sum, b_sum).max(0.0)
        };
        let next_entry = rivals
            .get(k)
            .map_or(f64::INFINITY, |&(_, s)| toll_at_level(s, a_sum, b_sum));
        let (c1, c2, empties_at) = if k == 0 {
            (demand, 0.0, f64::INFINITY)
        } else {
            let num = demand + b_sum - bi * a_sum;
            let den = ai * a_sum + 1.0;
            (num / den, -a_sum / den, num / a_sum)
        };
        let hi = next_entry.min(empties_at);
        if hi > lo {
            pieces.push(ProfitPiece {
                lo,
                hi,
                coeffs: [0.0, c1, c2],
            });
        }
        if empties_at <= next_entry {
            break;
        }
    }
    pieces
}

/// Grid search over `[0, cap_hi]` with golden-section polishing of every
/// promising local maximum. Works for any latency, including constant ones.
pub fn best_response_numeric(
    inst: &Instance,
    tolls: &[f64],
    i: usize,
    cap_hi: f64,
    grid_n: usize,
    refine_iters: usize,
) -> Result<BestResponse> {
    check_rival_tolls(inst, tolls, i)?;
    if !cap_hi.is_finite() || cap_hi < 0.0 {
        return Err(Error::Domain(format!(
            "upper toll bound must be finite and >= 0, got {cap_hi}"
        )));
    }
    if grid_n < 100 {
        return Err(Error::Domain(format!(
            "grid_n must be >= 100, got {grid_n}"
        )));
    }
    let mut ev = ProfitEvaluator::new(inst, tolls, i);
    if cap_hi == 0.0 {
        let v = ev.at(0.0);
        return Ok(BestResponse {
            argmax: vec![[0.0, 0.0]],
            value: v,
            pieces: vec![],
            flat: false,
        });
    }

    let h = cap_hi / grid_n as f64;
    let grid: Vec<f64> = (0..=grid_n).map(|k| ev.at(k as f64 * h)).collect();
    let best_grid = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best_grid <= 0.0 {
        return Ok(BestResponse {
            argmax: vec![[0.0, cap_hi]],
            value: 0.0,
            pieces: vec![],
            flat: true,
        });
    }

    // Anything more than one grid step below the best value cannot hide the maximum.
    let step = grid
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);
    let mut peaks: Vec<usize> = (0..=grid_n)
        .filter(|&k| {
            let left = k == 0 || grid[k] >= grid[k - 1];
            let right = k == grid_n || grid[k] >= grid[k + 1];
            left && right && grid[k] >= best_grid - step
        })
        .collect();
    peaks.sort_by(|&p, &q| grid[q].total_cmp(&grid[p]));
    peaks.truncate(16);

    let mut cands: Vec<(f64, f64)> = peaks
        .iter()
        .map(|&k| {
            let a = (k.saturating_sub(1)) as f64 * h;
            let b = ((k + 1).min(grid_n)) as f64 * h;
            let (t, v) = golden_max(&mut |t| ev.at(t), a, b, refine_iters);
            let tk = k as f64 * h;
            if v > grid[k] {
                (t, v)
            } else {
                (tk, grid[k])
            }
        })
        .collect();
    let value = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    cands.retain(|c| c.1 >= value - tol::TIE);
    cands.sort_by(|p, q| p.0.total_cmp(&q.0));

    let mut argmax: Vec<[f64; 2]> = Vec::new();
    for (t, _) in cands {
        match argmax.last_mut() {
            Some(last) if t - last[1] <= 2.0 * h => last[1] = t,
            _ => argmax.push([t, t]),
        }
    }
    Ok(BestResponse {
        argmax,
        value,
        pieces: vec![],
        flat: false,
    })
}

/// Exact path for affine instances, numeric grid search otherwise. For the
/// numeric path an infinite cap is replaced by [`useful_toll_bound`].
pub fn best_response(
    inst: &Instance,
    tolls: &[f64],
    i: usize,
    cap: Cap,
    grid_n: usize,
) -> Result<BestResponse> {
    if inst.affine_coefficients().is_some() {
        return best_response_affine(inst, tolls, i, cap);
    }
    check_rival_tolls(inst, tolls, i)?;
    let hi = cap.value().min(useful_toll_bound(inst, tolls, i));
    best_response_numeric(inst, tolls, i, hi, grid_n, tol::REFINE_ITERS)
}

pub(crate) fn golden_max(
    f: &mut impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
