//! Equilibrium tolls and flows as functions of a uniform price cap, for affine
//! instances whose zero-toll Wardrop flow uses every link.
//!
//! Lowering the cap from infinity, firms start charging exactly the cap one
//! after another. Between two such breakpoints the equilibrium level, flows
//! and tolls are affine in `c` and the total cost is a quadratic, so the
//! optimal cap comes from at most `n + 1` one-dimensional quadratic problems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cap, Instance};
use crate::pricing::check_characterization;
use crate::tol;

/// `c0 + c1 * c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lin {
    pub c0: f64,
    pub c1: f64,
}

impl Lin {
    pub fn at(self, c: f64) -> f64 {
        // constant maps stay finite at c = inf
        if self.c1 == 0.0 {
            self.c0
        } else {
            self.c0 + self.c1 * c
        }
    }
}

fn quad_at(q: [f64; 3], c: f64) -> f64 {
    if q[1] == 0.0 && q[2] == 0.0 {
        q[0]
    } else {
        q[0] + c * (q[1] + c * q[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapInterval {
    pub c_lo: f64,
    pub c_hi: Cap,
    /// Firms charging exactly `c` on this interval (0-based, ascending).
    pub binding: Vec<usize>,
    pub level: Lin,
    pub x: Vec<Lin>,
    pub t: Vec<Lin>,
    /// Total latency cost `q0 + q1 c + q2 c^2`.
    pub cost: [f64; 3],
}

impl CapInterval {
    pub fn contains(&self, c: f64) -> bool {
        c >= self.c_lo && c <= self.c_hi.value()
    }

    pub fn cost_at(&self, c: f64) -> f64 {
        quad_at(self.cost, c)
    }
}

/// Equilibrium at one cap value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapState {
    pub cap: Cap,
    pub level: f64,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub binding: Vec<usize>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapCurve {
    /// Ordered from the unbounded interval `[c_1, inf]` down to `[0, c_j]`.
    pub intervals: Vec<CapInterval>,
    /// Strictly decreasing.
    pub breakpoints: Vec<f64>,
}

impl CapCurve {
    pub fn interval_for(&self, cap: Cap) -> &CapInterval {
        let c = cap.value();
        self.intervals
            .iter()
            .find(|iv| iv.contains(c))
            .unwrap_or_else(|| self.intervals.last().expect("curve has intervals"))
    }

    pub fn state_at(&self, cap: Cap) -> CapState {
        let iv = self.interval_for(cap);
        let c = cap.value();
        let t =
            iv.t.iter()
                .enumerate()
                .map(|(i, l)| if iv.binding.contains(&i) { c } else { l.at(c) })
                .collect();
        CapState {
            cap,
            level: iv.level.at(c),
            x: iv.x.iter().map(|l| l.at(c)).collect(),
            t,
            binding: iv.binding.clone(),
            cost: iv.cost_at(c),
        }
    }

    pub fn cost_at(&self, cap: Cap) -> f64 {
        self.interval_for(cap).cost_at(cap.value())
    }
}

/// Builds the breakpoint curve.
pub fn build_cap_curve(inst: &Instance) -> Result<CapCurve> {
    let coeffs = inst.require_affine_full_support()?;
    if inst.demand() <= 0.0 {
        return Err(Error::NotApplicable(
            "cap curve needs positive demand".into(),
        ));
    }
    let n = coeffs.len();
    let inv_total: f64 = coeffs.iter().map(|&(a, _)| 1.0 / a).sum();
    let m: Vec<f64> = coeffs
        .iter()
        .map(|&(a, _)| a + 1.0 / (inv_total - 1.0 / a))
        .collect();

    let mut binding = vec![false; n];
    let mut c_hi = Cap::INF;
    let mut intervals = Vec::new();
    let mut breakpoints = Vec::new();
    loop {
        let iv = interval_maps(&coeffs, &m, &binding, inst.demand());
        if binding.iter().all(|&b| b) {
            intervals.push(CapInterval {
                c_lo: 0.0,
                c_hi,
                ..iv
            });
            break;
        }
        // crossing of m_i x_i(c) = c for every free firm
        let crossings: Vec<Option<f64>> = (0..n)
            .map(|i| {
                if binding[i] {
                    return None;
                }
                let x = iv.x[i];
                let den = 1.0 - m[i] * x.c1;
                if den.abs() < 1e-14 {
                    return None;
                }
                let c = m[i] * x.c0 / den;
                (c >= 0.0 && c <= c_hi.value() * (1.0 + tol::BREAKPOINT_TIE)).then_some(c)
            })
            .collect();
        let Some(next) = crossings.iter().flatten().copied().reduce(f64::max) else {
            intervals.push(CapInterval {
                c_lo: 0.0,
                c_hi,
                ..iv
            });
            break;
        };
        let next = next.min(c_hi.value());
        if next < c_hi.value() {
            intervals.push(CapInterval {
                c_lo: next,
                c_hi,
                ..iv
            });
        }
        for (i, cr) in crossings.iter().enumerate() {
            if let Some(cr) = cr {
                if *cr >= next - tol::BREAKPOINT_TIE * (1.0 + next) {
                    binding[i] = true;
                }
            }
        }
        breakpoints.push(next);
        c_hi = Cap::new(next)?;
        if next <= 0.0 {
            // every remaining firm is pinned at zero
            let iv = interval_maps(&coeffs, &m, &vec![true; n], inst.demand());
            intervals.push(CapInterval {
                c_lo: 0.0,
                c_hi,
                ..iv
            });
            break;
        }
    }
    Ok(CapCurve {
        intervals,
        breakpoints,
    })
}

/// Affine maps for a fixed binding set `A`: bound firms satisfy
/// `a_i x_i + b_i + c = K`, free firms `(a_i + m_i) x_i + b_i = K`.
fn interval_maps(coeffs: &[(f64, f64)], m: &[f64], binding: &[bool], demand: f64) -> CapInterval {
    let w = |i: usize| {
        if binding[i] {
            coeffs[i].0
        } else {
            coeffs[i].0 + m[i]
        }
    };
    let den: f64 = (0..coeffs.len()).map(|i| 1.0 / w(i)).sum();
    let num0: f64 = demand + (0..coeffs.len()).map(|i| coeffs[i].1 / w(i)).sum::<f64>();
    let num1: f64 = (0..coeffs.len())
        .filter(|&i| binding[i])
        .map(|i| 1.0 / coeffs[i].0)
        .sum();
    let level = Lin {
        c0: num0 / den,
        c1: num1 / den,
    };
    let mut x = Vec::with_capacity(coeffs.len());
    let mut t = Vec::with_capacity(coeffs.len());
    for i in 0..coeffs.len() {
        let (a, b) = coeffs[i];
        if binding[i] {
            x.push(Lin {
                c0: (level.c0 - b) / a,
                c1: (level.c1 - 1.0) / a,
            });
            t.push(Lin { c0: 0.0, c1: 1.0 });
        } else {
            let wi = a + m[i];
            let xi = Lin {
                c0: (level.c0 - b) / wi,
                c1: level.c1 / wi,
            };
            x.push(xi);
            t.push(Lin {
                c0: m[i] * xi.c0,
                c1: m[i] * xi.c1,
            });
        }
    }
    let mut cost = [0.0; 3];
    for (i, xi) in x.iter().enumerate() {
        let (a, b) = coeffs[i];
        let (p, q) = (xi.c0, xi.c1);
        cost[0] += a * p * p + b * p;
        cost[1] += 2.0 * a * p * q + b * q;
        cost[2] += a * q * q;
    }
    CapInterval {
        c_lo: 0.0,
        c_hi: Cap::INF,
        binding: (0..coeffs.len()).filter(|&i| binding[i]).collect(),
        level,
        x,
        t,
        cost,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMinimum {
    pub interval: usize,
    pub c_lo: f64,
    pub c_hi: Cap,
    pub argmin: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalCapResult {
    pub c_star: f64,
    pub cost_at_star: f64,
    pub tolls: Vec<f64>,
    pub flow: Vec<f64>,
    pub interval_minima: Vec<IntervalMinimum>,
    pub curve: CapCurve,
}

/// Minimizes the cost curve interval by interval. Ties go to the smallest cap.
pub fn optimal_cap(inst: &Instance) -> Result<OptimalCapResult> {
    let curve = build_cap_curve(inst)?;
    let mut minima = Vec::with_capacity(curve.intervals.len());
    for (k, iv) in curve.intervals.iter().enumerate() {
        let lo = iv.c_lo;
        let mut best = (lo, iv.cost_at(lo));
        let mut consider = |c: f64| {
            let v = iv.cost_at(c);
            if v < best.1 || (v == best.1 && c < best.0) {
                best = (c, v);
            }
        };
        if iv.c_hi.is_finite() {
            consider(iv.c_hi.value());
        }
        if iv.cost[2] > 0.0 {
            let v = -iv.cost[1] / (2.0 * iv.cost[2]);
            if v > lo && v < iv.c_hi.value() {
                consider(v);
            }
        }
        minima.push(IntervalMinimum {
            interval: k,
            c_lo: lo,
            c_hi: iv.c_hi,
            argmin: best.0,
            value: best.1,
        });
    }
    let lowest = minima.iter().map(|m| m.value).fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + lowest.abs());
    let star = minima
        .iter()
        .filter(|m| m.value <= lowest + slack)
        .min_by(|p, q| p.argmin.total_cmp(&q.argmin))
        .expect("at least one interval");
    let c_star = star.argmin;
    let state = curve.state_at(Cap::new(c_star)?);
    Ok(OptimalCapResult {
        c_star,
        cost_at_star: state.cost,
        tolls: state.t,
        flow: state.x,
        interval_minima: minima,
        curve,
    })
}

/// Total latency cost of the capped equilibrium. Caps at or above the first
/// breakpoint give the uncapped equilibrium cost.
pub fn cost_at_cap(inst: &Instance, cap: Cap) -> Result<f64> {
    Ok(build_cap_curve(inst)?.cost_at(cap))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c: f64,
    pub level: f64,
    pub cost: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

/// `steps` evenly spaced caps from `c_lo` to `c_hi` inclusive. Every row is
/// checked against the equilibrium characterization.
pub fn sweep(inst: &Instance, c_lo: f64, c_hi: f64, steps: usize) -> Result<Vec<SweepRow>> {
    if !(c_lo >= 0.0 && c_lo <= c_hi && c_hi.is_finite()) {
        return Err(Error::Domain(format!(
            "sweep range must satisfy 0 <= c_lo <= c_hi < inf, got [{c_lo}, {c_hi}]"
        )));
    }
    if steps < 2 {
        return Err(Error::Domain(format!(
            "sweep needs at least 2 steps, got {steps}"
        )));
    }
    let curve = build_cap_curve(inst)?;
    (0..steps)
        .map(|k| {
            let c = if k + 1 == steps {
                c_hi
            } else {
                c_lo + (c_hi - c_lo) * k as f64 / (steps - 1) as f64
            };
            let cap = Cap::new(c)?;
            let s = curve.state_at(cap);
            let ch = check_characterization(inst, cap, &s.t, &s.x)?;
            if !ch.holds(1e-8) {
                return Err(Error::Numerical(format!(
                    "cap {c}: characterization residual {:e}",
                    ch.max_residual()
                )));
            }
            Ok(SweepRow {
                c,
                level: s.level,
                cost: s.cost,
                t: s.t,
                x: s.x,
            })
        })
        .collect()
}

/// CSV header for sweep output.
pub fn sweep_header(n: usize) -> Vec<String> {
    let mut h = vec!["c".to_string(), "K".to_string(), "cost".to_string()];
    h.extend((1..=n).map(|i| format!("t_{i}")));
    h.extend((1..=n).map(|i| format!("x_{i}")));
    h
}
