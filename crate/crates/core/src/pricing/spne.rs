use serde::{Deserialize, Serialize};

use super::{
    best_response, binding_set, profit, EquilibriumPoint, EquilibriumReport, EquilibriumStatus,
};
use crate::capalg::build_cap_curve;
use crate::error::{Error, Result};
use crate::model::{check_tolls, Cap, Instance};
use crate::tol;
use crate::wardrop::solve_wardrop;

/// Markup factor `l_i'(x_i) + 1/H_i` with `H_i = sum over used rivals of 1/l_j'(x_j)`.
/// A used rival with zero slope makes `1/H_i` vanish.
pub fn markup(inst: &Instance, x: &[f64], i: usize) -> Result<f64> {
    inst.check_index(i)?;
    inst.check_len(x)?;
    Ok(markup_unchecked(inst, x, i))
}

fn markup_unchecked(inst: &Instance, x: &[f64], i: usize) -> f64 {
    let mut h = 0.0;
    for j in (0..inst.n()).filter(|&j| j != i && x[j] > tol::SUPPORT) {
        let s = inst.link(j).slope(x[j]);
        if s <= 0.0 {
            return inst.link(i).slope(x[i].max(0.0));
        }
        h += 1.0 / s;
    }
    let inv_h = if h > 0.0 { 1.0 / h } else { 0.0 };
    inst.link(i).slope(x[i].max(0.0)) + inv_h
}

fn affine_markups(coeffs: &[(f64, f64)]) -> Vec<f64> {
    let inv: f64 = coeffs.iter().map(|&(a, _)| 1.0 / a).sum();
    coeffs
        .iter()
        .map(|&(a, _)| a + 1.0 / (inv - 1.0 / a))
        .collect()
}

fn point_from(
    inst: &Instance,
    tolls: Vec<f64>,
    cap: Cap,
    gain: Option<f64>,
) -> Result<EquilibriumPoint> {
    let sol = solve_wardrop(inst, &tolls)?;
    let binding = binding_set(&tolls, cap);
    Ok(EquilibriumPoint {
        tolls,
        flow: sol.flow.x,
        level: sol.level,
        binding_set: binding,
        max_deviation_gain: gain,
    })
}

/// Uncapped equilibrium of an affine full-support instance.
///
/// Every firm prices at its markup, so `(2a_i + 1/H_i) x_i + b_i = K` with
/// `sum x_i = D`, a linear system with a closed-form solution.
pub fn spne_prices_uncapped(inst: &Instance) -> Result<EquilibriumReport> {
    let coeffs = inst.require_affine_full_support()?;
    let m = affine_markups(&coeffs);
    let w: Vec<f64> = coeffs.iter().zip(&m).map(|(&(a, _), &mi)| a + mi).collect();
    let inv_w: f64 = w.iter().map(|wi| 1.0 / wi).sum();
    let bw: f64 = coeffs.iter().zip(&w).map(|(&(_, b), wi)| b / wi).sum();
    let k = (inst.demand() + bw) / inv_w;
    let x: Vec<f64> = coeffs
        .iter()
        .zip(&w)
        .map(|(&(_, b), wi)| (k - b) / wi)
        .collect();
    if x.iter().any(|&xi| xi <= 0.0) {
        return Ok(EquilibriumReport {
            status: EquilibriumStatus::NotApplicable,
            cap: Cap::INF,
            equilibria: vec![],
            certificate: "markup system yields a non-positive flow".into(),
        });
    }
    let t: Vec<f64> = x.iter().zip(&m).map(|(xi, mi)| xi * mi).collect();
    Ok(EquilibriumReport {
        status: EquilibriumStatus::Unique,
        cap: Cap::INF,
        equilibria: vec![EquilibriumPoint {
            tolls: t,
            flow: x,
            level: k,
            binding_set: vec![],
            max_deviation_gain: None,
        }],
        certificate: "closed-form markup system (affine, full support)".into(),
    })
}

/// Capped equilibrium of an affine full-support instance, read off the cap curve.
pub fn spne_at_cap(inst: &Instance, cap: Cap) -> Result<EquilibriumReport> {
    let curve = build_cap_curve(inst)?;
    let s = curve.state_at(cap);
    Ok(EquilibriumReport {
        status: EquilibriumStatus::Unique,
        cap,
        equilibria: vec![EquilibriumPoint {
            tolls: s.t,
            flow: s.x,
            level: s.level,
            binding_set: s.binding,
            max_deviation_gain: None,
        }],
        certificate: format!(
            "cap curve interval lookup ({} breakpoints)",
            curve.breakpoints.len()
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmDeviation {
    pub firm: usize,
    pub profit: f64,
    pub best_toll: f64,
    pub best_value: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpneVerification {
    pub cap: Cap,
    pub tolls: Vec<f64>,
    pub per_firm: Vec<FirmDeviation>,
    pub max_deviation_gain: f64,
    pub epsilon: f64,
    pub passed: bool,
    pub method: String,
}

/// Unilateral deviation check: every firm's best response over `[0, cap]`
/// against the others' tolls.
pub fn verify_spne(
    inst: &Instance,
    cap: Cap,
    tolls: &[f64],
    eps: f64,
    grid_n: usize,
) -> Result<SpneVerification> {
    inst.check_len(tolls)?;
    check_tolls(tolls)?;
    if let Some(&t) = tolls.iter().find(|&&t| t > cap.value() + tol::FLOW) {
        return Err(Error::Domain(format!("toll {t} exceeds cap {cap}")));
    }
    let exact = inst.affine_coefficients().is_some();
    let mut per_firm = Vec::with_capacity(inst.n());
    for i in 0..inst.n() {
        let p = profit(inst, tolls, i)?;
        let br = best_response(inst, tolls, i, cap, grid_n)?;
        per_firm.push(FirmDeviation {
            firm: i,
            profit: p,
            best_toll: br.toll(),
            best_value: br.value,
            gain: (br.value - p).max(0.0),
        });
    }
    let gain = per_firm.iter().map(|f| f.gain).fold(0.0, f64::max);
    Ok(SpneVerification {
        cap,
        tolls: tolls.to_vec(),
        per_firm,
        max_deviation_gain: gain,
        epsilon: eps,
        passed: gain <= eps,
        method: if exact {
            "exact piecewise best responses".into()
        } else {
            format!(
                "numeric best responses, grid {grid_n}, {} refine iterations",
                tol::REFINE_ITERS
            )
        },
    })
}

/// Residuals of the affine equilibrium characterization at `(tolls, x(tolls))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    /// `max_i |a_i x_i + b_i + t_i - K|` with `K` the Wardrop level.
    pub char1: f64,
    /// `|sum x_i - D|`.
    pub char2: f64,
    /// `max_i |t_i - min(m_i x_i, c)|`.
    pub char3: f64,
    pub min_flow: f64,
}

impl Characterization {
    pub fn max_residual(&self) -> f64 {
        self.char1.max(self.char2).max(self.char3)
    }

    pub fn holds(&self, eps: f64) -> bool {
        self.max_residual() <= eps && self.min_flow > 0.0
    }
}

/// Evaluates the characterization for given tolls and flows.
pub fn check_characterization(
    inst: &Instance,
    cap: Cap,
    tolls: &[f64],
    x: &[f64],
) -> Result<Characterization> {
    inst.check_len(tolls)?;
    inst.check_len(x)?;
    let coeffs = inst.affine_coefficients().ok_or_else(|| {
        Error::NotApplicable("characterization needs affine latencies with a > 0".into())
    })?;
    let m = affine_markups(&coeffs);
    let costs: Vec<f64> = (0..inst.n())
        .map(|i| coeffs[i].0 * x[i] + coeffs[i].1 + tolls[i])
        .collect();
    let k = costs.iter().sum::<f64>() / inst.n() as f64;
    let c = cap.value();
    Ok(Characterization {
        char1: costs.iter().map(|ci| (ci - k).abs()).fold(0.0, f64::max),
        char2: (x.iter().sum::<f64>() - inst.demand()).abs(),
        char3: (0..inst.n())
            .map(|i| (tolls[i] - (m[i] * x[i]).min(c)).abs())
            .fold(0.0, f64::max),
        min_flow: x.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Damped fixed-point iteration on `t_i = min(markup_i(x(t)) x_i(t), c)`,
/// certified afterwards by [`verify_spne`]. Applies to any latency class,
/// including constant links.
pub fn spne_price_iteration(
    inst: &Instance,
    cap: Cap,
    max_iter: usize,
    eps: f64,
    grid_n: usize,
) -> Result<EquilibriumReport> {
    const DAMPING: f64 = 0.5;
    let n = inst.n();
    let c = cap.value();
    let mut t = vec![0.0; n];
    let mut iters = 0;
    let mut step = f64::INFINITY;
    while iters < max_iter && step > 1e-14 {
        let x = solve_wardrop(inst, &t)?.flow.x;
        step = 0.0;
        let target: Vec<f64> = (0..n)
            .map(|i| (markup_unchecked(inst, &x, i) * x[i].max(0.0)).min(c))
            .collect();
        for i in 0..n {
            let next = (1.0 - DAMPING) * t[i] + DAMPING * target[i];
            step = step.max((next - t[i]).abs());
            t[i] = next;
        }
        iters += 1;
    }
    for ti in &mut t {
        *ti = ti.min(c);
    }
    let mut v = verify_spne(inst, cap, &t, eps, grid_n)?;
    let mut method = format!("damped markup iteration ({iters} steps, last step {step:.1e})");
    if !v.passed {
        // Markups stall when an equilibrium leaves a link empty; fall back to
        // round-robin best responses from zero tolls.
        let (t_br, rounds, br_step) = best_response_dynamics(inst, cap, 500, grid_n)?;
        let v_br = verify_spne(inst, cap, &t_br, eps, grid_n)?;
        if v_br.passed || v_br.max_deviation_gain < v.max_deviation_gain {
            method = format!(
                "{method}, then best-response dynamics ({rounds} rounds, last step {br_step:.1e})"
            );
            t = t_br;
            v = v_br;
        }
    }
    let certificate = format!(
        "{method}; {}; max gain {:.3e} vs eps {eps:.1e}",
        v.method, v.max_deviation_gain
    );
    if v.passed {
        Ok(EquilibriumReport {
            status: EquilibriumStatus::Found,
            cap,
            equilibria: vec![point_from(inst, t, cap, Some(v.max_deviation_gain))?],
            certificate,
        })
    } else {
        Ok(EquilibriumReport {
            status: EquilibriumStatus::NoneFound,
            cap,
            equilibria: vec![],
            certificate,
        })
    }
}

/// Gauss-Seidel best responses from zero tolls. Returns the last tolls, the
/// rounds used and the largest change in the last round.
fn best_response_dynamics(
    inst: &Instance,
    cap: Cap,
    max_rounds: usize,
    grid_n: usize,
) -> Result<(Vec<f64>, usize, f64)> {
    let n = inst.n();
    let mut t = vec![0.0; n];
    let mut step = f64::INFINITY;
    let mut rounds = 0;
    while rounds < max_rounds && step > 1e-12 {
        step = 0.0;
        for i in 0..n {
            let b = best_response(inst, &t, i, cap, grid_n)?.toll();
            step = step.max((b - t[i]).abs());
            t[i] = b;
        }
        rounds += 1;
    }
    Ok((t, rounds, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LatencyFunction as L;

    fn fig_alg() -> Instance {
        Instance::affine(&[(1.0, 0.0), (1.0, 0.5)]).unwrap()
    }

    fn fig_mul() -> Instance {
        Instance::affine(&[(1.0, 0.0), (1.0, 0.0), (0.5, 1.2)]).unwrap()
    }

    fn fig_aff(n: usize) -> Instance {
        let mut links = vec![L::affine(1.0, 0.0); n - 1];
        links.push(L::constant(1.0 / (2.0 * (n - 1) as f64)));
        Instance::new(links).unwrap()
    }

    fn close(a: &[f64], b: &[f64], eps: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= eps)
    }

    #[test]
    fn profit_examples() {
        let bad = Instance::affine(&[(1.0, 0.0), (2.0, 0.0)]).unwrap();
        let p = profit(&bad, &[5.0 / 3.0, 4.0 / 3.0], 0).unwrap();
        assert!((p - 25.0 / 27.0).abs() < 1e-14);
        let p = profit(&fig_alg(), &[7.0 / 6.0, 5.0 / 6.0], 0).unwrap();
        assert!((p - 49.0 / 72.0).abs() < 1e-14);
        assert_eq!(profit(&fig_alg(), &[0.0, 0.4], 0).unwrap(), 0.0);
        assert!(matches!(
            profit(&fig_alg(), &[0.0, 0.4], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn uncapped_prices() {
        let r = spne_prices_uncapped(&fig_alg()).unwrap();
        assert_eq!(r.status, EquilibriumStatus::Unique);
        assert!(close(r.tolls().unwrap(), &[7.0 / 6.0, 5.0 / 6.0], 1e-14));
        for a2 in [0.5, 1.0, 2.0, 7.0, 100.0] {
            let bad = Instance::affine(&[(1.0, 0.0), (a2, 0.0)]).unwrap();
            let r = spne_prices_uncapped(&bad).unwrap();
            let want = [(2.0 * a2 + 1.0) / 3.0, (a2 + 2.0) / 3.0];
            assert!(close(r.tolls().unwrap(), &want, 1e-12), "a2={a2}");
        }
        let sym = Instance::affine(&[(1.0, 0.0), (1.0, 0.0)]).unwrap();
        let r = spne_prices_uncapped(&sym).unwrap();
        assert!(close(r.tolls().unwrap(), &[1.0, 1.0], 1e-15));
        assert!(close(r.flow().unwrap(), &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn uncapped_requires_affine_full_support() {
        assert!(matches!(
            spne_prices_uncapped(&fig_mul()),
            Err(Error::NotApplicable(_))
        ));
        assert!(matches!(
            spne_prices_uncapped(&fig_aff(2)),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn capped_prices_fig_alg() {
        let r = spne_at_cap(&fig_alg(), Cap::new(1.0).unwrap()).unwrap();
        assert!(close(r.flow().unwrap(), &[5.0 / 8.0, 3.0 / 8.0], 1e-14));
        assert_eq!(r.tolls().unwrap()[0], 1.0);
        assert_eq!(r.point().unwrap().binding_set, vec![0]);
        let r = spne_at_cap(&fig_alg(), Cap::new(2.0).unwrap()).unwrap();
        assert!(close(r.tolls().unwrap(), &[7.0 / 6.0, 5.0 / 6.0], 1e-14));
        let r = spne_at_cap(&fig_alg(), Cap::new(0.3).unwrap()).unwrap();
        assert!(close(r.tolls().unwrap(), &[0.3, 0.3], 1e-15));
        assert!(close(r.flow().unwrap(), &[0.75, 0.25], 1e-14));
        assert_eq!(r.point().unwrap().binding_set, vec![0, 1]);
    }

    #[test]
    fn verification_examples() {
        let c = Cap::new(100.0).unwrap();
        let v = verify_spne(&fig_alg(), c, &[7.0 / 6.0, 5.0 / 6.0], 1e-9, 2000).unwrap();
        assert!(v.passed && v.max_deviation_gain <= 1e-9);
        let v = verify_spne(&fig_alg(), c, &[2.0, 2.0], 1e-9, 2000).unwrap();
        assert!(!v.passed && v.max_deviation_gain > 0.0);
        let v = verify_spne(&fig_mul(), c, &[0.7, 0.7, 0.0], 1e-6, 2000).unwrap();
        assert!(v.passed, "{v:?}");
        let t1 = 24.0 / 35.0;
        let v = verify_spne(&fig_mul(), c, &[t1, 1.4 - t1, 0.0], 1e-6, 2000).unwrap();
        assert!(v.passed, "{v:?}");
        // outside the plateau firm 1 wants to move
        let v = verify_spne(&fig_mul(), c, &[0.6, 0.8, 0.0], 1e-6, 2000).unwrap();
        assert!(!v.passed);
    }

    #[test]
    fn verification_rejects_tolls_above_cap() {
        let r = verify_spne(&fig_alg(), Cap::new(1.0).unwrap(), &[1.5, 0.5], 1e-6, 200);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn characterization_residuals() {
        let cap = Cap::new(1.0).unwrap();
        let r = spne_at_cap(&fig_alg(), cap).unwrap();
        let p = r.point().unwrap();
        let ch = check_characterization(&fig_alg(), cap, &p.tolls, &p.flow).unwrap();
        assert!(ch.holds(1e-12), "{ch:?}");
        let x = solve_wardrop(&fig_alg(), &[1.0, 1.0]).unwrap().flow.x;
        let ch = check_characterization(&fig_alg(), cap, &[1.0, 1.0], &x).unwrap();
        assert!(!ch.holds(1e-6));
    }

    #[test]
    fn markup_with_flat_rival() {
        let inst = fig_aff(3);
        let x = [0.25, 0.25, 0.5];
        assert_eq!(markup(&inst, &x, 0).unwrap(), 1.0);
        assert!((markup(&inst, &x, 2).unwrap() - 0.5).abs() < 1e-15);
        let m = markup(&fig_alg(), &[0.5, 0.5], 0).unwrap();
        assert!((m - 2.0).abs() < 1e-15);
    }

    #[test]
    fn price_iteration_on_constant_link() {
        for n in [2, 3, 4] {
            let inst = fig_aff(n);
            let q = 1.0 / (2.0 * (n - 1) as f64);
            for c in [Cap::INF, Cap::new(0.2).unwrap(), Cap::new(2.0).unwrap()] {
                let r = spne_price_iteration(&inst, c, 10_000, 1e-7, 1000).unwrap();
                assert_eq!(
                    r.status,
                    EquilibriumStatus::Found,
                    "n={n} c={c} {}",
                    r.certificate
                );
                let mut want = vec![q; n];
                want[n - 1] = 0.5;
                assert!(close(r.flow().unwrap(), &want, 1e-8), "n={n} c={c}");
                let tc = q.min(c.value());
                assert!(close(r.tolls().unwrap(), &vec![tc; n], 1e-8));
            }
        }
    }

    #[test]
    fn price_iteration_agrees_with_closed_form() {
        let r = spne_price_iteration(&fig_alg(), Cap::INF, 10_000, 1e-9, 1000).unwrap();
        assert_eq!(r.status, EquilibriumStatus::Found);
        assert!(close(r.tolls().unwrap(), &[7.0 / 6.0, 5.0 / 6.0], 1e-10));
        let r =
            spne_price_iteration(&fig_alg(), Cap::new(1.0).unwrap(), 10_000, 1e-9, 1000).unwrap();
        assert!(close(r.flow().unwrap(), &[5.0 / 8.0, 3.0 / 8.0], 1e-10));
    }

    #[test]
    fn price_iteration_reports_none_without_equilibrium() {
        // quadratic link against a free constant link: no equilibrium above c = 1/3
        let inst = Instance::new(vec![L::monomial(1.0, 2, 0.0), L::constant(0.0)]).unwrap();
        let r = spne_price_iteration(&inst, Cap::new(1.0).unwrap(), 2000, 1e-6, 1000).unwrap();
        assert_eq!(r.status, EquilibriumStatus::NoneFound);
        assert!(r.equilibria.is_empty());
    }

    #[test]
    fn price_iteration_lands_on_plateau() {
        let r = spne_price_iteration(&fig_mul(), Cap::INF, 20_000, 1e-6, 2000).unwrap();
        assert_eq!(r.status, EquilibriumStatus::Found, "{}", r.certificate);
        let t = r.tolls().unwrap();
        assert!((t[0] + t[1] - 1.4).abs() < 1e-9 && t[2] == 0.0, "{t:?}");
        assert!(
            (24.0 / 35.0 - 1e-9..=5.0 / 7.0 + 1e-9).contains(&t[0]),
            "{t:?}"
        );
    }
}
