#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tollcap::{validate, Cap, Instance, LatencyFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Affine instance with `a in [0.1, 5]`, `b in [0, 2]`, resampled until the
/// zero-toll flow uses every link.
pub fn affine_full_support(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    loop {
        let coeffs: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.1..=5.0), rng.random_range(0.0..=2.0)))
            .collect();
        let inst = Instance::affine(&coeffs).unwrap();
        if validate(&inst).unwrap().full_support {
            return inst;
        }
    }
}

/// Mixed latencies: affine, monomials up to degree 4 and dense polynomials.
pub fn random_general(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let links = (0..n)
        .map(|_| match rng.random_range(0..3) {
            0 => LatencyFunction::affine(rng.random_range(0.1..5.0), rng.random_range(0.0..2.0)),
            1 => LatencyFunction::monomial(
                rng.random_range(0.1..5.0),
                rng.random_range(2..=4),
                rng.random_range(0.0..2.0),
            ),
            _ => LatencyFunction::polynomial(vec![
                (0, rng.random_range(0.0..1.0)),
                (1, rng.random_range(0.0..2.0)),
                (3, rng.random_range(0.1..2.0)),
            ]),
        })
        .collect();
    Instance::with_demand(links, rng.random_range(0.2..3.0)).unwrap()
}

/// Capped equilibrium by trying every binding set.
///
/// For a binding set `A`, bound firms satisfy `a x + b + c = K` and free
/// firms `(a + m) x + b = K`; the candidate is accepted when flows are
/// positive, every bound firm's markup price is at least `c` and every free
/// firm's markup price is at most `c`.
pub fn enumerate_spne(coeffs: &[(f64, f64)], demand: f64, c: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = coeffs.len();
    let inv: f64 = coeffs.iter().map(|p| 1.0 / p.0).sum();
    let m: Vec<f64> = coeffs
        .iter()
        .map(|&(a, _)| a + 1.0 / (inv - 1.0 / a))
        .collect();
    let slack = 1e-9 * (1.0 + c);
    for mask in 0u32..(1 << n) {
        let bound = |i: usize| mask & (1 << i) != 0;
        let mut num = demand;
        let mut den = 0.0;
        for i in 0..n {
            let (a, b) = coeffs[i];
            if bound(i) {
                num += (b + c) / a;
                den += 1.0 / a;
            } else {
                num += b / (a + m[i]);
                den += 1.0 / (a + m[i]);
            }
        }
        let k = num / den;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = coeffs[i];
                if bound(i) {
                    (k - b - c) / a
                } else {
                    (k - b) / (a + m[i])
                }
            })
            .collect();
        let ok = (0..n).all(|i| {
            x[i] > 0.0
                && if bound(i) {
                    m[i] * x[i] >= c - slack
                } else {
                    m[i] * x[i] <= c + slack
                }
        });
        if ok {
            let t = (0..n)
                .map(|i| if bound(i) { c } else { m[i] * x[i] })
                .collect();
            return Some((t, x));
        }
    }
    None
}

pub fn uncapped_top(inst: &Instance) -> f64 {
    let r = tollcap::spne_prices_uncapped(inst).unwrap();
    r.tolls().unwrap().iter().copied().fold(0.0, f64::max)
}

pub fn random_cap(rng: &mut ChaCha8Rng, inst: &Instance) -> Cap {
    Cap::new(rng.random_range(0.0..1.3 * uncapped_top(inst))).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
