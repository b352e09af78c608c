//! Firm-side computations: profits, best responses, subgame perfect prices and
//! their verification.
//!
//! Firm `i` owns link `i` and earns `t_i * x_i(t)`, where `x(t)` is the Wardrop
//! equilibrium induced by the full toll vector.

mod best_response;
mod search;
mod spne;

use serde::{Deserialize, Serialize};

pub(crate) use best_response::golden_max;
pub use best_response::{
    best_response, best_response_affine, best_response_numeric, useful_toll_bound, BestResponse,
    ProfitPiece,
};
pub use search::{best_response_table, duopoly_search, BestResponseRow};
pub use spne::{
    check_characterization, markup, spne_at_cap, spne_price_iteration, spne_prices_uncapped,
    verify_spne, Characterization, FirmDeviation, SpneVerification,
};

use crate::error::Result;
use crate::model::{check_tolls, Cap, Instance, LatencyFunction};
use crate::wardrop::equilibrium_into;

/// Equilibrium tolls by the strongest applicable method: closed forms for affine
/// full-support instances, grid search for other duopolies under a finite cap,
/// certified price iteration otherwise.
pub fn spne(inst: &Instance, cap: Cap, grid_n: usize, eps: f64) -> Result<EquilibriumReport> {
    if crate::model::validate(inst)?.exact_methods_apply {
        if cap.is_finite() {
            spne_at_cap(inst, cap)
        } else {
            spne_prices_uncapped(inst)
        }
    } else if inst.n() == 2 && cap.is_finite() {
        duopoly_search(inst, cap, grid_n, eps)
    } else {
        spne_price_iteration(inst, cap, 20_000, eps, grid_n)
    }
}

/// `t_i * x_i(t)`.
pub fn profit(inst: &Instance, tolls: &[f64], i: usize) -> Result<f64> {
    inst.check_index(i)?;
    inst.check_len(tolls)?;
    check_tolls(tolls)?;
    let mut ev = ProfitEvaluator::new(inst, tolls, i);
    Ok(ev.at(tolls[i]))
}

/// Evaluates one firm's profit as a function of its own toll, reusing buffers.
pub(crate) struct ProfitEvaluator<'a> {
    links: &'a [LatencyFunction],
    demand: f64,
    firm: usize,
    tolls: Vec<f64>,
    x: Vec<f64>,
}

impl<'a> ProfitEvaluator<'a> {
    pub(crate) fn new(inst: &'a Instance, tolls: &[f64], firm: usize) -> Self {
        ProfitEvaluator {
            links: inst.links(),
            demand: inst.demand(),
            firm,
            tolls: tolls.to_vec(),
            x: vec![0.0; tolls.len()],
        }
    }

    pub(crate) fn at(&mut self, t: f64) -> f64 {
        self.tolls[self.firm] = t;
        equilibrium_into(self.links, self.demand, &self.tolls, &mut self.x);
        t * self.x[self.firm].max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumStatus {
    /// Exactly one equilibrium (proved for the affine full-support case; at
    /// grid resolution for searches).
    Unique,
    Multiple,
    /// An equilibrium was found and certified, uniqueness is not claimed.
    Found,
    /// No epsilon-equilibrium at the stated resolution. Not a proof of nonexistence.
    NoneFound,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub tolls: Vec<f64>,
    pub flow: Vec<f64>,
    pub level: f64,
    /// Firms whose toll equals the cap.
    pub binding_set: Vec<usize>,
    pub max_deviation_gain: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub status: EquilibriumStatus,
    pub cap: Cap,
    pub equilibria: Vec<EquilibriumPoint>,
    /// How the result was obtained, including grid resolution and epsilon for
    /// numeric searches.
    pub certificate: String,
}

impl EquilibriumReport {
    pub fn point(&self) -> Option<&EquilibriumPoint> {
        self.equilibria.first()
    }

    pub fn tolls(&self) -> Option<&[f64]> {
        self.point().map(|p| p.tolls.as_slice())
    }

    pub fn flow(&self) -> Option<&[f64]> {
        self.point().map(|p| p.flow.as_slice())
    }
}

pub(crate) fn binding_set(tolls: &[f64], cap: Cap) -> Vec<usize> {
    if !cap.is_finite() {
        return vec![];
    }
    let c = cap.value();
    (0..tolls.len())
        .filter(|&i| (tolls[i] - c).abs() <= 1e-9 * (1.0 + c))
        .collect()
}
