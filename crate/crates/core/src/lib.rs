//! Toll competition on parallel-link networks under a uniform price cap.
//!
//! * [`model`]: latency functions, instances, flows and tolls.
//! * [`wardrop`]: user equilibria for given tolls and the system optimum.
//! * [`pricing`]: firm profits, best responses, subgame perfect prices and
//!   epsilon-equilibrium certificates.
//! * [`capalg`]: the breakpoint curve `c -> (t(c), x(c), C(x(c)))` and the
//!   optimal uniform cap for affine instances.
//! * [`analysis`]: efficiency ratios, worst-case bounds and smoothness
//!   parameter estimates.
//! * [`presets`]: the named example networks.

pub mod analysis;
pub mod capalg;
pub mod error;
pub mod model;
pub mod presets;
pub mod pricing;
pub mod table;
pub mod tol;
pub mod wardrop;

pub use analysis::{bound_poly, efficiency_ratio, lower_bound_nonexistence, EfficiencyReport};
pub use capalg::{build_cap_curve, cost_at_cap, optimal_cap, sweep, CapCurve, OptimalCapResult};
pub use error::{Error, Result};
pub use model::{
    total_cost, validate, Cap, Flow, Instance, LatencyFunction, TollVector, ValidationReport,
};
pub use pricing::{
    best_response, duopoly_search, profit, spne, spne_at_cap, spne_price_iteration,
    spne_prices_uncapped, verify_spne, BestResponse, EquilibriumReport, EquilibriumStatus,
};
pub use wardrop::{optimal_flow, solve_wardrop, verify_wardrop, WardropSolution};
