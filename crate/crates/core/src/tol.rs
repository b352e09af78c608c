//! Numerical tolerances shared by the solvers.

/// Flow feasibility: `|sum(x) - demand|` and negativity slack.
pub const FLOW: f64 = 1e-9;

/// Target accuracy for bisection-based inversion and level search.
pub const ROOT: f64 = 1e-10;

/// A link with `x_i > SUPPORT` counts as used.
pub const SUPPORT: f64 = 1e-9;

/// Profit values closer than this to the best value are treated as tied maximizers.
pub const TIE: f64 = 1e-7;

/// Default epsilon for equilibrium verification.
pub const EQ: f64 = 1e-6;

/// Default grid resolution for numeric best responses and duopoly searches.
pub const GRID_N: usize = 2000;

/// Golden-section iterations used to polish each grid maximum.
pub const REFINE_ITERS: usize = 60;

/// Firms whose crossing caps agree within this join the binding set together.
pub const BREAKPOINT_TIE: f64 = 1e-10;
