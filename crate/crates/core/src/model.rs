//! Latency functions, instances, flows and toll vectors.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::{tol, wardrop};

/// Link latency as a function of the flow on the link.
///
/// All coefficients are finite and nonnegative, so every variant is convex and
/// nondecreasing on `[0, inf)`. It is strictly increasing iff some coefficient of
/// degree >= 1 is positive; constant latencies are representable (some textbook
/// examples use them) but are rejected by the exact affine machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatencyFunction {
    /// `a * x + b`
    Affine { a: f64, b: f64 },
    /// `a * x^d + b`
    Monomial { a: f64, d: u32, b: f64 },
    /// `sum_k c_k * x^{deg_k}`, stored as `(degree, coefficient)` pairs.
    Polynomial { coeffs: Vec<(u32, f64)> },
}

impl LatencyFunction {
    pub fn affine(a: f64, b: f64) -> Self {
        LatencyFunction::Affine { a, b }
    }

    pub fn monomial(a: f64, d: u32, b: f64) -> Self {
        LatencyFunction::Monomial { a, d, b }
    }

    pub fn polynomial(coeffs: Vec<(u32, f64)>) -> Self {
        LatencyFunction::Polynomial { coeffs }
    }

    /// A link whose latency does not depend on its flow.
    pub fn constant(b: f64) -> Self {
        LatencyFunction::Polynomial {
            coeffs: vec![(0, b)],
        }
    }

    /// Checks finiteness and sign of every coefficient.
    pub fn check(&self) -> std::result::Result<(), String> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match self {
            LatencyFunction::Affine { a, b } | LatencyFunction::Monomial { a, b, .. } => {
                if !ok(*a) || !ok(*b) {
                    return Err(format!(
                        "coefficients must be finite and >= 0 (a={a}, b={b})"
                    ));
                }
            }
            LatencyFunction::Polynomial { coeffs } => {
                if coeffs.is_empty() {
                    return Err("polynomial needs at least one coefficient".into());
                }
                if let Some((d, c)) = coeffs.iter().find(|(_, c)| !ok(*c)) {
                    return Err(format!(
                        "coefficient of degree {d} must be finite and >= 0 (got {c})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Latency at flow `x`; no domain checks.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match self {
            LatencyFunction::Affine { a, b } => a * x + b,
            LatencyFunction::Monomial { a, d, b } => a * powu(x, *d) + b,
            LatencyFunction::Polynomial { coeffs } => {
                coeffs.iter().map(|&(d, c)| c * powu(x, d)).sum()
            }
        }
    }

    /// Derivative at flow `x`; no domain checks.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        match self {
            LatencyFunction::Affine { a, .. } => *a,
            LatencyFunction::Monomial { a, d, .. } => {
                if *d == 0 {
                    0.0
                } else {
                    a * f64::from(*d) * powu(x, d - 1)
                }
            }
            LatencyFunction::Polynomial { coeffs } => coeffs
                .iter()
                .filter(|(d, _)| *d > 0)
                .map(|&(d, c)| c * f64::from(d) * powu(x, d - 1))
                .sum(),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        check_flow_arg(x)?;
        Ok(self.value(x))
    }

    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        check_flow_arg(x)?;
        Ok(self.slope(x))
    }

    /// Latency at zero flow.
    pub fn intercept(&self) -> f64 {
        self.value(0.0)
    }

    /// True if no coefficient of positive degree is positive.
    pub fn is_constant(&self) -> bool {
        match self {
            LatencyFunction::Affine { a, .. } => *a == 0.0,
            LatencyFunction::Monomial { a, d, .. } => *a == 0.0 || *d == 0,
            LatencyFunction::Polynomial { coeffs } => {
                coeffs.iter().all(|&(d, c)| d == 0 || c == 0.0)
            }
        }
    }

    /// Highest degree carrying a positive coefficient.
    pub fn degree(&self) -> u32 {
        match self {
            LatencyFunction::Affine { a, .. } => u32::from(*a > 0.0),
            LatencyFunction::Monomial { a, d, .. } => {
                if *a > 0.0 {
                    *d
                } else {
                    0
                }
            }
            LatencyFunction::Polynomial { coeffs } => coeffs
                .iter()
                .filter(|(_, c)| *c > 0.0)
                .map(|(d, _)| *d)
                .max()
                .unwrap_or(0),
        }
    }

    /// `(slope, intercept)` if the function is affine with a positive slope.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match self {
            LatencyFunction::Affine { a, b } if *a > 0.0 => Some((*a, *b)),
            LatencyFunction::Monomial { a, d: 1, b } if *a > 0.0 => Some((*a, *b)),
            LatencyFunction::Polynomial { coeffs } if self.degree() == 1 => {
                let mut slope = 0.0;
                let mut icpt = 0.0;
                for &(d, c) in coeffs {
                    match d {
                        0 => icpt += c,
                        1 => slope += c,
                        _ => {}
                    }
                }
                Some((slope, icpt))
            }
            _ => None,
        }
    }

    /// Marginal social cost `l(x) + x l'(x)`, again a latency function.
    pub fn marginal_cost(&self) -> LatencyFunction {
        match self {
            LatencyFunction::Affine { a, b } => LatencyFunction::Affine { a: 2.0 * a, b: *b },
            LatencyFunction::Monomial { a, d, b } => LatencyFunction::Monomial {
                a: a * f64::from(d + 1),
                d: *d,
                b: *b,
            },
            LatencyFunction::Polynomial { coeffs } => LatencyFunction::Polynomial {
                coeffs: coeffs
                    .iter()
                    .map(|&(d, c)| (d, c * f64::from(d + 1)))
                    .collect(),
            },
        }
    }

    /// The unique `x >= 0` with `l(x) = y`.
    ///
    /// Closed form for affine and monomial latencies; safeguarded Newton on a
    /// bisection bracket for general polynomials. Constant functions have no
    /// unique preimage and are rejected unless `y` equals the constant, in which
    /// case 0 is returned.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(format!(
                "cannot invert at non-finite level {y}"
            )));
        }
        let floor = self.intercept();
        if y < floor - tol::ROOT * (1.0 + floor.abs()) {
            return Err(Error::NoPreimage { target: y, floor });
        }
        if y <= floor {
            return Ok(0.0);
        }
        if self.is_constant() {
            return Err(Error::NotApplicable(
                "constant latency has no unique preimage".into(),
            ));
        }
        Ok(self.invert_above_floor(y))
    }

    /// Preimage for `y > l(0)` on a non-constant function.
    pub(crate) fn invert_above_floor(&self, y: f64) -> f64 {
        match self {
            LatencyFunction::Affine { a, b } => (y - b) / a,
            LatencyFunction::Monomial { a, d, b } => {
                let r = (y - b) / a;
                match d {
                    1 => r,
                    2 => r.sqrt(),
                    3 => r.cbrt(),
                    _ => r.powf(1.0 / f64::from(*d)),
                }
            }
            LatencyFunction::Polynomial { .. } => self.invert_numeric(y),
        }
    }

    fn invert_numeric(&self, y: f64) -> f64 {
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        while self.value(hi) < y {
            lo = hi;
            hi *= 2.0;
        }
        // Newton from the right stays above the root for convex increasing l;
        // the bracket catches the flat-slope cases near zero.
        let mut x = hi;
        for _ in 0..200 {
            let fx = self.value(x) - y;
            if fx == 0.0 {
                return x;
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.slope(x);
            let newton = if d > 0.0 { x - fx / d } else { f64::NAN };
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * (1.0 + hi) || (x - lo).abs().min((hi - x).abs()) == 0.0 {
                break;
            }
        }
        x
    }
}

#[inline]
fn powu(x: f64, d: u32) -> f64 {
    match d {
        0 => 1.0,
        1 => x,
        2 => x * x,
        3 => x * x * x,
        _ => x.powi(d as i32),
    }
}

fn check_flow_arg(x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!(
            "flow must be finite and >= 0, got {x}"
        )));
    }
    Ok(())
}

/// Uniform price cap; `Cap::INF` means unregulated.
///
/// Serializes as a JSON number, or as the string `"inf"` when unbounded.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Cap(f64);

impl Cap {
    pub const INF: Cap = Cap(f64::INFINITY);

    pub fn new(c: f64) -> Result<Self> {
        if c.is_nan() || c < 0.0 {
            return Err(Error::Domain(format!("cap must be >= 0, got {c}")));
        }
        Ok(Cap(c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_finite() {
            write!(f, "{}", self.0)
        } else {
            f.write_str("inf")
        }
    }
}

impl std::str::FromStr for Cap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(Cap::INF);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("invalid cap '{s}' (expected a number or 'inf')")))?;
        Cap::new(v)
    }
}

impl Serialize for Cap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

impl<'de> Deserialize<'de> for Cap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Cap::new(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceRepr {
    #[serde(default = "unit_demand")]
    demand: f64,
    links: Vec<LatencyFunction>,
}

fn unit_demand() -> f64 {
    1.0
}

/// Parallel links between one origin and one destination, plus the demand routed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    links: Vec<LatencyFunction>,
    demand: f64,
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        Instance::with_demand(r.links, r.demand)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(inst: Instance) -> Self {
        InstanceRepr {
            demand: inst.demand,
            links: inst.links,
        }
    }
}

impl Instance {
    /// Unit-demand instance.
    pub fn new(links: Vec<LatencyFunction>) -> Result<Self> {
        Self::with_demand(links, 1.0)
    }

    pub fn with_demand(links: Vec<LatencyFunction>, demand: f64) -> Result<Self> {
        if links.len() < 2 {
            return Err(Error::Structural {
                reason: format!("need at least 2 links, got {}", links.len()),
                links: (0..links.len()).collect(),
            });
        }
        let mut bad = Vec::new();
        let mut reasons = Vec::new();
        for (i, l) in links.iter().enumerate() {
            if let Err(r) = l.check() {
                bad.push(i);
                reasons.push(format!("link {i}: {r}"));
            }
        }
        if !bad.is_empty() {
            return Err(Error::Structural {
                reason: reasons.join("; "),
                links: bad,
            });
        }
        if !demand.is_finite() || demand < 0.0 {
            return Err(Error::Structural {
                reason: format!("demand must be finite and >= 0, got {demand}"),
                links: vec![],
            });
        }
        Ok(Instance { links, demand })
    }

    /// Affine instance from `(a_i, b_i)` pairs with unit demand.
    pub fn affine(coeffs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            coeffs
                .iter()
                .map(|&(a, b)| LatencyFunction::affine(a, b))
                .collect(),
        )
    }

    /// Parses the JSON instance format. Syntax and schema problems give
    /// `Parse`, well-formed but invalid instances give `Structural`.
    pub fn from_json(text: &str) -> Result<Self> {
        let repr: InstanceRepr =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Instance::try_from(repr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn links(&self) -> &[LatencyFunction] {
        &self.links
    }

    pub fn link(&self, i: usize) -> &LatencyFunction {
        &self.links[i]
    }

    pub fn n(&self) -> usize {
        self.links.len()
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    /// Same links with every latency replaced by its marginal cost.
    pub fn marginal_cost_instance(&self) -> Instance {
        Instance {
            links: self
                .links
                .iter()
                .map(LatencyFunction::marginal_cost)
                .collect(),
            demand: self.demand,
        }
    }

    /// `(a_i, b_i)` for every link if all latencies are affine with `a_i > 0`.
    pub fn affine_coefficients(&self) -> Option<Vec<(f64, f64)>> {
        self.links.iter().map(LatencyFunction::as_affine).collect()
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Affine coefficients, provided the zero-toll equilibrium uses every link and
    /// demand is positive. This is the entry condition for the exact SPNE
    /// characterization and the optimal-cap algorithm.
    pub fn require_affine_full_support(&self) -> Result<Vec<(f64, f64)>> {
        let Some(coeffs) = self.affine_coefficients() else {
            let bad: Vec<usize> = (0..self.n())
                .filter(|&i| self.links[i].as_affine().is_none())
                .collect();
            return Err(Error::NotApplicable(format!(
                "requires strictly increasing affine latencies; links {bad:?} are not"
            )));
        };
        if self.demand <= 0.0 {
            return Err(Error::NotApplicable("requires positive demand".into()));
        }
        let report = validate(self)?;
        if !report.full_support {
            return Err(Error::NotApplicable(format!(
                "zero-toll Wardrop equilibrium {:?} does not use every link",
                report.zero_toll_flow
            )));
        }
        Ok(coeffs)
    }
}

/// Per-link flow; `effective_cost` is the common cost on the used links when known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub x: Vec<f64>,
    pub effective_cost: Option<f64>,
}

impl Flow {
    pub fn new(x: Vec<f64>) -> Self {
        Flow {
            x,
            effective_cost: None,
        }
    }

    /// Checks nonnegativity and that the flow routes exactly the demand.
    pub fn check_feasible(&self, inst: &Instance) -> Result<()> {
        inst.check_len(&self.x)?;
        if let Some(v) = self.x.iter().find(|v| !v.is_finite() || **v < -tol::FLOW) {
            return Err(Error::InfeasibleFlow(format!(
                "negative or non-finite entry {v}"
            )));
        }
        let total: f64 = self.x.iter().sum();
        if (total - inst.demand()).abs() > tol::FLOW * (1.0 + inst.demand()) {
            return Err(Error::InfeasibleFlow(format!(
                "flow sums to {total}, demand is {}",
                inst.demand()
            )));
        }
        Ok(())
    }
}

/// Per-link tolls, each within `[0, cap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TollVector {
    pub t: Vec<f64>,
    pub cap: Cap,
}

impl TollVector {
    pub fn new(t: Vec<f64>, cap: Cap) -> Result<Self> {
        check_tolls(&t)?;
        if let Some(v) = t.iter().find(|&&v| v > cap.value() + tol::FLOW) {
            return Err(Error::Domain(format!("toll {v} exceeds cap {cap}")));
        }
        Ok(TollVector { t, cap })
    }

    pub fn uncapped(t: Vec<f64>) -> Result<Self> {
        Self::new(t, Cap::INF)
    }
}

pub(crate) fn check_tolls(t: &[f64]) -> Result<()> {
    if let Some(v) = t.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Domain(format!(
            "tolls must be finite and >= 0, got {v}"
        )));
    }
    Ok(())
}

/// `C(x) = sum_i l_i(x_i) x_i`.
pub fn total_cost(inst: &Instance, x: &[f64]) -> Result<f64> {
    inst.check_len(x)?;
    if let Some(v) = x.iter().find(|v| !v.is_finite() || **v < -tol::FLOW) {
        return Err(Error::Domain(format!(
            "flow entry {v} is negative or non-finite"
        )));
    }
    Ok(cost_unchecked(inst, x))
}

#[inline]
pub(crate) fn cost_unchecked(inst: &Instance, x: &[f64]) -> f64 {
    inst.links()
        .iter()
        .zip(x)
        .map(|(l, &xi)| {
            let xi = xi.max(0.0);
            l.value(xi) * xi
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n: usize,
    pub demand: f64,
    /// Every latency is affine with a positive slope.
    pub affine: bool,
    pub strictly_increasing: bool,
    /// Links with a flow-independent latency.
    pub non_increasing_links: Vec<usize>,
    pub zero_toll_flow: Vec<f64>,
    /// The zero-toll equilibrium puts positive flow on every link.
    pub full_support: bool,
    /// Affine, full support and positive demand: exact SPNE and optimal-cap
    /// computations apply.
    pub exact_methods_apply: bool,
}

/// Summarizes which solvers apply to `inst`. Malformed instances cannot be
/// constructed in the first place, see [`Instance::with_demand`].
pub fn validate(inst: &Instance) -> Result<ValidationReport> {
    let non_increasing: Vec<usize> = (0..inst.n())
        .filter(|&i| inst.link(i).is_constant())
        .collect();
    let affine = inst.affine_coefficients().is_some();
    let sol = wardrop::solve_wardrop(inst, &vec![0.0; inst.n()])?;
    let full_support = inst.demand() > 0.0 && sol.flow.x.iter().all(|&xi| xi > tol::SUPPORT);
    Ok(ValidationReport {
        n: inst.n(),
        demand: inst.demand(),
        affine,
        strictly_increasing: non_increasing.is_empty(),
        non_increasing_links: non_increasing,
        zero_toll_flow: sol.flow.x,
        full_support,
        exact_methods_apply: affine && full_support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, eps: f64) -> bool {
        (a - b).abs() <= eps
    }

    #[test]
    fn eval_examples() {
        let l = LatencyFunction::affine(1.0, 0.5);
        assert_eq!(l.eval(0.25).unwrap(), 0.75);
        assert_eq!(l.eval(0.0).unwrap(), 0.5);
        let m = LatencyFunction::monomial(1.0, 3, 0.0);
        assert_eq!(m.eval(0.5).unwrap(), 0.125);
        assert!(matches!(l.eval(-1.0), Err(Error::Domain(_))));
        assert!(matches!(l.eval(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            LatencyFunction::affine(2.0, 0.0)
                .eval_derivative(3.7)
                .unwrap(),
            2.0
        );
        assert_eq!(
            LatencyFunction::monomial(1.0, 2, 0.0)
                .eval_derivative(1.0)
                .unwrap(),
            2.0
        );
        assert_eq!(
            LatencyFunction::affine(1.0, 0.5)
                .eval_derivative(0.3)
                .unwrap(),
            1.0
        );
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            LatencyFunction::affine(1.0, 0.5).invert(0.75).unwrap(),
            0.25
        );
        assert_eq!(
            LatencyFunction::monomial(1.0, 2, 0.0).invert(4.0).unwrap(),
            2.0
        );
        let p = LatencyFunction::polynomial(vec![(3, 1.0), (1, 1.0)]);
        assert!(close(p.invert(2.0).unwrap(), 1.0, 1e-12));
        assert!(matches!(
            LatencyFunction::affine(1.0, 0.5).invert(0.2),
            Err(Error::NoPreimage { .. })
        ));
    }

    #[test]
    fn constant_latency_is_flagged_not_rejected() {
        let c = LatencyFunction::constant(0.25);
        assert!(c.is_constant());
        assert!(c.as_affine().is_none());
        assert_eq!(c.invert(0.25).unwrap(), 0.0);
        assert!(c.invert(0.5).is_err());
        assert!(LatencyFunction::affine(0.0, 1.0).is_constant());
    }

    #[test]
    fn polynomial_of_degree_one_counts_as_affine() {
        let p = LatencyFunction::polynomial(vec![(0, 0.5), (1, 2.0)]);
        assert_eq!(p.as_affine(), Some((2.0, 0.5)));
        assert_eq!(
            LatencyFunction::monomial(3.0, 1, 1.0).as_affine(),
            Some((3.0, 1.0))
        );
        assert_eq!(LatencyFunction::monomial(3.0, 2, 1.0).as_affine(), None);
    }

    #[test]
    fn marginal_cost_matches_definition() {
        let l = LatencyFunction::polynomial(vec![(0, 0.5), (1, 1.0), (3, 2.0)]);
        let m = l.marginal_cost();
        for &x in &[0.0, 0.3, 1.7] {
            let want = l.value(x) + x * l.slope(x);
            assert!(close(m.value(x), want, 1e-12));
        }
    }

    #[test]
    fn total_cost_examples() {
        let inst = Instance::affine(&[(1.0, 0.0), (1.0, 0.5)]).unwrap();
        assert!(close(
            total_cost(&inst, &[0.75, 0.25]).unwrap(),
            0.75,
            1e-15
        ));
        assert!(close(
            total_cost(&inst, &[7.0 / 12.0, 5.0 / 12.0]).unwrap(),
            13.0 / 18.0,
            1e-15
        ));
        let sym = Instance::affine(&[(1.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(total_cost(&sym, &[0.5, 0.5]).unwrap(), 0.5);
        assert!(matches!(total_cost(&sym, &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn structural_errors() {
        let one = Instance::new(vec![LatencyFunction::affine(1.0, 0.0)]);
        assert!(matches!(one, Err(Error::Structural { .. })));
        let neg = Instance::new(vec![
            LatencyFunction::affine(1.0, 0.0),
            LatencyFunction::affine(-1.0, 0.0),
        ]);
        match neg {
            Err(Error::Structural { links, .. }) => assert_eq!(links, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Instance::with_demand(
            vec![
                LatencyFunction::affine(1.0, 0.0),
                LatencyFunction::affine(1.0, 0.0)
            ],
            -1.0
        )
        .is_err());
    }

    #[test]
    fn validate_reports_support() {
        let alg = Instance::affine(&[(1.0, 0.0), (1.0, 0.5)]).unwrap();
        let r = validate(&alg).unwrap();
        assert!(r.affine && r.full_support && r.exact_methods_apply);
        assert!(close(r.zero_toll_flow[0], 0.75, 1e-12));
        assert!(close(r.zero_toll_flow[1], 0.25, 1e-12));

        let mul = Instance::affine(&[(1.0, 0.0), (1.0, 0.0), (0.5, 1.2)]).unwrap();
        let r = validate(&mul).unwrap();
        assert!(r.affine && !r.full_support);
        assert!(close(r.zero_toll_flow[0], 0.5, 1e-12));
        assert!(close(r.zero_toll_flow[2], 0.0, 1e-12));
        assert!(mul.require_affine_full_support().is_err());
    }

    #[test]
    fn json_schema_roundtrip() {
        let text = r#"{"demand": 1.0, "links": [{"kind":"affine","a":1.0,"b":0.0},
            {"kind":"monomial","a":1.0,"d":3,"b":0.2},
            {"kind":"polynomial","coeffs":[[0,0.5],[1,1.0]]}]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.link(1), &LatencyFunction::monomial(1.0, 3, 0.2));
        assert_eq!(inst.link(2).as_affine(), Some((1.0, 0.5)));
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back, inst);

        let default_demand = Instance::from_json(
            r#"{"links": [{"kind":"affine","a":1,"b":0},{"kind":"affine","a":2,"b":0}]}"#,
        )
        .unwrap();
        assert_eq!(default_demand.demand(), 1.0);
        assert!(Instance::from_json(r#"{"links": [{"kind":"affine","a":1,"b":0}]}"#).is_err());
    }

    #[test]
    fn cap_parsing_and_serialization() {
        assert_eq!("inf".parse::<Cap>().unwrap(), Cap::INF);
        assert_eq!("0.5".parse::<Cap>().unwrap().value(), 0.5);
        assert!("-1".parse::<Cap>().is_err());
        assert_eq!(serde_json::to_string(&Cap::INF).unwrap(), "\"inf\"");
        assert_eq!(
            serde_json::to_string(&Cap::new(2.0).unwrap()).unwrap(),
            "2.0"
        );
        let c: Cap = serde_json::from_str("\"inf\"").unwrap();
        assert!(!c.is_finite());
        let c: Cap = serde_json::from_str("1.5").unwrap();
        assert_eq!(c.value(), 1.5);
    }

    #[test]
    fn toll_vector_respects_cap() {
        assert!(TollVector::new(vec![0.5, 1.0], Cap::new(1.0).unwrap()).is_ok());
        assert!(TollVector::new(vec![0.5, 1.5], Cap::new(1.0).unwrap()).is_err());
        assert!(TollVector::uncapped(vec![-0.1, 1.0]).is_err());
    }
}
