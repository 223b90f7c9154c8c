//! Payoffs, parameters and the vector field of the coupled strategy/resource system.
//!
//! `x` is the share of cooperators and `r` the resource level, both in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::poly::Poly2;

/// Slack allowed when checking that a point lies in the unit square.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Payoff matrices of the depleted (`poor`) and replete (`rich`) games.
///
/// Rows are the focal strategy (cooperate, defect), columns the opponent:
/// `poor = [[R1, S1], [T1, P1]]`, `rich = [[R2, S2], [T2, P2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffPair {
    pub poor: Mat2,
    pub rich: Mat2,
}

impl PayoffPair {
    pub fn new(poor: Mat2, rich: Mat2) -> Result<Self> {
        let [[r1, s1], [t1, p1]] = poor;
        let [[r2, s2], [t2, p2]] = rich;
        let checks = [
            (r1 > t1, "R1 > T1", r1, t1),
            (s1 > p1, "S1 > P1", s1, p1),
            (r2 < t2, "R2 < T2", r2, t2),
            (s2 < p2, "S2 < P2", s2, p2),
        ];
        for (ok, inequality, l, r) in checks {
            if !(l.is_finite() && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite payoff in {inequality}")));
            }
            if !ok {
                return Err(Error::InvalidPayoff {
                    inequality,
                    detail: format!("{l} vs {r}"),
                });
            }
        }
        Ok(PayoffPair { poor, rich })
    }

    pub fn coefficients(&self) -> Coefficients {
        reparameterize(self)
    }
}

/// Payoff differences that drive the strategy dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

pub fn reparameterize(pair: &PayoffPair) -> Coefficients {
    let [[r1, s1], [t1, p1]] = pair.poor;
    let [[r2, s2], [t2, p2]] = pair.rich;
    Coefficients {
        a: r1 - t1,
        b: s1 - p1,
        c: t2 - r2,
        d: p2 - s2,
    }
}

/// Payoff matrix felt at resource level `r`, with a subsidy `u` added to the
/// cooperator row.
pub fn payoff_at(pair: &PayoffPair, r: f64, u: f64) -> Result<Mat2> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("resource level r={r}")));
    }
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = (1.0 - r) * pair.poor[i][j] + r * pair.rich[i][j];
        }
    }
    m[0][0] += u;
    m[0][1] += u;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub theta: f64,
    pub mu: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<PayoffPair>,
}

impl SystemParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64, theta: f64, mu: f64) -> Result<Self> {
        let p = SystemParams {
            a,
            b,
            c,
            d,
            theta,
            mu,
            u: 0.0,
            payoffs: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_payoffs(pair: PayoffPair, theta: f64, mu: f64) -> Result<Self> {
        let k = pair.coefficients();
        let mut p = Self::new(k.a, k.b, k.c, k.d, theta, mu)?;
        p.payoffs = Some(pair);
        Ok(p)
    }

    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_u(mut self, u: f64) -> Result<Self> {
        self.u = u;
        self.validate()?;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name}={v} must be positive")));
            }
        }
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::InvalidParameter(format!("theta={} must be positive", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidParameter(format!("mu={} must lie in [0, 1]", self.mu)));
        }
        if !(self.u.is_finite() && self.u >= 0.0) {
            return Err(Error::InvalidParameter(format!("u={} must be non-negative", self.u)));
        }
        Ok(())
    }

    /// The subsidy term is only modelled for the symmetric feedback rate.
    pub fn check_supported(&self) -> Result<()> {
        if self.u > 0.0 && self.theta != 1.0 {
            return Err(Error::Unsupported(format!(
                "subsidy u={} requires theta=1 (got {})",
                self.u, self.theta
            )));
        }
        Ok(())
    }

    pub fn derived(&self) -> DerivedConstants {
        DerivedConstants::of(self)
    }

    /// Right-hand side without domain checks.
    pub fn rhs(&self, x: f64, r: f64) -> [f64; 2] {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let k = -c + d - a + b;
        let l = a - b;
        let m = d + b;
        let dx = x * (1.0 - x) * (x * r * k + x * l - r * m + b + self.u) + self.mu * (1.0 - 2.0 * x);
        let dr = r * (1.0 - r) * ((self.theta + 1.0) * x - 1.0);
        [dx, dr]
    }

    pub fn field_polynomials(&self) -> [Poly2; 2] {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let one = Poly2::constant(1.0);
        let x = Poly2::x();
        let r = Poly2::r();
        let bracket = x * r * (-c + d - a + b) + x * (a - b) - r * (d + b) + Poly2::constant(b + self.u);
        let fx = x * (one - x) * bracket + (one - x * 2.0) * self.mu;
        let fr = r * (one - r) * (x * (self.theta + 1.0) - one);
        [fx, fr]
    }

    /// Jacobian of the field, exact.
    pub fn jacobian(&self, x: f64, r: f64) -> Mat2 {
        let [f, g] = self.field_polynomials();
        [
            [f.d_dx().eval(x, r), f.d_dr().eval(x, r)],
            [g.d_dx().eval(x, r), g.d_dr().eval(x, r)],
        ]
    }
}

/// Combinations of the coefficients that recur in the analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub zeta: f64,
    pub theta_hat: f64,
    pub delta: f64,
    pub sigma: f64,
}

impl DerivedConstants {
    pub fn of(p: &SystemParams) -> Self {
        let (a, b, c, d, t) = (p.a, p.b, p.c, p.d, p.theta);
        DerivedConstants {
            zeta: a + c + t * b + t * d,
            theta_hat: t.powi(3) + t * t - t - 1.0,
            delta: (a + c) * (1.0 + t * t + 2.0 * t.powi(3)) + (b + d) * (2.0 * t + t * t + t.powi(4)),
            sigma: a + b + c + d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub r: f64,
}

impl State {
    pub fn new(x: f64, r: f64) -> Result<Self> {
        let s = State { x, r };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && (-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&v);
        if ok(self.x) && ok(self.r) {
            Ok(())
        } else {
            Err(Error::Domain(format!("state (x={}, r={})", self.x, self.r)))
        }
    }

    pub fn dist(&self, o: &State) -> f64 {
        (self.x - o.x).hypot(self.r - o.r)
    }
}

pub fn vector_field(s: State, p: &SystemParams) -> Result<[f64; 2]> {
    p.check_supported()?;
    s.check()?;
    Ok(p.rhs(s.x, s.r))
}

/// On-disk parameter description. Exactly one of the payoff group
/// (`R1`..`P2`) or the coefficient group (`a`..`d`) must be given.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamFile {
    pub R1: Option<f64>,
    pub S1: Option<f64>,
    pub T1: Option<f64>,
    pub P1: Option<f64>,
    pub R2: Option<f64>,
    pub S2: Option<f64>,
    pub T2: Option<f64>,
    pub P2: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub d: Option<f64>,
    pub theta: Option<f64>,
    pub mu: Option<f64>,
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamFormat {
    Json,
    Toml,
}

impl ParamFile {
    pub fn parse(text: &str, format: ParamFormat) -> Result<Self> {
        match format {
            ParamFormat::Json => serde_json::from_str(text).map_err(|e| Error::Config(e.to_string())),
            ParamFormat::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string())),
        }
    }

    pub fn into_params(self) -> Result<SystemParams> {
        let payoff = [self.R1, self.S1, self.T1, self.P1, self.R2, self.S2, self.T2, self.P2];
        let coeff = [self.a, self.b, self.c, self.d];
        let any_payoff = payoff.iter().any(Option::is_some);
        let any_coeff = coeff.iter().any(Option::is_some);
        let theta = self.theta.ok_or_else(|| Error::Config("missing key theta".into()))?;
        let mu = self.mu.ok_or_else(|| Error::Config("missing key mu".into()))?;
        let p = match (any_payoff, any_coeff) {
            (true, true) => {
                return Err(Error::Config(
                    "give either payoff entries R1..P2 or coefficients a..d, not both".into(),
                ))
            }
            (false, false) => {
                return Err(Error::Config("no payoff entries or coefficients given".into()))
            }
            (true, false) => {
                let v: Vec<f64> = payoff
                    .iter()
                    .zip(["R1", "S1", "T1", "P1", "R2", "S2", "T2", "P2"])
                    .map(|(v, k)| v.ok_or_else(|| Error::Config(format!("missing key {k}"))))
                    .collect::<Result<_>>()?;
                let pair = PayoffPair::new([[v[0], v[1]], [v[2], v[3]]], [[v[4], v[5]], [v[6], v[7]]])?;
                SystemParams::from_payoffs(pair, theta, mu)?
            }
            (false, true) => {
                let v: Vec<f64> = coeff
                    .iter()
                    .zip(["a", "b", "c", "d"])
                    .map(|(v, k)| v.ok_or_else(|| Error::Config(format!("missing key {k}"))))
                    .collect::<Result<_>>()?;
                SystemParams::new(v[0], v[1], v[2], v[3], theta, mu)?
            }
        };
        let p = p.with_u(self.u.unwrap_or(0.0))?;
        p.check_supported()?;
        Ok(p)
    }
}

pub fn parse_params(text: &str, format: ParamFormat) -> Result<SystemParams> {
    ParamFile::parse(text, format)?.into_params()
}

/// Reads a `.json` or `.toml` parameter file.
pub fn load_params(path: &std::path::Path) -> Result<SystemParams> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => ParamFormat::Json,
        Some("toml") => ParamFormat::Toml,
        other => {
            return Err(Error::Config(format!(
                "unrecognised parameter file extension {other:?} (want .json or .toml)"
            )))
        }
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_params(&text, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asymmetric() -> SystemParams {
        SystemParams::new(3.0, 0.2, 0.5, 1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn reparameterize_known_payoffs() {
        let pair = PayoffPair::new([[5.0, 1.2], [2.0, 1.0]], [[3.0, 0.5], [3.5, 1.5]]).unwrap();
        let k = pair.coefficients();
        for (got, want) in [(k.a, 3.0), (k.b, 0.2), (k.c, 0.5), (k.d, 1.0)] {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn payoff_violation_names_inequality() {
        let err = PayoffPair::new([[1.0, 1.2], [2.0, 1.0]], [[3.0, 0.5], [3.5, 1.5]]).unwrap_err();
        assert!(matches!(err, Error::InvalidPayoff { inequality: "R1 > T1", .. }));
    }

    #[test]
    fn payoff_interpolation_endpoints() {
        let pair = PayoffPair::new([[5.0, 1.2], [2.0, 1.0]], [[3.0, 0.5], [3.5, 1.5]]).unwrap();
        assert_eq!(payoff_at(&pair, 0.0, 0.0).unwrap(), pair.poor);
        assert_eq!(payoff_at(&pair, 1.0, 0.0).unwrap(), pair.rich);
        let m = payoff_at(&pair, 0.5, 1.0).unwrap();
        assert_eq!(m[0][0], 5.0);
        assert_eq!(m[1][1], 1.25);
        assert!(matches!(payoff_at(&pair, 1.5, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn field_at_center_of_asymmetric() {
        // at x=1/2 the mutation term vanishes and dr=0 for theta=1
        let f = vector_field(State::new(0.5, 0.5).unwrap(), &asymmetric()).unwrap();
        let k = -0.5 + 1.0 - 3.0 + 0.2;
        let expected = 0.25 * (0.25 * k + 0.5 * 2.8 - 0.5 * 1.2 + 0.2);
        assert!((f[0] - expected).abs() < 1e-15);
        assert_eq!(f[1], 0.0);
    }

    #[test]
    fn corners_are_fixed_without_mutation() {
        let p = asymmetric().with_mu(0.0).unwrap();
        for (x, r) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            assert_eq!(p.rhs(x, r), [0.0, 0.0]);
        }
    }

    #[test]
    fn polynomial_form_matches_factored_form() {
        let p = SystemParams::new(1.3, 0.4, 2.2, 0.9, 1.7, 0.21).unwrap();
        let [f, g] = p.field_polynomials();
        for &(x, r) in &[(0.1, 0.9), (0.5, 0.5), (0.77, 0.03)] {
            let v = p.rhs(x, r);
            assert!((f.eval(x, r) - v[0]).abs() < 1e-14);
            assert!((g.eval(x, r) - v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = SystemParams::new(1.3, 0.4, 2.2, 0.9, 1.7, 0.21).unwrap().with_theta(1.0).unwrap().with_u(0.3).unwrap();
        let (x, r) = (0.37, 0.61);
        let j = p.jacobian(x, r);
        let h = 1e-6;
        for k in 0..2 {
            let dxp = p.rhs(x + h, r)[k] - p.rhs(x - h, r)[k];
            let drp = p.rhs(x, r + h)[k] - p.rhs(x, r - h)[k];
            assert!((j[k][0] - dxp / (2.0 * h)).abs() < 1e-8);
            assert!((j[k][1] - drp / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn subsidy_needs_unit_theta() {
        let mut p = asymmetric();
        p.theta = 2.0;
        p.u = 0.5;
        assert!(matches!(vector_field(State { x: 0.5, r: 0.5 }, &p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rejects_out_of_domain_state() {
        assert!(matches!(vector_field(State { x: 1.1, r: 0.5 }, &asymmetric()), Err(Error::Domain(_))));
        assert!(State::new(1.0 + 1e-10, 0.0).is_ok());
    }

    #[test]
    fn param_file_groups() {
        let p = parse_params("a=3\nb=0.2\nc=0.5\nd=1\ntheta=1\nmu=0.1\n", ParamFormat::Toml).unwrap();
        assert_eq!(p.a, 3.0);
        assert_eq!(p.u, 0.0);
        let p = parse_params(
            r#"{"R1":5,"S1":1.2,"T1":2,"P1":1,"R2":3,"S2":0.5,"T2":3.5,"P2":1.5,"theta":1,"mu":0.1,"u":0.5}"#,
            ParamFormat::Json,
        )
        .unwrap();
        assert!((p.b - 0.2).abs() < 1e-15 && p.a == 3.0 && p.u == 0.5);
        assert!(p.payoffs.is_some());
        let both = parse_params("a=3\nb=0.2\nc=0.5\nd=1\nR1=2\ntheta=1\nmu=0.1\n", ParamFormat::Toml);
        assert!(matches!(both, Err(Error::Config(_))));
        let missing = parse_params("a=3\nb=0.2\nc=0.5\ntheta=1\nmu=0.1\n", ParamFormat::Toml);
        assert!(matches!(missing, Err(Error::Config(_))));
        let unknown = parse_params("a=3\nb=0.2\nc=0.5\nd=1\ntheta=1\nmu=0.1\nzz=1\n", ParamFormat::Toml);
        assert!(matches!(unknown, Err(Error::Config(_))));
    }
}
