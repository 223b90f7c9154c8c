//! Interior, side and corner equilibria with their linearisations.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, Mat2};
use crate::model::{State, SystemParams};
use crate::roots::{bracketed_root, sign_changes};

/// Real parts within this band of zero count as zero.
pub const DEAD_BAND: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Interior,
    BottomSide,
    TopSide,
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Saddle,
    CenterCandidate,
}

impl Stability {
    pub fn classify(eigs: &[Complex64; 2]) -> Self {
        let re = [eigs[0].re, eigs[1].re];
        let pos = re.iter().filter(|v| **v > DEAD_BAND).count();
        let neg = re.iter().filter(|v| **v < -DEAD_BAND).count();
        match (pos, neg) {
            (0, 2) => Stability::Stable,
            (1, 1) => Stability::Saddle,
            (p, 0) if p > 0 => Stability::Unstable,
            _ => Stability::CenterCandidate,
        }
    }

    /// True if some direction grows, which includes saddles.
    pub fn is_unstable(self) -> bool {
        matches!(self, Stability::Unstable | Stability::Saddle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "EquilibriumRecord")]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub location: State,
    pub jacobian: Mat2,
    pub eigenvalues: [Complex64; 2],
    pub stability: Stability,
}

impl EquilibriumReport {
    pub fn from_jacobian(kind: EquilibriumKind, location: State, jacobian: Mat2) -> Self {
        let eigenvalues = eigenvalues(&jacobian);
        EquilibriumReport {
            kind,
            location,
            jacobian,
            stability: Stability::classify(&eigenvalues),
            eigenvalues,
        }
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues[0].re.max(self.eigenvalues[1].re)
    }
}

#[derive(Serialize)]
struct EquilibriumRecord {
    kind: EquilibriumKind,
    x: f64,
    r: f64,
    jacobian: Mat2,
    eigenvalues: [[f64; 2]; 2],
    stability: Stability,
}

impl From<EquilibriumReport> for EquilibriumRecord {
    fn from(e: EquilibriumReport) -> Self {
        EquilibriumRecord {
            kind: e.kind,
            x: e.location.x,
            r: e.location.r,
            jacobian: e.jacobian,
            eigenvalues: e.eigenvalues.map(|z| [z.re, z.im]),
            stability: e.stability,
        }
    }
}

fn require_uncontrolled(p: &SystemParams) -> Result<()> {
    p.validate()?;
    if p.u != 0.0 {
        return Err(Error::Precondition(
            "uncontrolled analysis needs u=0; use the control module".into(),
        ));
    }
    Ok(())
}

/// Open interval of `mu * theta_hat` for which the interior equilibrium exists.
pub fn interior_existence_window(p: &SystemParams) -> (f64, f64) {
    let t = p.theta;
    (-(t * p.a + t * t * p.b), t * p.c + t * t * p.d)
}

pub fn interior_exists(p: &SystemParams) -> bool {
    let (lo, hi) = interior_existence_window(p);
    let v = p.mu * p.derived().theta_hat;
    lo < v && v < hi
}

/// Location of the interior equilibrium, if it exists.
pub fn interior_location(p: &SystemParams) -> Option<State> {
    if !interior_exists(p) {
        return None;
    }
    let t = p.theta;
    let k = p.derived();
    Some(State {
        x: 1.0 / (t + 1.0),
        r: (t * p.a + t * t * p.b + p.mu * k.theta_hat) / (t * k.zeta),
    })
}

/// Closed-form Jacobian at the interior equilibrium and its eigenvalues.
pub fn interior_jacobian(p: &SystemParams) -> Result<Option<(Mat2, [Complex64; 2])>> {
    require_uncontrolled(p)?;
    if !interior_exists(p) {
        return Ok(None);
    }
    let (a, b, c, d, t, mu) = (p.a, p.b, p.c, p.d, p.theta, p.mu);
    let k = p.derived();
    let z = k.zeta;
    let j11 = (t * t * (a * d - b * c) - mu * k.delta) / (t * (t + 1.0) * z);
    let j12 = -t * z / (t + 1.0).powi(3);
    let j21 = (t + 1.0) * (c * t + d * t * t - mu * k.theta_hat) * (a * t + b * t * t + mu * k.theta_hat)
        / (t * t * z * z);
    let j = [[j11, j12], [j21, 0.0]];
    Ok(Some((j, eigenvalues(&j))))
}

pub fn interior_equilibrium(p: &SystemParams) -> Result<Option<EquilibriumReport>> {
    let Some((j, _)) = interior_jacobian(p)? else {
        return Ok(None);
    };
    let loc = interior_location(p).expect("existence already checked");
    Ok(Some(EquilibriumReport::from_jacobian(EquilibriumKind::Interior, loc, j)))
}

/// Strategy component of the flow restricted to the bottom side `r = 0`.
pub fn bottom_side_field(p: &SystemParams, x: f64) -> f64 {
    p.rhs(x, 0.0)[0]
}

/// Strategy component of the flow restricted to the top side `r = 1`.
pub fn top_side_field(p: &SystemParams, x: f64) -> f64 {
    p.rhs(x, 1.0)[0]
}

/// Interval guaranteed to contain the side equilibrium: the bottom root lies
/// in `(max(1/2, 1/(theta+1)), 1)`, the top root in `(0, min(1/2, 1/(theta+1)))`.
pub fn side_interval(kind: EquilibriumKind, theta: f64) -> (f64, f64) {
    let xs = 1.0 / (theta + 1.0);
    match kind {
        EquilibriumKind::BottomSide => (0.5f64.max(xs), 1.0),
        EquilibriumKind::TopSide => (0.0, 0.5f64.min(xs)),
        _ => (0.0, 1.0),
    }
}

fn side_roots(p: &SystemParams, r: f64) -> Vec<f64> {
    let f = |x: f64| p.rhs(x, r)[0];
    let mut roots: Vec<f64> = sign_changes(f, 0.0, 1.0, 2000)
        .into_iter()
        .filter_map(|(lo, hi)| bracketed_root(f, lo, hi, 1e-15))
        .filter(|x| *x > 0.0 && *x < 1.0)
        .collect();
    roots.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    roots
}

/// Equilibria in the open bottom and top sides (requires `mu > 0`).
pub fn boundary_equilibria(p: &SystemParams) -> Result<Vec<EquilibriumReport>> {
    require_uncontrolled(p)?;
    if p.mu <= 0.0 {
        return Err(Error::Precondition("side equilibria need mu > 0".into()));
    }
    let mut out = Vec::new();
    for (r, kind) in [(0.0, EquilibriumKind::BottomSide), (1.0, EquilibriumKind::TopSide)] {
        for x in side_roots(p, r) {
            let s = State { x, r };
            out.push(EquilibriumReport::from_jacobian(kind, s, p.jacobian(x, r)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerAnalysis {
    /// Ordered along the boundary loop: (0,0), (1,0), (1,1), (0,1).
    pub corners: Vec<EquilibriumReport>,
    pub traces: [f64; 4],
}

/// Linearisation at the four corners (requires `mu = 0`).
pub fn corner_analysis(p: &SystemParams) -> Result<CornerAnalysis> {
    require_uncontrolled(p)?;
    if p.mu != 0.0 {
        return Err(Error::Precondition("corners are equilibria only for mu = 0".into()));
    }
    let mut corners = Vec::new();
    let mut traces = [0.0; 4];
    for (i, (x, r)) in [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)].into_iter().enumerate() {
        let j = p.jacobian(x, r);
        traces[i] = j[0][0] + j[1][1];
        corners.push(EquilibriumReport::from_jacobian(EquilibriumKind::Corner, State { x, r }, j));
    }
    Ok(CornerAnalysis { corners, traces })
}
