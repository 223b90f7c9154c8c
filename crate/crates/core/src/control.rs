//! Constant subsidy `u` paid to cooperators: controlled equilibria,
//! stabilising thresholds and a recommended incentive.

use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcation::{exponents_of, shape, shape_argmax, DulacExponents};
use crate::equilibria::{EquilibriumKind, EquilibriumReport};
use crate::error::{Error, Result};
use crate::flow::{integrate, IntegratorOptions};
use crate::model::{State, SystemParams};
use crate::roots::{bracketed_root, sign_changes};

fn require_unit_theta(p: &SystemParams) -> Result<()> {
    p.validate()?;
    if p.theta != 1.0 {
        return Err(Error::Unsupported(format!("control analysis needs theta=1 (got {})", p.theta)));
    }
    Ok(())
}

/// Subsidy at which the interior equilibrium reaches the top side.
pub fn u_half(p: &SystemParams) -> f64 {
    (p.c + p.d) / 2.0
}

/// Sign of `(a+c) - (b+d)`, treating a relative gap below 1e-12 as zero.
pub fn balance(p: &SystemParams) -> std::cmp::Ordering {
    let (l, r) = (p.a + p.c, p.b + p.d);
    if (l - r).abs() <= 1e-12 * l.max(r) {
        std::cmp::Ordering::Equal
    } else {
        l.total_cmp(&r)
    }
}

/// Closed-form Jacobian at `(1/2, r_c)` under subsidy `p.u`.
pub fn controlled_jacobian(p: &SystemParams) -> [[f64; 2]; 2] {
    let (a, b, c, d, u, mu) = (p.a, p.b, p.c, p.d, p.u, p.mu);
    let s = a + b + c + d;
    [
        [(a * d - b * c + (b + d - a - c) * u) / (2.0 * s) - 2.0 * mu, -s / 8.0],
        [2.0 * (a + b + 2.0 * u) * (c + d - 2.0 * u) / (s * s), 0.0],
    ]
}

/// Interior equilibrium under subsidy `p.u`; absent once `u >= (c+d)/2`.
pub fn controlled_equilibrium(p: &SystemParams) -> Result<Option<EquilibriumReport>> {
    require_unit_theta(p)?;
    if p.u >= u_half(p) {
        return Ok(None);
    }
    let s = p.a + p.b + p.c + p.d;
    let loc = State { x: 0.5, r: (p.a + p.b + 2.0 * p.u) / s };
    Ok(Some(EquilibriumReport::from_jacobian(EquilibriumKind::Interior, loc, controlled_jacobian(p))))
}

/// Strategy component of the controlled flow along the top side.
pub fn top_side_residual(p: &SystemParams, x: f64) -> f64 {
    x * (1.0 - x) * (x * (p.d - p.c) - p.d + p.u) + p.mu * (1.0 - 2.0 * x)
}

/// Closed-form Jacobian at a top-side point `(x, 1)`.
pub fn top_side_jacobian(p: &SystemParams, x: f64) -> [[f64; 2]; 2] {
    let (a, b, c, d, u, mu) = (p.a, p.b, p.c, p.d, p.u, p.mu);
    let k = -c + d - a + b;
    [
        [
            3.0 * (c - d) * x * x + 2.0 * (2.0 * d - c - u) * x - d + u - 2.0 * mu,
            x * (1.0 - x) * (x * k - (d + b)),
        ],
        [0.0, 1.0 - 2.0 * x],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopSideEquilibria {
    /// The root in `(1/2, 1)`.
    pub main: EquilibriumReport,
    /// Further roots in `(0, 1/2)`.
    pub others: Vec<EquilibriumReport>,
}

pub fn controlled_boundary_equilibrium(p: &SystemParams) -> Result<TopSideEquilibria> {
    require_unit_theta(p)?;
    if p.u <= u_half(p) {
        return Err(Error::Precondition(format!(
            "u={} must exceed (c+d)/2={}",
            p.u,
            u_half(p)
        )));
    }
    if p.mu <= 0.0 {
        return Err(Error::Precondition("needs mu > 0".into()));
    }
    let f = |x: f64| top_side_residual(p, x);
    let report = |x: f64| {
        EquilibriumReport::from_jacobian(EquilibriumKind::TopSide, State { x, r: 1.0 }, top_side_jacobian(p, x))
    };
    let xt = bracketed_root(f, 0.5, 1.0, 1e-15)
        .ok_or_else(|| Error::Singular("no sign change of the top-side residual on (1/2, 1)".into()))?;
    let others = sign_changes(f, 1e-6, 0.5, 1000)
        .into_iter()
        .filter_map(|(lo, hi)| bracketed_root(f, lo, hi, 1e-15))
        .map(report)
        .collect();
    Ok(TopSideEquilibria { main: report(xt), others })
}

/// Divergence of the controlled field weighted by the shifted Dulac function.
pub fn controlled_dulac_divergence(s: State, p: &SystemParams) -> Result<f64> {
    require_unit_theta(p)?;
    if !(s.x > 0.0 && s.x < 1.0 && s.r > 0.0 && s.r < 1.0) {
        return Err(Error::Singular(format!("({}, {}) is not in the open square", s.x, s.r)));
    }
    let e = controlled_exponents(p);
    let sigma = p.a + p.b + p.c + p.d;
    let w = s.x.powf(e.alpha) * (1.0 - s.x).powf(e.beta) * s.r.powf(e.gamma) * (1.0 - s.r).powf(e.delta);
    let rest = shape(e.alpha, s.x) * p.mu - 2.0 * p.mu + (1.5 + e.alpha) * p.u
        - (p.b * p.c - p.a * p.d) / (2.0 * sigma);
    Ok(w * rest)
}

/// Exponents of the controlled Dulac weight.
pub fn controlled_exponents(p: &SystemParams) -> DulacExponents {
    let e = exponents_of(p);
    DulacExponents { gamma: e.gamma - 0.5 * p.u, delta: e.delta + 0.5 * p.u, ..e }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRegime {
    InteriorStabilizable,
    BoundaryOnly,
    AmplitudeReductionOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlDesign {
    pub regime: ControlRegime,
    pub u1: Option<f64>,
    pub u2: Option<f64>,
    pub u_half: f64,
    pub recommended_u: f64,
    pub target: EquilibriumReport,
    pub notes: Vec<String>,
}

/// Thresholds `(u2, u1)` above which the controlled interior equilibrium is
/// locally resp. globally stable. Defined only when `a+c > b+d`.
pub fn thresholds(p: &SystemParams) -> Option<(f64, f64)> {
    if balance(p) != std::cmp::Ordering::Greater {
        return None;
    }
    let (a, b, c, d, mu) = (p.a, p.b, p.c, p.d, p.mu);
    let s = a + b + c + d;
    let gap = a + c - b - d;
    let g = shape(exponents_of(p).alpha, shape_argmax(exponents_of(p).alpha));
    let u2 = (a * d - b * c - 4.0 * mu * s) / gap;
    let u1 = (a * d - b * c - (4.0 - g) * mu * s) / gap;
    Some((u2, u1))
}

pub fn control_thresholds(p: &SystemParams) -> Result<ControlDesign> {
    require_unit_theta(p)?;
    if !(p.mu > 0.0) {
        return Err(Error::Precondition("needs mu in (0, 1]".into()));
    }
    let base = SystemParams { u: 0.0, ..*p };
    let half = u_half(&base);
    let mut notes = Vec::new();
    let th = thresholds(&base);
    let (regime, recommended_u) = match (balance(&base), th) {
        (std::cmp::Ordering::Greater, Some((_, u1))) if u1 < half => {
            let lo = u1.max(0.0);
            (ControlRegime::InteriorStabilizable, 0.5 * (lo + half))
        }
        (std::cmp::Ordering::Greater, Some((_, u1))) => {
            if u1 == half {
                notes.push("u1 equals (c+d)/2 exactly; neither stabilisation case applies, boundary target chosen".into());
            }
            (ControlRegime::BoundaryOnly, 1.1 * half)
        }
        (std::cmp::Ordering::Less, _) => (ControlRegime::BoundaryOnly, 1.1 * half),
        _ => {
            notes.push(
                "a+c=b+d: no subsidy below (c+d)/2 stabilises the interior; smaller subsidies only shrink the oscillation"
                    .into(),
            );
            (ControlRegime::AmplitudeReductionOnly, 1.1 * half)
        }
    };
    let at = SystemParams { u: recommended_u, ..base };
    let target = if regime == ControlRegime::InteriorStabilizable {
        controlled_equilibrium(&at)?.expect("recommended subsidy is below (c+d)/2")
    } else {
        controlled_boundary_equilibrium(&at)?.main
    };
    Ok(ControlDesign {
        regime,
        u1: th.map(|t| t.1),
        u2: th.map(|t| t.0),
        u_half: half,
        recommended_u,
        target,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRun {
    pub start: State,
    pub end: State,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignCheck {
    pub u: f64,
    pub target: State,
    pub runs: Vec<GridRun>,
    pub passed: bool,
}

/// Runs an `n x n` grid of interior starts under subsidy `u` and checks that
/// every run ends within `tol` of `target`.
pub fn verify_convergence(p: &SystemParams, u: f64, target: State, n: usize, t_end: f64, tol: f64) -> Result<DesignCheck> {
    let at = SystemParams { u, ..*p };
    at.validate()?;
    at.check_supported()?;
    let starts: Vec<State> = (0..n * n)
        .map(|k| {
            let (i, j) = (k / n, k % n);
            let f = |i: usize| 0.1 + 0.8 * i as f64 / (n.max(2) - 1) as f64;
            State { x: f(i), r: f(j) }
        })
        .collect();
    let opts = IntegratorOptions { record: false, ..IntegratorOptions::until(t_end) };
    let runs: Vec<GridRun> = starts
        .par_iter()
        .map(|&s0| {
            let tr = integrate(s0, &at, &opts)?;
            Ok(GridRun { start: s0, end: tr.end_state, distance: tr.end_state.dist(&target) })
        })
        .collect::<Result<_>>()?;
    let passed = runs.iter().all(|r| r.distance < tol);
    Ok(DesignCheck { u, target, runs, passed })
}

pub fn verify_design(p: &SystemParams, design: &ControlDesign) -> Result<DesignCheck> {
    verify_convergence(p, design.recommended_u, design.target.location, 5, 1000.0, 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{interior_equilibrium, Stability};

    fn stabilizable(u: f64) -> SystemParams {
        SystemParams::new(4.0, 1.0, 3.0, 3.0, 1.0, 0.05).unwrap().with_u(u).unwrap()
    }

    #[test]
    fn controlled_location() {
        let e = controlled_equilibrium(&stabilizable(2.8)).unwrap().unwrap();
        assert_eq!(e.location.x, 0.5);
        assert!((e.location.r - 10.6 / 11.0).abs() < 1e-15);
        assert!(controlled_equilibrium(&stabilizable(3.0)).unwrap().is_none());
    }

    #[test]
    fn zero_subsidy_reduces_to_uncontrolled() {
        let p = stabilizable(0.0);
        let c = controlled_equilibrium(&p).unwrap().unwrap();
        let u = interior_equilibrium(&p).unwrap().unwrap();
        assert!(c.location.dist(&u.location) < 1e-15);
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.jacobian[i][j] - u.jacobian[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_jacobians_match_exact_derivatives() {
        let p = stabilizable(1.7);
        let e = controlled_equilibrium(&p).unwrap().unwrap();
        let exact = p.jacobian(e.location.x, e.location.r);
        let top = top_side_jacobian(&p, 0.8);
        let exact_top = p.jacobian(0.8, 1.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((e.jacobian[i][j] - exact[i][j]).abs() < 1e-13);
                assert!((top[i][j] - exact_top[i][j]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stabilizable_thresholds() {
        let d = control_thresholds(&stabilizable(0.0)).unwrap();
        assert_eq!(d.regime, ControlRegime::InteriorStabilizable);
        let (u1, u2) = (d.u1.unwrap(), d.u2.unwrap());
        assert!((u2 - 6.8 / 3.0).abs() < 1e-12);
        assert!((u1 - 2.27).abs() < 5e-3);
        assert!(u1 >= u2 && u1 > 2.2 && u1 < 3.0);
        assert_eq!(d.u_half, 3.0);
        assert!((d.recommended_u - 0.5 * (u1 + 3.0)).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_flip_at_u2() {
        let p = stabilizable(0.0);
        let (u2, _) = thresholds(&p).unwrap();
        let re = |u: f64| controlled_jacobian(&SystemParams { u, ..p })[0][0];
        let flip = bracketed_root(re, 0.0, 2.99, 1e-14).unwrap();
        assert!((flip - u2).abs() < 1e-8);
    }

    #[test]
    fn boundary_only_regime() {
        let p = SystemParams::new(2.0, 3.0, 1.0, 4.0, 1.0, 0.15).unwrap();
        let d = control_thresholds(&p).unwrap();
        assert_eq!(d.regime, ControlRegime::BoundaryOnly);
        assert_eq!(d.recommended_u, 1.1 * 2.5);
        assert_eq!(d.target.kind, EquilibriumKind::TopSide);
        let e = controlled_equilibrium(&p.with_u(1.8).unwrap()).unwrap().unwrap();
        assert!(e.stability.is_unstable());
    }

    #[test]
    fn balanced_coefficients_only_reduce_amplitude() {
        let p = SystemParams::new(3.0, 1.0, 1.0, 3.0, 1.0, 0.05).unwrap();
        let d = control_thresholds(&p).unwrap();
        assert_eq!(d.regime, ControlRegime::AmplitudeReductionOnly);
        assert!(d.u1.is_none() && d.u2.is_none());
    }

    #[test]
    fn top_side_root_equal_rich_payoffs() {
        let p = SystemParams::new(4.0, 1.0, 3.0, 3.0, 1.0, 0.05).unwrap().with_u(3.5).unwrap();
        let t = controlled_boundary_equilibrium(&p).unwrap();
        let expect = (0.8 + 1.04f64.sqrt()) / 2.0;
        assert!((t.main.location.x - expect).abs() < 1e-12);
        assert!(top_side_residual(&p, t.main.location.x).abs() < 1e-14);
        assert_eq!(t.main.stability, Stability::Stable);
        assert!(t.others.is_empty());
    }

    #[test]
    fn top_side_extra_roots_unstable() {
        let p = SystemParams::new(2.0, 3.0, 1.0, 4.0, 1.0, 0.15).unwrap().with_u(2.6).unwrap();
        let t = controlled_boundary_equilibrium(&p).unwrap();
        assert!(t.main.location.x > 0.5 && 1.0 - 2.0 * t.main.location.x < 0.0);
        assert_eq!(t.main.stability, Stability::Stable);
        assert!(!t.others.is_empty() && t.others.len() <= 2);
        for o in &t.others {
            assert!(o.location.x < 0.5 && o.stability.is_unstable());
        }
        assert!(controlled_boundary_equilibrium(&p.with_u(2.5).unwrap()).is_err());
    }

    #[test]
    fn controlled_divergence_matches_product_rule() {
        let p = stabilizable(1.3);
        let e = controlled_exponents(&p);
        let wf = |x: f64, r: f64| {
            let w = x.powf(e.alpha) * (1.0 - x).powf(e.beta) * r.powf(e.gamma) * (1.0 - r).powf(e.delta);
            let f = p.rhs(x, r);
            [w * f[0], w * f[1]]
        };
        for (x, r) in [(0.3, 0.6), (0.71, 0.22), (0.5, 0.9)] {
            let h = 2e-4;
            let d4 = |g: &dyn Fn(f64) -> f64, v: f64| {
                (-g(v + 2.0 * h) + 8.0 * g(v + h) - 8.0 * g(v - h) + g(v - 2.0 * h)) / (12.0 * h)
            };
            let fd = d4(&|xx| wf(xx, r)[0], x) + d4(&|rr| wf(x, rr)[1], r);
            let an = controlled_divergence_at(&p, x, r);
            assert!((fd - an).abs() < 1e-9 * an.abs(), "{fd} vs {an}");
        }
        assert!(e.alpha < -1.5);
    }

    fn controlled_divergence_at(p: &SystemParams, x: f64, r: f64) -> f64 {
        controlled_dulac_divergence(State { x, r }, p).unwrap()
    }

    #[test]
    fn controlled_divergence_reduces_at_zero_subsidy() {
        let p = stabilizable(0.0);
        let s = State { x: 0.3, r: 0.4 };
        let a = controlled_dulac_divergence(s, &p).unwrap();
        let b = crate::bifurcation::dulac_divergence(s, &p).unwrap();
        assert!((a - b).abs() < 1e-14 * b.abs());
    }

    #[test]
    fn rejects_other_theta() {
        let p = SystemParams::new(4.0, 1.0, 3.0, 3.0, 2.0, 0.05).unwrap();
        assert!(matches!(controlled_equilibrium(&p), Err(Error::Unsupported(_))));
    }
}
