//! Hopf point, first Lyapunov coefficient, Dulac exponents and the
//! heteroclinic classification.

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::{corner_analysis, interior_equilibrium, interior_exists, interior_location, EquilibriumReport};
use crate::error::{Error, Result};
use crate::model::{State, SystemParams};
use crate::poly::Poly2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HopfReport {
    pub mu1: f64,
    pub omega0: f64,
    /// Closed-form first Lyapunov coefficient.
    pub ell1: f64,
    /// True when `0 < mu1 <= 1`.
    pub admissible: bool,
}

fn require_uncontrolled(p: &SystemParams) -> Result<()> {
    p.validate()?;
    if p.u != 0.0 {
        return Err(Error::Precondition("needs u=0".into()));
    }
    Ok(())
}

/// Mutation rate at which the trace of the interior Jacobian vanishes.
/// `None` when `ad - bc <= 0`.
pub fn hopf_mu(p: &SystemParams) -> Option<f64> {
    let det = p.a * p.d - p.b * p.c;
    if det <= 0.0 {
        return None;
    }
    Some(p.theta * p.theta * det / p.derived().delta)
}

/// Hopf frequency at `mu`; NaN if the interior equilibrium is not a focus there.
pub fn hopf_frequency(p: &SystemParams, mu: f64) -> f64 {
    let (a, b, c, d, t) = (p.a, p.b, p.c, p.d, p.theta);
    let k = p.derived();
    let num = (c * t + d * t * t - mu * k.theta_hat) * (a * t + b * t * t + mu * k.theta_hat);
    (num / (t * (t + 1.0).powi(2) * k.zeta)).sqrt()
}

/// `None` when there is no Hopf point: either `ad - bc <= 0` or the
/// interior equilibrium does not exist at the critical rate.
pub fn hopf_point(p: &SystemParams) -> Result<Option<HopfReport>> {
    require_uncontrolled(p)?;
    let Some(mu1) = hopf_mu(p) else {
        return Ok(None);
    };
    let at = SystemParams { mu: mu1, ..*p };
    if !interior_exists(&at) {
        return Ok(None);
    }
    let omega0 = hopf_frequency(p, mu1);
    Ok(Some(HopfReport {
        mu1,
        omega0,
        ell1: lyapunov_closed_expression(p),
        admissible: mu1 > 0.0 && mu1 <= 1.0,
    }))
}

/// Slope of the interior Jacobian trace with respect to `mu`.
pub fn trace_slope(p: &SystemParams) -> f64 {
    let t = p.theta;
    -p.derived().delta / (t * (t + 1.0) * p.derived().zeta)
}

/// Closed-form first Lyapunov coefficient, evaluated without checking
/// whether the Hopf point exists.
pub fn lyapunov_closed_expression(p: &SystemParams) -> f64 {
    let (a, b, c, d, t) = (p.a, p.b, p.c, p.d, p.theta);
    let k = p.derived();
    let Some(mu1) = hopf_mu(p) else {
        return f64::NAN;
    };
    let w = hopf_frequency(p, mu1);
    t * (b * c - a * d) * k.zeta * ((b + d) * (t.powi(3) + 2.0 * t) + (a + c) * (2.0 * t.powi(3) + 1.0))
        / (2.0 * w.powi(3) * (t + 1.0).powi(4) * k.delta)
}

/// Closed-form coefficient; requires `0 < ad - bc <= delta / theta^2`.
pub fn first_lyapunov_closed(p: &SystemParams) -> Result<f64> {
    require_uncontrolled(p)?;
    let det = p.a * p.d - p.b * p.c;
    let bound = p.derived().delta / (p.theta * p.theta);
    if !(det > 0.0 && det <= bound) {
        return Err(Error::Precondition(format!(
            "ad-bc={det} must lie in (0, {bound}] for the Hopf point to be admissible"
        )));
    }
    Ok(lyapunov_closed_expression(p))
}

type CVec = [Complex64; 2];

fn inner(p: &CVec, q: &CVec) -> Complex64 {
    p[0].conj() * q[0] + p[1].conj() * q[1]
}

/// Derivatives of the field up to third order at a point.
struct LocalTensors {
    hess: [[[f64; 2]; 2]; 2],
    third: [[[[f64; 2]; 2]; 2]; 2],
}

impl LocalTensors {
    fn at(field: &[Poly2; 2], y: State) -> Self {
        let mut hess = [[[0.0; 2]; 2]; 2];
        let mut third = [[[[0.0; 2]; 2]; 2]; 2];
        for (k, f) in field.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let nx = (i == 0) as usize + (j == 0) as usize;
                    hess[k][i][j] = f.partial(nx, 2 - nx).eval(y.x, y.r);
                    for l in 0..2 {
                        let nx3 = nx + (l == 0) as usize;
                        third[k][i][j][l] = f.partial(nx3, 3 - nx3).eval(y.x, y.r);
                    }
                }
            }
        }
        LocalTensors { hess, third }
    }

    fn bilinear(&self, u: &CVec, v: &CVec) -> CVec {
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (k, o) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    *o += self.hess[k][i][j] * u[i] * v[j];
                }
            }
        }
        out
    }

    fn trilinear(&self, u: &CVec, v: &CVec, w: &CVec) -> CVec {
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (k, o) in out.iter_mut().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        *o += self.third[k][i][j][l] * u[i] * v[j] * w[l];
                    }
                }
            }
        }
        out
    }
}

/// Scale `q` so its resource component is `i/sqrt(2)` and `p` so that `<p, q> = 1`.
fn normalise(q: CVec, p: CVec) -> Result<(CVec, CVec)> {
    if q[1].norm() == 0.0 {
        return Err(Error::Degenerate("eigenvector has no resource component".into()));
    }
    let s = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2) / q[1];
    let q = [q[0] * s, q[1] * s];
    let pq = inner(&p, &q);
    if pq.norm() < 1e-14 {
        return Err(Error::Degenerate("<p, q> vanishes".into()));
    }
    let c = pq.conj();
    Ok((q, [p[0] / c, p[1] / c]))
}

/// First Lyapunov coefficient from the multilinear forms at an equilibrium
/// `y0` with frequency `omega`, given eigenvectors `q` (of `A`, for `i omega`)
/// and `p` (of `A^T`, for `-i omega`). Both are rescaled internally.
pub fn lyapunov_from_vectors(params: &SystemParams, y0: State, omega: f64, q: CVec, p: CVec) -> Result<f64> {
    let (q, p) = normalise(q, p)?;
    let t = LocalTensors::at(&params.field_polynomials(), y0);
    let qb = [q[0].conj(), q[1].conj()];
    let g20 = inner(&p, &t.bilinear(&q, &q));
    let g11 = inner(&p, &t.bilinear(&q, &qb));
    let g21 = inner(&p, &t.trilinear(&q, &q, &qb));
    let i = Complex64::new(0.0, 1.0);
    Ok((i * g20 * g11 + omega * g21).re / (2.0 * omega * omega))
}

/// Critical eigenvectors `(q, p)` of the Jacobian at `y0`.
pub fn critical_eigenvectors(params: &SystemParams, y0: State) -> Result<(f64, CVec, CVec)> {
    let a = params.jacobian(y0.x, y0.r);
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let w2 = det - tr * tr / 4.0;
    if w2 <= 0.0 {
        return Err(Error::Degenerate("Jacobian has no complex pair".into()));
    }
    let w = w2.sqrt();
    let iw = Complex64::new(0.0, w);
    let q = [Complex64::new(a[0][1], 0.0), iw - a[0][0]];
    let p = [Complex64::new(a[1][0], 0.0), -(a[0][0] + iw)];
    Ok((w, q, p))
}

/// First Lyapunov coefficient at the Hopf point computed from exact second
/// and third derivatives of the field.
pub fn first_lyapunov_numeric(p: &SystemParams) -> Result<f64> {
    require_uncontrolled(p)?;
    let mu1 = hopf_mu(p).ok_or_else(|| Error::Precondition("ad - bc <= 0: no Hopf point".into()))?;
    let at = SystemParams { mu: mu1, ..*p };
    let y0 = interior_location(&at)
        .ok_or_else(|| Error::Precondition("no interior equilibrium at the Hopf point".into()))?;
    let (w, q, pv) = critical_eigenvectors(&at, y0)?;
    lyapunov_from_vectors(&at, y0, w, q, pv)
}

/// Exponents of the Dulac weight `x^alpha (1-x)^beta r^gamma (1-r)^delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DulacExponents {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

pub fn dulac_exponents(p: &SystemParams) -> Result<DulacExponents> {
    require_uncontrolled(p)?;
    Ok(exponents_of(p))
}

pub(crate) fn exponents_of(p: &SystemParams) -> DulacExponents {
    let (a, b, c, d, t) = (p.a, p.b, p.c, p.d, p.theta);
    let z = p.derived().zeta;
    DulacExponents {
        alpha: -(z + c + a) / z,
        beta: (-2.0 * z + c + a) / z,
        gamma: (-(a + t + 1.0) * z + a * a + a * c - a * b - b * c) / ((t + 1.0) * z),
        delta: -((a + c) * (t * b + t * d + d + a) + (t + 1.0 - a) * z) / ((t + 1.0) * z),
    }
}

/// Residuals of the linear conditions the exponents must satisfy.
pub fn dulac_residuals(p: &SystemParams, e: &DulacExponents) -> [f64; 5] {
    let (a, b, c, d, t) = (p.a, p.b, p.c, p.d, p.theta);
    let DulacExponents { alpha, beta, gamma, delta } = *e;
    let k = -c + d - a + b;
    let s = alpha + beta + 3.0;
    let w = -c + 2.0 * d - a + 2.0 * b;
    [
        s * k,
        s * (a - b),
        w * alpha + (d + b) * beta - (t + 1.0) * (gamma + delta + 2.0) + 2.0 * w,
        (a - 2.0 * b) * alpha - b * beta + (t + 1.0) * (gamma + 1.0) + 2.0 * a - 4.0 * b,
        -(d + b) * alpha + gamma + delta + 2.0 - b - d,
    ]
}

/// Shape term `(1-2x)(3x+alpha) / (x(1-x))` of the Dulac divergence.
pub fn shape(alpha: f64, x: f64) -> f64 {
    (1.0 - 2.0 * x) * (3.0 * x + alpha) / (x * (1.0 - x))
}

/// Maximiser of [`shape`] on `(0, 1)` for `alpha` in `(-2, -1)`.
pub fn shape_argmax(alpha: f64) -> f64 {
    // rationalised root of (3+2a)x^2 - 2a x + a = 0; finite at alpha = -3/2
    alpha / (alpha - (-alpha * (3.0 + alpha)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum Mu0 {
    /// No closed orbits for `mu >= value`.
    Threshold { value: f64, xbar: f64, shape_max: f64 },
    /// `ad - bc < 0`: no closed orbits for any `mu >= 0`.
    NoClosedOrbitsAnyMu,
    /// `ad - bc = 0`: no closed orbits for any `mu > 0`.
    NoClosedOrbitsPositiveMu,
}

pub fn mu0_threshold(p: &SystemParams) -> Result<Mu0> {
    let e = dulac_exponents(p)?;
    let det = p.a * p.d - p.b * p.c;
    if det < 0.0 {
        return Ok(Mu0::NoClosedOrbitsAnyMu);
    }
    if det == 0.0 {
        return Ok(Mu0::NoClosedOrbitsPositiveMu);
    }
    let t = p.theta;
    let xbar = shape_argmax(e.alpha);
    let g = shape(e.alpha, xbar);
    let value = t * det / ((t + 1.0) * p.derived().zeta * (2.0 - g));
    Ok(Mu0::Threshold { value, xbar, shape_max: g })
}

/// Dulac weight at an interior point.
pub fn dulac_weight(e: &DulacExponents, s: State) -> f64 {
    s.x.powf(e.alpha) * (1.0 - s.x).powf(e.beta) * s.r.powf(e.gamma) * (1.0 - s.r).powf(e.delta)
}

/// Divergence of the weighted field at an interior point.
pub fn dulac_divergence(s: State, p: &SystemParams) -> Result<f64> {
    require_uncontrolled(p)?;
    if !(s.x > 0.0 && s.x < 1.0 && s.r > 0.0 && s.r < 1.0) {
        return Err(Error::Singular(format!("({}, {}) is not in the open square", s.x, s.r)));
    }
    let e = dulac_exponents(p)?;
    let t = p.theta;
    let rest = p.mu * shape(e.alpha, s.x) - 2.0 * p.mu
        - t * (p.b * p.c - p.a * p.d) / ((t + 1.0) * p.derived().zeta);
    Ok(dulac_weight(&e, s) * rest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopStability {
    Stable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeteroclinicReport {
    pub stability: LoopStability,
    pub traces: [f64; 4],
    /// `a > theta`, `b < 1`, `c < theta`, `d > 1` all hold.
    pub bifurcation_possible: bool,
}

/// Boundary loop through the four corners at `mu = 0`.
pub fn heteroclinic_classification(p: &SystemParams) -> Result<HeteroclinicReport> {
    let at0 = SystemParams { mu: 0.0, ..*p };
    let corners = corner_analysis(&at0)?;
    let det = p.a * p.d - p.b * p.c;
    let stability = if det > 0.0 {
        LoopStability::Stable
    } else if det < 0.0 {
        LoopStability::Unstable
    } else {
        LoopStability::Marginal
    };
    let t = p.theta;
    Ok(HeteroclinicReport {
        stability,
        traces: corners.traces,
        bifurcation_possible: p.a > t && p.b < 1.0 && p.c < t && p.d > 1.0,
    })
}

/// Everything the analytic side has to say about one parameter set.
#[derive(Debug, Clone, Serialize)]
pub struct BifurcationSummary {
    pub params: SystemParams,
    pub interior: Option<EquilibriumReport>,
    pub hopf: Option<HopfReport>,
    pub ell1_numeric: Option<f64>,
    pub trace_slope: f64,
    pub exponents: DulacExponents,
    pub mu0: Mu0,
    pub heteroclinic: HeteroclinicReport,
}

pub fn summarize(p: &SystemParams) -> Result<BifurcationSummary> {
    let hopf = hopf_point(p)?;
    Ok(BifurcationSummary {
        params: *p,
        interior: interior_equilibrium(p)?,
        ell1_numeric: if hopf.is_some() { first_lyapunov_numeric(p).ok() } else { None },
        hopf,
        trace_slope: trace_slope(p),
        exponents: dulac_exponents(p)?,
        mu0: mu0_threshold(p)?,
        heteroclinic: heteroclinic_classification(p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asymmetric() -> SystemParams {
        SystemParams::new(3.0, 0.2, 0.5, 1.0, 1.0, 0.1).unwrap()
    }

    #[test]
    fn asymmetric_hopf_values() {
        let h = hopf_point(&asymmetric()).unwrap().unwrap();
        assert!((h.mu1 - 2.9 / 18.8).abs() < 1e-15);
        assert!((h.mu1 - 0.1542553).abs() < 1e-7);
        assert!((h.omega0 - 0.5052912).abs() < 1e-7);
        assert!(h.ell1 < 0.0);
        assert!(h.admissible);
    }

    #[test]
    fn balanced_hopf_is_quarter() {
        let p = SystemParams::new(3.0, 1.0, 1.0, 3.0, 1.0, 0.1).unwrap();
        assert!((hopf_point(&p).unwrap().unwrap().mu1 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn no_hopf_without_positive_determinant() {
        let p = SystemParams::new(1.0, 2.0, 2.0, 1.0, 1.0, 0.1).unwrap();
        assert!(hopf_point(&p).unwrap().is_none());
        assert!(first_lyapunov_closed(&p).is_err());
    }

    #[test]
    fn numeric_lyapunov_matches_closed_form_at_unit_theta() {
        let p = asymmetric();
        let closed = first_lyapunov_closed(&p).unwrap();
        let num = first_lyapunov_numeric(&p).unwrap();
        assert!((closed - num).abs() <= 1e-6 * closed.abs(), "{closed} vs {num}");
        assert!((closed + 2.476179).abs() < 1e-5);
    }

    #[test]
    fn lyapunov_invariant_under_eigenvector_rescaling() {
        let p = asymmetric();
        let at = SystemParams { mu: hopf_mu(&p).unwrap(), ..p };
        let y0 = interior_location(&at).unwrap();
        let (w, q, pv) = critical_eigenvectors(&at, y0).unwrap();
        let base = lyapunov_from_vectors(&at, y0, w, q, pv).unwrap();
        let two = Complex64::new(2.0, 0.0);
        let scaled = lyapunov_from_vectors(&at, y0, w, [q[0] * two, q[1] * two], [pv[0] / two, pv[1] / two]).unwrap();
        let rotated = {
            let z = Complex64::from_polar(3.0, 0.7);
            lyapunov_from_vectors(&at, y0, w, [q[0] * z, q[1] * z], pv).unwrap()
        };
        assert!((base - scaled).abs() < 1e-12 * base.abs());
        assert!((base - rotated).abs() < 1e-12 * base.abs());
    }

    #[test]
    fn exponents_solve_linear_conditions() {
        for p in [asymmetric(), SystemParams::new(1.3, 0.4, 2.2, 0.9, 1.7, 0.21).unwrap()] {
            let e = dulac_exponents(&p).unwrap();
            for r in dulac_residuals(&p, &e) {
                assert!(r.abs() < 1e-12, "{r}");
            }
            assert!(e.alpha > -2.0 && e.alpha < -1.0);
        }
    }

    #[test]
    fn asymmetric_exponent_values() {
        let e = dulac_exponents(&asymmetric()).unwrap();
        assert!((e.alpha + 8.2 / 4.7).abs() < 1e-15);
        assert!((e.beta - (-9.4 + 3.5) / 4.7).abs() < 1e-15);
    }

    #[test]
    fn argmax_matches_grid_search() {
        for alpha in [-1.99, -1.8, -1.7447, -1.5, -1.3, -1.01] {
            let xb = shape_argmax(alpha);
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 1..200000 {
                let x = i as f64 / 200000.0;
                let g = shape(alpha, x);
                if g > best.1 {
                    best = (x, g);
                }
            }
            assert!((xb - best.0).abs() < 1e-4, "alpha={alpha}: {xb} vs {}", best.0);
            assert!(shape(alpha, xb) >= best.1 - 1e-12);
            assert!(shape(alpha, xb) >= 0.0);
        }
        assert_eq!(shape_argmax(-1.5), 0.5);
    }

    #[test]
    fn asymmetric_mu0() {
        let Mu0::Threshold { value, xbar, .. } = mu0_threshold(&asymmetric()).unwrap() else {
            panic!("expected a threshold");
        };
        assert!((xbar - 0.541).abs() < 1e-3);
        assert!((value - 0.1574).abs() < 1e-4);
        assert!(value >= hopf_mu(&asymmetric()).unwrap());
    }

    #[test]
    fn mu0_equals_mu1_on_balanced_coefficients() {
        let p = SystemParams::new(3.0, 1.0, 1.0, 3.0, 1.0, 0.1).unwrap();
        let Mu0::Threshold { value, .. } = mu0_threshold(&p).unwrap() else { panic!() };
        assert!((value - hopf_mu(&p).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn mu0_regimes() {
        let neg = SystemParams::new(1.0, 2.0, 2.0, 1.0, 1.0, 0.1).unwrap();
        assert_eq!(mu0_threshold(&neg).unwrap(), Mu0::NoClosedOrbitsAnyMu);
        let zero = SystemParams::new(2.0, 1.0, 2.0, 1.0, 1.0, 0.1).unwrap();
        assert_eq!(mu0_threshold(&zero).unwrap(), Mu0::NoClosedOrbitsPositiveMu);
    }

    #[test]
    fn divergence_matches_product_rule() {
        let p = SystemParams::new(1.3, 0.4, 2.2, 0.9, 1.7, 0.21).unwrap();
        let e = dulac_exponents(&p).unwrap();
        let s = State { x: 0.31, r: 0.58 };
        let h = 1e-6;
        let wf = |x: f64, r: f64| {
            let w = dulac_weight(&e, State { x, r });
            let f = p.rhs(x, r);
            [w * f[0], w * f[1]]
        };
        let fd = (wf(s.x + h, s.r)[0] - wf(s.x - h, s.r)[0]) / (2.0 * h)
            + (wf(s.x, s.r + h)[1] - wf(s.x, s.r - h)[1]) / (2.0 * h);
        let an = dulac_divergence(s, &p).unwrap();
        assert!((fd - an).abs() < 1e-7 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn divergence_singular_on_boundary() {
        assert!(matches!(dulac_divergence(State { x: 0.0, r: 0.5 }, &asymmetric()), Err(Error::Singular(_))));
    }

    #[test]
    fn heteroclinic_flags() {
        let p = SystemParams::new(3.0, 0.5, 0.5, 2.0, 1.0, 0.0).unwrap();
        let h = heteroclinic_classification(&p).unwrap();
        assert_eq!(h.stability, LoopStability::Stable);
        assert!(h.bifurcation_possible);
        assert!(h.traces.iter().all(|t| *t < 0.0));
        let q = SystemParams::new(1.0, 2.0, 2.0, 1.0, 1.0, 0.0).unwrap();
        let h = heteroclinic_classification(&q).unwrap();
        assert_eq!(h.stability, LoopStability::Unstable);
        assert!(!h.bifurcation_possible);
    }
}
