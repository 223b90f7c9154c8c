//! Adaptive integration of the field inside the unit square, with crossing
//! detection on vertical sections `x = const`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{State, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    /// Excursions outside the square up to this size are clamped back;
    /// larger ones reject the step.
    pub clamp_band: f64,
    pub max_steps: usize,
    /// Follow the time-reversed field. Recorded times still increase.
    pub backward: bool,
    /// Keep every accepted step in the trajectory.
    pub record: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: 0.1,
            t_end: 100.0,
            clamp_band: 1e-12,
            max_steps: 50_000_000,
            backward: false,
            record: true,
        }
    }
}

impl IntegratorOptions {
    pub fn until(t_end: f64) -> Self {
        IntegratorOptions { t_end, ..Default::default() }
    }

    fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.rel_tol) && pos(self.abs_tol) && pos(self.max_step) && pos(self.t_end)) {
            return Err(Error::InvalidParameter(format!("integrator options {self:?}")));
        }
        if !(self.clamp_band >= 0.0) {
            return Err(Error::InvalidParameter("clamp_band must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
    Either,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Section {
    pub x: f64,
    pub direction: Direction,
    /// Stop the run once this many crossings of the section were seen.
    pub stop_after: Option<usize>,
}

impl Section {
    pub fn new(x: f64, direction: Direction) -> Self {
        Section { x, direction, stop_after: None }
    }

    pub fn stopping_after(mut self, n: usize) -> Self {
        self.stop_after = Some(n);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub section: usize,
    pub time: f64,
    pub state: State,
    /// Either `Increasing` or `Decreasing`.
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    SectionLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub crossings: Vec<Crossing>,
    pub termination: Termination,
    /// Time and state where the run ended.
    pub end_time: f64,
    pub end_state: State,
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type V2 = [f64; 2];

struct Stepper<'a> {
    p: &'a SystemParams,
    sign: f64,
}

impl Stepper<'_> {
    fn f(&self, y: V2) -> V2 {
        let v = self.p.rhs(y[0], y[1]);
        [self.sign * v[0], self.sign * v[1]]
    }

    /// One Dormand-Prince step; returns the fifth-order solution, the error
    /// estimate and the derivative at the new point.
    fn step(&self, y: V2, k1: V2, h: f64) -> (V2, V2, V2) {
        let mut k = [[0.0; 2]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            if s == 6 {
                let k7 = self.f(ys);
                k[6] = k7;
                let mut err = [0.0; 2];
                for (j, kj) in k.iter().enumerate() {
                    err[0] += h * E[j] * kj[0];
                    err[1] += h * E[j] * kj[1];
                }
                return (ys, err, k7);
            }
            k[s] = self.f(ys);
        }
        unreachable!()
    }
}

fn hermite_x(x0: f64, f0: f64, x1: f64, f1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * x0 + (s3 - 2.0 * s2 + s) * h * f0 + (-2.0 * s3 + 3.0 * s2) * x1 + (s3 - s2) * h * f1
}

fn clamp_unit(y: V2) -> V2 {
    [y[0].clamp(0.0, 1.0), y[1].clamp(0.0, 1.0)]
}

fn to_state(y: V2) -> State {
    State { x: y[0], r: y[1] }
}

/// Locates the crossing of `x = xs` inside an accepted step from `y0`.
fn locate(st: &Stepper, y0: V2, k1: V2, y1: V2, k7: V2, h: f64, xs: f64) -> (f64, V2) {
    let g = |s: f64| hermite_x(y0[0], k1[0], y1[0], k7[0], h, s) - xs;
    let (mut lo, mut hi) = (0.0, 1.0);
    let glo = g(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let guess = 0.5 * (lo + hi) * h;
    // polish with a Runge-Kutta sub-step so the event carries the step's accuracy
    let mut tau = guess;
    let mut best = (f64::INFINITY, tau, y1);
    for _ in 0..8 {
        let (yt, _, ft) = st.step(y0, k1, tau);
        let phi = yt[0] - xs;
        if phi.abs() < best.0 {
            best = (phi.abs(), tau, yt);
        }
        if phi == 0.0 || ft[0] == 0.0 {
            break;
        }
        let next = (tau - phi / ft[0]).clamp(0.0, h);
        if (next - tau).abs() <= 1e-15 * h.max(1.0) {
            tau = next;
            let (yt, _, _) = st.step(y0, k1, tau);
            if (yt[0] - xs).abs() < best.0 {
                best = ((yt[0] - xs).abs(), tau, yt);
            }
            break;
        }
        tau = next;
    }
    (best.1, clamp_unit(best.2))
}

pub fn integrate(s0: State, p: &SystemParams, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrate_with_sections(s0, p, opts, &[])
}

pub fn integrate_with_sections(
    s0: State,
    p: &SystemParams,
    opts: &IntegratorOptions,
    sections: &[Section],
) -> Result<Trajectory> {
    p.validate()?;
    p.check_supported()?;
    s0.check()?;
    opts.validate()?;
    let st = Stepper { p, sign: if opts.backward { -1.0 } else { 1.0 } };
    let mut y = clamp_unit([s0.x, s0.r]);
    let mut k1 = st.f(y);
    let mut t = 0.0;
    let mut h = opts.max_step.min(opts.t_end).min(1e-2);
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        crossings: Vec::new(),
        termination: Termination::Completed,
        end_time: 0.0,
        end_state: to_state(y),
    };
    if opts.record {
        traj.times.push(t);
        traj.states.push(to_state(y));
    }
    let mut counts = vec![0usize; sections.len()];
    let mut steps = 0usize;
    let mut rejected_last = false;
    while t < opts.t_end {
        if steps >= opts.max_steps {
            return Err(fail(t, y, "step budget exhausted"));
        }
        steps += 1;
        let last = h >= opts.t_end - t;
        if last {
            h = opts.t_end - t;
        }
        if h < 1e-14 * t.max(1.0) {
            return Err(fail(t, y, "step size underflow"));
        }
        let (yn, err, k7) = st.step(y, k1, h);
        let mut en = 0.0;
        for i in 0..2 {
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(yn[i].abs());
            en += (err[i] / sc).powi(2);
        }
        let en = (en / 2.0).sqrt();
        let band = opts.clamp_band;
        let inside = yn.iter().all(|v| v.is_finite() && *v >= -band && *v <= 1.0 + band);
        if !en.is_finite() || en > 1.0 || !inside {
            let fac = if inside && en.is_finite() { (0.9 * en.powf(-0.2)).max(0.2) } else { 0.25 };
            h *= fac.min(0.9);
            rejected_last = true;
            continue;
        }
        let yc = clamp_unit(yn);
        let kn = if yc == yn { k7 } else { st.f(yc) };
        let t1 = if last { opts.t_end } else { t + h };

        let mut events: Vec<(f64, usize, Direction, V2)> = Vec::new();
        for (i, sec) in sections.iter().enumerate() {
            let (g0, g1) = (y[0] - sec.x, yc[0] - sec.x);
            let dir = if g0 > 0.0 && g1 <= 0.0 {
                Direction::Decreasing
            } else if g0 < 0.0 && g1 >= 0.0 {
                Direction::Increasing
            } else {
                continue;
            };
            if sec.direction != Direction::Either && sec.direction != dir {
                continue;
            }
            let (tau, ye) = locate(&st, y, k1, yc, kn, h, sec.x);
            events.push((t + tau, i, dir, ye));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (te, i, dir, ye) in events {
            traj.crossings.push(Crossing { section: i, time: te, state: to_state(ye), direction: dir });
            counts[i] += 1;
            if sections[i].stop_after.is_some_and(|n| counts[i] >= n) {
                if opts.record {
                    traj.times.push(te);
                    traj.states.push(to_state(ye));
                }
                traj.termination = Termination::SectionLimit;
                traj.end_time = te;
                traj.end_state = to_state(ye);
                return Ok(traj);
            }
        }

        t = t1;
        y = yc;
        k1 = kn;
        if opts.record {
            traj.times.push(t);
            traj.states.push(to_state(y));
        }
        let mut fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        if rejected_last {
            fac = fac.min(1.0);
        }
        rejected_last = false;
        h = (h * fac).min(opts.max_step);
    }
    traj.end_time = t;
    traj.end_state = to_state(y);
    Ok(traj)
}

fn fail(t: f64, y: V2, reason: &str) -> Error {
    Error::IntegrationFailure { t, x: y[0], r: y[1], reason: reason.into() }
}

/// All crossings of one section over the run.
pub fn section_crossings(s0: State, p: &SystemParams, opts: &IntegratorOptions, section: Section) -> Result<Vec<Crossing>> {
    let o = IntegratorOptions { record: false, ..*opts };
    Ok(integrate_with_sections(s0, p, &o, &[section])?.crossings)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepulsionStart {
    pub start: State,
    /// `min(r(1-r), x(1-x))` at the start.
    pub initial_distance: f64,
    pub late_min_resource: f64,
    pub late_min_strategy: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepulsionDiagnostic {
    /// Set when the check does not apply (`mu = 0`).
    pub skipped: Option<String>,
    pub starts: Vec<RepulsionStart>,
    pub passed: bool,
}

/// Starts near every side of the square and checks that late-time states
/// have moved further from the boundary than the start was.
pub fn boundary_repulsion_check(p: &SystemParams, eps: f64, t_end: f64) -> Result<RepulsionDiagnostic> {
    p.validate()?;
    if p.mu == 0.0 {
        return Ok(RepulsionDiagnostic {
            skipped: Some("boundary is invariant when mu = 0".into()),
            starts: Vec::new(),
            passed: true,
        });
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!("eps={eps} must lie in (0, 1/2)")));
    }
    let along = [0.1, 0.3, 0.5, 0.7, 0.9];
    let mut starts = Vec::new();
    for &s in &along {
        starts.push(State { x: s, r: eps });
        starts.push(State { x: s, r: 1.0 - eps });
        starts.push(State { x: eps, r: s });
        starts.push(State { x: 1.0 - eps, r: s });
    }
    let opts = IntegratorOptions::until(t_end);
    let mut out = Vec::new();
    for s0 in starts {
        let traj = integrate(s0, p, &opts)?;
        let from = 0.8 * t_end;
        let (mut mr, mut mx) = (f64::INFINITY, f64::INFINITY);
        for (t, s) in traj.times.iter().zip(&traj.states) {
            if *t >= from {
                mr = mr.min(s.r * (1.0 - s.r));
                mx = mx.min(s.x * (1.0 - s.x));
            }
        }
        let d0 = (s0.r * (1.0 - s0.r)).min(s0.x * (1.0 - s0.x));
        out.push(RepulsionStart {
            start: s0,
            initial_distance: d0,
            late_min_resource: mr,
            late_min_strategy: mx,
            passed: mr.min(mx) > d0,
        });
    }
    let passed = out.iter().all(|s| s.passed);
    Ok(RepulsionDiagnostic { skipped: None, starts: out, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asymmetric(mu: f64) -> SystemParams {
        SystemParams::new(3.0, 0.2, 0.5, 1.0, 1.0, mu).unwrap()
    }

    #[test]
    fn logistic_resource_matches_closed_form() {
        // with x frozen at 1 (no mutation, pure cooperators) r follows a logistic curve
        let p = asymmetric(0.0);
        let opts = IntegratorOptions { t_end: 5.0, rel_tol: 1e-11, abs_tol: 1e-13, ..Default::default() };
        let tr = integrate(State { x: 1.0, r: 0.1 }, &p, &opts).unwrap();
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let exact = 0.1 * t.exp() / (1.0 - 0.1 + 0.1 * t.exp());
            assert!((s.r - exact).abs() < 1e-9, "t={t}");
            assert_eq!(s.x, 1.0);
        }
        assert_eq!(*tr.times.last().unwrap(), 5.0);
    }

    #[test]
    fn times_increase_and_states_stay_inside() {
        let tr = integrate(State { x: 0.01, r: 0.99 }, &asymmetric(0.01), &IntegratorOptions::until(200.0)).unwrap();
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.states.iter().all(|s| (0.0..=1.0).contains(&s.x) && (0.0..=1.0).contains(&s.r)));
    }

    #[test]
    fn backward_run_retraces_forward_run() {
        let p = asymmetric(0.1);
        let opts = IntegratorOptions { t_end: 3.0, rel_tol: 1e-12, abs_tol: 1e-14, ..Default::default() };
        let s0 = State { x: 0.4, r: 0.6 };
        let fwd = integrate(s0, &p, &opts).unwrap();
        let back = integrate(fwd.end_state, &p, &IntegratorOptions { backward: true, ..opts }).unwrap();
        assert!(back.end_state.dist(&s0) < 1e-9);
    }

    #[test]
    fn crossings_lie_on_section_in_order() {
        let p = asymmetric(0.1);
        let sec = Section::new(0.5, Direction::Either);
        let cs = section_crossings(State { x: 0.5, r: 0.9 }, &p, &IntegratorOptions::until(100.0), sec).unwrap();
        assert!(cs.len() > 4);
        for c in &cs {
            assert!((c.state.x - 0.5).abs() < 1e-12);
            let f = p.rhs(c.state.x, c.state.r)[0];
            match c.direction {
                Direction::Decreasing => assert!(f < 0.0 && c.state.r > 0.68),
                Direction::Increasing => assert!(f > 0.0 && c.state.r < 0.69),
                Direction::Either => unreachable!(),
            }
        }
        assert!(cs.windows(2).all(|w| w[1].time > w[0].time && w[0].direction != w[1].direction));
    }

    #[test]
    fn stops_after_requested_crossings() {
        let p = asymmetric(0.1);
        let sec = Section::new(0.5, Direction::Decreasing).stopping_after(2);
        let tr = integrate_with_sections(State { x: 0.5, r: 0.9 }, &p, &IntegratorOptions::until(1e4), &[sec]).unwrap();
        assert_eq!(tr.termination, Termination::SectionLimit);
        assert_eq!(tr.crossings.len(), 2);
        assert_eq!(tr.end_time, tr.crossings[1].time);
    }

    #[test]
    fn repulsion_from_boundary_with_mutation() {
        let d = boundary_repulsion_check(&asymmetric(0.1), 1e-3, 500.0).unwrap();
        assert!(d.passed, "{d:?}");
        assert_eq!(d.starts.len(), 20);
        assert!(boundary_repulsion_check(&asymmetric(0.0), 1e-3, 500.0).unwrap().skipped.is_some());
    }
}
