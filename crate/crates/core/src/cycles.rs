//! Limit cycles through the first-return map on the vertical line through
//! the interior equilibrium, and parameter sweeps built on it.
//!
//! Above the equilibrium the flow crosses that line leftwards, so the map
//! sends a resource level `r > r*` to the resource level of the next
//! leftward crossing.

use serde::Serialize;

use crate::control::{balance, controlled_equilibrium, u_half};
use crate::equilibria::{interior_equilibrium, EquilibriumReport, Stability};
use crate::error::{Error, Result};
use crate::export::{num, opt_num};
use crate::flow::{integrate_with_sections, Direction, IntegratorOptions, Section, Termination};
use crate::model::{State, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleOptions {
    pub integrator: IntegratorOptions,
    /// Longest time allowed for a single return.
    pub return_horizon: f64,
    pub max_returns: usize,
    /// Fixed-point tolerance on `|P(r) - r|`.
    pub tol: f64,
    pub floquet_step: f64,
    /// Cycles whose section point is closer than this to the equilibrium
    /// count as collapsed onto it.
    pub amplitude_floor: f64,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            integrator: IntegratorOptions { rel_tol: 1e-11, abs_tol: 1e-14, record: false, ..Default::default() },
            return_horizon: 5000.0,
            max_returns: 500,
            tol: 1e-9,
            floquet_step: 1e-5,
            amplitude_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleStability {
    Stable,
    Unstable,
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitCycle {
    pub section_x: f64,
    /// Fixed point of the return map.
    pub section_r: f64,
    pub period: f64,
    pub times: Vec<f64>,
    pub samples: Vec<State>,
    pub r_min: f64,
    pub r_max: f64,
    pub r_amplitude: f64,
    /// Time average of `r` over one period.
    pub mean_r: f64,
    /// Derivative of the return map at the fixed point.
    pub floquet: f64,
    /// `|P(section_r) - section_r|`.
    pub residual: f64,
    pub stability: CycleStability,
    /// Signed number of turns around the equilibrium over one period.
    pub winding: i32,
    pub returns_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsenceReason {
    /// Returns shrink onto the stable equilibrium.
    ConvergesToEquilibrium,
    /// The orbit stops returning to the section (it settles elsewhere).
    NoReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CycleOutcome {
    Found(Box<LimitCycle>),
    Absent { reason: AbsenceReason, iterates: Vec<f64> },
    Inconclusive { iterates: Vec<f64> },
}

impl CycleOutcome {
    pub fn cycle(&self) -> Option<&LimitCycle> {
        match self {
            CycleOutcome::Found(c) => Some(c),
            _ => None,
        }
    }
}

/// Equilibrium the section passes through: the interior one for `u = 0`,
/// the controlled one otherwise.
pub fn reference_equilibrium(p: &SystemParams) -> Result<Option<EquilibriumReport>> {
    if p.u == 0.0 {
        interior_equilibrium(p)
    } else {
        controlled_equilibrium(p)
    }
}

struct ReturnMap<'a> {
    p: &'a SystemParams,
    xs: f64,
    opts: IntegratorOptions,
}

impl<'a> ReturnMap<'a> {
    fn new(p: &'a SystemParams, xs: f64, o: &CycleOptions) -> Self {
        ReturnMap {
            p,
            xs,
            opts: IntegratorOptions { t_end: o.return_horizon, record: false, ..o.integrator },
        }
    }

    /// Next leftward crossing after `s0`, with its time.
    fn next(&self, s0: State) -> Result<Option<(f64, f64)>> {
        let sec = Section::new(self.xs, Direction::Decreasing).stopping_after(1);
        let tr = integrate_with_sections(s0, self.p, &self.opts, &[sec])?;
        Ok(match tr.termination {
            Termination::SectionLimit => Some((tr.end_state.r, tr.end_time)),
            Termination::Completed => None,
        })
    }

    fn eval(&self, r: f64) -> Result<Option<f64>> {
        Ok(self.next(State { x: self.xs, r })?.map(|v| v.0))
    }
}

/// Seed displaced by `dist` from the equilibrium along the real part of
/// its leading eigenvector.
pub fn displaced_seed(eq: &EquilibriumReport, dist: f64) -> State {
    let j = eq.jacobian;
    let lam = eq.eigenvalues[0];
    let (mut vx, mut vr) = (j[0][1], lam.re - j[0][0]);
    let n = vx.hypot(vr);
    if n == 0.0 {
        (vx, vr) = (0.0, 1.0);
    } else {
        (vx, vr) = (vx / n, vr / n);
    }
    // move upward so the first return comes quickly
    if vr < 0.0 {
        (vx, vr) = (-vx, -vr);
    }
    State {
        x: (eq.location.x + dist * vx).clamp(1e-9, 1.0 - 1e-9),
        r: (eq.location.r + dist * vr).clamp(1e-9, 1.0 - 1e-9),
    }
}

pub fn find_limit_cycle(p: &SystemParams, seed: State, opts: &CycleOptions) -> Result<CycleOutcome> {
    p.validate()?;
    p.check_supported()?;
    seed.check()?;
    let eq = reference_equilibrium(p)?
        .ok_or_else(|| Error::Precondition("no interior equilibrium to anchor the section".into()))?;
    let xs = eq.location.x;
    let rstar = eq.location.r;
    let eq_stable = eq.max_real_part() <= 1e-10;
    let map = ReturnMap::new(p, xs, opts);
    let floor = opts.amplitude_floor;

    let Some((mut r, _)) = map.next(seed)? else {
        return Ok(CycleOutcome::Absent { reason: AbsenceReason::NoReturn, iterates: Vec::new() });
    };
    let mut iterates = vec![r];
    // evaluated (r, P(r) - r), kept sorted by r
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut last_two: Vec<(f64, f64)> = Vec::new();
    let mut bracket_width = f64::INFINITY;

    for k in 0..opts.max_returns {
        let Some(pr) = map.eval(r)? else {
            return Ok(CycleOutcome::Absent { reason: AbsenceReason::NoReturn, iterates });
        };
        iterates.push(pr);
        let h = pr - r;
        if h.abs() < opts.tol {
            if r - rstar < floor {
                return Ok(CycleOutcome::Absent { reason: AbsenceReason::ConvergesToEquilibrium, iterates });
            }
            // a weak focus also gives tiny steps; only a sign change of
            // P(r) - r across r marks a cycle
            let dr = opts.floquet_step.min(0.5 * (1.0 - r)).min(0.5 * (r - rstar));
            let side = |v: f64| -> Result<Option<f64>> { Ok(map.eval(v)?.map(|pv| pv - v)) };
            match (side(r - dr)?, side(r + dr)?) {
                (Some(lo), Some(hi)) if lo * hi < 0.0 => {}
                (Some(lo), Some(hi)) if eq_stable && lo < 0.0 && hi < 0.0 => {
                    return Ok(CycleOutcome::Absent { reason: AbsenceReason::ConvergesToEquilibrium, iterates });
                }
                _ => return Ok(CycleOutcome::Inconclusive { iterates }),
            }
            let cycle = characterise(p, &map, &eq, r, h.abs(), k + 1, opts)?;
            return Ok(CycleOutcome::Found(Box::new(cycle)));
        }
        let pos = pts.partition_point(|q| q.0 < r);
        pts.insert(pos, (r, h));
        last_two.push((r, h));
        if last_two.len() > 2 {
            last_two.remove(0);
        }

        if eq_stable && h < 0.0 && (r - rstar < floor || pr - rstar < floor) {
            return Ok(CycleOutcome::Absent { reason: AbsenceReason::ConvergesToEquilibrium, iterates });
        }

        // sign change between neighbours: false position with bisection safeguard
        let i = pos;
        let neighbour = [i.checked_sub(1), Some(i + 1)]
            .into_iter()
            .flatten()
            .filter(|&j| j < pts.len())
            .find(|&j| pts[j].1.signum() != h.signum());
        if let Some(j) = neighbour {
            let (lo, hi) = if pts[j].0 < r { (pts[j], (r, h)) } else { ((r, h), pts[j]) };
            let width = hi.0 - lo.0;
            let mut next = lo.0 - lo.1 * width / (hi.1 - lo.1);
            if !(next > lo.0 && next < hi.0) || width > 0.5 * bracket_width {
                next = 0.5 * (lo.0 + hi.0);
            }
            bracket_width = width;
            if width < 1e-14 {
                let cycle = characterise(p, &map, &eq, next, h.abs(), k + 1, opts)?;
                return Ok(CycleOutcome::Found(Box::new(cycle)));
            }
            r = next;
            continue;
        }

        // no bracket yet: follow the secant when it points further than the
        // plain iterate, otherwise widen the previous move geometrically
        let mut next = pr;
        if let [(r0, h0), (r1, h1)] = last_two[..] {
            let widened = r1 + h1.signum() * h1.abs().max(2.0 * (r1 - r0).abs());
            next = widened;
            if h1 != h0 {
                let s = r1 - h1 * (r1 - r0) / (h1 - h0);
                if eq_stable && h1 < 0.0 && s - rstar < floor {
                    return Ok(CycleOutcome::Absent { reason: AbsenceReason::ConvergesToEquilibrium, iterates });
                }
                let ahead = (s - r1) * h1 > 0.0 && (s - r1).abs() > h1.abs();
                if s.is_finite() && ahead {
                    let cap = r1 + 1000.0 * h1;
                    next = if h1 > 0.0 { s.min(cap) } else { s.max(cap) };
                }
            }
        }
        let hi_lim = 1.0 - 0.5 * (1.0 - pr.max(r));
        let lo_lim = rstar + 0.5 * (pr.min(r) - rstar);
        r = next.clamp(lo_lim.min(pr), hi_lim.max(pr));
    }
    Ok(CycleOutcome::Inconclusive { iterates })
}

fn characterise(
    p: &SystemParams,
    map: &ReturnMap,
    eq: &EquilibriumReport,
    rc: f64,
    residual: f64,
    returns_used: usize,
    opts: &CycleOptions,
) -> Result<LimitCycle> {
    let xs = map.xs;
    let rstar = eq.location.r;
    let dr = opts.floquet_step.min(0.5 * (1.0 - rc)).min(0.5 * (rc - rstar));
    let plus = map.eval(rc + dr)?;
    let minus = map.eval(rc - dr)?;
    let floquet = match (plus, minus) {
        (Some(a), Some(b)) => (a - b) / (2.0 * dr),
        _ => f64::NAN,
    };
    let o = IntegratorOptions { t_end: opts.return_horizon, record: true, ..opts.integrator };
    let secs = [
        Section::new(xs, Direction::Decreasing).stopping_after(1),
        Section::new(xs, Direction::Increasing),
    ];
    let tr = integrate_with_sections(State { x: xs, r: rc }, p, &o, &secs)?;
    if tr.termination != Termination::SectionLimit {
        return Err(Error::Precondition("cycle point did not return within the horizon".into()));
    }
    let mut r_min = f64::INFINITY;
    let mut r_max = f64::NEG_INFINITY;
    for s in tr.states.iter().chain(tr.crossings.iter().map(|c| &c.state)) {
        r_min = r_min.min(s.r);
        r_max = r_max.max(s.r);
    }
    let mut area = 0.0;
    let mut angle = 0.0;
    for w in 0..tr.states.len().saturating_sub(1) {
        let (a, b) = (tr.states[w], tr.states[w + 1]);
        area += 0.5 * (a.r + b.r) * (tr.times[w + 1] - tr.times[w]);
        let ta = (a.r - rstar).atan2(a.x - eq.location.x);
        let tb = (b.r - rstar).atan2(b.x - eq.location.x);
        let mut d = tb - ta;
        while d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        while d < -std::f64::consts::PI {
            d += 2.0 * std::f64::consts::PI;
        }
        angle += d;
    }
    let period = tr.end_time;
    let stability = if floquet.abs() < 1.0 - 1e-9 {
        CycleStability::Stable
    } else if floquet.abs() > 1.0 + 1e-9 {
        CycleStability::Unstable
    } else {
        CycleStability::Neutral
    };
    Ok(LimitCycle {
        section_x: xs,
        section_r: rc,
        period,
        times: tr.times,
        samples: tr.states,
        r_min,
        r_max,
        r_amplitude: r_max - r_min,
        mean_r: area / period,
        floquet,
        residual,
        stability,
        winding: (angle / (2.0 * std::f64::consts::PI)).round() as i32,
        returns_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Mu,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Cycle,
    Absent,
    Inconclusive,
    NoInteriorEquilibrium,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub r_min: f64,
    pub r_max: f64,
    pub period: f64,
    pub floquet: f64,
    pub section_r: f64,
    pub mean_r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramPoint {
    pub param: f64,
    pub equilibrium: Option<State>,
    pub stability: Option<Stability>,
    pub cycle: Option<Envelope>,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationDiagram {
    pub parameter: SweepParameter,
    pub points: Vec<DiagramPoint>,
}

impl BifurcationDiagram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("param,eq_x,eq_r,eq_stable,cyc_rmin,cyc_rmax,period,floquet,status\n");
        for pt in &self.points {
            let stable = match pt.stability {
                Some(Stability::Stable) => "1",
                Some(_) => "0",
                None => "",
            };
            let status = match pt.status {
                PointStatus::Cycle => "cycle",
                PointStatus::Absent => "absent",
                PointStatus::Inconclusive => "inconclusive",
                PointStatus::NoInteriorEquilibrium => "no_interior_equilibrium",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                num(pt.param),
                opt_num(pt.equilibrium.map(|s| s.x)),
                opt_num(pt.equilibrium.map(|s| s.r)),
                stable,
                opt_num(pt.cycle.map(|c| c.r_min)),
                opt_num(pt.cycle.map(|c| c.r_max)),
                opt_num(pt.cycle.map(|c| c.period)),
                opt_num(pt.cycle.map(|c| c.floquet)),
                status
            ));
        }
        out
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sweep grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Runs one grid point, warm-starting from the previous section point when
/// it still lies above the equilibrium.
fn sweep_point(q: &SystemParams, param: f64, warm: &mut Option<f64>, opts: &CycleOptions) -> Result<DiagramPoint> {
    let Some(eq) = reference_equilibrium(q)? else {
        *warm = None;
        return Ok(DiagramPoint {
            param,
            equilibrium: None,
            stability: None,
            cycle: None,
            status: PointStatus::NoInteriorEquilibrium,
        });
    };
    let seed = match *warm {
        Some(r) if r > eq.location.r + 1e-3 && r < 1.0 => State { x: eq.location.x, r },
        _ => displaced_seed(&eq, 1e-2),
    };
    let outcome = find_limit_cycle(q, seed, opts)?;
    let (cycle, status) = match &outcome {
        CycleOutcome::Found(c) => {
            *warm = Some(c.section_r);
            let env = Envelope {
                r_min: c.r_min,
                r_max: c.r_max,
                period: c.period,
                floquet: c.floquet,
                section_r: c.section_r,
                mean_r: c.mean_r,
            };
            (Some(env), PointStatus::Cycle)
        }
        CycleOutcome::Absent { .. } => {
            *warm = None;
            (None, PointStatus::Absent)
        }
        CycleOutcome::Inconclusive { .. } => (None, PointStatus::Inconclusive),
    };
    Ok(DiagramPoint { param, equilibrium: Some(eq.location), stability: Some(eq.stability), cycle, status })
}

pub fn sweep_mu(p: &SystemParams, grid: &[f64], opts: &CycleOptions) -> Result<BifurcationDiagram> {
    check_grid(grid)?;
    if p.u != 0.0 {
        return Err(Error::Precondition("mu sweeps need u=0".into()));
    }
    let mut warm = None;
    let mut points = Vec::with_capacity(grid.len());
    for &mu in grid {
        let q = p.with_mu(mu)?;
        points.push(sweep_point(&q, mu, &mut warm, opts)?);
    }
    Ok(BifurcationDiagram { parameter: SweepParameter::Mu, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotonicity {
    StrictlyDecreasing,
    StrictlyIncreasing,
    NotMonotone,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSweep {
    pub diagram: BifurcationDiagram,
    /// Oscillation amplitude in `r` per grid point: the cycle amplitude when
    /// a cycle exists, zero when orbits settle, `None` otherwise.
    pub amplitudes: Vec<Option<f64>>,
    pub verdict: Monotonicity,
}

pub fn monotonicity(values: &[Option<f64>]) -> Monotonicity {
    let v: Option<Vec<f64>> = values.iter().copied().collect();
    match v {
        Some(v) if v.len() >= 2 => {
            if v.windows(2).all(|w| w[1] < w[0]) {
                Monotonicity::StrictlyDecreasing
            } else if v.windows(2).all(|w| w[1] > w[0]) {
                Monotonicity::StrictlyIncreasing
            } else {
                Monotonicity::NotMonotone
            }
        }
        _ => Monotonicity::Undetermined,
    }
}

/// Amplitude of the oscillation in `r` as the subsidy grows, for balanced
/// coefficients (`a+c = b+d`, `theta = 1`) below the Hopf point.
pub fn sweep_u_amplitude(p: &SystemParams, u_grid: &[f64], opts: &CycleOptions) -> Result<AmplitudeSweep> {
    check_grid(u_grid)?;
    if p.theta != 1.0 {
        return Err(Error::Unsupported("subsidy sweeps need theta=1".into()));
    }
    if balance(p) != std::cmp::Ordering::Equal {
        return Err(Error::Precondition("subsidy amplitude sweeps need a+c=b+d".into()));
    }
    let base = SystemParams { u: 0.0, ..*p };
    let mu1 = crate::bifurcation::hopf_mu(&base)
        .ok_or_else(|| Error::Precondition("no Hopf point (ad-bc<=0)".into()))?;
    if !(p.mu < mu1) {
        return Err(Error::Precondition(format!("mu={} must be below the Hopf value {mu1}", p.mu)));
    }
    let half = u_half(p);
    let mut warm = None;
    let mut points = Vec::new();
    let mut amplitudes = Vec::new();
    for &u in u_grid {
        let q = base.with_u(u)?;
        if u >= half {
            points.push(DiagramPoint {
                param: u,
                equilibrium: None,
                stability: None,
                cycle: None,
                status: PointStatus::NoInteriorEquilibrium,
            });
            continue;
        }
        let pt = sweep_point(&q, u, &mut warm, opts)?;
        amplitudes.push(match pt.status {
            PointStatus::Cycle => pt.cycle.map(|c| c.r_max - c.r_min),
            PointStatus::Absent => Some(0.0),
            _ => None,
        });
        points.push(pt);
    }
    let verdict = monotonicity(&amplitudes);
    Ok(AmplitudeSweep { diagram: BifurcationDiagram { parameter: SweepParameter::U, points }, amplitudes, verdict })
}
