//! Data behind each published figure, with the checks it must satisfy.

use ecogame::bifurcation::hopf_mu;
use ecogame::control::{control_thresholds, controlled_boundary_equilibrium, controlled_equilibrium, u_half, ControlRegime};
use ecogame::cycles::{
    displaced_seed, find_limit_cycle, reference_equilibrium, sweep_mu, sweep_u_amplitude, AmplitudeSweep,
    CycleOutcome, CycleStability, LimitCycle, Monotonicity, PointStatus,
};
use ecogame::equilibria::{interior_equilibrium, EquilibriumReport, Stability};
use ecogame::export::{num, opt_num, to_json};
use ecogame::flow::{integrate, Trajectory};
use ecogame::roots::bracketed_root;
use ecogame::{Error, State, SystemParams};

use crate::scenario::{Artifact, CheckResult, FigureId, Options, Outcome, Settings};

pub const BUNDLED: [(FigureId, &str); 11] = [
    (FigureId::Fig2a, include_str!("../scenarios/fig2a.toml")),
    (FigureId::Fig2b, include_str!("../scenarios/fig2b.toml")),
    (FigureId::Fig3, include_str!("../scenarios/fig3.toml")),
    (FigureId::Fig4a, include_str!("../scenarios/fig4a.toml")),
    (FigureId::Fig4b, include_str!("../scenarios/fig4b.toml")),
    (FigureId::Fig4c, include_str!("../scenarios/fig4c.toml")),
    (FigureId::Fig4d, include_str!("../scenarios/fig4d.toml")),
    (FigureId::Fig5a, include_str!("../scenarios/fig5a.toml")),
    (FigureId::Fig5b, include_str!("../scenarios/fig5b.toml")),
    (FigureId::Fig5c, include_str!("../scenarios/fig5c.toml")),
    (FigureId::Fig5d, include_str!("../scenarios/fig5d.toml")),
];

pub fn bundled(id: FigureId) -> &'static str {
    BUNDLED.iter().find(|(f, _)| *f == id).map(|(_, s)| *s).expect("every figure is bundled")
}

struct Checks(Vec<CheckResult>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(CheckResult { name: name.into(), passed, detail: detail.into() });
    }
}

fn default_starts() -> Vec<[f64; 2]> {
    let v = [0.1, 0.3, 0.5, 0.7, 0.9];
    v.iter().flat_map(|&x| v.iter().map(move |&r| [x, r])).collect()
}

fn portrait_csv(runs: &[Trajectory], sample_dt: f64) -> String {
    let mut out = String::from("run,t,x,r\n");
    for (k, tr) in runs.iter().enumerate() {
        let mut last = f64::NEG_INFINITY;
        let n = tr.times.len();
        for (i, (t, s)) in tr.times.iter().zip(&tr.states).enumerate() {
            if t - last >= sample_dt || i + 1 == n {
                out.push_str(&format!("{k},{},{},{}\n", num(*t), num(s.x), num(s.r)));
                last = *t;
            }
        }
    }
    out
}

fn cycle_csv(c: &LimitCycle) -> String {
    let mut out = String::from("t,x,r\n");
    for (t, s) in c.times.iter().zip(&c.samples) {
        out.push_str(&format!("{},{},{}\n", num(*t), num(s.x), num(s.r)));
    }
    out
}

pub fn amplitude_csv(s: &AmplitudeSweep) -> String {
    let mut out = String::from("u,amplitude,mean_r,status\n");
    let mut amps = s.amplitudes.iter();
    for pt in &s.diagram.points {
        let amp = if pt.status == PointStatus::NoInteriorEquilibrium { None } else { *amps.next().unwrap() };
        let status = serde_json::to_value(pt.status).unwrap();
        out.push_str(&format!(
            "{},{},{},{}\n",
            num(pt.param),
            opt_num(amp),
            opt_num(pt.cycle.map(|c| c.mean_r)),
            status.as_str().unwrap_or_default()
        ));
    }
    out
}

fn run_starts(p: &SystemParams, o: &Options, set: &Settings, t_default: f64) -> Result<Vec<Trajectory>, Error> {
    let opts = set.integrator(o.t_end.unwrap_or(t_default));
    o.starts
        .clone()
        .unwrap_or_else(default_starts)
        .into_iter()
        .map(|[x, r]| integrate(State::new(x, r)?, p, &opts))
        .collect()
}

fn worst_distance(runs: &[Trajectory], target: State) -> f64 {
    runs.iter().map(|t| t.end_state.dist(&target)).fold(0.0, f64::max)
}

fn search(p: &SystemParams, set: &Settings) -> Result<(Option<EquilibriumReport>, CycleOutcome), Error> {
    let Some(eq) = reference_equilibrium(p)? else {
        return Ok((None, CycleOutcome::Inconclusive { iterates: Vec::new() }));
    };
    let o = find_limit_cycle(p, displaced_seed(&eq, 1e-2), &set.cycles())?;
    Ok((Some(eq), o))
}

fn cycle_checks(ch: &mut Checks, out: &CycleOutcome) {
    match out.cycle() {
        Some(c) => {
            ch.add("stable limit cycle found", c.stability == CycleStability::Stable && c.floquet.abs() < 1.0, format!("floquet {}", num(c.floquet)));
            ch.add("return-map residual below 1e-8", c.residual < 1e-8, num(c.residual));
        }
        None => ch.add("stable limit cycle found", false, format!("{out:?}")),
    }
}

fn amplitude(out: &CycleOutcome) -> f64 {
    out.cycle().map_or(0.0, |c| c.r_amplitude)
}

pub fn run(fig: FigureId, name: &str, p: &SystemParams, o: &Options, set: &Settings) -> Result<Outcome, Error> {
    let mut ch = Checks(Vec::new());
    let mut artifacts = Vec::new();
    let mut extra = serde_json::Map::new();
    let sample_dt = o.sample_dt.unwrap_or(0.5);
    match fig {
        FigureId::Fig2a | FigureId::Fig2b => {
            let (eq, out) = search(p, set)?;
            let eq = eq.ok_or_else(|| Error::Precondition("no interior equilibrium".into()))?;
            let e = eq.location;
            ch.add(
                "interior equilibrium at (0.5, 0.6809)",
                (e.x - 0.5).abs() <= 1e-4 && (e.r - 0.6809).abs() <= 1e-4,
                format!("({}, {})", num(e.x), num(e.r)),
            );
            cycle_checks(&mut ch, &out);
            if let Some(c) = out.cycle() {
                if fig == FigureId::Fig2a {
                    ch.add("large cycle: r amplitude above 0.5", c.r_amplitude > 0.5, num(c.r_amplitude));
                } else {
                    ch.add("small cycle: r amplitude below 0.15", c.r_amplitude < 0.15, num(c.r_amplitude));
                    ch.add(
                        "cycle encircles the equilibrium",
                        c.r_min < e.r && c.r_max > e.r && c.winding.abs() == 1,
                        format!("r in [{}, {}], winding {}", num(c.r_min), num(c.r_max), c.winding),
                    );
                }
                artifacts.push(Artifact::new("cycle.csv", cycle_csv(c)));
                extra.insert("cycle".into(), cycle_summary(c));
            }
            let runs = run_starts(p, o, set, 200.0)?;
            artifacts.push(Artifact::new("trajectories.csv", portrait_csv(&runs, sample_dt)));
        }
        FigureId::Fig3 => {
            let grid = o.grid.clone().ok_or_else(|| Error::Config("missing option grid".into()))?;
            let base = p.with_mu(0.0)?;
            let mu1 = hopf_mu(&base).ok_or_else(|| Error::Precondition("no Hopf point".into()))?;
            let re = |mu: f64| -> f64 {
                interior_equilibrium(&base.with_mu(mu).unwrap()).unwrap().map_or(f64::NAN, |e| e.max_real_part())
            };
            let crossing = bracketed_root(re, 0.5 * mu1, (2.0 * mu1).min(1.0), 1e-14);
            let gap = crossing.map_or(f64::INFINITY, |c| (c - mu1).abs());
            ch.add("closed-form Hopf point matches eigenvalue crossing to 1e-8", gap <= 1e-8, format!("mu1 {}, gap {}", num(mu1), num(gap)));
            let d = sweep_mu(&base, &grid, &set.cycles())?;
            let mut ok_below = true;
            let mut ok_above = true;
            for pt in &d.points {
                if (pt.param - mu1).abs() < 1e-12 {
                    continue;
                }
                if pt.param < mu1 {
                    ok_below &= pt.status == PointStatus::Cycle && pt.stability != Some(Stability::Stable);
                } else {
                    ok_above &= pt.status == PointStatus::Absent && pt.stability == Some(Stability::Stable);
                }
            }
            ch.add("cycles with unstable equilibrium below mu1", ok_below, "");
            ch.add("no cycle and stable equilibrium above mu1", ok_above, "");
            let below: Vec<_> = d.points.iter().filter(|pt| pt.param < mu1).filter_map(|pt| pt.cycle).collect();
            let shrink = below.windows(2).all(|w| w[1].r_max - w[1].r_min < w[0].r_max - w[0].r_min);
            ch.add("envelope shrinks towards mu1", shrink && !below.is_empty(), "");
            if let (Some(first), Some(pt)) = (below.first(), d.points.first()) {
                if pt.param <= 0.005 {
                    ch.add(
                        "envelope reaches the boundary loop at small mu",
                        first.r_min < 0.02 && first.r_max > 0.98,
                        format!("[{}, {}]", num(first.r_min), num(first.r_max)),
                    );
                }
            }
            extra.insert("mu1".into(), serde_json::json!(mu1));
            artifacts.push(Artifact::new("diagram.csv", d.to_csv()));
        }
        FigureId::Fig4a | FigureId::Fig4b | FigureId::Fig4c | FigureId::Fig4d => {
            let design = control_thresholds(p)?;
            extra.insert("design".into(), serde_json::to_value(&design).unwrap());
            let runs = run_starts(p, o, set, 1000.0)?;
            match fig {
                FigureId::Fig4a => {
                    ch.add("regime InteriorStabilizable", design.regime == ControlRegime::InteriorStabilizable, "");
                    let u1 = design.u1.unwrap_or(f64::NAN);
                    ch.add(
                        "subsidy inside (u1, (c+d)/2)",
                        p.u > u1 && p.u < design.u_half,
                        format!("u1 {}, u {}", num(u1), num(p.u)),
                    );
                    let e = controlled_equilibrium(p)?.ok_or_else(|| Error::Precondition("no controlled equilibrium".into()))?;
                    let w = worst_distance(&runs, e.location);
                    ch.add("start grid converges to the controlled equilibrium", w < 1e-3, num(w));
                    extra.insert("target".into(), serde_json::to_value(e.location).unwrap());
                }
                FigureId::Fig4c => {
                    ch.add("regime BoundaryOnly", design.regime == ControlRegime::BoundaryOnly, "");
                    let e = controlled_equilibrium(p)?.ok_or_else(|| Error::Precondition("no controlled equilibrium".into()))?;
                    ch.add("interior equilibrium unstable", e.stability.is_unstable(), format!("{:?}", e.stability));
                    extra.insert("interior".into(), serde_json::to_value(&e).unwrap());
                }
                _ => {
                    if fig == FigureId::Fig4d {
                        ch.add("regime BoundaryOnly", design.regime == ControlRegime::BoundaryOnly, "");
                    }
                    let t = controlled_boundary_equilibrium(p)?.main;
                    ch.add(
                        "top-side equilibrium stable with x in (1/2, 1)",
                        t.stability == Stability::Stable && t.location.x > 0.5 && t.location.x < 1.0,
                        format!("x {}", num(t.location.x)),
                    );
                    let w = worst_distance(&runs, t.location);
                    ch.add("start grid converges to the top-side equilibrium", w < 1e-3, num(w));
                    extra.insert("target".into(), serde_json::to_value(t.location).unwrap());
                }
            }
            artifacts.push(Artifact::new("trajectories.csv", portrait_csv(&runs, sample_dt)));
        }
        FigureId::Fig5a | FigureId::Fig5b | FigureId::Fig5c => {
            let runs = run_starts(p, o, set, 500.0)?;
            if p.u < u_half(p) {
                let (_, out) = search(p, set)?;
                let (_, free) = search(&p.with_u(0.0)?, set)?;
                if fig == FigureId::Fig5a {
                    cycle_checks(&mut ch, &out);
                } else {
                    ch.add(
                        "oscillation smaller than without subsidy",
                        amplitude(&out) < amplitude(&free),
                        format!("{} vs {}", num(amplitude(&out)), num(amplitude(&free))),
                    );
                }
                if let Some(c) = out.cycle() {
                    artifacts.push(Artifact::new("cycle.csv", cycle_csv(c)));
                    extra.insert("cycle".into(), cycle_summary(c));
                }
                extra.insert("outcome".into(), serde_json::json!(outcome_tag(&out)));
            } else {
                let t = controlled_boundary_equilibrium(p)?.main;
                ch.add("top-side equilibrium stable", t.stability == Stability::Stable, format!("x {}", num(t.location.x)));
                let w = worst_distance(&runs, t.location);
                ch.add("start grid converges to the top-side equilibrium", w < 1e-3, num(w));
                extra.insert("target".into(), serde_json::to_value(t.location).unwrap());
            }
            artifacts.push(Artifact::new("trajectories.csv", portrait_csv(&runs, sample_dt)));
        }
        FigureId::Fig5d => {
            let grid = o.grid.clone().ok_or_else(|| Error::Config("missing option grid".into()))?;
            let s = sweep_u_amplitude(p, &grid, &set.cycles())?;
            ch.add(
                "amplitude strictly decreasing in u",
                s.verdict == Monotonicity::StrictlyDecreasing,
                format!("{:?}", s.verdict),
            );
            artifacts.push(Artifact::new("amplitude.csv", amplitude_csv(&s)));
        }
    }
    let summary = serde_json::json!({
        "scenario": name,
        "figure": fig,
        "params": p,
        "checks": ch.0,
        "passed": ch.0.iter().all(|c| c.passed),
        "data": extra,
    });
    artifacts.push(Artifact::new("summary.json", to_json(&summary)));
    Ok(Outcome { artifacts, checks: ch.0 })
}

fn outcome_tag(o: &CycleOutcome) -> &'static str {
    match o {
        CycleOutcome::Found(_) => "cycle",
        CycleOutcome::Absent { .. } => "absent",
        CycleOutcome::Inconclusive { .. } => "inconclusive",
    }
}

fn cycle_summary(c: &LimitCycle) -> serde_json::Value {
    serde_json::json!({
        "section_r": c.section_r,
        "period": c.period,
        "r_min": c.r_min,
        "r_max": c.r_max,
        "r_amplitude": c.r_amplitude,
        "mean_r": c.mean_r,
        "floquet": c.floquet,
        "residual": c.residual,
        "winding": c.winding,
    })
}
