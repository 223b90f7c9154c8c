mod common;

use common::*;
use ecogame::control::{controlled_boundary_equilibrium, u_half};
use ecogame::cycles::*;
use ecogame::flow::{integrate, IntegratorOptions};
use ecogame::lienard::{check_lienard_conditions, lienard_transform};
use ecogame::State;

#[test]
fn one_period_returns_to_start() {
    for mu in [0.005, 0.1] {
        let p = asymmetric(mu);
        let o = cycle_from_equilibrium(&p);
        let c = o.cycle().unwrap();
        let s0 = State { x: c.section_x, r: c.section_r };
        let opts = IntegratorOptions { rel_tol: 1e-12, abs_tol: 1e-14, record: false, ..IntegratorOptions::until(c.period) };
        let end = integrate(s0, &p, &opts).unwrap().end_state;
        assert!((end.x - s0.x).abs() < 1e-6 && (end.r - s0.r).abs() < 1e-6, "mu={mu}: {end:?} vs {s0:?}");
        assert!(c.residual < 1e-8);
        assert!(c.r_amplitude > 0.0 && c.r_amplitude < 1.0);
        assert_eq!(c.winding.abs(), 1);
        assert!(c.samples.iter().all(|s| s.x >= 0.0 && s.x <= 1.0 && s.r >= 0.0 && s.r <= 1.0));
    }
}

#[test]
fn balanced_case_has_one_cycle() {
    let p = balanced(0.05);
    let form = lienard_transform(&p).unwrap();
    assert!(check_lienard_conditions(&form).all_pass());
    let seeds = [
        State { x: 0.5, r: 0.52 },
        State { x: 0.45, r: 0.5 },
        State { x: 0.1, r: 0.1 },
        State { x: 0.9, r: 0.9 },
        State { x: 0.2, r: 0.8 },
        State { x: 0.8, r: 0.2 },
        State { x: 0.5, r: 0.99 },
        State { x: 0.02, r: 0.5 },
        State { x: 0.65, r: 0.35 },
        State { x: 0.3, r: 0.62 },
    ];
    let mut found = Vec::new();
    for s in seeds {
        let o = find_limit_cycle(&p, s, &CycleOptions::default()).unwrap();
        let c = o.cycle().unwrap_or_else(|| panic!("seed {s:?}: {o:?}"));
        assert_eq!(c.stability, CycleStability::Stable);
        found.push(c.section_r);
    }
    for r in &found {
        assert!((r - found[0]).abs() < 1e-6, "{found:?}");
    }
}

#[test]
fn zero_subsidy_entry_matches_plain_search() {
    let p = balanced(0.05);
    let s = sweep_u_amplitude(&p, &[0.0, 0.8], &CycleOptions::default()).unwrap();
    let plain = cycle_from_equilibrium(&p);
    let c = plain.cycle().unwrap();
    let env = s.diagram.points[0].cycle.unwrap();
    assert!((env.section_r - c.section_r).abs() < 1e-7);
    assert!((s.amplitudes[0].unwrap() - c.r_amplitude).abs() < 1e-6);
}

#[test]
fn subsidy_lifts_the_oscillation() {
    let p = balanced(0.05);
    let s = sweep_u_amplitude(&p, &[0.0, 0.4, 0.8, 1.2], &CycleOptions::default()).unwrap();
    let means: Vec<f64> = s.diagram.points.iter().map(|pt| pt.cycle.unwrap().mean_r).collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
}

#[test]
fn large_subsidy_kills_the_cycle_in_the_balanced_case() {
    // with c < d the top side carries a stable equilibrium before (c+d)/2 is reached
    let p = balanced(0.05).with_u(1.6).unwrap();
    let o = cycle_from_equilibrium(&p);
    assert!(matches!(o, CycleOutcome::Absent { reason: AbsenceReason::NoReturn, .. }), "{o:?}");
    let tr = integrate(State { x: 0.5, r: 0.6 }, &p, &IntegratorOptions::until(2000.0)).unwrap();
    let end = tr.end_state;
    assert!(end.r > 1.0 - 1e-6 && end.x > 0.5, "{end:?}");
    assert!(p.rhs(end.x, 1.0)[0].abs() < 1e-6);
}

#[test]
fn subsidy_grid_points_past_half_are_flagged() {
    let p = balanced(0.05);
    let s = sweep_u_amplitude(&p, &[0.0, u_half(&p), 2.5], &CycleOptions::default()).unwrap();
    assert_eq!(s.amplitudes.len(), 1);
    assert_eq!(s.diagram.points[1].status, PointStatus::NoInteriorEquilibrium);
    assert_eq!(s.diagram.points[2].status, PointStatus::NoInteriorEquilibrium);
    assert!(controlled_boundary_equilibrium(&p.with_u(2.5).unwrap()).is_ok());
    assert!(sweep_u_amplitude(&asymmetric(0.05), &[0.0], &CycleOptions::default()).is_err());
    assert!(sweep_u_amplitude(&p, &[], &CycleOptions::default()).is_err());
}

#[test]
fn diagram_csv_is_deterministic() {
    let p = asymmetric(0.0);
    let grid = [0.05, 0.2];
    let a = sweep_mu(&p, &grid, &CycleOptions::default()).unwrap().to_csv();
    let b = sweep_mu(&p, &grid, &CycleOptions::default()).unwrap().to_csv();
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "param,eq_x,eq_r,eq_stable,cyc_rmin,cyc_rmax,period,floquet,status");
    assert!(lines[1].ends_with(",cycle") && lines[2].ends_with(",absent"));
}
