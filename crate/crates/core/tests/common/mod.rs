#![allow(dead_code)]

use ecogame::cycles::{displaced_seed, find_limit_cycle, reference_equilibrium, CycleOptions, CycleOutcome};
use ecogame::SystemParams;
use proptest::prelude::*;

pub fn asymmetric(mu: f64) -> SystemParams {
    SystemParams::new(3.0, 0.2, 0.5, 1.0, 1.0, mu).unwrap()
}

pub fn balanced(mu: f64) -> SystemParams {
    SystemParams::new(3.0, 1.0, 1.0, 3.0, 1.0, mu).unwrap()
}

pub fn cycle_from_equilibrium(p: &SystemParams) -> CycleOutcome {
    let eq = reference_equilibrium(p).unwrap().unwrap();
    find_limit_cycle(p, displaced_seed(&eq, 1e-2), &CycleOptions::default()).unwrap()
}

/// `0 < ad - bc <= delta / theta^2` and an interior equilibrium at the Hopf point.
pub fn hopf_admissible(p: &SystemParams) -> bool {
    matches!(ecogame::bifurcation::hopf_point(p), Ok(Some(h)) if h.admissible)
}

pub fn coefficients() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.1f64..5.0, 0.1f64..5.0, 0.1f64..5.0, 0.1f64..5.0)
}

pub fn any_params() -> impl Strategy<Value = SystemParams> {
    (coefficients(), 0.2f64..5.0, 0.0f64..1.0)
        .prop_map(|((a, b, c, d), t, mu)| SystemParams::new(a, b, c, d, t, mu).unwrap())
}

/// Parameter sets with an admissible Hopf point, any `theta`.
pub fn hopf_family() -> impl Strategy<Value = SystemParams> {
    (coefficients(), 0.2f64..5.0)
        .prop_map(|((a, b, c, d), t)| SystemParams::new(a, b, c, d, t, 0.0).unwrap())
        .prop_filter("admissible Hopf point", hopf_admissible)
}

pub fn hopf_family_unit_theta() -> impl Strategy<Value = SystemParams> {
    coefficients()
        .prop_map(|(a, b, c, d)| SystemParams::new(a, b, c, d, 1.0, 0.0).unwrap())
        .prop_filter("admissible Hopf point", hopf_admissible)
}
