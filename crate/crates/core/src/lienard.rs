//! Liénard normal form for the balanced case `theta = 1`, `a+c = b+d`,
//! and grid checks of the conditions that give a unique limit cycle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bifurcation::hopf_mu;
use crate::control::balance;
use crate::error::{Error, Result};
use crate::model::{State, SystemParams};

/// Shifted coordinates: `xs = x - 1/2`, `rs = (1 - r) - r_star_prime`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LienardForm {
    /// `1 - r*` at the interior equilibrium.
    pub r_star_prime: f64,
    pub nu: f64,
    pub mu: f64,
    pub mu1: f64,
    /// `b + d`.
    pub coupling: f64,
    /// `a - b`, equal to `8 mu1`.
    pub slope: f64,
}

pub fn lienard_transform(p: &SystemParams) -> Result<LienardForm> {
    p.validate()?;
    if p.theta != 1.0 {
        return Err(Error::Unsupported(format!("Liénard form needs theta=1 (got {})", p.theta)));
    }
    if p.u != 0.0 {
        return Err(Error::Unsupported(format!("Liénard form needs u=0 (got {})", p.u)));
    }
    if balance(p) != std::cmp::Ordering::Equal {
        return Err(Error::Unsupported(format!(
            "Liénard form needs a+c=b+d (got {} vs {})",
            p.a + p.c,
            p.b + p.d
        )));
    }
    let mu1 = hopf_mu(p).ok_or_else(|| Error::Unsupported("Liénard form needs ad > bc".into()))?;
    if !(p.mu > 0.0 && p.mu < mu1) {
        return Err(Error::Unsupported(format!("Liénard form needs mu in (0, mu1={mu1}) (got {})", p.mu)));
    }
    let coupling = p.b + p.d;
    Ok(LienardForm {
        r_star_prime: (p.c + p.d) / (2.0 * coupling),
        nu: ((mu1 - p.mu) / (4.0 * mu1)).sqrt(),
        mu: p.mu,
        mu1,
        coupling,
        slope: p.a - p.b,
    })
}

impl LienardForm {
    pub fn alpha(&self, xs: f64) -> f64 {
        0.25 - xs * xs
    }

    pub fn beta(&self, rs: f64) -> f64 {
        let v = rs + self.r_star_prime;
        v * (1.0 - v)
    }

    pub fn phi(&self, rs: f64) -> f64 {
        self.coupling * rs / self.beta(rs)
    }

    #[allow(non_snake_case)]
    pub fn F(&self, xs: f64, rs: f64) -> f64 {
        let a = self.alpha(xs);
        (2.0 * self.mu * xs - 8.0 * self.mu1 * xs * a) / (a * self.beta(rs))
    }

    pub fn g(&self, xs: f64) -> f64 {
        2.0 * xs / self.alpha(xs)
    }

    /// Antiderivative of `g` vanishing at zero.
    #[allow(non_snake_case)]
    pub fn G(&self, xs: f64) -> f64 {
        -(1.0 - 4.0 * xs * xs).ln()
    }

    pub fn to_shifted(&self, s: State) -> (f64, f64) {
        (s.x - 0.5, (1.0 - s.r) - self.r_star_prime)
    }

    pub fn from_shifted(&self, xs: f64, rs: f64) -> State {
        State { x: xs + 0.5, r: 1.0 - self.r_star_prime - rs }
    }

    /// `(phi - F, -g)`.
    pub fn field(&self, xs: f64, rs: f64) -> [f64; 2] {
        [self.phi(rs) - self.F(xs, rs), -self.g(xs)]
    }

    /// The Liénard field multiplied by `alpha * beta`.
    pub fn scaled_field(&self, xs: f64, rs: f64) -> [f64; 2] {
        let w = self.alpha(xs) * self.beta(rs);
        let f = self.field(xs, rs);
        [w * f[0], w * f[1]]
    }
}

/// The original field written in shifted coordinates.
pub fn shifted_original_field(p: &SystemParams, form: &LienardForm, xs: f64, rs: f64) -> [f64; 2] {
    let s = form.from_shifted(xs, rs);
    let f = p.rhs(s.x, s.r);
    [f[0], -f[1]]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub xs: f64,
    pub rs: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass { checked: usize },
    Fail { witness: Witness },
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LienardReport {
    pub form: LienardForm,
    pub odd_g: Verdict,
    pub monotone_ratio: Verdict,
    pub sign_inside: Verdict,
    pub outside: Verdict,
    /// `F >= 0` on both outer strips, taken literally. Fails on the left strip,
    /// where `F` is negative; the sign test in `outside` is `xs * F >= 0`.
    pub outside_nonnegative_literal: Verdict,
}

impl LienardReport {
    pub fn all_pass(&self) -> bool {
        [&self.odd_g, &self.monotone_ratio, &self.sign_inside, &self.outside]
            .iter()
            .all(|v| v.passed())
    }
}

pub const GRID: usize = 400;
pub const RANDOM_POINTS: usize = 1000;
pub const SLACK: f64 = 1e-12;
const SEED: u64 = 0x5eed_11e4;

fn centers(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (i as f64 + 0.5) * (hi - lo) / n as f64)
}

fn tol(u: f64, v: f64) -> f64 {
    SLACK * u.abs().max(v.abs()).max(1.0)
}

struct Tally {
    checked: usize,
    fail: Option<Witness>,
}

impl Tally {
    fn new() -> Self {
        Tally { checked: 0, fail: None }
    }

    fn check(&mut self, ok: bool, xs: f64, rs: f64, detail: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.fail.is_none() {
            self.fail = Some(Witness { xs, rs, detail: detail() });
        }
    }

    fn verdict(self) -> Verdict {
        match self.fail {
            Some(witness) => Verdict::Fail { witness },
            None => Verdict::Pass { checked: self.checked },
        }
    }
}

/// Open `rs` sub-intervals on either side of zero.
fn rs_halves(f: &LienardForm) -> [(f64, f64); 2] {
    [(-f.r_star_prime, 0.0), (0.0, 1.0 - f.r_star_prime)]
}

pub fn check_lienard_conditions(f: &LienardForm) -> LienardReport {
    let nu = f.nu;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let rs_all = (-f.r_star_prime, 1.0 - f.r_star_prime);

    let mut odd = Tally::new();
    odd.check(f.G(-nu) == f.G(nu), -nu, 0.0, || "G(-nu) != G(nu)".into());
    for s in centers(0.0, 0.5, GRID) {
        let (gp, gm) = (f.g(s), f.g(-s));
        odd.check((gp + gm).abs() <= tol(gp, gm), s, 0.0, || format!("g(s)={gp}, g(-s)={gm}"));
    }

    // F/phi along rs: decreasing for xs in (-nu, 0), increasing for xs in (0, nu).
    let ratio = |xs: f64, rs: f64| f.F(xs, rs) / f.phi(rs);
    let mut mono = Tally::new();
    let pair = |t: &mut Tally, xs: f64, r0: f64, r1: f64| {
        let (h0, h1) = (ratio(xs, r0), ratio(xs, r1));
        let step = if xs < 0.0 { h0 - h1 } else { h1 - h0 };
        t.check(step > -tol(h0, h1), xs, r1, || format!("F/phi not monotone: {h0} -> {h1} from rs={r0}"));
    };
    for (xlo, xhi) in [(-nu, 0.0), (0.0, nu)] {
        for xs in centers(xlo, xhi, GRID) {
            for (lo, hi) in rs_halves(f) {
                let pts: Vec<f64> = centers(lo, hi, GRID).collect();
                for w in pts.windows(2) {
                    pair(&mut mono, xs, w[0], w[1]);
                }
            }
        }
    }
    for _ in 0..RANDOM_POINTS {
        let xs = rng.gen_range(-nu..nu);
        let (lo, hi) = rs_halves(f)[rng.gen_range(0..2)];
        let (mut r0, mut r1) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        if r0 > r1 {
            std::mem::swap(&mut r0, &mut r1);
        }
        if xs != 0.0 && r0 != 0.0 && r0 < r1 {
            pair(&mut mono, xs, r0, r1);
        }
    }

    let mut inside = Tally::new();
    let sign_in = |t: &mut Tally, xs: f64, rs: f64| {
        let v = f.g(xs) * f.F(xs, rs);
        t.check(v <= tol(v, 0.0), xs, rs, || format!("g*F={v} > 0"));
    };
    for xs in centers(-nu, nu, GRID) {
        for rs in centers(rs_all.0, rs_all.1, GRID) {
            sign_in(&mut inside, xs, rs);
        }
    }
    for _ in 0..RANDOM_POINTS {
        let (xs, rs) = (rng.gen_range(-nu..nu), rng.gen_range(rs_all.0..rs_all.1));
        sign_in(&mut inside, xs, rs);
    }

    let mut outside = Tally::new();
    let mut literal = Tally::new();
    let strips = [(-0.5, -nu), (nu, 0.5)];
    for (lo, hi) in strips {
        for rs in centers(rs_all.0, rs_all.1, GRID) {
            let xs_pts: Vec<f64> = centers(lo, hi, GRID).collect();
            for &xs in &xs_pts {
                let v = f.F(xs, rs);
                outside.check(xs * v >= -tol(xs * v, 0.0), xs, rs, || format!("xs*F={} < 0", xs * v));
                literal.check(v >= -tol(v, 0.0), xs, rs, || format!("F={v} < 0"));
            }
            for w in xs_pts.windows(2) {
                let (f0, f1) = (f.F(w[0], rs), f.F(w[1], rs));
                outside.check(f1 - f0 > -tol(f0, f1), w[1], rs, || format!("F decreasing: {f0} -> {f1}"));
            }
        }
    }
    for _ in 0..RANDOM_POINTS {
        let (lo, hi) = strips[rng.gen_range(0..2)];
        let rs = rng.gen_range(rs_all.0..rs_all.1);
        let (mut x0, mut x1) = (rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        if x0 > x1 {
            std::mem::swap(&mut x0, &mut x1);
        }
        let (f0, f1) = (f.F(x0, rs), f.F(x1, rs));
        outside.check(x0 * f0 >= -tol(x0 * f0, 0.0), x0, rs, || format!("xs*F={} < 0", x0 * f0));
        outside.check(f1 - f0 > -tol(f0, f1), x1, rs, || format!("F decreasing: {f0} -> {f1}"));
    }

    LienardReport {
        form: *f,
        odd_g: odd.verdict(),
        monotone_ratio: mono.verdict(),
        sign_inside: inside.verdict(),
        outside: outside.verdict(),
        outside_nonnegative_literal: literal.verdict(),
    }
}
