//! Dense bivariate polynomials of degree at most 3 in each variable.

use std::ops::{Add, Mul, Neg, Sub};

const N: usize = 4;

/// `c[i][j]` is the coefficient of `x^i r^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly2 {
    c: [[f64; N]; N],
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 { c: [[0.0; N]; N] }
    }

    pub fn constant(v: f64) -> Self {
        Self::monomial(v, 0, 0)
    }

    pub fn monomial(coef: f64, i: usize, j: usize) -> Self {
        let mut p = Self::zero();
        p.c[i][j] = coef;
        p
    }

    pub fn x() -> Self {
        Self::monomial(1.0, 1, 0)
    }

    pub fn r() -> Self {
        Self::monomial(1.0, 0, 1)
    }

    pub fn coef(&self, i: usize, j: usize) -> f64 {
        self.c[i][j]
    }

    pub fn eval(&self, x: f64, r: f64) -> f64 {
        let mut acc = 0.0;
        for i in (0..N).rev() {
            let mut row = 0.0;
            for j in (0..N).rev() {
                row = row * r + self.c[i][j];
            }
            acc = acc * x + row;
        }
        acc
    }

    pub fn d_dx(&self) -> Self {
        let mut p = Self::zero();
        for i in 1..N {
            for j in 0..N {
                p.c[i - 1][j] = i as f64 * self.c[i][j];
            }
        }
        p
    }

    pub fn d_dr(&self) -> Self {
        let mut p = Self::zero();
        for i in 0..N {
            for j in 1..N {
                p.c[i][j - 1] = j as f64 * self.c[i][j];
            }
        }
        p
    }

    /// Mixed partial derivative, `nx` times in x and `nr` times in r.
    pub fn partial(&self, nx: usize, nr: usize) -> Self {
        let mut p = *self;
        for _ in 0..nx {
            p = p.d_dx();
        }
        for _ in 0..nr {
            p = p.d_dr();
        }
        p
    }
}

impl Add for Poly2 {
    type Output = Poly2;
    fn add(mut self, o: Poly2) -> Poly2 {
        for i in 0..N {
            for j in 0..N {
                self.c[i][j] += o.c[i][j];
            }
        }
        self
    }
}

impl Sub for Poly2 {
    type Output = Poly2;
    fn sub(self, o: Poly2) -> Poly2 {
        self + (-o)
    }
}

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(mut self) -> Poly2 {
        for row in self.c.iter_mut() {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        self
    }
}

impl Mul<f64> for Poly2 {
    type Output = Poly2;
    fn mul(mut self, s: f64) -> Poly2 {
        for row in self.c.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl Mul for Poly2 {
    type Output = Poly2;
    /// Panics if the product exceeds degree 3 in either variable.
    fn mul(self, o: Poly2) -> Poly2 {
        let mut p = Self::zero();
        for i in 0..N {
            for j in 0..N {
                if self.c[i][j] == 0.0 {
                    continue;
                }
                for k in 0..N {
                    for l in 0..N {
                        if o.c[k][l] == 0.0 {
                            continue;
                        }
                        assert!(i + k < N && j + l < N, "Poly2 degree overflow");
                        p.c[i + k][j + l] += self.c[i][j] * o.c[k][l];
                    }
                }
            }
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives_of_known_polynomial() {
        // p = 2 x^3 r - x r^2 + 5
        let p = Poly2::monomial(2.0, 3, 1) - Poly2::monomial(1.0, 1, 2) + Poly2::constant(5.0);
        let (x, r) = (0.3, 0.7);
        assert!((p.eval(x, r) - (2.0 * x * x * x * r - x * r * r + 5.0)).abs() < 1e-15);
        assert!((p.d_dx().eval(x, r) - (6.0 * x * x * r - r * r)).abs() < 1e-15);
        assert!((p.d_dr().eval(x, r) - (2.0 * x * x * x - 2.0 * x * r)).abs() < 1e-15);
        assert!((p.partial(2, 1).eval(x, r) - 12.0 * x).abs() < 1e-15);
        assert_eq!(p.partial(0, 3), Poly2::zero());
    }

    #[test]
    fn product_matches_pointwise() {
        let a = Poly2::x() * (Poly2::constant(1.0) - Poly2::x());
        let b = Poly2::x() * Poly2::r() + Poly2::constant(0.5);
        let (x, r) = (0.42, 0.13);
        assert!(((a * b).eval(x, r) - a.eval(x, r) * b.eval(x, r)).abs() < 1e-15);
    }
}
