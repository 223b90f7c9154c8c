//! 2x2 real matrices and their spectra.

use num_complex::Complex64;

pub type Mat2 = [[f64; 2]; 2];

pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Eigenvalues ordered by descending real part, then descending imaginary part.
pub fn eigenvalues(m: &Mat2) -> [Complex64; 2] {
    let t = trace(m);
    let d = det(m);
    let disc = t * t / 4.0 - d;
    if disc >= 0.0 {
        let s = disc.sqrt();
        // avoid cancellation in the smaller root
        let big = t / 2.0 + if t >= 0.0 { s } else { -s };
        let small = if big != 0.0 { d / big } else { t / 2.0 - s };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Complex64::new(hi, 0.0), Complex64::new(lo, 0.0)]
    } else {
        let w = (-disc).sqrt();
        [Complex64::new(t / 2.0, w), Complex64::new(t / 2.0, -w)]
    }
}

/// |λ² − tr λ + det| for a candidate eigenvalue.
pub fn char_poly_residual(m: &Mat2, lambda: Complex64) -> f64 {
    (lambda * lambda - lambda * trace(m) + det(m)).norm()
}

pub fn mat_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_and_complex_spectra() {
        let m = [[2.0, 1.0], [0.0, -3.0]];
        let e = eigenvalues(&m);
        assert_eq!(e[0], Complex64::new(2.0, 0.0));
        assert_eq!(e[1], Complex64::new(-3.0, 0.0));
        let rot = [[0.1, -2.0], [2.0, 0.1]];
        let e = eigenvalues(&rot);
        assert!((e[0] - Complex64::new(0.1, 2.0)).norm() < 1e-15);
        for l in e {
            assert!(char_poly_residual(&rot, l) < 1e-12);
        }
    }
}
