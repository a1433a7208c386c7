//! Closed-form 2x2 matrix exponential.

pub type Mat2 = [[f64; 2]; 2];

pub fn mat_vec(a: &Mat2, x: [f64; 2]) -> [f64; 2] {
    [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn scale(a: &Mat2, s: f64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// `sinh(q) / q` and `cosh(q)` for `q^2 = s` of either sign.
fn hyperbolic_pair(s: f64) -> (f64, f64) {
    if s.abs() < 1e-6 {
        // q^4 terms are below rounding here
        let sinhc = 1.0 + s / 6.0 + s * s / 120.0;
        let cosh = 1.0 + s / 2.0 + s * s / 24.0;
        (sinhc, cosh)
    } else if s > 0.0 {
        let q = s.sqrt();
        (q.sinh() / q, q.cosh())
    } else {
        let q = (-s).sqrt();
        (q.sin() / q, q.cos())
    }
}

/// `exp(A)`. With nonnegative off-diagonal entries every entry of the result
/// is nonnegative, also in floating point.
pub fn expm2(a: &Mat2) -> Mat2 {
    let tau = 0.5 * (a[0][0] + a[1][1]);
    let delta = 0.5 * (a[0][0] - a[1][1]);
    let bc = a[0][1] * a[1][0];
    let s = delta * delta + bc;
    let et = tau.exp();
    if s > 1e-6 && bc >= 0.0 {
        // real eigenvalues tau +- q; this form has no cancellation on the
        // diagonal because q >= |delta|
        let q = s.sqrt();
        let (ep, em) = ((tau + q).exp(), (tau - q).exp());
        let half = 0.5 / q;
        let off = et * (q.sinh() / q);
        return [
            [half * (ep * (q + delta) + em * (q - delta)), off * a[0][1]],
            [off * a[1][0], half * (ep * (q - delta) + em * (q + delta))],
        ];
    }
    let (sinhc, cosh) = hyperbolic_pair(s);
    [[et * (cosh + delta * sinhc), et * sinhc * a[0][1]], [et * sinhc * a[1][0], et * (cosh - delta * sinhc)]]
}
