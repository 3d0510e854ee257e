//! Modified Bessel functions of the second kind, orders 0 and 1.

use std::f64::consts::PI;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `K₀(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0, "K0 needs a positive argument");
    if x < 2.0 {
        series(x).0
    } else {
        steed(x).0
    }
}

/// `K₁(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 needs a positive argument");
    if x < 2.0 {
        series(x).1
    } else {
        steed(x).1
    }
}

// Power series around the origin: K0 from I0 and the harmonic numbers, K1
// from I1 and digamma sums.
fn series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let l = (0.5 * x).ln();
    // term0 = y^k/(k!)², term1 = y^k/(k!(k+1)!)
    let (mut term0, mut term1) = (1.0, 1.0);
    let (mut i0, mut i1) = (0.0, 0.0);
    let (mut s0, mut s1) = (0.0, 0.0);
    let mut harmonic = 0.0;
    // psi(k+1) + psi(k+2)
    let mut psi = -2.0 * EULER_GAMMA + 1.0;
    for k in 0..200 {
        i0 += term0;
        i1 += term1;
        s0 += term0 * harmonic;
        s1 += term1 * psi;
        let kf = k as f64;
        term0 *= y / ((kf + 1.0) * (kf + 1.0));
        term1 *= y / ((kf + 1.0) * (kf + 2.0));
        harmonic += 1.0 / (kf + 1.0);
        psi += 1.0 / (kf + 1.0) + 1.0 / (kf + 2.0);
        if term0 < EPS * i0 && term1 < EPS * i1 {
            break;
        }
    }
    let k0 = -(l + EULER_GAMMA) * i0 + s0;
    let k1 = 1.0 / x + l * 0.5 * x * i1 - 0.25 * x * s1;
    (k0, k1)
}

// Steed's continued fraction for the ratio K1/K0 together with the
// normalising sum, valid for moderate and large arguments.
fn steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    // K_nu(x) = ∫_0^∞ exp(-x cosh t) cosh(nu t) dt by the trapezoid rule,
    // which converges geometrically for this integrand.
    fn integral_oracle(nu: f64, x: f64) -> f64 {
        let t_max = (800.0 / x).acosh() + 1.0;
        let n = 40_000;
        let h = t_max / n as f64;
        let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
        let mut s = 0.5 * (f(0.0) + f(t_max));
        for i in 1..n {
            s += f(i as f64 * h);
        }
        s * h
    }

    #[test]
    fn reference_values() {
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((bessel_k1(1.0) - 0.601_907_230_197_234_6).abs() < 1e-15);
        assert!((bessel_k0(2.0) - 0.113_893_872_749_533_4).abs() < 1e-15);
        assert!((bessel_k1(2.0) - 0.139_865_881_816_522_4).abs() < 1e-15);
    }

    #[test]
    fn matches_integral_oracle() {
        let mut x: f64 = 1e-6;
        while x <= 30.0 {
            for (nu, got) in [(0.0, bessel_k0(x)), (1.0, bessel_k1(x))] {
                let want = integral_oracle(nu, x);
                assert!(
                    ((got - want) / want).abs() < 1e-9,
                    "nu={nu} x={x}: {got} vs {want}"
                );
            }
            x *= 1.37;
        }
    }

    #[test]
    fn continuous_at_crossover() {
        let (lo0, lo1) = series(2.0);
        let (hi0, hi1) = steed(2.0);
        assert!(((lo0 - hi0) / hi0).abs() < 1e-13);
        assert!(((lo1 - hi1) / hi1).abs() < 1e-13);
    }
}
