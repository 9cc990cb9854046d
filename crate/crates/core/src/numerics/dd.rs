//! Minimal double-double arithmetic (~32 significant digits).
//!
//! Used by the Gaver–Stehfest summation, whose alternating weights reach ~1e8
//! at order 14 and wipe out half of an f64's mantissa if summed naively.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    let e = (a - (s - v)) + (b - v);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// Dekker split into two 26-bit halves.
#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = 134_217_729.0 * a; // 2^27 + 1
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ahi, alo) = split(a);
    let (bhi, blo) = split(b);
    let e = ((ahi * bhi - p) + ahi * blo + alo * bhi) + alo * blo;
    (p, e)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn from_i128(x: i128) -> Dd {
        let hi = x as f64;
        // hi rounds to the nearest representable; the remainder fits an f64 exactly
        // for |x| < 2^106, far beyond the Stehfest weight range.
        let rem = (x - hi as i128) as f64;
        let (h, l) = quick_two_sum(hi, rem);
        Dd { hi: h, lo: l }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div(self, other: Dd) -> Dd {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from_f64(q1)));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.mul(Dd::from_f64(q2)));
        let q3 = r2.hi / other.hi;
        let (s, e) = two_sum(q1, q2);
        let (hi, lo) = quick_two_sum(s, e + q3);
        Dd { hi, lo }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            Dd {
                hi: -self.hi,
                lo: -self.lo,
            }
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_recovers_cancelled_bits() {
        // (1e16 + 1) - 1e16 = 1 exactly in double-double.
        let a = Dd::from_f64(1e16).add(Dd::from_f64(1.0));
        let d = a.sub(Dd::from_f64(1e16));
        assert_eq!(d.to_f64(), 1.0);
    }

    #[test]
    fn mul_and_div_roundtrip() {
        let a = Dd::from_f64(std::f64::consts::PI);
        let b = Dd::from_f64(std::f64::consts::E);
        let c = a.mul(b).div(b);
        assert!((c.to_f64() - std::f64::consts::PI).abs() < 1e-16);
        assert!(c.sub(a).abs().to_f64() < 1e-30);
    }

    #[test]
    fn from_i128_is_exact() {
        let x: i128 = 123_456_789_012_345_678_901_234_567;
        let d = Dd::from_i128(x);
        // Reconstruct: hi and lo parts sum to x exactly.
        let back = d.hi as i128 + d.lo as i128;
        assert_eq!(back, x);
    }
}
