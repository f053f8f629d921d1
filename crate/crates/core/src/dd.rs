//! Double-double arithmetic (~31 significant decimal digits).
//!
//! Consistency defects of a k-step scheme scale like τ^k while the history
//! samples they are built from are O(1); at k = 5 and τ = 1/320 the defect
//! (~5e-14) sits below the f64 rounding floor of the divided difference
//! (~ε/τ ≈ 7e-14). Defect evaluation therefore runs on this extended scalar.
//!
//! The representation is the classical unevaluated sum hi + lo with
//! |lo| <= ulp(hi)/2, and the algorithms follow Dekker (1971) and the QD
//! library of Hida, Li & Bailey (2000).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// A number stored as the exact sum of two non-overlapping f64 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
pub const PI: Dd = Dd {
    hi: 3.141592653589793,
    lo: 1.2246467991473532e-16,
};
pub const TWO_PI: Dd = Dd {
    hi: 6.283185307179586,
    lo: 2.4492935982947064e-16,
};
pub const PI_2: Dd = Dd {
    hi: 1.5707963267948966,
    lo: 6.123233995736766e-17,
};
pub const LN2: Dd = Dd {
    hi: 0.6931471805599453,
    lo: 2.3190468138462996e-17,
};

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    #[inline]
    pub fn new(hi: f64, lo: f64) -> Self {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn powi(self, n: i32) -> Self {
        match n {
            0 => ONE,
            n if n < 0 => ONE / self.powi(-n),
            mut n => {
                let mut base = self;
                let mut acc = ONE;
                while n > 0 {
                    if n & 1 == 1 {
                        acc = acc * base;
                    }
                    base = base * base;
                    n >>= 1;
                }
                acc
            }
        }
    }

    /// exp(x) by argument reduction x = m ln2 + r, r scaled by 2^-9,
    /// Taylor summation and 9 squarings.
    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::from_f64(f64::INFINITY);
        }
        if self.hi < -709.0 {
            return ZERO;
        }
        let m = (self.hi / LN2.hi).round();
        let r = self - LN2 * Dd::from_f64(m);
        // scale into |r| <= ln2/1024 so the series converges in few terms
        let r = r * Dd::from_f64(1.0 / 512.0);
        // term_i = r^i/i!, built by exact-integer division to keep the
        // coefficients at full dd precision
        let mut term = r;
        let mut sum = ONE + r;
        for i in 2..24 {
            term = term * r / Dd::from_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-35 * sum.hi.abs() {
                break;
            }
        }
        for _ in 0..9 {
            sum = sum * sum;
        }
        // 2^m is exact in f64 for |m| < 1023
        sum * Dd::from_f64(f64::powi(2.0, m as i32))
    }

    /// sin(x) via reduction modulo 2π then π/2, Taylor on |r| <= π/4.
    pub fn sin(self) -> Self {
        let (s, _) = self.sincos();
        s
    }

    pub fn cos(self) -> Self {
        let (_, c) = self.sincos();
        c
    }

    pub fn sincos(self) -> (Self, Self) {
        // reduce modulo 2π
        let q = (self.hi / TWO_PI.hi).round();
        let x = self - TWO_PI * Dd::from_f64(q);
        // reduce modulo π/2
        let j = (x.hi / PI_2.hi).round();
        let r = x - PI_2 * Dd::from_f64(j);
        let (sr, cr) = (sin_taylor(r), cos_taylor(r));
        match (j as i64).rem_euclid(4) {
            0 => (sr, cr),
            1 => (cr, -sr),
            2 => (-sr, -cr),
            _ => (-cr, sr),
        }
    }
}

fn sin_taylor(x: Dd) -> Dd {
    if x.hi == 0.0 {
        return ZERO;
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut i = 1.0f64;
    loop {
        // term_{n+1} = -term_n · x² / ((i+1)(i+2)), divisor exact in f64
        term = -(term * x2) / Dd::from_f64((i + 1.0) * (i + 2.0));
        sum = sum + term;
        i += 2.0;
        if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-300) || i > 60.0 {
            break;
        }
    }
    sum
}

fn cos_taylor(x: Dd) -> Dd {
    let x2 = x * x;
    let mut term = ONE;
    let mut sum = ONE;
    let mut i = 0.0f64;
    loop {
        term = -(term * x2) / Dd::from_f64((i + 1.0) * (i + 2.0));
        sum = sum + term;
        i += 2.0;
        if term.hi.abs() < 1e-35 * sum.hi.abs().max(1e-300) || i > 60.0 {
            break;
        }
    }
    sum
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2b) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2b + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from_f64(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from_f64(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}
