use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Closed interval `[lo, hi]` of f64 values, with every operation rounded
/// outward. Exact results (as detected by error-free transformations) stay
/// exact, so `[1,1] * [3,3]` is `[3,3]`.
///
/// Serializes as `{"lo": "...", "hi": "..."}` with shortest round-trip
/// decimal strings.
#[derive(Clone, Copy, PartialEq)]
pub struct Enclosure {
    lo: f64,
    hi: f64,
}

#[derive(Serialize, Deserialize)]
struct Wire<T> {
    lo: T,
    hi: T,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Bound {
    Text(String),
    Number(f64),
}

impl Bound {
    fn value<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            Bound::Number(x) => Ok(x),
            Bound::Text(s) => s
                .trim()
                .parse()
                .map_err(|_| E::custom(format!("bad enclosure bound {s:?}"))),
        }
    }
}

impl Serialize for Enclosure {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        Wire {
            lo: format!("{:?}", self.lo),
            hi: format!("{:?}", self.hi),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Enclosure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = Wire::<Bound>::deserialize(d)?;
        let (lo, hi) = (w.lo.value()?, w.hi.value()?);
        if !(lo <= hi) {
            return Err(D::Error::custom(format!("enclosure bounds out of order: {lo} > {hi}")));
        }
        Ok(Enclosure { lo, hi })
    }
}

impl fmt::Debug for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// `a + b` rounded toward -inf and +inf.
fn add_dir(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    if !s.is_finite() {
        return (s, s);
    }
    // TwoSum: a + b = s + e exactly
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    if e > 0.0 {
        (s, s.next_up())
    } else if e < 0.0 {
        (s.next_down(), s)
    } else {
        (s, s)
    }
}

/// `a * b` rounded toward -inf and +inf.
fn mul_dir(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    if !p.is_finite() {
        return (p, p);
    }
    let e = a.mul_add(b, -p);
    if e > 0.0 {
        (p, p.next_up())
    } else if e < 0.0 {
        (p.next_down(), p)
    } else {
        (p, p)
    }
}

impl Enclosure {
    pub const ZERO: Enclosure = Enclosure { lo: 0.0, hi: 0.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "enclosure bounds out of order: {lo} > {hi}");
        Enclosure { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Enclosure { lo: x, hi: x }
    }

    /// `[x - r, x + r]`, rounded outward.
    pub fn around(x: f64, r: f64) -> Self {
        let r = r.abs();
        Enclosure {
            lo: add_dir(x, -r).0,
            hi: add_dir(x, r).1,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Upper bound on `hi - lo`.
    pub fn width(&self) -> f64 {
        add_dir(self.hi, -self.lo).1
    }

    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) / 2.0
        }
    }

    /// Largest absolute value in the enclosure.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the enclosure.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset_of(&self, lo: f64, hi: f64) -> bool {
        lo <= self.lo && self.hi <= hi
    }

    pub fn overlaps(&self, other: &Enclosure) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }

    /// Certified sign, or `None` if the enclosure touches zero.
    pub fn sign(&self) -> Option<f64> {
        if self.is_positive() {
            Some(1.0)
        } else if self.is_negative() {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn hull(&self, other: &Enclosure) -> Enclosure {
        Enclosure {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Intersection of two enclosures of the same quantity.
    pub fn intersect(&self, other: &Enclosure) -> Option<Enclosure> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Enclosure { lo, hi })
    }

    pub fn scale(&self, k: f64) -> Enclosure {
        *self * Enclosure::point(k)
    }
}

impl Add for Enclosure {
    type Output = Enclosure;
    fn add(self, rhs: Enclosure) -> Enclosure {
        Enclosure {
            lo: add_dir(self.lo, rhs.lo).0,
            hi: add_dir(self.hi, rhs.hi).1,
        }
    }
}

impl Neg for Enclosure {
    type Output = Enclosure;
    fn neg(self) -> Enclosure {
        Enclosure {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Sub for Enclosure {
    type Output = Enclosure;
    fn sub(self, rhs: Enclosure) -> Enclosure {
        self + (-rhs)
    }
}

impl Mul for Enclosure {
    type Output = Enclosure;
    fn mul(self, rhs: Enclosure) -> Enclosure {
        let cands = [
            mul_dir(self.lo, rhs.lo),
            mul_dir(self.lo, rhs.hi),
            mul_dir(self.hi, rhs.lo),
            mul_dir(self.hi, rhs.hi),
        ];
        let lo = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let hi = cands.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        Enclosure { lo, hi }
    }
}

impl std::iter::Sum for Enclosure {
    fn sum<I: Iterator<Item = Enclosure>>(iter: I) -> Enclosure {
        iter.fold(Enclosure::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operations_stay_exact() {
        let a = Enclosure::point(1.0);
        let b = Enclosure::point(3.0);
        assert_eq!(a * b, Enclosure::point(3.0));
        assert_eq!(Enclosure::point(2.0) * Enclosure::point(-1.0), Enclosure::point(-2.0));
        assert_eq!(
            Enclosure::new(-1.0, 2.0) * Enclosure::point(3.0),
            Enclosure::new(-3.0, 6.0)
        );
        assert_eq!(Enclosure::point(0.5) + Enclosure::point(0.25), Enclosure::point(0.75));
    }

    #[test]
    fn inexact_operations_round_outward() {
        let tenth = Enclosure::point(0.1);
        let s = tenth + Enclosure::point(0.2);
        // 0.1 + 0.2 is not representable: the enclosure must straddle the true sum
        assert!(s.lo() < s.hi());
        let third = Enclosure::point(1.0 / 3.0) * Enclosure::point(3.0);
        assert!(third.lo() <= 1.0 / 3.0 * 3.0 && third.hi() >= third.lo());
    }

    #[test]
    fn json_uses_decimal_strings() {
        let e = Enclosure::new(-0.1, 1e-300);
        let s = serde_json::to_string(&e).unwrap();
        assert_eq!(s, r#"{"lo":"-0.1","hi":"1e-300"}"#);
        assert_eq!(serde_json::from_str::<Enclosure>(&s).unwrap(), e);
        assert_eq!(
            serde_json::from_str::<Enclosure>(r#"{"lo":1,"hi":2}"#).unwrap(),
            Enclosure::new(1.0, 2.0)
        );
        assert!(serde_json::from_str::<Enclosure>(r#"{"lo":"2","hi":"1"}"#).is_err());
    }

    #[test]
    fn signs_and_magnitudes() {
        let e = Enclosure::new(-2.0, 1.0);
        assert_eq!(e.mag(), 2.0);
        assert_eq!(e.mig(), 0.0);
        assert_eq!(e.sign(), None);
        assert_eq!(Enclosure::new(0.5, 1.0).sign(), Some(1.0));
        assert_eq!(Enclosure::new(-1.0, -0.5).mig(), 0.5);
    }
}
