//! Symbolic index sets built from finite lists and corridor sequences by
//! products `A·B = {ab}` and unions. Everything is evaluated lazily and
//! only up to an explicit bound.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prime_pool::{EDeltaSeq, Sieve, SignPattern};

pub const DEFAULT_ENUM_CAP: usize = 20_000_000;

/// Record that a side condition was checked, and how far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    /// Checked over all elements (or products) `<= bound`.
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetExpr {
    Empty,
    Finite {
        elements: Vec<u64>,
    },
    Generated {
        seq: EDeltaSeq,
    },
    Product {
        left: Arc<SetExpr>,
        right: Arc<SetExpr>,
        /// Injectivity of `(a, b) -> ab`.
        witness: Option<Witness>,
    },
    Union {
        left: Arc<SetExpr>,
        right: Arc<SetExpr>,
        /// Disjointness of the two sides.
        witness: Option<Witness>,
    },
}

/// Two pairs with the same product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Collision {
    pub a1: u64,
    pub b1: u64,
    pub a2: u64,
    pub b2: u64,
}

impl SetExpr {
    /// A finite set. Values are sorted; zero or repeated values are rejected.
    pub fn finite(mut elements: Vec<u64>) -> Result<SetExpr> {
        elements.sort_unstable();
        if elements.first() == Some(&0) {
            return Err(Error::InvalidInput("index sets hold positive integers".into()));
        }
        if let Some(w) = elements.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!("repeated element {}", w[0])));
        }
        Ok(if elements.is_empty() {
            SetExpr::Empty
        } else {
            SetExpr::Finite { elements }
        })
    }

    pub fn singleton(n: u64) -> SetExpr {
        SetExpr::Finite { elements: vec![n] }
    }

    pub fn generated(seq: EDeltaSeq) -> SetExpr {
        SetExpr::Generated { seq }
    }

    pub fn product(left: SetExpr, right: SetExpr) -> SetExpr {
        SetExpr::Product {
            left: Arc::new(left),
            right: Arc::new(right),
            witness: None,
        }
    }

    pub fn union(left: SetExpr, right: SetExpr) -> SetExpr {
        SetExpr::Union {
            left: Arc::new(left),
            right: Arc::new(right),
            witness: None,
        }
    }

    /// Product carrying an injectivity witness checked up to `bound`; a
    /// collision is a hard error.
    pub fn product_checked(sieve: &Sieve, left: SetExpr, right: SetExpr, bound: u64) -> Result<SetExpr> {
        if let Some(c) = injectivity_check(sieve, &left, &right, bound)? {
            return Err(Error::Witness(format!(
                "product not injective: {}*{} = {}*{}",
                c.a1, c.b1, c.a2, c.b2
            )));
        }
        Ok(SetExpr::Product {
            left: Arc::new(left),
            right: Arc::new(right),
            witness: Some(Witness { bound }),
        })
    }

    /// Union carrying a disjointness witness checked up to `bound`.
    pub fn union_checked(sieve: &Sieve, left: SetExpr, right: SetExpr, bound: u64) -> Result<SetExpr> {
        if let Some(n) = disjointness_check(sieve, &left, &right, bound)? {
            return Err(Error::Witness(format!("union sides share element {n}")));
        }
        Ok(SetExpr::Union {
            left: Arc::new(left),
            right: Arc::new(right),
            witness: Some(Witness { bound }),
        })
    }

    pub fn is_empty_expr(&self) -> bool {
        matches!(self, SetExpr::Empty)
    }

    /// Whether the expression is finite (no generated sequence anywhere).
    pub fn is_finite(&self) -> bool {
        match self {
            SetExpr::Empty | SetExpr::Finite { .. } => true,
            SetExpr::Generated { .. } => false,
            SetExpr::Product { left, right, .. } | SetExpr::Union { left, right, .. } => {
                left.is_finite() && right.is_finite()
            }
        }
    }

    /// Whether every element is odd, i.e. every term is positive.
    pub fn all_odd(&self) -> bool {
        match self {
            SetExpr::Empty => true,
            SetExpr::Finite { elements } => elements.iter().all(|n| n % 2 == 1),
            SetExpr::Generated { seq } => seq.sign_from(0) == SignPattern::Positive,
            SetExpr::Product { left, right, .. } | SetExpr::Union { left, right, .. } => {
                left.all_odd() && right.all_odd()
            }
        }
    }

    /// Smallest element, if cheaply known.
    pub fn min_element(&self) -> Option<u64> {
        match self {
            SetExpr::Empty => None,
            SetExpr::Finite { elements } => elements.first().copied(),
            SetExpr::Generated { seq } => Some(seq.start),
            SetExpr::Product { left, right, .. } => left.min_element()?.checked_mul(right.min_element()?),
            SetExpr::Union { left, right, .. } => match (left.min_element(), right.min_element()) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            },
        }
    }

    /// Largest element of a finite expression, as an exact 128-bit value
    /// (`None` if infinite or beyond 128 bits).
    pub fn max_element(&self) -> Option<u128> {
        match self {
            SetExpr::Empty => Some(0),
            SetExpr::Finite { elements } => elements.last().map(|&n| n as u128),
            SetExpr::Generated { .. } => None,
            SetExpr::Product { left, right, .. } => left.max_element()?.checked_mul(right.max_element()?),
            SetExpr::Union { left, right, .. } => Some(left.max_element()?.max(right.max_element()?)),
        }
    }
}

/// Structural index `i` of the class the expression belongs to: finite lists
/// and corridor sequences are level 1, and `A·B ∪ C` with `A` at level 1 is
/// one above `max(B, C)`. A bare union `X ∪ Y` is read as `{1}·X ∪ Y`, and a
/// product with a deeper left factor adds the two levels.
pub fn class_depth(e: &SetExpr) -> usize {
    match e {
        SetExpr::Empty | SetExpr::Finite { .. } | SetExpr::Generated { .. } => 1,
        SetExpr::Product { left, right, .. } => class_depth(left) + class_depth(right),
        SetExpr::Union { left, right, .. } => {
            if let SetExpr::Product { left: a, right: b, .. } = left.as_ref() {
                if class_depth(a) == 1 {
                    return 1 + class_depth(b).max(class_depth(right));
                }
            }
            if let SetExpr::Product { left: a, right: b, .. } = right.as_ref() {
                if class_depth(a) == 1 {
                    return 1 + class_depth(b).max(class_depth(left));
                }
            }
            1 + class_depth(left).max(class_depth(right))
        }
    }
}

/// Exactly the elements of `e` that are `<= bound`, sorted and distinct.
pub fn enumerate(sieve: &Sieve, e: &SetExpr, bound: u64) -> Result<Vec<u64>> {
    enumerate_capped(sieve, e, bound, DEFAULT_ENUM_CAP)
}

pub fn enumerate_capped(sieve: &Sieve, e: &SetExpr, bound: u64, cap: usize) -> Result<Vec<u64>> {
    let out = match e {
        SetExpr::Empty => Vec::new(),
        SetExpr::Finite { elements } => {
            let k = elements.partition_point(|&n| n <= bound);
            elements[..k].to_vec()
        }
        SetExpr::Generated { seq } => seq.elements_up_to(sieve, bound)?,
        SetExpr::Product { left, right, .. } => {
            let a = enumerate_capped(sieve, left, bound, cap)?;
            let b_bound = a.first().map_or(0, |&m| bound / m);
            let b = enumerate_capped(sieve, right, b_bound, cap)?;
            let mut out = Vec::new();
            for &x in &a {
                for &y in &b {
                    match x.checked_mul(y) {
                        Some(p) if p <= bound => out.push(p),
                        _ => break,
                    }
                }
                if out.len() > cap {
                    return Err(Error::capacity("enumeration size", cap as u64));
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        }
        SetExpr::Union { left, right, .. } => {
            let a = enumerate_capped(sieve, left, bound, cap)?;
            let b = enumerate_capped(sieve, right, bound, cap)?;
            merge_dedup(&a, &b)
        }
    };
    if out.len() > cap {
        return Err(Error::capacity("enumeration size", cap as u64));
    }
    Ok(out)
}

fn merge_dedup(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x <= y => {
                i += 1;
                if x == y {
                    j += 1;
                }
                x
            }
            (Some(_), Some(&y)) => {
                j += 1;
                y
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

fn divisors(sieve: &Sieve, n: u64) -> Result<Vec<u64>> {
    let mut m = n;
    let mut factors = Vec::new();
    while m.is_multiple_of(2) {
        factors.push(2);
        m /= 2;
    }
    factors.extend(sieve.odd_prime_factors(m)?);
    let mut divs = vec![1u64];
    let mut i = 0;
    while i < factors.len() {
        let q = factors[i];
        let mut mult = 0;
        while i < factors.len() && factors[i] == q {
            mult += 1;
            i += 1;
        }
        let current = divs.clone();
        let mut pw = 1u64;
        for _ in 0..mult {
            pw *= q;
            divs.extend(current.iter().map(|d| d * pw));
        }
    }
    divs.sort_unstable();
    Ok(divs)
}

/// Membership; products are decided by searching divisor splits `n = a·b`.
pub fn member(sieve: &Sieve, e: &SetExpr, n: u64) -> Result<bool> {
    if n == 0 {
        return Ok(false);
    }
    match e {
        SetExpr::Empty => Ok(false),
        SetExpr::Finite { elements } => Ok(elements.binary_search(&n).is_ok()),
        SetExpr::Generated { seq } => Ok(seq.elements_up_to(sieve, n)?.binary_search(&n).is_ok()),
        SetExpr::Product { left, right, .. } => {
            for a in divisors(sieve, n)? {
                if member(sieve, left, a)? && member(sieve, right, n / a)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        SetExpr::Union { left, right, .. } => Ok(member(sieve, left, n)? || member(sieve, right, n)?),
    }
}

/// Checks that `(x, y) -> xy` is injective on pairs with product `<= bound`.
pub fn injectivity_check(sieve: &Sieve, a: &SetExpr, b: &SetExpr, bound: u64) -> Result<Option<Collision>> {
    let xs = enumerate(sieve, a, bound)?;
    if xs.len() <= 1 {
        return Ok(None);
    }
    let ys = enumerate(sieve, b, bound / xs[0])?;
    let mut seen: HashMap<u64, (u64, u64)> = HashMap::new();
    for &x in &xs {
        for &y in &ys {
            let Some(p) = x.checked_mul(y).filter(|&p| p <= bound) else {
                break;
            };
            if let Some(&(a1, b1)) = seen.get(&p) {
                return Ok(Some(Collision { a1, b1, a2: x, b2: y }));
            }
            seen.insert(p, (x, y));
        }
    }
    Ok(None)
}

/// First shared element `<= bound`, if any.
pub fn disjointness_check(sieve: &Sieve, a: &SetExpr, b: &SetExpr, bound: u64) -> Result<Option<u64>> {
    if a.is_empty_expr() || b.is_empty_expr() {
        return Ok(None);
    }
    let xs = enumerate(sieve, a, bound)?;
    let ys = enumerate(sieve, b, bound)?;
    let (mut i, mut j) = (0, 0);
    while i < xs.len() && j < ys.len() {
        match xs[i].cmp(&ys[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Ok(Some(xs[i])),
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(v: &[u64]) -> SetExpr {
        SetExpr::finite(v.to_vec()).unwrap()
    }

    fn sieve() -> Sieve {
        Sieve::new(10_000, 10_000_000).unwrap()
    }

    #[test]
    fn enumerate_examples() {
        let s = sieve();
        let p = SetExpr::product(fin(&[3, 5]), fin(&[7, 11]));
        assert_eq!(enumerate(&s, &p, 100).unwrap(), vec![21, 33, 35, 55]);
        assert_eq!(
            enumerate(&s, &SetExpr::union(fin(&[3]), fin(&[5])), 10).unwrap(),
            vec![3, 5]
        );
        assert!(enumerate(&s, &SetExpr::Empty, 1000).unwrap().is_empty());
    }

    #[test]
    fn member_examples() {
        let s = sieve();
        let p = SetExpr::product(fin(&[3, 5]), fin(&[7, 11]));
        assert!(member(&s, &p, 35).unwrap());
        assert!(!member(&s, &p, 15).unwrap());
        let u = SetExpr::union(p, fin(&[21]));
        assert!(member(&s, &u, 21).unwrap());
    }

    #[test]
    fn injectivity_examples() {
        let s = sieve();
        assert_eq!(injectivity_check(&s, &fin(&[3, 5]), &fin(&[7, 11]), 100).unwrap(), None);
        let c = injectivity_check(&s, &fin(&[2, 4]), &fin(&[4, 8]), 50)
            .unwrap()
            .unwrap();
        assert_eq!(c.a1 * c.b1, c.a2 * c.b2);
        assert_eq!(c.a1 * c.b1, 16);
        assert_eq!(
            injectivity_check(&s, &fin(&[3]), &fin(&[1, 2, 3, 6]), 100).unwrap(),
            None
        );
        assert!(SetExpr::product_checked(&s, fin(&[2, 4]), fin(&[4, 8]), 50).is_err());
    }

    #[test]
    fn disjointness_examples() {
        let s = sieve();
        assert_eq!(
            disjointness_check(&s, &fin(&[3, 7]), &fin(&[5, 11]), 100).unwrap(),
            None
        );
        assert_eq!(disjointness_check(&s, &fin(&[3, 7]), &fin(&[7]), 100).unwrap(), Some(7));
        assert_eq!(
            disjointness_check(&s, &fin(&[3, 7]), &SetExpr::Empty, 100).unwrap(),
            None
        );
    }

    #[test]
    fn depth_examples() {
        assert_eq!(class_depth(&fin(&[3, 5])), 1);
        assert_eq!(class_depth(&SetExpr::Empty), 1);
        let w2 = SetExpr::union(SetExpr::product(fin(&[3]), fin(&[5])), fin(&[7]));
        assert_eq!(class_depth(&w2), 2);
        let w3 = SetExpr::union(SetExpr::product(fin(&[11]), w2.clone()), w2);
        assert_eq!(class_depth(&w3), 3);
    }

    #[test]
    fn finite_rejects_repeats() {
        assert!(SetExpr::finite(vec![3, 3]).is_err());
        assert!(SetExpr::finite(vec![0, 3]).is_err());
        assert_eq!(SetExpr::finite(vec![]).unwrap(), SetExpr::Empty);
        assert_eq!(fin(&[5, 3]), SetExpr::Finite { elements: vec![3, 5] });
    }

    #[test]
    fn json_tree_is_tagged() {
        let e = SetExpr::union(SetExpr::product(fin(&[3]), fin(&[5])), SetExpr::Empty);
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["type"], "union");
        assert_eq!(v["left"]["type"], "product");
        assert_eq!(v["left"]["right"]["elements"][0], 5);
        let back: SetExpr = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
