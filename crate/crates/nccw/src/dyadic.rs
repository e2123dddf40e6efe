//! Exact arithmetic in `Z[1/2]` and the affine reparametrisations used by
//! connecting maps.
//!
//! All path bookkeeping is done with exact dyadic rationals; no floats
//! anywhere. Values are kept in lowest terms (odd numerator or exponent 0),
//! so equality is structural.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A dyadic rational `num / 2^exp` in lowest terms.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dyadic {
    num: i64,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };
    pub const HALF: Dyadic = Dyadic { num: 1, exp: 1 };

    pub fn new(num: i64, exp: u32) -> Dyadic {
        let mut d = Dyadic { num, exp };
        d.normalize();
        d
    }

    pub fn from_int(n: i64) -> Dyadic {
        Dyadic { num: n, exp: 0 }
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        while self.exp > 0 && self.num % 2 == 0 {
            self.num /= 2;
            self.exp -= 1;
        }
    }

    pub fn numerator(&self) -> i64 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_one(&self) -> bool {
        *self == Dyadic::ONE
    }

    pub fn is_half(&self) -> bool {
        *self == Dyadic::HALF
    }

    /// True for the three distinguished stop values 0, 1/2, 1.
    pub fn is_special(&self) -> bool {
        self.is_zero() || self.is_half() || self.is_one()
    }

    pub fn in_unit_interval(&self) -> bool {
        *self >= Dyadic::ZERO && *self <= Dyadic::ONE
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        let sum = a + b;
        debug_assert!(sum.abs() < i64::MAX as i128);
        Dyadic::new(sum as i64, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Dyadic {
        Dyadic {
            num: -self.num,
            exp: self.exp,
        }
    }

    pub fn halved(&self) -> Dyadic {
        Dyadic::new(self.num, self.exp + 1)
    }

    pub fn doubled(&self) -> Dyadic {
        if self.exp > 0 {
            Dyadic {
                num: self.num,
                exp: self.exp - 1,
            }
        } else {
            Dyadic {
                num: self.num * 2,
                exp: 0,
            }
        }
    }

    /// `1 - self`.
    pub fn complement(&self) -> Dyadic {
        Dyadic::ONE.sub(self)
    }

    pub fn min(self, other: Dyadic) -> Dyadic {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Dyadic) -> Dyadic {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Dyadic) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Dyadic) -> Ordering {
        let e = self.exp.max(other.exp);
        let a = (self.num as i128) << (e - self.exp);
        let b = (other.num as i128) << (e - other.exp);
        a.cmp(&b)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, 1i64 << self.exp)
        }
    }
}

/// The reparametrisations `lambda` appearing as block diagonal entries of
/// connecting maps, mapping the parameter of a level-(n+1) edge to a value
/// on a level-n edge.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub enum AffineMap {
    /// `t -> 1/2 + t/2`, image `[1/2, 1]`.
    PlusUpper,
    /// `t -> t/2`, image `[0, 1/2]`.
    PlusLower,
    /// `t -> 1 - t/2`, image `[1/2, 1]`, orientation reversing.
    MinusUpper,
    /// `t -> 1/2 - t/2`, image `[0, 1/2]`, orientation reversing.
    MinusLower,
    /// `t -> t`; the full-interval blocks used by the connectivity
    /// modification.
    Ident,
    /// `t -> 1/2` constant.
    ConstHalf,
}

impl AffineMap {
    pub fn apply(&self, t: &Dyadic) -> Dyadic {
        match self {
            AffineMap::PlusUpper => Dyadic::HALF.add(&t.halved()),
            AffineMap::PlusLower => t.halved(),
            AffineMap::MinusUpper => Dyadic::ONE.sub(&t.halved()),
            AffineMap::MinusLower => Dyadic::HALF.sub(&t.halved()),
            AffineMap::Ident => *t,
            AffineMap::ConstHalf => Dyadic::HALF,
        }
    }

    /// The unique preimage of `v`, if `v` lies in the image and the map is
    /// injective.
    pub fn invert(&self, v: &Dyadic) -> Option<Dyadic> {
        let t = match self {
            AffineMap::PlusUpper => v.sub(&Dyadic::HALF).doubled(),
            AffineMap::PlusLower => v.doubled(),
            AffineMap::MinusUpper => Dyadic::ONE.sub(v).doubled(),
            AffineMap::MinusLower => Dyadic::HALF.sub(v).doubled(),
            AffineMap::Ident => *v,
            AffineMap::ConstHalf => return None,
        };
        if t.in_unit_interval() {
            Some(t)
        } else {
            None
        }
    }

    /// Closed image interval as `(lo, hi)`.
    pub fn image(&self) -> (Dyadic, Dyadic) {
        match self {
            AffineMap::PlusUpper | AffineMap::MinusUpper => (Dyadic::HALF, Dyadic::ONE),
            AffineMap::PlusLower | AffineMap::MinusLower => (Dyadic::ZERO, Dyadic::HALF),
            AffineMap::Ident => (Dyadic::ZERO, Dyadic::ONE),
            AffineMap::ConstHalf => (Dyadic::HALF, Dyadic::HALF),
        }
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        let (lo, hi) = self.image();
        *v >= lo && *v <= hi
    }

    pub fn orientation_preserving(&self) -> bool {
        matches!(
            self,
            AffineMap::PlusUpper | AffineMap::PlusLower | AffineMap::Ident
        )
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, AffineMap::ConstHalf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(Dyadic::new(2, 2), Dyadic::HALF);
        assert_eq!(Dyadic::new(4, 2), Dyadic::ONE);
        assert_eq!(Dyadic::new(0, 7), Dyadic::ZERO);
        assert_eq!(Dyadic::new(6, 3), Dyadic::new(3, 2));
    }

    #[test]
    fn ordering_and_arithmetic() {
        let q = Dyadic::new(3, 2); // 3/4
        assert!(Dyadic::HALF < q && q < Dyadic::ONE);
        assert_eq!(q.add(&Dyadic::new(1, 2)), Dyadic::ONE);
        assert_eq!(q.sub(&Dyadic::HALF), Dyadic::new(1, 2));
        assert_eq!(q.halved(), Dyadic::new(3, 3));
        assert_eq!(Dyadic::new(3, 3).doubled(), q);
        assert_eq!(q.complement(), Dyadic::new(1, 2));
    }

    #[test]
    fn affine_round_trips() {
        let maps = [
            AffineMap::PlusUpper,
            AffineMap::PlusLower,
            AffineMap::MinusUpper,
            AffineMap::MinusLower,
            AffineMap::Ident,
        ];
        for m in maps {
            for num in 0..=16 {
                let t = Dyadic::new(num, 4);
                let v = m.apply(&t);
                assert!(m.contains(&v));
                assert_eq!(m.invert(&v), Some(t), "{m:?} at {t}");
            }
        }
    }

    #[test]
    fn affine_endpoint_table() {
        // The endpoint values that drive the boundary-map case analysis.
        assert_eq!(AffineMap::PlusUpper.apply(&Dyadic::ZERO), Dyadic::HALF);
        assert_eq!(AffineMap::PlusUpper.apply(&Dyadic::ONE), Dyadic::ONE);
        assert_eq!(AffineMap::PlusLower.apply(&Dyadic::ZERO), Dyadic::ZERO);
        assert_eq!(AffineMap::PlusLower.apply(&Dyadic::ONE), Dyadic::HALF);
        assert_eq!(AffineMap::MinusUpper.apply(&Dyadic::ZERO), Dyadic::ONE);
        assert_eq!(AffineMap::MinusUpper.apply(&Dyadic::ONE), Dyadic::HALF);
        assert_eq!(AffineMap::MinusLower.apply(&Dyadic::ZERO), Dyadic::HALF);
        assert_eq!(AffineMap::MinusLower.apply(&Dyadic::ONE), Dyadic::ZERO);
    }
}
