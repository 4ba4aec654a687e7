//! Extended real line: finite floats plus the two infinities, with a total
//! order and the arithmetic needed by walk-value computations.
//!
//! `Finite(f)` always holds a finite float; constructors normalize IEEE
//! infinities into the symbolic variants so comparisons never see them.

use std::cmp::Ordering;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtendedReal::{Finite, NegInf, PosInf};

impl ExtendedReal {
    /// Normalizing constructor. NaN is rejected loudly: a NaN edge weight
    /// means the model evaluation already went wrong upstream.
    pub fn new(v: f64) -> Self {
        assert!(!v.is_nan(), "NaN cannot enter extended-real arithmetic");
        if v == f64::INFINITY {
            PosInf
        } else if v == f64::NEG_INFINITY {
            NegInf
        } else {
            Finite(v)
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn as_finite(self) -> Option<f64> {
        match self {
            Finite(v) => Some(v),
            _ => None,
        }
    }

    /// Collapse to a plain float, mapping the symbolic infinities to IEEE ones.
    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            Finite(v) => v,
            PosInf => f64::INFINITY,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            NegInf => PosInf,
            Finite(v) => Finite(-v),
            PosInf => NegInf,
        }
    }

    /// Addition as used when extending a walk by one edge: the finite edge
    /// weight cannot rescue an infinite prefix, so infinities absorb.
    pub fn add_finite(self, w: f64) -> Self {
        match self {
            Finite(v) => ExtendedReal::new(v + w),
            inf => inf,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp_total(other))
    }
}

impl ExtendedReal {
    /// Total order: NegInf < any finite < PosInf.
    pub fn cmp_total(&self, other: &Self) -> Ordering {
        match (self, other) {
            (NegInf, NegInf) | (PosInf, PosInf) => Ordering::Equal,
            (NegInf, _) | (_, PosInf) => Ordering::Less,
            (_, NegInf) | (PosInf, _) => Ordering::Greater,
            (Finite(a), Finite(b)) => a.partial_cmp(b).expect("finite floats compare"),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            Finite(v) => write!(f, "{v}"),
            PosInf => write!(f, "+inf"),
        }
    }
}
