// Copyright 2026 The jetcarnot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Arithmetic profiles.
//!
//! Every computation runs entirely in one profile: exact rationals for the
//! algebraic identity suites, `f64` for metric numerics.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::traits::{One, Signed, Zero};
use num::{BigInt, BigRational, ToPrimitive};

/// Exact rational scalar.
pub type Rational = BigRational;

/// Default relative tolerance of the float profile.
pub const DEFAULT_REL_TOL: f64 = 1e-9;

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// `true` for the exact profile.
    const EXACT: bool;

    fn from_i64(v: i64) -> Self;

    /// Converts a float; exact for the rational profile (every finite
    /// double is a dyadic rational).
    fn from_f64(v: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn abs(&self) -> Self;

    /// Equality in the exact profile, relative closeness in the float one.
    fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool;

    fn powi(&self, e: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..e {
            out = out * self.clone();
        }
        out
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        let scale = 1.0_f64.max(f64::abs(*self)).max(f64::abs(*other));
        f64::abs(self - other) <= rel_tol * scale
    }

    fn powi(&self, e: u32) -> Self {
        f64::powi(*self, e as i32)
    }
}

impl Scalar for Rational {
    const EXACT: bool = true;

    fn from_i64(v: i64) -> Self {
        Rational::from_integer(BigInt::from(v))
    }

    fn from_f64(v: f64) -> Self {
        Rational::from_float(v).expect("finite float")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs(&self) -> Self {
        Signed::abs(self)
    }

    fn approx_eq(&self, other: &Self, _rel_tol: f64) -> bool {
        self == other
    }
}

/// `n!` as a scalar.
pub fn factorial<S: Scalar>(n: u32) -> S {
    let mut out = S::one();
    for i in 2..=n {
        out = out * S::from_i64(i as i64);
    }
    out
}

/// Integer power `base^e` for a possibly negative exponent.
pub fn powi_signed<S: Scalar>(base: &S, e: i32) -> S {
    if e >= 0 {
        base.powi(e as u32)
    } else {
        S::one() / base.powi((-e) as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_from_float_is_exact() {
        let q = Rational::from_f64(0.1);
        assert_eq!(Scalar::to_f64(&q), 0.1);
        assert_ne!(q, Rational::new(BigInt::from(1), BigInt::from(10)));
    }

    #[test]
    fn float_tolerance_is_relative() {
        assert!(1e12_f64.approx_eq(&(1e12 + 1.0), 1e-9));
        assert!(!1.0_f64.approx_eq(&1.001, 1e-9));
    }

    #[test]
    fn signed_powers() {
        assert_eq!(powi_signed(&2.0_f64, -3), 0.125);
        assert_eq!(factorial::<f64>(5), 120.0);
    }
}
