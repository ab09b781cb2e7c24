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

//! Dilation-stable lattices in `J^k(R^n)`.
//!
//! A point is handled in *polynomial coordinates* `(x, P)`: its base point
//! and the unique degree-`k` polynomial whose jet at `x` it is. In these
//! coordinates the group law reads `(x, P) ⊙ (y, Q) = (x + y, P + Q(· − x))`
//! and `δ_L(x, P) = (Lx, L^{k+1} P(·/L))`, which makes lattice membership and
//! coset reduction integer arithmetic on monomial coefficients.

use num::{BigInt, One};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::JetPoint;
use crate::poly::{jet, taylor_polynomial_of, Polynomial};
use crate::scalar::{Rational, Scalar};

/// A point of `J^k(R^n)` in polynomial coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyPoint<S> {
    pub x: Vec<S>,
    pub p: Polynomial<S>,
}

impl<S: Scalar> PolyPoint<S> {
    pub fn identity(n: usize, k: u32) -> Self {
        PolyPoint {
            x: vec![S::zero(); n],
            p: Polynomial::zero(n, k),
        }
    }

    pub fn from_jet(a: &JetPoint<S>) -> Self {
        PolyPoint {
            x: a.x.clone(),
            p: taylor_polynomial_of(a),
        }
    }

    pub fn to_jet(&self) -> JetPoint<S> {
        jet(&self.p, &self.x, self.k())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> u32 {
        self.p.maxdeg()
    }

    pub fn product(&self, b: &Self) -> Self {
        let x = self
            .x
            .iter()
            .zip(&b.x)
            .map(|(u, v)| u.clone() + v.clone())
            .collect();
        let p = self
            .p
            .add(&b.p.translate(&self.x))
            .expect("matching dimensions");
        PolyPoint { x, p }
    }

    pub fn inverse(&self) -> Self {
        let neg: Vec<S> = self.x.iter().map(|v| -v.clone()).collect();
        let p = self.p.translate(&neg).scale(&-S::one());
        PolyPoint { x: neg, p }
    }

    pub fn dilate(&self, factor: &S) -> Self {
        PolyPoint {
            x: self.x.iter().map(|v| v.clone() * factor.clone()).collect(),
            p: self.p.rescale(factor, self.k()),
        }
    }
}

/// `Λ_M`: jets at integer points of polynomials with coefficients in
/// `(1/M)·Z`. It is a subgroup and `δ_L(Λ_M) ⊆ Λ_M` for integers `L ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n: usize,
    pub k: u32,
    pub m: u64,
}

pub fn build_lattice(n: usize, k: u32, m: u64) -> Result<LatticeSpec> {
    if n == 0 || k == 0 || m == 0 {
        return Err(Error::Invalid(format!(
            "lattice needs n, k, M >= 1 (got {n}, {k}, {m})"
        )));
    }
    Ok(LatticeSpec { n, k, m })
}

fn is_integer(v: &Rational) -> bool {
    v.is_integer()
}

impl LatticeSpec {
    fn denom(&self) -> Rational {
        Rational::from_integer(BigInt::from(self.m))
    }

    pub fn contains(&self, a: &JetPoint<Rational>) -> bool {
        if a.n() != self.n || a.k() != self.k {
            return false;
        }
        let pp = PolyPoint::from_jet(a);
        let m = self.denom();
        pp.x.iter().all(is_integer) && pp.p.coeffs.iter().all(|c| is_integer(&(c * &m)))
    }

    /// The member at integer base point `x` whose polynomial has monomial
    /// coefficients `numerators / M` (graded-lex order).
    pub fn member(&self, x: &[i64], numerators: &[i64]) -> Result<JetPoint<Rational>> {
        let m = self.denom();
        let coeffs = numerators
            .iter()
            .map(|v| Rational::from_i64(*v) / &m)
            .collect();
        let p = Polynomial::from_coeffs(self.n, self.k, coeffs)?;
        if x.len() != self.n {
            return Err(Error::Invalid("base point has the wrong dimension".into()));
        }
        Ok(PolyPoint {
            x: x.iter().map(|v| Rational::from_i64(*v)).collect(),
            p,
        }
        .to_jet())
    }

    /// Writes `a = γ ⊙ a₀` with `γ ∈ δ_S(Λ_M)` and `a₀` in the fundamental
    /// domain `x ∈ [0, S)^n`, coefficients of degree `j` in
    /// `[−q_j/2, q_j/2)` for `q_j = S^{k+1−j}/M`. Returns `(γ, a₀)`.
    pub fn reduce(
        &self,
        a: &PolyPoint<Rational>,
        period: &BigInt,
    ) -> (PolyPoint<Rational>, PolyPoint<Rational>) {
        let s = Rational::from_integer(period.clone());
        let g: Vec<Rational> = a.x.iter().map(|v| (v / &s).floor() * &s).collect();
        let y0: Vec<Rational> = a.x.iter().zip(&g).map(|(v, w)| v - w).collect();
        let neg_g: Vec<Rational> = g.iter().map(|v| -v).collect();
        // P(· + g), reduced coefficientwise modulo the lattice of δ_S(Λ_M)
        let shifted = a.p.translate(&neg_g);
        let l = shifted.layout().clone();
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut h = Polynomial::zero(self.n, self.k);
        let mut q0 = Polynomial::zero(self.n, self.k);
        for (pos, c) in shifted.coeffs.iter().enumerate() {
            let q = Rational::from_integer(num::pow(
                period.clone(),
                (self.k + 1 - l.degree_of(pos)) as usize,
            )) / self.denom();
            let mult = (c / &q + &half).floor();
            h.coeffs[pos] = &mult * &q;
            q0.coeffs[pos] = c - &h.coeffs[pos];
        }
        // γ = (g, H(· − g))
        let gamma = PolyPoint {
            x: g.clone(),
            p: h.translate(&g),
        };
        (gamma, PolyPoint { x: y0, p: q0 })
    }
}

/// Integer polynomial coordinates of a member of `Λ_1`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: Vec<BigInt>,
    pub c: Vec<BigInt>,
}

impl Cell {
    pub fn to_poly_point(&self, k: u32) -> PolyPoint<Rational> {
        let n = self.x.len();
        let coeffs = self
            .c
            .iter()
            .map(|v| Rational::from_integer(v.clone()))
            .collect();
        PolyPoint {
            x: self
                .x
                .iter()
                .map(|v| Rational::from_integer(v.clone()))
                .collect(),
            p: Polynomial::from_coeffs(n, k, coeffs).expect("cell shape"),
        }
    }

    /// Inverse of [`Cell::to_poly_point`]; fails unless all coordinates are
    /// integers.
    pub fn from_poly_point(p: &PolyPoint<Rational>) -> Result<Cell> {
        let int = |v: &Rational| -> Result<BigInt> {
            if v.is_integer() {
                Ok(v.to_integer())
            } else {
                Err(Error::Internal(format!(
                    "non-integer lattice coordinate {v}"
                )))
            }
        };
        Ok(Cell {
            x: p.x.iter().map(int).collect::<Result<_>>()?,
            c: p.p.coeffs.iter().map(int).collect::<Result<_>>()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    #[test]
    fn poly_coordinates_reproduce_group_law() {
        let a = JetPoint::new(1, 1, vec![q(1)], vec![q(3), q(2)]).unwrap();
        let b = JetPoint::new(1, 1, vec![q(4)], vec![q(6), q(5)]).unwrap();
        let (pa, pb) = (PolyPoint::from_jet(&a), PolyPoint::from_jet(&b));
        assert_eq!(pa.product(&pb).to_jet(), a.product(&b).unwrap());
        assert_eq!(pa.inverse().to_jet(), a.inverse());
        assert_eq!(pa.dilate(&q(2)).to_jet(), a.dilate(&q(2)));
    }

    #[test]
    fn membership_and_closure_examples() {
        let l = build_lattice(1, 1, 1).unwrap();
        assert!(l.contains(&JetPoint::identity(1, 1)));
        let a = l.member(&[1], &[2, -3]).unwrap();
        let b = l.member(&[-2], &[5, 7]).unwrap();
        assert!(l.contains(&a.product(&b).unwrap()));
        assert!(l.contains(&a.inverse()));
        assert!(l.contains(&a.dilate(&q(2))));
        let half = JetPoint::new(
            1,
            1,
            vec![q(0)],
            vec![Rational::new(1.into(), 2.into()), q(0)],
        )
        .unwrap();
        assert!(!l.contains(&half));
        assert!(build_lattice(1, 1, 2).unwrap().contains(&half));
        assert!(build_lattice(0, 1, 1).is_err());
    }

    #[test]
    fn reduction_lands_in_fundamental_domain() {
        let l = build_lattice(2, 2, 1).unwrap();
        let a = PolyPoint::from_jet(
            &JetPoint::new(
                2,
                2,
                vec![Rational::new(37.into(), 3.into()), q(-9)],
                (0..6).map(|i| q(17 * i - 40)).collect(),
            )
            .unwrap(),
        );
        let period = BigInt::from(4);
        let (gamma, rep) = l.reduce(&a, &period);
        assert_eq!(gamma.product(&rep), a);
        assert!(l.contains(&gamma.to_jet()));
        // γ ∈ δ_4(Λ): δ_{1/4}(γ) is a member
        assert!(l.contains(&gamma.dilate(&Rational::new(1.into(), 4.into())).to_jet()));
        for v in &rep.x {
            assert!(*v >= q(0) && *v < q(4));
        }
        let lay = rep.p.layout().clone();
        for (pos, c) in rep.p.coeffs.iter().enumerate() {
            let qj = q(4i64.pow(3 - lay.degree_of(pos)));
            assert!(c * q(2) >= -qj.clone() && c * q(2) < qj);
        }
    }

    #[test]
    fn cells_round_trip() {
        let l = build_lattice(1, 2, 1).unwrap();
        let a = PolyPoint::from_jet(&l.member(&[3], &[1, -2, 4]).unwrap());
        let c = Cell::from_poly_point(&a).unwrap();
        assert_eq!(c.to_poly_point(2), a);
    }
}
