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

//! Points of `J^k(R^n)` in global coordinates and the Carnot group law.
//!
//! A point is stored as its base point `x` and a flat vector of the
//! derivative coordinates `u_I`, `|I| <= k`, in the order of
//! [`Layout`](crate::multiindex::Layout) (degree ascending, graded-lex
//! within a degree).

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::multiindex::{layout, Layout, MultiIndex};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug)]
pub struct JetPoint<S> {
    layout: Arc<Layout>,
    pub x: Vec<S>,
    pub u: Vec<S>,
}

impl<S: PartialEq> PartialEq for JetPoint<S> {
    fn eq(&self, other: &Self) -> bool {
        self.layout.n == other.layout.n
            && self.layout.k == other.layout.k
            && self.x == other.x
            && self.u == other.u
    }
}

impl<S: Scalar> JetPoint<S> {
    /// Builds a point from its base point and flat `u` coordinates.
    pub fn new(n: usize, k: u32, x: Vec<S>, u: Vec<S>) -> Result<Self> {
        let layout = layout(n, k);
        if x.len() != n || u.len() != layout.len() {
            return Err(Error::Invalid(format!(
                "J^{k}(R^{n}) needs {n} base and {} jet coordinates, got {} and {}",
                layout.len(),
                x.len(),
                u.len()
            )));
        }
        Ok(JetPoint { layout, x, u })
    }

    /// The neutral element: the zero jet of the zero function at the origin.
    pub fn identity(n: usize, k: u32) -> Self {
        let layout = layout(n, k);
        let len = layout.len();
        JetPoint {
            layout,
            x: vec![S::zero(); n],
            u: vec![S::zero(); len],
        }
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn k(&self) -> u32 {
        self.layout.k
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// The coordinate `a_I`.
    pub fn coord(&self, idx: &MultiIndex) -> &S {
        &self.u[self.layout.position(idx).expect("index of degree <= k")]
    }

    /// The `u^j` layer in graded-lex order.
    pub fn layer(&self, j: u32) -> &[S] {
        &self.u[self.layout.layer(j)]
    }

    pub fn layer_mut(&mut self, j: u32) -> &mut [S] {
        let r = self.layout.layer(j);
        &mut self.u[r]
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.u).all(|c| c.is_zero())
    }

    pub fn check_shape(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() || self.k() != other.k() {
            return Err(Error::Shape {
                expected_n: self.n(),
                expected_k: self.k(),
                got_n: other.n(),
                got_k: other.k(),
            });
        }
        Ok(())
    }

    /// `a ⊙ b`: `π(a⊙b) = π(a) + π(b)` and
    /// `(a⊙b)_I = b_I + Σ_{J≥I} a_J π(b)^{J-I} / (J-I)!`.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        Ok(self.product_unchecked(other))
    }

    pub(crate) fn product_unchecked(&self, b: &Self) -> Self {
        let l = &self.layout;
        let powers = monomial_table(l, &b.x);
        let x = self
            .x
            .iter()
            .zip(&b.x)
            .map(|(p, q)| p.clone() + q.clone())
            .collect();
        let u = (0..l.len())
            .map(|i| {
                let mut acc = b.u[i].clone();
                for &(j, d, fact) in &l.dominating[i] {
                    acc = acc + self.u[j].clone() * powers[d].clone() / S::from_i64(fact as i64);
                }
                acc
            })
            .collect();
        JetPoint {
            layout: l.clone(),
            x,
            u,
        }
    }

    /// The group inverse, `π = -π(a)` and
    /// `out_I = -Σ_{J≥I} a_J (-π(a))^{J-I} / (J-I)!`.
    pub fn inverse(&self) -> Self {
        let l = &self.layout;
        let neg_x: Vec<S> = self.x.iter().map(|v| -v.clone()).collect();
        let powers = monomial_table(l, &neg_x);
        let u = (0..l.len())
            .map(|i| {
                let mut acc = S::zero();
                for &(j, d, fact) in &l.dominating[i] {
                    acc = acc + self.u[j].clone() * powers[d].clone() / S::from_i64(fact as i64);
                }
                -acc
            })
            .collect();
        JetPoint {
            layout: l.clone(),
            x: neg_x,
            u,
        }
    }

    /// `δ_L`: `x ↦ Lx`, `u^j ↦ L^{k+1-j} u^j`.
    pub fn dilate(&self, factor: &S) -> Self {
        let l = &self.layout;
        let pows: Vec<S> = (0..=l.k + 1).map(|e| factor.powi(e)).collect();
        JetPoint {
            layout: l.clone(),
            x: self.x.iter().map(|v| v.clone() * factor.clone()).collect(),
            u: self
                .u
                .iter()
                .enumerate()
                .map(|(i, v)| v.clone() * pows[l.weight(i) as usize].clone())
                .collect(),
        }
    }

    /// `a⁻¹ ⊙ b`.
    pub fn left_quotient(&self, b: &Self) -> Result<Self> {
        self.check_shape(b)?;
        Ok(self.inverse().product_unchecked(b))
    }

    /// Homogeneous quasi-norm
    /// `N(a) = max(max_i |x_i|, max_I |a_I|^{1/(k+1-|I|)})`.
    pub fn norm(&self) -> f64 {
        let mut out = self
            .x
            .iter()
            .map(|v| v.to_f64().abs())
            .fold(0.0_f64, f64::max);
        for (i, v) in self.u.iter().enumerate() {
            let w = self.layout.weight(i);
            let a = v.to_f64().abs();
            let r = if w == 1 { a } else { a.powf(1.0 / w as f64) };
            out = out.max(r);
        }
        out
    }

    /// `N(a)^p` computed without roots; `p` must be a multiple of every
    /// layer weight (e.g. `(k+1)!`). Exact in the rational profile.
    pub fn norm_power(&self, p: u32) -> S {
        let mut out = S::zero();
        let bigger = |acc: S, v: S| -> S {
            let greater = if S::EXACT {
                gt_exact(&v, &acc)
            } else {
                v.to_f64() > acc.to_f64()
            };
            if greater {
                v
            } else {
                acc
            }
        };
        for v in &self.x {
            out = bigger(out, v.abs().powi(p));
        }
        for (i, v) in self.u.iter().enumerate() {
            let w = self.layout.weight(i);
            assert!(
                p.is_multiple_of(w),
                "power {p} is not a multiple of weight {w}"
            );
            out = bigger(out, v.abs().powi(p / w));
        }
        out
    }

    /// Converts coordinates to another profile through `f64`-exact values.
    pub fn to_f64(&self) -> JetPoint<f64> {
        JetPoint {
            layout: self.layout.clone(),
            x: self.x.iter().map(Scalar::to_f64).collect(),
            u: self.u.iter().map(Scalar::to_f64).collect(),
        }
    }

    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        self.n() == other.n()
            && self.k() == other.k()
            && self
                .x
                .iter()
                .zip(&other.x)
                .chain(self.u.iter().zip(&other.u))
                .all(|(a, b)| a.approx_eq(b, rel_tol))
    }

    /// Largest componentwise relative difference, with the scale floored at 1.
    pub fn max_rel_diff(&self, other: &Self) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.u.iter().zip(&other.u))
            .map(|(a, b)| {
                let (a, b) = (a.to_f64(), b.to_f64());
                (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
            })
            .fold(0.0, f64::max)
    }
}

fn gt_exact<S: Scalar>(a: &S, b: &S) -> bool {
    // exact comparison through the sign of the difference
    let d = a.clone() - b.clone();
    !d.is_zero() && d.abs() == d
}

impl JetPoint<f64> {
    /// Exact rational copy of a float point.
    pub fn to_rational(&self) -> JetPoint<Rational> {
        JetPoint {
            layout: self.layout.clone(),
            x: self.x.iter().map(|v| Rational::from_f64(*v)).collect(),
            u: self.u.iter().map(|v| Rational::from_f64(*v)).collect(),
        }
    }
}

/// Quasi-distance `ρ(a, b) = N(a⁻¹ ⊙ b)`.
pub fn quasi_distance<S: Scalar>(a: &JetPoint<S>, b: &JetPoint<S>) -> Result<f64> {
    Ok(a.left_quotient(b)?.norm())
}

/// `x^I / 1` for every flat index `I` of the layout.
pub(crate) fn monomial_table<S: Scalar>(l: &Layout, x: &[S]) -> Vec<S> {
    let mut out: Vec<S> = Vec::with_capacity(l.len());
    out.push(S::one());
    for p in 1..l.len() {
        // multiply the predecessor I - e_m by x_m for the first nonzero m
        let idx = &l.indices[p];
        let m = idx.0.iter().position(|&e| e > 0).expect("nonzero index");
        let mut prev = idx.0.clone();
        prev[m] -= 1;
        let q = l
            .position(&MultiIndex(prev))
            .expect("predecessor in layout");
        out.push(out[q].clone() * x[m].clone());
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JetPointJson {
    n: usize,
    k: u32,
    x: Vec<f64>,
    u: BTreeMap<String, Vec<f64>>,
}

impl Serialize for JetPoint<f64> {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        let u = (0..=self.k())
            .map(|j| (j.to_string(), self.layer(j).to_vec()))
            .collect();
        JetPointJson {
            n: self.n(),
            k: self.k(),
            x: self.x.clone(),
            u,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for JetPoint<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = JetPointJson::deserialize(d)?;
        if raw.n == 0 || raw.k == 0 {
            return Err(D::Error::custom("n and k must be at least 1"));
        }
        let l = layout(raw.n, raw.k);
        let mut u = Vec::with_capacity(l.len());
        for j in 0..=raw.k {
            let layer = raw
                .u
                .get(&j.to_string())
                .ok_or_else(|| D::Error::custom(format!("missing layer {j}")))?;
            if layer.len() != l.layer(j).len() {
                return Err(D::Error::custom(format!(
                    "layer {j} has {} entries, expected {}",
                    layer.len(),
                    l.layer(j).len()
                )));
            }
            u.extend_from_slice(layer);
        }
        if raw.u.len() != raw.k as usize + 1 {
            return Err(D::Error::custom("unexpected layer keys"));
        }
        JetPoint::new(raw.n, raw.k, raw.x, u).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p11(x: f64, u1: f64, u0: f64) -> JetPoint<f64> {
        // flat order is degree ascending: [u^0, u^1]
        JetPoint::new(1, 1, vec![x], vec![u0, u1]).unwrap()
    }

    #[test]
    fn product_example_j1r1() {
        let a = p11(1.0, 2.0, 3.0);
        let b = p11(4.0, 5.0, 6.0);
        assert_eq!(a.product(&b).unwrap(), p11(5.0, 7.0, 17.0));
    }

    #[test]
    fn identity_laws() {
        let a = p11(1.0, 2.0, 3.0);
        let e = JetPoint::<f64>::identity(1, 1);
        assert_eq!(e.product(&a).unwrap(), a);
        assert_eq!(a.product(&e).unwrap(), a);
        assert_eq!(e.inverse(), e);
    }

    #[test]
    fn inverse_example() {
        let a = p11(1.0, 2.0, 3.0);
        assert_eq!(a.inverse(), p11(-1.0, -2.0, -1.0));
    }

    #[test]
    fn dilation_examples() {
        let a = p11(1.0, 2.0, 3.0);
        assert_eq!(a.dilate(&2.0), p11(2.0, 4.0, 12.0));
        assert_eq!(a.dilate(&1.0), a);
        assert!(a.dilate(&0.0).is_identity());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(p11(2.0, 4.0, 12.0).norm(), 4.0);
        assert_eq!(JetPoint::<f64>::identity(2, 3).norm(), 0.0);
        let e = JetPoint::<f64>::identity(1, 1);
        assert_eq!(quasi_distance(&e, &p11(0.0, -0.75, 0.0)).unwrap(), 0.75);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = JetPoint::<f64>::identity(1, 1);
        let b = JetPoint::<f64>::identity(2, 1);
        assert!(matches!(a.product(&b), Err(Error::Shape { .. })));
        assert!(quasi_distance(&a, &b).is_err());
    }

    #[test]
    fn json_layout() {
        let a = p11(1.0, 2.0, 3.0);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"n":1,"k":1,"x":[1.0],"u":{"0":[3.0],"1":[2.0]}}"#);
        let bad = r#"{"n":1,"k":1,"x":[1.0],"u":{"0":[3.0]}}"#;
        assert!(serde_json::from_str::<JetPoint<f64>>(bad).is_err());
        let extra = r#"{"n":1,"k":1,"x":[1.0],"u":{"0":[3.0],"1":[2.0]},"z":1}"#;
        assert!(serde_json::from_str::<JetPoint<f64>>(extra).is_err());
    }
}
