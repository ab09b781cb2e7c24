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

//! Real polynomials on `R^n`, Taylor polynomials, jets, the shifted
//! functions `f^a` and the jet-curve Lipschitz bound.

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::jet::{monomial_table, JetPoint};
use crate::multiindex::{binomial, layout, Layout, MultiIndex};
use crate::scalar::Scalar;

/// `Σ_I c_I z^I` over all `|I| <= maxdeg`, dense in graded-lex order.
#[derive(Clone, Debug)]
pub struct Polynomial<S> {
    layout: Arc<Layout>,
    pub coeffs: Vec<S>,
}

impl<S: PartialEq> PartialEq for Polynomial<S> {
    fn eq(&self, other: &Self) -> bool {
        self.layout.n == other.layout.n
            && self.layout.k == other.layout.k
            && self.coeffs == other.coeffs
    }
}

impl<S: Scalar> Polynomial<S> {
    pub fn zero(n: usize, maxdeg: u32) -> Self {
        let layout = layout(n, maxdeg);
        let len = layout.len();
        Polynomial {
            layout,
            coeffs: vec![S::zero(); len],
        }
    }

    pub fn from_coeffs(n: usize, maxdeg: u32, coeffs: Vec<S>) -> Result<Self> {
        let layout = layout(n, maxdeg);
        if coeffs.len() != layout.len() {
            return Err(Error::Invalid(format!(
                "degree-{maxdeg} polynomial in {n} variables has {} coefficients, got {}",
                layout.len(),
                coeffs.len()
            )));
        }
        Ok(Polynomial { layout, coeffs })
    }

    /// Builds from `(exponents, coefficient)` terms; repeated terms add up.
    pub fn from_terms(n: usize, maxdeg: u32, terms: &[(Vec<u32>, S)]) -> Result<Self> {
        let mut p = Self::zero(n, maxdeg);
        for (e, c) in terms {
            let idx = MultiIndex(e.clone());
            let pos = p
                .layout
                .position(&idx)
                .ok_or_else(|| Error::Invalid(format!("monomial {idx} outside degree {maxdeg}")))?;
            p.coeffs[pos] = p.coeffs[pos].clone() + c.clone();
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn maxdeg(&self) -> u32 {
        self.layout.k
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeff(&self, idx: &MultiIndex) -> S {
        self.layout
            .position(idx)
            .map(|p| self.coeffs[p].clone())
            .unwrap_or_else(S::zero)
    }

    /// Same polynomial stored with a larger degree bound.
    pub fn with_maxdeg(&self, maxdeg: u32) -> Self {
        let mut out = Self::zero(self.n(), maxdeg.max(self.maxdeg()));
        for (i, c) in self.layout.indices.iter().zip(&self.coeffs) {
            let p = out.layout.position(i).expect("bigger layout");
            out.coeffs[p] = c.clone();
        }
        out
    }

    /// Drops every monomial of degree above `maxdeg`.
    pub fn truncate(&self, maxdeg: u32) -> Self {
        let mut out = Self::zero(self.n(), maxdeg);
        for (i, c) in self.layout.indices.iter().zip(&self.coeffs) {
            if let Some(p) = out.layout.position(i) {
                out.coeffs[p] = c.clone();
            }
        }
        out
    }

    pub fn eval(&self, x: &[S]) -> S {
        let pows = monomial_table(&self.layout, x);
        self.coeffs
            .iter()
            .zip(pows)
            .fold(S::zero(), |acc, (c, p)| acc + c.clone() * p)
    }

    /// `∂_I f` as a polynomial.
    pub fn partial(&self, idx: &MultiIndex) -> Self {
        let mut out = Self::zero(self.n(), self.maxdeg());
        for (j, c) in self.layout.indices.iter().zip(&self.coeffs) {
            if j.dominates(idx) {
                let d = j.minus(idx);
                let falling = falling_factor(j, idx);
                let p = out.layout.position(&d).expect("lower degree");
                out.coeffs[p] = out.coeffs[p].clone() + c.clone() * S::from_i64(falling);
            }
        }
        out
    }

    /// `∂_I f(x)` without materialising the derivative.
    pub fn derivative_at(&self, idx: &MultiIndex, x: &[S]) -> S {
        let pows = monomial_table(&self.layout, x);
        let mut acc = S::zero();
        for (j, c) in self.layout.indices.iter().zip(&self.coeffs) {
            if j.dominates(idx) {
                let d = self.layout.position(&j.minus(idx)).expect("in layout");
                acc = acc + c.clone() * S::from_i64(falling_factor(j, idx)) * pows[d].clone();
            }
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_n(other)?;
        let d = self.maxdeg().max(other.maxdeg());
        let mut a = self.with_maxdeg(d);
        let b = other.with_maxdeg(d);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs) {
            *x = x.clone() + y;
        }
        Ok(a)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-S::one()))
    }

    pub fn scale(&self, s: &S) -> Self {
        Polynomial {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_n(other)?;
        let mut out = Self::zero(self.n(), self.maxdeg() + other.maxdeg());
        for (i, a) in self.layout.indices.iter().zip(&self.coeffs) {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.layout.indices.iter().zip(&other.coeffs) {
                let p = out.layout.position(&i.plus(j)).expect("degree bound");
                out.coeffs[p] = out.coeffs[p].clone() + a.clone() * b.clone();
            }
        }
        Ok(out)
    }

    /// `z ↦ f(z - h)`, binomially expanded.
    pub fn translate(&self, h: &[S]) -> Self {
        let neg: Vec<S> = h.iter().map(|v| -v.clone()).collect();
        let pows = monomial_table(&self.layout, &neg);
        let mut out = Self::zero(self.n(), self.maxdeg());
        for (pj, j) in self.layout.indices.iter().enumerate() {
            let c = &self.coeffs[pj];
            if c.is_zero() {
                continue;
            }
            for (pi, i) in self.layout.indices.iter().enumerate() {
                if !j.dominates(i) {
                    continue;
                }
                let d = self.layout.position(&j.minus(i)).expect("in layout");
                let binom: u64 =
                    j.0.iter()
                        .zip(&i.0)
                        .map(|(&a, &b)| binomial(a as u64, b as u64))
                        .product();
                out.coeffs[pi] = out.coeffs[pi].clone()
                    + c.clone() * S::from_i64(binom as i64) * pows[d].clone();
            }
        }
        out
    }

    /// `z ↦ L^{k+1} f(z / L)`.
    pub fn rescale(&self, factor: &S, k: u32) -> Self {
        let mut out = Self::zero(self.n(), self.maxdeg());
        for (p, (i, c)) in self.layout.indices.iter().zip(&self.coeffs).enumerate() {
            let d = i.degree();
            let mut s = c.clone();
            if d <= k + 1 {
                s = s * factor.powi(k + 1 - d);
            } else {
                s = s / factor.powi(d - k - 1);
            }
            out.coeffs[p] = s;
        }
        out
    }

    fn check_n(&self, other: &Self) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::Invalid(format!(
                "polynomials in {} and {} variables",
                self.n(),
                other.n()
            )));
        }
        Ok(())
    }

    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        let d = self.maxdeg().max(other.maxdeg());
        let (a, b) = (self.with_maxdeg(d), other.with_maxdeg(d));
        a.n() == b.n()
            && a.coeffs
                .iter()
                .zip(&b.coeffs)
                .all(|(x, y)| x.approx_eq(y, rel_tol))
    }
}

/// `J! / (J-I)!` for `J >= I`.
fn falling_factor(j: &MultiIndex, i: &MultiIndex) -> i64 {
    j.0.iter()
        .zip(&i.0)
        .map(|(&a, &b)| ((a - b + 1)..=a).map(|v| v as i64).product::<i64>())
        .product()
}

/// The Taylor polynomial `Σ_I a_I (z - π(a))^I / I!` of a jet, i.e. the
/// unique degree-`k` polynomial whose jet at `π(a)` is `a`.
pub fn taylor_polynomial_of<S: Scalar>(a: &JetPoint<S>) -> Polynomial<S> {
    let l = layout(a.n(), a.k());
    let mut centered = Polynomial::zero(a.n(), a.k());
    for (p, idx) in l.indices.iter().enumerate() {
        centered.coeffs[p] = a.u[p].clone() / S::from_i64(idx.factorial() as i64);
    }
    centered.translate(&a.x)
}

/// `T^k_{x0}(f)`.
pub fn taylor<S: Scalar>(f: &Polynomial<S>, x0: &[S], k: u32) -> Polynomial<S> {
    let l = layout(f.n(), k);
    let mut centered = Polynomial::zero(f.n(), k);
    for (p, idx) in l.indices.iter().enumerate() {
        centered.coeffs[p] = f.derivative_at(idx, x0) / S::from_i64(idx.factorial() as i64);
    }
    centered.translate(x0)
}

/// `j^k_{x0}(f)`: base point `x0`, coordinates `u_I = ∂_I f(x0)`.
pub fn jet<S: Scalar>(f: &Polynomial<S>, x0: &[S], k: u32) -> JetPoint<S> {
    let l = layout(f.n(), k);
    let u = l.indices.iter().map(|i| f.derivative_at(i, x0)).collect();
    JetPoint::new(f.n(), k, x0.to_vec(), u).expect("consistent shapes")
}

/// `f^a(z) = f(z - π(a)) + Σ_I a_I (z - π(a))^I / I!`.
pub fn shift_function<S: Scalar>(f: &Polynomial<S>, a: &JetPoint<S>) -> Result<Polynomial<S>> {
    if f.n() != a.n() {
        return Err(Error::Invalid(
            "polynomial and jet dimensions differ".into(),
        ));
    }
    f.translate(&a.x).add(&taylor_polynomial_of(a))
}

/// Both sides of `j^k_{x+π(a)}(f^a) = a ⊙ j^k_x(f)`.
pub fn jet_translation<S: Scalar>(
    a: &JetPoint<S>,
    f: &Polynomial<S>,
    x: &[S],
) -> Result<(JetPoint<S>, JetPoint<S>)> {
    let shifted = shift_function(f, a)?;
    let base: Vec<S> = x
        .iter()
        .zip(&a.x)
        .map(|(p, q)| p.clone() + q.clone())
        .collect();
    let lhs = jet(&shifted, &base, a.k());
    let rhs = a.product(&jet(f, x, a.k()))?;
    Ok((lhs, rhs))
}

/// Integrand of the jet-curve bound at `z`:
/// `sqrt(1 + Σ_{I∈I(k)} Σ_i (∂_{I+e_i} f(z))²)`.
pub fn jet_speed_factor(f: &Polynomial<f64>, z: &[f64], k: u32) -> f64 {
    let l = layout(f.n(), k);
    let mut s = 1.0;
    for idx in &l.indices[l.layer(k)] {
        for i in 0..f.n() {
            let d = f.derivative_at(&idx.plus_unit(i), z);
            s += d * d;
        }
    }
    s.sqrt()
}

/// `sup_{t∈[0,1]} jet_speed_factor(γ(t)) · ‖y - x‖` with `γ(t) = (1-t)x + ty`:
/// 64 samples, then golden-section refinement around the best sample.
pub fn jet_map_lipschitz_bound(f: &Polynomial<f64>, x: &[f64], y: &[f64], k: u32) -> f64 {
    let dist = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt();
    let at = |t: f64| -> f64 {
        let z: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        jet_speed_factor(f, &z, k)
    };
    let sup = sup_on_unit_interval(at, 64);
    sup * dist
}

/// Sampled supremum with golden-section refinement (relative tolerance 1e-6).
pub fn sup_on_unit_interval(g: impl Fn(f64) -> f64, samples: usize) -> f64 {
    let ts: Vec<f64> = (0..samples)
        .map(|i| i as f64 / (samples - 1) as f64)
        .collect();
    let vals: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
    let (best, &best_val) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let mut lo = ts[best.saturating_sub(1)];
    let mut hi = ts[(best + 1).min(samples - 1)];
    let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let (mut gc, mut gd) = (g(c), g(d));
    let mut sup = best_val.max(gc).max(gd);
    while hi - lo > 1e-9 {
        if gc > gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - phi * (hi - lo);
            gc = g(c);
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + phi * (hi - lo);
            gd = g(d);
        }
        let prev = sup;
        sup = sup.max(gc).max(gd);
        if sup > 0.0 && (sup - prev) / sup < 1e-12 && hi - lo < 1e-6 {
            break;
        }
    }
    sup
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialJson {
    n: usize,
    maxdeg: u32,
    coeffs: Vec<(Vec<u32>, f64)>,
}

impl Serialize for Polynomial<f64> {
    fn serialize<Se: Serializer>(&self, s: Se) -> std::result::Result<Se::Ok, Se::Error> {
        PolynomialJson {
            n: self.n(),
            maxdeg: self.maxdeg(),
            coeffs: self
                .layout
                .indices
                .iter()
                .zip(&self.coeffs)
                .map(|(i, c)| (i.0.clone(), *c))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polynomial<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = PolynomialJson::deserialize(d)?;
        if raw.n == 0 {
            return Err(D::Error::custom("n must be at least 1"));
        }
        for (e, _) in &raw.coeffs {
            if e.len() != raw.n {
                return Err(D::Error::custom(format!("exponent {e:?} has wrong length")));
            }
        }
        Polynomial::from_terms(raw.n, raw.maxdeg, &raw.coeffs).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(v: i64) -> Rational {
        Rational::from_i64(v)
    }

    fn cubic() -> Polynomial<Rational> {
        Polynomial::from_terms(1, 3, &[(vec![3], q(1))]).unwrap()
    }

    #[test]
    fn taylor_of_cubic() {
        // derivatives of z^3 at 1: 1, 3, 6 → 1 + 3(z-1) + 3(z-1)^2 = 1 - 3z + 3z^2
        let t = taylor(&cubic(), &[q(1)], 2);
        let expected =
            Polynomial::from_terms(1, 2, &[(vec![0], q(1)), (vec![1], q(-3)), (vec![2], q(3))])
                .unwrap();
        assert_eq!(t, expected);
    }

    #[test]
    fn taylor_of_low_degree_is_identity() {
        let lin = Polynomial::from_terms(
            2,
            1,
            &[(vec![0, 0], q(4)), (vec![1, 0], q(-2)), (vec![0, 1], q(7))],
        )
        .unwrap();
        assert_eq!(taylor(&lin, &[q(3), q(-5)], 1), lin);
        let sq = Polynomial::from_terms(1, 2, &[(vec![2], q(1))]).unwrap();
        assert_eq!(taylor(&sq, &[q(0)], 2), sq);
    }

    #[test]
    fn jet_of_cubic() {
        let a = jet(&cubic(), &[q(1)], 2);
        assert_eq!(a.x, vec![q(1)]);
        assert_eq!(a.layer(2), &[q(6)]);
        assert_eq!(a.layer(1), &[q(3)]);
        assert_eq!(a.layer(0), &[q(1)]);
        let zero = Polynomial::<Rational>::zero(1, 3);
        let z = jet(&zero, &[q(5)], 2);
        assert!(z.u.iter().all(|v| *v == q(0)) && z.x == vec![q(5)]);
    }

    #[test]
    fn jet_of_taylor_matches_jet() {
        let t = taylor(&cubic(), &[q(2)], 2);
        assert_eq!(jet(&t, &[q(2)], 2), jet(&cubic(), &[q(2)], 2));
    }

    fn j11(x: i64, u1: i64, u0: i64) -> JetPoint<Rational> {
        JetPoint::new(1, 1, vec![q(x)], vec![q(u0), q(u1)]).unwrap()
    }

    #[test]
    fn shift_of_zero_function() {
        let zero = Polynomial::<Rational>::zero(1, 1);
        let fa = shift_function(&zero, &j11(1, 2, 3)).unwrap();
        let expected = Polynomial::from_terms(1, 1, &[(vec![0], q(1)), (vec![1], q(2))]).unwrap();
        assert_eq!(fa, expected);
        let b = j11(4, 5, 6);
        let fab = shift_function(&fa, &b).unwrap();
        assert_eq!(b.product(&j11(1, 2, 3)).unwrap(), j11(5, 7, 14));
        let expected = Polynomial::from_terms(1, 1, &[(vec![0], q(-21)), (vec![1], q(7))]).unwrap();
        assert_eq!(fab, expected);
        let id = JetPoint::<Rational>::identity(1, 1);
        assert_eq!(
            shift_function(&cubic(), &id).unwrap(),
            cubic().with_maxdeg(3)
        );
    }

    #[test]
    fn jet_translation_trivial_cases() {
        let zero = Polynomial::<Rational>::zero(1, 1);
        let a = j11(3, -1, 2);
        let (l, r) = jet_translation(&a, &zero, &[q(0)]).unwrap();
        assert_eq!(l, a);
        assert_eq!(r, a);
        let id = JetPoint::<Rational>::identity(1, 2);
        let (l, r) = jet_translation(&id, &cubic(), &[q(2)]).unwrap();
        assert_eq!(l, jet(&cubic(), &[q(2)], 2));
        assert_eq!(l, r);
    }

    #[test]
    fn lipschitz_bound_examples() {
        let zero = Polynomial::<f64>::zero(1, 2);
        assert!((jet_map_lipschitz_bound(&zero, &[0.0], &[3.0], 1) - 3.0).abs() < 1e-12);
        let half_sq = Polynomial::from_terms(1, 2, &[(vec![2], 0.5)]).unwrap();
        let b = jet_map_lipschitz_bound(&half_sq, &[0.0], &[1.0], 1);
        assert!((b - 2.0_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn sup_refinement_finds_interior_peak() {
        let s = sup_on_unit_interval(|t| 1.0 - (t - 0.3141).powi(2), 64);
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rescale_matches_dilation_of_jet() {
        let p = Polynomial::from_terms(1, 3, &[(vec![3], q(2)), (vec![1], q(-1)), (vec![0], q(5))])
            .unwrap();
        let l = q(3);
        let pl = p.rescale(&l, 2);
        let lhs = jet(&pl, &[q(6)], 2);
        let rhs = jet(&p, &[q(2)], 2).dilate(&l);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn json_roundtrip() {
        let p = Polynomial::from_terms(2, 2, &[(vec![1, 1], 0.1), (vec![0, 0], -3.5)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.starts_with(r#"{"n":2,"maxdeg":2,"coeffs":[[[0,0],-3.5]"#));
        let back: Polynomial<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
