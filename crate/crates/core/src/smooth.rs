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

//! Truncated multivariate Taylor series at a point.
//!
//! Smooth non-polynomial functions (cutoff blends in the simplex charts)
//! are evaluated as [`Series`]: exact arithmetic on normalized Taylor
//! coefficients up to a fixed order, so jets of order `k` and the
//! `(k+1)`-st derivatives needed by Lipschitz bounds come out without
//! numerical differentiation.

use std::sync::Arc;

use crate::jet::JetPoint;
use crate::multiindex::{layout, Layout};
use crate::poly::Polynomial;

/// `f(z0 + h) = Σ_{|I| <= order} c_I h^I + O(|h|^{order+1})`.
#[derive(Clone, Debug)]
pub struct Series {
    layout: Arc<Layout>,
    pub center: Vec<f64>,
    pub coeffs: Vec<f64>,
}

impl Series {
    pub fn constant(center: &[f64], order: u32, value: f64) -> Self {
        let layout = layout(center.len(), order);
        let mut coeffs = vec![0.0; layout.len()];
        coeffs[0] = value;
        Series {
            layout,
            center: center.to_vec(),
            coeffs,
        }
    }

    /// The coordinate function `z ↦ z_i`.
    pub fn coordinate(center: &[f64], order: u32, i: usize) -> Self {
        let mut s = Self::constant(center, order, center[i]);
        if order >= 1 {
            s.coeffs[1 + i] = 1.0;
        }
        s
    }

    /// Expansion of a polynomial around `center`.
    pub fn from_polynomial(p: &Polynomial<f64>, center: &[f64], order: u32) -> Self {
        let neg: Vec<f64> = center.iter().map(|v| -v).collect();
        let shifted = p.translate(&neg).truncate(order);
        Series {
            layout: layout(center.len(), order),
            center: center.to_vec(),
            coeffs: shifted.coeffs,
        }
    }

    pub fn order(&self) -> u32 {
        self.layout.k
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `∂_I f(z0)` for every `|I| <= order`, in layout order.
    pub fn derivatives(&self) -> Vec<f64> {
        self.layout
            .indices
            .iter()
            .zip(&self.coeffs)
            .map(|(i, c)| c * i.factorial() as f64)
            .collect()
    }

    /// The `k`-jet at the center, `k <= order`.
    pub fn jet(&self, k: u32) -> JetPoint<f64> {
        let d = self.derivatives();
        let l = layout(self.n(), k);
        JetPoint::new(self.n(), k, self.center.clone(), d[..l.len()].to_vec())
            .expect("consistent shapes")
    }

    pub fn add(&self, o: &Series) -> Series {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&o.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, o: &Series) -> Series {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&o.coeffs) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Series {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add_constant(&self, c: f64) -> Series {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn mul(&self, o: &Series) -> Series {
        let l = &self.layout;
        let mut coeffs = vec![0.0; l.len()];
        let ord = l.k;
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            let di = l.degree_of(i);
            for (j, b) in o.coeffs.iter().enumerate() {
                if di + l.degree_of(j) > ord || *b == 0.0 {
                    continue;
                }
                let p = l
                    .position(&l.indices[i].plus(&l.indices[j]))
                    .expect("within order");
                coeffs[p] += a * b;
            }
        }
        Series {
            layout: l.clone(),
            center: self.center.clone(),
            coeffs,
        }
    }

    /// `g ∘ self` for a scalar function `g` given by its derivatives
    /// `g(s0), g'(s0), …, g^{(order)}(s0)` at `s0 = self.value()`.
    pub fn compose(&self, derivs: &[f64]) -> Series {
        let ord = self.order() as usize;
        let mut d = self.clone();
        d.coeffs[0] = 0.0;
        let mut out = Series::constant(&self.center, self.order(), derivs[0]);
        let mut power = Series::constant(&self.center, self.order(), 1.0);
        let mut fact = 1.0;
        for (m, g) in derivs.iter().enumerate().take(ord + 1).skip(1) {
            power = power.mul(&d);
            fact *= m as f64;
            if *g != 0.0 {
                out = out.add(&power.scale(g / fact));
            }
        }
        out
    }

    pub fn recip(&self) -> Series {
        let s0 = self.value();
        let ord = self.order() as usize;
        let mut derivs = Vec::with_capacity(ord + 1);
        let mut fact = 1.0;
        for m in 0..=ord {
            if m > 0 {
                fact *= m as f64;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            derivs.push(sign * fact / s0.powi(m as i32 + 1));
        }
        self.compose(&derivs)
    }

    pub fn exp(&self) -> Series {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() as usize + 1])
    }
}

/// Derivatives `φ^{(m)}(s)`, `m = 0..=order`, of the cutoff profile
/// `φ = 1` on `(-∞, 1/2]`, `φ = 0` on `[1, ∞)`, smooth in between.
pub fn cutoff_derivatives(s: f64, order: u32) -> Vec<f64> {
    let mut out = vec![0.0; order as usize + 1];
    if s <= 0.5 {
        out[0] = 1.0;
        return out;
    }
    if s >= 1.0 {
        return out;
    }
    // φ(s) = 1 - step(2s - 1), step(t) = h(t) / (h(t) + h(1-t)), h(t) = exp(-1/t)
    let t = Series::coordinate(&[s], order, 0)
        .scale(2.0)
        .add_constant(-1.0);
    let h = |arg: &Series| arg.recip().scale(-1.0).exp();
    let one_minus_t = t.scale(-1.0).add_constant(1.0);
    let ht = h(&t);
    let step = ht.mul(&ht.add(&h(&one_minus_t)).recip());
    let phi = step.scale(-1.0).add_constant(1.0);
    phi.derivatives()
}

/// Cutoff `φ(arg)` applied to a series argument.
pub fn cutoff(arg: &Series) -> Series {
    arg.compose(&cutoff_derivatives(arg.value(), arg.order()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let c = [0.7, -0.2];
        let x = Series::coordinate(&c, 3, 0);
        let y = Series::coordinate(&c, 3, 1);
        let p = x.mul(&x).mul(&y); // x^2 y
        let d = p.derivatives();
        let l = layout(2, 3);
        let at = |e: Vec<u32>| d[l.position(&crate::MultiIndex(e)).unwrap()];
        assert!((at(vec![0, 0]) - 0.49 * -0.2).abs() < 1e-15);
        assert!((at(vec![1, 0]) - 2.0 * 0.7 * -0.2).abs() < 1e-15);
        assert!((at(vec![2, 1]) - 2.0).abs() < 1e-15);
        assert_eq!(at(vec![3, 0]), 0.0);
    }

    #[test]
    fn exp_and_recip() {
        let x = Series::coordinate(&[0.5], 4, 0);
        let e = x.exp().derivatives();
        for d in e {
            assert!((d - 0.5_f64.exp()).abs() < 1e-12);
        }
        let r = x.recip().derivatives();
        // d^m/dx^m 1/x = (-1)^m m! / x^{m+1}
        assert!((r[2] - 2.0 / 0.125).abs() < 1e-9);
        assert!((r[3] + 6.0 / 0.0625).abs() < 1e-9);
    }

    #[test]
    fn cutoff_is_flat_outside_transition() {
        assert_eq!(cutoff_derivatives(0.3, 3), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(cutoff_derivatives(1.3, 3), vec![0.0; 4]);
    }

    #[test]
    fn cutoff_derivative_matches_finite_difference() {
        for &s in &[0.55, 0.7, 0.75, 0.9, 0.97] {
            let d = cutoff_derivatives(s, 2);
            let h = 1e-6;
            let fd =
                (cutoff_derivatives(s + h, 0)[0] - cutoff_derivatives(s - h, 0)[0]) / (2.0 * h);
            assert!((d[1] - fd).abs() < 1e-6, "s={s}: {} vs {fd}", d[1]);
            let fd2 =
                (cutoff_derivatives(s + h, 1)[1] - cutoff_derivatives(s - h, 1)[1]) / (2.0 * h);
            assert!((d[2] - fd2).abs() < 1e-4 * (1.0 + fd2.abs()));
            assert!(d[0] > 0.0 && d[0] < 1.0);
        }
        assert!((cutoff_derivatives(0.75, 0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn polynomial_expansion_reproduces_jet() {
        let p = Polynomial::from_terms(1, 3, &[(vec![3], 1.0)]).unwrap();
        let s = Series::from_polynomial(&p, &[1.0], 3);
        let j = s.jet(2);
        assert_eq!(j.u, vec![1.0, 3.0, 6.0]);
    }
}
