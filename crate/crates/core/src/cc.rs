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

//! Horizontal curves and Carnot–Carathéodory distance bounds.
//!
//! Controls are piecewise constant on the frame `X_1..X_n` and the
//! vertical directions `∂_{u^k_I}`. On a constant-control segment every
//! coordinate is a polynomial in time, so flows are integrated exactly,
//! layer by layer from `u^k` down to `u^0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::JetPoint;
use crate::multiindex::layout;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment<S = f64> {
    pub duration: S,
    /// Coefficients on `X_1..X_n`.
    pub cx: Vec<S>,
    /// Coefficients on `∂_{u^k_I}`, `I ∈ I(k)` in graded-lex order.
    pub cu: Vec<S>,
}

impl Segment<f64> {
    pub fn length(&self) -> f64 {
        let s: f64 = self.cx.iter().chain(&self.cu).map(|v| v * v).sum();
        self.duration.abs() * s.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizontalControl<S = f64> {
    pub segments: Vec<Segment<S>>,
}

impl<S> Default for HorizontalControl<S> {
    fn default() -> Self {
        HorizontalControl {
            segments: Vec::new(),
        }
    }
}

impl<S: Scalar> HorizontalControl<S> {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        HorizontalControl { segments }
    }

    /// The path run backwards; integrating it from `a ⊙ p` returns to `a`.
    pub fn reversed(&self) -> Self {
        HorizontalControl {
            segments: self
                .segments
                .iter()
                .rev()
                .map(|s| Segment {
                    duration: s.duration.clone(),
                    cx: s.cx.iter().map(|v| -v.clone()).collect(),
                    cu: s.cu.iter().map(|v| -v.clone()).collect(),
                })
                .collect(),
        }
    }

    /// The image path under `δ_L`: same durations, controls scaled by `L`.
    pub fn dilated(&self, factor: &S) -> Self {
        HorizontalControl {
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    duration: s.duration.clone(),
                    cx: s.cx.iter().map(|v| v.clone() * factor.clone()).collect(),
                    cu: s.cu.iter().map(|v| v.clone() * factor.clone()).collect(),
                })
                .collect(),
        }
    }
}

impl HorizontalControl<f64> {
    /// `length_{g_0}`: `Σ duration · |(c_x, c_u)|`.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }
}

/// Endpoint of the horizontal flow from `start` under `ctrl`.
pub fn integrate_horizontal<S: Scalar>(
    start: &JetPoint<S>,
    ctrl: &HorizontalControl<S>,
) -> Result<JetPoint<S>> {
    let mut p = start.clone();
    let dk = layout(start.n(), start.k()).layer(start.k()).len();
    for (i, seg) in ctrl.segments.iter().enumerate() {
        if seg.cx.len() != start.n() || seg.cu.len() != dk {
            return Err(Error::Invalid(format!(
                "segment {i} has {}+{} controls, expected {}+{dk}",
                seg.cx.len(),
                seg.cu.len(),
                start.n()
            )));
        }
        p = flow_segment(&p, seg);
    }
    Ok(p)
}

fn flow_segment<S: Scalar>(p: &JetPoint<S>, seg: &Segment<S>) -> JetPoint<S> {
    let l = p.layout().clone();
    let k = l.k;
    // coordinate polynomials in t, coefficient vectors in ascending powers
    let mut paths: Vec<Vec<S>> = vec![Vec::new(); l.len()];
    for (off, pos) in l.layer(k).enumerate() {
        paths[pos] = vec![p.u[pos].clone(), seg.cu[off].clone()];
    }
    for j in (0..k).rev() {
        for pos in l.layer(j) {
            // u^j_I' = Σ_i u^{j+1}_{I+e_i} c_{x,i}
            let mut rate: Vec<S> = Vec::new();
            for (i, c) in seg.cx.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                let src = l.plus_unit[pos][i].expect("I + e_i has degree <= k");
                add_scaled(&mut rate, &paths[src], c);
            }
            let mut path = Vec::with_capacity(rate.len() + 1);
            path.push(p.u[pos].clone());
            for (m, r) in rate.into_iter().enumerate() {
                path.push(r / S::from_i64(m as i64 + 1));
            }
            paths[pos] = path;
        }
    }
    let t = &seg.duration;
    let x =
        p.x.iter()
            .zip(&seg.cx)
            .map(|(a, c)| a.clone() + c.clone() * t.clone())
            .collect();
    let u = paths.iter().map(|c| horner(c, t)).collect();
    JetPoint::new(p.n(), k, x, u).expect("shape preserved")
}

fn add_scaled<S: Scalar>(acc: &mut Vec<S>, src: &[S], c: &S) {
    if acc.len() < src.len() {
        acc.resize(src.len(), S::zero());
    }
    for (a, s) in acc.iter_mut().zip(src) {
        *a = a.clone() + s.clone() * c.clone();
    }
}

fn horner<S: Scalar>(coeffs: &[S], t: &S) -> S {
    coeffs
        .iter()
        .rev()
        .fold(S::zero(), |acc, c| acc * t.clone() + c.clone())
}

fn straight(n: usize, dk: usize, cx: Vec<f64>, cu: Vec<f64>) -> Segment {
    debug_assert!(cx.len() == n && cu.len() == dk);
    Segment {
        duration: 1.0,
        cx,
        cu,
    }
}

/// A horizontal path from `a` to `b` built from straight moves and
/// recursive commutator switchbacks (constructive connectivity).
pub fn canonical_connect(a: &JetPoint<f64>, b: &JetPoint<f64>) -> Result<HorizontalControl> {
    a.check_shape(b)?;
    if a == b {
        return Ok(HorizontalControl::default());
    }
    let q = a.left_quotient(b)?;
    Ok(connect_from_identity(&q))
}

fn connect_from_identity(q: &JetPoint<f64>) -> HorizontalControl {
    let (n, k) = (q.n(), q.k());
    let l = layout(n, k);
    let dk = l.layer(k).len();
    let mut ctrl = HorizontalControl::default();
    if q.x.iter().any(|v| *v != 0.0) {
        ctrl.segments
            .push(straight(n, dk, q.x.clone(), vec![0.0; dk]));
    }
    if q.layer(k).iter().any(|v| *v != 0.0) {
        ctrl.segments
            .push(straight(n, dk, vec![0.0; n], q.layer(k).to_vec()));
    }
    let id = JetPoint::<f64>::identity(n, k);
    for j in (0..k).rev() {
        let here = integrate_horizontal(&id, &ctrl).expect("valid controls");
        let residual = here.inverse().product_unchecked(q);
        for (off, pos) in l.layer(j).enumerate() {
            let v = residual.u[pos];
            if v != 0.0 {
                let g = generator(n, k, j, off, v);
                ctrl = ctrl.concat(&g);
            }
        }
    }
    ctrl
}

/// Path from the identity to a point with `x = 0`, zero layers above `j`,
/// and `u^j = v·e_I` (`I` the `off`-th index of layer `j`).
fn generator(n: usize, k: u32, j: u32, off: usize, v: f64) -> HorizontalControl {
    let l = layout(n, k);
    let dk = l.layer(k).len();
    if j == k {
        let mut cu = vec![0.0; dk];
        cu[off] = v;
        return HorizontalControl {
            segments: vec![straight(n, dk, vec![0.0; n], cu)],
        };
    }
    let pos = l.layer(j).start + off;
    let i = 0;
    let up = l.plus_unit[pos][i].expect("I + e_1 has degree <= k");
    let up_off = up - l.layer(j + 1).start;
    let unit = commutator(n, k, j, up_off, i, 1.0, 1.0);
    let id = JetPoint::<f64>::identity(n, k);
    let gain = integrate_horizontal(&id, &unit).expect("valid").u[pos];
    let ratio = v / gain;
    let mag = ratio.abs().sqrt();
    commutator(n, k, j, up_off, i, mag, ratio.signum() * mag)
}

/// `[g, exp(s X_i)]` where `g` is the layer-`(j+1)` generator of size `a`.
fn commutator(
    n: usize,
    k: u32,
    j: u32,
    up_off: usize,
    i: usize,
    a: f64,
    s: f64,
) -> HorizontalControl {
    let dk = layout(n, k).layer(k).len();
    let g = generator(n, k, j + 1, up_off, a);
    let mut cx = vec![0.0; n];
    cx[i] = s;
    let fwd = HorizontalControl {
        segments: vec![straight(n, dk, cx.clone(), vec![0.0; dk])],
    };
    g.concat(&fwd).concat(&g.reversed()).concat(&fwd.reversed())
}

/// Straight-line witness through consecutive points: each segment moves
/// `x` and `u^k` by their differences.
pub fn witness_through(points: &[JetPoint<f64>]) -> HorizontalControl {
    let mut ctrl = HorizontalControl::default();
    for w in points.windows(2) {
        let k = w[0].k();
        let cx = w[0].x.iter().zip(&w[1].x).map(|(a, b)| b - a).collect();
        let cu = w[0]
            .layer(k)
            .iter()
            .zip(w[1].layer(k))
            .map(|(a, b)| b - a)
            .collect();
        ctrl.segments.push(Segment {
            duration: 1.0,
            cx,
            cu,
        });
    }
    ctrl
}

/// Optimizer budget for [`cc_upper_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcBudget {
    /// Segment count of curve-following initializations.
    pub segments: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for CcBudget {
    fn default() -> Self {
        CcBudget {
            segments: 16,
            max_iters: 200,
            rel_tol: 1e-6,
        }
    }
}

impl CcBudget {
    /// Initialization only: no optimization steps.
    pub fn none() -> Self {
        CcBudget {
            max_iters: 0,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub lower: f64,
    /// `max(witness length, lower)`.
    pub upper: f64,
    pub witness: HorizontalControl,
    /// `false` when the iteration budget ran out before the stopping rule.
    pub converged: bool,
    pub iterations: usize,
}

/// Length of the horizontal projection of the left quotient:
/// `|(Δx, u^k(a⁻¹ ⊙ b))|`. The `x` and `u^k` velocities of a horizontal
/// path are its controls, so no path is shorter.
pub fn cc_lower_bound(a: &JetPoint<f64>, b: &JetPoint<f64>) -> Result<f64> {
    let q = a.left_quotient(b)?;
    let s: f64 = q.x.iter().chain(q.layer(q.k())).map(|v| v * v).sum();
    Ok(s.sqrt())
}

/// Endpoint tolerance `1e-9 · (1 + max |coordinate of b|)`.
pub fn endpoint_tolerance(b: &JetPoint<f64>) -> f64 {
    let m = b.x.iter().chain(&b.u).map(|v| v.abs()).fold(0.0, f64::max);
    1e-9 * (1.0 + m)
}

fn max_abs_diff(a: &JetPoint<f64>, b: &JetPoint<f64>) -> f64 {
    a.x.iter()
        .zip(&b.x)
        .chain(a.u.iter().zip(&b.u))
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max)
}

struct Problem<'a> {
    a: &'a JetPoint<f64>,
    b: &'a JetPoint<f64>,
    tol: f64,
    n: usize,
    dk: usize,
}

impl Problem<'_> {
    fn to_control(&self, v: &[f64]) -> HorizontalControl {
        let w = self.n + self.dk;
        HorizontalControl {
            segments: v
                .chunks(w)
                .map(|c| straight(self.n, self.dk, c[..self.n].to_vec(), c[self.n..].to_vec()))
                .collect(),
        }
    }

    fn params_of(&self, c: &HorizontalControl) -> Vec<f64> {
        c.segments
            .iter()
            .flat_map(|s| {
                s.cx.iter()
                    .chain(&s.cu)
                    .map(|v| v * s.duration)
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Free part plus the closing path that repairs the endpoint.
    fn complete(&self, v: &[f64]) -> HorizontalControl {
        let free = self.to_control(v);
        let end = integrate_horizontal(self.a, &free).expect("valid controls");
        if max_abs_diff(&end, self.b) <= self.tol {
            return free;
        }
        let close = canonical_connect(&end, self.b).expect("shapes match");
        free.concat(&close)
    }

    fn cost(&self, v: &[f64]) -> f64 {
        self.complete(v).length()
    }
}

/// Upper bound for `d_c(a, b)`: the shortest feasible path found by local
/// search started from the canonical connection, the straight segment and
/// any extra initializations. The endpoint constraint is enforced at every iterate by
/// closing the residual with [`canonical_connect`], so every value seen is
/// a valid bound and the result never exceeds the best initialization.
pub fn cc_upper_bound(
    a: &JetPoint<f64>,
    b: &JetPoint<f64>,
    budget: &CcBudget,
    inits: &[HorizontalControl],
) -> Result<DistanceEstimate> {
    a.check_shape(b)?;
    let lower = cc_lower_bound(a, b)?;
    let n = a.n();
    let dk = layout(n, a.k()).layer(a.k()).len();
    let prob = Problem {
        a,
        b,
        tol: endpoint_tolerance(b),
        n,
        dk,
    };
    if max_abs_diff(a, b) <= prob.tol {
        return Ok(DistanceEstimate {
            lower,
            upper: 0.0,
            witness: HorizontalControl::default(),
            converged: true,
            iterations: 0,
        });
    }
    let mut starts = vec![
        prob.params_of(&canonical_connect(a, b)?),
        // exact for horizontal displacements, where roundoff in the
        // quotient would otherwise add spurious switchbacks
        prob.params_of(&witness_through(&[a.clone(), b.clone()])),
    ];
    for init in inits {
        starts.push(prob.params_of(init));
    }
    let mut best_v = Vec::new();
    let mut best = f64::INFINITY;
    for v in starts {
        let c = prob.cost(&v);
        if c < best {
            best = c;
            best_v = v;
        }
    }
    let (best_v, best, iterations, converged) = minimize(&prob, best_v, best, budget);
    let witness = prob.complete(&best_v);
    debug_assert!((witness.length() - best).abs() <= 1e-9 * (1.0 + best));
    Ok(DistanceEstimate {
        lower,
        // the witness ends within the endpoint tolerance of `b`, which the
        // search may exploit to undercut the exact lower bound by roundoff
        upper: best.max(lower),
        witness,
        converged,
        iterations,
    })
}

/// Gradient steps with backtracking, falling back to a coordinate sweep;
/// only improving moves are accepted.
fn minimize(
    prob: &Problem<'_>,
    mut v: Vec<f64>,
    mut f: f64,
    budget: &CcBudget,
) -> (Vec<f64>, f64, usize, bool) {
    if budget.max_iters == 0 || v.is_empty() {
        return (v, f, 0, budget.max_iters != 0);
    }
    let mut step = 0.1 * f / (v.len() as f64).sqrt();
    for it in 0..budget.max_iters {
        let before = f;
        let h = 1e-7 * (1.0 + f);
        let grad: Vec<f64> = (0..v.len())
            .map(|i| {
                let mut w = v.clone();
                w[i] += h;
                (prob.cost(&w) - f) / h
            })
            .collect();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut moved = false;
        if gnorm > 0.0 && gnorm.is_finite() {
            let mut alpha = step / gnorm * 4.0;
            for _ in 0..12 {
                let w: Vec<f64> = v.iter().zip(&grad).map(|(x, g)| x - alpha * g).collect();
                let fw = prob.cost(&w);
                if fw < f {
                    v = w;
                    f = fw;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if !moved {
            for i in 0..v.len() {
                for dir in [1.0, -1.0] {
                    let mut w = v.clone();
                    w[i] += dir * step;
                    let fw = prob.cost(&w);
                    if fw < f {
                        v = w;
                        f = fw;
                        moved = true;
                        break;
                    }
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
        let improvement = (before - f) / before.max(f64::MIN_POSITIVE);
        if step < 1e-9 * (1.0 + f) || (moved && improvement < budget.rel_tol) {
            return (v, f, it + 1, true);
        }
    }
    (v, f, budget.max_iters, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn seg(t: f64, cx: f64, cu: f64) -> Segment {
        Segment {
            duration: t,
            cx: vec![cx],
            cu: vec![cu],
        }
    }

    fn p11(x: f64, u1: f64, u0: f64) -> JetPoint<f64> {
        JetPoint::new(1, 1, vec![x], vec![u0, u1]).unwrap()
    }

    #[test]
    fn straight_horizontal_line() {
        let id = JetPoint::<f64>::identity(1, 1);
        let c = HorizontalControl {
            segments: vec![seg(1.0, 1.0, 0.0)],
        };
        assert_eq!(integrate_horizontal(&id, &c).unwrap(), p11(1.0, 0.0, 0.0));
    }

    #[test]
    fn square_switchback_exact() {
        let q = |v: i64| Rational::from_i64(v);
        let s = |cx: i64, cu: i64| Segment {
            duration: q(1),
            cx: vec![q(cx)],
            cu: vec![q(cu)],
        };
        let c = HorizontalControl {
            segments: vec![s(1, 0), s(0, 1), s(-1, 0), s(0, -1)],
        };
        let id = JetPoint::<Rational>::identity(1, 1);
        let end = integrate_horizontal(&id, &c).unwrap();
        assert_eq!(
            end,
            JetPoint::new(1, 1, vec![q(0)], vec![q(-1), q(0)]).unwrap()
        );
    }

    #[test]
    fn wrong_control_width_is_rejected() {
        let id = JetPoint::<f64>::identity(1, 2);
        let c = HorizontalControl {
            segments: vec![Segment {
                duration: 1.0,
                cx: vec![1.0, 2.0],
                cu: vec![0.0],
            }],
        };
        assert!(integrate_horizontal(&id, &c).is_err());
    }

    #[test]
    fn connect_to_self_is_empty() {
        let a = p11(0.3, -1.0, 2.0);
        let c = canonical_connect(&a, &a).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.length(), 0.0);
    }

    #[test]
    fn connect_unit_square_target() {
        let id = JetPoint::<f64>::identity(1, 1);
        let target = p11(0.0, 0.0, -1.0);
        let c = canonical_connect(&id, &target).unwrap();
        let end = integrate_horizontal(&id, &c).unwrap();
        assert!(end.approx_eq(&target, 1e-12));
        assert!(c.length() <= 4.0 + 1e-12, "length {}", c.length());
    }

    #[test]
    fn connect_reaches_targets_in_several_groups() {
        for &(n, k) in &[(1, 1), (1, 2), (1, 3), (2, 1), (2, 2)] {
            let l = layout(n, k);
            let x: Vec<f64> = (0..n).map(|i| 0.7 - 0.4 * i as f64).collect();
            let u: Vec<f64> = (0..l.len())
                .map(|i| ((i * 7 + 3) % 5) as f64 - 2.1)
                .collect();
            let a = JetPoint::new(n, k, vec![0.1; n], vec![0.2; l.len()]).unwrap();
            let b = JetPoint::new(n, k, x, u).unwrap();
            let c = canonical_connect(&a, &b).unwrap();
            let end = integrate_horizontal(&a, &c).unwrap();
            assert!(
                end.max_rel_diff(&b) <= 1e-9 * (1.0 + a.left_quotient(&b).unwrap().norm()),
                "n={n} k={k}: {end:?} vs {b:?}"
            );
        }
    }

    #[test]
    fn top_layer_pair() {
        let a = p11(0.5, 1.0, -2.0);
        let b = a.product(&p11(0.0, 0.8, 0.0)).unwrap();
        let est = cc_upper_bound(&a, &b, &CcBudget::default(), &[]).unwrap();
        assert!((est.lower - 0.8).abs() < 1e-12);
        assert!(est.upper / est.lower <= 1.01, "{}", est.upper);
        let zero = cc_upper_bound(&a, &a, &CcBudget::default(), &[]).unwrap();
        assert_eq!(zero.upper, 0.0);
        assert_eq!(cc_lower_bound(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn optimizer_shortens_switchbacks() {
        let id = JetPoint::<f64>::identity(1, 1);
        let target = p11(0.0, 0.0, -1.0);
        let start = canonical_connect(&id, &target).unwrap().length();
        let est = cc_upper_bound(&id, &target, &CcBudget::default(), &[]).unwrap();
        assert!(est.upper <= start);
        assert!(est.lower <= est.upper);
        let end = integrate_horizontal(&id, &est.witness).unwrap();
        assert!(end.approx_eq(&target, 1e-9));
    }
}
