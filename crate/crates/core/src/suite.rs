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

//! Randomized invariant suites shared by the `selftest` command and the
//! acceptance tests. Each suite reports its case count, failures and the
//! worst observed discrepancy.

use std::time::Instant;

use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cc::{
    cc_lower_bound, cc_upper_bound, integrate_horizontal, CcBudget, HorizontalControl, Segment,
};
use crate::charts::ChartSystem;
use crate::error::{Error, Result};
use crate::geometry::thickness;
use crate::jet::JetPoint;
use crate::lattice::{build_lattice, Cell, PolyPoint};
use crate::multiindex::layout;
use crate::net::{build_net, Family, Net, NetConfig, NetVertex};
use crate::poly::{jet, jet_map_lipschitz_bound, jet_translation, shift_function, Polynomial};
use crate::scalar::{Rational, Scalar};

/// Result of one suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Worst discrepancy (suite specific; 0 for exact identities).
    pub worst: f64,
    pub detail: String,
    pub seconds: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

struct Tally {
    name: String,
    cases: usize,
    failures: usize,
    worst: f64,
    first_failure: Option<String>,
    start: Instant,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Tally {
            name: name.into(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            first_failure: None,
            start: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, discrepancy: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(discrepancy);
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn finish(self) -> SuiteOutcome {
        SuiteOutcome {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            detail: self.first_failure.unwrap_or_default(),
            seconds: self.start.elapsed().as_secs_f64(),
        }
    }
}

fn small_rational(rng: &mut ChaCha8Rng) -> Rational {
    Rational::new(
        BigInt::from(rng.gen_range(-40i64..=40)),
        BigInt::from(rng.gen_range(1i64..=9)),
    )
}

/// Random exact jet with small rational coordinates.
pub fn random_exact_jet(rng: &mut ChaCha8Rng, n: usize, k: u32) -> JetPoint<Rational> {
    let len = layout(n, k).len();
    let x = (0..n).map(|_| small_rational(rng)).collect();
    let u = (0..len).map(|_| small_rational(rng)).collect();
    JetPoint::new(n, k, x, u).expect("shape")
}

/// Random float jet with coordinates in `[-s, s]`.
pub fn random_float_jet(rng: &mut ChaCha8Rng, n: usize, k: u32, s: f64) -> JetPoint<f64> {
    let len = layout(n, k).len();
    let x = (0..n).map(|_| rng.gen_range(-s..s)).collect();
    let u = (0..len).map(|_| rng.gen_range(-s..s)).collect();
    JetPoint::new(n, k, x, u).expect("shape")
}

fn random_exact_poly(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> Polynomial<Rational> {
    let len = layout(n, deg).len();
    Polynomial::from_coeffs(n, deg, (0..len).map(|_| small_rational(rng)).collect()).expect("shape")
}

/// Random float polynomial of degree `deg` with coefficients in `[-1, 1]`.
pub fn random_float_poly(rng: &mut ChaCha8Rng, n: usize, deg: u32) -> Polynomial<f64> {
    let len = layout(n, deg).len();
    Polynomial::from_coeffs(n, deg, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("shape")
}

/// Group axioms and dilation identities in exact arithmetic; `cases`
/// random instances of each identity.
pub fn algebra_suite(n: usize, k: u32, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("algebra (n={n}, k={k})"));
    let e = JetPoint::<Rational>::identity(n, k);
    for _ in 0..cases {
        let (a, b, c) = (
            random_exact_jet(&mut rng, n, k),
            random_exact_jet(&mut rng, n, k),
            random_exact_jet(&mut rng, n, k),
        );
        let l = small_rational(&mut rng);
        let m = small_rational(&mut rng);
        let ab = a.product(&b).expect("shape");
        let left = ab.product(&c).expect("shape");
        let right = a.product(&b.product(&c).expect("shape")).expect("shape");
        t.check(left == right, 0.0, || {
            format!("associativity fails for {a:?}, {b:?}, {c:?}")
        });
        let ok = e.product(&a).expect("shape") == a && a.product(&e).expect("shape") == a;
        t.check(ok, 0.0, || format!("identity law fails for {a:?}"));
        let inv = a.inverse();
        let ok = a.product(&inv).expect("shape").is_identity()
            && inv.product(&a).expect("shape").is_identity();
        t.check(ok, 0.0, || format!("inverse law fails for {a:?}"));
        let ok = ab.dilate(&l) == a.dilate(&l).product(&b.dilate(&l)).expect("shape");
        t.check(ok, 0.0, || {
            format!("dilation is not a homomorphism at L = {l}")
        });
        let ok = a.dilate(&m).dilate(&l) == a.dilate(&(l.clone() * m.clone()));
        t.check(ok, 0.0, || format!("δ_L δ_M ≠ δ_LM at L = {l}, M = {m}"));
    }
    t.finish()
}

/// `j^k_{x+π(a)}(f^a) = a ⊙ j^k_x(f)` and `(f^a)^b = f^{b⊙a}` in exact
/// arithmetic, for random polynomials of degree `k + 2`.
pub fn jet_calculus_suite(n: usize, k: u32, cases: usize, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("jet calculus (n={n}, k={k})"));
    for _ in 0..cases {
        let f = random_exact_poly(&mut rng, n, k + 2);
        let a = random_exact_jet(&mut rng, n, k);
        let b = random_exact_jet(&mut rng, n, k);
        let x: Vec<Rational> = (0..n).map(|_| small_rational(&mut rng)).collect();
        let (lhs, rhs) = jet_translation(&a, &f, &x).expect("shape");
        t.check(lhs == rhs, 0.0, || {
            format!("jet translation fails for a = {a:?}")
        });
        let twice = shift_function(&shift_function(&f, &a).expect("shape"), &b).expect("shape");
        let once = shift_function(&f, &b.product(&a).expect("shape")).expect("shape");
        t.check(twice == once, 0.0, || {
            format!("(f^a)^b ≠ f^(b⊙a) for a = {a:?}, b = {b:?}")
        });
    }
    t.finish()
}

fn random_control(rng: &mut ChaCha8Rng, n: usize, k: u32) -> HorizontalControl {
    let dk = layout(n, k).layer(k).len();
    let segs = rng.gen_range(1..=4);
    HorizontalControl {
        segments: (0..segs)
            .map(|_| Segment {
                duration: rng.gen_range(0.1..1.0),
                cx: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                cu: (0..dk).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            })
            .collect(),
    }
}

/// `g ⊙ integrate(a, c) = integrate(g ⊙ a, c)`; componentwise relative
/// error with the scale floored at 1.
pub fn flow_suite(n: usize, k: u32, cases: usize, tol: f64, seed: u64) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("flow left-invariance (n={n}, k={k})"));
    for _ in 0..cases {
        let g = random_float_jet(&mut rng, n, k, 2.0);
        let a = random_float_jet(&mut rng, n, k, 2.0);
        let c = random_control(&mut rng, n, k);
        let lhs = g
            .product(&integrate_horizontal(&a, &c).expect("widths"))
            .expect("shape");
        let rhs = integrate_horizontal(&g.product(&a).expect("shape"), &c).expect("widths");
        let d = lhs.max_rel_diff(&rhs);
        t.check(d <= tol, d, || {
            format!("discrepancy {d} for g = {g:?}, a = {a:?}")
        });
    }
    t.finish()
}

/// Carnot–Carathéodory estimator checks. Returns four outcomes:
/// lower ≤ upper; top-layer pairs are tight to 1%; jet-curve pairs respect
/// the jet-map bound; homogeneity under dilation with scaled witnesses.
pub fn cc_suite(
    n: usize,
    k: u32,
    pairs: usize,
    aux_pairs: usize,
    homogeneity_pairs: usize,
    budget: &CcBudget,
    seed: u64,
) -> Vec<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut t = Tally::new(format!("cc lower <= upper (n={n}, k={k})"));
    for _ in 0..pairs {
        let a = random_float_jet(&mut rng, n, k, 1.0);
        let b = random_float_jet(&mut rng, n, k, 1.0);
        let lo = cc_lower_bound(&a, &b).expect("shape");
        let est = cc_upper_bound(&a, &b, budget, &[]).expect("shape");
        let (up, raw) = (est.upper, est.witness.length());
        // the witness may undercut the bound only by endpoint slack
        let slack = 1e-6 * (1.0 + lo);
        let ok = lo <= up && raw >= lo - slack;
        t.check(ok, (lo - raw).max(0.0), || {
            format!("lower {lo}, upper {up}, witness length {raw}")
        });
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("cc top-layer tightness (n={n}, k={k})"));
    let l = layout(n, k);
    for _ in 0..aux_pairs {
        let a = random_float_jet(&mut rng, n, k, 1.0);
        let mut v = JetPoint::identity(n, k);
        for p in l.layer(k) {
            v.u[p] = rng.gen_range(-1.0..1.0);
        }
        let b = a.product(&v).expect("shape");
        let lo = cc_lower_bound(&a, &b).expect("shape");
        let up = cc_upper_bound(&a, &b, budget, &[]).expect("shape").upper;
        let ratio = up / lo;
        t.check((1.0..=1.01).contains(&ratio), (ratio - 1.0).abs(), || {
            format!("upper/lower = {ratio}")
        });
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("cc jet-curve bound (n={n}, k={k})"));
    for _ in 0..aux_pairs {
        // degree ≤ k + 1: the jet curve over a segment is a straight horizontal line
        let f = random_float_poly(&mut rng, n, k + 1);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (a, b) = (jet(&f, &x, k), jet(&f, &y, k));
        let init = crate::cc::witness_through(&[a.clone(), b.clone()]);
        let up = cc_upper_bound(&a, &b, budget, &[init])
            .expect("shape")
            .upper;
        let bound = jet_map_lipschitz_bound(&f, &x, &y, k);
        t.check(up <= bound + 1e-6, (up - bound).max(0.0), || {
            format!("upper {up} > bound {bound}")
        });
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("cc homogeneity (n={n}, k={k})"));
    for _ in 0..homogeneity_pairs {
        let a = random_float_jet(&mut rng, n, k, 1.0);
        let b = random_float_jet(&mut rng, n, k, 1.0);
        let base = cc_upper_bound(&a, &b, budget, &[]).expect("shape");
        for lf in [2.0, 3.0] {
            let init = base.witness.dilated(&lf);
            let up = cc_upper_bound(&a.dilate(&lf), &b.dilate(&lf), budget, &[init])
                .expect("shape")
                .upper;
            let bound = lf * base.upper * (1.0 + 1e-6);
            t.check(up <= bound, (up / (lf * base.upper) - 1.0).max(0.0), || {
                format!("L = {lf}: {up} > {bound}")
            });
        }
    }
    out.push(t.finish());
    out
}

fn random_weights(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..m).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Greedy simplex: extends `base` by candidates in order, keeping a
/// candidate while the projection thickness stays ≥ `theta`.
fn greedy_simplex(
    net: &Net,
    base: &[NetVertex],
    cands: &[NetVertex],
    m: usize,
    theta: f64,
) -> Result<Vec<NetVertex>> {
    let mut s: Vec<NetVertex> = base.to_vec();
    for v in cands {
        if s.len() == m {
            break;
        }
        if s.contains(v) {
            continue;
        }
        let mut trial = s.clone();
        trial.push(v.clone());
        let pts: Vec<Vec<f64>> = trial.iter().map(|w| net.vertex_jet(w).to_f64().x).collect();
        if trial.len() == 1 || thickness(&pts) >= theta {
            s = trial;
        }
    }
    if s.len() < m {
        return Err(Error::Internal(format!(
            "no {m}-vertex simplex of thickness {theta} near the sample centre"
        )));
    }
    Ok(s)
}

/// Members of `fam` near `center` (optionally scaled), searching with a
/// radius doubled from 1/8 until at least `want` are found.
fn candidates(
    net: &Net,
    fam: Family,
    center: &JetPoint<Rational>,
    scaled: bool,
    want: usize,
) -> Result<Vec<NetVertex>> {
    let q = if scaled {
        center.dilate(&Rational::new(BigInt::from(1), BigInt::from(net.r)))
    } else {
        center.clone()
    };
    let mut radius = 0.125;
    loop {
        let found = net.members_within(fam, &q, radius)?;
        if found.len() >= want || radius >= 4.0 {
            return Ok(found
                .into_iter()
                .map(|(mut v, _)| {
                    v.scaled = scaled;
                    v
                })
                .collect());
        }
        radius *= 2.0;
    }
}

/// Simplex-map checks on a certified net: vertex interpolation, shared-face
/// agreement, the scaling relation, the translation relation and finite
/// chart Lipschitz estimates.
pub fn simplex_map_suite(n: usize, k: u32, samples: usize, seed: u64) -> Result<Vec<SuiteOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = 0.05;
    let mut cfg = NetConfig::new(24.0, 1.0, 3, seed);
    cfg.density_samples = 50;
    cfg.admissibility_centers = 8;
    let net = build_net(&build_lattice(n, k, 1)?, &cfg)?;
    let center = JetPoint::new(
        n,
        k,
        (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        (0..layout(n, k).len())
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect(),
    )?
    .to_rational();
    let a_cands = candidates(&net, Family::A, &center, false, 8 * (n + 1))?;
    let b_cands = candidates(&net, Family::APrime, &center, true, 8 * (n + 1))?;
    let s1 = greedy_simplex(&net, &[], &a_cands, n + 1, theta)?;
    let face: Vec<NetVertex> = s1[..n].to_vec();
    let others: Vec<NetVertex> = a_cands
        .iter()
        .filter(|v| !s1.contains(v))
        .cloned()
        .collect();
    let s2 = greedy_simplex(&net, &face, &others, n + 1, theta)?;
    // a mixed simplex: one scaled vertex of the other family
    let mixed = greedy_simplex(&net, &face, &b_cands, n + 1, theta)?;
    let scaled_s1: Vec<NetVertex> = s1
        .iter()
        .map(|v| NetVertex {
            scaled: true,
            ..v.clone()
        })
        .collect();
    let all = vec![s1.clone(), s2.clone(), mixed.clone(), scaled_s1.clone()];
    let sys = ChartSystem::build(net.clone(), &all, theta)?;

    let mut out = Vec::new();
    let mut t = Tally::new(format!("F(e_c) = c (n={n}, k={k})"));
    for s in &all {
        for (pos, c) in s.iter().enumerate() {
            let mut v = vec![0.0; s.len()];
            v[pos] = 1.0;
            let d = sys
                .evaluate_f(s, &v)?
                .to_f64()
                .max_rel_diff(&net.vertex_jet(c).to_f64());
            t.check(d <= 1e-9, d, || format!("vertex {c:?} of {s:?}: {d}"));
        }
    }
    for c in a_cands.iter().chain(&b_cands) {
        let d = sys
            .evaluate_f(std::slice::from_ref(c), &[1.0])?
            .to_f64()
            .max_rel_diff(&net.vertex_jet(c).to_f64());
        t.check(d <= 1e-9, d, || format!("vertex {c:?}: {d}"));
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("shared-face agreement (n={n}, k={k})"));
    for _ in 0..samples {
        let w = random_weights(&mut rng, face.len());
        let v: Vec<f64> = w.iter().copied().chain([0.0]).collect();
        let a = sys.evaluate_f(&s1, &v)?.to_f64();
        let b = sys.evaluate_f(&s2, &v)?.to_f64();
        let c = sys.evaluate_f(&mixed, &v)?.to_f64();
        let f = sys.evaluate_f(&face, &w)?.to_f64();
        let d = a
            .max_rel_diff(&b)
            .max(a.max_rel_diff(&c))
            .max(a.max_rel_diff(&f));
        t.check(d <= 1e-9, d, || format!("face point {w:?}: {d}"));
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("scaling relation (n={n}, k={k})"));
    let r = Rational::from_i64(net.r as i64);
    for _ in 0..samples {
        let v = random_weights(&mut rng, s1.len());
        let lhs = sys.evaluate_f(&scaled_s1, &v)?.to_f64();
        let rhs = sys.evaluate_f(&s1, &v)?.dilate(&r).to_f64();
        let d = lhs.max_rel_diff(&rhs);
        t.check(d <= 1e-9, d, || format!("weights {v:?}: {d}"));
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("translation relation (n={n}, k={k})"));
    for s in [&s1, &mixed] {
        let period = if s.iter().any(|v| v.scaled) {
            net.period() * BigInt::from(net.r)
        } else {
            net.period()
        };
        for _ in 0..(samples / 10).max(1) {
            let cell = Cell {
                x: (0..n)
                    .map(|_| BigInt::from(rng.gen_range(-3i64..=3)))
                    .collect(),
                c: (0..layout(n, k).len())
                    .map(|_| BigInt::from(rng.gen_range(-3i64..=3)))
                    .collect(),
            };
            let gamma: PolyPoint<Rational> = cell
                .to_poly_point(k)
                .dilate(&Rational::from_integer(period.clone()));
            let moved: Vec<NetVertex> = s
                .iter()
                .map(|v| sys.act(&gamma, v))
                .collect::<Result<_>>()?;
            let g = sys.engine_element(&gamma);
            for _ in 0..10 {
                let v = random_weights(&mut rng, s.len());
                let lhs = sys.evaluate_f(&moved, &v)?.to_f64();
                let rhs = g.product(&sys.evaluate_f(s, &v)?)?.to_f64();
                let d = lhs.max_rel_diff(&rhs);
                t.check(d <= 1e-9, d, || format!("γ = {gamma:?}: {d}"));
            }
        }
    }
    out.push(t.finish());

    let mut t = Tally::new(format!("finite chart Lipschitz bound (n={n}, k={k})"));
    let mut rho: f64 = 0.0;
    for s in &all {
        let l = sys.chart_lipschitz(s)?;
        rho = rho.max(l);
        t.check(l.is_finite(), 0.0, || format!("ϱ infinite on {s:?}"));
    }
    let mut o = t.finish();
    o.worst = rho;
    o.detail = format!("max ϱ = {rho}");
    out.push(o);
    Ok(out)
}
