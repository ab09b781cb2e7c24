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

//! Simplexwise jet maps `F`, `F′` on the simplicial complexes spanned by
//! `Γ = A ∪ δ_r(A′)` and `Γ′ = A′ ∪ δ_r(A)`.
//!
//! Each simplex `S` carries a smooth function `f_S`, and `F|_S = j^k(f_S) ∘ π̄_S`.
//! Every face `W` of `S` has a prism-shaped neighborhood `U_W` of its
//! projection hull, with radius `ε_{|W|}` from a ladder (`r·ε_{|W|}` when all
//! vertices of `W` are scaled). It also has a cutoff `ψ_W`, which is `1` on
//! `½U_W` and supported in `U_W`, and a polynomial `q_W`: the vertex Taylor
//! polynomial, or a least-squares fit of the vertex jets. The blend
//!
//! ```text
//! R_0 = 1,  f_S = Σ_d Σ_{|W| = d+1} R_d ψ_W q_W + R_{m−1} q_S,
//! R_{d+1} = R_d Π_{|W| = d+1} (1 − ψ_W)
//! ```
//!
//! is a partition of unity whenever distinct faces that do not contain
//! each other satisfy `U_A ∩ U_B ⊂ ½U_{A∩B}`. In that case `f_S = f_W` on
//! `U_S ∩ ½U_W` for every face `W`. The blend commutes with left
//! translations, so every chart is built in a frame where its first vertex
//! is the identity; `F|_{γS} = γ ⊙ F|_S` then holds by construction.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use num::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, dot, solve, thickness, SimplexFrame};
use crate::jet::JetPoint;
use crate::lattice::{Cell, PolyPoint};
use crate::multiindex::layout;
use crate::net::{Net, NetVertex};
use crate::poly::{taylor_polynomial_of, Polynomial};
use crate::scalar::{Rational, Scalar};
use crate::smooth::{cutoff, Series};

/// Neighborhood radii `ε_1 > ε_2 > … > ε_{n+1}` for faces with
/// `1, 2, …, n+1` vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ladder {
    pub eps: Vec<f64>,
}

impl Ladder {
    /// `ε_1 = ε/4`, `ε_{m+1} = ε_m/8`.
    pub fn initial(eps: f64, n: usize) -> Self {
        let mut v = vec![eps / 4.0];
        for _ in 1..=n {
            let last = *v.last().expect("nonempty");
            v.push(last / 8.0);
        }
        Ladder { eps: v }
    }

    pub fn halved(&self) -> Self {
        Ladder {
            eps: self.eps.iter().map(|e| e / 2.0).collect(),
        }
    }
}

struct Face {
    members: Vec<usize>,
    radius: f64,
    frame: SimplexFrame,
    q: Polynomial<f64>,
}

/// The function `f_S` of one simplex, in the frame of its first vertex.
pub struct Chart {
    pub vertices: Vec<NetVertex>,
    anchor: PolyPoint<Rational>,
    /// Projections of the vertices in the local frame.
    local_x: Vec<Vec<f64>>,
    faces: Vec<Face>,
    k: u32,
}

fn affine_series(z0: &[f64], order: u32, c0: f64, grad: &[f64]) -> Series {
    let mut s = Series::constant(z0, order, c0 + dot(grad, z0));
    for (i, g) in grad.iter().enumerate() {
        if *g != 0.0 {
            s = s.add(
                &Series::coordinate(z0, order, i)
                    .scale(*g)
                    .add_constant(-g * z0[i]),
            );
        }
    }
    s
}

/// Least-squares degree-`k` polynomial matching all jets, solved in
/// centered and scaled coordinates.
fn least_squares_fit(jets: &[JetPoint<f64>]) -> Result<Polynomial<f64>> {
    let (n, k) = (jets[0].n(), jets[0].k());
    let l = layout(n, k);
    let c: Vec<f64> = (0..n)
        .map(|i| jets.iter().map(|j| j.x[i]).sum::<f64>() / jets.len() as f64)
        .collect();
    let h = jets
        .iter()
        .map(|j| crate::geometry::dist(&j.x, &c))
        .fold(0.0, f64::max)
        .max(1e-300);
    // unknowns: coefficients of Q(ζ) with z = c + h ζ
    let nu = l.len();
    let mut ata = vec![vec![0.0; nu]; nu];
    let mut atb = vec![0.0; nu];
    for jet in jets {
        let zeta: Vec<f64> = jet.x.iter().zip(&c).map(|(x, ci)| (x - ci) / h).collect();
        for (pi, idx) in l.indices.iter().enumerate() {
            // row: ∂_I of each monomial at ζ, rhs h^{|I|} b_I
            let row: Vec<f64> = l
                .indices
                .iter()
                .map(|mono| {
                    if !mono.dominates(idx) {
                        return 0.0;
                    }
                    let fall: f64 = mono
                        .0
                        .iter()
                        .zip(&idx.0)
                        .map(|(&a, &b)| ((a - b + 1)..=a).map(|v| v as f64).product::<f64>())
                        .product();
                    fall * mono.minus(idx).monomial(&zeta)
                })
                .collect();
            let rhs = h.powi(idx.degree() as i32) * jet.u[pi];
            for a in 0..nu {
                atb[a] += row[a] * rhs;
                for b in 0..nu {
                    ata[a][b] += row[a] * row[b];
                }
            }
        }
    }
    let coeffs =
        solve(&ata, &atb).ok_or_else(|| Error::Internal("singular least-squares system".into()))?;
    // q(z) = Q((z − c)/h)
    let mut scaled = Polynomial::from_coeffs(n, k, coeffs)?;
    for (pos, idx) in l.indices.iter().enumerate() {
        scaled.coeffs[pos] /= h.powi(idx.degree() as i32);
    }
    Ok(scaled.translate(&c))
}

impl Chart {
    fn new(sys: &ChartSystem, vertices: Vec<NetVertex>) -> Result<Chart> {
        let (net, ladder) = (&sys.net, &sys.ladder);
        let factors = vertices
            .iter()
            .map(|v| sys.vertex_factor(v))
            .collect::<Result<Vec<f64>>>()?;
        let k = net.k();
        let r = net.r as f64;
        let exact: Vec<PolyPoint<Rational>> =
            vertices.iter().map(|v| net.vertex_point(v)).collect();
        let anchor = exact[0].clone();
        let inv = anchor.inverse();
        let local: Vec<JetPoint<f64>> = exact
            .iter()
            .map(|p| inv.product(p).to_jet().to_f64())
            .collect();
        let local_x: Vec<Vec<f64>> = local.iter().map(|j| j.x.clone()).collect();
        let m = vertices.len();
        let mut faces = Vec::new();
        for size in 1..=m {
            for mask in 1u32..(1 << m) {
                if mask.count_ones() as usize != size {
                    continue;
                }
                let members: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
                let pts: Vec<Vec<f64>> = members.iter().map(|&i| local_x[i].clone()).collect();
                let frame = SimplexFrame::new(&pts).ok_or_else(|| {
                    Error::Certification(format!(
                        "degenerate projection simplex {:?}",
                        members.iter().map(|&i| &vertices[i]).collect::<Vec<_>>()
                    ))
                })?;
                let all_scaled = members.iter().all(|&i| vertices[i].scaled);
                let mut radius =
                    ladder.eps[size - 1] * members.iter().map(|&i| factors[i]).fold(1.0, f64::min);
                if all_scaled {
                    radius *= r;
                }
                let q = if size == 1 {
                    taylor_polynomial_of(&local[members[0]])
                } else if all_scaled {
                    let inv_r = 1.0 / r;
                    let pre: Vec<JetPoint<f64>> =
                        members.iter().map(|&i| local[i].dilate(&inv_r)).collect();
                    least_squares_fit(&pre)?.rescale(&r, k)
                } else {
                    let js: Vec<JetPoint<f64>> =
                        members.iter().map(|&i| local[i].clone()).collect();
                    least_squares_fit(&js)?
                };
                faces.push(Face {
                    members,
                    radius,
                    frame,
                    q,
                });
            }
        }
        Ok(Chart {
            vertices,
            anchor,
            local_x,
            faces,
            k,
        })
    }

    fn psi(&self, face: &Face, z: &[f64], order: u32) -> Option<Series> {
        let g = face.frame.gauge(z);
        if g >= face.radius {
            return None;
        }
        let rho = face.radius;
        let n = z.len();
        // d_⊥² as a quadratic series
        let mut d2 = Series::constant(z, order, 0.0);
        let v: Vec<Series> = (0..n)
            .map(|i| Series::coordinate(z, order, i).add_constant(-face.frame.origin[i]))
            .collect();
        for vi in &v {
            d2 = d2.add(&vi.mul(vi));
        }
        for e in &face.frame.basis {
            let mut p = Series::constant(z, order, 0.0);
            for (vi, ei) in v.iter().zip(e) {
                p = p.add(&vi.scale(*ei));
            }
            d2 = d2.sub(&p.mul(&p));
        }
        let mut out = cutoff(&d2.scale(1.0 / (rho * rho)));
        if face.members.len() > 1 {
            for (row, h) in face.frame.lambda.iter().zip(&face.frame.heights) {
                let lam = affine_series(z, order, row[0], &row[1..]);
                out = out.mul(&cutoff(&lam.scale(-h / rho)));
            }
        }
        Some(out)
    }

    /// Series of `f_S` (local frame) at `z` to the given order.
    fn series(&self, z: &[f64], order: u32) -> Series {
        let m = self.vertices.len();
        let mut rem = Series::constant(z, order, 1.0);
        let mut f = Series::constant(z, order, 0.0);
        let is_zero = |s: &Series| s.coeffs.iter().all(|c| *c == 0.0);
        for size in 1..m {
            let mut prod = Series::constant(z, order, 1.0);
            for face in self.faces.iter().filter(|f| f.members.len() == size) {
                if let Some(psi) = self.psi(face, z, order) {
                    let q = Series::from_polynomial(&face.q, z, order);
                    f = f.add(&rem.mul(&psi).mul(&q));
                    prod = prod.mul(&psi.scale(-1.0).add_constant(1.0));
                }
            }
            rem = rem.mul(&prod);
            if is_zero(&rem) {
                return f;
            }
        }
        let top = self.faces.last().expect("top face");
        f.add(&rem.mul(&Series::from_polynomial(&top.q, z, order)))
    }

    /// `j^k_{π̄_S(v)}(f_S)` in engine coordinates (exact product with the
    /// anchor), for barycentric weights over [`Chart::vertices`].
    pub fn jet_at_barycentric(&self, v: &[f64]) -> JetPoint<Rational> {
        let z = self.local_point(v);
        let local = self.series(&z, self.k).jet(self.k);
        PolyPoint::from_jet(&local.to_rational()).pipe_product(&self.anchor)
    }

    fn local_point(&self, v: &[f64]) -> Vec<f64> {
        let n = self.local_x[0].len();
        (0..n)
            .map(|i| v.iter().zip(&self.local_x).map(|(w, x)| w * x[i]).sum())
            .collect()
    }

    /// `sqrt(1 + Σ_{I ∈ I(k)} Σ_i (∂_{I+e_i} f_S)²)` at a local point.
    fn speed_factor(&self, z: &[f64]) -> f64 {
        let s = self.series(z, self.k + 1);
        let d = s.derivatives();
        let l = layout(z.len(), self.k + 1);
        let mut acc = 1.0;
        for pos in l.layer(self.k + 1) {
            let idx = &l.indices[pos];
            // each (I, i) with I + e_i = idx contributes once per i with idx_i > 0
            let mult = idx.0.iter().filter(|&&e| e > 0).count() as f64;
            acc += mult * d[pos] * d[pos];
        }
        acc.sqrt()
    }

    /// Checks `U_A ∩ U_B ⊂ ½U_{A∩B}` for distinct faces neither of which
    /// contains the other, on a grid over the intersection of their bounding
    /// boxes (neighborhoods inflated by 5%, target shrunk by 4%).
    fn nesting_violation(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let n = self.local_x[0].len();
        let grid: usize = match n {
            1 => 257,
            2 => 41,
            _ => 13,
        };
        for (ia, a) in self.faces.iter().enumerate() {
            for b in self.faces.iter().skip(ia + 1) {
                let sub = |x: &Face, y: &Face| x.members.iter().all(|i| y.members.contains(i));
                if sub(a, b) || sub(b, a) {
                    continue;
                }
                let common: Vec<usize> = a
                    .members
                    .iter()
                    .copied()
                    .filter(|i| b.members.contains(i))
                    .collect();
                let target = self.faces.iter().find(|f| f.members == common);
                let (la, ha) = self.bbox(a);
                let (lb, hb) = self.bbox(b);
                let lo: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x.max(*y)).collect();
                let hi: Vec<f64> = ha.iter().zip(&hb).map(|(x, y)| x.min(*y)).collect();
                if lo.iter().zip(&hi).any(|(l, h)| l > h) {
                    continue;
                }
                let total = grid.pow(n as u32);
                for flat in 0..total {
                    let mut rest = flat;
                    let z: Vec<f64> = (0..n)
                        .map(|i| {
                            let t = (rest % grid) as f64 / (grid - 1) as f64;
                            rest /= grid;
                            lo[i] + t * (hi[i] - lo[i])
                        })
                        .collect();
                    if a.frame.gauge(&z) < 1.05 * a.radius && b.frame.gauge(&z) < 1.05 * b.radius {
                        let ok = target.is_some_and(|t| t.frame.gauge(&z) < 0.48 * t.radius);
                        if !ok {
                            return Some((a.members.clone(), b.members.clone()));
                        }
                    }
                }
            }
        }
        None
    }

    /// Bounding box of the 5%-inflated prism `U_W`.
    fn bbox(&self, f: &Face) -> (Vec<f64>, Vec<f64>) {
        let rho = 1.05 * f.radius;
        let pts: Vec<&Vec<f64>> = f.members.iter().map(|&i| &self.local_x[i]).collect();
        let n = pts[0].len();
        let m = pts.len();
        // vertices of the expanded simplex {λ_j ≥ −ρ/h_j}
        let mut corners: Vec<Vec<f64>> = Vec::new();
        if m == 1 {
            corners.push(pts[0].clone());
        } else {
            let off: Vec<f64> = f.frame.heights.iter().map(|h| rho / h).collect();
            for j in 0..m {
                let lam: Vec<f64> = (0..m)
                    .map(|i| {
                        if i == j {
                            1.0 + off
                                .iter()
                                .enumerate()
                                .filter(|(t, _)| *t != j)
                                .map(|(_, o)| o)
                                .sum::<f64>()
                        } else {
                            -off[i]
                        }
                    })
                    .collect();
                corners.push(
                    (0..n)
                        .map(|c| lam.iter().zip(&pts).map(|(l, p)| l * p[c]).sum())
                        .collect(),
                );
            }
        }
        let lo = (0..n)
            .map(|c| corners.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min) - rho)
            .collect();
        let hi = (0..n)
            .map(|c| {
                corners
                    .iter()
                    .map(|p| p[c])
                    .fold(f64::NEG_INFINITY, f64::max)
                    + rho
            })
            .collect();
        (lo, hi)
    }

    /// Operator norm of `π̄_S` on tangent vectors of the simplex.
    fn projection_norm(&self) -> f64 {
        let m = self.local_x.len();
        if m < 2 {
            return 0.0;
        }
        // orthonormal basis of {Σ v = 0} by Gram–Schmidt on e_i − e_m
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for i in 0..m - 1 {
            let mut v = vec![0.0; m];
            v[i] = 1.0;
            v[m - 1] = -1.0;
            for b in &basis {
                let d = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let l = dot(&v, &v).sqrt();
            basis.push(v.iter().map(|x| x / l).collect());
        }
        let n = self.local_x[0].len();
        let cols: Vec<Vec<f64>> = basis
            .iter()
            .map(|b| {
                (0..n)
                    .map(|c| b.iter().zip(&self.local_x).map(|(w, p)| w * p[c]).sum())
                    .collect()
            })
            .collect();
        let d = cols.len();
        let gram: Vec<Vec<f64>> = (0..d)
            .map(|a| (0..d).map(|b| dot(&cols[a], &cols[b])).collect())
            .collect();
        let mut v = vec![1.0; d];
        let mut lam = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = gram.iter().map(|row| dot(row, &v)).collect();
            let nw = dot(&w, &w).sqrt();
            if nw == 0.0 {
                return 0.0;
            }
            lam = nw / dot(&v, &v).sqrt();
            v = w.iter().map(|x| x / nw).collect();
        }
        lam.sqrt()
    }
}

trait PipeProduct {
    fn pipe_product(&self, anchor: &PolyPoint<Rational>) -> JetPoint<Rational>;
}

impl PipeProduct for PolyPoint<Rational> {
    fn pipe_product(&self, anchor: &PolyPoint<Rational>) -> JetPoint<Rational> {
        anchor.product(self).to_jet()
    }
}

/// The chart family over a certified net.
pub struct ChartSystem {
    pub net: Net,
    pub ladder: Ladder,
    pub theta_min: f64,
    /// Radius factors by vertex orbit (see [`ChartSystem::vertex_factor`]).
    vertex_scales: BTreeMap<NetVertex, f64>,
    cache: Mutex<HashMap<Vec<NetVertex>, Arc<Chart>>>,
}

/// Serializable description from which a chart system is rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSystemSpec {
    pub net: Net,
    pub ladder: Ladder,
    pub theta_min: f64,
    #[serde(default)]
    pub vertex_scales: Vec<(NetVertex, f64)>,
}

fn canonical(s: &[NetVertex]) -> Vec<NetVertex> {
    let mut v = s.to_vec();
    v.sort();
    v.dedup();
    v
}

impl ChartSystem {
    /// Builds charts for `simplices`, halving the ladder until the
    /// neighborhood nesting holds on all of them. Fails if a simplex has
    /// projection thickness below `theta_min`.
    pub fn build(net: Net, simplices: &[Vec<NetVertex>], theta_min: f64) -> Result<ChartSystem> {
        let ladder = Ladder::initial(net.eps, net.n());
        let mut sys = ChartSystem {
            net,
            ladder,
            theta_min,
            vertex_scales: BTreeMap::new(),
            cache: Mutex::new(HashMap::new()),
        };
        let mut sets: Vec<Vec<NetVertex>> = simplices.iter().map(|s| canonical(s)).collect();
        sets.sort();
        sets.dedup();
        let r = sys.net.r as f64;
        let eps1 = sys.ladder.eps[0];
        for s in &sets {
            let pts: Vec<Vec<f64>> = s.iter().map(|v| sys.net.vertex_jet(v).to_f64().x).collect();
            let th = thickness(&pts);
            if th < theta_min {
                return Err(Error::Certification(format!(
                    "simplex {s:?} has projection thickness {th} < {theta_min}"
                )));
            }
            for (a, va) in s.iter().enumerate() {
                for b in 0..s.len() {
                    if a == b {
                        continue;
                    }
                    // gap in the unscaled units of `va`
                    let gap = dist(&pts[a], &pts[b]) / if va.scaled { r } else { 1.0 };
                    let f = (gap / eps1).min(1.0);
                    let key = sys.vertex_key(va)?;
                    let e = sys.vertex_scales.entry(key).or_insert(1.0);
                    *e = e.min(f);
                }
            }
        }
        'outer: for _ in 0..200 {
            for s in &sets {
                let chart = Chart::new(&sys, s.clone())?;
                if chart.nesting_violation().is_some() {
                    sys.ladder = sys.ladder.halved();
                    continue 'outer;
                }
            }
            return Ok(sys);
        }
        Err(Error::Certification(
            "neighborhood ladder did not converge".into(),
        ))
    }

    /// Orbit key of a vertex, shared with its rescaled copy.
    fn vertex_key(&self, v: &NetVertex) -> Result<NetVertex> {
        let plain = NetVertex {
            scaled: false,
            ..v.clone()
        };
        Ok(self.representative(&[plain])?.0.remove(0))
    }

    /// Radius factor of a vertex: the smallest projection gap to another
    /// vertex of a build simplex (unscaled units) over `ε_1`, capped at 1.
    /// It depends only on the orbit of the vertex, so face data agree
    /// between simplices and commute with translations and rescaling.
    /// Vertices outside the build set get the smallest factor.
    pub fn vertex_factor(&self, v: &NetVertex) -> Result<f64> {
        let key = self.vertex_key(v)?;
        Ok(match self.vertex_scales.get(&key) {
            Some(f) => *f,
            None => self.vertex_scales.values().copied().fold(1.0, f64::min),
        })
    }

    pub fn from_spec(spec: ChartSystemSpec) -> ChartSystem {
        ChartSystem {
            net: spec.net,
            ladder: spec.ladder,
            theta_min: spec.theta_min,
            vertex_scales: spec.vertex_scales.into_iter().collect(),
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> ChartSystemSpec {
        ChartSystemSpec {
            net: self.net.clone(),
            ladder: self.ladder.clone(),
            theta_min: self.theta_min,
            vertex_scales: self
                .vertex_scales
                .iter()
                .map(|(v, f)| (v.clone(), *f))
                .collect(),
        }
    }

    /// The chart of the vertex set of `s`, built on first use. Simplices
    /// outside the build set are checked for nesting before use.
    pub fn chart(&self, s: &[NetVertex]) -> Result<Arc<Chart>> {
        let key = canonical(s);
        if let Some(c) = self.cache.lock().expect("chart cache").get(&key) {
            return Ok(c.clone());
        }
        let chart = Chart::new(self, key.clone())?;
        if let Some((a, b)) = chart.nesting_violation() {
            return Err(Error::Certification(format!(
                "ladder {:?} too coarse for {key:?}: faces {a:?}, {b:?}",
                self.ladder.eps
            )));
        }
        let chart = Arc::new(chart);
        self.cache
            .lock()
            .expect("chart cache")
            .insert(key, chart.clone());
        Ok(chart)
    }

    /// `F|_S(v) = j^k_{π̄_S(v)}(f_S)`, exact up to the local chart
    /// evaluation. Repeated vertices have their weights summed.
    pub fn evaluate_f(&self, s: &[NetVertex], v: &[f64]) -> Result<JetPoint<Rational>> {
        if s.len() != v.len() || s.is_empty() {
            return Err(Error::Domain(format!(
                "{} barycentric weights for {} vertices",
                v.len(),
                s.len()
            )));
        }
        let sum: f64 = v.iter().sum();
        if v.iter().any(|w| *w < -1e-12 || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("{v:?} is not in the closed simplex")));
        }
        let chart = self.chart(s)?;
        let mut w = vec![0.0; chart.vertices.len()];
        for (vert, wt) in s.iter().zip(v) {
            let i = chart
                .vertices
                .iter()
                .position(|c| c == vert)
                .expect("chart contains every vertex");
            w[i] += wt.max(0.0);
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        Ok(chart.jet_at_barycentric(&w))
    }

    /// Upper estimate `ϱ_S` for the Lipschitz constant of `F|_S`:
    /// `‖π̄_S‖ · sup` of the jet-curve speed factor over sampled points of
    /// the projection hull.
    pub fn chart_lipschitz(&self, s: &[NetVertex]) -> Result<f64> {
        let chart = self.chart(s)?;
        let m = chart.vertices.len();
        if m < 2 {
            return Ok(0.0);
        }
        let res = match m {
            2 => 64,
            3 => 16,
            _ => 8,
        };
        let mut sup: f64 = 1.0;
        let mut counts = vec![0usize; m];
        loop {
            let used: usize = counts[..m - 1].iter().sum();
            if used <= res {
                counts[m - 1] = res - used;
                let v: Vec<f64> = counts.iter().map(|c| *c as f64 / res as f64).collect();
                sup = sup.max(chart.speed_factor(&chart.local_point(&v)));
            }
            let mut i = 0;
            loop {
                if i == m - 1 {
                    return Ok(chart.projection_norm() * sup);
                }
                counts[i] += 1;
                if counts[..m - 1].iter().sum::<usize>() <= res {
                    break;
                }
                counts[i] = 0;
                i += 1;
            }
        }
    }

    /// Invariance period (fine units) of the orbit family of `s`.
    fn orbit_period(&self, s: &[NetVertex]) -> BigInt {
        let p = self.net.period();
        if s.iter().all(|v| !v.scaled) {
            p
        } else {
            p * BigInt::from(self.net.r)
        }
    }

    /// Applies `γ` (fine units, in the invariance group of `s`) to a vertex.
    pub fn act(&self, gamma: &PolyPoint<Rational>, v: &NetVertex) -> Result<NetVertex> {
        let k = self.net.k();
        let g = if v.scaled {
            gamma.dilate(&Rational::new(BigInt::from(1), BigInt::from(self.net.r)))
        } else {
            gamma.clone()
        };
        let cell = Cell::from_poly_point(&g.product(&v.cell.to_poly_point(k)))?;
        Ok(NetVertex {
            family: v.family,
            scaled: v.scaled,
            cell,
        })
    }

    /// Orbit representative `S₀` and `γ` with `S = γ S₀`: the
    /// lexicographically smallest vertex set among the translates that move
    /// one vertex cell into the fundamental domain.
    pub fn representative(&self, s: &[NetVertex]) -> Result<(Vec<NetVertex>, PolyPoint<Rational>)> {
        let key = canonical(s);
        let period = self.orbit_period(&key);
        let k = self.net.k();
        let r = Rational::from_i64(self.net.r as i64);
        let mut best: Option<(Vec<NetVertex>, PolyPoint<Rational>)> = None;
        for v in &key {
            let cell = v.cell.to_poly_point(k);
            let gamma = if v.scaled {
                let per = &period / BigInt::from(self.net.r);
                let (g, _) = self.net.lattice.reduce(&cell, &per);
                g.dilate(&r)
            } else {
                self.net.lattice.reduce(&cell, &period).0
            };
            let inv = gamma.inverse();
            let mut moved = key
                .iter()
                .map(|w| self.act(&inv, w))
                .collect::<Result<Vec<_>>>()?;
            moved.sort();
            if best.as_ref().is_none_or(|(b, _)| moved < *b) {
                best = Some((moved, gamma));
            }
        }
        Ok(best.expect("nonempty simplex"))
    }

    /// Engine-unit group element of a fine-unit translation.
    pub fn engine_element(&self, gamma: &PolyPoint<Rational>) -> JetPoint<Rational> {
        gamma
            .dilate(&Rational::new(
                BigInt::from(1),
                BigInt::from(self.net.cells_per_unit),
            ))
            .to_jet()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::net::{build_net, Family, NetConfig};

    fn net(n: usize, k: u32) -> Net {
        let mut cfg = NetConfig::new(8.0, 1.0, 3, 11);
        cfg.density_samples = 5;
        cfg.admissibility_centers = 2;
        build_net(&build_lattice(n, k, 1).unwrap(), &cfg).unwrap()
    }

    fn near(net: &Net, fam: Family, x: &[f64], u: &[f64]) -> NetVertex {
        let q = JetPoint::new(net.n(), net.k(), x.to_vec(), u.to_vec()).unwrap();
        net.nearest(fam, &q.to_rational()).unwrap().0
    }

    #[test]
    fn ladder_shape() {
        let l = Ladder::initial(24.0, 2);
        assert_eq!(l.eps, vec![6.0, 0.75, 0.09375]);
    }

    #[test]
    fn least_squares_reproduces_polynomial_jets() {
        let p = Polynomial::from_terms(1, 2, &[(vec![0], 1.0), (vec![1], -2.0), (vec![2], 0.5)])
            .unwrap();
        let jets: Vec<JetPoint<f64>> = [0.0, 0.7, 2.0]
            .iter()
            .map(|x| crate::poly::jet(&p, &[*x], 2))
            .collect();
        let q = least_squares_fit(&jets).unwrap();
        assert!(q.approx_eq(&p, 1e-9));
    }

    #[test]
    fn vertices_interpolate_and_faces_agree() {
        let net = net(1, 1);
        let a = near(&net, Family::A, &[0.0], &[0.0, 0.0]);
        let b = near(&net, Family::A, &[1.3], &[0.5, 1.0]);
        let c = near(&net, Family::A, &[-1.1], &[1.5, -1.0]);
        let sys = ChartSystem::build(
            net.clone(),
            &[vec![a.clone(), b.clone()], vec![a.clone(), c.clone()]],
            0.05,
        )
        .unwrap();
        for v in [&a, &b] {
            let f = sys
                .evaluate_f(
                    &[a.clone(), b.clone()],
                    &[
                        if v == &a { 1.0 } else { 0.0 },
                        if v == &a { 0.0 } else { 1.0 },
                    ],
                )
                .unwrap();
            assert!(f.to_f64().max_rel_diff(&net.vertex_jet(v).to_f64()) < 1e-9);
        }
        let from_ab = sys
            .evaluate_f(&[a.clone(), b.clone()], &[1.0, 0.0])
            .unwrap()
            .to_f64();
        let from_ac = sys
            .evaluate_f(&[a.clone(), c.clone()], &[1.0, 0.0])
            .unwrap()
            .to_f64();
        assert!(from_ab.max_rel_diff(&from_ac) < 1e-9);
        assert!(sys.chart_lipschitz(std::slice::from_ref(&a)).unwrap() == 0.0);
        assert!(sys.chart_lipschitz(&[a, b]).unwrap().is_finite());
    }

    #[test]
    fn outside_simplex_is_domain_error() {
        let net = net(1, 1);
        let a = near(&net, Family::A, &[0.0], &[0.0, 0.0]);
        let b = near(&net, Family::A, &[1.0], &[0.0, 0.0]);
        let sys = ChartSystem::build(net, &[vec![a.clone(), b.clone()]], 0.05).unwrap();
        assert!(matches!(
            sys.evaluate_f(&[a.clone(), b.clone()], &[1.5, -0.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            sys.evaluate_f(&[a, b], &[0.5, 0.4]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn translation_and_scaling_relations() {
        let net = net(1, 2);
        let a = near(&net, Family::A, &[0.2], &[0.1, -0.3, 0.4]);
        let b = near(&net, Family::A, &[1.4], &[0.6, 0.2, -0.2]);
        let s = vec![a.clone(), b.clone()];
        let nn = net.period();
        let gamma = PolyPoint {
            x: vec![Rational::from_integer(nn.clone() * 2)],
            p: Polynomial::from_coeffs(
                1,
                2,
                vec![
                    Rational::from_integer(nn.pow(3) * 5),
                    Rational::from_integer(-nn.pow(2)),
                    Rational::from_integer(nn.clone() * 3),
                ],
            )
            .unwrap(),
        };
        let sys = ChartSystem::build(net.clone(), std::slice::from_ref(&s), 0.05).unwrap();
        let moved: Vec<NetVertex> = s.iter().map(|v| sys.act(&gamma, v).unwrap()).collect();
        let g_eng = sys.engine_element(&gamma);
        let scaled: Vec<NetVertex> = s
            .iter()
            .map(|v| NetVertex {
                family: v.family,
                scaled: true,
                cell: v.cell.clone(),
            })
            .collect();
        let r = Rational::from_i64(3);
        for t in [0.0, 0.25, 0.5, 0.9] {
            let w = [1.0 - t, t];
            let base = sys.evaluate_f(&s, &w).unwrap();
            let there = sys.evaluate_f(&moved, &w).unwrap();
            let expect = g_eng.product(&base).unwrap();
            assert!(there.to_f64().max_rel_diff(&expect.to_f64()) < 1e-9);
            let sc = sys.evaluate_f(&scaled, &w).unwrap();
            assert!(sc.to_f64().max_rel_diff(&base.dilate(&r).to_f64()) < 1e-9);
        }
        let (rep, g) = sys.representative(&moved).unwrap();
        let (rep0, g0) = sys.representative(&s).unwrap();
        assert_eq!(rep, rep0);
        assert_eq!(g, gamma.product(&g0));
    }
}
