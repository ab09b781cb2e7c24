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

//! Admissible nets `A`, `A′` in `J^k(R^n)`.
//!
//! Nets are procedural. Work in *fine units*, where the lattice `Λ_1` has
//! unit spacing. Every cell `c ∈ Λ_1` carries one net point `c ⊙ (w, 0)`, a
//! small horizontal offset `w` of its base point. The offset is a hash of
//! the coset of `c` modulo `δ_N(Λ_1)`, the seed, the family and a retry
//! counter. The net is therefore invariant under `δ_N(Λ_1)`. Engine units
//! are fine units scaled by `δ_s` with `s = 1/cells_per_unit`, so in engine
//! units the net is invariant under `δ_κ(Λ_1)` with `κ = s·N`.
//!
//! Nearest-member queries are exact: the query is brought next to the
//! origin by an integer translation, then a branch-and-bound search runs
//! over integer polynomial coefficients in rational arithmetic.

use num::{BigInt, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::thickness;
use crate::jet::{quasi_distance, JetPoint};
use crate::lattice::{Cell, LatticeSpec, PolyPoint};
use crate::multiindex::{binomial, Layout};
use crate::poly::Polynomial;
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    APrime,
}

impl Family {
    pub fn other(self) -> Family {
        match self {
            Family::A => Family::APrime,
            Family::APrime => Family::A,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Family::A => 0,
            Family::APrime => 1,
        }
    }
}

/// A point of `A`, `A′`, `δ_r(A)` or `δ_r(A′)`, identified by its cell.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NetVertex {
    pub family: Family,
    pub scaled: bool,
    pub cell: Cell,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub eps: f64,
    pub eps_prime: f64,
    pub r: u32,
    pub seed: u64,
    /// Fine cells per engine unit.
    pub cells_per_unit: u64,
    /// Invariance period in engine units. Defaults to the smallest power of
    /// two that is at least `8ε`.
    pub kappa: Option<u64>,
    pub density_samples: usize,
    pub admissibility_centers: usize,
    pub max_retries: u32,
}

impl NetConfig {
    pub fn new(eps: f64, eps_prime: f64, r: u32, seed: u64) -> Self {
        NetConfig {
            eps,
            eps_prime,
            r,
            seed,
            cells_per_unit: 4,
            kappa: None,
            density_samples: 1000,
            admissibility_centers: 64,
            max_retries: 100,
        }
    }
}

/// Sampled certificates attached to a net.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetReport {
    /// Largest quasi-distance from a sampled point to its nearest member.
    pub density_max: f64,
    pub density_samples: usize,
    /// Smallest projection thickness among sampled admissibility tuples.
    pub min_thickness: f64,
    /// Smallest projection gap among sampled pairs.
    pub min_gap: f64,
    pub tuples_checked: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub lattice: LatticeSpec,
    pub r: u32,
    pub eps: f64,
    pub eps_prime: f64,
    pub seed: u64,
    pub cells_per_unit: u64,
    pub kappa: u64,
    /// Perturbation generation of `A` and `A′`.
    pub retries: [u32; 2],
    pub report: NetReport,
}

/// Offsets live in `[−1/4, 1/4)` on a grid of `2^{-22}` fine units.
const PERT_BITS: u32 = 20;

/// Result of [`admissible_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Admissibility {
    Certified { min_thickness: f64, tuples: usize },
    Violation { indices: Vec<usize>, thickness: f64 },
}

/// Checks every tuple of `2..=n+1` points with pairwise quasi-distances in
/// `(0, ε)`: their projections must span a simplex of thickness `≥ θ_min`.
pub fn admissible_check(
    points: &[JetPoint<f64>],
    eps: f64,
    theta_min: f64,
) -> Result<Admissibility> {
    let n = match points.first() {
        Some(p) => p.n(),
        None => {
            return Ok(Admissibility::Certified {
                min_thickness: 1.0,
                tuples: 0,
            })
        }
    };
    let m = points.len();
    let mut close = vec![vec![false; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let d = quasi_distance(&points[i], &points[j])?;
            close[i][j] = d > 0.0 && d < eps;
            close[j][i] = close[i][j];
        }
    }
    let mut min_thickness = 1.0f64;
    let mut tuples = 0;
    let mut stack: Vec<usize> = Vec::new();
    fn extend(
        start: usize,
        stack: &mut Vec<usize>,
        close: &[Vec<bool>],
        maxlen: usize,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        for c in start..close.len() {
            if stack.iter().all(|&s| close[s][c]) {
                stack.push(c);
                if stack.len() >= 2 && !visit(stack) {
                    return false;
                }
                if stack.len() < maxlen && !extend(c + 1, stack, close, maxlen, visit) {
                    return false;
                }
                stack.pop();
            }
        }
        true
    }
    let mut violation = None;
    let mut visit = |t: &[usize]| {
        tuples += 1;
        let proj: Vec<Vec<f64>> = t.iter().map(|&i| points[i].x.clone()).collect();
        let th = thickness(&proj);
        min_thickness = min_thickness.min(th);
        if th < theta_min {
            violation = Some((t.to_vec(), th));
            return false;
        }
        true
    };
    extend(0, &mut stack, &close, n + 1, &mut visit);
    Ok(match violation {
        Some((indices, thickness)) => Admissibility::Violation { indices, thickness },
        None => Admissibility::Certified {
            min_thickness,
            tuples,
        },
    })
}

impl Net {
    pub fn n(&self) -> usize {
        self.lattice.n
    }

    pub fn k(&self) -> u32 {
        self.lattice.k
    }

    /// `N`, the invariance period in fine units.
    pub fn period(&self) -> BigInt {
        BigInt::from(self.kappa) * BigInt::from(self.cells_per_unit)
    }

    fn fine_scale(&self) -> Rational {
        Rational::new(BigInt::from(1), BigInt::from(self.cells_per_unit))
    }

    fn r_rational(&self) -> Rational {
        Rational::from_i64(self.r as i64)
    }

    /// The coset representative of `cell` modulo `δ_N(Λ_1)`.
    pub fn coset_key(&self, cell: &Cell) -> Cell {
        let (_, rep) = self
            .lattice
            .reduce(&cell.to_poly_point(self.k()), &self.period());
        Cell::from_poly_point(&rep).expect("reduction of an integer cell is integral")
    }

    /// Base-point offset `w` of the net point in `cell` (fine units).
    pub fn perturbation(&self, family: Family, cell: &Cell) -> Vec<Rational> {
        let key = self.coset_key(cell);
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update([family.tag()]);
        h.update(self.retries[family.tag() as usize].to_le_bytes());
        for v in key.x.iter().chain(&key.c) {
            let b = v.to_signed_bytes_le();
            h.update((b.len() as u32).to_le_bytes());
            h.update(&b);
        }
        let mut digest = h.finalize().to_vec();
        while digest.len() < 4 * self.n() {
            let more = Sha256::digest(&digest);
            digest.extend_from_slice(&more);
        }
        let denom = BigInt::from(1u64 << (PERT_BITS + 2));
        (0..self.n())
            .map(|i| {
                let word =
                    u32::from_le_bytes(digest[4 * i..4 * i + 4].try_into().expect("4 bytes"));
                let hbits = (word >> (32 - PERT_BITS)) as i64;
                Rational::new(BigInt::from(2 * hbits - (1i64 << PERT_BITS)), denom.clone())
            })
            .collect()
    }

    /// The unscaled net point of `cell`, in fine units.
    fn fine_point(&self, family: Family, cell: &Cell) -> PolyPoint<Rational> {
        let mut p = cell.to_poly_point(self.k());
        for (x, w) in p.x.iter_mut().zip(self.perturbation(family, cell)) {
            *x = x.clone() + w;
        }
        p
    }

    /// Exact coordinates of a net vertex in engine units.
    pub fn vertex_point(&self, v: &NetVertex) -> PolyPoint<Rational> {
        let mut p = self
            .fine_point(v.family, &v.cell)
            .dilate(&self.fine_scale());
        if v.scaled {
            p = p.dilate(&self.r_rational());
        }
        p
    }

    pub fn vertex_jet(&self, v: &NetVertex) -> JetPoint<Rational> {
        self.vertex_point(v).to_jet()
    }

    /// Nearest unscaled member of `family` to `query` (engine units) in
    /// quasi-distance, with its distance. Ties go to the smallest
    /// coordinate vector near the query.
    pub fn nearest(&self, family: Family, query: &JetPoint<Rational>) -> Result<(NetVertex, f64)> {
        self.check(query)?;
        let mut s = Search::new(self, family, query);
        let (c, d) = s.greedy();
        s.mode = Mode::Nearest {
            best: d,
            tie: s.tie_key(&c),
            cell: c,
        };
        s.run();
        match s.mode {
            Mode::Nearest { best, cell, .. } => Ok((
                NetVertex {
                    family,
                    scaled: false,
                    cell,
                },
                best / self.cells_per_unit as f64,
            )),
            Mode::Collect { .. } => unreachable!("mode is fixed above"),
        }
    }

    /// All unscaled members of `family` within quasi-distance `radius` of
    /// `query` (engine units), sorted by distance.
    pub fn members_within(
        &self,
        family: Family,
        query: &JetPoint<Rational>,
        radius: f64,
    ) -> Result<Vec<(NetVertex, f64)>> {
        self.check(query)?;
        let mut s = Search::new(self, family, query);
        s.mode = Mode::Collect {
            radius: radius * self.cells_per_unit as f64,
            found: Vec::new(),
        };
        s.run();
        let Mode::Collect { mut found, .. } = s.mode else {
            unreachable!("mode is fixed above")
        };
        found.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
        Ok(found
            .into_iter()
            .map(|(cell, d)| {
                (
                    NetVertex {
                        family,
                        scaled: false,
                        cell,
                    },
                    d / self.cells_per_unit as f64,
                )
            })
            .collect())
    }

    fn check(&self, q: &JetPoint<Rational>) -> Result<()> {
        if q.n() != self.n() || q.k() != self.k() {
            return Err(Error::Shape {
                expected_n: self.n(),
                expected_k: self.k(),
                got_n: q.n(),
                got_k: q.k(),
            });
        }
        Ok(())
    }
}

enum Mode {
    Nearest {
        best: f64,
        tie: Vec<f64>,
        cell: Cell,
    },
    Collect {
        radius: f64,
        found: Vec<(Cell, f64)>,
    },
}

/// Branch and bound over integer coefficients `C` of candidate cells
/// `(m, C)` near the localized query `(y, Q)`, `y ∈ [0, 1)^n`. The
/// polynomial part of the quasi-distance is `max_I |∂_I(Q − C)(y)|^{1/w_I}`,
/// and the Taylor coefficient of index `I` is fixed once all coefficients
/// of higher degree are chosen, so the search descends by degree.
struct Search<'a> {
    net: &'a Net,
    family: Family,
    layout: std::sync::Arc<Layout>,
    shift: Vec<BigInt>,
    y: Vec<Rational>,
    y_f64: Vec<f64>,
    q: Vec<Rational>,
    order: Vec<usize>,
    /// `table[J][I] = binom(J, I) y^{J − I}` for `J > I`.
    table: Vec<Vec<Option<Rational>>>,
    mode: Mode,
}

impl<'a> Search<'a> {
    fn new(net: &'a Net, family: Family, query: &JetPoint<Rational>) -> Self {
        let k = net.k();
        let fine =
            PolyPoint::from_jet(query).dilate(&Rational::from_i64(net.cells_per_unit as i64));
        let shift: Vec<BigInt> = fine.x.iter().map(|v| v.floor().to_integer()).collect();
        let t = PolyPoint {
            x: shift
                .iter()
                .map(|v| Rational::from_integer(v.clone()))
                .collect(),
            p: Polynomial::zero(net.n(), k),
        };
        let local = t.inverse().product(&fine);
        let layout = local.p.layout().clone();
        let mut order: Vec<usize> = (0..layout.len()).collect();
        order.sort_by(|a, b| {
            layout
                .degree_of(*b)
                .cmp(&layout.degree_of(*a))
                .then(a.cmp(b))
        });
        let mut table = vec![vec![None; layout.len()]; layout.len()];
        for (pj, j) in layout.indices.iter().enumerate() {
            for (pi, i) in layout.indices.iter().enumerate() {
                if pj != pi && j.dominates(i) {
                    let b: u64 =
                        j.0.iter()
                            .zip(&i.0)
                            .map(|(&a, &c)| binomial(a as u64, c as u64))
                            .product();
                    let d = j.minus(i);
                    table[pj][pi] = Some(Rational::from_i64(b as i64) * d.monomial(&local.x));
                }
            }
        }
        Search {
            net,
            family,
            y_f64: local.x.iter().map(Scalar::to_f64).collect(),
            y: local.x,
            q: local.p.coeffs,
            layout,
            shift,
            order,
            table,
            mode: Mode::Collect {
                radius: 0.0,
                found: Vec::new(),
            },
        }
    }

    fn bound(&self) -> f64 {
        match &self.mode {
            Mode::Nearest { best, .. } => *best,
            Mode::Collect { radius, .. } => *radius,
        }
    }

    fn target(&self, pos: usize, d: &[Rational]) -> Rational {
        let mut tau = self.q[pos].clone();
        for (pj, row) in self.table.iter().enumerate() {
            if let Some(c) = &row[pos] {
                tau += &d[pj] * c;
            }
        }
        tau
    }

    fn weight_and_fact(&self, pos: usize) -> (u32, f64) {
        (
            self.layout.weight(pos),
            self.layout.indices[pos].factorial() as f64,
        )
    }

    fn term(&self, pos: usize, taylor: &Rational) -> f64 {
        let (w, f) = self.weight_and_fact(pos);
        (taylor.to_f64().abs() * f).powf(1.0 / w as f64)
    }

    /// Absolute cell of the local candidate `(m, C)`.
    fn cell(&self, m: &[i64], coeffs: &[Rational]) -> Cell {
        let k = self.net.k();
        let local = PolyPoint {
            x: m.iter().map(|v| Rational::from_i64(*v)).collect(),
            p: Polynomial::from_coeffs(self.net.n(), k, coeffs.to_vec()).expect("shape"),
        };
        let t = PolyPoint {
            x: self
                .shift
                .iter()
                .map(|v| Rational::from_integer(v.clone()))
                .collect(),
            p: Polynomial::zero(self.net.n(), k),
        };
        Cell::from_poly_point(&t.product(&local)).expect("integer candidate")
    }

    /// `x`-part of the distance and the local base point of the candidate.
    fn x_part(&self, m: &[i64], cell: &Cell) -> (f64, Vec<f64>) {
        let w = self.net.perturbation(self.family, cell);
        let mut d: f64 = 0.0;
        let mut xs = Vec::with_capacity(m.len());
        for ((yi, mi), wi) in self.y.iter().zip(m).zip(&w) {
            let xi = Rational::from_i64(*mi) + wi;
            d = d.max((yi - &xi).to_f64().abs());
            xs.push(xi.to_f64());
        }
        (d, xs)
    }

    fn tie_key(&self, cell: &Cell) -> Vec<f64> {
        let p = self.net.fine_point(self.family, cell);
        let t: Vec<Rational> = self
            .shift
            .iter()
            .map(|v| Rational::from_integer(v.clone()))
            .collect();
        let tp = PolyPoint {
            x: t,
            p: Polynomial::zero(self.net.n(), self.net.k()),
        };
        let local = tp.inverse().product(&p).to_jet();
        local.x.iter().chain(&local.u).map(Scalar::to_f64).collect()
    }

    /// Top-down rounding with the nearest integer base cell.
    fn greedy(&self) -> (Cell, f64) {
        let l = self.layout.len();
        let mut d = vec![Rational::zero(); l];
        let mut coeffs = vec![Rational::zero(); l];
        let mut poly: f64 = 0.0;
        for &pos in &self.order {
            let tau = self.target(pos, &d);
            let c = tau.round();
            d[pos] = &self.q[pos] - &c;
            poly = poly.max(self.term(pos, &(&tau - &c)));
            coeffs[pos] = c;
        }
        let m: Vec<i64> = self.y_f64.iter().map(|v| v.round() as i64).collect();
        let cell = self.cell(&m, &coeffs);
        let (xd, _) = self.x_part(&m, &cell);
        (cell, poly.max(xd) * (1.0 + 1e-12) + 1e-300)
    }

    fn run(&mut self) {
        let l = self.layout.len();
        let mut d = vec![Rational::zero(); l];
        let mut coeffs = vec![Rational::zero(); l];
        self.descend(0, &mut d, &mut coeffs, 0.0);
    }

    fn descend(
        &mut self,
        depth: usize,
        d: &mut Vec<Rational>,
        coeffs: &mut Vec<Rational>,
        partial: f64,
    ) {
        if depth == self.order.len() {
            self.leaf(coeffs, partial);
            return;
        }
        let pos = self.order[depth];
        let tau = self.target(pos, d);
        let (w, f) = self.weight_and_fact(pos);
        let slack = self.bound().powi(w as i32) / f * (1.0 + 1e-9) + 1e-12;
        let tau_f = tau.to_f64();
        let lo = (tau_f - slack).ceil() as i64;
        let hi = (tau_f + slack).floor() as i64;
        let mut cands: Vec<i64> = (lo..=hi).collect();
        cands.sort_by(|a, b| {
            ((*a as f64) - tau_f)
                .abs()
                .total_cmp(&((*b as f64) - tau_f).abs())
                .then(a.cmp(b))
        });
        for c in cands {
            let c = Rational::from_i64(c);
            let val = self.term(pos, &(&tau - &c));
            let p = partial.max(val);
            if p > self.bound() {
                continue;
            }
            d[pos] = &self.q[pos] - &c;
            coeffs[pos] = c;
            self.descend(depth + 1, d, coeffs, p);
        }
        d[pos] = Rational::zero();
        coeffs[pos] = Rational::zero();
    }

    fn leaf(&mut self, coeffs: &[Rational], poly: f64) {
        let reach = self.bound() + 0.25 + 1e-9;
        let ranges: Vec<(i64, i64)> = self
            .y_f64
            .iter()
            .map(|y| ((y - reach).ceil() as i64, (y + reach).floor() as i64))
            .collect();
        let mut m: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let cell = self.cell(&m, coeffs);
            let (xd, _) = self.x_part(&m, &cell);
            let rho = poly.max(xd);
            match &mut self.mode {
                Mode::Collect { radius, found } => {
                    if rho <= *radius {
                        found.push((cell, rho));
                    }
                }
                Mode::Nearest { .. } => {
                    let better = {
                        let Mode::Nearest { best, tie, .. } = &self.mode else {
                            unreachable!()
                        };
                        rho < *best || (rho == *best && self.tie_key(&cell) < *tie)
                    };
                    if better {
                        let t = self.tie_key(&cell);
                        self.mode = Mode::Nearest {
                            best: rho,
                            tie: t,
                            cell,
                        };
                    }
                }
            }
            // odometer over the base-cell box
            let mut i = 0;
            loop {
                if i == m.len() {
                    return;
                }
                if m[i] < ranges[i].1 {
                    m[i] += 1;
                    break;
                }
                m[i] = ranges[i].0;
                i += 1;
            }
        }
    }
}

fn random_query(rng: &mut ChaCha8Rng, n: usize, k: u32, spread: f64) -> JetPoint<Rational> {
    let l = crate::multiindex::layout(n, k);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-spread..spread)).collect();
    let u: Vec<f64> = (0..l.len())
        .map(|p| {
            let s = spread.powi(l.weight(p) as i32);
            rng.gen_range(-s..s)
        })
        .collect();
    JetPoint::new(n, k, x, u).expect("shape").to_rational()
}

/// Builds and certifies the nets `A`, `A′` for `lattice = Λ_1`.
///
/// The density certificate samples points and measures the distance to the
/// nearest member. The admissibility certificate collects the members of
/// `Γ = A ∪ δ_r(A′)` and `Γ′ = A′ ∪ δ_r(A)` near sampled centers and requires
/// every close tuple to project to a nondegenerate simplex. On a violation
/// the perturbations of the offending family are redrawn.
pub fn build_net(lattice: &LatticeSpec, cfg: &NetConfig) -> Result<Net> {
    if !(cfg.eps >= cfg.eps_prime && cfg.eps_prime > 0.0) || cfg.r < 2 {
        return Err(Error::Invalid(format!(
            "net needs eps >= eps' > 0 and r >= 2 (got {}, {}, {})",
            cfg.eps, cfg.eps_prime, cfg.r
        )));
    }
    if lattice.m != 1 {
        return Err(Error::Invalid("nets are built on Λ_1".into()));
    }
    let kappa = cfg
        .kappa
        .unwrap_or_else(|| (8.0 * cfg.eps).ceil().max(1.0) as u64)
        .next_power_of_two();
    let mut net = Net {
        lattice: lattice.clone(),
        r: cfg.r,
        eps: cfg.eps,
        eps_prime: cfg.eps_prime,
        seed: cfg.seed,
        cells_per_unit: cfg.cells_per_unit,
        kappa,
        retries: [0, 0],
        report: NetReport::default(),
    };
    let (n, k) = (lattice.n, lattice.k);
    let mut attempts = 0;
    'retry: loop {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut report = NetReport {
            min_thickness: 1.0,
            min_gap: f64::INFINITY,
            ..NetReport::default()
        };
        for _ in 0..cfg.density_samples {
            let q = random_query(&mut rng, n, k, kappa as f64);
            for fam in [Family::A, Family::APrime] {
                let (_, d) = net.nearest(fam, &q)?;
                report.density_max = report.density_max.max(d);
            }
            report.density_samples += 1;
        }
        if report.density_max > cfg.eps_prime {
            return Err(Error::Certification(format!(
                "net is not {}-dense: sampled distance {}",
                cfg.eps_prime, report.density_max
            )));
        }
        // only the nearest few members are used; two fine cells hold them
        let radius = (cfg.eps_prime / 4.0).min(2.0 / cfg.cells_per_unit as f64);
        let cap = 12;
        for _ in 0..cfg.admissibility_centers {
            let c = random_query(&mut rng, n, k, kappa as f64 / 2.0);
            for fam in [Family::A, Family::APrime] {
                let mut pts: Vec<NetVertex> = net
                    .members_within(fam, &c, radius)?
                    .into_iter()
                    .take(cap)
                    .map(|(v, _)| v)
                    .collect();
                let shrunk = c.dilate(&Rational::new(BigInt::from(1), BigInt::from(cfg.r)));
                pts.extend(
                    net.members_within(fam.other(), &shrunk, radius)?
                        .into_iter()
                        .take(cap / 2)
                        .map(|(mut v, _)| {
                            v.scaled = true;
                            v
                        }),
                );
                let jets: Vec<JetPoint<f64>> =
                    pts.iter().map(|v| net.vertex_jet(v).to_f64()).collect();
                for i in 0..jets.len() {
                    for j in i + 1..jets.len() {
                        let gap = jets[i]
                            .x
                            .iter()
                            .zip(&jets[j].x)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        report.min_gap = report.min_gap.min(gap);
                    }
                }
                match admissible_check(&jets, cfg.eps, 1e-9)? {
                    Admissibility::Certified {
                        min_thickness,
                        tuples,
                    } => {
                        report.min_thickness = report.min_thickness.min(min_thickness);
                        report.tuples_checked += tuples;
                    }
                    Admissibility::Violation { indices, thickness } => {
                        attempts += 1;
                        if attempts > cfg.max_retries {
                            let tuple: Vec<&NetVertex> = indices.iter().map(|&i| &pts[i]).collect();
                            return Err(Error::Certification(format!(
                                "admissibility failed after {} retries; tuple {:?} has thickness {thickness}",
                                cfg.max_retries, tuple
                            )));
                        }
                        let fam = pts[indices[0]].family;
                        net.retries[fam.tag() as usize] += 1;
                        continue 'retry;
                    }
                }
            }
        }
        net.report = report;
        return Ok(net);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    fn small_net(n: usize, k: u32) -> Net {
        let mut cfg = NetConfig::new(4.0, 1.0, 3, 7);
        cfg.density_samples = 20;
        cfg.admissibility_centers = 4;
        build_net(&build_lattice(n, k, 1).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn perturbations_are_coset_invariant_and_bounded() {
        let net = small_net(1, 1);
        let cell = Cell {
            x: vec![BigInt::from(3)],
            c: vec![BigInt::from(-5), BigInt::from(2)],
        };
        let w = net.perturbation(Family::A, &cell);
        assert!(w[0].to_f64().abs() <= 0.25);
        // translate by an element of δ_N(Λ_1)
        let nn = net.period();
        let gamma = Cell {
            x: vec![nn.clone()],
            c: vec![&nn * &nn * BigInt::from(4), &nn * BigInt::from(-3)],
        };
        let moved =
            Cell::from_poly_point(&gamma.to_poly_point(1).product(&cell.to_poly_point(1))).unwrap();
        assert_ne!(moved, cell);
        assert_eq!(net.perturbation(Family::A, &moved), w);
        assert_ne!(net.perturbation(Family::APrime, &cell), w);
    }

    #[test]
    fn nearest_of_a_member_is_itself() {
        let net = small_net(1, 2);
        let v = NetVertex {
            family: Family::A,
            scaled: false,
            cell: Cell {
                x: vec![BigInt::from(-7)],
                c: vec![BigInt::from(11), BigInt::from(-4), BigInt::from(9)],
            },
        };
        let p = net.vertex_jet(&v);
        let (found, d) = net.nearest(Family::A, &p).unwrap();
        assert_eq!(found, v);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let net = small_net(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let q = random_query(&mut rng, 1, 1, 5.0);
            let (v, d) = net.nearest(Family::APrime, &q).unwrap();
            let brute = net.members_within(Family::APrime, &q, 1.0).unwrap();
            assert!(!brute.is_empty());
            assert!((brute[0].1 - d).abs() < 1e-12, "{} vs {d}", brute[0].1);
            let direct = quasi_distance(&net.vertex_jet(&v).to_f64(), &q.to_f64()).unwrap();
            assert!((direct - d).abs() < 1e-9 * (1.0 + d));
            assert!(d <= 1.0);
        }
    }

    #[test]
    fn admissibility_examples() {
        let jp = |x: f64, y: f64| JetPoint::new(2, 1, vec![x, y], vec![0.0; 3]).unwrap();
        let col = vec![jp(0.0, 0.0), jp(0.1, 0.1), jp(0.2, 0.2)];
        assert!(matches!(
            admissible_check(&col, 1.0, 0.05).unwrap(),
            Admissibility::Violation { .. }
        ));
        let s = 0.5;
        let tri = vec![jp(0.0, 0.0), jp(s, 0.0), jp(s / 2.0, s * 3f64.sqrt() / 2.0)];
        match admissible_check(&tri, 1.0, 0.05).unwrap() {
            Admissibility::Certified {
                min_thickness,
                tuples,
            } => {
                assert!((min_thickness - 3f64.sqrt() / 2.0).abs() < 1e-12);
                assert_eq!(tuples, 4);
            }
            v => panic!("{v:?}"),
        }
        // far pair is ignored
        let far = vec![jp(0.0, 0.0), jp(5.0, 5.0), jp(10.0, 10.0)];
        assert!(matches!(
            admissible_check(&far, 1.0, 0.05).unwrap(),
            Admissibility::Certified { tuples: 0, .. }
        ));
    }

    #[test]
    fn certified_net_reports() {
        let net = small_net(2, 1);
        assert!(net.report.density_max <= 1.0);
        assert!(net.report.min_thickness > 0.0);
        assert!(net.report.tuples_checked > 0);
    }
}
