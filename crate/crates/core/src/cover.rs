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

//! Whitney-type covers of `X ∖ Z` for box domains `X ⊂ R^d`.
//!
//! Members are bricks intersected with distance bands. The builder is a
//! heuristic; [`certify_cover`] is the authority for the constants
//! `(α, β, μ)`:
//! - `diam B_i ≤ α·d(B_i, Z)`;
//! - every `D` with `diam D ≤ β·d(D, Z)` meets at most `μ` members.
//!
//! In one dimension the members are Whitney intervals, halving toward
//! each point of `Z`. In higher dimensions they are staggered bricks of
//! side proportional to their band `[c₁ r_w^j, c₁ r_w^{j+1})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::norm;

/// Axis-aligned closed box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn diameter(&self) -> f64 {
        let d: Vec<f64> = self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect();
        norm(&d)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Euclidean distance from a point.
    pub fn dist_point(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (l - v).max(v - h).max(0.0))
            .collect();
        norm(&d)
    }

    /// Largest distance from a point to the box (attained at a corner).
    pub fn max_dist_point(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| (v - l).abs().max((h - v).abs()))
            .collect();
        norm(&d)
    }

    pub fn dist_box(&self, o: &BoxRegion) -> f64 {
        let d: Vec<f64> = (0..self.dim())
            .map(|i| (o.lo[i] - self.hi[i]).max(self.lo[i] - o.hi[i]).max(0.0))
            .collect();
        norm(&d)
    }

    pub fn intersect(&self, o: &BoxRegion) -> Option<BoxRegion> {
        let lo: Vec<f64> = self.lo.iter().zip(&o.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&o.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            None
        } else {
            Some(BoxRegion { lo, hi })
        }
    }

    fn scaled(&self, l: f64) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().map(|v| v * l).collect(),
            hi: self.hi.iter().map(|v| v * l).collect(),
        }
    }
}

/// The closed set `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ZSet {
    Points { points: Vec<Vec<f64>> },
    Boxes { boxes: Vec<BoxRegion> },
}

impl ZSet {
    fn boxes(&self) -> Vec<BoxRegion> {
        match self {
            ZSet::Points { points } => points
                .iter()
                .map(|p| BoxRegion {
                    lo: p.clone(),
                    hi: p.clone(),
                })
                .collect(),
            ZSet::Boxes { boxes } => boxes.clone(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            ZSet::Points { points } => points.is_empty(),
            ZSet::Boxes { boxes } => boxes.is_empty(),
        }
    }
}

/// Box domain `X` with closed subset `Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub d: usize,
    pub bounds: BoxRegion,
    pub z: ZSet,
}

impl DomainSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.d == 0 || self.bounds.dim() != self.d || self.bounds.hi.len() != self.d {
            return bad(format!("domain box must have dimension {}", self.d));
        }
        if self
            .bounds
            .lo
            .iter()
            .zip(&self.bounds.hi)
            .any(|(l, h)| l.partial_cmp(h) != Some(std::cmp::Ordering::Less))
        {
            return bad("domain box has empty interior".into());
        }
        if self.z.is_empty() {
            return bad("Z must be nonempty".into());
        }
        for b in self.z.boxes() {
            if b.dim() != self.d || b.hi.len() != self.d {
                return bad("Z component has wrong dimension".into());
            }
            if b.lo.iter().zip(&b.hi).any(|(l, h)| l > h) {
                return bad("Z box is empty".into());
            }
            if self.bounds.intersect(&b) != Some(b.clone()) {
                return bad(format!("Z component {b:?} is not inside the domain box"));
            }
        }
        Ok(())
    }

    /// `d(x, Z)`.
    pub fn dist_to_z(&self, x: &[f64]) -> f64 {
        self.z
            .boxes()
            .iter()
            .map(|b| b.dist_point(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// `d(B, Z)` for a box.
    pub fn box_dist_to_z(&self, b: &BoxRegion) -> f64 {
        self.z
            .boxes()
            .iter()
            .map(|z| z.dist_box(b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Upper bound for `sup_{x ∈ B} d(x, Z)`; exact in one dimension.
    pub fn box_sup_dist_to_z(&self, b: &BoxRegion) -> f64 {
        if self.d == 1 {
            let mut cand = vec![b.lo[0], b.hi[0]];
            let mut zs: Vec<(f64, f64)> =
                self.z.boxes().iter().map(|z| (z.lo[0], z.hi[0])).collect();
            zs.sort_by(|a, c| a.partial_cmp(c).expect("finite"));
            for w in zs.windows(2) {
                let mid = 0.5 * (w[0].1 + w[1].0);
                if b.lo[0] < mid && mid < b.hi[0] {
                    cand.push(mid);
                }
            }
            return cand
                .iter()
                .map(|x| self.dist_to_z(&[*x]))
                .fold(0.0, f64::max);
        }
        self.z
            .boxes()
            .iter()
            .map(|z| {
                // farthest point of b from the nearest point of z, bounded by corners
                let c: Vec<f64> = z.lo.iter().zip(&z.hi).map(|(l, h)| 0.5 * (l + h)).collect();
                b.max_dist_point(&c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// The domain with all distances multiplied by `l`.
    pub fn scaled(&self, l: f64) -> DomainSpec {
        DomainSpec {
            d: self.d,
            bounds: self.bounds.scaled(l),
            z: match &self.z {
                ZSet::Points { points } => ZSet::Points {
                    points: points
                        .iter()
                        .map(|p| p.iter().map(|v| v * l).collect())
                        .collect(),
                },
                ZSet::Boxes { boxes } => ZSet::Boxes {
                    boxes: boxes.iter().map(|b| b.scaled(l)).collect(),
                },
            },
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d && self.bounds.contains(x)
    }
}

/// Builder parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverParams {
    /// Band ratio `r_w` (bricks in dimension ≥ 2).
    pub r_w: f64,
    /// Band offset `c₁`.
    pub c1: f64,
    /// Points with `d(x, Z) < delta_min` are left uncovered.
    pub delta_min: f64,
    /// `β` is searched on `{2^0, 2^-1, …, 2^-beta_grid}`.
    pub beta_grid: u32,
    pub coverage_samples: usize,
    pub seed: u64,
}

impl Default for CoverParams {
    fn default() -> Self {
        CoverParams {
            r_w: 8.0,
            c1: 0.25,
            delta_min: 2f64.powi(-24),
            beta_grid: 10,
            coverage_samples: 2000,
            seed: 0,
        }
    }
}

mod band_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(band: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
        let hi = if band[1] == f64::INFINITY {
            None
        } else {
            Some(band[1])
        };
        (band[0], hi).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
        let (lo, hi) = <(f64, Option<f64>)>::deserialize(d)?;
        Ok([lo, hi.unwrap_or(f64::INFINITY)])
    }
}

/// One member `B = brick ∩ X ∩ {band.0 ≤ d(·, Z) < band.1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Member {
    pub brick: BoxRegion,
    /// Distance band; an unbounded upper end is written as `null`.
    #[serde(with = "band_serde")]
    pub band: [f64; 2],
    pub scale: i32,
    pub color: u32,
    /// `d(B, Z)`.
    pub dist_z: f64,
    /// Upper bound for `sup_B d(·, Z)`.
    pub sup_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageReport {
    pub exact: bool,
    pub samples: usize,
    pub uncovered: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub alpha: f64,
    pub beta: f64,
    pub mu: usize,
    /// Members realizing `μ` at the certified `β`.
    pub witness: Vec<usize>,
    pub coverage: CoverageReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitneyCover {
    pub domain: DomainSpec,
    pub params: CoverParams,
    pub members: Vec<Member>,
    pub certificate: Certificate,
}

fn member(
    domain: &DomainSpec,
    brick: BoxRegion,
    band: [f64; 2],
    scale: i32,
    color: u32,
) -> Option<Member> {
    let brick = brick.intersect(&domain.bounds)?;
    let lo = domain.box_dist_to_z(&brick);
    let hi = domain.box_sup_dist_to_z(&brick);
    if hi < band[0] || lo >= band[1] || hi <= 0.0 {
        return None;
    }
    Some(Member {
        dist_z: lo.max(band[0]),
        sup_z: hi.min(band[1]),
        brick,
        band,
        scale,
        color,
    })
}

fn whitney_intervals(domain: &DomainSpec, p: &CoverParams) -> Vec<Member> {
    let (xl, xh) = (domain.bounds.lo[0], domain.bounds.hi[0]);
    let mut zs: Vec<(f64, f64)> = domain
        .z
        .boxes()
        .iter()
        .map(|b| (b.lo[0], b.hi[0]))
        .collect();
    zs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    // gaps as (start, end, start_is_z, end_is_z)
    let mut gaps = Vec::new();
    if xl < zs[0].0 {
        gaps.push((xl, zs[0].0, false, true));
    }
    for w in zs.windows(2) {
        if w[0].1 < w[1].0 {
            gaps.push((w[0].1, w[1].0, true, true));
        }
    }
    let last = zs.last().expect("nonempty").1;
    if last < xh {
        gaps.push((last, xh, true, false));
    }
    let mut out = Vec::new();
    let full = [0.0, f64::INFINITY];
    for (a, b, za, zb) in gaps {
        let h = if za && zb { 0.5 * (b - a) } else { b - a };
        let mut push = |lo: f64, hi: f64, j: i32, color: u32| {
            let brick = BoxRegion {
                lo: vec![lo],
                hi: vec![hi],
            };
            if let Some(m) = member(domain, brick, full, j, color) {
                out.push(m);
            }
        };
        // halve until every point at distance ≥ δ_min from Z is covered
        for j in 0.. {
            let outer = h / 2f64.powi(j);
            if outer <= p.delta_min {
                break;
            }
            let inner = h / 2f64.powi(j + 1);
            // both halves of an interior gap meet at one rounded midpoint
            let (left_hi, right_lo) = if j == 0 && za && zb {
                (a + h, a + h)
            } else {
                (a + outer, b - outer)
            };
            if za {
                push(a + inner, left_hi, j, 0);
            }
            if zb {
                push(right_lo, b - inner, j, 1);
            }
        }
    }
    out
}

fn staggered_bricks(domain: &DomainSpec, p: &CoverParams) -> Vec<Member> {
    let d = domain.d;
    let far = domain.bounds.diameter();
    let mut out = Vec::new();
    let j_min = (p.delta_min / p.c1).log(p.r_w).floor() as i32 - 1;
    let j_max = (far / p.c1).log(p.r_w).ceil() as i32;
    for j in j_min..=j_max {
        let band = [p.c1 * p.r_w.powi(j), p.c1 * p.r_w.powi(j + 1)];
        if band[1] <= p.delta_min {
            continue;
        }
        let side = band[0] / (d as f64).sqrt();
        let lo = &domain.bounds.lo;
        let counts: Vec<i64> = (0..d)
            .map(|i| ((domain.bounds.hi[i] - lo[i]) / side).ceil() as i64 + 1)
            .collect();
        let total: i64 = counts.iter().product();
        for flat in 0..total {
            let mut rest = flat;
            let idx: Vec<i64> = counts
                .iter()
                .map(|c| {
                    let v = rest % c;
                    rest /= c;
                    v
                })
                .collect();
            // brick-wall stagger: offset axis 0 by half a brick on odd rows
            let row_parity = idx[1..].iter().sum::<i64>().rem_euclid(2);
            let shift = if row_parity == 1 { -0.5 * side } else { 0.0 };
            let mut blo: Vec<f64> = idx
                .iter()
                .enumerate()
                .map(|(i, v)| lo[i] + *v as f64 * side)
                .collect();
            blo[0] += shift;
            let bhi: Vec<f64> = blo.iter().map(|v| v + side).collect();
            let brick = BoxRegion { lo: blo, hi: bhi };
            if let Some(m) = member(domain, brick, band, j, row_parity as u32) {
                out.push(m);
            }
        }
    }
    out
}

/// Builds and certifies a cover.
pub fn build_cover(domain: &DomainSpec, params: &CoverParams) -> Result<WhitneyCover> {
    domain.validate()?;
    if !(params.r_w > 1.0 && params.c1 > 0.0 && params.delta_min > 0.0) {
        return Err(Error::Invalid("cover parameters out of range".into()));
    }
    let members = if domain.d == 1 {
        whitney_intervals(domain, params)
    } else {
        staggered_bricks(domain, params)
    };
    if members.is_empty() {
        return Err(Error::Certification("cover has no members".into()));
    }
    let mut cover = WhitneyCover {
        domain: domain.clone(),
        params: params.clone(),
        members,
        certificate: Certificate {
            alpha: 0.0,
            beta: 0.0,
            mu: 0,
            witness: vec![],
            coverage: CoverageReport {
                exact: false,
                samples: 0,
                uncovered: 0,
            },
        },
    };
    cover.certificate = certify_cover(&cover);
    Ok(cover)
}

/// Largest tuple that a set `D` with `diam D ≤ β·d(D, Z)` could meet: all
/// pairwise gaps are at most `β·min sup_z` over the tuple. Tuples are
/// anchored at their member of smallest `sup_z`, which fixes the gap
/// threshold. The search stops at size `cap`; if its expansion budget runs
/// out the result is not exhaustive and the caller treats `μ` as `cap`.
fn max_meeting_tuple(members: &[Member], beta: f64, cap: usize) -> (Vec<usize>, bool) {
    let n = members.len();
    let key = |i: usize| (members[i].sup_z, i);
    let before = |a: usize, b: usize| key(a).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less);
    let mut by_lo: Vec<usize> = (0..n).collect();
    by_lo.sort_by(|a, b| {
        members[*a].brick.lo[0]
            .partial_cmp(&members[*b].brick.lo[0])
            .expect("finite")
    });
    let mut best: Vec<usize> = vec![0];
    let mut budget: u64 = 5_000_000;

    fn grow(
        adj: &[Vec<bool>],
        cur: &mut Vec<usize>,
        cand: &[usize],
        best_len: &mut usize,
        best: &mut Vec<usize>,
        cap: usize,
        budget: &mut u64,
    ) {
        if cur.len() > *best_len {
            *best_len = cur.len();
            best.clone_from(cur);
        }
        for (pos, &c) in cand.iter().enumerate() {
            if *best_len >= cap || *budget == 0 || cur.len() + cand.len() - pos <= *best_len {
                return;
            }
            *budget -= 1;
            let next: Vec<usize> = cand[pos + 1..]
                .iter()
                .copied()
                .filter(|&x| adj[c][x])
                .collect();
            cur.push(c);
            grow(adj, cur, &next, best_len, best, cap, budget);
            cur.pop();
        }
    }

    for a in 0..n {
        let t = beta * members[a].sup_z;
        let ma = &members[a];
        // neighbors within the threshold whose sup is not smaller
        let mut local = vec![a];
        for &b in &by_lo {
            if b == a || !before(a, b) {
                continue;
            }
            let mb = &members[b];
            if mb.brick.lo[0] - ma.brick.hi[0] > t || ma.brick.lo[0] - mb.brick.hi[0] > t {
                continue;
            }
            if ma.brick.dist_box(&mb.brick) <= t {
                local.push(b);
            }
        }
        if local.len() <= best.len() {
            continue;
        }
        let m = local.len();
        let adj: Vec<Vec<bool>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        i != j && members[local[i]].brick.dist_box(&members[local[j]].brick) <= t
                    })
                    .collect()
            })
            .collect();
        let cand: Vec<usize> = (1..m).collect();
        let mut cur = vec![0usize];
        let mut best_len = best.len();
        let mut found = Vec::new();
        grow(
            &adj,
            &mut cur,
            &cand,
            &mut best_len,
            &mut found,
            cap,
            &mut budget,
        );
        if !found.is_empty() && found.len() > best.len() {
            best = found.iter().map(|&i| local[i]).collect();
        }
        if best.len() >= cap {
            break;
        }
        if budget == 0 {
            return (best, false);
        }
    }
    best.sort_unstable();
    (best, true)
}

fn check_coverage(cover: &WhitneyCover) -> CoverageReport {
    let dom = &cover.domain;
    let dmin = cover.params.delta_min;
    if dom.d == 1 {
        // exact: the union of intervals covers every gap point at distance ≥ δ_min
        let mut iv: Vec<(f64, f64)> = cover
            .members
            .iter()
            .map(|m| (m.brick.lo[0], m.brick.hi[0]))
            .collect();
        iv.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut uncovered = 0;
        let mut reach = dom.bounds.lo[0];
        let mut zb: Vec<(f64, f64)> = dom.z.boxes().iter().map(|b| (b.lo[0], b.hi[0])).collect();
        zb.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        // A hole (from, to) is allowed only inside the δ_min-neighborhood of
        // Z. Its ends are covered; d(·, Z) peaks at an end or at a midpoint
        // between consecutive components of Z, and exceeds its end value
        // inside only where it increases away from the end.
        let mut check_gap = |from: f64, to: f64| {
            if to > from {
                let mut peaks = vec![0.5 * (from + to)];
                for w in zb.windows(2) {
                    let m = 0.5 * (w[0].1 + w[1].0);
                    if from < m && m < to {
                        peaks.push(m);
                    }
                }
                let interior = peaks.iter().any(|m| dom.dist_to_z(&[*m]) >= dmin);
                // ends may sit a rounding step past δ_min
                let slack = dmin + 4.0 * f64::EPSILON * from.abs().max(to.abs());
                if interior || dom.dist_to_z(&[from]) > slack || dom.dist_to_z(&[to]) > slack {
                    uncovered += 1;
                }
            }
        };
        for (l, h) in iv {
            check_gap(reach, l);
            reach = reach.max(h);
        }
        check_gap(reach, dom.bounds.hi[0]);
        return CoverageReport {
            exact: true,
            samples: 0,
            uncovered,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cover.params.seed ^ 0xC0FE);
    let mut uncovered = 0;
    let mut samples = 0;
    for _ in 0..cover.params.coverage_samples {
        let x: Vec<f64> = (0..dom.d)
            .map(|i| rng.gen_range(dom.bounds.lo[i]..=dom.bounds.hi[i]))
            .collect();
        let dz = dom.dist_to_z(&x);
        if dz < dmin {
            continue;
        }
        samples += 1;
        let hit = cover
            .members
            .iter()
            .any(|m| m.brick.contains(&x) && m.band[0] <= dz && dz < m.band[1]);
        if !hit {
            uncovered += 1;
        }
    }
    CoverageReport {
        exact: false,
        samples,
        uncovered,
    }
}

/// Certifies `(α, β, μ)`: `α` exactly per member; `μ` as the largest
/// meeting tuple at the smallest grid `β` (a lower bound once it reaches
/// `d + 3`); `β` as the largest grid value with the same `μ`.
pub fn certify_cover(cover: &WhitneyCover) -> Certificate {
    let alpha = cover
        .members
        .iter()
        .map(|m| {
            if m.dist_z > 0.0 {
                m.brick.diameter() / m.dist_z
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    let grid = cover.params.beta_grid;
    // anything beyond d + 3 is refused downstream, so the search is capped there
    let cap = cover.domain.d + 3;
    let measure = |b: f64| {
        let (t, exhaustive) = max_meeting_tuple(&cover.members, b, cap);
        let mu = if exhaustive {
            t.len()
        } else {
            t.len().max(cap)
        };
        (t, mu)
    };
    let (smallest, mu) = measure(2f64.powi(-(grid as i32)));
    let mut beta = 2f64.powi(-(grid as i32));
    let mut witness = smallest;
    for q in 0..grid {
        let b = 2f64.powi(-(q as i32));
        let (t, m) = measure(b);
        if m == mu {
            beta = b;
            witness = t;
            break;
        }
    }
    Certificate {
        alpha,
        beta,
        mu,
        witness,
        coverage: check_coverage(cover),
    }
}

/// `τ = β / (2(β + 1))`.
pub fn tau_of(beta: f64) -> f64 {
    beta / (2.0 * (beta + 1.0))
}

/// Distance from `x` to member `i`, exact in one dimension and the
/// distance to the clipped brick otherwise.
pub fn dist_to_member(cover: &WhitneyCover, i: usize, x: &[f64]) -> f64 {
    cover.members[i].brick.dist_point(x)
}

/// `σ_i(x) = max{0, τ·d(B_i, Z) − d(x, B_i)}`.
pub fn sigma(cover: &WhitneyCover, tau: f64, i: usize, x: &[f64]) -> Result<f64> {
    if cover.domain.dist_to_z(x) == 0.0 {
        return Err(Error::Domain(format!("{x:?} lies in Z")));
    }
    let m = &cover.members[i];
    Ok((tau * m.dist_z - dist_to_member(cover, i, x)).max(0.0))
}

/// Sparse `g(x) = (σ_i(x)/σ̄(x))_i` as `(index, weight)` sorted by index.
pub fn barycentric_map(cover: &WhitneyCover, tau: f64, x: &[f64]) -> Result<Vec<(usize, f64)>> {
    if !cover.domain.contains(x) {
        return Err(Error::Domain(format!("{x:?} is outside the domain")));
    }
    let mut act = Vec::new();
    for i in 0..cover.members.len() {
        let s = sigma(cover, tau, i, x)?;
        if s > 0.0 {
            act.push((i, s));
        }
    }
    let total: f64 = act.iter().map(|(_, s)| s).sum();
    if total <= 0.0 {
        return Err(Error::Internal(format!(
            "no member is active at {x:?} (d(x,Z) = {})",
            cover.domain.dist_to_z(x)
        )));
    }
    Ok(act.into_iter().map(|(i, s)| (i, s / total)).collect())
}

/// Simplices of the nerve `Σ′`: all index sets with a common positivity
/// region of the `σ_i`, closed under faces and sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NerveData {
    pub tau: f64,
    pub simplices: Vec<Vec<usize>>,
    pub max_dimension: usize,
}

/// Nerve of the cover. In one dimension positivity regions are open
/// intervals and the nerve is exact; otherwise simplices are discovered by
/// sampling `samples` points.
pub fn nerve(cover: &WhitneyCover, tau: f64, samples: usize, seed: u64) -> NerveData {
    let dom = &cover.domain;
    let mut found: Vec<Vec<usize>> = Vec::new();
    if dom.d == 1 {
        let reg: Vec<(f64, f64)> = cover
            .members
            .iter()
            .map(|m| {
                let e = tau * m.dist_z;
                (
                    (m.brick.lo[0] - e).max(dom.bounds.lo[0]),
                    (m.brick.hi[0] + e).min(dom.bounds.hi[0]),
                )
            })
            .collect();
        let zs = dom.z.boxes();
        let nonempty = |l: f64, h: f64| l < h && !zs.iter().any(|z| z.lo[0] <= l && h <= z.hi[0]);
        fn extend(
            reg: &[(f64, f64)],
            cur: &mut Vec<usize>,
            l: f64,
            h: f64,
            ok: &dyn Fn(f64, f64) -> bool,
            out: &mut Vec<Vec<usize>>,
        ) {
            out.push(cur.clone());
            let start = cur.last().map_or(0, |v| v + 1);
            for j in start..reg.len() {
                let (nl, nh) = (l.max(reg[j].0), h.min(reg[j].1));
                if ok(nl, nh) {
                    cur.push(j);
                    extend(reg, cur, nl, nh, ok, out);
                    cur.pop();
                }
            }
        }
        // sort-free enumeration, restricted per starting member by overlap
        for i in 0..reg.len() {
            if !nonempty(reg[i].0, reg[i].1) {
                continue;
            }
            let mut cur = vec![i];
            let mut local = Vec::new();
            extend(&reg, &mut cur, reg[i].0, reg[i].1, &nonempty, &mut local);
            found.extend(local);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x: Vec<f64> = (0..dom.d)
                .map(|i| rng.gen_range(dom.bounds.lo[i]..=dom.bounds.hi[i]))
                .collect();
            if dom.dist_to_z(&x) == 0.0 {
                continue;
            }
            let act: Vec<usize> = (0..cover.members.len())
                .filter(|&i| sigma(cover, tau, i, &x).is_ok_and(|s| s > 0.0))
                .collect();
            let m = act.len();
            for mask in 1u64..(1u64 << m.min(20)) {
                found.push(
                    (0..m)
                        .filter(|b| mask & (1 << b) != 0)
                        .map(|b| act[b])
                        .collect(),
                );
            }
        }
    }
    found.sort();
    found.dedup();
    let max_dimension = found
        .iter()
        .map(|s| s.len().saturating_sub(1))
        .max()
        .unwrap_or(0);
    NerveData {
        tau,
        simplices: found,
        max_dimension,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(z: Vec<f64>) -> DomainSpec {
        DomainSpec {
            d: 1,
            bounds: BoxRegion {
                lo: vec![0.0],
                hi: vec![1.0],
            },
            z: ZSet::Points {
                points: z.into_iter().map(|v| vec![v]).collect(),
            },
        }
    }

    fn small_params() -> CoverParams {
        CoverParams {
            delta_min: 2f64.powi(-12),
            ..CoverParams::default()
        }
    }

    #[test]
    fn dyadic_cover_of_unit_interval() {
        let c = build_cover(&unit_interval(vec![0.0]), &small_params()).unwrap();
        assert_eq!(
            c.members[0].brick,
            BoxRegion {
                lo: vec![0.5],
                hi: vec![1.0]
            }
        );
        assert_eq!(
            c.members[3].brick,
            BoxRegion {
                lo: vec![1.0 / 16.0],
                hi: vec![0.125]
            }
        );
        let cert = &c.certificate;
        assert_eq!(cert.alpha, 1.0);
        assert_eq!(cert.mu, 2);
        assert_eq!(cert.beta, 0.5);
        assert!(cert.coverage.exact && cert.coverage.uncovered == 0);
    }

    #[test]
    fn interior_points_leave_only_the_truncation_hole() {
        let zs = vec![0.1, 0.37, 0.3701, 0.9];
        let c = build_cover(&unit_interval(zs.clone()), &small_params()).unwrap();
        let cert = &c.certificate;
        assert!(cert.coverage.exact && cert.coverage.uncovered == 0);
        assert_eq!(cert.mu, 2);
        // points just outside the δ_min-neighborhood are covered
        let dmin = small_params().delta_min;
        for z in zs {
            for x in [z - 1.01 * dmin, z + 1.01 * dmin] {
                assert!(
                    c.members.iter().any(|m| m.brick.contains(&[x])),
                    "{x} uncovered"
                );
            }
        }
    }

    #[test]
    fn cover_json_round_trips_unbounded_bands() {
        let c = build_cover(&unit_interval(vec![0.0]), &small_params()).unwrap();
        assert!(c.members.iter().any(|m| m.band[1] == f64::INFINITY));
        let back: WhitneyCover = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn duplicates_inflate_multiplicity() {
        let mut c = build_cover(&unit_interval(vec![0.0]), &small_params()).unwrap();
        let dup = c.members[2].clone();
        c.members.push(dup);
        assert_eq!(certify_cover(&c).mu, 3);
    }

    #[test]
    fn single_annulus_member() {
        let dom = unit_interval(vec![0.0]);
        let m = member(
            &dom,
            BoxRegion {
                lo: vec![0.5],
                hi: vec![1.0],
            },
            [0.0, f64::INFINITY],
            0,
            0,
        )
        .unwrap();
        let c = WhitneyCover {
            domain: dom,
            params: small_params(),
            members: vec![m],
            certificate: build_cover(&unit_interval(vec![0.0]), &small_params())
                .unwrap()
                .certificate,
        };
        let cert = certify_cover(&c);
        assert_eq!((cert.mu, cert.beta), (1, 1.0));
    }

    #[test]
    fn sigma_formula_and_partition() {
        let c = build_cover(&unit_interval(vec![0.0, 1.0]), &small_params()).unwrap();
        let tau = tau_of(c.certificate.beta);
        // member [1/4, 1/2] has d(B,Z) = 1/4
        let i = c
            .members
            .iter()
            .position(|m| m.brick.lo == vec![0.25] && m.brick.hi == vec![0.5])
            .unwrap();
        assert!((sigma(&c, tau, i, &[0.3]).unwrap() - tau * 0.25).abs() < 1e-15);
        assert_eq!(sigma(&c, tau, i, &[0.9]).unwrap(), 0.0);
        assert!(matches!(sigma(&c, tau, i, &[0.0]), Err(Error::Domain(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x = rng.gen_range(0.001..0.999);
            let g = barycentric_map(&c, tau, &[x]).unwrap();
            assert!(g.len() <= 2);
            assert!((g.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma_is_one_lipschitz() {
        let c = build_cover(&unit_interval(vec![0.0, 0.37, 1.0]), &small_params()).unwrap();
        let tau = tau_of(c.certificate.beta);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let (x, y) = (rng.gen_range(0.001..0.999), rng.gen_range(0.001..0.999));
            for i in 0..c.members.len() {
                let (a, b) = match (sigma(&c, tau, i, &[x]), sigma(&c, tau, i, &[y])) {
                    (Ok(a), Ok(b)) => (a, b),
                    _ => continue,
                };
                assert!((a - b).abs() <= (x - y).abs() + 1e-15);
            }
        }
    }

    #[test]
    fn nerve_of_dyadic_cover_is_a_path() {
        let c = build_cover(&unit_interval(vec![0.0]), &small_params()).unwrap();
        let tau = tau_of(c.certificate.beta);
        let nv = nerve(&c, tau, 0, 0);
        assert_eq!(nv.max_dimension, 1);
        let edges: Vec<&Vec<usize>> = nv.simplices.iter().filter(|s| s.len() == 2).collect();
        assert_eq!(edges.len(), c.members.len() - 1);
        for e in edges {
            assert_eq!(e[1], e[0] + 1);
        }
    }

    #[test]
    fn planar_cover_reports_multiplicity() {
        let dom = DomainSpec {
            d: 2,
            bounds: BoxRegion {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            z: ZSet::Points {
                points: vec![vec![0.5, 0.5]],
            },
        };
        let p = CoverParams {
            delta_min: 1.0 / 32.0,
            coverage_samples: 400,
            ..CoverParams::default()
        };
        let c = build_cover(&dom, &p).unwrap();
        assert_eq!(c.certificate.coverage.uncovered, 0);
        assert!(c.certificate.mu >= 3);
        assert!(c.certificate.witness.len() <= c.certificate.mu);
    }

    #[test]
    fn invalid_domains_rejected() {
        let mut d = unit_interval(vec![2.0]);
        assert!(d.validate().is_err());
        d.z = ZSet::Points { points: vec![] };
        assert!(d.validate().is_err());
    }
}
