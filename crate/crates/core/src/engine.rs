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

//! The extension `f̄ = h ∘ g` of a Lipschitz map `f : Z → J^k(R^n)`.
//!
//! Pipeline:
//! 1. Rescale the domain by `λ` so that `f` becomes 1-Lipschitz.
//! 2. Certify a Whitney cover with constants `(α, β, μ)` and derive the
//!    parameters `τ = β/(2(β+1))`, `r = ⌈(1+α+τ)/(1−τ)⌉`, `ε′ = 1` and
//!    `ε = [2ε′ + 2(2+α)]·r`.
//! 3. For each member `B_i`, pick an anchor `z_i ∈ Z` and a scale `s_i`,
//!    and set `φ(e_i) = P_i(f(z_i))`, where
//!    `P_i = δ_{r^{s_i}} ∘ P ∘ δ_{r^{-s_i}}`. `P` projects to `A` for even
//!    `s_i` and to `A′` for odd `s_i`.
//! 4. On a nerve simplex `S` with `t = min s_{i_j}`, let
//!    `h|_S = δ_{r^t} ∘ F|_{[y]}`, where `y_j = δ_{r^{-t}} φ(e_{i_j})`.
//!    Then `f̄ = h ∘ g`, with `g` the partition of unity of the cover.
//!
//! Every pointwise hypothesis of the construction is audited on the
//! indices and pairs an evaluation touches. Carnot–Carathéodory distances
//! are bounded from above by [`cc_upper_bound`], so a failed audit is a
//! true failure.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Mutex;

use num::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cc::{cc_upper_bound, CcBudget};
use crate::charts::{ChartSystem, ChartSystemSpec};
use crate::cover::{
    barycentric_map, build_cover, nerve, Certificate, CoverParams, DomainSpec, NerveData,
    WhitneyCover, ZSet,
};
use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::jet::{quasi_distance, JetPoint};
use crate::lattice::build_lattice;
use crate::net::{build_net, Family, Net, NetConfig, NetVertex};
use crate::scalar::{powi_signed, Rational, Scalar};

/// A value sample `f(z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZSample {
    pub z: Vec<f64>,
    pub value: JetPoint<f64>,
}

/// Input of the engine. `Z` is the point set of `domain` and every point of
/// it carries a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionProblem {
    pub domain: DomainSpec,
    pub samples: Vec<ZSample>,
    /// Lipschitz constant of `f`; estimated from the samples when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
}

impl ExtensionProblem {
    pub fn n(&self) -> usize {
        self.samples[0].value.n()
    }

    pub fn k(&self) -> u32 {
        self.samples[0].value.k()
    }

    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        if self.samples.is_empty() {
            return Err(Error::Invalid("no value samples".into()));
        }
        let (n, k) = (self.n(), self.k());
        for s in &self.samples {
            if s.value.n() != n || s.value.k() != k {
                return Err(Error::Shape {
                    expected_n: n,
                    expected_k: k,
                    got_n: s.value.n(),
                    got_k: s.value.k(),
                });
            }
            if s.z.len() != self.domain.d || self.domain.dist_to_z(&s.z) != 0.0 {
                return Err(Error::Invalid(format!(
                    "sample point {:?} is not in Z",
                    s.z
                )));
            }
        }
        if self.domain.d > n {
            return Err(Error::Invalid(format!(
                "domain dimension {} exceeds n = {n}",
                self.domain.d
            )));
        }
        match &self.domain.z {
            ZSet::Points { points } => {
                for p in points {
                    if !self.samples.iter().any(|s| &s.z == p) {
                        return Err(Error::Invalid(format!("Z point {p:?} has no value sample")));
                    }
                }
            }
            ZSet::Boxes { .. } => {
                return Err(Error::Invalid(
                    "the engine needs Z given as a point list".into(),
                ));
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Invalid(format!("lambda must be positive, got {l}")));
            }
        }
        Ok(())
    }
}

/// Engine configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub seed: u64,
    pub cover: CoverParams,
    /// Minimum projection thickness of the simplices used by the charts.
    pub theta_min: f64,
    pub cc_budget: CcBudget,
    /// Fine net cells per engine unit.
    pub cells_per_unit: u64,
    pub net_density_samples: usize,
    pub net_admissibility_centers: usize,
    /// Sample count of the nerve search in dimension ≥ 2.
    pub nerve_samples: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            seed: 0,
            cover: CoverParams::default(),
            theta_min: 0.05,
            cc_budget: CcBudget {
                segments: 8,
                max_iters: 40,
                rel_tol: 1e-6,
            },
            cells_per_unit: 4,
            net_density_samples: 200,
            net_admissibility_centers: 32,
            nerve_samples: 20_000,
        }
    }
}

/// Constants of the construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineParams {
    pub alpha: f64,
    pub beta: f64,
    pub mu: usize,
    pub tau: f64,
    pub r: u32,
    pub eps_prime: f64,
    pub eps: f64,
    pub lambda: f64,
}

fn rat(v: f64) -> Rational {
    Rational::from_f64(v)
}

/// Derives `(τ, r, ε′, ε)` from a cover certificate; refuses covers whose
/// multiplicity exceeds `n + 1` or that leave points uncovered.
pub fn derive_params(cert: &Certificate, n: usize, lambda: f64) -> Result<EngineParams> {
    if cert.mu > n + 1 {
        return Err(Error::Refused(format!(
            "cover multiplicity μ = {} exceeds n + 1 = {} (members {:?} are met by one small set at β = {})",
            cert.mu,
            n + 1,
            cert.witness,
            cert.beta
        )));
    }
    if cert.coverage.uncovered > 0 {
        return Err(Error::Refused(format!(
            "cover leaves {} checked points uncovered",
            cert.coverage.uncovered
        )));
    }
    if !(cert.alpha.is_finite() && cert.beta > 0.0) {
        return Err(Error::Refused(format!(
            "certificate constants α = {}, β = {}",
            cert.alpha, cert.beta
        )));
    }
    let (a, b) = (rat(cert.alpha), rat(cert.beta));
    let one = Rational::from_i64(1);
    let two = Rational::from_i64(2);
    let tau = &b / (&two * (&b + &one));
    let ratio = (&one + &a + &tau) / (&one - &tau);
    let r = ratio
        .ceil()
        .to_integer()
        .to_u32()
        .unwrap_or(u32::MAX)
        .max(2);
    let eps_prime = 1.0;
    let eps = (2.0 * eps_prime + 2.0 * (2.0 + cert.alpha)) * r as f64;
    Ok(EngineParams {
        alpha: cert.alpha,
        beta: cert.beta,
        mu: cert.mu,
        tau: Scalar::to_f64(&tau),
        r,
        eps_prime,
        eps,
        lambda,
    })
}

/// `s = min{s ∈ Z : d ≤ r^s}`, decided in exact arithmetic.
pub fn scale_index(d: f64, r: u32) -> i32 {
    assert!(d > 0.0 && r >= 2, "scale index needs d > 0 and r >= 2");
    let dr = rat(d);
    let rr = Rational::from_i64(r as i64);
    let mut s = (d.ln() / (r as f64).ln()).ceil() as i32;
    while dr <= powi_signed(&rr, s - 1) {
        s -= 1;
    }
    while dr > powi_signed(&rr, s) {
        s += 1;
    }
    s
}

/// For each member, the sample index `z_i` nearest to `B_i`; fails when
/// `d(z_i, B_i) > (2 − τ)·d(B_i, Z)`.
pub fn choose_anchors(cover: &WhitneyCover, points: &[Vec<f64>], tau: f64) -> Result<Vec<usize>> {
    cover
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (best, d) = points
                .iter()
                .enumerate()
                .map(|(j, z)| (j, m.brick.dist_point(z)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, c| if c.1 < acc.1 { c } else { acc },
                );
            if d > (2.0 - tau) * m.dist_z {
                return Err(Error::Refused(format!(
                    "member {i}: nearest sample at distance {d} > (2 − τ)·d(B_i, Z) = {}",
                    (2.0 - tau) * m.dist_z
                )));
            }
            Ok(best)
        })
        .collect()
}

/// A chosen projection `P(δ_{r^{-s}} f(z))` and its certified distances.
struct Projection {
    vertex: NetVertex,
    quasi: f64,
    cc: f64,
}

/// Outcome of [`choose_projections`].
enum Choice {
    Certified(Vec<Projection>),
    /// Smallest `cc_upper` among the candidates of the first key that
    /// failed to certify.
    Refine(f64),
}

/// `|x_a − x_b| / quasi(a, b)` for two vertices after rescaling to the
/// smaller scale; `None` when the scales are more than one step apart.
fn edge_quality(net: &Net, a: (&NetVertex, i32), b: (&NetVertex, i32)) -> Option<f64> {
    let (ys, _) = rescaled_vertices(&[(a.0.clone(), a.1), (b.0.clone(), b.1)]).ok()?;
    let (ja, jb) = (
        net.vertex_jet(&ys[0]).to_f64(),
        net.vertex_jet(&ys[1]).to_f64(),
    );
    let q = quasi_distance(&ja, &jb).ok()?;
    Some(if q == 0.0 {
        f64::INFINITY
    } else {
        dist(&ja.x, &jb.x) / q
    })
}

/// Candidates examined per key, and how many of them may be certified.
const PROJECTION_CANDIDATES: usize = 64;
const PROJECTION_TRIES: usize = 8;

/// Picks `P_i` for every `(z, s)` key in order. Any member within
/// quasi-distance `min(2·nearest, ε′)` is admissible. Keys with already
/// chosen nerve neighbours take the candidate whose worst edge to them has
/// the largest projection gap relative to its quasi-length: near-vertical
/// edges force jet curves of enormous length. The first candidate, in that
/// order, with `cc_upper ≤ ε′` is taken. If none certifies, the search
/// stops and reports the smallest upper estimate seen, so the caller can
/// refine the net.
fn choose_projections(
    net: &Net,
    problem: &ExtensionProblem,
    keys: &[(usize, i32)],
    neighbors: &BTreeSet<(usize, usize)>,
    eps_prime: f64,
    budget: &CcBudget,
) -> Result<Choice> {
    let r = Rational::from_i64(net.r as i64);
    let mut chosen: Vec<Projection> = Vec::with_capacity(keys.len());
    for (ki, &(zi, s)) in keys.iter().enumerate() {
        let value = problem.samples[zi]
            .value
            .to_rational()
            .dilate(&powi_signed(&r, -s));
        let fam = if s.rem_euclid(2) == 0 {
            Family::A
        } else {
            Family::APrime
        };
        let (near, dq) = net.nearest(fam, &value)?;
        if dq > eps_prime {
            return Err(Error::Audit(format!(
                "sample {zi} at scale {s}: projection at quasi-distance {dq} > ε′"
            )));
        }
        let mut cands = net.members_within(fam, &value, (2.0 * dq).min(eps_prime))?;
        if cands.is_empty() {
            cands.push((near, dq));
        }
        cands.truncate(PROJECTION_CANDIDATES);
        let placed: Vec<usize> = neighbors
            .iter()
            .filter_map(|&(a, b)| match (a == ki, b == ki) {
                (true, _) if b < ki => Some(b),
                (_, true) if a < ki => Some(a),
                _ => None,
            })
            .collect();
        let mut scored: Vec<(f64, NetVertex, f64)> = cands
            .into_iter()
            .map(|(v, d)| {
                let score = placed
                    .iter()
                    .filter_map(|&j| edge_quality(net, (&v, s), (&chosen[j].vertex, keys[j].1)))
                    .fold(f64::INFINITY, f64::min);
                (score, v, d)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.2.total_cmp(&b.2))
                .then_with(|| a.1.cmp(&b.1))
        });
        let target = value.to_f64();
        let mut best = f64::INFINITY;
        let mut pick = None;
        for (_, v, d) in scored.into_iter().take(PROJECTION_TRIES) {
            let cc = cc_upper_bound(&target, &net.vertex_jet(&v).to_f64(), budget, &[])?.upper;
            if cc <= eps_prime {
                pick = Some(Projection {
                    vertex: v,
                    quasi: d,
                    cc,
                });
                break;
            }
            best = best.min(cc);
        }
        match pick {
            Some(p) => chosen.push(p),
            None => return Ok(Choice::Refine(best)),
        }
    }
    Ok(Choice::Certified(chosen))
}

/// `P_i(a) = δ_{r^s} P(δ_{r^{-s}} a)`: the projected net vertex (unscaled,
/// family by parity of `s`) and the quasi-distance of the unscaled query
/// to it.
pub fn project_vertex(net: &Net, value: &JetPoint<Rational>, s: i32) -> Result<(NetVertex, f64)> {
    let r = Rational::from_i64(net.r as i64);
    let q = value.dilate(&powi_signed(&r, -s));
    let fam = if s.rem_euclid(2) == 0 {
        Family::A
    } else {
        Family::APrime
    };
    net.nearest(fam, &q)
}

/// `h|_S(v) = δ_{r^t} F|_{[y]}(v)` for vertices `(a_j, s_j)` with
/// `φ(e_j) = δ_{r^{s_j}} a_j`.
pub fn simplex_value(
    charts: &ChartSystem,
    vertices: &[(NetVertex, i32)],
    v: &[f64],
) -> Result<JetPoint<Rational>> {
    let (ys, t) = rescaled_vertices(vertices)?;
    let r = Rational::from_i64(charts.net.r as i64);
    Ok(charts.evaluate_f(&ys, v)?.dilate(&powi_signed(&r, t)))
}

/// Vertices `y_j` of a nerve simplex rescaled to its smallest scale `t`
/// (one step larger scales become `scaled` vertices), and `t`.
pub fn rescaled_vertices(vertices: &[(NetVertex, i32)]) -> Result<(Vec<NetVertex>, i32)> {
    let t = vertices
        .iter()
        .map(|(_, s)| *s)
        .min()
        .ok_or_else(|| Error::Invalid("empty simplex".into()))?;
    let ys = vertices
        .iter()
        .map(|(a, s)| match s - t {
            0 => Ok(a.clone()),
            1 => Ok(NetVertex {
                scaled: true,
                ..a.clone()
            }),
            d => Err(Error::Audit(format!(
                "scales differ by {d} > 1 within a simplex"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ys, t))
}

/// Tally of one audited inequality `lhs ≤ rhs` (or `<`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub checked: u64,
    pub failed: u64,
    /// Largest `lhs / rhs` seen; passing requires `≤ 1` (`< 1` if strict).
    pub worst_ratio: f64,
    pub strict: bool,
}

/// Named audit tallies, ordered by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub checks: BTreeMap<String, AuditCheck>,
}

impl AuditLog {
    /// Records `lhs ≤ rhs` (`<` when `strict`); returns whether it holds.
    pub fn record(&mut self, name: &str, lhs: f64, rhs: f64, strict: bool) -> bool {
        let ok = if strict { lhs < rhs } else { lhs <= rhs };
        let e = self.checks.entry(name.to_string()).or_default();
        e.checked += 1;
        e.strict = strict;
        if !ok {
            e.failed += 1;
        }
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        e.worst_ratio = e.worst_ratio.max(ratio);
        ok
    }

    pub fn merge(&mut self, o: &AuditLog) {
        for (k, v) in &o.checks {
            let e = self.checks.entry(k.clone()).or_default();
            e.checked += v.checked;
            e.failed += v.failed;
            e.strict = v.strict;
            e.worst_ratio = e.worst_ratio.max(v.worst_ratio);
        }
    }

    pub fn all_pass(&self) -> bool {
        self.checks.values().all(|c| c.failed == 0)
    }
}

/// Per-member data: anchor, scale and projected vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorEntry {
    pub z_index: usize,
    pub scale: i32,
    pub vertex: NetVertex,
    /// Quasi-distance of the unscaled projection.
    pub projection_quasi: f64,
}

/// Everything needed to evaluate `f̄`, in serializable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionArtifact {
    pub problem: ExtensionProblem,
    pub config: EngineConfig,
    pub params: EngineParams,
    pub cover: WhitneyCover,
    pub nerve: NerveData,
    pub charts: ChartSystemSpec,
    pub anchors: Vec<AnchorEntry>,
    pub build_audit: AuditLog,
}

/// Evaluation with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: JetPoint<f64>,
    /// Active members with their weights `g_i(x)`; empty on `Z`.
    pub active: Vec<(usize, f64)>,
    /// Index of the sample returned on `Z` (or near it, below `δ_min`).
    pub sample: Option<usize>,
}

/// The queryable extension.
pub struct Extension {
    pub artifact: ExtensionArtifact,
    pub charts: ChartSystem,
    audit: Mutex<AuditLog>,
    projection_cc: Mutex<BTreeMap<usize, f64>>,
    pair_cc: Mutex<BTreeMap<(usize, usize), f64>>,
}

fn estimate_lambda(samples: &[ZSample], budget: &CcBudget) -> Result<f64> {
    let mut l: f64 = 0.0;
    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let dz = dist(&a.z, &b.z);
            if dz == 0.0 {
                continue;
            }
            let up = cc_upper_bound(&a.value, &b.value, budget, &[])?.upper;
            l = l.max(up / dz);
        }
    }
    Ok(l)
}

/// Builds the extension for `problem`.
pub fn build_extension(problem: &ExtensionProblem, config: &EngineConfig) -> Result<Extension> {
    problem.validate()?;
    let (n, k) = (problem.n(), problem.k());
    let lambda = match problem.lambda {
        Some(l) => l,
        None => {
            let l = estimate_lambda(&problem.samples, &config.cc_budget)?;
            // a constant map is λ-Lipschitz for every λ; use the unit scale
            if l > 0.0 {
                l
            } else {
                1.0
            }
        }
    };
    let domain = problem.domain.scaled(lambda);
    let mut cover_params = config.cover.clone();
    cover_params.delta_min *= lambda;
    cover_params.seed = config.seed;
    let cover = build_cover(&domain, &cover_params)?;
    let params = derive_params(&cover.certificate, n, lambda)?;
    let tau = params.tau;
    let nerve = nerve(&cover, tau, config.nerve_samples, config.seed);
    if let Some(s) = nerve.simplices.iter().find(|s| s.len() > n + 1) {
        return Err(Error::Refused(format!(
            "nerve simplex {s:?} has {} > n + 1 vertices",
            s.len()
        )));
    }
    let points: Vec<Vec<f64>> = problem
        .samples
        .iter()
        .map(|s| s.z.iter().map(|v| v * lambda).collect())
        .collect();
    let zs = choose_anchors(&cover, &points, tau)?;
    // One projection per distinct (anchor, scale) key; nerve neighbours
    // between keys steer the choice among admissible candidates.
    let mut key_index: BTreeMap<(usize, i32), usize> = BTreeMap::new();
    let member_key: Vec<usize> = cover
        .members
        .iter()
        .zip(&zs)
        .map(|(m, &zi)| {
            let next = key_index.len();
            *key_index
                .entry((zi, scale_index(m.dist_z, params.r)))
                .or_insert(next)
        })
        .collect();
    let mut keys = vec![(0, 0); key_index.len()];
    for (key, &i) in &key_index {
        keys[i] = *key;
    }
    let mut neighbors: BTreeSet<(usize, usize)> = BTreeSet::new();
    for simplex in &nerve.simplices {
        for (a, &i) in simplex.iter().enumerate() {
            for &j in &simplex[a + 1..] {
                let (ki, kj) = (member_key[i], member_key[j]);
                if ki != kj {
                    neighbors.insert((ki.min(kj), ki.max(kj)));
                }
            }
        }
    }
    // The net is ε′-dense in quasi-distance; the construction needs ε′ in
    // d_c. Refine the fine cells until every projection used is certified
    // by the upper estimator.
    let mut cells = config.cells_per_unit;
    let (net, anchors, mut audit) = loop {
        let mut net_cfg = NetConfig::new(params.eps, params.eps_prime, params.r, config.seed);
        net_cfg.cells_per_unit = cells;
        net_cfg.density_samples = config.net_density_samples;
        net_cfg.admissibility_centers = config.net_admissibility_centers;
        let net = build_net(&build_lattice(n, k, 1)?, &net_cfg)?;
        let mut audit = AuditLog::default();
        let worst = match choose_projections(
            &net,
            problem,
            &keys,
            &neighbors,
            params.eps_prime,
            &config.cc_budget,
        )? {
            Choice::Certified(chosen) => {
                let mut anchors = Vec::with_capacity(zs.len());
                for (i, &zi) in zs.iter().enumerate() {
                    let m = &cover.members[i];
                    audit.record(
                        "anchor: d(z_i,B_i) <= (2-tau) d(B_i,Z)",
                        m.brick.dist_point(&points[zi]),
                        (2.0 - tau) * m.dist_z,
                        false,
                    );
                    let p = &chosen[member_key[i]];
                    audit.record(
                        "projection (quasi): d(x,P_i x) <= eps' r^s",
                        p.quasi,
                        params.eps_prime,
                        false,
                    );
                    anchors.push(AnchorEntry {
                        z_index: zi,
                        scale: keys[member_key[i]].1,
                        vertex: p.vertex.clone(),
                        projection_quasi: p.quasi,
                    });
                }
                for p in &chosen {
                    audit.record(
                        "projection (cc, build): d_c(x,P_i x) <= eps' r^s",
                        p.cc,
                        params.eps_prime,
                        false,
                    );
                }
                break (net, anchors, audit);
            }
            Choice::Refine(worst) => worst,
        };
        if cells >= 64 * config.cells_per_unit {
            return Err(Error::Audit(format!(
                "projections stay {worst} > ε′ = {} in d_c at {cells} cells per unit",
                params.eps_prime
            )));
        }
        // distances shrink about linearly with the cell size
        let factor = ((1.5 * worst / params.eps_prime).ceil() as u64)
            .next_power_of_two()
            .max(2);
        cells = (cells * factor).min(64 * config.cells_per_unit);
    };

    // rescaled simplices, their pairwise bound and the chart ladder
    let mut simplices = Vec::new();
    for s in &nerve.simplices {
        let verts: Vec<(NetVertex, i32)> = s
            .iter()
            .map(|&i| (anchors[i].vertex.clone(), anchors[i].scale))
            .collect();
        let (ys, _) =
            rescaled_vertices(&verts).map_err(|e| Error::Audit(format!("simplex {s:?}: {e}")))?;
        let jets: Vec<JetPoint<f64>> = ys.iter().map(|y| net.vertex_jet(y).to_f64()).collect();
        for a in 0..jets.len() {
            for b in a + 1..jets.len() {
                let d = quasi_distance(&jets[a], &jets[b])?;
                if !audit.record("chart ball: quasi(y_a,y_b) <= eps", d, params.eps, false) {
                    return Err(Error::Audit(format!(
                        "simplex {s:?}: rescaled vertices {d} apart > ε"
                    )));
                }
            }
        }
        simplices.push(ys);
    }
    let charts = ChartSystem::build(net, &simplices, config.theta_min)?;

    let artifact = ExtensionArtifact {
        problem: problem.clone(),
        config: config.clone(),
        params,
        cover,
        nerve,
        charts: charts.spec(),
        anchors,
        build_audit: AuditLog::default(),
    };
    let ext = Extension {
        artifact,
        charts,
        audit: Mutex::new(AuditLog::default()),
        projection_cc: Mutex::new(BTreeMap::new()),
        pair_cc: Mutex::new(BTreeMap::new()),
    };
    // vertices agree with every containing simplex
    for s in &ext.artifact.nerve.simplices {
        if s.len() < 2 {
            continue;
        }
        for (pos, &c) in s.iter().enumerate() {
            let mut v = vec![0.0; s.len()];
            v[pos] = 1.0;
            let from_s = ext.h_on(s, &v)?.to_f64();
            let from_c = ext.h_on(&[c], &[1.0])?.to_f64();
            let diff = from_s.max_rel_diff(&from_c);
            if !audit.record("shared face: |h_S(e_c) - h_c| (rel)", diff, 1e-9, false) {
                return Err(Error::Audit(format!(
                    "simplex {s:?} disagrees with vertex {c}: {diff}"
                )));
            }
        }
    }
    let mut ext = ext;
    ext.artifact.build_audit = audit;
    Ok(ext)
}

impl Extension {
    /// Rebuilds an extension from its artifact.
    pub fn from_artifact(artifact: ExtensionArtifact) -> Extension {
        let charts = ChartSystem::from_spec(artifact.charts.clone());
        Extension {
            artifact,
            charts,
            audit: Mutex::new(AuditLog::default()),
            projection_cc: Mutex::new(BTreeMap::new()),
            pair_cc: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn params(&self) -> &EngineParams {
        &self.artifact.params
    }

    /// Audits recorded by queries so far.
    pub fn query_audit(&self) -> AuditLog {
        self.audit.lock().expect("audit log").clone()
    }

    fn h_on(&self, s: &[usize], v: &[f64]) -> Result<JetPoint<Rational>> {
        let verts: Vec<(NetVertex, i32)> = s
            .iter()
            .map(|&i| {
                (
                    self.artifact.anchors[i].vertex.clone(),
                    self.artifact.anchors[i].scale,
                )
            })
            .collect();
        simplex_value(&self.charts, &verts, v)
    }

    /// `φ(e_i)` in exact coordinates.
    pub fn vertex_value(&self, i: usize) -> JetPoint<Rational> {
        let a = &self.artifact.anchors[i];
        let r = Rational::from_i64(self.artifact.params.r as i64);
        self.charts
            .net
            .vertex_jet(&a.vertex)
            .dilate(&powi_signed(&r, a.scale))
    }

    fn projection_cc(&self, i: usize) -> Result<f64> {
        if let Some(v) = self.projection_cc.lock().expect("cache").get(&i) {
            return Ok(*v);
        }
        let a = &self.artifact.anchors[i];
        let r = Rational::from_i64(self.artifact.params.r as i64);
        let q = self.artifact.problem.samples[a.z_index]
            .value
            .to_rational()
            .dilate(&powi_signed(&r, -a.scale))
            .to_f64();
        let p = self.charts.net.vertex_jet(&a.vertex).to_f64();
        let up = cc_upper_bound(&q, &p, &self.artifact.config.cc_budget, &[])?.upper;
        self.projection_cc.lock().expect("cache").insert(i, up);
        Ok(up)
    }

    /// `cc_upper(φ(e_i), φ(e_j)) / r^{max(s_i,s_j)}`.
    fn pair_cc(&self, i: usize, j: usize) -> Result<f64> {
        let key = (i.min(j), i.max(j));
        if let Some(v) = self.pair_cc.lock().expect("cache").get(&key) {
            return Ok(*v);
        }
        let (ai, aj) = (&self.artifact.anchors[i], &self.artifact.anchors[j]);
        let top = ai.scale.max(aj.scale);
        let r = Rational::from_i64(self.artifact.params.r as i64);
        let shrink = powi_signed(&r, -top);
        let a = self.vertex_value(i).dilate(&shrink).to_f64();
        let b = self.vertex_value(j).dilate(&shrink).to_f64();
        let up = cc_upper_bound(&a, &b, &self.artifact.config.cc_budget, &[])?.upper;
        self.pair_cc.lock().expect("cache").insert(key, up);
        Ok(up)
    }

    /// `f̄(x)` with provenance and audits.
    pub fn evaluate_detailed(&self, x: &[f64]) -> Result<Evaluation> {
        let art = &self.artifact;
        let prob = &art.problem;
        if !prob.domain.contains(x) {
            return Err(Error::Domain(format!("{x:?} is outside the domain box")));
        }
        if let Some(i) = prob.samples.iter().position(|s| s.z == x) {
            return Ok(Evaluation {
                value: prob.samples[i].value.clone(),
                active: vec![],
                sample: Some(i),
            });
        }
        let lambda = art.params.lambda;
        let xs: Vec<f64> = x.iter().map(|v| v * lambda).collect();
        let dxz = art.cover.domain.dist_to_z(&xs);
        if dxz < art.cover.params.delta_min {
            // below the resolution of the truncated cover: nearest sample
            let i = prob
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| (i, dist(&s.z, x)))
                .fold((0, f64::INFINITY), |a, c| if c.1 < a.1 { c } else { a })
                .0;
            return Ok(Evaluation {
                value: prob.samples[i].value.clone(),
                active: vec![],
                sample: Some(i),
            });
        }
        let g = barycentric_map(&art.cover, art.params.tau, &xs)?;
        self.audit_point(&xs, dxz, &g)?;
        let idx: Vec<usize> = g.iter().map(|(i, _)| *i).collect();
        let w: Vec<f64> = g.iter().map(|(_, w)| *w).collect();
        let value = self.h_on(&idx, &w)?.to_f64();
        Ok(Evaluation {
            value,
            active: g,
            sample: None,
        })
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<JetPoint<f64>> {
        Ok(self.evaluate_detailed(x)?.value)
    }

    fn audit_point(&self, xs: &[f64], dxz: f64, g: &[(usize, f64)]) -> Result<()> {
        let p = &self.artifact.params;
        let (alpha, tau) = (p.alpha, p.tau);
        let mut log = AuditLog::default();
        let mut fail: Option<String> = None;
        let mut check =
            |log: &mut AuditLog, name: &str, lhs: f64, rhs: f64, strict: bool, what: String| {
                if !log.record(name, lhs, rhs, strict) && fail.is_none() {
                    fail = Some(format!("{name}: {lhs} vs {rhs} ({what})"));
                }
            };
        let points = &self.artifact.problem.samples;
        for &(i, _) in g {
            let m = &self.artifact.cover.members[i];
            let a = &self.artifact.anchors[i];
            check(
                &mut log,
                "distance band lower: d(x,Z)/(1+alpha+tau) < d(B_i,Z)",
                dxz / (1.0 + alpha + tau),
                m.dist_z,
                true,
                format!("member {i}"),
            );
            check(
                &mut log,
                "distance band upper: d(B_i,Z) < d(x,Z)/(1-tau)",
                m.dist_z,
                dxz / (1.0 - tau),
                true,
                format!("member {i}"),
            );
            let z: Vec<f64> = points[a.z_index].z.iter().map(|v| v * p.lambda).collect();
            check(
                &mut log,
                "anchor: d(x,z_i) <= (2+alpha) d(B_i,Z)",
                dist(xs, &z),
                (2.0 + alpha) * m.dist_z,
                false,
                format!("member {i}"),
            );
            let up = self.projection_cc(i)?;
            check(
                &mut log,
                "projection (cc): d_c(x,P_i x) <= eps' r^s",
                up,
                p.eps_prime,
                false,
                format!("member {i}"),
            );
        }
        for (a, &(i, _)) in g.iter().enumerate() {
            for &(j, _) in &g[a + 1..] {
                let (si, sj) = (
                    self.artifact.anchors[i].scale,
                    self.artifact.anchors[j].scale,
                );
                check(
                    &mut log,
                    "scales: |s_i - s_j| <= 1",
                    (si - sj).abs() as f64,
                    1.0,
                    false,
                    format!("members {i}, {j}"),
                );
                let up = self.pair_cc(i, j)?;
                check(
                    &mut log,
                    "vertex pair: d_c(phi_i,phi_j) <= eps r^max(s)",
                    up,
                    p.eps,
                    false,
                    format!("members {i}, {j}"),
                );
            }
        }
        self.audit.lock().expect("audit log").merge(&log);
        match fail {
            Some(m) => Err(Error::Audit(m)),
            None => Ok(()),
        }
    }

    /// Upper estimate `ϱ` of the chart Lipschitz constants over the nerve.
    pub fn rho_max(&self) -> Result<f64> {
        let mut rho: f64 = 0.0;
        for s in &self.artifact.nerve.simplices {
            let verts: Vec<(NetVertex, i32)> = s
                .iter()
                .map(|&i| {
                    (
                        self.artifact.anchors[i].vertex.clone(),
                        self.artifact.anchors[i].scale,
                    )
                })
                .collect();
            let (ys, _) = rescaled_vertices(&verts)?;
            rho = rho.max(self.charts.chart_lipschitz(&ys)?);
        }
        Ok(rho)
    }
}

/// Sampler for [`verify_lipschitz`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    pub pairs_per_scale: usize,
    pub q_max: u32,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            pairs_per_scale: 24,
            q_max: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub q: u32,
    pub pairs: usize,
    pub max_ratio: f64,
    pub mean_ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseRow {
    pub pairs: usize,
    pub max_ratio: f64,
}

/// Empirical Lipschitz report: `cc_upper(f̄x, f̄y)/|x − y|` over pairs with
/// `|x − y| = 2^{-q}` (original units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub lambda: f64,
    pub per_scale: Vec<ScaleRow>,
    pub per_case: BTreeMap<String, CaseRow>,
    pub max_ratio: f64,
    /// `max_ratio / λ`.
    pub constant: f64,
    /// Maxima of the last four scales are increasing with more than 10%
    /// total growth.
    pub growth_detected: bool,
    pub rho_max: f64,
    pub build_audit: AuditLog,
    pub query_audit: AuditLog,
}

impl LipschitzReport {
    pub fn audits_pass(&self) -> bool {
        self.build_audit.all_pass() && self.query_audit.all_pass()
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = crate::geometry::norm(&v);
        if l > 0.1 && l <= 1.0 {
            return v.iter().map(|c| c / l).collect();
        }
    }
}

/// Samples pairs per scale and reports Lipschitz ratios and audits.
pub fn verify_lipschitz(ext: &Extension, cfg: &VerifyConfig) -> Result<LipschitzReport> {
    let prob = &ext.artifact.problem;
    let dom = &prob.domain;
    let d = dom.d;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut per_scale = Vec::new();
    let mut per_case: BTreeMap<String, CaseRow> = BTreeMap::new();
    let mut max_ratio: f64 = 0.0;
    for q in 1..=cfg.q_max {
        let h = 2f64.powi(-(q as i32));
        let (mut count, mut sum, mut mx) = (0usize, 0.0, 0.0f64);
        let mut attempts = 0;
        while count < cfg.pairs_per_scale && attempts < 100 * cfg.pairs_per_scale {
            attempts += 1;
            let from_z = count % 4 == 0;
            let x: Vec<f64> = if from_z {
                prob.samples[rng.gen_range(0..prob.samples.len())].z.clone()
            } else {
                (0..d)
                    .map(|i| rng.gen_range(dom.bounds.lo[i]..=dom.bounds.hi[i]))
                    .collect()
            };
            let u = random_unit(&mut rng, d);
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + h * b).collect();
            if !dom.contains(&y) {
                continue;
            }
            let ex = ext.evaluate_detailed(&x)?;
            let ey = ext.evaluate_detailed(&y)?;
            let dxy = dist(&x, &y);
            let up =
                cc_upper_bound(&ex.value, &ey.value, &ext.artifact.config.cc_budget, &[])?.upper;
            let ratio = up / dxy;
            let case = if ex.sample.is_some() || ey.sample.is_some() {
                "Z-X"
            } else if ex
                .active
                .iter()
                .any(|(i, _)| ey.active.iter().any(|(j, _)| i == j))
            {
                "co-active"
            } else {
                "non-co-active"
            };
            let row = per_case.entry(case.to_string()).or_default();
            row.pairs += 1;
            row.max_ratio = row.max_ratio.max(ratio);
            count += 1;
            sum += ratio;
            mx = mx.max(ratio);
        }
        max_ratio = max_ratio.max(mx);
        per_scale.push(ScaleRow {
            q,
            pairs: count,
            max_ratio: mx,
            mean_ratio: if count > 0 { sum / count as f64 } else { 0.0 },
        });
    }
    let growth_detected = growth(&per_scale);
    Ok(LipschitzReport {
        lambda: ext.artifact.params.lambda,
        constant: max_ratio / ext.artifact.params.lambda,
        per_scale,
        per_case,
        max_ratio,
        growth_detected,
        rho_max: ext.rho_max()?,
        build_audit: ext.artifact.build_audit.clone(),
        query_audit: ext.query_audit(),
    })
}

/// Monotone growth over the last four scales by more than 10%.
pub fn growth(rows: &[ScaleRow]) -> bool {
    if rows.len() < 4 {
        return false;
    }
    let last: Vec<f64> = rows[rows.len() - 4..].iter().map(|r| r.max_ratio).collect();
    last.windows(2).all(|w| w[0] <= w[1]) && last[3] > 1.1 * last[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{BoxRegion, CoverageReport};
    use crate::poly::{jet, Polynomial};

    fn cert(alpha: f64, beta: f64, mu: usize) -> Certificate {
        Certificate {
            alpha,
            beta,
            mu,
            witness: vec![],
            coverage: CoverageReport {
                exact: true,
                samples: 0,
                uncovered: 0,
            },
        }
    }

    #[test]
    fn parameter_arithmetic() {
        let p = derive_params(&cert(1.0, 1.0, 2), 1, 1.0).unwrap();
        assert_eq!((p.tau, p.r, p.eps, p.eps_prime), (0.25, 3, 24.0, 1.0));
        let p = derive_params(&cert(1.0, 2f64.powi(-20), 2), 1, 1.0).unwrap();
        assert_eq!(p.r, 3);
        let p = derive_params(&cert(0.5, 2f64.powi(-30), 2), 1, 1.0).unwrap();
        assert_eq!(p.r, 2);
        assert!(matches!(
            derive_params(&cert(1.0, 0.5, 3), 1, 1.0),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn scale_indices() {
        assert_eq!(scale_index(4.0, 3), 2);
        assert_eq!(scale_index(1.0, 3), 0);
        assert_eq!(scale_index(243.0, 3), 5);
        assert_eq!(scale_index(243.000001, 3), 6);
        assert_eq!(scale_index(1.0 / 9.0, 3), -2);
        assert_eq!(scale_index(0.1, 3), -2);
    }

    pub(crate) fn problem(k: u32, zs: &[f64], p: &Polynomial<f64>) -> ExtensionProblem {
        ExtensionProblem {
            domain: DomainSpec {
                d: 1,
                bounds: BoxRegion {
                    lo: vec![0.0],
                    hi: vec![1.0],
                },
                z: ZSet::Points {
                    points: zs.iter().map(|z| vec![*z]).collect(),
                },
            },
            samples: zs
                .iter()
                .map(|z| ZSample {
                    z: vec![*z],
                    value: jet(p, &[*z], k),
                })
                .collect(),
            lambda: None,
        }
    }

    fn quick_config() -> EngineConfig {
        let mut c = EngineConfig::default();
        c.cover.delta_min = 2f64.powi(-14);
        c
    }

    #[test]
    fn extension_agrees_on_z_and_passes_audits() {
        let p = Polynomial::from_terms(1, 3, &[(vec![1], 0.5), (vec![2], -1.0), (vec![3], 0.75)])
            .unwrap();
        let prob = problem(1, &[0.0, 1.0], &p);
        let t0 = std::time::Instant::now();
        let ext = build_extension(&prob, &quick_config()).unwrap();
        let built = t0.elapsed();
        for s in &prob.samples {
            assert_eq!(ext.evaluate(&s.z).unwrap(), s.value);
        }
        assert!(ext.artifact.build_audit.all_pass());
        let rep = verify_lipschitz(
            &ext,
            &VerifyConfig {
                seed: 1,
                pairs_per_scale: 6,
                q_max: 12,
            },
        )
        .unwrap();
        eprintln!("build {built:?}, total {:?}", t0.elapsed());
        eprintln!("{}", serde_json::to_string_pretty(&rep).unwrap());
        assert!(rep.audits_pass());
        assert!(matches!(ext.evaluate(&[1.5]), Err(Error::Domain(_))));
    }
}
