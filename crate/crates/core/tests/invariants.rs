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

//! Property tests of the public invariants: exact group laws, dilations,
//! jet translation, distance estimates, covers and partitions of unity.

use num::BigInt;
use proptest::prelude::*;

use jetcarnot::cc::{cc_lower_bound, cc_upper_bound, CcBudget};
use jetcarnot::cover::{
    barycentric_map, build_cover, sigma, tau_of, BoxRegion, CoverParams, DomainSpec, ZSet,
};
use jetcarnot::multiindex::layout;
use jetcarnot::poly::{jet_translation, Polynomial};
use jetcarnot::{quasi_distance, JetPoint, Rational};

fn rational() -> impl Strategy<Value = Rational> {
    (-30i64..=30, 1i64..=7).prop_map(|(p, q)| Rational::new(BigInt::from(p), BigInt::from(q)))
}

fn shape() -> impl Strategy<Value = (usize, u32)> {
    prop_oneof![
        Just((1usize, 1u32)),
        Just((1, 2)),
        Just((2, 1)),
        Just((2, 2))
    ]
}

fn exact_jet(n: usize, k: u32) -> impl Strategy<Value = JetPoint<Rational>> {
    let len = layout(n, k).len();
    (
        prop::collection::vec(rational(), n),
        prop::collection::vec(rational(), len),
    )
        .prop_map(move |(x, u)| JetPoint::new(n, k, x, u).expect("shape"))
}

fn float_jet(n: usize, k: u32) -> impl Strategy<Value = JetPoint<f64>> {
    let len = layout(n, k).len();
    (
        prop::collection::vec(-2.0..2.0f64, n),
        prop::collection::vec(-2.0..2.0f64, len),
    )
        .prop_map(move |(x, u)| JetPoint::new(n, k, x, u).expect("shape"))
}

fn exact_triple(
) -> impl Strategy<Value = (JetPoint<Rational>, JetPoint<Rational>, JetPoint<Rational>)> {
    shape().prop_flat_map(|(n, k)| (exact_jet(n, k), exact_jet(n, k), exact_jet(n, k)))
}

fn float_pair() -> impl Strategy<Value = (JetPoint<f64>, JetPoint<f64>)> {
    shape().prop_flat_map(|(n, k)| (float_jet(n, k), float_jet(n, k)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_associative_with_inverses((a, b, c) in exact_triple()) {
        let left = a.product(&b).unwrap().product(&c).unwrap();
        let right = a.product(&b.product(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        prop_assert!(a.product(&a.inverse()).unwrap().is_identity());
        prop_assert_eq!(a.inverse().inverse(), a);
    }

    #[test]
    fn dilations_are_automorphisms((a, b, _) in exact_triple(), l in rational(), m in rational()) {
        prop_assert_eq!(
            a.product(&b).unwrap().dilate(&l),
            a.dilate(&l).product(&b.dilate(&l)).unwrap()
        );
        prop_assert_eq!(a.dilate(&m).dilate(&l), a.dilate(&(l * m)));
    }

    #[test]
    fn jet_translation_holds_exactly(
        (a, _, _) in exact_triple(),
        seed in prop::collection::vec(rational(), 28),
        x in prop::collection::vec(rational(), 2),
    ) {
        let (n, k) = (a.n(), a.k());
        let len = layout(n, k + 2).len();
        let f = Polynomial::from_coeffs(n, k + 2, seed[..len].to_vec()).unwrap();
        let (lhs, rhs) = jet_translation(&a, &f, &x[..n]).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn quasi_distance_is_left_invariant_and_homogeneous((a, b) in float_pair(), g in float_pair(), l in 0.25..4.0f64) {
        let g = if g.0.n() == a.n() && g.0.k() == a.k() { g.0 } else { JetPoint::identity(a.n(), a.k()) };
        let d = quasi_distance(&a, &b).unwrap();
        let moved = quasi_distance(&g.product(&a).unwrap(), &g.product(&b).unwrap()).unwrap();
        prop_assert!((d - moved).abs() <= 1e-6 * (1.0 + d), "{} vs {}", d, moved);
        let scaled = quasi_distance(&a.dilate(&l), &b.dilate(&l)).unwrap();
        prop_assert!((scaled - l * d).abs() <= 1e-6 * (1.0 + l * d), "{} vs {}", scaled, l * d);
    }

    #[test]
    fn distance_bounds_are_ordered((a, b) in float_pair()) {
        let budget = CcBudget { segments: 4, max_iters: 10, rel_tol: 1e-6 };
        let est = cc_upper_bound(&a, &b, &budget, &[]).unwrap();
        prop_assert!(est.lower == cc_lower_bound(&a, &b).unwrap());
        prop_assert!(est.lower <= est.upper);
        prop_assert!(est.witness.length() >= est.lower - 1e-6 * (1.0 + est.lower));
    }

    #[test]
    fn jet_json_round_trips((a, _) in float_pair()) {
        let text = serde_json::to_string(&a).unwrap();
        let back: JetPoint<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, a);
    }
}

fn interval(zs: &[f64]) -> DomainSpec {
    DomainSpec {
        d: 1,
        bounds: BoxRegion {
            lo: vec![0.0],
            hi: vec![1.0],
        },
        z: ZSet::Points {
            points: zs.iter().map(|z| vec![*z]).collect(),
        },
    }
}

fn separated_points() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..1024, 1..8)
        .prop_map(|s| s.into_iter().map(|v| v as f64 / 1024.0).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interval_covers_certify_and_cover(zs in separated_points()) {
        let params = CoverParams { delta_min: 2f64.powi(-16), ..CoverParams::default() };
        let c = build_cover(&interval(&zs), &params).unwrap();
        let cert = &c.certificate;
        prop_assert!(cert.coverage.exact);
        prop_assert_eq!(cert.coverage.uncovered, 0);
        prop_assert!(cert.alpha <= 1.0 + 1e-12);
        prop_assert_eq!(cert.mu, 2);
    }

    #[test]
    fn scaled_irregular_covers_leave_no_holes(
        raw in prop::collection::btree_set(1u32..1_000_000, 2..18),
        l in 0.1..20.0f64,
    ) {
        let zs: Vec<f64> = raw.iter().map(|v| (*v as f64 / 1e6).sqrt()).collect();
        let params = CoverParams { delta_min: l * 2f64.powi(-24), ..CoverParams::default() };
        let c = build_cover(&interval(&zs).scaled(l), &params).unwrap();
        prop_assert_eq!(c.certificate.coverage.uncovered, 0);
        prop_assert_eq!(c.certificate.mu, 2);
    }

    #[test]
    fn partition_of_unity_and_lipschitz_sigma(zs in separated_points(), x in 0.0..1.0f64, dx in -0.01..0.01f64) {
        let params = CoverParams { delta_min: 2f64.powi(-16), ..CoverParams::default() };
        let c = build_cover(&interval(&zs), &params).unwrap();
        let tau = tau_of(c.certificate.beta);
        let dom = &c.domain;
        prop_assume!(dom.dist_to_z(&[x]) >= 4.0 * params.delta_min);
        let g = barycentric_map(&c, tau, &[x]).unwrap();
        let total: f64 = g.iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(g.len() <= c.certificate.mu);
        let y = (x + dx).clamp(0.0, 1.0);
        prop_assume!(dom.dist_to_z(&[y]) > 0.0);
        for i in 0..c.members.len() {
            let (a, b) = (sigma(&c, tau, i, &[x]).unwrap(), sigma(&c, tau, i, &[y]).unwrap());
            prop_assert!((a - b).abs() <= (x - y).abs() + 1e-12);
        }
    }
}
