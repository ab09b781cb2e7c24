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

//! Multi-indices and the canonical coordinate layout of `J^k(R^n)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

/// An `n`-tuple of non-negative exponents.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit index `e_i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|I|`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `I!` as an integer.
    pub fn factorial(&self) -> u64 {
        self.0
            .iter()
            .map(|&i| (1..=i as u64).product::<u64>())
            .product()
    }

    /// `self >= other` componentwise.
    pub fn dominates(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }

    /// `self - other`, assuming `self.dominates(other)`.
    pub fn minus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn plus_unit(&self, i: usize) -> MultiIndex {
        let mut v = self.0.clone();
        v[i] += 1;
        MultiIndex(v)
    }

    /// `x^I` for a point `x`.
    pub fn monomial<S: crate::Scalar>(&self, x: &[S]) -> S {
        let mut out = S::one();
        for (xi, &e) in x.iter().zip(&self.0) {
            out = out * xi.powi(e);
        }
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// `binom(n, k)`.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out = 1u64;
    for i in 0..k {
        out = out * (n - i) / (i + 1);
    }
    out
}

/// Number of `j`-indices in `n` variables, `binom(n+j-1, j)`.
pub fn layer_size(n: usize, j: u32) -> usize {
    binomial(n as u64 + j as u64 - 1, j as u64) as usize
}

/// All multi-indices of degree `j` in graded-lexicographic order
/// (first exponent descending).
pub fn enumerate_multiindices(n: usize, j: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, j: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(j);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=j).rev() {
            prefix.push(first);
            rec(n, j - first, prefix, out);
            prefix.pop();
        }
    }
    assert!(n >= 1, "n must be at least 1");
    let mut out = Vec::with_capacity(layer_size(n, j));
    rec(n, j, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Flat coordinate layout of all multi-indices with `|I| <= k`, degree
/// ascending and graded-lex within a degree, plus the index tables the
/// group law and the horizontal frame need.
#[derive(Debug)]
pub struct Layout {
    pub n: usize,
    pub k: u32,
    pub indices: Vec<MultiIndex>,
    /// `offsets[j]..offsets[j+1]` is the degree-`j` block.
    pub offsets: Vec<usize>,
    position: HashMap<MultiIndex, usize>,
    /// For each flat `I`: `(J, J-I, (J-I)!)` over all `J >= I` with `|J| <= k`.
    pub dominating: Vec<Vec<(usize, usize, u64)>>,
    /// `plus_unit[I][i]` is the flat position of `I + e_i` when `|I| < k`.
    pub plus_unit: Vec<Vec<Option<usize>>>,
}

impl Layout {
    fn build(n: usize, k: u32) -> Self {
        let mut indices = Vec::new();
        let mut offsets = Vec::with_capacity(k as usize + 2);
        for j in 0..=k {
            offsets.push(indices.len());
            indices.extend(enumerate_multiindices(n, j));
        }
        offsets.push(indices.len());
        let position: HashMap<_, _> = indices
            .iter()
            .enumerate()
            .map(|(p, i)| (i.clone(), p))
            .collect();
        let dominating = indices
            .iter()
            .map(|i| {
                indices
                    .iter()
                    .enumerate()
                    .filter(|(_, jdx)| jdx.dominates(i))
                    .map(|(pj, jdx)| {
                        let d = jdx.minus(i);
                        let f = d.factorial();
                        (pj, position[&d], f)
                    })
                    .collect()
            })
            .collect();
        let plus_unit = indices
            .iter()
            .map(|i| {
                (0..n)
                    .map(|m| position.get(&i.plus_unit(m)).copied())
                    .collect()
            })
            .collect();
        Layout {
            n,
            k,
            indices,
            offsets,
            position,
            dominating,
            plus_unit,
        }
    }

    /// Total number of `u` coordinates.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn position(&self, idx: &MultiIndex) -> Option<usize> {
        self.position.get(idx).copied()
    }

    pub fn degree_of(&self, flat: usize) -> u32 {
        self.indices[flat].degree()
    }

    pub fn layer(&self, j: u32) -> std::ops::Range<usize> {
        self.offsets[j as usize]..self.offsets[j as usize + 1]
    }

    /// Dilation weight of the `u^j` layer, `k + 1 - j`.
    pub fn weight(&self, flat: usize) -> u32 {
        self.k + 1 - self.degree_of(flat)
    }
}

type LayoutCache = Mutex<HashMap<(usize, u32), Arc<Layout>>>;

/// Shared, cached layout for `(n, k)`.
pub fn layout(n: usize, k: u32) -> Arc<Layout> {
    static CACHE: OnceLock<LayoutCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry((n, k))
        .or_insert_with(|| Arc::new(Layout::build(n, k)))
        .clone()
}
