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

//! Computational library for jet-space Carnot groups `J^k(R^n)`.
//!
//! * [`jet`] — global coordinates, group law, dilations, quasi-norm.
//! * [`poly`] — polynomials, Taylor polynomials, jets and shifted functions.
//! * [`cc`] — horizontal controls, exact flow integration and
//!   Carnot–Carathéodory distance bounds.
//! * [`lattice`], [`net`], [`charts`] — dilation-stable lattices, admissible
//!   nets and the simplexwise jet maps built on them.
//! * [`cover`] — Whitney-type covers, partition functions and nerves.
//! * [`engine`] — the extension `f̄ = h ∘ g` with inequality auditing.

pub mod cc;
pub mod charts;
pub mod cover;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod lattice;
pub mod multiindex;
pub mod net;
pub mod poly;
pub mod scalar;
pub mod smooth;
pub mod suite;

pub use error::{Error, Result};
pub use jet::{quasi_distance, JetPoint};
pub use multiindex::{enumerate_multiindices, MultiIndex};
pub use scalar::{Rational, Scalar};
