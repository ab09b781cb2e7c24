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

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "shape mismatch: expected (n={expected_n}, k={expected_k}), got (n={got_n}, k={got_k})"
    )]
    Shape {
        expected_n: usize,
        expected_k: u32,
        got_n: usize,
        got_k: u32,
    },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("instance refused: {0}")]
    Refused(String),
    #[error("audit failed: {0}")]
    Audit(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
