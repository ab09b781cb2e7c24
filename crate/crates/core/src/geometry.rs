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

//! Euclidean simplex geometry in `R^n`: affine hulls, barycentric
//! coordinates, heights and thickness.

/// Orthonormal basis of the direction space of the affine hull of `pts`,
/// built by Gram–Schmidt; directions shorter than `tol` relative to the
/// diameter are dropped.
pub fn affine_basis(pts: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let diam = diameter(pts).max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in pts.iter().skip(1) {
        let mut v: Vec<f64> = p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect();
        for _ in 0..2 {
            for e in &basis {
                let d = dot(&v, e);
                v.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
            }
        }
        let len = norm(&v);
        if len > 1e-12 * diam {
            basis.push(v.iter().map(|a| a / len).collect());
        }
    }
    basis
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            d = d.max(dist(p, q));
        }
    }
    d
}

/// Distance from `z` to the affine hull of `pts` (nonempty).
pub fn dist_to_affine_hull(z: &[f64], pts: &[Vec<f64>]) -> f64 {
    let basis = affine_basis(pts);
    let mut v: Vec<f64> = z.iter().zip(&pts[0]).map(|(a, b)| a - b).collect();
    for e in &basis {
        let d = dot(&v, e);
        v.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
    }
    norm(&v)
}

/// Minimum over vertices of the distance to the affine hull of the other
/// vertices, divided by the diameter. `1` for two distinct points, `0` for
/// degenerate configurations.
pub fn thickness(pts: &[Vec<f64>]) -> f64 {
    if pts.len() < 2 {
        return 1.0;
    }
    let diam = diameter(pts);
    if diam == 0.0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..pts.len() {
        let others: Vec<Vec<f64>> = pts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, p)| p.clone())
            .collect();
        best = best.min(dist_to_affine_hull(&pts[j], &others));
    }
    best / diam
}

/// Affine description of a nondegenerate simplex `p_1..p_m` inside its own
/// affine hull: barycentric coordinates of the orthogonal projection and
/// the distance to the hull are affine / quadratic in `z`.
#[derive(Clone, Debug)]
pub struct SimplexFrame {
    pub origin: Vec<f64>,
    /// Orthonormal directions of the affine hull (`m − 1` of them).
    pub basis: Vec<Vec<f64>>,
    /// Row `j`: `λ_j(z) = lambda[j][0] + Σ_i lambda[j][1 + i] z_i`.
    pub lambda: Vec<Vec<f64>>,
    /// Height of vertex `j` over the opposite facet, within the hull.
    pub heights: Vec<f64>,
}

impl SimplexFrame {
    /// `None` if the points are affinely dependent.
    pub fn new(pts: &[Vec<f64>]) -> Option<Self> {
        let m = pts.len();
        let n = pts[0].len();
        let basis = affine_basis(pts);
        if basis.len() + 1 != m {
            return None;
        }
        // local coordinates t = B (z − p_0); vertex j has t_j = B (p_j − p_0)
        let local: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let v: Vec<f64> = p.iter().zip(&pts[0]).map(|(a, b)| a - b).collect();
                basis.iter().map(|e| dot(&v, e)).collect()
            })
            .collect();
        // Solve for the affine maps λ_j(t) = c_j + g_j · t with λ_j(t_i) = δ_ij:
        // the (m × m) system [1 t_i^T] [c_j; g_j] = e_j.
        let d = m - 1;
        let mut mat = vec![vec![0.0; m]; m];
        for (i, t) in local.iter().enumerate() {
            mat[i][0] = 1.0;
            mat[i][1..].copy_from_slice(t);
        }
        let inv = invert(&mat)?;
        let mut lambda = Vec::with_capacity(m);
        let mut heights = Vec::with_capacity(m);
        #[allow(clippy::needless_range_loop)] // walks a column of `inv`
        for j in 0..m {
            // column j of the inverse
            let c = inv[0][j];
            let g: Vec<f64> = (0..d).map(|a| inv[1 + a][j]).collect();
            // λ_j(z) = c + g · B (z − p0)
            let mut row = vec![0.0; n + 1];
            let mut grad_z = vec![0.0; n];
            for (a, e) in basis.iter().enumerate() {
                for i in 0..n {
                    grad_z[i] += g[a] * e[i];
                }
            }
            row[0] = c - dot(&grad_z, &pts[0]);
            row[1..].copy_from_slice(&grad_z);
            let gn = norm(&g);
            heights.push(if d == 0 { f64::INFINITY } else { 1.0 / gn });
            lambda.push(row);
        }
        Some(SimplexFrame {
            origin: pts[0].clone(),
            basis,
            lambda,
            heights,
        })
    }

    pub fn barycentric(&self, z: &[f64]) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|row| row[0] + dot(&row[1..], z))
            .collect()
    }

    pub fn dist_perp_sq(&self, z: &[f64]) -> f64 {
        let mut v: Vec<f64> = z.iter().zip(&self.origin).map(|(a, b)| a - b).collect();
        for e in &self.basis {
            let d = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(a, b)| *a -= d * b);
        }
        dot(&v, &v)
    }

    /// Gauge `G(z) = max(d_⊥(z), max_j −λ_j(z) h_j)`: zero on the simplex,
    /// and `{G < w}` is a prism-shaped neighborhood of it.
    pub fn gauge(&self, z: &[f64]) -> f64 {
        let mut g = self.dist_perp_sq(z).sqrt();
        if self.lambda.len() > 1 {
            for (l, h) in self.barycentric(z).iter().zip(&self.heights) {
                g = g.max(-l * h);
            }
        }
        g
    }
}

/// Gauss–Jordan inverse with partial pivoting; `None` when singular.
pub fn invert(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |s, v| s.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..m).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))?;
        if aug[piv][col].abs() <= 1e-14 * scale {
            return None;
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        aug[col].iter_mut().for_each(|v| *v /= p);
        for i in 0..m {
            if i != col {
                let f = aug[i][col];
                if f != 0.0 {
                    let src = aug[col].clone();
                    aug[i].iter_mut().zip(&src).for_each(|(v, s)| *v -= f * s);
                }
            }
        }
    }
    Some(aug.into_iter().map(|r| r[m..].to_vec()).collect())
}

/// Solves `a x = b` for square `a`.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let inv = invert(a)?;
    Some(inv.iter().map(|row| dot(row, b)).collect())
}
