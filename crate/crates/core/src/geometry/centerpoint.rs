//! Randomized centerpoint computation: sample a subset, enumerate the
//! hyperplanes spanned by its D-tuples, and solve the induced feasibility LP
//! with a slack-maximization objective. The result is only probabilistically
//! a centerpoint of the full set; callers re-verify downstream.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{dot, Point};

#[derive(Debug, Clone)]
pub struct CenterpointConfig {
    /// Slack in the guaranteed ratio: the LP targets a (D + delta) : 1 split
    /// in ambient dimension D.
    pub delta: f64,
    /// Subset size `a`; `None` selects `default_sample_size`.
    pub subset_size: Option<usize>,
    /// Fresh-subset retries before reporting failure.
    pub max_attempts: usize,
}

impl Default for CenterpointConfig {
    fn default() -> Self {
        CenterpointConfig {
            delta: 1.0,
            subset_size: None,
            max_attempts: 16,
        }
    }
}

/// Default subset size for ambient dimension `ambient_dim = d + 1`.
pub fn default_sample_size(ambient_dim: usize) -> usize {
    64usize.max(20 * (ambient_dim + 1))
}

/// Determinant by Gaussian elimination with partial pivoting; `n <= 5` here.
#[cfg(test)]
fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            sign = -sign;
        }
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    sign * (0..n).map(|i| m[i][i]).product::<f64>()
}

/// Normal of the hyperplane through `pts` (D points in R^D), via the
/// generalized cross product of their difference vectors. Returns `None`
/// for degenerate (affinely dependent) tuples.
#[cfg(test)]
fn hyperplane_normal(pts: &[&[f64]]) -> Option<Vec<f64>> {
    let dim = pts[0].len();
    debug_assert_eq!(pts.len(), dim);
    let diffs: Vec<Vec<f64>> = pts[1..]
        .iter()
        .map(|p| p.iter().zip(pts[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut v = vec![0.0; dim];
    for j in 0..dim {
        let minor: Vec<Vec<f64>> = diffs
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &x)| x)
                    .collect()
            })
            .collect();
        v[j] = if j % 2 == 0 { 1.0 } else { -1.0 } * det(minor);
    }
    let n = crate::geometry::norm(&v);
    if n < 1e-12 {
        return None;
    }
    for x in &mut v {
        *x /= n;
    }
    Some(v)
}

const SIDE_TOL: f64 = 1e-9;

/// Largest ambient dimension the stack-allocated enumeration kernel supports.
const MAX_AMBIENT: usize = 8;

/// Determinant of the top-left `n×n` block of a stack matrix, by Gaussian
/// elimination with partial pivoting. Allocation-free for the hot loop.
fn det_fixed(m: &mut [[f64; MAX_AMBIENT]; MAX_AMBIENT], n: usize) -> f64 {
    match n {
        0 => return 1.0,
        1 => return m[0][0],
        2 => return m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        }
        _ => {}
    }
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            sign = -sign;
        }
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    sign * (0..n).map(|i| m[i][i]).product::<f64>()
}

/// Allocation-free variant of `hyperplane_normal` for the enumeration loop:
/// writes the unit normal of the hyperplane through the `dim` subset points
/// named by `idx` into `out`. Returns false for degenerate tuples.
fn normal_fixed(subset: &[&[f64]], idx: &[usize], dim: usize, out: &mut [f64; MAX_AMBIENT]) -> bool {
    let base = subset[idx[0]];
    let mut diffs = [[0.0; MAX_AMBIENT]; MAX_AMBIENT];
    for (row, &i) in idx[1..].iter().enumerate() {
        for (k, (&a, &b)) in subset[i].iter().zip(base).enumerate() {
            diffs[row][k] = a - b;
        }
    }
    let mut norm_sq = 0.0;
    let mut minor = [[0.0; MAX_AMBIENT]; MAX_AMBIENT];
    for j in 0..dim {
        for row in 0..dim - 1 {
            let mut c = 0;
            for k in 0..dim {
                if k != j {
                    minor[row][c] = diffs[row][k];
                    c += 1;
                }
            }
        }
        let d = det_fixed(&mut minor, dim - 1);
        out[j] = if j % 2 == 0 { d } else { -d };
        norm_sq += out[j] * out[j];
    }
    let n = norm_sq.sqrt();
    if n < 1e-12 {
        return false;
    }
    for x in out.iter_mut().take(dim) {
        *x /= n;
    }
    true
}

/// Specialized ambient-dimension-4 enumeration. The 4-tuples are walked as
/// nested loops so the 2x2 minors shared by every tuple with the same first
/// three points are computed once; the normal for each fourth point is then
/// a handful of multiplies (cofactor expansion along the last row).
fn constraints_dim4(subset: &[&[f64]], threshold: f64) -> Vec<(Vec<f64>, f64)> {
    let a = subset.len();
    let pts: Vec<[f64; 4]> = subset.iter().map(|p| [p[0], p[1], p[2], p[3]]).collect();
    let enough = threshold.ceil() as usize;
    (0..a - 3)
        .into_par_iter()
        .flat_map_iter(|i0| {
            let mut local: Vec<(Vec<f64>, f64)> = Vec::new();
            let p0 = pts[i0];
            for i1 in i0 + 1..a - 2 {
                let r1 = [
                    pts[i1][0] - p0[0],
                    pts[i1][1] - p0[1],
                    pts[i1][2] - p0[2],
                    pts[i1][3] - p0[3],
                ];
                for i2 in i1 + 1..a - 1 {
                    let r2 = [
                        pts[i2][0] - p0[0],
                        pts[i2][1] - p0[1],
                        pts[i2][2] - p0[2],
                        pts[i2][3] - p0[3],
                    ];
                    // 2x2 minors m[ab] of the 2x4 matrix [r1; r2].
                    let m01 = r1[0] * r2[1] - r1[1] * r2[0];
                    let m02 = r1[0] * r2[2] - r1[2] * r2[0];
                    let m03 = r1[0] * r2[3] - r1[3] * r2[0];
                    let m12 = r1[1] * r2[2] - r1[2] * r2[1];
                    let m13 = r1[1] * r2[3] - r1[3] * r2[1];
                    let m23 = r1[2] * r2[3] - r1[3] * r2[2];
                    for i3 in i2 + 1..a {
                        let r3 = [
                            pts[i3][0] - p0[0],
                            pts[i3][1] - p0[1],
                            pts[i3][2] - p0[2],
                            pts[i3][3] - p0[3],
                        ];
                        let n0 = r3[1] * m23 - r3[2] * m13 + r3[3] * m12;
                        let n1 = -(r3[0] * m23 - r3[2] * m03 + r3[3] * m02);
                        let n2 = r3[0] * m13 - r3[1] * m03 + r3[3] * m01;
                        let n3 = -(r3[0] * m12 - r3[1] * m02 + r3[2] * m01);
                        let norm = (n0 * n0 + n1 * n1 + n2 * n2 + n3 * n3).sqrt();
                        if norm < 1e-12 {
                            continue;
                        }
                        let v = [n0 / norm, n1 / norm, n2 / norm, n3 / norm];
                        let b = v[0] * p0[0] + v[1] * p0[1] + v[2] * p0[2] + v[3] * p0[3];
                        let mut above = 0usize;
                        let mut below = 0usize;
                        for p in &pts {
                            let s = v[0] * p[0] + v[1] * p[1] + v[2] * p[2] + v[3] * p[3] - b;
                            if s > SIDE_TOL {
                                above += 1;
                            } else if s < -SIDE_TOL {
                                below += 1;
                            }
                            if above >= enough && below >= enough {
                                break;
                            }
                        }
                        if (above as f64) < threshold {
                            local.push((v.to_vec(), b));
                        }
                        if (below as f64) < threshold {
                            local.push((v.iter().map(|x| -x).collect(), -b));
                        }
                    }
                }
            }
            local.into_iter()
        })
        .collect()
}

/// Half-space constraints `v . c <= b` a centerpoint of `subset` must obey:
/// one per spanned hyperplane whose strictly-open side is deficient.
fn subset_constraints(subset: &[&[f64]], threshold: f64) -> Vec<(Vec<f64>, f64)> {
    let a = subset.len();
    let dim = subset[0].len();
    if a < dim || dim > MAX_AMBIENT {
        return Vec::new();
    }
    if dim == 4 {
        return constraints_dim4(subset, threshold);
    }
    // Once both open sides hold this many points, neither is deficient and
    // the tuple contributes no constraint; counting can stop early.
    let enough = threshold.ceil() as usize;
    // Parallel over the first index of each D-combination.
    (0..a - dim + 1)
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut local = Vec::new();
            let mut idx: Vec<usize> = (0..dim).collect();
            idx[0] = first;
            for (slot, v) in idx.iter_mut().enumerate().skip(1) {
                *v = first + slot;
            }
            let mut v = [0.0; MAX_AMBIENT];
            loop {
                if normal_fixed(subset, &idx, dim, &mut v) {
                    let b = dot(&v[..dim], subset[idx[0]]);
                    let mut above = 0usize;
                    let mut below = 0usize;
                    for p in subset {
                        let s = dot(&v[..dim], p) - b;
                        if s > SIDE_TOL {
                            above += 1;
                        } else if s < -SIDE_TOL {
                            below += 1;
                        }
                        if above >= enough && below >= enough {
                            break;
                        }
                    }
                    if (above as f64) < threshold {
                        local.push((v[..dim].to_vec(), b));
                    }
                    if (below as f64) < threshold {
                        local.push((v[..dim].iter().map(|x| -x).collect(), -b));
                    }
                }
                // Next combination with fixed first element.
                let mut pos = dim - 1;
                loop {
                    if pos == 0 {
                        return local.into_iter();
                    }
                    if idx[pos] < a - (dim - pos) {
                        idx[pos] += 1;
                        for k in pos + 1..dim {
                            idx[k] = idx[k - 1] + 1;
                        }
                        break;
                    }
                    pos -= 1;
                }
            }
        })
        .collect()
}

fn centroid(points: &[&[f64]]) -> Point {
    let dim = points[0].len();
    let mut c = vec![0.0; dim];
    for p in points {
        for (acc, x) in c.iter_mut().zip(*p) {
            *acc += x;
        }
    }
    for x in &mut c {
        *x /= points.len() as f64;
    }
    c
}

fn solve_lp_rows(rows: &[&(Vec<f64>, f64)], dim: usize) -> Option<(Point, f64)> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..dim).map(|_| problem.add_var(0.0, (-2.0, 2.0))).collect();
    let slack = problem.add_var(1.0, (-4.0, 4.0));
    for (v, b) in rows {
        let mut row: Vec<_> = vars.iter().zip(v).map(|(&var, &coef)| (var, coef)).collect();
        row.push((slack, 1.0));
        problem.add_constraint(&row, ComparisonOp::Le, *b);
    }
    let solution = problem.solve().ok()?;
    Some((
        vars.iter().map(|&v| solution[v]).collect(),
        solution[slack],
    ))
}

/// Feasibility LP with slack maximization, solved by row generation: start
/// from a small working set and iteratively add the most violated of the
/// remaining half-space constraints. The full constraint list is typically
/// huge (one per deficient subset hyperplane) while only O(dim) of them are
/// active at the optimum, so this converges in a few cheap solves.
fn solve_lp(constraints: &[(Vec<f64>, f64)], dim: usize) -> Option<Point> {
    const INITIAL_ROWS: usize = 256;
    const BATCH: usize = 64;
    const MAX_ROUNDS: usize = 64;
    if constraints.len() <= 2 * INITIAL_ROWS {
        let rows: Vec<&(Vec<f64>, f64)> = constraints.iter().collect();
        let (c, slack) = solve_lp_rows(&rows, dim)?;
        return if slack < -1e-9 { None } else { Some(c) };
    }
    // Spread the initial working set across the whole list; constraints from
    // nearby subset tuples are adjacent and often nearly parallel.
    let stride = constraints.len() / INITIAL_ROWS;
    let mut working: Vec<&(Vec<f64>, f64)> =
        constraints.iter().step_by(stride.max(1)).collect();
    for _ in 0..MAX_ROUNDS {
        let (c, slack) = solve_lp_rows(&working, dim)?;
        // Most violated constraints of the full set at the working optimum.
        let mut violated: Vec<(f64, &(Vec<f64>, f64))> = Vec::new();
        for row in constraints {
            let v = dot(&row.0, &c) + slack - row.1;
            if v > 1e-9 {
                violated.push((v, row));
            }
        }
        if violated.is_empty() {
            return if slack < -1e-9 { None } else { Some(c) };
        }
        violated.sort_by(|a, b| b.0.total_cmp(&a.0));
        working.extend(violated.iter().take(BATCH).map(|&(_, row)| row));
    }
    // Row generation did not converge; fall back to the full problem.
    let rows: Vec<&(Vec<f64>, f64)> = constraints.iter().collect();
    let (c, slack) = solve_lp_rows(&rows, dim)?;
    if slack < -1e-9 {
        return None;
    }
    Some(c)
}

/// A probabilistic centerpoint of `points` in ambient dimension D:
/// a point every hyperplane through which splits the set no worse than
/// `(D + delta) : 1`, with high probability.
pub fn centerpoint<R: Rng + ?Sized>(
    points: &[Point],
    config: &CenterpointConfig,
    rng: &mut R,
) -> Result<Point> {
    let dim = points
        .first()
        .ok_or_else(|| Error::Precondition("centerpoint of an empty set".into()))?
        .len();
    if points.len() < dim + 1 {
        return Err(Error::Precondition(format!(
            "centerpoint needs at least {} points in R^{dim}, got {}",
            dim + 1,
            points.len()
        )));
    }
    let a = config
        .subset_size
        .unwrap_or_else(|| default_sample_size(dim))
        .min(points.len());

    for _ in 0..config.max_attempts {
        let subset: Vec<&[f64]> = if a == points.len() {
            points.iter().map(|p| p.as_slice()).collect()
        } else {
            sample(rng, points.len(), a)
                .into_iter()
                .map(|i| points[i].as_slice())
                .collect()
        };
        let threshold = a as f64 / (dim as f64 + 1.0 + config.delta);
        let constraints = subset_constraints(&subset, threshold);
        if constraints.is_empty() {
            // Degenerate subsets (e.g. all points coincident) constrain
            // nothing; the centroid is then a valid centerpoint.
            return Ok(centroid(&subset));
        }
        if let Some(c) = solve_lp(&constraints, dim) {
            return Ok(c);
        }
    }
    Err(Error::CenterpointFailure {
        attempts: config.max_attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force centerpoint check: enumerate every hyperplane through a
    /// 3-subset and verify the worst strict-side split.
    fn is_centerpoint_3d(points: &[Point], c: &[f64], delta: f64) -> bool {
        let n = points.len() as f64;
        let min_side = n / (3.0 + 1.0 + delta);
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                for k in j + 1..points.len() {
                    let tuple = [
                        points[i].as_slice(),
                        points[j].as_slice(),
                        points[k].as_slice(),
                    ];
                    let Some(v) = hyperplane_normal(&tuple) else {
                        continue;
                    };
                    let b = dot(&v, &points[i]);
                    let side = dot(&v, c) - b;
                    // Only sides strictly containing c matter; boundary is fine.
                    for sign in [1.0, -1.0] {
                        if sign * side > 1e-9 {
                            let count = points
                                .iter()
                                .filter(|p| sign * (dot(&v, p) - b) > 1e-9)
                                .count();
                            if (count as f64) < min_side - 1e-9 {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }

    #[test]
    fn regular_simplex_centerpoint_is_centroid() {
        // Regular tetrahedron vertices.
        let s = 1.0 / 3.0_f64.sqrt();
        let points: Vec<Point> = vec![
            vec![s, s, s],
            vec![s, -s, -s],
            vec![-s, s, -s],
            vec![-s, -s, s],
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = centerpoint(&points, &CenterpointConfig::default(), &mut rng).unwrap();
        for x in &c {
            assert!(x.abs() < 1e-9, "expected centroid, got {c:?}");
        }
    }

    #[test]
    fn random_points_pass_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let n = 10 + trial % 5;
            let points: Vec<Point> = (0..n)
                .map(|_| (0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .collect();
            let config = CenterpointConfig {
                delta: 0.5,
                ..CenterpointConfig::default()
            };
            let c = centerpoint(&points, &config, &mut rng).unwrap();
            assert!(
                is_centerpoint_3d(&points, &c, 0.5),
                "trial {trial}: {c:?} fails the hyperplane-enumeration oracle"
            );
        }
    }

    #[test]
    fn identical_points_return_that_point() {
        let points: Vec<Point> = (0..8).map(|_| vec![0.25, -0.5, 0.125]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = centerpoint(&points, &CenterpointConfig::default(), &mut rng).unwrap();
        assert_eq!(c, vec![0.25, -0.5, 0.125]);
    }

    #[test]
    fn too_few_points_is_a_precondition_error() {
        let points: Vec<Point> = vec![vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            centerpoint(&points, &CenterpointConfig::default(), &mut rng),
            Err(Error::Precondition(_))
        ));
    }
}
