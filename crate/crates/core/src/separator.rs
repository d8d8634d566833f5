//! The randomized sphere-separator search and the recursive separator
//! hierarchy. A candidate separating sphere comes from a random great circle
//! pushed through the inverse of the centerpoint-normalizing transform; it is
//! kept only if the size bounds on the three classes hold, re-verified here
//! independently of the search.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    centerpoint, circle_to_sphere, dist, dot, norm, rotation_to_pole, sample_great_circle,
    stereo_project, CenterpointConfig, EmbeddedSphere, SeparatingSphere,
};
use crate::tncore::{greedy_leaf_plan, separator_constant, TensorId, TensorNetwork};

pub const DEFAULT_MAX_CIRCLE_RETRIES: usize = 256;
pub const DEFAULT_LEAF_SIZE: usize = 8;
/// Fresh centerpoint every this many failed circles.
const CENTERPOINT_REFRESH: usize = 32;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SeparatorParams {
    /// Maximum number of spheres overlapping in any point.
    pub k: u64,
    /// Spatial dimension of the embedding.
    pub d: usize,
    /// Separator constant in the interface-size bound.
    pub c_d: f64,
    pub delta: f64,
    pub max_circle_retries: usize,
    pub leaf_size: usize,
    pub centerpoint: CenterpointConfig,
}

impl SeparatorParams {
    pub fn new(d: usize, k: u64) -> Result<Self> {
        let c_d = separator_constant(d).ok_or_else(|| {
            Error::Parameter(format!("no tabulated separator constant for d = {d}"))
        })?;
        Ok(SeparatorParams {
            k,
            d,
            c_d,
            delta: 1.0,
            max_circle_retries: DEFAULT_MAX_CIRCLE_RETRIES,
            leaf_size: DEFAULT_LEAF_SIZE,
            centerpoint: CenterpointConfig::default(),
        })
    }
}

/// A separating sphere together with the partition it induces: spheres cut by
/// the surface (`gamma_o`), strictly outside (`gamma_e`), strictly inside
/// (`gamma_i`).
#[derive(Debug, Clone)]
pub struct SeparatorResult {
    pub sphere: SeparatingSphere,
    pub gamma_o: BTreeSet<usize>,
    pub gamma_e: BTreeSet<usize>,
    pub gamma_i: BTreeSet<usize>,
    /// Great-circle draws consumed before success.
    pub circle_retries: usize,
}

/// Classify each sphere against a candidate separator. Ties (tangency within
/// tolerance) count as intersecting.
pub fn classify(
    spheres: &[EmbeddedSphere],
    surface: &SeparatingSphere,
) -> (BTreeSet<usize>, BTreeSet<usize>, BTreeSet<usize>) {
    let mut gamma_o = BTreeSet::new();
    let mut gamma_e = BTreeSet::new();
    let mut gamma_i = BTreeSet::new();
    for s in spheres {
        match surface {
            SeparatingSphere::Sphere { center, radius } => {
                let dc = dist(&s.center, center);
                if dc + s.radius < radius - TIE_TOL {
                    gamma_i.insert(s.tensor_id);
                } else if dc - s.radius > radius + TIE_TOL {
                    gamma_e.insert(s.tensor_id);
                } else {
                    gamma_o.insert(s.tensor_id);
                }
            }
            SeparatingSphere::Hyperplane { normal, offset } => {
                let sd = dot(normal, &s.center) - offset;
                if sd > s.radius + TIE_TOL {
                    gamma_e.insert(s.tensor_id);
                } else if sd < -(s.radius + TIE_TOL) {
                    gamma_i.insert(s.tensor_id);
                } else {
                    gamma_o.insert(s.tensor_id);
                }
            }
        }
    }
    (gamma_o, gamma_e, gamma_i)
}

/// Independent re-check of the separator size bounds:
/// `|gamma_O| <= c_d k^(1/d) n^(1-1/d)` and both sides `<= (d+1)/(d+2) n`.
pub fn validate_separator(result: &SeparatorResult, n: usize, params: &SeparatorParams) -> bool {
    let (o, e, i) = (
        result.gamma_o.len(),
        result.gamma_e.len(),
        result.gamma_i.len(),
    );
    if o + e + i != n {
        return false;
    }
    let df = params.d as f64;
    let interface_bound =
        params.c_d * (params.k as f64).powf(1.0 / df) * (n as f64).powf(1.0 - 1.0 / df);
    let side_bound = (df + 1.0) / (df + 2.0) * n as f64;
    (o as f64) <= interface_bound && (e.max(i) as f64) <= side_bound
}

fn progress_ok(result: &SeparatorResult, n: usize) -> bool {
    let (o, e, i) = (
        result.gamma_o.len(),
        result.gamma_e.len(),
        result.gamma_i.len(),
    );
    (e > 0 && i > 0) || (o > 0 && e < n && i < n)
}

/// Recenter and rescale to keep the stereographic projection well
/// conditioned; the returned closure maps a separator back to input
/// coordinates.
struct Normalization {
    shift: Vec<f64>,
    scale: f64,
}

impl Normalization {
    fn fit(spheres: &[EmbeddedSphere]) -> Self {
        let d = spheres[0].center.len();
        let mut shift = vec![0.0; d];
        for s in spheres {
            for (acc, x) in shift.iter_mut().zip(&s.center) {
                *acc += x;
            }
        }
        for x in &mut shift {
            *x /= spheres.len() as f64;
        }
        let rms = (spheres
            .iter()
            .map(|s| {
                s.center
                    .iter()
                    .zip(&shift)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / spheres.len() as f64)
            .sqrt();
        Normalization {
            shift,
            scale: if rms > 1e-12 { rms } else { 1.0 },
        }
    }

    fn apply(&self, spheres: &[EmbeddedSphere]) -> Vec<EmbeddedSphere> {
        spheres
            .iter()
            .map(|s| EmbeddedSphere {
                center: s
                    .center
                    .iter()
                    .zip(&self.shift)
                    .map(|(x, t)| (x - t) / self.scale)
                    .collect(),
                radius: s.radius / self.scale,
                tensor_id: s.tensor_id,
            })
            .collect()
    }

    fn unapply_surface(&self, surface: &SeparatingSphere) -> SeparatingSphere {
        match surface {
            SeparatingSphere::Sphere { center, radius } => SeparatingSphere::Sphere {
                center: center
                    .iter()
                    .zip(&self.shift)
                    .map(|(c, t)| t + self.scale * c)
                    .collect(),
                radius: self.scale * radius,
            },
            SeparatingSphere::Hyperplane { normal, offset } => SeparatingSphere::Hyperplane {
                normal: normal.clone(),
                offset: self.scale * offset + dot(normal, &self.shift),
            },
        }
    }
}

/// Search for a separating sphere satisfying the size bounds, drawing random
/// great circles until one succeeds. The centerpoint is re-drawn every
/// `CENTERPOINT_REFRESH` failed circles.
pub fn find_separator<R: Rng + ?Sized>(
    spheres: &[EmbeddedSphere],
    params: &SeparatorParams,
    rng: &mut R,
) -> Result<SeparatorResult> {
    let n = spheres.len();
    // Splitting n = leaf_size + 1 spheres cannot leave both sides useful, so
    // the minimum is two above the leaf size.
    if n <= params.leaf_size + 1 {
        return Err(Error::Precondition(format!(
            "find_separator needs more than leaf_size + 1 = {} spheres, got {n}",
            params.leaf_size + 1
        )));
    }
    let ambient = params.d + 1;
    let normalization = Normalization::fit(spheres);
    let normalized = normalization.apply(spheres);
    let projected: Vec<Vec<f64>> = normalized
        .iter()
        .map(|s| stereo_project(&s.center))
        .collect();
    debug_assert!(projected.iter().all(|p| p.len() == ambient));

    let mut best_cut = usize::MAX;
    let mut center = centerpoint(&projected, &params.centerpoint, rng)?;
    let (mut rotation, mut alpha) = pole_transform(&center);

    for attempt in 0..params.max_circle_retries {
        if attempt > 0 && attempt % CENTERPOINT_REFRESH == 0 {
            center = centerpoint(&projected, &params.centerpoint, rng)?;
            (rotation, alpha) = pole_transform(&center);
        }
        let circle = sample_great_circle(rng, ambient);
        let surface = circle_to_sphere(&circle, &rotation, alpha);
        let (gamma_o, gamma_e, gamma_i) = classify(&normalized, &surface);
        let candidate = SeparatorResult {
            sphere: normalization.unapply_surface(&surface),
            gamma_o,
            gamma_e,
            gamma_i,
            circle_retries: attempt,
        };
        best_cut = best_cut.min(candidate.gamma_o.len());
        if validate_separator(&candidate, n, params) && progress_ok(&candidate, n) {
            return Ok(candidate);
        }
    }
    Err(Error::SeparatorFailure {
        retries: params.max_circle_retries,
        best_cut,
    })
}

fn pole_transform(center: &[f64]) -> (nalgebra::DMatrix<f64>, f64) {
    let rotation = rotation_to_pole(center);
    let nc = norm(center).min(1.0 - 1e-9);
    let alpha = ((1.0 - nc) / (1.0 + nc)).sqrt();
    (rotation, alpha)
}

/// Append each interface tensor to the side with which it shares the larger
/// product of bond dimensions, processing in id order against the evolving
/// sides. Exact ties go to the smaller side, then to the E side.
pub fn assign_boundary(
    result: &SeparatorResult,
    network: &TensorNetwork,
) -> (BTreeSet<TensorId>, BTreeSet<TensorId>) {
    let mut left: BTreeSet<TensorId> = result.gamma_e.clone();
    let mut right: BTreeSet<TensorId> = result.gamma_i.clone();
    for &t in &result.gamma_o {
        let mut to_left = 1u128;
        let mut to_right = 1u128;
        for b in &network.tensors[&t].bonds {
            let bond = &network.bonds[b];
            for other in bond.endpoints.iter().filter(|&&e| e != t) {
                if left.contains(other) {
                    to_left *= bond.dim as u128;
                } else if right.contains(other) {
                    to_right *= bond.dim as u128;
                }
            }
        }
        let go_left = match to_left.cmp(&to_right) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => left.len() <= right.len(),
        };
        if go_left {
            left.insert(t);
        } else {
            right.insert(t);
        }
    }
    (left, right)
}

/// Binary separator-hierarchy tree. Children's tensor sets partition the
/// parent's; leaves carry a greedy pairwise contraction plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub node_id: usize,
    pub tensor_ids: BTreeSet<TensorId>,
    pub children: Option<Box<(HierarchyNode, HierarchyNode)>>,
    /// log2 of the product of bond dimensions crossing to the sibling.
    pub interface_log2dim: f64,
    pub leaf_plan: Option<Vec<(TensorId, TensorId)>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildStats {
    pub separator_calls: usize,
    pub fallback_calls: usize,
    pub circle_retries: usize,
    pub max_depth: usize,
}

impl BuildStats {
    fn merge(self, other: BuildStats) -> BuildStats {
        BuildStats {
            separator_calls: self.separator_calls + other.separator_calls,
            fallback_calls: self.fallback_calls + other.fallback_calls,
            circle_retries: self.circle_retries + other.circle_retries,
            max_depth: self.max_depth.max(other.max_depth),
        }
    }
}

/// Split a cluster along the median of its widest axis when the randomized
/// search fails; the halves are index-balanced, so progress is guaranteed.
fn median_split(
    spheres: &[EmbeddedSphere],
) -> (BTreeSet<TensorId>, BTreeSet<TensorId>) {
    let d = spheres[0].center.len();
    let axis = (0..d)
        .max_by(|&a, &b| {
            let spread = |ax: usize| {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for s in spheres {
                    lo = lo.min(s.center[ax]);
                    hi = hi.max(s.center[ax]);
                }
                hi - lo
            };
            spread(a).total_cmp(&spread(b))
        })
        .unwrap();
    let mut order: Vec<&EmbeddedSphere> = spheres.iter().collect();
    order.sort_by(|a, b| {
        a.center[axis]
            .total_cmp(&b.center[axis])
            .then(a.tensor_id.cmp(&b.tensor_id))
    });
    let mid = order.len() / 2;
    let left = order[..mid].iter().map(|s| s.tensor_id).collect();
    let right = order[mid..].iter().map(|s| s.tensor_id).collect();
    (left, right)
}

fn subnetwork(network: &TensorNetwork, ids: &BTreeSet<TensorId>) -> TensorNetwork {
    let mut sub = TensorNetwork::new();
    for id in ids {
        sub.add_tensor(network.tensors[id].clone());
    }
    let bond_ids: BTreeSet<_> = ids
        .iter()
        .flat_map(|id| network.tensors[id].bonds.iter().copied())
        .collect();
    for b in bond_ids {
        sub.add_bond(network.bonds[&b].clone());
    }
    sub
}

/// Recursively split a tensor network into a separator hierarchy. Each
/// sibling subtree receives an RNG stream split deterministically from the
/// parent seed, so the result is a pure function of `(inputs, seed)`.
pub fn build_hierarchy<R: Rng + ?Sized>(
    network: &TensorNetwork,
    embedding: &[EmbeddedSphere],
    params: &SeparatorParams,
    rng: &mut R,
) -> Result<(HierarchyNode, BuildStats)> {
    for t in network.tensors.keys() {
        if !embedding.iter().any(|s| s.tensor_id == *t) {
            return Err(Error::Precondition(format!(
                "embedding does not cover tensor {t}"
            )));
        }
    }
    let ids: BTreeSet<TensorId> = network.tensors.keys().copied().collect();
    let seed = rng.gen::<u64>();
    let (mut root, stats) = build_node(network, embedding, params, &ids, seed, 0)?;
    let mut next_id = 0;
    renumber(&mut root, &mut next_id);
    Ok((root, stats))
}

fn renumber(node: &mut HierarchyNode, next: &mut usize) {
    node.node_id = *next;
    *next += 1;
    if let Some(children) = &mut node.children {
        renumber(&mut children.0, next);
        renumber(&mut children.1, next);
    }
}

pub(crate) fn child_seed(seed: u64, branch: u64) -> u64 {
    // splitmix64 step keeps sibling streams independent.
    let mut z = seed
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(branch.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn build_node(
    network: &TensorNetwork,
    embedding: &[EmbeddedSphere],
    params: &SeparatorParams,
    ids: &BTreeSet<TensorId>,
    seed: u64,
    depth: usize,
) -> Result<(HierarchyNode, BuildStats)> {
    if ids.len() <= params.leaf_size {
        let cluster = subnetwork(network, ids);
        return Ok((
            HierarchyNode {
                node_id: 0,
                tensor_ids: ids.clone(),
                children: None,
                interface_log2dim: 0.0,
                leaf_plan: Some(greedy_leaf_plan(&cluster)),
            },
            BuildStats {
                max_depth: depth,
                ..BuildStats::default()
            },
        ));
    }
    let local: Vec<EmbeddedSphere> = embedding
        .iter()
        .filter(|s| ids.contains(&s.tensor_id))
        .cloned()
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = BuildStats {
        separator_calls: 1,
        ..BuildStats::default()
    };
    let (left_ids, right_ids) = match find_separator(&local, params, &mut rng) {
        Ok(result) => {
            stats.circle_retries += result.circle_retries;
            let (left, right) = assign_boundary(&result, network);
            if left.is_empty() || right.is_empty() {
                stats.fallback_calls += 1;
                median_split(&local)
            } else {
                (left, right)
            }
        }
        Err(_) => {
            stats.fallback_calls += 1;
            median_split(&local)
        }
    };

    let (left_seed, right_seed) = (child_seed(seed, 1), child_seed(seed, 2));
    let ((mut left, ls), (mut right, rs)) = rayon::join(
        || build_node(network, embedding, params, &left_ids, left_seed, depth + 1),
        || build_node(network, embedding, params, &right_ids, right_seed, depth + 1),
    )
    .into_tuple()?;
    stats = stats.merge(ls).merge(rs);

    left.interface_log2dim = cross_log2dim(network, &left_ids, &right_ids);
    right.interface_log2dim = left.interface_log2dim;
    Ok((
        HierarchyNode {
            node_id: 0,
            tensor_ids: ids.clone(),
            children: Some(Box::new((left, right))),
            interface_log2dim: 0.0,
            leaf_plan: None,
        },
        stats,
    ))
}

trait JoinResult {
    type Out;
    fn into_tuple(self) -> Self::Out;
}

impl<A, B> JoinResult for (Result<A>, Result<B>) {
    type Out = Result<(A, B)>;
    fn into_tuple(self) -> Self::Out {
        Ok((self.0?, self.1?))
    }
}

/// log2 of the product of bond dimensions crossing between two tensor sets.
pub fn cross_log2dim(
    network: &TensorNetwork,
    left: &BTreeSet<TensorId>,
    right: &BTreeSet<TensorId>,
) -> f64 {
    network
        .bonds
        .values()
        .filter(|b| {
            b.endpoints.len() == 2
                && b.endpoints.iter().any(|t| left.contains(t))
                && b.endpoints.iter().any(|t| right.contains(t))
        })
        .map(|b| (b.dim as f64).log2())
        .sum()
}

/// Hierarchy JSON (de)serialization for audit and re-execution.
pub fn hierarchy_to_json(root: &HierarchyNode) -> Result<String> {
    serde_json::to_string_pretty(root).map_err(|e| Error::json("serializing hierarchy", e))
}

pub fn hierarchy_from_json(text: &str) -> Result<HierarchyNode> {
    serde_json::from_str(text).map_err(|e| Error::json("parsing hierarchy", e))
}

/// Measured maximum pointwise overlap of an embedding: the count is taken at
/// every sphere center and at the deepest point of every pairwise lens,
/// which is exact for the generic small arrangements used here.
pub fn estimate_overlap(spheres: &[EmbeddedSphere]) -> u64 {
    if spheres.is_empty() {
        return 0;
    }
    let max_r = spheres.iter().map(|s| s.radius).fold(0.0, f64::max);
    let d = spheres[0].center.len();
    let cell = (2.0 * max_r).max(1e-9);
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|&x| (x / cell).floor() as i64).collect() };
    let mut grid: std::collections::HashMap<Vec<i64>, Vec<usize>> = Default::default();
    for (i, s) in spheres.iter().enumerate() {
        grid.entry(key(&s.center)).or_default().push(i);
    }
    let neighbors = |p: &[f64]| -> Vec<usize> {
        let base = key(p);
        let mut out = Vec::new();
        let mut offsets = vec![0i64; d];
        loop {
            let cell_key: Vec<i64> = base.iter().zip(&offsets).map(|(b, o)| b + o).collect();
            if let Some(v) = grid.get(&cell_key) {
                out.extend_from_slice(v);
            }
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                if offsets[i] < 1 {
                    offsets[i] += 1;
                    break;
                }
                offsets[i] = -1;
                i += 1;
            }
        }
    };
    let count_at = |p: &[f64]| -> u64 {
        neighbors(p)
            .into_iter()
            .filter(|&i| dist(p, &spheres[i].center) <= spheres[i].radius + TIE_TOL)
            .count() as u64
    };
    let mut best = 0;
    for s in spheres {
        best = best.max(count_at(&s.center));
    }
    for (i, a) in spheres.iter().enumerate() {
        for &j in neighbors(&a.center).iter().filter(|&&j| j > i) {
            let b = &spheres[j];
            let dc = dist(&a.center, &b.center);
            if dc > a.radius + b.radius || dc < 1e-15 {
                continue;
            }
            // Point on the center line inside both balls, biased by radii.
            let t = ((dc + a.radius - b.radius) / 2.0).clamp(0.0, dc) / dc;
            let p: Vec<f64> = a
                .center
                .iter()
                .zip(&b.center)
                .map(|(x, y)| x + t * (y - x))
                .collect();
            best = best.max(count_at(&p));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tncore::{Bond, Tensor};

    fn unit(center: Vec<f64>, id: usize) -> EmbeddedSphere {
        EmbeddedSphere::new(center, 1.0, id)
    }

    fn grid_spheres(l: usize) -> Vec<EmbeddedSphere> {
        let mut out = Vec::new();
        for y in 0..l {
            for x in 0..l {
                out.push(unit(vec![x as f64, y as f64], y * l + x));
            }
        }
        out
    }

    /// A grid tensor network whose bonds connect lattice neighbors; matches
    /// `grid_spheres` ids.
    fn grid_network(l: usize, dim: usize) -> TensorNetwork {
        let mut net = TensorNetwork::new();
        let mut bonds: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..l * l {
            bonds.insert(i, Vec::new());
        }
        let mut bid = 0;
        for y in 0..l {
            for x in 0..l {
                let t = y * l + x;
                if x + 1 < l {
                    net.add_bond(Bond { id: bid, dim, endpoints: vec![t, t + 1] });
                    bonds.get_mut(&t).unwrap().push(bid);
                    bonds.get_mut(&(t + 1)).unwrap().push(bid);
                    bid += 1;
                }
                if y + 1 < l {
                    net.add_bond(Bond { id: bid, dim, endpoints: vec![t, t + l] });
                    bonds.get_mut(&t).unwrap().push(bid);
                    bonds.get_mut(&(t + l)).unwrap().push(bid);
                    bid += 1;
                }
            }
        }
        for (id, b) in bonds {
            net.add_tensor(Tensor { id, bonds: b, data: None });
        }
        net
    }

    #[test]
    fn classify_against_unit_sphere() {
        let surface = SeparatingSphere::Sphere {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        let spheres = vec![
            EmbeddedSphere::new(vec![0.0, 0.0], 0.5, 0), // concentric, inside
            unit(vec![10.0, 0.0], 1),                    // far away
            unit(vec![1.0, 0.0], 2),                     // centered on the surface
        ];
        let (o, e, i) = classify(&spheres, &surface);
        assert!(i.contains(&0));
        assert!(e.contains(&1));
        assert!(o.contains(&2));
    }

    #[test]
    fn classify_tangent_counts_as_intersecting() {
        let surface = SeparatingSphere::Sphere {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        // dist = 2 = r_S + r_i exactly.
        let spheres = vec![unit(vec![2.0, 0.0], 0)];
        let (o, _, _) = classify(&spheres, &surface);
        assert!(o.contains(&0));
    }

    #[test]
    fn classify_against_hyperplane() {
        let surface = SeparatingSphere::Hyperplane {
            normal: vec![1.0, 0.0],
            offset: 0.0,
        };
        let spheres = vec![unit(vec![3.0, 0.0], 0), unit(vec![-3.0, 0.0], 1), unit(vec![0.5, 0.0], 2)];
        let (o, e, i) = classify(&spheres, &surface);
        assert!(e.contains(&0));
        assert!(i.contains(&1));
        assert!(o.contains(&2));
    }

    #[test]
    fn separator_on_grid_meets_paper_bounds() {
        let spheres = grid_spheres(20);
        let k = estimate_overlap(&spheres);
        assert!(k <= 6, "grid overlap should be a small constant, got {k}");
        let params = SeparatorParams::new(2, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let result = find_separator(&spheres, &params, &mut rng).unwrap();
        assert!(validate_separator(&result, 400, &params));
        assert!(result.gamma_o.len() as f64 <= 2.0 * (k as f64).sqrt() * 20.0);
        assert!(result.gamma_e.len() <= 300 && result.gamma_i.len() <= 300);
    }

    #[test]
    fn separator_sides_do_not_intersect() {
        let spheres = grid_spheres(12);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let result = find_separator(&spheres, &params, &mut rng).unwrap();
        for e in &result.gamma_e {
            for i in &result.gamma_i {
                let (a, b) = (&spheres[*e], &spheres[*i]);
                assert!(
                    dist(&a.center, &b.center) > a.radius + b.radius - TIE_TOL,
                    "spheres {e} and {i} intersect across the separator"
                );
            }
        }
    }

    #[test]
    fn separator_below_leaf_size_is_an_error() {
        let spheres = grid_spheres(3);
        let params = SeparatorParams::new(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            find_separator(&spheres[..9], &params, &mut rng),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn separator_is_deterministic_under_seed() {
        let spheres = grid_spheres(10);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let a = find_separator(&spheres, &params, &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
        let b = find_separator(&spheres, &params, &mut ChaCha8Rng::seed_from_u64(31)).unwrap();
        assert_eq!(a.gamma_o, b.gamma_o);
        assert_eq!(a.gamma_e, b.gamma_e);
        assert_eq!(a.gamma_i, b.gamma_i);
        assert_eq!(a.sphere, b.sphere);
    }

    #[test]
    fn boundary_assignment_prefers_heavier_side() {
        // Tensor 2 sits on the boundary: dim-4 bond to the E side (tensor 0),
        // dim-2 bond to the I side (tensor 1).
        let mut net = TensorNetwork::new();
        net.add_bond(Bond { id: 0, dim: 4, endpoints: vec![0, 2] });
        net.add_bond(Bond { id: 1, dim: 2, endpoints: vec![1, 2] });
        net.add_tensor(Tensor { id: 0, bonds: vec![0], data: None });
        net.add_tensor(Tensor { id: 1, bonds: vec![1], data: None });
        net.add_tensor(Tensor { id: 2, bonds: vec![0, 1], data: None });
        let result = SeparatorResult {
            sphere: SeparatingSphere::Hyperplane { normal: vec![1.0, 0.0], offset: 0.0 },
            gamma_o: BTreeSet::from([2]),
            gamma_e: BTreeSet::from([0]),
            gamma_i: BTreeSet::from([1]),
            circle_retries: 0,
        };
        let (left, right) = assign_boundary(&result, &net);
        assert!(left.contains(&2));
        assert_eq!(right, BTreeSet::from([1]));
    }

    #[test]
    fn boundary_tie_goes_to_smaller_side() {
        let mut net = TensorNetwork::new();
        net.add_tensor(Tensor { id: 0, bonds: vec![], data: None });
        net.add_tensor(Tensor { id: 1, bonds: vec![], data: None });
        net.add_tensor(Tensor { id: 2, bonds: vec![], data: None });
        net.add_tensor(Tensor { id: 3, bonds: vec![], data: None });
        let result = SeparatorResult {
            sphere: SeparatingSphere::Hyperplane { normal: vec![1.0, 0.0], offset: 0.0 },
            gamma_o: BTreeSet::from([3]),
            gamma_e: BTreeSet::from([0, 1]),
            gamma_i: BTreeSet::from([2]),
            circle_retries: 0,
        };
        // No bonds at all: exact tie; tensor 3 joins the smaller (I) side.
        let (_, right) = assign_boundary(&result, &net);
        assert!(right.contains(&3));
    }

    #[test]
    fn boundary_assignment_cross_cut_within_sqrt_m() {
        // Re-run the grid separator and check the proof's per-tensor
        // guarantee at assignment time.
        let l = 12;
        let spheres = grid_spheres(l);
        let net = grid_network(l, 3);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let result = find_separator(&spheres, &params, &mut rng).unwrap();
        let mut left = result.gamma_e.clone();
        let mut right = result.gamma_i.clone();
        for &t in &result.gamma_o {
            let mut to_left = 1u128;
            let mut to_right = 1u128;
            for b in &net.tensors[&t].bonds {
                let bond = &net.bonds[b];
                for other in bond.endpoints.iter().filter(|&&e| e != t) {
                    if left.contains(other) {
                        to_left *= bond.dim as u128;
                    } else if right.contains(other) {
                        to_right *= bond.dim as u128;
                    }
                }
            }
            let m = net.tensors[&t].entry_count(&net.bonds) as f64;
            let cross = to_left.min(to_right) as f64;
            assert!(cross <= m.sqrt() + 1e-9, "cross-cut {cross} exceeds sqrt({m})");
            if to_left > to_right || (to_left == to_right && left.len() <= right.len()) {
                left.insert(t);
            } else {
                right.insert(t);
            }
        }
    }

    #[test]
    fn hierarchy_single_leaf_for_small_network() {
        let net = grid_network(2, 2); // 4 tensors <= leaf_size 8
        let spheres = grid_spheres(2);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (root, stats) = build_hierarchy(&net, &spheres, &params, &mut rng).unwrap();
        assert!(root.children.is_none());
        assert!(root.leaf_plan.is_some());
        assert_eq!(stats.separator_calls, 0);
    }

    fn check_partition(node: &HierarchyNode) {
        if let Some(children) = &node.children {
            let (l, r) = (&children.0, &children.1);
            assert!(l.tensor_ids.is_disjoint(&r.tensor_ids));
            let union: BTreeSet<usize> =
                l.tensor_ids.union(&r.tensor_ids).copied().collect();
            assert_eq!(union, node.tensor_ids);
            check_partition(l);
            check_partition(r);
        } else {
            assert!(node.leaf_plan.is_some());
        }
    }

    fn max_depth(node: &HierarchyNode) -> usize {
        match &node.children {
            None => 0,
            Some(c) => 1 + max_depth(&c.0).max(max_depth(&c.1)),
        }
    }

    #[test]
    fn hierarchy_on_16x16_grid() {
        let l = 16;
        let net = grid_network(l, 2);
        let spheres = grid_spheres(l);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (root, stats) = build_hierarchy(&net, &spheres, &params, &mut rng).unwrap();
        check_partition(&root);
        let n = (l * l) as f64;
        let depth_bound = 1.0 + n.log2() / (4.0f64 / 3.0).log2();
        let slack = 4.0 * (1 + stats.fallback_calls) as f64;
        assert!((max_depth(&root) as f64) <= depth_bound + slack);
    }

    #[test]
    fn hierarchy_deterministic_under_seed() {
        let l = 10;
        let net = grid_network(l, 2);
        let spheres = grid_spheres(l);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let (a, _) =
            build_hierarchy(&net, &spheres, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let (b, _) =
            build_hierarchy(&net, &spheres, &params, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(hierarchy_to_json(&a).unwrap(), hierarchy_to_json(&b).unwrap());
    }

    #[test]
    fn hierarchy_json_roundtrip() {
        let l = 6;
        let net = grid_network(l, 2);
        let spheres = grid_spheres(l);
        let params = SeparatorParams::new(2, estimate_overlap(&spheres)).unwrap();
        let (root, _) =
            build_hierarchy(&net, &spheres, &params, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let text = hierarchy_to_json(&root).unwrap();
        let back = hierarchy_from_json(&text).unwrap();
        assert_eq!(hierarchy_to_json(&back).unwrap(), text);
    }

    #[test]
    fn overlap_count_on_stacked_spheres() {
        let mut spheres = grid_spheres(4);
        // Five coincident spheres on top of one grid point.
        for extra in 0..5 {
            spheres.push(unit(vec![1.0, 1.0], 100 + extra));
        }
        let k = estimate_overlap(&spheres);
        assert!(k >= 6); // the stack plus the original sphere
    }
}
