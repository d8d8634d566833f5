//! Conversion of `<0| U^dag P U |0>` into a closed tensor network of
//! half-gate tensors embedded as spheres of radius `l/4 + eps`.
//!
//! Each two-qubit gate is split through its operator-Schmidt decomposition
//! into two rank-3 halves joined by an internal bond; boundary kets/bras,
//! single-qubit gates, and measurement projectors are absorbed into the
//! chronologically nearest half-gate on their wire, so the network has
//! exactly `2 sum_f` tensors. Qubit wires that carry no two-qubit gate
//! collapse to a scalar factor reported alongside the network.

use std::collections::BTreeMap;

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::circuit::{Circuit, Gate, Measurement, QubitId};
use crate::error::{Error, Result};
use crate::geometry::EmbeddedSphere;
use crate::separator::HierarchyNode;
use crate::tncore::{execute_plan, greedy_leaf_plan, Bond, Tensor, TensorNetwork};

/// Singular values below this threshold are dropped when truncating the
/// operator-Schmidt rank.
pub const SCHMIDT_TOL: f64 = 1e-12;

/// Rank-3 halves of a two-qubit gate, laid out `[out][in][chi]` row-major:
/// `U[(2a+b),(2a'+b')] = sum_i a_half[a][a'][i] * b_half[b][b'][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GateHalves {
    pub a_half: Vec<Complex64>,
    pub b_half: Vec<Complex64>,
    pub chi: usize,
}

/// Operator-Schmidt split of a 4x4 gate across its two qubits. The internal
/// bond is truncated to the numerical rank `chi` of the decomposition.
pub fn split_two_qubit_gate(u: &Matrix4<Complex64>) -> Result<GateHalves> {
    // Reshuffle U[(ab),(a'b')] -> M[(aa'),(bb')].
    let m = Matrix4::from_fn(|row, col| {
        let (a, ap) = (row / 2, row % 2);
        let (b, bp) = (col / 2, col % 2);
        u[(2 * a + b, 2 * ap + bp)]
    });
    let svd = nalgebra::linalg::SVD::new(m, true, true);
    let (w, vt) = match (&svd.u, &svd.v_t) {
        (Some(w), Some(vt)) => (w, vt),
        _ => return Err(Error::Structure("SVD of gate failed to converge".into())),
    };
    let chi = svd
        .singular_values
        .iter()
        .filter(|&&s| s > SCHMIDT_TOL)
        .count()
        .max(1);
    let mut a_half = vec![Complex64::new(0.0, 0.0); 4 * chi];
    let mut b_half = vec![Complex64::new(0.0, 0.0); 4 * chi];
    for i in 0..chi {
        let root = Complex64::new(svd.singular_values[i].sqrt(), 0.0);
        for o in 0..2 {
            for inn in 0..2 {
                a_half[(o * 2 + inn) * chi + i] = root * w[(2 * o + inn, i)];
                b_half[(o * 2 + inn) * chi + i] = root * vt[(i, 2 * o + inn)];
            }
        }
    }
    Ok(GateHalves { a_half, b_half, chi })
}

/// An item on a qubit's wire, in chronological order.
enum Item {
    Ket,
    Bra,
    Mat(Matrix2<Complex64>),
    Half(usize /* half tensor id */),
}

/// A half-gate tensor under construction: `[out][in][chi]` data where
/// either wire leg may already be contracted away (dim 1).
struct HalfBuild {
    data: Vec<Complex64>,
    out_dim: usize,
    in_dim: usize,
    chi: usize,
    has_out: bool,
    has_in: bool,
    internal_bond: usize,
    out_bond: Option<usize>,
    in_bond: Option<usize>,
}

impl HalfBuild {
    fn idx(&self, o: usize, i: usize, c: usize) -> usize {
        (o * self.in_dim + i) * self.chi + c
    }

    fn absorb_in_matrix(&mut self, m: &Matrix2<Complex64>) {
        assert_eq!(self.in_dim, 2);
        let mut next = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for o in 0..self.out_dim {
            for i in 0..2 {
                for c in 0..self.chi {
                    next[self.idx(o, i, c)] = (0..2)
                        .map(|x| self.data[self.idx(o, x, c)] * m[(x, i)])
                        .sum();
                }
            }
        }
        self.data = next;
    }

    fn absorb_in_vector(&mut self, v: [Complex64; 2]) {
        assert_eq!(self.in_dim, 2);
        let mut next = vec![Complex64::new(0.0, 0.0); self.out_dim * self.chi];
        for o in 0..self.out_dim {
            for c in 0..self.chi {
                next[o * self.chi + c] =
                    (0..2).map(|x| self.data[self.idx(o, x, c)] * v[x]).sum();
            }
        }
        self.data = next;
        self.in_dim = 1;
        self.has_in = false;
    }

    fn absorb_out_matrix(&mut self, m: &Matrix2<Complex64>) {
        assert_eq!(self.out_dim, 2);
        let mut next = vec![Complex64::new(0.0, 0.0); self.data.len()];
        for o in 0..2 {
            for i in 0..self.in_dim {
                for c in 0..self.chi {
                    next[self.idx(o, i, c)] = (0..2)
                        .map(|x| m[(o, x)] * self.data[self.idx(x, i, c)])
                        .sum();
                }
            }
        }
        self.data = next;
    }

    fn absorb_out_vector(&mut self, w: [Complex64; 2]) {
        assert_eq!(self.out_dim, 2);
        let mut next = vec![Complex64::new(0.0, 0.0); self.in_dim * self.chi];
        for i in 0..self.in_dim {
            for c in 0..self.chi {
                next[i * self.chi + c] =
                    (0..2).map(|x| w[x] * self.data[self.idx(x, i, c)]).sum();
            }
        }
        self.data = next;
        self.out_dim = 1;
        self.has_out = false;
    }
}

#[derive(Debug, Clone)]
pub struct ConvertedCircuit {
    pub network: TensorNetwork,
    pub embedding: Vec<EmbeddedSphere>,
    /// Largest integer strictly below `2 F ((l+r)/r)^d`; an overlap number
    /// valid for any arrangement with this gate profile.
    pub k_bound: u64,
    /// Product of `<0| u^dag P u |0>` over wires without two-qubit gates;
    /// multiply the network's contraction value by this.
    pub scalar_factor: Complex64,
}

pub fn default_epsilon(c: &Circuit) -> f64 {
    c.min_spacing / 100.0
}

/// Build the closed network for `<0| U^dag P U |0>` together with its sphere
/// embedding. `epsilon` inflates the half-gate radius `l/4` so touching
/// spheres intersect; `None` uses `min_spacing / 100`.
pub fn circuit_to_network(
    c: &Circuit,
    m: &Measurement,
    epsilon: Option<f64>,
) -> Result<ConvertedCircuit> {
    c.validate()?;
    m.validate()?;
    let eps = epsilon.unwrap_or_else(|| default_epsilon(c));
    if eps <= 0.0 {
        return Err(Error::Parameter("epsilon must be positive".into()));
    }

    // Two-qubit gates in chronological order; gate tq gets half tensors
    // 4tq + 2*dagger + side.
    let mut order: Vec<usize> = (0..c.gates.len()).collect();
    order.sort_by_key(|&i| c.gates[i].time());
    let two_qubit: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| matches!(c.gates[i], Gate::Two { .. }))
        .collect();
    let splits: Vec<GateHalves> = two_qubit
        .iter()
        .map(|&i| match &c.gates[i] {
            Gate::Two { matrix, .. } => split_two_qubit_gate(matrix),
            _ => unreachable!(),
        })
        .collect::<Result<_>>()?;

    let half_id = |tq: usize, dagger: bool, side: usize| 4 * tq + 2 * usize::from(dagger) + side;

    let mut network = TensorNetwork::new();
    let mut halves: BTreeMap<usize, HalfBuild> = BTreeMap::new();
    for (tq, gh) in splits.iter().enumerate() {
        for dagger in [false, true] {
            let bond_id = 2 * tq + usize::from(dagger);
            network.add_bond(Bond {
                id: bond_id,
                dim: gh.chi,
                endpoints: vec![half_id(tq, dagger, 0), half_id(tq, dagger, 1)],
            });
            for side in 0..2 {
                let src = if side == 0 { &gh.a_half } else { &gh.b_half };
                let data = if dagger {
                    // (A x B)^dag = sum_i A_i^dag x B_i^dag.
                    let mut d = vec![Complex64::new(0.0, 0.0); src.len()];
                    for o in 0..2 {
                        for i in 0..2 {
                            for cc in 0..gh.chi {
                                d[(o * 2 + i) * gh.chi + cc] =
                                    src[(i * 2 + o) * gh.chi + cc].conj();
                            }
                        }
                    }
                    d
                } else {
                    src.clone()
                };
                halves.insert(
                    half_id(tq, dagger, side),
                    HalfBuild {
                        data,
                        out_dim: 2,
                        in_dim: 2,
                        chi: gh.chi,
                        has_out: true,
                        has_in: true,
                        internal_bond: bond_id,
                        out_bond: None,
                        in_bond: None,
                    },
                );
            }
        }
    }

    let mut scalar_factor = Complex64::new(1.0, 0.0);
    let mut next_bond = 2 * two_qubit.len();

    for &q in c.positions.keys() {
        let items = wire_items(c, m, &two_qubit, q, half_id);
        let half_positions: Vec<usize> = items
            .iter()
            .enumerate()
            .filter_map(|(j, it)| matches!(it, Item::Half(_)).then_some(j))
            .collect();

        if half_positions.is_empty() {
            scalar_factor *= scalar_wire(&items);
            continue;
        }

        // Nearest-half assignment; ties go to the earlier half.
        let owner = |j: usize| -> usize {
            *half_positions
                .iter()
                .min_by_key(|&&h| (h.abs_diff(j), h))
                .unwrap()
        };

        for (hi, &h) in half_positions.iter().enumerate() {
            let id = match items[h] {
                Item::Half(id) => id,
                _ => unreachable!(),
            };
            // Absorb preceding items owned by this half, closest first.
            let lo = if hi == 0 { 0 } else { half_positions[hi - 1] + 1 };
            let pre: Vec<usize> = (lo..h).filter(|&j| owner(j) == h).collect();
            let build = halves.get_mut(&id).unwrap();
            if let Some(&first) = pre.first() {
                if matches!(items[first], Item::Ket) {
                    let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
                    for &j in &pre[1..] {
                        v = apply_mat(mat_of(&items[j]), v);
                    }
                    build.absorb_in_vector(v);
                } else {
                    let mut total = Matrix2::identity();
                    for &j in &pre {
                        total = mat_of(&items[j]) * total;
                    }
                    build.absorb_in_matrix(&total);
                }
            }
            // Absorb following items owned by this half.
            let hi_end = if hi + 1 == half_positions.len() {
                items.len()
            } else {
                half_positions[hi + 1]
            };
            let post: Vec<usize> = (h + 1..hi_end).filter(|&j| owner(j) == h).collect();
            let build = halves.get_mut(&id).unwrap();
            if let Some(&last) = post.last() {
                if matches!(items[last], Item::Bra) {
                    let mut total = Matrix2::identity();
                    for &j in &post[..post.len() - 1] {
                        total = mat_of(&items[j]) * total;
                    }
                    build.absorb_out_vector([total[(0, 0)], total[(0, 1)]]);
                } else {
                    let mut total = Matrix2::identity();
                    for &j in &post {
                        total = mat_of(&items[j]) * total;
                    }
                    build.absorb_out_matrix(&total);
                }
            }
        }

        // Wire bonds between consecutive halves.
        for pair in half_positions.windows(2) {
            let (prev_id, next_id) = match (&items[pair[0]], &items[pair[1]]) {
                (Item::Half(a), Item::Half(b)) => (*a, *b),
                _ => unreachable!(),
            };
            network.add_bond(Bond {
                id: next_bond,
                dim: 2,
                endpoints: vec![prev_id, next_id],
            });
            halves.get_mut(&prev_id).unwrap().out_bond = Some(next_bond);
            halves.get_mut(&next_id).unwrap().in_bond = Some(next_bond);
            next_bond += 1;
        }
    }

    for (id, build) in halves {
        debug_assert_eq!(build.has_out, build.out_bond.is_some());
        debug_assert_eq!(build.has_in, build.in_bond.is_some());
        let mut bonds = Vec::new();
        if let Some(b) = build.out_bond {
            bonds.push(b);
        }
        if let Some(b) = build.in_bond {
            bonds.push(b);
        }
        bonds.push(build.internal_bond);
        network.add_tensor(Tensor { id, bonds, data: Some(build.data) });
    }
    network.validate()?;

    let mut embedding = Vec::new();
    let radius = c.gate_range / 4.0 + eps;
    for (tq, &gi) in two_qubit.iter().enumerate() {
        let (qa, qb) = match &c.gates[gi] {
            Gate::Two { qubit_a, qubit_b, .. } => (*qubit_a, *qubit_b),
            _ => unreachable!(),
        };
        let (pa, pb) = (&c.positions[&qa], &c.positions[&qb]);
        for dagger in [false, true] {
            for (side, (from, to)) in [(pa, pb), (pb, pa)].into_iter().enumerate() {
                let center: Vec<f64> =
                    from.iter().zip(to).map(|(a, b)| a + (b - a) / 4.0).collect();
                embedding.push(EmbeddedSphere::new(center, radius, half_id(tq, dagger, side)));
            }
        }
    }

    let profile = super::GateProfile::from_circuit(c);
    let k_bound = if profile.max_f == 0 {
        0
    } else {
        let v = 2.0
            * profile.max_f as f64
            * ((c.gate_range + c.min_spacing) / c.min_spacing).powi(c.d as i32);
        if v.fract() == 0.0 { v as u64 - 1 } else { v.floor() as u64 }
    };

    Ok(ConvertedCircuit { network, embedding, k_bound, scalar_factor })
}

fn mat_of(item: &Item) -> Matrix2<Complex64> {
    match item {
        Item::Mat(m) => *m,
        _ => unreachable!("boundary item in matrix position"),
    }
}

fn apply_mat(m: Matrix2<Complex64>, v: [Complex64; 2]) -> [Complex64; 2] {
    [
        m[(0, 0)] * v[0] + m[(0, 1)] * v[1],
        m[(1, 0)] * v[0] + m[(1, 1)] * v[1],
    ]
}

/// The full chronological wire of qubit `q`:
/// `|0>  U-section  P  U^dag-section  <0|`.
fn wire_items(
    c: &Circuit,
    m: &Measurement,
    two_qubit: &[usize],
    q: QubitId,
    half_id: impl Fn(usize, bool, usize) -> usize,
) -> Vec<Item> {
    let tq_index: BTreeMap<usize, usize> =
        two_qubit.iter().enumerate().map(|(tq, &gi)| (gi, tq)).collect();
    let mut order: Vec<usize> = (0..c.gates.len())
        .filter(|&i| c.gates[i].touches(q))
        .collect();
    order.sort_by_key(|&i| c.gates[i].time());

    let mut forward = Vec::new();
    for &gi in &order {
        forward.push(match &c.gates[gi] {
            Gate::Single { matrix, .. } => Item::Mat(*matrix),
            Gate::Two { qubit_a, .. } => {
                let side = usize::from(*qubit_a != q);
                Item::Half(half_id(tq_index[&gi], false, side))
            }
        });
    }

    let mut items = vec![Item::Ket];
    items.extend(forward);
    items.push(Item::Mat(m.projector(q)));
    for &gi in order.iter().rev() {
        items.push(match &c.gates[gi] {
            Gate::Single { matrix, .. } => Item::Mat(matrix.adjoint()),
            Gate::Two { qubit_a, .. } => {
                let side = usize::from(*qubit_a != q);
                Item::Half(half_id(tq_index[&gi], true, side))
            }
        });
    }
    items.push(Item::Bra);
    items
}

/// `<0| (product of wire matrices) |0>` for a wire without half-gates.
fn scalar_wire(items: &[Item]) -> Complex64 {
    let mut v = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    for item in items {
        match item {
            Item::Ket | Item::Bra => {}
            Item::Mat(m) => v = apply_mat(*m, v),
            Item::Half(_) => unreachable!(),
        }
    }
    v[0]
}

/// Contract the converted network in one greedy pass (small instances) and
/// fold in the idle-wire scalar factor.
pub fn contract_converted(cc: &ConvertedCircuit) -> Result<Complex64> {
    if cc.network.tensors.is_empty() {
        return Ok(cc.scalar_factor);
    }
    let root = HierarchyNode {
        node_id: 0,
        tensor_ids: cc.network.tensors.keys().copied().collect(),
        children: None,
        interface_log2dim: 0.0,
        leaf_plan: Some(greedy_leaf_plan(&cc.network)),
    };
    Ok(cc.scalar_factor * execute_plan(&cc.network, &root)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{
        haar_unitary2, haar_unitary4, random_projector, statevector_expectation, GateProfile,
        Measurement,
    };
    use crate::separator::estimate_overlap;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cz() -> Matrix4<Complex64> {
        let mut m = Matrix4::identity();
        m[(3, 3)] = Complex64::new(-1.0, 0.0);
        m
    }

    fn reassemble(gh: &GateHalves) -> Matrix4<Complex64> {
        Matrix4::from_fn(|row, col| {
            let (a, b) = (row / 2, row % 2);
            let (ap, bp) = (col / 2, col % 2);
            (0..gh.chi)
                .map(|i| {
                    gh.a_half[(a * 2 + ap) * gh.chi + i] * gh.b_half[(b * 2 + bp) * gh.chi + i]
                })
                .sum()
        })
    }

    #[test]
    fn split_ranks() {
        assert_eq!(split_two_qubit_gate(&cz()).unwrap().chi, 2);
        assert_eq!(split_two_qubit_gate(&Matrix4::identity()).unwrap().chi, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(split_two_qubit_gate(&haar_unitary4(&mut rng)).unwrap().chi, 4);
    }

    #[test]
    fn split_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let u = haar_unitary4(&mut rng);
            let gh = split_two_qubit_gate(&u).unwrap();
            assert!(crate::circuit::max_abs(&(reassemble(&gh) - u)) < 1e-10);
        }
        let gh = split_two_qubit_gate(&cz()).unwrap();
        assert!(crate::circuit::max_abs(&(reassemble(&gh) - cz())) < 1e-10);
    }

    fn random_circuit(seed: u64, l: usize, layers: usize) -> (Circuit, Measurement) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gates = Vec::new();
        let n = l * l;
        for t in 0..layers {
            // A few single-qubit gates.
            for q in 0..n {
                if rng.gen_bool(0.4) {
                    gates.push(Gate::Single { qubit: q, time: t, matrix: haar_unitary2(&mut rng) });
                }
            }
            // Disjoint nearest-neighbor pairs.
            let horizontal = rng.gen_bool(0.5);
            for y in 0..l {
                for x in (0..l.saturating_sub(1)).step_by(2) {
                    if !rng.gen_bool(0.8) {
                        continue;
                    }
                    let (a, b) = if horizontal {
                        (y * l + x, y * l + x + 1)
                    } else {
                        (x * l + y, (x + 1) * l + y)
                    };
                    gates.push(Gate::Two {
                        qubit_a: a,
                        qubit_b: b,
                        time: t,
                        matrix: haar_unitary4(&mut rng),
                    });
                }
            }
        }
        let c = super::super::tests::grid_circuit(l, gates, layers.max(1));
        let mut meas = Measurement::default();
        for q in 0..n {
            if rng.gen_bool(0.5) {
                meas.projectors.insert(q, random_projector(&mut rng));
            }
        }
        (c, meas)
    }

    #[test]
    fn network_shape_matches_profile() {
        let (c, m) = random_circuit(7, 3, 3);
        let cc = circuit_to_network(&c, &m, None).unwrap();
        let profile = GateProfile::from_circuit(&c);
        assert_eq!(cc.network.tensors.len() as u64, 2 * profile.sum_f);
        assert_eq!(cc.embedding.len(), cc.network.tensors.len());
        assert!(cc.network.open_bonds().is_empty());
        cc.network.validate().unwrap();
    }

    #[test]
    fn contracted_bond_spheres_intersect() {
        let (c, m) = random_circuit(8, 3, 3);
        let cc = circuit_to_network(&c, &m, None).unwrap();
        let sphere: BTreeMap<usize, &EmbeddedSphere> =
            cc.embedding.iter().map(|s| (s.tensor_id, s)).collect();
        for bond in cc.network.bonds.values() {
            let (a, b) = (sphere[&bond.endpoints[0]], sphere[&bond.endpoints[1]]);
            let gap = crate::geometry::dist(&a.center, &b.center) - a.radius - b.radius;
            assert!(gap < 0.0, "bond {} spheres do not intersect", bond.id);
        }
    }

    #[test]
    fn k_bound_nearest_neighbor_value() {
        let (c, m) = random_circuit(9, 3, 3);
        let profile = GateProfile::from_circuit(&c);
        let cc = circuit_to_network(&c, &m, None).unwrap();
        // l = r: 2F * 2^d = 8F exactly, so the strict floor is 8F - 1.
        assert_eq!(cc.k_bound, 8 * profile.max_f - 1);
        assert!(estimate_overlap(&cc.embedding) <= cc.k_bound);
    }

    #[test]
    fn identity_circuit_contracts_to_one() {
        let mut gates = Vec::new();
        for (a, b) in [(0usize, 1usize), (2, 3), (0, 2)] {
            gates.push(Gate::Two { qubit_a: a, qubit_b: b, time: 0, matrix: Matrix4::identity() });
        }
        let c = super::super::tests::grid_circuit(2, gates, 1);
        let cc = circuit_to_network(&c, &Measurement::default(), None).unwrap();
        let v = contract_converted(&cc).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn idle_wires_become_scalar_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = haar_unitary2(&mut rng);
        let c = super::super::tests::grid_circuit(
            2,
            vec![Gate::Single { qubit: 3, time: 0, matrix: u }],
            1,
        );
        let mut m = Measurement::default();
        m.projectors.insert(3, random_projector(&mut rng));
        let cc = circuit_to_network(&c, &m, None).unwrap();
        assert!(cc.network.tensors.is_empty());
        let want = statevector_expectation(&c, &m).unwrap();
        let got = contract_converted(&cc).unwrap();
        assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12);
    }

    #[test]
    fn network_value_matches_statevector() {
        for seed in 20..30 {
            let (c, m) = random_circuit(seed, 3, 3);
            let want = statevector_expectation(&c, &m).unwrap();
            let cc = circuit_to_network(&c, &m, None).unwrap();
            let got = contract_converted(&cc).unwrap();
            let scale = want.abs().max(1.0);
            assert!(
                (got.re - want).abs() < 1e-8 * scale && got.im.abs() < 1e-8 * scale,
                "seed {seed}: network {got} vs statevector {want}"
            );
        }
    }

    #[test]
    fn conversion_is_deterministic() {
        let (c, m) = random_circuit(31, 3, 2);
        let a = circuit_to_network(&c, &m, None).unwrap();
        let b = circuit_to_network(&c, &m, None).unwrap();
        assert_eq!(a.network.tensors, b.network.tensors);
        assert_eq!(a.network.bonds, b.network.bonds);
        assert_eq!(a.scalar_factor, b.scalar_factor);
    }
}
