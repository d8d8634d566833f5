//! Tensor network representation and contraction machinery: pairwise
//! contraction with scalar-operation accounting, greedy planning for small
//! clusters, hierarchy cost evaluation, plan execution, and the closed-form
//! contraction-time bound for finite-ranged networks.

pub mod io;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::separator::HierarchyNode;

pub type TensorId = usize;
pub type BondId = usize;

/// A tensor index line. Contracted bonds have two endpoints; open bonds one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bond {
    pub id: BondId,
    pub dim: usize,
    pub endpoints: Vec<TensorId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub id: TensorId,
    /// Bond order is the data layout: row-major, last bond fastest.
    pub bonds: Vec<BondId>,
    pub data: Option<Vec<Complex64>>,
}

impl Tensor {
    pub fn entry_count(&self, bonds: &BTreeMap<BondId, Bond>) -> u128 {
        self.bonds.iter().map(|b| bonds[b].dim as u128).product()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TensorNetwork {
    pub tensors: BTreeMap<TensorId, Tensor>,
    pub bonds: BTreeMap<BondId, Bond>,
}

impl TensorNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tensor(&mut self, tensor: Tensor) {
        self.tensors.insert(tensor.id, tensor);
    }

    pub fn add_bond(&mut self, bond: Bond) {
        self.bonds.insert(bond.id, bond);
    }

    /// Referential integrity both ways, bond arity, and data lengths.
    pub fn validate(&self) -> Result<()> {
        for bond in self.bonds.values() {
            if bond.dim < 1 {
                return Err(Error::Structure(format!("bond {} has dim 0", bond.id)));
            }
            match bond.endpoints.as_slice() {
                [a, b] if a == b => {
                    return Err(Error::Structure(format!(
                        "bond {} is a self-loop on tensor {a}",
                        bond.id
                    )))
                }
                [_] | [_, _] => {}
                _ => {
                    return Err(Error::Structure(format!(
                        "bond {} has {} endpoints",
                        bond.id,
                        bond.endpoints.len()
                    )))
                }
            }
            for t in &bond.endpoints {
                let tensor = self.tensors.get(t).ok_or_else(|| {
                    Error::Structure(format!("bond {} references missing tensor {t}", bond.id))
                })?;
                if !tensor.bonds.contains(&bond.id) {
                    return Err(Error::Structure(format!(
                        "bond {} lists tensor {t} which does not list it back",
                        bond.id
                    )));
                }
            }
        }
        for tensor in self.tensors.values() {
            for b in &tensor.bonds {
                let bond = self.bonds.get(b).ok_or_else(|| {
                    Error::Structure(format!("tensor {} references missing bond {b}", tensor.id))
                })?;
                if !bond.endpoints.contains(&tensor.id) {
                    return Err(Error::Structure(format!(
                        "tensor {} lists bond {b} which does not list it back",
                        tensor.id
                    )));
                }
            }
            if let Some(data) = &tensor.data {
                let expect = tensor.entry_count(&self.bonds);
                if data.len() as u128 != expect {
                    return Err(Error::Structure(format!(
                        "tensor {} data length {} != entry count {expect}",
                        tensor.id,
                        data.len()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn open_bonds(&self) -> Vec<BondId> {
        self.bonds
            .values()
            .filter(|b| b.endpoints.len() == 1)
            .map(|b| b.id)
            .collect()
    }

    /// Bonds crossing the boundary of `set`: at least one endpoint inside and
    /// either an endpoint outside or no second endpoint at all.
    pub fn cut_bonds(&self, set: &BTreeSet<TensorId>) -> BTreeSet<BondId> {
        self.bonds
            .values()
            .filter(|b| {
                let inside = b.endpoints.iter().filter(|t| set.contains(t)).count();
                inside >= 1 && (b.endpoints.len() == 1 || inside < b.endpoints.len())
            })
            .map(|b| b.id)
            .collect()
    }

    pub fn log2_dim(&self, bonds: &BTreeSet<BondId>) -> f64 {
        bonds.iter().map(|b| (self.bonds[b].dim as f64).log2()).sum()
    }
}

/// Scalar-operation count for contracting `a` with `b`: twice the product of
/// all distinct bond dimensions of the pair, shared bonds counted once.
pub fn pair_ops(a: &Tensor, b: &Tensor, bonds: &BTreeMap<BondId, Bond>) -> u128 {
    let all: BTreeSet<BondId> = a.bonds.iter().chain(&b.bonds).copied().collect();
    2 * all.iter().map(|id| bonds[id].dim as u128).product::<u128>()
}

fn strides(bond_list: &[BondId], bonds: &BTreeMap<BondId, Bond>) -> Vec<usize> {
    let mut s = vec![1usize; bond_list.len()];
    for i in (0..bond_list.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * bonds[&bond_list[i + 1]].dim;
    }
    s
}

/// Contract `a` and `b` over their shared bonds. The result carries the
/// symmetric difference of their bonds in sorted order, with data when both
/// inputs carry data. Returns the scalar-operation charge alongside.
pub fn contract_pair(
    a: &Tensor,
    b: &Tensor,
    bonds: &BTreeMap<BondId, Bond>,
) -> Result<(Tensor, u128)> {
    if a.id == b.id {
        return Err(Error::Structure(format!(
            "cannot contract tensor {} with itself",
            a.id
        )));
    }
    for t in [a, b] {
        if let Some(data) = &t.data {
            if data.len() as u128 != t.entry_count(bonds) {
                return Err(Error::Structure(format!(
                    "tensor {} data length {} != entry count",
                    t.id,
                    data.len()
                )));
            }
        }
    }
    let a_set: BTreeSet<BondId> = a.bonds.iter().copied().collect();
    let b_set: BTreeSet<BondId> = b.bonds.iter().copied().collect();
    let shared: Vec<BondId> = a_set.intersection(&b_set).copied().collect();
    let result_bonds: Vec<BondId> = a_set.symmetric_difference(&b_set).copied().collect();
    let ops = pair_ops(a, b, bonds);

    let data = match (&a.data, &b.data) {
        (Some(da), Some(db)) => {
            // Odometer over (result bonds, shared bonds); offsets into a, b
            // and the result are maintained incrementally.
            let all: Vec<BondId> = result_bonds.iter().chain(&shared).copied().collect();
            let dims: Vec<usize> = all.iter().map(|id| bonds[id].dim).collect();
            let total: usize = dims.iter().product();
            let result_len: usize = result_bonds.iter().map(|id| bonds[id].dim).product();

            let sa = strides(&a.bonds, bonds);
            let sb = strides(&b.bonds, bonds);
            let sr = strides(&result_bonds, bonds);
            let pos =
                |list: &[BondId], s: &[usize], id: BondId| list.iter().position(|&x| x == id).map(|p| s[p]);
            let stride_a: Vec<usize> = all.iter().map(|&id| pos(&a.bonds, &sa, id).unwrap_or(0)).collect();
            let stride_b: Vec<usize> = all.iter().map(|&id| pos(&b.bonds, &sb, id).unwrap_or(0)).collect();
            let stride_r: Vec<usize> = all
                .iter()
                .map(|&id| pos(&result_bonds, &sr, id).unwrap_or(0))
                .collect();

            let mut out = vec![Complex64::zero(); result_len.max(1)];
            let mut digits = vec![0usize; all.len()];
            let (mut oa, mut ob, mut or) = (0usize, 0usize, 0usize);
            for step in 0..total.max(1) {
                out[or] += da[oa] * db[ob];
                if step + 1 == total {
                    break;
                }
                let mut i = all.len();
                loop {
                    i -= 1;
                    if digits[i] + 1 < dims[i] {
                        digits[i] += 1;
                        oa += stride_a[i];
                        ob += stride_b[i];
                        or += stride_r[i];
                        break;
                    }
                    oa -= digits[i] * stride_a[i];
                    ob -= digits[i] * stride_b[i];
                    or -= digits[i] * stride_r[i];
                    digits[i] = 0;
                }
            }
            Some(out)
        }
        _ => None,
    };

    Ok((
        Tensor {
            id: a.id.min(b.id),
            bonds: result_bonds,
            data,
        },
        ops,
    ))
}

/// A greedy full pairwise contraction order for a small cluster. Each step
/// picks the pair with the fewest scalar operations; ties break on smaller
/// result entry count, then lexicographic tensor ids.
pub fn greedy_leaf_plan(cluster: &TensorNetwork) -> Vec<(TensorId, TensorId)> {
    // Virtual tensors: merged groups of original ids. A bond is live for a
    // group if it reaches outside the group (or is open).
    let mut groups: BTreeMap<TensorId, BTreeSet<TensorId>> = cluster
        .tensors
        .keys()
        .map(|&id| (id, BTreeSet::from([id])))
        .collect();
    let live = |group: &BTreeSet<TensorId>| -> BTreeSet<BondId> {
        let mut out = BTreeSet::new();
        for t in group {
            for &b in &cluster.tensors[t].bonds {
                let bond = &cluster.bonds[&b];
                if bond.endpoints.len() == 1 || bond.endpoints.iter().any(|e| !group.contains(e)) {
                    out.insert(b);
                }
            }
        }
        out
    };
    let mut plan = Vec::new();
    while groups.len() > 1 {
        let ids: Vec<TensorId> = groups.keys().copied().collect();
        let mut best: Option<(u128, u128, (TensorId, TensorId))> = None;
        for (i, &x) in ids.iter().enumerate() {
            let lx = live(&groups[&x]);
            for &y in &ids[i + 1..] {
                let ly = live(&groups[&y]);
                let union: BTreeSet<BondId> = lx.union(&ly).copied().collect();
                let ops: u128 = 2 * union
                    .iter()
                    .map(|b| cluster.bonds[b].dim as u128)
                    .product::<u128>();
                let merged: BTreeSet<TensorId> =
                    groups[&x].union(&groups[&y]).copied().collect();
                let result_entries: u128 = live(&merged)
                    .iter()
                    .map(|b| cluster.bonds[b].dim as u128)
                    .product();
                let key = (ops, result_entries, (x, y));
                if best.as_ref().is_none_or(|b| key < *b) {
                    best = Some(key);
                }
            }
        }
        let (_, _, (x, y)) = best.unwrap();
        plan.push((x, y));
        let merged: BTreeSet<TensorId> = groups[&x].union(&groups[&y]).copied().collect();
        groups.remove(&y);
        groups.insert(x, merged);
    }
    plan
}

/// Per-node cost contribution in a hierarchy ledger.
#[derive(Debug, Clone)]
pub struct NodeCost {
    pub node_id: usize,
    pub log2_ops: f64,
    pub exact_ops: Option<BigUint>,
}

/// Scalar-operation ledger for a separator hierarchy, tracked both exactly
/// (arbitrary precision) and in log2 floats.
#[derive(Debug, Clone)]
pub struct CostLedger {
    pub log2_scalar_ops: f64,
    pub exact_ops: Option<BigUint>,
    pub per_node: Vec<NodeCost>,
    /// Number of open indices of the root effective tensor; zero for a full
    /// contraction to a scalar.
    pub root_effective_rank: usize,
}

const EXACT_SWITCHOVER_BITS: u64 = 64;

pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 53;
    let top = (x >> shift).to_u64().unwrap() as f64;
    top.log2() + shift as f64
}

fn log2_sum(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (1.0 + (lo - hi).exp2()).log2()
}

struct CostWalk<'a> {
    network: &'a TensorNetwork,
    per_node: Vec<NodeCost>,
    total_exact: BigUint,
    total_log2: f64,
}

impl CostWalk<'_> {
    /// Returns the node's effective bond set.
    fn walk(&mut self, node: &HierarchyNode) -> Result<BTreeSet<BondId>> {
        for t in &node.tensor_ids {
            if !self.network.tensors.contains_key(t) {
                return Err(Error::Structure(format!(
                    "hierarchy references missing tensor {t}"
                )));
            }
        }
        match &node.children {
            None => {
                let plan = node.leaf_plan.as_ref().ok_or_else(|| {
                    Error::Structure(format!("leaf node {} lacks a plan", node.node_id))
                })?;
                let (ops, log2) = self.leaf_cost(node, plan)?;
                self.record(node.node_id, ops, log2);
                Ok(self.network.cut_bonds(&node.tensor_ids))
            }
            Some(children) => {
                let (left, right) = (&children.0, &children.1);
                let lb = self.walk(left)?;
                let rb = self.walk(right)?;
                let union: BTreeSet<BondId> = lb.union(&rb).copied().collect();
                let mut m = BigUint::one();
                for b in &union {
                    m *= BigUint::from(self.network.bonds[b].dim);
                }
                let ops = BigUint::from(2u32) * &m;
                let log2 = 1.0 + self.network.log2_dim(&union);
                self.record(node.node_id, ops, log2);
                Ok(self.network.cut_bonds(&node.tensor_ids))
            }
        }
    }

    fn leaf_cost(
        &self,
        node: &HierarchyNode,
        plan: &[(TensorId, TensorId)],
    ) -> Result<(BigUint, f64)> {
        if plan.len() + 1 != node.tensor_ids.len().max(1) {
            return Err(Error::Structure(format!(
                "leaf node {}: plan length {} does not cover {} tensors",
                node.node_id,
                plan.len(),
                node.tensor_ids.len()
            )));
        }
        let mut groups: BTreeMap<TensorId, BTreeSet<TensorId>> = node
            .tensor_ids
            .iter()
            .map(|&id| (id, BTreeSet::from([id])))
            .collect();
        let mut total = BigUint::zero();
        let mut total_log2 = f64::NEG_INFINITY;
        for &(x, y) in plan {
            let (gx, gy) = (
                groups
                    .get(&x)
                    .ok_or_else(|| Error::Structure(format!("plan references {x} twice")))?
                    .clone(),
                groups
                    .get(&y)
                    .ok_or_else(|| Error::Structure(format!("plan references {y} twice")))?
                    .clone(),
            );
            let lx = self.live_in(&gx, &node.tensor_ids);
            let ly = self.live_in(&gy, &node.tensor_ids);
            let union: BTreeSet<BondId> = lx.union(&ly).copied().collect();
            let mut ops = BigUint::from(2u32);
            for b in &union {
                ops *= BigUint::from(self.network.bonds[b].dim);
            }
            total_log2 = log2_sum(total_log2, 1.0 + self.network.log2_dim(&union));
            total += ops;
            let merged: BTreeSet<TensorId> = gx.union(&gy).copied().collect();
            groups.remove(&y);
            groups.insert(x, merged);
        }
        if total.is_zero() {
            total_log2 = f64::NEG_INFINITY;
        }
        Ok((total, total_log2))
    }

    /// Bonds live for `group` seen from inside the leaf: anything leaving the
    /// group, whether to a sibling in the leaf or out of the leaf entirely.
    fn live_in(&self, group: &BTreeSet<TensorId>, _leaf: &BTreeSet<TensorId>) -> BTreeSet<BondId> {
        self.network.cut_bonds(group)
    }

    fn record(&mut self, node_id: usize, ops: BigUint, log2: f64) {
        self.total_log2 = log2_sum(self.total_log2, log2);
        self.total_exact += &ops;
        self.per_node.push(NodeCost {
            node_id,
            log2_ops: log2,
            exact_ops: Some(ops),
        });
    }
}

/// Bottom-up evaluation of the recursive cost bound over a separator
/// hierarchy: leaves charge their greedy-plan operations, internal nodes add
/// `2 M` for the final pair contraction of their children.
pub fn hierarchy_cost(root: &HierarchyNode, network: &TensorNetwork) -> Result<CostLedger> {
    let mut walk = CostWalk {
        network,
        per_node: Vec::new(),
        total_exact: BigUint::zero(),
        total_log2: f64::NEG_INFINITY,
    };
    let root_bonds = walk.walk(root)?;
    let exact = walk.total_exact;
    let keep_exact = exact.bits() <= EXACT_SWITCHOVER_BITS;
    let mut per_node = walk.per_node;
    if !keep_exact {
        for n in &mut per_node {
            n.exact_ops = None;
        }
    }
    Ok(CostLedger {
        log2_scalar_ops: walk.total_log2,
        exact_ops: keep_exact.then_some(exact),
        per_node,
        root_effective_rank: root_bonds.len(),
    })
}

/// Default per-intermediate entry cap for plan execution.
pub const DEFAULT_MEMORY_CAP: u128 = 1 << 31;

/// Execute the contraction order encoded by a hierarchy on a network with
/// data, returning the full-contraction scalar. Also returns the number of
/// scalar-operation charges actually incurred.
pub fn execute_plan(network: &TensorNetwork, root: &HierarchyNode) -> Result<Complex64> {
    execute_plan_with_cap(network, root, DEFAULT_MEMORY_CAP).map(|(v, _)| v)
}

pub fn execute_plan_with_cap(
    network: &TensorNetwork,
    root: &HierarchyNode,
    memory_cap: u128,
) -> Result<(Complex64, BigUint)> {
    if !network.open_bonds().is_empty() {
        return Err(Error::Structure(
            "execute_plan requires a closed network (no open bonds)".into(),
        ));
    }
    for t in network.tensors.values() {
        if t.data.is_none() {
            return Err(Error::Structure(format!("tensor {} carries no data", t.id)));
        }
    }
    let mut ops = BigUint::zero();
    let result = execute_node(network, root, memory_cap, &mut ops)?;
    if !result.bonds.is_empty() {
        return Err(Error::Structure(format!(
            "root contraction left {} open indices",
            result.bonds.len()
        )));
    }
    let value = result.data.as_ref().unwrap()[0];
    Ok((value, ops))
}

fn check_cap(t: &Tensor, bonds: &BTreeMap<BondId, Bond>, cap: u128) -> Result<()> {
    let entries = t.entry_count(bonds);
    if entries > cap {
        return Err(Error::Resource(format!(
            "intermediate tensor of {entries} entries exceeds the cap of {cap}"
        )));
    }
    Ok(())
}

/// Entry count of the pair's contraction result, checked before allocating.
fn check_pair_cap(a: &Tensor, b: &Tensor, bonds: &BTreeMap<BondId, Bond>, cap: u128) -> Result<()> {
    let a_set: BTreeSet<BondId> = a.bonds.iter().copied().collect();
    let b_set: BTreeSet<BondId> = b.bonds.iter().copied().collect();
    let entries: u128 = a_set
        .symmetric_difference(&b_set)
        .map(|id| bonds[id].dim as u128)
        .product();
    if entries > cap {
        return Err(Error::Resource(format!(
            "intermediate tensor of {entries} entries exceeds the cap of {cap}"
        )));
    }
    Ok(())
}

fn execute_node(
    network: &TensorNetwork,
    node: &HierarchyNode,
    cap: u128,
    ops: &mut BigUint,
) -> Result<Tensor> {
    match &node.children {
        None => {
            let plan = node.leaf_plan.as_ref().ok_or_else(|| {
                Error::Structure(format!("leaf node {} lacks a plan", node.node_id))
            })?;
            let mut working: BTreeMap<TensorId, Tensor> = node
                .tensor_ids
                .iter()
                .map(|id| (*id, network.tensors[id].clone()))
                .collect();
            for &(x, y) in plan {
                let a = working.remove(&x).ok_or_else(|| {
                    Error::Structure(format!("plan references consumed tensor {x}"))
                })?;
                let b = working.remove(&y).ok_or_else(|| {
                    Error::Structure(format!("plan references consumed tensor {y}"))
                })?;
                check_pair_cap(&a, &b, &network.bonds, cap)?;
                let (mut result, step_ops) = contract_pair(&a, &b, &network.bonds)?;
                check_cap(&result, &network.bonds, cap)?;
                *ops += BigUint::from(step_ops);
                result.id = x;
                working.insert(x, result);
            }
            let mut iter = working.into_values();
            let only = iter
                .next()
                .ok_or_else(|| Error::Structure("empty leaf".into()))?;
            if iter.next().is_some() {
                return Err(Error::Structure(format!(
                    "leaf node {} plan did not reduce to one tensor",
                    node.node_id
                )));
            }
            Ok(only)
        }
        Some(children) => {
                let (left, right) = (&children.0, &children.1);
            let lt = execute_node(network, left, cap, ops)?;
            let rt = execute_node(network, right, cap, ops)?;
            check_pair_cap(&lt, &rt, &network.bonds, cap)?;
            let (result, step_ops) = contract_pair(&lt, &rt, &network.bonds)?;
            check_cap(&result, &network.bonds, cap)?;
            *ops += BigUint::from(step_ops);
            Ok(result)
        }
    }
}

/// Sphere-separator constants `c_d` for spatial dimensions 2 through 5.
pub fn separator_constant(d: usize) -> Option<f64> {
    match d {
        2 => Some(2.0),
        3 => Some(2.135),
        4 => Some(2.280),
        5 => Some(2.421),
        _ => None,
    }
}

/// The planar-separator constant.
pub const C_PST: f64 = 1.971;

/// `a_d = c_d / [2 - 2 ((d+1)/(d+2))^(1-1/d)]`.
pub fn cost_exponent_coefficient(d: usize, c_d: f64) -> f64 {
    let ratio = (d as f64 + 1.0) / (d as f64 + 2.0);
    c_d / (2.0 - 2.0 * ratio.powf(1.0 - 1.0 / d as f64))
}

pub fn a_d(d: usize) -> Option<f64> {
    separator_constant(d).map(|c| cost_exponent_coefficient(d, c))
}

/// The planar analogue `a_2' = c_PST / (2 - 2 sqrt(2/3))`.
pub fn a2_prime() -> f64 {
    C_PST / (2.0 - 2.0 * (2.0f64 / 3.0).sqrt())
}

/// log2 of the generic contraction-time bound
/// `2 n^(1/log2((d+2)/(d+1))) M^(a_d k^(1/d) n^(1-1/d))`.
pub fn network_bound(n: u64, m: u64, k: u64, d: usize) -> Result<f64> {
    network_bound_with(n, m, k, d, None)
}

pub fn network_bound_with(n: u64, m: u64, k: u64, d: usize, c_d: Option<f64>) -> Result<f64> {
    if n < 1 || m < 2 || k < 1 {
        return Err(Error::Parameter(format!(
            "bound requires n >= 1, M >= 2, k >= 1 (got n={n}, M={m}, k={k})"
        )));
    }
    let c = match c_d.or_else(|| separator_constant(d)) {
        Some(c) => c,
        None => {
            return Err(Error::Parameter(format!(
                "no tabulated separator constant for d = {d}; supply one explicitly"
            )))
        }
    };
    let df = d as f64;
    let a = cost_exponent_coefficient(d, c);
    let ratio = (df + 2.0) / (df + 1.0);
    Ok(1.0 + (n as f64).log2() / ratio.log2()
        + a * (k as f64).powf(1.0 / df) * (n as f64).powf(1.0 - 1.0 / df) * (m as f64).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::separator::HierarchyNode;
    use num_complex::Complex64;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// Two 2x2 matrices sharing one dim-2 bond.
    fn matrix_pair() -> TensorNetwork {
        let mut net = TensorNetwork::new();
        net.add_bond(Bond { id: 0, dim: 2, endpoints: vec![0] });
        net.add_bond(Bond { id: 1, dim: 2, endpoints: vec![0, 1] });
        net.add_bond(Bond { id: 2, dim: 2, endpoints: vec![1] });
        net.add_tensor(Tensor {
            id: 0,
            bonds: vec![0, 1],
            data: Some(vec![c(1.0), c(2.0), c(3.0), c(4.0)]),
        });
        net.add_tensor(Tensor {
            id: 1,
            bonds: vec![1, 2],
            data: Some(vec![c(5.0), c(6.0), c(7.0), c(8.0)]),
        });
        net
    }

    #[test]
    fn matrix_product_ops_and_value() {
        let net = matrix_pair();
        net.validate().unwrap();
        let (result, ops) = contract_pair(&net.tensors[&0], &net.tensors[&1], &net.bonds).unwrap();
        assert_eq!(ops, 16);
        assert_eq!(result.bonds, vec![0, 2]);
        // [[1,2],[3,4]] * [[5,6],[7,8]] = [[19,22],[43,50]]
        let data = result.data.unwrap();
        let expect = [19.0, 22.0, 43.0, 50.0];
        for (got, want) in data.iter().zip(expect) {
            assert!((got.re - want).abs() < 1e-12 && got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_times_scalar() {
        let mut net = TensorNetwork::new();
        net.add_tensor(Tensor { id: 0, bonds: vec![], data: Some(vec![c(3.0)]) });
        net.add_tensor(Tensor { id: 1, bonds: vec![], data: Some(vec![c(5.0)]) });
        let (result, ops) = contract_pair(&net.tensors[&0], &net.tensors[&1], &net.bonds).unwrap();
        assert_eq!(ops, 2);
        assert!((result.data.unwrap()[0].re - 15.0).abs() < 1e-12);
    }

    #[test]
    fn three_tensor_pair_matches_nested_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // A[i,j,k], B[j,k,l]: contract over two shared bonds j (dim 3), k (dim 2).
        let (di, dj, dk, dl) = (2usize, 3, 2, 4);
        let mut net = TensorNetwork::new();
        net.add_bond(Bond { id: 0, dim: di, endpoints: vec![0] });
        net.add_bond(Bond { id: 1, dim: dj, endpoints: vec![0, 1] });
        net.add_bond(Bond { id: 2, dim: dk, endpoints: vec![0, 1] });
        net.add_bond(Bond { id: 3, dim: dl, endpoints: vec![1] });
        let ra: Vec<Complex64> = (0..di * dj * dk)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let rb: Vec<Complex64> = (0..dj * dk * dl)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        net.add_tensor(Tensor { id: 0, bonds: vec![0, 1, 2], data: Some(ra.clone()) });
        net.add_tensor(Tensor { id: 1, bonds: vec![1, 2, 3], data: Some(rb.clone()) });
        let (result, ops) = contract_pair(&net.tensors[&0], &net.tensors[&1], &net.bonds).unwrap();
        assert_eq!(ops as usize, 2 * di * dj * dk * dl);
        assert_eq!(result.bonds, vec![0, 3]);
        let data = result.data.unwrap();
        for i in 0..di {
            for l in 0..dl {
                let mut want = Complex64::zero();
                for j in 0..dj {
                    for k in 0..dk {
                        want += ra[(i * dj + j) * dk + k] * rb[(j * dk + k) * dl + l];
                    }
                }
                let got = data[i * dl + l];
                assert!((got - want).norm() < 1e-12 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn greedy_plan_trivial_and_deterministic() {
        let mut net = TensorNetwork::new();
        net.add_tensor(Tensor { id: 7, bonds: vec![], data: None });
        assert!(greedy_leaf_plan(&net).is_empty());

        let chain = chain_three(4, 2);
        let p1 = greedy_leaf_plan(&chain);
        let p2 = greedy_leaf_plan(&chain);
        assert_eq!(p1, p2);
    }

    /// A - B - C where A-B has the given left dim and B-C the right dim.
    fn chain_three(left: usize, right: usize) -> TensorNetwork {
        let mut net = TensorNetwork::new();
        net.add_bond(Bond { id: 0, dim: left, endpoints: vec![0, 1] });
        net.add_bond(Bond { id: 1, dim: right, endpoints: vec![1, 2] });
        net.add_tensor(Tensor { id: 0, bonds: vec![0], data: None });
        net.add_tensor(Tensor { id: 1, bonds: vec![0, 1], data: None });
        net.add_tensor(Tensor { id: 2, bonds: vec![1], data: None });
        net
    }

    fn plan_cost(net: &TensorNetwork, plan: &[(TensorId, TensorId)]) -> u128 {
        let mut groups: BTreeMap<TensorId, BTreeSet<TensorId>> = net
            .tensors
            .keys()
            .map(|&id| (id, BTreeSet::from([id])))
            .collect();
        let mut total = 0u128;
        for &(x, y) in plan {
            let union: BTreeSet<BondId> = net
                .cut_bonds(&groups[&x])
                .union(&net.cut_bonds(&groups[&y]))
                .copied()
                .collect();
            total += 2 * union.iter().map(|b| net.bonds[b].dim as u128).product::<u128>();
            let merged: BTreeSet<TensorId> = groups[&x].union(&groups[&y]).copied().collect();
            groups.remove(&y);
            groups.insert(x, merged);
        }
        total
    }

    #[test]
    fn greedy_plan_is_optimal_on_chain() {
        let net = chain_three(4, 2);
        let plan = greedy_leaf_plan(&net);
        let greedy = plan_cost(&net, &plan);
        // Enumerate both fully-distinct contraction orders.
        let order_a = plan_cost(&net, &[(0, 1), (0, 2)]);
        let order_b = plan_cost(&net, &[(1, 2), (0, 1)]);
        assert_eq!(greedy, greedy.min(order_a).min(order_b));
        // All first pairs cost the same here; the tie rule picks the pair
        // with the smallest result, which contracts the dim-4 bond away.
        assert_eq!(plan[0], (0, 1));
        assert_eq!(greedy, 20);
    }

    fn single_leaf(net: &TensorNetwork) -> HierarchyNode {
        let ids: BTreeSet<TensorId> = net.tensors.keys().copied().collect();
        HierarchyNode {
            node_id: 0,
            tensor_ids: ids,
            children: None,
            interface_log2dim: 0.0,
            leaf_plan: Some(greedy_leaf_plan(net)),
        }
    }

    #[test]
    fn single_leaf_cost_is_greedy_cost() {
        let net = matrix_pair();
        let ledger = hierarchy_cost(&single_leaf(&net), &net).unwrap();
        assert_eq!(ledger.exact_ops, Some(BigUint::from(16u32)));
        assert!((ledger.log2_scalar_ops - 4.0).abs() < 1e-9);
    }

    #[test]
    fn two_leaf_hierarchy_adds_interface_term() {
        let net = matrix_pair();
        let left = HierarchyNode {
            node_id: 1,
            tensor_ids: BTreeSet::from([0]),
            children: None,
            interface_log2dim: 1.0,
            leaf_plan: Some(vec![]),
        };
        let right = HierarchyNode {
            node_id: 2,
            tensor_ids: BTreeSet::from([1]),
            children: None,
            interface_log2dim: 1.0,
            leaf_plan: Some(vec![]),
        };
        let root = HierarchyNode {
            node_id: 0,
            tensor_ids: BTreeSet::from([0, 1]),
            children: Some(Box::new((left, right))),
            interface_log2dim: 0.0,
            leaf_plan: None,
        };
        let ledger = hierarchy_cost(&root, &net).unwrap();
        // Leaves cost nothing (single tensors); the root pair costs 16.
        assert_eq!(ledger.exact_ops, Some(BigUint::from(16u32)));
        assert_eq!(ledger.root_effective_rank, 2);
    }

    #[test]
    fn ledger_sums_per_node_contributions() {
        let net = matrix_pair();
        let ledger = hierarchy_cost(&single_leaf(&net), &net).unwrap();
        let total: BigUint = ledger
            .per_node
            .iter()
            .map(|n| n.exact_ops.clone().unwrap())
            .sum();
        assert_eq!(Some(total), ledger.exact_ops);
        let exact = ledger.exact_ops.unwrap();
        assert!((log2_biguint(&exact) - ledger.log2_scalar_ops).abs() < 1e-9);
    }

    #[test]
    fn execute_scalars() {
        let mut net = TensorNetwork::new();
        for (i, v) in [2.0, 3.0, 5.0].into_iter().enumerate() {
            net.add_tensor(Tensor { id: i, bonds: vec![], data: Some(vec![c(v)]) });
        }
        let value = execute_plan(&net, &single_leaf(&net)).unwrap();
        assert!((value.re - 30.0).abs() < 1e-12);
    }

    fn random_grid_network(rng: &mut ChaCha8Rng, rows: usize, cols: usize, dim: usize) -> TensorNetwork {
        let mut net = TensorNetwork::new();
        let mut bond_id = 0usize;
        let tid = |r: usize, cc: usize| r * cols + cc;
        let mut tensor_bonds: BTreeMap<TensorId, Vec<BondId>> = BTreeMap::new();
        for r in 0..rows {
            for cc in 0..cols {
                tensor_bonds.entry(tid(r, cc)).or_default();
            }
        }
        for r in 0..rows {
            for cc in 0..cols {
                if cc + 1 < cols {
                    net.add_bond(Bond { id: bond_id, dim, endpoints: vec![tid(r, cc), tid(r, cc + 1)] });
                    tensor_bonds.get_mut(&tid(r, cc)).unwrap().push(bond_id);
                    tensor_bonds.get_mut(&tid(r, cc + 1)).unwrap().push(bond_id);
                    bond_id += 1;
                }
                if r + 1 < rows {
                    net.add_bond(Bond { id: bond_id, dim, endpoints: vec![tid(r, cc), tid(r + 1, cc)] });
                    tensor_bonds.get_mut(&tid(r, cc)).unwrap().push(bond_id);
                    tensor_bonds.get_mut(&tid(r + 1, cc)).unwrap().push(bond_id);
                    bond_id += 1;
                }
            }
        }
        for (id, bonds) in tensor_bonds {
            let len: usize = bonds.iter().map(|b| net.bonds[b].dim).product();
            let data: Vec<Complex64> = (0..len)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            net.add_tensor(Tensor { id, bonds, data: Some(data) });
        }
        net
    }

    /// Brute-force full contraction: sum over every bond assignment.
    fn brute_force_contract(net: &TensorNetwork) -> Complex64 {
        let bond_ids: Vec<BondId> = net.bonds.keys().copied().collect();
        let dims: Vec<usize> = bond_ids.iter().map(|b| net.bonds[b].dim).collect();
        let total: usize = dims.iter().product();
        let mut sum = Complex64::zero();
        let mut digits = vec![0usize; bond_ids.len()];
        for step in 0..total {
            let mut term = Complex64::new(1.0, 0.0);
            for t in net.tensors.values() {
                let mut off = 0usize;
                for &b in &t.bonds {
                    let pos = bond_ids.iter().position(|&x| x == b).unwrap();
                    off = off * net.bonds[&b].dim + digits[pos];
                }
                term *= t.data.as_ref().unwrap()[off];
            }
            sum += term;
            if step + 1 < total {
                let mut i = bond_ids.len();
                loop {
                    i -= 1;
                    if digits[i] + 1 < dims[i] {
                        digits[i] += 1;
                        break;
                    }
                    digits[i] = 0;
                }
            }
        }
        sum
    }

    #[test]
    fn grid_execution_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = random_grid_network(&mut rng, 3, 3, 2);
        net.validate().unwrap();
        let value = execute_plan(&net, &single_leaf(&net)).unwrap();
        let oracle = brute_force_contract(&net);
        assert!((value - oracle).norm() < 1e-10 * oracle.norm().max(1.0));
    }

    #[test]
    fn execution_respects_hierarchy_ops_accounting() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let net = random_grid_network(&mut rng, 2, 3, 2);
        let leaf = single_leaf(&net);
        let ledger = hierarchy_cost(&leaf, &net).unwrap();
        let (_, actual) = execute_plan_with_cap(&net, &leaf, DEFAULT_MEMORY_CAP).unwrap();
        assert!(actual <= ledger.exact_ops.unwrap());
    }

    #[test]
    fn memory_cap_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let net = random_grid_network(&mut rng, 3, 3, 2);
        let err = execute_plan_with_cap(&net, &single_leaf(&net), 4).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn a2_closed_form() {
        // a_2 = 2 / (2 - sqrt(3)) = 4 + 2 sqrt(3)
        let a2 = a_d(2).unwrap();
        assert!((a2 - (4.0 + 2.0 * 3.0f64.sqrt())).abs() < 1e-12);
        let a2p = a2_prime();
        assert!((a2p - 5.3705).abs() < 5e-4);
        assert!(a2p < a2);
    }

    #[test]
    fn network_example_value() {
        // d=2, k=3, M=16, n=100.
        let got = network_bound(100, 16, 3, 2).unwrap();
        let a2 = 4.0 + 2.0 * 3.0f64.sqrt();
        let want = 1.0 + 100.0f64.log2() / (4.0f64 / 3.0).log2() + 4.0 * a2 * 3.0f64.sqrt() * 10.0;
        assert!((got - want).abs() < 1e-9);
        assert!((got - 534.1).abs() < 0.5);
    }

    #[test]
    fn network_monotone() {
        let base = network_bound(100, 16, 3, 2).unwrap();
        assert!(network_bound(200, 16, 3, 2).unwrap() >= base);
        assert!(network_bound(100, 32, 3, 2).unwrap() >= base);
        assert!(network_bound(100, 16, 6, 2).unwrap() >= base);
    }

    #[test]
    fn network_rejects_unknown_dimension() {
        assert!(matches!(network_bound(100, 16, 3, 7), Err(Error::Parameter(_))));
        assert!(network_bound_with(100, 16, 3, 7, Some(3.0)).is_ok());
    }
}
