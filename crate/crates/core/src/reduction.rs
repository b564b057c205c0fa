//! Maximum independent set → UE/beam selection gadget.
//!
//! Each node of a subcubic graph becomes an AP–UE pair with RSS `n·N₀` on its
//! own link and `ε·n·N₀` of interference towards each neighbour's UE. With
//! `n` large and `ε` close to one, the subsets of pairs that maximize the sum
//! rate are exactly the maximum independent sets of the graph. Everything
//! here is brute force and meant for small graphs.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::instance::{Instance, Link, RssTensor, Selection};
use crate::{Error, Result};

/// Largest graph accepted by [`brute_force_mis`].
pub const MIS_MAX_NODES: usize = 24;
/// Largest graph accepted by [`verify_reduction`].
pub const VERIFY_MAX_NODES: usize = 20;

pub const DEFAULT_N: f64 = 1e6;
pub const DEFAULT_EPSILON: f64 = 0.999;

/// Simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(n_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n_nodes];
        for &(u, v) in edges {
            for x in [u, v] {
                if x >= n_nodes {
                    return Err(Error::OutOfRange { what: "node", index: x, bound: n_nodes });
                }
            }
            if u == v {
                return Err(Error::InvalidInstance(format!("self-loop at node {u}")));
            }
            if adj[u].contains(&v) {
                continue;
            }
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Self { adj })
    }

    /// Parses an edge list: one `u v` pair per line; a line with a single
    /// index just declares the node. Blank lines and `#` comments are skipped.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut n = 0;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            match nums[..] {
                [v] => n = n.max(v + 1),
                [u, v] => {
                    n = n.max(u.max(v) + 1);
                    edges.push((u, v));
                }
                _ => return Err(Error::Parse(format!("line {}: expected `u v`", lineno + 1))),
            }
        }
        Self::new(n, &edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.n_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn neighbor_masks(&self) -> Vec<u32> {
        self.adj
            .iter()
            .map(|l| l.iter().fold(0u32, |m, &v| m | 1 << v))
            .collect()
    }

    pub fn is_independent(&self, subset: &[usize]) -> bool {
        subset
            .iter()
            .enumerate()
            .all(|(i, &u)| subset[i + 1..].iter().all(|&v| !self.has_edge(u, v)))
    }
}

/// Graph plus the gadget's signal level `n` (in units of `N₀`) and
/// interference fraction `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gadget {
    pub graph: Graph,
    pub n: f64,
    pub epsilon: f64,
}

impl Gadget {
    pub fn new(graph: Graph, n: f64, epsilon: f64) -> Result<Self> {
        if graph.max_degree() > 3 {
            return Err(Error::InvalidInstance(format!(
                "gadget needs max degree <= 3, got {}",
                graph.max_degree()
            )));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParameter(format!("n must be positive, got {n}")));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be in (0, 1], got {epsilon}")));
        }
        Ok(Self { graph, n, epsilon })
    }

    pub fn with_defaults(graph: Graph) -> Result<Self> {
        Self::new(graph, DEFAULT_N, DEFAULT_EPSILON)
    }

    fn check_subset(&self, subset: &[usize]) -> Result<()> {
        let nv = self.graph.n_nodes();
        let mut seen = vec![false; nv];
        for &v in subset {
            if v >= nv {
                return Err(Error::OutOfRange { what: "node", index: v, bound: nv });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidParameter(format!("node {v} repeated in subset")));
            }
        }
        Ok(())
    }

    /// Sum rate (B = 1) when exactly the pairs in `subset` transmit.
    pub fn subset_sum_rate(&self, subset: &[usize]) -> Result<f64> {
        self.check_subset(subset)?;
        let mut on = vec![false; self.graph.n_nodes()];
        for &v in subset {
            on[v] = true;
        }
        Ok(subset
            .iter()
            .map(|&v| {
                let k = self.graph.neighbors(v).iter().filter(|&&u| on[u]).count();
                self.link_rate(k)
            })
            .sum())
    }

    /// Rate of one pair with `k` active neighbours.
    fn link_rate(&self, k: usize) -> f64 {
        (1.0 + self.n / (1.0 + k as f64 * self.epsilon * self.n)).log2()
    }

    fn mask_rate(&self, masks: &[u32], subset: u32) -> f64 {
        let mut total = 0.0;
        let mut rest = subset;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            total += self.link_rate((masks[v] & subset).count_ones() as usize);
        }
        total
    }

    /// For a non-independent subset, the lowest node of maximal in-subset
    /// degree whose removal strictly increases the sum rate. `None` if the
    /// subset is independent or no such node exists.
    pub fn drop_increment_check(&self, subset: &[usize]) -> Result<Option<usize>> {
        self.check_subset(subset)?;
        let deg = |v: usize| subset.iter().filter(|&&u| self.graph.has_edge(u, v)).count();
        let max_deg = subset.iter().map(|&v| deg(v)).max().unwrap_or(0);
        if max_deg == 0 {
            return Ok(None);
        }
        let base = self.subset_sum_rate(subset)?;
        let mut candidates: Vec<usize> = subset.iter().copied().filter(|&v| deg(v) == max_deg).collect();
        candidates.sort_unstable();
        for v in candidates {
            let rest: Vec<usize> = subset.iter().copied().filter(|&u| u != v).collect();
            if self.subset_sum_rate(&rest)? > base {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    /// Materializes the gadget: one AP, UE and beam per node, `N₀ = B = 1`,
    /// unit weights, own-link RSS `n`, RSS `ε·n` across edges, 0 elsewhere.
    /// The RSS threshold is `n`, so cross links interfere but cannot serve.
    pub fn to_instance(&self) -> Result<Instance> {
        let nv = self.graph.n_nodes();
        let rss = RssTensor::from_fn(nv, nv, 1, |_, u, a| {
            if u == a {
                self.n
            } else if self.graph.has_edge(u, a) {
                self.epsilon * self.n
            } else {
                0.0
            }
        })?;
        Instance::new(rss, vec![1.0; nv], 1.0, 1.0, self.n)
    }

    /// Selection in which each node of `subset` serves its own UE.
    pub fn subset_selection(&self, subset: &[usize]) -> Result<Selection> {
        self.check_subset(subset)?;
        let mut sel = Selection::empty(self.graph.n_nodes());
        for &v in subset {
            sel.set(v, Some(Link { beam: 0, ue: v }));
        }
        Ok(sel)
    }
}

fn check_fg_domain(m: u32, n: f64, eps: f64) -> Result<()> {
    if !(1..=3).contains(&m) || !(n >= 1.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "f/g need m in 1..=3, n >= 1, eps in (0,1); got m={m}, n={n}, eps={eps}"
        )));
    }
    Ok(())
}

/// Ratio by which a node's rate factor `1 + SINR` grows when one of its
/// `m` active neighbours is dropped.
pub fn f(m: u32, n: f64, eps: f64) -> Result<f64> {
    check_fg_domain(m, n, eps)?;
    let m = m as f64;
    Ok(g_unchecked(m, n, eps) * (((m - 1.0) * eps + 1.0) * n + 1.0) / ((m - 1.0) * eps * n + 1.0))
}

/// Inverse of the factor lost when a node with `m` active neighbours is
/// dropped: `(1 + SINR)⁻¹`.
pub fn g(m: u32, n: f64, eps: f64) -> Result<f64> {
    check_fg_domain(m, n, eps)?;
    Ok(g_unchecked(m as f64, n, eps))
}

fn g_unchecked(m: f64, n: f64, eps: f64) -> f64 {
    (m * eps * n + 1.0) / ((m * eps + 1.0) * n + 1.0)
}

/// Size of a maximum independent set and all of them (as sorted node lists,
/// in lexicographic order).
pub fn brute_force_mis(graph: &Graph) -> Result<(usize, Vec<Vec<usize>>)> {
    let nv = graph.n_nodes();
    if nv > MIS_MAX_NODES {
        return Err(Error::CapExceeded { what: "graph nodes", size: nv as u128, cap: MIS_MAX_NODES as u128 });
    }
    let masks = graph.neighbor_masks();
    let mut best = 0usize;
    let mut found: Vec<u32> = Vec::new();
    // Branch on nodes in order; `allowed` holds the nodes still addable.
    fn rec(v: usize, nv: usize, chosen: u32, allowed: u32, masks: &[u32], best: &mut usize, found: &mut Vec<u32>) {
        let size = chosen.count_ones() as usize;
        let remaining = (allowed >> v).count_ones() as usize;
        if size + remaining < *best {
            return;
        }
        if v == nv {
            if size > *best {
                *best = size;
                found.clear();
            }
            found.push(chosen);
            return;
        }
        if allowed >> v & 1 == 1 {
            rec(v + 1, nv, chosen | 1 << v, allowed & !masks[v] & !(1 << v), masks, best, found);
        }
        rec(v + 1, nv, chosen, allowed & !(1 << v), masks, best, found);
    }
    let all = if nv == 32 { u32::MAX } else { (1u32 << nv) - 1 };
    rec(0, nv, 0, all, &masks, &mut best, &mut found);
    let mut sets: Vec<Vec<usize>> = found.into_iter().map(|m| mask_to_nodes(m, nv)).collect();
    sets.sort();
    Ok((best, sets))
}

fn mask_to_nodes(mask: u32, nv: usize) -> Vec<usize> {
    (0..nv).filter(|v| mask >> v & 1 == 1).collect()
}

/// Outcome of checking one gadget by double enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCheck {
    pub holds: bool,
    pub mis_size: usize,
    pub best_rate: f64,
    /// Subsets attaining the best sum rate.
    pub argmax: Vec<Vec<usize>>,
    pub mis: Vec<Vec<usize>>,
}

/// Enumerates all subsets and compares the sum-rate maximizers with the
/// maximum independent sets.
pub fn check_reduction(gadget: &Gadget) -> Result<ReductionCheck> {
    let nv = gadget.graph.n_nodes();
    if nv > VERIFY_MAX_NODES {
        return Err(Error::CapExceeded { what: "graph nodes", size: nv as u128, cap: VERIFY_MAX_NODES as u128 });
    }
    let (mis_size, mis) = brute_force_mis(&gadget.graph)?;
    let masks = gadget.graph.neighbor_masks();
    let mut best = f64::NEG_INFINITY;
    let mut argmax: Vec<u32> = Vec::new();
    for subset in 0..(1u32 << nv) {
        let r = gadget.mask_rate(&masks, subset);
        // Independent sets of equal size evaluate to bit-identical sums, so
        // exact ties are the only ties that matter.
        if r > best {
            best = r;
            argmax.clear();
        }
        if r == best {
            argmax.push(subset);
        }
    }
    let mut argmax: Vec<Vec<usize>> = argmax.into_iter().map(|m| mask_to_nodes(m, nv)).collect();
    argmax.sort();
    Ok(ReductionCheck {
        holds: argmax == mis,
        mis_size,
        best_rate: best,
        argmax,
        mis,
    })
}

/// `true` iff the sum-rate maximizing subsets are exactly the maximum
/// independent sets.
pub fn verify_reduction(gadget: &Gadget) -> Result<bool> {
    Ok(check_reduction(gadget)?.holds)
}

/// Every labeled connected graph on `n_nodes` nodes with max degree ≤ 3
/// (so every isomorphism class, many times over).
pub fn connected_subcubic_graphs(n_nodes: usize) -> Result<Vec<Graph>> {
    if n_nodes > 7 {
        return Err(Error::CapExceeded { what: "graph nodes", size: n_nodes as u128, cap: 7 });
    }
    let pairs: Vec<(usize, usize)> = (0..n_nodes)
        .flat_map(|u| (u + 1..n_nodes).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    let mut deg = vec![0usize; n_nodes];
    let mut chosen = Vec::new();
    // Depth-first over edge subsets, pruning on the degree bound.
    fn rec(
        i: usize,
        pairs: &[(usize, usize)],
        n: usize,
        deg: &mut [usize],
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Graph>,
    ) {
        if i == pairs.len() {
            // Constructed from distinct in-range pairs, so `new` cannot fail.
            let g = Graph::new(n, chosen).expect("valid edges");
            if g.is_connected() {
                out.push(g);
            }
            return;
        }
        rec(i + 1, pairs, n, deg, chosen, out);
        let (u, v) = pairs[i];
        if deg[u] < 3 && deg[v] < 3 {
            deg[u] += 1;
            deg[v] += 1;
            chosen.push((u, v));
            rec(i + 1, pairs, n, deg, chosen, out);
            chosen.pop();
            deg[u] -= 1;
            deg[v] -= 1;
        }
    }
    rec(0, &pairs, n_nodes, &mut deg, &mut chosen, &mut out);
    Ok(out)
}

/// Random graph with max degree ≤ 3: candidate edges in random order, each
/// kept with probability `p` if both endpoints still have spare degree.
pub fn random_subcubic_graph<R: Rng + ?Sized>(n_nodes: usize, p: f64, rng: &mut R) -> Graph {
    let mut pairs: Vec<(usize, usize)> = (0..n_nodes)
        .flat_map(|u| (u + 1..n_nodes).map(move |v| (u, v)))
        .collect();
    pairs.shuffle(rng);
    let mut deg = vec![0usize; n_nodes];
    let mut edges = Vec::new();
    for (u, v) in pairs {
        if deg[u] < 3 && deg[v] < 3 && rng.random::<f64>() < p {
            deg[u] += 1;
            deg[v] += 1;
            edges.push((u, v));
        }
    }
    Graph::new(n_nodes, &edges).expect("valid edges")
}

/// Checks a batch of gadgets in parallel; returns the indices that fail.
pub fn failing_graphs(graphs: &[Graph], n: f64, epsilon: f64) -> Result<Vec<usize>> {
    let results: Vec<Result<bool>> = graphs
        .par_iter()
        .map(|g| verify_reduction(&Gadget::new(g.clone(), n, epsilon)?))
        .collect();
    let mut bad = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        if !r? {
            bad.push(i);
        }
    }
    Ok(bad)
}
