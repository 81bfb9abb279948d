//! Directed multigraph model, simple-path enumeration, commodity
//! subnetworks, series-parallel decomposition, block representations and
//! the structural checks built on top of them.

mod audit;
mod dominate;
mod sp;

pub use audit::{structural_audit, AuditViolation};
pub use dominate::find_dominating_path;
pub use sp::{
    block_representation, blocks_match, classify_network, dead_edges, sp_decompose, Block,
    BlockMatchOutcome, BlockRepresentation, Classification, SpDecomposition, SpTree,
};

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Opaque vertex identifier.
pub type VertexId = String;
/// Opaque edge identifier; unique within a network.
pub type EdgeId = String;
/// A path represented as the sequence of edge ids it traverses.
pub type EdgePath = Vec<EdgeId>;

#[derive(Debug, Error, PartialEq)]
pub enum NetError {
    #[error("duplicate edge id `{0}`")]
    DuplicateEdgeId(EdgeId),
    #[error("edge `{edge}` references unknown vertex `{vertex}`")]
    UnknownVertex { edge: EdgeId, vertex: VertexId },
    #[error("edge `{0}` is a self-loop")]
    SelfLoop(EdgeId),
    #[error("vertex `{0}` not in network")]
    VertexNotFound(VertexId),
    #[error("more than {cap} simple paths exist (cap exceeded)")]
    PathExplosion { cap: usize },
    #[error("no simple path connects `{from}` to `{to}`")]
    EmptySubnetwork { from: VertexId, to: VertexId },
    #[error("subnetwork for ({from}, {to}) is not series-parallel")]
    NotSeriesParallel { from: VertexId, to: VertexId },
    #[error("infeasible flow: {reason}")]
    InfeasibleFlow { reason: String },
}

/// A directed edge. Parallel edges between the same endpoints are allowed;
/// they are told apart by their ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
}

/// A directed multigraph with named vertices and identified edges.
///
/// Value type: two networks compare equal iff they have the same vertex set
/// and the same edge set. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    vertices: BTreeSet<VertexId>,
    edges: Vec<Edge>,
}

impl Network {
    /// Builds a network from an explicit vertex set and edge list,
    /// validating id uniqueness, endpoint existence and absence of
    /// self-loops. Edges are kept sorted by id.
    pub fn new<V, E, S>(vertices: V, edges: E) -> Result<Self, NetError>
    where
        V: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let vertices: BTreeSet<VertexId> = vertices.into_iter().map(Into::into).collect();
        let mut out: Vec<Edge> = Vec::new();
        let mut seen = BTreeSet::new();
        for (id, tail, head) in edges {
            let e = Edge {
                id: id.into(),
                tail: tail.into(),
                head: head.into(),
            };
            if !seen.insert(e.id.clone()) {
                return Err(NetError::DuplicateEdgeId(e.id));
            }
            if !vertices.contains(&e.tail) {
                return Err(NetError::UnknownVertex {
                    edge: e.id,
                    vertex: e.tail,
                });
            }
            if !vertices.contains(&e.head) {
                return Err(NetError::UnknownVertex {
                    edge: e.id,
                    vertex: e.head,
                });
            }
            if e.tail == e.head {
                return Err(NetError::SelfLoop(e.id));
            }
            out.push(e);
        }
        out.sort();
        Ok(Network {
            vertices,
            edges: out,
        })
    }

    /// Convenience constructor that infers the vertex set from the edges.
    pub fn from_edges<E, S>(edges: E) -> Result<Self, NetError>
    where
        E: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let edges: Vec<(String, String, String)> = edges
            .into_iter()
            .map(|(i, t, h)| (i.into(), t.into(), h.into()))
            .collect();
        let vertices: BTreeSet<String> = edges
            .iter()
            .flat_map(|(_, t, h)| [t.clone(), h.clone()])
            .collect();
        Network::new(vertices, edges)
    }

    pub fn vertices(&self) -> impl Iterator<Item = &VertexId> {
        self.vertices.iter()
    }

    pub fn has_vertex(&self, v: &str) -> bool {
        self.vertices.contains(v)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn edge_ids(&self) -> BTreeSet<EdgeId> {
        self.edges.iter().map(|e| e.id.clone()).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Out-adjacency keyed by tail vertex; edge lists come out sorted by
    /// edge id because `self.edges` is.
    pub fn out_adjacency(&self) -> BTreeMap<&VertexId, Vec<&Edge>> {
        let mut adj: BTreeMap<&VertexId, Vec<&Edge>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(&e.tail).or_default().push(e);
        }
        adj
    }

    /// The subnetwork induced by a set of edges (vertices restricted to
    /// the endpoints of the kept edges).
    pub fn edge_induced(&self, keep: &BTreeSet<EdgeId>) -> Network {
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.id))
            .cloned()
            .collect();
        let vertices: BTreeSet<VertexId> = edges
            .iter()
            .flat_map(|e| [e.tail.clone(), e.head.clone()])
            .collect();
        Network { vertices, edges }
    }

    /// Copy of the network without one edge, dropping vertices that become
    /// isolated.
    pub fn without_edge(&self, id: &str) -> Network {
        let keep: BTreeSet<EdgeId> = self
            .edges
            .iter()
            .filter(|e| e.id != id)
            .map(|e| e.id.clone())
            .collect();
        self.edge_induced(&keep)
    }
}

/// Origin-destination pair of one commodity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommoditySpec {
    pub source: VertexId,
    pub sink: VertexId,
}

impl CommoditySpec {
    pub fn new(source: impl Into<String>, sink: impl Into<String>) -> Self {
        CommoditySpec {
            source: source.into(),
            sink: sink.into(),
        }
    }

    pub fn validate(&self, net: &Network) -> Result<(), NetError> {
        if !net.has_vertex(&self.source) {
            return Err(NetError::VertexNotFound(self.source.clone()));
        }
        if !net.has_vertex(&self.sink) {
            return Err(NetError::VertexNotFound(self.sink.clone()));
        }
        if self.source == self.sink {
            return Err(NetError::SelfLoop(format!(
                "commodity {}->{}",
                self.source, self.sink
            )));
        }
        Ok(())
    }
}

/// All simple `s`-`t` paths as edge-id sequences, in lexicographic order of
/// the id sequence. Errors with `PathExplosion` once more than `cap` paths
/// have been found.
pub fn enumerate_simple_paths(
    net: &Network,
    s: &str,
    t: &str,
    cap: usize,
) -> Result<Vec<EdgePath>, NetError> {
    if !net.has_vertex(s) {
        return Err(NetError::VertexNotFound(s.to_string()));
    }
    if !net.has_vertex(t) {
        return Err(NetError::VertexNotFound(t.to_string()));
    }
    let adj = net.out_adjacency();
    let mut paths = Vec::new();
    let mut stack: Vec<EdgeId> = Vec::new();
    let mut visited: BTreeSet<&str> = BTreeSet::new();
    visited.insert(s);
    dfs_paths(&adj, s, t, cap, &mut stack, &mut visited, &mut paths)?;
    Ok(paths)
}

fn dfs_paths<'a>(
    adj: &BTreeMap<&'a VertexId, Vec<&'a Edge>>,
    at: &'a str,
    t: &str,
    cap: usize,
    stack: &mut Vec<EdgeId>,
    visited: &mut BTreeSet<&'a str>,
    paths: &mut Vec<EdgePath>,
) -> Result<(), NetError> {
    if at == t {
        if paths.len() >= cap {
            return Err(NetError::PathExplosion { cap });
        }
        paths.push(stack.clone());
        return Ok(());
    }
    if let Some(out) = adj.get(&at.to_string()) {
        // out-edges are sorted by id, so paths come out in lexicographic
        // order of their edge-id sequences
        for e in out {
            if visited.contains(e.head.as_str()) {
                continue;
            }
            visited.insert(&e.head);
            stack.push(e.id.clone());
            dfs_paths(adj, &e.head, t, cap, stack, visited, paths)?;
            stack.pop();
            visited.remove(e.head.as_str());
        }
    }
    Ok(())
}

/// The commodity subnetwork: exactly the vertices and edges that lie on at
/// least one simple source-sink path of the commodity.
pub fn commodity_subnetwork(
    net: &Network,
    c: &CommoditySpec,
    cap: usize,
) -> Result<Network, NetError> {
    c.validate(net)?;
    let paths = enumerate_simple_paths(net, &c.source, &c.sink, cap)?;
    if paths.is_empty() {
        return Err(NetError::EmptySubnetwork {
            from: c.source.clone(),
            to: c.sink.clone(),
        });
    }
    let keep: BTreeSet<EdgeId> = paths.into_iter().flatten().collect();
    Ok(net.edge_induced(&keep))
}

/// Shared fixture networks for the crate's test suites.
#[cfg(test)]
pub(crate) mod testnet {
    use super::{CommoditySpec, Network};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn braess() -> Network {
        Network::from_edges([
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ])
        .unwrap()
    }

    /// Two-commodity block-matching network: commodity 1 runs
    /// s1 -> A -> u -> B -> v -> C -> w -> D -> t1 where A and B are
    /// parallel two-edge paths and C and D are parallel edge bundles;
    /// commodity 2 runs s2 -> w, shares D up to t1, continues to u, shares
    /// B up to v, and exits to t2.
    pub(crate) fn fig1() -> (Network, Vec<CommoditySpec>) {
        let net = Network::from_edges([
            ("a1", "s1", "p"),
            ("a2", "p", "u"),
            ("a3", "s1", "q"),
            ("a4", "q", "u"),
            ("b1", "u", "m"),
            ("b2", "m", "v"),
            ("b3", "u", "n"),
            ("b4", "n", "v"),
            ("c1", "v", "w"),
            ("c2", "v", "w"),
            ("d1", "w", "t1"),
            ("d2", "w", "t1"),
            ("e0", "s2", "w"),
            ("f0", "t1", "u"),
            ("g0", "v", "t2"),
        ])
        .unwrap();
        let commodities = vec![
            CommoditySpec::new("s1", "t1"),
            CommoditySpec::new("s2", "t2"),
        ];
        (net, commodities)
    }

    /// Random series-parallel network with at most `max_edges` edges,
    /// generated by random series/parallel composition.
    pub(crate) fn random_sp_network(
        rng: &mut ChaCha8Rng,
        max_edges: usize,
    ) -> (Network, String, String) {
        let edges = rng.random_range(1..=max_edges);
        let mut next_v = 2usize;
        let mut next_e = 0usize;
        let mut out: Vec<(String, String, String)> = Vec::new();
        let s = "v0".to_string();
        let t = "v1".to_string();
        build(rng, edges, &s, &t, &mut next_v, &mut next_e, &mut out);
        (Network::from_edges(out).unwrap(), s, t)
    }

    fn build(
        rng: &mut ChaCha8Rng,
        budget: usize,
        s: &str,
        t: &str,
        next_v: &mut usize,
        next_e: &mut usize,
        out: &mut Vec<(String, String, String)>,
    ) {
        if budget <= 1 {
            let id = format!("e{:04}", *next_e);
            *next_e += 1;
            out.push((id, s.to_string(), t.to_string()));
            return;
        }
        let left = rng.random_range(1..budget);
        let right = budget - left;
        if rng.random_bool(0.5) {
            let mid = format!("v{}", *next_v);
            *next_v += 1;
            build(rng, left, s, &mid, next_v, next_e, out);
            build(rng, right, &mid, t, next_v, next_e, out);
        } else {
            build(rng, left, s, t, next_v, next_e, out);
            build(rng, right, s, t, next_v, next_e, out);
        }
    }
}
