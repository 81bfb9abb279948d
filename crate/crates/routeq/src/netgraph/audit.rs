//! Exhaustive structural checks of a network against the block structure
//! of one commodity's subnetwork. On a consistent input all three checks
//! hold by the structure of series-parallel subnetworks, so any violation
//! flags a malformed fixture (typically a stray edge that changed the
//! subnetwork after its decomposition was fixed).

use super::{
    block_representation, commodity_subnetwork, enumerate_simple_paths, sp_decompose,
    BlockRepresentation, CommoditySpec, EdgeId, EdgePath, NetError, Network, SpDecomposition,
    VertexId,
};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuditViolation {
    /// An edge of the network runs from an internal vertex of an earlier
    /// block to an internal vertex of a later block.
    CrossBlockEdge {
        edge: EdgeId,
        from_block: usize,
        to_block: usize,
    },
    /// An edge between two subnetwork vertices such that no simple
    /// source-sink path of the subnetwork visits both endpoints.
    EdgeOffAllPaths { edge: EdgeId },
    /// A simple path between a block's terminals that leaves the block.
    PathEscapesBlock { block: usize, path: EdgePath },
}

/// Audits `net` against the block representation of the commodity
/// subnetwork `G_c`. If `G_c` itself fails to decompose, retries after
/// removing a single edge (in edge-id order); the offending edge then
/// surfaces in the violation list. Well-formed inputs return an empty list.
pub fn structural_audit(
    net: &Network,
    c: &CommoditySpec,
    cap: usize,
) -> Result<Vec<AuditViolation>, NetError> {
    let gc = commodity_subnetwork(net, c, cap)?;
    let (gc, rep) = match sp_decompose(&gc, &c.source, &c.sink) {
        SpDecomposition::Tree(tree) => (gc, block_representation(&tree)),
        SpDecomposition::NotSp { .. } => repair_by_single_edge(net, c, cap)?,
    };
    audit_against(net, c, &gc, &rep, cap)
}

fn repair_by_single_edge(
    net: &Network,
    c: &CommoditySpec,
    cap: usize,
) -> Result<(Network, BlockRepresentation), NetError> {
    // among all single-edge removals that restore a series-parallel
    // subnetwork, keep the one losing the fewest edges: removing the
    // genuinely stray edge leaves everything else intact, while removing a
    // load-bearing edge drags a whole branch out of the subnetwork
    let mut best: Option<(Network, BlockRepresentation)> = None;
    for e in net.edges() {
        let net2 = net.without_edge(&e.id);
        if !net2.has_vertex(&c.source) || !net2.has_vertex(&c.sink) {
            continue;
        }
        let gc2 = match commodity_subnetwork(&net2, c, cap) {
            Ok(g) => g,
            Err(NetError::EmptySubnetwork { .. }) => continue,
            Err(err) => return Err(err),
        };
        if let SpDecomposition::Tree(tree) = sp_decompose(&gc2, &c.source, &c.sink) {
            if best
                .as_ref()
                .map(|(g, _)| gc2.edge_count() > g.edge_count())
                .unwrap_or(true)
            {
                best = Some((gc2, block_representation(&tree)));
            }
        }
    }
    best.ok_or(NetError::NotSeriesParallel {
        from: c.source.clone(),
        to: c.sink.clone(),
    })
}

/// The three checks, each by exhaustive enumeration over `net`.
pub fn audit_against(
    net: &Network,
    c: &CommoditySpec,
    gc: &Network,
    rep: &BlockRepresentation,
    cap: usize,
) -> Result<Vec<AuditViolation>, NetError> {
    let mut violations = Vec::new();

    // (a) no edge from an internal vertex of an earlier block to an
    // internal vertex of a later block
    let mut internal_of: BTreeMap<&VertexId, usize> = BTreeMap::new();
    let internals: Vec<BTreeSet<VertexId>> =
        rep.blocks.iter().map(|b| b.internal_vertices()).collect();
    for (i, vs) in internals.iter().enumerate() {
        for v in vs {
            internal_of.insert(v, i);
        }
    }
    let internal_of: BTreeMap<VertexId, usize> = internal_of
        .into_iter()
        .map(|(k, v)| (k.clone(), v))
        .collect();
    for e in net.edges() {
        if let (Some(&i), Some(&j)) = (internal_of.get(&e.tail), internal_of.get(&e.head)) {
            if i < j {
                violations.push(AuditViolation::CrossBlockEdge {
                    edge: e.id.clone(),
                    from_block: i,
                    to_block: j,
                });
            }
        }
    }

    // (b) every edge between two subnetwork vertices lies on some simple
    // source-sink path of the subnetwork containing both endpoints
    let gc_paths = enumerate_simple_paths(gc, &c.source, &c.sink, cap)?;
    let gc_path_vertices: Vec<BTreeSet<&VertexId>> = gc_paths
        .iter()
        .map(|p| path_vertices(gc, p))
        .collect();
    for e in net.edges() {
        if !gc.has_vertex(&e.tail) || !gc.has_vertex(&e.head) {
            continue;
        }
        let covered = gc_path_vertices
            .iter()
            .any(|vs| vs.contains(&e.tail) && vs.contains(&e.head));
        if !covered {
            violations.push(AuditViolation::EdgeOffAllPaths { edge: e.id.clone() });
        }
    }

    // (c) every simple separator-to-separator path of the full network
    // stays inside the corresponding block
    for (k, block) in rep.blocks.iter().enumerate() {
        let block_edges = block.edge_ids();
        let paths = enumerate_simple_paths(net, block.source(), block.sink(), cap)?;
        for p in paths {
            if !p.iter().all(|e| block_edges.contains(e)) {
                violations.push(AuditViolation::PathEscapesBlock {
                    block: k,
                    path: p,
                });
            }
        }
    }

    Ok(violations)
}

fn path_vertices<'a>(net: &'a Network, path: &EdgePath) -> BTreeSet<&'a VertexId> {
    let mut out = BTreeSet::new();
    for id in path {
        let e = net.edge(id).expect("path edges exist in network");
        out.insert(&e.tail);
        out.insert(&e.head);
    }
    out
}
