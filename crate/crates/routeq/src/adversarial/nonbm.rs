//! Hurt construction for non-block-matching networks. Given two
//! commodities whose series-parallel subnetworks share part of a parallel
//! block, the three-path instance is transplanted: one commodity keeps a
//! choice between two branches of the block while the other is forced
//! across the bottleneck edge `e2`. Edge prices are constants except for
//! the anchored rising latency on `e2`; large constants `N` and `M` pin
//! both equilibria onto the chosen paths, so the two totals differ by
//! exactly the three-path instance's gap of 6.
//!
//! The bottleneck is located by scanning the forcing path for the first
//! vertex with a block edge that still has a vertex-fresh continuation to
//! the second terminal; where that vertex is the block's source, the
//! dead/live split of its outgoing block edges decides which branch hosts
//! the constant-deviation edge `e1`. Every candidate forcing path is
//! tried in order and the first construction whose equilibria verify is
//! returned.

use super::{
    assert_blocked_edges_flowless, embed::embed_braess_with, finish_certificate, BraessParams,
    ConstructError, ConstructionTrace, HurtCertificate,
};
use crate::costfn::{monotone_through, CostFn, EdgeFunctions};
use crate::equilibrium::{
    edge_flows, Commodity, DemandClass, Instance, SolveOptions,
};
use crate::netgraph::{
    block_representation, blocks_match, classify_network, commodity_subnetwork,
    enumerate_simple_paths, sp_decompose, Block, BlockMatchOutcome, Classification, CommoditySpec,
    EdgeId, EdgePath, Network, SpDecomposition, SpTree, VertexId,
};
use std::collections::BTreeSet;

const N_CONST: f64 = 24.0;

/// Demands of the transplanted three-path instance.
fn forcing_demands() -> (Vec<DemandClass>, Vec<DemandClass>) {
    (
        vec![DemandClass::new(0.0, 0.75), DemandClass::new(4.0, 0.25)],
        vec![DemandClass::new(1.0, 1.0)],
    )
}

/// Builds a verified hurt certificate on any network that classifies as
/// non-series-parallel or non-block-matching; conforming networks are
/// rejected, since no such instance exists on them.
pub fn non_block_matching_hurt(
    net: &Network,
    commodities: &[CommoditySpec],
    cap: usize,
) -> Result<HurtCertificate, ConstructError> {
    match classify_network(net, commodities, cap)? {
        Classification::SingleCommoditySp { .. } | Classification::BlockMatching { .. } => {
            Err(ConstructError::ClassifiedConforming)
        }
        Classification::NonSeriesParallel { commodity, .. } => {
            delegate_to_braess(net, commodities, commodity, cap)
        }
        Classification::NonBlockMatching {
            commodity_a,
            commodity_b,
            ..
        } => transplant(net, commodities, commodity_a, commodity_b, cap),
    }
}

/// A non-series-parallel subnetwork hosts the Braess construction
/// directly; all other commodities get zero demand.
fn delegate_to_braess(
    net: &Network,
    commodities: &[CommoditySpec],
    k: usize,
    _cap: usize,
) -> Result<HurtCertificate, ConstructError> {
    let (classes1, _) = forcing_demands();
    let params = BraessParams::derive(&classes1)?;
    let extras: Vec<Commodity> = commodities
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, spec)| Commodity {
            spec: spec.clone(),
            classes: vec![],
        })
        .collect();
    let spec = &commodities[k];
    let mut cert = embed_braess_with(
        net,
        &spec.source,
        &spec.sink,
        params,
        extras,
        &SolveOptions::default(),
    )?;
    cert.trace.kind = "non-block-matching".into();
    cert.trace.case = Some("non-series-parallel delegate".into());
    cert.trace.commodity_1 = Some(k);
    Ok(cert)
}

fn transplant(
    net: &Network,
    commodities: &[CommoditySpec],
    wit_a: usize,
    wit_b: usize,
    cap: usize,
) -> Result<HurtCertificate, ConstructError> {
    let mut failures: Vec<String> = Vec::new();
    for (c1, c2) in orientations(net, commodities, wit_a, wit_b, cap)? {
        let g1 = commodity_subnetwork(net, &commodities[c1], cap)?;
        let g2 = commodity_subnetwork(net, &commodities[c2], cap)?;
        let rep1 = match sp_decompose(&g1, &commodities[c1].source, &commodities[c1].sink) {
            SpDecomposition::Tree(t) => block_representation(&t),
            SpDecomposition::NotSp { .. } => continue,
        };
        let rep2 = match sp_decompose(&g2, &commodities[c2].source, &commodities[c2].sink) {
            SpDecomposition::Tree(t) => block_representation(&t),
            SpDecomposition::NotSp { .. } => continue,
        };
        // every mismatching pair where the first commodity's block has an
        // edge of its own is a candidate site
        let mut sites: Vec<&Block> = Vec::new();
        if let BlockMatchOutcome::Mismatch { left, right } = blocks_match(&rep1, &rep2) {
            let b = &rep1.blocks[left];
            let d = &rep2.blocks[right];
            if !b.edge_ids().difference(&d.edge_ids()).next().is_none() {
                sites.push(b);
            }
        }
        for b in &rep1.blocks {
            if sites.iter().any(|s| s.edge_ids() == b.edge_ids()) {
                continue;
            }
            let be = b.edge_ids();
            let partial = rep2.blocks.iter().any(|d| {
                let de = d.edge_ids();
                !be.is_disjoint(&de) && be != de && be.difference(&de).next().is_some()
            });
            if partial {
                sites.push(b);
            }
        }
        for block in sites {
            if matches!(block.tree, SpTree::Leaf { .. }) {
                continue;
            }
            match try_block_site(net, commodities, c1, c2, &g1, block, cap, &mut failures) {
                Ok(Some(cert)) => return Ok(cert),
                Ok(None) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Err(ConstructError::ConstructionFailed(format!(
        "no forcing path produced a verified instance; attempts: {failures:?}"
    )))
}

/// Both role assignments for the witness commodities, first commodity
/// carrying the parallel block.
fn orientations(
    net: &Network,
    commodities: &[CommoditySpec],
    a: usize,
    b: usize,
    cap: usize,
) -> Result<Vec<(usize, usize)>, ConstructError> {
    let mut out = Vec::new();
    for (c1, c2) in [(a, b), (b, a)] {
        if commodity_subnetwork(net, &commodities[c1], cap).is_ok() {
            out.push((c1, c2));
        }
    }
    Ok(out)
}

struct Pieces {
    e1: EdgeId,
    e2: EdgeId,
    p1: EdgePath,
    p2: EdgePath,
    p3: EdgePath,
    case: String,
}

#[allow(clippy::too_many_arguments)]
fn try_block_site(
    net: &Network,
    commodities: &[CommoditySpec],
    c1: usize,
    c2: usize,
    g1: &Network,
    block: &Block,
    cap: usize,
    failures: &mut Vec<String>,
) -> Result<Option<HurtCertificate>, ConstructError> {
    let spec2 = &commodities[c2];
    let block_edges = block.edge_ids();
    let candidates: Vec<EdgePath> =
        enumerate_simple_paths(net, &spec2.source, &spec2.sink, cap)?
            .into_iter()
            .filter(|p| p.iter().any(|e| block_edges.contains(e)))
            .collect();
    for p in candidates {
        let pieces = match derive_pieces(net, g1, block, spec2, &p, cap) {
            Some(x) => x,
            None => {
                failures.push(format!("no pieces for forcing path {p:?}"));
                continue;
            }
        };
        match build_and_verify(net, commodities, c1, c2, &pieces) {
            Ok(cert) => return Ok(Some(cert)),
            Err(e) => failures.push(format!("path {p:?} case {}: {e}", pieces.case)),
        }
    }
    Ok(None)
}

/// Vertex sequence of a path starting at `start`.
fn vertex_seq(net: &Network, start: &str, path: &EdgePath) -> Vec<VertexId> {
    let mut out = vec![start.to_string()];
    for id in path {
        out.push(net.edge(id).expect("path edge exists").head.clone());
    }
    out
}

/// Lexicographically first simple path from `from` to `to` avoiding
/// `forbidden` entirely (including as endpoints of intermediate hops).
fn fresh_path(
    net: &Network,
    from: &str,
    to: &str,
    forbidden: &BTreeSet<VertexId>,
) -> Option<EdgePath> {
    if forbidden.contains(from) {
        return None;
    }
    if from == to {
        return Some(Vec::new());
    }
    let adj = net.out_adjacency();
    let mut stack = Vec::new();
    let mut visited: BTreeSet<String> = forbidden.clone();
    visited.insert(from.to_string());
    fn dfs(
        adj: &std::collections::BTreeMap<&VertexId, Vec<&crate::netgraph::Edge>>,
        at: &str,
        to: &str,
        stack: &mut Vec<EdgeId>,
        visited: &mut BTreeSet<String>,
    ) -> bool {
        if at == to {
            return true;
        }
        if let Some(edges) = adj.get(&at.to_string()) {
            for e in edges {
                if visited.contains(&e.head) {
                    continue;
                }
                visited.insert(e.head.clone());
                stack.push(e.id.clone());
                if dfs(adj, &e.head, to, stack, visited) {
                    return true;
                }
                stack.pop();
                visited.remove(&e.head);
            }
        }
        false
    }
    if dfs(&adj, from, to, &mut stack, &mut visited) {
        Some(stack)
    } else {
        None
    }
}

/// Locates `e2`, `e1` and the three forcing paths for one candidate path
/// of the second commodity.
fn derive_pieces(
    net: &Network,
    g1: &Network,
    block: &Block,
    spec2: &CommoditySpec,
    p: &EdgePath,
    cap: usize,
) -> Option<Pieces> {
    let block_edges = block.edge_ids();
    let u = block.source().clone();
    let v = block.sink().clone();
    let pverts = vertex_seq(net, &spec2.source, p);
    let first_b = p.iter().position(|e| block_edges.contains(e))?;

    // scan the path prefix for the first vertex with a block edge that
    // still reaches the sink freshly; the path's own first block edge is a
    // fallback hit, so the scan always lands at or before it
    let mut hit: Option<(usize, EdgeId, EdgePath)> = None;
    'scan: for pos in 0..=first_b {
        let x = &pverts[pos];
        let visited: BTreeSet<VertexId> = pverts[0..=pos].iter().cloned().collect();
        for e in net.edges() {
            if e.tail != *x || !block_edges.contains(&e.id) {
                continue;
            }
            if visited.contains(&e.head) {
                continue;
            }
            if let Some(cont) = fresh_path(net, &e.head, &spec2.sink, &visited) {
                hit = Some((pos, e.id.clone(), cont));
                break 'scan;
            }
        }
    }
    let (px, mut e2, mut continuation) = hit?;
    let prefix: EdgePath = p[0..px].to_vec();
    let x = net.edge(&e2).expect("edge exists").tail.clone();

    let children = match &block.tree {
        SpTree::Parallel { children, .. } => children.clone(),
        _ => return None,
    };
    let child_of_edge = |edge: &EdgeId| -> Option<usize> {
        children.iter().position(|c| c.edge_ids().contains(edge))
    };
    let child_of_vertex = |w: &VertexId| -> Option<usize> {
        children.iter().position(|c| {
            let mut vs = c.vertex_ids();
            vs.remove(c.source());
            vs.remove(c.sink());
            vs.contains(w)
        })
    };
    let block_net = net.edge_induced(&block_edges);
    let block_paths = enumerate_simple_paths(&block_net, &u, &v, cap).ok()?;
    let path_with_edge = |edge: &EdgeId| -> Option<EdgePath> {
        block_paths.iter().find(|q| q.contains(edge)).cloned()
    };
    let path_in_child = |ci: usize| -> Option<EdgePath> {
        let ce = children[ci].edge_ids();
        block_paths
            .iter()
            .find(|q| q.iter().all(|e| ce.contains(e)))
            .cloned()
    };
    let path_with_vertex = |w: &VertexId| -> Option<EdgePath> {
        block_paths
            .iter()
            .find(|q| vertex_seq(net, &u, q).contains(w))
            .cloned()
    };

    let internals = block.internal_vertices();
    let (e1, in1, in3, case);
    if x != u {
        // bottleneck inside a branch: the sibling branch hosts e1
        let hc = child_of_edge(&e2)?;
        let other = (0..children.len()).find(|&i| i != hc)?;
        let inb1 = path_in_child(other)?;
        e1 = inb1.first()?.clone();
        in1 = inb1;
        in3 = path_with_edge(&e2)?;
        case = "branch-interior".to_string();
    } else {
        // bottleneck departs the block source: split its out-edges into
        // dead and live with respect to the visited prefix
        let visited: BTreeSet<VertexId> = pverts[0..=px].iter().cloned().collect();
        let mut dead: Vec<EdgeId> = Vec::new();
        let mut live: Vec<EdgeId> = Vec::new();
        for e in net.edges() {
            if e.tail != u || !block_edges.contains(&e.id) {
                continue;
            }
            let ok = !visited.contains(&e.head)
                && fresh_path(net, &e.head, &spec2.sink, &visited).is_some();
            if ok {
                live.push(e.id.clone());
            } else {
                dead.push(e.id.clone());
            }
        }
        if let Some(first_dead) = dead.first() {
            e1 = first_dead.clone();
            in1 = path_with_edge(&e1)?;
            in3 = path_with_edge(&e2)?;
            case = "source-dead-end".to_string();
        } else {
            let w = pverts[0..px]
                .iter()
                .find(|vx| internals.contains(*vx))
                .cloned();
            match w {
                Some(w) => {
                    let wc = child_of_vertex(&w)?;
                    if child_of_edge(&e2)? == wc {
                        // move the bottleneck to a live edge of a sibling
                        let alt = live
                            .iter()
                            .find(|e| child_of_edge(e).map(|c| c != wc).unwrap_or(false))?
                            .clone();
                        let visited: BTreeSet<VertexId> =
                            pverts[0..=px].iter().cloned().collect();
                        let head = net.edge(&alt).expect("edge exists").head.clone();
                        continuation = fresh_path(net, &head, &spec2.sink, &visited)?;
                        e2 = alt;
                    }
                    let inb1 = path_with_vertex(&w)?;
                    let vs = vertex_seq(net, &u, &inb1);
                    let wi = vs.iter().position(|vx| *vx == w)?;
                    e1 = inb1.get(wi)?.clone();
                    in1 = inb1;
                    in3 = path_with_edge(&e2)?;
                    case = "source-all-live".to_string();
                }
                None => {
                    // the path conforms to the block structure; fall back
                    // to the sibling-branch shape
                    let hc = child_of_edge(&e2)?;
                    let other = (0..children.len()).find(|&i| i != hc)?;
                    let inb1 = path_in_child(other)?;
                    e1 = inb1.first()?.clone();
                    in1 = inb1;
                    in3 = path_with_edge(&e2)?;
                    case = "conforming-path".to_string();
                }
            }
        }
    }

    // the first commodity's paths share their journey outside the block
    let spec1_source = g1_source(g1, block)?;
    let spec1_sink = g1_sink(g1, block)?;
    let prefix_su = enumerate_simple_paths(g1, &spec1_source, &u, cap)
        .ok()?
        .into_iter()
        .next()?;
    let suffix_vt = enumerate_simple_paths(g1, &v, &spec1_sink, cap)
        .ok()?
        .into_iter()
        .next()?;
    let join = |mid: &EdgePath| -> EdgePath {
        prefix_su
            .iter()
            .chain(mid.iter())
            .chain(suffix_vt.iter())
            .cloned()
            .collect()
    };
    let mut p2 = prefix;
    p2.push(e2.clone());
    p2.extend(continuation);
    Some(Pieces {
        e1,
        e2,
        p1: join(&in1),
        p3: join(&in3),
        p2,
        case,
    })
}

// the subnetwork's terminals: its unique source (no incoming edges) and
// sink (no outgoing edges)
fn g1_source(g1: &Network, _block: &Block) -> Option<VertexId> {
    g1.vertices()
        .find(|v| g1.edges().iter().all(|e| e.head != **v))
        .cloned()
}

fn g1_sink(g1: &Network, _block: &Block) -> Option<VertexId> {
    g1.vertices()
        .find(|v| g1.edges().iter().all(|e| e.tail != **v))
        .cloned()
}

fn build_and_verify(
    net: &Network,
    commodities: &[CommoditySpec],
    c1: usize,
    c2: usize,
    pieces: &Pieces,
) -> Result<HurtCertificate, ConstructError> {
    let m = 2.0 * net.vertex_count() as f64 * N_CONST;
    let p1_set: BTreeSet<&EdgeId> = pieces.p1.iter().collect();
    let p3_set: BTreeSet<&EdgeId> = pieces.p3.iter().collect();
    let p2_set: BTreeSet<&EdgeId> = pieces.p2.iter().collect();
    let mut forcing_vertices: BTreeSet<VertexId> = BTreeSet::new();
    for id in p1_set.iter().chain(p3_set.iter()) {
        let e = net.edge(id).expect("path edge exists");
        forcing_vertices.insert(e.tail.clone());
        forcing_vertices.insert(e.head.clone());
    }
    let ell2 = monotone_through(&[(1.0, 3.0), (1.25, 9.0), (2.0, N_CONST)], 1.0)?;
    let mut fns = EdgeFunctions::new();
    for e in net.edges() {
        let (lat, dev) = if e.id == pieces.e1 {
            (CostFn::constant(1.0), CostFn::constant(2.0))
        } else if e.id == pieces.e2 {
            (ell2.clone(), CostFn::zero())
        } else if p1_set.contains(&e.id) || p3_set.contains(&e.id) {
            (CostFn::zero(), CostFn::zero())
        } else if p2_set.contains(&e.id) && forcing_vertices.contains(&e.tail) {
            (CostFn::constant(N_CONST), CostFn::zero())
        } else if p2_set.contains(&e.id) {
            (CostFn::zero(), CostFn::zero())
        } else {
            (CostFn::constant(m), CostFn::zero())
        };
        fns.insert(e.id.clone(), lat, dev);
    }
    let (classes1, classes2) = forcing_demands();
    let commodities: Vec<Commodity> = commodities
        .iter()
        .enumerate()
        .map(|(k, spec)| Commodity {
            spec: spec.clone(),
            classes: if k == c1 {
                classes1.clone()
            } else if k == c2 {
                classes2.clone()
            } else {
                vec![]
            },
        })
        .collect();
    let instance = Instance::new(net.clone(), fns, commodities)?;
    let trace = ConstructionTrace {
        kind: "non-block-matching".into(),
        demand_scale: 1.0,
        p1: Some(pieces.p1.clone()),
        p2: Some(pieces.p2.clone()),
        p3: Some(pieces.p3.clone()),
        e1: Some(pieces.e1.clone()),
        e2: Some(pieces.e2.clone()),
        n_const: Some(N_CONST),
        m_const: Some(m),
        case: Some(pieces.case.clone()),
        commodity_1: Some(c1),
        commodity_2: Some(c2),
        ..Default::default()
    };
    let mut cert = finish_certificate(instance, None, None, trace, &SolveOptions::default())?;
    let gap = cert.solved_gap();
    if (gap - 6.0).abs() > 1e-3 {
        return Err(ConstructError::VerificationFailed(format!(
            "gap {gap} deviates from the transplanted instance's 6"
        )));
    }
    cert.analytic_gap = Some(6.0);
    assert_blocked_edges_flowless(&cert, m)?;
    assert_commodity_through_edge(&cert, c2, &cert.trace.e2.clone().unwrap())?;
    Ok(cert)
}

/// Every used path of the given commodity must contain the edge, at both
/// equilibria.
fn assert_commodity_through_edge(
    cert: &HurtCertificate,
    k: usize,
    edge: &EdgeId,
) -> Result<(), ConstructError> {
    for (label, inst, flow) in [
        (
            "heterogeneous",
            &cert.instance,
            &cert.solved.heterogeneous.flow,
        ),
        (
            "homogeneous",
            &cert.solved.homogenized,
            &cert.solved.homogeneous.flow,
        ),
    ] {
        edge_flows(inst, flow)?; // feasibility re-check
        for row in &flow.amounts[k] {
            for (p, &amount) in row.iter().enumerate() {
                if amount > 1e-9 && !flow.paths[k][p].contains(edge) {
                    return Err(ConstructError::VerificationFailed(format!(
                        "{label}: commodity {k} routes {amount} around `{edge}`"
                    )));
                }
            }
        }
    }
    Ok(())
}
