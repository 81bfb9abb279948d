//! Search for a Braess-graph subdivision inside a two-terminal network and
//! the transplantation of the Braess hurt instance onto it: image arcs
//! carry the original functions on their first segment, every other image
//! edge is free, and all remaining edges get a constant latency high
//! enough that no user ever touches them.

use super::{
    assert_blocked_edges_flowless, finish_certificate, BraessParams, ConstructError,
    ConstructionTrace, HurtCertificate,
};
use crate::costfn::{CostFn, EdgeFunctions};
use crate::equilibrium::{Commodity, DemandClass, Instance, SolveOptions};
use crate::netgraph::{
    commodity_subnetwork, sp_decompose, CommoditySpec, EdgePath, Network, SpDecomposition,
    VertexId,
};
use std::collections::BTreeSet;

/// The five arcs of the Braess pattern, in the construction's canonical
/// order.
pub const BRAESS_ARCS: [&str; 5] = ["su", "ut", "uv", "sv", "vt"];

/// A subdivision embedding: branch vertices for the four pattern vertices,
/// one internally-disjoint path per pattern arc, and (possibly empty)
/// connection paths tying the network terminals to the pattern terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct BraessEmbedding {
    /// Images of the pattern vertices s, u, v, t in that order.
    pub branch: [VertexId; 4],
    /// Arc label (from `BRAESS_ARCS`) to image path.
    pub arcs: Vec<(&'static str, EdgePath)>,
    pub conn_source: EdgePath,
    pub conn_sink: EdgePath,
}

/// Paths from `a` to `b` whose internal vertices avoid `forbidden`, in
/// lexicographic order, truncated at `limit`.
fn paths_avoiding(
    net: &Network,
    a: &str,
    b: &str,
    forbidden: &BTreeSet<VertexId>,
    limit: usize,
) -> Vec<EdgePath> {
    let adj = net.out_adjacency();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    let mut visited: BTreeSet<String> = BTreeSet::new();
    visited.insert(a.to_string());
    fn dfs(
        adj: &std::collections::BTreeMap<&VertexId, Vec<&crate::netgraph::Edge>>,
        at: &str,
        b: &str,
        forbidden: &BTreeSet<VertexId>,
        limit: usize,
        stack: &mut Vec<String>,
        visited: &mut BTreeSet<String>,
        out: &mut Vec<EdgePath>,
    ) {
        if out.len() >= limit {
            return;
        }
        if at == b {
            out.push(stack.clone());
            return;
        }
        if let Some(edges) = adj.get(&at.to_string()) {
            for e in edges {
                if visited.contains(&e.head) {
                    continue;
                }
                if e.head != b && forbidden.contains(&e.head) {
                    continue;
                }
                visited.insert(e.head.clone());
                stack.push(e.id.clone());
                dfs(adj, &e.head, b, forbidden, limit, stack, visited, out);
                stack.pop();
                visited.remove(&e.head);
            }
        }
    }
    dfs(&adj, a, b, forbidden, limit, &mut stack, &mut visited, &mut out);
    out
}

fn path_internal_vertices(net: &Network, path: &EdgePath) -> BTreeSet<VertexId> {
    let mut out = BTreeSet::new();
    for (i, id) in path.iter().enumerate() {
        let e = net.edge(id).expect("path edge exists");
        if i > 0 {
            out.insert(e.tail.clone());
        }
    }
    out
}

/// Finds a Braess subdivision in a network that equals its own commodity
/// subnetwork for `(s, t)`: four distinct branch vertices, five image
/// paths that share no internal vertices with each other or the branch
/// set, and connection paths from `s` and to `t` disjoint from the rest.
/// Returns `NotFound` when the network is series-parallel.
pub fn find_braess_minor(
    net: &Network,
    s: &str,
    t: &str,
    cap: usize,
) -> Result<BraessEmbedding, ConstructError> {
    if matches!(sp_decompose(net, s, t), SpDecomposition::Tree(_)) {
        return Err(ConstructError::NotFound);
    }
    let per_arc_limit = cap.clamp(16, 4000);
    let vertices: Vec<VertexId> = net.vertices().cloned().collect();
    let out_deg = |v: &str| net.edges().iter().filter(|e| e.tail == v).count();
    let in_deg = |v: &str| net.edges().iter().filter(|e| e.head == v).count();

    for sp in &vertices {
        if out_deg(sp) < 2 {
            continue;
        }
        for up in &vertices {
            if up == sp || out_deg(up) < 2 {
                continue;
            }
            for vp in &vertices {
                if vp == sp || vp == up || in_deg(vp) < 2 {
                    continue;
                }
                for tp in &vertices {
                    if tp == sp || tp == up || tp == vp || in_deg(tp) < 2 {
                        continue;
                    }
                    let branch = [sp.clone(), up.clone(), vp.clone(), tp.clone()];
                    if let Some(emb) = try_quadruple(net, s, t, &branch, per_arc_limit) {
                        return Ok(emb);
                    }
                }
            }
        }
    }
    Err(ConstructError::NotFound)
}

fn try_quadruple(
    net: &Network,
    s: &str,
    t: &str,
    branch: &[VertexId; 4],
    limit: usize,
) -> Option<BraessEmbedding> {
    let [sp, up, vp, tp] = branch.clone();
    // terminals may serve as branch vertices but never as arc interiors
    let mut base_forbidden: BTreeSet<VertexId> =
        branch.iter().cloned().collect();
    base_forbidden.insert(s.to_string());
    base_forbidden.insert(t.to_string());
    let arc_ends: Vec<(&'static str, VertexId, VertexId)> = vec![
        ("uv", up.clone(), vp.clone()),
        ("su", sp.clone(), up.clone()),
        ("vt", vp.clone(), tp.clone()),
        ("ut", up.clone(), tp.clone()),
        ("sv", sp.clone(), vp.clone()),
    ];
    let mut chosen: Vec<(&'static str, EdgePath)> = Vec::new();
    let mut used: BTreeSet<VertexId> = BTreeSet::new();
    if !assign_arcs(net, &arc_ends, 0, &base_forbidden, &mut used, &mut chosen, limit) {
        return None;
    }
    // connection paths: everything already placed is off limits inside them
    let mut pattern_vertices: BTreeSet<VertexId> = used.clone();
    pattern_vertices.extend(branch.iter().cloned());
    let conn_source = if s == sp {
        Vec::new()
    } else {
        if pattern_vertices.contains(s) {
            return None;
        }
        let mut forbidden = pattern_vertices.clone();
        forbidden.remove(&sp);
        forbidden.insert(t.to_string());
        paths_avoiding(net, s, &sp, &forbidden, 1).into_iter().next()?
    };
    let conn_sink = if t == tp {
        Vec::new()
    } else {
        if pattern_vertices.contains(t) {
            return None;
        }
        let mut forbidden = pattern_vertices.clone();
        forbidden.remove(&tp);
        forbidden.insert(s.to_string());
        forbidden.extend(path_internal_vertices(net, &conn_source));
        paths_avoiding(net, &tp, t, &forbidden, 1).into_iter().next()?
    };
    // restore canonical arc order
    let mut arcs = Vec::new();
    for label in BRAESS_ARCS {
        let path = chosen
            .iter()
            .find(|(l, _)| *l == label)
            .expect("all arcs assigned")
            .1
            .clone();
        arcs.push((label, path));
    }
    Some(BraessEmbedding {
        branch: branch.clone(),
        arcs,
        conn_source,
        conn_sink,
    })
}

fn assign_arcs(
    net: &Network,
    arc_ends: &[(&'static str, VertexId, VertexId)],
    idx: usize,
    base_forbidden: &BTreeSet<VertexId>,
    used: &mut BTreeSet<VertexId>,
    chosen: &mut Vec<(&'static str, EdgePath)>,
    limit: usize,
) -> bool {
    if idx == arc_ends.len() {
        return true;
    }
    let (label, a, b) = &arc_ends[idx];
    let mut forbidden = base_forbidden.clone();
    forbidden.extend(used.iter().cloned());
    for path in paths_avoiding(net, a, b, &forbidden, limit) {
        let internals = path_internal_vertices(net, &path);
        used.extend(internals.iter().cloned());
        chosen.push((label, path));
        if assign_arcs(net, arc_ends, idx + 1, base_forbidden, used, chosen, limit) {
            return true;
        }
        chosen.pop();
        for v in &internals {
            used.remove(v);
        }
    }
    false
}

/// Builds the Braess hurt instance on a non-series-parallel network by
/// pricing the found subdivision: the first edge of each image path takes
/// the pattern arc's functions, every other image or connection edge is
/// free, and all remaining edges cost a constant `M = 2 (3 + r_bar)`. The
/// certificate's gap equals the plain Braess construction's for the same
/// classes, and no blocked edge carries flow at either equilibrium.
pub fn embed_braess(
    net: &Network,
    s: &str,
    t: &str,
    classes: &[DemandClass],
) -> Result<HurtCertificate, ConstructError> {
    let params = BraessParams::derive(classes)?;
    let cert = embed_braess_with(
        net,
        s,
        t,
        params,
        Vec::new(),
        &SolveOptions::default(),
    )?;
    Ok(cert)
}

/// Embedding core shared with the non-block-matching constructor, which
/// appends extra zero-demand commodities.
pub(crate) fn embed_braess_with(
    net: &Network,
    s: &str,
    t: &str,
    params: BraessParams,
    extra_commodities: Vec<Commodity>,
    opts: &SolveOptions,
) -> Result<HurtCertificate, ConstructError> {
    let sub = commodity_subnetwork(net, &CommoditySpec::new(s, t), opts.path_cap)?;
    let embedding = find_braess_minor(&sub, s, t, opts.path_cap)?;
    let m = 2.0 * (3.0 + params.r_bar);
    let fns = embedded_functions(net, &embedding, &params, m)?;
    let mut commodities = vec![Commodity {
        spec: CommoditySpec::new(s, t),
        classes: params.classes.clone(),
    }];
    commodities.extend(extra_commodities);
    let instance = Instance::new(net.clone(), fns, commodities)?;
    let trace = ConstructionTrace {
        kind: "embed-braess".into(),
        r0: Some(params.r0),
        d0: Some(params.d0),
        r_bar: Some(params.r_bar),
        demand_scale: params.scale,
        m_const: Some(m),
        notes: vec![format!(
            "pattern vertices {:?}; arc images {:?}",
            embedding.branch, embedding.arcs
        )],
        ..Default::default()
    };
    let cert = finish_certificate(
        instance,
        Some(params.analytic_c_ht),
        Some(params.analytic_c_hm),
        trace,
        opts,
    )?;
    assert_blocked_edges_flowless(&cert, m)?;
    let base_gap = params.analytic_gap();
    if (cert.solved_gap() - base_gap).abs() > 1e-4 {
        return Err(ConstructError::VerificationFailed(format!(
            "embedded gap {} deviates from the base construction's {}",
            cert.solved_gap(),
            base_gap
        )));
    }
    Ok(cert)
}

fn embedded_functions(
    net: &Network,
    embedding: &BraessEmbedding,
    params: &BraessParams,
    m: f64,
) -> Result<EdgeFunctions, ConstructError> {
    let h = params.h()?;
    let side = CostFn::constant(params.side_const());
    let arc_fns = |label: &str| -> (CostFn, CostFn) {
        match label {
            "su" | "vt" => (h.clone(), CostFn::zero()),
            "ut" | "sv" => (side.clone(), CostFn::zero()),
            "uv" => (CostFn::constant(1.0), CostFn::constant(1.0)),
            other => unreachable!("unknown arc {other}"),
        }
    };
    let mut fns = EdgeFunctions::new();
    for (label, path) in &embedding.arcs {
        let (lat, dev) = arc_fns(label);
        for (i, e) in path.iter().enumerate() {
            if i == 0 {
                fns.insert(e.clone(), lat.clone(), dev.clone());
            } else {
                fns.insert(e.clone(), CostFn::zero(), CostFn::zero());
            }
        }
    }
    for e in embedding
        .conn_source
        .iter()
        .chain(embedding.conn_sink.iter())
    {
        fns.insert(e.clone(), CostFn::zero(), CostFn::zero());
    }
    for e in net.edges() {
        if fns.get(&e.id).is_none() {
            fns.insert(e.id.clone(), CostFn::constant(m), CostFn::zero());
        }
    }
    Ok(fns)
}
