//! Series-parallel recognition by exhaustive series/parallel reduction,
//! the decomposition tree, block representations and block matching.

use super::{commodity_subnetwork, CommoditySpec, EdgeId, NetError, Network, VertexId};
use std::collections::{BTreeMap, BTreeSet};

/// Decomposition tree of a two-terminal series-parallel network.
///
/// Series children are never themselves `Series`, and parallel children are
/// never `Parallel` nodes with the same terminals; the smart constructors
/// flatten both, so a `Series` node always spells out the maximal chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpTree {
    Leaf {
        edge: EdgeId,
        source: VertexId,
        sink: VertexId,
    },
    Series {
        children: Vec<SpTree>,
        source: VertexId,
        sink: VertexId,
    },
    Parallel {
        children: Vec<SpTree>,
        source: VertexId,
        sink: VertexId,
    },
}

impl SpTree {
    pub fn leaf(edge: impl Into<String>, source: impl Into<String>, sink: impl Into<String>) -> Self {
        SpTree::Leaf {
            edge: edge.into(),
            source: source.into(),
            sink: sink.into(),
        }
    }

    /// Series composition; the sink of `first` must equal the source of
    /// `second`. Nested series nodes are flattened into one chain.
    pub fn series(first: SpTree, second: SpTree) -> Self {
        assert_eq!(first.sink(), second.source(), "series terminals must chain");
        let source = first.source().clone();
        let sink = second.sink().clone();
        let mut children = Vec::new();
        for part in [first, second] {
            match part {
                SpTree::Series { children: cs, .. } => children.extend(cs),
                other => children.push(other),
            }
        }
        SpTree::Series {
            children,
            source,
            sink,
        }
    }

    /// Parallel composition of two or more trees sharing both terminals.
    /// Parallel children with the same terminals are flattened and the
    /// result is ordered by smallest contained edge id.
    pub fn parallel(parts: Vec<SpTree>) -> Self {
        assert!(parts.len() >= 2, "parallel composition needs >=2 parts");
        let source = parts[0].source().clone();
        let sink = parts[0].sink().clone();
        let mut children = Vec::new();
        for part in parts {
            assert_eq!(*part.source(), source);
            assert_eq!(*part.sink(), sink);
            match part {
                SpTree::Parallel { children: cs, .. } => children.extend(cs),
                other => children.push(other),
            }
        }
        children.sort_by(|a, b| a.min_edge_id().cmp(b.min_edge_id()));
        SpTree::Parallel {
            children,
            source,
            sink,
        }
    }

    pub fn source(&self) -> &VertexId {
        match self {
            SpTree::Leaf { source, .. }
            | SpTree::Series { source, .. }
            | SpTree::Parallel { source, .. } => source,
        }
    }

    pub fn sink(&self) -> &VertexId {
        match self {
            SpTree::Leaf { sink, .. }
            | SpTree::Series { sink, .. }
            | SpTree::Parallel { sink, .. } => sink,
        }
    }

    /// Smallest edge id in the subtree; used as a canonical sort key.
    pub fn min_edge_id(&self) -> &EdgeId {
        match self {
            SpTree::Leaf { edge, .. } => edge,
            SpTree::Series { children, .. } | SpTree::Parallel { children, .. } => children
                .iter()
                .map(|c| c.min_edge_id())
                .min()
                .expect("composite nodes have children"),
        }
    }

    pub fn edge_ids(&self) -> BTreeSet<EdgeId> {
        let mut out = BTreeSet::new();
        self.collect_edges(&mut out);
        out
    }

    fn collect_edges(&self, out: &mut BTreeSet<EdgeId>) {
        match self {
            SpTree::Leaf { edge, .. } => {
                out.insert(edge.clone());
            }
            SpTree::Series { children, .. } | SpTree::Parallel { children, .. } => {
                for c in children {
                    c.collect_edges(out);
                }
            }
        }
    }

    pub fn vertex_ids(&self) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        self.collect_vertices(&mut out);
        out
    }

    fn collect_vertices(&self, out: &mut BTreeSet<VertexId>) {
        out.insert(self.source().clone());
        out.insert(self.sink().clone());
        if let SpTree::Series { children, .. } | SpTree::Parallel { children, .. } = self {
            for c in children {
                c.collect_vertices(out);
            }
        }
    }

    pub fn edge_count(&self) -> usize {
        match self {
            SpTree::Leaf { .. } => 1,
            SpTree::Series { children, .. } | SpTree::Parallel { children, .. } => {
                children.iter().map(|c| c.edge_count()).sum()
            }
        }
    }
}

/// Outcome of series-parallel recognition.
#[derive(Debug, Clone, PartialEq)]
pub enum SpDecomposition {
    Tree(SpTree),
    /// Reduction stalled: the returned network is the irreducible kernel,
    /// with one edge per stalled fragment (keeping the smallest original
    /// edge id of the fragment as its id).
    NotSp { kernel: Network },
}

/// Series-parallel recognition by exhaustive reduction: parallel bundles
/// between the same terminals merge into `Parallel` nodes, internal
/// vertices with exactly one incoming and one outgoing fragment contract
/// into `Series` nodes. The caller should pass a network that equals its
/// own commodity subnetwork for `(s, t)`.
pub fn sp_decompose(net: &Network, s: &str, t: &str) -> SpDecomposition {
    let mut frags: Vec<SpTree> = net
        .edges()
        .iter()
        .map(|e| SpTree::leaf(e.id.clone(), e.tail.clone(), e.head.clone()))
        .collect();

    loop {
        if parallel_step(&mut frags) {
            continue;
        }
        if series_step(&mut frags, s, t) {
            continue;
        }
        break;
    }

    if frags.len() == 1 && frags[0].source() == s && frags[0].sink() == t {
        return SpDecomposition::Tree(frags.pop().unwrap());
    }
    let kernel = kernel_network(&frags);
    SpDecomposition::NotSp { kernel }
}

fn parallel_step(frags: &mut Vec<SpTree>) -> bool {
    let mut groups: BTreeMap<(VertexId, VertexId), Vec<usize>> = BTreeMap::new();
    for (i, f) in frags.iter().enumerate() {
        groups
            .entry((f.source().clone(), f.sink().clone()))
            .or_default()
            .push(i);
    }
    for (_, idxs) in groups {
        if idxs.len() >= 2 {
            let mut parts = Vec::new();
            for &i in idxs.iter().rev() {
                parts.push(frags.remove(i));
            }
            frags.push(SpTree::parallel(parts));
            return true;
        }
    }
    false
}

fn series_step(frags: &mut Vec<SpTree>, s: &str, t: &str) -> bool {
    let mut incoming: BTreeMap<&VertexId, Vec<usize>> = BTreeMap::new();
    let mut outgoing: BTreeMap<&VertexId, Vec<usize>> = BTreeMap::new();
    for (i, f) in frags.iter().enumerate() {
        outgoing.entry(f.source()).or_default().push(i);
        incoming.entry(f.sink()).or_default().push(i);
    }
    let mut pick: Option<(usize, usize)> = None;
    for (w, ins) in &incoming {
        if w.as_str() == s || w.as_str() == t || ins.len() != 1 {
            continue;
        }
        match outgoing.get(*w) {
            Some(outs) if outs.len() == 1 => {
                let (i, o) = (ins[0], outs[0]);
                // a merge whose endpoints coincide would be a self-loop
                // fragment; such a vertex cannot be contracted
                if frags[i].source() == frags[o].sink() {
                    continue;
                }
                pick = Some((i, o));
                break;
            }
            _ => continue,
        }
    }
    if let Some((i, o)) = pick {
        let (first, second) = if i < o {
            let second = frags.remove(o);
            let first = frags.remove(i);
            (first, second)
        } else {
            let first = frags.remove(i);
            let second = frags.remove(o);
            (first, second)
        };
        frags.push(SpTree::series(first, second));
        return true;
    }
    false
}

fn kernel_network(frags: &[SpTree]) -> Network {
    let edges: Vec<(String, String, String)> = frags
        .iter()
        .map(|f| {
            (
                f.min_edge_id().clone(),
                f.source().clone(),
                f.sink().clone(),
            )
        })
        .collect();
    Network::from_edges(edges).expect("kernel fragments form a valid network")
}

/// One block of a block representation: a single edge or a parallel
/// composition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub tree: SpTree,
}

impl Block {
    pub fn source(&self) -> &VertexId {
        self.tree.source()
    }

    pub fn sink(&self) -> &VertexId {
        self.tree.sink()
    }

    pub fn edge_ids(&self) -> BTreeSet<EdgeId> {
        self.tree.edge_ids()
    }

    pub fn is_single_edge(&self) -> bool {
        matches!(self.tree, SpTree::Leaf { .. })
    }

    /// Vertices of the block other than its two terminals.
    pub fn internal_vertices(&self) -> BTreeSet<VertexId> {
        let mut vs = self.tree.vertex_ids();
        vs.remove(self.tree.source());
        vs.remove(self.tree.sink());
        vs
    }
}

/// The maximal top-level series chain of an SP network: each chain element
/// is one block, and consecutive blocks meet at a separator vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRepresentation {
    pub blocks: Vec<Block>,
    pub separators: Vec<VertexId>,
}

impl BlockRepresentation {
    pub fn source(&self) -> &VertexId {
        self.blocks.first().expect("at least one block").source()
    }

    pub fn sink(&self) -> &VertexId {
        self.blocks.last().expect("at least one block").sink()
    }
}

/// Splits an SP tree into its top-level series chain. A `Leaf` or
/// `Parallel` root is a single block with no separators.
pub fn block_representation(tree: &SpTree) -> BlockRepresentation {
    match tree {
        SpTree::Series { children, .. } => {
            let blocks: Vec<Block> = children.iter().map(|c| Block { tree: c.clone() }).collect();
            let separators = blocks[..blocks.len() - 1]
                .iter()
                .map(|b| b.sink().clone())
                .collect();
            BlockRepresentation { blocks, separators }
        }
        other => BlockRepresentation {
            blocks: vec![Block {
                tree: other.clone(),
            }],
            separators: Vec::new(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BlockMatchOutcome {
    Match,
    /// Indices of the first block pair (in block order, left representation
    /// outermost) whose edge sets overlap without being equal.
    Mismatch { left: usize, right: usize },
}

/// Two representations match iff every block pair has equal or disjoint
/// edge sets.
pub fn blocks_match(a: &BlockRepresentation, b: &BlockRepresentation) -> BlockMatchOutcome {
    for (i, ba) in a.blocks.iter().enumerate() {
        let ea = ba.edge_ids();
        for (j, bb) in b.blocks.iter().enumerate() {
            let eb = bb.edge_ids();
            let disjoint = ea.intersection(&eb).next().is_none();
            if !disjoint && ea != eb {
                return BlockMatchOutcome::Mismatch { left: i, right: j };
            }
        }
    }
    BlockMatchOutcome::Match
}

/// Topology classification of a multi-commodity network.
#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    SingleCommoditySp {
        tree: SpTree,
    },
    BlockMatching {
        reps: Vec<BlockRepresentation>,
    },
    NonSeriesParallel {
        commodity: usize,
        kernel: Network,
    },
    NonBlockMatching {
        commodity_a: usize,
        commodity_b: usize,
        block_a: Block,
        block_b: Block,
    },
}

/// Computes each commodity subnetwork, decomposes it, and checks pairwise
/// block matching. Non-series-parallel witnesses take precedence over
/// non-block-matching ones; ties break on (commodity index, block order).
pub fn classify_network(
    net: &Network,
    commodities: &[CommoditySpec],
    cap: usize,
) -> Result<Classification, NetError> {
    assert!(!commodities.is_empty(), "at least one commodity required");
    let mut trees = Vec::with_capacity(commodities.len());
    for (k, c) in commodities.iter().enumerate() {
        let sub = commodity_subnetwork(net, c, cap)?;
        match sp_decompose(&sub, &c.source, &c.sink) {
            SpDecomposition::Tree(tree) => trees.push(tree),
            SpDecomposition::NotSp { kernel } => {
                return Ok(Classification::NonSeriesParallel {
                    commodity: k,
                    kernel,
                })
            }
        }
    }
    if commodities.len() == 1 {
        return Ok(Classification::SingleCommoditySp {
            tree: trees.pop().unwrap(),
        });
    }
    let reps: Vec<BlockRepresentation> = trees.iter().map(block_representation).collect();
    for i in 0..reps.len() {
        for j in i + 1..reps.len() {
            if let BlockMatchOutcome::Mismatch { left, right } = blocks_match(&reps[i], &reps[j]) {
                return Ok(Classification::NonBlockMatching {
                    commodity_a: i,
                    commodity_b: j,
                    block_a: reps[i].blocks[left].clone(),
                    block_b: reps[j].blocks[right].clone(),
                });
            }
        }
    }
    Ok(Classification::BlockMatching { reps })
}

/// Edges of `net` that lie on no commodity's simple paths; equilibria never
/// use them, so classification ignores them.
pub fn dead_edges(
    net: &Network,
    commodities: &[CommoditySpec],
    cap: usize,
) -> Result<Vec<EdgeId>, NetError> {
    let mut live: BTreeSet<EdgeId> = BTreeSet::new();
    for c in commodities {
        match commodity_subnetwork(net, c, cap) {
            Ok(sub) => live.extend(sub.edge_ids()),
            Err(NetError::EmptySubnetwork { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(net
        .edges()
        .iter()
        .filter(|e| !live.contains(&e.id))
        .map(|e| e.id.clone())
        .collect())
}
