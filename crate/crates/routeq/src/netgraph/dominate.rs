//! Recursive construction of a path on which one flow dominates another,
//! following the series-parallel structure: a leaf is its own path, series
//! nodes concatenate their children's paths, and a parallel node recurses
//! into a child whose share of the first flow is positive and at least its
//! share of the second.

use super::{EdgeId, EdgePath, NetError, SpTree, VertexId};
use std::collections::BTreeMap;

const CONSERVATION_TOL: f64 = 1e-9;

pub type EdgeFlowMap = BTreeMap<EdgeId, f64>;

/// Given feasible flows `x` and `y` on the SP network described by `tree`,
/// routing `d1 >= d2` units with `d1 > 0`, returns a source-sink path `P`
/// with `x_e > 0` and `x_e >= y_e` for every edge of `P`.
pub fn find_dominating_path(
    tree: &SpTree,
    x: &EdgeFlowMap,
    y: &EdgeFlowMap,
) -> Result<EdgePath, NetError> {
    let d1 = check_feasible(tree, x, "x")?;
    let d2 = check_feasible(tree, y, "y")?;
    if d1 <= CONSERVATION_TOL {
        return Err(NetError::InfeasibleFlow {
            reason: format!("first flow routes {d1}, expected a positive amount"),
        });
    }
    if d1 < d2 - CONSERVATION_TOL {
        return Err(NetError::InfeasibleFlow {
            reason: format!("first flow routes {d1} which is less than the second's {d2}"),
        });
    }
    let mut path = Vec::new();
    descend(tree, x, y, &mut path);
    Ok(path)
}

fn descend(tree: &SpTree, x: &EdgeFlowMap, y: &EdgeFlowMap, path: &mut Vec<EdgeId>) {
    match tree {
        SpTree::Leaf { edge, .. } => path.push(edge.clone()),
        SpTree::Series { children, .. } => {
            for c in children {
                descend(c, x, y, path);
            }
        }
        SpTree::Parallel { children, .. } => {
            let shares: Vec<(f64, f64)> = children
                .iter()
                .map(|c| (inflow(c, x), inflow(c, y)))
                .collect();
            // a qualifying child exists because the total x inflow is
            // positive and at least the total y inflow
            let pick = shares
                .iter()
                .position(|&(cx, cy)| cx > CONSERVATION_TOL && cx >= cy)
                .unwrap_or_else(|| {
                    shares
                        .iter()
                        .enumerate()
                        .filter(|(_, &(cx, _))| cx > 0.0)
                        .max_by(|(_, a), (_, b)| {
                            (a.0 - a.1).partial_cmp(&(b.0 - b.1)).unwrap()
                        })
                        .map(|(i, _)| i)
                        .expect("positive x inflow must reach some child")
                });
            descend(&children[pick], x, y, path);
        }
    }
}

/// Flow entering a subnetwork: the sum over its edges leaving its source.
fn inflow(tree: &SpTree, flow: &EdgeFlowMap) -> f64 {
    let source = tree.source();
    sum_at_tail(tree, source, flow)
}

fn sum_at_tail(tree: &SpTree, v: &VertexId, flow: &EdgeFlowMap) -> f64 {
    match tree {
        SpTree::Leaf { edge, source, .. } => {
            if source == v {
                flow.get(edge).copied().unwrap_or(0.0)
            } else {
                0.0
            }
        }
        SpTree::Series { children, .. } | SpTree::Parallel { children, .. } => children
            .iter()
            .map(|c| sum_at_tail(c, v, flow))
            .sum(),
    }
}

/// Verifies nonnegativity and flow conservation at every internal vertex;
/// returns the routed amount.
fn check_feasible(tree: &SpTree, flow: &EdgeFlowMap, name: &str) -> Result<f64, NetError> {
    let mut net_out: BTreeMap<VertexId, f64> = BTreeMap::new();
    collect_net_out(tree, flow, &mut net_out, name)?;
    let source = tree.source();
    let sink = tree.sink();
    for (v, balance) in &net_out {
        if v == source || v == sink {
            continue;
        }
        if balance.abs() > CONSERVATION_TOL {
            return Err(NetError::InfeasibleFlow {
                reason: format!("flow {name} violates conservation at `{v}` by {balance}"),
            });
        }
    }
    Ok(net_out.get(source).copied().unwrap_or(0.0))
}

fn collect_net_out(
    tree: &SpTree,
    flow: &EdgeFlowMap,
    net_out: &mut BTreeMap<VertexId, f64>,
    name: &str,
) -> Result<(), NetError> {
    match tree {
        SpTree::Leaf {
            edge,
            source,
            sink,
        } => {
            let f = flow.get(edge).copied().unwrap_or(0.0);
            if f < -CONSERVATION_TOL {
                return Err(NetError::InfeasibleFlow {
                    reason: format!("flow {name} is negative on edge `{edge}`"),
                });
            }
            *net_out.entry(source.clone()).or_insert(0.0) += f;
            *net_out.entry(sink.clone()).or_insert(0.0) -= f;
            Ok(())
        }
        SpTree::Series { children, .. } | SpTree::Parallel { children, .. } => {
            for c in children {
                collect_net_out(c, flow, net_out, name)?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flows(pairs: &[(&str, f64)]) -> EdgeFlowMap {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn single_edge_is_the_path() {
        let tree = SpTree::leaf("e", "s", "t");
        let p = find_dominating_path(&tree, &flows(&[("e", 1.0)]), &flows(&[("e", 1.0)])).unwrap();
        assert_eq!(p, vec!["e".to_string()]);
    }

    #[test]
    fn parallel_picks_dominating_side() {
        let tree = SpTree::parallel(vec![SpTree::leaf("e1", "s", "t"), SpTree::leaf("e2", "s", "t")]);
        let x = flows(&[("e1", 1.0), ("e2", 0.0)]);
        let y = flows(&[("e1", 0.4), ("e2", 0.6)]);
        let p = find_dominating_path(&tree, &x, &y).unwrap();
        assert_eq!(p, vec!["e1".to_string()]);
    }

    #[test]
    fn series_of_parallel_pairs() {
        let first = SpTree::parallel(vec![
            SpTree::leaf("p1a", "s", "m"),
            SpTree::leaf("p1b", "s", "m"),
        ]);
        let second = SpTree::parallel(vec![
            SpTree::leaf("p2a", "m", "t"),
            SpTree::leaf("p2b", "m", "t"),
        ]);
        let tree = SpTree::series(first, second);
        let x = flows(&[("p1a", 0.6), ("p1b", 0.4), ("p2a", 0.2), ("p2b", 0.8)]);
        let y = flows(&[("p1a", 0.5), ("p1b", 0.5), ("p2a", 0.5), ("p2b", 0.5)]);
        let p = find_dominating_path(&tree, &x, &y).unwrap();
        assert_eq!(p, vec!["p1a".to_string(), "p2b".to_string()]);
    }

    #[test]
    fn infeasible_flows_rejected() {
        let tree = SpTree::leaf("e", "s", "t");
        // d1 < d2
        let err =
            find_dominating_path(&tree, &flows(&[("e", 0.5)]), &flows(&[("e", 1.0)])).unwrap_err();
        assert!(matches!(err, NetError::InfeasibleFlow { .. }));
        // d1 = 0
        let err =
            find_dominating_path(&tree, &flows(&[("e", 0.0)]), &flows(&[("e", 0.0)])).unwrap_err();
        assert!(matches!(err, NetError::InfeasibleFlow { .. }));
        // conservation broken
        let mid = SpTree::series(SpTree::leaf("a", "s", "m"), SpTree::leaf("b", "m", "t"));
        let err = find_dominating_path(
            &mid,
            &flows(&[("a", 1.0), ("b", 0.5)]),
            &flows(&[("a", 0.5), ("b", 0.5)]),
        )
        .unwrap_err();
        assert!(matches!(err, NetError::InfeasibleFlow { .. }));
    }
}
