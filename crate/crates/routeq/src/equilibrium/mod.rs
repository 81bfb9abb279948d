//! Multi-class routing instances, feasible path flows, Wardrop
//! verification, the best-response averaging solver, total-cost
//! functionals for the heterogeneous population and its homogenized
//! counterpart, and the diversity verdict comparing the two.

mod solver;

pub use solver::{solve_equilibrium, SolveOptions, Solved};

use crate::costfn::{path_cost, validate_monotonicity, EdgeFunctions, MonotonicityViolation};
use crate::netgraph::{
    enumerate_simple_paths, CommoditySpec, EdgeId, EdgePath, NetError, Network,
};
use std::collections::BTreeMap;
use thiserror::Error;

/// Amounts below this are treated as numerically unused in Wardrop checks.
pub const DEFAULT_USED_THRESHOLD: f64 = 1e-7;
/// Per-class conservation tolerance for feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EqError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("cost function error: {0}")]
    Cost(#[from] crate::costfn::CostFnError),
    #[error("infeasible class flow: {0}")]
    InfeasibleFlow(String),
    #[error("commodity {0} has no positive demand")]
    ZeroDemand(usize),
    #[error("instance is not homogenized: commodity {0} has {1} classes")]
    NotHomogeneous(usize, usize),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error(
        "no equilibrium within {max_iters} iterations (worst gap {worst_gap:.3e}); \
         last iterate attached"
    )]
    NoConvergence {
        max_iters: usize,
        worst_gap: f64,
        flow: Box<ClassFlow>,
        report: Box<EquilibriumReport>,
    },
}

/// One demand class: `amount` units of flow whose users weight the
/// deviation criterion by `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandClass {
    pub r: f64,
    pub amount: f64,
}

impl DemandClass {
    pub fn new(r: f64, amount: f64) -> Self {
        DemandClass { r, amount }
    }
}

/// One commodity: an origin-destination pair plus its discrete demand
/// classes. An empty class list is an explicitly zero-demand commodity.
#[derive(Debug, Clone, PartialEq)]
pub struct Commodity {
    pub spec: CommoditySpec,
    pub classes: Vec<DemandClass>,
}

impl Commodity {
    pub fn total_demand(&self) -> f64 {
        self.classes.iter().map(|c| c.amount).sum()
    }

    /// Demand-weighted average diversity parameter; `None` for zero demand.
    pub fn average_r(&self) -> Option<f64> {
        let d = self.total_demand();
        if d <= 0.0 {
            return None;
        }
        Some(self.classes.iter().map(|c| c.r * c.amount).sum::<f64>() / d)
    }
}

/// A validated routing instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub network: Network,
    pub functions: EdgeFunctions,
    pub commodities: Vec<Commodity>,
}

impl Instance {
    /// Builds and validates an instance: every edge needs a function pair,
    /// classes need positive amounts and nonnegative parameters, and the
    /// combined cost must be non-decreasing up to the largest class
    /// parameter.
    pub fn new(
        network: Network,
        functions: EdgeFunctions,
        commodities: Vec<Commodity>,
    ) -> Result<Self, EqError> {
        if !functions.covers(&network) {
            return Err(EqError::InvalidInstance(
                "every network edge needs exactly one (latency, deviation) pair".into(),
            ));
        }
        for (k, com) in commodities.iter().enumerate() {
            com.spec
                .validate(&network)
                .map_err(EqError::Net)?;
            for class in &com.classes {
                if !(class.amount > 0.0) {
                    return Err(EqError::InvalidInstance(format!(
                        "commodity {k}: class amounts must be positive, got {}",
                        class.amount
                    )));
                }
                if !(class.r >= 0.0) {
                    return Err(EqError::InvalidInstance(format!(
                        "commodity {k}: diversity parameters must be nonnegative, got {}",
                        class.r
                    )));
                }
            }
        }
        let inst = Instance {
            network,
            functions,
            commodities,
        };
        let violations = inst.monotonicity_violations();
        if !violations.is_empty() {
            let v = &violations[0];
            return Err(EqError::InvalidInstance(format!(
                "combined cost decreasing on edge `{}` over [{}, {}) at r={} (slope {:.3})",
                v.edge, v.lo, v.hi, v.r, v.combined_slope
            )));
        }
        Ok(inst)
    }

    pub fn r_max(&self) -> f64 {
        self.commodities
            .iter()
            .flat_map(|c| c.classes.iter().map(|cl| cl.r))
            .fold(0.0, f64::max)
    }

    pub fn monotonicity_violations(&self) -> Vec<MonotonicityViolation> {
        validate_monotonicity(&self.functions, self.r_max())
    }
}

/// Per-commodity enumerated path set plus per-class path amounts.
///
/// `amounts[k][i][p]` is the flow of commodity `k`'s class `i` on
/// `paths[k][p]`. Per class the amounts sum to the class amount.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFlow {
    pub paths: Vec<Vec<EdgePath>>,
    pub amounts: Vec<Vec<Vec<f64>>>,
}

impl ClassFlow {
    /// Enumerates each commodity's paths and starts with all-zero amounts.
    pub fn zero(inst: &Instance, cap: usize) -> Result<Self, EqError> {
        let mut paths = Vec::new();
        let mut amounts = Vec::new();
        for com in &inst.commodities {
            let ps = if com.classes.is_empty() {
                Vec::new()
            } else {
                let ps =
                    enumerate_simple_paths(&inst.network, &com.spec.source, &com.spec.sink, cap)?;
                if ps.is_empty() {
                    return Err(EqError::Net(NetError::EmptySubnetwork {
                        from: com.spec.source.clone(),
                        to: com.spec.sink.clone(),
                    }));
                }
                ps
            };
            amounts.push(vec![vec![0.0; ps.len()]; com.classes.len()]);
            paths.push(ps);
        }
        Ok(ClassFlow { paths, amounts })
    }

    /// Sets one class's flow on the path with the given edge sequence.
    pub fn set(&mut self, k: usize, class: usize, path: &[&str], amount: f64) {
        let idx = self.paths[k]
            .iter()
            .position(|p| p.len() == path.len() && p.iter().zip(path).all(|(a, b)| a == b))
            .unwrap_or_else(|| panic!("path {path:?} not enumerated for commodity {k}"));
        self.amounts[k][class][idx] = amount;
    }

    /// Checks per-class conservation and nonnegativity against `inst`.
    pub fn check_feasible(&self, inst: &Instance) -> Result<(), EqError> {
        if self.amounts.len() != inst.commodities.len() {
            return Err(EqError::InfeasibleFlow(
                "commodity count mismatch".into(),
            ));
        }
        for (k, com) in inst.commodities.iter().enumerate() {
            if self.amounts[k].len() != com.classes.len() {
                return Err(EqError::InfeasibleFlow(format!(
                    "commodity {k}: class count mismatch"
                )));
            }
            for (i, class) in com.classes.iter().enumerate() {
                let row = &self.amounts[k][i];
                if row.iter().any(|&a| a < -FEASIBILITY_TOL) {
                    return Err(EqError::InfeasibleFlow(format!(
                        "commodity {k} class {i}: negative path amount"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - class.amount).abs() > FEASIBILITY_TOL {
                    return Err(EqError::InfeasibleFlow(format!(
                        "commodity {k} class {i}: path amounts sum to {sum}, expected {}",
                        class.amount
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Aggregates a feasible class flow into total flow per edge. Edges
/// carrying no flow are present with value zero.
pub fn edge_flows(inst: &Instance, flow: &ClassFlow) -> Result<BTreeMap<EdgeId, f64>, EqError> {
    flow.check_feasible(inst)?;
    Ok(edge_flows_unchecked(inst, flow))
}

fn edge_flows_unchecked(inst: &Instance, flow: &ClassFlow) -> BTreeMap<EdgeId, f64> {
    let mut out: BTreeMap<EdgeId, f64> = inst
        .network
        .edges()
        .iter()
        .map(|e| (e.id.clone(), 0.0))
        .collect();
    for (k, class_rows) in flow.amounts.iter().enumerate() {
        for row in class_rows {
            for (p, &amount) in row.iter().enumerate() {
                if amount != 0.0 {
                    for e in &flow.paths[k][p] {
                        *out.get_mut(e).expect("paths use network edges") += amount;
                    }
                }
            }
        }
    }
    out
}

/// Worst Wardrop violation found by the verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstViolation {
    pub commodity: usize,
    pub class: usize,
    pub used_path: usize,
    pub cheaper_path: usize,
    pub gap: f64,
}

/// Verification outcome: the worst gap between a used path and the best
/// alternative of the same class, plus per-class equilibrium costs.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub is_equilibrium: bool,
    pub epsilon: f64,
    pub worst: Option<WorstViolation>,
    /// `class_costs[k][i]`: flow-weighted average cost of commodity `k`'s
    /// class `i` over its used paths (the common cost at equilibrium).
    pub class_costs: Vec<Vec<f64>>,
}

/// Checks the Wardrop conditions at tolerance `eps`: every path carrying
/// more than `used_threshold` flow must cost at most eps more than any
/// alternative path of its commodity for that class's parameter.
pub fn verify_equilibrium(
    inst: &Instance,
    flow: &ClassFlow,
    eps: f64,
) -> Result<EquilibriumReport, EqError> {
    verify_equilibrium_with(inst, flow, eps, DEFAULT_USED_THRESHOLD)
}

pub fn verify_equilibrium_with(
    inst: &Instance,
    flow: &ClassFlow,
    eps: f64,
    used_threshold: f64,
) -> Result<EquilibriumReport, EqError> {
    flow.check_feasible(inst)?;
    let ef = edge_flows_unchecked(inst, flow);
    let mut worst: Option<WorstViolation> = None;
    let mut class_costs = Vec::with_capacity(inst.commodities.len());
    for (k, com) in inst.commodities.iter().enumerate() {
        let paths = &flow.paths[k];
        let mut costs_k = Vec::with_capacity(com.classes.len());
        for (i, class) in com.classes.iter().enumerate() {
            let costs: Vec<f64> = paths
                .iter()
                .map(|p| path_cost(&inst.functions, &ef, p, class.r))
                .collect::<Result<_, _>>()?;
            let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
            let min_idx = costs
                .iter()
                .position(|&c| c == min_cost)
                .expect("non-empty path set");
            let row = &flow.amounts[k][i];
            let mut weighted = 0.0;
            for (p, &amount) in row.iter().enumerate() {
                if amount > 0.0 {
                    weighted += amount * costs[p];
                }
                if amount > used_threshold {
                    let gap = costs[p] - min_cost;
                    if worst.as_ref().map(|w| gap > w.gap).unwrap_or(gap > 0.0) {
                        worst = Some(WorstViolation {
                            commodity: k,
                            class: i,
                            used_path: p,
                            cheaper_path: min_idx,
                            gap,
                        });
                    }
                }
            }
            costs_k.push(weighted / class.amount);
        }
        class_costs.push(costs_k);
    }
    let worst_gap = worst.as_ref().map(|w| w.gap).unwrap_or(0.0);
    Ok(EquilibriumReport {
        is_equilibrium: worst_gap <= eps,
        epsilon: eps,
        worst,
        class_costs,
    })
}

/// Replaces each commodity's classes by a single class carrying the whole
/// demand at the demand-weighted average parameter. Zero-demand
/// commodities stay empty. Idempotent.
pub fn homogenize(inst: &Instance) -> Result<Instance, EqError> {
    let mut commodities = Vec::with_capacity(inst.commodities.len());
    for (k, com) in inst.commodities.iter().enumerate() {
        if com.classes.is_empty() {
            commodities.push(com.clone());
            continue;
        }
        let d = com.total_demand();
        let r_bar = com.average_r().ok_or(EqError::ZeroDemand(k))?;
        commodities.push(Commodity {
            spec: com.spec.clone(),
            classes: vec![DemandClass::new(r_bar, d)],
        });
    }
    Ok(Instance {
        network: inst.network.clone(),
        functions: inst.functions.clone(),
        commodities,
    })
}

/// Total cost of the heterogeneous population: the demand-weighted sum of
/// per-class costs. At a verified equilibrium each class pays its common
/// cost; otherwise the flow-weighted average over used paths serves as a
/// diagnostic value.
pub fn heterogeneous_total_cost(inst: &Instance, flow: &ClassFlow) -> Result<f64, EqError> {
    flow.check_feasible(inst)?;
    let ef = edge_flows_unchecked(inst, flow);
    let mut total = 0.0;
    for (k, com) in inst.commodities.iter().enumerate() {
        for (i, class) in com.classes.iter().enumerate() {
            for (p, &amount) in flow.amounts[k][i].iter().enumerate() {
                if amount > 0.0 {
                    total += amount * path_cost(&inst.functions, &ef, &flow.paths[k][p], class.r)?;
                }
            }
        }
    }
    Ok(total)
}

/// Total cost of a homogenized instance (one class per commodity).
pub fn homogeneous_total_cost(inst: &Instance, flow: &ClassFlow) -> Result<f64, EqError> {
    for (k, com) in inst.commodities.iter().enumerate() {
        if com.classes.len() > 1 {
            return Err(EqError::NotHomogeneous(k, com.classes.len()));
        }
    }
    heterogeneous_total_cost(inst, flow)
}

/// True iff all commodities with positive demand share the same average
/// diversity parameter (within 1e-9).
pub fn is_average_respecting(inst: &Instance) -> Result<bool, EqError> {
    let mut averages = Vec::new();
    for com in &inst.commodities {
        if com.classes.is_empty() {
            continue;
        }
        match com.average_r() {
            Some(r) => averages.push(r),
            None => continue,
        }
    }
    Ok(averages
        .windows(2)
        .all(|w| (w[0] - w[1]).abs() <= 1e-9))
}

/// Outcome of comparing the heterogeneous equilibrium cost with the
/// homogenized instance's equilibrium cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Helps,
    Hurts,
    Ties,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Helps => write!(f, "helps"),
            Verdict::Hurts => write!(f, "hurts"),
            Verdict::Ties => write!(f, "ties"),
        }
    }
}

/// Both equilibria, both totals, and the verdict.
#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub c_ht: f64,
    pub c_hm: f64,
    pub heterogeneous: Solved,
    pub homogeneous: Solved,
    pub homogenized: Instance,
}

/// Solves the heterogeneous equilibrium on `inst` and the homogeneous one
/// on its homogenization; diversity hurts iff the heterogeneous total
/// exceeds the homogeneous total by more than `opts.tie_tol`.
pub fn diversity_verdict(inst: &Instance, opts: &SolveOptions) -> Result<VerdictReport, EqError> {
    let het = solve_equilibrium(inst, opts)?;
    let hom_inst = homogenize(inst)?;
    let hom = solve_equilibrium(&hom_inst, opts)?;
    let c_ht = heterogeneous_total_cost(inst, &het.flow)?;
    let c_hm = homogeneous_total_cost(&hom_inst, &hom.flow)?;
    let verdict = if c_ht > c_hm + opts.tie_tol {
        Verdict::Hurts
    } else if c_ht < c_hm - opts.tie_tol {
        Verdict::Helps
    } else {
        Verdict::Ties
    };
    Ok(VerdictReport {
        verdict,
        c_ht,
        c_hm,
        heterogeneous: het,
        homogeneous: hom,
        homogenized: hom_inst,
    })
}

/// Shared instance fixtures for the crate's test suites.
#[cfg(test)]
pub(crate) mod testinst {
    use super::*;
    use crate::costfn::{monotone_through, CostFn};

    /// Two-commodity instance on the three-path network: commodity 1 can
    /// take a direct branch through `e1` or a detour through `e2`;
    /// commodity 2's single path also crosses `e2`. Classes (0, 3/4) and
    /// (4, 1/4) against a unit class at 1.
    pub(crate) fn prop5() -> Instance {
        let net = Network::from_edges([
            ("in1", "s1", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
        ])
        .unwrap();
        let mut fns = EdgeFunctions::new();
        fns.insert("e1", CostFn::constant(1.0), CostFn::constant(2.0));
        fns.insert(
            "e2",
            monotone_through(&[(1.0, 3.0), (1.25, 9.0)], 1.0).unwrap(),
            CostFn::zero(),
        );
        for e in ["in1", "h1a", "h1b", "out1", "in2", "out2"] {
            fns.insert(e, CostFn::zero(), CostFn::zero());
        }
        Instance::new(
            net,
            fns,
            vec![
                Commodity {
                    spec: CommoditySpec::new("s1", "t1"),
                    classes: vec![DemandClass::new(0.0, 0.75), DemandClass::new(4.0, 0.25)],
                },
                Commodity {
                    spec: CommoditySpec::new("s2", "t2"),
                    classes: vec![DemandClass::new(1.0, 1.0)],
                },
            ],
        )
        .unwrap()
    }

    /// The analytic heterogeneous equilibrium of `prop5`.
    pub(crate) fn prop5_het_flow(inst: &Instance) -> ClassFlow {
        let mut flow = ClassFlow::zero(inst, 100).unwrap();
        flow.set(0, 0, &["in1", "e1", "out1"], 0.75);
        flow.set(0, 1, &["in1", "h1a", "e2", "h1b", "out1"], 0.25);
        flow.set(1, 0, &["in2", "e2", "out2"], 1.0);
        flow
    }

    /// Two parallel links, one unit of demand split between a
    /// deviation-averse class and a single-minded one.
    pub(crate) fn footnote5() -> Instance {
        let net = Network::from_edges([("lo", "s", "t"), ("up", "s", "t")]).unwrap();
        let mut fns = EdgeFunctions::new();
        fns.insert("lo", CostFn::constant(1.0), CostFn::affine(1.0, 0.0));
        fns.insert("up", CostFn::constant(2.0), CostFn::zero());
        Instance::new(
            net,
            fns,
            vec![Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![DemandClass::new(0.0, 0.5), DemandClass::new(2.0, 0.5)],
            }],
        )
        .unwrap()
    }

    /// Single-edge network with no demand at all.
    pub(crate) fn zero_demand() -> Instance {
        let net = Network::from_edges([("e", "s", "t")]).unwrap();
        let mut fns = EdgeFunctions::new();
        fns.insert("e", CostFn::constant(1.0), CostFn::zero());
        Instance::new(
            net,
            fns,
            vec![Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![],
            }],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testinst::{footnote5, prop5, prop5_het_flow, zero_demand};
    use super::*;
    use crate::costfn::CostFn;

    #[test]
    fn edge_flows_of_prop5_het() {
        let inst = prop5();
        let flow = prop5_het_flow(&inst);
        let ef = edge_flows(&inst, &flow).unwrap();
        assert!((ef["e1"] - 0.75).abs() < 1e-12);
        assert!((ef["e2"] - 1.25).abs() < 1e-12);
        assert!((ef["in2"] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_flows_of_zero_demand_are_zero() {
        let inst = zero_demand();
        let flow = ClassFlow::zero(&inst, 10).unwrap();
        let ef = edge_flows(&inst, &flow).unwrap();
        assert!(ef.values().all(|&v| v == 0.0));
    }

    #[test]
    fn edge_flows_along_two_edge_path() {
        let net = Network::from_edges([("a", "s", "m"), ("b", "m", "t")]).unwrap();
        let mut fns = EdgeFunctions::new();
        fns.insert("a", CostFn::zero(), CostFn::zero());
        fns.insert("b", CostFn::zero(), CostFn::zero());
        let inst = Instance::new(
            net,
            fns,
            vec![Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![DemandClass::new(0.0, 1.0)],
            }],
        )
        .unwrap();
        let mut flow = ClassFlow::zero(&inst, 10).unwrap();
        flow.set(0, 0, &["a", "b"], 1.0);
        let ef = edge_flows(&inst, &flow).unwrap();
        assert_eq!(ef["a"], 1.0);
        assert_eq!(ef["b"], 1.0);
    }

    #[test]
    fn infeasible_flow_rejected() {
        let inst = prop5();
        let mut flow = prop5_het_flow(&inst);
        flow.amounts[0][0][0] = 0.5; // class sum no longer 0.75
        assert!(matches!(
            edge_flows(&inst, &flow),
            Err(EqError::InfeasibleFlow(_))
        ));
    }

    #[test]
    fn prop5_het_flow_verifies() {
        let inst = prop5();
        let flow = prop5_het_flow(&inst);
        let rep = verify_equilibrium(&inst, &flow, 1e-6).unwrap();
        assert!(rep.is_equilibrium, "worst: {:?}", rep.worst);
        assert!((rep.class_costs[0][0] - 1.0).abs() < 1e-9);
        assert!((rep.class_costs[0][1] - 9.0).abs() < 1e-9);
        assert!((rep.class_costs[1][0] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn all_on_direct_branch_violates_for_averse_class() {
        let inst = prop5();
        let mut flow = ClassFlow::zero(&inst, 100).unwrap();
        flow.set(0, 0, &["in1", "e1", "out1"], 0.75);
        flow.set(0, 1, &["in1", "e1", "out1"], 0.25);
        flow.set(1, 0, &["in2", "e2", "out2"], 1.0);
        let rep = verify_equilibrium(&inst, &flow, 1e-6).unwrap();
        assert!(!rep.is_equilibrium);
        let w = rep.worst.unwrap();
        assert_eq!((w.commodity, w.class), (0, 1));
        // the averse class pays 9 on the direct branch while the detour
        // costs 3
        assert!((w.gap - 6.0).abs() < 1e-9);
    }

    #[test]
    fn zero_demand_verifies_vacuously() {
        let inst = zero_demand();
        let flow = ClassFlow::zero(&inst, 10).unwrap();
        let rep = verify_equilibrium(&inst, &flow, 0.0).unwrap();
        assert!(rep.is_equilibrium);
        assert!(rep.worst.is_none());
    }

    #[test]
    fn solver_reproduces_prop5_heterogeneous() {
        let inst = prop5();
        let solved = solve_equilibrium(&inst, &SolveOptions::default()).unwrap();
        let ef = edge_flows(&inst, &solved.flow).unwrap();
        assert!((ef["e1"] - 0.75).abs() < 1e-4, "e1 = {}", ef["e1"]);
        assert!((ef["e2"] - 1.25).abs() < 1e-4, "e2 = {}", ef["e2"]);
        assert!(solved.report.is_equilibrium);
    }

    #[test]
    fn solver_trivial_on_single_path_instance() {
        let net = Network::from_edges([("a", "s", "m"), ("b", "m", "t")]).unwrap();
        let mut fns = EdgeFunctions::new();
        fns.insert("a", CostFn::affine(1.0, 0.0), CostFn::zero());
        fns.insert("b", CostFn::constant(1.0), CostFn::constant(1.0));
        let inst = Instance::new(
            net,
            fns,
            vec![Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![DemandClass::new(2.0, 1.5)],
            }],
        )
        .unwrap();
        let solved = solve_equilibrium(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(solved.iterations, 0);
        assert_eq!(solved.flow.amounts[0][0], vec![1.5]);
    }

    #[test]
    fn solver_reproduces_prop5_homogeneous() {
        let inst = homogenize(&prop5()).unwrap();
        let solved = solve_equilibrium(&inst, &SolveOptions::default()).unwrap();
        let ef = edge_flows(&inst, &solved.flow).unwrap();
        assert!((ef["e2"] - 1.0).abs() < 1e-4, "e2 = {}", ef["e2"]);
        // both branches cost 3 for the averaged class
        assert!((solved.report.class_costs[0][0] - 3.0).abs() < 1e-4);
        assert!((solved.report.class_costs[1][0] - 3.0).abs() < 1e-4);
    }

    #[test]
    fn homogenize_collapses_classes() {
        let inst = prop5();
        let hom = homogenize(&inst).unwrap();
        assert_eq!(hom.commodities[0].classes, vec![DemandClass::new(1.0, 1.0)]);
        assert_eq!(hom.commodities[1].classes, vec![DemandClass::new(1.0, 1.0)]);
    }

    #[test]
    fn homogenize_identity_on_single_class_and_idempotent() {
        let inst = footnote5();
        let once = homogenize(&inst).unwrap();
        let twice = homogenize(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.commodities[0].classes, vec![DemandClass::new(1.0, 1.0)]);
    }

    #[test]
    fn homogenize_weighted_mean() {
        let mut inst = footnote5();
        inst.commodities[0].classes = vec![DemandClass::new(0.0, 0.5), DemandClass::new(2.0, 0.5)];
        let hom = homogenize(&inst).unwrap();
        assert_eq!(hom.commodities[0].classes, vec![DemandClass::new(1.0, 1.0)]);
    }

    #[test]
    fn heterogeneous_total_of_prop5_is_twelve() {
        let inst = prop5();
        let flow = prop5_het_flow(&inst);
        let c = heterogeneous_total_cost(&inst, &flow).unwrap();
        assert!((c - 12.0).abs() < 1e-9, "got {c}");
    }

    #[test]
    fn homogeneous_total_of_prop5_is_six() {
        let inst = homogenize(&prop5()).unwrap();
        let mut flow = ClassFlow::zero(&inst, 100).unwrap();
        flow.set(0, 0, &["in1", "e1", "out1"], 1.0);
        flow.set(1, 0, &["in2", "e2", "out2"], 1.0);
        let rep = verify_equilibrium(&inst, &flow, 1e-6).unwrap();
        assert!(rep.is_equilibrium);
        let c = homogeneous_total_cost(&inst, &flow).unwrap();
        assert!((c - 6.0).abs() < 1e-9, "got {c}");
    }

    #[test]
    fn totals_of_zero_demand_are_zero() {
        let inst = zero_demand();
        let flow = ClassFlow::zero(&inst, 10).unwrap();
        assert_eq!(heterogeneous_total_cost(&inst, &flow).unwrap(), 0.0);
        assert_eq!(homogeneous_total_cost(&inst, &flow).unwrap(), 0.0);
    }

    #[test]
    fn homogeneous_total_requires_single_class() {
        let inst = prop5();
        let flow = prop5_het_flow(&inst);
        assert!(matches!(
            homogeneous_total_cost(&inst, &flow),
            Err(EqError::NotHomogeneous(0, 2))
        ));
    }

    #[test]
    fn average_respecting_checks() {
        assert!(is_average_respecting(&prop5()).unwrap());
        assert!(is_average_respecting(&footnote5()).unwrap());
        let mut skewed = prop5();
        skewed.commodities[1].classes = vec![DemandClass::new(10.0, 1.0)];
        assert!(!is_average_respecting(&skewed).unwrap());
    }

    #[test]
    fn verdict_prop5_hurts() {
        let rep = diversity_verdict(&prop5(), &SolveOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Hurts);
        assert!((rep.c_ht - 12.0).abs() < 1e-4, "c_ht = {}", rep.c_ht);
        assert!((rep.c_hm - 6.0).abs() < 1e-4, "c_hm = {}", rep.c_hm);
    }

    #[test]
    fn verdict_footnote5_helps() {
        let rep = diversity_verdict(&footnote5(), &SolveOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Helps);
        assert!((rep.c_ht - 1.5).abs() < 1e-6, "c_ht = {}", rep.c_ht);
        assert!((rep.c_hm - 2.0).abs() < 1e-6, "c_hm = {}", rep.c_hm);
    }

    #[test]
    fn verdict_ties_on_already_homogeneous() {
        let inst = homogenize(&prop5()).unwrap();
        let rep = diversity_verdict(&inst, &SolveOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::Ties);
        assert!((rep.c_ht - rep.c_hm).abs() <= 1e-6);
    }

    #[test]
    fn solver_flows_keep_exact_conservation() {
        let inst = prop5();
        let solved = solve_equilibrium(&inst, &SolveOptions::default()).unwrap();
        solved.flow.check_feasible(&inst).unwrap();
        for (k, com) in inst.commodities.iter().enumerate() {
            for (i, class) in com.classes.iter().enumerate() {
                let sum: f64 = solved.flow.amounts[k][i].iter().sum();
                assert!((sum - class.amount).abs() <= FEASIBILITY_TOL);
            }
        }
    }
}
