//! Instance and report file formats. Instances are JSON documents listing
//! vertices, edges with their function pairs, and commodities with their
//! demand classes. Reports are JSON documents summarizing a command's
//! outcome; given the same inputs and flags they serialize byte-for-byte
//! identically. The instance digest hashes a canonical rendering with
//! sorted keys and fixed float formatting.

use crate::adversarial::{ConstructionTrace, HurtCertificate};
use crate::costfn::{CostFn, CostFnError, EdgeFunctions, Pwl};
use crate::equilibrium::{
    edge_flows, Commodity, DemandClass, EquilibriumReport, Instance, Solved,
};
use crate::netgraph::{
    AuditViolation, Block, BlockRepresentation, Classification, CommoditySpec, EdgePath, Network,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FileError {
    /// Not valid JSON (or missing/mistyped fields).
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    /// Parsed fine but describes an invalid instance.
    #[error("invalid instance: {0}")]
    Semantic(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FnSpec {
    Constant {
        c: f64,
    },
    /// `a * x + b`.
    Affine {
        a: f64,
        b: f64,
    },
    /// Piecewise-linear through `points`, extended past the extremes with
    /// slope `max(min_slope, adjacent segment slope)`.
    Pwl {
        points: Vec<(f64, f64)>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        min_slope: Option<f64>,
    },
}

impl FnSpec {
    pub fn to_cost_fn(&self) -> Result<CostFn, CostFnError> {
        match self {
            FnSpec::Constant { c } => Ok(CostFn::Constant(*c)),
            FnSpec::Affine { a, b } => Ok(CostFn::Affine(*a, *b)),
            FnSpec::Pwl { points, min_slope } => {
                let min_slope = min_slope.unwrap_or(0.0);
                let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
                let (left, right) = if points.len() <= 1 {
                    (min_slope, min_slope)
                } else {
                    let n = xs.len();
                    let first = (ys[1] - ys[0]) / (xs[1] - xs[0]);
                    let last = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
                    (min_slope.max(first), min_slope.max(last))
                };
                Ok(CostFn::PiecewiseLinear(Pwl::new(xs, ys, left, right)?))
            }
        }
    }

    pub fn from_cost_fn(f: &CostFn) -> FnSpec {
        match f {
            CostFn::Constant(c) => FnSpec::Constant { c: *c },
            CostFn::Affine(a, b) => FnSpec::Affine { a: *a, b: *b },
            CostFn::PiecewiseLinear(p) => FnSpec::Pwl {
                points: p.xs.iter().copied().zip(p.ys.iter().copied()).collect(),
                min_slope: Some(p.left_slope.min(p.right_slope)),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub latency: FnSpec,
    pub deviation: FnSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub r: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CommodityFileSpec {
    pub source: String,
    pub sink: String,
    pub classes: Vec<ClassSpec>,
}

/// The on-disk instance document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeSpec>,
    pub commodities: Vec<CommodityFileSpec>,
}

impl InstanceFile {
    pub fn from_str(text: &str) -> Result<InstanceFile, FileError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Builds and validates the instance, naming the offending field on
    /// failure.
    pub fn to_instance(&self) -> Result<Instance, FileError> {
        let network = Network::new(
            self.vertices.iter().cloned(),
            self.edges
                .iter()
                .map(|e| (e.id.clone(), e.tail.clone(), e.head.clone())),
        )
        .map_err(|e| FileError::Semantic(format!("edges: {e}")))?;
        let mut fns = EdgeFunctions::new();
        for (i, e) in self.edges.iter().enumerate() {
            let lat = e
                .latency
                .to_cost_fn()
                .map_err(|err| FileError::Semantic(format!("edges[{i}] (id `{}`) latency: {err}", e.id)))?;
            let dev = e
                .deviation
                .to_cost_fn()
                .map_err(|err| FileError::Semantic(format!("edges[{i}] (id `{}`) deviation: {err}", e.id)))?;
            fns.insert(e.id.clone(), lat, dev);
        }
        let commodities: Vec<Commodity> = self
            .commodities
            .iter()
            .map(|c| Commodity {
                spec: CommoditySpec::new(&c.source, &c.sink),
                classes: c
                    .classes
                    .iter()
                    .map(|cl| DemandClass::new(cl.r, cl.amount))
                    .collect(),
            })
            .collect();
        Instance::new(network, fns, commodities)
            .map_err(|e| FileError::Semantic(e.to_string()))
    }

    pub fn from_instance(inst: &Instance) -> InstanceFile {
        InstanceFile {
            vertices: inst.network.vertices().cloned().collect(),
            edges: inst
                .network
                .edges()
                .iter()
                .map(|e| {
                    let (lat, dev) = inst
                        .functions
                        .get(&e.id)
                        .expect("validated instance covers all edges");
                    EdgeSpec {
                        id: e.id.clone(),
                        tail: e.tail.clone(),
                        head: e.head.clone(),
                        latency: FnSpec::from_cost_fn(lat),
                        deviation: FnSpec::from_cost_fn(dev),
                    }
                })
                .collect(),
            commodities: inst
                .commodities
                .iter()
                .map(|c| CommodityFileSpec {
                    source: c.spec.source.clone(),
                    sink: c.spec.sink.clone(),
                    classes: c
                        .classes
                        .iter()
                        .map(|cl| ClassSpec {
                            r: cl.r,
                            amount: cl.amount,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance files serialize")
    }

    /// Content hash of the canonicalized document: keys sorted, every
    /// number rendered with 17 significant digits.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("instance files serialize");
        let mut canon = String::new();
        canonical_json(&value, &mut canon);
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn canonical_json(value: &serde_json::Value, out: &mut String) {
    use serde_json::Value::*;
    match value {
        Null => out.push_str("null"),
        Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Number(n) => {
            let f = n.as_f64().unwrap_or(0.0);
            out.push_str(&format!("{f:.16e}"));
        }
        String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical_json(item, out);
            }
            out.push(']');
        }
        Object(map) => {
            let sorted: BTreeMap<&std::string::String, &serde_json::Value> = map.iter().collect();
            out.push('{');
            for (i, (k, v)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("strings serialize"));
                out.push(':');
                canonical_json(v, out);
            }
            out.push('}');
        }
    }
}

// ---------------------------------------------------------------------
// report documents

#[derive(Debug, Clone, Serialize)]
pub struct BlockReport {
    pub source: String,
    pub sink: String,
    pub edges: Vec<String>,
}

impl BlockReport {
    fn from_block(b: &Block) -> Self {
        BlockReport {
            source: b.source().clone(),
            sink: b.sink().clone(),
            edges: b.edge_ids().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockRepReport {
    pub blocks: Vec<BlockReport>,
    pub separators: Vec<String>,
}

impl BlockRepReport {
    fn from_rep(rep: &BlockRepresentation) -> Self {
        BlockRepReport {
            blocks: rep.blocks.iter().map(BlockReport::from_block).collect(),
            separators: rep.separators.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassificationReport {
    SingleCommoditySp {
        representation: BlockRepReport,
    },
    BlockMatching {
        representations: Vec<BlockRepReport>,
    },
    NonSeriesParallel {
        commodity: usize,
        kernel_edges: Vec<String>,
    },
    NonBlockMatching {
        commodity_a: usize,
        commodity_b: usize,
        block_a: BlockReport,
        block_b: BlockReport,
    },
}

impl ClassificationReport {
    pub fn from_classification(c: &Classification) -> Self {
        match c {
            Classification::SingleCommoditySp { tree } => ClassificationReport::SingleCommoditySp {
                representation: BlockRepReport::from_rep(&crate::netgraph::block_representation(
                    tree,
                )),
            },
            Classification::BlockMatching { reps } => ClassificationReport::BlockMatching {
                representations: reps.iter().map(BlockRepReport::from_rep).collect(),
            },
            Classification::NonSeriesParallel { commodity, kernel } => {
                ClassificationReport::NonSeriesParallel {
                    commodity: *commodity,
                    kernel_edges: kernel.edge_ids().into_iter().collect(),
                }
            }
            Classification::NonBlockMatching {
                commodity_a,
                commodity_b,
                block_a,
                block_b,
            } => ClassificationReport::NonBlockMatching {
                commodity_a: *commodity_a,
                commodity_b: *commodity_b,
                block_a: BlockReport::from_block(block_a),
                block_b: BlockReport::from_block(block_b),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumSideReport {
    pub is_equilibrium: bool,
    pub iterations: usize,
    pub worst_gap: f64,
    pub edge_flows: BTreeMap<String, f64>,
    /// Per commodity, per class: (diversity parameter, amount, cost).
    pub class_costs: Vec<Vec<(f64, f64, f64)>>,
}

impl EquilibriumSideReport {
    pub fn from_solved(inst: &Instance, solved: &Solved) -> Self {
        Self::from_flow(inst, &solved.flow, &solved.report, solved.iterations)
    }

    pub fn from_flow(
        inst: &Instance,
        flow: &crate::equilibrium::ClassFlow,
        report: &EquilibriumReport,
        iterations: usize,
    ) -> Self {
        let ef = edge_flows(inst, flow).expect("solved flows are feasible");
        let class_costs = inst
            .commodities
            .iter()
            .enumerate()
            .map(|(k, com)| {
                com.classes
                    .iter()
                    .enumerate()
                    .map(|(i, cl)| (cl.r, cl.amount, report.class_costs[k][i]))
                    .collect()
            })
            .collect();
        EquilibriumSideReport {
            is_equilibrium: report.is_equilibrium,
            iterations,
            worst_gap: report.worst.as_ref().map(|w| w.gap).unwrap_or(0.0),
            edge_flows: ef,
            class_costs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AuditViolationReport {
    CrossBlockEdge {
        edge: String,
        from_block: usize,
        to_block: usize,
    },
    EdgeOffAllPaths {
        edge: String,
    },
    PathEscapesBlock {
        block: usize,
        path: EdgePath,
    },
}

impl AuditViolationReport {
    pub fn from_violation(v: &AuditViolation) -> Self {
        match v {
            AuditViolation::CrossBlockEdge {
                edge,
                from_block,
                to_block,
            } => AuditViolationReport::CrossBlockEdge {
                edge: edge.clone(),
                from_block: *from_block,
                to_block: *to_block,
            },
            AuditViolation::EdgeOffAllPaths { edge } => AuditViolationReport::EdgeOffAllPaths {
                edge: edge.clone(),
            },
            AuditViolation::PathEscapesBlock { block, path } => {
                AuditViolationReport::PathEscapesBlock {
                    block: *block,
                    path: path.clone(),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstructionReport {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_bar: Option<f64>,
    pub demand_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e2: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<EdgePath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<EdgePath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p3: Option<EdgePath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_const: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commodity_1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub commodity_2: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_c_ht: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_c_hm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic_gap: Option<f64>,
}

impl ConstructionReport {
    pub fn from_certificate(cert: &HurtCertificate) -> Self {
        let t: &ConstructionTrace = &cert.trace;
        ConstructionReport {
            kind: t.kind.clone(),
            r0: t.r0,
            d0: t.d0,
            r_bar: t.r_bar,
            demand_scale: t.demand_scale,
            e1: t.e1.clone(),
            e2: t.e2.clone(),
            p1: t.p1.clone(),
            p2: t.p2.clone(),
            p3: t.p3.clone(),
            n_const: t.n_const,
            m_const: t.m_const,
            case: t.case.clone(),
            commodity_1: t.commodity_1,
            commodity_2: t.commodity_2,
            notes: t.notes.clone(),
            analytic_c_ht: cert.analytic_c_ht,
            analytic_c_hm: cert.analytic_c_hm,
            analytic_gap: cert.analytic_gap,
        }
    }
}

/// The machine-readable outcome of one CLI command.
#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub command: String,
    pub instance_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub is_average_respecting: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dead_edges: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heterogeneous: Option<EquilibriumSideReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneous: Option<EquilibriumSideReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_ht: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_hm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<Vec<Vec<AuditViolationReport>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportFile {
    pub fn new(command: &str, digest: String) -> Self {
        ReportFile {
            command: command.to_string(),
            instance_digest: digest,
            classification: None,
            is_average_respecting: None,
            dead_edges: None,
            heterogeneous: None,
            homogeneous: None,
            c_ht: None,
            c_hm: None,
            verdict: None,
            construction: None,
            audit: None,
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
