//! Constructors for certified instances on which heterogeneity strictly
//! increases total user cost: the Braess-graph family for any strictly
//! heterogeneous demand, its embedding into arbitrary non-series-parallel
//! networks, the two-commodity three-path instance, its transplantation
//! onto any non-block-matching network, and the two-link example showing
//! why demands must respect commodity averages. Every constructor solves
//! both equilibria of the instance it builds and refuses to return an
//! unverified certificate.

mod embed;
mod nonbm;

pub use embed::{embed_braess, find_braess_minor, BraessEmbedding, BRAESS_ARCS};
pub use nonbm::non_block_matching_hurt;

use crate::costfn::{monotone_through, CostFn, CostFnError, EdgeFunctions};
use crate::equilibrium::{
    diversity_verdict, edge_flows, is_average_respecting, Commodity, DemandClass, EqError,
    Instance, SolveOptions, Verdict, VerdictReport,
};
use crate::netgraph::{CommoditySpec, EdgeId, EdgePath, NetError, Network};
use thiserror::Error;

/// Certificates must beat the homogeneous cost by strictly more than this.
pub const MIN_HURT_GAP: f64 = 1e-6;
/// Analytic predictions must match solved totals this closely.
pub const ANALYTIC_TOL: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("demand must have at least two distinct diversity parameters")]
    NotStrictlyHeterogeneous,
    #[error("no Braess embedding exists (the network is series-parallel)")]
    NotFound,
    #[error("network classifies as conforming; no hurt instance exists on it")]
    ClassifiedConforming,
    #[error("construction failed: {0}")]
    ConstructionFailed(String),
    #[error("self-verification failed: {0}")]
    VerificationFailed(String),
    #[error(transparent)]
    Eq(#[from] EqError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Cost(#[from] CostFnError),
}

/// How a certified instance was put together, for the report file.
#[derive(Debug, Clone, Default)]
pub struct ConstructionTrace {
    pub kind: String,
    pub r0: Option<f64>,
    pub d0: Option<f64>,
    pub r_bar: Option<f64>,
    /// Input demand was divided by this to normalize to one unit.
    pub demand_scale: f64,
    pub p1: Option<EdgePath>,
    pub p2: Option<EdgePath>,
    pub p3: Option<EdgePath>,
    pub e1: Option<EdgeId>,
    pub e2: Option<EdgeId>,
    pub n_const: Option<f64>,
    pub m_const: Option<f64>,
    pub case: Option<String>,
    /// Commodity indices cast as the branching and the forced commodity.
    pub commodity_1: Option<usize>,
    pub commodity_2: Option<usize>,
    pub notes: Vec<String>,
}

/// A constructed instance together with its verified equilibria.
#[derive(Debug, Clone)]
pub struct HurtCertificate {
    pub instance: Instance,
    pub analytic_c_ht: Option<f64>,
    pub analytic_c_hm: Option<f64>,
    /// Predicted heterogeneous-minus-homogeneous cost difference.
    pub analytic_gap: Option<f64>,
    pub solved: VerdictReport,
    pub trace: ConstructionTrace,
}

impl HurtCertificate {
    pub fn solved_gap(&self) -> f64 {
        self.solved.c_ht - self.solved.c_hm
    }
}

pub(crate) fn normalize_demand(classes: &[DemandClass]) -> Result<(Vec<DemandClass>, f64), ConstructError> {
    let total: f64 = classes.iter().map(|c| c.amount).sum();
    if total <= 0.0 {
        return Err(ConstructError::NotStrictlyHeterogeneous);
    }
    let scaled = classes
        .iter()
        .map(|c| DemandClass::new(c.r, c.amount / total))
        .collect();
    Ok((scaled, total))
}

pub(crate) fn is_strictly_heterogeneous(classes: &[DemandClass]) -> bool {
    classes
        .iter()
        .any(|c| c.amount > 0.0 && c.r != classes[0].r)
        && classes.len() >= 2
}

/// Splitting parameter for the Braess construction: a threshold `r0` with
/// `r_min <= r0 < r_bar` such that the demand `d0` at or below it keeps
/// the predicted cost difference positive. Candidates are the midpoints of
/// the feasible stretch of each interval on which `d0` is constant; the
/// largest feasible candidate keeps every class strictly away from the
/// threshold.
pub fn choose_r0(classes: &[DemandClass]) -> Result<(f64, f64), ConstructError> {
    if !is_strictly_heterogeneous(classes) {
        return Err(ConstructError::NotStrictlyHeterogeneous);
    }
    let total: f64 = classes.iter().map(|c| c.amount).sum();
    debug_assert!((total - 1.0).abs() < 1e-9, "demand must be normalized");
    let r_bar: f64 = classes.iter().map(|c| c.r * c.amount).sum();
    let mut values: Vec<f64> = classes.iter().map(|c| c.r).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let r_min = values[0];
    let mut best: Option<(f64, f64)> = None;
    for (j, &v) in values.iter().enumerate() {
        if v >= r_bar {
            break;
        }
        let d0: f64 = classes
            .iter()
            .filter(|c| c.r <= v)
            .map(|c| c.amount)
            .sum();
        // gap(r0) = (r_bar - r0)/2 + d0*(r_min - r0) is decreasing in r0;
        // it crosses zero at the root below
        let root = (r_bar / 2.0 + d0 * r_min) / (0.5 + d0);
        let next = values.get(j + 1).copied().unwrap_or(f64::INFINITY);
        let upper = root.min(next).min(r_bar);
        if upper > v {
            let candidate = 0.5 * (v + upper);
            if best.map(|(r, _)| candidate > r).unwrap_or(true) {
                best = Some((candidate, d0));
            }
        }
    }
    best.ok_or(ConstructError::NotStrictlyHeterogeneous)
}

/// Shared parameters of the Braess-graph constructions.
#[derive(Debug, Clone)]
pub(crate) struct BraessParams {
    pub classes: Vec<DemandClass>,
    pub scale: f64,
    pub r0: f64,
    pub d0: f64,
    pub r_bar: f64,
    pub analytic_c_ht: f64,
    pub analytic_c_hm: f64,
}

impl BraessParams {
    pub fn derive(classes: &[DemandClass]) -> Result<Self, ConstructError> {
        let (classes, scale) = normalize_demand(classes)?;
        if !is_strictly_heterogeneous(&classes) {
            return Err(ConstructError::NotStrictlyHeterogeneous);
        }
        let (r0, d0) = choose_r0(&classes)?;
        let r_bar: f64 = classes.iter().map(|c| c.r * c.amount).sum();
        let low_excess: f64 = classes
            .iter()
            .filter(|c| c.r <= r0)
            .map(|c| c.amount * (c.r - r0))
            .sum();
        Ok(BraessParams {
            scale,
            r0,
            d0,
            r_bar,
            analytic_c_ht: 3.0 + r_bar + low_excess,
            analytic_c_hm: 3.0 + (r_bar + r0) / 2.0,
            classes,
        })
    }

    pub fn analytic_gap(&self) -> f64 {
        self.analytic_c_ht - self.analytic_c_hm
    }

    /// The anchored rising function shared by the entry and exit arcs.
    pub fn h(&self) -> Result<CostFn, CostFnError> {
        monotone_through(
            &[
                (0.5, 1.0),
                (0.5 + self.d0 / 2.0, 1.0 + (self.r_bar - self.r0) / 2.0),
            ],
            1.0,
        )
    }

    /// Constant latency of the two side arcs.
    pub fn side_const(&self) -> f64 {
        2.0 + (self.r_bar + self.r0) / 2.0
    }
}

pub(crate) fn braess_network() -> Network {
    Network::from_edges([
        ("su", "s", "u"),
        ("ut", "u", "t"),
        ("uv", "u", "v"),
        ("sv", "s", "v"),
        ("vt", "v", "t"),
    ])
    .expect("static network is valid")
}

fn braess_certificate(
    kind: &str,
    params: BraessParams,
    fns: EdgeFunctions,
    analytic_c_ht: f64,
    analytic_c_hm: f64,
) -> Result<HurtCertificate, ConstructError> {
    let instance = Instance::new(
        braess_network(),
        fns,
        vec![Commodity {
            spec: CommoditySpec::new("s", "t"),
            classes: params.classes.clone(),
        }],
    )?;
    let trace = ConstructionTrace {
        kind: kind.to_string(),
        r0: Some(params.r0),
        d0: Some(params.d0),
        r_bar: Some(params.r_bar),
        demand_scale: params.scale,
        ..Default::default()
    };
    finish_certificate(
        instance,
        Some(analytic_c_ht),
        Some(analytic_c_hm),
        trace,
        &SolveOptions::default(),
    )
}

/// Solves both equilibria, enforces a strict hurt gap, and checks the
/// analytic predictions when present.
pub(crate) fn finish_certificate(
    instance: Instance,
    analytic_c_ht: Option<f64>,
    analytic_c_hm: Option<f64>,
    trace: ConstructionTrace,
    opts: &SolveOptions,
) -> Result<HurtCertificate, ConstructError> {
    let solved = diversity_verdict(&instance, opts)?;
    if solved.verdict != Verdict::Hurts || solved.c_ht - solved.c_hm <= MIN_HURT_GAP {
        return Err(ConstructError::VerificationFailed(format!(
            "expected a strict hurt, got {} (c_ht {} vs c_hm {})",
            solved.verdict, solved.c_ht, solved.c_hm
        )));
    }
    for (name, analytic, got) in [
        ("heterogeneous", analytic_c_ht, solved.c_ht),
        ("homogeneous", analytic_c_hm, solved.c_hm),
    ] {
        if let Some(want) = analytic {
            if (want - got).abs() > ANALYTIC_TOL {
                return Err(ConstructError::VerificationFailed(format!(
                    "{name} total {got} deviates from analytic {want}"
                )));
            }
        }
    }
    let analytic_gap = match (analytic_c_ht, analytic_c_hm) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    Ok(HurtCertificate {
        instance,
        analytic_c_ht,
        analytic_c_hm,
        analytic_gap,
        solved,
        trace,
    })
}

/// The Braess-graph instance that hurts for any strictly heterogeneous
/// demand: rising anchored latencies on the entry and exit arcs, constant
/// side arcs, and a unit-deviation shortcut.
pub fn braess_hurt(classes: &[DemandClass]) -> Result<HurtCertificate, ConstructError> {
    let params = BraessParams::derive(classes)?;
    let h = params.h()?;
    let mut fns = EdgeFunctions::new();
    fns.insert("su", h.clone(), CostFn::zero());
    fns.insert("vt", h, CostFn::zero());
    fns.insert("ut", CostFn::constant(params.side_const()), CostFn::zero());
    fns.insert("sv", CostFn::constant(params.side_const()), CostFn::zero());
    fns.insert("uv", CostFn::constant(1.0), CostFn::constant(1.0));
    let (c_ht, c_hm) = (params.analytic_c_ht, params.analytic_c_hm);
    braess_certificate("braess", params, fns, c_ht, c_hm)
}

/// The affine-only variant: the anchored function becomes the line through
/// the origin with `h(1/2) = A`, shifting every latency by multiples of
/// `A = (r_bar - r0) / (2 d0)`.
pub fn braess_hurt_affine(classes: &[DemandClass]) -> Result<HurtCertificate, ConstructError> {
    let params = BraessParams::derive(classes)?;
    let a = (params.r_bar - params.r0) / (2.0 * params.d0);
    let h = CostFn::affine(2.0 * a, 0.0);
    let side = 2.0 * a + (params.r_bar + params.r0) / 2.0;
    let mut fns = EdgeFunctions::new();
    fns.insert("su", h.clone(), CostFn::zero());
    fns.insert("vt", h, CostFn::zero());
    fns.insert("ut", CostFn::constant(side), CostFn::zero());
    fns.insert("sv", CostFn::constant(side), CostFn::zero());
    fns.insert("uv", CostFn::constant(a), CostFn::constant(1.0));
    // same split as the anchored variant, shifted by 3A - 3
    let c_ht = params.analytic_c_ht + 3.0 * a - 3.0;
    let c_hm = params.analytic_c_hm + 3.0 * a - 3.0;
    braess_certificate("braess-affine", params, fns, c_ht, c_hm)
}

/// Affine-variant slope parameter, exposed for reporting.
pub fn affine_slope(classes: &[DemandClass]) -> Result<f64, ConstructError> {
    let params = BraessParams::derive(classes)?;
    Ok((params.r_bar - params.r0) / (2.0 * params.d0))
}

/// The two-commodity three-path instance: one commodity chooses between a
/// cheap constant-deviation branch and a rising detour, the other is
/// forced across the detour's bottleneck edge.
pub fn two_commodity_hurt() -> Result<HurtCertificate, ConstructError> {
    let net = Network::from_edges([
        ("in1", "s1", "u"),
        ("e1", "u", "v"),
        ("h1a", "u", "x"),
        ("e2", "x", "y"),
        ("h1b", "y", "v"),
        ("out1", "v", "t1"),
        ("in2", "s2", "x"),
        ("out2", "y", "t2"),
    ])?;
    let mut fns = EdgeFunctions::new();
    fns.insert("e1", CostFn::constant(1.0), CostFn::constant(2.0));
    fns.insert(
        "e2",
        monotone_through(&[(1.0, 3.0), (1.25, 9.0)], 1.0)?,
        CostFn::zero(),
    );
    for e in ["in1", "h1a", "h1b", "out1", "in2", "out2"] {
        fns.insert(e, CostFn::zero(), CostFn::zero());
    }
    let instance = Instance::new(
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
    )?;
    let trace = ConstructionTrace {
        kind: "two-commodity".into(),
        demand_scale: 1.0,
        p1: Some(vec!["in1".into(), "e1".into(), "out1".into()]),
        p2: Some(vec!["in2".into(), "e2".into(), "out2".into()]),
        p3: Some(vec![
            "in1".into(),
            "h1a".into(),
            "e2".into(),
            "h1b".into(),
            "out1".into(),
        ]),
        e1: Some("e1".into()),
        e2: Some("e2".into()),
        ..Default::default()
    };
    finish_certificate(
        instance,
        Some(12.0),
        Some(6.0),
        trace,
        &SolveOptions::default(),
    )
}

/// Two parallel links carrying two commodities whose average parameters
/// differ: heterogeneity within the second commodity then hurts even
/// though both subnetworks are trivially series-parallel.
pub fn non_average_respecting_example() -> Result<HurtCertificate, ConstructError> {
    let net = Network::from_edges([("up", "s", "t"), ("lo", "s", "t")])?;
    let mut fns = EdgeFunctions::new();
    fns.insert(
        "up",
        monotone_through(&[(1.0, 2.0), (10.0 / 9.0, 10.0)], 1.0)?,
        CostFn::zero(),
    );
    fns.insert("lo", CostFn::constant(1.0), CostFn::constant(1.0));
    let instance = Instance::new(
        net,
        fns,
        vec![
            Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![DemandClass::new(10.0, 1.0)],
            },
            Commodity {
                spec: CommoditySpec::new("s", "t"),
                classes: vec![
                    DemandClass::new(9.0, 1.0 / 9.0),
                    DemandClass::new(0.0, 8.0 / 9.0),
                ],
            },
        ],
    )?;
    if is_average_respecting(&instance)? {
        return Err(ConstructError::ConstructionFailed(
            "example must not be average-respecting".into(),
        ));
    }
    let trace = ConstructionTrace {
        kind: "non-average-respecting".into(),
        demand_scale: 1.0,
        notes: vec![
            "anchored rising latency sits on the upper link; the lower link carries \
             constant latency 1 and deviation 1 so that only single-minded players use it"
                .into(),
        ],
        ..Default::default()
    };
    finish_certificate(
        instance,
        Some(12.0),
        Some(4.0),
        trace,
        &SolveOptions::default(),
    )
}

/// Checks that every edge whose latency is the blocking constant `m`
/// carries (numerically) no flow at either equilibrium of a certificate.
pub(crate) fn assert_blocked_edges_flowless(
    cert: &HurtCertificate,
    m: f64,
) -> Result<(), ConstructError> {
    let blocked: Vec<EdgeId> = cert
        .instance
        .functions
        .iter()
        .filter(|(_, (lat, _))| matches!(lat, CostFn::Constant(c) if *c == m))
        .map(|(e, _)| e.clone())
        .collect();
    for (label, inst, flow) in [
        ("heterogeneous", &cert.instance, &cert.solved.heterogeneous.flow),
        ("homogeneous", &cert.solved.homogenized, &cert.solved.homogeneous.flow),
    ] {
        let ef = edge_flows(inst, flow)?;
        for e in &blocked {
            let f = ef.get(e).copied().unwrap_or(0.0);
            if f >= 1e-9 {
                return Err(ConstructError::VerificationFailed(format!(
                    "blocked edge `{e}` carries {f} at the {label} equilibrium"
                )));
            }
        }
    }
    Ok(())
}
