//! Edge cost functions: latency and deviation per edge, path costs as
//! latency plus the diversity-weighted deviation, anchored piecewise-linear
//! builders, and monotonicity validation of the combined cost.

use crate::netgraph::{EdgeId, Network};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CostFnError {
    #[error("flow must be nonnegative, got {0}")]
    NegativeFlow(f64),
    #[error("anchors must be strictly increasing in x and y: {0}")]
    NonMonotoneAnchors(String),
    #[error("edge `{0}` has no assigned functions or flow")]
    MissingEdge(EdgeId),
}

/// A scalar cost function of edge flow.
#[derive(Debug, Clone, PartialEq)]
pub enum CostFn {
    Constant(f64),
    /// `a * x + b`.
    Affine(f64, f64),
    PiecewiseLinear(Pwl),
}

/// Continuous piecewise-linear function through `(xs[i], ys[i])`, extended
/// below the first breakpoint and above the last with the given slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub left_slope: f64,
    pub right_slope: f64,
}

impl Pwl {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self, CostFnError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(CostFnError::NonMonotoneAnchors(
                "need an equal, nonzero number of x and y values".into(),
            ));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CostFnError::NonMonotoneAnchors(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Pwl {
            xs,
            ys,
            left_slope,
            right_slope,
        })
    }

    fn value_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.left_slope * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.right_slope * (x - self.xs[n - 1]);
        }
        let i = match self
            .xs
            .binary_search_by(|p| p.partial_cmp(&x).expect("finite breakpoints"))
        {
            Ok(i) => return self.ys[i],
            Err(i) => i,
        };
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

impl CostFn {
    pub fn constant(c: f64) -> Self {
        CostFn::Constant(c)
    }

    pub fn affine(a: f64, b: f64) -> Self {
        CostFn::Affine(a, b)
    }

    pub fn zero() -> Self {
        CostFn::Constant(0.0)
    }

    /// Exact evaluation at a nonnegative flow.
    pub fn eval(&self, x: f64) -> Result<f64, CostFnError> {
        if x < 0.0 {
            return Err(CostFnError::NegativeFlow(x));
        }
        Ok(self.eval_raw(x))
    }

    fn eval_raw(&self, x: f64) -> f64 {
        match self {
            CostFn::Constant(c) => *c,
            CostFn::Affine(a, b) => a * x + b,
            CostFn::PiecewiseLinear(p) => p.value_at(x),
        }
    }

    /// Breakpoints and the slope on each maximal linear piece, covering
    /// `x >= 0`. Pieces are `(lo, hi, slope)` with `hi = +inf` at the end.
    pub fn segments(&self) -> Vec<(f64, f64, f64)> {
        match self {
            CostFn::Constant(_) => vec![(0.0, f64::INFINITY, 0.0)],
            CostFn::Affine(a, _) => vec![(0.0, f64::INFINITY, *a)],
            CostFn::PiecewiseLinear(p) => {
                let mut out = Vec::new();
                let n = p.xs.len();
                out.push((f64::NEG_INFINITY, p.xs[0], p.left_slope));
                for i in 1..n {
                    let slope = (p.ys[i] - p.ys[i - 1]) / (p.xs[i] - p.xs[i - 1]);
                    out.push((p.xs[i - 1], p.xs[i], slope));
                }
                out.push((p.xs[n - 1], f64::INFINITY, p.right_slope));
                out.retain(|&(_, hi, _)| hi > 0.0);
                if let Some(first) = out.first_mut() {
                    first.0 = first.0.max(0.0);
                }
                out
            }
        }
    }
}

/// Anchored strictly-increasing builder: a piecewise-linear function
/// hitting every `(x, y)` anchor exactly, linearly interpolated between
/// them, and extended past the extremes with slope
/// `max(min_slope, adjacent segment slope)`.
pub fn monotone_through(points: &[(f64, f64)], min_slope: f64) -> Result<CostFn, CostFnError> {
    if points.is_empty() {
        return Err(CostFnError::NonMonotoneAnchors("no anchor points".into()));
    }
    if min_slope <= 0.0 {
        return Err(CostFnError::NonMonotoneAnchors(format!(
            "min_slope must be positive, got {min_slope}"
        )));
    }
    if points.windows(2).any(|w| w[0].0 >= w[1].0 || w[0].1 >= w[1].1) {
        return Err(CostFnError::NonMonotoneAnchors(format!(
            "anchors not strictly increasing: {points:?}"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (left, right) = if points.len() == 1 {
        (min_slope, min_slope)
    } else {
        let first = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        let n = xs.len();
        let last = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
        (min_slope.max(first), min_slope.max(last))
    };
    Ok(CostFn::PiecewiseLinear(Pwl::new(xs, ys, left, right)?))
}

/// Per-edge pair of latency and deviation functions.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunctions {
    map: BTreeMap<EdgeId, (CostFn, CostFn)>,
}

impl EdgeFunctions {
    pub fn new() -> Self {
        EdgeFunctions {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, edge: impl Into<String>, latency: CostFn, deviation: CostFn) {
        self.map.insert(edge.into(), (latency, deviation));
    }

    pub fn get(&self, edge: &str) -> Option<&(CostFn, CostFn)> {
        self.map.get(edge)
    }

    pub fn latency(&self, edge: &str) -> Result<&CostFn, CostFnError> {
        self.map
            .get(edge)
            .map(|(l, _)| l)
            .ok_or_else(|| CostFnError::MissingEdge(edge.to_string()))
    }

    pub fn deviation(&self, edge: &str) -> Result<&CostFn, CostFnError> {
        self.map
            .get(edge)
            .map(|(_, s)| s)
            .ok_or_else(|| CostFnError::MissingEdge(edge.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EdgeId, &(CostFn, CostFn))> {
        self.map.iter()
    }

    /// True iff every network edge has exactly one function pair.
    pub fn covers(&self, net: &Network) -> bool {
        net.edges().len() == self.map.len()
            && net.edges().iter().all(|e| self.map.contains_key(&e.id))
    }
}

impl Default for EdgeFunctions {
    fn default() -> Self {
        Self::new()
    }
}

/// Cost of a path at the given edge flows for a user with diversity
/// parameter `r`: total latency plus `r` times total deviation.
pub fn path_cost(
    fns: &EdgeFunctions,
    edge_flows: &BTreeMap<EdgeId, f64>,
    path: &[EdgeId],
    r: f64,
) -> Result<f64, CostFnError> {
    let mut lat = 0.0;
    let mut dev = 0.0;
    for edge in path {
        let flow = *edge_flows
            .get(edge)
            .ok_or_else(|| CostFnError::MissingEdge(edge.clone()))?;
        let (l, s) = fns
            .get(edge)
            .ok_or_else(|| CostFnError::MissingEdge(edge.clone()))?;
        lat += l.eval(flow)?;
        dev += s.eval(flow)?;
    }
    Ok(lat + r * dev)
}

/// A segment on which the combined cost `latency + r * deviation` has
/// negative slope for some diversity parameter in `[0, r_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub edge: EdgeId,
    pub lo: f64,
    pub hi: f64,
    pub r: f64,
    pub combined_slope: f64,
}

/// Checks `slope(latency) >= 0` and `slope(latency) + r * slope(deviation)
/// >= 0` at `r` in `{0, r_max}` on every segment of the common breakpoint
/// refinement over `x >= 0`. Linearity in `r` makes the two endpoints
/// sufficient.
pub fn validate_monotonicity(fns: &EdgeFunctions, r_max: f64) -> Vec<MonotonicityViolation> {
    let mut out = Vec::new();
    for (edge, (lat, dev)) in fns.iter() {
        let lseg = lat.segments();
        let dseg = dev.segments();
        let mut cuts: Vec<f64> = Vec::new();
        for &(lo, hi, _) in lseg.iter().chain(dseg.iter()) {
            if lo.is_finite() && lo > 0.0 {
                cuts.push(lo);
            }
            if hi.is_finite() && hi > 0.0 {
                cuts.push(hi);
            }
        }
        cuts.push(0.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let slope_at = |segs: &[(f64, f64, f64)], x: f64| -> f64 {
            segs.iter()
                .find(|&&(lo, hi, _)| x >= lo && x < hi)
                .map(|&(_, _, s)| s)
                .unwrap_or_else(|| segs.last().map(|&(_, _, s)| s).unwrap_or(0.0))
        };
        let mut intervals: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            intervals.push((w[0], w[1]));
        }
        intervals.push((*cuts.last().unwrap(), f64::INFINITY));
        for (lo, hi) in intervals {
            let mid = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                lo + 1.0
            };
            let ls = slope_at(&lseg, mid);
            let ds = slope_at(&dseg, mid);
            for r in [0.0, r_max] {
                let combined = ls + r * ds;
                if combined < 0.0 {
                    out.push(MonotonicityViolation {
                        edge: edge.clone(),
                        lo,
                        hi,
                        r,
                        combined_slope: combined,
                    });
                }
            }
        }
    }
    out
}
