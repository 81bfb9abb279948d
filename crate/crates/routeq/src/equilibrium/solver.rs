//! Equilibrium computation by the method of successive averages: each
//! class repeatedly moves a vanishing fraction of its demand onto its
//! current best-response path, and the verifier decides when to stop.
//!
//! Raw averaging converges like 1/t, so three cheap candidate transforms
//! are checked alongside the raw iterate: a support snap that clears the
//! decay slivers off abandoned paths, a Richardson extrapolation that
//! cancels the 1/t averaging bias, and a cost-equalization polish that
//! shifts flow from costlier used paths onto each class's cheapest path by
//! the Newton step (exact between breakpoints of the piecewise-linear
//! costs). Whatever candidate first passes verification is returned; the
//! verifier, not the iteration, is the source of truth.
//!
//! The solver works on an index-based view of the instance (edge ids and
//! paths resolved to integers once) and converts back at the end, where
//! the public verifier issues the authoritative report.

use super::{
    verify_equilibrium_with, ClassFlow, EqError, EquilibriumReport, Instance,
    DEFAULT_USED_THRESHOLD,
};
use crate::costfn::CostFn;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Wardrop tolerance the returned flow must satisfy.
    pub eps: f64,
    pub max_iters: usize,
    /// Cap on simple paths enumerated per commodity.
    pub path_cap: usize,
    /// Path flows below this are ignored by the Wardrop check.
    pub used_threshold: f64,
    /// Dead zone of the verdict comparison.
    pub tie_tol: f64,
    /// Optional seed perturbing the uniform initialization, to probe
    /// equilibrium non-uniqueness.
    pub seed: Option<u64>,
    /// Try candidate flows every this many iterations.
    pub check_every: usize,
    /// Relative (to class amount) threshold below which the snap candidate
    /// clears a path's flow.
    pub snap_rel: f64,
    /// Equalization passes applied when polishing a candidate.
    pub polish_passes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps: 1e-6,
            max_iters: 200_000,
            path_cap: 10_000,
            used_threshold: DEFAULT_USED_THRESHOLD,
            tie_tol: 1e-6,
            seed: None,
            check_every: 4,
            snap_rel: 1e-4,
            polish_passes: 8,
        }
    }
}

/// A flow that passed verification, with solver diagnostics.
#[derive(Debug, Clone)]
pub struct Solved {
    pub flow: ClassFlow,
    pub report: EquilibriumReport,
    pub iterations: usize,
}

/// Per-class path amounts, same shape as `ClassFlow::amounts`.
type Amounts = Vec<Vec<Vec<f64>>>;

/// Index-resolved instance view: edge ids and path edge lists become
/// integers so the iteration loop never touches strings.
struct Indexed {
    /// (latency, deviation) per edge index.
    fns: Vec<(CostFn, CostFn)>,
    /// Per commodity: (r, amount) per class.
    classes: Vec<Vec<(f64, f64)>>,
    /// Per commodity: paths as edge-index lists.
    paths: Vec<Vec<Vec<usize>>>,
}

impl Indexed {
    fn build(inst: &Instance, skeleton: &ClassFlow) -> Self {
        let index_of: BTreeMap<&str, usize> = inst
            .network
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect();
        let fns = inst
            .network
            .edges()
            .iter()
            .map(|e| {
                let (l, d) = inst.functions.get(&e.id).expect("instance covers edges");
                (l.clone(), d.clone())
            })
            .collect();
        let classes = inst
            .commodities
            .iter()
            .map(|c| c.classes.iter().map(|cl| (cl.r, cl.amount)).collect())
            .collect();
        let paths = skeleton
            .paths
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| p.iter().map(|e| index_of[e.as_str()]).collect())
                    .collect()
            })
            .collect();
        Indexed {
            fns,
            classes,
            paths,
        }
    }

    fn edge_flows(&self, amounts: &Amounts) -> Vec<f64> {
        let mut ef = vec![0.0; self.fns.len()];
        for (k, rows) in amounts.iter().enumerate() {
            for row in rows {
                for (p, &a) in row.iter().enumerate() {
                    if a != 0.0 {
                        for &e in &self.paths[k][p] {
                            ef[e] += a;
                        }
                    }
                }
            }
        }
        ef
    }

    /// (latency, deviation) totals per path of one commodity.
    fn path_lat_dev(&self, k: usize, ef: &[f64]) -> Vec<(f64, f64)> {
        self.paths[k]
            .iter()
            .map(|p| {
                let mut lat = 0.0;
                let mut dev = 0.0;
                for &e in p {
                    let (l, d) = &self.fns[e];
                    lat += eval(l, ef[e]);
                    dev += eval(d, ef[e]);
                }
                (lat, dev)
            })
            .collect()
    }

    /// Worst used-path optimality gap over all commodities and classes.
    fn worst_gap(&self, amounts: &Amounts, used_threshold: f64) -> f64 {
        let ef = self.edge_flows(amounts);
        let mut worst: f64 = 0.0;
        for (k, rows) in amounts.iter().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let ld = self.path_lat_dev(k, &ef);
            for (i, row) in rows.iter().enumerate() {
                let r = self.classes[k][i].0;
                let mut min_cost = f64::INFINITY;
                for &(lat, dev) in &ld {
                    min_cost = min_cost.min(lat + r * dev);
                }
                for (p, &a) in row.iter().enumerate() {
                    if a > used_threshold {
                        let c = ld[p].0 + r * ld[p].1;
                        worst = worst.max(c - min_cost);
                    }
                }
            }
        }
        worst
    }
}

fn eval(f: &CostFn, x: f64) -> f64 {
    f.eval(x.max(0.0)).expect("nonnegative flow")
}

/// Slope of `latency + r * deviation` at flow `x` (right derivative).
fn combined_slope(fns: &(CostFn, CostFn), r: f64, x: f64) -> f64 {
    let slope_at = |f: &CostFn| -> f64 {
        f.segments()
            .iter()
            .find(|&&(lo, hi, _)| x >= lo && x < hi)
            .map(|&(_, _, s)| s)
            .unwrap_or_else(|| f.segments().last().map(|&(_, _, s)| s).unwrap_or(0.0))
    };
    slope_at(&fns.0) + r * slope_at(&fns.1)
}

/// Runs successive averaging from a uniform start until a candidate flow
/// verifies at `opts.eps` or `opts.max_iters` is reached.
pub fn solve_equilibrium(inst: &Instance, opts: &SolveOptions) -> Result<Solved, EqError> {
    let skeleton = ClassFlow::zero(inst, opts.path_cap)?;
    let idx = Indexed::build(inst, &skeleton);
    let mut amounts = initial_amounts(&idx, opts);
    let mut prev = amounts.clone();
    let mut best: Option<(Amounts, f64)> = None;
    // smoothed iterate at roughly half the current iteration count, for
    // extrapolating away the averaging bias
    let mut snapshot: Option<(usize, Amounts)> = None;

    for t in 0..=opts.max_iters {
        if t % opts.check_every.max(1) == 0 || t == opts.max_iters {
            let smoothed = average(&amounts, &prev);
            if let Some(winner) =
                try_candidates(&idx, &amounts, &smoothed, &snapshot, opts, t, &mut best)
            {
                return finish(inst, skeleton, winner, t, opts);
            }
            match &snapshot {
                Some((th, _)) if t < th.saturating_mul(2).max(4) => {}
                _ if t >= 4 => snapshot = Some((t, smoothed)),
                _ => {}
            }
        }
        if t == opts.max_iters {
            break;
        }
        prev.clone_from(&amounts);
        step(&idx, &mut amounts, 1.0 / (t as f64 + 2.0));
    }

    let (best_amounts, best_gap) = best.expect("candidates were evaluated");
    let mut flow = skeleton;
    flow.amounts = best_amounts;
    let report = verify_equilibrium_with(inst, &flow, opts.eps, opts.used_threshold)?;
    Err(EqError::NoConvergence {
        max_iters: opts.max_iters,
        worst_gap: best_gap,
        flow: Box::new(flow),
        report: Box::new(report),
    })
}

/// Converts the winning amounts back to the public representation and has
/// the public verifier issue the authoritative report.
fn finish(
    inst: &Instance,
    skeleton: ClassFlow,
    amounts: Amounts,
    iterations: usize,
    opts: &SolveOptions,
) -> Result<Solved, EqError> {
    let mut flow = skeleton;
    flow.amounts = amounts;
    let report = verify_equilibrium_with(inst, &flow, opts.eps, opts.used_threshold)?;
    if !report.is_equilibrium {
        // the indexed check and the public verifier compute identical
        // costs, so disagreement means a bug rather than bad input
        return Err(EqError::InfeasibleFlow(
            "internal gap check accepted a flow the verifier rejects".into(),
        ));
    }
    Ok(Solved {
        flow,
        report,
        iterations,
    })
}

fn try_candidates(
    idx: &Indexed,
    raw: &Amounts,
    smoothed: &Amounts,
    snapshot: &Option<(usize, Amounts)>,
    opts: &SolveOptions,
    t: usize,
    best: &mut Option<(Amounts, f64)>,
) -> Option<Amounts> {
    let snapped = snap(idx, smoothed, opts);
    let mut candidates: Vec<Amounts> = Vec::with_capacity(5);
    candidates.push(equalize(idx, &snapped, opts));
    candidates.push(snapped);
    if let Some((th, half)) = snapshot {
        if t > *th {
            let extrap = snap(idx, &richardson(smoothed, t, half, *th), opts);
            candidates.push(equalize(idx, &extrap, opts));
            candidates.push(extrap);
        }
    }
    candidates.push(raw.clone());
    for cand in candidates {
        let gap = idx.worst_gap(&cand, opts.used_threshold);
        if gap <= opts.eps {
            return Some(cand);
        }
        if best.as_ref().map(|(_, g)| gap < *g).unwrap_or(true) {
            *best = Some((cand, gap));
        }
    }
    None
}

fn initial_amounts(idx: &Indexed, opts: &SolveOptions) -> Amounts {
    let mut rng = opts.seed.map(ChaCha8Rng::seed_from_u64);
    idx.classes
        .iter()
        .enumerate()
        .map(|(k, classes)| {
            let n = idx.paths[k].len();
            classes
                .iter()
                .map(|&(_, amount)| {
                    let mut weights = vec![1.0; n];
                    if let Some(rng) = rng.as_mut() {
                        for w in &mut weights {
                            *w += 1e-3 * rng.random::<f64>();
                        }
                    }
                    let total: f64 = weights.iter().sum();
                    weights.iter().map(|w| amount * w / total).collect()
                })
                .collect()
        })
        .collect()
}

/// One averaging step: every class blends its flow toward its
/// all-or-nothing best response at the current edge flows (ties to the
/// lowest path index), all classes moving simultaneously.
fn step(idx: &Indexed, amounts: &mut Amounts, gamma: f64) {
    let ef = idx.edge_flows(amounts);
    let mut responses: Vec<Vec<usize>> = Vec::with_capacity(idx.classes.len());
    for (k, classes) in idx.classes.iter().enumerate() {
        if classes.is_empty() {
            responses.push(Vec::new());
            continue;
        }
        let ld = idx.path_lat_dev(k, &ef);
        responses.push(
            classes
                .iter()
                .map(|&(r, _)| {
                    let mut arg = 0usize;
                    let mut best = f64::INFINITY;
                    for (p, &(lat, dev)) in ld.iter().enumerate() {
                        let c = lat + r * dev;
                        if c < best {
                            best = c;
                            arg = p;
                        }
                    }
                    arg
                })
                .collect(),
        );
    }
    for (k, classes) in idx.classes.iter().enumerate() {
        for (i, &(_, amount)) in classes.iter().enumerate() {
            let row = &mut amounts[k][i];
            for a in row.iter_mut() {
                *a *= 1.0 - gamma;
            }
            row[responses[k][i]] += gamma * amount;
        }
    }
}

fn average(a: &Amounts, b: &Amounts) -> Amounts {
    let mut out = a.clone();
    for (k, rows) in out.iter_mut().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v = 0.5 * (*v + b[k][i][p]);
            }
        }
    }
    out
}

/// Clears per-class path flows below `max(used_threshold, snap_rel *
/// amount)` and rescales the remainder to restore exact conservation.
fn snap(idx: &Indexed, amounts: &Amounts, opts: &SolveOptions) -> Amounts {
    let mut out = amounts.clone();
    for (k, classes) in idx.classes.iter().enumerate() {
        for (i, &(_, amount)) in classes.iter().enumerate() {
            let row = &mut out[k][i];
            let thresh = opts.used_threshold.max(opts.snap_rel * amount);
            let kept: f64 = row.iter().filter(|&&a| a >= thresh).sum();
            if kept <= 0.0 {
                continue;
            }
            let scale = amount / kept;
            for a in row.iter_mut() {
                *a = if *a >= thresh { *a * scale } else { 0.0 };
            }
        }
    }
    out
}

/// Extrapolates away a `c / t` averaging bias from two smoothed iterates
/// taken at different times; negatives are clamped and each class is
/// rescaled back to its amount.
fn richardson(late: &Amounts, t_late: usize, early: &Amounts, t_early: usize) -> Amounts {
    let (tl, te) = (t_late as f64, t_early as f64);
    let mut out = late.clone();
    for (k, rows) in out.iter_mut().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            let amount: f64 = late[k][i].iter().sum();
            let mut sum = 0.0;
            for (p, v) in row.iter_mut().enumerate() {
                *v = (tl * *v - te * early[k][i][p]) / (tl - te);
                if *v < 0.0 {
                    *v = 0.0;
                }
                sum += *v;
            }
            if sum > 0.0 {
                let scale = amount / sum;
                for v in row.iter_mut() {
                    *v *= scale;
                }
            } else {
                row.clone_from_slice(&late[k][i]);
            }
        }
    }
    out
}

/// Cost-equalization polish: repeatedly shifts flow from the currently
/// worst used path of a class onto that class's cheapest path by the
/// Newton step for their cost difference. Costs are refreshed after every
/// shift, and the step is exact while no breakpoint of the
/// piecewise-linear costs is crossed, so interior splits that plain
/// averaging only reaches at rate 1/t settle in a few dozen shifts.
fn equalize(idx: &Indexed, amounts: &Amounts, opts: &SolveOptions) -> Amounts {
    let mut out = amounts.clone();
    let mut ef = idx.edge_flows(&out);
    let inner_tol = (opts.eps * 0.25).max(1e-14);
    for _ in 0..opts.polish_passes {
        let mut moved = false;
        for (k, classes) in idx.classes.iter().enumerate() {
            for (i, &(r, _)) in classes.iter().enumerate() {
                for _ in 0..40 {
                    let ld = idx.path_lat_dev(k, &ef);
                    let costs: Vec<f64> = ld.iter().map(|&(l, d)| l + r * d).collect();
                    let q = costs
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite costs"))
                        .map(|(p, _)| p)
                        .expect("nonempty path set");
                    // worst used path
                    let mut worst: Option<(usize, f64)> = None;
                    for (p, &a) in out[k][i].iter().enumerate() {
                        if p != q && a > 0.0 {
                            let diff = costs[p] - costs[q];
                            if worst.map(|(_, d)| diff > d).unwrap_or(true) {
                                worst = Some((p, diff));
                            }
                        }
                    }
                    let (p, diff) = match worst {
                        Some((p, diff)) if diff > inner_tol => (p, diff),
                        _ => break,
                    };
                    // marginal rate of the cost difference in the shifted
                    // amount, over the symmetric difference of the paths
                    let mut rate = 0.0;
                    for &e in &idx.paths[k][p] {
                        if !idx.paths[k][q].contains(&e) {
                            rate += combined_slope(&idx.fns[e], r, ef[e]);
                        }
                    }
                    for &e in &idx.paths[k][q] {
                        if !idx.paths[k][p].contains(&e) {
                            rate += combined_slope(&idx.fns[e], r, ef[e]);
                        }
                    }
                    let a = out[k][i][p];
                    let delta = if rate > 0.0 { (diff / rate).min(a) } else { a };
                    if delta <= 0.0 {
                        break;
                    }
                    out[k][i][p] -= delta;
                    out[k][i][q] += delta;
                    for &e in &idx.paths[k][p] {
                        ef[e] -= delta;
                    }
                    for &e in &idx.paths[k][q] {
                        ef[e] += delta;
                    }
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    // restore exact conservation after float drift
    for (k, rows) in out.iter_mut().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            let amount = idx.classes[k][i].1;
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                let scale = amount / sum;
                for v in row.iter_mut() {
                    *v *= scale;
                }
            }
        }
    }
    out
}
