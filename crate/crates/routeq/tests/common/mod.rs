//! Shared fixtures and generators for the integration suites: the
//! non-series-parallel and non-block-matching corpora, the hand-built
//! instances, and seeded random instance generators.

#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use routeq::costfn::{CostFn, EdgeFunctions, Pwl};
use routeq::equilibrium::{Commodity, DemandClass, Instance};
use routeq::netgraph::{CommoditySpec, Network};

pub fn fixture_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn net(edges: &[(&str, &str, &str)]) -> Network {
    Network::from_edges(edges.iter().map(|&(i, t, h)| (i, t, h))).unwrap()
}

/// Single-commodity networks that are not series-parallel: the Braess
/// graph plus subdivided, augmented and composed variants.
pub fn nonsp_corpus() -> Vec<(&'static str, Network, &'static str, &'static str)> {
    let mut out = Vec::new();
    out.push((
        "ns01-braess",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns02-subdivided-shortcut",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uw", "u", "w"),
            ("wv", "w", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns03-fully-subdivided",
        net(&[
            ("su1", "s", "a"),
            ("su2", "a", "u"),
            ("ut1", "u", "b"),
            ("ut2", "b", "t"),
            ("uv1", "u", "c"),
            ("uv2", "c", "v"),
            ("sv1", "s", "d"),
            ("sv2", "d", "v"),
            ("vt1", "v", "e"),
            ("vt2", "e", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns04-chord",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
            ("chord", "s", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns05-doubled-entry",
        net(&[
            ("su", "s", "u"),
            ("su2", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns06-third-route",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
            ("sw", "s", "w"),
            ("wt", "w", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns07-series-tail",
        net(&[
            ("su", "s", "u"),
            ("um", "u", "m"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vm", "v", "m"),
            ("mt1", "m", "t"),
            ("mt2", "m", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns08-double-braess",
        net(&[
            ("su", "s", "u"),
            ("um", "u", "m"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vm", "v", "m"),
            ("ma", "m", "a"),
            ("at", "a", "t"),
            ("ab", "a", "b"),
            ("mb", "m", "b"),
            ("bt", "b", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns09-extended-source",
        net(&[
            ("s0s", "s0", "s"),
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s0",
        "t",
    ));
    out.push((
        "ns10-both-diagonals",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("vu", "v", "u"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns11-doubled-side",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("ut2", "u", "t"),
            ("uv", "u", "v"),
            ("sv", "s", "v"),
            ("vt", "v", "t"),
        ]),
        "s",
        "t",
    ));
    out.push((
        "ns12-subdivided-chord",
        net(&[
            ("su", "s", "u"),
            ("ut", "u", "t"),
            ("uv", "u", "v"),
            ("sv1", "s", "d"),
            ("sv2", "d", "v"),
            ("vt", "v", "t"),
            ("c1", "s", "w"),
            ("c2", "w", "t"),
        ]),
        "s",
        "t",
    ));
    out
}

/// Two-commodity networks whose subnetworks are series-parallel but do not
/// block-match, covering every configuration the transplant construction
/// distinguishes.
pub fn nonbm_corpus() -> Vec<(&'static str, Network, Vec<CommoditySpec>)> {
    let two = |a: &str, b: &str, c: &str, d: &str| {
        vec![CommoditySpec::new(a, b), CommoditySpec::new(c, d)]
    };
    let mut out = Vec::new();
    out.push((
        "nb01-three-paths",
        net(&[
            ("in1", "s1", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb02-branch-interior",
        net(&[
            ("a", "s1", "u"),
            ("m1", "u", "x"),
            ("m2", "x", "y"),
            ("m3", "y", "v"),
            ("k1", "u", "z"),
            ("k2", "z", "v"),
            ("b", "v", "t1"),
            ("c", "s2", "x"),
            ("d", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb03-backtrack-to-source",
        net(&[
            ("a", "s1", "u"),
            ("m1", "u", "w"),
            ("m2", "w", "v"),
            ("k1", "u", "z"),
            ("k2", "z", "v"),
            ("b", "v", "t1"),
            ("c", "s2", "w"),
            ("g1", "w", "u"),
            ("d", "v", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb04-dead-branch",
        net(&[
            ("a", "s1", "u"),
            ("m1", "u", "a1"),
            ("m2", "a1", "w"),
            ("m3", "w", "v"),
            ("m4", "a1", "v"),
            ("k1", "u", "z"),
            ("k2", "z", "v"),
            ("b", "v", "t1"),
            ("c", "s2", "w"),
            ("g1", "w", "u"),
            ("d", "z", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb05-all-live",
        net(&[
            ("a", "s1", "u"),
            ("m1", "u", "h"),
            ("m2", "h", "w"),
            ("m3", "w", "v"),
            ("k1", "u", "z"),
            ("k2", "z", "v"),
            ("b", "v", "t1"),
            ("c", "s2", "w"),
            ("g1", "w", "u"),
            ("d", "z", "t2"),
            ("d2", "h", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb06-subdivided-bottleneck",
        net(&[
            ("in1", "s1", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2a", "x", "x2"),
            ("e2b", "x2", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb07-three-branches",
        net(&[
            ("in1", "s1", "u"),
            ("e0", "u", "v"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb08-longer-chain",
        net(&[
            ("in1a", "s1", "p"),
            ("in1b", "p", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb09-enter-at-source",
        net(&[
            ("in1", "s1", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "u"),
            ("out2", "y", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb10-extra-parallel-link",
        net(&[
            ("a", "s1", "u"),
            ("m1", "u", "w"),
            ("m2", "w", "v"),
            ("k1", "u", "z"),
            ("k2", "z", "v"),
            ("p1", "u", "v"),
            ("b", "v", "t1"),
            ("c", "s2", "w"),
            ("g1", "w", "u"),
            ("d", "v", "t2"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb11-chorded-chain",
        net(&[
            ("a1", "s1", "p"),
            ("a2", "p", "u"),
            ("a3", "s1", "q"),
            ("a4", "q", "u"),
            ("b1", "u", "m"),
            ("b2", "m", "v"),
            ("b3", "u", "n"),
            ("b4", "n", "v"),
            ("c1", "v", "w"),
            ("c2", "v", "w"),
            ("d1", "w", "t1"),
            ("d2", "w", "t1"),
            ("e0", "s2", "w"),
            ("f0", "t1", "u"),
            ("g0", "v", "t2"),
            ("chord", "s1", "t1"),
        ]),
        two("s1", "t1", "s2", "t2"),
    ));
    out.push((
        "nb12-bystander-commodity",
        net(&[
            ("in1", "s1", "u"),
            ("e1", "u", "v"),
            ("h1a", "u", "x"),
            ("e2", "x", "y"),
            ("h1b", "y", "v"),
            ("out1", "v", "t1"),
            ("in2", "s2", "x"),
            ("out2", "y", "t2"),
            ("zz", "s3", "t3"),
        ]),
        vec![
            CommoditySpec::new("s1", "t1"),
            CommoditySpec::new("s2", "t2"),
            CommoditySpec::new("s3", "t3"),
        ],
    ));
    out
}

/// Wraps a bare network into an instance file body with free functions and
/// the standard demands, for shipping the corpora as fixtures.
pub fn corpus_instance(network: &Network, commodities: &[CommoditySpec]) -> Instance {
    let mut fns = EdgeFunctions::new();
    for e in network.edges() {
        fns.insert(e.id.clone(), CostFn::zero(), CostFn::zero());
    }
    let demands: Vec<Vec<DemandClass>> = match commodities.len() {
        1 => vec![vec![DemandClass::new(0.0, 0.5), DemandClass::new(2.0, 0.5)]],
        n => {
            let mut d = vec![vec![]; n];
            d[0] = vec![DemandClass::new(0.0, 0.75), DemandClass::new(4.0, 0.25)];
            d[1] = vec![DemandClass::new(1.0, 1.0)];
            d
        }
    };
    Instance::new(
        network.clone(),
        fns,
        commodities
            .iter()
            .zip(demands)
            .map(|(spec, classes)| Commodity {
                spec: spec.clone(),
                classes,
            })
            .collect(),
    )
    .unwrap()
}

/// The block-matching two-commodity example instance with affine
/// latencies.
pub fn fig1_instance() -> Instance {
    let network = net(&[
        ("a1", "s1", "p"),
        ("a2", "p", "u"),
        ("a3", "s1", "q"),
        ("a4", "q", "u"),
        ("b1", "u", "m"),
        ("b2", "m", "v"),
        ("b3", "u", "n"),
        ("b4", "n", "v"),
        ("c1", "v", "w"),
        ("c2", "v", "w"),
        ("d1", "w", "t1"),
        ("d2", "w", "t1"),
        ("e0", "s2", "w"),
        ("f0", "t1", "u"),
        ("g0", "v", "t2"),
    ]);
    let mut fns = EdgeFunctions::new();
    for e in network.edges() {
        fns.insert(e.id.clone(), CostFn::affine(1.0, 0.0), CostFn::zero());
    }
    Instance::new(
        network,
        fns,
        vec![
            Commodity {
                spec: CommoditySpec::new("s1", "t1"),
                classes: vec![DemandClass::new(0.0, 0.5), DemandClass::new(2.0, 0.5)],
            },
            Commodity {
                spec: CommoditySpec::new("s2", "t2"),
                classes: vec![DemandClass::new(1.0, 1.0)],
            },
        ],
    )
    .unwrap()
}

/// Two parallel links with a flow-dependent deviation on one of them.
pub fn footnote5_instance() -> Instance {
    let network = net(&[("lo", "s", "t"), ("up", "s", "t")]);
    let mut fns = EdgeFunctions::new();
    fns.insert("lo", CostFn::constant(1.0), CostFn::affine(1.0, 0.0));
    fns.insert("up", CostFn::constant(2.0), CostFn::zero());
    Instance::new(
        network,
        fns,
        vec![Commodity {
            spec: CommoditySpec::new("s", "t"),
            classes: vec![DemandClass::new(0.0, 0.5), DemandClass::new(2.0, 0.5)],
        }],
    )
    .unwrap()
}

pub fn zero_demand_instance() -> Instance {
    let network = net(&[("e", "s", "t")]);
    let mut fns = EdgeFunctions::new();
    fns.insert("e", CostFn::constant(1.0), CostFn::zero());
    Instance::new(
        network,
        fns,
        vec![Commodity {
            spec: CommoditySpec::new("s", "t"),
            classes: vec![],
        }],
    )
    .unwrap()
}

// -------------------------------------------------------------------
// random generation for the property suites

/// Random series-parallel network with at most `max_edges` edges.
pub fn random_sp_network(rng: &mut ChaCha8Rng, max_edges: usize) -> (Network, String, String) {
    let edges = rng.random_range(1..=max_edges);
    let mut next_v = 2usize;
    let mut next_e = 0usize;
    let mut out: Vec<(String, String, String)> = Vec::new();
    let s = "v0".to_string();
    let t = "v1".to_string();
    build_sp(rng, edges, &s, &t, &mut next_v, &mut next_e, &mut out);
    (Network::from_edges(out).unwrap(), s, t)
}

fn build_sp(
    rng: &mut ChaCha8Rng,
    budget: usize,
    s: &str,
    t: &str,
    next_v: &mut usize,
    next_e: &mut usize,
    out: &mut Vec<(String, String, String)>,
) {
    if budget <= 1 {
        let id = format!("e{:04}", *next_e);
        *next_e += 1;
        out.push((id, s.to_string(), t.to_string()));
        return;
    }
    let left = rng.random_range(1..budget);
    let right = budget - left;
    if rng.random_bool(0.5) {
        let mid = format!("v{}", *next_v);
        *next_v += 1;
        build_sp(rng, left, s, &mid, next_v, next_e, out);
        build_sp(rng, right, &mid, t, next_v, next_e, out);
    } else {
        build_sp(rng, left, s, t, next_v, next_e, out);
        build_sp(rng, right, s, t, next_v, next_e, out);
    }
}

/// Random demand classes: two to `max_classes` classes with parameters in
/// `[0, 4]` and amounts in `[0.2, 1.2]`.
pub fn random_classes(rng: &mut ChaCha8Rng, max_classes: usize) -> Vec<DemandClass> {
    let n = rng.random_range(2..=max_classes.max(2));
    (0..n)
        .map(|_| {
            DemandClass::new(
                (rng.random::<f64>() * 4.0 * 8.0).round() / 8.0,
                0.2 + rng.random::<f64>(),
            )
        })
        .collect()
}

/// Random non-decreasing piecewise-linear latency together with a
/// deviation that keeps `latency + r * deviation` non-decreasing for all
/// `r` up to `r_max`. Both share breakpoints.
pub fn random_function_pair(rng: &mut ChaCha8Rng, r_max: f64) -> (CostFn, CostFn) {
    let n_break = rng.random_range(2..=4);
    let mut xs = vec![0.0];
    for _ in 1..n_break {
        xs.push(xs.last().unwrap() + 0.3 + rng.random::<f64>());
    }
    let mut lat_ys = vec![rng.random::<f64>() * 2.0];
    let mut lat_slopes = Vec::new();
    for i in 1..n_break {
        let slope = rng.random::<f64>() * 4.0;
        lat_slopes.push(slope);
        let dy = slope * (xs[i] - xs[i - 1]);
        lat_ys.push(lat_ys[i - 1] + dy);
    }
    let lat = CostFn::PiecewiseLinear(
        Pwl::new(
            xs.clone(),
            lat_ys,
            0.0,
            *lat_slopes.last().unwrap_or(&1.0),
        )
        .unwrap(),
    );
    let dev = match rng.random_range(0..10) {
        0..=2 => CostFn::zero(),
        3..=5 => CostFn::constant(rng.random::<f64>() * 2.0),
        _ => {
            let mut dev_ys = vec![rng.random::<f64>() * 2.0];
            for i in 1..n_break {
                let lower = if r_max > 0.0 {
                    -0.9 * lat_slopes[i - 1] / r_max
                } else {
                    -1.0
                };
                let slope = lower + rng.random::<f64>() * (1.5 - lower);
                dev_ys.push(dev_ys[i - 1] + slope * (xs[i] - xs[i - 1]));
            }
            CostFn::PiecewiseLinear(Pwl::new(xs, dev_ys, 0.0, 0.0).unwrap())
        }
    };
    (lat, dev)
}

/// Random single-commodity instance on a random series-parallel network.
pub fn random_sp_instance(rng: &mut ChaCha8Rng, max_edges: usize) -> Instance {
    let (network, s, t) = random_sp_network(rng, max_edges);
    let classes = random_classes(rng, 4);
    let r_max = classes.iter().map(|c| c.r).fold(0.0, f64::max);
    let mut fns = EdgeFunctions::new();
    let edge_ids: Vec<String> = network.edges().iter().map(|e| e.id.clone()).collect();
    for id in edge_ids {
        let (lat, dev) = random_function_pair(rng, r_max);
        fns.insert(id, lat, dev);
    }
    Instance::new(
        network,
        fns,
        vec![Commodity {
            spec: CommoditySpec::new(s, t),
            classes,
        }],
    )
    .expect("generated instance is monotone by construction")
}

/// Random block-matching two-commodity instance with average-respecting
/// demand: commodity 1 is a chain of blocks, commodity 2 joins at a
/// separator, shares a contiguous run of blocks, and leaves at a later
/// separator.
pub fn random_block_matching_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n_blocks = rng.random_range(2..=4);
    let mut edges: Vec<(String, String, String)> = Vec::new();
    let mut next_e = 0usize;
    let mut next_v = 0usize;
    let mut cuts = vec!["s1".to_string()];
    for _ in 0..n_blocks - 1 {
        cuts.push(format!("w{next_v}"));
        next_v += 1;
    }
    cuts.push("t1".to_string());
    for b in 0..n_blocks {
        let (from, to) = (cuts[b].clone(), cuts[b + 1].clone());
        if rng.random_bool(0.4) {
            edges.push((format!("e{next_e:03}"), from, to));
            next_e += 1;
        } else {
            let branches = rng.random_range(2..=3);
            for _ in 0..branches {
                if rng.random_bool(0.5) {
                    edges.push((format!("e{next_e:03}"), from.clone(), to.clone()));
                    next_e += 1;
                } else {
                    let mid = format!("i{next_v}");
                    next_v += 1;
                    edges.push((format!("e{next_e:03}"), from.clone(), mid.clone()));
                    next_e += 1;
                    edges.push((format!("e{next_e:03}"), mid, to.clone()));
                    next_e += 1;
                }
            }
        }
    }
    // commodity 2 shares blocks i..j (contiguous), entering and leaving at
    // separators
    let i = rng.random_range(0..n_blocks);
    let j = rng.random_range(i..n_blocks);
    edges.push(("x2in".to_string(), "s2".to_string(), cuts[i].clone()));
    edges.push(("x2out".to_string(), cuts[j + 1].clone(), "t2".to_string()));
    let network = Network::from_edges(edges).unwrap();

    let classes1 = random_classes(rng, 3);
    let d1: f64 = classes1.iter().map(|c| c.amount).sum();
    let r_bar: f64 = classes1.iter().map(|c| c.r * c.amount).sum::<f64>() / d1;
    // same average for commodity 2, either as one class or a centered pair
    let classes2 = if rng.random_bool(0.4) || r_bar == 0.0 {
        vec![DemandClass::new(r_bar, 0.3 + rng.random::<f64>())]
    } else {
        let delta = r_bar * rng.random::<f64>();
        let a = 0.2 + rng.random::<f64>() * 0.8;
        let b = 0.2 + rng.random::<f64>() * 0.8;
        let delta_up = a * delta / b;
        vec![
            DemandClass::new(r_bar - delta, a),
            DemandClass::new(r_bar + delta_up, b),
        ]
    };
    let r_max = classes1
        .iter()
        .chain(classes2.iter())
        .map(|c| c.r)
        .fold(0.0, f64::max);
    let mut fns = EdgeFunctions::new();
    let edge_ids: Vec<String> = network.edges().iter().map(|e| e.id.clone()).collect();
    for id in edge_ids {
        let (lat, dev) = random_function_pair(rng, r_max);
        fns.insert(id, lat, dev);
    }
    Instance::new(
        network,
        fns,
        vec![
            Commodity {
                spec: CommoditySpec::new("s1", "t1"),
                classes: classes1,
            },
            Commodity {
                spec: CommoditySpec::new("s2", "t2"),
                classes: classes2,
            },
        ],
    )
    .expect("generated instance is monotone by construction")
}
