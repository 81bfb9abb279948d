//! Two-criteria selfish routing with heterogeneous user preferences.
//!
//! Users route flow between source-sink pairs and evaluate a path by its
//! latency plus a personal multiple `r` of its deviation. This crate
//! models such instances, computes and verifies Wardrop equilibria for
//! both the heterogeneous population and its demand-weighted homogeneous
//! average, classifies network topology (series-parallel per commodity,
//! block-matching across commodities), and constructs certified instances
//! on which heterogeneity strictly increases the total user cost on every
//! non-conforming topology.

pub mod adversarial;
pub mod cli;
pub mod costfn;
pub mod equilibrium;
pub mod fileio;
pub mod netgraph;

pub use adversarial::{
    braess_hurt, braess_hurt_affine, choose_r0, embed_braess, find_braess_minor,
    non_average_respecting_example, non_block_matching_hurt, two_commodity_hurt, HurtCertificate,
};
pub use costfn::{monotone_through, path_cost, validate_monotonicity, CostFn, EdgeFunctions};
pub use equilibrium::{
    diversity_verdict, homogenize, solve_equilibrium, verify_equilibrium, ClassFlow, Commodity,
    DemandClass, Instance, SolveOptions, Verdict,
};
pub use netgraph::{
    classify_network, commodity_subnetwork, enumerate_simple_paths, sp_decompose, Classification,
    CommoditySpec, Network,
};
