//! The `routeq` command-line tool: instance validation, topology
//! classification, equilibrium comparison, certified instance
//! construction, and structural audits, with machine-readable JSON
//! reports.
//!
//! Exit codes: 0 success, 2 parse/usage error, 3 semantic validation
//! error, 4 path-cap exceeded, 5 solver did not converge, 6 network
//! classifies as conforming (construction refused), 7 construction or
//! self-verification failed.

use crate::adversarial::{
    braess_hurt, braess_hurt_affine, embed_braess, non_average_respecting_example,
    non_block_matching_hurt, two_commodity_hurt, ConstructError, HurtCertificate,
};
use crate::equilibrium::{
    heterogeneous_total_cost, homogeneous_total_cost, homogenize, is_average_respecting,
    solve_equilibrium, DemandClass, EqError, Instance, SolveOptions, Verdict,
};
use crate::fileio::{
    AuditViolationReport, ClassificationReport, ConstructionReport, EquilibriumSideReport,
    FileError, InstanceFile, ReportFile,
};
use crate::netgraph::{classify_network, dead_edges, enumerate_simple_paths, structural_audit, NetError};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARSE: u8 = 2;
pub const EXIT_SEMANTIC: u8 = 3;
pub const EXIT_PATHS: u8 = 4;
pub const EXIT_NO_CONVERGENCE: u8 = 5;
pub const EXIT_CONFORMING: u8 = 6;
pub const EXIT_VERIFICATION: u8 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "routeq",
    version,
    about = "Two-criteria selfish routing: equilibria, topology classification, certified instances"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Wardrop tolerance for verification and solving
    #[arg(long, global = true, default_value_t = 1e-6)]
    eps: f64,

    /// Iteration budget of the averaging solver
    #[arg(long, global = true, default_value_t = 200_000)]
    max_iters: usize,

    /// Cap on enumerated simple paths per commodity
    #[arg(long, global = true, env = "ROUTEQ_CAP", default_value_t = 10_000)]
    cap: usize,

    /// Perturb the solver's uniform start, to probe non-uniqueness
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the JSON report on standard out
    #[arg(long, global = true)]
    json: bool,

    /// Output path: the constructed instance for `construct`, the report
    /// for every other command
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an instance file and run all semantic checks
    Validate { path: PathBuf },
    /// Classify the network topology per commodity and pairwise
    Classify { path: PathBuf },
    /// Solve both equilibria and compare their total costs
    Compare { path: PathBuf },
    /// Build a certified instance on which diversity hurts
    Construct {
        #[arg(long, value_enum)]
        kind: ConstructKind,
        /// Instance file providing the host network and commodities
        #[arg(long)]
        network: Option<PathBuf>,
        /// Demand classes as `r:amount,r:amount,...`
        #[arg(long)]
        classes: Option<String>,
    },
    /// Exhaustive structural checks of each commodity's block structure
    Audit { path: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ConstructKind {
    Braess,
    BraessAffine,
    EmbedBraess,
    TwoCommodity,
    NonBlockMatching,
    NonAverageRespecting,
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version print to stdout and exit 0; real usage errors
            // exit 2
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run_cli(cli))
}

fn solve_options(cli: &Cli) -> SolveOptions {
    SolveOptions {
        eps: cli.eps,
        max_iters: cli.max_iters,
        path_cap: cli.cap,
        seed: cli.seed,
        ..SolveOptions::default()
    }
}

fn run_cli(cli: Cli) -> u8 {
    match &cli.command {
        Command::Validate { path } => cmd_validate(&cli, path.clone()),
        Command::Classify { path } => cmd_classify(&cli, path.clone()),
        Command::Compare { path } => cmd_compare(&cli, path.clone()),
        Command::Construct {
            kind,
            network,
            classes,
        } => cmd_construct(&cli, *kind, network.clone(), classes.clone()),
        Command::Audit { path } => cmd_audit(&cli, path.clone()),
    }
}

fn load_file(path: &Path) -> Result<(InstanceFile, Instance), u8> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("routeq: cannot read {}: {e}", path.display());
            return Err(EXIT_PARSE);
        }
    };
    let file = match InstanceFile::from_str(&text) {
        Ok(f) => f,
        Err(FileError::Parse(e)) => {
            eprintln!(
                "routeq: {}: parse error at line {}, column {}: {e}",
                path.display(),
                e.line(),
                e.column()
            );
            return Err(EXIT_PARSE);
        }
        Err(FileError::Semantic(msg)) => {
            eprintln!("routeq: {}: {msg}", path.display());
            return Err(EXIT_SEMANTIC);
        }
    };
    match file.to_instance() {
        Ok(inst) => Ok((file, inst)),
        Err(FileError::Semantic(msg)) => {
            eprintln!("routeq: {}: {msg}", path.display());
            Err(EXIT_SEMANTIC)
        }
        Err(FileError::Parse(e)) => {
            eprintln!("routeq: {}: parse error: {e}", path.display());
            Err(EXIT_PARSE)
        }
    }
}

fn eq_exit(e: &EqError) -> u8 {
    match e {
        EqError::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        EqError::Net(NetError::PathExplosion { .. }) => EXIT_PATHS,
        _ => EXIT_SEMANTIC,
    }
}

fn net_exit(e: &NetError) -> u8 {
    match e {
        NetError::PathExplosion { .. } => EXIT_PATHS,
        _ => EXIT_SEMANTIC,
    }
}

fn construct_exit(e: &ConstructError) -> u8 {
    match e {
        ConstructError::ClassifiedConforming | ConstructError::NotFound => EXIT_CONFORMING,
        ConstructError::VerificationFailed(_) | ConstructError::ConstructionFailed(_) => {
            EXIT_VERIFICATION
        }
        ConstructError::NotStrictlyHeterogeneous => EXIT_SEMANTIC,
        ConstructError::Eq(e) => eq_exit(e),
        ConstructError::Net(e) => net_exit(e),
        ConstructError::Cost(_) => EXIT_SEMANTIC,
    }
}

/// Prints the report (JSON with `--json`, a short summary otherwise) and
/// writes it to `--out` when given.
fn emit_report(cli: &Cli, report: &ReportFile, human: &[String]) -> u8 {
    if cli.json {
        println!("{}", report.to_json());
    } else {
        for line in human {
            println!("{line}");
        }
    }
    if let Some(path) = &cli.out {
        if !matches!(cli.command, Command::Construct { .. }) {
            if let Err(e) = std::fs::write(path, report.to_json()) {
                eprintln!("routeq: cannot write {}: {e}", path.display());
                return EXIT_PARSE;
            }
        }
    }
    EXIT_OK
}

fn cmd_validate(cli: &Cli, path: PathBuf) -> u8 {
    let (_, inst) = match load_file(&path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    // route existence for every commodity carrying demand; hitting the cap
    // means routes certainly exist
    for (k, com) in inst.commodities.iter().enumerate() {
        if com.classes.is_empty() {
            continue;
        }
        match enumerate_simple_paths(&inst.network, &com.spec.source, &com.spec.sink, cli.cap) {
            Ok(paths) if paths.is_empty() => {
                eprintln!(
                    "routeq: {}: commodity {k} has demand but no route from `{}` to `{}`",
                    path.display(),
                    com.spec.source,
                    com.spec.sink
                );
                return EXIT_SEMANTIC;
            }
            _ => {}
        }
    }
    eprintln!("routeq: {} is valid", path.display());
    EXIT_OK
}

fn cmd_classify(cli: &Cli, path: PathBuf) -> u8 {
    let (file, inst) = match load_file(&path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let specs: Vec<_> = inst.commodities.iter().map(|c| c.spec.clone()).collect();
    let classification = match classify_network(&inst.network, &specs, cli.cap) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("routeq: {e}");
            return net_exit(&e);
        }
    };
    let dead = match dead_edges(&inst.network, &specs, cli.cap) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("routeq: {e}");
            return net_exit(&e);
        }
    };
    let avg = is_average_respecting(&inst).unwrap_or(false);
    let mut report = ReportFile::new("classify", file.digest());
    report.classification = Some(ClassificationReport::from_classification(&classification));
    report.is_average_respecting = Some(avg);
    report.dead_edges = Some(dead.clone());
    let kind = match &report.classification {
        Some(ClassificationReport::SingleCommoditySp { .. }) => "single-commodity series-parallel",
        Some(ClassificationReport::BlockMatching { .. }) => "block-matching",
        Some(ClassificationReport::NonSeriesParallel { .. }) => "non-series-parallel",
        Some(ClassificationReport::NonBlockMatching { .. }) => "non-block-matching",
        None => unreachable!(),
    };
    let mut human = vec![
        format!("classification: {kind}"),
        format!("average-respecting: {avg}"),
    ];
    if !dead.is_empty() {
        human.push(format!("dead edges (on no commodity route): {dead:?}"));
    }
    emit_report(cli, &report, &human)
}

fn cmd_compare(cli: &Cli, path: PathBuf) -> u8 {
    let (file, inst) = match load_file(&path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let opts = solve_options(cli);
    let mut report = ReportFile::new("compare", file.digest());

    let het = solve_equilibrium(&inst, &opts);
    let het = match het {
        Ok(s) => s,
        Err(e) => return compare_failure(cli, &mut report, &inst, None, e),
    };
    report.heterogeneous = Some(EquilibriumSideReport::from_solved(&inst, &het));

    let hom_inst = match homogenize(&inst) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("routeq: {e}");
            return eq_exit(&e);
        }
    };
    let hom = match solve_equilibrium(&hom_inst, &opts) {
        Ok(s) => s,
        Err(e) => return compare_failure(cli, &mut report, &hom_inst, Some(&inst), e),
    };
    report.homogeneous = Some(EquilibriumSideReport::from_solved(&hom_inst, &hom));

    let c_ht = heterogeneous_total_cost(&inst, &het.flow).expect("solved flow is feasible");
    let c_hm = homogeneous_total_cost(&hom_inst, &hom.flow).expect("solved flow is feasible");
    let verdict = if c_ht > c_hm + opts.tie_tol {
        Verdict::Hurts
    } else if c_ht < c_hm - opts.tie_tol {
        Verdict::Helps
    } else {
        Verdict::Ties
    };
    report.c_ht = Some(c_ht);
    report.c_hm = Some(c_hm);
    report.verdict = Some(verdict.to_string());
    let human = vec![
        format!("heterogeneous total cost: {c_ht}"),
        format!("homogeneous total cost:   {c_hm}"),
        format!("verdict: diversity {verdict}"),
    ];
    emit_report(cli, &report, &human)
}

/// On solver failure the report still carries the best iterate's data.
fn compare_failure(
    cli: &Cli,
    report: &mut ReportFile,
    solving: &Instance,
    _het_inst: Option<&Instance>,
    e: EqError,
) -> u8 {
    let code = eq_exit(&e);
    if let EqError::NoConvergence {
        max_iters,
        flow,
        report: eq_report,
        ..
    } = &e
    {
        let side = EquilibriumSideReport::from_flow(solving, flow, eq_report, *max_iters);
        if report.heterogeneous.is_none() {
            report.heterogeneous = Some(side);
        } else {
            report.homogeneous = Some(side);
        }
    }
    report.error = Some(e.to_string());
    eprintln!("routeq: {e}");
    let human = vec![format!("error: {e}")];
    let _ = emit_report(cli, report, &human);
    code
}

fn parse_classes(text: &str) -> Result<Vec<DemandClass>, String> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let (r, amount) = part
            .split_once(':')
            .ok_or_else(|| format!("class `{part}` is not of the form r:amount"))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|e| format!("bad diversity parameter in `{part}`: {e}"))?;
        let amount: f64 = amount
            .trim()
            .parse()
            .map_err(|e| format!("bad amount in `{part}`: {e}"))?;
        out.push(DemandClass::new(r, amount));
    }
    Ok(out)
}

fn cmd_construct(
    cli: &Cli,
    kind: ConstructKind,
    network: Option<PathBuf>,
    classes: Option<String>,
) -> u8 {
    let classes = match classes.as_deref().map(parse_classes) {
        Some(Ok(c)) => Some(c),
        Some(Err(msg)) => {
            eprintln!("routeq: --classes: {msg}");
            return EXIT_SEMANTIC;
        }
        None => None,
    };
    let host = match &network {
        Some(path) => match load_file(path) {
            Ok((_, inst)) => Some(inst),
            Err(code) => return code,
        },
        None => None,
    };
    let need = |what: &str, kind: &str| -> u8 {
        eprintln!("routeq: construct --kind {kind} requires {what}");
        EXIT_PARSE
    };
    let result: Result<HurtCertificate, ConstructError> = match kind {
        ConstructKind::Braess => match &classes {
            Some(c) => braess_hurt(c),
            None => return need("--classes", "braess"),
        },
        ConstructKind::BraessAffine => match &classes {
            Some(c) => braess_hurt_affine(c),
            None => return need("--classes", "braess-affine"),
        },
        ConstructKind::EmbedBraess => match &host {
            Some(inst) => {
                let com = match inst.commodities.first() {
                    Some(c) => c,
                    None => {
                        eprintln!("routeq: host instance has no commodities");
                        return EXIT_SEMANTIC;
                    }
                };
                let cls = classes.clone().unwrap_or_else(|| com.classes.clone());
                embed_braess(&inst.network, &com.spec.source, &com.spec.sink, &cls)
            }
            None => return need("--network", "embed-braess"),
        },
        ConstructKind::TwoCommodity => two_commodity_hurt(),
        ConstructKind::NonBlockMatching => match &host {
            Some(inst) => {
                let specs: Vec<_> = inst.commodities.iter().map(|c| c.spec.clone()).collect();
                non_block_matching_hurt(&inst.network, &specs, cli.cap)
            }
            None => return need("--network", "non-block-matching"),
        },
        ConstructKind::NonAverageRespecting => non_average_respecting_example(),
    };
    let cert = match result {
        Ok(c) => c,
        Err(e) => {
            eprintln!("routeq: {e}");
            return construct_exit(&e);
        }
    };
    let out_file = InstanceFile::from_instance(&cert.instance);
    if let Some(path) = &cli.out {
        if let Err(e) = std::fs::write(path, out_file.to_json()) {
            eprintln!("routeq: cannot write {}: {e}", path.display());
            return EXIT_PARSE;
        }
    }
    let mut report = ReportFile::new("construct", out_file.digest());
    report.construction = Some(ConstructionReport::from_certificate(&cert));
    report.heterogeneous = Some(EquilibriumSideReport::from_solved(
        &cert.instance,
        &cert.solved.heterogeneous,
    ));
    report.homogeneous = Some(EquilibriumSideReport::from_solved(
        &cert.solved.homogenized,
        &cert.solved.homogeneous,
    ));
    report.c_ht = Some(cert.solved.c_ht);
    report.c_hm = Some(cert.solved.c_hm);
    report.verdict = Some(cert.solved.verdict.to_string());
    let human = vec![
        format!("constructed {} instance", cert.trace.kind),
        format!("heterogeneous total cost: {}", cert.solved.c_ht),
        format!("homogeneous total cost:   {}", cert.solved.c_hm),
        "verdict: diversity hurts (self-verified)".to_string(),
    ];
    emit_report(cli, &report, &human)
}

fn cmd_audit(cli: &Cli, path: PathBuf) -> u8 {
    let (file, inst) = match load_file(&path) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let mut all = Vec::new();
    let mut human = Vec::new();
    for (k, com) in inst.commodities.iter().enumerate() {
        match structural_audit(&inst.network, &com.spec, cli.cap) {
            Ok(violations) => {
                human.push(format!(
                    "commodity {k}: {} violation(s)",
                    violations.len()
                ));
                all.push(
                    violations
                        .iter()
                        .map(AuditViolationReport::from_violation)
                        .collect::<Vec<_>>(),
                );
            }
            Err(e) => {
                eprintln!("routeq: commodity {k}: {e}");
                return net_exit(&e);
            }
        }
    }
    let mut report = ReportFile::new("audit", file.digest());
    report.audit = Some(all);
    emit_report(cli, &report, &human)
}
