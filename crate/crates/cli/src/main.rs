//! `chaintorque`: graph maps, Nielsen chains, flare scans and L²-torsion
//! estimates from the command line. Reports are JSON on stdout.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaintorque::chain::{chain_between, jacobian, parse_chain, parse_edge_set, OneChain, UniversalVertex};
use chaintorque::det::{log_det_fk, DetOptions, TailModel};
use chaintorque::error::Error;
use chaintorque::flare::{flare_scan, rose_flare_scan, FlareMode, FlareParams};
use chaintorque::graph::{parse_graph_map, EdgeStep, GraphMap};
use chaintorque::nielsen::{build_trho, classify_nielsen};
use chaintorque::ring::{moments, rational_string, RingMatrix};
use chaintorque::rm::{parse_ring_matrix, write_ring_matrix};
use chaintorque::strata::strata_decomposition;
use chaintorque::torsion::{operator_l, torsion_estimate, TorsionBudget};
use chaintorque::word::{NameTable, Word};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use report::{approx, document, exact, tag};

#[derive(Parser)]
#[command(name = "chaintorque", version, about = "Free-by-cyclic workbench: graph maps, Nielsen chains, flare scans, L2-torsion")]
struct Cli {
    /// Worker threads for parallel scans.
    #[arg(long, global = true, env = "CHAINTORQUE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transition matrix, strata, Perron-Frobenius values, EG set, marking.
    Analyze { gm: PathBuf },
    /// Fox Jacobian J(f), or L = tJ with --shift.
    Jacobian {
        gm: PathBuf,
        /// Comma-separated edge ids (default: all edges).
        #[arg(long, value_delimiter = ',')]
        edges: Vec<String>,
        /// Multiply by t on the left (needs inverse images).
        #[arg(long)]
        shift: bool,
        /// Also write the matrix in `.rm` format.
        #[arg(long)]
        rm: Option<PathBuf>,
    },
    /// Classify the chain between two universal-cover vertices.
    Nielsen {
        gm: PathBuf,
        #[command(flatten)]
        ends: Endpoints,
        /// Comma-separated edge ids of the invariant subgraph H.
        #[arg(long = "H", value_delimiter = ',')]
        h: Vec<String>,
    },
    /// Build the overlap graph ball around the base translate.
    Trho {
        gm: PathBuf,
        /// `.chain` file; otherwise the chain between --u and --v.
        #[arg(long)]
        rho: Option<PathBuf>,
        #[command(flatten)]
        ends: Endpoints,
        #[arg(long, default_value_t = 1)]
        radius: usize,
        /// Write the ball as DOT.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Bounded search for chains violating the flare inequality.
    FlareScan(FlareArgs),
    /// Fuglede-Kadison log-determinant by the trace series.
    Det {
        /// `.rm` matrix, or `.gm` for I - L on --edges.
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        edges: Vec<String>,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Exact traces tr(M^k), k = 0..=kmax.
    Moments {
        /// `.rm` matrix, or `.gm` for L on --edges.
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        edges: Vec<String>,
        #[arg(long, default_value_t = 6)]
        kmax: usize,
    },
    /// L²-torsion estimate as a sum over exponentially growing strata.
    Torsion {
        /// `.gm` map, or `.rm` matrix treated as a single stratum I - L.
        input: PathBuf,
        /// Replace f by the smallest iterate fixing its vertex images.
        #[arg(long)]
        stabilize: bool,
        #[command(flatten)]
        series: SeriesArgs,
    },
}

#[derive(Args)]
struct Endpoints {
    /// Group element labelling the first vertex.
    #[arg(long, default_value = "e", allow_hyphen_values = true)]
    u: String,
    /// Vertex id of the first endpoint (default: basepoint).
    #[arg(long)]
    u_vertex: Option<String>,
    #[arg(long, default_value = "e", allow_hyphen_values = true)]
    v: String,
    #[arg(long)]
    v_vertex: Option<String>,
}

#[derive(Args)]
struct SeriesArgs {
    #[arg(long, default_value_t = 100)]
    terms: usize,
    /// Floating-point coefficients instead of exact rationals.
    #[arg(long)]
    float: bool,
    /// Model for the trace tail.
    #[arg(long, value_enum)]
    extrapolate: Option<Tail>,
    /// Stop once a power's support exceeds this many terms (0: no cap).
    #[arg(long, default_value_t = 500_000)]
    support_cap: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tail {
    HalfPower,
    PowerLaw,
}

#[derive(Args)]
struct FlareArgs {
    gm: PathBuf,
    #[arg(long, default_value_t = 1)]
    radius: usize,
    #[arg(long, default_value_t = 1)]
    coeff_bound: u32,
    /// Exponent N (default: smallest with PF^N >= 2).
    #[arg(long)]
    power: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Compare A^N and its inverse on a rose.
    #[arg(long)]
    rose: bool,
    /// `.chain` file with a certified Nielsen chain.
    #[arg(long)]
    rho: Option<PathBuf>,
    #[arg(long = "H", value_delimiter = ',')]
    h: Vec<String>,
    /// Maximum number of chains enumerated.
    #[arg(long, default_value_t = 5_000_000)]
    budget: u64,
    /// Target lambda; the report says whether it was met.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    search_radius: usize,
}

/// Failure with its exit code.
struct Fail {
    code: u8,
    msg: String,
}

impl Fail {
    fn parse(msg: impl Into<String>) -> Self {
        Fail { code: 2, msg: msg.into() }
    }

    fn from_lib(path: Option<&Path>, e: Error) -> Self {
        let code = match e {
            Error::MissingInverseImages | Error::RequiresStabilization => 3,
            Error::NotGeometric(_) => 1,
            _ => 2,
        };
        let msg = match (path, &e) {
            (Some(p), Error::Parse { .. }) => format!("{}: {e}", p.display()),
            _ => e.to_string(),
        };
        Fail { code, msg }
    }
}

type Out = Result<(String, u8), Fail>;

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::parse(format!("{}: {e}", path.display())))
}

fn load_gm(path: &Path) -> Result<GraphMap, Fail> {
    parse_graph_map(&read(path)?).map_err(|e| Fail::from_lib(Some(path), e))
}

fn is_rm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "rm")
}

fn load_rm(path: &Path) -> Result<chaintorque::rm::RingMatrixFile, Fail> {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut nested = None;
    let parsed = parse_ring_matrix(&read(path)?, |p| {
        let full = dir.join(p);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::DanglingId(format!("{}: {e}", full.display())))?;
        parse_graph_map(&text).inspect_err(|_| nested = Some(full.clone()))
    });
    parsed.map_err(|e| Fail::from_lib(Some(nested.as_deref().unwrap_or(path)), e))
}

fn edge_set(gm: &GraphMap, ids: &[String]) -> Result<Vec<usize>, Fail> {
    if ids.is_empty() {
        return Ok((0..gm.graph.edge_count()).collect());
    }
    let ids: Vec<&str> = ids.iter().map(String::as_str).collect();
    parse_edge_set(gm, &ids).map_err(|e| Fail::from_lib(None, e))
}

fn word(gm: &GraphMap, s: &str) -> Result<Word, Fail> {
    gm.names().parse_word(s).map_err(|e| Fail::parse(format!("`{s}`: {e}")))
}

fn vertex(gm: &GraphMap, label: &str, id: &Option<String>) -> Result<UniversalVertex, Fail> {
    let v = match id {
        Some(id) => gm
            .graph
            .vertex_index(id)
            .ok_or_else(|| Fail::parse(format!("unknown vertex `{id}`")))?,
        None => gm.graph.basepoint,
    };
    Ok(UniversalVertex::new(word(gm, label)?, v))
}

fn path_text(gm: &GraphMap, path: &[EdgeStep]) -> String {
    path.iter()
        .map(|s| {
            let id = &gm.graph.edges[s.edge].id;
            if s.reversed {
                format!("~{id}")
            } else {
                id.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn words_text(names: &NameTable, ws: &[Word]) -> Vec<String> {
    ws.iter().map(|w| names.format(w).to_string()).collect()
}

fn analyze(path: &Path) -> Out {
    let gm = load_gm(path)?;
    let filt = strata_decomposition(&gm);
    let names = gm.names();
    let marking: Vec<Value> = (1..=gm.rank())
        .map(|i| json!({ "generator": names.name(i), "loop": path_text(&gm, &gm.marking().generator_loop(&gm.graph, i)) }))
        .collect();
    let phi = gm.induced_automorphism().map_err(|e| Fail::from_lib(None, e))?;
    let strata: Vec<Value> = filt
        .strata
        .iter()
        .map(|s| {
            json!({
                "index": s.index,
                "edges": s.edges.iter().map(|&e| gm.graph.edges[e].id.clone()).collect::<Vec<_>>(),
                "matrix": s.matrix,
                "zero": s.zero,
                "lambda": s.lambda.map(approx),
                "is_eg": s.is_eg,
                "near_threshold": s.near_threshold,
            })
        })
        .collect();
    let body = json!({
        "graph": gm.graph.name,
        "edges": gm.graph.edges.iter().map(|e| e.id.clone()).collect::<Vec<_>>(),
        "transition_matrix": gm.transition_matrix(),
        "strata": strata,
        "eg_set": filt.eg_set(),
        "reduced": filt.reduced,
        "unreduced_at": filt.unreduced_at,
        "refined_declared": filt.refined_declared,
        "fixes_basepoint": gm.fixes_basepoint(),
        "marking": marking,
        "phi": words_text(names, phi.images()),
        "phi_inverse": phi.inverse_images().map(|ws| words_text(names, ws)),
    });
    Ok((document("analyze", body), 0))
}

fn jacobian_cmd(path: &Path, edges: &[String], shift: bool, rm: Option<&Path>) -> Out {
    let gm = load_gm(path)?;
    let es = edge_set(&gm, edges)?;
    let m = if shift {
        operator_l(&gm, &es)
    } else {
        jacobian(&gm, &es)
    }
    .map_err(|e| Fail::from_lib(None, e))?;
    if let Some(out) = rm {
        let ctx = if shift {
            format!("fbc {}", relative_to(path, out))
        } else {
            format!("free {}", gm.rank())
        };
        let text = write_ring_matrix(&m, gm.names(), &ctx);
        std::fs::write(out, text).map_err(|e| Fail::parse(format!("{}: {e}", out.display())))?;
    }
    let body = json!({
        "operator": if shift { "tJ" } else { "J" },
        "edges": es.iter().map(|&e| gm.graph.edges[e].id.clone()).collect::<Vec<_>>(),
        "context": m.context().kind(),
        "entries": m.pretty_rows(Some(gm.names())),
    });
    Ok((document("jacobian", body), 0))
}

/// `target` as seen from the directory holding `from`.
fn relative_to(target: &Path, from: &Path) -> String {
    let abs = |p: &Path| std::fs::canonicalize(p).ok();
    let dir = from.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    match (abs(target), abs(dir)) {
        (Some(t), Some(d)) => match t.strip_prefix(&d) {
            Ok(rel) => rel.display().to_string(),
            Err(_) => t.display().to_string(),
        },
        _ => target.display().to_string(),
    }
}

fn nielsen_cmd(path: &Path, ends: &Endpoints, h: &[String]) -> Out {
    let gm = load_gm(path)?;
    let h = if h.is_empty() { Vec::new() } else { edge_set(&gm, h)? };
    let (u, v) = (vertex(&gm, &ends.u, &ends.u_vertex)?, vertex(&gm, &ends.v, &ends.v_vertex)?);
    let cert = classify_nielsen(&gm, &h, &u, &v).map_err(|e| Fail::from_lib(None, e))?;
    let code = if cert.is_nielsen() { 0 } else { 1 };
    let body = json!({
        "rho": cert.rho.pretty(&gm),
        "rho_norm_sq": exact(rational_string(&cert.rho.l2_norm_sq())),
        "nielsen": cert.is_nielsen(),
        "geometric": cert.is_geometric(),
        "certificate": tag(&cert),
    });
    Ok((document("nielsen", body), code))
}

fn load_chain(gm: &GraphMap, path: &Path) -> Result<OneChain, Fail> {
    parse_chain(&read(path)?, gm).map_err(|e| Fail::from_lib(Some(path), e))
}

fn trho_cmd(path: &Path, rho: Option<&Path>, ends: &Endpoints, radius: usize, dot: Option<&Path>) -> Out {
    let gm = load_gm(path)?;
    let rho = match rho {
        Some(p) => load_chain(&gm, p)?,
        None => {
            let (u, v) = (vertex(&gm, &ends.u, &ends.u_vertex)?, vertex(&gm, &ends.v, &ends.v_vertex)?);
            chain_between(&gm, &u, &v).map_err(|e| Fail::from_lib(None, e))?
        }
    };
    let t = build_trho(&rho, radius).map_err(|e| Fail::from_lib(None, e))?;
    let names = gm.names();
    if let Some(out) = dot {
        std::fs::write(out, t.to_dot(names)).map_err(|e| Fail::parse(format!("{}: {e}", out.display())))?;
    }
    let vertices: Vec<Value> = t
        .vertices
        .iter()
        .enumerate()
        .map(|(i, w)| json!({ "g": names.format(w).to_string(), "depth": t.depth[i], "sign": t.signs[i] }))
        .collect();
    let edges: Vec<Value> = t
        .edges
        .iter()
        .map(|e| {
            json!({
                "a": e.a,
                "b": e.b,
                "label": names.format(&e.label).to_string(),
                "edge": gm.graph.edges[e.edge].id,
                "non_orientable": e.non_orientable,
            })
        })
        .collect();
    let body = json!({
        "rho": rho.pretty(&gm),
        "d": t.d,
        "radius": radius,
        "vertices": vertices,
        "edges": edges,
        "sign_consistent": t.sign_consistent,
    });
    Ok((document("trho", body), 0))
}

fn flare_cmd(a: &FlareArgs) -> Out {
    let gm = load_gm(&a.gm)?;
    let params = FlareParams {
        lambda_target: a.lambda,
        theta: a.theta,
        radius: a.radius,
        coeff_bound: a.coeff_bound,
        power: a.power,
        mode: if a.rose { FlareMode::RoseInvertible } else { FlareMode::General },
        budget: a.budget,
        search_radius: a.search_radius,
    };
    let r = if a.rose {
        rose_flare_scan(&gm, &params)
    } else {
        let h = if a.h.is_empty() { Vec::new() } else { edge_set(&gm, &a.h)? };
        let rho = a.rho.as_deref().map(|p| load_chain(&gm, p)).transpose()?;
        flare_scan(&gm, &h, rho.as_ref(), &params)
    }
    .map_err(|e| Fail::from_lib(None, e))?;
    let code = match r.target_met {
        Some(false) => 1,
        _ => 0,
    };
    Ok((document("flare-scan", tag(&r)), code))
}

fn det_options(s: &SeriesArgs) -> DetOptions {
    DetOptions {
        terms: s.terms,
        float: s.float,
        extrapolate: s.extrapolate.map(|t| match t {
            Tail::HalfPower => TailModel::HalfPower,
            Tail::PowerLaw => TailModel::PowerLaw,
        }),
        support_cap: (s.support_cap > 0).then_some(s.support_cap),
    }
}

/// The `.rm` matrix as given, or `L` (optionally `I - L`) from a `.gm` file.
fn input_matrix(path: &Path, edges: &[String], one_minus: bool) -> Result<RingMatrix, Fail> {
    if is_rm(path) {
        return Ok(load_rm(path)?.matrix);
    }
    let gm = load_gm(path)?;
    let es = edge_set(&gm, edges)?;
    let l = operator_l(&gm, &es).map_err(|e| Fail::from_lib(None, e))?;
    if one_minus {
        RingMatrix::identity(l.context().clone(), l.rows())
            .sub(&l)
            .map_err(|e| Fail::from_lib(None, e))
    } else {
        Ok(l)
    }
}

fn det_cmd(path: &Path, edges: &[String], series: &SeriesArgs) -> Out {
    let m = input_matrix(path, edges, true)?;
    let d = log_det_fk(&m, &det_options(series)).map_err(|e| Fail::from_lib(None, e))?;
    let mut body = tag(&d);
    if let Value::Object(o) = &mut body {
        o.insert("best".into(), approx(d.best()));
    }
    Ok((document("det", body), 0))
}

fn moments_cmd(path: &Path, edges: &[String], kmax: usize) -> Out {
    let m = input_matrix(path, edges, false)?;
    let ms = moments(&m, kmax).map_err(|e| Fail::from_lib(None, e))?;
    Ok((document("moments", tag(&ms)), 0))
}

fn torsion_cmd(path: &Path, stabilize: bool, series: &SeriesArgs) -> Out {
    let opts = det_options(series);
    if is_rm(path) {
        let m = load_rm(path)?.matrix;
        let d = log_det_fk(&m, &opts).map_err(|e| Fail::from_lib(None, e))?;
        let body = json!({ "k": 1, "total": approx(d.estimate), "strata": [tag(&d)] });
        return Ok((document("torsion", body), 0));
    }
    let gm = load_gm(path)?;
    let r = torsion_estimate(&gm, &TorsionBudget { det: opts, stabilize }).map_err(|e| Fail::from_lib(None, e))?;
    let mut body = tag(&r);
    if let Value::Object(o) = &mut body {
        let tails: Vec<Value> = r
            .strata
            .iter()
            .map(|s| json!({ "stratum": s.stratum, "tail": s.estimate.tail().iter().map(|&x| approx(x)).collect::<Vec<_>>() }))
            .collect();
        o.insert("partial_sum_tails".into(), Value::Array(tails));
        if r.exact_zero {
            o.insert("total".into(), exact("0"));
        }
    }
    Ok((document("torsion", body), 0))
}

fn run(cli: Cli) -> Out {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Fail::parse("--jobs must be at least 1"));
        }
        chaintorque::par::set_jobs(j);
    }
    match &cli.command {
        Command::Analyze { gm } => analyze(gm),
        Command::Jacobian { gm, edges, shift, rm } => jacobian_cmd(gm, edges, *shift, rm.as_deref()),
        Command::Nielsen { gm, ends, h } => nielsen_cmd(gm, ends, h),
        Command::Trho { gm, rho, ends, radius, dot } => trho_cmd(gm, rho.as_deref(), ends, *radius, dot.as_deref()),
        Command::FlareScan(a) => flare_cmd(a),
        Command::Det { input, edges, series } => det_cmd(input, edges, series),
        Command::Moments { input, edges, kmax } => moments_cmd(input, edges, *kmax),
        Command::Torsion { input, stabilize, series } => torsion_cmd(input, *stabilize, series),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((json, code)) => {
            print!("{json}");
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
