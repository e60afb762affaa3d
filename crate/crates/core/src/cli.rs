//! Batch command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cov::{CovMatrix, CovarianceSource, Provenance};
use crate::error::{Error, Result};
use crate::exact::{markov_check, ExactField};
use crate::graph::{build_graph, canonical, classify, Canonical, GraphSpec, MetricGraph, PointOnGraph};
use crate::inference::krige;
use crate::kernels::{iso_cov_matrix, nonexistence_gap, GapCase, IsotropicModel, Kernel, Metric, GAP_GRID_POINTS};
use crate::metrics::{geodesic_distance, resistance_structure};
use crate::model::{EdgeParams, FieldModel};
use crate::sampling::sample_gaussian;
use crate::spectral::{assemble, spectral_cov, SpectralField};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

const AFTER_HELP: &str = "\
Formats:
  graph JSON    {\"vertices\": N, \"edges\": [{\"id\": str, \"u\": int, \"v\": int, \"length\": float}]}
  config JSON   {\"graph\": <graph JSON>, \"graph_path\": str, \"kappa\": f, \"a\": f, \"tau\": f,
                 \"alpha\": f, \"edges\": [{\"kappa\": f, \"a\": f}], \"mesh_h\": f, \"seed\": int}
                graph_path takes precedence over an inline graph; command-line flags override both.
  points CSV    edge_id,t
  pairs CSV     edge_p,t_p,edge_q,t_q
  obs CSV       edge_id,t,y
  covariance    dense CSV with header p0,...,p{n-1}
  samples       CSV with header p0,...,p{n-1}, one replicate per row
  resistance    edge_p,t_p,edge_q,t_q,d_geo,d_res
  krige         edge,t,mean,var
  gap           h,lhs,rhs,gap
  eigenvalues   k,lambda
Floats are written with 17 significant digits.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "metgraph", version, about = "Gaussian random fields on compact metric graphs", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Default)]
pub struct GraphArgs {
    /// Graph JSON file.
    #[arg(long, group = "source")]
    pub graph: Option<PathBuf>,
    /// Interval of the given length.
    #[arg(long, value_name = "L", group = "source")]
    pub interval: Option<String>,
    /// Circle of length L subdivided into N edges.
    #[arg(long, value_name = "L,N", group = "source")]
    pub circle: Option<String>,
    /// Star with the given edge lengths; the center is the last vertex.
    #[arg(long, value_name = "L1,L2,...", group = "source")]
    pub star: Option<String>,
    /// Two 3-edge cycles joined at a vertex.
    #[arg(long, value_name = "L1,L2", group = "source")]
    pub figure_eight: Option<String>,
    /// 3-edge cycle with a pendant edge.
    #[arg(long, value_name = "LC,LE", group = "source")]
    pub tadpole: Option<String>,
    /// JSON run configuration (graph, model parameters, mesh, seed).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Diffusion coefficient.
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-edge parameters, CSV `edge_id,kappa,a`; overrides the uniform values.
    #[arg(long)]
    pub edge_params: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a graph and report its structural class (JSON).
    Validate {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact alpha = 1 covariance at the given points.
    Cov {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Points CSV (edge_id,t); defaults to a mesh of spacing --mesh-h.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        mesh_h: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Draws of the exact alpha = 1 field.
    Sample {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        mesh_h: Option<f64>,
        /// Number of replicates.
        #[arg(long, short, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Finite-element spectral covariance for any alpha > 1/2.
    SpectralCov {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        points: Option<PathBuf>,
        /// Mesh spacing of the discretization.
        #[arg(long)]
        mesh_h: Option<f64>,
        /// Number of eigenpairs kept; all by default.
        #[arg(long)]
        k: Option<usize>,
        /// Also write the eigenvalues (k,lambda) to this file.
        #[arg(long)]
        eigenvalues: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Geodesic and resistance distances for point pairs.
    Resistance {
        #[command(flatten)]
        graph: GraphArgs,
        /// Pairs CSV (edge_p,t_p,edge_q,t_q).
        #[arg(long)]
        pairs: PathBuf,
        /// Root vertex of the auxiliary construction.
        #[arg(long, default_value_t = 0)]
        root: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Isotropic covariance r(d(p, q)).
    IsoCov {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        mesh_h: Option<f64>,
        #[arg(long, value_enum, default_value_t = MetricArg::Geodesic)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = KernelArg::Exponential)]
        kernel: KernelArg,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// Circle perimeter for the circle kernel; the total graph length by default.
        #[arg(long)]
        length: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Largest conditional covariance between index sets A and B given S.
    MarkovCheck {
        /// Dense covariance CSV.
        #[arg(long)]
        cov: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        b: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        s: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Kriging prediction (exact covariance for alpha = 1, spectral otherwise).
    Krige {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Observations CSV (edge_id,t,y).
        #[arg(long)]
        obs: PathBuf,
        /// Prediction points CSV (edge_id,t).
        #[arg(long)]
        pred: PathBuf,
        /// Observation noise variance.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Force the spectral covariance even for alpha = 1.
        #[arg(long)]
        spectral: bool,
        #[arg(long)]
        mesh_h: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Incompatibility gap between matched isotropic and Markov covariances.
    NonexistenceDemo {
        #[command(subcommand)]
        case: DemoCase,
        /// Number of grid points in h.
        #[arg(long, global = true, default_value_t = GAP_GRID_POINTS)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Geodesic,
    Resistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Exponential,
    Circle,
}

#[derive(Debug, Clone, Subcommand)]
pub enum DemoCase {
    /// Two cycles of lengths L1 != L2 joined at a vertex.
    TwoCycles {
        l1: f64,
        l2: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
    /// A cycle of length L with a pendant edge of length LE.
    CyclePlusEdge {
        cycle: f64,
        edge: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa1: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa2: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
}

/// Optional JSON run configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<GraphSpec>,
    pub graph_path: Option<PathBuf>,
    pub kappa: Option<f64>,
    pub a: Option<f64>,
    pub tau: Option<f64>,
    pub alpha: Option<f64>,
    pub edges: Option<Vec<EdgeParams>>,
    pub mesh_h: Option<f64>,
    pub seed: Option<u64>,
}

const DEFAULT_MESH_H: f64 = 0.1;
const DEFAULT_SPECTRAL_H: f64 = 0.01;

fn load_config(args: &GraphArgs) -> Result<RunConfig> {
    match &args.config {
        None => Ok(RunConfig::default()),
        Some(path) => {
            let mut config: RunConfig = serde_json::from_str(&fs::read_to_string(path)?)?;
            // Relative graph paths are resolved against the config's directory.
            if let (Some(gp), Some(dir)) = (&config.graph_path, path.parent()) {
                if gp.is_relative() {
                    config.graph_path = Some(dir.join(gp));
                }
            }
            Ok(config)
        }
    }
}

fn load_graph(args: &GraphArgs, config: &RunConfig) -> Result<MetricGraph> {
    let flags = [
        ("interval", &args.interval),
        ("circle", &args.circle),
        ("star", &args.star),
        ("figure-eight", &args.figure_eight),
        ("tadpole", &args.tadpole),
    ];
    if let Some(path) = &args.graph {
        return MetricGraph::from_json(&fs::read_to_string(path)?);
    }
    if let Some((kind, Some(value))) = flags.iter().find(|(_, v)| v.is_some()) {
        let kind: Canonical = format!("{kind}:{value}").parse()?;
        return canonical(&kind);
    }
    if let Some(path) = &config.graph_path {
        return MetricGraph::from_json(&fs::read_to_string(path)?);
    }
    if let Some(spec) = &config.graph {
        return build_graph(spec);
    }
    Err(Error::InvalidParameter(
        "no graph given: use --graph, a canonical flag, or a config with a graph".into(),
    ))
}

fn load_model(g: &MetricGraph, args: &ModelArgs, config: &RunConfig) -> Result<FieldModel> {
    let kappa = args.kappa.or(config.kappa).unwrap_or(1.0);
    let a = args.a.or(config.a).unwrap_or(1.0);
    let tau = args.tau.or(config.tau).unwrap_or(1.0);
    let alpha = args.alpha.or(config.alpha).unwrap_or(1.0);
    let mut edges = match &config.edges {
        Some(list) => list.clone(),
        None => vec![EdgeParams { kappa, a }; g.edge_count()],
    };
    if args.kappa.is_some() || args.a.is_some() {
        edges = vec![EdgeParams { kappa, a }; g.edge_count()];
    }
    if let Some(path) = &args.edge_params {
        let mut reader = csv::Reader::from_path(path)?;
        for row in reader.deserialize() {
            let (id, kappa, a): (String, f64, f64) = row?;
            let index = g.edge_index(&id)?;
            edges[index] = EdgeParams { kappa, a };
        }
    }
    FieldModel::new(edges, tau, alpha)
}

fn read_points(g: &MetricGraph, path: &Path) -> Result<Vec<PointOnGraph>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for row in reader.deserialize() {
        let (id, t): (String, f64) = row?;
        points.push(g.point_by_id(&id, t)?);
    }
    Ok(points)
}

fn points_or_mesh(g: &MetricGraph, points: &Option<PathBuf>, h: Option<f64>) -> Result<Vec<PointOnGraph>> {
    match points {
        Some(path) => read_points(g, path),
        None => crate::graph::mesh(g, h.unwrap_or(DEFAULT_MESH_H)),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn sink(output: &OutputArgs) -> Result<Box<dyn Write>> {
    Ok(match &output.out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

fn write_rows(out: &mut dyn Write, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn matrix_header(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn write_matrix(out: &mut dyn Write, m: &DMatrix<f64>) -> Result<()> {
    write_rows(
        out,
        &matrix_header(m.ncols()),
        m.row_iter().map(|r| r.iter().map(|&x| fmt(x)).collect()),
    )
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

fn points_json(g: &MetricGraph, pts: &[PointOnGraph]) -> serde_json::Value {
    pts.iter()
        .map(|p| json!({"edge_id": g.edge(p.edge).id, "t": p.t}))
        .collect()
}

fn write_cov(
    out: &mut dyn Write,
    format: Format,
    g: &MetricGraph,
    cov: &CovMatrix,
    extra: serde_json::Value,
) -> Result<()> {
    match format {
        Format::Csv => write_matrix(out, &cov.matrix),
        Format::Json => {
            let rows: Vec<Vec<f64>> = cov.matrix.row_iter().map(|r| r.iter().copied().collect()).collect();
            write_json(
                out,
                &json!({
                    "provenance": cov.provenance,
                    "points": points_json(g, &cov.points),
                    "matrix": rows,
                    "psd": cov.psd_report(),
                    "info": extra,
                }),
            )
        }
    }
}

fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        for field in record.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{field}` in {}", path.display())))?,
            );
        }
        rows += 1;
    }
    if rows * rows != values.len() {
        return Err(Error::Parse(format!("{} is not a square matrix", path.display())));
    }
    Ok(DMatrix::from_row_slice(rows, rows, &values))
}

fn run_demo(case: &DemoCase, grid: usize, output: &OutputArgs) -> Result<()> {
    let case = match *case {
        DemoCase::TwoCycles { l1, l2, kappa, tau } => GapCase::TwoCycles { l1, l2, kappa, tau },
        DemoCase::CyclePlusEdge {
            cycle,
            edge,
            kappa1,
            kappa2,
            sigma,
            tau,
        } => GapCase::CyclePlusEdge {
            cycle,
            edge,
            kappa1,
            kappa2,
            sigma,
            tau,
        },
    };
    let report = nonexistence_gap(case, grid)?;
    let mut out = sink(output)?;
    match output.format {
        Format::Csv => {
            write_rows(
                &mut *out,
                &["h", "lhs", "rhs", "gap"].map(String::from),
                report.rows.iter().map(|r| vec![fmt(r.h), fmt(r.lhs), fmt(r.rhs), fmt(r.gap)]),
            )?;
            eprintln!("max gap {} at h = {}", fmt(report.max_gap), fmt(report.argmax_h));
        }
        Format::Json => write_json(&mut *out, &json!({"case": case, "report": report}))?,
    }
    Ok(())
}

/// Execute a parsed command.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { graph, output } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let class = classify(&g);
            let mut out = sink(&output)?;
            match output.format {
                Format::Json => write_json(
                    &mut *out,
                    &json!({
                        "vertices": g.vertex_count(),
                        "edges": g.edge_count(),
                        "total_length": g.total_length(),
                        "cycle_rank": g.cycle_rank(),
                        "class": class,
                    }),
                )?,
                Format::Csv => write_rows(
                    &mut *out,
                    &["key", "value"].map(String::from),
                    [
                        ("vertices", g.vertex_count().to_string()),
                        ("edges", g.edge_count().to_string()),
                        ("total_length", fmt(g.total_length())),
                        ("cycle_rank", g.cycle_rank().to_string()),
                        ("euclidean_edges", class.euclidean_edges.to_string()),
                        ("tree", class.tree.to_string()),
                        ("euclidean_cycle", class.euclidean_cycle.to_string()),
                        ("has_loops", class.has_loops.to_string()),
                        ("has_multi_edges", class.has_multi_edges.to_string()),
                    ]
                    .into_iter()
                    .map(|(k, v)| vec![k.to_string(), v]),
                )?,
            }
            Ok(())
        }
        Command::Cov {
            graph,
            model,
            points,
            mesh_h,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let m = load_model(&g, &model, &config)?;
            let pts = points_or_mesh(&g, &points, mesh_h.or(config.mesh_h))?;
            let cov = ExactField::new(&g, &m)?.covariance(&pts)?;
            write_cov(&mut *sink(&output)?, output.format, &g, &cov, json!({}))
        }
        Command::Sample {
            graph,
            model,
            points,
            mesh_h,
            n,
            seed,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let m = load_model(&g, &model, &config)?;
            let pts = points_or_mesh(&g, &points, mesh_h.or(config.mesh_h))?;
            let seed = seed.or(config.seed).unwrap_or(0);
            let cov = ExactField::new(&g, &m)?.covariance(&pts)?;
            let draws = sample_gaussian(&cov.matrix, n, seed)?;
            let mut out = sink(&output)?;
            match output.format {
                Format::Csv => write_matrix(&mut *out, &draws),
                Format::Json => {
                    let rows: Vec<Vec<f64>> = draws.row_iter().map(|r| r.iter().copied().collect()).collect();
                    write_json(&mut *out, &json!({"seed": seed, "points": points_json(&g, &pts), "samples": rows}))
                }
            }
        }
        Command::SpectralCov {
            graph,
            model,
            points,
            mesh_h,
            k,
            eigenvalues,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let m = load_model(&g, &model, &config)?;
            let h = mesh_h.or(config.mesh_h).unwrap_or(DEFAULT_SPECTRAL_H);
            let op = assemble(&g, &m, h)?;
            let pts = match &points {
                Some(path) => read_points(&g, path)?,
                None => op.mesh.nodes.clone(),
            };
            let result = spectral_cov(&op, &g, m.alpha(), m.tau(), &pts, k)?;
            if let Some(path) = eigenvalues {
                let mut file = io::BufWriter::new(fs::File::create(path)?);
                write_rows(
                    &mut file,
                    &["k", "lambda"].map(String::from),
                    op.eigenvalues
                        .iter()
                        .enumerate()
                        .map(|(i, &l)| vec![(i + 1).to_string(), fmt(l)]),
                )?;
            }
            if output.format == Format::Csv {
                eprintln!(
                    "truncation {} of {} eigenpairs, tail estimate {}",
                    result.truncation,
                    op.eigenpair_count(),
                    fmt(result.tail_estimate)
                );
            }
            write_cov(
                &mut *sink(&output)?,
                output.format,
                &g,
                &result.cov,
                json!({"mesh_h": h, "truncation": result.truncation, "tail_estimate": result.tail_estimate}),
            )
        }
        Command::Resistance {
            graph,
            pairs,
            root,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let rs = resistance_structure(&g, root)?;
            let mut reader = csv::Reader::from_path(&pairs)?;
            let mut rows = Vec::new();
            for row in reader.deserialize() {
                let (ep, tp, eq, tq): (String, f64, String, f64) = row?;
                let p = g.point_by_id(&ep, tp)?;
                let q = g.point_by_id(&eq, tq)?;
                let d = geodesic_distance(&g, p, q);
                let r = rs.distance(&g, p, q)?;
                rows.push((ep, p.t, eq, q.t, d, r));
            }
            let mut out = sink(&output)?;
            match output.format {
                Format::Csv => write_rows(
                    &mut *out,
                    &["edge_p", "t_p", "edge_q", "t_q", "d_geo", "d_res"].map(String::from),
                    rows.into_iter()
                        .map(|(ep, tp, eq, tq, d, r)| vec![ep, fmt(tp), eq, fmt(tq), fmt(d), fmt(r)]),
                ),
                Format::Json => write_json(
                    &mut *out,
                    &rows
                        .into_iter()
                        .map(|(ep, tp, eq, tq, d, r)| {
                            json!({"edge_p": ep, "t_p": tp, "edge_q": eq, "t_q": tq, "d_geo": d, "d_res": r})
                        })
                        .collect(),
                ),
            }
        }
        Command::IsoCov {
            graph,
            points,
            mesh_h,
            metric,
            kernel,
            sigma2,
            kappa,
            tau,
            length,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let pts = points_or_mesh(&g, &points, mesh_h.or(config.mesh_h))?;
            let model = IsotropicModel {
                metric: match metric {
                    MetricArg::Geodesic => Metric::Geodesic,
                    MetricArg::Resistance => Metric::Resistance,
                },
                kernel: match kernel {
                    KernelArg::Exponential => Kernel::Exponential { sigma2, kappa },
                    KernelArg::Circle => Kernel::CircleMarkov {
                        kappa,
                        tau,
                        length: length.unwrap_or_else(|| g.total_length()),
                    },
                },
            };
            let (cov, report) = iso_cov_matrix(&g, model, &pts)?;
            if output.format == Format::Csv {
                eprintln!(
                    "min eigenvalue {} (trace {}, psd {})",
                    fmt(report.min_eigenvalue),
                    fmt(report.trace),
                    report.psd
                );
            }
            write_cov(&mut *sink(&output)?, output.format, &g, &cov, json!({"model": model}))
        }
        Command::MarkovCheck { cov, a, b, s, output } => {
            let matrix = read_matrix(&cov)?;
            let n = matrix.nrows();
            let c = CovMatrix::new(vec![PointOnGraph::new(0, 0.0); n], matrix, Provenance::Exact);
            let value = markov_check(&c, &a, &b, &s)?;
            let mut out = sink(&output)?;
            match output.format {
                Format::Csv => write_rows(
                    &mut *out,
                    &["max_conditional_cov".to_string()],
                    std::iter::once(vec![fmt(value)]),
                ),
                Format::Json => write_json(&mut *out, &json!({"max_conditional_cov": value})),
            }
        }
        Command::Krige {
            graph,
            model,
            obs,
            pred,
            noise,
            spectral,
            mesh_h,
            output,
        } => {
            let config = load_config(&graph)?;
            let g = load_graph(&graph, &config)?;
            let m = load_model(&g, &model, &config)?;
            let mut reader = csv::Reader::from_path(&obs)?;
            let mut obs_pts = Vec::new();
            let mut y = Vec::new();
            for row in reader.deserialize() {
                let (id, t, value): (String, f64, f64) = row?;
                obs_pts.push(g.point_by_id(&id, t)?);
                y.push(value);
            }
            let pred_pts = read_points(&g, &pred)?;
            let result = if m.alpha() == 1.0 && !spectral {
                krige(&ExactField::new(&g, &m)?, &obs_pts, &y, noise, &pred_pts)?
            } else {
                let h = mesh_h.or(config.mesh_h).unwrap_or(DEFAULT_SPECTRAL_H);
                let op = assemble(&g, &m, h)?;
                let field = SpectralField::new(&g, &op, m.alpha(), m.tau(), None)?;
                krige(&field, &obs_pts, &y, noise, &pred_pts)?
            };
            if result.jitter > 0.0 {
                eprintln!("added jitter {} to the observation covariance", fmt(result.jitter));
            }
            let mut out = sink(&output)?;
            let var = result.variance();
            match output.format {
                Format::Csv => write_rows(
                    &mut *out,
                    &["edge", "t", "mean", "var"].map(String::from),
                    result.pred_points.iter().enumerate().map(|(i, p)| {
                        vec![g.edge(p.edge).id.clone(), fmt(p.t), fmt(result.mean[i]), fmt(var[i])]
                    }),
                ),
                Format::Json => write_json(
                    &mut *out,
                    &json!({
                        "points": points_json(&g, &result.pred_points),
                        "mean": result.mean.as_slice(),
                        "var": var.as_slice(),
                        "loglik": result.loglik,
                        "jitter": result.jitter,
                    }),
                ),
            }
        }
        Command::NonexistenceDemo { case, grid, output } => run_demo(&case, grid, &output),
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERICAL
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::psd_report;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::EmptyGraph), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::Singular("x".into())), EXIT_NUMERICAL);
    }

    #[test]
    fn psd_report_is_serializable() {
        let r = psd_report(&DMatrix::identity(2, 2));
        assert!(serde_json::to_string(&r).unwrap().contains("min_eigenvalue"));
    }
}
