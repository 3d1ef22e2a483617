//! Command-line front end. Every subcommand renders JSON, and the tabular
//! ones also render CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cheeger::{box_ratio_sweep, quotient_end_report, Lattice};
use crate::error::{Error, Result};
use crate::geodesic::{cylinder_ratio, geodesic_ball, BallMesh};
use crate::invariant::{cheeger_report, leaf_shape, model_curvature};
use crate::jacobi::{
    cmc_continue, jacobi_potential, kernel_basis_seeded, JacobiOperator, PeriodicFactor, TorusGrid,
    KERNEL_TOL,
};
use crate::models::{Matrix2, MetricModel, MetricSpec, Point, SemidirectModel};
use crate::surface::{divergence_balance, surface_geometry, Cuboid, ImmersionGrid, VectorField};

/// Environment variable capping the worker threads; `0` means automatic.
pub const THREADS_ENV: &str = "HOMOG3_THREADS";

#[derive(Parser, Debug, Clone)]
#[command(name = "homog3", version, about = "Geometry of homogeneous 3-manifolds as metric Lie groups")]
pub struct RunConfig {
    /// Metric as a JSON literal or a path to a JSON file.
    #[arg(long, global = true)]
    pub metric: Option<String>,

    /// Shorthand for a semidirect metric with A = [[a, b], [c, d]].
    #[arg(long = "A", global = true, value_name = "a,b,c,d", allow_hyphen_values = true)]
    pub a: Option<String>,

    /// Seed for randomized start vectors.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Cheeger constant, critical mean curvature and Ricci spectrum.
    Describe,
    /// Ricci tensor, its eigenvalues, scalar and frame sectional curvatures.
    Curvature,
    /// Shape of the leaf at height z, closed form and finite differences.
    Leaf(LeafArgs),
    /// Geodesic ball at the identity.
    Ball(BallArgs),
    /// Divergence theorem balance over a coordinate box.
    Divergence(DivergenceArgs),
    /// Isoperimetric ratios of the boxes B(n, t0).
    CheegerBox(CheegerBoxArgs),
    /// Volume of the end of the quotient above height T.
    QuotientEnd(QuotientEndArgs),
    /// Kernel of the Jacobi operator of a quotient torus.
    Jacobi(JacobiArgs),
    /// Newton continuation of a CMC torus under a conformal perturbation.
    ContinueCmc(ContinueArgs),
    /// Area/volume ratio of the slab S^2 x [0, R].
    CylinderRatio(CylinderArgs),
}

#[derive(Args, Debug, Clone)]
pub struct LeafArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub z: f64,
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
}

#[derive(Args, Debug, Clone)]
pub struct BallArgs {
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value = "16x32x12")]
    pub mesh: BallMesh,
}

#[derive(Args, Debug, Clone)]
pub struct DivergenceArgs {
    #[arg(long = "box", value_name = "x0,x1,y0,y1,z0,z1", allow_hyphen_values = true)]
    pub cuboid: Cuboid,
    #[arg(long, default_value = "normal", allow_hyphen_values = true)]
    pub field: VectorField,
    /// Gauss nodes per axis at the coarse level.
    #[arg(long, default_value_t = 8)]
    pub nodes: usize,
}

#[derive(Args, Debug, Clone)]
pub struct CheegerBoxArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
    pub ns: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub t0s: Vec<f64>,
    #[arg(long, default_value = "1,0,0,1", allow_hyphen_values = true)]
    pub lattice: Lattice,
}

#[derive(Args, Debug, Clone)]
pub struct QuotientEndArgs {
    #[arg(long = "T", default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
    #[arg(long, default_value = "1,0,0,1", allow_hyphen_values = true)]
    pub lattice: Lattice,
}

#[derive(Args, Debug, Clone)]
pub struct JacobiArgs {
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value = "1,0,0,1", allow_hyphen_values = true)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = KERNEL_TOL)]
    pub tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct ContinueArgs {
    #[arg(long, default_value_t = 0.01, allow_hyphen_values = true)]
    pub eps: f64,
    #[arg(long, default_value = "cos")]
    pub pert: PeriodicFactor,
    #[arg(long, default_value_t = 32)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value = "1,0,0,1", allow_hyphen_values = true)]
    pub lattice: Lattice,
}

#[derive(Args, Debug, Clone)]
pub struct CylinderArgs {
    #[arg(long = "R")]
    pub r: f64,
}

/// A rendered result.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
}

impl Output {
    fn json<T: Serialize>(v: &T) -> Self {
        Self { json: serde_json::to_value(v).expect("serializable"), csv: None }
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json).expect("valid JSON") + "\n"),
            Format::Csv => self
                .csv
                .clone()
                .ok_or_else(|| Error::InvalidInput("this subcommand has no CSV form".into())),
        }
    }
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

fn parse_matrix(s: &str) -> Result<Matrix2> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidInput(format!("--A needs four numbers a,b,c,d; got {s:?}")))?;
    match v[..] {
        [a, b, c, d] => Ok(Matrix2::new(a, b, c, d)),
        _ => Err(Error::InvalidInput(format!("--A needs four numbers a,b,c,d; got {s:?}"))),
    }
}

impl RunConfig {
    /// The metric selected by `--A` or `--metric`.
    pub fn model(&self) -> Result<MetricModel> {
        match (&self.a, &self.metric) {
            (Some(_), Some(_)) => Err(Error::InvalidInput("give either --A or --metric, not both".into())),
            (Some(a), None) => Ok(MetricModel::Semidirect(SemidirectModel::new(parse_matrix(a)?)?)),
            (None, Some(m)) => {
                let text = if m.trim_start().starts_with('{') {
                    m.clone()
                } else {
                    std::fs::read_to_string(m)
                        .map_err(|e| Error::InvalidInput(format!("cannot read metric file {m:?}: {e}")))?
                };
                MetricModel::from_json(&text)
            }
            (None, None) => Err(Error::InvalidInput("a metric is required (--metric or --A)".into())),
        }
    }
}

/// Runs one subcommand.
pub fn dispatch(config: &RunConfig) -> Result<Output> {
    match &config.command {
        Command::Describe => describe(&config.model()?),
        Command::Curvature => Ok(Output::json(&model_curvature(&config.model()?)?)),
        Command::Leaf(a) => leaf(&config.model()?.semidirect_model()?, a),
        Command::Ball(a) => {
            let m = config.model()?.semidirect_model()?;
            let b = geodesic_ball(&m, Point::ORIGIN, a.r, a.mesh)?;
            let csv = csv_table(
                &["r", "volume", "area", "ratio"],
                [vec![b.r.to_string(), b.volume.to_string(), b.area.to_string(), b.ratio.to_string()]],
            );
            Ok(Output { json: serde_json::to_value(b).expect("serializable"), csv: Some(csv) })
        }
        Command::Divergence(a) => {
            let m = config.model()?.semidirect_model()?;
            Ok(Output::json(&divergence_balance(&m, &a.cuboid, &a.field, a.nodes)?))
        }
        Command::CheegerBox(a) => {
            let m = config.model()?.semidirect_model()?;
            let rows = box_ratio_sweep(m.a, a.lattice, &a.ns, &a.t0s)?;
            let csv = csv_table(
                &["n", "t0", "bottom", "top", "sides", "volume", "ratio", "trace_A"],
                rows.iter().map(|r| {
                    vec![
                        r.n.to_string(),
                        r.t0.to_string(),
                        r.bottom.to_string(),
                        r.top.to_string(),
                        r.sides.to_string(),
                        r.volume.to_string(),
                        r.ratio.to_string(),
                        r.trace_a.to_string(),
                    ]
                }),
            );
            Ok(Output { json: serde_json::to_value(&rows).expect("serializable"), csv: Some(csv) })
        }
        Command::QuotientEnd(a) => {
            let m = config.model()?.semidirect_model()?;
            Ok(Output::json(&quotient_end_report(m.a, a.lattice, a.t)?))
        }
        Command::Jacobi(a) => {
            let m = config.model()?.semidirect_model()?;
            let grid = TorusGrid::new(m.a, a.lattice, 0.0, a.grid, a.grid)?;
            let k = kernel_basis_seeded(&JacobiOperator::leaf(&grid), a.tol, config.seed)?;
            if k.multiplicity_warning {
                eprintln!("warning: {} near-kernel eigenvalues found", k.dimension());
            }
            Ok(Output::json(&json!({
                "grid": a.grid,
                "potential": jacobi_potential(&m.a),
                "kernel_dimension": k.dimension(),
                "kernel_mean": k.means.first(),
                "kernel_eigenvalues": k.eigenvalues,
                "second_eigenvalue": k.next_eigenvalue,
                "unstable_eigenvalues": k.unstable,
                "operator_norm": k.operator_norm,
                "multiplicity_warning": k.multiplicity_warning,
            })))
        }
        Command::ContinueCmc(a) => {
            let m = config.model()?.semidirect_model()?;
            let s = cmc_continue(m.a, a.lattice, a.pert, a.eps, a.grid, a.tol)?;
            let csv = csv_table(
                &["step", "residual", "c", "constraint"],
                s.history.iter().map(|h| {
                    vec![h.step.to_string(), h.residual.to_string(), h.c.to_string(), h.constraint.to_string()]
                }),
            );
            Ok(Output { json: serde_json::to_value(&s).expect("serializable"), csv: Some(csv) })
        }
        Command::CylinderRatio(a) => match config.model()? {
            MetricModel::S2xR(p) => {
                let ratio = cylinder_ratio(&p, a.r)?;
                let csv = csv_table(&["R", "ratio"], [vec![a.r.to_string(), ratio.to_string()]]);
                Ok(Output { json: json!({ "R": a.r, "kappa": p.kappa, "ratio": ratio }), csv: Some(csv) })
            }
            _ => Err(Error::Unsupported("cylinder-ratio needs an s2xr metric".into())),
        },
    }
}

fn describe(model: &MetricModel) -> Result<Output> {
    let curvature = model_curvature(model)?;
    let mut out = json!({
        "metric": MetricSpec::from(model),
        "ricci_eigenvalues": curvature.ricci_eigenvalues,
        "scalar_curvature": curvature.scalar,
    });
    let obj = out.as_object_mut().expect("object");
    match cheeger_report(model) {
        Ok(r) => {
            obj.insert("Ch".into(), json!(r.cheeger));
            obj.insert("Hcrit".into(), json!(r.critical_mean_curvature));
            obj.insert("unimodular".into(), json!(r.unimodular));
        }
        Err(Error::Unsupported(why)) => {
            let ch = matches!(model, MetricModel::S2xR(_)).then_some(0.0);
            obj.insert("Ch".into(), json!(ch));
            obj.insert("Hcrit".into(), Value::Null);
            obj.insert("unimodular".into(), Value::Null);
            obj.insert("note".into(), json!(why));
        }
        Err(e) => return Err(e),
    }
    Ok(Output { json: out, csv: None })
}

fn leaf(m: &SemidirectModel, a: &LeafArgs) -> Result<Output> {
    let shape = leaf_shape(&m.a);
    let mesh = surface_geometry(m, &ImmersionGrid::horizontal_leaf(a.z, a.grid))?;
    let worst_sigma = (0..mesh.points.len())
        .map(|k| (mesh.sigma_norm_squared(k) - shape.norm_squared).abs())
        .fold(0.0, f64::max);
    Ok(Output::json(&json!({
        "z": a.z,
        "sigma": shape.sigma,
        "mean_curvature": shape.mean_curvature,
        "norm_squared": shape.norm_squared,
        "jacobi_potential": jacobi_potential(&m.a),
        "numerical": {
            "grid": a.grid,
            "max_mean_curvature_error": mesh.max_mean_curvature_error(shape.mean_curvature),
            "max_norm_squared_error": worst_sigma,
            "area": mesh.total_area(),
        },
    })))
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Exit status for an error: 1 for invalid input, 2 for numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_validation() {
        1
    } else {
        2
    }
}

/// Parses arguments, runs, writes the result and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads()
        .and_then(|_| dispatch(&config))
        .and_then(|o| o.render(config.format))
        .and_then(|text| write_output(config.out.as_ref(), &text));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidInput(format!("cannot write output: {e}"));
    match path {
        Some(p) => std::fs::write(p, text).map_err(io),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(args: &[&str]) -> RunConfig {
        RunConfig::try_parse_from(std::iter::once("homog3").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn curvature_of_sl2() {
        let c = config(&["curvature", "--metric", r#"{"type":"sl2tilde","lambda":[1,1,1]}"#]);
        let out = dispatch(&c).unwrap();
        let eig: Vec<f64> = serde_json::from_value(out.json["ricci_eigenvalues"].clone()).unwrap();
        for (e, w) in eig.iter().zip([-6.0, -6.0, 2.0]) {
            assert!((e - w).abs() < 1e-12);
        }
    }

    #[test]
    fn describe_hyperbolic_space() {
        let c = config(&["describe", "--metric", r#"{"type":"semidirect","A":[[1,0],[0,1]]}"#]);
        let out = dispatch(&c).unwrap().json;
        assert_eq!(out["Ch"], json!(2.0));
        assert_eq!(out["Hcrit"], json!(1.0));
        assert_eq!(out["unimodular"], json!(false));
    }

    #[test]
    fn cylinder_ratio_subcommand() {
        let c = config(&["cylinder-ratio", "--R", "2", "--metric", r#"{"type":"s2xr","kappa":1}"#]);
        assert_eq!(dispatch(&c).unwrap().json["ratio"], json!(1.0));
        let c = config(&["cylinder-ratio", "--R", "2", "--A", "1,0,0,1"]);
        assert!(matches!(dispatch(&c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn negative_matrix_entries_parse() {
        let c = config(&["quotient-end", "--A", "-1,0,0,3", "--T", "-0.5"]);
        let out = dispatch(&c).unwrap().json;
        assert!(out["residual"].as_f64().unwrap() < 1e-12);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["homog3", "describe", "--A", "1,0,0"]), 1);
        assert_eq!(run(["homog3", "quotient-end", "--A", "1,0,0,-1"]), 2);
        assert_eq!(exit_code(&Error::NoConvergence { steps: 25, residual: 1.0 }), 2);
    }

    #[test]
    fn csv_only_where_tabular() {
        let c = config(&["cheeger-box", "--A", "1,0,0,1", "--ns", "2,4", "--t0s", "1", "--format", "csv"]);
        let text = dispatch(&c).unwrap().render(Format::Csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,t0,bottom,top,sides,volume,ratio,trace_A"));
        assert_eq!(lines.count(), 2);
        let c = config(&["curvature", "--A", "1,0,0,1"]);
        assert!(dispatch(&c).unwrap().render(Format::Csv).is_err());
    }
}
